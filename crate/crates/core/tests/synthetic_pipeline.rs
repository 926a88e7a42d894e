use std::f64::consts::PI;

use chosvd_core::cohort::{Horizon, Preprocess};
use chosvd_core::features::{fisher_scores, phase_features, FeatureOptions, FisherVariant, Rotation};
use chosvd_core::hosvd::{hosvd, HosvdOptions};
use chosvd_core::pipeline::{evaluate_group, GroupData, GroupOutcome, PipelineOptions};
use chosvd_core::synth::{synth_cohort, SynthCohort, SynthSpec};

fn raw() -> Preprocess {
    Preprocess { standardize: false, ..Preprocess::default() }
}

fn noiseless(offsets: [f64; 2], jitter: f64) -> SynthCohort {
    let spec = SynthSpec { phase_offsets: offsets, phase_jitter: jitter, noise: 0.0, seed: 21, ..SynthSpec::default() };
    synth_cohort(&spec, &raw()).unwrap()
}

fn designated_fisher(c: &SynthCohort) -> f64 {
    let f = hosvd(&c.tensor, &HosvdOptions::default()).unwrap();
    let opts = FeatureOptions { rotation: Rotation::Conjugate, ..FeatureOptions::default() };
    let feats = phase_features(&c.tensor, &f, &opts).unwrap();
    let j = feats.feature_index.iter().position(|&ab| ab == (1, 1)).unwrap();
    fisher_scores(&feats.phases, &c.labels, FisherVariant::Linear).unwrap()[j]
}

#[test]
fn noiseless_separated_cohort_is_classified_perfectly() {
    let c = noiseless([0.0, PI], 0.1);
    let opts = PipelineOptions::new(3).with_rotation(Rotation::Conjugate);
    let f = hosvd(&c.tensor, &opts.hosvd).unwrap();
    let ids: Vec<String> = (0..c.labels.len()).map(|p| format!("s{p}")).collect();
    let labels: Vec<Option<bool>> = c.labels.iter().map(|&l| Some(l)).collect();
    let data = GroupData { name: "synthetic", horizon: Horizon::Day30, tensor: &c.tensor, ids: &ids, labels: &labels };
    let GroupOutcome::Evaluated(r) = evaluate_group(&data, &f, &opts).unwrap() else {
        panic!("group skipped");
    };
    assert_eq!(r.auc, 1.0);
    assert_eq!(r.metrics.tpr, Some(1.0));
    assert_eq!(r.metrics.tnr, Some(1.0));
}

#[test]
fn no_class_difference_gives_no_fisher_signal() {
    let null = designated_fisher(&noiseless([0.0, 0.0], 0.0));
    let separated = designated_fisher(&noiseless([0.0, PI], 0.0));
    // Sampling noise in the class means keeps the null score off exact zero.
    assert!(null < 0.1 && null < 1e-3 * separated, "null {null}, separated {separated}");
}

#[test]
fn same_seed_gives_bitwise_identical_tensors() {
    let spec = SynthSpec { seed: 5, ..SynthSpec::default() };
    let a = synth_cohort(&spec, &Preprocess::default()).unwrap();
    let b = synth_cohort(&spec, &Preprocess::default()).unwrap();
    let bits = |c: &SynthCohort| c.tensor.as_slice().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}
