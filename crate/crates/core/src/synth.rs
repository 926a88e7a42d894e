//! Synthetic two-class cohorts with planted low-rank complex structure.
//!
//! Each subject's `channels x time` response is a weighted sum of planted
//! rank-one patterns `a_r b_r^T`:
//!
//! * component 0 is shared by every subject up to a per-subject nuisance
//!   phase `theta_p`;
//! * the designated component additionally carries a class phase offset
//!   (`phase_offsets[class]` plus Gaussian jitter);
//! * any further components get independent uniformly random phases.
//!
//! Temporal patterns are analytic (one-sided spectrum, no DC or Nyquist
//! bin), so taking the real part as the "recording" and complexifying it
//! again recovers the planted complex signal when standardisation is off.
//! Complex Gaussian noise is added at a fixed relative Frobenius level
//! before the real part is taken.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;

use crate::cohort::{complexify_subject, Preprocess};
use crate::linalg::orthonormalize_columns;
use crate::rng;
use crate::signal::idft;
use crate::{ComplexMatrix, ComplexTensor3, Error, RealMatrix, Result, C64};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SynthSpec {
    /// `(channels, samples, subjects)`.
    pub dims: [usize; 3],
    /// Planted multivariate and temporal ranks.
    pub planted_ranks: [usize; 2],
    /// Class phase offsets in radians, `[class 0, class 1]`.
    pub phase_offsets: [f64; 2],
    /// Standard deviation of the per-subject jitter around the class offset.
    pub phase_jitter: f64,
    /// Half-width of the uniform nuisance phase shared by a subject's components.
    pub nuisance_spread: f64,
    /// Relative amplitude jitter per subject and component.
    pub amplitude_jitter: f64,
    /// Noise Frobenius norm relative to the clean signal.
    pub noise: f64,
    /// Fraction of subjects in class 1.
    pub class1_fraction: f64,
    /// Component carrying the class phase.
    pub designated: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            dims: [8, 75, 60],
            planted_ranks: [3, 4],
            phase_offsets: [0.0, PI],
            phase_jitter: 0.1,
            nuisance_spread: PI,
            amplitude_jitter: 0.1,
            noise: 0.2,
            class1_fraction: 0.5,
            designated: 1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn components(&self) -> usize {
        self.planted_ranks[0].max(self.planted_ranks[1])
    }

    /// Strictly positive, non-Nyquist frequency bins available for `samples`.
    pub fn max_temporal_rank(samples: usize) -> usize {
        samples.saturating_sub(1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        let [i1, i2, i3] = self.dims;
        let [r1, r2] = self.planted_ranks;
        if i1 == 0 || i2 < crate::signal::MIN_SERIES_LEN || i3 < 2 {
            return Err(Error::invalid(
                "synthetic cohort needs at least one channel, four samples and two subjects",
            ));
        }
        if r1 == 0 || r1 > i1 {
            return Err(Error::invalid(alloc::format!("planted multivariate rank {r1} outside 1..={i1}")));
        }
        let max_t = Self::max_temporal_rank(i2);
        if r2 == 0 || r2 > max_t {
            return Err(Error::invalid(alloc::format!(
                "planted temporal rank {r2} outside 1..={max_t} for {i2} samples"
            )));
        }
        if self.designated >= self.components() {
            return Err(Error::invalid("designated component is not planted"));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::invalid("noise level must be finite and nonnegative"));
        }
        if !(self.class1_fraction > 0.0 && self.class1_fraction < 1.0) {
            return Err(Error::invalid("class fraction must lie strictly between 0 and 1"));
        }
        let finite = [self.phase_jitter, self.nuisance_spread, self.amplitude_jitter]
            .iter()
            .chain(&self.phase_offsets)
            .all(|v| v.is_finite());
        if !finite || self.phase_jitter < 0.0 || self.amplitude_jitter < 0.0 {
            return Err(Error::invalid("phase and amplitude parameters must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Number of class-1 subjects.
    pub fn class1_count(&self) -> usize {
        let n = self.dims[2];
        let raw = libm::round(self.class1_fraction * n as f64) as usize;
        raw.clamp(1, n - 1)
    }
}

/// Ground truth behind a synthetic cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTruth {
    /// `I1 x R1` orthonormal multivariate patterns.
    pub multivariate: ComplexMatrix,
    /// `I2 x R2` orthonormal analytic temporal patterns.
    pub temporal: ComplexMatrix,
    /// `subjects x components` weights.
    pub subject_weights: ComplexMatrix,
    pub nuisance_phases: Vec<f64>,
    /// `(multivariate column, temporal column)` used by each component.
    pub component_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub spec: SynthSpec,
    /// Real recordings, one `channels x samples` matrix per subject.
    pub recordings: Vec<RealMatrix>,
    /// `true` for class 1.
    pub labels: Vec<bool>,
    /// The recordings complexified with the given preprocessing.
    pub tensor: ComplexTensor3,
    pub truth: PlantedTruth,
}

fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng::normal(rng), rng::normal(rng)) * core::f64::consts::FRAC_1_SQRT_2
}

fn unit(theta: f64) -> C64 {
    C64::new(libm::cos(theta), libm::sin(theta))
}

fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Result<ComplexMatrix> {
    let m = ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng));
    orthonormalize_columns(&m)
}

/// Orthonormal vectors whose spectra live on strictly positive, non-Nyquist bins.
fn random_analytic(samples: usize, cols: usize, rng: &mut ChaCha8Rng) -> Result<ComplexMatrix> {
    let max_bin = SynthSpec::max_temporal_rank(samples);
    let mut columns = Vec::with_capacity(cols);
    for _ in 0..cols {
        let mut spectrum = vec![C64::new(0.0, 0.0); samples];
        for bin in spectrum.iter_mut().take(max_bin + 1).skip(1) {
            *bin = complex_normal(rng);
        }
        columns.push(idft(&spectrum));
    }
    orthonormalize_columns(&ComplexMatrix::from_columns(samples, &columns)?)
}

/// Draws a cohort from `spec` and complexifies its recordings with `pre`.
pub fn synth_cohort(spec: &SynthSpec, pre: &Preprocess) -> Result<SynthCohort> {
    spec.validate()?;
    let [i1, i2, i3] = spec.dims;
    let [r1, r2] = spec.planted_ranks;
    let k = spec.components();
    let mut rng = rng::seeded(spec.seed);

    let multivariate = random_orthonormal(i1, r1, &mut rng)?;
    let temporal = random_analytic(i2, r2, &mut rng)?;
    let component_pairs: Vec<(usize, usize)> = (0..k).map(|r| (r % r1, r % r2)).collect();

    let mut labels = vec![false; i3];
    labels[..spec.class1_count()].iter_mut().for_each(|l| *l = true);
    rng::shuffle(&mut rng, &mut labels);

    let mut nuisance = Vec::with_capacity(i3);
    let mut weights = ComplexMatrix::zeros(i3, k);
    for p in 0..i3 {
        let theta = spec.nuisance_spread * (2.0 * rng::unit(&mut rng) - 1.0);
        nuisance.push(theta);
        for r in 0..k {
            let gain = (1.0 + spec.amplitude_jitter * rng::normal(&mut rng)).max(0.1) / (1.0 + r as f64);
            let phase = if r == 0 {
                theta
            } else if r == spec.designated {
                theta + spec.phase_offsets[usize::from(labels[p])] + spec.phase_jitter * rng::normal(&mut rng)
            } else {
                2.0 * PI * rng::unit(&mut rng)
            };
            weights[(p, r)] = unit(phase) * gain;
        }
    }

    let mut clean = ComplexTensor3::zeros([i1, i2, i3]);
    for p in 0..i3 {
        for (r, &(a, b)) in component_pairs.iter().enumerate() {
            let w = weights[(p, r)];
            for j in 0..i2 {
                let wb = w * temporal[(j, b)];
                for i in 0..i1 {
                    let v = clean.get(i, j, p) + wb * multivariate[(i, a)];
                    clean.set(i, j, p, v);
                }
            }
        }
    }

    let noise_scale = if spec.noise > 0.0 {
        let noise: Vec<C64> = (0..i1 * i2 * i3).map(|_| complex_normal(&mut rng)).collect();
        let noise = ComplexTensor3::from_vec([i1, i2, i3], noise)?;
        Some((spec.noise * clean.frobenius_norm() / noise.frobenius_norm(), noise))
    } else {
        None
    };

    let mut recordings = Vec::with_capacity(i3);
    for p in 0..i3 {
        let mut rec = RealMatrix::zeros(i1, i2);
        for i in 0..i1 {
            for j in 0..i2 {
                let mut z = clean.get(i, j, p);
                if let Some((s, noise)) = &noise_scale {
                    z += noise.get(i, j, p) * *s;
                }
                rec[(i, j)] = z.re;
            }
        }
        recordings.push(rec);
    }

    let tensor = complexify_recordings(&recordings, pre)?;
    Ok(SynthCohort {
        spec: spec.clone(),
        recordings,
        labels,
        tensor,
        truth: PlantedTruth {
            multivariate,
            temporal,
            subject_weights: weights,
            nuisance_phases: nuisance,
            component_pairs,
        },
    })
}

/// Complexifies real `channels x samples` recordings into a cohort tensor.
pub fn complexify_recordings(recordings: &[RealMatrix], pre: &Preprocess) -> Result<ComplexTensor3> {
    let mut slices = Vec::with_capacity(recordings.len());
    for (p, rec) in recordings.iter().enumerate() {
        let names: Vec<alloc::string::String> = (0..rec.rows()).map(|c| alloc::format!("channel {c}")).collect();
        let channels: Vec<Vec<Option<f64>>> = (0..rec.rows())
            .map(|c| rec.row(c).iter().map(|&v| Some(v)).collect())
            .collect();
        slices.push(complexify_subject(&alloc::format!("synthetic {p}"), &names, &channels, pre)?);
    }
    ComplexTensor3::from_slices(&slices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hosvd::{hosvd, HosvdOptions, RankSpec};
    use crate::linalg::complex_svd;

    fn raw() -> Preprocess {
        Preprocess {
            standardize: false,
            ..Preprocess::default()
        }
    }

    /// Cosines of the principal angles between two orthonormal bases.
    fn principal_cosines(a: &ComplexMatrix, b: &ComplexMatrix) -> Vec<f64> {
        complex_svd(&a.adjoint_matmul(b).unwrap()).unwrap().s
    }

    #[test]
    fn seed_determinism() {
        let spec = SynthSpec {
            dims: [4, 20, 10],
            planted_ranks: [2, 3],
            seed: 5,
            ..SynthSpec::default()
        };
        let a = synth_cohort(&spec, &Preprocess::default()).unwrap();
        let b = synth_cohort(&spec, &Preprocess::default()).unwrap();
        assert_eq!(a.tensor, b.tensor);
        assert_eq!(a.labels, b.labels);
        let c = synth_cohort(&SynthSpec { seed: 6, ..spec }, &Preprocess::default()).unwrap();
        assert_ne!(a.tensor, c.tensor);
    }

    #[test]
    fn class_counts_follow_fraction() {
        let spec = SynthSpec {
            dims: [3, 16, 25],
            planted_ranks: [2, 2],
            class1_fraction: 0.3,
            ..SynthSpec::default()
        };
        let c = synth_cohort(&spec, &raw()).unwrap();
        let ones = c.labels.iter().filter(|&&l| l).count();
        assert!((ones as f64 - 7.5).abs() <= 1.0);
    }

    #[test]
    fn noiseless_recordings_complexify_back_to_the_planted_signal() {
        let spec = SynthSpec {
            dims: [5, 30, 6],
            planted_ranks: [3, 4],
            noise: 0.0,
            ..SynthSpec::default()
        };
        let c = synth_cohort(&spec, &raw()).unwrap();
        // The complexified tensor is exactly the planted model.
        let t = &c.truth;
        for p in 0..6 {
            for i in 0..5 {
                for j in 0..30 {
                    let want: C64 = t
                        .component_pairs
                        .iter()
                        .enumerate()
                        .map(|(r, &(a, b))| t.subject_weights[(p, r)] * t.multivariate[(i, a)] * t.temporal[(j, b)])
                        .sum();
                    assert!((c.tensor.get(i, j, p) - want).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn noiseless_hosvd_recovers_planted_multivariate_span() {
        let spec = SynthSpec {
            dims: [8, 75, 30],
            planted_ranks: [3, 4],
            noise: 0.0,
            seed: 17,
            ..SynthSpec::default()
        };
        let c = synth_cohort(&spec, &raw()).unwrap();
        let f = hosvd(&c.tensor, &HosvdOptions::with_ranks([RankSpec::Fixed(3), RankSpec::Fixed(4), RankSpec::Full])).unwrap();
        for cos in principal_cosines(&f.factors[0], &c.truth.multivariate) {
            // cos(1e-6) = 1 - 5e-13
            assert!(cos >= libm::cos(1e-6), "principal cosine {cos}");
        }
        for cos in principal_cosines(&f.factors[1], &c.truth.temporal) {
            assert!(cos >= libm::cos(1e-6));
        }
    }

    #[test]
    fn invalid_specs() {
        let base = SynthSpec::default();
        for bad in [
            SynthSpec { noise: -1.0, ..base.clone() },
            SynthSpec { class1_fraction: 1.0, ..base.clone() },
            SynthSpec { planted_ranks: [9, 2], ..base.clone() },
            SynthSpec { planted_ranks: [2, 38], ..base.clone() },
            SynthSpec { designated: 4, ..base.clone() },
            SynthSpec { dims: [8, 75, 1], ..base.clone() },
        ] {
            assert!(synth_cohort(&bad, &raw()).is_err(), "{bad:?}");
        }
    }
}
