//! Phase features from projections onto (multivariate, temporal) factor pairs.
//!
//! A subject's `I1 x I2` slice `X_p` is projected onto component `(a, b)` as
//! `u_a^H X_p conj(u_b)`, which equals `sum_c s[a, b, c] U3[p, c]` when the
//! subject mode is kept at full rank. Optionally the coefficient is then
//! multiplied by the conjugate of the subject's factor entry, removing the
//! subject-specific scale and rotation. The argument of the result is the
//! feature used downstream.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::hosvd::HosvdFactors;
use crate::{ComplexMatrix, ComplexTensor3, Error, RealMatrix, Result, C64};

/// Moduli at or below this are treated as having no defined phase.
pub const PHASE_EPSILON: f64 = 1e-12;
/// Stabiliser added to the Fisher denominator.
pub const FISHER_EPSILON: f64 = 1e-12;
/// Number of components kept after Fisher ranking.
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Projection {
    /// `u_a^H X conj(u_b)`.
    #[default]
    Bilinear,
    /// Bilinear coefficient divided by `||X||_F`.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Rotation {
    #[default]
    Off,
    /// Multiply by the full conjugate of the subject factor entry (scale and rotate).
    Conjugate,
    /// Multiply by the unit-modulus conjugate (rotate only).
    UnitConjugate,
}

impl Rotation {
    pub fn is_on(self) -> bool {
        self != Rotation::Off
    }
}

/// Which subject-factor column supplies the rotation entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RotationReference {
    /// Column 0 of `U3`, the dominant subject-mode component, for every feature.
    #[default]
    Dominant,
    /// For feature `(a, b)`, the column `c` maximising `|s[a, b, c]|`.
    PerFeature,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureOptions {
    pub projection: Projection,
    pub rotation: Rotation,
    pub reference: RotationReference,
}

/// Per-subject projection coefficients and their phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFeatureMatrix {
    /// Subjects x features.
    pub coeffs: ComplexMatrix,
    /// Subjects x features, principal arguments in `(-pi, pi]`.
    pub phases: RealMatrix,
    /// Zero-based `(a, b)` component pair of each feature column.
    pub feature_index: Vec<(usize, usize)>,
    /// `(subject, feature)` cells whose modulus was too small for a phase;
    /// their phase is set to 0.
    pub degenerate: Vec<(usize, usize)>,
    pub rotated: bool,
}

impl PhaseFeatureMatrix {
    pub fn n_subjects(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn n_features(&self) -> usize {
        self.feature_index.len()
    }
}

/// `u_a^H slice conj(u_b)` with zero-based component indices.
pub fn project(
    slice: &ComplexMatrix,
    u1: &ComplexMatrix,
    u2: &ComplexMatrix,
    a: usize,
    b: usize,
) -> Result<C64> {
    if slice.shape() != (u1.rows(), u2.rows()) {
        return Err(Error::shape("slice does not match the factor row counts"));
    }
    if a >= u1.cols() || b >= u2.cols() {
        return Err(Error::invalid(alloc::format!(
            "component ({}, {}) outside the {}x{} grid",
            a + 1,
            b + 1,
            u1.cols(),
            u2.cols()
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..slice.rows() {
        let ua = u1[(i, a)].conj();
        let row = slice.row(i);
        let inner: C64 = row
            .iter()
            .enumerate()
            .map(|(j, x)| x * u2[(j, b)].conj())
            .sum();
        acc += ua * inner;
    }
    Ok(acc)
}

/// `coeff * conj(entry)`.
#[inline]
pub fn rotate_projection(coeff: C64, subject_factor_entry: C64) -> C64 {
    coeff * subject_factor_entry.conj()
}

/// Principal argument in `(-pi, pi]`, or `None` when `|coeff| <= PHASE_EPSILON`.
pub fn phase(coeff: C64) -> Option<f64> {
    if !(coeff.norm() > PHASE_EPSILON) {
        return None;
    }
    let theta = libm::atan2(coeff.im, coeff.re);
    Some(if theta <= -PI { PI } else { theta })
}

/// Projects every subject onto the full `R1 x R2` component grid.
pub fn phase_features(
    t: &ComplexTensor3,
    f: &HosvdFactors,
    options: &FeatureOptions,
) -> Result<PhaseFeatureMatrix> {
    let [u1, u2, u3] = &f.factors;
    let [d1, d2, d3] = t.dims();
    if (u1.rows(), u2.rows(), u3.rows()) != (d1, d2, d3) {
        return Err(Error::shape("factors do not match the tensor dimensions"));
    }
    let (r1, r2) = (u1.cols(), u2.cols());
    let feature_index: Vec<(usize, usize)> =
        (0..r1).flat_map(|a| (0..r2).map(move |b| (a, b))).collect();

    let reference_column: Vec<usize> = match options.reference {
        RotationReference::Dominant => alloc::vec![0; feature_index.len()],
        RotationReference::PerFeature => feature_index
            .iter()
            .map(|&(a, b)| {
                let r3 = f.core.dims()[2];
                let mut best = 0;
                for c in 1..r3 {
                    if f.core.get(a, b, c).norm() > f.core.get(a, b, best).norm() {
                        best = c;
                    }
                }
                best
            })
            .collect(),
    };

    let u1h = u1.adjoint();
    let u2c = u2.conj();
    let mut coeffs = ComplexMatrix::zeros(d3, feature_index.len());
    for p in 0..d3 {
        let slice = t.frontal_slice(p);
        // All (a, b) at once: U1^H X_p conj(U2).
        let grid = u1h.matmul(&slice)?.matmul(&u2c)?;
        let scale = match options.projection {
            Projection::Bilinear => 1.0,
            Projection::Normalized => {
                let n = slice.frobenius_norm();
                if n > 0.0 {
                    1.0 / n
                } else {
                    0.0
                }
            }
        };
        for (j, &(a, b)) in feature_index.iter().enumerate() {
            let mut z = grid[(a, b)] * scale;
            match options.rotation {
                Rotation::Off => {}
                Rotation::Conjugate => z = rotate_projection(z, u3[(p, reference_column[j])]),
                Rotation::UnitConjugate => {
                    let e = u3[(p, reference_column[j])];
                    let m = e.norm();
                    z = if m > 0.0 {
                        rotate_projection(z, e / m)
                    } else {
                        C64::new(0.0, 0.0)
                    };
                }
            }
            coeffs[(p, j)] = z;
        }
    }

    let mut phases = RealMatrix::zeros(d3, feature_index.len());
    let mut degenerate = Vec::new();
    for p in 0..d3 {
        for j in 0..feature_index.len() {
            match phase(coeffs[(p, j)]) {
                Some(theta) => phases[(p, j)] = theta,
                None => degenerate.push((p, j)),
            }
        }
    }

    Ok(PhaseFeatureMatrix {
        coeffs,
        phases,
        feature_index,
        degenerate,
        rotated: options.rotation.is_on(),
    })
}

/// How Fisher scores treat phase values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FisherVariant {
    /// Ordinary means and population variances.
    #[default]
    Linear,
    /// Circular means, wrapped differences and wrapped deviations.
    Circular,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = libm::fmod(x + PI, 2.0 * PI);
    if y <= 0.0 {
        y += 2.0 * PI;
    }
    y - PI
}

pub fn circular_mean(angles: &[f64]) -> f64 {
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), &a| (s + libm::sin(a), c + libm::cos(a)));
    libm::atan2(s, c)
}

/// Mean resultant length of unit phasors at the given angles.
pub fn resultant_length(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), &a| (s + libm::sin(a), c + libm::cos(a)));
    libm::sqrt(s * s + c * c) / angles.len() as f64
}

/// Circular standard deviation `sqrt(-2 ln R)`.
pub fn circular_std(angles: &[f64]) -> f64 {
    let r = resultant_length(angles).min(1.0);
    if r <= 0.0 {
        return f64::INFINITY;
    }
    libm::sqrt(-2.0 * libm::log(r))
}

/// `(mu1 - mu0)^2 / (var1 + var0 + eps)` per column; `labels[i]` is true for class 1.
pub fn fisher_scores(features: &RealMatrix, labels: &[bool], variant: FisherVariant) -> Result<Vec<f64>> {
    if features.rows() != labels.len() {
        return Err(Error::shape("one label per feature row is required"));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("Fisher scores need both classes present"));
    }
    let stats = |rows: &[usize], col: usize| -> (f64, f64) {
        let n = rows.len() as f64;
        match variant {
            FisherVariant::Linear => {
                let mean = rows.iter().map(|&r| features[(r, col)]).sum::<f64>() / n;
                let var = rows
                    .iter()
                    .map(|&r| {
                        let d = features[(r, col)] - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / n;
                (mean, var)
            }
            FisherVariant::Circular => {
                let xs: Vec<f64> = rows.iter().map(|&r| features[(r, col)]).collect();
                let mean = circular_mean(&xs);
                let var = xs.iter().map(|&x| {
                    let d = wrap_angle(x - mean);
                    d * d
                }).sum::<f64>() / n;
                (mean, var)
            }
        }
    };
    Ok((0..features.cols())
        .map(|col| {
            let (m1, v1) = stats(&pos, col);
            let (m0, v0) = stats(&neg, col);
            let d = match variant {
                FisherVariant::Linear => m1 - m0,
                FisherVariant::Circular => wrap_angle(m1 - m0),
            };
            d * d / (v1 + v0 + FISHER_EPSILON)
        })
        .collect())
}

/// Indices of the `k` largest scores, best first; ties go to the lower index.
pub fn select_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::invalid(alloc::format!(
            "cannot select {k} of {} features",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(k);
    Ok(order)
}
