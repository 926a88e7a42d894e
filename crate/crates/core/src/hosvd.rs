//! Truncated complex higher-order SVD.
//!
//! `X ~= S x1 U1 x2 U2 x3 U3`, where `Un` holds the leading left singular
//! vectors of the mode-n unfolding and `S = X x1 U1^H x2 U2^H x3 U3^H`.

use alloc::vec::Vec;

use crate::linalg::{complete_orthonormal, complex_svd};
use crate::{ComplexMatrix, ComplexTensor3, Error, Result};

/// How many columns to keep for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RankSpec {
    /// Keep exactly this many columns.
    Fixed(usize),
    /// Keep all `I_n` columns.
    Full,
    /// Smallest rank whose squared singular values reach this fraction of the total.
    Energy(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HosvdOptions {
    pub ranks: [RankSpec; 3],
    /// Sequentially truncated variant: each mode is decomposed after
    /// projecting out the previously truncated modes.
    pub sequential: bool,
}

/// Default energy fraction for [`RankSpec::Energy`].
pub const DEFAULT_ENERGY: f64 = 0.95;

impl Default for HosvdOptions {
    /// Ranks `(4, 32, full)`: four multivariate and 32 temporal components,
    /// subject mode untruncated.
    fn default() -> Self {
        Self {
            ranks: [RankSpec::Fixed(4), RankSpec::Fixed(32), RankSpec::Full],
            sequential: false,
        }
    }
}

impl HosvdOptions {
    pub fn with_ranks(ranks: [RankSpec; 3]) -> Self {
        Self {
            ranks,
            sequential: false,
        }
    }

    pub fn full() -> Self {
        Self::with_ranks([RankSpec::Full; 3])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HosvdFactors {
    /// `U1` (`I1 x R1`, multivariate), `U2` (`I2 x R2`, temporal), `U3` (`I3 x R3`, subject).
    pub factors: [ComplexMatrix; 3],
    /// `R1 x R2 x R3` core.
    pub core: ComplexTensor3,
    /// Full singular spectrum of each unfolding, nonincreasing.
    pub mode_singular_values: [Vec<f64>; 3],
}

impl HosvdFactors {
    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.factors[0].rows(),
            self.factors[1].rows(),
            self.factors[2].rows(),
        ]
    }

    /// `sum_n sum_{k > R_n} sigma_k(n)^2`, which bounds the squared truncation error.
    pub fn truncation_bound(&self) -> f64 {
        let ranks = self.ranks();
        self.mode_singular_values
            .iter()
            .zip(ranks)
            .map(|(s, r)| s.iter().skip(r).map(|x| x * x).sum::<f64>())
            .sum()
    }
}

fn resolve_rank(spec: RankSpec, dim: usize, spectrum: &[f64], mode: usize) -> Result<usize> {
    match spec {
        RankSpec::Full => Ok(dim),
        RankSpec::Fixed(r) if r >= 1 && r <= dim => Ok(r),
        RankSpec::Fixed(r) => Err(Error::invalid(alloc::format!(
            "mode-{mode} rank {r} outside 1..={dim}"
        ))),
        RankSpec::Energy(tau) if tau > 0.0 && tau <= 1.0 => {
            let total: f64 = spectrum.iter().map(|s| s * s).sum();
            if total == 0.0 {
                return Ok(1);
            }
            let mut acc = 0.0;
            for (k, s) in spectrum.iter().enumerate() {
                acc += s * s;
                if acc >= tau * total * (1.0 - 1e-12) {
                    return Ok(k + 1);
                }
            }
            Ok(spectrum.len().min(dim))
        }
        RankSpec::Energy(tau) => Err(Error::invalid(alloc::format!(
            "energy fraction {tau} outside (0, 1]"
        ))),
    }
}

/// Leading left singular vectors of the mode-n unfolding, completed to `rank`
/// columns when the unfolding has fewer columns than `rank`.
fn mode_factor(t: &ComplexTensor3, mode: usize, spec: RankSpec) -> Result<(ComplexMatrix, Vec<f64>)> {
    let svd = complex_svd(&t.unfold(mode)?)?;
    let dim = t.dims()[mode - 1];
    let rank = resolve_rank(spec, dim, &svd.s, mode)?;
    let u = if rank <= svd.u.cols() {
        svd.u.leading_columns(rank)
    } else {
        complete_orthonormal(&svd.u, rank)
    };
    Ok((u, svd.s))
}

pub fn hosvd(t: &ComplexTensor3, options: &HosvdOptions) -> Result<HosvdFactors> {
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    // Validate fixed ranks up front so bad input fails before any SVD runs.
    for (n, &spec) in options.ranks.iter().enumerate() {
        if spec != RankSpec::Full {
            resolve_rank(spec, t.dims()[n], &[], n + 1)?;
        }
    }
    let mut factors = Vec::with_capacity(3);
    let mut spectra = Vec::with_capacity(3);
    if options.sequential {
        let mut work = t.clone();
        for mode in 1..=3 {
            let (u, s) = mode_factor(&work, mode, options.ranks[mode - 1])?;
            work = work.mode_product(&u.adjoint(), mode)?;
            factors.push(u);
            spectra.push(s);
        }
        let core = work;
        let [u1, u2, u3]: [ComplexMatrix; 3] = factors.try_into().expect("three modes");
        let [s1, s2, s3]: [Vec<f64>; 3] = spectra.try_into().expect("three modes");
        return Ok(HosvdFactors {
            factors: [u1, u2, u3],
            core,
            mode_singular_values: [s1, s2, s3],
        });
    }
    for mode in 1..=3 {
        let (u, s) = mode_factor(t, mode, options.ranks[mode - 1])?;
        factors.push(u);
        spectra.push(s);
    }
    let [u1, u2, u3]: [ComplexMatrix; 3] = factors.try_into().expect("three modes");
    let [s1, s2, s3]: [Vec<f64>; 3] = spectra.try_into().expect("three modes");
    let core = t
        .mode_product(&u1.adjoint(), 1)?
        .mode_product(&u2.adjoint(), 2)?
        .mode_product(&u3.adjoint(), 3)?;
    Ok(HosvdFactors {
        factors: [u1, u2, u3],
        core,
        mode_singular_values: [s1, s2, s3],
    })
}

/// `core x1 U1 x2 U2 x3 U3`.
pub fn reconstruct(f: &HosvdFactors) -> Result<ComplexTensor3> {
    let ranks = f.core.dims();
    for (n, u) in f.factors.iter().enumerate() {
        if u.cols() != ranks[n] {
            return Err(Error::shape(alloc::format!(
                "factor {} has {} columns but the core has rank {}",
                n + 1,
                u.cols(),
                ranks[n]
            )));
        }
    }
    f.core
        .mode_product(&f.factors[0], 1)?
        .mode_product(&f.factors[1], 2)?
        .mode_product(&f.factors[2], 3)
}

/// `||t - reconstruct(f)||_F / ||t||_F` (absolute error when `t` is zero).
pub fn reconstruction_error(f: &HosvdFactors, t: &ComplexTensor3) -> Result<f64> {
    let approx = reconstruct(f)?;
    let diff = t.sub(&approx)?.frobenius_norm();
    let norm = t.frobenius_norm();
    Ok(if norm > 0.0 { diff / norm } else { diff })
}
