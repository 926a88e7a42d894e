//! Channel preprocessing: gap filling, standardisation, arbitrary-length DFT
//! and the analytic signal `x + i H[x]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result, C64};

/// Minimum samples a [`RealSeries`] may hold.
pub const MIN_SERIES_LEN: usize = 4;
/// Default fraction of missing samples tolerated per channel.
pub const DEFAULT_MAX_MISSING: f64 = 0.10;
/// Samples covered by the optional cosine taper at each end.
pub const TAPER_LEN: usize = 5;

/// A uniformly sampled real channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSeries {
    samples: Vec<f64>,
    /// Samples per minute.
    rate: f64,
}

impl RealSeries {
    pub fn new(samples: Vec<f64>, rate: f64) -> Result<Self> {
        if samples.len() < MIN_SERIES_LEN {
            return Err(Error::invalid(alloc::format!(
                "series of length {} is shorter than {MIN_SERIES_LEN}",
                samples.len()
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !(rate > 0.0) {
            return Err(Error::invalid("sampling rate must be positive"));
        }
        Ok(Self { samples, rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn standardize(&self) -> Result<Self> {
        Ok(Self {
            samples: standardize(&self.samples)?,
            rate: self.rate,
        })
    }

    pub fn analytic(&self) -> Vec<C64> {
        analytic_signal(&self.samples)
    }
}

/// Zero mean, unit population standard deviation (divides by `N`).
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::invalid("standardisation needs at least two samples"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::DegenerateChannel(String::new()));
    }
    Ok(x.iter().map(|v| (v - mean) / sd).collect())
}

/// Fills missing samples: linear interpolation between known neighbours,
/// nearest-value hold before the first and after the last known sample.
///
/// Fails when more than `max_missing` (a fraction) of the samples are absent.
pub fn fill_gaps(x: &[Option<f64>], max_missing: f64) -> Result<Vec<f64>> {
    let missing = x.iter().filter(|v| v.is_none()).count();
    if missing as f64 > max_missing * x.len() as f64 || missing == x.len() {
        return Err(Error::invalid(alloc::format!(
            "{missing} of {} samples missing (limit {:.0}%)",
            x.len(),
            max_missing * 100.0
        )));
    }
    let known: Vec<usize> = (0..x.len()).filter(|&i| x[i].is_some()).collect();
    let mut out = vec![0.0; x.len()];
    let mut next = 0;
    for i in 0..x.len() {
        if let Some(v) = x[i] {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            out[i] = v;
            continue;
        }
        while next < known.len() && known[next] < i {
            next += 1;
        }
        out[i] = match (next.checked_sub(1).map(|p| known[p]), known.get(next)) {
            (Some(a), Some(&b)) => {
                let (va, vb) = (x[a].unwrap(), x[b].unwrap());
                va + (vb - va) * (i - a) as f64 / (b - a) as f64
            }
            (Some(a), None) => x[a].unwrap(),
            (None, Some(&b)) => x[b].unwrap(),
            (None, None) => unreachable!("at least one sample is known"),
        };
    }
    Ok(out)
}

/// Raised-cosine taper over the first and last `TAPER_LEN` samples.
pub fn cosine_taper(x: &[f64]) -> Vec<f64> {
    let m = TAPER_LEN.min(x.len() / 2);
    let mut out = x.to_vec();
    for k in 0..m {
        let w = 0.5 * (1.0 - libm::cos(PI * (k + 1) as f64 / (m + 1) as f64));
        out[k] *= w;
        let last = x.len() - 1 - k;
        out[last] *= w;
    }
    out
}

fn fft_pow2_in_place(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let angle = sign * 2.0 * PI * k as f64 / len as f64;
                let w = C64::new(libm::cos(angle), libm::sin(angle));
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Forward DFT `X_k = sum_t x_t exp(-2 pi i k t / N)` for any `N >= 1`.
///
/// Powers of two go straight to radix-2; other lengths use Bluestein's
/// chirp-z identity with a zero-padded power-of-two convolution, so the
/// transform itself is never padded.
pub fn dft(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = x.to_vec();
        fft_pow2_in_place(&mut buf, false);
        return buf;
    }
    // chirp_k = exp(-i pi k^2 / N); k^2 reduced mod 2N keeps the angle small.
    let two_n = 2 * n as u64;
    let chirp: Vec<C64> = (0..n as u64)
        .map(|k| {
            let angle = -PI * ((k * k) % two_n) as f64 / n as f64;
            C64::new(libm::cos(angle), libm::sin(angle))
        })
        .collect();
    let m = (2 * n - 1).next_power_of_two();
    let mut a = vec![C64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = x[k] * chirp[k];
    }
    let mut b = vec![C64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    fft_pow2_in_place(&mut a, false);
    fft_pow2_in_place(&mut b, false);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi;
    }
    fft_pow2_in_place(&mut a, true);
    let scale = 1.0 / m as f64;
    (0..n).map(|k| a[k] * scale * chirp[k]).collect()
}

/// Inverse of [`dft`], including the `1/N` factor.
pub fn idft(x: &[C64]) -> Vec<C64> {
    let n = x.len() as f64;
    let conj: Vec<C64> = x.iter().map(|z| z.conj()).collect();
    dft(&conj).into_iter().map(|z| z.conj() / n).collect()
}

/// Analytic signal `x + i H[x]`.
///
/// Positive-frequency bins are doubled, DC (and Nyquist for even lengths)
/// kept, negative-frequency bins zeroed, then transformed back.
pub fn analytic_signal(x: &[f64]) -> Vec<C64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let spectrum: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut spectrum = dft(&spectrum);
    let positive_end = n.div_ceil(2); // exclusive: bins 1..positive_end are positive
    for (k, z) in spectrum.iter_mut().enumerate() {
        let h = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < positive_end {
            2.0
        } else {
            0.0
        };
        *z *= h;
    }
    idft(&spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, v)| {
                        let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                        v * C64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let x = [1.0, 0.0, 0.0, 0.0].map(|v| C64::new(v, 0.0));
        for z in dft(&x) {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn pure_tone_lands_in_one_bin() {
        for n in [8usize, 50, 75] {
            let k0 = 3;
            let x: Vec<C64> = (0..n)
                .map(|t| {
                    let a = 2.0 * PI * (k0 * t) as f64 / n as f64;
                    C64::new(a.cos(), a.sin())
                })
                .collect();
            let spec = dft(&x);
            for (k, z) in spec.iter().enumerate() {
                let want = if k == k0 { n as f64 } else { 0.0 };
                assert!((z.norm() - want).abs() < 1e-10, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn bluestein_matches_naive_and_roundtrips() {
        for n in [1usize, 2, 3, 5, 7, 12, 50, 75, 97] {
            let x: Vec<C64> = (0..n)
                .map(|t| C64::new((t as f64 * 0.37).sin(), (t as f64 * 1.3).cos() - 0.2))
                .collect();
            let fast = dft(&x);
            let slow = naive_dft(&x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10, "n={n}");
            }
            let back = idft(&fast);
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).norm() < 1e-10);
            }
            // Parseval.
            let e_t: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let e_f: f64 = fast.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            assert!((e_t - e_f).abs() <= 1e-10 * e_t.max(1.0));
        }
    }

    #[test]
    fn standardize_two_points() {
        assert_eq!(standardize(&[0.0, 2.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(matches!(standardize(&[4.0; 5]), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn standardize_is_idempotent() {
        let x: Vec<f64> = (0..20).map(|t| (t as f64).sin() * 3.0 + 1.0).collect();
        let once = standardize(&x).unwrap();
        let twice = standardize(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_cos_and_sin() {
        let n = 64;
        let w = 2.0 * PI * 5.0 / n as f64;
        let cos: Vec<f64> = (0..n).map(|t| (w * t as f64).cos()).collect();
        let sin: Vec<f64> = (0..n).map(|t| (w * t as f64).sin()).collect();
        let za = analytic_signal(&cos);
        let zb = analytic_signal(&sin);
        for t in 0..n {
            let e = C64::new((w * t as f64).cos(), (w * t as f64).sin());
            assert!((za[t] - e).norm() < 1e-8);
            assert!((zb[t] - C64::new(0.0, -1.0) * e).norm() < 1e-8);
        }
    }

    #[test]
    fn constant_series_has_no_quadrature() {
        let z = analytic_signal(&[2.5; 9]);
        for v in z {
            assert!(v.im.abs() < 1e-12);
            assert!((v.re - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_filling_rules() {
        let x = [None, Some(1.0), None, Some(3.0), Some(4.0), Some(5.0), Some(6.0), Some(7.0), Some(8.0), Some(9.0), None];
        // 3 of 11 missing exceeds 10%.
        assert!(fill_gaps(&x, 0.10).is_err());
        let filled = fill_gaps(&x, 0.30).unwrap();
        assert_eq!(filled[0], 1.0);
        assert_eq!(filled[2], 2.0);
        assert_eq!(filled[10], 9.0);
        let ok: Vec<Option<f64>> = (0..20).map(|i| if i == 7 { None } else { Some(i as f64) }).collect();
        assert_eq!(fill_gaps(&ok, DEFAULT_MAX_MISSING).unwrap()[7], 7.0);
        assert!(fill_gaps(&[None, None], 1.0).is_err());
    }

    #[test]
    fn taper_touches_only_the_edges() {
        let x = vec![1.0; 20];
        let y = cosine_taper(&x);
        assert!(y[0] < 0.2 && y[19] < 0.2);
        assert!((y[0] - y[19]).abs() < 1e-15);
        assert!(y[5..15].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn real_series_validation() {
        assert!(RealSeries::new(vec![1.0, 2.0, 3.0], 1.0).is_err());
        assert!(RealSeries::new(vec![1.0, 2.0, f64::NAN, 4.0], 1.0).is_err());
        let s = RealSeries::new(vec![1.0, 2.0, 3.0, 5.0], 1.0).unwrap();
        let z = s.standardize().unwrap().analytic();
        for (a, b) in z.iter().zip(s.standardize().unwrap().samples()) {
            assert!((a.re - b).abs() < 1e-12);
        }
    }
}
