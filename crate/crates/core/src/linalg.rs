//! Complex SVD built on cyclic Jacobi.
//!
//! The default route forms the smaller Gram matrix (`A^H A` or `A A^H`),
//! diagonalises it with a cyclic Jacobi eigensolver and recovers the other
//! factor by a matrix product. When the Gram spectrum suggests a condition
//! number above [`GRAM_CONDITION_LIMIT`], or the recovered factor fails an
//! orthonormality check, the decomposition is redone with one-sided
//! (Hestenes) Jacobi on the matrix itself.
//!
//! Every returned singular pair is phase-normalised: the largest-modulus
//! entry of each left singular vector is real and positive (first index wins
//! a tie), and the right vector carries the same rotation.

use alloc::vec;
use alloc::vec::Vec;

use crate::{ComplexMatrix, Error, Result, C64};

/// Stop criterion for the eigensolver, relative to `||A||_F`.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;
/// Estimated condition number above which the Gram route is abandoned.
pub const GRAM_CONDITION_LIMIT: f64 = 1e8;
/// Largest acceptable `|U^H U - I|` entry from the Gram route.
const GRAM_ORTHONORMALITY_LIMIT: f64 = 1e-11;
const ONE_SIDED_TOLERANCE: f64 = 1e-15;

/// Thin SVD `A = U diag(S) V^H` with `k = min(rows, cols)` columns in `U` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdResult {
    /// Number of singular values above `tol * s[0]`.
    pub fn rank(&self, tol: f64) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&s| s > tol * top && s > 0.0).count()
    }

    /// `sum_{k < r} s_k u_k v_k^H`.
    pub fn reconstruct(&self, r: usize) -> ComplexMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = ComplexMatrix::zeros(m, n);
        for k in 0..r.min(self.s.len()) {
            let s = self.s[k];
            for i in 0..m {
                let us = self.u[(i, k)] * s;
                for j in 0..n {
                    out[(i, j)] += us * self.v[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Unitary 2x2 rotation that zeroes the `(p, q)` entry of a Hermitian pair.
///
/// Given `app`, `aqq` (real) and `apq`, returns `(c, s, e)` such that with
/// `G = [[c, s], [-s conj(e), c conj(e)]]` the product `G^H A G` is diagonal.
#[inline]
fn jacobi_rotation(app: f64, aqq: f64, apq: C64) -> (f64, f64, C64) {
    let r = apq.norm();
    let e = apq / r;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + libm::sqrt(1.0 + tau * tau))
    } else {
        -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
    };
    let c = 1.0 / libm::sqrt(1.0 + t * t);
    (c, t * c, e)
}

/// Applies `G` from the right to columns `p` and `q` of a column list.
#[inline]
fn rotate_columns(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, e: C64) {
    let ec = e.conj();
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = a * c - b * ec * s;
        *y = a * s + b * ec * c;
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi.
///
/// Returns eigenvalues in nonincreasing order (stable with respect to the
/// solver's diagonal order) and the matching orthonormal eigenvectors as
/// columns.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("eigen-decomposition needs a square matrix"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    // Work on columns so that both-sided updates stay cache friendly enough.
    let mut m: Vec<Vec<C64>> = (0..n).map(|c| a.column(c)).collect();
    for (i, col) in m.iter_mut().enumerate() {
        col[i] = C64::new(col[i].re, 0.0);
    }
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|c| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[c] = C64::new(1.0, 0.0);
            e
        })
        .collect();

    let norm = a.frobenius_norm();
    let off_mass = |m: &[Vec<C64>]| -> f64 {
        let mut s = 0.0;
        for (c, col) in m.iter().enumerate() {
            for (r, z) in col.iter().enumerate() {
                if r != c {
                    s += z.norm_sqr();
                }
            }
        }
        libm::sqrt(s)
    };

    if norm > 0.0 {
        let mut polished = false;
        let mut sweeps = 0;
        loop {
            let off = off_mass(&m) / norm;
            if off <= OFF_DIAGONAL_TOLERANCE {
                // Jacobi converges quadratically; one more sweep takes the
                // residual to roundoff.
                if polished || off == 0.0 {
                    break;
                }
                polished = true;
            }
            if sweeps == MAX_SWEEPS {
                return Err(Error::NoConvergence { sweeps, off });
            }
            sweeps += 1;
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[q][p];
                    let (app, aqq) = (m[p][p].re, m[q][q].re);
                    if apq.norm() <= f64::EPSILON * 1e-3 * libm::sqrt(app.abs() * aqq.abs())
                        || apq.norm() == 0.0
                    {
                        m[q][p] = C64::new(0.0, 0.0);
                        m[p][q] = C64::new(0.0, 0.0);
                        continue;
                    }
                    let (c, s, e) = jacobi_rotation(app, aqq, apq);
                    // A <- A G
                    rotate_columns(&mut m, p, q, c, s, e);
                    // A <- G^H A, row-wise on p and q.
                    for col in m.iter_mut() {
                        let (x, y) = (col[p], col[q]);
                        col[p] = x * c - y * e * s;
                        col[q] = x * s + y * e * c;
                    }
                    m[q][p] = C64::new(0.0, 0.0);
                    m[p][q] = C64::new(0.0, 0.0);
                    m[p][p] = C64::new(m[p][p].re, 0.0);
                    m[q][q] = C64::new(m[q][q].re, 0.0);
                    rotate_columns(&mut v, p, q, c, s, e);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // `sort_by` is stable, so equal eigenvalues keep their diagonal order.
    order.sort_by(|&x, &y| m[y][y].re.total_cmp(&m[x][x].re));
    let values = order.iter().map(|&i| m[i][i].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[order[c]][r]);
    Ok((values, vectors))
}

/// Full complex SVD (thin form).
pub fn complex_svd(a: &ComplexMatrix) -> Result<SvdResult> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::shape("SVD of an empty matrix"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let svd = match gram_svd(a)? {
        Some(svd) => svd,
        None => one_sided_svd(a)?,
    };
    Ok(fix_phases(svd))
}

/// Gram route. `None` means the caller should fall back to one-sided Jacobi.
fn gram_svd(a: &ComplexMatrix) -> Result<Option<SvdResult>> {
    let (m, n) = a.shape();
    let tall = m >= n;
    // Eigenvectors of the small Gram matrix form the short-side factor.
    let gram = if tall {
        a.adjoint_matmul(a)?
    } else {
        a.matmul(&a.adjoint())?
    };
    let (lambda, short) = hermitian_eigen(&gram)?;
    let (top, bottom) = (lambda[0], *lambda.last().unwrap());
    if !(bottom > 0.0) || libm::sqrt(top / bottom) > GRAM_CONDITION_LIMIT {
        return Ok(None);
    }
    let s: Vec<f64> = lambda.iter().map(|l| libm::sqrt(*l)).collect();
    // Long-side factor: A V / s (tall) or A^H U / s (wide).
    let mut long = if tall {
        a.matmul(&short)?
    } else {
        a.adjoint().matmul(&short)?
    };
    for c in 0..long.cols() {
        let inv = C64::new(1.0 / s[c], 0.0);
        for r in 0..long.rows() {
            long[(r, c)] *= inv;
        }
    }
    if long.orthonormality_error() > GRAM_ORTHONORMALITY_LIMIT {
        return Ok(None);
    }
    let (u, v) = if tall { (long, short) } else { (short, long) };
    Ok(Some(SvdResult { u, s, v }))
}

/// One-sided Jacobi on the tall orientation of `a`.
fn one_sided_svd(a: &ComplexMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    if m < n {
        let t = one_sided_svd(&a.adjoint())?;
        return Ok(SvdResult {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let mut w: Vec<Vec<C64>> = (0..n).map(|c| a.column(c)).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|c| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[c] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    let dot = |x: &[C64], y: &[C64]| -> C64 { x.iter().zip(y).map(|(a, b)| a.conj() * b).sum() };

    let mut sweeps = 0;
    loop {
        let mut worst = 0.0_f64;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]).re;
                let beta = dot(&w[q], &w[q]).re;
                let gamma = dot(&w[p], &w[q]);
                let scale = libm::sqrt(alpha * beta);
                if gamma.norm() == 0.0 || gamma.norm() <= ONE_SIDED_TOLERANCE * scale {
                    continue;
                }
                worst = worst.max(gamma.norm() / scale);
                let (c, s, e) = jacobi_rotation(alpha, beta, gamma);
                rotate_columns(&mut w, p, q, c, s, e);
                rotate_columns(&mut v, p, q, c, s, e);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off: worst });
        }
    }

    let norms: Vec<f64> = w.iter().map(|c| libm::sqrt(dot(c, c).re)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let cutoff = s[0] * f64::EPSILON * (m.max(n) as f64);

    let mut u_cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for (&i, &sv) in order.iter().zip(&s) {
        if sv > cutoff && sv > 0.0 {
            let inv = 1.0 / sv;
            u_cols.push(w[i].iter().map(|z| z * inv).collect());
        } else {
            break;
        }
    }
    let kept = u_cols.len();
    let mut s = s;
    for x in s.iter_mut().skip(kept) {
        *x = 0.0;
    }
    let u = complete_orthonormal(&ComplexMatrix::from_columns(m, &u_cols)?, n);
    let v = ComplexMatrix::from_fn(n, n, |r, c| v[order[c]][r]);
    Ok(SvdResult { u, s, v })
}

fn fix_phases(mut svd: SvdResult) -> SvdResult {
    for c in 0..svd.u.cols() {
        let mut best = 0;
        let mut best_mod = -1.0;
        for r in 0..svd.u.rows() {
            let m = svd.u[(r, c)].norm();
            if m > best_mod {
                best_mod = m;
                best = r;
            }
        }
        if best_mod <= 0.0 {
            continue;
        }
        let rot = svd.u[(best, c)].conj() / best_mod;
        for r in 0..svd.u.rows() {
            svd.u[(r, c)] *= rot;
        }
        svd.u[(best, c)] = C64::new(svd.u[(best, c)].re, 0.0);
        for r in 0..svd.v.rows() {
            svd.v[(r, c)] *= rot;
        }
    }
    svd
}

/// Best rank-`r` approximation `sum_{k<r} s_k u_k v_k^H`.
pub fn low_rank_approx(a: &ComplexMatrix, r: usize) -> Result<ComplexMatrix> {
    let k = a.rows().min(a.cols());
    if r == 0 || r > k {
        return Err(Error::invalid(alloc::format!(
            "approximation rank {r} outside 1..={k}"
        )));
    }
    Ok(complex_svd(a)?.reconstruct(r))
}

/// Extends orthonormal columns to `target` orthonormal columns.
///
/// Candidates are the standard basis vectors in index order, each
/// orthogonalised twice against the current set (modified Gram-Schmidt)
/// and kept when enough of it survives.
pub fn complete_orthonormal(u: &ComplexMatrix, target: usize) -> ComplexMatrix {
    let m = u.rows();
    assert!(target <= m, "cannot hold {target} orthonormal columns in dimension {m}");
    let mut cols: Vec<Vec<C64>> = (0..u.cols()).map(|c| u.column(c)).collect();
    let mut candidate = 0;
    while cols.len() < target && candidate < m {
        let mut x = vec![C64::new(0.0, 0.0); m];
        x[candidate] = C64::new(1.0, 0.0);
        candidate += 1;
        for _ in 0..2 {
            for c in &cols {
                let proj: C64 = c.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
                for (xi, ci) in x.iter_mut().zip(c) {
                    *xi -= proj * ci;
                }
            }
        }
        let norm = libm::sqrt(x.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if norm > 1e-6 {
            cols.push(x.into_iter().map(|z| z / norm).collect());
        }
    }
    ComplexMatrix::from_columns(m, &cols).expect("columns have length m")
}

/// Orthonormalises the columns of `a` (modified Gram-Schmidt, two passes).
///
/// Fails when the columns are numerically dependent.
pub fn orthonormalize_columns(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(a.cols());
    for c in 0..a.cols() {
        let mut x = a.column(c);
        let start = libm::sqrt(x.iter().map(|z| z.norm_sqr()).sum::<f64>());
        for _ in 0..2 {
            for q in &cols {
                let proj: C64 = q.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= proj * qi;
                }
            }
        }
        let norm = libm::sqrt(x.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if !(norm > 1e-10 * start) {
            return Err(Error::Singular(alloc::format!(
                "column {c} is linearly dependent on its predecessors"
            )));
        }
        cols.push(x.into_iter().map(|z| z / norm).collect());
    }
    ComplexMatrix::from_columns(a.rows(), &cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(uniform(&mut rng), uniform(&mut rng)))
    }

    fn random_unitary(n: usize, seed: u64) -> ComplexMatrix {
        orthonormalize_columns(&random_matrix(n, n, seed)).unwrap()
    }

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_fn(values.len(), values.len(), |r, c| {
            C64::new(if r == c { values[r] } else { 0.0 }, 0.0)
        })
    }

    fn check_invariants(a: &ComplexMatrix, svd: &SvdResult) {
        assert!(svd.u.orthonormality_error() < 1e-10, "U not orthonormal");
        assert!(svd.v.orthonormality_error() < 1e-10, "V not orthonormal");
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(svd.s.iter().all(|&s| s >= 0.0));
        let err = svd.reconstruct(svd.s.len()).sub(a).unwrap().frobenius_norm();
        assert!(err <= 1e-8 * a.frobenius_norm().max(1e-300), "reconstruction error {err}");
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let svd = complex_svd(&ComplexMatrix::identity(4)).unwrap();
        for s in &svd.s {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_values_are_reordered() {
        let svd = complex_svd(&diag(&[3.0, 4.0])).unwrap();
        assert!((svd.s[0] - 4.0).abs() < 1e-14);
        assert!((svd.s[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn recovers_planted_spectrum() {
        let q1 = random_unitary(3, 1);
        let q2 = random_unitary(3, 2);
        let a = q1.matmul(&diag(&[5.0, 2.0, 1.0])).unwrap().matmul(&q2.adjoint()).unwrap();
        let svd = complex_svd(&a).unwrap();
        for (s, want) in svd.s.iter().zip([5.0, 2.0, 1.0]) {
            assert!((s - want).abs() < 1e-8);
        }
        check_invariants(&a, &svd);
    }

    #[test]
    fn rectangular_both_orientations() {
        for (r, c, seed) in [(6, 5, 3), (5, 6, 4), (1, 7, 5), (7, 1, 6), (175 / 7, 60, 7)] {
            let a = random_matrix(r, c, seed);
            let svd = complex_svd(&a).unwrap();
            assert_eq!(svd.s.len(), r.min(c));
            check_invariants(&a, &svd);
        }
    }

    #[test]
    fn rank_deficient_falls_back_and_completes_basis() {
        // Rank-2 6x4 matrix.
        let left = random_matrix(6, 2, 8);
        let right = random_matrix(2, 4, 9);
        let a = left.matmul(&right).unwrap();
        let svd = complex_svd(&a).unwrap();
        assert_eq!(svd.rank(1e-10), 2);
        check_invariants(&a, &svd);
        let zero = complex_svd(&ComplexMatrix::zeros(3, 5)).unwrap();
        assert!(zero.s.iter().all(|&s| s == 0.0));
        assert!(zero.u.orthonormality_error() < 1e-12);
    }

    #[test]
    fn phase_fix_makes_largest_entry_real_positive() {
        let svd = complex_svd(&random_matrix(5, 4, 10)).unwrap();
        for c in 0..svd.u.cols() {
            let col = svd.u.column(c);
            let best = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap()
                .1;
            assert!(best.re > 0.0 && best.im == 0.0);
        }
    }

    #[test]
    fn eckart_young_error() {
        let a = random_matrix(6, 5, 11);
        let full = complex_svd(&a).unwrap();
        for r in 1..=5 {
            let approx = low_rank_approx(&a, r).unwrap();
            let err2 = approx.sub(&a).unwrap().frobenius_norm().powi(2);
            let tail: f64 = full.s[r..].iter().map(|s| s * s).sum();
            assert!((err2 - tail).abs() <= 1e-8 * a.frobenius_norm().powi(2));
        }
        assert!(low_rank_approx(&a, 0).is_err());
        assert!(low_rank_approx(&a, 6).is_err());
    }

    #[test]
    fn rank_one_is_exact_at_r1() {
        let u = random_matrix(4, 1, 12);
        let v = random_matrix(1, 3, 13);
        let a = u.matmul(&v).unwrap();
        let approx = low_rank_approx(&a, 1).unwrap();
        assert!(approx.sub(&a).unwrap().frobenius_norm() < 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn adjoint_and_unitary_invariance() {
        let a = random_matrix(5, 3, 14);
        let s = complex_svd(&a).unwrap().s;
        let sh = complex_svd(&a.adjoint()).unwrap().s;
        let q = random_unitary(5, 15);
        let sq = complex_svd(&q.matmul(&a).unwrap()).unwrap().s;
        for i in 0..3 {
            assert!((s[i] - sh[i]).abs() < 1e-10);
            assert!((s[i] - sq[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn hermitian_eigen_diagonalises() {
        let b = random_matrix(6, 6, 16);
        let h = b.adjoint_matmul(&b).unwrap();
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        assert!(vecs.orthonormality_error() < 1e-12);
        let d = vecs.adjoint().matmul(&h).unwrap().matmul(&vecs).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                let want = if r == c { vals[r] } else { 0.0 };
                assert!((d[(r, c)] - C64::new(want, 0.0)).norm() < 1e-10 * h.frobenius_norm());
            }
        }
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = ComplexMatrix::identity(2);
        a[(0, 1)] = C64::new(f64::INFINITY, 0.0);
        assert_eq!(complex_svd(&a), Err(Error::NonFinite));
    }
}
