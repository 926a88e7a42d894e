//! Dense complex third-order tensors.
//!
//! Entry `(i, j, k)` of a tensor with dims `(I1, I2, I3)` lives at linear
//! offset `i + I1 * (j + I2 * k)`.
//!
//! The mode-n unfolding is an `I_n x (product of the other dims)` matrix
//! whose columns are mode-n fibers. Columns are ordered by the two remaining
//! indices taken in ascending mode order, the earlier one varying fastest:
//!
//! | mode | row | column        |
//! |------|-----|---------------|
//! | 1    | `i` | `j + I2 * k`  |
//! | 2    | `j` | `i + I1 * k`  |
//! | 3    | `k` | `i + I1 * j`  |
//!
//! With this layout the mode-1 unfolding is a reshape of the buffer.

use alloc::vec::Vec;

use crate::{ComplexMatrix, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3 {
    dims: [usize; 3],
    data: Vec<C64>,
}

fn check_mode(mode: usize) -> Result<usize> {
    match mode {
        1..=3 => Ok(mode - 1),
        _ => Err(Error::InvalidMode(mode)),
    }
}

impl ComplexTensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: alloc::vec![C64::new(0.0, 0.0); dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<C64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::shape("tensor dimensions must be positive"));
        }
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::shape(alloc::format!(
                "{} entries for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    /// Like [`from_vec`](Self::from_vec) but also rejects NaN and infinities.
    pub fn from_vec_finite(dims: [usize; 3], data: Vec<C64>) -> Result<Self> {
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        Self::from_vec(dims, data)
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    /// Stacks equally shaped `I1 x I2` slices along the third mode.
    pub fn from_slices(slices: &[ComplexMatrix]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::shape("no slices to stack"))?;
        let (rows, cols) = first.shape();
        if slices.iter().any(|s| s.shape() != (rows, cols)) {
            return Err(Error::shape("slices differ in shape"));
        }
        Ok(Self::from_fn([rows, cols, slices.len()], |i, j, k| {
            slices[k][(i, j)]
        }))
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: C64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    /// The `I1 x I2` frontal slice for third-mode index `k` (one subject).
    pub fn frontal_slice(&self, k: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dims[0], self.dims[1], |i, j| self.get(i, j, k))
    }

    /// Sub-tensor keeping the listed third-mode indices, in the order given.
    pub fn select_frontal(&self, ks: &[usize]) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::shape("empty subject selection"));
        }
        if ks.iter().any(|&k| k >= self.dims[2]) {
            return Err(Error::shape("subject index out of range"));
        }
        let block = self.dims[0] * self.dims[1];
        let mut data = Vec::with_capacity(block * ks.len());
        for &k in ks {
            data.extend_from_slice(&self.data[k * block..(k + 1) * block]);
        }
        Ok(Self {
            dims: [self.dims[0], self.dims[1], ks.len()],
            data,
        })
    }

    /// Mode-`mode` unfolding (`mode` is 1-based).
    pub fn unfold(&self, mode: usize) -> Result<ComplexMatrix> {
        let n = check_mode(mode)?;
        let [d1, d2, d3] = self.dims;
        let m = match n {
            0 => ComplexMatrix::from_fn(d1, d2 * d3, |i, col| self.data[i + d1 * col]),
            1 => ComplexMatrix::from_fn(d2, d1 * d3, |j, col| {
                self.get(col % d1, j, col / d1)
            }),
            _ => ComplexMatrix::from_fn(d3, d1 * d2, |k, col| self.data[col + d1 * d2 * k]),
        };
        Ok(m)
    }

    /// Inverse of [`unfold`](Self::unfold).
    pub fn fold(m: &ComplexMatrix, mode: usize, dims: [usize; 3]) -> Result<Self> {
        let n = check_mode(mode)?;
        if dims.contains(&0) {
            return Err(Error::shape("tensor dimensions must be positive"));
        }
        let expected = (dims[n], dims[0] * dims[1] * dims[2] / dims[n]);
        if m.shape() != expected {
            return Err(Error::shape(alloc::format!(
                "mode-{mode} matrix of shape {:?} cannot fold into dims {:?}",
                m.shape(),
                dims
            )));
        }
        let [d1, d2, _] = dims;
        let t = match n {
            0 => Self::from_fn(dims, |i, j, k| m[(i, j + d2 * k)]),
            1 => Self::from_fn(dims, |i, j, k| m[(j, i + d1 * k)]),
            _ => Self::from_fn(dims, |i, j, k| m[(k, i + d1 * j)]),
        };
        Ok(t)
    }

    /// Mode-n product `self x_n m`: contracts mode `mode` with the columns of `m`.
    pub fn mode_product(&self, m: &ComplexMatrix, mode: usize) -> Result<Self> {
        let n = check_mode(mode)?;
        if m.cols() != self.dims[n] {
            return Err(Error::shape(alloc::format!(
                "mode-{mode} product needs {} matrix columns, got {}",
                self.dims[n],
                m.cols()
            )));
        }
        if m.rows() == 0 {
            return Err(Error::shape("mode product with an empty matrix"));
        }
        let mut dims = self.dims;
        dims[n] = m.rows();
        let mut out = Self::zeros(dims);
        let [d1, d2, d3] = self.dims;
        // Walk the source once; every entry feeds one fiber of the output.
        for k in 0..d3 {
            for j in 0..d2 {
                for i in 0..d1 {
                    let x = self.get(i, j, k);
                    if x == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for r in 0..m.rows() {
                        let (a, b, c, idx) = match n {
                            0 => (r, j, k, i),
                            1 => (i, r, k, j),
                            _ => (i, j, r, k),
                        };
                        let o = out.offset(a, b, c);
                        out.data[o] += m[(r, idx)] * x;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::shape("subtraction of differently shaped tensors"));
        }
        Ok(Self {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn counting() -> ComplexTensor3 {
        // t(i1,i2,i3) = i1 + 2(i2-1) + 4(i3-1), 1-based.
        ComplexTensor3::from_fn([2, 2, 2], |i, j, k| c((i + 1 + 2 * j + 4 * k) as f64))
    }

    #[test]
    fn mode1_unfolding_of_counting_tensor() {
        let m = counting().unfold(1).unwrap();
        let rows: Vec<Vec<f64>> = (0..2).map(|r| m.row(r).iter().map(|z| z.re).collect()).collect();
        assert_eq!(rows, vec![vec![1.0, 3.0, 5.0, 7.0], vec![2.0, 4.0, 6.0, 8.0]]);
    }

    #[test]
    fn unfolding_index_map_matches_enumeration() {
        let dims = [2, 3, 4];
        let t = ComplexTensor3::from_fn(dims, |i, j, k| c((100 * i + 10 * j + k) as f64));
        for mode in 1..=3 {
            let m = t.unfold(mode).unwrap();
            for k in 0..4 {
                for j in 0..3 {
                    for i in 0..2 {
                        let (r, col) = match mode {
                            1 => (i, j + 3 * k),
                            2 => (j, i + 2 * k),
                            _ => (k, i + 2 * j),
                        };
                        assert_eq!(m[(r, col)], t.get(i, j, k));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_tensor_unfolds_to_zero_matrix() {
        let t = ComplexTensor3::zeros([2, 3, 4]);
        assert_eq!(t.unfold(2).unwrap().shape(), (3, 8));
        assert_eq!(t.unfold(3).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn fold_singleton_and_mismatch() {
        let m = ComplexMatrix::from_vec(1, 1, vec![C64::new(2.0, -1.0)]).unwrap();
        let t = ComplexTensor3::fold(&m, 2, [1, 1, 1]).unwrap();
        assert_eq!(t.get(0, 0, 0), C64::new(2.0, -1.0));
        assert!(ComplexTensor3::fold(&m, 1, [2, 1, 1]).is_err());
        assert!(matches!(counting().unfold(4), Err(Error::InvalidMode(4))));
        assert!(matches!(counting().unfold(0), Err(Error::InvalidMode(0))));
    }

    #[test]
    fn ones_row_sums_along_mode() {
        let t = counting();
        let ones = ComplexMatrix::from_fn(1, 2, |_, _| c(1.0));
        // Brute-force sums over each mode.
        let s1 = t.mode_product(&ones, 1).unwrap();
        let s2 = t.mode_product(&ones, 2).unwrap();
        let s3 = t.mode_product(&ones, 3).unwrap();
        assert_eq!(s1.dims(), [1, 2, 2]);
        for j in 0..2 {
            for k in 0..2 {
                assert_eq!(s1.get(0, j, k), t.get(0, j, k) + t.get(1, j, k));
                assert_eq!(s2.get(j, 0, k), t.get(j, 0, k) + t.get(j, 1, k));
                assert_eq!(s3.get(j, k, 0), t.get(j, k, 0) + t.get(j, k, 1));
            }
        }
        assert_eq!(s1.get(0, 0, 0), c(3.0));
        assert_eq!(s3.get(1, 1, 0), c(4.0 + 8.0));
    }

    #[test]
    fn identity_product_is_noop() {
        let t = counting();
        for mode in 1..=3 {
            assert_eq!(t.mode_product(&ComplexMatrix::identity(2), mode).unwrap(), t);
        }
        assert!(t.mode_product(&ComplexMatrix::identity(3), 1).is_err());
    }

    #[test]
    fn norm_of_single_entry() {
        let t = ComplexTensor3::from_vec([1, 1, 1], vec![C64::new(3.0, 4.0)]).unwrap();
        assert_eq!(t.frobenius_norm(), 5.0);
        assert_eq!(ComplexTensor3::zeros([2, 2, 2]).frobenius_norm(), 0.0);
    }

    #[test]
    fn from_vec_finite_rejects_nan() {
        let err = ComplexTensor3::from_vec_finite([1, 1, 1], vec![C64::new(f64::NAN, 0.0)]);
        assert_eq!(err, Err(Error::NonFinite));
    }

    #[test]
    fn select_frontal_keeps_requested_order() {
        let t = counting();
        let s = t.select_frontal(&[1, 0]).unwrap();
        assert_eq!(s.frontal_slice(0), t.frontal_slice(1));
        assert_eq!(s.frontal_slice(1), t.frontal_slice(0));
    }
}
