//! Dense row-major tensors of `f64`.

use crate::error::{Error, Result};

/// Dense multi-axis array of 64-bit reals stored in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero-length axis in shape {shape:?}")));
        }
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {expected} elements but {} were given",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero-length axis in {shape:?}");
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        for (i, x) in t.data.iter_mut().enumerate() {
            *x = f(i);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Length of the trailing axis.
    pub fn last_dim(&self) -> usize {
        *self.shape.last().expect("tensor has at least one axis")
    }

    /// Product of all axes but the last.
    pub fn leading(&self) -> usize {
        self.data.len() / self.last_dim()
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    pub fn into_reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Reorders axes so that output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let rank = self.shape.len();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::Shape(format!("{axes:?} is not a permutation of {rank} axes")));
        }
        // Swapping the last two axes of a 3-D tensor is the only hot case.
        if rank == 3 && axes == [0, 2, 1] {
            return Ok(self.swap_last_two());
        }
        let in_strides = strides(&self.shape);
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let mut out = vec![0.0; self.data.len()];
        let mut index = vec![0usize; rank];
        for slot in out.iter_mut() {
            let src: usize = index.iter().zip(axes).map(|(&i, &a)| i * in_strides[a]).sum();
            *slot = self.data[src];
            for ax in (0..rank).rev() {
                index[ax] += 1;
                if index[ax] < out_shape[ax] {
                    break;
                }
                index[ax] = 0;
            }
        }
        Ok(Self {
            shape: out_shape,
            data: out,
        })
    }

    fn swap_last_two(&self) -> Self {
        let (b, r, c) = (self.shape[0], self.shape[1], self.shape[2]);
        let mut out = vec![0.0; self.data.len()];
        for n in 0..b {
            let src = &self.data[n * r * c..(n + 1) * r * c];
            let dst = &mut out[n * r * c..(n + 1) * r * c];
            for i in 0..r {
                for j in 0..c {
                    dst[j * r + i] = src[i * c + j];
                }
            }
        }
        Self {
            shape: vec![b, c, r],
            data: out,
        }
    }

    /// Concatenates two tensors along `axis`; all other axes must agree.
    pub fn concat(a: &Tensor, b: &Tensor, axis: usize) -> Result<Self> {
        if a.shape.len() != b.shape.len()
            || axis >= a.shape.len()
            || a.shape
                .iter()
                .zip(&b.shape)
                .enumerate()
                .any(|(i, (x, y))| i != axis && x != y)
        {
            return Err(Error::Shape(format!(
                "cannot concatenate {:?} and {:?} along axis {axis}",
                a.shape, b.shape
            )));
        }
        let outer: usize = a.shape[..axis].iter().product();
        let inner: usize = a.shape[axis + 1..].iter().product();
        let (ca, cb) = (a.shape[axis] * inner, b.shape[axis] * inner);
        let mut data = Vec::with_capacity(a.len() + b.len());
        for o in 0..outer {
            data.extend_from_slice(&a.data[o * ca..(o + 1) * ca]);
            data.extend_from_slice(&b.data[o * cb..(o + 1) * cb]);
        }
        let mut shape = a.shape.clone();
        shape[axis] += b.shape[axis];
        Ok(Self { shape, data })
    }

    /// Inverse of [`Tensor::concat`]: splits `self` along `axis` at `first`.
    pub fn split(&self, axis: usize, first: usize) -> (Tensor, Tensor) {
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let total = self.shape[axis];
        let (ca, cb) = (first * inner, (total - first) * inner);
        let mut a = Vec::with_capacity(outer * ca);
        let mut b = Vec::with_capacity(outer * cb);
        for o in 0..outer {
            let row = &self.data[o * (ca + cb)..(o + 1) * (ca + cb)];
            a.extend_from_slice(&row[..ca]);
            b.extend_from_slice(&row[ca..]);
        }
        let mut sa = self.shape.clone();
        sa[axis] = first;
        let mut sb = self.shape.clone();
        sb[axis] = total - first;
        (Tensor { shape: sa, data: a }, Tensor { shape: sb, data: b })
    }

    /// Rows `start..end` of the leading axis.
    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor {
        let row: usize = self.shape[1..].iter().product();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Tensor {
            shape,
            data: self.data[start * row..end * row].to_vec(),
        }
    }

    /// Stacks tensors with identical trailing shape along the leading axis.
    pub fn cat_rows(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::Shape("nothing to stack".into()))?;
        let mut shape = first.shape.clone();
        shape[0] = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != first.shape[1..] {
                return Err(Error::Shape(format!(
                    "cannot stack {:?} under {:?}",
                    p.shape, first.shape
                )));
            }
            shape[0] += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Tensor::new(&shape, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.check_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "shape {:?} does not match {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// `out[rows x n] = a[rows x k] * b^T` where `b` is stored `n x k`.
pub(crate) fn matmul_transb(a: &[f64], b: &[f64], rows: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), rows * n);
    // SAFETY: slice lengths checked above; strides describe row-major a, transposed b, row-major out.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out[rows x n] = a[rows x k] * b[k x n]`.
pub(crate) fn matmul(a: &[f64], b: &[f64], rows: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), rows * n);
    // SAFETY: as in `matmul_transb`, all three operands are row-major and sized.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out[m x n] += a^T * b` for `a: rows x m`, `b: rows x n`.
pub(crate) fn matmul_transa_acc(a: &[f64], b: &[f64], rows: usize, m: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * m);
    debug_assert_eq!(b.len(), rows * n);
    debug_assert_eq!(out.len(), m * n);
    // SAFETY: `a` is read transposed through its strides; beta = 1 accumulates into `out`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            rows,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_inconsistent_shape() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(&[2, 0], vec![]).is_err());
    }

    #[test]
    fn permute_matches_index_formula() {
        let t = Tensor::from_fn(&[2, 3, 4], |i| i as f64);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for a in 0..4 {
            for b in 0..2 {
                for c in 0..3 {
                    assert_eq!(p.data()[a * 6 + b * 3 + c], t.data()[b * 12 + c * 4 + a]);
                }
            }
        }
        let s = t.permute(&[0, 2, 1]).unwrap();
        assert_eq!(s.data()[12 + 3 * 3 + 2], t.data()[12 + 2 * 4 + 3]);
        assert!(t.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn concat_then_split() {
        let a = Tensor::from_fn(&[2, 2, 3], |i| i as f64);
        let b = Tensor::from_fn(&[2, 1, 3], |i| 100.0 + i as f64);
        let c = Tensor::concat(&a, &b, 1).unwrap();
        assert_eq!(c.shape(), &[2, 3, 3]);
        assert_eq!(&c.data()[6..9], &[100.0, 101.0, 102.0]);
        let (x, y) = c.split(1, 2);
        assert_eq!((x, y), (a, b));
        assert!(Tensor::concat(&Tensor::zeros(&[2, 2]), &Tensor::zeros(&[3, 2]), 1).is_err());
    }

    #[test]
    fn matmul_kernels_agree_with_loops() {
        let a = Tensor::from_fn(&[3, 4], |i| (i as f64).sin());
        let b = Tensor::from_fn(&[5, 4], |i| (i as f64).cos());
        let mut out = vec![0.0; 15];
        matmul_transb(a.data(), b.data(), 3, 4, 5, &mut out);
        for r in 0..3 {
            for c in 0..5 {
                let e: f64 = (0..4).map(|j| a.data()[r * 4 + j] * b.data()[c * 4 + j]).sum();
                assert!((out[r * 5 + c] - e).abs() < 1e-12);
            }
        }
        let mut acc = vec![1.0; 4 * 5];
        let d = Tensor::from_fn(&[3, 5], |i| i as f64 * 0.5);
        matmul_transa_acc(a.data(), d.data(), 3, 4, 5, &mut acc);
        for i in 0..4 {
            for j in 0..5 {
                let e: f64 = 1.0 + (0..3).map(|r| a.data()[r * 4 + i] * d.data()[r * 5 + j]).sum::<f64>();
                assert!((acc[i * 5 + j] - e).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn reshape_and_permute_round_trip(
            dims in proptest::collection::vec(1usize..5, 1..5),
            perm_seed in any::<u64>(),
        ) {
            let t = Tensor::from_fn(&dims, |i| i as f64 * 0.25 - 3.0);
            let flat = t.reshape(&[t.len()]).unwrap();
            prop_assert_eq!(flat.reshape(&dims).unwrap(), t.clone());

            let mut axes: Vec<usize> = (0..dims.len()).collect();
            let mut s = perm_seed;
            for i in (1..axes.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                axes.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut inverse = vec![0; axes.len()];
            for (i, &a) in axes.iter().enumerate() {
                inverse[a] = i;
            }
            let back = t.permute(&axes).unwrap().permute(&inverse).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
