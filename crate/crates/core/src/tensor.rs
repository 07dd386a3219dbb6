//! Dense row-major `f64` tensors.
//!
//! The autodiff graph works on rank-2 tensors only; scalars are `1×1`.
//! Higher ranks exist for storage (stacked feature maps in dataset files).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking that every extent is positive and that the
    /// value count matches.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Dimension {
                op: "tensor",
                msg: format!("extents must be positive, got {shape:?}"),
            });
        }
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::Dimension {
                op: "tensor",
                msg: format!("shape {shape:?} needs {count} values, got {}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Column vector `d×1`.
    pub fn column_vector(data: Vec<f64>) -> Result<Self> {
        let d = data.len();
        Self::new(vec![d, 1], data)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension {
                op: "from_rows",
                msg: "ragged rows".into(),
            });
        }
        Self::matrix(
            r,
            c,
            rows.iter().flat_map(|row| row.iter().copied()).collect(),
        )
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1, 1],
            data: vec![v],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        assert!(
            !shape.is_empty() && !shape.contains(&0),
            "extents must be positive: {shape:?}"
        );
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// I.i.d. zero-mean Gaussian entries with the given standard deviation.
    pub fn randn<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(shape);
        for v in &mut t.data {
            let z: f64 = StandardNormal.sample(rng);
            *v = z * std;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Dimension {
                op: "dims2",
                msg: format!("expected a matrix, got shape {:?}", self.shape),
            }),
        }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    /// Value of a `1×1` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.at(r, c)).collect()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.cols();
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: vec![c, r],
            data: out,
        }
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(shape, self.data)
    }

    /// Sub-tensor `index` along the leading axis, e.g. one feature map out of
    /// a stacked `[n, C, N]` tensor.
    pub fn slice_outer(&self, index: usize) -> Result<Tensor> {
        if self.rank() < 2 {
            return Err(Error::Dimension {
                op: "slice_outer",
                msg: format!("needs rank >= 2, got {:?}", self.shape),
            });
        }
        if index >= self.shape[0] {
            return Err(Error::Index {
                what: "leading axis",
                index,
                len: self.shape[0],
            });
        }
        let inner: usize = self.shape[1..].iter().product();
        let mut shape = self.shape[1..].to_vec();
        if shape.len() == 1 {
            shape.push(1);
        }
        Tensor::new(
            shape,
            self.data[index * inner..(index + 1) * inner].to_vec(),
        )
    }

    /// Stacks equally-shaped tensors along a new leading axis.
    pub fn stack(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::Dimension {
            op: "stack",
            msg: "empty list".into(),
        })?;
        let mut data = Vec::with_capacity(first.len() * parts.len());
        for p in parts {
            if p.shape != first.shape {
                return Err(Error::Shape {
                    op: "stack",
                    lhs: first.shape.clone(),
                    rhs: p.shape.clone(),
                });
            }
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&first.shape);
        Tensor::new(shape, data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Plain matrix product, no shape checking beyond debug asserts.
    pub(crate) fn matmul_raw(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = (a.rows(), a.cols());
        let n = b.cols();
        debug_assert_eq!(k, b.rows());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let av = a.data[i * k + p];
                if av == 0.0 {
                    continue;
                }
                let b_row = &b.data[p * n..(p + 1) * n];
                for (o, bv) in out_row.iter_mut().zip(b_row) {
                    *o += av * bv;
                }
            }
        }
        Tensor {
            shape: vec![m, n],
            data: out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_extent_and_count_mismatch() {
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![1.0; 4]).is_ok());
    }

    #[test]
    fn slice_outer_and_stack_are_inverse() {
        let a = Tensor::matrix(2, 3, (0..6).map(f64::from).collect()).unwrap();
        let b = a.map(|v| v + 10.0);
        let s = Tensor::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.shape(), &[2, 2, 3]);
        assert_eq!(s.slice_outer(0).unwrap(), a);
        assert_eq!(s.slice_outer(1).unwrap(), b);
        assert!(s.slice_outer(2).is_err());
    }

    #[test]
    fn transpose_twice_is_identity() {
        let a = Tensor::matrix(2, 3, (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(a.transpose().at(2, 1), 5.0);
        assert_eq!(a.transpose().transpose(), a);
    }
}
