use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major tensor of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::invalid(format!("tensor shape must be nonempty and positive, got {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch { op: "tensor", left: shape, right: vec![data.len()] });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        assert!(!shape.is_empty() && !shape.contains(&0), "invalid tensor shape {shape:?}");
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::matrix(r, c, rows.concat())
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

    /// `(rows, cols)` view: a 1-D tensor is one row.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            s => (s[0], s[1..].iter().product()),
        }
    }

    pub fn rows(&self) -> usize {
        self.dims2().0
    }

    pub fn cols(&self) -> usize {
        self.dims2().1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(Error::ShapeMismatch { op: "reshape", left: self.shape, right: shape });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.data.len() != other.data.len() {
            return Err(Error::ShapeMismatch { op: "add", left: self.shape.clone(), right: other.shape.clone() });
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn scale(&mut self, f: f64) {
        self.data.iter_mut().for_each(|v| *v *= f);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · other` for `[m, k] x [k, n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2();
        let (k2, n) = other.dims2();
        if k != k2 {
            return Err(Error::ShapeMismatch { op: "matmul", left: self.shape.clone(), right: other.shape.clone() });
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                o_row.iter_mut().zip(b_row).for_each(|(o, &b)| *o += a * b);
            }
        }
        Tensor::matrix(m, n, out)
    }

    /// `selfᵀ · other` for `[k, m] x [k, n]`.
    pub fn t_matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (k, m) = self.dims2();
        let (k2, n) = other.dims2();
        if k != k2 {
            return Err(Error::ShapeMismatch { op: "t_matmul", left: self.shape.clone(), right: other.shape.clone() });
        }
        let mut out = vec![0.0; m * n];
        for p in 0..k {
            let a_row = &self.data[p * m..(p + 1) * m];
            let b_row = &other.data[p * n..(p + 1) * n];
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out[i * n..(i + 1) * n];
                o_row.iter_mut().zip(b_row).for_each(|(o, &b)| *o += a * b);
            }
        }
        Tensor::matrix(m, n, out)
    }

    /// `self · otherᵀ` for `[m, k] x [n, k]`.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2();
        let (n, k2) = other.dims2();
        if k != k2 {
            return Err(Error::ShapeMismatch { op: "matmul_t", left: self.shape.clone(), right: other.shape.clone() });
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &other.data[j * k..(j + 1) * k];
                out[i * n + j] = a_row.iter().zip(b_row).map(|(a, b)| a * b).sum();
            }
        }
        Tensor::matrix(m, n, out)
    }

    /// Columns `[start, start + width)` of a 2-D tensor.
    pub fn columns(&self, start: usize, width: usize) -> Tensor {
        let (r, c) = self.dims2();
        assert!(start + width <= c);
        let mut data = Vec::with_capacity(r * width);
        for i in 0..r {
            data.extend_from_slice(&self.data[i * c + start..i * c + start + width]);
        }
        Tensor { shape: vec![r, width], data }
    }

    /// Writes `block` into columns starting at `start`.
    pub fn set_columns(&mut self, start: usize, block: &Tensor) {
        let (r, c) = self.dims2();
        let (br, bw) = block.dims2();
        assert!(br == r && start + bw <= c);
        for i in 0..r {
            self.data[i * c + start..i * c + start + bw].copy_from_slice(block.row(i));
        }
    }

    /// Sum over rows, giving one value per column.
    pub fn sum_rows(&self) -> Tensor {
        let (r, c) = self.dims2();
        let mut out = vec![0.0; c];
        for i in 0..r {
            out.iter_mut().zip(&self.data[i * c..(i + 1) * c]).for_each(|(o, v)| *o += v);
        }
        Tensor { shape: vec![c], data: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_invariant() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
        assert_eq!(Tensor::zeros(&[2, 3]).len(), 6);
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::matrix(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[58., 64., 139., 154.]);
        let at = Tensor::matrix(3, 2, vec![1., 4., 2., 5., 3., 6.]).unwrap();
        assert_eq!(at.t_matmul(&b).unwrap(), ab);
        let bt = Tensor::matrix(2, 3, vec![7., 9., 11., 8., 10., 12.]).unwrap();
        assert_eq!(a.matmul_t(&bt).unwrap(), ab);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn column_blocks() {
        let a = Tensor::matrix(2, 4, (0..8).map(f64::from).collect()).unwrap();
        let mid = a.columns(1, 2);
        assert_eq!(mid.data(), &[1., 2., 5., 6.]);
        let mut z = Tensor::zeros(&[2, 4]);
        z.set_columns(1, &mid);
        assert_eq!(z.data(), &[0., 1., 2., 0., 0., 5., 6., 0.]);
        assert_eq!(a.sum_rows().data(), &[4., 6., 8., 10.]);
    }
}
