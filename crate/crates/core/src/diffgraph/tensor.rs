use crate::error::{Error, Result};

/// Dense row-major matrix of f64. Column vectors are `rows × 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {rows}×{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column(data: Vec<f64>) -> Self {
        Self {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    /// `rows × ids.len()` matrix whose column c is the unit vector at `ids[c]`.
    pub fn one_hot_columns(rows: usize, ids: &[usize]) -> Result<Self> {
        let mut t = Self::zeros(rows, ids.len());
        for (c, &id) in ids.iter().enumerate() {
            if id >= rows {
                return Err(Error::Index(format!("one-hot index {id} ≥ {rows}")));
            }
            t.data[id * ids.len() + c] = 1.0;
        }
        Ok(t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
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

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Scalar value of a 1×1 tensor.
    pub fn item(&self) -> Option<f64> {
        (self.rows == 1 && self.cols == 1).then(|| self.data[0])
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_assign(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out += a · b` for row-major `a: m×k`, `b: k×n`, `out: m×n`.
pub(crate) fn gemm_acc(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    let (m, k) = a.shape();
    let n = b.cols;
    for r in 0..m {
        let out_row = &mut out.data[r * n..(r + 1) * n];
        for t in 0..k {
            let w = a.data[r * k + t];
            if w == 0.0 {
                continue;
            }
            let b_row = &b.data[t * n..(t + 1) * n];
            for (o, x) in out_row.iter_mut().zip(b_row) {
                *o += w * x;
            }
        }
    }
}

/// `out += aᵀ · b` for `a: m×k`, `b: m×n`, `out: k×n`.
pub(crate) fn gemm_tn_acc(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    let (m, k) = a.shape();
    let n = b.cols;
    for r in 0..m {
        let b_row = &b.data[r * n..(r + 1) * n];
        for t in 0..k {
            let w = a.data[r * k + t];
            if w == 0.0 {
                continue;
            }
            let out_row = &mut out.data[t * n..(t + 1) * n];
            for (o, x) in out_row.iter_mut().zip(b_row) {
                *o += w * x;
            }
        }
    }
}

/// `out += a · bᵀ` for `a: m×n`, `b: k×n`, `out: m×k`.
pub(crate) fn gemm_nt_acc(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    let (m, n) = a.shape();
    let k = b.rows;
    for r in 0..m {
        let a_row = &a.data[r * n..(r + 1) * n];
        for t in 0..k {
            let b_row = &b.data[t * n..(t + 1) * n];
            let dot: f64 = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            out.data[r * k + t] += dot;
        }
    }
}
