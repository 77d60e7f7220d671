use crate::diffgraph::Tensor;
use crate::error::{Error, Result};

/// Rule-selection weights `a[j][i][k]` for one head: rank j, step i,
/// operator k (k = 0 is the identity).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTensor {
    rank: usize,
    steps: usize,
    operators: usize,
    data: Vec<f64>,
}

/// Borrowed `steps × operators` view of one rank.
#[derive(Clone, Copy, Debug)]
pub struct RankSlice<'a> {
    steps: usize,
    operators: usize,
    data: &'a [f64],
}

impl<'a> RankSlice<'a> {
    pub fn new(steps: usize, operators: usize, data: &'a [f64]) -> Result<Self> {
        if data.len() != steps * operators {
            return Err(Error::Dimension(format!(
                "rank slice of {} values is not {steps}×{operators}",
                data.len()
            )));
        }
        Ok(Self {
            steps,
            operators,
            data,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn operators(&self) -> usize {
        self.operators
    }

    pub fn step(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.operators..(i + 1) * self.operators]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.operators + k]
    }
}

impl CoefficientTensor {
    pub fn zeros(rank: usize, steps: usize, operators: usize) -> Self {
        Self {
            rank,
            steps,
            operators,
            data: vec![0.0; rank * steps * operators],
        }
    }

    pub fn from_vec(rank: usize, steps: usize, operators: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rank * steps * operators {
            return Err(Error::Dimension(format!(
                "{} coefficients for shape {rank}×{steps}×{operators}",
                data.len()
            )));
        }
        Ok(Self {
            rank,
            steps,
            operators,
            data,
        })
    }

    /// (rank, steps, operators)
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rank, self.steps, self.operators)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn operators(&self) -> usize {
        self.operators
    }

    fn offset(&self, j: usize, i: usize) -> usize {
        (j * self.steps + i) * self.operators
    }

    pub fn get(&self, j: usize, i: usize, k: usize) -> f64 {
        self.data[self.offset(j, i) + k]
    }

    pub fn set(&mut self, j: usize, i: usize, k: usize, v: f64) {
        let o = self.offset(j, i);
        self.data[o + k] = v;
    }

    pub fn step(&self, j: usize, i: usize) -> &[f64] {
        let o = self.offset(j, i);
        &self.data[o..o + self.operators]
    }

    pub fn step_mut(&mut self, j: usize, i: usize) -> &mut [f64] {
        let o = self.offset(j, i);
        &mut self.data[o..o + self.operators]
    }

    /// `operators × 1` column for use with the sparse mixing kernel.
    pub fn step_column(&self, j: usize, i: usize) -> Tensor {
        Tensor::column(self.step(j, i).to_vec())
    }

    pub fn rank_slice(&self, j: usize) -> RankSlice<'_> {
        let o = self.offset(j, 0);
        RankSlice {
            steps: self.steps,
            operators: self.operators,
            data: &self.data[o..o + self.steps * self.operators],
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// True when every (rank, step) row sums to one within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        (0..self.rank).all(|j| {
            (0..self.steps).all(|i| (self.step(j, i).iter().sum::<f64>() - 1.0).abs() <= tol)
        })
    }

    /// Concatenates ranks of tensors with equal step/operator shape.
    pub fn stack(parts: &[CoefficientTensor]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::Argument("nothing to stack".into()));
        };
        let (steps, ops) = (first.steps, first.operators);
        let mut data = Vec::new();
        let mut rank = 0;
        for p in parts {
            if (p.steps, p.operators) != (steps, ops) {
                return Err(Error::Dimension(format!(
                    "cannot stack {}×{} with {steps}×{ops}",
                    p.steps, p.operators
                )));
            }
            rank += p.rank;
            data.extend_from_slice(&p.data);
        }
        Self::from_vec(rank, steps, ops, data)
    }
}
