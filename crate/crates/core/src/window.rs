//! Rolling iterate histories.
//!
//! A [`SequenceWindow`] keeps the last `capacity` vectors of a sequence and
//! addresses them by their global generation index, so callers can ask for
//! `ΔS_n^{(k)}` with the same `n` they would write on paper. Differences are
//! recomputed on every request.

use std::collections::VecDeque;

use thiserror::Error;

use crate::linalg::{Matrix, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("index range {start}..={end} not held (window holds {first}..{next})")]
    OutOfWindow {
        start: usize,
        end: usize,
        first: usize,
        next: usize,
    },
    #[error("vector has dimension {got}, window expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector contains non-finite entries")]
    NonFinite,
    #[error("window capacity must be at least 1")]
    ZeroCapacity,
}

pub type Result<T> = std::result::Result<T, WindowError>;

#[derive(Debug, Clone)]
pub struct SequenceWindow {
    dim: usize,
    capacity: usize,
    entries: VecDeque<Vector>,
    first: usize,
}

impl SequenceWindow {
    pub fn new(dim: usize, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(WindowError::ZeroCapacity);
        }
        Ok(Self {
            dim,
            capacity,
            entries: VecDeque::with_capacity(capacity),
            first: 0,
        })
    }

    /// Builds a window holding `vectors` as indices `0..vectors.len()`.
    pub fn from_vectors(vectors: &[Vector]) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.len());
        let mut w = Self::new(dim, vectors.len().max(1))?;
        for v in vectors {
            w.push(v.clone())?;
        }
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Global index of the oldest held vector.
    pub fn first_index(&self) -> usize {
        self.first
    }

    /// Global index the next pushed vector will receive.
    pub fn next_index(&self) -> usize {
        self.first + self.entries.len()
    }

    fn validate(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim {
            return Err(WindowError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(WindowError::NonFinite);
        }
        Ok(())
    }

    /// Appends a vector, evicting the oldest one when full.
    pub fn push(&mut self, v: Vector) -> Result<()> {
        self.validate(&v)?;
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
            self.first += 1;
        }
        self.entries.push_back(v);
        Ok(())
    }

    /// Overwrites the newest vector in place (its global index is kept).
    pub fn replace_last(&mut self, v: Vector) -> Result<()> {
        self.validate(&v)?;
        match self.entries.back_mut() {
            Some(last) => {
                *last = v;
                Ok(())
            }
            None => Err(WindowError::OutOfWindow {
                start: 0,
                end: 0,
                first: self.first,
                next: self.first,
            }),
        }
    }

    /// Removes and returns the newest vector.
    pub fn pop_last(&mut self) -> Option<Vector> {
        self.entries.pop_back()
    }

    /// Drops everything older than global index `index`.
    pub fn truncate_before(&mut self, index: usize) {
        while self.first < index && !self.entries.is_empty() {
            self.entries.pop_front();
            self.first += 1;
        }
    }

    pub fn clear(&mut self) {
        self.first = self.next_index();
        self.entries.clear();
    }

    fn check_range(&self, start: usize, count: usize) -> Result<()> {
        let end = start + count.max(1) - 1;
        if count == 0 || start < self.first || end >= self.next_index() {
            return Err(WindowError::OutOfWindow {
                start,
                end,
                first: self.first,
                next: self.next_index(),
            });
        }
        Ok(())
    }

    /// The vector with global index `index`.
    pub fn get(&self, index: usize) -> Result<&Vector> {
        self.check_range(index, 1)?;
        Ok(&self.entries[index - self.first])
    }

    pub fn latest(&self) -> Option<&Vector> {
        self.entries.back()
    }

    /// `Δs_i = s_{i+1} − s_i`.
    pub fn delta(&self, index: usize) -> Result<Vector> {
        self.check_range(index, 2)?;
        let off = index - self.first;
        Ok(&self.entries[off + 1] - &self.entries[off])
    }

    /// `Δ²s_i = s_{i+2} − 2s_{i+1} + s_i`, evaluated as `Δs_{i+1} − Δs_i`.
    pub fn delta2(&self, index: usize) -> Result<Vector> {
        self.check_range(index, 3)?;
        Ok(self.delta(index + 1)? - self.delta(index)?)
    }

    /// `S_start^{(cols)} = [s_start, …, s_{start+cols−1}]`.
    pub fn matrix(&self, start: usize, cols: usize) -> Result<Matrix> {
        self.check_range(start, cols)?;
        let off = start - self.first;
        Ok(Matrix::from_fn(self.dim, cols, |r, c| self.entries[off + c][r]))
    }

    /// `ΔS_start^{(cols)}`: column `j` is `s_{start+j+1} − s_{start+j}`.
    pub fn delta_matrix(&self, start: usize, cols: usize) -> Result<Matrix> {
        self.check_range(start, cols + 1)?;
        let mut m = Matrix::zeros(self.dim, cols);
        for j in 0..cols {
            m.set_column(j, &self.delta(start + j)?);
        }
        Ok(m)
    }

    /// `Δ²S_start^{(cols)}`: column `j` is `Δ²s_{start+j}`.
    pub fn delta2_matrix(&self, start: usize, cols: usize) -> Result<Matrix> {
        self.check_range(start, cols + 2)?;
        let mut m = Matrix::zeros(self.dim, cols);
        for j in 0..cols {
            m.set_column(j, &self.delta2(start + j)?);
        }
        Ok(m)
    }

    /// Stacks `k` blocks; block row `r` is `ΔS_{n+r}^{(cols)}`.
    pub fn stacked_delta(&self, n: usize, k: usize, cols: usize) -> Result<Matrix> {
        self.check_range(n, k + cols)?;
        self.stack(k, cols, |r| self.delta_matrix(n + r, cols))
    }

    /// Stacks `k` blocks; block row `r` is `Δ²S_{n+r}^{(cols)}`.
    pub fn stacked_delta2(&self, n: usize, k: usize, cols: usize) -> Result<Matrix> {
        self.check_range(n, k + cols + 1)?;
        self.stack(k, cols, |r| self.delta2_matrix(n + r, cols))
    }

    /// `[Δs_start; Δs_{start+1}; …; Δs_{start+k−1}]` as one vector of length `k·p`.
    pub fn stacked_column(&self, start: usize, k: usize) -> Result<Vector> {
        self.check_range(start, k + 1)?;
        let mut out = Vector::zeros(k * self.dim);
        for r in 0..k {
            out.rows_mut(r * self.dim, self.dim)
                .copy_from(&self.delta(start + r)?);
        }
        Ok(out)
    }

    fn stack(
        &self,
        k: usize,
        cols: usize,
        block: impl Fn(usize) -> Result<Matrix>,
    ) -> Result<Matrix> {
        let p = self.dim;
        let mut out = Matrix::zeros(k * p, cols);
        for r in 0..k {
            out.view_mut((r * p, 0), (p, cols)).copy_from(&block(r)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn scalar_window(values: &[f64]) -> SequenceWindow {
        let vs: Vec<Vector> = values.iter().map(|&v| dvector![v]).collect();
        SequenceWindow::from_vectors(&vs).unwrap()
    }

    #[test]
    fn delta_of_constant_is_zero() {
        let w = SequenceWindow::from_vectors(&vec![dvector![1.0, -2.0]; 4]).unwrap();
        assert_eq!(w.delta_matrix(0, 3).unwrap(), Matrix::zeros(2, 3));
    }

    #[test]
    fn delta_hand_example() {
        let vs: Vec<Vector> = (0..3).map(|n| dvector![n as f64, (n * n) as f64]).collect();
        let w = SequenceWindow::from_vectors(&vs).unwrap();
        assert_eq!(w.delta_matrix(0, 2).unwrap(), dmatrix![1.0, 1.0; 1.0, 3.0]);
    }

    #[test]
    fn delta2_examples() {
        let affine: Vec<Vector> = (0..5).map(|n| dvector![1.0 + 2.0 * n as f64, -(n as f64)]).collect();
        let w = SequenceWindow::from_vectors(&affine).unwrap();
        assert_eq!(w.delta2_matrix(0, 3).unwrap(), Matrix::zeros(2, 3));

        let w = scalar_window(&[1.0, 2.0, 4.0, 8.0]);
        assert_eq!(w.delta2_matrix(0, 2).unwrap(), dmatrix![1.0, 2.0]);
    }

    #[test]
    fn stacked_examples() {
        let w = scalar_window(&[0.0, 1.0, 4.0, 9.0, 16.0]);
        assert_eq!(w.stacked_delta(0, 2, 2).unwrap(), dmatrix![1.0, 3.0; 3.0, 5.0]);
        assert_eq!(w.stacked_delta(1, 1, 3).unwrap(), w.delta_matrix(1, 3).unwrap());

        let w = scalar_window(&[1.0, 2.0, 4.0, 8.0, 16.0]);
        assert_eq!(w.stacked_delta2(0, 2, 2).unwrap(), dmatrix![1.0, 2.0; 2.0, 4.0]);
        assert_eq!(w.stacked_column(2, 2).unwrap(), dvector![4.0, 8.0]);
    }

    #[test]
    fn affine_stacked_delta2_is_zero() {
        let affine: Vec<Vector> = (0..7).map(|n| dvector![3.0 * n as f64, 1.0]).collect();
        let w = SequenceWindow::from_vectors(&affine).unwrap();
        assert_eq!(w.stacked_delta2(0, 2, 3).unwrap(), Matrix::zeros(4, 3));
    }

    #[test]
    fn eviction_raises_out_of_window() {
        let mut w = SequenceWindow::new(1, 3).unwrap();
        for i in 0..5 {
            w.push(dvector![i as f64]).unwrap();
        }
        assert_eq!(w.first_index(), 2);
        assert!(matches!(w.get(1), Err(WindowError::OutOfWindow { .. })));
        assert!(matches!(w.delta_matrix(1, 2), Err(WindowError::OutOfWindow { .. })));
        assert!(matches!(w.delta(4), Err(WindowError::OutOfWindow { .. })));
        assert_eq!(w.get(4).unwrap()[0], 4.0);
        assert_eq!(w.delta_matrix(2, 2).unwrap(), dmatrix![1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_vectors() {
        let mut w = SequenceWindow::new(2, 3).unwrap();
        assert!(matches!(
            w.push(dvector![1.0]),
            Err(WindowError::DimensionMismatch { .. })
        ));
        assert_eq!(w.push(dvector![1.0, f64::NAN]), Err(WindowError::NonFinite));
        assert_eq!(SequenceWindow::new(2, 0).unwrap_err(), WindowError::ZeroCapacity);
    }

    fn arb_window() -> impl Strategy<Value = SequenceWindow> {
        (1usize..4, 6usize..10).prop_flat_map(|(p, len)| {
            proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, p), len).prop_map(
                |rows| {
                    let vs: Vec<Vector> = rows.into_iter().map(Vector::from_vec).collect();
                    SequenceWindow::from_vectors(&vs).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn delta2_is_delta_of_delta(w in arb_window()) {
            let len = w.len();
            let cols = len - 2;
            let d = w.delta_matrix(0, len - 1).unwrap();
            let mut composed = Matrix::zeros(w.dim(), cols);
            for j in 0..cols {
                composed.set_column(j, &(d.column(j + 1) - d.column(j)));
            }
            prop_assert_eq!(w.delta2_matrix(0, cols).unwrap(), composed);
        }

        #[test]
        fn stacked_blocks_match_slices(w in arb_window(), k in 1usize..3) {
            let p = w.dim();
            let cols = 2;
            let sd = w.stacked_delta(0, k, cols).unwrap();
            let sd2 = w.stacked_delta2(0, k, cols).unwrap();
            for r in 0..k {
                prop_assert_eq!(sd.view((r * p, 0), (p, cols)).into_owned(), w.delta_matrix(r, cols).unwrap());
                prop_assert_eq!(sd2.view((r * p, 0), (p, cols)).into_owned(), w.delta2_matrix(r, cols).unwrap());
            }
        }
    }
}
