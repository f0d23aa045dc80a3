use super::{ProblemError, Result};
use crate::linalg::Vector;

/// Square matrix with equal lower and upper bandwidth, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self { n, bw: bandwidth, data: vec![0.0; n * (2 * bandwidth + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw, "({i}, {j}) outside band {}", self.bw);
        i * (2 * self.bw + 1) + j + self.bw - i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul(&self, x: &Vector) -> Vector {
        Vector::from_fn(self.n, |i, _| {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw + 1).min(self.n);
            (lo..hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
        })
    }

    /// LU factorization without pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(ProblemError::LinearSolveFailed("non-finite matrix entry".into()));
        }
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot.abs() <= 1e-14 * scale || scale == 0.0 {
                return Err(ProblemError::LinearSolveFailed(format!("zero pivot at row {k}")));
            }
            let end = (k + self.bw + 1).min(n);
            for i in k + 1..end {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..end {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Ok(BandedLu { lu: self })
    }
}

/// Factors of a [`BandedMatrix`], reusable across right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedLu {
    lu: BandedMatrix,
}

impl BandedLu {
    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        let a = &self.lu;
        let n = a.n;
        if b.len() != n {
            return Err(ProblemError::DimensionMismatch { expected: n, got: b.len() });
        }
        let mut x = b.clone();
        for i in 0..n {
            let lo = i.saturating_sub(a.bw);
            let mut acc = x[i];
            for j in lo..i {
                acc -= a.data[a.idx(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + a.bw + 1).min(n);
            let mut acc = x[i];
            for j in i + 1..hi {
                acc -= a.data[a.idx(i, j)] * x[j];
            }
            x[i] = acc / a.data[a.idx(i, i)];
        }
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(ProblemError::LinearSolveFailed("non-finite solution".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, bw) = (30, 4);
        let mut band = BandedMatrix::zeros(n, bw);
        let mut dense = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                let v = if i == j { 20.0 } else { rng.random_range(-1.0..1.0) };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        assert!((band.mul(&b) - &dense * &b).norm() < 1e-12);
        let x = band.factor().unwrap().solve(&b).unwrap();
        let oracle = dense.lu().solve(&b).unwrap();
        assert!((x - &oracle).norm() < 1e-12 * oracle.norm());
    }

    #[test]
    fn zero_pivot() {
        let mut band = BandedMatrix::zeros(2, 1);
        band.add(0, 1, 1.0);
        band.add(1, 0, 1.0);
        assert!(matches!(band.factor(), Err(ProblemError::LinearSolveFailed(_))));
    }
}
