use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_len, FixedPointProblem, ProblemError, Result};
use crate::linalg::{Matrix, Vector};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Nonnegative column-stochastic matrix in compressed sparse column form.
///
/// Dangling (empty) columns stand for the uniform column `e/n` and are
/// applied matrix-free.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseStochasticMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    dangling: Vec<usize>,
}

impl SparseStochasticMatrix {
    /// Validates an already normalized CSC matrix. Every column must be
    /// nonempty, nonnegative and sum to one within `1e-12`.
    pub fn new(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if col_ptr.len() != n + 1 || col_ptr[0] != 0 || col_ptr[n] != row_idx.len() || row_idx.len() != values.len() {
            return Err(ProblemError::NotStochastic("malformed CSC arrays".into()));
        }
        for j in 0..n {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(ProblemError::NotStochastic("column pointers decrease".into()));
            }
            let range = col_ptr[j]..col_ptr[j + 1];
            if row_idx[range.clone()].iter().any(|&i| i >= n) {
                return Err(ProblemError::NotStochastic(format!("row index out of range in column {j}")));
            }
            let col = &values[range];
            if col.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(ProblemError::NotStochastic(format!("negative or non-finite entry in column {j}")));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ProblemError::NotStochastic(format!("column {j} sums to {sum}")));
            }
        }
        Ok(Self { n, col_ptr, row_idx, values, dangling: Vec::new() })
    }

    /// Builds from `(row, col, weight)` triplets: duplicates are summed,
    /// nonzero columns scaled to unit sum, empty columns become uniform.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(ProblemError::EmptyMatrix);
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(ProblemError::NotStochastic(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ProblemError::NotStochastic(format!("entry ({i}, {j}) = {v}")));
            }
            cols[j].push((i, v));
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut dangling = Vec::new();
        col_ptr.push(0);
        for (j, mut col) in cols.into_iter().enumerate() {
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            col.retain(|&(_, v)| v > 0.0);
            let sum: f64 = col.iter().map(|&(_, v)| v).sum();
            if col.is_empty() {
                dangling.push(j);
            } else if (sum - 1.0).abs() <= f64::EPSILON {
                for (i, v) in col {
                    row_idx.push(i);
                    values.push(v);
                }
            } else {
                for (i, v) in col {
                    row_idx.push(i);
                    values.push(v / sum);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self { n, col_ptr, row_idx, values, dangling })
    }

    /// Random matrix with `nnz_per_col` distinct entries of equal weight per column.
    pub fn random<R: Rng>(n: usize, nnz_per_col: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || nnz_per_col == 0 || nnz_per_col > n {
            return Err(ProblemError::InvalidParameter(format!("n={n}, nnz per column={nnz_per_col}")));
        }
        let mut triplets = Vec::with_capacity(n * nnz_per_col);
        for j in 0..n {
            for i in index::sample(rng, n, nnz_per_col) {
                triplets.push((i, j, 1.0));
            }
        }
        Self::from_triplets(n, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn dangling_columns(&self) -> &[usize] {
        &self.dangling
    }

    /// `S u`.
    pub fn mul(&self, u: &Vector) -> Vector {
        let mut out = Vector::zeros(self.n);
        for j in 0..self.n {
            let uj = u[j];
            if uj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[k]] += self.values[k] * uj;
            }
        }
        if !self.dangling.is_empty() {
            let mass: f64 = self.dangling.iter().map(|&j| u[j]).sum();
            out.add_scalar_mut(mass / self.n as f64);
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                if self.col_ptr[j] == self.col_ptr[j + 1] {
                    1.0
                } else {
                    self.values[self.col_ptr[j]..self.col_ptr[j + 1]].iter().sum()
                }
            })
            .collect()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                m[(self.row_idx[k], j)] += self.values[k];
            }
        }
        for &j in &self.dangling {
            m.column_mut(j).fill(1.0 / self.n as f64);
        }
        m
    }
}

/// `G(u) = α S u + (1 − α)/n · (eᵀu) e`.
#[derive(Debug, Clone)]
pub struct PageRankProblem {
    s: SparseStochasticMatrix,
    alpha: f64,
    u0: Vector,
}

impl PageRankProblem {
    pub fn new(s: SparseStochasticMatrix, alpha: f64, u0: Vector) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(ProblemError::InvalidParameter(format!("damping factor {alpha} not in [0, 1)")));
        }
        check_len(s.dim(), &u0)?;
        if u0.iter().any(|&v| !(v >= 0.0)) || (u0.sum() - 1.0).abs() > 1e-10 {
            return Err(ProblemError::InvalidParameter("initial vector is not a probability vector".into()));
        }
        Ok(Self { s, alpha, u0 })
    }

    /// Starts from the uniform vector.
    pub fn with_uniform_start(s: SparseStochasticMatrix, alpha: f64) -> Result<Self> {
        let n = s.dim();
        Self::new(s, alpha, Vector::from_element(n, 1.0 / n as f64))
    }

    pub fn matrix(&self) -> &SparseStochasticMatrix {
        &self.s
    }

    pub fn damping(&self) -> f64 {
        self.alpha
    }
}

impl FixedPointProblem for PageRankProblem {
    fn name(&self) -> String {
        format!("pagerank(n={}, alpha={})", self.s.dim(), self.alpha)
    }

    fn dim(&self) -> usize {
        self.s.dim()
    }

    fn evaluate(&self, u: &Vector) -> Result<Vector> {
        check_len(self.s.dim(), u)?;
        let mut out = self.s.mul(u) * self.alpha;
        out.add_scalar_mut((1.0 - self.alpha) * u.sum() / self.s.dim() as f64);
        Ok(out)
    }

    fn initial_guess(&self) -> Vector {
        self.u0.clone()
    }
}

/// Seeded web-graph stand-in with slow power-method convergence.
///
/// The graph splits into `clusters` disconnected components of unequal
/// size, each one bipartite between two sides of unequal size, with
/// `nnz_per_col` random links per node into the opposite side. `S` then
/// has eigenvalues `±1` with multiplicity `clusters`, so the power method
/// contracts at rate `α`. The returned start vector is uniform on one side
/// of the smallest cluster.
pub fn clustered_pagerank_fixture(
    n: usize,
    nnz_per_col: usize,
    clusters: usize,
    seed: u64,
) -> Result<(SparseStochasticMatrix, Vector)> {
    let weight_total: usize = (1..=clusters).sum();
    if clusters == 0 || n < 4 * weight_total * nnz_per_col.max(1) {
        return Err(ProblemError::InvalidParameter(format!(
            "n={n} too small for {clusters} clusters with {nnz_per_col} links per node"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes: Vec<usize> = (1..=clusters).map(|w| n * w / weight_total).collect();
    let assigned: usize = sizes.iter().sum();
    *sizes.last_mut().expect("clusters > 0") += n - assigned;

    let mut triplets = Vec::with_capacity(n * nnz_per_col);
    let mut start = 0;
    let mut u0 = Vector::zeros(n);
    for (c, &size) in sizes.iter().enumerate() {
        let side_a = size * 9 / 20;
        let (a, b) = (start..start + side_a, start + side_a..start + size);
        for j in a.clone() {
            for i in index::sample(&mut rng, b.len(), nnz_per_col.min(b.len())) {
                triplets.push((b.start + i, j, 1.0));
            }
        }
        for j in b.clone() {
            for i in index::sample(&mut rng, a.len(), nnz_per_col.min(a.len())) {
                triplets.push((a.start + i, j, 1.0));
            }
        }
        if c == 0 {
            for j in a {
                u0[j] = 1.0 / side_a as f64;
            }
        }
        start += size;
    }
    Ok((SparseStochasticMatrix::from_triplets(n, &triplets)?, u0))
}
