//! Small dense kernels shared by every coefficient solver.
//!
//! Windows never hold more than a handful of columns, so everything here is
//! dense and built on `nalgebra`. Unregularized solves go through an SVD of
//! the (metric-weighted) design matrix and never form `XᵀMX`; regularized
//! solves use the shifted normal equations directly.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};
use thiserror::Error;

/// Dense real matrix.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Largest condition estimate accepted for an unregularized solve.
pub const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("system is numerically singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },
    #[error("sum-to-one normalization is numerically unachievable")]
    DegenerateNormalization,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("metric matrix is not symmetric positive semi-definite: {0}")]
    InvalidMetric(String),
    #[error("input contains non-finite entries")]
    NonFinite,
    #[error("regularization parameter must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// The (semi-)norm `‖x‖²_M = xᵀMx` used in the coefficient problems.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Metric {
    #[default]
    Identity,
    /// An explicit symmetric positive semi-definite matrix.
    Explicit(Matrix),
    /// `M = Y·Yᵀ` given through its factor `Y`.
    Factor(Matrix),
}

impl Metric {
    /// Validates and wraps an explicit SPSD matrix.
    pub fn explicit(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(LinalgError::InvalidMetric(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(LinalgError::InvalidMetric(format!(
                "asymmetry {asym:.3e} exceeds tolerance"
            )));
        }
        let norm = m.norm();
        let eig = SymmetricEigen::new(m.clone());
        let min = eig.eigenvalues.min();
        if min < -1e-12 * norm {
            return Err(LinalgError::InvalidMetric(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Metric::Explicit(m))
    }

    /// Dimension the metric acts on, if it is fixed.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Metric::Identity => None,
            Metric::Explicit(m) => Some(m.nrows()),
            Metric::Factor(y) => Some(y.nrows()),
        }
    }

    fn check_dim(&self, rows: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != rows => Err(LinalgError::DimensionMismatch(format!(
                "metric acts on dimension {d}, operand has {rows} rows"
            ))),
            _ => Ok(()),
        }
    }

    /// Returns `M·v`.
    pub fn apply(&self, v: &Vector) -> Vector {
        match self {
            Metric::Identity => v.clone(),
            Metric::Explicit(m) => m * v,
            Metric::Factor(y) => y * (y.transpose() * v),
        }
    }

    /// Returns `XᵀMX`.
    pub fn gram(&self, x: &Matrix) -> Matrix {
        match self {
            Metric::Identity => x.tr_mul(x),
            Metric::Explicit(m) => x.tr_mul(&(m * x)),
            Metric::Factor(y) => {
                let yx = y.tr_mul(x);
                yx.tr_mul(&yx)
            }
        }
    }

    /// Returns `XᵀMy`.
    pub fn cross(&self, x: &Matrix, y: &Vector) -> Vector {
        match self {
            Metric::Identity => x.tr_mul(y),
            Metric::Explicit(m) => x.tr_mul(&(m * y)),
            Metric::Factor(f) => f.tr_mul(x).tr_mul(&f.tr_mul(y)),
        }
    }

    /// A matrix `W` with `WᵀW = M`, applied to the columns of `x`.
    ///
    /// Least-squares problems in the `M`-norm become Euclidean problems in
    /// `W·x`, which lets the unregularized paths avoid squaring.
    pub fn weigh(&self, x: &Matrix) -> Matrix {
        match self {
            Metric::Identity => x.clone(),
            Metric::Factor(y) => y.tr_mul(x),
            Metric::Explicit(m) => {
                let eig = SymmetricEigen::new(m.clone());
                let mut w = eig.eigenvectors.transpose();
                for (mut row, &ev) in w.row_iter_mut().zip(eig.eigenvalues.iter()) {
                    row *= ev.max(0.0).sqrt();
                }
                w * x
            }
        }
    }

    /// Same as [`Metric::weigh`] for a single vector.
    pub fn weigh_vector(&self, v: &Vector) -> Vector {
        let m = Matrix::from_column_slice(v.len(), 1, v.as_slice());
        let w = self.weigh(&m);
        w.column(0).into_owned()
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(LinalgError::InvalidLambda(lambda))
    }
}

pub(crate) fn ensure_finite(m: &[f64]) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Thin SVD with both factors; singular values in the order nalgebra returns.
pub(crate) fn thin_svd(x: &Matrix) -> (Matrix, Vector, Matrix) {
    let svd = SVD::new(x.clone(), true, true);
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("Vᵀ requested");
    (u, svd.singular_values, v_t)
}

/// Scales every column to unit 2-norm; returns the scaled matrix and the
/// norms, or `None` when a column vanishes.
pub(crate) fn equilibrate_columns(x: &Matrix) -> Option<(Matrix, Vector)> {
    let norms = Vector::from_iterator(x.ncols(), x.column_iter().map(|c| c.norm()));
    if norms.iter().any(|&n| n == 0.0) {
        return None;
    }
    let mut scaled = x.clone();
    for (mut c, n) in scaled.column_iter_mut().zip(norms.iter()) {
        c /= *n;
    }
    Some((scaled, norms))
}

/// Least squares through the SVD of the column-equilibrated design,
/// refusing designs whose equilibrated condition number exceeds
/// [`MAX_CONDITION`].
fn svd_lstsq(x: &Matrix, y: &Vector) -> Result<Vector> {
    let (rows, cols) = x.shape();
    if cols == 0 {
        return Ok(Vector::zeros(0));
    }
    let singular = LinalgError::SingularSystem {
        condition: f64::INFINITY,
    };
    if rows < cols {
        return Err(singular);
    }
    let (x, norms) = equilibrate_columns(x).ok_or(singular)?;
    let (u, sigma, v_t) = thin_svd(&x);
    let smax = sigma.max();
    let smin = sigma.min();
    if smax == 0.0 || smin <= smax / MAX_CONDITION {
        let condition = if smin == 0.0 { f64::INFINITY } else { smax / smin };
        return Err(LinalgError::SingularSystem { condition });
    }
    let uty = u.tr_mul(y);
    let mut beta = Vector::zeros(cols);
    for (i, s) in sigma.iter().enumerate() {
        beta += v_t.row(i).transpose() * (uty[i] / s);
    }
    Ok(beta.component_div(&norms))
}

/// Solves `min ‖y − Xβ‖²_M + λ‖β‖²`.
///
/// With `λ = 0` the problem is solved as a least-squares problem on the
/// metric-weighted, column-equilibrated design through an SVD;
/// `SingularSystem` is raised when its condition number exceeds
/// [`MAX_CONDITION`]. With `λ > 0` the shifted normal
/// equations `(XᵀMX + λI)β = XᵀMy` are solved by Cholesky.
pub fn ridge_solve(x: &Matrix, metric: &Metric, y: &Vector, lambda: f64) -> Result<Vector> {
    if x.nrows() != y.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "design has {} rows, target has {}",
            x.nrows(),
            y.len()
        )));
    }
    check_lambda(lambda)?;
    metric.check_dim(x.nrows())?;
    ensure_finite(x.as_slice())?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if lambda == 0.0 {
        let wx = metric.weigh(x);
        let wy = metric.weigh_vector(y);
        return svd_lstsq(&wx, &wy);
    }
    let mut normal = metric.gram(x);
    for i in 0..normal.nrows() {
        normal[(i, i)] += lambda;
    }
    let rhs = metric.cross(x, y);
    match Cholesky::new(normal) {
        Some(chol) => Ok(chol.solve(&rhs)),
        None => Err(LinalgError::SingularSystem {
            condition: f64::INFINITY,
        }),
    }
}

/// Returns `(A + λI)⁻¹e / eᵀ(A + λI)⁻¹e` for symmetric `A`.
///
/// The output always sums to one: it is renormalized after the solve.
pub fn sum_constrained_solve(a: &Matrix, lambda: f64) -> Result<Vector> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(LinalgError::DimensionMismatch(format!(
            "expected a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a.as_slice())?;
    check_lambda(lambda)?;
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] += lambda;
    }
    let eig = SymmetricEigen::new(shifted);
    let dmax = eig.eigenvalues.amax();
    let dmin = eig.eigenvalues.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    let condition = if dmin == 0.0 { f64::INFINITY } else { dmax / dmin };
    if dmin == 0.0 || (lambda == 0.0 && condition > MAX_CONDITION) {
        return Err(LinalgError::SingularSystem { condition });
    }
    let e = Vector::from_element(n, 1.0);
    let c = eig.eigenvectors.tr_mul(&e);
    let scaled = Vector::from_iterator(n, c.iter().zip(eig.eigenvalues.iter()).map(|(c, d)| c / d));
    let z = &eig.eigenvectors * scaled;
    normalize_sum(z)
}

/// Divides `z` by its entry sum, rejecting numerically vanishing sums.
pub(crate) fn normalize_sum(z: Vector) -> Result<Vector> {
    let total: f64 = z.sum();
    let l1: f64 = z.iter().map(|v| v.abs()).sum();
    if !total.is_finite() || total.abs() < 1e-14 * l1 || l1 == 0.0 {
        return Err(LinalgError::DegenerateNormalization);
    }
    let mut alpha = z / total;
    // pin the sum to one after rounding
    let drift = alpha.sum() - 1.0;
    let idx = alpha.iamax();
    alpha[idx] -= drift;
    Ok(alpha)
}

/// Minimizes `‖Xγ‖²_M` subject to `eᵀγ = 1` without forming `XᵀMX`.
///
/// Works from the SVD `W·X = UΣVᵀ`: with `c = Vᵀe` the minimizer is
/// `V·diag(1/σᵢ²)·c` normalized to unit sum, and an exact kernel (σ = 0)
/// takes all of the weight.
pub fn constrained_lstsq(x: &Matrix, metric: &Metric) -> Result<Vector> {
    metric.check_dim(x.nrows())?;
    ensure_finite(x.as_slice())?;
    let cols = x.ncols();
    if cols == 0 {
        return Err(LinalgError::DimensionMismatch("empty design".into()));
    }
    let wx = pad_rows(metric.weigh(x));
    let (_, sigma, v_t) = thin_svd(&wx);
    let e = Vector::from_element(cols, 1.0);
    let c = &v_t * &e;
    let smax = sigma.max();
    let kernel: Vec<usize> = (0..sigma.len())
        .filter(|&i| sigma[i] <= 1e-150 * smax || sigma[i] == 0.0)
        .collect();
    let mut z = Vector::zeros(cols);
    if kernel.is_empty() {
        for i in 0..sigma.len() {
            let w = c[i] / (sigma[i] * sigma[i]);
            z += v_t.row(i).transpose() * w;
        }
    } else {
        for &i in &kernel {
            z += v_t.row(i).transpose() * c[i];
        }
    }
    normalize_sum(z)
}

/// Appends zero rows so the matrix has at least as many rows as columns.
/// `XᵀX` is unchanged and the thin SVD then exposes the full right basis.
pub(crate) fn pad_rows(x: Matrix) -> Matrix {
    let (rows, cols) = x.shape();
    if rows >= cols {
        x
    } else {
        x.resize_vertically(cols, 0.0)
    }
}

/// Unit right singular vector for the smallest singular value, and that value.
///
/// Ties resolve to the lowest index; the sign makes the first nonzero entry
/// positive.
pub fn smallest_right_singular_vector(x: &Matrix) -> (Vector, f64) {
    let padded = pad_rows(x.clone());
    let (_, sigma, v_t) = thin_svd(&padded);
    let mut best = 0;
    for i in 1..sigma.len() {
        if sigma[i] < sigma[best] {
            best = i;
        }
    }
    let mut v = v_t.row(best).transpose();
    let tiny = 1e-14 * v.amax();
    if let Some(first) = v.iter().find(|c| c.abs() > tiny).copied() {
        if first < 0.0 {
            v = -v;
        }
    }
    (v, sigma[best])
}

/// Builds `U·sqrt(Σ² + λI)·Vᵀ` from the thin SVD `X = UΣVᵀ`.
///
/// For tall or square `X` the result satisfies `X̃ᵀX̃ = XᵀX + λI`. For wide
/// `X` the shift only reaches the row space.
pub fn svd_shift(x: &Matrix, lambda: f64) -> Matrix {
    let (u, sigma, v_t) = thin_svd(x);
    let shifted = sigma.map(|s| (s * s + lambda).sqrt());
    let mut us = u;
    for (mut col, s) in us.column_iter_mut().zip(shifted.iter()) {
        col *= *s;
    }
    us * v_t
}

/// Rank-revealing estimate: number of singular values above `tol·σ_max`.
pub fn numerical_rank(x: &Matrix, tol: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    let sigma = SVD::new(x.clone(), false, false).singular_values;
    let smax = sigma.max();
    sigma.iter().filter(|&&s| s > tol * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn qr_lstsq(x: &Matrix, y: &Vector) -> Vector {
        let qr = x.clone().qr();
        let qty = qr.q().tr_mul(y);
        qr.r().solve_upper_triangular(&qty).unwrap()
    }

    #[test]
    fn ridge_projection_and_shrinkage() {
        let x = dmatrix![1.0; 0.0];
        let y = dvector![2.0, 3.0];
        let b0 = ridge_solve(&x, &Metric::Identity, &y, 0.0).unwrap();
        assert!((b0[0] - 2.0).abs() < 1e-15);
        let b1 = ridge_solve(&x, &Metric::Identity, &y, 1.0).unwrap();
        assert!((b1[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ridge_matches_qr_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_matrix(20, 5, &mut rng);
            let y = Vector::from_fn(20, |_, _| StandardNormal.sample(&mut rng));
            let ours = ridge_solve(&x, &Metric::Identity, &y, 0.0).unwrap();
            let oracle = qr_lstsq(&x, &y);
            assert!((&ours - &oracle).norm() <= 1e-9 * oracle.norm());
        }
    }

    #[test]
    fn ridge_normal_equation_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(12, 4, &mut rng);
        let y = Vector::from_fn(12, |_, _| StandardNormal.sample(&mut rng));
        let yf = random_matrix(12, 6, &mut rng);
        for metric in [Metric::Identity, Metric::Factor(yf.clone())] {
            for lambda in [1e-6, 0.1, 3.0] {
                let b = ridge_solve(&x, &metric, &y, lambda).unwrap();
                let mut lhs = metric.gram(&x) * &b;
                lhs += &b * lambda;
                let rhs = metric.cross(&x, &y);
                assert!((lhs - &rhs).norm() <= 1e-10 * rhs.norm());
            }
        }
    }

    #[test]
    fn ridge_explicit_metric_matches_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_matrix(8, 3, &mut rng);
        let y = Vector::from_fn(8, |_, _| StandardNormal.sample(&mut rng));
        let f = random_matrix(8, 5, &mut rng);
        let explicit = Metric::explicit(&f * f.transpose()).unwrap();
        for lambda in [0.0, 0.5] {
            let a = ridge_solve(&x, &Metric::Factor(f.clone()), &y, lambda).unwrap();
            let b = ridge_solve(&x, &explicit, &y, lambda).unwrap();
            assert!((&a - &b).norm() <= 1e-9 * a.norm());
        }
    }

    #[test]
    fn ridge_rejects_duplicate_columns_without_regularization() {
        let x = dmatrix![1.0, 1.0; 2.0, 2.0; 3.0, 3.0];
        let y = dvector![1.0, 0.0, 1.0];
        let err = ridge_solve(&x, &Metric::Identity, &y, 0.0).unwrap_err();
        assert!(matches!(err, LinalgError::SingularSystem { .. }));
        assert!(ridge_solve(&x, &Metric::Identity, &y, 1e-3).is_ok());
    }

    #[test]
    fn explicit_metric_validation() {
        assert!(Metric::explicit(dmatrix![1.0, 2.0; 0.0, 1.0]).is_err());
        assert!(Metric::explicit(dmatrix![1.0, 0.0; 0.0, -1.0]).is_err());
        assert!(Metric::explicit(dmatrix![1.0, 0.0; 0.0, 0.0]).is_ok());
    }

    #[test]
    fn sum_constrained_examples() {
        let a = Matrix::identity(2, 2);
        let alpha = sum_constrained_solve(&a, 0.0).unwrap();
        assert!((alpha[0] - 0.5).abs() < 1e-15 && (alpha[1] - 0.5).abs() < 1e-15);
        let a = dmatrix![1.0, 0.0; 0.0, 3.0];
        let alpha = sum_constrained_solve(&a, 1.0).unwrap();
        assert!((alpha[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((alpha[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    // KKT oracle: [2A e; eᵀ 0][γ; μ] = [0; 1]
    fn kkt_oracle(a: &Matrix) -> Vector {
        let n = a.nrows();
        let mut k = Matrix::zeros(n + 1, n + 1);
        k.view_mut((0, 0), (n, n)).copy_from(&(a * 2.0));
        for i in 0..n {
            k[(i, n)] = 1.0;
            k[(n, i)] = 1.0;
        }
        let mut rhs = Vector::zeros(n + 1);
        rhs[n] = 1.0;
        let sol = k.lu().solve(&rhs).unwrap();
        sol.rows(0, n).into_owned()
    }

    #[test]
    fn sum_constrained_matches_kkt_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = random_matrix(10, 4, &mut rng);
            let a = x.tr_mul(&x);
            let ours = sum_constrained_solve(&a, 0.0).unwrap();
            let oracle = kkt_oracle(&a);
            assert!((&ours - &oracle).norm() <= 1e-9 * oracle.norm());
            assert!((ours.sum() - 1.0).abs() <= 1e-14);
            let via_x = constrained_lstsq(&x, &Metric::Identity).unwrap();
            assert!((&via_x - &oracle).norm() <= 1e-9 * oracle.norm());
        }
    }

    #[test]
    fn sum_constrained_singular_without_shift() {
        let a = dmatrix![1.0, 1.0; 1.0, 1.0];
        assert!(matches!(
            sum_constrained_solve(&a, 0.0),
            Err(LinalgError::SingularSystem { .. })
        ));
    }

    #[test]
    fn sum_constrained_degenerate_normalization() {
        // indefinite input: (A)⁻¹e = (1, -1) sums to zero
        let a = dmatrix![1.0, 0.0; 0.0, -1.0];
        assert_eq!(
            sum_constrained_solve(&a, 0.0),
            Err(LinalgError::DegenerateNormalization)
        );
    }

    #[test]
    fn constrained_lstsq_takes_exact_kernel() {
        // columns (1,0), (2,0), (0,1): kernel along (2,-1,0)
        let x = dmatrix![1.0, 2.0, 0.0; 0.0, 0.0, 1.0];
        let alpha = constrained_lstsq(&x, &Metric::Identity).unwrap();
        assert!((&x * &alpha).norm() < 1e-14);
        assert!((alpha.sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn smallest_singular_vector_examples() {
        let (v, s) = smallest_right_singular_vector(&dmatrix![3.0, 0.0; 0.0, 1.0]);
        assert!((s - 1.0).abs() < 1e-15);
        assert!((v[0]).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        let dup = dmatrix![1.0, 1.0; 2.0, 2.0; 5.0, 5.0];
        let (_, s) = smallest_right_singular_vector(&dup);
        assert!(s <= 1e-12 * dup.norm());
    }

    #[test]
    fn smallest_singular_vector_beats_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(6, 3, &mut rng);
        let (v, s) = smallest_right_singular_vector(&x);
        assert!(((&x * &v).norm() - s).abs() < 1e-12);
        for _ in 0..1000 {
            let u = Vector::from_fn(3, |_, _| StandardNormal.sample(&mut rng)).normalize();
            assert!((&x * &v).norm() <= (&x * &u).norm() + 1e-10);
        }
        let (v2, s2) = smallest_right_singular_vector(&x);
        assert_eq!(v, v2);
        assert_eq!(s, s2);
    }

    #[test]
    fn svd_shift_examples() {
        let x = dmatrix![0.0, 0.0; 0.0, 2.0];
        let shifted = svd_shift(&x, 4.0);
        let expect = dmatrix![2.0, 0.0; 0.0, 8f64.sqrt()];
        assert!((shifted - expect).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_matrix(9, 4, &mut rng);
        assert!((svd_shift(&x, 0.0) - &x).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn svd_shift_gram_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let x = random_matrix(15, 5, &mut rng);
            for lambda in [0.0, 1e-6, 1.0] {
                let xt = svd_shift(&x, lambda);
                let lhs = xt.tr_mul(&xt);
                let rhs = x.tr_mul(&x) + Matrix::identity(5, 5) * lambda;
                assert!((lhs - &rhs).norm() <= 1e-10 * rhs.norm());
            }
        }
    }
}
