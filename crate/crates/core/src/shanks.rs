//! Coefficient solvers and combiners for Shanks-type transformations.
//!
//! A sequence is in the Shanks kernel of order `k` when
//! `α₀(s_n − s) + … + α_k(s_{n+k} − s) = 0` for every `n`, with fixed
//! coefficients summing to one. Every solver below recovers those
//! coefficients (or the equivalent partial sums `β_j = α₀ + … + α_j`) from a
//! finite window, either exactly on kernel sequences or as a regularized
//! least-squares fit on general ones:
//!
//! | strategy          | unknowns | iterates used | system                                  |
//! |-------------------|----------|---------------|-----------------------------------------|
//! | `MinResAlpha`     | α        | k+2           | min ‖ΔS γ‖²_M + λ‖γ‖², eᵀγ = 1          |
//! | `MinResAlphaSvd`  | α        | k+2           | smallest right singular vector of ΔS   |
//! | `MinResBeta`      | β        | k+2           | min ‖Δs_{n+k} − Δ²S η‖²_M + λ‖η‖²       |
//! | `GeneralY`        | β        | k+2           | YᵀΔ²S β = YᵀΔs_{n+k}                    |
//! | `TopoAlpha`       | α        | 2k+1          | stacked form of `MinResAlpha`           |
//! | `TopoBeta`        | β        | 2k+1          | stacked form of `MinResBeta`            |
//! | `TopoGeneralY`    | β        | 2k+1          | stacked form of `GeneralY`              |

use thiserror::Error;

use crate::lambda::{divide_columns, LambdaScale};
use crate::linalg::{self, LinalgError, Matrix, Metric, Vector};
use crate::window::{SequenceWindow, WindowError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShanksError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("invalid strategy configuration: {0}")]
    InvalidStrategy(String),
}

pub type Result<T> = std::result::Result<T, ShanksError>;

/// Combination weights `α` of length `k+1`, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCoeffs(Vector);

impl AlphaCoeffs {
    /// Normalizes `raw` to unit sum.
    pub fn normalized(raw: Vector) -> Result<Self> {
        Ok(Self(linalg::normalize_sum(raw)?))
    }

    pub fn values(&self) -> &Vector {
        &self.0
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }
}

/// Partial-sum coefficients `β` of length `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaCoeffs(pub Vector);

/// Mixing coefficients `θ` of length `m_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCoeffs(pub Vector);

/// How the projection matrix `Y` of the general-`Y` solvers is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum YSpec {
    /// `Y = [Δs_n, …, Δs_{n+k−1}]` (stacked analogue for topological solvers).
    Mpe,
    /// A fixed matrix with `k` columns.
    Explicit(Matrix),
    /// `Y = I_k ⊗ y` with `y` the most recent first difference in the window.
    KronLatestDelta,
    /// `Y = I_k ⊗ y` for a given `y`.
    Kron(Vector),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientStrategy {
    MinResAlpha,
    MinResAlphaSvd,
    MinResBeta,
    GeneralY(YSpec),
    TopoAlpha,
    TopoBeta,
    TopoGeneralY(YSpec),
}

impl CoefficientStrategy {
    pub fn is_topological(&self) -> bool {
        matches!(
            self,
            CoefficientStrategy::TopoAlpha
                | CoefficientStrategy::TopoBeta
                | CoefficientStrategy::TopoGeneralY(_)
        )
    }

    /// Number of consecutive iterates one extrapolation consumes.
    pub fn iterates_needed(&self, k: usize) -> usize {
        if self.is_topological() {
            2 * k + 1
        } else {
            k + 2
        }
    }

    /// Largest order `k` whose window fits in `iterates` vectors.
    pub fn order_for_iterates(&self, iterates: usize) -> usize {
        if self.is_topological() {
            iterates.saturating_sub(1) / 2
        } else {
            iterates.saturating_sub(2)
        }
    }
}

/// Which slice of the window the coefficients are applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combination {
    /// `t`: the combination involving the last available iterate.
    #[default]
    Last,
    /// `t̃`: the combination anchored at the first iterate of the window.
    First,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationOptions {
    pub metric: Metric,
    pub lambda: f64,
    /// How `lambda` relates to the design matrix of each solve.
    pub lambda_scale: LambdaScale,
    pub combination: Combination,
    /// Rescale SVD weights to unit sum before combining.
    pub svda_sum_normalize: bool,
}

impl ExtrapolationOptions {
    fn alpha(&self, ds: &Matrix) -> Result<AlphaCoeffs> {
        match self.lambda_scale.normalizer(self.lambda, ds, &self.metric) {
            None => solve_alpha_minres(ds, &self.metric, self.lambda),
            Some(d) => solve_alpha_normalized(ds, &d, &self.metric, self.lambda),
        }
    }

    fn beta(&self, d2s: &Matrix, rhs: &Vector) -> Result<BetaCoeffs> {
        match self.lambda_scale.normalizer(self.lambda, d2s, &self.metric) {
            None => solve_beta_rre(d2s, rhs, &self.metric, self.lambda),
            Some(d) => {
                let scaled = solve_beta_rre(&divide_columns(d2s, &d), rhs, &self.metric, self.lambda)?;
                Ok(BetaCoeffs(scaled.0.component_div(&d)))
            }
        }
    }
}

/// `α ∝ (A + λD²)⁻¹e` with `A = ΔSᵀMΔS` and `D` the column norms `d`,
/// solved through the unit-diagonal matrix `D⁻¹AD⁻¹ + λI`.
fn solve_alpha_normalized(ds: &Matrix, d: &Vector, metric: &Metric, lambda: f64) -> Result<AlphaCoeffs> {
    check_cols(ds, 2, "ΔS needs at least two columns (k ≥ 1)")?;
    linalg::check_lambda(lambda)?;
    linalg::ensure_finite(ds.as_slice())?;
    let mut a = metric.gram(&divide_columns(ds, d));
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = a.cholesky().ok_or(LinalgError::SingularSystem { condition: f64::INFINITY })?;
    let rhs = Vector::from_iterator(d.len(), d.iter().map(|v| 1.0 / v));
    let z = chol.solve(&rhs).component_div(d);
    AlphaCoeffs::normalized(z)
}

impl Default for ExtrapolationOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Identity,
            lambda: 0.0,
            lambda_scale: LambdaScale::Absolute,
            combination: Combination::Last,
            svda_sum_normalize: true,
        }
    }
}

/// `α = argmin ‖ΔS γ‖²_M + λ‖γ‖²` subject to `eᵀγ = 1`.
///
/// `λ = 0` is solved from the SVD of the weighted `ΔS`, so an exact
/// one-dimensional kernel is handled without forming a singular Gram matrix.
pub fn solve_alpha_minres(ds: &Matrix, metric: &Metric, lambda: f64) -> Result<AlphaCoeffs> {
    check_cols(ds, 2, "ΔS needs at least two columns (k ≥ 1)")?;
    linalg::check_lambda(lambda)?;
    let alpha = if lambda == 0.0 {
        linalg::constrained_lstsq(ds, metric)?
    } else {
        linalg::sum_constrained_solve(&metric.gram(ds), lambda)?
    };
    Ok(AlphaCoeffs(alpha))
}

/// Unit smallest right singular vector of `ΔS` and its singular value.
pub fn solve_alpha_svd(ds: &Matrix) -> Result<(Vector, f64)> {
    check_cols(ds, 2, "ΔS needs at least two columns (k ≥ 1)")?;
    Ok(linalg::smallest_right_singular_vector(ds))
}

/// `β = (Δ²SᵀMΔ²S + λI)⁻¹Δ²SᵀM·rhs`.
pub fn solve_beta_rre(d2s: &Matrix, rhs: &Vector, metric: &Metric, lambda: f64) -> Result<BetaCoeffs> {
    check_cols(d2s, 1, "Δ²S needs at least one column (k ≥ 1)")?;
    Ok(BetaCoeffs(linalg::ridge_solve(d2s, metric, rhs, lambda)?))
}

/// Solves the square system `YᵀΔ²S β = Yᵀ·rhs`.
///
/// Only the range of `Y` matters, so `Y` is orthonormalized first.
pub fn solve_beta_general_y(d2s: &Matrix, rhs: &Vector, y: &Matrix) -> Result<BetaCoeffs> {
    check_cols(d2s, 1, "Δ²S needs at least one column (k ≥ 1)")?;
    if y.nrows() != d2s.nrows() || y.ncols() != d2s.ncols() {
        return Err(ShanksError::InvalidStrategy(format!(
            "Y is {}x{}, expected {}x{}",
            y.nrows(),
            y.ncols(),
            d2s.nrows(),
            d2s.ncols()
        )));
    }
    let q = orthonormal_basis(y)?;
    Ok(BetaCoeffs(linalg::ridge_solve(
        d2s,
        &Metric::Factor(q),
        rhs,
        0.0,
    )?))
}

fn orthonormal_basis(y: &Matrix) -> Result<Matrix> {
    if y.nrows() < y.ncols() {
        return Err(LinalgError::SingularSystem {
            condition: f64::INFINITY,
        }
        .into());
    }
    let (scaled, _) = linalg::equilibrate_columns(y).ok_or(LinalgError::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let qr = scaled.qr();
    let r = qr.r();
    let dmax = r.diagonal().amax();
    let dmin = r.diagonal().amin();
    if dmax == 0.0 || dmin <= dmax / linalg::MAX_CONDITION {
        return Err(LinalgError::SingularSystem {
            condition: if dmin == 0.0 { f64::INFINITY } else { dmax / dmin },
        }
        .into());
    }
    Ok(qr.q())
}

/// Stacked analogue of [`solve_alpha_minres`].
pub fn solve_alpha_topological(stacked_ds: &Matrix, metric: &Metric, lambda: f64) -> Result<AlphaCoeffs> {
    solve_alpha_minres(stacked_ds, metric, lambda)
}

/// Stacked analogue of [`solve_beta_rre`].
pub fn solve_beta_topological(
    stacked_d2s: &Matrix,
    stacked_rhs: &Vector,
    metric: &Metric,
    lambda: f64,
) -> Result<BetaCoeffs> {
    solve_beta_rre(stacked_d2s, stacked_rhs, metric, lambda)
}

/// `θ = (ΔCᵀMΔC + λI)⁻¹ΔCᵀM·c` for a coupled sequence `c`.
///
/// With `M = YYᵀ` (pass [`Metric::Factor`]) and `λ = 0` this is the solution
/// of `YᵀΔC θ = Yᵀc` whenever that square system is nonsingular.
pub fn solve_theta_coupled(dc: &Matrix, c: &Vector, metric: &Metric, lambda: f64) -> Result<ThetaCoeffs> {
    Ok(ThetaCoeffs(linalg::ridge_solve(dc, metric, c, lambda)?))
}

/// `S·α`.
pub fn combine_alpha(s: &Matrix, alpha: &AlphaCoeffs) -> Vector {
    combine_weights(s, alpha.values())
}

pub(crate) fn combine_weights(s: &Matrix, w: &Vector) -> Vector {
    s * w
}

/// `anchor − ΔS·β`.
pub fn combine_beta(anchor: &Vector, ds_slice: &Matrix, beta: &BetaCoeffs) -> Vector {
    anchor - ds_slice * &beta.0
}

/// `I_k ⊗ y`: block-diagonal `kp×k` matrix with `y` in every diagonal block.
pub fn kron_identity(k: usize, y: &Vector) -> Matrix {
    let p = y.len();
    let mut out = Matrix::zeros(k * p, k);
    for r in 0..k {
        out.view_mut((r * p, r), (p, 1)).copy_from(y);
    }
    out
}

fn check_cols(m: &Matrix, min: usize, msg: &str) -> Result<()> {
    if m.ncols() < min {
        Err(ShanksError::InvalidStrategy(msg.to_string()))
    } else {
        Ok(())
    }
}

/// Extrapolates from the iterates `s_n, …` held in `window` with order `k`.
pub fn extrapolate(
    window: &SequenceWindow,
    n: usize,
    k: usize,
    strategy: &CoefficientStrategy,
    opts: &ExtrapolationOptions,
) -> Result<Vector> {
    use CoefficientStrategy::*;
    if k == 0 {
        return Err(ShanksError::InvalidStrategy("order k must be at least 1".into()));
    }
    let last = opts.combination == Combination::Last;
    match strategy {
        MinResAlpha => {
            let ds = window.delta_matrix(n, k + 1)?;
            let alpha = opts.alpha(&ds)?;
            let s = window.matrix(if last { n + 1 } else { n }, k + 1)?;
            Ok(combine_alpha(&s, &alpha))
        }
        MinResAlphaSvd => {
            let ds = opts.metric.weigh(&window.delta_matrix(n, k + 1)?);
            let (v, _) = solve_alpha_svd(&ds)?;
            let w = if opts.svda_sum_normalize {
                AlphaCoeffs::normalized(v)?.into_inner()
            } else {
                v
            };
            let s = window.matrix(if last { n + 1 } else { n }, k + 1)?;
            Ok(combine_weights(&s, &w))
        }
        MinResBeta | GeneralY(_) => {
            let d2s = window.delta2_matrix(n, k)?;
            let rhs = window.delta(n + k)?;
            let beta = match strategy {
                GeneralY(spec) => {
                    let y = match spec {
                        YSpec::Mpe => window.delta_matrix(n, k)?,
                        YSpec::Explicit(y) => y.clone(),
                        YSpec::KronLatestDelta | YSpec::Kron(_) => {
                            return Err(ShanksError::InvalidStrategy(
                                "Kronecker projections apply to topological solvers only".into(),
                            ))
                        }
                    };
                    solve_beta_general_y(&d2s, &rhs, &y)?
                }
                _ => opts.beta(&d2s, &rhs)?,
            };
            let (anchor, start) = if last { (n + k + 1, n + 1) } else { (n + k, n) };
            Ok(combine_beta(
                window.get(anchor)?,
                &window.delta_matrix(start, k)?,
                &beta,
            ))
        }
        TopoAlpha => {
            let sds = window.stacked_delta(n, k, k + 1)?;
            let alpha = opts.alpha(&sds)?;
            let s = window.matrix(if last { n + k } else { n }, k + 1)?;
            Ok(combine_alpha(&s, &alpha))
        }
        TopoBeta | TopoGeneralY(_) => {
            let sd2 = window.stacked_delta2(n, k, k)?;
            let rhs = window.stacked_column(n + k, k)?;
            let beta = match strategy {
                TopoGeneralY(spec) => {
                    let y = match spec {
                        YSpec::Mpe => window.stacked_delta(n, k, k)?,
                        YSpec::Explicit(y) => y.clone(),
                        YSpec::KronLatestDelta => kron_identity(k, &window.delta(n + 2 * k - 1)?),
                        YSpec::Kron(y) => kron_identity(k, y),
                    };
                    solve_beta_general_y(&sd2, &rhs, &y)?
                }
                _ => opts.beta(&sd2, &rhs)?,
            };
            let (anchor, start) = if last { (n + 2 * k, n + k) } else { (n + k, n) };
            Ok(combine_beta(
                window.get(anchor)?,
                &window.delta_matrix(start, k)?,
                &beta,
            ))
        }
    }
}
