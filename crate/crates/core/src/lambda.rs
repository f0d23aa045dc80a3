//! Choice of the regularization parameter λ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, Metric, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LambdaError {
    #[error("λ grid is empty")]
    EmptyGrid,
    #[error("invalid λ value {0}")]
    InvalidLambda(f64),
    #[error("λ grid must be strictly increasing")]
    UnsortedGrid,
    #[error("every λ candidate failed")]
    AllCandidatesFailed,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// How λ is chosen each time coefficients are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizationPolicy {
    /// Always use the given value.
    Fixed { value: f64 },
    /// Try every λ and keep the candidate with the smallest residual `‖G(t) − t‖`.
    GridSearch {
        #[serde(default = "default_grid")]
        grid: Vec<f64>,
    },
    /// Generalized cross-validation over a grid.
    Gcv {
        #[serde(default = "default_grid")]
        grid: Vec<f64>,
    },
}

impl Default for RegularizationPolicy {
    fn default() -> Self {
        RegularizationPolicy::Fixed { value: 0.0 }
    }
}

impl RegularizationPolicy {
    pub fn fixed(value: f64) -> Self {
        RegularizationPolicy::Fixed { value }
    }

    pub fn grid_search() -> Self {
        RegularizationPolicy::GridSearch { grid: default_grid() }
    }

    pub fn gcv() -> Self {
        RegularizationPolicy::Gcv { grid: default_grid() }
    }

    pub fn validate(&self) -> Result<(), LambdaError> {
        match self {
            RegularizationPolicy::Fixed { value } => check(*value),
            RegularizationPolicy::GridSearch { grid } | RegularizationPolicy::Gcv { grid } => {
                if grid.is_empty() {
                    return Err(LambdaError::EmptyGrid);
                }
                grid.iter().try_for_each(|&l| check(l))?;
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(LambdaError::UnsortedGrid);
                }
                Ok(())
            }
        }
    }
}

fn check(l: f64) -> Result<(), LambdaError> {
    if l.is_finite() && l >= 0.0 {
        Ok(())
    } else {
        Err(LambdaError::InvalidLambda(l))
    }
}

/// How a λ value enters the regularized normal equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaScale {
    /// `XᵀMX + λ·diag(XᵀMX)`: each coefficient is penalized in proportion
    /// to the weighted energy of its column, which is the same as ridge on
    /// the column-normalized design. Results do not depend on the size of
    /// the differences.
    #[default]
    Relative,
    /// `XᵀMX + λI`.
    Absolute,
}

impl LambdaScale {
    /// Column norms to normalize by before an absolute-λ solve, or `None`
    /// when the design is used as given.
    pub fn normalizer(self, lambda: f64, x: &Matrix, metric: &Metric) -> Option<Vector> {
        (self == LambdaScale::Relative && lambda > 0.0).then(|| column_scales(x, metric))
    }
}

/// Norms of the columns of `W·X` with `WᵀW = M`; zero or non-finite norms
/// are reported as one.
pub fn column_scales(x: &Matrix, metric: &Metric) -> Vector {
    let g = metric.gram(x);
    Vector::from_iterator(
        x.ncols(),
        g.diagonal().iter().map(|&v| if v > 0.0 && v.is_finite() { v.sqrt() } else { 1.0 }),
    )
}

/// `X·diag(d)⁻¹`.
pub fn divide_columns(x: &Matrix, d: &Vector) -> Matrix {
    let mut out = x.clone();
    for (mut col, &di) in out.column_iter_mut().zip(d.iter()) {
        col /= di;
    }
    out
}

/// `10^-12, 10^-10, …, 10^0`.
pub fn default_grid() -> Vec<f64> {
    (0..7).map(|i| 10f64.powi(-12 + 2 * i)).collect()
}

/// The winning candidate of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    pub index: usize,
    pub lambda: f64,
    pub score: f64,
    pub value: T,
}

/// Picks the candidate with the smallest finite score.
///
/// `candidates[i]` belongs to `grid[i]`; failed candidates are skipped and
/// ties go to the larger λ.
pub fn grid_search_select<T, E>(
    grid: &[f64],
    candidates: Vec<Result<(T, f64), E>>,
) -> Result<Selection<T>, LambdaError> {
    if grid.is_empty() {
        return Err(LambdaError::EmptyGrid);
    }
    debug_assert_eq!(grid.len(), candidates.len());
    let mut best: Option<Selection<T>> = None;
    for (i, (lambda, c)) in grid.iter().zip(candidates).enumerate() {
        let Ok((value, score)) = c else { continue };
        if !score.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => score < b.score || (score == b.score && *lambda > b.lambda),
        };
        if better {
            best = Some(Selection { index: i, lambda: *lambda, score, value });
        }
    }
    best.ok_or(LambdaError::AllCandidatesFailed)
}

/// GCV score `p‖(I − A)y‖² / tr(I − A)²` of the ridge fit
/// `A = X(XᵀX + λI)⁻¹Xᵀ`.
pub fn gcv_score(x: &Matrix, y: &Vector, lambda: f64) -> Result<f64, LambdaError> {
    check(lambda)?;
    let (u, sigma, _) = linalg::thin_svd(x);
    Ok(score_from_svd(&u, &sigma, y, lambda))
}

fn score_from_svd(u: &Matrix, sigma: &Vector, y: &Vector, lambda: f64) -> f64 {
    let p = y.len() as f64;
    let proj = u.tr_mul(y);
    let mut resid2 = (y.norm_squared() - proj.norm_squared()).max(0.0);
    let mut trace = p;
    for (i, &s) in sigma.iter().enumerate() {
        let s2 = s * s;
        let filt = if s2 == 0.0 && lambda == 0.0 { 0.0 } else { s2 / (s2 + lambda) };
        trace -= filt;
        resid2 += ((1.0 - filt) * proj[i]).powi(2);
    }
    if trace <= 0.0 {
        return f64::INFINITY;
    }
    p * resid2 / (trace * trace)
}

/// λ on `grid` minimizing the GCV score, ties to the larger λ.
pub fn gcv_select(x: &Matrix, y: &Vector, grid: &[f64]) -> Result<f64, LambdaError> {
    if grid.is_empty() {
        return Err(LambdaError::EmptyGrid);
    }
    grid.iter().try_for_each(|&l| check(l))?;
    linalg::ensure_finite(x.as_slice())?;
    linalg::ensure_finite(y.as_slice())?;
    let (u, sigma, _) = linalg::thin_svd(x);
    let scores: Vec<Result<((), f64), ()>> = grid
        .iter()
        .map(|&l| Ok(((), score_from_svd(&u, &sigma, y, l))))
        .collect();
    Ok(grid_search_select(grid, scores)?.lambda)
}

/// [`gcv_select`] with the grid read in the units of `scale`.
pub fn gcv_select_scaled(x: &Matrix, y: &Vector, grid: &[f64], scale: LambdaScale) -> Result<f64, LambdaError> {
    match scale {
        LambdaScale::Absolute => gcv_select(x, y, grid),
        LambdaScale::Relative => gcv_select(&divide_columns(x, &column_scales(x, &Metric::Identity)), y, grid),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn grid_has_seven_log_spaced_points() {
        let g = default_grid();
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 1e-12);
        assert_eq!(*g.last().unwrap(), 1.0);
        for w in g.windows(2) {
            assert!(((w[1] / w[0]).log10() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_picks_minimum_and_skips_failures() {
        let grid = [1e-4, 1e-2, 1.0];
        let c: Vec<Result<(u8, f64), ()>> = vec![Ok((0, 3.0)), Err(()), Ok((2, 1.0))];
        let s = grid_search_select(&grid, c).unwrap();
        assert_eq!((s.index, s.value, s.lambda), (2, 2, 1.0));
    }

    #[test]
    fn ties_go_to_larger_lambda() {
        let grid = [1.0, 1e-2, 1e-4];
        let c: Vec<Result<(u8, f64), ()>> = vec![Ok((0, 1.0)), Ok((1, 1.0)), Ok((2, 1.0))];
        assert_eq!(grid_search_select(&grid, c).unwrap().lambda, 1.0);
    }

    #[test]
    fn all_failed() {
        let c: Vec<Result<(u8, f64), ()>> = vec![Err(()), Ok((1, f64::NAN))];
        assert_eq!(
            grid_search_select(&[1.0, 2.0], c),
            Err(LambdaError::AllCandidatesFailed)
        );
        let e: Vec<Result<(u8, f64), ()>> = vec![];
        assert_eq!(grid_search_select(&[], e), Err(LambdaError::EmptyGrid));
    }

    #[test]
    fn gcv_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Matrix::from_fn(15, 4, |_, _| StandardNormal.sample(&mut rng));
        let y = Vector::from_fn(15, |_, _| StandardNormal.sample(&mut rng));
        for lambda in [1e-6, 1e-2, 1.0, 10.0] {
            let hat = &x
                * (x.tr_mul(&x) + Matrix::identity(4, 4) * lambda)
                    .try_inverse()
                    .unwrap()
                * x.transpose();
            let resid = &y - &hat * &y;
            let tr = 15.0 - hat.trace();
            let direct = 15.0 * resid.norm_squared() / (tr * tr);
            let got = gcv_score(&x, &y, lambda).unwrap();
            assert!((got - direct).abs() <= 1e-10 * direct);
        }
    }

    #[test]
    fn gcv_prefers_large_lambda_for_pure_noise_direction() {
        // y orthogonal to range(X): any shrinkage is free, so the score
        // falls as the trace of I − A grows.
        let x = Matrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        let y = Vector::from_column_slice(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(gcv_select(&x, &y, &default_grid()).unwrap(), 1.0);
    }

    #[test]
    fn policy_validation() {
        assert!(RegularizationPolicy::fixed(0.0).validate().is_ok());
        assert!(RegularizationPolicy::fixed(-1.0).validate().is_err());
        assert!(RegularizationPolicy::GridSearch { grid: vec![] }.validate().is_err());
        assert!(RegularizationPolicy::gcv().validate().is_ok());
    }

    #[test]
    fn policy_toml_roundtrip() {
        let p: RegularizationPolicy = toml::from_str("kind = \"grid_search\"").unwrap();
        assert_eq!(p, RegularizationPolicy::grid_search());
        let p: RegularizationPolicy = toml::from_str("kind = \"fixed\"\nvalue = 1e-3").unwrap();
        assert_eq!(p, RegularizationPolicy::fixed(1e-3));
    }

    #[test]
    fn column_scales_skip_zero_columns() {
        let x = Matrix::from_column_slice(2, 3, &[3.0, 4.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(column_scales(&x, &Metric::Identity), Vector::from_column_slice(&[5.0, 1.0, 2.0]));
        assert!(LambdaScale::Relative.normalizer(0.0, &x, &Metric::Identity).is_none());
        assert!(LambdaScale::Absolute.normalizer(1.0, &x, &Metric::Identity).is_none());
    }

    #[test]
    fn relative_gcv_ignores_column_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Matrix::from_fn(12, 3, |_, _| StandardNormal.sample(&mut rng));
        let y = Vector::from_fn(12, |_, _| StandardNormal.sample(&mut rng));
        let grid = default_grid();
        let a = gcv_select_scaled(&x, &y, &grid, LambdaScale::Relative).unwrap();
        let d = Vector::from_column_slice(&[1e-5, 1.0, 1e3]);
        let squeezed = divide_columns(&x, &d);
        let b = gcv_select_scaled(&squeezed, &y, &grid, LambdaScale::Relative).unwrap();
        assert_eq!(a, b);
    }
}
