//! Anderson-type mixing, `s_{j+1} = s_j + βf_j − (ΔS + βΔF)θ`, with the
//! mixing coefficients `θ` chosen by a [`ThetaRule`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tracker::{drive, Evaluated, Halt, Tracker};
use super::{DriverError, HVariant, Method, MethodConfig, Outcome, QuasiNewtonMatrixView};
use crate::lambda::{divide_columns, gcv_select_scaled, LambdaScale, RegularizationPolicy};
use crate::linalg::{Matrix, Metric, Vector, MAX_CONDITION};
use crate::problems::FixedPointProblem;
use crate::shanks::solve_theta_coupled;
use crate::window::{SequenceWindow, WindowError};

/// How `θ` is obtained from the history.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaRule {
    /// `s_{j+1} = s_j − H f_j` with the quasi-Newton matrix of the given kind.
    Anderson(HVariant),
    /// `YᵀΔF θ = Yᵀf_j` with `Y = [Δ²s_{j−m_j−1}, …, Δ²s_{j−2}]`.
    CoupledRre,
    /// `YᵀΔF θ = Yᵀf_j` with `Y = ΔS`.
    CoupledMpe,
    /// `YᵀΔF θ = Yᵀf_j` with the leading `m_j` columns of a fixed `Y`.
    CoupledFixed(Matrix),
}

impl ThetaRule {
    /// Rule used by `method`, or `None` for methods outside this family.
    /// The fixed projection of ATM-MMPE is an orthonormalized Gaussian matrix
    /// drawn from `seed`.
    pub fn for_method(method: Method, dim: usize, depth: usize, seed: u64) -> Option<Self> {
        match method {
            Method::Aa | Method::Raa | Method::StabilizedAa => Some(ThetaRule::Anderson(HVariant::Anderson)),
            Method::RaaMultisecant => Some(ThetaRule::Anderson(HVariant::RegularizedMultisecant)),
            Method::AtmRre => Some(ThetaRule::CoupledRre),
            Method::AtmMpe => Some(ThetaRule::CoupledMpe),
            Method::AtmMmpe => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let cols = depth.min(dim);
                let y = Matrix::from_fn(dim, cols, |_, _| StandardNormal.sample(&mut rng));
                Some(ThetaRule::CoupledFixed(y.qr().q()))
            }
            _ => None,
        }
    }

    /// First iteration index at which a mixing step is possible.
    fn first_mixing_step(&self) -> usize {
        match self {
            ThetaRule::CoupledRre => 2,
            _ => 1,
        }
    }
}

/// `s + βf`.
pub(crate) fn damped(s: &Vector, f: &Vector, beta: f64) -> Vector {
    s + f * beta
}

/// Iterates `s_0, …, s_j` and residuals `f_0, …, f_j` of an Anderson-type run,
/// limited to what a depth-`m` step needs.
#[derive(Debug, Clone)]
pub struct AtmState {
    s: SequenceWindow,
    f: SequenceWindow,
    depth: usize,
    lambda_scale: LambdaScale,
}

impl AtmState {
    pub fn new(s0: Vector, depth: usize) -> Self {
        let dim = s0.len();
        let mut s = SequenceWindow::new(dim, depth + 2).expect("capacity is positive");
        let f = SequenceWindow::new(dim, depth + 1).expect("capacity is positive");
        s.push(s0).expect("initial guess must be finite");
        Self { s, f, depth, lambda_scale: LambdaScale::Absolute }
    }

    /// Reads the `lambda` passed to [`AtmState::propose`] in the units of `scale`.
    pub fn with_lambda_scale(mut self, scale: LambdaScale) -> Self {
        self.lambda_scale = scale;
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Index `j` of the current iterate.
    pub fn iteration(&self) -> usize {
        self.s.next_index() - 1
    }

    pub fn current(&self) -> &Vector {
        self.s.latest().expect("state always holds an iterate")
    }

    /// Latest recorded residual.
    pub fn residual(&self) -> &Vector {
        self.f.latest().expect("residual recorded before mixing")
    }

    pub fn record_residual(&mut self, f: Vector) -> Result<(), WindowError> {
        debug_assert_eq!(self.f.next_index(), self.s.next_index() - 1);
        self.f.push(f)
    }

    pub fn commit(&mut self, next: Vector) -> Result<(), WindowError> {
        self.s.push(next)
    }

    /// `(ΔS, ΔF)` over the `cols` most recent differences.
    pub fn differences(&self, cols: usize) -> Result<(Matrix, Matrix), WindowError> {
        let start = self.iteration() - cols;
        Ok((self.s.delta_matrix(start, cols)?, self.f.delta_matrix(start, cols)?))
    }

    /// Number of difference columns `m_j` the next step of `rule` uses.
    pub fn history_depth(&self, rule: &ThetaRule) -> usize {
        let j = self.iteration();
        let first = rule.first_mixing_step();
        if j < first {
            0
        } else {
            self.depth.min(j + 1 - first)
        }
    }

    /// Next iterate for regularization `lambda`. A numerically singular
    /// coefficient problem is retried once without the oldest column, then
    /// replaced by the damped step `s_j + βf_j`.
    pub fn propose(&self, rule: &ThetaRule, lambda: f64, beta: f64) -> Vector {
        let m_j = self.history_depth(rule);
        let fallback = damped(self.current(), self.residual(), beta);
        if m_j == 0 {
            return fallback;
        }
        (1..=m_j)
            .rev()
            .take(2)
            .find_map(|cols| self.mix(rule, cols, lambda, beta))
            .unwrap_or(fallback)
    }

    fn mix(&self, rule: &ThetaRule, cols: usize, lambda: f64, beta: f64) -> Option<Vector> {
        let s_j = self.current();
        let f_j = self.residual();
        let (ds, df) = self.differences(cols).ok()?;
        let y = match rule {
            ThetaRule::Anderson(variant) => {
                let (ds, df) = match self.lambda_scale.normalizer(lambda, &df, &Metric::Identity) {
                    Some(d) => (divide_columns(&ds, &d), divide_columns(&df, &d)),
                    None => (ds, df),
                };
                let h = QuasiNewtonMatrixView::with_variant(ds, df, beta, lambda, *variant).ok()?;
                return Some(s_j - h.apply(f_j));
            }
            ThetaRule::CoupledRre => self.s.delta2_matrix(self.iteration() - cols - 1, cols).ok()?,
            ThetaRule::CoupledMpe => ds.clone(),
            ThetaRule::CoupledFixed(y) if y.ncols() >= cols => y.columns(0, cols).into_owned(),
            ThetaRule::CoupledFixed(_) => return None,
        };
        let metric = Metric::Factor(orthonormal(y)?);
        let theta = match self.lambda_scale.normalizer(lambda, &df, &metric) {
            Some(d) => solve_theta_coupled(&divide_columns(&df, &d), f_j, &metric, lambda)
                .ok()?
                .0
                .component_div(&d),
            None => solve_theta_coupled(&df, f_j, &metric, lambda).ok()?.0,
        };
        Some(damped(s_j, f_j, beta) - (ds + df * beta) * theta)
    }
}

fn orthonormal(y: Matrix) -> Option<Matrix> {
    if y.nrows() < y.ncols() {
        return None;
    }
    let qr = y.qr();
    let diag = qr.r().diagonal();
    let (dmax, dmin) = (diag.amax(), diag.amin());
    (dmax > 0.0 && dmin > dmax / MAX_CONDITION).then(|| qr.q())
}

/// One step from the evaluation `g = G(s_j)`: records `f_j = g − s_j`,
/// mixes with fixed `lambda` and commits `s_{j+1}`, which is returned.
pub fn atm_step(
    state: &mut AtmState,
    g: &Vector,
    rule: &ThetaRule,
    lambda: f64,
    beta: f64,
) -> Result<Vector, WindowError> {
    let f = g - state.current();
    state.record_residual(f)?;
    let next = state.propose(rule, lambda, beta);
    state.commit(next.clone())?;
    Ok(next)
}

/// Runs AA, RAA, the multisecant variant and the ATM family.
///
/// With GCV, `λ` is selected per step on the design `ΔF` with target `f_j`.
/// With a grid search every candidate `s_{j+1}(λ)` is evaluated and the one
/// with the smallest residual is kept.
pub fn run_atm(problem: &dyn FixedPointProblem, cfg: &MethodConfig) -> Result<Outcome, DriverError> {
    cfg.validate()?;
    let rule = match cfg.method {
        Method::StabilizedAa => None,
        m => ThetaRule::for_method(m, problem.dim(), cfg.depth(), cfg.seed),
    }
    .ok_or_else(|| DriverError::Config(format!("{} is not an Anderson-type method", cfg.method.label())))?;
    let beta = cfg.beta();
    let policy = cfg.policy();
    let mut tracker = Tracker::new(problem, cfg)?;
    let mut state = AtmState::new(problem.initial_guess(), cfg.depth()).with_lambda_scale(cfg.lambda_scale);
    let diverged = |_| Halt::Diverged;

    let halt = drive(|| {
        let mut cached: Option<Evaluated> = None;
        loop {
            let e = match cached.take() {
                Some(e) => e,
                None => tracker.evaluate(state.current())?,
            };
            state.record_residual(e.f).map_err(diverged)?;
            let m_j = state.history_depth(&rule);
            let next = match &policy {
                _ if m_j == 0 => state.propose(&rule, 0.0, beta),
                RegularizationPolicy::Fixed { value } => state.propose(&rule, *value, beta),
                RegularizationPolicy::Gcv { grid } => {
                    let fallback = grid[grid.len() - 1];
                    let lambda = match state.differences(m_j) {
                        Ok((_, df)) => gcv_select_scaled(&df, state.residual(), grid, cfg.lambda_scale).unwrap_or(fallback),
                        Err(_) => fallback,
                    };
                    tracker.note_lambda(lambda);
                    state.propose(&rule, lambda, beta)
                }
                RegularizationPolicy::GridSearch { grid } => {
                    let candidates = grid.iter().map(|&l| (l, state.propose(&rule, l, beta))).collect();
                    match tracker.probe(candidates)? {
                        Some((_, t, e)) => {
                            cached = Some(e);
                            t
                        }
                        None => damped(state.current(), state.residual(), beta),
                    }
                }
            };
            state.commit(next).map_err(diverged)?;
        }
    });
    Ok(tracker.finish(halt))
}
