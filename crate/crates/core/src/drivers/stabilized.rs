use super::atm::{damped, AtmState};
use super::tracker::{drive, Halt, Tracker};
use super::{DriverError, Method, MethodConfig, Outcome, QuasiNewtonMatrixView};
use crate::linalg::{Matrix, Vector};
use crate::problems::FixedPointProblem;

/// Outcome of the threshold Gram-Schmidt pass over `ΔF`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizedSelection {
    /// Column indices of `ΔF` that were kept, oldest first.
    pub survivors: Vec<usize>,
    /// Orthogonalized residual differences `f̂` of the survivors.
    pub fhat: Matrix,
    /// `f̂` for every column, zero where the column was discarded.
    pub all_fhat: Matrix,
}

/// Classical Gram-Schmidt over the columns of `ΔF`, oldest first: the
/// component `f̂_d` of `Δf_d` orthogonal to the earlier survivors is kept when
/// `‖f̂_d‖ τ ≥ ‖Δf_d‖` and zeroed otherwise.
pub fn stabilized_select(df: &Matrix, tau: f64) -> StabilizedSelection {
    let (p, m) = df.shape();
    let mut all = Matrix::zeros(p, m);
    let mut survivors = Vec::with_capacity(m);
    for d in 0..m {
        let col = df.column(d);
        let mut fhat = col.into_owned();
        for &i in &survivors {
            let prev = all.column(i);
            fhat -= prev * (prev.dot(&col) / prev.norm_squared());
        }
        let n = fhat.norm();
        if n > 0.0 && n * tau >= col.norm() {
            all.set_column(d, &fhat);
            survivors.push(d);
        }
    }
    let fhat = Matrix::from_fn(p, survivors.len(), |r, c| all[(r, survivors[c])]);
    StabilizedSelection { survivors, fhat, all_fhat: all }
}

impl AtmState {
    /// Stabilized mixing step from the residual `f_j` already recorded.
    pub fn stabilized_proposal(&self, tau: f64, beta: f64) -> (Vector, StabilizedSelection) {
        let f_j = self.residual();
        let s_j = self.current();
        let m_j = self.depth().min(self.iteration());
        if m_j == 0 {
            let empty = stabilized_select(&Matrix::zeros(f_j.len(), 0), tau);
            return (damped(s_j, f_j, beta), empty);
        }
        let (ds, df) = self.differences(m_j).expect("history holds m_j + 1 entries");
        let sel = stabilized_select(&df, tau);
        let pick = |m: &Matrix| Matrix::from_fn(m.nrows(), sel.survivors.len(), |r, c| m[(r, sel.survivors[c])]);
        let next = match QuasiNewtonMatrixView::new(pick(&ds), pick(&df), beta, 0.0) {
            Ok(h) => s_j - h.apply(f_j),
            Err(_) => damped(s_j, f_j, beta),
        };
        (next, sel)
    }
}

/// Stabilized Anderson acceleration: Anderson steps restricted to the
/// residual differences that survive the threshold Gram-Schmidt pass.
pub fn run_stabilized_aa(problem: &dyn FixedPointProblem, cfg: &MethodConfig) -> Result<Outcome, DriverError> {
    cfg.validate()?;
    if cfg.method != Method::StabilizedAa {
        return Err(DriverError::Config(format!("{} is not stabilized AA", cfg.method.label())));
    }
    let mut tracker = Tracker::new(problem, cfg)?;
    let mut state = AtmState::new(problem.initial_guess(), cfg.depth());
    let halt = drive(|| loop {
        let e = tracker.evaluate(state.current())?;
        state.record_residual(e.f).map_err(|_| Halt::Diverged)?;
        let (next, _) = state.stabilized_proposal(cfg.tau, cfg.beta());
        state.commit(next).map_err(|_| Halt::Diverged)?;
    });
    Ok(tracker.finish(halt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn duplicate_column_is_discarded_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut df = Matrix::from_fn(10, 4, |_, _| StandardNormal.sample(&mut rng));
        let c1 = df.column(1).into_owned();
        df.set_column(3, &c1);
        let sel = stabilized_select(&df, 10.0);
        assert_eq!(sel.survivors, vec![0, 1, 2]);
        assert!(sel.all_fhat.column(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn survivors_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let df = Matrix::from_fn(20, 5, |_, _| StandardNormal.sample(&mut rng));
        let sel = stabilized_select(&df, 10.0);
        let g = sel.fhat.tr_mul(&sel.fhat);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if i != j {
                    assert!(g[(i, j)].abs() <= 1e-10 * (g[(i, i)] * g[(j, j)]).sqrt());
                }
            }
        }
    }

    #[test]
    fn zero_column_is_discarded() {
        let mut df = Matrix::zeros(3, 2);
        df[(0, 1)] = 1.0;
        assert_eq!(stabilized_select(&df, 10.0).survivors, vec![1]);
    }

    #[test]
    fn nearly_dependent_column_depends_on_tau() {
        let df = Matrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.05, 0.0]);
        assert_eq!(stabilized_select(&df, 10.0).survivors, vec![0]);
        assert_eq!(stabilized_select(&df, 100.0).survivors, vec![0, 1]);
    }
}
