//! Iteration strategies built on the coefficient solvers.
//!
//! Every driver evaluates `G` through a shared budget tracker, logs the
//! fixed-point residual `‖G(s) − s‖` after each evaluation and stops on
//! convergence, budget exhaustion or divergence.

mod atm;
mod config;
mod continuous;
mod quasi_newton;
mod record;
mod restarted;
mod stabilized;
mod tracker;

use std::time::Instant;

use thiserror::Error;

use crate::linalg::Vector;
use crate::problems::{FixedPointProblem, ProblemError};

pub use atm::{atm_step, run_atm, AtmState, ThetaRule};
pub use config::{Method, MethodConfig, MetricSpec};
pub use continuous::{run_continuous_alpha, run_continuous_beta};
pub use quasi_newton::{
    explicit_h, h_orthogonalized_recursion, h_rank_one_recursion, projector_sum, HVariant,
    QuasiNewtonMatrixView,
};
pub use record::{LambdaEvent, RunRecord, RunStatus};
pub use restarted::run_restarted;
pub use stabilized::{run_stabilized_aa, stabilized_select, StabilizedSelection};

/// Residual norm above which a run is declared diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// A finished run: its record and the final iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub record: RunRecord,
    pub solution: Vector,
}

/// Dispatches to the driver matching `cfg.method`.
pub fn run(problem: &dyn FixedPointProblem, cfg: &MethodConfig) -> Result<Outcome, DriverError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut outcome = match cfg.method {
        Method::PlainFixedPoint => run_plain(problem, cfg),
        Method::Svda | Method::Rnla | Method::Rrre | Method::Rtsa => run_restarted(problem, cfg),
        Method::ContinuousAlpha => run_continuous_alpha(problem, cfg),
        Method::ContinuousBeta => run_continuous_beta(problem, cfg),
        Method::StabilizedAa => run_stabilized_aa(problem, cfg),
        Method::Aa
        | Method::Raa
        | Method::RaaMultisecant
        | Method::AtmRre
        | Method::AtmMpe
        | Method::AtmMmpe => run_atm(problem, cfg),
    }?;
    if cfg.record_timing {
        outcome.record.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(outcome)
}

/// `s_{j+1} = G(s_j)`.
pub fn run_plain(problem: &dyn FixedPointProblem, cfg: &MethodConfig) -> Result<Outcome, DriverError> {
    cfg.validate()?;
    let mut tracker = tracker::Tracker::new(problem, cfg)?;
    let halt = tracker::drive(|| {
        let mut s = problem.initial_guess();
        loop {
            s = tracker.evaluate(&s)?.g;
        }
    });
    Ok(tracker.finish(halt))
}
