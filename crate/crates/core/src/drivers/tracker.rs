use std::convert::Infallible;

use rayon::prelude::*;

use super::{DriverError, LambdaEvent, MethodConfig, Outcome, RunRecord, RunStatus, DIVERGENCE_THRESHOLD};
use crate::lambda;
use crate::linalg::Vector;
use crate::problems::{FixedPointProblem, ProblemError};

/// One evaluation of `G` at `s`: `g = G(s)`, `f = g − s`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluated {
    pub g: Vector,
    pub f: Vector,
}

/// Why a run stopped.
#[derive(Debug)]
pub(crate) enum Halt {
    Converged(Vector),
    Budget,
    Diverged,
    Failed(String),
}

/// Runs a driver body that only ever leaves through a [`Halt`].
pub(crate) fn drive(body: impl FnOnce() -> Result<Infallible, Halt>) -> Halt {
    match body() {
        Err(halt) => halt,
        Ok(never) => match never {},
    }
}

pub(crate) struct Tracker<'a> {
    problem: &'a dyn FixedPointProblem,
    label: String,
    tol: f64,
    max_evals: usize,
    residuals: Vec<f64>,
    lambdas: Vec<LambdaEvent>,
    pending_lambda: Option<f64>,
    last: Vector,
}

impl<'a> Tracker<'a> {
    pub fn new(problem: &'a dyn FixedPointProblem, cfg: &MethodConfig) -> Result<Self, DriverError> {
        let s0 = problem.initial_guess();
        if s0.len() != problem.dim() {
            return Err(ProblemError::DimensionMismatch { expected: problem.dim(), got: s0.len() }.into());
        }
        Ok(Self {
            problem,
            label: cfg.label(),
            tol: cfg.tol,
            max_evals: cfg.max_g_evals,
            residuals: Vec::new(),
            lambdas: Vec::new(),
            pending_lambda: None,
            last: s0,
        })
    }


    /// Attaches `lambda` to the next logged evaluation.
    pub fn note_lambda(&mut self, lambda: f64) {
        self.pending_lambda = Some(lambda);
    }

    fn log(&mut self, s: &Vector, norm: f64) {
        self.residuals.push(norm);
        if let Some(lambda) = self.pending_lambda.take() {
            self.lambdas.push(LambdaEvent { eval_index: self.residuals.len() - 1, lambda });
        }
        self.last = s.clone();
    }

    fn after_log(&self, s: &Vector, norm: f64) -> Result<(), Halt> {
        if !norm.is_finite() || norm > DIVERGENCE_THRESHOLD {
            return Err(Halt::Diverged);
        }
        if norm < self.tol {
            return Err(Halt::Converged(s.clone()));
        }
        if self.residuals.len() >= self.max_evals {
            return Err(Halt::Budget);
        }
        Ok(())
    }

    pub fn evaluate(&mut self, s: &Vector) -> Result<Evaluated, Halt> {
        if self.residuals.len() >= self.max_evals {
            return Err(Halt::Budget);
        }
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Halt::Diverged);
        }
        let g = self.problem.evaluate(s).map_err(|e| Halt::Failed(e.to_string()))?;
        let f = &g - s;
        let norm = f.norm();
        self.log(s, norm);
        self.after_log(s, norm)?;
        Ok(Evaluated { g, f })
    }

    /// Evaluates every finite candidate `(λ, t_λ)` and keeps the one with the
    /// smallest residual. Probe residuals are logged in grid order with the
    /// selected one last. Returns `None` when every candidate failed.
    pub fn probe(&mut self, candidates: Vec<(f64, Vector)>) -> Result<Option<(f64, Vector, Evaluated)>, Halt> {
        let remaining = self.max_evals.saturating_sub(self.residuals.len());
        if remaining == 0 {
            return Err(Halt::Budget);
        }
        let usable: Vec<(f64, Vector)> = candidates
            .into_iter()
            .filter(|(_, t)| t.iter().all(|v| v.is_finite()))
            .take(remaining)
            .collect();
        let problem = self.problem;
        let eval = |t: &Vector| problem.evaluate(t).ok();
        let results: Vec<Option<Vector>> = if problem.is_pure() && usable.len() > 1 {
            usable.par_iter().map(|(_, t)| eval(t)).collect()
        } else {
            usable.iter().map(|(_, t)| eval(t)).collect()
        };
        let grid: Vec<f64> = usable.iter().map(|(l, _)| *l).collect();
        let scored: Vec<Result<(usize, f64), ()>> = results
            .iter()
            .zip(&usable)
            .enumerate()
            .map(|(i, (g, (_, t)))| g.as_ref().map(|g| (i, (g - t).norm())).ok_or(()))
            .collect();
        let Ok(sel) = lambda::grid_search_select(&grid, scored.clone()) else {
            for (g, (_, t)) in results.iter().zip(&usable) {
                if let Some(g) = g {
                    let norm = (g - t).norm();
                    self.log(t, norm);
                }
            }
            if self.residuals.len() >= self.max_evals {
                return Err(Halt::Budget);
            }
            return Ok(None);
        };
        let chosen = sel.value;
        for (i, score) in scored.iter().enumerate() {
            if let Ok((_, norm)) = score {
                if i != chosen {
                    self.log(&usable[i].1, *norm);
                }
            }
        }
        let (lambda, t) = usable[chosen].clone();
        let g = results[chosen].clone().expect("selected candidate was evaluated");
        self.note_lambda(lambda);
        self.log(&t, sel.score);
        self.after_log(&t, sel.score)?;
        let f = &g - &t;
        Ok(Some((lambda, t, Evaluated { g, f })))
    }

    pub fn finish(self, halt: Halt) -> Outcome {
        let (status, solution) = match halt {
            Halt::Converged(s) => (RunStatus::Converged, s),
            Halt::Budget => (RunStatus::BudgetExhausted, self.last),
            Halt::Diverged => (RunStatus::Diverged, self.last),
            Halt::Failed(message) => (RunStatus::Failed { message }, self.last),
        };
        Outcome {
            record: RunRecord {
                method: self.label,
                g_eval_count: self.residuals.len(),
                residuals: self.residuals,
                lambdas: self.lambdas,
                wall_ms: None,
                status,
            },
            solution,
        }
    }
}
