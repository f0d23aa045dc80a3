use super::tracker::{drive, Evaluated, Halt, Tracker};
use super::{DriverError, MethodConfig, Outcome};
use crate::lambda::{gcv_select_scaled, RegularizationPolicy};
use crate::linalg::Vector;
use crate::problems::FixedPointProblem;
use crate::shanks::{extrapolate, Combination, ExtrapolationOptions};
use crate::window::SequenceWindow;

pub(crate) fn push(window: &mut SequenceWindow, v: Vector) -> Result<(), Halt> {
    window.push(v).map_err(|_| Halt::Diverged)
}

/// Restarted method: `ℓ_k − 1` plain iterations from `x_j`, one
/// extrapolation, restart from the extrapolated vector.
///
/// With a grid-search policy every λ on the grid yields a candidate, `G` is
/// evaluated on each (these evaluations are counted) and the candidate with
/// the smallest residual becomes `x_{j+1}`. Its `G` value is reused as the
/// first inner iterate of the next cycle.
pub fn run_restarted(problem: &dyn FixedPointProblem, cfg: &MethodConfig) -> Result<Outcome, DriverError> {
    cfg.validate()?;
    let strategy = cfg.method.restart_strategy().ok_or_else(|| {
        DriverError::Config(format!("{} is not a restarted method", cfg.method.label()))
    })?;
    let k = cfg.depth();
    let len = strategy.iterates_needed(k);
    let policy = cfg.policy();
    let metric = cfg.metric.build();
    let options = |lambda: f64| ExtrapolationOptions {
        metric: metric.clone(),
        lambda,
        lambda_scale: cfg.lambda_scale,
        combination: Combination::Last,
        svda_sum_normalize: cfg.svda_sum_normalize,
    };
    let mut tracker = Tracker::new(problem, cfg)?;
    let mut window = SequenceWindow::new(problem.dim(), len).map_err(|e| DriverError::Config(e.to_string()))?;

    let halt = drive(|| {
        let mut x = problem.initial_guess();
        let mut cached: Option<Evaluated> = None;
        loop {
            window.clear();
            let n = window.first_index();
            push(&mut window, x.clone())?;
            let first = match cached.take() {
                Some(e) => e,
                None => tracker.evaluate(&x)?,
            };
            push(&mut window, first.g)?;
            while window.len() < len {
                let e = tracker.evaluate(window.latest().expect("window is non-empty"))?;
                push(&mut window, e.g)?;
            }
            let last = window.latest().expect("window is non-empty").clone();
            x = match &policy {
                RegularizationPolicy::Fixed { value } => {
                    extrapolate(&window, n, k, &strategy, &options(*value)).unwrap_or(last)
                }
                RegularizationPolicy::Gcv { grid } => {
                    let lambda = match (window.delta2_matrix(n, k), window.delta(n + k)) {
                        (Ok(x), Ok(y)) => gcv_select_scaled(&x, &y, grid, cfg.lambda_scale).unwrap_or(grid[grid.len() - 1]),
                        _ => grid[grid.len() - 1],
                    };
                    tracker.note_lambda(lambda);
                    extrapolate(&window, n, k, &strategy, &options(lambda)).unwrap_or(last)
                }
                RegularizationPolicy::GridSearch { grid } => {
                    let candidates = grid
                        .iter()
                        .filter_map(|&l| extrapolate(&window, n, k, &strategy, &options(l)).ok().map(|t| (l, t)))
                        .collect();
                    match tracker.probe(candidates)? {
                        Some((_, t, e)) => {
                            cached = Some(e);
                            t
                        }
                        None => last,
                    }
                }
            };
        }
    });
    Ok(tracker.finish(halt))
}
