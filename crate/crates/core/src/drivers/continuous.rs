use super::restarted::push;
use super::tracker::{drive, Evaluated, Tracker};
use super::{DriverError, Method, MethodConfig, Outcome};
use crate::lambda::{gcv_select_scaled, RegularizationPolicy};
use crate::problems::FixedPointProblem;
use crate::shanks::{extrapolate, CoefficientStrategy, Combination, ExtrapolationOptions};
use crate::window::SequenceWindow;

/// Continuous updating with minimal-residual weights: at step `j` the Picard
/// value `G(s_j)` is appended, `α` is fitted on `[s_{j−m_j}, …, s_j, G(s_j)]`
/// and `s_{j+1} = [s_{j−m_j}, …, s_j] α`.
///
/// With a single iterate the fit is trivial (`α = 1`, no progress), so the
/// first step is a plain Picard step.
pub fn run_continuous_alpha(problem: &dyn FixedPointProblem, cfg: &MethodConfig) -> Result<Outcome, DriverError> {
    expect_method(cfg, Method::ContinuousAlpha)?;
    run_continuous(problem, cfg, CoefficientStrategy::MinResAlpha)
}

/// Continuous updating with RRE partial sums: the Picard value only enters
/// the fit of `β`; `s_{j+1} = s_j − [Δs_{j−m_j}, …, Δs_{j−1}] β`.
pub fn run_continuous_beta(problem: &dyn FixedPointProblem, cfg: &MethodConfig) -> Result<Outcome, DriverError> {
    expect_method(cfg, Method::ContinuousBeta)?;
    run_continuous(problem, cfg, CoefficientStrategy::MinResBeta)
}

fn expect_method(cfg: &MethodConfig, method: Method) -> Result<(), DriverError> {
    cfg.validate()?;
    if cfg.method != method {
        return Err(DriverError::Config(format!(
            "expected {}, got {}",
            method.label(),
            cfg.method.label()
        )));
    }
    Ok(())
}

fn run_continuous(
    problem: &dyn FixedPointProblem,
    cfg: &MethodConfig,
    strategy: CoefficientStrategy,
) -> Result<Outcome, DriverError> {
    let m = cfg.depth();
    let policy = cfg.policy();
    let metric = cfg.metric.build();
    let options = |lambda: f64| ExtrapolationOptions {
        metric: metric.clone(),
        lambda,
        lambda_scale: cfg.lambda_scale,
        combination: Combination::First,
        svda_sum_normalize: cfg.svda_sum_normalize,
    };
    let mut tracker = Tracker::new(problem, cfg)?;
    let mut window = SequenceWindow::new(problem.dim(), m + 2).map_err(|e| DriverError::Config(e.to_string()))?;

    let halt = drive(|| {
        let s0 = problem.initial_guess();
        let e = tracker.evaluate(&s0)?;
        push(&mut window, s0)?;
        push(&mut window, e.g)?;
        let mut cached: Option<Evaluated> = None;
        let mut j = 1;
        loop {
            let s_j = window.latest().expect("window is non-empty").clone();
            let e = match cached.take() {
                Some(e) => e,
                None => tracker.evaluate(&s_j)?,
            };
            let picard = e.g;
            push(&mut window, picard.clone())?;
            let m_j = m.min(j);
            let n = j - m_j;
            let next = match &policy {
                RegularizationPolicy::Fixed { value } => {
                    extrapolate(&window, n, m_j, &strategy, &options(*value)).unwrap_or(picard)
                }
                RegularizationPolicy::Gcv { grid } => {
                    let lambda = match (window.delta2_matrix(n, m_j), window.delta(n + m_j)) {
                        (Ok(x), Ok(y)) => gcv_select_scaled(&x, &y, grid, cfg.lambda_scale).unwrap_or(grid[grid.len() - 1]),
                        _ => grid[grid.len() - 1],
                    };
                    tracker.note_lambda(lambda);
                    extrapolate(&window, n, m_j, &strategy, &options(lambda)).unwrap_or(picard)
                }
                RegularizationPolicy::GridSearch { grid } => {
                    let candidates = grid
                        .iter()
                        .filter_map(|&l| extrapolate(&window, n, m_j, &strategy, &options(l)).ok().map(|t| (l, t)))
                        .collect();
                    match tracker.probe(candidates)? {
                        Some((_, t, e)) => {
                            cached = Some(e);
                            t
                        }
                        None => picard,
                    }
                }
            };
            window.replace_last(next).map_err(|_| super::tracker::Halt::Diverged)?;
            j += 1;
        }
    });
    Ok(tracker.finish(halt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};
    use crate::lambda::LambdaScale;
    use crate::problems::LinearProblem;
    use nalgebra::dvector;

    fn scalar(m: f64, b: f64, s0: f64) -> LinearProblem {
        LinearProblem::new(Matrix::from_element(1, 1, m), dvector![b], dvector![s0]).unwrap()
    }

    #[test]
    fn aitken_exact_with_unit_depth() {
        // G(s) = 0.5 s + 1: s0 = 0, s1 = 1; step j = 1 fits on (0, 1, 1.5)
        for method in [Method::ContinuousAlpha, Method::ContinuousBeta] {
            let prob = scalar(0.5, 1.0, 0.0);
            let cfg = MethodConfig::new(method).with_depth(1).with_tol(1e-13);
            let out = crate::drivers::run(&prob, &cfg).unwrap();
            assert!(out.record.converged(), "{method:?}");
            assert_eq!(out.record.g_eval_count, 3, "{method:?}");
            assert!((out.solution[0] - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn large_lambda_alpha_averages_window() {
        // α → uniform weights: s2 = (s0 + s1)/2 = 0.5 instead of the limit 2
        let prob = scalar(0.5, 1.0, 0.0);
        let cfg = MethodConfig::new(Method::ContinuousAlpha)
            .with_depth(1)
            .with_policy(RegularizationPolicy::fixed(1e6))
            .with_lambda_scale(LambdaScale::Absolute)
            .with_budget(3);
        let out = run_continuous_alpha(&prob, &cfg).unwrap();
        // third evaluation happens at s2 = 0.5, where G(s2) − s2 = 0.75
        assert!((out.record.residuals[2] - 0.75).abs() < 1e-5);
        // relative λ weighs by 1/‖Δs_i‖²: α → (1, 4)/5, s2 = 0.8
        let out = run_continuous_alpha(&prob, &cfg.with_lambda_scale(LambdaScale::Relative)).unwrap();
        assert!((out.record.residuals[2] - 0.6).abs() < 1e-5);
    }

    #[test]
    fn large_lambda_beta_keeps_latest() {
        // β → 0: s_{j+1} → s_j, so the iteration stalls at s1 = 1
        let prob = scalar(0.5, 1.0, 0.0);
        let cfg = MethodConfig::new(Method::ContinuousBeta)
            .with_depth(1)
            .with_policy(RegularizationPolicy::fixed(1e12))
            .with_budget(4);
        let out = run_continuous_beta(&prob, &cfg).unwrap();
        assert!((out.solution[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fixed_point_input_is_unchanged() {
        for method in [Method::ContinuousAlpha, Method::ContinuousBeta] {
            let prob = LinearProblem::new(Matrix::zeros(2, 2) * 0.3, dvector![1.0, 1.0], dvector![1.0, 1.0]).unwrap();
            let out = crate::drivers::run(&prob, &MethodConfig::new(method)).unwrap();
            assert_eq!(out.record.g_eval_count, 1);
            assert_eq!(out.solution, Vector::from_element(2, 1.0));
        }
    }

    #[test]
    fn rejects_gcv_for_alpha_and_wrong_method() {
        let prob = scalar(0.5, 1.0, 0.0);
        let cfg = MethodConfig::new(Method::ContinuousAlpha).with_policy(RegularizationPolicy::gcv());
        assert!(run_continuous_alpha(&prob, &cfg).is_err());
        assert!(run_continuous_beta(&prob, &MethodConfig::new(Method::ContinuousAlpha)).is_err());
    }
}
