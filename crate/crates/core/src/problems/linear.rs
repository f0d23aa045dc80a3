use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{check_len, FixedPointProblem, ProblemError, Result};
use crate::linalg::{Matrix, Vector};

const MAX_PROBLEM_CONDITION: f64 = 1e12;

/// `G(s) = M s + b`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    m: Matrix,
    b: Vector,
    s0: Vector,
    solution: Vector,
}

impl LinearProblem {
    /// Fails when `I − M` is singular or its condition number exceeds `1e12`.
    pub fn new(m: Matrix, b: Vector, s0: Vector) -> Result<Self> {
        let p = b.len();
        if m.nrows() != p || m.ncols() != p {
            return Err(ProblemError::InvalidParameter(format!(
                "M is {}x{} but b has length {p}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_len(p, &s0)?;
        let a = Matrix::identity(p, p) - &m;
        let sv = a.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if smin == 0.0 || smax / smin > MAX_PROBLEM_CONDITION || !smin.is_finite() {
            return Err(ProblemError::SingularProblem {
                condition: if smin == 0.0 { f64::INFINITY } else { smax / smin },
            });
        }
        let solution = a
            .lu()
            .solve(&b)
            .ok_or(ProblemError::SingularProblem { condition: f64::INFINITY })?;
        Ok(Self { m, b, s0, solution })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn offset(&self) -> &Vector {
        &self.b
    }
}

impl FixedPointProblem for LinearProblem {
    fn name(&self) -> String {
        format!("linear(p={})", self.b.len())
    }

    fn dim(&self) -> usize {
        self.b.len()
    }

    fn evaluate(&self, s: &Vector) -> Result<Vector> {
        check_len(self.b.len(), s)?;
        Ok(&self.m * s + &self.b)
    }

    fn initial_guess(&self) -> Vector {
        self.s0.clone()
    }

    fn known_solution(&self) -> Option<&Vector> {
        Some(&self.solution)
    }
}

/// Random `M = V D V⁻¹` with real eigenvalues of modulus at most
/// `spectral_radius` (one of them equal to it) kept at distance 0.1 from 1.
pub fn random_linear_problem<R: Rng>(p: usize, spectral_radius: f64, rng: &mut R) -> Result<LinearProblem> {
    if p == 0 || !(spectral_radius > 0.0 && spectral_radius.is_finite()) {
        return Err(ProblemError::InvalidParameter(format!(
            "p={p}, spectral radius {spectral_radius}"
        )));
    }
    let eig = Uniform::new_inclusive(-spectral_radius, spectral_radius)
        .map_err(|e| ProblemError::InvalidParameter(e.to_string()))?;
    let mut d = Vec::with_capacity(p);
    d.push(if (spectral_radius - 1.0).abs() < 0.1 { -spectral_radius } else { spectral_radius });
    while d.len() < p {
        let v: f64 = eig.sample(rng);
        if (v - 1.0).abs() >= 0.1 {
            d.push(v);
        }
    }
    loop {
        let v = Matrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
        let sv = v.singular_values();
        if sv.min() * 1e3 < sv.max() {
            continue;
        }
        let inv = v.clone().try_inverse().expect("well-conditioned by construction");
        let m = &v * Matrix::from_diagonal(&Vector::from_vec(d.clone())) * inv;
        let b = Vector::from_fn(p, |_, _| StandardNormal.sample(rng));
        let s0 = Vector::from_fn(p, |_, _| StandardNormal.sample(rng));
        return LinearProblem::new(m, b, s0);
    }
}
