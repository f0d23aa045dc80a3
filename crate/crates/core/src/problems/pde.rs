//! Finite-difference Picard maps on the unit square.
//!
//! Both problems discretize `−∇·(q(u)∇u) + u_x` on a uniform grid of
//! spacing `h = 1/grid_n` in the expanded form `−q(u)Δu − q'(u)|∇u|² + u_x`,
//! with the 5-point Laplacian and centered first differences. Unknowns are
//! the `(grid_n − 1)²` interior nodes, ordered row by row in `x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_len, BandedLu, BandedMatrix, FixedPointProblem, ProblemError, Result};
use crate::linalg::Vector;

const MIN_GRID: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Grid {
    n: usize,
    h: f64,
}

impl Grid {
    fn new(grid_n: usize) -> Result<Self> {
        if grid_n < MIN_GRID {
            return Err(ProblemError::InvalidParameter(format!("grid_n={grid_n} < {MIN_GRID}")));
        }
        Ok(Self { n: grid_n, h: 1.0 / grid_n as f64 })
    }

    fn interior(&self) -> usize {
        self.n - 1
    }

    fn unknowns(&self) -> usize {
        self.interior() * self.interior()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.interior() + (i - 1)
    }

    fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.h, j as f64 * self.h)
    }

    /// Assembles `−d Δv + a·∇v` for nodal coefficients `(d, a_x, a_y)` and
    /// returns it with the boundary contribution to the rhs.
    fn assemble(
        &self,
        coeffs: impl Fn(usize, usize) -> (f64, f64, f64),
        boundary: impl Fn(usize, usize) -> f64,
    ) -> (BandedMatrix, Vector) {
        let m = self.interior();
        let h2 = self.h * self.h;
        let half = 0.5 / self.h;
        let mut a = BandedMatrix::zeros(self.unknowns(), m);
        let mut bc = Vector::zeros(self.unknowns());
        for j in 1..=m {
            for i in 1..=m {
                let row = self.index(i, j);
                let (d, ax, ay) = coeffs(i, j);
                let neighbors = [
                    (i + 1, j, ax * half),
                    (i - 1, j, -ax * half),
                    (i, j + 1, ay * half),
                    (i, j - 1, -ay * half),
                ];
                for (ni, nj, adv) in neighbors {
                    let coef = -d / h2 + adv;
                    if self.is_boundary(ni, nj) {
                        bc[row] -= coef * boundary(ni, nj);
                    } else {
                        a.add(row, self.index(ni, nj), coef);
                    }
                }
                a.add(row, row, 4.0 * d / h2);
            }
        }
        (a, bc)
    }

    fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vector {
        let m = self.interior();
        Vector::from_fn(self.unknowns(), |k, _| {
            let (x, y) = self.coords(k % m + 1, k / m + 1);
            f(x, y)
        })
    }
}

/// Diffusivity `q(u)` of the nonlinear Poisson problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diffusivity {
    /// `q = 1`; the Picard map is affine.
    Constant,
    /// `q = 1 + u²`.
    #[serde(rename = "q1u2")]
    QuadraticU,
    /// `q = 1 + u⁴`.
    #[serde(rename = "q1u4")]
    QuarticU,
}

impl Diffusivity {
    fn exponent(self) -> i32 {
        match self {
            Diffusivity::Constant => 0,
            Diffusivity::QuadraticU => 2,
            Diffusivity::QuarticU => 4,
        }
    }

    pub fn q(self, u: f64) -> f64 {
        match self {
            Diffusivity::Constant => 1.0,
            _ => 1.0 + u.powi(self.exponent()),
        }
    }

    fn dq(self, u: f64) -> f64 {
        match self {
            Diffusivity::Constant => 0.0,
            _ => self.exponent() as f64 * u.powi(self.exponent() - 1),
        }
    }
}

fn exact(x: f64, y: f64) -> f64 {
    (-2.0 * x).exp() * (3.0 * PI * y).sin()
}

/// `−∇·(q(u)∇u) + u_x = f` with `f` chosen so that `u = e^{−2x} sin(3πy)`.
/// The Picard map lags the coefficients: `G(u)` solves
/// `−q(u)Δv − q'(u)∇u·∇v + v_x = f`.
#[derive(Debug, Clone)]
pub struct NonlinearPoissonProblem {
    grid: Grid,
    diffusivity: Diffusivity,
    rhs: Vector,
    exact: Vector,
}

impl NonlinearPoissonProblem {
    pub fn new(grid_n: usize, diffusivity: Diffusivity) -> Result<Self> {
        let grid = Grid::new(grid_n)?;
        let lap = 4.0 - 9.0 * PI * PI;
        let rhs = grid.sample(|x, y| {
            let u = exact(x, y);
            let grad2 = 4.0 * u * u + 9.0 * PI * PI * (-4.0 * x).exp() * (3.0 * PI * y).cos().powi(2);
            -diffusivity.q(u) * lap * u - diffusivity.dq(u) * grad2 - 2.0 * u
        });
        let exact = grid.sample(exact);
        Ok(Self { grid, diffusivity, rhs, exact })
    }

    /// Exact solution sampled at the interior nodes.
    pub fn exact_on_grid(&self) -> &Vector {
        &self.exact
    }

    fn system(&self, u: &Vector) -> (BandedMatrix, Vector) {
        let g = self.grid;
        let d = self.diffusivity;
        let nodal = |i: usize, j: usize| {
            if g.is_boundary(i, j) {
                let (x, y) = g.coords(i, j);
                exact(x, y)
            } else {
                u[g.index(i, j)]
            }
        };
        let half = 0.5 / g.h;
        let coeffs = |i: usize, j: usize| {
            let up = nodal(i, j);
            let ux = (nodal(i + 1, j) - nodal(i - 1, j)) * half;
            let uy = (nodal(i, j + 1) - nodal(i, j - 1)) * half;
            let dq = d.dq(up);
            (d.q(up), 1.0 - dq * ux, -dq * uy)
        };
        let (a, bc) = g.assemble(coeffs, |i, j| {
            let (x, y) = g.coords(i, j);
            exact(x, y)
        });
        (a, bc + &self.rhs)
    }

    /// Grid L2 norm `h·‖A(u)u − f‖` at the sampled exact solution.
    pub fn consistency_residual(&self) -> f64 {
        let (a, rhs) = self.system(&self.exact);
        (a.mul(&self.exact) - rhs).norm() * self.grid.h
    }
}

impl FixedPointProblem for NonlinearPoissonProblem {
    fn name(&self) -> String {
        let q = match self.diffusivity {
            Diffusivity::Constant => "q1",
            Diffusivity::QuadraticU => "q1u2",
            Diffusivity::QuarticU => "q1u4",
        };
        format!("poisson({q}, grid_n={})", self.grid.n)
    }

    fn dim(&self) -> usize {
        self.grid.unknowns()
    }

    fn evaluate(&self, u: &Vector) -> Result<Vector> {
        check_len(self.dim(), u)?;
        if !u.iter().all(|v| v.is_finite()) {
            return Err(ProblemError::LinearSolveFailed("non-finite iterate".into()));
        }
        let (a, rhs) = self.system(u);
        a.factor()?.solve(&rhs)
    }

    fn initial_guess(&self) -> Vector {
        Vector::zeros(self.dim())
    }
}

/// `−Δu + u_x + λ e^u = 0` with zero boundary data; `G(u) = A⁻¹(−λ e^u)`.
#[derive(Debug, Clone)]
pub struct BratuProblem {
    grid: Grid,
    lambda: f64,
    lu: BandedLu,
}

impl BratuProblem {
    pub fn new(grid_n: usize, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(ProblemError::InvalidParameter(format!("Bratu parameter {lambda}")));
        }
        let grid = Grid::new(grid_n)?;
        let (a, _) = grid.assemble(|_, _| (1.0, 1.0, 0.0), |_, _| 0.0);
        Ok(Self { grid, lambda, lu: a.factor()? })
    }

    pub fn parameter(&self) -> f64 {
        self.lambda
    }
}

impl FixedPointProblem for BratuProblem {
    fn name(&self) -> String {
        format!("bratu(lambda={}, grid_n={})", self.lambda, self.grid.n)
    }

    fn dim(&self) -> usize {
        self.grid.unknowns()
    }

    fn evaluate(&self, u: &Vector) -> Result<Vector> {
        check_len(self.dim(), u)?;
        let rhs = u.map(|v| -self.lambda * v.exp());
        self.lu.solve(&rhs)
    }

    fn initial_guess(&self) -> Vector {
        Vector::zeros(self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consistency_is_second_order() {
        for d in [Diffusivity::Constant, Diffusivity::QuadraticU, Diffusivity::QuarticU] {
            let coarse = NonlinearPoissonProblem::new(16, d).unwrap().consistency_residual();
            let fine = NonlinearPoissonProblem::new(32, d).unwrap().consistency_residual();
            assert!(coarse / fine >= 3.5, "{d:?}: {coarse} / {fine}");
        }
    }

    #[test]
    fn constant_diffusivity_is_affine() {
        let prob = NonlinearPoissonProblem::new(10, Diffusivity::Constant).unwrap();
        let u = prob.exact_on_grid().clone();
        let v = Vector::from_fn(prob.dim(), |i, _| (i as f64).sin());
        let g = |w: &Vector| prob.evaluate(w).unwrap();
        let lhs = g(&(&u * 0.3 + &v * 0.7));
        let rhs = g(&u) * 0.3 + g(&v) * 0.7;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn picard_residual_decreases() {
        let prob = NonlinearPoissonProblem::new(16, Diffusivity::QuadraticU).unwrap();
        let mut u = prob.initial_guess();
        let mut prev = f64::INFINITY;
        for _ in 0..12 {
            let g = prob.evaluate(&u).unwrap();
            let r = (&g - &u).norm();
            assert!(r < prev, "{r} >= {prev}");
            prev = r;
            u = g;
        }
    }

    #[test]
    fn picard_fixed_point_near_exact() {
        let prob = NonlinearPoissonProblem::new(16, Diffusivity::QuarticU).unwrap();
        let mut u = prob.initial_guess();
        for _ in 0..200 {
            u = prob.evaluate(&u).unwrap();
        }
        assert!((prob.evaluate(&u).unwrap() - &u).norm() < 1e-9);
        assert!((&u - prob.exact_on_grid()).amax() < 0.05);
    }

    #[test]
    fn bratu_zero_parameter() {
        let prob = BratuProblem::new(8, 0.0).unwrap();
        let z = Vector::zeros(prob.dim());
        assert_eq!(prob.evaluate(&z).unwrap(), z);
    }

    #[test]
    fn bratu_picard_converges() {
        for lambda in [1.0, -1.0] {
            let prob = BratuProblem::new(16, lambda).unwrap();
            let mut u = prob.initial_guess();
            for _ in 0..60 {
                u = prob.evaluate(&u).unwrap();
            }
            assert!((prob.evaluate(&u).unwrap() - &u).norm() < 1e-10, "lambda {lambda}");
        }
    }

    #[test]
    fn rejects_small_grid() {
        assert!(BratuProblem::new(4, 1.0).is_err());
        assert!(NonlinearPoissonProblem::new(7, Diffusivity::QuadraticU).is_err());
    }
}
