//! The inverse-Jacobian approximation behind Anderson-type steps,
//!
//! `H = −βI + (ΔS + βΔF)(ΔFᵀΔF + λI)⁻¹ΔFᵀ`,
//!
//! so that the mixed iterate is `s_{j+1} = s_j − H f_j`. For `λ = 0` it
//! satisfies the multisecant condition `HΔF = ΔS`.

use crate::linalg::{self, LinalgError, Matrix, Vector, MAX_CONDITION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HVariant {
    /// Regularized coefficients `(ΔF̃ᵀΔF̃)⁻¹ΔFᵀ` with `ΔF̃ = U√(Σ² + λ)Vᵀ`;
    /// the regularized Anderson scheme.
    #[default]
    Anderson,
    /// Experimental: `ΔF̃` replaces `ΔF` everywhere, giving `HΔF̃ = ΔS`.
    RegularizedMultisecant,
}

/// `H` kept in factored form and applied without forming a `p×p` matrix.
#[derive(Debug, Clone)]
pub struct QuasiNewtonMatrixView {
    ds: Matrix,
    df: Matrix,
    beta: f64,
    lambda: f64,
    variant: HVariant,
    u: Matrix,
    sigma: Vector,
    v_t: Matrix,
}

impl QuasiNewtonMatrixView {
    pub fn new(ds: Matrix, df: Matrix, beta: f64, lambda: f64) -> Result<Self, LinalgError> {
        Self::with_variant(ds, df, beta, lambda, HVariant::Anderson)
    }

    pub fn with_variant(
        ds: Matrix,
        df: Matrix,
        beta: f64,
        lambda: f64,
        variant: HVariant,
    ) -> Result<Self, LinalgError> {
        if ds.shape() != df.shape() {
            return Err(LinalgError::DimensionMismatch(format!(
                "ΔS is {:?}, ΔF is {:?}",
                ds.shape(),
                df.shape()
            )));
        }
        linalg::check_lambda(lambda)?;
        linalg::ensure_finite(ds.as_slice())?;
        linalg::ensure_finite(df.as_slice())?;
        let (u, sigma, v_t) = if df.ncols() == 0 {
            (Matrix::zeros(df.nrows(), 0), Vector::zeros(0), Matrix::zeros(0, 0))
        } else {
            linalg::thin_svd(&df)
        };
        if lambda == 0.0 && df.ncols() > 0 {
            let smax = sigma.max();
            let smin = if df.nrows() < df.ncols() { 0.0 } else { sigma.min() };
            if smin == 0.0 || smax / smin > MAX_CONDITION {
                return Err(LinalgError::SingularSystem {
                    condition: if smin == 0.0 { f64::INFINITY } else { smax / smin },
                });
            }
        }
        Ok(Self { ds, df, beta, lambda, variant, u, sigma, v_t })
    }

    pub fn dim(&self) -> usize {
        self.df.nrows()
    }

    /// Mixing coefficients `θ(v)` such that `Hv = −βv + (ΔS + βΔF)θ(v)`
    /// (with `ΔF̃` in place of `ΔF` for the multisecant variant).
    pub fn coefficients(&self, v: &Vector) -> Vector {
        let proj = self.u.tr_mul(v);
        let scaled = Vector::from_fn(self.sigma.len(), |i, _| {
            let s = self.sigma[i];
            let denom = s * s + self.lambda;
            if denom == 0.0 {
                return 0.0;
            }
            match self.variant {
                HVariant::Anderson => s / denom * proj[i],
                HVariant::RegularizedMultisecant => proj[i] / denom.sqrt(),
            }
        });
        self.v_t.tr_mul(&scaled)
    }

    fn shifted_df(&self) -> Matrix {
        match self.variant {
            HVariant::Anderson => self.df.clone(),
            HVariant::RegularizedMultisecant => {
                let shifted = self.sigma.map(|s| (s * s + self.lambda).sqrt());
                &self.u * Matrix::from_diagonal(&shifted) * &self.v_t
            }
        }
    }

    /// `H v`.
    pub fn apply(&self, v: &Vector) -> Vector {
        if self.df.ncols() == 0 {
            return v * -self.beta;
        }
        let theta = self.coefficients(v);
        let mixed = &self.ds + self.shifted_df() * self.beta;
        mixed * theta - v * self.beta
    }

    pub fn to_dense(&self) -> Matrix {
        let p = self.dim();
        let mut out = Matrix::zeros(p, p);
        for i in 0..p {
            let e = Vector::from_fn(p, |k, _| if k == i { 1.0 } else { 0.0 });
            out.set_column(i, &self.apply(&e));
        }
        out
    }
}

/// Dense `H` from the closed form, with the inverse formed explicitly.
pub fn explicit_h(ds: &Matrix, df: &Matrix, beta: f64, lambda: f64) -> Result<Matrix, LinalgError> {
    let p = df.nrows();
    let m = df.ncols();
    let mut h = Matrix::identity(p, p) * -beta;
    if m == 0 {
        return Ok(h);
    }
    let gram = df.tr_mul(df) + Matrix::identity(m, m) * lambda;
    let inv = gram
        .try_inverse()
        .ok_or(LinalgError::SingularSystem { condition: f64::INFINITY })?;
    h += (ds + df * beta) * inv * df.transpose();
    Ok(h)
}

/// `Σ f̂ f̂ᵀ / f̂ᵀf̂` over the columns of `fhat`.
pub fn projector_sum(fhat: &Matrix) -> Matrix {
    let p = fhat.nrows();
    let mut q = Matrix::zeros(p, p);
    for c in fhat.column_iter() {
        let n2 = c.norm_squared();
        if n2 > 0.0 {
            q += c * c.transpose() / n2;
        }
    }
    q
}

/// `H⁰ = −βI`, `H^d = H^{d−1} + (Δs_d − H^{d−1}Δf_d) f̂_dᵀ / (f̂_dᵀΔf_d)`.
pub fn h_rank_one_recursion(ds: &Matrix, df: &Matrix, fhat: &Matrix, beta: f64) -> Matrix {
    let p = df.nrows();
    let mut h = Matrix::identity(p, p) * -beta;
    for d in 0..df.ncols() {
        let (dsd, dfd, fd) = (ds.column(d), df.column(d), fhat.column(d));
        let num = dsd - &h * dfd;
        h += num * fd.transpose() / fd.dot(&dfd);
    }
    h
}

/// Same matrix through orthogonalized secant pairs:
/// `ŝ_1 = Δs_1`, `ŝ_d = Δs_d − H^{d−1} Q_{d−1} Δf_d` and
/// `H^d = H^{d−1} + (ŝ_d − H^{d−1} f̂_d) f̂_dᵀ / (f̂_dᵀf̂_d)`.
pub fn h_orthogonalized_recursion(ds: &Matrix, df: &Matrix, fhat: &Matrix, beta: f64) -> Matrix {
    let p = df.nrows();
    let mut h = Matrix::identity(p, p) * -beta;
    let mut q = Matrix::zeros(p, p);
    for d in 0..df.ncols() {
        let fd = fhat.column(d).into_owned();
        let s_hat = if d == 0 {
            ds.column(0).into_owned()
        } else {
            ds.column(d) - &h * (&q * df.column(d))
        };
        let n2 = fd.norm_squared();
        let num = s_hat - &h * &fd;
        h += num * fd.transpose() / n2;
        q += &fd * fd.transpose() / n2;
    }
    h
}
