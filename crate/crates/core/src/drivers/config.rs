use serde::{Deserialize, Serialize};

use super::DriverError;
use crate::lambda::{LambdaScale, RegularizationPolicy};
use crate::linalg::Metric;
use crate::shanks::CoefficientStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Restarted, smallest-singular-vector weights.
    Svda,
    /// Restarted, regularized minimal-residual α.
    Rnla,
    /// Restarted, regularized RRE β.
    Rrre,
    /// Restarted, regularized topological α.
    Rtsa,
    /// Anderson acceleration (least-squares θ).
    Aa,
    /// Anderson acceleration with SVD-shift regularized θ.
    Raa,
    /// Experimental: regularized multisecant quasi-Newton matrix.
    RaaMultisecant,
    AtmRre,
    AtmMpe,
    AtmMmpe,
    StabilizedAa,
    /// Continuous updating with minimal-residual α.
    ContinuousAlpha,
    /// Continuous updating with RRE β.
    ContinuousBeta,
    #[serde(alias = "plain")]
    PlainFixedPoint,
}

impl Method {
    pub const ALL: [Method; 14] = [
        Method::Svda,
        Method::Rnla,
        Method::Rrre,
        Method::Rtsa,
        Method::Aa,
        Method::Raa,
        Method::RaaMultisecant,
        Method::AtmRre,
        Method::AtmMpe,
        Method::AtmMmpe,
        Method::StabilizedAa,
        Method::ContinuousAlpha,
        Method::ContinuousBeta,
        Method::PlainFixedPoint,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Svda => "SVDA",
            Method::Rnla => "RNLA",
            Method::Rrre => "RRRE",
            Method::Rtsa => "RTSA",
            Method::Aa => "AA",
            Method::Raa => "RAA",
            Method::RaaMultisecant => "RAA-multisecant",
            Method::AtmRre => "ATM-RRE",
            Method::AtmMpe => "ATM-MPE",
            Method::AtmMmpe => "ATM-MMPE",
            Method::StabilizedAa => "StabilizedAA",
            Method::ContinuousAlpha => "CU-alpha",
            Method::ContinuousBeta => "CU-beta",
            Method::PlainFixedPoint => "PlainFixedPoint",
        }
    }

    /// Config-file name of the method.
    pub fn key(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }

    pub fn description(self) -> &'static str {
        match self {
            Method::Svda => "restarted; weights from the smallest singular vector of ΔS",
            Method::Rnla => "restarted; regularized minimal-residual α",
            Method::Rrre => "restarted; regularized RRE β",
            Method::Rtsa => "restarted; regularized topological α",
            Method::Aa => "Anderson acceleration",
            Method::Raa => "regularized Anderson acceleration (SVD shift)",
            Method::RaaMultisecant => "experimental: regularized multisecant Anderson variant",
            Method::AtmRre => "Anderson-type mixing, Y = Δ²S",
            Method::AtmMpe => "Anderson-type mixing, Y = ΔS",
            Method::AtmMmpe => "Anderson-type mixing, fixed random Y",
            Method::StabilizedAa => "Anderson acceleration with threshold Gram-Schmidt",
            Method::ContinuousAlpha => "continuous updating with minimal-residual α",
            Method::ContinuousBeta => "continuous updating with RRE β",
            Method::PlainFixedPoint => "plain fixed-point iteration",
        }
    }

    /// Coefficient strategy of the restarted methods.
    pub fn restart_strategy(self) -> Option<CoefficientStrategy> {
        match self {
            Method::Svda => Some(CoefficientStrategy::MinResAlphaSvd),
            Method::Rnla => Some(CoefficientStrategy::MinResAlpha),
            Method::Rrre => Some(CoefficientStrategy::MinResBeta),
            Method::Rtsa => Some(CoefficientStrategy::TopoAlpha),
            _ => None,
        }
    }

    /// Window depth giving histories of 7 iterates: the order `k` for
    /// restarted methods, the mixing depth `m` otherwise.
    pub fn default_depth(self) -> usize {
        match self {
            Method::Svda | Method::Rnla | Method::Rrre => 5,
            Method::Rtsa => 3,
            _ => 7,
        }
    }

    pub fn default_policy(self) -> RegularizationPolicy {
        match self {
            Method::Rnla | Method::Rtsa => RegularizationPolicy::grid_search(),
            Method::Rrre | Method::Raa => RegularizationPolicy::gcv(),
            _ => RegularizationPolicy::fixed(0.0),
        }
    }

    /// Methods whose coefficients are partial sums or mixing weights and
    /// hence a ridge regression that GCV applies to.
    fn supports_gcv(self) -> bool {
        matches!(
            self,
            Method::Rrre
                | Method::Raa
                | Method::RaaMultisecant
                | Method::AtmRre
                | Method::AtmMpe
                | Method::AtmMmpe
                | Method::ContinuousBeta
        )
    }

    fn unregularized(self) -> bool {
        matches!(
            self,
            Method::Svda | Method::Aa | Method::StabilizedAa | Method::PlainFixedPoint
        )
    }
}

/// Weighting of the least-squares problems. Only the identity is
/// configurable from files; explicit metrics go through the library API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    #[default]
    Identity,
}

impl MetricSpec {
    pub fn build(self) -> Metric {
        Metric::Identity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub method: Method,
    /// Window order `k` (restarted) or mixing depth `m` (all others).
    #[serde(default)]
    pub depth: Option<usize>,
    /// Mixing parameter; unset means the problem's default.
    #[serde(default)]
    pub mixing_beta: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub reg: Option<RegularizationPolicy>,
    /// Whether λ values are relative to the size of the design matrix.
    #[serde(default)]
    pub lambda_scale: LambdaScale,
    #[serde(default = "default_budget")]
    pub max_g_evals: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Seed for the random projection of ATM-MMPE.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub svda_sum_normalize: bool,
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub label: Option<String>,
}

fn default_tau() -> f64 {
    10.0
}
fn default_budget() -> usize {
    10_000
}
fn default_tol() -> f64 {
    1e-7
}
fn default_true() -> bool {
    true
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            depth: None,
            mixing_beta: None,
            tau: default_tau(),
            metric: MetricSpec::Identity,
            reg: None,
            lambda_scale: LambdaScale::default(),
            max_g_evals: default_budget(),
            tol: default_tol(),
            seed: 0,
            svda_sum_normalize: true,
            record_timing: false,
            label: None,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.mixing_beta = Some(beta);
        self
    }

    /// Mixing parameter, 1 when unset.
    pub fn beta(&self) -> f64 {
        self.mixing_beta.unwrap_or(1.0)
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_policy(mut self, reg: RegularizationPolicy) -> Self {
        self.reg = Some(reg);
        self
    }

    pub fn with_lambda_scale(mut self, scale: LambdaScale) -> Self {
        self.lambda_scale = scale;
        self
    }

    pub fn with_budget(mut self, max_g_evals: usize) -> Self {
        self.max_g_evals = max_g_evals;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn depth(&self) -> usize {
        self.depth.unwrap_or_else(|| self.method.default_depth())
    }

    pub fn policy(&self) -> RegularizationPolicy {
        self.reg.clone().unwrap_or_else(|| self.method.default_policy())
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.label().to_string())
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |msg: String| Err(DriverError::Config(msg));
        let beta = self.beta();
        if !(beta > 0.0 && beta <= 1.0) {
            return bad(format!("mixing_beta = {beta} must lie in (0, 1]"));
        }
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            return bad(format!("tau = {} must be a finite value above 1", self.tau));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if self.max_g_evals == 0 {
            return bad("max_g_evals must be at least 1".into());
        }
        if self.depth() == 0 {
            return bad("depth must be at least 1".into());
        }
        let policy = self.policy();
        policy
            .validate()
            .map_err(|e| DriverError::Config(format!("reg: {e}")))?;
        match policy {
            RegularizationPolicy::Gcv { .. } if !self.method.supports_gcv() => {
                bad(format!("reg: GCV does not apply to {}", self.method.label()))
            }
            RegularizationPolicy::Fixed { value } if value == 0.0 => Ok(()),
            _ if self.method.unregularized() => {
                bad(format!("reg: {} takes no regularization", self.method.label()))
            }
            _ => Ok(()),
        }
    }
}
