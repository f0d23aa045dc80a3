use serde::{Deserialize, Serialize};

/// Terminal state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Diverged,
    /// The problem could not be built or evaluated.
    Failed { message: String },
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::BudgetExhausted => "budget_exhausted",
            RunStatus::Diverged => "diverged",
            RunStatus::Failed { .. } => "failed",
        }
    }
}

/// λ chosen by a selection policy, attached to the first evaluation of the
/// iterate it produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEvent {
    pub eval_index: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    /// `‖G(s) − s‖` after every evaluation of `G`, probes included.
    /// Non-finite values serialize as strings.
    #[serde(with = "lossless_floats")]
    pub residuals: Vec<f64>,
    pub g_eval_count: usize,
    pub lambdas: Vec<LambdaEvent>,
    /// Only populated when timing is requested, so records stay reproducible.
    pub wall_ms: Option<f64>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn failed(method: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            residuals: Vec::new(),
            g_eval_count: 0,
            lambdas: Vec::new(),
            wall_ms: None,
            status: RunStatus::Failed { message: message.into() },
        }
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }

    /// λ attached to evaluation `eval_index`, if any.
    pub fn lambda_at(&self, eval_index: usize) -> Option<f64> {
        self.lambdas
            .iter()
            .find(|e| e.eval_index == eval_index)
            .map(|e| e.lambda)
    }
}

mod lossless_floats {
    use serde::de::Error;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            if v.is_finite() {
                seq.serialize_element(v)?;
            } else {
                seq.serialize_element(&v.to_string())?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Entry>::deserialize(d)?
            .into_iter()
            .map(|e| match e {
                Entry::Number(v) => Ok(v),
                Entry::Text(t) => t.parse().map_err(D::Error::custom),
            })
            .collect()
    }
}
