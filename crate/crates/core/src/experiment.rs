//! Configuration-driven comparison runs and run-record serialization.
//!
//! An experiment file is TOML with a `[problem]` table, one `[[methods]]`
//! table per method and optional top-level `tol`, `max_g_evals`, `seed` and
//! `[output]` settings:
//!
//! ```toml
//! tol = 1e-7
//! max_g_evals = 5000
//! seed = 7
//!
//! [problem]
//! kind = "pagerank"
//! nodes = 2000
//! damping = 0.99
//! clusters = 4
//!
//! [[methods]]
//! method = "plain"
//!
//! [[methods]]
//! method = "raa"
//! depth = 7
//! reg = { kind = "grid_search" }
//!
//! [output]
//! path = "pagerank.csv"
//! format = "csv"
//! ```

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drivers::{self, LambdaEvent, MethodConfig, RunRecord, RunStatus};
use crate::problems::{
    clustered_pagerank_fixture, random_linear_problem, read_matrix_market, BratuProblem, Diffusivity,
    FixedPointProblem, NonlinearPoissonProblem, PageRankProblem, ProblemError, SparseStochasticMatrix,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{field}: {message}")]
    Config { field: String, message: String },
    #[error("cannot parse experiment file: {0}")]
    Parse(String),
    #[error("cannot parse records: {0}")]
    Records(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn config_error(field: impl Into<String>, message: impl fmt::Display) -> ExperimentError {
    ExperimentError::Config { field: field.into(), message: message.to_string() }
}

/// Problem to build, with its parameters. Random problems draw from the
/// experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `G(s) = Ms + b` with a random diagonalizable `M`.
    Linear { dim: usize, spectral_radius: f64 },
    /// PageRank on a seeded random graph. With `clusters > 0` the graph is
    /// the clustered bipartite fixture and the start vector is concentrated;
    /// otherwise links are uniform and the start vector is uniform.
    Pagerank {
        nodes: usize,
        #[serde(default = "default_links")]
        links_per_node: usize,
        #[serde(default = "default_damping")]
        damping: f64,
        #[serde(default)]
        clusters: usize,
    },
    /// PageRank on a Matrix Market graph, relative paths resolved against
    /// the experiment file.
    MatrixMarket {
        path: PathBuf,
        #[serde(default = "default_damping")]
        damping: f64,
    },
    Poisson { grid_n: usize, diffusivity: Diffusivity },
    Bratu { grid_n: usize, lambda: f64 },
}

fn default_links() -> usize {
    10
}

fn default_damping() -> f64 {
    0.85
}

impl ProblemSpec {
    /// Mixing parameter used by methods that leave `mixing_beta` unset.
    pub fn default_mixing_beta(&self) -> f64 {
        match self {
            ProblemSpec::Poisson { .. } | ProblemSpec::Bratu { .. } => 0.1,
            _ => 1.0,
        }
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn FixedPointProblem>, ProblemError> {
        Ok(match self {
            ProblemSpec::Linear { dim, spectral_radius } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Box::new(random_linear_problem(*dim, *spectral_radius, &mut rng)?)
            }
            ProblemSpec::Pagerank { nodes, links_per_node, damping, clusters: 0 } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = SparseStochasticMatrix::random(*nodes, *links_per_node, &mut rng)?;
                Box::new(PageRankProblem::with_uniform_start(s, *damping)?)
            }
            ProblemSpec::Pagerank { nodes, links_per_node, damping, clusters } => {
                let (s, u0) = clustered_pagerank_fixture(*nodes, *links_per_node, *clusters, seed)?;
                Box::new(PageRankProblem::new(s, *damping, u0)?)
            }
            ProblemSpec::MatrixMarket { path, damping } => {
                Box::new(PageRankProblem::with_uniform_start(read_matrix_market(path)?, *damping)?)
            }
            ProblemSpec::Poisson { grid_n, diffusivity } => Box::new(NonlinearPoissonProblem::new(*grid_n, *diffusivity)?),
            ProblemSpec::Bratu { grid_n, lambda } => Box::new(BratuProblem::new(*grid_n, *lambda)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(RecordFormat::Csv),
            "json" => Ok(RecordFormat::Json),
            other => Err(format!("unknown record format '{other}' (expected csv or json)")),
        }
    }
}

impl fmt::Display for RecordFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordFormat::Csv => "csv",
            RecordFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: RecordFormat,
}

/// One experiment. `tol`, `max_g_evals` and `seed` apply to every method
/// and override the per-method values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodConfig>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_budget")]
    pub max_g_evals: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_tol() -> f64 {
    1e-7
}

fn default_budget() -> usize {
    10_000
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, methods: Vec<MethodConfig>) -> Self {
        Self {
            problem,
            methods,
            tol: default_tol(),
            max_g_evals: default_budget(),
            seed: 0,
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates an experiment file. Relative Matrix Market and
    /// output paths are resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let ProblemSpec::MatrixMarket { path: mtx, .. } = &mut cfg.problem {
            if mtx.is_relative() {
                *mtx = base.join(&*mtx);
            }
        }
        if let Some(out) = &mut cfg.output.path {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.methods.is_empty() {
            return Err(config_error("methods", "at least one method is required"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(config_error("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_g_evals == 0 {
            return Err(config_error("max_g_evals", "must be at least 1"));
        }
        for (i, m) in self.resolved_methods().iter().enumerate() {
            m.validate().map_err(|e| config_error(format!("methods[{i}]"), e))?;
        }
        Ok(())
    }

    /// Method configurations with the experiment-wide settings applied.
    pub fn resolved_methods(&self) -> Vec<MethodConfig> {
        self.methods
            .iter()
            .map(|m| MethodConfig {
                tol: self.tol,
                max_g_evals: self.max_g_evals,
                seed: self.seed,
                mixing_beta: m.mixing_beta.or(Some(self.problem.default_mixing_beta())),
                ..m.clone()
            })
            .collect()
    }
}

/// Builds the problem once and runs every method on it in parallel. A
/// problem that cannot be built, or a run that cannot start, yields a
/// `Failed` record for the affected methods only.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, ExperimentError> {
    cfg.validate()?;
    let methods = cfg.resolved_methods();
    let problem = match cfg.problem.build(cfg.seed) {
        Ok(p) => p,
        Err(e) => return Ok(methods.iter().map(|m| RunRecord::failed(m.label(), e.to_string())).collect()),
    };
    let problem = problem.as_ref();
    Ok(methods
        .par_iter()
        .map(|m| match drivers::run(problem, m) {
            Ok(out) => out.record,
            Err(e) => RunRecord::failed(m.label(), e.to_string()),
        })
        .collect())
}

const CSV_HEADER: [&str; 5] = ["method", "eval_index", "residual", "lambda_selected", "status"];

fn status_text(status: &RunStatus) -> String {
    match status {
        RunStatus::Failed { message } => format!("failed: {message}"),
        other => other.as_str().to_string(),
    }
}

fn parse_status(text: &str) -> Result<RunStatus, ExperimentError> {
    Ok(match text {
        "converged" => RunStatus::Converged,
        "budget_exhausted" => RunStatus::BudgetExhausted,
        "diverged" => RunStatus::Diverged,
        other => match other.strip_prefix("failed") {
            Some(rest) => RunStatus::Failed { message: rest.strip_prefix(": ").unwrap_or(rest).to_string() },
            None => return Err(ExperimentError::Records(format!("unknown status '{other}'"))),
        },
    })
}

/// Writes records as JSON (the records verbatim) or CSV (one row per
/// evaluation; a run without evaluations gets a single row with empty index
/// and residual). CSV does not carry `wall_ms`.
pub fn write_records<W: Write>(records: &[RunRecord], format: RecordFormat, writer: W) -> Result<(), ExperimentError> {
    match format {
        RecordFormat::Json => {
            let mut w = BufWriter::new(writer);
            serde_json::to_writer_pretty(&mut w, records).map_err(io::Error::from)?;
            writeln!(w)?;
            w.flush()?;
        }
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            let csv_err = |e: csv::Error| ExperimentError::Io(io::Error::other(e));
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for r in records {
                let status = status_text(&r.status);
                if r.residuals.is_empty() {
                    w.write_record([r.method.as_str(), "", "", "", &status]).map_err(csv_err)?;
                }
                for (i, res) in r.residuals.iter().enumerate() {
                    let lambda = r.lambda_at(i).map(|l| l.to_string()).unwrap_or_default();
                    w.write_record([r.method.as_str(), &i.to_string(), &res.to_string(), &lambda, &status])
                        .map_err(csv_err)?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Writes records to `path`, creating parent directories.
pub fn emit_records(records: &[RunRecord], format: RecordFormat, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    if records.is_empty() {
        return Err(config_error("records", "nothing to emit"));
    }
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_records(records, format, File::create(path)?)
}

/// Inverse of [`write_records`].
pub fn read_records<R: Read>(format: RecordFormat, reader: R) -> Result<Vec<RunRecord>, ExperimentError> {
    let bad = |e: &dyn fmt::Display| ExperimentError::Records(e.to_string());
    match format {
        RecordFormat::Json => serde_json::from_reader(BufReader::new(reader)).map_err(|e| bad(&e)),
        RecordFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(reader);
            let header = rdr.headers().map_err(|e| bad(&e))?.clone();
            if header.iter().ne(CSV_HEADER) {
                return Err(bad(&format!("unexpected header {:?}", header)));
            }
            let mut records: Vec<RunRecord> = Vec::new();
            for row in rdr.records() {
                let row = row.map_err(|e| bad(&e))?;
                let (method, index, residual, lambda, status) = (&row[0], &row[1], &row[2], &row[3], &row[4]);
                let status = parse_status(status)?;
                if index.is_empty() {
                    let mut r = RunRecord::failed(method, "");
                    r.status = status;
                    records.push(r);
                    continue;
                }
                let index: usize = index.parse().map_err(|e| bad(&e))?;
                let residual: f64 = residual.parse().map_err(|e| bad(&e))?;
                let continues = records
                    .last()
                    .is_some_and(|r| r.method == method && r.residuals.len() == index && index > 0);
                if !continues {
                    if index != 0 {
                        return Err(bad(&format!("run '{method}' starts at evaluation {index}")));
                    }
                    let mut r = RunRecord::failed(method, "");
                    r.status = status.clone();
                    records.push(r);
                }
                let r = records.last_mut().expect("record was just pushed");
                r.residuals.push(residual);
                r.g_eval_count += 1;
                if !lambda.is_empty() {
                    let lambda: f64 = lambda.parse().map_err(|e| bad(&e))?;
                    r.lambdas.push(LambdaEvent { eval_index: index, lambda });
                }
            }
            Ok(records)
        }
    }
}
