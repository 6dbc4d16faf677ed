use std::path::PathBuf;

use crate::metrics::{PhaseConfig, Precoder};

/// Errors produced by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a model function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs violate a documented precondition (dimensions, PSD-ness, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid scenario: {0}")]
    InvalidConfig(String),

    /// The active-precoding dual bisection did not certify KKT optimality.
    #[error("active solver did not converge after {iterations} sweeps (KKT residual {residual:.3e})")]
    ActiveNotConverged { iterations: usize, residual: f64, last: Box<Precoder> },

    /// Projected gradient on the passive problem ran out of iterations.
    #[error("passive solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    PassiveNotConverged { iterations: usize, residual: f64, last: Box<PhaseConfig> },

    /// A subsolver failed inside the alternating loop. `trace` holds the
    /// weighted sum-rate of every completed outer iteration.
    #[error("optimizer failed at outer iteration {iteration}")]
    Optimizer {
        iteration: usize,
        trace: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("{}", format_parse_errors(.0))]
    Parse(Vec<ParseIssue>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// One problem found while reading a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    pub key: String,
    /// 1-based line number; `None` for keys that are missing altogether.
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

fn format_parse_errors(issues: &[ParseIssue]) -> String {
    let mut out = String::from("config parse error");
    for issue in issues {
        out.push_str("\n  ");
        out.push_str(&issue.to_string());
    }
    out
}

pub type Result<T> = std::result::Result<T, Error>;
