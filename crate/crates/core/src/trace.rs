//! Per-iteration logs and the CSV trace format.
//!
//! A trace file starts with one `# metadata: key=value;...` line followed by
//! the header `k,f_val,grad_norm,eps_k,i_k,inner_iters,elapsed_s` and one row
//! per [`IterationRecord`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: &str = "k,f_val,grad_norm,eps_k,i_k,inner_iters,elapsed_s";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("iteration {found} recorded out of order (expected k = {expected})")]
    OutOfOrder { expected: usize, found: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed trace file: {0}")]
    Malformed(String),
}

/// One outer iteration.
///
/// For the IGD family `grad_norm` is `‖g^k‖` of the accepted estimate; for
/// augmented-Lagrangian runs it is the constraint residual that plays the
/// same role. `eps_k` is the error level the iteration started from and
/// `i_k` the number of shrinks applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f_val: f64,
    pub grad_norm: f64,
    pub eps_k: f64,
    pub i_k: u32,
    pub inner_iters: u64,
    #[serde(rename = "elapsed_s")]
    pub elapsed: f64,
    /// The iterate `x^k`, kept only when the solver was asked to.
    #[serde(skip)]
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The error level fell to the configured floor.
    EpsTol,
    /// The accepted gradient estimate fell below the configured tolerance.
    GradTol,
    /// A problem-specific residual (e.g. the Lasso η) met its tolerance.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Outer,
    Time,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged(StopReason),
    /// The inner search hit its cap. `bound` is a certified upper bound on
    /// the gradient norm at the final iterate (for ALM runs: on
    /// `‖y − Prox(y)‖/λ` at the final multiplier).
    StationaryCertificate { bound: f64 },
    BudgetExhausted(Budget),
    OracleFailure(String),
}

impl Status {
    pub fn is_success(&self) -> bool {
        matches!(
            self,
            Status::Converged(_) | Status::StationaryCertificate { .. }
        )
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged(StopReason::EpsTol) => write!(f, "converged(eps_tol)"),
            Status::Converged(StopReason::GradTol) => write!(f, "converged(grad_tol)"),
            Status::Converged(StopReason::Residual) => write!(f, "converged(residual)"),
            Status::StationaryCertificate { bound } => write!(f, "stationary_certificate({bound:e})"),
            Status::BudgetExhausted(Budget::Outer) => write!(f, "budget_exhausted(outer)"),
            Status::BudgetExhausted(Budget::Time) => write!(f, "budget_exhausted(time)"),
            Status::OracleFailure(msg) => write!(f, "oracle_failure({msg})"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    /// Write measured wall-clock seconds. When false the column is zero and
    /// the body depends only on the run's inputs.
    pub wall_clock: bool,
}

#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub method: String,
    pub seed: Option<u64>,
    pub metadata: BTreeMap<String, String>,
    records: Vec<IterationRecord>,
    /// θ of the run, when the `eps_{k+1} = θ^{i_k} eps_k` relation applies.
    eps_reduction: Option<f64>,
}

impl IterationTrace {
    pub fn new(method: impl Into<String>) -> Self {
        IterationTrace {
            method: method.into(),
            ..Default::default()
        }
    }

    /// Declares the error-reduction factor, enabling the debug-build check of
    /// `eps_{k+1} = θ^{i_k} eps_k` between consecutive records.
    pub fn with_eps_reduction(mut self, theta: f64) -> Self {
        self.eps_reduction = Some(theta);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn total_inner_iters(&self) -> u64 {
        self.records.iter().map(|r| r.inner_iters).sum()
    }

    /// Appends `rec`, which must carry `k = last k + 1` (or 1 on an empty trace).
    pub fn record(&mut self, rec: IterationRecord) -> Result<(), TraceError> {
        let expected = self.records.last().map_or(1, |r| r.k + 1);
        if rec.k != expected {
            return Err(TraceError::OutOfOrder {
                expected,
                found: rec.k,
            });
        }
        if let (Some(theta), Some(prev)) = (self.eps_reduction, self.records.last()) {
            let predicted = prev.eps_k * theta.powi(prev.i_k as i32);
            debug_assert!(
                (rec.eps_k - predicted).abs() <= 1e-12 * predicted.abs().max(f64::MIN_POSITIVE),
                "eps_k {} breaks eps_(k+1) = theta^i_k eps_k (expected {})",
                rec.eps_k,
                predicted
            );
        }
        self.records.push(rec);
        Ok(())
    }

    fn metadata_line(&self) -> String {
        let mut parts = vec![format!("method={}", self.method)];
        if let Some(seed) = self.seed {
            parts.push(format!("seed={seed}"));
        }
        for (k, v) in &self.metadata {
            parts.push(format!("{}={}", k, v.replace([';', '\n'], ",")));
        }
        format!("# metadata: {}", parts.join(";"))
    }

    pub fn write_csv<W: Write>(&self, mut out: W, opts: CsvOptions) -> Result<(), TraceError> {
        writeln!(out, "{}", self.metadata_line())?;
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            let mut row = r.clone();
            if !opts.wall_clock {
                row.elapsed = 0.0;
            }
            w.serialize(row)?;
        }
        if self.records.is_empty() {
            w.write_record(CSV_HEADER.split(','))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a file produced by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self, TraceError> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        let meta = first
            .trim_end()
            .strip_prefix("# metadata: ")
            .ok_or_else(|| TraceError::Malformed("missing metadata line".into()))?;
        let mut trace = IterationTrace::default();
        for pair in meta.split(';').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| TraceError::Malformed(format!("bad metadata entry {pair:?}")))?;
            match k {
                "method" => trace.method = v.to_string(),
                "seed" => {
                    trace.seed = Some(v.parse().map_err(|_| {
                        TraceError::Malformed(format!("bad seed {v:?}"))
                    })?)
                }
                _ => {
                    trace.metadata.insert(k.to_string(), v.to_string());
                }
            }
        }
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != CSV_HEADER {
            return Err(TraceError::Malformed(format!(
                "expected header {CSV_HEADER:?}, found {header:?}"
            )));
        }
        for row in rdr.deserialize() {
            trace.record(row?)?;
        }
        Ok(trace)
    }
}
