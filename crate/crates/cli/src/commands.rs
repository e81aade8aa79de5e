//! Execution of resolved run specs.

use std::fs;
use std::path::Path;
use std::time::Duration;

use inexact_core::lasso::{
    blur_instance, gen_random_instance, gialm_lasso_solve, read_instance, write_instance, InstanceMeta, LassoInstance,
    LassoOperator, LassoRun, LassoSummary,
};
use inexact_core::oracles::{CfdOracle, ExactOracle, FfdOracle, NoisyOracle};
use inexact_core::problem::{by_name, LeastSquares};
use inexact_core::rates::rate_report;
use inexact_core::trace::Status;
use inexact_core::{igd_solve, GradientOracle, IgdConfig, SeededRng, SmoothProblem};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{self, seconds, slug, write_json, write_pgm, write_rows, write_trace};
use crate::spec::{
    Command, DeblurSpec, GenSpec, GridInstance, GridSpec, IgdSpec, LassoSource, LassoSpec, OracleKind, ProblemSource,
    RatesSpec, RunSpec, Timing,
};
use crate::{CliError, EXIT_BUDGET, EXIT_ERROR, EXIT_OK};

/// Name of the spec file written into every output directory.
pub const RUNSPEC_FILE: &str = "runspec.json";

/// Runs `spec`, writing all outputs into its directory. Returns the exit code.
pub fn execute(spec: &RunSpec) -> Result<i32, CliError> {
    fs::create_dir_all(&spec.out_dir)?;
    write_json(&spec.out_dir.join(RUNSPEC_FILE), spec)?;
    info!("{} -> {}", spec.command.name(), spec.out_dir.display());
    match &spec.command {
        Command::Igd(c) => cmd_igd(c, spec),
        Command::Lasso(c) => cmd_lasso(c, spec),
        Command::LassoGrid(c) => cmd_lasso_grid(c, spec),
        Command::Rates(c) => cmd_rates(c, spec),
        Command::Deblur(c) => cmd_deblur(c, spec),
        Command::GenInstance(c) => cmd_gen_instance(c, spec),
    }
}

fn status_exit(status: &Status) -> i32 {
    match status {
        s if s.is_success() => EXIT_OK,
        Status::BudgetExhausted(_) => EXIT_BUDGET,
        _ => EXIT_ERROR,
    }
}

type BoxedProblem = Box<dyn SmoothProblem + Send + Sync>;

fn load_problem(source: &ProblemSource, seed: u64) -> Result<BoxedProblem, CliError> {
    match source {
        ProblemSource::Zoo(name) => {
            by_name(name, seed).ok_or_else(|| CliError::Usage(format!("unknown function {name:?}")))
        }
        ProblemSource::File(path) => {
            let (inst, _) = read_instance(path)?;
            let LassoOperator::Dense(a) = inst.a else {
                return Err(CliError::Failed("instance file does not hold an explicit matrix".into()));
            };
            Ok(Box::new(LeastSquares::new(a, inst.b)))
        }
    }
}

/// Seeded starting point: a random direction at norm `R/2` inside a
/// Lipschitz region of radius `R`, norm 3 otherwise.
fn default_start(problem: &dyn SmoothProblem, seed: u64) -> Vec<f64> {
    let scale = problem.region_radius().map_or(3.0, |r| 0.5 * r);
    let dir = SeededRng::new(seed).unit_vector(problem.dim());
    dir.into_iter().map(|d| scale * d).collect()
}

#[derive(Serialize)]
struct IgdSummaryRow<'a> {
    problem: String,
    oracle: &'a str,
    status: String,
    iters: usize,
    f_final: f64,
    grad_norm_final: f64,
    eps_final: f64,
    oracle_cost: u64,
    time_s: f64,
}

fn cmd_igd(c: &IgdSpec, spec: &RunSpec) -> Result<i32, CliError> {
    let problem = load_problem(&c.problem, spec.seed)?;
    let p: &dyn SmoothProblem = problem.as_ref();
    let mut oracle: Box<dyn GradientOracle + '_> = match c.oracle {
        OracleKind::Exact => Box::new(ExactOracle::new(p)),
        OracleKind::Ffd => Box::new(FfdOracle::new(p)),
        OracleKind::Cfd => Box::new(CfdOracle::new(p).map_err(|e| CliError::Usage(e.to_string()))?),
        OracleKind::Noisy => Box::new(NoisyOracle::new(p, spec.seed)),
    };
    let cfg = IgdConfig {
        eps1: c.eps1,
        theta: c.theta,
        mu: c.mu,
        lipschitz: c.lipschitz.unwrap_or_else(|| p.lipschitz()),
        i_max: c.i_max,
        max_outer: c.max_outer,
        eps_tol: c.eps_tol,
        grad_tol: c.grad_tol,
        time_budget: c.time_budget_s.map(Duration::from_secs_f64),
        record_iterates: false,
    };
    let x0 = c.x0.clone().unwrap_or_else(|| default_start(p, spec.seed));
    let out = igd_solve(p, oracle.as_mut(), &x0, &cfg)?;

    let mut trace = out.trace.with_seed(spec.seed);
    let oracle_name = serde_json::to_value(c.oracle)?;
    let oracle_name = oracle_name.as_str().unwrap_or("unknown");
    trace.set_meta("oracle", oracle_name);
    trace.set_meta("status", &out.status);
    write_trace(&spec.out_dir.join("trace.csv"), &trace, spec.timing)?;
    let row = IgdSummaryRow {
        problem: p.name(),
        oracle: oracle_name,
        status: out.status.to_string(),
        iters: trace.len(),
        f_final: p.value(&out.x),
        grad_norm_final: trace.last().map_or(f64::NAN, |r| r.grad_norm),
        eps_final: out.eps,
        oracle_cost: out.oracle_cost,
        time_s: seconds(spec.timing, trace.last().map_or(0.0, |r| r.elapsed)),
    };
    write_rows(&spec.out_dir.join("summary.csv"), &[], &[&row])?;
    println!(
        "{}: {} after {} iterations, f = {:.6e}",
        row.problem, row.status, row.iters, row.f_final
    );
    Ok(status_exit(&out.status))
}

fn load_lasso(source: &LassoSource, seed: u64) -> Result<LassoInstance, CliError> {
    Ok(match source {
        LassoSource::Random { m, n, gamma } => gen_random_instance(*m, *n, *gamma, seed)?,
        LassoSource::File(path) => read_instance(path)?.0,
    })
}

fn timed_summary(run: &LassoRun, timing: Timing) -> LassoSummary {
    LassoSummary {
        time_s: seconds(timing, run.summary.time_s),
        ..run.summary.clone()
    }
}

fn write_lasso_traces(dir: &Path, run: &LassoRun, seed: u64, timing: Timing) -> Result<(), CliError> {
    let trace = run.trace.clone().with_seed(seed);
    write_trace(&dir.join("trace.csv"), &trace, timing)?;
    write_rows(&dir.join("residuals.csv"), output::RESIDUAL_HEADER, &run.residuals)
}

fn cmd_lasso(c: &LassoSpec, spec: &RunSpec) -> Result<i32, CliError> {
    let inst = load_lasso(&c.source, spec.seed)?;
    let run = gialm_lasso_solve(&inst, c.method, &c.solver.options())?;
    write_lasso_traces(&spec.out_dir, &run, spec.seed, spec.timing)?;
    write_rows(&spec.out_dir.join("summary.csv"), output::RUNS_HEADER, &[timed_summary(&run, spec.timing)])?;
    println!(
        "{}: {} after {} iterations, eta = {:.3e}, inner = {}",
        run.summary.method, run.status, run.summary.iters, run.summary.eta_final, run.summary.total_inner_iters
    );
    Ok(status_exit(&run.status))
}

#[derive(Debug, Serialize)]
struct GridRow {
    test_id: usize,
    method: String,
    m: usize,
    n: usize,
    iter: usize,
    eta: f64,
    total_inner: u64,
    time_s: f64,
}

#[derive(Debug, Serialize)]
struct CellStatus {
    test_id: usize,
    method: String,
    status: String,
}

fn run_cell(c: &GridSpec, cell: &GridInstance, spec: &RunSpec) -> Result<Vec<(LassoRun, String)>, String> {
    let inst = gen_random_instance(cell.m, cell.n, cell.gamma, cell.seed).map_err(|e| e.to_string())?;
    let opts = c.solver.options();
    let mut runs = Vec::with_capacity(c.methods.len());
    for method in &c.methods {
        let run = gialm_lasso_solve(&inst, *method, &opts).map_err(|e| e.to_string())?;
        info!(
            "test {} {}: {} after {} iterations, eta = {:.3e}",
            cell.test_id, run.summary.method, run.status, run.summary.iters, run.summary.eta_final
        );
        if c.traces {
            let dir = spec.out_dir.join("cells").join(format!("{}_{}", cell.test_id, slug(&method.label())));
            fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            write_lasso_traces(&dir, &run, cell.seed, spec.timing).map_err(|e| e.to_string())?;
        }
        let status = run.status.to_string();
        runs.push((run, status));
    }
    Ok(runs)
}

fn cmd_lasso_grid(c: &GridSpec, spec: &RunSpec) -> Result<i32, CliError> {
    let cells = c.instances();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers)
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let results: Vec<_> = pool.install(|| cells.par_iter().map(|cell| run_cell(c, cell, spec)).collect());

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut statuses = Vec::new();
    let mut failed = 0;
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(runs) => {
                for (run, status) in runs {
                    rows.push(GridRow {
                        test_id: cell.test_id,
                        method: run.summary.method.clone(),
                        m: cell.m,
                        n: cell.n,
                        iter: run.summary.iters,
                        eta: run.summary.eta_final,
                        total_inner: run.summary.total_inner_iters,
                        time_s: seconds(spec.timing, run.summary.time_s),
                    });
                    summaries.push(timed_summary(&run, spec.timing));
                    statuses.push(CellStatus {
                        test_id: cell.test_id,
                        method: run.summary.method,
                        status,
                    });
                }
            }
            Err(e) => {
                warn!("test {} failed: {e}", cell.test_id);
                failed += 1;
                for method in &c.methods {
                    statuses.push(CellStatus {
                        test_id: cell.test_id,
                        method: method.label(),
                        status: format!("error({e})"),
                    });
                }
            }
        }
    }
    write_rows(&spec.out_dir.join("summary.csv"), output::GRID_HEADER, &rows)?;
    write_rows(&spec.out_dir.join("runs.csv"), output::RUNS_HEADER, &summaries)?;
    write_rows(&spec.out_dir.join("status.csv"), &["test_id", "method", "status"], &statuses)?;
    for r in &rows {
        println!(
            "test {:>3} {:<10} {}x{}: iter {:>7} eta {:.3e} inner {:>9}",
            r.test_id, r.method, r.m, r.n, r.iter, r.eta, r.total_inner
        );
    }
    if failed > 0 {
        eprintln!("{failed} of {} grid instances failed; see status.csv", cells.len());
        Ok(EXIT_ERROR)
    } else {
        Ok(EXIT_OK)
    }
}

fn cmd_rates(c: &RatesSpec, spec: &RunSpec) -> Result<i32, CliError> {
    let rows = rate_report(&c.suite(spec.seed))?;
    write_rows(
        &spec.out_dir.join("rates.csv"),
        &["function_p", "q", "quantity", "predicted_exp", "fitted_exp", "residual"],
        &rows,
    )?;
    for r in &rows {
        println!(
            "p = {:<4} q = {:<6.4} {:<10} predicted {:<8} fitted {:.4} (residual {:.2e})",
            r.function_p, r.q, r.quantity, r.predicted_exp, r.fitted_exp, r.residual
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ObjectiveRow<'a> {
    method: &'a str,
    k: usize,
    time_s: f64,
    objective: f64,
}

#[derive(Serialize)]
struct InnerRow<'a> {
    method: &'a str,
    k: usize,
    cumulative_inner: u64,
}

fn cmd_deblur(c: &DeblurSpec, spec: &RunSpec) -> Result<i32, CliError> {
    let mut inst = blur_instance(c.side, c.kernel_radius, c.kernel_sigma, c.noise, spec.seed)?;
    inst.gamma = c.gamma;
    inst.lambda = c.lambda;
    let dir = &spec.out_dir;
    if let Some(truth) = &inst.truth {
        write_pgm(&dir.join("truth.pgm"), truth, c.side)?;
    }
    write_pgm(&dir.join("observed.pgm"), &inst.b, c.side)?;

    let f0 = inst.primal_objective(&inst.b);
    let mut objective = Vec::new();
    let mut inner = Vec::new();
    let labels: Vec<String> = c.methods.iter().map(|m| m.label()).collect();
    for (method, label) in c.methods.iter().zip(&labels) {
        let opts = inexact_core::lasso::LassoOptions {
            lambda: Some(c.lambda),
            eta_tol: 0.0,
            max_outer: c.iters,
            max_inner: c.max_inner,
            x0: Some(inst.b.clone()),
            ..Default::default()
        };
        let run = gialm_lasso_solve(&inst, *method, &opts)?;
        let records = run.trace.records();
        objective.push(ObjectiveRow {
            method: label,
            k: 0,
            time_s: 0.0,
            objective: f0,
        });
        inner.push(InnerRow {
            method: label,
            k: 0,
            cumulative_inner: 0,
        });
        for (j, (&f, &cum)) in run.primal_values.iter().zip(&run.cumulative_inner).enumerate() {
            let t = records.get(j + 1).map_or(run.summary.time_s, |r| r.elapsed);
            objective.push(ObjectiveRow {
                method: label,
                k: j + 1,
                time_s: seconds(spec.timing, t),
                objective: f,
            });
            inner.push(InnerRow {
                method: label,
                k: j + 1,
                cumulative_inner: cum,
            });
        }
        write_pgm(&dir.join(format!("{}.pgm", slug(label))), &run.x, c.side)?;
        println!(
            "{label}: objective {:.6e} -> {:.6e} in {} iterations, inner = {}",
            f0,
            run.primal_values.last().copied().unwrap_or(f0),
            run.summary.iters,
            run.summary.total_inner_iters
        );
    }
    write_rows(&dir.join("deblur_objective.csv"), &["method", "k", "time_s", "objective"], &objective)?;
    write_rows(&dir.join("deblur_inner.csv"), &["method", "k", "cumulative_inner"], &inner)?;
    Ok(EXIT_OK)
}

fn cmd_gen_instance(c: &GenSpec, spec: &RunSpec) -> Result<i32, CliError> {
    let inst = gen_random_instance(c.m, c.n, c.gamma, spec.seed)?;
    let mut meta = InstanceMeta {
        seed: Some(spec.seed),
        generator: "gaussian".into(),
        ..Default::default()
    };
    meta.params.insert("m".into(), c.m.into());
    meta.params.insert("n".into(), c.n.into());
    meta.params.insert("gamma_mode".into(), serde_json::to_value(c.gamma)?);
    meta.params.insert("gamma".into(), inst.gamma.into());
    let path = spec.out_dir.join(&c.file_name);
    write_instance(&path, &inst, &meta)?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}
