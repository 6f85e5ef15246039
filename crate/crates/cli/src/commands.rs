//! Subcommand implementations.

use std::path::{Path, PathBuf};

use acgf_core::experiments::{
    continuous_dependence_probe, first_failure, mosco_probe, sweep_epsilon, sweep_regularization, Check,
    ExperimentError, FlowProblem, MoscoCheck, ParallelMap, SweepReport,
};
use acgf_core::{run_flow, FlowError};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, write_json, write_rows, write_snapshot, write_summary, write_trace};

#[derive(Debug, Parser)]
#[command(name = "acgf", version, about = "Gradient-flow solver for an Allen-Cahn system with dynamic boundary conditions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for random initial data and perturbation directions.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long, env = "ACGF_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one flow and write its trace and snapshots.
    Run(Common),
    /// Compare runs along a decreasing list of eps values with a run at eps0.
    SweepEps {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing.
        #[arg(long)]
        eps: String,
        #[arg(long, default_value_t = 0.0)]
        eps0: f64,
    },
    /// Compare successive runs along decreasing (delta, lambda) pairs.
    SweepReg {
        #[command(flatten)]
        common: Common,
        /// Comma-separated `delta:lambda` pairs.
        #[arg(long)]
        pairs: String,
    },
    /// Perturb the data at decreasing magnitudes and bound the response.
    SweepDep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing.
        #[arg(long)]
        magnitudes: String,
    },
    /// Sampled check of the limits f_delta -> |.| and B^lambda -> B.
    ProbeMosco(Common),
}

pub fn parse_list(name: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage(format!("--{name} must not be empty")));
    }
    items
        .iter()
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Usage(format!("--{name}: cannot parse {t:?}: {e}"))))
        .collect()
}

pub fn parse_pairs(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage("--pairs must not be empty".into()));
    }
    items
        .iter()
        .map(|t| {
            let (d, l) = t
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("--pairs: expected delta:lambda, got {t:?}")))?;
            let p = |x: &str| x.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("--pairs: {x:?}: {e}")));
            Ok((p(d)?, p(l)?))
        })
        .collect()
}

/// Runs independent jobs on a rayon pool, preserving input order.
pub struct RayonMap {
    pool: rayon::ThreadPool,
}

impl RayonMap {
    pub fn new(threads: Option<usize>) -> Result<Self, CliError> {
        if threads == Some(0) {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool })
    }
}

impl ParallelMap for RayonMap {
    fn map_ordered<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        self.pool.install(|| items.into_par_iter().map(f).collect())
    }
}

struct Prepared {
    config: RunConfig,
    problem: FlowProblem,
    out: PathBuf,
    pool: RayonMap,
}

fn prepare(c: &Common) -> Result<Prepared, CliError> {
    let pool = RayonMap::new(c.threads)?;
    let mut config = RunConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if let Some(o) = &c.out {
        config.output_dir = o.clone();
    }
    let base_dir = c.config.parent().unwrap_or(Path::new("."));
    let problem = config.problem(base_dir)?;
    config.resolve_defaults(&problem.mesh);
    let out = config.output_dir.clone();
    write_json(&out.join("config.json"), &config)?;
    Ok(Prepared { config, problem, out, pool })
}

fn flow_failure(e: FlowError) -> CliError {
    match e {
        FlowError::Config(_) | FlowError::InfeasibleInitial { .. } => CliError::Config(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

fn experiment_failure(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Invalid(m) => CliError::Usage(m),
        ExperimentError::Run { source, .. } => flow_failure(source),
        ExperimentError::Energy(e) => CliError::Numerical(e.to_string()),
    }
}

fn checks_json(checks: &[Check]) -> Value {
    checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect()
}

fn verdict(checks: &[Check]) -> Result<(), CliError> {
    match first_failure(checks) {
        None => Ok(()),
        Some(c) => Err(CliError::Verdict(format!("{}: {}", c.name, c.detail))),
    }
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
}

fn trace_path(out: &Path, label: &str) -> PathBuf {
    out.join("traces").join(format!("{label}.csv"))
}

pub fn cmd_run(c: &Common) -> Result<(), CliError> {
    let Prepared { config, problem, out, .. } = prepare(c)?;
    let p = &problem;
    let result = run_flow(&p.mesh, &p.params, &p.flow, &p.u0, &p.forcing, config.snapshot_every).map_err(flow_failure)?;
    write_trace(&out.join("trace.csv"), &result.trace)?;
    for s in &result.snapshots {
        write_snapshot(&out.join("snapshots").join(format!("step_{:06}.csv", s.step)), &p.mesh, &s.field)?;
    }
    let last = result.trace.records.last();
    println!(
        "{} steps, final phi_reg {}, outputs in {}",
        result.trace.records.len(),
        last.map_or(f64::NAN, |r| r.phi_reg),
        out.display()
    );
    Ok(())
}

fn sweep_entries_json(r: &SweepReport) -> Value {
    r.entries
        .iter()
        .map(|e| {
            json!({
                "param": e.param,
                "lambda": e.lambda,
                "e_H": e.e_h,
                "e_V0": e.e_v0,
                "e_gamma_H1": e.e_gamma_h1,
                "verdict": e.verdict,
                "trace": format!("traces/{}.csv", e.label()),
            })
        })
        .collect()
}

fn write_sweep(out: &Path, kind: &str, config: &RunConfig, extra: Value, r: &SweepReport) -> Result<(), CliError> {
    for e in &r.entries {
        write_trace(&trace_path(out, &e.label()), &e.trace)?;
    }
    if let Some(t) = &r.reference_trace {
        write_trace(&trace_path(out, "reference"), t)?;
    }
    let rows: Vec<(String, f64, f64, bool)> = r.entries.iter().map(|e| (e.label(), e.e_h, e.e_v0, e.verdict)).collect();
    write_summary(&out.join("summary.csv"), &rows)?;
    let report = json!({
        "kind": kind,
        "sweep": extra,
        "entries": sweep_entries_json(r),
        "rate": r.rate,
        "phi_reg_u0": r.phi_reg_u0,
        "phi_reg_u0_lambda_only": r.phi_reg_u0_lambda_only,
        "phi_exact_u0": r.phi_exact_u0,
        "checks": checks_json(&r.checks),
        "passed": r.passed(),
        "notes": r.notes,
        "config": config,
    });
    write_json(&out.join("report.json"), &report)?;
    for e in &r.entries {
        println!("{:<32} e_H {}  e_V0 {}", e.label(), num(e.e_h), num(e.e_v0));
    }
    print_checks(&r.checks);
    verdict(&r.checks)
}

pub fn cmd_sweep_eps(c: &Common, eps: &str, eps0: f64) -> Result<(), CliError> {
    let list = parse_list("eps", eps)?;
    let pre = prepare(c)?;
    let r = sweep_epsilon(&pre.problem, &list, eps0, &pre.pool).map_err(experiment_failure)?;
    write_sweep(&pre.out, "sweep-eps", &pre.config, json!({"eps": list, "eps0": eps0}), &r)
}

pub fn cmd_sweep_reg(c: &Common, pairs: &str) -> Result<(), CliError> {
    let list = parse_pairs(pairs)?;
    let pre = prepare(c)?;
    let r = sweep_regularization(&pre.problem, &list, &pre.pool).map_err(experiment_failure)?;
    let pairs_json: Vec<[f64; 2]> = list.iter().map(|p| [p.0, p.1]).collect();
    write_sweep(&pre.out, "sweep-reg", &pre.config, json!({"pairs": pairs_json}), &r)
}

pub fn cmd_sweep_dep(c: &Common, magnitudes: &str) -> Result<(), CliError> {
    let list = parse_list("magnitudes", magnitudes)?;
    let pre = prepare(c)?;
    let out = &pre.out;
    let r = continuous_dependence_probe(&pre.problem, &list, pre.config.seed, &pre.pool).map_err(experiment_failure)?;
    let label = |e: &acgf_core::experiments::DependenceEntry| {
        if e.perturbs_initial {
            format!("magnitude={}", e.magnitude)
        } else {
            format!("theta_only_magnitude={}", e.magnitude)
        }
    };
    write_trace(&trace_path(out, "baseline"), &r.baseline_trace)?;
    for e in &r.entries {
        write_trace(&trace_path(out, &label(e)), &e.trace)?;
    }
    let rows: Vec<(String, f64, f64, bool)> = r.entries.iter().map(|e| (label(e), e.sup_h, e.v0, e.within_envelope)).collect();
    write_summary(&out.join("summary.csv"), &rows)?;
    let entries: Value = r
        .entries
        .iter()
        .map(|e| {
            json!({
                "param": label(e),
                "magnitude": e.magnitude,
                "perturbs_initial": e.perturbs_initial,
                "e_H": e.sup_h,
                "e_V0": e.v0,
                "data_sq": e.data_sq,
                "ratio": e.ratio,
                "within_envelope": e.within_envelope,
            })
        })
        .collect();
    let report = json!({
        "kind": "sweep-dep",
        "seed": r.seed,
        "magnitudes": list,
        "envelope": r.envelope,
        "entries": entries,
        "checks": checks_json(&r.checks),
        "passed": r.passed(),
        "notes": r.notes,
        "config": pre.config,
    });
    write_json(&out.join("report.json"), &report)?;
    for e in &r.entries {
        println!("{:<32} ratio {}", label(e), num(e.ratio));
    }
    print_checks(&r.checks);
    verdict(&r.checks)
}

fn mosco_json(cs: &[MoscoCheck]) -> Value {
    cs.iter()
        .map(|c| json!({"label": c.label, "estimate": c.estimate, "target": c.target, "slack": c.slack, "passed": c.passed}))
        .collect()
}

pub fn cmd_probe_mosco(c: &Common) -> Result<(), CliError> {
    let _ = RayonMap::new(c.threads)?;
    let mut config = RunConfig::load(&c.config)?;
    if let Some(o) = &c.out {
        config.output_dir = o.clone();
    }
    let cfg = config.mosco_config()?;
    let r = mosco_probe(&cfg).map_err(experiment_failure)?;
    let out = &config.output_dir;
    write_json(&out.join("config.json"), &config)?;
    let rows: Vec<Vec<String>> = r
        .lower_bound
        .iter()
        .map(|m| ("lower_bound", m))
        .chain(r.recovery.iter().map(|m| ("recovery", m)))
        .map(|(k, m)| {
            vec![k.into(), m.label.clone(), num(m.estimate), num(m.target), num(m.slack), m.passed.to_string()]
        })
        .collect();
    write_rows(&out.join("summary.csv"), &["condition", "label", "estimate", "target", "slack", "passed"], &rows)?;
    let report = json!({
        "kind": "probe-mosco",
        "limitation": r.limitation,
        "lower_bound": mosco_json(&r.lower_bound),
        "recovery": mosco_json(&r.recovery),
        "worst_lower_slack": r.worst_lower_slack,
        "worst_recovery_error": r.worst_recovery_error,
        "checks": checks_json(&r.checks),
        "passed": r.passed(),
        "config": config,
    });
    write_json(&out.join("report.json"), &report)?;
    println!("{}", r.limitation);
    print_checks(&r.checks);
    verdict(&r.checks)
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::SweepEps { common, eps, eps0 } => cmd_sweep_eps(common, eps, *eps0),
        Command::SweepReg { common, pairs } => cmd_sweep_reg(common, pairs),
        Command::SweepDep { common, magnitudes } => cmd_sweep_dep(common, magnitudes),
        Command::ProbeMosco(c) => cmd_probe_mosco(c),
    }
}
