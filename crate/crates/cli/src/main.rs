//! `rigidflock` command-line front end: 1D ensembles, 4D formation runs,
//! parameter sweeps, stability audits and closed-form analysis.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use rigidflock::audit::audit_scenario;
use rigidflock::manifest::RunManifest;
use rigidflock::oned::{
    beta_exponent, conditional_variance_at_target, effective_gain, expected_coherence_time, mean_metrics,
    run_1d_ensemble, sigma_ss_proportional, sigma_ss_restrained, stopping_probability, OneDConfig,
};
use rigidflock::scenario::{builtin, builtin_scenarios, Scenario};
use rigidflock::sim::{median, simulate, sweep, RunSummary};
use rigidflock::Execution;

#[derive(Parser)]
#[command(name = "rigidflock", version, about = "Formation control under measurement noise")]
struct Cli {
    /// Run every batch on one thread instead of the worker pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble of independent 1D agents.
    Sim1d(Sim1dArgs),
    /// Simulate one formation run and write its time series.
    Sim4d(Sim4dArgs),
    /// Run a formation over a grid of rates, quantile levels and seeds.
    Sweep(SweepArgs),
    /// Check rigidity-matrix identities and positive definiteness of M.
    Audit(AuditArgs),
    /// Evaluate the 1D closed forms for one parameter set.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct ScenarioSource {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "builtin")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: two_agents, three_agents, six_agents_full, six_agents_sparse.
    #[arg(long)]
    builtin: Option<String>,
}

impl ScenarioSource {
    fn load(&self) -> anyhow::Result<Scenario> {
        match (&self.scenario, &self.builtin) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(Scenario::from_json(&text)?)
            }
            (None, Some(name)) => builtin(name).with_context(|| {
                let names: Vec<&str> = builtin_scenarios().iter().map(|(n, _)| *n).collect();
                format!("unknown builtin scenario {name:?}; known: {}", names.join(", "))
            }),
            (None, None) => bail!("pass --scenario FILE or --builtin NAME"),
        }
    }
}

#[derive(Args)]
struct Sim1dArgs {
    #[arg(long)]
    k_ef: f64,
    #[arg(long, default_value_t = 0.5)]
    ell: f64,
    #[arg(long)]
    sigma_m: f64,
    #[arg(long, default_value_t = 10.0)]
    rate: f64,
    #[arg(long, default_value_t = 100.0)]
    sigma_init: f64,
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    #[arg(long, default_value_t = 10_000)]
    agents: usize,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Agents whose full trajectories feed the convergence metrics.
    #[arg(long, default_value_t = 1000)]
    record: usize,
    /// Per-step ensemble CSV.
    #[arg(long)]
    out: PathBuf,
    /// Convergence metrics and predictions as JSON.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct Sim4dArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Per-step CSV.
    #[arg(long)]
    out: PathBuf,
    /// Run summary JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// `start:stop:step` (inclusive) or a comma list.
    #[arg(long, default_value = "10:200:10")]
    rates: String,
    #[arg(long, default_value = "0.05,0.2,0.35,0.5")]
    ells: String,
    /// Number of seeds, counted up from the scenario seed.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Include per-sample results.
    #[arg(long)]
    details: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    k_ef: f64,
    #[arg(long, default_value_t = 0.5)]
    ell: f64,
    #[arg(long)]
    sigma_m: f64,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(config: &impl Serialize, seed: u64, outputs: &[&Path]) -> anyhow::Result<()> {
    let names = outputs.iter().map(|p| p.display().to_string()).collect();
    let m = RunManifest::new(config, seed, names)?;
    write_json(&manifest_path(outputs[0]), &m)
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Closed forms that are outside their domain come back as `null`.
fn opt(r: rigidflock::Result<f64>) -> Option<f64> {
    r.ok()
}

fn run_sim1d(a: &Sim1dArgs, exec: Execution) -> anyhow::Result<()> {
    let cfg = OneDConfig {
        k_ef: a.k_ef,
        ell: a.ell,
        sigma_m: a.sigma_m,
        rate_hz: a.rate,
        d: a.d,
        sigma_init: a.sigma_init,
        n_agents: a.agents,
        horizon: a.horizon,
        seed: a.seed,
        record_agents: a.record.min(a.agents),
    };
    let tr = run_1d_ensemble(&cfg, exec)?;
    let mut w = csv_writer(&a.out)?;
    w.write_record(["step", "time_s", "mean_abs_dd", "sigma_a", "mean_abs_dv"])?;
    for r in &tr.rows {
        let t = r.step as f64 / cfg.rate_hz;
        w.write_record([
            r.step.to_string(),
            num(t),
            num(r.mean_abs_dd),
            num(r.sigma_a),
            num(r.mean_abs_dv),
        ])?;
    }
    w.flush()?;
    let mut outputs = vec![a.out.as_path()];
    if let Some(path) = &a.metrics {
        let m = if cfg.record_agents > 0 {
            Some(mean_metrics(&tr, cfg.d, cfg.rate_hz)?)
        } else {
            None
        };
        write_json(
            path,
            &json!({
                "config": cfg,
                "t_c": m.map(|m| m.t_c),
                "sigma_t": m.map(|m| m.sigma_t),
                "mean_dv": m.map(|m| m.mean_dv),
                "converged_fraction": m.map(|m| m.converged_fraction),
                "final_sigma_a": tr.rows.last().map(|r| r.sigma_a),
                "sigma_ss_pred": opt(sigma_ss_proportional(cfg.k_ef, cfg.sigma_m)),
                "sigma_ss_res_pred": opt(sigma_ss_restrained(cfg.k_ef, cfg.ell, cfg.sigma_m)),
            }),
        )?;
        outputs.push(path);
    }
    write_manifest(&cfg, cfg.seed, &outputs)
}

fn apply_overrides(
    mut s: Scenario,
    seed: Option<u64>,
    rate: Option<f64>,
    ell: Option<f64>,
    horizon: Option<usize>,
) -> anyhow::Result<Scenario> {
    if let Some(v) = seed {
        s = s.with_seed(v);
    }
    if let Some(v) = rate {
        s = s.with_rate(v);
    }
    if let Some(v) = ell {
        s = s.with_ell(v);
    }
    if let Some(v) = horizon {
        s.horizon_steps = v;
    }
    s.validate()?;
    Ok(s)
}

fn run_sim4d(a: &Sim4dArgs) -> anyhow::Result<()> {
    let s = apply_overrides(a.source.load()?, a.seed, a.rate, a.ell, a.horizon)?;
    let rec = simulate(&s, true)?;
    let mut header: Vec<String> = ["step", "time_s", "e_F", "e_p", "e_psi", "fiedler"]
        .map(String::from)
        .to_vec();
    for i in 0..s.n_agents() {
        for c in ["x", "y", "z", "psi", "ux", "uy", "uz", "omega"] {
            header.push(format!("a{i}_{c}"));
        }
    }
    let mut w = csv_writer(&a.out)?;
    w.write_record(&header)?;
    for st in &rec.steps {
        let mut row = vec![
            st.step.to_string(),
            num(st.time_s),
            num(st.error.e_f),
            num(st.error.e_p),
            num(st.error.e_psi),
        ];
        row.push(num(rec.summary.fiedler));
        for (q, c) in st.poses.iter().zip(&st.commands) {
            row.extend(q.iter().chain(c).map(|v| num(*v)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let mut outputs = vec![a.out.as_path()];
    if let Some(path) = &a.summary {
        write_json(path, &rec.summary)?;
        outputs.push(path);
    }
    write_manifest(&s.to_file(), s.seed, &outputs)
}

/// `start:stop:step` with an inclusive stop, or comma-separated values.
fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .with_context(|| format!("bad number {t:?} in {spec:?}"))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h) = (parse(start)?, parse(stop)?, parse(step)?);
            if !(h > 0.0 && b >= a) {
                bail!("range {spec:?} needs a positive step and stop >= start");
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            (0..=n).map(|k| a + h * k as f64).collect()
        }
        [_] => spec.split(',').map(parse).collect::<anyhow::Result<Vec<_>>>()?,
        _ => bail!("grid {spec:?} is neither start:stop:step nor a comma list"),
    };
    if values.is_empty() {
        bail!("grid {spec:?} is empty");
    }
    Ok(values)
}

const SWEEP_COLUMNS: [&str; 14] = [
    "rate_hz",
    "ell",
    "seed",
    "t_cp",
    "t_cpsi",
    "sigma_tp",
    "sigma_tpsi",
    "mean_dv",
    "mean_domega",
    "a_p",
    "v_psi",
    "fiedler",
    "converged",
    "final_e_f",
];

fn sweep_row(r: &RunSummary) -> Vec<String> {
    let mut row = vec![num(r.rate_hz), num(r.ell), r.seed.to_string()];
    row.extend(
        [
            r.t_cp,
            r.t_cpsi,
            r.sigma_tp,
            r.sigma_tpsi,
            r.mean_dv,
            r.mean_domega,
            r.a_p,
            r.v_psi,
            r.fiedler,
        ]
        .map(num),
    );
    row.push(r.converged.to_string());
    row.push(num(r.final_e_f));
    row
}

fn run_sweep(a: &SweepArgs, exec: Execution) -> anyhow::Result<()> {
    let s = apply_overrides(a.source.load()?, None, None, None, a.horizon)?;
    let rates = parse_grid(&a.rates)?;
    let ells = parse_grid(&a.ells)?;
    let seeds: Vec<u64> = (s.seed..s.seed + a.seeds).collect();
    let rows = sweep(&s, &rates, &ells, &seeds, exec)?;
    let mut w = csv_writer(&a.out)?;
    w.write_record(SWEEP_COLUMNS)?;
    for r in &rows {
        w.write_record(sweep_row(r))?;
    }
    w.flush()?;

    let cells: Vec<_> = rates
        .iter()
        .flat_map(|&f| ells.iter().map(move |&l| (f, l)))
        .map(|(f, l)| {
            let sel: Vec<&RunSummary> = rows.iter().filter(|r| r.rate_hz == f && r.ell == l).collect();
            let med = |g: fn(&RunSummary) -> f64| median(&sel.iter().map(|r| g(r)).collect::<Vec<_>>());
            json!({
                "rate_hz": f,
                "ell": l,
                "median_sigma_tp": med(|r| r.sigma_tp),
                "median_t_cp": med(|r| r.t_cp),
                "median_mean_dv": med(|r| r.mean_dv),
                "converged": sel.iter().filter(|r| r.converged).count(),
                "runs": sel.len(),
            })
        })
        .collect();
    println!("{}", serde_json::to_string_pretty(&cells)?);
    let config = json!({"scenario": s.to_file(), "rates": rates, "ells": ells, "seeds": seeds});
    write_manifest(&config, s.seed, &[a.out.as_path()])
}

fn run_audit(a: &AuditArgs, exec: Execution) -> anyhow::Result<()> {
    let s = a.source.load()?;
    let mut report = audit_scenario(&s, a.samples, exec)?;
    if !a.details {
        report.sample_details.clear();
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_analyze(a: &AnalyzeArgs) -> anyhow::Result<()> {
    if !(a.ell > 0.0 && a.ell <= 0.5) {
        bail!(rigidflock::Error::Domain(format!("ell = {} outside (0, 0.5]", a.ell)));
    }
    if !(a.sigma_m > 0.0) {
        bail!(rigidflock::Error::Domain("sigma_m must be positive".into()));
    }
    let ss = opt(sigma_ss_proportional(a.k_ef, a.sigma_m));
    let res = opt(sigma_ss_restrained(a.k_ef, a.ell, a.sigma_m));
    let stop = opt(stopping_probability(0.0, a.sigma_m, a.ell));
    let out = json!({
        "k_ef": a.k_ef,
        "ell": a.ell,
        "sigma_m": a.sigma_m,
        "sigma_ss": ss,
        "sigma_ss_res": res,
        "ratio": res.zip(ss).map(|(r, s)| r / s),
        "beta": opt(beta_exponent(a.k_ef)),
        "motion_probability_at_target": stop.map(|q| 1.0 - q),
        "coherence_time_steps": opt(expected_coherence_time(a.k_ef, a.ell, a.sigma_m)),
        "effective_gain": opt(effective_gain(a.k_ef, a.sigma_m, a.ell)),
        "conditional_variance_at_target": opt(conditional_variance_at_target(a.k_ef, a.sigma_m, a.ell)),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("RIGIDFLOCK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .with_context(|| format!("RIGIDFLOCK_THREADS={v:?} is not a count"))?;
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::Sim1d(a) => run_sim1d(a, exec),
        Command::Sim4d(a) => run_sim4d(a),
        Command::Sweep(a) => run_sweep(a, exec),
        Command::Audit(a) => run_audit(a, exec),
        Command::Analyze(a) => run_analyze(a),
    }
}

fn report(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({"error": {"kind": kind, "message": message}}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("usage", e.to_string().trim_end().to_string(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e.downcast_ref::<rigidflock::Error>() {
                Some(d) => d.kind(),
                None if e.chain().any(|c| c.is::<std::io::Error>() || c.is::<csv::Error>()) => "io",
                None => "config",
            };
            report(kind, format!("{e:#}"), 1)
        }
    }
}
