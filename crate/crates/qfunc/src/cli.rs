use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qfunc_core::adaptive::{self, build_grid, sigma_tilde, BandwidthGrid, GridConfig, GridMode, LMode};
use qfunc_core::estimators::{estimate_fixed, Method, Sample};
use qfunc_core::sim::{EstimatorRule, ExperimentPlan};
use qfunc_core::{Density, Kernel};
use serde_json::{json, Value};

use crate::report::{self, Format};
use crate::runner::{run_parallel, Progress};
use crate::{input, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_TOO_SMALL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "qfunc",
    version,
    about = "Estimate the integrated squared density of a sample, and run the verification experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate ∫f² from a sample file (use - for standard input).
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment and write CSV/JSON reports.
    Simulate(SimulateArgs),
    /// Print the Lepski bandwidth grid and its thresholds for a sample size.
    Grid(GridArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Paper,
    Practical,
}

impl From<ModeArg> for GridMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Paper => GridMode::Paper,
            ModeArg::Practical => GridMode::Practical,
        }
    }
}

/// Grid flags; unset values take the `GridConfig` defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct GridFlags {
    /// Largest bandwidth is n^-(1-delta).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Geometric ratio below h2.
    #[arg(long)]
    pub rho: Option<f64>,
    /// l(n) = ell_scale / log log n.
    #[arg(long)]
    pub ell_scale: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Known bound L >= ∫f²; estimated from the sample when absent.
    #[arg(long = "l-bound")]
    pub l_bound: Option<f64>,
}

impl GridFlags {
    pub fn any_set(&self) -> bool {
        self.delta.is_some()
            || self.rho.is_some()
            || self.ell_scale.is_some()
            || self.mode.is_some()
            || self.l_bound.is_some()
    }

    pub fn resolve(&self) -> Result<GridConfig> {
        let d = GridConfig::default();
        let cfg = GridConfig {
            delta: self.delta.unwrap_or(d.delta),
            rho: self.rho.unwrap_or(d.rho),
            ell_scale: self.ell_scale.unwrap_or(d.ell_scale),
            mode: self.mode.map(GridMode::from).unwrap_or(d.mode),
            l_mode: self.l_bound.map(LMode::Given).unwrap_or(d.l_mode),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Tn,
    Tbar,
    BickelRitov,
}

impl From<EstimatorArg> for Method {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Tn => Method::Tn,
            EstimatorArg::Tbar => Method::Tbar,
            EstimatorArg::BickelRitov => Method::BickelRitov,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// One number per line, or a one-column CSV with a header.
    pub input: PathBuf,
    #[arg(long, default_value_t = Kernel::Gaussian)]
    pub kernel: Kernel,
    /// Fixed bandwidth.
    #[arg(long, required_unless_present = "adaptive", conflicts_with = "adaptive")]
    pub h: Option<f64>,
    /// Choose the bandwidth from the data.
    #[arg(long)]
    pub adaptive: bool,
    /// Fixed-bandwidth statistic.
    #[arg(long, value_enum, conflicts_with = "adaptive")]
    pub estimator: Option<EstimatorArg>,
    #[command(flatten)]
    pub grid: GridFlags,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Include the bandwidth selection trace.
    #[arg(long, requires = "adaptive")]
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Fixed,
    Adaptive,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment plan as JSON; excludes the plan flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the seed in --config).
    #[arg(long)]
    pub seed: u64,
    /// e.g. gaussian:mu=0,sigma=1, laplace:b=1, uniform, mixture:w=0.5, cusp:gamma=-0.3
    #[arg(long)]
    pub density: Option<Density>,
    #[arg(long)]
    pub kernel: Option<Kernel>,
    #[arg(long, value_enum)]
    pub estimator: Option<RuleArg>,
    /// Fixed rule h = c n^(-2/(4 alpha + 1)).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[command(flatten)]
    pub grid: GridFlags,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// No progress lines on standard error.
    #[arg(long)]
    pub quiet: bool,
}

impl SimulateArgs {
    fn plan_flags_set(&self) -> bool {
        self.density.is_some()
            || self.kernel.is_some()
            || self.estimator.is_some()
            || self.alpha.is_some()
            || self.c.is_some()
            || self.grid.any_set()
            || self.n_list.is_some()
            || self.replicates.is_some()
            || self.level.is_some()
    }

    pub fn resolve_plan(&self) -> Result<ExperimentPlan> {
        let mut plan = match &self.config {
            Some(path) => {
                if self.plan_flags_set() {
                    return Err(Error::Config("plan flags cannot be combined with --config".into()));
                }
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str::<ExperimentPlan>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => {
                let rule = self.estimator.unwrap_or(RuleArg::Fixed);
                if rule == RuleArg::Adaptive && (self.alpha.is_some() || self.c.is_some()) {
                    return Err(Error::Config("--alpha/--c apply to the fixed rule only".into()));
                }
                if rule == RuleArg::Fixed && self.grid.any_set() {
                    return Err(Error::Config("grid flags apply to --estimator adaptive only".into()));
                }
                let estimator = match rule {
                    RuleArg::Fixed => {
                        EstimatorRule::FixedH { alpha: self.alpha.unwrap_or(1.0), c: self.c.unwrap_or(1.0) }
                    }
                    RuleArg::Adaptive => EstimatorRule::Adaptive(self.grid.resolve()?),
                };
                ExperimentPlan {
                    density: self.density.unwrap_or(Density::Gaussian { mu: 0.0, sigma: 1.0 }),
                    kernel: self.kernel.unwrap_or_default(),
                    estimator,
                    n_list: self.n_list.clone().unwrap_or_else(|| vec![500, 1000, 2000, 4000]),
                    replicates: self.replicates.unwrap_or(200),
                    master_seed: 0,
                    ci_level: self.level.unwrap_or(0.95),
                }
            }
        };
        plan.master_seed = self.seed;
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = Kernel::Gaussian)]
    pub kernel: Kernel,
    #[command(flatten)]
    pub grid: GridFlags,
    /// Single-line JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    use qfunc_core::Error as E;
    match e {
        Error::Core(E::GridInfeasible(_)) => EXIT_INFEASIBLE,
        Error::Core(E::SampleTooSmall(_)) => EXIT_TOO_SMALL,
        Error::Core(E::InvalidBandwidth(_) | E::InvalidParameter(_) | E::NonFinite(_) | E::Unknown { .. }) => {
            EXIT_USAGE
        }
        Error::Input(_) | Error::Config(_) | Error::Io { .. } => EXIT_USAGE,
        _ => EXIT_INTERNAL,
    }
}

/// Parse `args` (program name first), run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, &mut out),
        Command::Simulate(a) => cmd_simulate(&a, &mut out),
        Command::Grid(a) => cmd_grid(&a, &mut out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn grid_config_json(cfg: &GridConfig) -> Value {
    json!({
        "delta": cfg.delta,
        "rho": cfg.rho,
        "ell_scale": cfg.ell_scale,
        "mode": cfg.mode,
        "l_mode": cfg.l_mode,
    })
}

fn write_line(out: &mut dyn Write, s: &str) -> Result<()> {
    writeln!(out, "{s}").map_err(|e| Error::io(std::path::Path::new("<stdout>"), e))
}

/// The estimate as JSON, with the fully resolved configuration under
/// `config`.
pub fn estimate_value(values: Vec<f64>, a: &EstimateArgs) -> Result<Value> {
    let sample = Sample::new(values)?;
    if a.adaptive {
        let cfg = a.grid.resolve()?;
        let (est, trace) = adaptive::adaptive_estimate(&sample, a.kernel, &cfg, a.level)?;
        let mut v = json!({
            "theta_hat": est.theta_hat,
            "h": est.bandwidth,
            "tau_sq_hat": est.tau_sq_hat,
            "ci": [est.ci_low, est.ci_high],
            "n": est.n,
            "method": est.method,
            "fallback": trace.fallback,
            "L": trace.l,
            "M": trace.m,
            "config": {
                "kernel": a.kernel,
                "level": a.level,
                "adaptive": true,
                "grid": grid_config_json(&cfg),
            },
        });
        if a.trace {
            v["trace"] = serde_json::to_value(&trace)?;
        }
        Ok(v)
    } else {
        if a.grid.any_set() {
            return Err(Error::Config("grid flags require --adaptive".into()));
        }
        let h = a.h.ok_or_else(|| Error::Config("--h or --adaptive is required".into()))?;
        let method = a.estimator.unwrap_or(EstimatorArg::Tn).into();
        let est = estimate_fixed(&sample, a.kernel, h, method, a.level)?;
        Ok(json!({
            "theta_hat": est.theta_hat,
            "h": est.bandwidth,
            "tau_sq_hat": est.tau_sq_hat,
            "ci": [est.ci_low, est.ci_high],
            "n": est.n,
            "method": est.method,
            "config": {
                "kernel": a.kernel,
                "level": a.level,
                "adaptive": false,
                "h": h,
                "estimator": method,
            },
        }))
    }
}

pub fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Error::Config(format!("--level must lie in (0, 1), got {}", a.level)));
    }
    let values = input::read_values(&a.input)?;
    let v = estimate_value(values, a)?;
    write_line(out, &serde_json::to_string(&v)?)?;
    Ok(EXIT_OK)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let plan = a.resolve_plan()?;
    let progress = if a.quiet { Progress::Quiet } else { Progress::Stderr };
    let report = run_parallel(&plan, a.threads, progress)?;
    if let Some(p) = &a.csv {
        report::emit(&report, Format::Csv, p)?;
    }
    if let Some(p) = &a.json {
        report::emit(&report, Format::Json, p)?;
    }
    if a.csv.is_none() && a.json.is_none() {
        out.write_all(report::to_json(&report)?.as_bytes())
            .map_err(|e| Error::io(std::path::Path::new("<stdout>"), e))?;
    }
    if !a.quiet {
        if let Some(t) = report.wall_time_s {
            eprintln!("done in {t:.1}s");
        }
    }
    if report.rows.iter().any(|r| r.stats.is_some()) {
        Ok(EXIT_OK)
    } else {
        eprintln!("error: every sample size failed");
        Ok(EXIT_INFEASIBLE)
    }
}

fn threshold_or_none(grid: &BandwidthGrid, h: f64) -> Option<f64> {
    grid.threshold_d(h).ok()
}

pub fn grid_value(a: &GridArgs) -> Result<Value> {
    let cfg = a.grid.resolve()?;
    let n = a.n;
    let base = json!({
        "n": n,
        "kernel": a.kernel,
        "config": grid_config_json(&cfg),
        "size_bound": BandwidthGrid::size_bound(n.max(2), cfg.rho),
    });
    match build_grid(n, &cfg, a.kernel) {
        Err(qfunc_core::Error::GridInfeasible(msg)) => {
            let mut v = base;
            v["feasible"] = json!(false);
            v["diagnosis"] = json!(format!("grid infeasible: {msg}"));
            Ok(v)
        }
        Err(e) => Err(e.into()),
        Ok(grid) => {
            let rows: Vec<Value> = grid
                .bandwidths
                .iter()
                .map(|&h| {
                    json!({
                        "h": h,
                        "sigma_tilde": sigma_tilde(h, n).ok(),
                        "d": threshold_or_none(&grid, h),
                    })
                })
                .collect();
            let mut v = base;
            v["feasible"] = json!(true);
            v["diagnosis"] = json!(if grid.degenerate {
                "feasible but degenerate: nothing below h2 survives the lower limit"
            } else {
                "feasible"
            });
            v["h0"] = json!(grid.h0());
            v["h2"] = json!(grid.h2);
            v["ell"] = json!(grid.ell);
            v["h_lower_bound"] = json!(grid.h_lower_bound);
            v["size"] = json!(grid.len());
            v["M"] = json!(grid.m);
            v["L"] = json!(grid.l);
            v["grid"] = Value::Array(rows);
            Ok(v)
        }
    }
}

fn fmt_opt(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.6e}"),
        None => "-".into(),
    }
}

pub fn cmd_grid(a: &GridArgs, out: &mut dyn Write) -> Result<i32> {
    let v = grid_value(a)?;
    let feasible = v["feasible"].as_bool() == Some(true);
    if a.json {
        write_line(out, &serde_json::to_string(&v)?)?;
    } else {
        let c = &v["config"];
        write_line(
            out,
            &format!(
                "n = {}  kernel = {}  mode = {}  delta = {}  rho = {}  ell_scale = {}",
                a.n,
                a.kernel,
                c["mode"].as_str().unwrap_or("?"),
                c["delta"],
                c["rho"],
                c["ell_scale"]
            ),
        )?;
        write_line(out, &format!("diagnosis: {}", v["diagnosis"].as_str().unwrap_or("")))?;
        if feasible {
            write_line(
                out,
                &format!(
                    "size = {} (bound {:.3})  l(n) = {:.6}  h2 = {:.6e}  lower limit = {:.6e}",
                    v["size"],
                    v["size_bound"].as_f64().unwrap_or(f64::NAN),
                    v["ell"].as_f64().unwrap_or(f64::NAN),
                    v["h2"].as_f64().unwrap_or(f64::NAN),
                    v["h_lower_bound"].as_f64().unwrap_or(f64::NAN)
                ),
            )?;
            match (v["M"].as_f64(), v["L"].as_f64()) {
                (Some(m), Some(l)) => write_line(out, &format!("L = {l}  M = {m:.6}"))?,
                _ => write_line(out, "M: unknown until L is estimated from data (pass --l-bound to fix it)")?,
            }
            write_line(out, &format!("{:>14} {:>14} {:>14}", "h", "sigma_tilde", "d(h)"))?;
            for row in v["grid"].as_array().into_iter().flatten() {
                write_line(
                    out,
                    &format!(
                        "{:>14} {:>14} {:>14}",
                        fmt_opt(&row["h"]),
                        fmt_opt(&row["sigma_tilde"]),
                        fmt_opt(&row["d"])
                    ),
                )?;
            }
        }
    }
    Ok(if feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}
