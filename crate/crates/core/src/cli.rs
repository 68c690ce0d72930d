//! Command-line front end: every computation as a subcommand with CSV or
//! JSON output.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! failed run never leaves a partial artifact. Exit codes: 0 success,
//! 2 validation error, 3 solver failure, 4 simulation infeasible.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exponent::{self, DEFAULT_NODES};
use crate::model::{Model, ModelSpec, ScalarModel};
use crate::sim::{self, SimConfig, SimResult, TrialPlan};

pub const OUTDIR_ENV: &str = "GM_EXPONENT_OUTDIR";

#[derive(Debug, Parser)]
#[command(
    name = "gm-exponent",
    version,
    about = "Miss-probability error exponents for Gauss-Markov signals in white noise"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo runs; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Solver diagnostics in JSON output and progress on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LOG2_E,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Destination file; standard output when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Units of exponents in JSON output. CSV columns are always nats.
    #[arg(long, value_enum, default_value = "nats")]
    pub units: Units,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponent of one model by both routes, with dK/da for scalar models.
    Exponent {
        #[arg(long, requires_all = ["pi0", "sigma2"], conflicts_with = "model", allow_negative_numbers = true)]
        a: Option<f64>,
        #[arg(long, requires = "a", allow_negative_numbers = true)]
        pi0: Option<f64>,
        #[arg(long, requires = "a", allow_negative_numbers = true)]
        sigma2: Option<f64>,
        /// JSON model document (scalar `{a, pi0, sigma2}` or vector `{A, B, Q, h, sigma2}`).
        #[arg(long, required_unless_present = "a")]
        model: Option<PathBuf>,
        /// Starting node count of the spectral quadrature.
        #[arg(long, default_value_t = DEFAULT_NODES)]
        nodes: usize,
        #[command(flatten)]
        out: Output,
    },
    /// K and dK/da on an even grid of a over [0, 1] at fixed SNR.
    SweepA {
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[command(flatten)]
        out: Output,
    },
    /// K and its high-SNR form over an even dB grid at fixed a.
    SweepSnr {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        from_db: f64,
        #[arg(long, allow_negative_numbers = true)]
        to_db: f64,
        #[arg(long, default_value_t = 81)]
        points: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Exponent-maximizing correlation over an even dB grid.
    OptimalA {
        #[arg(long, allow_negative_numbers = true)]
        from_db: f64,
        #[arg(long, allow_negative_numbers = true)]
        to_db: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Monte Carlo miss probabilities of the optimal detector.
    Simulate {
        /// JSON run description: model, alpha, n_grid, trials, calibration_trials, seed.
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides the config's.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
    /// All curve data at the reference settings.
    Figures {
        #[arg(long, env = OUTDIR_ENV, default_value = "figures")]
        outdir: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Ten times the default trial counts.
        #[arg(long)]
        full: bool,
    },
}

/// Parses `std::env::args`, runs, reports errors on stderr and returns the
/// exit status.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            i32::from(e.exit_code())
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match cli.jobs {
        Some(0) => Err(Error::InvalidArgument("--jobs must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let verbose = cli.verbose;
    match &cli.command {
        Command::Exponent {
            a,
            pi0,
            sigma2,
            model,
            nodes,
            out,
        } => {
            let model = match (a, model) {
                (Some(a), None) => {
                    ScalarModel::new(*a, pi0.unwrap_or(f64::NAN), sigma2.unwrap_or(f64::NAN))?
                        .into()
                }
                (None, Some(path)) => load_model(path)?,
                _ => {
                    return Err(Error::InvalidArgument(
                        "give either --a/--pi0/--sigma2 or --model".into(),
                    ))
                }
            };
            let body = exponent_output(&model, *nodes, out, verbose)?;
            emit(out.output.as_deref(), &body)
        }
        Command::SweepA {
            snr_db,
            points,
            out,
        } => {
            let rows = sweep_a(*snr_db, *points)?;
            emit(out.output.as_deref(), &render_sweep_a(&rows, out))
        }
        Command::SweepSnr {
            a,
            from_db,
            to_db,
            points,
            out,
        } => {
            let rows = sweep_snr(*a, *from_db, *to_db, *points)?;
            emit(out.output.as_deref(), &render_sweep_snr(&rows, out))
        }
        Command::OptimalA {
            from_db,
            to_db,
            points,
            out,
        } => {
            let rows = optimal_a(*from_db, *to_db, *points)?;
            emit(out.output.as_deref(), &render_optimal_a(&rows, out))
        }
        Command::Simulate { config, seed, out } => {
            let text = std::fs::read_to_string(config)?;
            let mut cfg: SimConfig = serde_json::from_str(&text)?;
            if seed.is_some() {
                cfg.seed = *seed;
            }
            let run = simulate(&cfg, verbose)?;
            emit(out.output.as_deref(), &render_simulation(&run, out))
        }
        Command::Figures { outdir, seed, full } => figures(outdir, *seed, *full, verbose),
    }
}

fn load_model(path: &Path) -> Result<Model> {
    let spec: ModelSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    spec.build()
}

/// `10^(dB/10)`.
pub fn db_to_snr(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Shortest form that round-trips: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn grid(from: f64, to: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !from.is_finite() || !to.is_finite() || to <= from {
        return Err(Error::InvalidArgument(format!(
            "grid needs finite from < to and at least 2 points (got {from}..{to}, {points})"
        )));
    }
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                to
            } else {
                from + (to - from) * i as f64 / (points - 1) as f64
            }
        })
        .collect())
}

fn exponent_output(model: &Model, nodes: usize, out: &Output, verbose: bool) -> Result<String> {
    let report = exponent::exponent_report(model, nodes)?;
    let scale = out.units.scale();
    match out.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = json!({
                "model": ModelSpec::from(model),
                "snr": report.snr,
                "degenerate": report.degenerate,
                "units": out.units.name(),
                "k_closed": report.k_closed * scale,
                "k_spectral": report.k_spectral.map(|k| k * scale),
                "dk_da": report.dk_da.map(|k| k * scale),
                "p": report.p,
                "re": report.re,
                "re_tilde": report.re_tilde,
            });
            if verbose {
                v["diagnostics"] = serde_json::to_value(&report.diagnostics)?;
            }
            Ok(serde_json::to_string_pretty(&v)? + "\n")
        }
        Format::Csv => Ok(format!(
            "k_closed_nats,k_spectral_nats,dk_da,p,re,re_tilde,degenerate\n{},{},{},{},{},{},{}\n",
            fmt_f64(report.k_closed),
            fmt_opt(report.k_spectral),
            fmt_opt(report.dk_da),
            fmt_f64(report.p),
            fmt_f64(report.re),
            fmt_f64(report.re_tilde),
            report.degenerate
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepARow {
    pub a: f64,
    pub k: f64,
    pub dk_da: Option<f64>,
}

pub fn sweep_a(snr_db: f64, points: usize) -> Result<Vec<SweepARow>> {
    let gamma = db_to_snr(snr_db);
    grid(0.0, 1.0, points)?
        .into_iter()
        .map(|a| {
            let m = ScalarModel::from_snr(a, gamma)?;
            Ok(SweepARow {
                a,
                k: exponent::error_exponent_closed(&m.into())?,
                dk_da: if m.is_degenerate() {
                    None
                } else {
                    Some(exponent::exponent_derivative(&m)?)
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSnrRow {
    pub snr_db: f64,
    pub k: f64,
    pub asymptote: Option<f64>,
}

pub fn sweep_snr(a: f64, from_db: f64, to_db: f64, points: usize) -> Result<Vec<SweepSnrRow>> {
    grid(from_db, to_db, points)?
        .into_iter()
        .map(|db| {
            let m = ScalarModel::from_snr(a, db_to_snr(db))?;
            Ok(SweepSnrRow {
                snr_db: db,
                k: exponent::error_exponent_closed(&m.into())?,
                asymptote: if m.is_degenerate() {
                    None
                } else {
                    Some(exponent::high_snr_asymptote(&m)?)
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalARow {
    pub snr_db: f64,
    pub a_star: f64,
    pub k_at_star: f64,
}

pub fn optimal_a(from_db: f64, to_db: f64, points: usize) -> Result<Vec<OptimalARow>> {
    grid(from_db, to_db, points)?
        .into_iter()
        .map(|db| {
            let o = exponent::optimal_correlation(db_to_snr(db))?;
            Ok(OptimalARow {
                snr_db: db,
                a_star: o.a_star,
                k_at_star: o.k_at_star,
            })
        })
        .collect()
}

fn render_sweep_a(rows: &[SweepARow], out: &Output) -> String {
    match out.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("a,k_nats,dk_da\n");
            for r in rows {
                let _ = writeln!(s, "{},{},{}", fmt_f64(r.a), fmt_f64(r.k), fmt_opt(r.dk_da));
            }
            s
        }
        Format::Json => {
            let scale = out.units.scale();
            let v: Vec<Value> = rows
                .iter()
                .map(|r| json!({"a": r.a, "k": r.k * scale, "dk_da": r.dk_da.map(|d| d * scale)}))
                .collect();
            json_doc(out.units, v)
        }
    }
}

fn render_sweep_snr(rows: &[SweepSnrRow], out: &Output) -> String {
    match out.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("snr_db,k_nats,k_asymptote_nats\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    fmt_f64(r.snr_db),
                    fmt_f64(r.k),
                    fmt_opt(r.asymptote)
                );
            }
            s
        }
        Format::Json => {
            let scale = out.units.scale();
            let v: Vec<Value> = rows
                .iter()
                .map(|r| json!({"snr_db": r.snr_db, "k": r.k * scale, "k_asymptote": r.asymptote.map(|d| d * scale)}))
                .collect();
            json_doc(out.units, v)
        }
    }
}

fn render_optimal_a(rows: &[OptimalARow], out: &Output) -> String {
    match out.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("snr_db,a_star,k_at_star_nats\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    fmt_f64(r.snr_db),
                    fmt_f64(r.a_star),
                    fmt_f64(r.k_at_star)
                );
            }
            s
        }
        Format::Json => {
            let scale = out.units.scale();
            let v: Vec<Value> = rows
                .iter()
                .map(|r| json!({"snr_db": r.snr_db, "a_star": r.a_star, "k_at_star": r.k_at_star * scale}))
                .collect();
            json_doc(out.units, v)
        }
    }
}

fn json_doc(units: Units, rows: Vec<Value>) -> String {
    let doc = json!({"units": units.name(), "rows": rows});
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

/// A finished `simulate` run with the closed-form exponent of its model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub config: SimConfig,
    pub seed: u64,
    pub result: SimResult,
    pub k_theory: f64,
}

pub fn simulate(cfg: &SimConfig, verbose: bool) -> Result<SimulationRun> {
    let seed = cfg.seed.ok_or_else(|| {
        Error::InvalidArgument("a master seed is required (config \"seed\" or --seed)".into())
    })?;
    let model = cfg.model.build()?;
    let k_theory = exponent::error_exponent_closed(&model)?;
    if verbose {
        eprintln!(
            "simulate: snr {:.4}, alpha {}, {} grid points, {} calibration / {} evaluation trials",
            model.snr(),
            cfg.alpha,
            cfg.n_grid.len(),
            cfg.plan().calibration,
            cfg.plan().evaluation
        );
    }
    let result = sim::estimate_exponent(&model, cfg.alpha, &cfg.n_grid, cfg.plan(), seed)?;
    Ok(SimulationRun {
        config: cfg.clone(),
        seed,
        result,
        k_theory,
    })
}

fn simulation_summary(run: &SimulationRun, units: Units) -> Value {
    let scale = units.scale();
    let plan = run.config.plan();
    json!({
        "units": units.name(),
        "alpha": run.result.alpha,
        "seed": run.seed,
        "calibration_trials": plan.calibration,
        "evaluation_trials": plan.evaluation,
        "fitted_n": run.result.fitted_n,
        "slope": run.result.slope * scale,
        "slope_se": run.result.slope_se * scale,
        "intercept": run.result.intercept,
        "k_theory": run.k_theory * scale,
    })
}

fn render_simulation(run: &SimulationRun, out: &Output) -> String {
    match out.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("n,pm,pm_se,tau\n");
            for p in &run.result.points {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    p.n,
                    fmt_f64(p.pm),
                    fmt_f64(p.pm_se),
                    fmt_f64(p.tau)
                );
            }
            let footer = simulation_summary(run, Units::Nats);
            let _ = writeln!(s, "# {footer}");
            s
        }
        Format::Json => {
            let mut v = simulation_summary(run, out.units);
            v["model"] = serde_json::to_value(&run.config.model).expect("serializable");
            v["points"] = serde_json::to_value(&run.result.points).expect("serializable");
            serde_json::to_string_pretty(&v).expect("serializable") + "\n"
        }
    }
}

/// Writes `body` to `path` through a temporary file in the same directory,
/// or to standard output.
pub fn emit(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Trial counts and grids used by `figures`.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSettings {
    pub alpha: f64,
    pub plan: TrialPlan,
    pub high_snr_db: f64,
    pub high_snr_correlations: Vec<f64>,
    pub high_snr_grid: Vec<usize>,
    pub low_snr_db: f64,
    pub low_snr_correlations: Vec<f64>,
    pub low_snr_grid: Vec<usize>,
}

impl FigureSettings {
    pub fn new(full: bool) -> Self {
        let scale = if full { 10 } else { 1 };
        Self {
            alpha: 1e-3,
            plan: TrialPlan {
                calibration: 100_000 * scale,
                evaluation: 1_000_000 * scale,
            },
            high_snr_db: 10.0,
            high_snr_correlations: vec![0.0, 0.5, 0.9, 1.0],
            high_snr_grid: (1..=15).map(|i| 2 * i).collect(),
            low_snr_db: -3.0,
            low_snr_correlations: vec![0.0, 0.5, 0.8, 0.95],
            low_snr_grid: (1..=10).map(|i| 20 * i).collect(),
        }
    }
}

fn db_tag(db: f64) -> String {
    if db < 0.0 {
        format!("m{}db", -db)
    } else {
        format!("{db}db")
    }
}

/// Writes every curve file into `outdir`, plus `manifest.json` listing them.
pub fn figures(outdir: &Path, seed: u64, full: bool, verbose: bool) -> Result<()> {
    std::fs::create_dir_all(outdir)?;
    let settings = FigureSettings::new(full);
    let csv = Output {
        output: None,
        format: Some(Format::Csv),
        units: Units::Nats,
    };
    let mut files = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        if verbose {
            eprintln!("figures: {name}");
        }
        write_atomic(&outdir.join(&name), &body)?;
        files.push(name);
        Ok(())
    };

    for db in [10.0, -3.0, -6.0, -9.0] {
        put(
            format!("k_vs_a_{}.csv", db_tag(db)),
            render_sweep_a(&sweep_a(db, 201)?, &csv),
        )?;
    }
    put(
        "a_star_vs_snr.csv".into(),
        render_optimal_a(&optimal_a(-20.0, 10.0, 61)?, &csv),
    )?;
    let a_fig = (-1f64).exp();
    put(
        "k_vs_snr_a0.368.csv".into(),
        render_sweep_snr(&sweep_snr(a_fig, -10.0, 30.0, 81)?, &csv),
    )?;

    let cases = [
        (
            settings.high_snr_db,
            &settings.high_snr_correlations,
            &settings.high_snr_grid,
        ),
        (
            settings.low_snr_db,
            &settings.low_snr_correlations,
            &settings.low_snr_grid,
        ),
    ];
    for (db, correlations, n_grid) in cases {
        for &a in correlations {
            let model = ScalarModel::from_snr(a, db_to_snr(db))?;
            let cfg = SimConfig {
                model: ModelSpec::from(&Model::from(model)),
                alpha: settings.alpha,
                n_grid: n_grid.clone(),
                trials: settings.plan.evaluation,
                calibration_trials: Some(settings.plan.calibration),
                seed: Some(seed),
            };
            let run = simulate(&cfg, verbose)?;
            put(
                format!("pm_vs_n_{}_a{a}.csv", db_tag(db)),
                render_simulation(&run, &csv),
            )?;
        }
    }

    let manifest = json!({
        "seed": seed,
        "alpha": settings.alpha,
        "calibration_trials": settings.plan.calibration,
        "evaluation_trials": settings.plan.evaluation,
        "files": files,
    });
    write_atomic(
        &outdir.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )
}
