use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use bellthresh::bell::lhv_max;
use bellthresh::optim::{critical_efficiency, maximize, noise_threshold, OptimOptions, Problem};
use bellthresh::scan::{
    default_ab_ranges, default_scan_options, scan_ab, scan_eta_a, ScanGrid, ScanOptions, DEFAULT_AB_RESOLUTION, DEFAULT_A_RANGE,
    DEFAULT_A_RESOLUTION, DEFAULT_ETA_RANGE, DEFAULT_ETA_RESOLUTION,
};
use bellthresh::Error;

mod config;
mod report;

use config::{ConfigFile, RunConfig, ScanConfig};
use report::Table;

/// Clauser-Horne violations, critical detection efficiencies and noise
/// thresholds for qubit and qutrit states.
#[derive(Parser, Debug)]
#[command(name = "bellthresh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximal violation over settings (and a, b unless fixed).
    MaxViolation(Common),
    /// Smallest detection efficiency that still allows a violation.
    CriticalEfficiency(Common),
    /// Largest white-noise fraction that still allows a violation.
    NoiseThreshold(Common),
    /// Grid of maximal violations over (a, b), or (eta, a) for qubits.
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Deterministic local-hidden-variable maximum of a functional.
    LhvBound(Common),
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// `key = value` file; flags override its entries.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// tritter, biphoton or qubit.
    #[arg(long)]
    scenario: Option<String>,
    /// Biphoton outcome pair: P1P2, P1P3 or P2P3.
    #[arg(long)]
    outcomes: Option<String>,
    /// ch-qutrit, ch-qubit or file:PATH.
    #[arg(long)]
    functional: Option<String>,
    /// Fix the qutrit entanglement parameters.
    #[arg(long, value_name = "A,B", allow_hyphen_values = true)]
    fix_ab: Option<String>,
    /// Fix the qubit entanglement parameter.
    #[arg(long, value_name = "A", allow_hyphen_values = true)]
    fix_a: Option<f64>,
    /// Detection efficiency.
    #[arg(long)]
    eta: Option<f64>,
    /// White-noise fraction (qutrit scenarios).
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    multistarts: Option<usize>,
    /// Falls back to BELLTHRESH_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Simplex iteration cap per start.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug, Default)]
pub struct ScanArgs {
    /// Grid file; printed to stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// csv or json (default: from the --out extension, else csv).
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_name = "LO,HI", allow_hyphen_values = true)]
    a_range: Option<String>,
    #[arg(long, value_name = "LO,HI", allow_hyphen_values = true)]
    b_range: Option<String>,
    #[arg(long, value_name = "LO,HI")]
    eta_range: Option<String>,
    /// N or NX,NY.
    #[arg(long, value_name = "N[,M]")]
    resolution: Option<String>,
    /// Seed each node with its left neighbour's optimum.
    #[arg(long)]
    warm_start: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Optimization(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Optimization(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Optimization(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Io(_) | Error::Json(_) => CliError::Config(e.to_string()),
            Error::OptimizationFailure { .. } | Error::NoViolation { .. } | Error::Consistency(_) => {
                CliError::Optimization(e.to_string())
            }
        }
    }
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, ConfigFile), CliError> {
        self.resolve_with(OptimOptions::default())
    }

    fn resolve_with(&self, defaults: OptimOptions) -> Result<(RunConfig, ConfigFile), CliError> {
        let cfg = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let run = RunConfig::build(self, &cfg, defaults)?;
        if let Some(n) = run.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
        }
        Ok((run, cfg))
    }
}

fn context(run: &RunConfig) -> Value {
    json!({
        "scenario": run.scenario.name(),
        "functional": run.functional.name(),
        "eta": run.eta,
        "noise": run.noise,
        "entanglement": run.entanglement,
        "options": run.options,
    })
}

fn emit(common: &Common, command: &str, run: &RunConfig, result: Value, table: Table) {
    if common.json {
        let doc = json!({ "command": command, "config": context(run), "result": result });
        println!("{}", serde_json::to_string_pretty(&doc).expect("JSON values serialize"));
    } else {
        print!("{table}");
    }
}

fn problem(run: &RunConfig) -> Problem<'_> {
    Problem {
        scenario: &run.scenario,
        functional: &run.functional,
        eta: run.eta,
        noise: run.noise,
        entanglement: run.entanglement,
    }
}

fn cmd_max_violation(common: &Common) -> Result<(), CliError> {
    let (run, _) = common.resolve()?;
    let r = maximize(&problem(&run), &run.options)?;
    let mut t = Table::header(&run);
    t.violation(&r);
    let mut result = serde_json::to_value(&r).expect("result serializes");
    result["ratio"] = json!(r.value.ratio());
    emit(common, "max-violation", &run, result, t);
    Ok(())
}

fn cmd_critical_efficiency(common: &Common) -> Result<(), CliError> {
    let (run, _) = common.resolve()?;
    let e = critical_efficiency(&problem(&run), &run.options)?;
    let mut t = Table::header(&run);
    t.num("eta*", e.eta_star);
    t.num("largest eta without violation", e.eta_below);
    t.num("-S/J at threshold optimum", e.closed_form);
    t.row("probes", e.probes.to_string());
    t.violation(&e.at_threshold);
    emit(common, "critical-efficiency", &run, serde_json::to_value(&e).expect("result serializes"), t);
    Ok(())
}

fn cmd_noise_threshold(common: &Common) -> Result<(), CliError> {
    let (run, _) = common.resolve()?;
    let n = noise_threshold(&problem(&run), &run.options)?;
    let mut t = Table::header(&run);
    t.num("F_th", n.f_th);
    t.num("F_th by bisection", n.bisection);
    t.num("CH*", n.ch_star);
    t.num("CH on white noise", n.ch_noise);
    t.row("probes", n.probes.to_string());
    t.violation(&n.at_zero_noise);
    emit(common, "noise-threshold", &run, serde_json::to_value(&n).expect("result serializes"), t);
    Ok(())
}

fn cmd_scan(common: &Common, args: &ScanArgs) -> Result<(), CliError> {
    let (run, cfg) = common.resolve_with(default_scan_options())?;
    let sc = ScanConfig::build(args, &cfg)?;
    let scan = ScanOptions {
        warm_start: sc.warm_start,
    };
    let grid: ScanGrid = if run.scenario.is_qutrit() {
        if sc.eta_range.is_some() {
            return Err(CliError::Config("--eta-range applies to qubit scans".into()));
        }
        let (da, db) = default_ab_ranges(&run.scenario);
        scan_ab(
            &run.scenario,
            &run.functional,
            run.eta,
            run.noise,
            sc.a_range.unwrap_or(da),
            sc.b_range.unwrap_or(db),
            sc.resolution.unwrap_or((DEFAULT_AB_RESOLUTION, DEFAULT_AB_RESOLUTION)),
            &run.options,
            scan,
        )?
    } else {
        if sc.b_range.is_some() {
            return Err(CliError::Config("--b-range applies to qutrit scans".into()));
        }
        scan_eta_a(
            &run.scenario,
            &run.functional,
            sc.eta_range.unwrap_or(DEFAULT_ETA_RANGE),
            sc.a_range.unwrap_or(DEFAULT_A_RANGE),
            sc.resolution.unwrap_or((DEFAULT_ETA_RESOLUTION, DEFAULT_A_RESOLUTION)),
            &run.options,
            scan,
        )?
    };

    let Some(out) = &sc.out else {
        match sc.format {
            bellthresh::scan::ExportFormat::Csv => print!("{}", grid.to_csv()),
            bellthresh::scan::ExportFormat::Json => println!("{}", grid.to_json()?),
        }
        return Ok(());
    };
    grid.export(sc.format, out)?;
    let (mx, my, mv) = grid.max();
    let crossing = grid.leftmost_crossing(run.options.violation_margin);
    let mut t = Table::header(&run);
    t.row("grid", format!("{} x {} ({} by {})", grid.x.n, grid.y.n, grid.x.name, grid.y.name));
    t.row(
        "maximum",
        format!("{} at {}={}, {}={}", report::sig(mv), grid.x.name, report::sig(mx), grid.y.name, report::sig(my)),
    );
    if let Some((x, y)) = crossing {
        t.row(
            "leftmost positive crossing",
            format!("{}={} at {}={}", grid.x.name, report::sig(x), grid.y.name, report::sig(y)),
        );
    }
    t.row("written", out.display().to_string());
    let result = json!({
        "path": out,
        "format": sc.format,
        "x": grid.x,
        "y": grid.y,
        "max": { "x": mx, "y": my, "value": mv },
        "leftmost_crossing": crossing.map(|(x, y)| json!({ "x": x, "y": y })),
    });
    emit(common, "scan", &run, result, t);
    Ok(())
}

fn cmd_lhv_bound(common: &Common) -> Result<(), CliError> {
    let (run, _) = common.resolve()?;
    let f = &run.functional;
    let bound = lhv_max(f);
    let strategies = f.n_outcomes().pow(2 * f.n_settings() as u32);
    let mut t = Table::default();
    t.row("functional", f.name().to_string());
    t.num("LHV maximum", bound);
    t.row("strategies enumerated", strategies.to_string());
    t.num("declared bound", f.lhv_bound());
    if bound != f.lhv_bound() {
        t.row("warning", "enumerated maximum differs from the declared bound".into());
    }
    let result = json!({
        "lhv_max": bound,
        "declared_bound": f.lhv_bound(),
        "strategies": strategies,
    });
    emit(common, "lhv-bound", &run, result, t);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::MaxViolation(c) => cmd_max_violation(c),
        Command::CriticalEfficiency(c) => cmd_critical_efficiency(c),
        Command::NoiseThreshold(c) => cmd_noise_threshold(c),
        Command::Scan { common, scan } => cmd_scan(common, scan),
        Command::LhvBound(c) => cmd_lhv_bound(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bellthresh: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
