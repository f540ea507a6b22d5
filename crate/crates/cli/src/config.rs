//! Run configuration: `key = value` files merged with command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bellthresh::bell::BellFunctional;
use bellthresh::optim::{Entanglement, OptimOptions};
use bellthresh::scan::ExportFormat;
use bellthresh::scenarios::{EntanglementParams, OutcomePair, Scenario};

use crate::{CliError, Common, ScanArgs};

pub const SEED_ENV: &str = "BELLTHRESH_SEED";

const KEYS: &[&str] = &[
    "scenario",
    "outcomes",
    "functional",
    "fix_ab",
    "fix_a",
    "eta",
    "noise",
    "multistarts",
    "seed",
    "max_iterations",
    "threads",
    "out",
    "format",
    "a_range",
    "b_range",
    "eta_range",
    "resolution",
    "warm_start",
];

/// Flat `key = value` file. `#` starts a comment; `-` and `_` in keys are
/// interchangeable.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("config line {}: expected `key = value`", n + 1)));
            };
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("config line {}: unknown key `{key}`", n + 1)));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

fn parse_value<T: FromStr>(key: &str, s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value `{s}` for {key}")))
}

/// Flag wins over the config file.
fn pick<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key).map(|s| parse_value(key, s)).transpose(),
    }
}

fn pick_str(flag: &Option<String>, cfg: &ConfigFile, key: &str) -> Option<String> {
    flag.clone().or_else(|| cfg.get(key).map(str::to_string))
}

pub fn parse_pair(key: &str, s: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [x, y] => Ok((parse_value(key, x)?, parse_value(key, y)?)),
        _ => Err(CliError::Config(format!("{key} expects two comma-separated numbers, got `{s}`"))),
    }
}

#[derive(Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub functional: BellFunctional,
    pub entanglement: Entanglement,
    pub eta: f64,
    pub noise: f64,
    pub options: OptimOptions,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn build(common: &Common, cfg: &ConfigFile, defaults: OptimOptions) -> Result<Self, CliError> {
        let scenario_name = pick_str(&common.scenario, cfg, "scenario").unwrap_or_else(|| "tritter".into());
        let outcomes = pick_str(&common.outcomes, cfg, "outcomes");
        let scenario = match scenario_name.as_str() {
            "tritter" => Scenario::tritter(),
            "qubit" => Scenario::qubit(),
            "biphoton" => {
                let pair: OutcomePair = outcomes.as_deref().unwrap_or("P1P2").parse().map_err(CliError::from)?;
                Scenario::biphoton(pair)
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown scenario `{other}` (tritter, biphoton, qubit)"
                )))
            }
        };
        if outcomes.is_some() && scenario.outcome_pair().is_none() {
            return Err(CliError::Config("--outcomes applies to the biphoton scenario only".into()));
        }

        let functional = match pick_str(&common.functional, cfg, "functional") {
            None if scenario.is_qutrit() => BellFunctional::preset("ch-qutrit")?,
            None => BellFunctional::preset("ch-qubit")?,
            Some(spec) => load_functional(&spec)?,
        };

        let fix_ab = pick_str(&common.fix_ab, cfg, "fix_ab");
        let fix_a: Option<f64> = pick(common.fix_a, cfg, "fix_a")?;
        let entanglement = match (fix_ab, fix_a) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either --fix-ab or --fix-a, not both".into())),
            (Some(ab), None) => {
                if !scenario.is_qutrit() {
                    return Err(CliError::Config("--fix-ab needs a qutrit scenario; use --fix-a".into()));
                }
                let (a, b) = parse_pair("fix-ab", &ab)?;
                Entanglement::Fixed(EntanglementParams::qutrit(a, b))
            }
            (None, Some(a)) => {
                if scenario.is_qutrit() {
                    return Err(CliError::Config("--fix-a applies to the qubit scenario; use --fix-ab".into()));
                }
                Entanglement::Fixed(EntanglementParams::qubit(a))
            }
            (None, None) => Entanglement::Free,
        };

        let eta = pick(common.eta, cfg, "eta")?.unwrap_or(1.0);
        let noise = pick(common.noise, cfg, "noise")?.unwrap_or(0.0);
        let seed = match pick(common.seed, cfg, "seed")? {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(s) => parse_value(SEED_ENV, &s)?,
                Err(_) => defaults.seed,
            },
        };
        let options = OptimOptions {
            multistarts: pick(common.multistarts, cfg, "multistarts")?.unwrap_or(defaults.multistarts),
            max_iterations: pick(common.max_iterations, cfg, "max_iterations")?.unwrap_or(defaults.max_iterations),
            seed,
            ..defaults
        };
        options.validate()?;
        let threads = pick(common.threads, cfg, "threads")?;
        if threads == Some(0) {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        if noise > 0.0 && !scenario.is_qutrit() {
            return Err(CliError::Config("noise is only modeled for qutrit scenarios".into()));
        }
        functional.check_compatible(&scenario)?;
        Ok(Self {
            scenario,
            functional,
            entanglement,
            eta,
            noise,
            options,
            threads,
        })
    }
}

fn load_functional(spec: &str) -> Result<BellFunctional, CliError> {
    match spec.strip_prefix("file:") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read functional table {path}: {e}")))?;
            Ok(BellFunctional::from_table(spec, &text)?)
        }
        None => Ok(BellFunctional::preset(spec)?),
    }
}

#[derive(Debug)]
pub struct ScanConfig {
    pub out: Option<PathBuf>,
    pub format: ExportFormat,
    pub a_range: Option<(f64, f64)>,
    pub b_range: Option<(f64, f64)>,
    pub eta_range: Option<(f64, f64)>,
    pub resolution: Option<(usize, usize)>,
    pub warm_start: bool,
}

impl ScanConfig {
    pub fn build(args: &ScanArgs, cfg: &ConfigFile) -> Result<Self, CliError> {
        let out = args.out.clone().or_else(|| cfg.get("out").map(PathBuf::from));
        let format = match pick_str(&args.format, cfg, "format") {
            Some(f) => f.parse()?,
            None => match out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
                Some("json") => ExportFormat::Json,
                _ => ExportFormat::Csv,
            },
        };
        let range = |flag: &Option<String>, key: &str| -> Result<Option<(f64, f64)>, CliError> {
            pick_str(flag, cfg, key).map(|s| parse_pair(key, &s)).transpose()
        };
        let resolution = match pick_str(&args.resolution, cfg, "resolution") {
            None => None,
            Some(s) => {
                let parts: Vec<&str> = s.split(',').collect();
                match parts.as_slice() {
                    [n] => {
                        let n = parse_value("resolution", n)?;
                        Some((n, n))
                    }
                    [nx, ny] => Some((parse_value("resolution", nx)?, parse_value("resolution", ny)?)),
                    _ => return Err(CliError::Config(format!("resolution expects N or NX,NY, got `{s}`"))),
                }
            }
        };
        let warm_start = args.warm_start || pick(None, cfg, "warm_start")?.unwrap_or(false);
        Ok(Self {
            out,
            format,
            a_range: range(&args.a_range, "a_range")?,
            b_range: range(&args.b_range, "b_range")?,
            eta_range: range(&args.eta_range, "eta_range")?,
            resolution,
            warm_start,
        })
    }
}
