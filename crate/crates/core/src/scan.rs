//! Rectangular parameter sweeps for contour plots.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::BellFunctional;
use crate::error::{Error, Result};
use crate::optim::{maximize_with_starts, Entanglement, OptimOptions, Problem, ViolationResult};
use crate::scenarios::{EntanglementParams, OutcomePair, Scenario};

/// Nodes per axis of an (a, b) grid; step 0.1 on the default ranges.
pub const DEFAULT_AB_RESOLUTION: usize = 31;
/// Nodes on the η axis of a qubit grid; step 0.01.
pub const DEFAULT_ETA_RESOLUTION: usize = 41;
/// Nodes on the a axis of a qubit grid; step 0.02.
pub const DEFAULT_A_RESOLUTION: usize = 50;
pub const DEFAULT_ETA_RANGE: (f64, f64) = (0.6, 1.0);
/// Starts above zero: the product state never violates, and the threshold
/// only tends to 2/3 as a → 0.
pub const DEFAULT_A_RANGE: (f64, f64) = (0.02, 1.0);

/// Starts per node when the caller does not choose. With (a, b) or a fixed,
/// the settings landscape is benign enough that every start tends to reach
/// the same optimum, and neighbouring nodes share it closely.
pub const SCAN_MULTISTARTS: usize = 16;

/// Optimizer options used for scans by default.
pub fn default_scan_options() -> OptimOptions {
    OptimOptions {
        multistarts: SCAN_MULTISTARTS,
        ..OptimOptions::default()
    }
}

/// Default `(a_range, b_range)` for a qutrit scenario.
pub fn default_ab_ranges(sc: &Scenario) -> ((f64, f64), (f64, f64)) {
    match sc.outcome_pair() {
        Some(OutcomePair::P1P3) => ((-3.0, 0.0), (-3.0, 0.0)),
        _ => ((0.0, 3.0), (0.0, 3.0)),
    }
}

/// Evenly spaced axis, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, min: f64, max: f64, n: usize) -> Result<Self> {
        let name = name.into();
        if n == 0 || !min.is_finite() || !max.is_finite() || min > max || (n > 1 && min == max) {
            return Err(Error::invalid(format!(
                "empty or malformed range for axis `{name}`: [{min}, {max}] with {n} nodes"
            )));
        }
        Ok(Self { name, min, max, n })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.n == 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    /// Index of the node closest to `v`.
    pub fn nearest(&self, v: f64) -> usize {
        (0..self.n)
            .min_by(|&i, &j| (self.value(i) - v).abs().total_cmp(&(self.value(j) - v).abs()))
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub scenario: String,
    pub functional: String,
    /// Fixed efficiency for (a, b) scans; `None` when η is an axis.
    pub eta: Option<f64>,
    pub noise: f64,
    pub warm_start: bool,
    pub options: OptimOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub x: Axis,
    pub y: Axis,
    /// Row-major: `values[iy * x.n + ix]`.
    pub values: Vec<f64>,
    pub metadata: ScanMetadata,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::invalid(format!("unknown export format `{other}`"))),
        }
    }
}

impl ScanGrid {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.x.n + ix]
    }

    /// Value at the node nearest to `(x, y)`.
    pub fn at(&self, x: f64, y: f64) -> f64 {
        self.get(self.x.nearest(x), self.y.nearest(y))
    }

    /// `(x, y, value)` of the largest node value.
    pub fn max(&self) -> (f64, f64, f64) {
        let (idx, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (self.x.value(idx % self.x.n), self.y.value(idx / self.x.n), v)
    }

    /// Leftmost point where a row first rises above `level`, linearly
    /// interpolated along x. Rows that never exceed `level` are skipped.
    pub fn leftmost_crossing(&self, level: f64) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for iy in 0..self.y.n {
            let Some(ix) = (0..self.x.n).find(|&ix| self.get(ix, iy) > level) else {
                continue;
            };
            let x = if ix == 0 {
                self.x.value(0)
            } else {
                let (x0, x1) = (self.x.value(ix - 1), self.x.value(ix));
                let (v0, v1) = (self.get(ix - 1, iy), self.get(ix, iy));
                x0 + (level - v0) / (v1 - v0) * (x1 - x0)
            };
            if best.is_none_or(|(bx, _)| x < bx) {
                best = Some((x, self.y.value(iy)));
            }
        }
        best
    }

    /// Header `x,y,value`, then one node per line in row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},value\n", self.x.name, self.y.name);
        for iy in 0..self.y.n {
            for ix in 0..self.x.n {
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e}",
                    self.x.value(ix),
                    self.y.value(iy),
                    self.get(ix, iy)
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: ScanGrid = serde_json::from_str(text)?;
        if grid.values.len() != grid.x.n * grid.y.n {
            return Err(Error::invalid("grid value count does not match its axes"));
        }
        Ok(grid)
    }

    pub fn export(&self, format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
        let text = match format {
            ExportFormat::Csv => self.to_csv(),
            ExportFormat::Json => self.to_json()?,
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Free function form of [`ScanGrid::export`].
pub fn export(grid: &ScanGrid, format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
    grid.export(format, path)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanOptions {
    /// Seed each node with the previous node's optimum along the row.
    pub warm_start: bool,
}

/// How a node's `(x, y)` maps onto a problem.
struct NodeSpec<'a> {
    scenario: &'a Scenario,
    functional: &'a BellFunctional,
    noise: f64,
    node: Box<dyn Fn(f64, f64) -> (f64, EntanglementParams) + Sync + 'a>,
}

fn run_grid(spec: &NodeSpec, x: Axis, y: Axis, opts: &OptimOptions, scan: ScanOptions, eta: Option<f64>) -> Result<ScanGrid> {
    opts.validate()?;
    let row = |iy: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.n);
        let mut previous: Option<ViolationResult> = None;
        for ix in 0..x.n {
            let (eta, params) = (spec.node)(x.value(ix), y.value(iy));
            let problem = Problem {
                scenario: spec.scenario,
                functional: spec.functional,
                eta,
                noise: spec.noise,
                entanglement: Entanglement::Fixed(params),
            };
            let warm: Vec<Vec<f64>> = match (&previous, scan.warm_start) {
                (Some(r), true) => vec![r.settings.to_vec()],
                _ => Vec::new(),
            };
            let r = maximize_with_starts(&problem, opts, &warm)?;
            out.push(r.total());
            previous = Some(r);
        }
        Ok(out)
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<Result<Vec<f64>>> = (0..y.n).into_par_iter().map(row).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<Vec<f64>>> = (0..y.n).map(row).collect();

    let mut values = Vec::with_capacity(x.n * y.n);
    for r in rows {
        values.extend(r?);
    }
    Ok(ScanGrid {
        x,
        y,
        values,
        metadata: ScanMetadata {
            scenario: spec.scenario.name(),
            functional: spec.functional.name().to_string(),
            eta,
            noise: spec.noise,
            warm_start: scan.warm_start,
            options: opts.clone(),
        },
    })
}

/// CH maximized over settings at every `(a, b)` node of a qutrit scenario.
#[allow(clippy::too_many_arguments)]
pub fn scan_ab(
    sc: &Scenario,
    f: &BellFunctional,
    eta: f64,
    noise: f64,
    a_range: (f64, f64),
    b_range: (f64, f64),
    resolution: (usize, usize),
    opts: &OptimOptions,
    scan: ScanOptions,
) -> Result<ScanGrid> {
    if !sc.is_qutrit() {
        return Err(Error::invalid("(a, b) scans need a qutrit scenario"));
    }
    let x = Axis::new("a", a_range.0, a_range.1, resolution.0)?;
    let y = Axis::new("b", b_range.0, b_range.1, resolution.1)?;
    let spec = NodeSpec {
        scenario: sc,
        functional: f,
        noise,
        node: Box::new(move |a, b| (eta, EntanglementParams::qutrit(a, b))),
    };
    run_grid(&spec, x, y, opts, scan, Some(eta))
}

/// CH maximized over settings at every `(η, a)` node of the qubit scenario.
pub fn scan_eta_a(
    sc: &Scenario,
    f: &BellFunctional,
    eta_range: (f64, f64),
    a_range: (f64, f64),
    resolution: (usize, usize),
    opts: &OptimOptions,
    scan: ScanOptions,
) -> Result<ScanGrid> {
    if sc.is_qutrit() {
        return Err(Error::invalid("(eta, a) scans need the qubit scenario"));
    }
    let x = Axis::new("eta", eta_range.0, eta_range.1, resolution.0)?;
    let y = Axis::new("a", a_range.0, a_range.1, resolution.1)?;
    if x.min < 0.0 || x.max > 1.0 {
        return Err(Error::invalid("efficiency axis must lie inside [0, 1]"));
    }
    let spec = NodeSpec {
        scenario: sc,
        functional: f,
        noise: 0.0,
        node: Box::new(|eta, a| (eta, EntanglementParams::qubit(a))),
    };
    run_grid(&spec, x, y, opts, scan, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ScanGrid {
        ScanGrid {
            x: Axis::new("eta", 0.0, 1.0, 3).unwrap(),
            y: Axis::new("a", 0.0, 1.0, 2).unwrap(),
            values: vec![-1.0, -0.5, 0.5, -1.0, 1.0, 2.0],
            metadata: ScanMetadata {
                scenario: "qubit".into(),
                functional: "ch-qubit".into(),
                eta: None,
                noise: 0.0,
                warm_start: false,
                options: OptimOptions::default(),
            },
        }
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::new("a", 1.0, 0.0, 5).is_err());
        assert!(Axis::new("a", 0.0, 1.0, 0).is_err());
        assert!(Axis::new("a", 1.0, 1.0, 3).is_err());
        let single = Axis::new("a", 1.0, 1.0, 1).unwrap();
        assert_eq!(single.values(), [1.0]);
        let ax = Axis::new("a", 0.0, 3.0, 41).unwrap();
        assert_eq!(ax.value(40), 3.0);
        assert_eq!(ax.nearest(1.0), 13 + usize::from(ax.value(14) - 1.0 < 1.0 - ax.value(13)));
    }

    #[test]
    fn csv_has_header_plus_one_line_per_node() {
        let mut g = toy();
        g.x = Axis::new("eta", 0.0, 1.0, 2).unwrap();
        g.values = vec![0.1, 0.2, 0.3, 0.4];
        let csv = g.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().next(), Some("eta,a,value"));
        let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(last, [1.0, 1.0, 0.4]);
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let mut g = toy();
        g.values = vec![0.1 + 0.2, 1.0 / 3.0, -2.0f64.sqrt(), 1e-300, 0.29097801705744, 6.02e23];
        let back = ScanGrid::from_json(&g.to_json().unwrap()).unwrap();
        for (a, b) in g.values.iter().zip(&back.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.metadata.options.seed, g.metadata.options.seed);
    }

    #[test]
    fn crossing_interpolates_and_skips_dead_rows() {
        let g = toy();
        let (x, y) = g.leftmost_crossing(0.0).unwrap();
        // Row a = 1 crosses between eta 0 (−1) and 0.5 (+1) at 0.25.
        assert!((x - 0.25).abs() < 1e-15);
        assert_eq!(y, 1.0);
        let mut dead = toy();
        dead.values = vec![-1.0; 6];
        assert!(dead.leftmost_crossing(0.0).is_none());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = toy().export(ExportFormat::Csv, "/nonexistent-dir/grid.csv").unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn scenario_checks() {
        let f = crate::bell::ch_qubit_functional();
        let o = OptimOptions::default();
        assert!(scan_ab(&Scenario::qubit(), &f, 1.0, 0.0, (0.0, 1.0), (0.0, 1.0), (2, 2), &o, ScanOptions::default()).is_err());
        let g = crate::bell::ch_qutrit_functional();
        assert!(scan_eta_a(&Scenario::tritter(), &g, (0.5, 1.0), (0.0, 1.0), (2, 2), &o, ScanOptions::default()).is_err());
        assert!(scan_ab(&Scenario::tritter(), &g, 1.0, 0.0, (1.0, 0.0), (0.0, 1.0), (2, 2), &o, ScanOptions::default()).is_err());
    }
}
