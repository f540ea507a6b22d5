//! Maximization of Bell functionals and the two threshold searches.
//!
//! [`maximize`] runs a bounded simplex search from `multistarts` shifted
//! Halton points and keeps the best. The critical efficiency is located by
//! bisection on `η` with a full maximization at every probe; the noise
//! threshold has a closed form (the functional is linear in the noise
//! weight) which is cross-checked the same way.

pub mod lowdisc;
pub mod simplex;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{evaluate, noise_reference, BellFunctional, BellValue};
use crate::error::{Error, Result};
use crate::qcore::{Operator, State};
use crate::scenarios::{EntanglementParams, ParamBound, Scenario, SettingParams};

use lowdisc::ShiftedHalton;
use simplex::{SimplexOptions, SimplexResult};

/// Starts within this distance of the best value count as duplicates.
pub const DUPLICATE_WINDOW: f64 = 1e-6;

/// Left end of the efficiency bisection bracket.
pub const EFFICIENCY_BRACKET_LO: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    pub multistarts: usize,
    pub seed: u64,
    /// Vertex-value spread at which a simplex run stops.
    pub function_tolerance: f64,
    pub max_iterations: usize,
    /// Width of the final bisection bracket for `η*` and `F_th`.
    pub threshold_tolerance: f64,
    /// A maximum counts as a violation only above this value.
    pub violation_margin: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            multistarts: 64,
            seed: 0x5eed_c4a7,
            function_tolerance: 1e-9,
            max_iterations: 5000,
            threshold_tolerance: 1e-7,
            violation_margin: 1e-12,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        if self.multistarts == 0 {
            return Err(Error::invalid("multistarts must be at least 1"));
        }
        if !(self.function_tolerance > 0.0 && self.threshold_tolerance > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        if self.violation_margin.is_nan() || self.violation_margin < 0.0 {
            return Err(Error::invalid("violation margin must be non-negative"));
        }
        Ok(())
    }

    fn simplex(&self) -> SimplexOptions {
        SimplexOptions {
            max_iterations: self.max_iterations,
            ftol: self.function_tolerance,
            xtol: self.function_tolerance.sqrt().max(1e-8),
            ..SimplexOptions::default()
        }
    }
}

/// Whether the entanglement parameters are optimized or held fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Entanglement {
    Fixed(EntanglementParams),
    Free,
}

/// One maximization task.
#[derive(Clone, Debug)]
pub struct Problem<'a> {
    pub scenario: &'a Scenario,
    pub functional: &'a BellFunctional,
    pub eta: f64,
    pub noise: f64,
    pub entanglement: Entanglement,
}

impl<'a> Problem<'a> {
    /// Perfect detection, no noise.
    pub fn new(scenario: &'a Scenario, functional: &'a BellFunctional, entanglement: Entanglement) -> Self {
        Self {
            scenario,
            functional,
            eta: 1.0,
            noise: 0.0,
            entanglement,
        }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { eta, ..self.clone() }
    }

    pub fn with_noise(&self, noise: f64) -> Self {
        Self { noise, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("detection efficiency {} outside [0, 1]", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::invalid(format!("noise fraction {} outside [0, 1]", self.noise)));
        }
        if self.noise > 0.0 && !self.scenario.is_qutrit() {
            return Err(Error::invalid("noise is only modeled for qutrit scenarios"));
        }
        self.functional.check_compatible(self.scenario)?;
        if let Entanglement::Fixed(p) = &self.entanglement {
            self.scenario.state(p)?;
        }
        Ok(())
    }

    fn bounds(&self) -> Vec<ParamBound> {
        let mut b = self.scenario.setting_bounds();
        if self.entanglement == Entanglement::Free {
            b.extend(self.scenario.entanglement_bounds());
        }
        b
    }

    /// State for given entanglement parameters, noise applied.
    fn state(&self, p: &EntanglementParams) -> Result<State> {
        let psi = self.scenario.state(p)?;
        Ok(if self.noise > 0.0 {
            let noisy = psi
                .density()
                .combine(1.0 - self.noise, &Operator::maximally_mixed(psi.dim()), self.noise)?;
            State::Mixed(noisy)
        } else {
            State::Pure(psi)
        })
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.scenario.setting_bounds().len())
    }

    fn decode(&self, x: &[f64]) -> Result<(SettingParams, EntanglementParams)> {
        let (sx, ex) = self.split(x);
        let settings = self.scenario.settings_from_slice(sx)?;
        let params = match self.entanglement {
            Entanglement::Fixed(p) => p,
            Entanglement::Free => self.scenario.entanglement_from_slice(ex)?,
        };
        Ok((settings, params))
    }
}

/// Best point of a multistart maximization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationResult {
    /// Value and parts at the problem's `η` (parts scaled by `η²`, `η`).
    pub value: BellValue,
    /// Parts at the same point for perfect detection.
    pub raw: BellValue,
    pub entanglement: EntanglementParams,
    pub settings: SettingParams,
    pub eta: f64,
    pub noise: f64,
    pub starts: usize,
    pub starts_converged: usize,
    pub best_duplicates: usize,
    pub best_start: usize,
    pub evaluations: usize,
    /// Best value reached by every start, in start order.
    pub start_values: Vec<f64>,
}

impl ViolationResult {
    pub fn total(&self) -> f64 {
        self.value.total
    }
}

struct Objective<'p, 'a> {
    problem: &'p Problem<'a>,
    fixed: Option<State>,
    n_settings: usize,
}

impl<'p, 'a> Objective<'p, 'a> {
    fn new(problem: &'p Problem<'a>) -> Result<Self> {
        let fixed = match problem.entanglement {
            Entanglement::Fixed(p) => Some(problem.state(&p)?),
            Entanglement::Free => None,
        };
        Ok(Self {
            problem,
            fixed,
            n_settings: problem.scenario.setting_bounds().len(),
        })
    }

    fn value(&self, x: &[f64]) -> f64 {
        let sc = self.problem.scenario;
        let Ok(settings) = sc.settings_from_slice(&x[..self.n_settings]) else {
            return f64::NEG_INFINITY;
        };
        let Ok(meas) = sc.measurements(&settings) else {
            return f64::NEG_INFINITY;
        };
        let owned;
        let state = match &self.fixed {
            Some(s) => s,
            None => {
                let Ok(p) = sc.entanglement_from_slice(&x[self.n_settings..]) else {
                    return f64::NEG_INFINITY;
                };
                let Ok(s) = self.problem.state(&p) else {
                    return f64::NEG_INFINITY;
                };
                owned = s;
                &owned
            }
        };
        let (j, s) = self.problem.functional.raw_parts(state, sc.local_dim(), &meas);
        let eta = self.problem.eta;
        eta * eta * j + eta * s
    }
}

fn start_point(halton: &ShiftedHalton, index: usize, bounds: &[ParamBound]) -> Vec<f64> {
    halton
        .point(index as u64)
        .iter()
        .zip(bounds)
        .map(|(u, b)| b.lo + u * b.width())
        .collect()
}

fn run_start(objective: &Objective, x0: &[f64], bounds: &[ParamBound], opts: &SimplexOptions) -> SimplexResult {
    simplex::minimize(|x| -objective.value(x), x0, bounds, opts)
}

/// Maximizes the problem's functional value over settings (and entanglement
/// parameters when free).
pub fn maximize(problem: &Problem, opts: &OptimOptions) -> Result<ViolationResult> {
    maximize_with_starts(problem, opts, &[])
}

/// As [`maximize`], with caller-supplied start points run after the
/// quasi-random ones (used for warm starts).
pub fn maximize_with_starts(problem: &Problem, opts: &OptimOptions, extra: &[Vec<f64>]) -> Result<ViolationResult> {
    opts.validate()?;
    problem.validate()?;
    let bounds = problem.bounds();
    if let Some(bad) = extra.iter().find(|x| x.len() != bounds.len()) {
        return Err(Error::invalid(format!(
            "warm start has {} coordinates, expected {}",
            bad.len(),
            bounds.len()
        )));
    }
    let objective = Objective::new(problem)?;
    let halton = ShiftedHalton::new(bounds.len(), opts.seed);
    let mut starts: Vec<Vec<f64>> = (0..opts.multistarts)
        .map(|i| start_point(&halton, i, &bounds))
        .collect();
    starts.extend(extra.iter().cloned());
    let simplex_opts = opts.simplex();

    #[cfg(feature = "parallel")]
    let runs: Vec<SimplexResult> = starts
        .par_iter()
        .map(|x0| run_start(&objective, x0, &bounds, &simplex_opts))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<SimplexResult> = starts
        .iter()
        .map(|x0| run_start(&objective, x0, &bounds, &simplex_opts))
        .collect();

    let converged = runs.iter().filter(|r| r.converged).count();
    if converged == 0 {
        return Err(Error::OptimizationFailure {
            message: format!("no simplex run converged within {} iterations", opts.max_iterations),
            starts: runs.len(),
            converged,
        });
    }
    let start_values: Vec<f64> = runs.iter().map(|r| -r.fx).collect();
    // Strictly-greater keeps the lowest index among ties.
    let mut best_start = 0;
    for (i, v) in start_values.iter().enumerate() {
        if *v > start_values[best_start] {
            best_start = i;
        }
    }
    let best_value = start_values[best_start];
    let best_duplicates = start_values
        .iter()
        .filter(|v| best_value - **v <= DUPLICATE_WINDOW)
        .count();

    let x: Vec<f64> = runs[best_start]
        .x
        .iter()
        .zip(&bounds)
        .map(|(xi, b)| b.canonical(*xi))
        .collect();
    let (settings, entanglement) = problem.decode(&x)?;
    let state = problem.state(&entanglement)?;
    let raw = evaluate(problem.functional, problem.scenario, &state, &settings)?;
    Ok(ViolationResult {
        value: raw.at_efficiency(problem.eta)?,
        raw,
        entanglement,
        settings,
        eta: problem.eta,
        noise: problem.noise,
        starts: runs.len(),
        starts_converged: converged,
        best_duplicates,
        best_start,
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        start_values,
    })
}

/// Outcome of the critical-efficiency search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyThreshold {
    /// Smallest probed `η` with a violation.
    pub eta_star: f64,
    /// Largest probed `η` without one.
    pub eta_below: f64,
    /// `−S/J` at the optimum found for `eta_star`. Equals the true threshold
    /// when the singles do not depend on the optimized parameters.
    pub closed_form: f64,
    pub probes: usize,
    pub at_threshold: ViolationResult,
}

/// Smallest detection efficiency at which the maximal violation stays
/// positive, by bisection over `[0.5, 1]`.
pub fn critical_efficiency(problem: &Problem, opts: &OptimOptions) -> Result<EfficiencyThreshold> {
    let top = maximize(&problem.with_eta(1.0), opts)?;
    if top.total() <= opts.violation_margin {
        return Err(Error::NoViolation { value: top.total() });
    }
    let mut probes = 1;
    let mut hi = 1.0;
    let mut at_hi = top;
    let mut lo = EFFICIENCY_BRACKET_LO;
    let bottom = maximize(&problem.with_eta(lo), opts)?;
    probes += 1;
    if bottom.total() > opts.violation_margin {
        hi = lo;
        at_hi = bottom;
    }
    while hi - lo > opts.threshold_tolerance {
        let mid = 0.5 * (lo + hi);
        let r = maximize(&problem.with_eta(mid), opts)?;
        probes += 1;
        if r.total() > opts.violation_margin {
            hi = mid;
            at_hi = r;
        } else {
            lo = mid;
        }
    }
    let closed_form = -at_hi.raw.single / at_hi.raw.joint;
    Ok(EfficiencyThreshold {
        eta_star: hi,
        eta_below: lo,
        closed_form,
        probes,
        at_threshold: at_hi,
    })
}

/// Outcome of the noise-threshold search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseThreshold {
    /// `CH* / (CH* − CH_noise)`.
    pub f_th: f64,
    /// Largest probed noise fraction that still violates.
    pub bisection: f64,
    pub ch_star: f64,
    pub ch_noise: f64,
    pub probes: usize,
    pub at_zero_noise: ViolationResult,
}

/// Largest admixture of white noise that preserves a violation.
pub fn noise_threshold(problem: &Problem, opts: &OptimOptions) -> Result<NoiseThreshold> {
    if !problem.scenario.is_qutrit() {
        return Err(Error::invalid("noise thresholds are defined for qutrit scenarios"));
    }
    let clean = problem.with_noise(0.0);
    let top = maximize(&clean, opts)?;
    let ch_star = top.total();
    let ch_noise = noise_reference(problem.functional, problem.scenario, &top.settings)?
        .at_efficiency(problem.eta)?
        .total;
    if ch_star <= opts.violation_margin {
        return Ok(NoiseThreshold {
            f_th: 0.0,
            bisection: 0.0,
            ch_star,
            ch_noise,
            probes: 1,
            at_zero_noise: top,
        });
    }
    if ch_noise >= 0.0 {
        return Ok(NoiseThreshold {
            f_th: 1.0,
            bisection: 1.0,
            ch_star,
            ch_noise,
            probes: 1,
            at_zero_noise: top,
        });
    }
    let f_th = ch_star / (ch_star - ch_noise);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut probes = 1;
    while hi - lo > opts.threshold_tolerance {
        let mid = 0.5 * (lo + hi);
        let r = maximize(&clean.with_noise(mid), opts)?;
        probes += 1;
        if r.total() > opts.violation_margin {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(NoiseThreshold {
        f_th,
        bisection: lo,
        ch_star,
        ch_noise,
        probes,
        at_zero_noise: top,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{ch_qubit_functional, ch_qutrit_functional};

    fn quick() -> OptimOptions {
        OptimOptions {
            multistarts: 8,
            ..OptimOptions::default()
        }
    }

    #[test]
    fn product_state_never_violates() {
        let sc = Scenario::tritter();
        let f = ch_qutrit_functional();
        let p = Problem::new(&sc, &f, Entanglement::Fixed(EntanglementParams::qutrit(0.0, 0.0)));
        let r = maximize(&p, &quick()).unwrap();
        assert!(r.total() <= 1e-9, "{}", r.total());
    }

    #[test]
    fn maximal_qubit_value() {
        let sc = Scenario::qubit();
        let f = ch_qubit_functional();
        let p = Problem::new(&sc, &f, Entanglement::Fixed(EntanglementParams::qubit(1.0)));
        let r = maximize(&p, &quick()).unwrap();
        // (√2 − 1)/2 for the maximally entangled pair.
        assert!((r.total() - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-8, "{}", r.total());
    }

    #[test]
    fn best_dominates_every_start() {
        let sc = Scenario::qubit();
        let f = ch_qubit_functional();
        let p = Problem::new(&sc, &f, Entanglement::Free).with_eta(0.9);
        let r = maximize(&p, &quick()).unwrap();
        for v in &r.start_values {
            assert!(r.total() >= v - 1e-12);
        }
        assert!(r.best_duplicates >= 1);
    }

    #[test]
    fn invalid_problems_rejected() {
        let sc = Scenario::qubit();
        let f = ch_qubit_functional();
        let p = Problem::new(&sc, &f, Entanglement::Free);
        assert!(maximize(&p.with_eta(1.5), &quick()).is_err());
        assert!(maximize(&p.with_noise(0.1), &quick()).is_err());
        let zero = OptimOptions {
            multistarts: 0,
            ..quick()
        };
        assert!(maximize(&p, &zero).is_err());
        let tritter = Scenario::tritter();
        assert!(maximize(&Problem::new(&tritter, &f, Entanglement::Free), &quick()).is_ok());
        let g = ch_qutrit_functional();
        assert!(maximize(&Problem::new(&sc, &g, Entanglement::Free), &quick()).is_err());
    }

    #[test]
    fn no_violation_means_no_threshold() {
        let sc = Scenario::tritter();
        let f = ch_qutrit_functional();
        let p = Problem::new(&sc, &f, Entanglement::Fixed(EntanglementParams::qutrit(0.0, 0.0)));
        assert!(matches!(critical_efficiency(&p, &quick()), Err(Error::NoViolation { .. })));
        let n = noise_threshold(&p, &quick()).unwrap();
        assert_eq!(n.f_th, 0.0);
    }

    #[test]
    fn starved_optimizer_fails_loudly() {
        let sc = Scenario::tritter();
        let f = ch_qutrit_functional();
        let p = Problem::new(&sc, &f, Entanglement::Free);
        let opts = OptimOptions {
            max_iterations: 3,
            ..quick()
        };
        assert!(matches!(maximize(&p, &opts), Err(Error::OptimizationFailure { .. })));
    }
}
