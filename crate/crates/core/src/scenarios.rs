//! The three physical realizations: tritter qutrits, biphoton qutrits and the
//! polarization qubit baseline.
//!
//! Outcome labels follow the functional's one-based convention. For the
//! tritter, label `k` is the computational basis state `k - 1` after the
//! local unitary. For biphotons, labels 1 and 2 are the two projectors
//! selected by the [`OutcomePair`] and label 3 the remaining one. For qubits,
//! label 1 is "pass" and label 2 "fail".

use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    partial_projection_probability, probability, tensor, Operator, OperatorKind, Party, State, StateVector, C64,
};

/// Real amplitude ratios of the Schmidt-diagonal state. `b` is absent for
/// the qubit scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementParams {
    pub a: f64,
    pub b: Option<f64>,
}

impl EntanglementParams {
    pub fn qutrit(a: f64, b: f64) -> Self {
        Self { a, b: Some(b) }
    }

    pub fn qubit(a: f64) -> Self {
        Self { a, b: None }
    }
}

/// Measurement settings of both parties for the two setting indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SettingParams {
    /// Tritter phases `(φ₂, φ₃)` per setting; `φ₁` is gauged to zero.
    Phases {
        alice: [[f64; 2]; 2],
        bob: [[f64; 2]; 2],
    },
    /// Polarizer angle per setting, radians from horizontal.
    Angles { alice: [f64; 2], bob: [f64; 2] },
}

impl SettingParams {
    /// Same settings with every angle reduced into `[0, 2π)`.
    pub fn reduced(&self) -> Self {
        let r = |x: f64| x.rem_euclid(TAU);
        match *self {
            SettingParams::Phases { alice, bob } => SettingParams::Phases {
                alice: alice.map(|s| s.map(r)),
                bob: bob.map(|s| s.map(r)),
            },
            SettingParams::Angles { alice, bob } => SettingParams::Angles {
                alice: alice.map(r),
                bob: bob.map(r),
            },
        }
    }

    /// Flat coordinate vector, Alice's settings first.
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            SettingParams::Phases { alice, bob } => alice.iter().chain(bob).flatten().copied().collect(),
            SettingParams::Angles { alice, bob } => alice.iter().chain(bob).copied().collect(),
        }
    }
}

/// Which two biphoton projectors play outcome roles 1 and 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomePair {
    P1P2,
    P1P3,
    P2P3,
}

impl OutcomePair {
    /// Projector index (0-based into `(P1, P2, P3)`) for outcome labels 1, 2, 3.
    pub fn order(self) -> [usize; 3] {
        match self {
            OutcomePair::P1P2 => [0, 1, 2],
            OutcomePair::P1P3 => [0, 2, 1],
            OutcomePair::P2P3 => [1, 2, 0],
        }
    }
}

impl fmt::Display for OutcomePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OutcomePair::P1P2 => "P1P2",
            OutcomePair::P1P3 => "P1P3",
            OutcomePair::P2P3 => "P2P3",
        };
        f.write_str(s)
    }
}

impl FromStr for OutcomePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P1P2" => Ok(OutcomePair::P1P2),
            "P1P3" => Ok(OutcomePair::P1P3),
            "P2P3" => Ok(OutcomePair::P2P3),
            other => Err(Error::invalid(format!("unknown outcome pair `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    TritterQutrit,
    BiphotonQutrit(OutcomePair),
    Qubit,
}

/// Box constraint on one optimization coordinate. Periodic coordinates are
/// never clipped; the objective is invariant under a shift by the period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl ParamBound {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn project(&self, x: f64) -> f64 {
        if self.periodic {
            x
        } else {
            x.clamp(self.lo, self.hi)
        }
    }

    /// Representative of `x` inside the box (wrapping periodic coordinates).
    pub fn canonical(&self, x: f64) -> f64 {
        if self.periodic {
            self.lo + (x - self.lo).rem_euclid(self.width())
        } else {
            x.clamp(self.lo, self.hi)
        }
    }
}

/// A state family together with its measurement family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    kind: ScenarioKind,
    entanglement_bounds: (f64, f64),
}

impl Scenario {
    pub fn tritter() -> Self {
        Self {
            kind: ScenarioKind::TritterQutrit,
            entanglement_bounds: (-3.0, 3.0),
        }
    }

    pub fn biphoton(pair: OutcomePair) -> Self {
        Self {
            kind: ScenarioKind::BiphotonQutrit(pair),
            entanglement_bounds: (-3.0, 3.0),
        }
    }

    pub fn qubit() -> Self {
        Self {
            kind: ScenarioKind::Qubit,
            entanglement_bounds: (0.0, 1.5),
        }
    }

    pub fn with_entanglement_bounds(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("bad entanglement bounds [{lo}, {hi}]")));
        }
        self.entanglement_bounds = (lo, hi);
        Ok(self)
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn outcome_pair(&self) -> Option<OutcomePair> {
        match self.kind {
            ScenarioKind::BiphotonQutrit(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_qutrit(&self) -> bool {
        !matches!(self.kind, ScenarioKind::Qubit)
    }

    pub fn local_dim(&self) -> usize {
        if self.is_qutrit() {
            3
        } else {
            2
        }
    }

    pub fn n_outcomes(&self) -> usize {
        self.local_dim()
    }

    pub fn name(&self) -> String {
        match self.kind {
            ScenarioKind::TritterQutrit => "tritter".into(),
            ScenarioKind::BiphotonQutrit(p) => format!("biphoton-{p}"),
            ScenarioKind::Qubit => "qubit".into(),
        }
    }

    /// Number of free entanglement parameters (`a`, `b` or just `a`).
    pub fn n_entanglement_params(&self) -> usize {
        if self.is_qutrit() {
            2
        } else {
            1
        }
    }

    pub fn entanglement_bounds(&self) -> Vec<ParamBound> {
        let (lo, hi) = self.entanglement_bounds;
        vec![
            ParamBound {
                lo,
                hi,
                periodic: false
            };
            self.n_entanglement_params()
        ]
    }

    /// Bounds of the flat setting vector produced by [`SettingParams::to_vec`].
    pub fn setting_bounds(&self) -> Vec<ParamBound> {
        match self.kind {
            ScenarioKind::TritterQutrit => vec![
                ParamBound {
                    lo: 0.0,
                    hi: TAU,
                    periodic: true
                };
                8
            ],
            // All polarization projectors have period π in the angle.
            _ => vec![
                ParamBound {
                    lo: 0.0,
                    hi: PI,
                    periodic: true
                };
                4
            ],
        }
    }

    pub fn settings_from_slice(&self, x: &[f64]) -> Result<SettingParams> {
        let expected = self.setting_bounds().len();
        if x.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} setting coordinates, got {}",
                x.len()
            )));
        }
        Ok(match self.kind {
            ScenarioKind::TritterQutrit => SettingParams::Phases {
                alice: [[x[0], x[1]], [x[2], x[3]]],
                bob: [[x[4], x[5]], [x[6], x[7]]],
            },
            _ => SettingParams::Angles {
                alice: [x[0], x[1]],
                bob: [x[2], x[3]],
            },
        })
    }

    pub fn entanglement_from_slice(&self, x: &[f64]) -> Result<EntanglementParams> {
        match (self.is_qutrit(), x) {
            (true, [a, b]) => Ok(EntanglementParams::qutrit(*a, *b)),
            (false, [a]) => Ok(EntanglementParams::qubit(*a)),
            _ => Err(Error::invalid("wrong number of entanglement coordinates")),
        }
    }

    pub fn entanglement_to_vec(&self, p: &EntanglementParams) -> Result<Vec<f64>> {
        self.check_params(p)?;
        Ok(match p.b {
            Some(b) if self.is_qutrit() => vec![p.a, b],
            _ => vec![p.a],
        })
    }

    fn check_params(&self, p: &EntanglementParams) -> Result<()> {
        match (self.is_qutrit(), p.b) {
            (true, None) => Err(Error::invalid("qutrit scenarios need both a and b")),
            (false, Some(_)) => Err(Error::invalid("the qubit scenario takes only a")),
            _ => Ok(()),
        }
    }

    /// The entangled state of this scenario.
    pub fn state(&self, p: &EntanglementParams) -> Result<StateVector> {
        self.check_params(p)?;
        if self.is_qutrit() {
            tritter_state(p)
        } else {
            qubit_state(p.a)
        }
    }

    fn check_settings(&self, settings: &SettingParams) -> Result<()> {
        match (self.kind, settings) {
            (ScenarioKind::TritterQutrit, SettingParams::Phases { .. }) => Ok(()),
            (ScenarioKind::TritterQutrit, _) => Err(Error::invalid("tritter settings are phase vectors")),
            (_, SettingParams::Angles { .. }) => Ok(()),
            _ => Err(Error::invalid("polarization settings are angles")),
        }
    }

    /// Local measurement of `party` for zero-based setting index `setting`.
    pub fn measurement(&self, settings: &SettingParams, party: Party, setting: usize) -> Result<Measurement> {
        self.check_settings(settings)?;
        if setting > 1 {
            return Err(Error::invalid(format!("setting index {} out of range", setting + 1)));
        }
        Ok(match (*settings, self.kind) {
            (SettingParams::Phases { alice, bob }, _) => {
                let ph = match party {
                    Party::A => alice[setting],
                    Party::B => bob[setting],
                };
                Measurement::tritter([0.0, ph[0], ph[1]])
            }
            (SettingParams::Angles { alice, bob }, kind) => {
                let theta = match party {
                    Party::A => alice[setting],
                    Party::B => bob[setting],
                };
                match kind {
                    ScenarioKind::BiphotonQutrit(pair) => Measurement::biphoton(theta, pair),
                    _ => Measurement::qubit(theta),
                }
            }
        })
    }

    /// Both parties' measurements for both settings, `[party A, party B]`.
    pub fn measurements(&self, settings: &SettingParams) -> Result<[[Measurement; 2]; 2]> {
        Ok([
            [
                self.measurement(settings, Party::A, 0)?,
                self.measurement(settings, Party::A, 1)?,
            ],
            [
                self.measurement(settings, Party::B, 0)?,
                self.measurement(settings, Party::B, 1)?,
            ],
        ])
    }

    fn check_outcome(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n_outcomes() {
            Err(Error::invalid(format!(
                "outcome {k} outside 1..={} for {}",
                self.n_outcomes(),
                self.name()
            )))
        } else {
            Ok(())
        }
    }

    fn check_setting(i: usize) -> Result<()> {
        if i == 0 || i > 2 {
            Err(Error::invalid(format!("setting {i} outside 1..=2")))
        } else {
            Ok(())
        }
    }

    /// `P^{ij}(k, l)` with one-based setting and outcome labels, computed
    /// through full tensor-product projectors.
    pub fn joint_probability(
        &self,
        state: &State,
        settings: &SettingParams,
        (i, j): (usize, usize),
        (k, l): (usize, usize),
    ) -> Result<f64> {
        Self::check_setting(i)?;
        Self::check_setting(j)?;
        self.check_outcome(k)?;
        self.check_outcome(l)?;
        let pa = self.measurement(settings, Party::A, i - 1)?.projector(k - 1)?;
        let pb = self.measurement(settings, Party::B, j - 1)?.projector(l - 1)?;
        probability(state, &tensor(&pa, &pb))
    }

    /// `P^i_n(k)`: single-party marginal with one-based labels.
    pub fn single_probability(
        &self,
        state: &State,
        settings: &SettingParams,
        party: Party,
        i: usize,
        k: usize,
    ) -> Result<f64> {
        Self::check_setting(i)?;
        self.check_outcome(k)?;
        let p = self.measurement(settings, party, i - 1)?.projector(k - 1)?;
        partial_projection_probability(state, party, &p)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Complete rank-one local measurement. Each outcome is stored as a bra
/// `⟨u_k|` (conjugated components), ordered by outcome label.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    bras: Vec<Vec<C64>>,
}

impl Measurement {
    fn tritter(phases: [f64; 3]) -> Self {
        // Outcome k projects onto U†|k⟩, whose bra is row k of U.
        let u = tritter_entries(phases);
        Self {
            bras: (0..3).map(|k| u[k * 3..k * 3 + 3].to_vec()).collect(),
        }
    }

    fn biphoton(theta: f64, pair: OutcomePair) -> Self {
        let vecs = biphoton_vectors(theta);
        Self {
            bras: pair.order().iter().map(|&m| real_bra(&vecs[m])).collect(),
        }
    }

    fn qubit(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            bras: vec![real_bra(&[c, s]), real_bra(&[-s, c])],
        }
    }

    pub fn n_outcomes(&self) -> usize {
        self.bras.len()
    }

    /// Bra of zero-based outcome `k`.
    pub fn bra(&self, k: usize) -> &[C64] {
        &self.bras[k]
    }

    /// Projector of zero-based outcome `k`.
    pub fn projector(&self, k: usize) -> Result<Operator> {
        let bra = self
            .bras
            .get(k)
            .ok_or_else(|| Error::invalid(format!("outcome {} out of range", k + 1)))?;
        let ket = StateVector::new(bra.iter().map(|z| z.conj()).collect())?;
        Ok(ket.projector())
    }
}

fn real_bra(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

fn tritter_entries(phases: [f64; 3]) -> Vec<C64> {
    let scale = 1.0 / 3f64.sqrt();
    let mut out = Vec::with_capacity(9);
    for k in 0..3 {
        for (l, phase) in phases.iter().enumerate() {
            let angle = TAU / 3.0 * ((k * l) % 3) as f64 + phase;
            out.push(C64::from_polar(scale, angle));
        }
    }
    out
}

/// `U_kl = exp(i·2π/3·(k−1)(l−1)) · exp(i·φ_l) / √3`.
pub fn tritter_unitary(phases: [f64; 3]) -> Result<Operator> {
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("tritter phases must be finite"));
    }
    Operator::new(3, tritter_entries(phases), OperatorKind::Unitary)
}

/// `(|1,1⟩ + a|2,2⟩ + b|3,3⟩) / √(1 + a² + b²)` on two qutrits. Also the
/// biphoton state, with `|1⟩, |2⟩, |3⟩ = |HH⟩, |HV⟩, |VV⟩`.
pub fn tritter_state(p: &EntanglementParams) -> Result<StateVector> {
    let b = p
        .b
        .ok_or_else(|| Error::invalid("qutrit state needs both a and b"))?;
    if !(p.a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("entanglement parameters must be finite"));
    }
    let mut amps = [0.0; 9];
    amps[0] = 1.0;
    amps[4] = p.a;
    amps[8] = b;
    StateVector::from_real(&amps)
}

/// `(|0,0⟩ + a|1,1⟩) / √(1 + a²)`.
pub fn qubit_state(a: f64) -> Result<StateVector> {
    if !a.is_finite() {
        return Err(Error::invalid("entanglement parameter must be finite"));
    }
    StateVector::from_real(&[1.0, 0.0, 0.0, a])
}

/// Polarizer at angle `θ`: projectors onto `cosθ|0⟩ + sinθ|1⟩` and its
/// orthogonal complement.
pub fn qubit_projectors(theta: f64) -> Result<(Operator, Operator)> {
    let m = Measurement::qubit(theta);
    Ok((m.projector(0)?, m.projector(1)?))
}

/// Rotated biphoton basis vectors in the ordered basis `(|HH⟩, |HV⟩, |VV⟩)`:
/// both photons pass, both fail, exactly one passes.
pub fn biphoton_vectors(theta: f64) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    let cs = SQRT_2 * c * s;
    [
        [c * c, cs, s * s],
        [s * s, -cs, c * c],
        [-cs, c * c - s * s, cs],
    ]
}

/// `(P1, P2, P3)` for a polarization selection at angle `θ`.
pub fn biphoton_projectors(theta: f64) -> Result<(Operator, Operator, Operator)> {
    if !theta.is_finite() {
        return Err(Error::invalid("polarizer angle must be finite"));
    }
    let v = biphoton_vectors(theta);
    let p = |x: &[f64; 3]| StateVector::from_real(x).map(|s| s.projector());
    Ok((p(&v[0])?, p(&v[1])?, p(&v[2])?))
}

/// `(1 − F)|ψ⟩⟨ψ| + F·I/dim`.
pub fn mix_with_noise(state: &StateVector, noise: f64) -> Result<Operator> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::invalid(format!("noise fraction {noise} outside [0, 1]")));
    }
    let pure = state.density();
    let mixed = pure.combine(1.0 - noise, &Operator::maximally_mixed(state.dim()), noise)?;
    mixed.with_kind(OperatorKind::Density)
}
