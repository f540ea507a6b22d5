//! Bell functionals as signed term tables.
//!
//! A functional is a signed sum of joint probabilities `P^{ij}(k,l)` and
//! single-party probabilities `P^i_n(k)`, all labels one-based. Its value
//! splits into a joint part `J` and a single part `S`. Under finite detection
//! efficiency `η` with undetected events discarded, joint terms scale with
//! `η²` and single terms with `η`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{clamp_probability, Operator, Party, State, StateVector, C64};
use crate::scenarios::{mix_with_noise, Measurement, Scenario, SettingParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointTerm {
    pub settings: (usize, usize),
    pub outcomes: (usize, usize),
    pub sign: i8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleTerm {
    pub party: Party,
    pub setting: usize,
    pub outcome: usize,
    pub sign: i8,
}

const fn joint(i: usize, j: usize, k: usize, l: usize, sign: i8) -> JointTerm {
    JointTerm {
        settings: (i, j),
        outcomes: (k, l),
        sign,
    }
}

const fn single(party: Party, setting: usize, outcome: usize, sign: i8) -> SingleTerm {
    SingleTerm {
        party,
        setting,
        outcome,
        sign,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    name: String,
    joint_terms: Vec<JointTerm>,
    single_terms: Vec<SingleTerm>,
    n_settings: usize,
    n_outcomes: usize,
    lhv_bound: f64,
}

impl BellFunctional {
    pub fn new(
        name: impl Into<String>,
        joint_terms: Vec<JointTerm>,
        single_terms: Vec<SingleTerm>,
        n_settings: usize,
        n_outcomes: usize,
        lhv_bound: f64,
    ) -> Result<Self> {
        if joint_terms.is_empty() || single_terms.is_empty() {
            return Err(Error::invalid("functional needs joint and single terms"));
        }
        if n_settings == 0 || n_outcomes == 0 {
            return Err(Error::invalid("functional needs at least one setting and outcome"));
        }
        let setting_ok = |i: usize| (1..=n_settings).contains(&i);
        let outcome_ok = |k: usize| (1..=n_outcomes).contains(&k);
        let sign_ok = |s: i8| s == 1 || s == -1;
        for t in &joint_terms {
            if !(setting_ok(t.settings.0)
                && setting_ok(t.settings.1)
                && outcome_ok(t.outcomes.0)
                && outcome_ok(t.outcomes.1)
                && sign_ok(t.sign))
            {
                return Err(Error::invalid(format!("joint term {t:?} out of range")));
            }
        }
        for t in &single_terms {
            if !(setting_ok(t.setting) && outcome_ok(t.outcome) && sign_ok(t.sign)) {
                return Err(Error::invalid(format!("single term {t:?} out of range")));
            }
        }
        if !lhv_bound.is_finite() {
            return Err(Error::invalid("LHV bound must be finite"));
        }
        Ok(Self {
            name: name.into(),
            joint_terms,
            single_terms,
            n_settings,
            n_outcomes,
            lhv_bound,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joint_terms(&self) -> &[JointTerm] {
        &self.joint_terms
    }

    pub fn single_terms(&self) -> &[SingleTerm] {
        &self.single_terms
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn lhv_bound(&self) -> f64 {
        self.lhv_bound
    }

    /// Built-in functional by preset name (`ch-qutrit`, `ch-qubit`).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "ch-qutrit" => Ok(ch_qutrit_functional()),
            "ch-qubit" => Ok(ch_qubit_functional()),
            "ch-qutrit-as-printed" => Ok(ch_qutrit_as_printed()),
            other => Err(Error::invalid(format!("unknown functional preset `{other}`"))),
        }
    }

    /// Parses a term table, one term per line:
    ///
    /// ```text
    /// # comment
    /// joint i j k l sign      P^{ij}(k,l)
    /// single party i k sign   party is A or B
    /// bound 0                 optional LHV bound, default 0
    /// ```
    ///
    /// Signs are `+1`/`-1` (or `+`/`-`). The outcome count is the largest
    /// outcome label used, at least 2.
    pub fn from_table(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut joint_terms = Vec::new();
        let mut single_terms = Vec::new();
        let mut bound = 0.0;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::invalid(format!("line {}: {what}: `{}`", n + 1, raw.trim()));
            let words: Vec<&str> = line.split_whitespace().collect();
            let index = |w: &str| w.parse::<usize>().map_err(|_| bad("expected a positive integer"));
            let sign = |w: &str| match w {
                "+1" | "1" | "+" => Ok(1i8),
                "-1" | "-" => Ok(-1i8),
                _ => Err(bad("sign must be +1 or -1")),
            };
            match words.as_slice() {
                ["joint", i, j, k, l, sg] => {
                    joint_terms.push(joint(index(i)?, index(j)?, index(k)?, index(l)?, sign(sg)?));
                }
                ["single", party, i, k, sg] => {
                    let party = match party.to_ascii_uppercase().as_str() {
                        "A" | "1" => Party::A,
                        "B" | "2" => Party::B,
                        _ => return Err(bad("party must be A or B")),
                    };
                    single_terms.push(single(party, index(i)?, index(k)?, sign(sg)?));
                }
                ["bound", v] => bound = v.parse().map_err(|_| bad("bound must be a number"))?,
                _ => return Err(bad("unrecognized term")),
            }
        }
        let n_outcomes = joint_terms
            .iter()
            .flat_map(|t| [t.outcomes.0, t.outcomes.1])
            .chain(single_terms.iter().map(|t| t.outcome))
            .max()
            .unwrap_or(0)
            .max(2);
        Self::new(name, joint_terms, single_terms, 2, n_outcomes, bound)
    }

    /// Checks that the functional's labels exist in `sc`.
    pub fn check_compatible(&self, sc: &Scenario) -> Result<()> {
        if self.n_settings != 2 {
            return Err(Error::invalid("scenarios provide exactly two settings per party"));
        }
        if self.n_outcomes > sc.n_outcomes() {
            return Err(Error::invalid(format!(
                "functional `{}` uses {} outcomes but {} has {}",
                self.name,
                self.n_outcomes,
                sc,
                sc.n_outcomes()
            )));
        }
        Ok(())
    }

    /// Unvalidated `(J, S)` from prepared measurements. This is the hot path
    /// of the optimizer; [`evaluate`] adds range checks on every probability.
    pub fn raw_parts(&self, state: &State, local_dim: usize, meas: &[[Measurement; 2]; 2]) -> (f64, f64) {
        let mut j = 0.0;
        for t in &self.joint_terms {
            let ma = &meas[0][t.settings.0 - 1];
            let mb = &meas[1][t.settings.1 - 1];
            let p = state.product_bra_expectation(ma.bra(t.outcomes.0 - 1), mb.bra(t.outcomes.1 - 1));
            j += f64::from(t.sign) * p;
        }
        let reduced = [
            state.reduced(Party::A, local_dim).ok(),
            state.reduced(Party::B, local_dim).ok(),
        ];
        let mut s = 0.0;
        for t in &self.single_terms {
            let idx = party_index(t.party);
            let rho = reduced[idx].as_ref().expect("local dimension divides state dimension");
            let p = bra_expectation(rho, meas[idx][t.setting - 1].bra(t.outcome - 1));
            s += f64::from(t.sign) * p;
        }
        (j, s)
    }
}

impl fmt::Display for BellFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn party_index(p: Party) -> usize {
    match p {
        Party::A => 0,
        Party::B => 1,
    }
}

/// `⟨u|ρ|u⟩` for a bra `⟨u|`.
fn bra_expectation(rho: &Operator, bra: &[C64]) -> f64 {
    let n = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for (r, br) in bra.iter().enumerate().take(n) {
        let mut row = C64::new(0.0, 0.0);
        for (c, bc) in bra.iter().enumerate().take(n) {
            row += rho.get(r, c) * bc.conj();
        }
        acc += br * row;
    }
    acc.re
}

/// Corrected qutrit Clauser-Horne functional.
///
/// Three lines of four joint terms with signs `(+, +, −, +)`, minus Alice's
/// setting-1 singles and Bob's setting-2 singles for outcomes 1 and 2. The
/// commonly printed form repeats `P²²(2,1)` in the third line; that table is
/// not bounded by zero for local models (see [`ch_qutrit_as_printed`]). The
/// third line here closes with `P²²(2,2)`.
pub fn ch_qutrit_functional() -> BellFunctional {
    let joint_terms = vec![
        joint(1, 1, 2, 1, 1),
        joint(1, 2, 2, 1, 1),
        joint(2, 1, 2, 1, -1),
        joint(2, 2, 2, 1, 1),
        joint(1, 1, 1, 2, 1),
        joint(1, 2, 1, 2, 1),
        joint(2, 1, 1, 2, -1),
        joint(2, 2, 1, 2, 1),
        joint(1, 1, 2, 2, 1),
        joint(1, 2, 1, 1, 1),
        joint(2, 1, 2, 2, -1),
        joint(2, 2, 2, 2, 1),
    ];
    BellFunctional::new("ch-qutrit", joint_terms, qutrit_singles(), 2, 3, 0.0).expect("preset is well formed")
}

/// The qutrit table exactly as usually printed, with `P²²(2,1)` twice.
/// Kept for comparison only: its deterministic local maximum is 1, not 0.
pub fn ch_qutrit_as_printed() -> BellFunctional {
    let mut f = ch_qutrit_functional();
    f.name = "ch-qutrit-as-printed".into();
    f.joint_terms[11] = joint(2, 2, 2, 1, 1);
    f.lhv_bound = 1.0;
    f
}

fn qutrit_singles() -> Vec<SingleTerm> {
    vec![
        single(Party::A, 1, 1, -1),
        single(Party::A, 1, 2, -1),
        single(Party::B, 2, 1, -1),
        single(Party::B, 2, 2, -1),
    ]
}

/// Two-setting qubit Clauser-Horne sum on the (pass, pass) outcome:
/// `p(1,1) − p(1,2) + p(2,1) + p(2,2) − p_A(2) − p_B(1)`.
pub fn ch_qubit_functional() -> BellFunctional {
    let joint_terms = vec![
        joint(1, 1, 1, 1, 1),
        joint(1, 2, 1, 1, -1),
        joint(2, 1, 1, 1, 1),
        joint(2, 2, 1, 1, 1),
    ];
    let single_terms = vec![single(Party::A, 2, 1, -1), single(Party::B, 1, 1, -1)];
    BellFunctional::new("ch-qubit", joint_terms, single_terms, 2, 2, 0.0).expect("preset is well formed")
}

/// Functional value with its joint / single decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellValue {
    pub total: f64,
    pub joint: f64,
    pub single: f64,
}

impl BellValue {
    pub fn from_parts(joint: f64, single: f64) -> Self {
        Self {
            total: joint + single,
            joint,
            single,
        }
    }

    /// `|S| / J`, the share of the joint part eaten by the singles.
    pub fn ratio(&self) -> Option<f64> {
        (self.joint > 0.0).then(|| self.single.abs() / self.joint)
    }

    /// Parts rescaled to detection efficiency `η` (`η²·J`, `η·S`).
    pub fn at_efficiency(&self, eta: f64) -> Result<BellValue> {
        check_efficiency(eta)?;
        Ok(BellValue::from_parts(eta * eta * self.joint, eta * self.single))
    }
}

fn check_efficiency(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::invalid(format!("detection efficiency {eta} outside [0, 1]")))
    }
}

/// Evaluates `f` on `state` with every probability range-checked.
pub fn evaluate(f: &BellFunctional, sc: &Scenario, state: &State, settings: &SettingParams) -> Result<BellValue> {
    f.check_compatible(sc)?;
    let d = sc.local_dim();
    if state.dim() != d * d {
        return Err(Error::invalid(format!(
            "state of dimension {} does not fit scenario {sc}",
            state.dim()
        )));
    }
    let meas = sc.measurements(settings)?;
    let mut j = 0.0;
    for t in &f.joint_terms {
        let ma = &meas[0][t.settings.0 - 1];
        let mb = &meas[1][t.settings.1 - 1];
        let p = clamp_probability(state.product_bra_expectation(ma.bra(t.outcomes.0 - 1), mb.bra(t.outcomes.1 - 1)))?;
        j += f64::from(t.sign) * p;
    }
    let reduced = [state.reduced(Party::A, d)?, state.reduced(Party::B, d)?];
    let mut s = 0.0;
    for t in &f.single_terms {
        let idx = party_index(t.party);
        let p = clamp_probability(bra_expectation(&reduced[idx], meas[idx][t.setting - 1].bra(t.outcome - 1)))?;
        s += f64::from(t.sign) * p;
    }
    Ok(BellValue::from_parts(j, s))
}

/// `η²·J + η·S`.
pub fn value_at_efficiency(v: &BellValue, eta: f64) -> Result<f64> {
    Ok(v.at_efficiency(eta)?.total)
}

/// Value on `(1 − F)|ψ⟩⟨ψ| + F·I/d²`, evaluated on the mixed state.
pub fn value_at_noise(
    f: &BellFunctional,
    sc: &Scenario,
    psi: &StateVector,
    settings: &SettingParams,
    noise: f64,
) -> Result<f64> {
    let rho = mix_with_noise(psi, noise)?;
    Ok(evaluate(f, sc, &State::mixed(rho)?, settings)?.total)
}

/// Value on the maximally mixed state. Independent of the settings for
/// complete local measurements.
pub fn noise_reference(f: &BellFunctional, sc: &Scenario, settings: &SettingParams) -> Result<BellValue> {
    let d = sc.local_dim();
    evaluate(f, sc, &State::mixed(Operator::maximally_mixed(d * d))?, settings)
}

/// Maximum of `f` over deterministic local strategies.
///
/// A strategy fixes one outcome per party per setting; the functional is
/// linear in the local response functions, so this is the maximum over all
/// local hidden variable models.
pub fn lhv_max(f: &BellFunctional) -> f64 {
    let strategies = f.n_outcomes.pow(f.n_settings as u32);
    let decode = |code: usize| -> Vec<usize> {
        let mut c = code;
        (0..f.n_settings)
            .map(|_| {
                let k = c % f.n_outcomes + 1;
                c /= f.n_outcomes;
                k
            })
            .collect()
    };
    let mut best = f64::NEG_INFINITY;
    for ca in 0..strategies {
        let alice = decode(ca);
        for cb in 0..strategies {
            let bob = decode(cb);
            let mut v = 0i64;
            for t in &f.joint_terms {
                if alice[t.settings.0 - 1] == t.outcomes.0 && bob[t.settings.1 - 1] == t.outcomes.1 {
                    v += i64::from(t.sign);
                }
            }
            for t in &f.single_terms {
                let out = match t.party {
                    Party::A => alice[t.setting - 1],
                    Party::B => bob[t.setting - 1],
                };
                if out == t.outcome {
                    v += i64::from(t.sign);
                }
            }
            best = best.max(v as f64);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::EntanglementParams;

    #[test]
    fn table_round_trips_the_qubit_preset() {
        let text = "# qubit CH\njoint 1 1 1 1 +1\njoint 1 2 1 1 -1\njoint 2 1 1 1 +1\njoint 2 2 1 1 +1\nsingle A 2 1 -1\nsingle B 1 1 -1\n";
        let f = BellFunctional::from_table("custom", text).unwrap();
        let g = ch_qubit_functional();
        assert_eq!(f.joint_terms(), g.joint_terms());
        assert_eq!(f.single_terms(), g.single_terms());
        assert_eq!(f.n_outcomes(), 2);
        assert_eq!(lhv_max(&f), 0.0);
    }

    #[test]
    fn table_errors_name_the_line() {
        let err = BellFunctional::from_table("x", "joint 1 1 1 1 +1\nsingle C 1 1 -1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(BellFunctional::from_table("x", "joint 1 1 1 1 2\nsingle A 1 1 -1").is_err());
        assert!(BellFunctional::from_table("x", "joint 1 1 1 1 +1").is_err());
        assert!(BellFunctional::from_table("x", "joint 3 1 1 1 +1\nsingle A 1 1 -1").is_err());
    }
    use approx::assert_abs_diff_eq;

    #[test]
    fn qutrit_term_counts() {
        let f = ch_qutrit_functional();
        assert_eq!(f.joint_terms().len(), 12);
        assert_eq!(f.single_terms().len(), 4);
        let signs: Vec<i8> = f.joint_terms().iter().map(|t| t.sign).collect();
        assert_eq!(signs, [1, 1, -1, 1, 1, 1, -1, 1, 1, 1, -1, 1]);
    }

    #[test]
    fn lhv_bounds_of_presets() {
        assert_eq!(lhv_max(&ch_qutrit_functional()), 0.0);
        assert_eq!(lhv_max(&ch_qubit_functional()), 0.0);
        assert_eq!(lhv_max(&ch_qutrit_as_printed()), 1.0);
    }

    #[test]
    fn all_positive_functional_has_positive_lhv_max() {
        let f = BellFunctional::new(
            "pos",
            vec![joint(1, 1, 1, 1, 1), joint(2, 2, 2, 2, 1)],
            vec![single(Party::A, 1, 1, 1)],
            2,
            2,
            0.0,
        )
        .unwrap();
        assert_eq!(lhv_max(&f), 3.0);
    }

    #[test]
    fn maximally_mixed_qutrit_value() {
        let sc = crate::scenarios::Scenario::tritter();
        let settings = sc.settings_from_slice(&[0.3, 1.1, 2.0, -0.4, 0.9, 0.0, 5.0, 1.0]).unwrap();
        let v = noise_reference(&ch_qutrit_functional(), &sc, &settings).unwrap();
        assert_abs_diff_eq!(v.joint, 6.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.single, -4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.total, -2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn maximally_mixed_qubit_value() {
        let sc = crate::scenarios::Scenario::qubit();
        let settings = sc.settings_from_slice(&[0.1, 0.7, 1.3, 2.9]).unwrap();
        let v = noise_reference(&ch_qubit_functional(), &sc, &settings).unwrap();
        assert_abs_diff_eq!(v.joint, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(v.single, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.total, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn efficiency_scaling() {
        let v = BellValue::from_parts(1.7, -1.3);
        assert_eq!(value_at_efficiency(&v, 1.0).unwrap(), v.total);
        assert_eq!(value_at_efficiency(&v, 0.0).unwrap(), 0.0);
        assert!(value_at_efficiency(&v, 1.01).is_err());
        assert!(value_at_efficiency(&v, -0.1).is_err());
    }

    #[test]
    fn closed_form_efficiency_root_for_maximal_tritter() {
        // η²J + ηS = 0 with S pinned at −4/3.
        let joint = 0.29098 + 4.0 / 3.0;
        let eta = (4.0 / 3.0) / joint;
        assert_abs_diff_eq!(eta, 0.82086, epsilon = 1e-5);
        let v = BellValue::from_parts(joint, -4.0 / 3.0);
        assert_abs_diff_eq!(value_at_efficiency(&v, eta).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn qubit_functional_on_qutrit_scenario_is_allowed_but_not_vice_versa() {
        let qutrit = ch_qutrit_functional();
        assert!(qutrit.check_compatible(&crate::scenarios::Scenario::qubit()).is_err());
        assert!(ch_qubit_functional()
            .check_compatible(&crate::scenarios::Scenario::tritter())
            .is_ok());
    }

    #[test]
    fn malformed_tables_rejected() {
        assert!(BellFunctional::new("x", vec![joint(3, 1, 1, 1, 1)], vec![single(Party::A, 1, 1, -1)], 2, 3, 0.0).is_err());
        assert!(BellFunctional::new("x", vec![joint(1, 1, 1, 1, 2)], vec![single(Party::A, 1, 1, -1)], 2, 3, 0.0).is_err());
        assert!(BellFunctional::new("x", vec![], vec![single(Party::A, 1, 1, -1)], 2, 3, 0.0).is_err());
    }

    #[test]
    fn singles_pinned_for_tritter_states() {
        let sc = crate::scenarios::Scenario::tritter();
        let psi: State = sc.state(&EntanglementParams::qutrit(1.0, 1.0)).unwrap().into();
        let settings = sc.settings_from_slice(&[0.5, 2.5, 1.0, 4.0, 3.0, 0.1, 0.2, 0.3]).unwrap();
        let v = evaluate(&ch_qutrit_functional(), &sc, &psi, &settings).unwrap();
        assert_abs_diff_eq!(v.single, -4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.total - (v.joint + v.single), 0.0, epsilon = 1e-15);
    }
}
