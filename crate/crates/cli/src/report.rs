//! Aligned `label  value` text output, six significant digits.

use std::fmt;

use bellthresh::optim::{Entanglement, ViolationResult};
use bellthresh::scenarios::SettingParams;

use crate::config::RunConfig;

/// Six significant digits; scientific notation outside `[1e-4, 1e6)`.
pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|&x| sig(x)).collect::<Vec<_>>().join(", ")
}

#[derive(Default)]
pub struct Table {
    rows: Vec<(String, String)>,
}

impl Table {
    pub fn header(run: &RunConfig) -> Self {
        let mut t = Table::default();
        t.row("scenario", run.scenario.name());
        t.row("functional", run.functional.name().to_string());
        t.num("eta", run.eta);
        if run.scenario.is_qutrit() {
            t.num("noise", run.noise);
        }
        let ent = match run.entanglement {
            Entanglement::Fixed(_) => "fixed",
            Entanglement::Free => "free",
        };
        t.row("entanglement", ent.into());
        t.row("seed", run.options.seed.to_string());
        t
    }

    pub fn row(&mut self, label: &str, value: String) {
        self.rows.push((label.to_string(), value));
    }

    pub fn num(&mut self, label: &str, x: f64) {
        self.row(label, sig(x));
    }

    pub fn violation(&mut self, r: &ViolationResult) {
        self.num("CH", r.value.total);
        self.num("J", r.value.joint);
        self.num("S", r.value.single);
        match r.value.ratio() {
            Some(q) => self.num("|S|/J", q),
            None => self.row("|S|/J", "undefined (J <= 0)".into()),
        }
        let ent = match r.entanglement.b {
            Some(b) => format!("a={}, b={}", sig(r.entanglement.a), sig(b)),
            None => format!("a={}", sig(r.entanglement.a)),
        };
        self.row("state", ent);
        match r.settings {
            SettingParams::Phases { alice, bob } => {
                for (party, s) in [("alice", alice), ("bob", bob)] {
                    for (i, ph) in s.iter().enumerate() {
                        self.row(&format!("{party} phases {} (phi2, phi3)", i + 1), list(ph));
                    }
                }
            }
            SettingParams::Angles { alice, bob } => {
                self.row("alice angles", list(&alice));
                self.row("bob angles", list(&bob));
            }
        }
        self.row(
            "starts",
            format!(
                "{} ({} converged, best reached by {}, best start #{})",
                r.starts, r.starts_converged, r.best_duplicates, r.best_start
            ),
        );
        self.row("evaluations", r.evaluations.to_string());
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        for (label, value) in &self.rows {
            writeln!(f, "{label:<width$}  {value}")?;
        }
        Ok(())
    }
}
