//! Browser bindings: single maximizations, (a, b) grids and LHV bounds.
//!
//! Each export is a thin wrapper over a plain function so the logic also
//! runs (and is tested) off the web.

use wasm_bindgen::prelude::*;

use bellthresh::bell::{lhv_max, BellFunctional};
use bellthresh::optim::{maximize, Entanglement, OptimOptions, Problem};
use bellthresh::scan::{self, ScanOptions};
use bellthresh::scenarios::{EntanglementParams, OutcomePair, Scenario};

fn scenario(kind: &str, outcomes: &str) -> Result<Scenario, String> {
    match kind {
        "tritter" => Ok(Scenario::tritter()),
        "qubit" => Ok(Scenario::qubit()),
        "biphoton" => {
            let pair: OutcomePair = outcomes.parse().map_err(|e: bellthresh::Error| e.to_string())?;
            Ok(Scenario::biphoton(pair))
        }
        other => Err(format!("unknown scenario `{other}`")),
    }
}

fn functional_for(sc: &Scenario) -> BellFunctional {
    let name = if sc.is_qutrit() { "ch-qutrit" } else { "ch-qubit" };
    BellFunctional::preset(name).expect("presets exist")
}

fn options(multistarts: u32, seed: u32) -> OptimOptions {
    OptimOptions {
        multistarts: multistarts.max(1) as usize,
        seed: u64::from(seed),
        ..Default::default()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn max_violation_json(
    kind: &str,
    outcomes: &str,
    free: bool,
    a: f64,
    b: f64,
    eta: f64,
    noise: f64,
    multistarts: u32,
    seed: u32,
) -> Result<String, String> {
    let sc = scenario(kind, outcomes)?;
    let f = functional_for(&sc);
    let entanglement = match (free, sc.is_qutrit()) {
        (true, _) => Entanglement::Free,
        (false, true) => Entanglement::Fixed(EntanglementParams::qutrit(a, b)),
        (false, false) => Entanglement::Fixed(EntanglementParams::qubit(a)),
    };
    let problem = Problem {
        scenario: &sc,
        functional: &f,
        eta,
        noise,
        entanglement,
    };
    let r = maximize(&problem, &options(multistarts, seed)).map_err(|e| e.to_string())?;
    let mut v = serde_json::to_value(&r).map_err(|e| e.to_string())?;
    v["ratio"] = serde_json::json!(r.value.ratio());
    Ok(v.to_string())
}

/// Row-major grid values, `ny` rows of `nx`.
#[allow(clippy::too_many_arguments)]
pub fn scan_values(
    kind: &str,
    outcomes: &str,
    eta: f64,
    a_lo: f64,
    a_hi: f64,
    b_lo: f64,
    b_hi: f64,
    nx: u32,
    ny: u32,
    multistarts: u32,
) -> Result<Vec<f64>, String> {
    let sc = scenario(kind, outcomes)?;
    let f = functional_for(&sc);
    let grid = scan::scan_ab(
        &sc,
        &f,
        eta,
        0.0,
        (a_lo, a_hi),
        (b_lo, b_hi),
        (nx as usize, ny as usize),
        &options(multistarts, 0),
        ScanOptions { warm_start: true },
    )
    .map_err(|e| e.to_string())?;
    Ok(grid.values)
}

/// Preset name or a term table.
pub fn lhv_bound_of(spec: &str) -> Result<f64, String> {
    let f = match BellFunctional::preset(spec.trim()) {
        Ok(f) => f,
        Err(_) => BellFunctional::from_table("custom", spec).map_err(|e| e.to_string())?,
    };
    Ok(lhv_max(&f))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn max_violation(
    kind: &str,
    outcomes: &str,
    free: bool,
    a: f64,
    b: f64,
    eta: f64,
    noise: f64,
    multistarts: u32,
    seed: u32,
) -> Result<String, JsValue> {
    max_violation_json(kind, outcomes, free, a, b, eta, noise, multistarts, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn scan_ab(
    kind: &str,
    outcomes: &str,
    eta: f64,
    a_lo: f64,
    a_hi: f64,
    b_lo: f64,
    b_hi: f64,
    nx: u32,
    ny: u32,
    multistarts: u32,
) -> Result<Vec<f64>, JsValue> {
    scan_values(kind, outcomes, eta, a_lo, a_hi, b_lo, b_hi, nx, ny, multistarts).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn lhv_bound(spec: &str) -> Result<f64, JsValue> {
    lhv_bound_of(spec).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximal_tritter() {
        let text = max_violation_json("tritter", "", false, 1.0, 1.0, 1.0, 0.0, 8, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let ch = v["value"]["total"].as_f64().unwrap();
        assert!((ch - 0.29098).abs() < 5e-4);
    }

    #[test]
    fn small_grid() {
        let values = scan_values("biphoton", "P1P2", 0.85, 0.0, 2.0, 0.0, 2.0, 3, 2, 4).unwrap();
        assert_eq!(values.len(), 6);
        assert!(values[0] <= 0.0);
    }

    #[test]
    fn bounds() {
        assert_eq!(lhv_bound_of("ch-qutrit").unwrap(), 0.0);
        assert_eq!(lhv_bound_of("joint 1 1 1 1 +1\nsingle A 1 1 +1").unwrap(), 2.0);
        assert!(lhv_bound_of("nonsense").is_err());
        assert!(scenario("biphoton", "P9P9").is_err());
    }
}
