use bellthresh::bell::{ch_qubit_functional, ch_qutrit_functional};
use bellthresh::optim::{critical_efficiency, maximize, noise_threshold, Entanglement, OptimOptions, Problem};
use bellthresh::scan::{default_scan_options, scan_ab, ScanOptions};
use bellthresh::scenarios::{EntanglementParams, OutcomePair, Scenario};
use bellthresh::Error;

fn maximal() -> Entanglement {
    Entanglement::Fixed(EntanglementParams::qutrit(1.0, 1.0))
}

#[test]
fn free_parameters_never_lose_to_the_maximal_state() {
    let f = ch_qutrit_functional();
    let opts = OptimOptions::default();
    for sc in [
        Scenario::tritter(),
        Scenario::biphoton(OutcomePair::P1P2),
        Scenario::biphoton(OutcomePair::P2P3),
    ] {
        for eta in [1.0, 0.9] {
            let fixed = maximize(&Problem::new(&sc, &f, maximal()).with_eta(eta), &opts).unwrap();
            let free = maximize(&Problem::new(&sc, &f, Entanglement::Free).with_eta(eta), &opts).unwrap();
            assert!(free.total() >= fixed.total() - 1e-9, "{sc} eta={eta}: {} < {}", free.total(), fixed.total());
        }
    }
}

#[test]
fn sign_changes_once_around_the_threshold() {
    let f = ch_qutrit_functional();
    let sc = Scenario::tritter();
    let problem = Problem::new(&sc, &f, maximal());
    let opts = OptimOptions::default();
    let e = critical_efficiency(&problem, &opts).unwrap();
    let signs: Vec<bool> = (0..9)
        .map(|i| {
            let eta = e.eta_star - 0.02 + 0.005 * i as f64;
            maximize(&problem.with_eta(eta), &opts).unwrap().total() > opts.violation_margin
        })
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(changes, 1, "{signs:?}");
    assert!(!signs[0] && signs[8]);
    // Singles do not depend on the settings here, so -S/J is exact.
    assert!((e.closed_form - e.eta_star).abs() < 1e-6);
}

#[test]
fn no_violation_cases() {
    let f = ch_qutrit_functional();
    let sc = Scenario::tritter();
    let product = Entanglement::Fixed(EntanglementParams::qutrit(0.0, 0.0));
    let opts = OptimOptions {
        multistarts: 8,
        ..Default::default()
    };
    let err = critical_efficiency(&Problem::new(&sc, &f, product), &opts).unwrap_err();
    assert!(matches!(err, Error::NoViolation { .. }));
    let n = noise_threshold(&Problem::new(&sc, &f, product), &opts).unwrap();
    assert_eq!(n.f_th, 0.0);
    let q = Scenario::qubit();
    let g = ch_qubit_functional();
    assert!(noise_threshold(&Problem::new(&q, &g, Entanglement::Free), &opts).is_err());
}

#[test]
fn tritter_grid_is_symmetric_and_peaks_away_from_the_maximal_state() {
    let f = ch_qutrit_functional();
    let sc = Scenario::tritter();
    let opts = default_scan_options();
    let grid = scan_ab(&sc, &f, 0.85, 0.0, (0.0, 3.0), (0.0, 3.0), (7, 7), &opts, ScanOptions::default()).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            assert!((grid.get(i, j) - grid.get(j, i)).abs() < 1e-6, "({i},{j})");
        }
    }
    assert!(grid.get(0, 0) <= 0.0);
    let at_one = grid.at(1.0, 1.0);
    let (_, _, best) = grid.max();
    assert!(at_one > 0.0 && at_one < best, "{at_one} vs {best}");
}

#[test]
fn warm_start_agrees_with_independent_nodes() {
    let f = ch_qutrit_functional();
    let sc = Scenario::biphoton(OutcomePair::P1P2);
    let opts = default_scan_options();
    let cold = scan_ab(&sc, &f, 0.85, 0.0, (0.5, 2.0), (0.5, 2.0), (4, 3), &opts, ScanOptions::default()).unwrap();
    let warm =
        scan_ab(&sc, &f, 0.85, 0.0, (0.5, 2.0), (0.5, 2.0), (4, 3), &opts, ScanOptions { warm_start: true }).unwrap();
    for (c, w) in cold.values.iter().zip(&warm.values) {
        assert!(w >= &(c - 1e-7), "{w} < {c}");
    }
}
