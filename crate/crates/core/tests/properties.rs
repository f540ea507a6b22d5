use std::f64::consts::TAU;

use bellthresh::bell::{
    ch_qubit_functional, ch_qutrit_functional, evaluate, lhv_max, noise_reference, value_at_noise, BellFunctional,
};
use bellthresh::optim::{maximize, Entanglement, OptimOptions, Problem};
use bellthresh::qcore::{tensor, Operator, Party, State, StateVector, C64};
use bellthresh::scenarios::{
    biphoton_projectors, mix_with_noise, EntanglementParams, OutcomePair, Scenario, SettingParams,
};
use proptest::prelude::*;

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    prop_oneof![
        Just(Scenario::tritter()),
        Just(Scenario::biphoton(OutcomePair::P1P2)),
        Just(Scenario::biphoton(OutcomePair::P1P3)),
        Just(Scenario::biphoton(OutcomePair::P2P3)),
        Just(Scenario::qubit()),
    ]
}

fn functional_for(sc: &Scenario) -> BellFunctional {
    if sc.is_qutrit() {
        ch_qutrit_functional()
    } else {
        ch_qubit_functional()
    }
}

fn settings_from(sc: &Scenario, raw: &[f64; 8]) -> SettingParams {
    let n = sc.setting_bounds().len();
    sc.settings_from_slice(&raw[..n]).unwrap()
}

fn params_from(sc: &Scenario, a: f64, b: f64) -> EntanglementParams {
    if sc.is_qutrit() {
        EntanglementParams::qutrit(a, b)
    } else {
        EntanglementParams::qubit(a)
    }
}

fn complex_vec(dim: usize) -> impl Strategy<Value = Vec<C64>> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim)
        .prop_filter("non-zero", |v| v.iter().map(|(r, i)| r * r + i * i).sum::<f64>() > 1e-3)
        .prop_map(|v| v.into_iter().map(|(r, i)| C64::new(r, i)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn joint_probabilities_are_normalized(
        sc in scenario_strategy(),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        raw in proptest::array::uniform8(0.0..TAU),
        noise in 0.0..1.0f64,
    ) {
        let settings = settings_from(&sc, &raw);
        let psi = sc.state(&params_from(&sc, a, b)).unwrap();
        let state = if sc.is_qutrit() {
            State::mixed(mix_with_noise(&psi, noise).unwrap()).unwrap()
        } else {
            State::Pure(psi)
        };
        let n = sc.n_outcomes();
        for i in 1..=2 {
            for j in 1..=2 {
                let mut total = 0.0;
                for k in 1..=n {
                    let mut row = 0.0;
                    for l in 1..=n {
                        let p = sc.joint_probability(&state, &settings, (i, j), (k, l)).unwrap();
                        prop_assert!((0.0..=1.0).contains(&p));
                        row += p;
                    }
                    let marginal = sc.single_probability(&state, &settings, Party::A, i, k).unwrap();
                    prop_assert!((row - marginal).abs() < 1e-10);
                    total += row;
                }
                prop_assert!((total - 1.0).abs() < 1e-10, "sum {}", total);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn biphoton_projectors_are_complete_and_orthogonal(theta in -10.0..10.0f64) {
        let (p1, p2, p3) = biphoton_projectors(theta).unwrap();
        let ps = [&p1, &p2, &p3];
        let sum = p1.combine(1.0, &p2, 1.0).unwrap().combine(1.0, &p3, 1.0).unwrap();
        prop_assert!(sum.max_abs_diff(&Operator::identity(3)) < 1e-12);
        for (x, px) in ps.iter().enumerate() {
            prop_assert!(px.is_projector(1e-12));
            for py in ps.iter().skip(x + 1) {
                let prod = px.matmul(py).unwrap();
                prop_assert!(prod.entries().iter().all(|z| z.norm() < 1e-12));
            }
        }
    }

    #[test]
    fn value_is_linear_in_noise(
        sc in scenario_strategy().prop_filter("qutrit", |s| s.is_qutrit()),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        raw in proptest::array::uniform8(0.0..TAU),
        noise in 0.0..1.0f64,
    ) {
        let f = functional_for(&sc);
        let settings = settings_from(&sc, &raw);
        let psi = sc.state(&params_from(&sc, a, b)).unwrap();
        let clean = evaluate(&f, &sc, &State::Pure(psi.clone()), &settings).unwrap().total;
        let reference = noise_reference(&f, &sc, &settings).unwrap().total;
        prop_assert!((reference + 2.0 / 3.0).abs() < 1e-12);
        let noisy = value_at_noise(&f, &sc, &psi, &settings, noise).unwrap();
        prop_assert!((noisy - ((1.0 - noise) * clean + noise * reference)).abs() < 1e-12);
    }

    #[test]
    fn value_is_quadratic_in_efficiency(
        sc in scenario_strategy(),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        raw in proptest::array::uniform8(0.0..TAU),
        eta in 0.0..1.0f64,
    ) {
        let f = functional_for(&sc);
        let settings = settings_from(&sc, &raw);
        let psi = sc.state(&params_from(&sc, a, b)).unwrap();
        let v = evaluate(&f, &sc, &State::Pure(psi), &settings).unwrap();
        let at = |e: f64| v.at_efficiency(e).unwrap().total;
        let (y0, yh, y1) = (at(0.0), at(0.5), at(1.0));
        // Lagrange basis on {0, 1/2, 1}.
        let lagrange = y0 * (eta - 0.5) * (eta - 1.0) / 0.5
            - yh * eta * (eta - 1.0) / 0.25
            + y1 * eta * (eta - 0.5) / 0.5;
        prop_assert!((lagrange - at(eta)).abs() < 1e-12);
    }

    #[test]
    fn product_states_never_violate(
        qutrit in any::<bool>(),
        pair in prop_oneof![Just(OutcomePair::P1P2), Just(OutcomePair::P1P3), Just(OutcomePair::P2P3)],
        biphoton in any::<bool>(),
        u in complex_vec(3),
        v in complex_vec(3),
        raw in proptest::array::uniform8(0.0..TAU),
        eta in 0.0..1.0f64,
    ) {
        let sc = match (qutrit, biphoton) {
            (true, true) => Scenario::biphoton(pair),
            (true, false) => Scenario::tritter(),
            (false, _) => Scenario::qubit(),
        };
        let d = sc.local_dim();
        let f = functional_for(&sc);
        let settings = settings_from(&sc, &raw);
        let psi = tensor(&StateVector::new(u[..d].to_vec()).unwrap(), &StateVector::new(v[..d].to_vec()).unwrap());
        let value = evaluate(&f, &sc, &State::Pure(psi), &settings).unwrap();
        prop_assert!(value.at_efficiency(eta).unwrap().total <= f.lhv_bound() + 1e-9);
    }

    #[test]
    fn tensor_product_is_associative(
        x in complex_vec(2),
        y in complex_vec(3),
        z in complex_vec(2),
    ) {
        let (x, y, z) = (
            StateVector::new(x).unwrap(),
            StateVector::new(y).unwrap(),
            StateVector::new(z).unwrap(),
        );
        let left = tensor(&tensor(&x, &y), &z);
        let right = tensor(&x, &tensor(&y, &z));
        for (l, r) in left.amps().iter().zip(right.amps()) {
            prop_assert!((l - r).norm() < 1e-14);
        }
        let (px, py, pz) = (x.projector(), y.projector(), z.projector());
        let lo = tensor(&tensor(&px, &py), &pz);
        let ro = tensor(&px, &tensor(&py, &pz));
        prop_assert!(lo.max_abs_diff(&ro) < 1e-14);
    }

    #[test]
    fn lhv_bound_ignores_term_order(seed in any::<u64>(), qutrit in any::<bool>()) {
        let f = if qutrit { ch_qutrit_functional() } else { ch_qubit_functional() };
        let mut joint = f.joint_terms().to_vec();
        let mut single = f.single_terms().to_vec();
        // Fisher-Yates driven by a splitmix sequence.
        let mut s = seed;
        let mut next = |n: usize| {
            s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            ((z ^ (z >> 31)) % n as u64) as usize
        };
        for i in (1..joint.len()).rev() {
            joint.swap(i, next(i + 1));
        }
        for i in (1..single.len()).rev() {
            single.swap(i, next(i + 1));
        }
        let g = BellFunctional::new("shuffled", joint, single, f.n_settings(), f.n_outcomes(), f.lhv_bound()).unwrap();
        prop_assert_eq!(lhv_max(&g), lhv_max(&f));
    }
}

#[test]
fn lhv_maximum_is_zero_for_presets() {
    assert_eq!(lhv_max(&ch_qutrit_functional()), 0.0);
    assert_eq!(lhv_max(&ch_qubit_functional()), 0.0);
}

#[test]
fn noisy_spectrum_matches_eigen_oracle() {
    use nalgebra::{DMatrix, Complex};

    let sc = Scenario::tritter();
    for (a, b, noise) in [(1.0, 1.0, 0.3), (1.26, -1.26, 0.05), (0.2, 2.5, 0.9)] {
        let psi = sc.state(&EntanglementParams::qutrit(a, b)).unwrap();
        let rho = mix_with_noise(&psi, noise).unwrap();
        let m = DMatrix::from_fn(9, 9, |r, c| {
            let z = rho.get(r, c);
            Complex::new(z.re, z.im)
        });
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let small = noise / 9.0;
        for e in &eig[..8] {
            assert!((e - small).abs() < 1e-12, "{e} vs {small}");
        }
        assert!((eig[8] - (1.0 - noise + small)).abs() < 1e-12);
        assert!(rho.is_positive_semidefinite(1e-10));
    }
}

#[test]
fn seeded_maximization_is_bitwise_reproducible() {
    let f = ch_qutrit_functional();
    let sc = Scenario::biphoton(OutcomePair::P1P2);
    let problem = Problem::new(&sc, &f, Entanglement::Free).with_eta(0.9);
    let opts = OptimOptions {
        multistarts: 16,
        seed: 42,
        ..Default::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| maximize(&problem, &opts).unwrap())
    };
    let first = run(1);
    let second = run(4);
    assert_eq!(first.total().to_bits(), second.total().to_bits());
    assert_eq!(first.settings.to_vec(), second.settings.to_vec());
    assert_eq!(first.start_values, second.start_values);
    let other = maximize(&problem, &OptimOptions { seed: 43, ..opts.clone() }).unwrap();
    assert_ne!(other.start_values, first.start_values);
}
