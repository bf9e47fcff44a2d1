use serde_json::json;

use qtransport::analysis::spread_variance;
use qtransport::experiments::{
    anderson_preset, b800_preset, preset_registry, run_anderson_ensemble, run_experiment,
    transfer_preset, AndersonParams, DisorderSpec, EnsembleOptions, RunOptions, Side,
    ANDERSON_COUPLING, TRANSFER_TIME,
};
use qtransport::mapping::circuit_to_quantum;
use qtransport::tight_binding::{propagate_expm, QuantumState};
use qtransport::Error;

fn grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

#[test]
fn ordered_chain_uses_nominal_coupling() {
    let net = anderson_preset(9, DisorderSpec::default(), 0).unwrap();
    assert!(net.branches().iter().all(|&(_, _, l)| l == ANDERSON_COUPLING));
}

#[test]
fn strong_disorder_bounds_and_determinism() {
    let spec = DisorderSpec { delta: 0.9, master_seed: 11, ..DisorderSpec::default() };
    let lo = ANDERSON_COUPLING * 0.1;
    let hi = ANDERSON_COUPLING * 1.9;
    for r in 0..spec.n_realizations {
        let a = spec.sample_couplings(8, r).unwrap();
        assert_eq!(a, spec.sample_couplings(8, r).unwrap());
        assert!(a.iter().all(|l| (lo - 1e-15..=hi + 1e-15).contains(l)));
    }
    let other = DisorderSpec { master_seed: 12, ..spec };
    assert_ne!(spec.sample_couplings(8, 0).unwrap(), other.sample_couplings(8, 0).unwrap());
}

#[test]
fn ordered_chain_spreads_ballistically() {
    let params = AndersonParams {
        n_realizations: 1,
        resistance: None,
        ..AndersonParams::default()
    };
    let opts = EnsembleOptions { samples: 2001, ..EnsembleOptions::default() };
    let result = run_anderson_ensemble(&params, &opts).unwrap();
    let j = circuit_to_quantum(&params.network(0).unwrap()).unwrap().coupling(4, 5).abs();
    // the front reaches the chain ends after ~4/(2|J|); stay well before that
    let t_max = 0.6 * 4.0 / (2.0 * j);
    let pts: Vec<(f64, f64)> = result
        .times
        .iter()
        .zip(&result.variance_curve)
        .filter(|(t, _)| **t <= t_max)
        .map(|(t, v)| (*t, *v))
        .collect();
    // least squares for v = a t²
    let a = pts.iter().map(|(t, v)| t * t * v).sum::<f64>() / pts.iter().map(|(t, _)| t.powi(4)).sum::<f64>();
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let ss_res: f64 = pts.iter().map(|(t, v)| (v - a * t * t).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|(_, v)| (v - mean).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    assert!(r2 > 0.99, "R² = {r2}");
    // an infinite uniform chain spreads as σ² = 2 J² t²
    assert!((a - 2.0 * j * j).abs() < 0.05 * 2.0 * j * j, "a = {a}, 2J² = {}", 2.0 * j * j);
}

#[test]
fn strong_disorder_suppresses_spreading() {
    let ordered = run_anderson_ensemble(&AndersonParams::default(), &EnsembleOptions::default()).unwrap();
    let disordered = run_anderson_ensemble(
        &AndersonParams { delta: 0.9, seed: 2024, ..AndersonParams::default() },
        &EnsembleOptions::default(),
    )
    .unwrap();
    let v0 = *ordered.variance_curve.last().unwrap();
    let v9 = *disordered.variance_curve.last().unwrap();
    assert!(v9 < 0.25 * v0, "Δ=0.9 variance {v9} vs Δ=0 variance {v0}");
}

#[test]
fn single_realization_matches_direct_run() {
    let params = AndersonParams { delta: 0.5, n_realizations: 1, seed: 3, ..AndersonParams::default() };
    let result = run_anderson_ensemble(&params, &EnsembleOptions::default()).unwrap();
    let h = circuit_to_quantum(&params.network(0).unwrap()).unwrap();
    let c0 = QuantumState::localized(9, params.centre()).unwrap();
    let direct = propagate_expm(&h, &c0, &result.times).unwrap();
    for (a, b) in result.quantum_mean.iter().zip(direct.populations()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    assert!((result.return_probability - direct.populations().last().unwrap()[4]).abs() < 1e-12);
}

#[test]
fn ensemble_is_independent_of_thread_count() {
    let params = AndersonParams { delta: 0.9, n_realizations: 12, seed: 5, ..AndersonParams::default() };
    let opts = EnsembleOptions { samples: 51, ..EnsembleOptions::default() };
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_anderson_ensemble(&params, &opts).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_anderson_ensemble(&params, &opts).unwrap());
    assert_eq!(serial, parallel);
}

#[test]
fn ring_populations_are_mirror_symmetric() {
    let b800 = b800_preset().unwrap();
    let h = b800.rescaled.with_loss_rates(vec![0.0; 9]).unwrap();
    let c0 = QuantumState::localized(9, 0).unwrap();
    let traj = propagate_expm(&h, &c0, &grid(3.2, 320)).unwrap();
    for p in traj.populations() {
        for k in 1..9 {
            assert!((p[k] - p[9 - k]).abs() < 1e-9);
        }
    }
}

#[test]
fn transfer_chain_is_mirror_symmetric() {
    let sys = transfer_preset(7, TRANSFER_TIME, false).unwrap();
    let times = grid(TRANSFER_TIME, 200);
    let from_first = propagate_expm(&sys.hamiltonian, &QuantumState::localized(7, 0).unwrap(), &times).unwrap();
    let from_last = propagate_expm(&sys.hamiltonian, &QuantumState::localized(7, 6).unwrap(), &times).unwrap();
    for (a, b) in from_first.populations().iter().zip(from_last.populations()) {
        for k in 0..7 {
            assert!((a[k] - b[6 - k]).abs() < 1e-9);
        }
    }
}

#[test]
fn transfer_completes_only_at_design_time() {
    let sys = transfer_preset(7, TRANSFER_TIME, false).unwrap();
    let c0 = QuantumState::localized(7, 0).unwrap();
    let traj = propagate_expm(&sys.hamiltonian, &c0, &[0.0, TRANSFER_TIME / 2.0, TRANSFER_TIME]).unwrap();
    let p = traj.populations();
    assert!(p[1][6] < p[2][6]);
    assert!((p[2][6] - 1.0).abs() < 1e-9);
    // halfway through, the excitation sits symmetrically about the centre
    for k in 0..7 {
        assert!((p[1][k] - p[1][6 - k]).abs() < 1e-9);
    }
}

#[test]
fn other_chain_lengths_transfer_perfectly() {
    for n in [3, 4, 9] {
        let sys = transfer_preset(n, 2.0, false).unwrap();
        let c0 = QuantumState::localized(n, 0).unwrap();
        let p = propagate_expm(&sys.hamiltonian, &c0, &[0.0, 2.0]).unwrap().populations()[1].clone();
        assert!((p[n - 1] - 1.0).abs() < 1e-9, "n = {n}: {}", p[n - 1]);
    }
}

#[test]
fn registry_lists_presets_and_reports_unknown_keys() {
    let reg = preset_registry();
    assert_eq!(reg.names(), vec!["anderson", "b800", "custom", "ssh", "transfer"]);
    let err = reg.create("ssh", json!({ "couplingz": 1.0 })).err().unwrap();
    assert!(matches!(err, Error::InvalidParameter { .. }));
    assert!(err.to_string().contains("couplingz"));
    assert!(matches!(
        reg.create("nonsense", json!({})).err().unwrap(),
        Error::UnknownStrategy { .. }
    ));
}

#[test]
fn runs_are_deterministic() {
    let sys = preset_registry().create("anderson", json!({ "delta": 0.6, "seed": 9 })).unwrap().build().unwrap();
    let opts = RunOptions::default();
    let a = run_experiment(&sys, &opts).unwrap();
    let b = run_experiment(&sys, &opts).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.quantum, b.quantum);
    assert_eq!(a.circuit, b.circuit);
}

#[test]
fn custom_preset_round_trips_through_both_sides() {
    let sys = preset_registry()
        .create(
            "custom",
            json!({
                "circuit": {
                    "inductances": [3.35e-3, 3.35e-3],
                    "capacitances": [1.5e-3, 1.5e-3],
                    "couplings": [[1, 2, 96.05e-3]]
                },
                "initial_site": 1,
                "t_end": 0.5
            }),
        )
        .unwrap()
        .build()
        .unwrap();
    assert!((sys.hamiltonian.coupling(0, 1) + 7.647).abs() < 1e-3);
    let res = run_experiment(&sys, &RunOptions { side: Side::Both, ..RunOptions::default() }).unwrap();
    assert!(res.metrics["agreement_global_mae"] < 0.01);
    assert!(res.metrics["energy_drift"] < 1e-6);
}

#[test]
fn spread_variance_of_uniform_distribution() {
    let pops = vec![1.0 / 9.0; 9];
    let positions: Vec<f64> = (0..9).map(f64::from).collect();
    assert!((spread_variance(&pops, &positions).unwrap() - 80.0 / 12.0).abs() < 1e-12);
}
