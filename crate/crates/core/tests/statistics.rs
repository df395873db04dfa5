//! Monte Carlo checks against closed-form moments. Tolerances are three
//! standard errors of the estimator.

use ddsim_core::engine::ScheduleSpec;
use ddsim_core::rng::TrialStreams;
use ddsim_core::{
    apply_pulse_errors, average_states, build_cpmg, build_free, fidelity, generate_profile,
    propagate, rayleigh_sample, run_ensemble, run_ensemble_with_workers, sweep, NoiseProfile,
    PulseErrorModel, PureState, RayleighParams, SegmentGrid, SequenceKind, SimConfig,
};
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

fn mean_var(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, m4)
}

#[test]
fn rayleigh_moments() {
    let params = RayleighParams::new(12.6).unwrap();
    let mut rng = TrialStreams::new(1, 0).noise();
    let xs: Vec<f64> = (0..1_000_000)
        .map(|_| rayleigh_sample(&params, &mut rng))
        .collect();
    let n = xs.len() as f64;
    let (m, v, m4) = mean_var(&xs);
    let mean_oracle = 12.6 * (PI / 2.0).sqrt();
    let var_oracle = 12.6f64.powi(2) * (4.0 - PI) / 2.0;
    assert!((mean_oracle - 15.791).abs() < 1e-3);
    assert!((m - mean_oracle).abs() < 3.0 * (v / n).sqrt(), "mean {m}");
    let var_se = ((m4 - v * v) / n).sqrt();
    assert!((v - var_oracle).abs() < 3.0 * var_se, "var {v}");
}

#[test]
fn per_segment_phase_variance() {
    let params = RayleighParams::default();
    let grid = SegmentGrid::new(2.0, 4).unwrap();
    let dl = grid.segment_length_m();
    let mut samples = Vec::with_capacity(100_000);
    for t in 0..100_000 {
        let p = generate_profile(&grid, &params, &mut TrialStreams::new(9, t).noise());
        samples.push(p.increments()[t as usize % 4]);
    }
    let n = samples.len() as f64;
    let (_, v, m4) = mean_var(&samples);
    let oracle = (params.scale_deg_per_m().to_radians() * dl).powi(2) * (4.0 - PI) / 2.0;
    assert!(
        (v - oracle).abs() < 3.0 * ((m4 - v * v) / n).sqrt(),
        "{v} vs {oracle}"
    );
}

#[test]
fn pulse_error_spread() {
    let schedule = build_cpmg(1000.0, 1000).unwrap();
    let model = PulseErrorModel::new(0.005).unwrap();
    let mut eps = Vec::with_capacity(100_000);
    for t in 0..100 {
        let s = apply_pulse_errors(&schedule, &model, &mut TrialStreams::new(3, t).pulses());
        eps.extend(s.events().iter().map(|e| e.angle / PI - 1.0));
    }
    let n = eps.len() as f64;
    let (_, v, _) = mean_var(&eps);
    let sd = v.sqrt();
    assert!((sd - 0.005).abs() < 3.0 * 0.005 / (2.0 * n).sqrt(), "{sd}");
}

#[test]
fn independent_increment_decay() {
    let n_seg = 10;
    let v: f64 = 0.02;
    let grid = SegmentGrid::new(10.0, n_seg).unwrap();
    let free = build_free(10.0).unwrap();
    let d = PureState::diagonal();
    let normal = Normal::new(0.0, v.sqrt()).unwrap();
    let coherences: Vec<f64> = (0..100_000)
        .map(|t| {
            let mut rng = TrialStreams::new(5, t).noise();
            let inc = (0..n_seg).map(|_| normal.sample(&mut rng)).collect();
            let profile = NoiseProfile::signed(inc).unwrap();
            let out = propagate(&grid, &profile, &free, &[d], false).unwrap();
            2.0 * fidelity(&d, &out.states[0]) - 1.0
        })
        .collect();
    let (m, var, _) = mean_var(&coherences);
    let oracle = (-(n_seg as f64) * v / 2.0).exp();
    let se = (var / coherences.len() as f64).sqrt();
    assert!((m - oracle).abs() < 3.0 * se, "{m} vs {oracle} (se {se})");
}

#[test]
fn two_profile_ensemble() {
    let grid = SegmentGrid::new(1.0, 1).unwrap();
    let free = build_free(1.0).unwrap();
    let d = PureState::diagonal();
    for delta in [0.1, 0.7, 2.5] {
        let outs: Vec<_> = [delta, -delta]
            .iter()
            .map(|&x| {
                let p = NoiseProfile::signed(vec![x]).unwrap();
                propagate(&grid, &p, &free, &[d], false).unwrap().states[0]
            })
            .collect();
        let avg = average_states(&outs).unwrap();
        assert!((fidelity(&d, &avg) - (1.0 + f64::cos(delta)) / 2.0).abs() < 1e-12);
    }
}

fn noisy_config(trials: usize) -> SimConfig {
    SimConfig {
        fiber_length_m: 50.0,
        schedule: ScheduleSpec::new(SequenceKind::Cpmg, 40),
        error_model: PulseErrorModel::new(0.01).unwrap(),
        trials,
        ..SimConfig::default()
    }
}

#[test]
fn stderr_shrinks_as_inverse_root_trials() {
    let se: Vec<f64> = [100, 1000, 10_000]
        .iter()
        .map(|&t| {
            run_ensemble(&noisy_config(t))
                .unwrap()
                .state("D")
                .unwrap()
                .fidelity_stderr
        })
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1];
        let expected = 10f64.sqrt();
        assert!(ratio > expected / 2.0 && ratio < expected * 2.0, "{se:?}");
    }
}

#[test]
fn ensemble_is_independent_of_worker_count() {
    let cfg = noisy_config(300);
    let a = run_ensemble_with_workers(&cfg, 1).unwrap();
    let b = run_ensemble_with_workers(&cfg, 3).unwrap();
    let c = run_ensemble(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn sweep_matches_individual_runs() {
    let cfgs = vec![
        noisy_config(50),
        SimConfig {
            master_seed: 4,
            ..noisy_config(50)
        },
    ];
    let swept = sweep(&cfgs).unwrap();
    assert_eq!(swept[0], run_ensemble(&cfgs[0]).unwrap());
    assert_eq!(swept[1], run_ensemble(&cfgs[1]).unwrap());
    assert!(swept[0].states[0].fidelity_stderr > 0.0);
}

#[test]
fn zero_noise_sweep_over_pulse_counts() {
    let cfgs: Vec<SimConfig> = [(SequenceKind::Free, 0), (SequenceKind::Cpmg, 2)]
        .iter()
        .map(|&(seq, n)| SimConfig {
            fiber_length_m: 10.0,
            rayleigh: RayleighParams::new(0.0).unwrap(),
            schedule: ScheduleSpec::new(seq, n),
            trials: 4,
            ..SimConfig::default()
        })
        .collect();
    for r in sweep(&cfgs).unwrap() {
        for s in &r.states {
            assert!((s.fidelity_mean - 1.0).abs() < 1e-12);
        }
    }
}
