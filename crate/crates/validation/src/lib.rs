//! Benchmark and property criteria for the simulator. Each criterion runs
//! at its stated size and tolerance and reports a verdict with the measured
//! numbers.

use std::f64::consts::PI;

use ddsim_core::engine::ScheduleSpec;
use ddsim_core::polarization::{ALGEBRA_TOL, PSD_TOL};
use ddsim_core::rng::TrialStreams;
use ddsim_core::{
    apply_pulse_errors, average_states, build_cpmg, build_free, build_kdd, dephasing_unitary,
    evolve, fidelity, free_evolution_fidelity_envelope, propagate, pulse_unitary, rayleigh_sample,
    run_ensemble, NoiseProfile, PulseErrorModel, PureState, RayleighParams, SegmentGrid,
    SequenceKind, SimConfig, SimResult, Unitary2,
};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

fn benchmark(length_m: f64, pulses: usize, sigma: f64, sequence: SequenceKind) -> SimResult {
    let cfg = SimConfig {
        fiber_length_m: length_m,
        schedule: ScheduleSpec::new(sequence, pulses),
        error_model: PulseErrorModel::new(sigma).unwrap(),
        trials: 1000,
        ..SimConfig::default()
    };
    run_ensemble(&cfg).unwrap()
}

fn fd(r: &SimResult, label: &str) -> (f64, f64) {
    let s = r.state(label).unwrap();
    (s.fidelity_mean, s.fidelity_stderr)
}

pub fn no_error_benchmark() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for seq in [SequenceKind::Cpmg, SequenceKind::Kdd] {
        let r = benchmark(500.0, 800, 0.0, seq);
        for label in ["H", "V", "D"] {
            let (f, _) = fd(&r, label);
            pass &= f >= 0.99;
            parts.push(format!("{seq} {label}={f:.5}"));
        }
    }
    Outcome {
        pass,
        detail: parts.join(" "),
    }
}

pub fn half_percent_benchmark() -> Outcome {
    let (c, cse) = fd(&benchmark(500.0, 800, 0.005, SequenceKind::Cpmg), "D");
    let (k, kse) = fd(&benchmark(500.0, 800, 0.005, SequenceKind::Kdd), "D");
    let target = k >= 0.96 - 2.0 * kse && k <= 0.98 + 2.0 * kse;
    let ordering = k - c > 2.0 * combined(cse, kse);
    Outcome {
        pass: target && ordering,
        detail: format!(
            "KDD D={k:.5}±{kse:.5} (target 0.96±0.02: {}) CPMG D={c:.5}±{cse:.5} (KDD-CPMG={:.5} > {:.5}: {ordering})",
            target,
            k - c,
            2.0 * combined(cse, kse)
        ),
    }
}

pub fn one_percent_benchmark() -> Outcome {
    let (c, cse) = fd(&benchmark(500.0, 800, 0.01, SequenceKind::Cpmg), "D");
    let (k, kse) = fd(&benchmark(500.0, 800, 0.01, SequenceKind::Kdd), "D");
    let cpmg_ok = (0.75..=0.85).contains(&c);
    let kdd_ok = k >= 0.90 - 2.0 * kse;
    Outcome {
        pass: cpmg_ok && kdd_ok,
        detail: format!("CPMG D={c:.5}±{cse:.5} in [0.75,0.85]: {cpmg_ok}; KDD D={k:.5}±{kse:.5} >= 0.90-2se: {kdd_ok}"),
    }
}

pub fn length_scaling_benchmark() -> Outcome {
    let (c5, c5se) = fd(&benchmark(500.0, 800, 0.005, SequenceKind::Cpmg), "D");
    let (k5, k5se) = fd(&benchmark(500.0, 800, 0.005, SequenceKind::Kdd), "D");
    let (c1, c1se) = fd(&benchmark(1000.0, 1600, 0.005, SequenceKind::Cpmg), "D");
    let (k1, k1se) = fd(&benchmark(1000.0, 1600, 0.005, SequenceKind::Kdd), "D");
    let allowance = f64::max(0.01, 3.0 * combined(k5se, k1se));
    let kdd_flat = (k1 - k5).abs() <= allowance;
    let cpmg_falls = c5 - c1 > 2.0 * combined(c5se, c1se);
    Outcome {
        pass: kdd_flat && cpmg_falls,
        detail: format!(
            "KDD 500m={k5:.5} 1km={k1:.5} |diff|={:.5} <= {allowance:.5}: {kdd_flat}; CPMG 500m={c5:.5} 1km={c1:.5} falls: {cpmg_falls}",
            (k1 - k5).abs()
        ),
    }
}

fn random_state<R: Rng>(rng: &mut R) -> PureState {
    loop {
        let v: [f64; 4] = [0; 4].map(|_| rng.random_range(-1.0..1.0));
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-3 {
            return PureState::normalized(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]))
                .unwrap();
        }
    }
}

fn random_op<R: Rng>(rng: &mut R) -> Unitary2 {
    if rng.random_bool(0.5) {
        dephasing_unitary(rng.random_range(-10.0..10.0)).unwrap()
    } else {
        pulse_unitary(rng.random_range(-PI..PI), rng.random_range(0.0..2.0 * PI)).unwrap()
    }
}

fn algebra() -> (bool, String) {
    let mut rng = TrialStreams::new(101, 0).noise();
    let mut worst_unitary: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    let mut worst_herm: f64 = 0.0;
    let mut min_eig: f64 = f64::INFINITY;
    for _ in 0..1_000_000 {
        let psi = random_state(&mut rng);
        let mut u = Unitary2::identity();
        let mut rho = psi.projector();
        for _ in 0..4 {
            let op = random_op(&mut rng);
            rho = evolve(&rho, &op);
            u = op * u;
        }
        let e = rho.entries();
        worst_unitary = worst_unitary.max(u.unitarity_error());
        worst_trace = worst_trace.max((rho.trace() - Complex64::new(1.0, 0.0)).norm());
        worst_herm = worst_herm
            .max((e[0][1] - e[1][0].conj()).norm())
            .max(e[0][0].im.abs());
        min_eig = min_eig.min(rho.eigenvalues()[0]);
    }
    let pass = worst_unitary <= ALGEBRA_TOL
        && worst_trace <= ALGEBRA_TOL
        && worst_herm <= ALGEBRA_TOL
        && min_eig >= -PSD_TOL;
    (
        pass,
        format!("unitarity {worst_unitary:.1e} trace {worst_trace:.1e} hermiticity {worst_herm:.1e} min eig {min_eig:.1e}"),
    )
}

fn echo_identity() -> (bool, String) {
    let mut rng = TrialStreams::new(102, 0).noise();
    let mut worst = 1.0f64;
    for case in 0..2000 {
        let kdd = case % 2 == 1;
        let spi = 2 * rng.random_range(1..5);
        let pulses = if kdd {
            20 * rng.random_range(1..4)
        } else {
            2 * rng.random_range(1..60)
        };
        let length = rng.random_range(1.0..1000.0);
        let grid = SegmentGrid::for_intervals(length, pulses, spi).unwrap();
        let scale = rng.random_range(0.0..50.0);
        let inc: Vec<f64> = (0..pulses / 2)
            .flat_map(|_| {
                let rate = rng.random_range(-scale..=scale) * grid.segment_length_m();
                std::iter::repeat_n(rate, 2 * spi)
            })
            .collect();
        let profile = NoiseProfile::signed(inc).unwrap();
        let schedule = if kdd {
            build_kdd(length, pulses / 20, rng.random_range(-PI..PI)).unwrap()
        } else {
            build_cpmg(length, pulses).unwrap()
        };
        let states: Vec<PureState> = (0..3).map(|_| random_state(&mut rng)).collect();
        let out = propagate(&grid, &profile, &schedule, &states, false).unwrap();
        for (psi, rho) in states.iter().zip(&out.states) {
            worst = worst.min(fidelity(psi, rho));
        }
    }
    (
        worst >= 1.0 - 1e-9,
        format!("worst fidelity {worst:.12} over 2000 profiles"),
    )
}

fn analytic_oracle() -> (bool, String) {
    let d = PureState::diagonal();
    let grid = SegmentGrid::new(1.0, 1).unwrap();
    let free = build_free(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let delta = -3.0 + 6.0 * k as f64 / 199.0;
        let run = |x: f64| {
            let p = NoiseProfile::signed(vec![x]).unwrap();
            propagate(&grid, &p, &free, &[d], false).unwrap().states[0]
        };
        let single = fidelity(&d, &run(delta));
        worst = worst.max((single - (delta / 2.0).cos().powi(2)).abs());
        let pair = average_states(&[run(delta), run(-delta)]).unwrap();
        worst = worst.max((fidelity(&d, &pair) - (1.0 + delta.cos()) / 2.0).abs());
    }
    (worst <= 1e-12, format!("max deviation {worst:.1e}"))
}

fn envelope() -> (bool, String) {
    let hand = [
        ((0.0, 0.0, 10), 1.0),
        ((0.0, 0.0025, 10), 0.941_248_451_292_297_7),
        ((0.0, 0.01, 1_000_000), 0.5),
    ];
    let closed_form_ok = hand.iter().all(|&((m, v, n), want)| {
        (free_evolution_fidelity_envelope(m, v, n).unwrap() - want).abs() <= 1e-9
    });

    let n_seg = 10;
    let v: f64 = 0.02;
    let grid = SegmentGrid::new(10.0, n_seg).unwrap();
    let free = build_free(10.0).unwrap();
    let d = PureState::diagonal();
    let normal = Normal::new(0.0, v.sqrt()).unwrap();
    let samples: Vec<f64> = (0..100_000)
        .map(|t| {
            let mut rng = TrialStreams::new(103, t).noise();
            let inc = (0..n_seg).map(|_| normal.sample(&mut rng)).collect();
            let p = NoiseProfile::signed(inc).unwrap();
            2.0 * fidelity(
                &d,
                &propagate(&grid, &p, &free, &[d], false).unwrap().states[0],
            ) - 1.0
        })
        .collect();
    let (m, se) = mean_se(&samples);
    let oracle = (-(n_seg as f64) * v / 2.0).exp();
    let mc_ok = (m - oracle).abs() <= 3.0 * se;
    (
        closed_form_ok && mc_ok,
        format!(
            "closed form n=10 dphi=0.05 -> {:.10} ({closed_form_ok}); MC decay {m:.5} vs {oracle:.5} ± 3×{se:.1e} ({mc_ok})",
            free_evolution_fidelity_envelope(0.0, 0.0025, 10).unwrap()
        ),
    )
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn statistics() -> (bool, String) {
    let params = RayleighParams::default();
    let mut rng = TrialStreams::new(104, 0).noise();
    let xs: Vec<f64> = (0..1_000_000)
        .map(|_| rayleigh_sample(&params, &mut rng))
        .collect();
    let n = xs.len() as f64;
    let (m, mse) = mean_se(&xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let vse = ((m4 - var * var) / n).sqrt();
    let s = params.scale_deg_per_m();
    let mean_ok = (m - s * (PI / 2.0).sqrt()).abs() <= 3.0 * mse;
    let var_ok = (var - s * s * (4.0 - PI) / 2.0).abs() <= 3.0 * vse;

    let schedule = build_cpmg(100.0, 1000).unwrap();
    let model = PulseErrorModel::new(0.005).unwrap();
    let eps: Vec<f64> = (0..100)
        .flat_map(|t| {
            apply_pulse_errors(&schedule, &model, &mut TrialStreams::new(105, t).pulses())
                .events()
                .iter()
                .map(|e| e.angle / PI - 1.0)
                .collect::<Vec<_>>()
        })
        .collect();
    let (em, _) = mean_se(&eps);
    let sd = (eps.iter().map(|x| (x - em).powi(2)).sum::<f64>() / (eps.len() as f64 - 1.0)).sqrt();
    let sd_ok = (sd - 0.005).abs() <= 3.0 * 0.005 / (2.0 * eps.len() as f64).sqrt();
    (
        mean_ok && var_ok && sd_ok,
        format!("rayleigh mean {m:.4} ({mean_ok}) var {var:.3} ({var_ok}); pulse error sd {sd:.6} ({sd_ok})"),
    )
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        ddsim::run(
            [
                "ddsim",
                "--sequence",
                "cpmg,kdd",
                "--pulses",
                "40",
                "--length-m",
                "50",
                "--error-sigma",
                "0.01",
                "--trials",
                "200",
                "--trajectory",
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ],
            None,
        )
        .unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&p).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "4");
    let pass = !a.is_empty() && a == b && a == c;
    (
        pass,
        format!(
            "{} csv files compared across reruns and 1 vs 4 workers",
            a.len()
        ),
    )
}

pub fn property_suite() -> Outcome {
    let parts = [
        ("algebra", algebra()),
        ("echo", echo_identity()),
        ("oracle", analytic_oracle()),
        ("envelope", envelope()),
        ("statistics", statistics()),
        ("determinism", determinism()),
    ];
    let pass = parts.iter().all(|(_, (p, _))| *p);
    let detail = parts
        .iter()
        .map(|(name, (p, d))| format!("\n    {} {name}: {d}", if *p { "ok  " } else { "FAIL" }))
        .collect::<String>();
    Outcome { pass, detail }
}

pub type Criterion = (&'static str, fn() -> Outcome);

pub fn criteria() -> [Criterion; 5] {
    [
        (
            "1 no-error benchmark, 500 m, 800 plates",
            no_error_benchmark,
        ),
        ("2 0.5% plate error, 500 m", half_percent_benchmark),
        ("3 1% plate error, 500 m", one_percent_benchmark),
        (
            "4 length scaling to 1 km at fixed plate density",
            length_scaling_benchmark,
        ),
        ("5 property suite", property_suite),
    ]
}
