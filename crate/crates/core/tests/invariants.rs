use ddsim_core::polarization::ALGEBRA_TOL;
use ddsim_core::{
    average_states, build_cpmg, build_kdd, dephasing_unitary, evolve, fidelity, propagate,
    pulse_unitary, DensityMatrix, NoiseProfile, PureState, SegmentGrid, Unitary2,
};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
enum Op {
    Dephase(f64),
    Pulse(f64, f64),
}

impl Op {
    fn unitary(&self) -> Unitary2 {
        match *self {
            Op::Dephase(d) => dephasing_unitary(d).unwrap(),
            Op::Pulse(axis, angle) => pulse_unitary(axis, angle).unwrap(),
        }
    }
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (-10.0..10.0f64).prop_map(Op::Dephase),
        (-PI..PI, 0.0..2.0 * PI).prop_map(|(a, t)| Op::Pulse(a, t)),
    ]
}

fn state() -> impl Strategy<Value = PureState> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(a, b, c, d)| {
            a * a + b * b + c * c + d * d > 1e-3
        })
        .prop_map(|(a, b, c, d)| {
            PureState::normalized(Complex64::new(a, b), Complex64::new(c, d)).unwrap()
        })
}

proptest! {
    #[test]
    fn compositions_stay_unitary(ops in prop::collection::vec(op(), 1..60)) {
        let u = ops.iter().fold(Unitary2::identity(), |acc, o| o.unitary() * acc);
        prop_assert!(u.unitarity_error() < 100.0 * ALGEBRA_TOL);
    }

    #[test]
    fn evolution_keeps_density_matrix_valid(
        psi in state(),
        ops in prop::collection::vec(op(), 1..60),
    ) {
        let rho = ops.iter().fold(psi.projector(), |r, o| evolve(&r, &o.unitary()));
        prop_assert!(rho.check().is_ok());
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!((rho.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_is_linear_in_rho(
        psi in state(), a in state(), b in state(), w in 0.0..1.0f64,
    ) {
        let ra = a.projector();
        let rb = b.projector();
        let mix = DensityMatrix::new([
            [
                ra.entries()[0][0] * w + rb.entries()[0][0] * (1.0 - w),
                ra.entries()[0][1] * w + rb.entries()[0][1] * (1.0 - w),
            ],
            [
                ra.entries()[1][0] * w + rb.entries()[1][0] * (1.0 - w),
                ra.entries()[1][1] * w + rb.entries()[1][1] * (1.0 - w),
            ],
        ]).unwrap();
        let lhs = fidelity(&psi, &mix);
        let rhs = w * fidelity(&psi, &ra) + (1.0 - w) * fidelity(&psi, &rb);
        prop_assert!((lhs - rhs).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&lhs));
    }

    #[test]
    fn pi_pulse_is_an_involution(axis in -PI..PI) {
        let p = pulse_unitary(axis, PI).unwrap();
        prop_assert!((p * p).distance_up_to_phase(&Unitary2::identity()) < 1e-12);
    }

    #[test]
    fn dephasing_composes_additively(a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let lhs = dephasing_unitary(a).unwrap() * dephasing_unitary(b).unwrap();
        prop_assert!(lhs.distance(&dephasing_unitary(a + b).unwrap()) < 1e-12);
    }

    #[test]
    fn mixing_never_raises_purity(a in state(), b in state()) {
        let avg = average_states(&[a.projector(), b.projector()]).unwrap();
        prop_assert!(avg.check().is_ok());
        prop_assert!(avg.purity() <= 1.0 + 1e-12);
    }

    /// Perfect plates undo any dephasing whose rate is constant over each
    /// two-interval cycle, whatever the rate does from cycle to cycle.
    #[test]
    fn perfect_cpmg_refocuses_cycle_constant_noise(
        psi in state(),
        half_spi in 1usize..5,
        rates in prop::collection::vec(-3.0..3.0f64, 1..30),
    ) {
        let spi = 2 * half_spi;
        let pulses = 2 * rates.len();
        let length = 0.5 * pulses as f64;
        let grid = SegmentGrid::for_intervals(length, pulses, spi).unwrap();
        let profile = cycle_constant_profile(&rates, 2 * spi, grid.segment_length_m());
        let schedule = build_cpmg(length, pulses).unwrap();
        let out = propagate(&grid, &profile, &schedule, &[psi], false).unwrap();
        prop_assert!(fidelity(&psi, &out.states[0]) >= 1.0 - 1e-9);
    }

    #[test]
    fn perfect_kdd_refocuses_cycle_constant_noise(
        psi in state(),
        supercycles in 1usize..4,
        base in -PI..PI,
        seed_rates in prop::collection::vec(-3.0..3.0f64, 30),
    ) {
        let spi = 4;
        let pulses = 20 * supercycles;
        let length = 7.0;
        let rates = &seed_rates[..pulses / 2];
        let grid = SegmentGrid::for_intervals(length, pulses, spi).unwrap();
        let profile = cycle_constant_profile(rates, 2 * spi, grid.segment_length_m());
        let schedule = build_kdd(length, supercycles, base).unwrap();
        let out = propagate(&grid, &profile, &schedule, &[psi], false).unwrap();
        prop_assert!(fidelity(&psi, &out.states[0]) >= 1.0 - 1e-9);
    }
}

fn cycle_constant_profile(rates: &[f64], segs_per_cycle: usize, dl: f64) -> NoiseProfile {
    let inc = rates
        .iter()
        .flat_map(|r| std::iter::repeat_n(r * dl, segs_per_cycle))
        .collect();
    NoiseProfile::signed(inc).unwrap()
}

#[test]
fn within_cycle_variation_is_not_refocused() {
    let spi = 4;
    let grid = SegmentGrid::for_intervals(2.0, 2, spi).unwrap();
    let mut inc = vec![0.0; 8];
    inc[0] = 0.4;
    let profile = NoiseProfile::signed(inc).unwrap();
    let schedule = build_cpmg(2.0, 2).unwrap();
    let d = PureState::diagonal();
    let out = propagate(&grid, &profile, &schedule, &[d], false).unwrap();
    let f = fidelity(&d, &out.states[0]);
    assert!((f - 0.2f64.cos().powi(2)).abs() < 1e-12, "{f}");
}
