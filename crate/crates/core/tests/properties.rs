use num_complex::Complex64;
use omit_core::analysis::{fano_fit, find_windows_in, sweep, Axis, AxisSpec, FanoParams, InitialGuess};
use omit_core::drift::{drift_matrix, is_stable, Variant};
use omit_core::model::ModelParams;
use omit_core::oracle::compare::{compare, CompareOptions};
use omit_core::response::{empty_cavity, spectrum, uniform_grid, SignConvention, SpectrumOptions};
use omit_core::steady::OperatingPoint;
use proptest::prelude::*;

fn direct(ga: f64, gm: f64, eta: f64, delta: f64) -> (ModelParams, OperatingPoint) {
    let m = ModelParams::figure(ga, gm, eta, delta);
    let op = OperatingPoint::direct(&m).unwrap();
    (m, op)
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::PaperExact), Just(Variant::HamiltonianConsistent), Just(Variant::PaperLiteral)]
}

/// Lorentzian peak with a narrow dip at `at`.
fn dipped(x: f64, at: f64) -> f64 {
    1.0 / (1.0 + x * x) - 0.3 / (1.0 + ((x - at) / 0.05).powi(2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uncoupled_spectrum_is_the_bare_cavity(delta in -1.5f64..1.5, f in 0.0f64..2.0) {
        let (m, op) = direct(0.0, 0.0, 0.0, delta);
        let dp = f * m.mirror_frequency;
        let opts = SpectrumOptions { sign: SignConvention::EmptyCavity, ..Default::default() };
        let s = spectrum(&m, &op, &[dp], opts).unwrap();
        let (_, expect) = empty_cavity(op.detuning, m.cavity_decay, dp);
        prop_assert!((s.c_minus[0] - expect).norm() <= 1e-13 * expect.norm());
        prop_assert_eq!(s.c_plus[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn eigen_and_routh_hurwitz_agree(
        ga in 0.0f64..0.2, gm in 0.0f64..0.2, eta in 0.0f64..0.2, delta in -1.5f64..1.5, v in variant(),
    ) {
        let (m, op) = direct(ga, gm, eta, delta);
        prop_assert!(is_stable(&drift_matrix(&m, &op, v)).is_ok());
    }

    #[test]
    fn printed_formulas_exact_without_atoms(gm in 0.0f64..0.2, delta in 0.2f64..1.5) {
        let (m, op) = direct(0.0, gm, 0.0, delta);
        let wm = m.mirror_frequency;
        let grid = uniform_grid(0.1 * wm, 1.5 * wm, 29).unwrap();
        let r = compare(&m, &op, &grid, Variant::PaperExact, CompareOptions { time_points: 0, ..Default::default() });
        prop_assert_eq!(r.errors, 0);
        prop_assert!(r.printed_vs_frequency.unwrap().max <= 1e-9);
    }

    #[test]
    fn windows_are_affine_invariant(
        at in -0.8f64..0.8, a in 0.01f64..100.0, b in -10.0f64..10.0, c in 0.01f64..100.0, d in -10.0f64..10.0,
    ) {
        let x: Vec<f64> = (0..1601).map(|i| -4.0 + i as f64 * 0.005).collect();
        let y: Vec<f64> = x.iter().map(|&v| dipped(v, at)).collect();
        let xs: Vec<f64> = x.iter().map(|&v| c * v + d).collect();
        let ys: Vec<f64> = y.iter().map(|&v| a * v + b).collect();
        let w0 = find_windows_in(&x, &y);
        let w1 = find_windows_in(&xs, &ys);
        prop_assert_eq!(w0.len(), 1);
        prop_assert_eq!(w1.len(), 1);
        let (p, q) = (&w0[0], &w1[0]);
        prop_assert_eq!(p.dip_index, q.dip_index);
        prop_assert!((c * p.center + d - q.center).abs() <= 1e-9 * c.max(1.0) * (1.0 + d.abs()));
        prop_assert!((a * p.depth - q.depth).abs() <= 1e-9 * a * p.depth);
        prop_assert!((c * p.width - q.width).abs() <= 1e-9 * c * p.width);
    }

    #[test]
    fn fano_recovers_from_perturbed_start(
        q in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        center in 0.5f64..1.5,
        width in 0.01f64..0.1,
        amplitude in 0.5f64..2.0,
        offset in -1.0f64..1.0,
        k in prop::array::uniform5(-0.2f64..0.2),
    ) {
        let truth = FanoParams { rho: 1.0 / q, center, width, amplitude, offset }.canonical();
        let x: Vec<f64> = (0..801).map(|i| center + width * (-10.0 + i as f64 / 40.0)).collect();
        let y: Vec<f64> = x.iter().map(|&v| truth.eval(v)).collect();
        let start = FanoParams {
            rho: truth.rho * (1.0 + k[0]),
            center: truth.center + k[1] * truth.width,
            width: truth.width * (1.0 + k[2]),
            amplitude: truth.amplitude * (1.0 + k[3]),
            offset: truth.offset * (1.0 + k[4]),
        };
        let fit = fano_fit(&x, &y, InitialGuess::Given(start)).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(fit.history.windows(2).all(|h| h[1] <= h[0]));
        let p = fit.params;
        for (got, want) in [
            (p.rho, truth.rho),
            (p.center, truth.center),
            (p.width, truth.width),
            (p.amplitude, truth.amplitude),
            (p.offset, truth.offset),
        ] {
            prop_assert!((got - want).abs() <= 1e-6 * want.abs(), "{:?} vs {:?}", p, truth);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sweep_is_thread_count_independent(delta in 0.3f64..1.2, eta in 0.0f64..0.05) {
        let (m, op) = direct(0.1, 0.08, eta, delta);
        let wm = m.mirror_frequency;
        let k = m.cavity_decay;
        let grid = uniform_grid(0.1 * wm, 1.5 * wm, 301).unwrap();
        let axes = [
            AxisSpec::new(Axis::TransverseCoupling, vec![0.0, 0.02 * k, 0.03 * k]),
            AxisSpec::new(Axis::AtomicCoupling, vec![0.05 * wm, 0.1 * wm]),
        ];
        let opts = SpectrumOptions::default();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = one.install(|| sweep(&m, &op, &axes, &grid, opts)).unwrap();
        let parallel = sweep(&m, &op, &axes, &grid, opts).unwrap();
        prop_assert_eq!(serial, parallel);
    }
}
