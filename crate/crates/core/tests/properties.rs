use inertial_core::diagnostics::{fidelity_sweep, log_grid, SweepModel, SweepOptions};
use inertial_core::engine::{
    propagate_adiabatic, propagate_constant_chi, propagate_exact, propagate_inertial, scaled_time, time_at_scaled,
};
use inertial_core::linalg::{bi_eigendecompose, c, track_continuity, CMatrix, CVector, C64};
use inertial_core::models::*;
use inertial_core::{EigenOptions, EngineOptions, GeneratorFamily, Model, Protocol};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn projective_distance(a: &CVector, b: &CVector) -> f64 {
    let s: C64 = b.dotc(a) / b.dotc(b);
    (a - b * s).norm() / a.norm()
}

fn matches_closed_form(fam: &dyn GeneratorFamily, chi: f64, modes: &[(f64, CVector)]) -> f64 {
    let fr = fam.frame(&[chi], &EigenOptions::default()).unwrap();
    let mut worst = 0.0f64;
    for (lam, v) in modes {
        let cost = |k: usize| (fr.lambdas[k] - lam).norm() + projective_distance(&fr.lefts[k].map(|z| z.conj()), v);
        let k = (0..fr.len()).min_by(|&a, &b| cost(a).total_cmp(&cost(b))).unwrap();
        worst = worst.max(cost(k));
    }
    worst
}

#[test]
fn random_matrices_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 3, 5, 8] {
        for _ in 0..10 {
            let b = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let f = bi_eigendecompose(&b, &EigenOptions::default()).unwrap();
            assert!((f.reconstruct() - &b).norm() < 1e-9 * b.norm().max(1.0));
            assert!(f.biorthogonality_error() < 1e-9);
        }
    }
}

#[test]
fn tracked_eigenvalue_curves_are_continuous() {
    let eo = EigenOptions::default();
    let mut prev = HoGenerator.frame(&[-1.8], &eo).unwrap();
    let h = 0.01;
    for i in 1..=360 {
        let chi = -1.8 + h * i as f64;
        let raw = HoGenerator.frame(&[chi], &eo).unwrap();
        let next = raw.apply_tracking(&track_continuity(&prev, &raw).unwrap());
        for k in 0..next.len() {
            // |d lambda / d chi| stays below chi / kappa near the edges
            assert!((next.lambdas[k] - prev.lambdas[k]).norm() / h < 10.0, "chi={chi} k={k}");
        }
        prev = next;
    }
}

#[test]
fn pure_state_norm_is_conserved() {
    let tls = TwoLevelSystem { initial: [0.6, 0.0, 0.8], ..TwoLevelSystem::new(TlsProtocol::for_endpoints(8.0, 20.0, 10.0, -5e-3, 0.7).unwrap()) };
    let fact = tls.factorization();
    let v0 = tls.vector_from_bloch(0.0, [0.6, 0.0, 0.8]).unwrap();
    let ts: Vec<f64> = (1..=14).map(|i| i as f64 * 0.05).collect();
    for v in propagate_exact(&fact, &v0, &ts, &EngineOptions::default()).unwrap() {
        let r = tls.bloch(&v).unwrap();
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        assert!((n - 1.0).abs() < 1e-9, "t={} |r|={n}", v.t);
    }
}

#[test]
fn identity_component_is_invariant() {
    let ho = HarmonicOscillator::new(HoProtocol::for_endpoints(20.0, 10.0, -5e-3, 0.6).unwrap());
    let tls = TwoLevelSystem::new(TlsProtocol::for_endpoints(8.0, 20.0, 10.0, -5e-3, 0.6).unwrap());
    let models: [(&dyn Model, usize); 2] = [(&ho, 5), (&tls, 3)];
    let opts = EngineOptions::default();
    for (m, id) in models {
        let fact = m.factorization();
        let v0 = m.initial_vector();
        let t = 0.6;
        let ex = propagate_exact(&fact, &v0, &[t], &opts).unwrap().pop().unwrap();
        let (inr, _) = propagate_inertial(&fact, &v0, t, true, &opts).unwrap();
        let ad = propagate_adiabatic(&fact, &v0, t, &opts).unwrap();
        let fr = fact.frame_at(0.0, &opts.eigen).unwrap();
        let cc = propagate_constant_chi(&fr, &fr.coefficients(&v0.data), 3.0);
        for v in [&ex.data, &inr.data, &ad.data, &cc] {
            assert!((v[id] - v0.data[id]).norm() < 1e-12);
        }
    }
}

#[test]
fn smaller_inertial_parameter_implies_better_fidelity() {
    for model in [SweepModel::oscillator_default(), SweepModel::two_level_default()] {
        let res = fidelity_sweep(&model, &log_grid(0.05, 5.0, 20), &SweepOptions::default());
        assert_eq!(res.failures(), 0);
        for (t_f, m) in res.ok_points() {
            if m.upsilon_max < m.mu_max {
                assert!(m.f_inertial >= m.f_adiabatic - 1e-9, "{} t_f={t_f}", model.name());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn ho_closed_form_matches(chi in -1.95f64..1.95) {
        prop_assert!(matches_closed_form(&HoGenerator, chi, &ho_closed_form_modes(chi)) < 1e-10);
        let fr = HoGenerator.frame(&[chi], &EigenOptions::default()).unwrap();
        prop_assert!(fr.lambdas.iter().all(|l| l.im.abs() < 1e-10));
    }

    #[test]
    fn tls_closed_form_matches(chi in -3.0f64..3.0) {
        prop_assert!(matches_closed_form(&TlsGenerator, chi, &tls_closed_form_modes(chi)) < 1e-10);
    }

    #[test]
    fn two_spin_frames_reconstruct(x in -0.9f64..0.9, y in -0.9f64..0.9) {
        prop_assume!((x - y).abs() > 1e-3);
        let chi = [x, y];
        let fr = TwoSpinGenerator.frame(&chi, &EigenOptions::default()).unwrap();
        prop_assert!((fr.reconstruct() - TwoSpinGenerator.generator(&chi)).norm() < 1e-9);
    }

    #[test]
    fn scaled_time_round_trips(t_f in 0.05f64..5.0, frac in 0.0f64..1.0) {
        let p = HoProtocol::for_endpoints(20.0, 10.0, -5e-3, t_f).unwrap();
        prop_assume!(p.mu_max(t_f) < 2.0);
        let t = frac * t_f;
        let th = scaled_time(&p, t, 1e-13).unwrap();
        prop_assert!((time_at_scaled(&p, th, 1e-13).unwrap() - t).abs() < 1e-10);
        let later = scaled_time(&p, t + 1e-3 * t_f, 1e-13).unwrap();
        prop_assert!(later > th);
        prop_assert!(p.omega(t).unwrap() > 0.0);
    }
}
