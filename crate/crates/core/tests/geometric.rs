use inertial_core::engine::{inertial_trajectory, EngineOptions, Factorization, GeneratorFamily, LiouvilleVector, Protocol};
use inertial_core::geometric::*;
use inertial_core::linalg::{c, EigenOptions, Tracking};
use inertial_core::models::{HoGenerator, TlsGenerator, TwoSpinLocal, TwoSpinNonLocal};
use inertial_core::{Error, Result};
use proptest::prelude::*;

fn opts() -> GeoOptions {
    GeoOptions::default()
}

#[test]
fn retraced_circuits_vanish() {
    let fam = TwoSpinNonLocal;
    let c1 = ParameterCircuit::retraced(vec![vec![0.2, 0.6], vec![0.35, 0.7], vec![0.1, 0.9]], 16).unwrap();
    for p in geometric_phases_line(&fam, &c1, &opts()).unwrap() {
        assert!(p.abs() < 1e-10, "{p}");
    }
    let spin = SpinInField { loss: 0.2 };
    let c2 = ParameterCircuit::retraced(vec![vec![1.0, 0.0, 0.3], vec![0.0, 1.0, 0.5], vec![-1.0, 0.2, 0.9]], 16).unwrap();
    for p in geometric_phases_line(&spin, &c2, &opts()).unwrap() {
        assert!(p.abs() < 1e-10, "{p}");
    }
}

#[test]
fn one_parameter_models_have_no_phase() {
    let c1 = ParameterCircuit::polygon(vec![vec![-0.4], vec![0.9], vec![0.1]], 32).unwrap();
    for fam in [&HoGenerator as &dyn GeneratorFamily, &TlsGenerator] {
        for p in geometric_phases_line(fam, &c1, &opts()).unwrap() {
            assert!(p.abs() < 1e-10);
        }
    }
}

#[test]
fn nonlocal_square_line_matches_surface() {
    let sq = ParameterCircuit::square(vec![0.3, 0.6], 0.1, (0, 1), 16).unwrap();
    let line = geometric_phases_line(&TwoSpinNonLocal, &sq, &opts()).unwrap();
    let surf = geometric_phases_surface(&TwoSpinNonLocal, &sq, &opts()).unwrap();
    for (l, s) in line.iter().zip(&surf) {
        assert!((l - s).abs() < 1e-6, "line {l} surface {s}");
    }
}

#[test]
fn square_on_the_crossing_line_is_refused() {
    // chi1 = chi2 makes the non-local spectrum degenerate
    let sq = ParameterCircuit::square(vec![0.3, 0.3], 0.1, (0, 1), 16).unwrap();
    let err = geometric_phases_line(&TwoSpinNonLocal, &sq, &opts()).unwrap_err();
    assert!(matches!(err, Error::DegenerateSpectrum { .. }), "{err}");
}

#[test]
fn spin_line_matches_surface_hermitian_and_lossy() {
    for loss in [0.0, 0.3] {
        let fam = SpinInField { loss };
        let circ = ParameterCircuit::circle(vec![0.2, -0.1, 0.8], 0.5, (0, 1), 32).unwrap();
        let line = geometric_phases_line(&fam, &circ, &opts()).unwrap();
        let surf = geometric_phases_surface(&fam, &circ, &opts()).unwrap();
        for (l, s) in line.iter().zip(&surf) {
            assert!((l - s).abs() < 1e-6, "loss {loss}: line {l} surface {s}");
        }
        assert!(line[0].abs() > 0.1);
        let sq = ParameterCircuit::square(vec![0.1, 0.2, 0.9], 0.6, (1, 2), 16).unwrap();
        let line = geometric_phases_line(&fam, &sq, &opts()).unwrap();
        let surf = geometric_phases_surface(&fam, &sq, &opts()).unwrap();
        for (l, s) in line.iter().zip(&surf) {
            assert!((l - s).abs() < 1e-6, "loss {loss}: square line {l} surface {s}");
        }
    }
}

#[test]
fn reversal_negates_and_concatenation_cancels() {
    let fam = SpinInField { loss: 0.25 };
    let sq = ParameterCircuit::square(vec![0.4, 0.1, 0.7], 0.5, (0, 2), 16).unwrap();
    let fwd = geometric_phases_line(&fam, &sq, &opts()).unwrap();
    let bwd = geometric_phases_line(&fam, &sq.reversed(), &opts()).unwrap();
    for (a, b) in fwd.iter().zip(&bwd) {
        assert!((a + b).abs() < 1e-10);
    }
    let CircuitPath::Polyline(p) = &sq.path else { unreachable!() };
    let mut both = p.clone();
    both.extend(p.iter().rev().skip(1).cloned());
    let there_and_back = ParameterCircuit::polygon(both, 32).unwrap();
    for ph in geometric_phases_line(&fam, &there_and_back, &opts()).unwrap() {
        assert!(ph.abs() < 1e-10);
    }
}

#[test]
fn local_phases_ignore_the_other_spin() {
    let base = ParameterCircuit::polygon(vec![vec![0.1, 0.2], vec![0.6, 0.2], vec![0.4, 0.5]], 16).unwrap();
    let wiggled = ParameterCircuit::polygon(vec![vec![0.1, 0.2], vec![0.6, 0.9], vec![0.4, -0.3]], 16).unwrap();
    let a = geometric_phases_line(&TwoSpinLocal, &base, &opts()).unwrap();
    let b = geometric_phases_line(&TwoSpinLocal, &wiggled, &opts()).unwrap();
    let blocks = TwoSpinLocal.frame(&[0.1, 0.2], &EigenOptions::default()).unwrap().blocks;
    for k in 0..a.len() {
        if blocks[k] == 0 {
            assert!((a[k] - b[k]).abs() < 1e-10);
        }
    }
    // mixed-parameter curvature is identically zero for the local generator
    for v in curvature(&TwoSpinLocal, &[0.3, 0.7], &EigenOptions::default()).unwrap() {
        assert!(v[(0, 1)].norm() < 1e-12);
    }
}

#[test]
fn open_circuits_and_wrong_dimensions_are_rejected() {
    let open = ParameterCircuit::polyline(vec![vec![0.0, 0.0], vec![0.1, 0.0]], 4).unwrap();
    assert!(geometric_phases_line(&TwoSpinLocal, &open, &opts()).is_err());
    let sq = ParameterCircuit::square(vec![0.0, 0.0, 0.0], 0.1, (0, 1), 4).unwrap();
    assert!(geometric_phases_line(&TwoSpinLocal, &sq, &opts()).is_err());
}

/// A protocol steering the field around a circle at constant magnitude.
struct Rotating {
    radius: f64,
    z: f64,
    period: f64,
}

impl Protocol for Rotating {
    fn omega(&self, _t: f64) -> Result<f64> {
        Ok(40.0)
    }
    fn omega_dot(&self, _t: f64) -> Result<f64> {
        Ok(0.0)
    }
    fn chi(&self, t: f64) -> Result<Vec<f64>> {
        let a = std::f64::consts::TAU * t / self.period;
        Ok(vec![self.radius * a.cos(), self.radius * a.sin(), self.z])
    }
    fn chi_dot(&self, t: f64) -> Result<Vec<f64>> {
        let w = std::f64::consts::TAU / self.period;
        let a = w * t;
        Ok(vec![-self.radius * w * a.sin(), self.radius * w * a.cos(), 0.0])
    }
}

#[test]
fn inertial_geometric_part_matches_closed_circuit() {
    let fam = SpinInField { loss: 0.1 };
    let prot = Rotating { radius: 0.6, z: 0.8, period: 2.0 };
    let fact = Factorization::new(&fam, &prot).unwrap();
    let v0 = LiouvilleVector::new(0.0, inertial_core::CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
    let circ = ParameterCircuit::circle(vec![0.0, 0.0, 0.8], 0.6, (0, 1), 64).unwrap();
    let line = geometric_phases_line(&fam, &circ, &opts()).unwrap();
    // the propagator's transport is second order in its panel width
    let mut errs = Vec::new();
    for panels in [256, 1024] {
        let eng = EngineOptions { min_panels: panels, ..EngineOptions::default() };
        let (_, sol) = inertial_trajectory(&fact, &v0, &[2.0], true, &eng).unwrap().pop().unwrap();
        let acc = accumulated_phase(&sol);
        let err = (0..2).map(|k| (acc.geometric[k] - line[k]).abs()).fold(0.0, f64::max);
        for k in 0..2 {
            assert!((acc.total[k] - (acc.dynamical[k] - c(acc.geometric[k], 0.0))).norm() < 1e-12);
        }
        errs.push(err);
    }
    assert!(errs[1] < 1e-7 && errs[1] < errs[0] / 8.0, "{errs:?}");
}

#[test]
fn constant_parameters_accumulate_dynamical_phase_only() {
    let fam = SpinInField::default();
    let prot = Rotating { radius: 0.0, z: 0.7, period: 1.0 };
    let fact = Factorization::new(&fam, &prot).unwrap();
    let v0 = LiouvilleVector::new(0.0, inertial_core::CVector::from_vec(vec![c(0.6, 0.0), c(0.8, 0.0)]));
    let (_, sol) = inertial_trajectory(&fact, &v0, &[0.5], true, &EngineOptions::default()).unwrap().pop().unwrap();
    let acc = accumulated_phase(&sol);
    for k in 0..2 {
        assert!(acc.geometric[k].abs() < 1e-12);
        assert!((acc.total[k] - sol.frame.lambdas[k] * sol.theta).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn loop_transport_is_gauge_invariant(phases in proptest::collection::vec(0.0..std::f64::consts::TAU, 2 * 33)) {
        let fam = SpinInField { loss: 0.2 };
        let circ = ParameterCircuit::circle(vec![0.1, 0.0, 0.9], 0.4, (0, 1), 32).unwrap();
        let eo = EigenOptions::default();
        let frames: Vec<_> = circ.nodes(0).iter().map(|p| fam.frame(p, &eo).unwrap()).collect();
        let base = loop_transport(&frames).unwrap();
        let regauged: Vec<_> = frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let tr = Tracking {
                    permutation: vec![0, 1],
                    phases: vec![c(0.0, phases[2 * i]).exp(), c(0.0, phases[2 * i + 1]).exp()],
                };
                // keep the closing frame identical to the first
                if i + 1 == frames.len() { f.clone() } else { f.apply_tracking(&tr) }
            })
            .collect();
        let moved = loop_transport(&regauged).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a.im - b.im).abs() < 1e-10);
        }
    }

    #[test]
    fn retraced_random_paths_vanish(pts in proptest::collection::vec((-0.8f64..0.8, -0.8f64..0.8, 0.3f64..1.2), 2..5)) {
        let fam = SpinInField { loss: 0.1 };
        let way: Vec<Vec<f64>> = pts.iter().map(|&(x, y, z)| vec![x, y, z]).collect();
        let circ = ParameterCircuit::retraced(way, 8).unwrap();
        for p in geometric_phases_line(&fam, &circ, &opts()).unwrap() {
            prop_assert!(p.abs() < 1e-10);
        }
    }
}
