use super::{smallest_positive_root, DensityState, Model};
use crate::engine::{GeneratorFamily, LiouvilleVector, Protocol};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, I};

/// Basis order of the oscillator Liouville space.
pub const HO_LABELS: [&str; 6] = ["H", "L", "C", "K", "J", "I"];

/// Tolerance on the uncertainty relation when reconstructing Gaussian states.
const UNCERTAINTY_TOL: f64 = 1e-6;

/// Traceless oscillator generator: eigenvalues `{0, ±kappa}` on `{H, L, C}` and
/// `{±kappa/2}` on `{K, J}`, with `kappa = sqrt(4 - chi^2)`.
pub fn ho_generator(chi: f64) -> CMatrix {
    let mut b = CMatrix::zeros(6, 6);
    b[(0, 1)] = -I * chi;
    b[(1, 0)] = -I * chi;
    b[(1, 2)] = -I * 2.0;
    b[(2, 1)] = I * 2.0;
    b[(3, 3)] = I * (0.5 * chi);
    b[(3, 4)] = I;
    b[(4, 3)] = -I;
    b[(4, 4)] = -I * (0.5 * chi);
    b
}

/// The generator including the `i chi` identity part on `{H, L, C}`; this is
/// what multiplies `omega(t)` in the Heisenberg equation.
pub fn ho_generator_full(chi: f64) -> CMatrix {
    let mut b = ho_generator(chi);
    for i in 0..3 {
        b[(i, i)] += I * chi;
    }
    b
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HoGenerator;

impl GeneratorFamily for HoGenerator {
    fn dim(&self) -> usize {
        6
    }
    fn n_params(&self) -> usize {
        1
    }
    fn generator(&self, chi: &[f64]) -> CMatrix {
        ho_generator(chi[0])
    }
    fn gradient(&self, _chi: &[f64]) -> Vec<CMatrix> {
        let mut d = CMatrix::zeros(6, 6);
        d[(0, 1)] = -I;
        d[(1, 0)] = -I;
        d[(3, 3)] = I * 0.5;
        d[(4, 4)] = -I * 0.5;
        vec![d]
    }
    fn blocks(&self) -> Vec<Vec<usize>> {
        vec![vec![0, 1, 2], vec![3, 4], vec![5]]
    }
    fn rescaling_weights(&self) -> Vec<f64> {
        vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]
    }
}

/// Frequency ramp with linearly varying adiabatic parameter:
/// `omega(t) = omega0 / (1 - omega0 (chi0 t + a t^2 / 2))`, `mu(t) = chi0 + a t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoProtocol {
    pub omega0: f64,
    pub chi0: f64,
    pub accel: f64,
}

impl HoProtocol {
    pub fn new(omega0: f64, chi0: f64, accel: f64) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) || !chi0.is_finite() || !accel.is_finite() {
            return Err(Error::InvalidInput("oscillator protocol needs omega0 > 0 and finite rates".into()));
        }
        Ok(Self { omega0, chi0, accel })
    }

    /// Protocol reaching `omega_f` at `t_f` for a given acceleration. The
    /// frequency condition is linear in `chi0`, so it is solved exactly.
    pub fn for_endpoints(omega0: f64, omega_f: f64, accel: f64, t_f: f64) -> Result<Self> {
        if !(omega_f > 0.0) || !(t_f > 0.0) {
            return Err(Error::InvalidInput("need omega_f > 0 and t_f > 0".into()));
        }
        let s = (1.0 - omega0 / omega_f) / omega0;
        Self::new(omega0, (s - 0.5 * accel * t_f * t_f) / t_f, accel)
    }

    fn denom(&self, t: f64) -> f64 {
        1.0 - self.omega0 * (self.chi0 * t + 0.5 * self.accel * t * t)
    }

    pub fn mu(&self, t: f64) -> f64 {
        self.chi0 + self.accel * t
    }

    pub fn omega_ddot(&self, t: f64) -> Result<f64> {
        let w = self.omega(t)?;
        let wd = w * w * self.mu(t);
        Ok(2.0 * w * wd * self.mu(t) + w * w * self.accel)
    }

    /// Largest |mu| on `[0, t]`.
    pub fn mu_max(&self, t: f64) -> f64 {
        self.mu(0.0).abs().max(self.mu(t).abs())
    }

    /// Check that `[0, t_f]` is inside the domain and below the degeneracy at |mu| = 2.
    pub fn validate_horizon(&self, t_f: f64) -> Result<()> {
        if t_f >= self.domain_end() {
            return Err(Error::DomainExceeded { t: t_f, reason: "frequency diverges before t_f".into() });
        }
        if self.mu_max(t_f) >= 2.0 {
            return Err(Error::DomainExceeded { t: t_f, reason: format!("|mu| reaches {} >= 2", self.mu_max(t_f)) });
        }
        Ok(())
    }
}

impl Protocol for HoProtocol {
    fn omega(&self, t: f64) -> Result<f64> {
        let d = self.denom(t);
        if !(d > 0.0) || t < 0.0 {
            return Err(Error::DomainExceeded { t, reason: "oscillator frequency is singular".into() });
        }
        Ok(self.omega0 / d)
    }
    fn omega_dot(&self, t: f64) -> Result<f64> {
        let w = self.omega(t)?;
        Ok(w * w * self.mu(t))
    }
    fn chi(&self, t: f64) -> Result<Vec<f64>> {
        Ok(vec![self.mu(t)])
    }
    fn chi_dot(&self, _t: f64) -> Result<Vec<f64>> {
        Ok(vec![self.accel])
    }
    fn domain_end(&self) -> f64 {
        smallest_positive_root(-0.5 * self.omega0 * self.accel, -self.omega0 * self.chi0, 1.0)
    }
    fn scaled_time_closed(&self, t: f64) -> Option<f64> {
        if self.accel != 0.0 {
            return None;
        }
        let x = self.omega0 * self.chi0 * t;
        if self.chi0 == 0.0 {
            Some(self.omega0 * t)
        } else {
            Some(-(-x).ln_1p() / self.chi0)
        }
    }
}

/// Driven harmonic oscillator starting in the (displaced) ground state of `H(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicOscillator {
    pub mass: f64,
    pub protocol: HoProtocol,
    pub q0: f64,
    pub p0: f64,
}

impl HarmonicOscillator {
    pub fn new(protocol: HoProtocol) -> Self {
        Self { mass: 1.0, protocol, q0: 0.0, p0: 0.0 }
    }

    /// Liouville vector at time `t` of a Gaussian state with the given moments.
    pub fn gaussian_vector(&self, t: f64, mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<LiouvilleVector> {
        let w = self.protocol.omega(t)?;
        let m = self.mass;
        let qq = cov[0][0] + mean[0] * mean[0];
        let pp = cov[1][1] + mean[1] * mean[1];
        let qp = cov[0][1] + mean[0] * mean[1];
        let kin = pp / (2.0 * m);
        let pot = 0.5 * m * w * w * qq;
        Ok(LiouvilleVector::from_real(
            t,
            &[kin + pot, kin - pot, w * qp, w.sqrt() * mean[0], mean[1] / (m * w.sqrt()), 1.0],
        ))
    }
}

impl Model for HarmonicOscillator {
    fn family(&self) -> &dyn GeneratorFamily {
        &HoGenerator
    }
    fn protocol(&self) -> &dyn Protocol {
        &self.protocol
    }
    fn basis_labels(&self) -> Vec<String> {
        HO_LABELS.iter().map(|s| s.to_string()).collect()
    }
    fn initial_vector(&self) -> LiouvilleVector {
        let w = self.protocol.omega0;
        let cov = [[1.0 / (2.0 * self.mass * w), 0.0], [0.0, 0.5 * self.mass * w]];
        self.gaussian_vector(0.0, [self.q0, self.p0], cov).expect("t = 0 is in the domain")
    }
    fn reconstruct_state(&self, v: &LiouvilleVector) -> Result<DensityState> {
        if v.data.len() != 6 {
            return Err(Error::InvalidInput("oscillator vectors have 6 components".into()));
        }
        let w = self.protocol.omega(v.t)?;
        let m = self.mass;
        let x = v.real_parts();
        let q = x[3] / w.sqrt();
        let p = m * w.sqrt() * x[4];
        let pp = m * (x[0] + x[1]);
        let qq = (x[0] - x[1]) / (m * w * w);
        let qp = x[2] / w;
        let cov = [[qq - q * q, qp - q * p], [qp - q * p, pp - p * p]];
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        if !(det >= 0.25 - UNCERTAINTY_TOL) || !(cov[0][0] > 0.0) {
            return Err(Error::UnphysicalState(format!("Gaussian covariance determinant {det} below 1/4")));
        }
        Ok(DensityState::Gaussian { mean: [q, p], cov })
    }
    fn direct_generator(&self, t: f64) -> Result<CMatrix> {
        let w = self.protocol.omega(t)?;
        let wd = self.protocol.omega_dot(t)?;
        Ok(ho_direct_generator(self.mass, w, wd))
    }
    fn adiabatic_parameter(&self, t: f64) -> Result<Vec<f64>> {
        let w = self.protocol.omega(t)?;
        Ok(vec![self.protocol.omega_dot(t)? / (w * w)])
    }
}

/// Quadratic phase-space polynomial `a0 + a1 q + a2 p + a3 q^2 + a4 qp + a5 p^2`.
/// For polynomials of degree at most two the Weyl-symbol commutator reduces to
/// the Poisson bracket, so these represent the operator algebra exactly.
type Poly = [f64; 6];

fn lin_product(l: [f64; 3], r: [f64; 3]) -> Poly {
    [
        l[0] * r[0],
        l[0] * r[1] + l[1] * r[0],
        l[0] * r[2] + l[2] * r[0],
        l[1] * r[1],
        l[1] * r[2] + l[2] * r[1],
        l[2] * r[2],
    ]
}

fn poisson(f: &Poly, g: &Poly) -> Poly {
    let dq = |a: &Poly| [a[1], 2.0 * a[3], a[4]];
    let dp = |a: &Poly| [a[2], a[4], 2.0 * a[5]];
    let x = lin_product(dq(f), dp(g));
    let y = lin_product(dp(f), dq(g));
    std::array::from_fn(|i| x[i] - y[i])
}

/// Heisenberg generator of the oscillator basis at frequency `w` and rate `wd`,
/// assembled from Poisson brackets with `H` plus explicit time derivatives.
pub fn ho_direct_generator(mass: f64, w: f64, wd: f64) -> CMatrix {
    let m = mass;
    let sw = w.sqrt();
    let basis: [Poly; 6] = [
        [0.0, 0.0, 0.0, 0.5 * m * w * w, 0.0, 0.5 / m],
        [0.0, 0.0, 0.0, -0.5 * m * w * w, 0.0, 0.5 / m],
        [0.0, 0.0, 0.0, 0.0, w, 0.0],
        [0.0, sw, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0 / (m * sw), 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ];
    let dbasis: [Poly; 6] = [
        [0.0, 0.0, 0.0, m * w * wd, 0.0, 0.0],
        [0.0, 0.0, 0.0, -m * w * wd, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, wd, 0.0],
        [0.0, 0.5 * wd / sw, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -0.5 * wd / (m * w * sw), 0.0, 0.0, 0.0],
        [0.0; 6],
    ];
    let h = basis[0];
    // columns of p are the basis polynomials; solve p x = d for each derivative
    let p = nalgebra::DMatrix::<f64>::from_fn(6, 6, |r, col| basis[col][r]);
    let lu = p.lu();
    let mut out = CMatrix::zeros(6, 6);
    for i in 0..6 {
        let br = poisson(&basis[i], &h);
        let d = nalgebra::DVector::<f64>::from_fn(6, |r, _| br[r] + dbasis[i][r]);
        let x = lu.solve(&d).expect("oscillator basis spans quadratic polynomials");
        for j in 0..6 {
            out[(i, j)] = I * x[j];
        }
    }
    out
}

/// Closed-form eigenoperator coefficient vectors, `conj(G_k)` up to scale, in
/// the mode order `{-kappa, 0, +kappa}` then `{-kappa/2, +kappa/2}`.
pub fn ho_closed_form_modes(chi: f64) -> Vec<(f64, CVector)> {
    let k = (4.0 - chi * chi).sqrt();
    let up = |v: [num_complex::Complex64; 3]| CVector::from_vec(vec![v[0], v[1], v[2], c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let low = |a: num_complex::Complex64, b: num_complex::Complex64| {
        CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), a, b, c(0.0, 0.0)])
    };
    vec![
        (-k, up([c(chi, 0.0), c(0.0, -k), c(2.0, 0.0)])),
        (0.0, up([c(2.0, 0.0), c(0.0, 0.0), c(chi, 0.0)])),
        (k, up([c(chi, 0.0), c(0.0, k), c(2.0, 0.0)])),
        (-0.5 * k, low(c(0.5 * chi, 0.5 * k), c(1.0, 0.0))),
        (0.5 * k, low(c(0.5 * chi, -0.5 * k), c(1.0, 0.0))),
    ]
}
