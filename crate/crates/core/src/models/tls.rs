use super::{density_from_vector, heisenberg_generator, smallest_positive_root, spin_ops, DensityState, Model};
use crate::engine::{GeneratorFamily, LiouvilleVector, Protocol};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, I};

/// Basis order of the two-level Liouville space.
pub const TLS_LABELS: [&str; 4] = ["H", "L", "C", "I"];

/// The 3x3 Hermitian block `i [[0, chi, 0], [-chi, 0, 1], [0, -1, 0]]`.
pub fn tls_block(chi: f64) -> CMatrix {
    let mut b = CMatrix::zeros(3, 3);
    b[(0, 1)] = I * chi;
    b[(1, 0)] = -I * chi;
    b[(1, 2)] = I;
    b[(2, 1)] = -I;
    b
}

/// Block plus the decoupled identity component.
pub fn tls_generator(chi: f64) -> CMatrix {
    let mut b = CMatrix::zeros(4, 4);
    b.view_mut((0, 0), (3, 3)).copy_from(&tls_block(chi));
    b
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TlsGenerator;

impl GeneratorFamily for TlsGenerator {
    fn dim(&self) -> usize {
        4
    }
    fn n_params(&self) -> usize {
        1
    }
    fn generator(&self, chi: &[f64]) -> CMatrix {
        tls_generator(chi[0])
    }
    fn gradient(&self, _chi: &[f64]) -> Vec<CMatrix> {
        let mut d = CMatrix::zeros(4, 4);
        d[(0, 1)] = I;
        d[(1, 0)] = -I;
        vec![d]
    }
    fn blocks(&self) -> Vec<Vec<usize>> {
        vec![vec![0, 1, 2], vec![3]]
    }
    fn rescaling_weights(&self) -> Vec<f64> {
        vec![1.0, 1.0, 1.0, 0.0]
    }
}

/// `H = omega(t) Sz + epsilon Sx` with `z = omega / Rabi` moving as
/// `z(t) = z0 + epsilon (chi0 t + a t^2 / 2)`, which makes the adiabatic
/// parameter `chi0 + a t` and the time-scale the Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsProtocol {
    pub epsilon: f64,
    pub omega0: f64,
    pub chi0: f64,
    pub accel: f64,
}

impl TlsProtocol {
    pub fn new(epsilon: f64, omega0: f64, chi0: f64, accel: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !omega0.is_finite() || !chi0.is_finite() || !accel.is_finite() {
            return Err(Error::InvalidInput("two-level protocol needs epsilon > 0 and finite rates".into()));
        }
        Ok(Self { epsilon, omega0, chi0, accel })
    }

    /// Protocol taking the Rabi frequency from `rabi0` to `rabi_f` in `t_f`
    /// (positive detuning branch); `chi0` follows in closed form.
    pub fn for_endpoints(epsilon: f64, rabi0: f64, rabi_f: f64, accel: f64, t_f: f64) -> Result<Self> {
        if !(rabi0 > epsilon && rabi_f > epsilon && t_f > 0.0) {
            return Err(Error::InvalidInput("need Rabi frequencies above epsilon and t_f > 0".into()));
        }
        let omega0 = (rabi0 * rabi0 - epsilon * epsilon).sqrt();
        let z0 = omega0 / rabi0;
        let zf = (rabi_f * rabi_f - epsilon * epsilon).sqrt() / rabi_f;
        let chi0 = ((zf - z0) / epsilon - 0.5 * accel * t_f * t_f) / t_f;
        Self::new(epsilon, omega0, chi0, accel)
    }

    pub fn rabi0(&self) -> f64 {
        self.omega0.hypot(self.epsilon)
    }

    pub fn mu(&self, t: f64) -> f64 {
        self.chi0 + self.accel * t
    }

    pub fn mu_max(&self, t: f64) -> f64 {
        self.mu(0.0).abs().max(self.mu(t).abs())
    }

    fn z(&self, t: f64) -> Result<f64> {
        let z = self.omega0 / self.rabi0() + self.epsilon * (self.chi0 * t + 0.5 * self.accel * t * t);
        if !(z.abs() < 1.0) || t < 0.0 {
            return Err(Error::DomainExceeded { t, reason: "detuning diverges".into() });
        }
        Ok(z)
    }

    /// Detuning `omega(t)`.
    pub fn detuning(&self, t: f64) -> Result<f64> {
        let z = self.z(t)?;
        Ok(self.epsilon * z / (1.0 - z * z).sqrt())
    }

    pub fn detuning_dot(&self, t: f64) -> Result<f64> {
        let z = self.z(t)?;
        Ok(self.epsilon * self.epsilon * self.mu(t) / (1.0 - z * z).powf(1.5))
    }

    pub fn validate_horizon(&self, t_f: f64) -> Result<()> {
        if t_f >= self.domain_end() {
            return Err(Error::DomainExceeded { t: t_f, reason: "detuning diverges before t_f".into() });
        }
        Ok(())
    }

    /// Operator basis `{H, L, C, I}` at time `t`.
    pub fn basis(&self, t: f64) -> Result<Vec<CMatrix>> {
        let w = self.detuning(t)?;
        let e = self.epsilon;
        let r = self.omega(t)?;
        Ok(field_basis(w, e, r))
    }
}

/// `{w Sz + e Sx, e Sz - w Sx, R Sy, 1}`.
pub(crate) fn field_basis(w: f64, e: f64, r: f64) -> Vec<CMatrix> {
    let [sx, sy, sz] = spin_ops();
    vec![
        &sz * c(w, 0.0) + &sx * c(e, 0.0),
        &sz * c(e, 0.0) - &sx * c(w, 0.0),
        &sy * c(r, 0.0),
        CMatrix::identity(2, 2),
    ]
}

impl Protocol for TlsProtocol {
    fn omega(&self, t: f64) -> Result<f64> {
        let z = self.z(t)?;
        Ok(self.epsilon / (1.0 - z * z).sqrt())
    }
    fn omega_dot(&self, t: f64) -> Result<f64> {
        let z = self.z(t)?;
        Ok(self.epsilon * self.epsilon * z * self.mu(t) / (1.0 - z * z).powf(1.5))
    }
    fn chi(&self, t: f64) -> Result<Vec<f64>> {
        Ok(vec![self.mu(t)])
    }
    fn chi_dot(&self, _t: f64) -> Result<Vec<f64>> {
        Ok(vec![self.accel])
    }
    fn domain_end(&self) -> f64 {
        let z0 = self.omega0 / self.rabi0();
        let a = 0.5 * self.epsilon * self.accel;
        let b = self.epsilon * self.chi0;
        smallest_positive_root(a, b, z0 - 1.0).min(smallest_positive_root(a, b, z0 + 1.0))
    }
}

/// Driven two-level system. The initial state is given by the expectation
/// values `(<H>, <L>, <C>)` at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelSystem {
    pub protocol: TlsProtocol,
    pub initial: [f64; 3],
}

impl TwoLevelSystem {
    pub fn new(protocol: TlsProtocol) -> Self {
        Self { protocol, initial: [4.0, 1.0, 1.0] }
    }

    /// Bloch vector to Liouville vector at time `t`.
    pub fn vector_from_bloch(&self, t: f64, r: [f64; 3]) -> Result<LiouvilleVector> {
        let w = self.protocol.detuning(t)?;
        let e = self.protocol.epsilon;
        let rabi = self.protocol.omega(t)?;
        let s = [0.5 * r[0], 0.5 * r[1], 0.5 * r[2]];
        Ok(LiouvilleVector::from_real(t, &[w * s[2] + e * s[0], e * s[2] - w * s[0], rabi * s[1], 1.0]))
    }

    /// Bloch vector of a Liouville vector at its time.
    pub fn bloch(&self, v: &LiouvilleVector) -> Result<[f64; 3]> {
        if v.data.len() != 4 {
            return Err(Error::InvalidInput("two-level vectors have 4 components".into()));
        }
        let w = self.protocol.detuning(v.t)?;
        let e = self.protocol.epsilon;
        let rabi = self.protocol.omega(v.t)?;
        let x = v.real_parts();
        let r2 = rabi * rabi;
        let sz = (w * x[0] + e * x[1]) / r2;
        let sx = (e * x[0] - w * x[1]) / r2;
        let sy = x[2] / rabi;
        Ok([2.0 * sx, 2.0 * sy, 2.0 * sz])
    }

    pub fn density_matrix(&self, v: &LiouvilleVector) -> Result<CMatrix> {
        Ok(density_from_vector(&v.real_parts(), &self.protocol.basis(v.t)?))
    }
}

impl Model for TwoLevelSystem {
    fn family(&self) -> &dyn GeneratorFamily {
        &TlsGenerator
    }
    fn protocol(&self) -> &dyn Protocol {
        &self.protocol
    }
    fn basis_labels(&self) -> Vec<String> {
        TLS_LABELS.iter().map(|s| s.to_string()).collect()
    }
    fn initial_vector(&self) -> LiouvilleVector {
        let [h, l, cc] = self.initial;
        LiouvilleVector::from_real(0.0, &[h, l, cc, 1.0])
    }
    fn reconstruct_state(&self, v: &LiouvilleVector) -> Result<DensityState> {
        let bloch = self.bloch(v)?;
        let n = bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1.0 + 1e-9 {
            return Err(Error::UnphysicalState(format!("Bloch vector length {n} exceeds 1")));
        }
        Ok(DensityState::Qubit { bloch })
    }
    fn direct_generator(&self, t: f64) -> Result<CMatrix> {
        let [sx, sy, sz] = spin_ops();
        let basis = self.protocol.basis(t)?;
        let wd = self.protocol.detuning_dot(t)?;
        let rd = self.protocol.omega_dot(t)?;
        let dbasis = vec![&sz * c(wd, 0.0), &sx * c(-wd, 0.0), &sy * c(rd, 0.0), CMatrix::zeros(2, 2)];
        heisenberg_generator(&basis, &dbasis, &basis[0])
    }
    fn adiabatic_parameter(&self, t: f64) -> Result<Vec<f64>> {
        // epsilon is constant, so its derivative drops out
        let r = self.protocol.omega(t)?;
        Ok(vec![self.protocol.detuning_dot(t)? * self.protocol.epsilon / (r * r * r)])
    }
}

/// Closed-form eigenoperator coefficient vectors, `conj(G_k)` up to scale, in
/// the mode order `{-kappa, 0, +kappa}`.
pub fn tls_closed_form_modes(chi: f64) -> Vec<(f64, CVector)> {
    let k = (1.0 + chi * chi).sqrt();
    let v = |a, b, cc| CVector::from_vec(vec![a, b, cc, c(0.0, 0.0)]);
    vec![
        (-k, v(c(-chi, 0.0), c(0.0, k), c(1.0, 0.0))),
        (0.0, v(c(1.0, 0.0), c(0.0, 0.0), c(chi, 0.0))),
        (k, v(c(-chi, 0.0), c(0.0, -k), c(1.0, 0.0))),
    ]
}
