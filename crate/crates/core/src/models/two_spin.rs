use super::tls::{field_basis, tls_block};
use super::{density_from_vector, expectation_vector, heisenberg_generator, spin_ops, DensityState, Model};
use crate::engine::{GeneratorFamily, LiouvilleVector, Protocol};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigenvalues, kron, CMatrix};

/// `B(chi1) (+) B(chi2)` on the local operators `{H1, L1, C1, H2, L2, C2}`.
pub fn two_spin_local_generator(chi: &[f64]) -> CMatrix {
    let mut b = CMatrix::zeros(6, 6);
    b.view_mut((0, 0), (3, 3)).copy_from(&tls_block(chi[0]));
    b.view_mut((3, 3), (3, 3)).copy_from(&tls_block(chi[1]));
    b
}

/// Kronecker sum `B(chi1) x 1 + 1 x B(chi2)` on the products `X1 Y2`,
/// indexed `3 a + b`.
pub fn two_spin_nonlocal_generator(chi: &[f64]) -> CMatrix {
    let id = CMatrix::identity(3, 3);
    kron(&tls_block(chi[0]), &id) + kron(&id, &tls_block(chi[1]))
}

/// Full 16-dimensional generator: local (6), non-local (9), identity (1).
pub fn two_spin_generator(chi: &[f64]) -> CMatrix {
    let mut b = CMatrix::zeros(16, 16);
    b.view_mut((0, 0), (6, 6)).copy_from(&two_spin_local_generator(chi));
    b.view_mut((6, 6), (9, 9)).copy_from(&two_spin_nonlocal_generator(chi));
    b
}

/// The generators are affine in `chi`, so `dB/dchi_j = B(e_j) - B(0)` exactly.
fn affine_gradient(b: impl Fn(&[f64]) -> CMatrix) -> Vec<CMatrix> {
    let b0 = b(&[0.0, 0.0]);
    vec![b(&[1.0, 0.0]) - &b0, b(&[0.0, 1.0]) - &b0]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TwoSpinGenerator;

impl GeneratorFamily for TwoSpinGenerator {
    fn dim(&self) -> usize {
        16
    }
    fn n_params(&self) -> usize {
        2
    }
    fn generator(&self, chi: &[f64]) -> CMatrix {
        two_spin_generator(chi)
    }
    fn gradient(&self, _chi: &[f64]) -> Vec<CMatrix> {
        affine_gradient(two_spin_generator)
    }
    fn blocks(&self) -> Vec<Vec<usize>> {
        vec![vec![0, 1, 2], vec![3, 4, 5], (6..15).collect(), vec![15]]
    }
    fn rescaling_weights(&self) -> Vec<f64> {
        let mut w = vec![1.0; 6];
        w.extend(std::iter::repeat_n(2.0, 9));
        w.push(0.0);
        w
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TwoSpinLocal;

impl GeneratorFamily for TwoSpinLocal {
    fn dim(&self) -> usize {
        6
    }
    fn n_params(&self) -> usize {
        2
    }
    fn generator(&self, chi: &[f64]) -> CMatrix {
        two_spin_local_generator(chi)
    }
    fn gradient(&self, _chi: &[f64]) -> Vec<CMatrix> {
        affine_gradient(two_spin_local_generator)
    }
    fn blocks(&self) -> Vec<Vec<usize>> {
        vec![vec![0, 1, 2], vec![3, 4, 5]]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TwoSpinNonLocal;

impl GeneratorFamily for TwoSpinNonLocal {
    fn dim(&self) -> usize {
        9
    }
    fn n_params(&self) -> usize {
        2
    }
    fn generator(&self, chi: &[f64]) -> CMatrix {
        two_spin_nonlocal_generator(chi)
    }
    fn gradient(&self, _chi: &[f64]) -> Vec<CMatrix> {
        affine_gradient(two_spin_nonlocal_generator)
    }
}

/// Common Rabi frequency `R(t) = R0 + r t` and field angles
/// `alpha_i(t) = alpha_i(0) - int chi_i R dt`, so that spin `i` sees
/// `omega_i = R cos alpha_i`, `epsilon_i = R sin alpha_i` and adiabatic
/// parameter `chi_i(t) = chi0_i + a_i t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpinProtocol {
    pub rabi0: f64,
    pub rabi_rate: f64,
    pub chi0: [f64; 2],
    pub accel: [f64; 2],
    pub alpha0: [f64; 2],
}

impl TwoSpinProtocol {
    pub fn alpha(&self, i: usize, t: f64) -> f64 {
        let (r0, r1) = (self.rabi0, self.rabi_rate);
        let (c0, a) = (self.chi0[i], self.accel[i]);
        self.alpha0[i] - (c0 * r0 * t + 0.5 * (c0 * r1 + a * r0) * t * t + a * r1 * t * t * t / 3.0)
    }

    /// `(omega_i, epsilon_i)` and their time derivatives.
    pub fn field(&self, i: usize, t: f64) -> Result<([f64; 2], [f64; 2])> {
        let r = self.omega(t)?;
        let rd = self.rabi_rate;
        let al = self.alpha(i, t);
        let ad = -(self.chi0[i] + self.accel[i] * t) * r;
        let (s, co) = al.sin_cos();
        Ok(([r * co, r * s], [rd * co - r * s * ad, rd * s + r * co * ad]))
    }

    fn spin_basis(&self, i: usize, t: f64) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
        let ([w, e], [wd, ed]) = self.field(i, t)?;
        let r = self.omega(t)?;
        let [sx, sy, sz] = spin_ops();
        let basis = field_basis(w, e, r);
        let d = vec![
            &sz * c(wd, 0.0) + &sx * c(ed, 0.0),
            &sz * c(ed, 0.0) - &sx * c(wd, 0.0),
            &sy * c(self.rabi_rate, 0.0),
            CMatrix::zeros(2, 2),
        ];
        Ok((basis, d))
    }

    /// Operator basis on the pair in the order local, non-local, identity,
    /// with the explicit time derivative of each element.
    pub fn basis_with_derivative(&self, t: f64) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
        let (b1, d1) = self.spin_basis(0, t)?;
        let (b2, d2) = self.spin_basis(1, t)?;
        let id = CMatrix::identity(2, 2);
        let z = CMatrix::zeros(2, 2);
        let mut basis = Vec::with_capacity(16);
        let mut der = Vec::with_capacity(16);
        for a in 0..3 {
            basis.push(kron(&b1[a], &id));
            der.push(kron(&d1[a], &id));
        }
        for b in 0..3 {
            basis.push(kron(&id, &b2[b]));
            der.push(kron(&z, &b2[b]) + kron(&id, &d2[b]));
        }
        for a in 0..3 {
            for b in 0..3 {
                basis.push(kron(&b1[a], &b2[b]));
                der.push(kron(&d1[a], &b2[b]) + kron(&b1[a], &d2[b]));
            }
        }
        basis.push(CMatrix::identity(4, 4));
        der.push(CMatrix::zeros(4, 4));
        Ok((basis, der))
    }

    pub fn hamiltonian(&self, t: f64) -> Result<CMatrix> {
        let (b, _) = self.basis_with_derivative(t)?;
        Ok(&b[0] + &b[3])
    }
}

impl Protocol for TwoSpinProtocol {
    fn omega(&self, t: f64) -> Result<f64> {
        let r = self.rabi0 + self.rabi_rate * t;
        if !(r > 0.0) || t < 0.0 {
            return Err(Error::DomainExceeded { t, reason: "Rabi frequency must stay positive".into() });
        }
        Ok(r)
    }
    fn omega_dot(&self, t: f64) -> Result<f64> {
        self.omega(t)?;
        Ok(self.rabi_rate)
    }
    fn chi(&self, t: f64) -> Result<Vec<f64>> {
        Ok(vec![self.chi0[0] + self.accel[0] * t, self.chi0[1] + self.accel[1] * t])
    }
    fn chi_dot(&self, _t: f64) -> Result<Vec<f64>> {
        Ok(self.accel.to_vec())
    }
    fn domain_end(&self) -> f64 {
        if self.rabi_rate < 0.0 {
            self.rabi0 / -self.rabi_rate
        } else {
            f64::INFINITY
        }
    }
}

/// Two independently driven spins starting in a product of Bloch states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpin {
    pub protocol: TwoSpinProtocol,
    pub bloch0: [[f64; 3]; 2],
}

fn qubit_density(r: [f64; 3]) -> CMatrix {
    let [sx, sy, sz] = spin_ops();
    CMatrix::identity(2, 2) * c(0.5, 0.0) + (sx * c(r[0], 0.0) + sy * c(r[1], 0.0) + sz * c(r[2], 0.0))
}

impl TwoSpin {
    pub fn density_matrix(&self, v: &LiouvilleVector) -> Result<CMatrix> {
        let (basis, _) = self.protocol.basis_with_derivative(v.t)?;
        Ok(density_from_vector(&v.real_parts(), &basis))
    }
}

impl Model for TwoSpin {
    fn family(&self) -> &dyn GeneratorFamily {
        &TwoSpinGenerator
    }
    fn protocol(&self) -> &dyn Protocol {
        &self.protocol
    }
    fn basis_labels(&self) -> Vec<String> {
        let one = ["H", "L", "C"];
        let mut out: Vec<String> = one.iter().map(|s| format!("{s}1")).collect();
        out.extend(one.iter().map(|s| format!("{s}2")));
        for a in one {
            for b in one {
                out.push(format!("{a}1{b}2"));
            }
        }
        out.push("I".into());
        out
    }
    fn initial_vector(&self) -> LiouvilleVector {
        let rho = kron(&qubit_density(self.bloch0[0]), &qubit_density(self.bloch0[1]));
        let (basis, _) = self.protocol.basis_with_derivative(0.0).expect("t = 0 is in the domain");
        expectation_vector(0.0, &rho, &basis)
    }
    fn reconstruct_state(&self, v: &LiouvilleVector) -> Result<DensityState> {
        if v.data.len() != 16 {
            return Err(Error::InvalidInput("two-spin vectors have 16 components".into()));
        }
        let rho = self.density_matrix(v)?;
        let min = hermitian_eigenvalues(&rho)[0];
        if min < -1e-9 {
            return Err(Error::UnphysicalState(format!("two-spin density has eigenvalue {min}")));
        }
        Ok(DensityState::TwoQubit { rho })
    }
    fn direct_generator(&self, t: f64) -> Result<CMatrix> {
        let (basis, der) = self.protocol.basis_with_derivative(t)?;
        let h = &basis[0] + &basis[3];
        heisenberg_generator(&basis, &der, &h)
    }
    fn adiabatic_parameter(&self, t: f64) -> Result<Vec<f64>> {
        let r = self.protocol.omega(t)?;
        (0..2)
            .map(|i| {
                let ([w, e], [wd, ed]) = self.protocol.field(i, t)?;
                Ok((wd * e - w * ed) / (r * r * r))
            })
            .collect()
    }
}
