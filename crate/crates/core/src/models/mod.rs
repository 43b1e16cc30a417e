//! Concrete driven models: harmonic oscillator, two-level system and a pair
//! of independently driven spins.

mod ho;
mod tls;
mod two_spin;

pub use ho::{
    ho_closed_form_modes,
    ho_direct_generator, ho_generator, ho_generator_full, HarmonicOscillator, HoGenerator, HoProtocol, HO_LABELS,
};
pub use tls::{tls_block, tls_closed_form_modes, tls_generator, TlsGenerator, TlsProtocol, TwoLevelSystem, TLS_LABELS};
pub use two_spin::{
    two_spin_generator, two_spin_local_generator, two_spin_nonlocal_generator, TwoSpin, TwoSpinGenerator,
    TwoSpinLocal, TwoSpinNonLocal, TwoSpinProtocol,
};

use crate::engine::{Factorization, GeneratorFamily, LiouvilleVector, Protocol};
use crate::error::{Error, Result};
use crate::linalg::{c, commutator, CMatrix, C64, I};

/// Physical state recovered from a Liouville vector.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityState {
    /// Gaussian oscillator state: means `(q, p)` and symmetrized covariance.
    Gaussian { mean: [f64; 2], cov: [[f64; 2]; 2] },
    /// Qubit Bloch vector `r = 2 <S>`.
    Qubit { bloch: [f64; 3] },
    /// Two-qubit density matrix.
    TwoQubit { rho: CMatrix },
}

/// A model: generator family, protocol and the map between Liouville vectors
/// and physical states.
pub trait Model: Sync {
    fn family(&self) -> &dyn GeneratorFamily;
    fn protocol(&self) -> &dyn Protocol;
    fn basis_labels(&self) -> Vec<String>;
    /// Liouville vector of the initial state at `t = 0`.
    fn initial_vector(&self) -> LiouvilleVector;
    fn reconstruct_state(&self, v: &LiouvilleVector) -> Result<DensityState>;
    /// `M(t)` assembled directly from the Heisenberg equation of each basis operator.
    fn direct_generator(&self, t: f64) -> Result<CMatrix>;
    /// Adiabatic parameters evaluated from the physical drive (not from `chi`).
    fn adiabatic_parameter(&self, t: f64) -> Result<Vec<f64>>;

    fn factorization(&self) -> Factorization<'_> {
        Factorization::new(self.family(), self.protocol()).expect("models define consistent weights")
    }
}

/// Spin-1/2 operators `(Sx, Sy, Sz)`.
pub fn spin_ops() -> [CMatrix; 3] {
    let z = c(0.0, 0.0);
    let h = c(0.5, 0.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, h, h, z]),
        CMatrix::from_row_slice(2, 2, &[z, -I * 0.5, I * 0.5, z]),
        CMatrix::from_row_slice(2, 2, &[h, z, z, -h]),
    ]
}

/// `tr(a^† b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.dotc(b)
}

/// `M = i A` where `A_ij` is the component along `b_j` of
/// `d b_i/dt = i [H, b_i] + partial_t b_i`, for an HS-orthogonal basis.
pub fn heisenberg_generator(basis: &[CMatrix], dbasis_dt: &[CMatrix], h: &CMatrix) -> Result<CMatrix> {
    let n = basis.len();
    let norms: Vec<C64> = basis.iter().map(|b| hs_inner(b, b)).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && hs_inner(&basis[i], &basis[j]).norm() > 1e-10 * norms[i].norm().max(1.0) {
                return Err(Error::InvalidInput("operator basis is not orthogonal".into()));
            }
        }
    }
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        let d = commutator(h, &basis[i]) * I + &dbasis_dt[i];
        let mut resid = d.clone();
        for j in 0..n {
            let a = hs_inner(&basis[j], &d) / norms[j];
            resid -= &basis[j] * a;
            m[(i, j)] = I * a;
        }
        if resid.norm() > 1e-9 * d.norm().max(1.0) {
            return Err(Error::InvalidInput("Heisenberg dynamics leave the operator basis".into()));
        }
    }
    Ok(m)
}

/// Liouville vector `v_i = tr(rho b_i)`.
pub fn expectation_vector(t: f64, rho: &CMatrix, basis: &[CMatrix]) -> LiouvilleVector {
    let vals: Vec<f64> = basis.iter().map(|b| (rho * b).trace().re).collect();
    LiouvilleVector::from_real(t, &vals)
}

/// Density matrix from a complete HS-orthogonal Hermitian basis.
pub fn density_from_vector(v: &[f64], basis: &[CMatrix]) -> CMatrix {
    let dim = basis[0].nrows();
    let mut rho = CMatrix::zeros(dim, dim);
    for (vi, b) in v.iter().zip(basis) {
        let nb = hs_inner(b, b).re;
        rho += b * c(vi / nb, 0.0);
    }
    rho
}

/// Smallest positive root of `a t^2 + b t + c0 = 0`, or infinity.
pub(crate) fn smallest_positive_root(a: f64, b: f64, c0: f64) -> f64 {
    let mut roots = Vec::new();
    if a.abs() < 1e-300 {
        if b != 0.0 {
            roots.push(-c0 / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c0;
        if disc >= 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(q / a);
                roots.push(c0 / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    roots.into_iter().filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min)
}
