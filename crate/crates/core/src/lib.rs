//! Inertial propagation of driven quantum systems in Liouville space.
//!
//! The crate is organised bottom-up: [`linalg`] (bi-orthogonal eigenframes),
//! [`ode`] and [`quadrature`] (integrators), [`engine`] (propagators),
//! [`models`] (oscillator, two-level system, spin pair), [`diagnostics`]
//! (inertial parameter, fidelities, sweeps), [`geometric`] (phases along
//! parameter circuits) and [`open`] (non-adiabatic master equation).

pub mod diagnostics;
pub mod engine;
pub mod geometric;
pub mod error;
pub mod linalg;
pub mod models;
pub mod open;
pub mod ode;
pub mod quadrature;

pub use engine::{
    propagate_adiabatic, propagate_constant_chi, propagate_exact, propagate_inertial, scaled_time, EngineOptions,
    Factorization, GeneratorFamily, InertialSolution, LiouvilleVector, Protocol,
};
pub use error::{Error, Result};
pub use linalg::{bi_eigendecompose, decompose_blocks, CMatrix, CVector, EigenFrame, EigenOptions, C64};
pub use models::{DensityState, Model};
