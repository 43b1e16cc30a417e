//! Validity parameters, state fidelities and fidelity sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{frame_path, propagate_adiabatic, propagate_exact, propagate_inertial, scaled_time};
use crate::engine::{EngineOptions, Factorization, LiouvilleVector};
use crate::error::{Error, Result};
use crate::linalg::{braket, c, hermitian_eigenvalues, hermitian_sqrt, CMatrix, CVector, EigenFrame, EigenOptions, C64, I};
use crate::models::{DensityState, HarmonicOscillator, HoProtocol, Model, TlsProtocol, TwoLevelSystem};
use crate::quadrature::gauss_legendre;
use crate::Protocol;

fn check_gap(frame: &EigenFrame, opts: &EigenOptions) -> Result<()> {
    let gap = frame.min_block_gap();
    if gap < opts.degeneracy_threshold {
        return Err(Error::DegenerateSpectrum { gap, threshold: opts.degeneracy_threshold });
    }
    Ok(())
}

/// `sum_j dB/dchi_j * dchi_j`.
fn directional(grad: &[CMatrix], dchi: &[f64]) -> Result<CMatrix> {
    if grad.len() != dchi.len() || grad.is_empty() {
        return Err(Error::InvalidInput("gradient and parameter rate have different lengths".into()));
    }
    let mut d = &grad[0] * c(dchi[0], 0.0);
    for (g, x) in grad.iter().zip(dchi).skip(1) {
        d += g * c(*x, 0.0);
    }
    Ok(d)
}

/// Inertial parameter restricted to the modes `ks`:
/// `sum_{k in ks} sum_{n != k} |(G_k|dB|F_n) / (lambda_n - lambda_k)^2|`, with
/// `dB = grad B . dchi/dtheta` and `n` running over the block of `k`.
pub fn inertial_parameter_for_modes(
    frame: &EigenFrame,
    grad: &[CMatrix],
    dchi_dtheta: &[f64],
    ks: &[usize],
    opts: &EigenOptions,
) -> Result<f64> {
    check_gap(frame, opts)?;
    let d = directional(grad, dchi_dtheta)?;
    let mut total = 0.0;
    for &k in ks {
        if k >= frame.len() {
            return Err(Error::InvalidInput(format!("mode {k} out of range")));
        }
        let dg = d.adjoint() * &frame.lefts[k];
        for n in 0..frame.len() {
            if n == k || frame.blocks[n] != frame.blocks[k] {
                continue;
            }
            let gap = frame.lambdas[n] - frame.lambdas[k];
            total += (braket(&dg, &frame.rights[n]) / (gap * gap)).norm();
        }
    }
    Ok(total)
}

/// Inertial parameter summed over every mode.
pub fn inertial_parameter(frame: &EigenFrame, grad: &[CMatrix], dchi_dtheta: &[f64], opts: &EigenOptions) -> Result<f64> {
    let all: Vec<usize> = (0..frame.len()).collect();
    inertial_parameter_for_modes(frame, grad, dchi_dtheta, &all, opts)
}

/// Inertial parameter along a protocol, with `dchi/dtheta = chi_dot / Omega`.
pub fn inertial_parameter_at(fact: &Factorization, t: f64, opts: &EigenOptions) -> Result<f64> {
    let frame = fact.frame_at(t, opts)?;
    let om = fact.protocol.omega(t)?;
    let rate: Vec<f64> = fact.protocol.chi_dot(t)?.iter().map(|x| x / om).collect();
    inertial_parameter(&frame, &fact.family.gradient(&frame.chi), &rate, opts)
}

/// Closed-form oscillator inertial parameter for the linear-`mu` ramp,
///
/// `mu^2 (r - 2 mu^2) / ((2 kappa)^2 (r ln(w/w0) - mu^2 (2 ln(w/w0) + 1)))`,
///
/// with `r = w_ddot / w^3` (the dimensionless reading of `w_ddot / w`) and
/// `kappa = sqrt(4 - mu^2)`. Returned as a magnitude.
pub fn ho_inertial_parameter_closed(p: &HoProtocol, t: f64) -> Result<f64> {
    let w = p.omega(t)?;
    let mu = p.mu(t);
    let kappa2 = 4.0 - mu * mu;
    if kappa2 <= 0.0 {
        return Err(Error::DegenerateSpectrum { gap: 0.0, threshold: 0.0 });
    }
    let lg = (w / p.omega0).ln();
    // r - 2 mu^2 = a / w exactly; use it to avoid cancellation
    let excess = p.accel / w;
    let mu2 = mu * mu;
    let num = mu2 * excess;
    let den = 4.0 * kappa2 * (lg * excess - mu2);
    let scale = 4.0 * kappa2 * (lg * excess).abs().max(mu2);
    if den.abs() <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::SingularDenominator { t });
    }
    Ok((num / den).abs())
}

/// Maximum over `samples` equally spaced times in `(0, t_f]` of the general
/// inertial parameter.
pub fn inertial_parameter_max(fact: &Factorization, t_f: f64, samples: usize, opts: &EigenOptions) -> Result<f64> {
    let n = samples.max(1);
    let mut best: f64 = 0.0;
    for i in 1..=n {
        best = best.max(inertial_parameter_at(fact, t_f * i as f64 / n as f64, opts)?);
    }
    Ok(best)
}

/// Maximum of the closed-form oscillator value over `(0, t_f]`, skipping
/// singular points. Returns the maximum and the number of skipped samples.
pub fn ho_inertial_parameter_closed_max(p: &HoProtocol, t_f: f64, samples: usize) -> Result<(f64, usize)> {
    let n = samples.max(1);
    let mut best: f64 = 0.0;
    let mut skipped = 0;
    for i in 1..=n {
        match ho_inertial_parameter_closed(p, t_f * i as f64 / n as f64) {
            Ok(v) => best = best.max(v),
            Err(Error::SingularDenominator { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped == n {
        return Err(Error::SingularDenominator { t: t_f });
    }
    Ok((best, skipped))
}

/// Adiabatic parameter of a model, evaluated from its drive.
pub fn adiabatic_parameter(model: &dyn Model, t: f64) -> Result<Vec<f64>> {
    model.adiabatic_parameter(t)
}

const STATE_TOL: f64 = 1e-9;

fn gaussian_parts(mean: &[f64; 2], cov: &[[f64; 2]; 2]) -> Result<f64> {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    if !mean.iter().all(|x| x.is_finite()) || !(cov[0][0] > 0.0) || !(det >= 0.25 - 1e-6) {
        return Err(Error::UnphysicalState(format!("Gaussian covariance determinant {det} below 1/4")));
    }
    Ok(det)
}

/// `(1 - F, F)` for two single-mode Gaussian states with `hbar = 1`:
/// `F = exp(-d^T (V1 + V2)^{-1} d / 2) / (sqrt(D + L) - sqrt(L))`, `D = det(V1 + V2)`,
/// `L = 4 (det V1 - 1/4)(det V2 - 1/4)`.
fn gaussian_infidelity(m1: &[f64; 2], v1: &[[f64; 2]; 2], m2: &[f64; 2], v2: &[[f64; 2]; 2]) -> Result<(f64, f64)> {
    let d1 = gaussian_parts(m1, v1)?;
    let d2 = gaussian_parts(m2, v2)?;
    let s = [[v1[0][0] + v2[0][0], v1[0][1] + v2[0][1]], [v1[1][0] + v2[1][0], v1[1][1] + v2[1][1]]];
    let delta = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let lam = 4.0 * (d1 - 0.25).max(0.0) * (d2 - 0.25).max(0.0);
    let d = [m1[0] - m2[0], m1[1] - m2[1]];
    // d^T S^{-1} d with the adjugate
    let x = 0.5 * (s[1][1] * d[0] * d[0] - (s[0][1] + s[1][0]) * d[0] * d[1] + s[0][0] * d[1] * d[1]) / delta;
    // delta - 1 without cancellation: with e_i = det V_i - 1/4 and mu the
    // eigenvalues of C = V1^-1 V2, det(V1 + V2) = d1 + d2 + 2 sqrt(d1 d2) + d1 (sqrt mu1 - sqrt mu2)^2
    let (e1, e2) = (d1 - 0.25, d2 - 0.25);
    let cm = [
        [(v1[1][1] * v2[0][0] - v1[0][1] * v2[1][0]) / d1, (v1[1][1] * v2[0][1] - v1[0][1] * v2[1][1]) / d1],
        [(v1[0][0] * v2[1][0] - v1[1][0] * v2[0][0]) / d1, (v1[0][0] * v2[1][1] - v1[1][0] * v2[0][1]) / d1],
    ];
    let split = (cm[0][0] - cm[1][1]).powi(2) + 4.0 * cm[0][1] * cm[1][0];
    let sum_sqrt_sq = cm[0][0] + cm[1][1] + 2.0 * (d2 / d1).sqrt();
    let delta_minus_1 = e1
        + e2
        + 2.0 * (0.25 * (e1 + e2) + e1 * e2) / ((d1 * d2).sqrt() + 0.25)
        + d1 * split.max(0.0) / sum_sqrt_sq;
    let root = (delta + lam).sqrt();
    let y = root - lam.sqrt();
    let y_minus_1 = (delta_minus_1 + lam) / (root + 1.0) - lam.sqrt();
    let infid = (y_minus_1 - (-x).exp_m1()) / y;
    Ok((infid.max(0.0), ((-x).exp() / y).min(1.0)))
}

fn bloch_checked(r: &[f64; 3]) -> Result<f64> {
    let n2: f64 = r.iter().map(|x| x * x).sum();
    if !(n2.sqrt() <= 1.0 + STATE_TOL) {
        return Err(Error::UnphysicalState(format!("Bloch vector length {} exceeds 1", n2.sqrt())));
    }
    Ok((1.0 - n2).max(0.0))
}

fn qubit_infidelity(a: &[f64; 3], b: &[f64; 3]) -> Result<f64> {
    let ma = bloch_checked(a)?.sqrt();
    let mb = bloch_checked(b)?.sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(0.25 * diff + 0.25 * (ma - mb) * (ma - mb))
}

fn check_density(rho: &CMatrix) -> Result<()> {
    let herm = (rho - rho.adjoint()).norm();
    let tr = rho.trace();
    let min = hermitian_eigenvalues(rho).first().copied().unwrap_or(0.0);
    if herm > 1e-9 || (tr - c(1.0, 0.0)).norm() > 1e-9 || min < -STATE_TOL {
        return Err(Error::UnphysicalState(format!(
            "density matrix: hermiticity {herm:e}, trace {tr}, min eigenvalue {min:e}"
        )));
    }
    Ok(())
}

/// Uhlmann fidelity `(tr sqrt(sqrt(r1) r2 sqrt(r1)))^2`.
pub fn uhlmann_fidelity(r1: &CMatrix, r2: &CMatrix) -> Result<f64> {
    if r1.shape() != r2.shape() {
        return Err(Error::InvalidInput("density matrices of different size".into()));
    }
    check_density(r1)?;
    check_density(r2)?;
    let s = hermitian_sqrt(r1);
    let m = &s * r2 * &s;
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    let tr: f64 = hermitian_eigenvalues(&m).iter().map(|x| x.max(0.0).sqrt()).sum();
    Ok((tr * tr).min(1.0))
}

/// `1 - F`, evaluated without cancellation for the Gaussian and qubit cases.
pub fn infidelity(s1: &DensityState, s2: &DensityState) -> Result<f64> {
    match (s1, s2) {
        (DensityState::Gaussian { mean: m1, cov: v1 }, DensityState::Gaussian { mean: m2, cov: v2 }) => {
            Ok(gaussian_infidelity(m1, v1, m2, v2)?.0)
        }
        (DensityState::Qubit { bloch: a }, DensityState::Qubit { bloch: b }) => qubit_infidelity(a, b),
        (DensityState::TwoQubit { rho: a }, DensityState::TwoQubit { rho: b }) => Ok(1.0 - uhlmann_fidelity(a, b)?),
        _ => Err(Error::InvalidInput("fidelity between different kinds of state".into())),
    }
}

/// Bures-Uhlmann fidelity `F in [0, 1]`.
pub fn fidelity(s1: &DensityState, s2: &DensityState) -> Result<f64> {
    match (s1, s2) {
        (DensityState::Gaussian { mean: m1, cov: v1 }, DensityState::Gaussian { mean: m2, cov: v2 }) => {
            Ok(gaussian_infidelity(m1, v1, m2, v2)?.1)
        }
        (DensityState::TwoQubit { rho: a }, DensityState::TwoQubit { rho: b }) => uhlmann_fidelity(a, b),
        _ => Ok(1.0 - infidelity(s1, s2)?),
    }
}

/// First-order correction to the frozen inertial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderCorrection {
    pub t: f64,
    /// Change of the slowly varying amplitude of each mode.
    pub delta_coeffs: CVector,
    /// Corresponding change of the physical Liouville vector.
    pub delta_vector: CVector,
}

impl FirstOrderCorrection {
    pub fn magnitude(&self) -> f64 {
        self.delta_vector.norm()
    }
}

/// Leading non-adiabatic coupling between eigen-operators, integrated along the
/// protocol:
///
/// `delta_k = -sum_{n != k} c_n int dt (G_k|dB/dchi . chi_dot|F_n) / (lambda_n - lambda_k) * A_n / A_k`,
///
/// where `A_k` carries the accumulated phase and transport of mode `k`.
/// Adding `delta_vector` to the inertial solution removes its first-order error.
pub fn first_order_correction(
    fact: &Factorization,
    v0: &LiouvilleVector,
    t: f64,
    opts: &EngineOptions,
) -> Result<FirstOrderCorrection> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput("correction needs t > 0".into()));
    }
    let theta = scaled_time(fact.protocol, t, opts.quad_tol)?;
    let npan = opts.min_panels.max(theta.abs().ceil() as usize);
    let (xg, wg) = gauss_legendre(opts.gl_order.max(2));
    let h = t / npan as f64;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(npan * xg.len());
    for p in 0..npan {
        let mid = (p as f64 + 0.5) * h;
        pairs.extend(xg.iter().zip(&wg).map(|(x, w)| (mid + 0.5 * h * x, 0.5 * h * w)));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut nodes, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    nodes.push(t);
    let path_opts = EngineOptions { min_panels: 1, gl_order: 2, ..*opts };
    let path = frame_path(fact, v0, &nodes, &path_opts)?;
    let amp = |sol: &crate::engine::InertialSolution, k: usize| {
        (-I * sol.dyn_phase[k] + c(sol.log_scale[k], sol.geo_phase[k])).exp()
    };
    let m = path.solutions[0].coeffs.len();
    let mut delta = CVector::zeros(m);
    for (sol, w) in path.solutions.iter().zip(&weights) {
        let fr = &sol.frame;
        let d = directional(&fact.family.gradient(&fr.chi), &fact.protocol.chi_dot(sol.t)?)?;
        for k in 0..m {
            let dg = d.adjoint() * &fr.lefts[k];
            let ak = amp(sol, k);
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..m {
                if n == k || fr.blocks[n] != fr.blocks[k] || sol.coeffs[n] == C64::new(0.0, 0.0) {
                    continue;
                }
                acc += sol.coeffs[n] * amp(sol, n) / ak * braket(&dg, &fr.rights[n])
                    / (fr.lambdas[n] - fr.lambdas[k]);
            }
            delta[k] -= acc * *w;
        }
    }
    let last = path.solutions.last().expect("at least one node");
    let scaled = CVector::from_iterator(m, (0..m).map(|k| delta[k] * amp(last, k)));
    let u = last.frame.synthesize(&scaled);
    let r = fact.protocol.omega(t)? / fact.protocol.omega(0.0)?;
    let delta_vector = crate::engine::apply_identity_rescaling(&fact.family.rescaling_weights(), r, &u);
    Ok(FirstOrderCorrection { t, delta_coeffs: delta, delta_vector })
}

/// Drive used by a fidelity sweep; `t_f` and `chi0` are fitted per grid point
/// so the frequency reaches its target at `t_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepModel {
    Oscillator { omega0: f64, omega_f: f64, accel: f64, mass: f64 },
    TwoLevel { epsilon: f64, rabi0: f64, rabi_f: f64, accel: f64, initial: [f64; 3] },
}

impl SweepModel {
    /// Oscillator ramp from 20 to 10 with `a = -5e-3`, ground-state start.
    pub fn oscillator_default() -> Self {
        SweepModel::Oscillator { omega0: 20.0, omega_f: 10.0, accel: -5e-3, mass: 1.0 }
    }

    /// Two-level ramp of the Rabi frequency from 20 to 10 at `epsilon = 8`.
    pub fn two_level_default() -> Self {
        SweepModel::TwoLevel { epsilon: 8.0, rabi0: 20.0, rabi_f: 10.0, accel: -5e-3, initial: [4.0, 1.0, 1.0] }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepModel::Oscillator { .. } => "ho",
            SweepModel::TwoLevel { .. } => "tls",
        }
    }

    /// Model for a protocol of duration `t_f`.
    pub fn build(&self, t_f: f64) -> Result<Box<dyn Model + Send>> {
        match *self {
            SweepModel::Oscillator { omega0, omega_f, accel, mass } => {
                let p = HoProtocol::for_endpoints(omega0, omega_f, accel, t_f)?;
                p.validate_horizon(t_f)?;
                Ok(Box::new(HarmonicOscillator { mass, ..HarmonicOscillator::new(p) }))
            }
            SweepModel::TwoLevel { epsilon, rabi0, rabi_f, accel, initial } => {
                let p = TlsProtocol::for_endpoints(epsilon, rabi0, rabi_f, accel, t_f)?;
                p.validate_horizon(t_f)?;
                Ok(Box::new(TwoLevelSystem { protocol: p, initial }))
            }
        }
    }

    fn oscillator_protocol(&self, t_f: f64) -> Option<Result<HoProtocol>> {
        match *self {
            SweepModel::Oscillator { omega0, omega_f, accel, .. } => {
                Some(HoProtocol::for_endpoints(omega0, omega_f, accel, t_f))
            }
            SweepModel::TwoLevel { .. } => None,
        }
    }
}

/// `n` logarithmically spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub engine: EngineOptions,
    /// Keep the geometric phase in the inertial solution.
    pub include_geo: bool,
    /// Times sampled in `(0, t_f]` when maximizing the validity parameters.
    pub samples: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { engine: EngineOptions::default(), include_geo: true, samples: 64 }
    }
}

/// Figures of merit of one protocol duration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMetrics {
    pub chi0: f64,
    pub f_inertial: f64,
    pub f_adiabatic: f64,
    pub infidelity_inertial: f64,
    pub infidelity_adiabatic: f64,
    /// Largest |mu| on `[0, t_f]`.
    pub mu_max: f64,
    /// Largest general inertial parameter on `(0, t_f]`.
    pub upsilon_max: f64,
    /// Largest closed-form oscillator value on `(0, t_f]` (oscillator only).
    pub upsilon_closed_max: Option<f64>,
    /// Samples skipped because the closed form is singular there.
    pub upsilon_singular: usize,
    /// Largest `|geometric| / |dynamical|` accumulated phase ratio at `t_f`.
    pub geo_ratio: f64,
}

impl SweepMetrics {
    pub fn neglog_inertial(&self) -> f64 {
        -self.infidelity_inertial.log10()
    }
    pub fn neglog_adiabatic(&self) -> f64 {
        -self.infidelity_adiabatic.log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub t_f: f64,
    pub outcome: Result<SweepMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub model: SweepModel,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }

    /// Successful points in grid order.
    pub fn ok_points(&self) -> impl Iterator<Item = (f64, &SweepMetrics)> {
        self.points.iter().filter_map(|p| p.outcome.as_ref().ok().map(|m| (p.t_f, m)))
    }
}

fn sweep_point(model: &SweepModel, t_f: f64, opts: &SweepOptions) -> Result<SweepMetrics> {
    let m = model.build(t_f)?;
    let fact = m.factorization();
    let eo = &opts.engine;
    let v0 = m.initial_vector();
    let exact = propagate_exact(&fact, &v0, &[t_f], eo)?.pop().expect("one output");
    let (inert, sol) = propagate_inertial(&fact, &v0, t_f, opts.include_geo, eo)?;
    let adiab = propagate_adiabatic(&fact, &v0, t_f, eo)?;
    let s_ex = m.reconstruct_state(&exact)?;
    let s_in = m.reconstruct_state(&inert)?;
    let s_ad = m.reconstruct_state(&adiab)?;

    let n = opts.samples.max(1);
    let mut mu_max: f64 = 0.0;
    for i in 0..=n {
        let t = t_f * i as f64 / n as f64;
        for mu in m.adiabatic_parameter(t)? {
            mu_max = mu_max.max(mu.abs());
        }
    }
    let upsilon_max = inertial_parameter_max(&fact, t_f, n, &eo.eigen)?;
    let (upsilon_closed_max, upsilon_singular) = match model.oscillator_protocol(t_f) {
        Some(p) => match ho_inertial_parameter_closed_max(&p?, t_f, n) {
            Ok((v, s)) => (Some(v), s),
            Err(Error::SingularDenominator { .. }) => (None, n),
            Err(e) => return Err(e),
        },
        None => (None, 0),
    };
    let mut geo_ratio: f64 = 0.0;
    for (d, g) in sol.dyn_phase.iter().zip(&sol.geo_phase) {
        if d.norm() > 1e-12 {
            geo_ratio = geo_ratio.max(g.abs() / d.norm());
        }
    }
    Ok(SweepMetrics {
        chi0: fact.protocol.chi(0.0)?[0],
        f_inertial: fidelity(&s_ex, &s_in)?,
        f_adiabatic: fidelity(&s_ex, &s_ad)?,
        infidelity_inertial: infidelity(&s_ex, &s_in)?,
        infidelity_adiabatic: infidelity(&s_ex, &s_ad)?,
        mu_max,
        upsilon_max,
        upsilon_closed_max,
        upsilon_singular,
        geo_ratio,
    })
}

/// Compare exact, inertial and adiabatic final states across protocol
/// durations. Points run in parallel; the result keeps grid order and a
/// failing point does not stop the sweep.
pub fn fidelity_sweep(model: &SweepModel, grid: &[f64], opts: &SweepOptions) -> SweepResult {
    let points = grid
        .par_iter()
        .map(|&t_f| {
            let outcome = sweep_point(model, t_f, opts);
            if let Err(e) = &outcome {
                log::warn!("sweep point t_f = {t_f}: {e}");
            }
            SweepPoint { t_f, outcome }
        })
        .collect();
    SweepResult { model: *model, points }
}
