//! Liouville-space propagation: exact integration, the constant-parameter
//! eigen-expansion, the inertial solution and the adiabatic reference.
//!
//! A model enters through two traits. [`Protocol`] supplies the time-scale
//! `Omega(t)` and the parameter vector `chi(t)`; [`GeneratorFamily`] supplies
//! the dimensionless generator `B(chi)`. The generator of the Heisenberg
//! equation `dv/dt = -i M(t) v` is
//!
//! `M(t) = Omega(t) * (B(chi(t)) + i rho(t) W)`,  `rho = Omega_dot / Omega^2`,
//!
//! where `W` is the diagonal matrix of rescaling weights. Because `W` is
//! constant on every invariant block it can be integrated out: the physical
//! vector is `v = (Omega(t)/Omega(0))^W u`, with `du/dtheta = -i B u`.

use crate::error::{Error, Result};
use crate::linalg::{braket, c, decompose_blocks, track_continuity, CMatrix, CVector, EigenFrame, EigenOptions, C64, I, ONE};
use crate::ode::{integrate_dense, OdeOptions};
use crate::quadrature::{gauss_legendre, integrate};

/// Time dependence of a driven model.
pub trait Protocol: Sync {
    /// The time-scale `Omega(t) > 0`.
    fn omega(&self, t: f64) -> Result<f64>;
    fn omega_dot(&self, t: f64) -> Result<f64>;
    /// The adiabatic parameters `chi(t)`.
    fn chi(&self, t: f64) -> Result<Vec<f64>>;
    fn chi_dot(&self, t: f64) -> Result<Vec<f64>>;
    /// First time at which the protocol is singular.
    fn domain_end(&self) -> f64 {
        f64::INFINITY
    }
    /// Closed-form scaled time, when known.
    fn scaled_time_closed(&self, _t: f64) -> Option<f64> {
        None
    }
}

/// The dimensionless generator `B(chi)` and its structure.
pub trait GeneratorFamily: Sync {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn generator(&self, chi: &[f64]) -> CMatrix;

    /// `dB/dchi_j`; central differences unless overridden.
    fn gradient(&self, chi: &[f64]) -> Vec<CMatrix> {
        let h = 1e-5;
        (0..chi.len())
            .map(|j| {
                let mut p = chi.to_vec();
                let mut m = chi.to_vec();
                p[j] += h;
                m[j] -= h;
                (self.generator(&p) - self.generator(&m)) / c(2.0 * h, 0.0)
            })
            .collect()
    }

    /// Invariant block partition of the basis.
    fn blocks(&self) -> Vec<Vec<usize>> {
        vec![(0..self.dim()).collect()]
    }

    /// Exponent `w_i` in `v_i = (Omega(t)/Omega(0))^{w_i} u_i`.
    fn rescaling_weights(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Block-wise bi-orthogonal frame at `chi`.
    fn frame(&self, chi: &[f64], opts: &EigenOptions) -> Result<EigenFrame> {
        let mut fr = decompose_blocks(&self.generator(chi), &self.blocks(), opts)?;
        fr.chi = chi.to_vec();
        Ok(fr)
    }
}

/// A coefficient vector on the time-dependent operator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleVector {
    pub t: f64,
    pub data: CVector,
}

impl LiouvilleVector {
    pub fn new(t: f64, data: CVector) -> Self {
        Self { t, data }
    }

    pub fn from_real(t: f64, values: &[f64]) -> Self {
        Self { t, data: CVector::from_iterator(values.len(), values.iter().map(|&x| c(x, 0.0))) }
    }

    /// Largest imaginary part relative to the norm; expectation values are real.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    pub ode: OdeOptions,
    pub eigen: EigenOptions,
    /// Absolute/relative tolerance of scaled-time quadrature.
    pub quad_tol: f64,
    /// Minimum number of Gauss-Legendre panels along a path.
    pub min_panels: usize,
    /// Nodes per panel.
    pub gl_order: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            eigen: EigenOptions::default(),
            quad_tol: 1e-13,
            min_panels: 48,
            gl_order: 8,
        }
    }
}

/// A generator family bound to a protocol.
#[derive(Clone, Copy)]
pub struct Factorization<'a> {
    pub family: &'a dyn GeneratorFamily,
    pub protocol: &'a dyn Protocol,
}

impl<'a> Factorization<'a> {
    pub fn new(family: &'a dyn GeneratorFamily, protocol: &'a dyn Protocol) -> Result<Self> {
        let w = family.rescaling_weights();
        if w.len() != family.dim() {
            return Err(Error::InvalidInput("rescaling weights do not match the basis".into()));
        }
        for blk in family.blocks() {
            if blk.iter().any(|&i| w[i] != w[blk[0]]) {
                return Err(Error::InvalidInput("rescaling weight must be constant on each block".into()));
            }
        }
        Ok(Self { family, protocol })
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || t >= self.protocol.domain_end() {
            return Err(Error::DomainExceeded {
                t,
                reason: format!("protocol is defined on [0, {})", self.protocol.domain_end()),
            });
        }
        Ok(())
    }

    /// `M(t)` with `dv/dt = -i M v`.
    pub fn generator_at(&self, t: f64) -> Result<CMatrix> {
        self.check_domain(t)?;
        let om = self.protocol.omega(t)?;
        let rho = self.protocol.omega_dot(t)? / (om * om);
        let mut b = self.family.generator(&self.protocol.chi(t)?);
        for (i, w) in self.family.rescaling_weights().iter().enumerate() {
            b[(i, i)] += I * (rho * w);
        }
        Ok(b * c(om, 0.0))
    }

    /// Diagonal of `(Omega(t)/Omega(0))^W`.
    pub fn rescaling(&self, t: f64) -> Result<Vec<f64>> {
        let r = self.protocol.omega(t)? / self.protocol.omega(0.0)?;
        Ok(self.family.rescaling_weights().iter().map(|w| r.powf(*w)).collect())
    }

    pub fn frame_at(&self, t: f64, opts: &EigenOptions) -> Result<EigenFrame> {
        self.check_domain(t)?;
        self.family.frame(&self.protocol.chi(t)?, opts)
    }
}

/// Multiply a scaled vector by the identity rescaling to get the physical one.
pub fn apply_identity_rescaling(weights: &[f64], omega_ratio: f64, u: &CVector) -> CVector {
    CVector::from_iterator(u.len(), u.iter().zip(weights).map(|(z, w)| z * omega_ratio.powf(*w)))
}

/// `theta(t) = int_0^t Omega`.
pub fn scaled_time(protocol: &dyn Protocol, t: f64, tol: f64) -> Result<f64> {
    if !(t >= 0.0) || t >= protocol.domain_end() {
        return Err(Error::DomainExceeded { t, reason: "scaled time outside protocol domain".into() });
    }
    if let Some(th) = protocol.scaled_time_closed(t) {
        return Ok(th);
    }
    let mut failure = None;
    let v = integrate(
        |s| match protocol.omega(s) {
            Ok(x) => x,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        t,
        tol,
        tol,
    );
    match failure {
        Some(e) => Err(e),
        None => v,
    }
}

/// Inverse of [`scaled_time`] by safeguarded Newton iteration.
pub fn time_at_scaled(protocol: &dyn Protocol, theta: f64, tol: f64) -> Result<f64> {
    if theta == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = protocol.domain_end();
    let mut t = theta / protocol.omega(0.0)?;
    if !hi.is_finite() {
        hi = f64::INFINITY;
    }
    for _ in 0..200 {
        if !(t > lo && t < hi) {
            t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo.max(1e-3) };
        }
        let f = scaled_time(protocol, t, tol)? - theta;
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let step = f / protocol.omega(t)?;
        t -= step;
        if step.abs() <= 1e-15 * t.abs().max(1.0) {
            return Ok(t);
        }
    }
    Err(Error::NotConverged(format!("inverse scaled time for theta = {theta}")))
}

/// Exact propagation of the Heisenberg equation.
///
/// Integrates `du/dtheta = -i B(chi(t)) u` together with `dt/dtheta = 1/Omega`,
/// then applies the identity rescaling. `v0` must be given at `t = 0`.
pub fn propagate_exact(
    fact: &Factorization,
    v0: &LiouvilleVector,
    t_out: &[f64],
    opts: &EngineOptions,
) -> Result<Vec<LiouvilleVector>> {
    let n = fact.family.dim();
    if v0.data.len() != n || v0.t != 0.0 {
        return Err(Error::InvalidInput("initial vector must live at t = 0 on the model basis".into()));
    }
    for &t in t_out {
        fact.check_domain(t)?;
    }
    let thetas: Vec<f64> =
        t_out.iter().map(|&t| scaled_time(fact.protocol, t, opts.quad_tol)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..t_out.len()).collect();
    order.sort_by(|&a, &b| thetas[a].total_cmp(&thetas[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| thetas[i]).collect();

    let mut y0: Vec<C64> = v0.data.iter().copied().collect();
    y0.push(c(0.0, 0.0));
    let end = fact.protocol.domain_end();
    let rhs = |_theta: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
        let t = y[n].re;
        if !(t < end) {
            return Err(Error::DomainExceeded { t, reason: "exact propagation left the protocol domain".into() });
        }
        let b = fact.family.generator(&fact.protocol.chi(t.max(0.0))?);
        for i in 0..n {
            let mut acc = c(0.0, 0.0);
            for j in 0..n {
                acc += b[(i, j)] * y[j];
            }
            dy[i] = -I * acc;
        }
        dy[n] = c(1.0 / fact.protocol.omega(t.max(0.0))?, 0.0);
        Ok(())
    };
    let (ys, _) = integrate_dense(rhs, 0.0, &y0, &sorted, &opts.ode)?;
    let mut out = vec![LiouvilleVector::new(0.0, CVector::zeros(0)); t_out.len()];
    for (pos, &idx) in order.iter().enumerate() {
        let t = t_out[idx];
        let u = CVector::from_iterator(n, ys[pos][..n].iter().copied());
        let r = fact.protocol.omega(t)? / fact.protocol.omega(0.0)?;
        out[idx] = LiouvilleVector::new(t, apply_identity_rescaling(&fact.family.rescaling_weights(), r, &u));
    }
    Ok(out)
}

/// Analytic solution for a frozen generator: `sum_k c_k exp(-i lambda_k theta) F_k`.
pub fn propagate_constant_chi(frame: &EigenFrame, coeffs: &CVector, theta: f64) -> CVector {
    let evolved = CVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(&frame.lambdas).map(|(ck, lam)| ck * (-I * lam * theta).exp()),
    );
    frame.synthesize(&evolved)
}

/// Expansion coefficients `c_k = (G_k|v)`.
pub fn coefficients(frame: &EigenFrame, v: &CVector) -> CVector {
    frame.coefficients(v)
}

/// Per-mode phases and amplitudes of an inertial solution at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialSolution {
    pub t: f64,
    pub theta: f64,
    /// Initial expansion coefficients.
    pub coeffs: CVector,
    /// `int lambda_k dtheta` (complex for non-Hermitian generators).
    pub dyn_phase: Vec<C64>,
    /// Geometric phase `phi_k = -Im int (G_k|dF_k)` in the reference gauge.
    pub geo_phase: Vec<f64>,
    /// Amplitude transport `-Re int (G_k|dF_k)`.
    pub log_scale: Vec<f64>,
    /// Accumulated phase `Lambda_k = int lambda_k dtheta - phi_k`.
    pub lambda: Vec<C64>,
    /// Frame at `t` in the reference gauge.
    pub frame: EigenFrame,
}

impl InertialSolution {
    /// Scaled (un-rescaled) vector.
    pub fn scaled_vector(&self, include_geo: bool) -> CVector {
        let amps = CVector::from_iterator(
            self.coeffs.len(),
            (0..self.coeffs.len()).map(|k| {
                let geo = if include_geo { self.geo_phase[k] } else { 0.0 };
                self.coeffs[k] * (-I * self.dyn_phase[k] + c(self.log_scale[k], geo)).exp()
            }),
        );
        self.frame.synthesize(&amps)
    }
}

/// Frames, phases and transport accumulated along `[0, t_max]`.
#[derive(Debug, Clone)]
pub struct FramePath {
    pub marks: Vec<f64>,
    pub solutions: Vec<InertialSolution>,
}

fn permute_only(frame: &EigenFrame, prev: &EigenFrame) -> Result<EigenFrame> {
    let tr = track_continuity(prev, frame)?;
    let mut unit = tr.clone();
    unit.phases.iter_mut().for_each(|p| *p = ONE);
    Ok(frame.apply_tracking(&unit))
}

/// Build the inertial solution at every time in `marks` (sorted, first > 0 allowed).
///
/// Panels of Gauss-Legendre nodes subdivide each interval between marks; frames
/// are tracked node by node and the transport `int (G|dF)` is accumulated with a
/// symmetric two-point increment in a continuity gauge, then expressed in the
/// reference gauge of the frame at each mark.
pub fn frame_path(fact: &Factorization, v0: &LiouvilleVector, marks: &[f64], opts: &EngineOptions) -> Result<FramePath> {
    if marks.windows(2).any(|w| w[1] < w[0]) || marks.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidInput("output times must be sorted and non-negative".into()));
    }
    for &t in marks {
        fact.check_domain(t)?;
    }
    let eo = &opts.eigen;
    let f0 = fact.frame_at(0.0, eo)?;
    let coeffs = f0.coefficients(&v0.data);
    let m = f0.len();
    let (xg, wg) = gauss_legendre(opts.gl_order.max(1));

    let intervals = marks.iter().filter(|&&t| t > 0.0).count().max(1);
    let per_interval = opts.min_panels.div_ceil(intervals).max(1);

    let mut dynp = vec![c(0.0, 0.0); m];
    let mut transport = vec![c(0.0, 0.0); m];
    let mut theta = 0.0;
    let mut iso_prev = f0.clone();
    let mut trk_prev = f0.clone();
    let mut t_prev = 0.0;
    let mut solutions = Vec::with_capacity(marks.len());

    let record = |t: f64, theta: f64, dynp: &[C64], transport: &[C64], iso: &EigenFrame, trk: &EigenFrame| {
        // F_trk = F_iso * e^{i a}  =>  L_iso = L_trk - i a
        let mut geo = Vec::with_capacity(m);
        let mut scale = Vec::with_capacity(m);
        let mut lam = Vec::with_capacity(m);
        for k in 0..m {
            let a = braket(&iso.lefts[k], &trk.rights[k]).arg();
            let l_iso = transport[k] - I * a;
            geo.push(-l_iso.im);
            scale.push(-l_iso.re);
            lam.push(dynp[k] - c(-l_iso.im, 0.0));
        }
        InertialSolution {
            t,
            theta,
            coeffs: coeffs.clone(),
            dyn_phase: dynp.to_vec(),
            geo_phase: geo,
            log_scale: scale,
            lambda: lam,
            frame: iso.clone(),
        }
    };

    let step_to = |t: f64,
                   iso_prev: &mut EigenFrame,
                   trk_prev: &mut EigenFrame,
                   transport: &mut [C64]|
     -> Result<()> {
        let raw = fact.frame_at(t, eo)?;
        let iso = permute_only(&raw, iso_prev)?;
        let tr = track_continuity(trk_prev, &iso)?;
        let trk = iso.apply_tracking(&tr);
        for k in 0..m {
            let fwd = braket(&trk_prev.lefts[k], &trk.rights[k]).ln();
            let bwd = braket(&trk.lefts[k], &trk_prev.rights[k]).ln();
            transport[k] += 0.5 * (fwd - bwd);
        }
        *iso_prev = iso;
        *trk_prev = trk;
        Ok(())
    };

    for &mark in marks {
        if mark > t_prev {
            let npan = per_interval;
            let h = (mark - t_prev) / npan as f64;
            for p in 0..npan {
                let a = t_prev + p as f64 * h;
                let b = if p + 1 == npan { mark } else { a + h };
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (x, w) in xg.iter().zip(&wg) {
                    let tn = mid + half * x;
                    step_to(tn, &mut iso_prev, &mut trk_prev, &mut transport)?;
                    let om = fact.protocol.omega(tn)?;
                    theta += w * half * om;
                    for k in 0..m {
                        dynp[k] += iso_prev.lambdas[k] * (w * half * om);
                    }
                }
                step_to(b, &mut iso_prev, &mut trk_prev, &mut transport)?;
            }
            t_prev = mark;
        }
        solutions.push(record(mark, theta, &dynp, &transport, &iso_prev, &trk_prev));
    }
    Ok(FramePath { marks: marks.to_vec(), solutions })
}

/// Inertial approximation at the times in `ts` (sorted).
pub fn inertial_trajectory(
    fact: &Factorization,
    v0: &LiouvilleVector,
    ts: &[f64],
    include_geo: bool,
    opts: &EngineOptions,
) -> Result<Vec<(LiouvilleVector, InertialSolution)>> {
    let path = frame_path(fact, v0, ts, opts)?;
    let w = fact.family.rescaling_weights();
    let om0 = fact.protocol.omega(0.0)?;
    path.solutions
        .into_iter()
        .map(|sol| {
            let u = sol.scaled_vector(include_geo);
            let r = fact.protocol.omega(sol.t)? / om0;
            Ok((LiouvilleVector::new(sol.t, apply_identity_rescaling(&w, r, &u)), sol))
        })
        .collect()
}

/// Inertial approximation at a single time.
pub fn propagate_inertial(
    fact: &Factorization,
    v0: &LiouvilleVector,
    t: f64,
    include_geo: bool,
    opts: &EngineOptions,
) -> Result<(LiouvilleVector, InertialSolution)> {
    inertial_trajectory(fact, v0, &[t], include_geo, opts)?.pop().ok_or_else(|| Error::InvalidInput("no output".into()))
}

/// Adiabatic reference: the generator at `chi = 0` (instantaneous eigen-operators
/// of the Hamiltonian), evolved with scaled time `theta(t)` and rescaled.
pub fn propagate_adiabatic(
    fact: &Factorization,
    v0: &LiouvilleVector,
    t: f64,
    opts: &EngineOptions,
) -> Result<LiouvilleVector> {
    fact.check_domain(t)?;
    let chi0 = vec![0.0; fact.family.n_params()];
    let theta = scaled_time(fact.protocol, t, opts.quad_tol)?;
    let u = match fact.family.frame(&chi0, &opts.eigen) {
        Ok(f0) => propagate_constant_chi(&f0, &f0.coefficients(&v0.data), theta),
        // degenerate modes share a phase, so the exponential needs no frame
        Err(Error::DegenerateSpectrum { .. }) => {
            crate::linalg::expm(&(fact.family.generator(&chi0) * (-I * theta))) * &v0.data
        }
        Err(e) => return Err(e),
    };
    let r = fact.protocol.omega(t)? / fact.protocol.omega(0.0)?;
    Ok(LiouvilleVector::new(t, apply_identity_rescaling(&fact.family.rescaling_weights(), r, &u)))
}
