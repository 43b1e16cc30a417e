//! Non-adiabatic master equation for a driven two-level system weakly coupled
//! to a thermal bosonic bath.
//!
//! The jump operators are the eigen-operators of the generator at `t = 0`,
//! `F_j ∝ sum_i conj(G_j,i) b_i(0)`, normalized in the Hilbert-Schmidt norm.
//! In the interaction picture relative to the free evolution
//!
//! `d rho/dt = -i [H_LS, rho] + sum_j gamma_j(t) (F_j rho F_j^† - {F_j^† F_j, rho}/2)`,
//!
//! with `gamma_j = |a_j|^2 gamma(alpha_j(t))`, `a_j = tr(D F_j^†)` and the
//! effective frequencies `alpha_j = dLambda_j/dt`.

use crate::engine::{propagate_exact, EngineOptions, Factorization, LiouvilleVector, Protocol};
use crate::error::{Error, Result};
use crate::linalg::{braket, c, hermitian_eigenvalues, track_continuity, CMatrix, EigenFrame, EigenOptions, C64, I};
use crate::models::{spin_ops, Model, TwoLevelSystem};
use crate::ode::{integrate_dense, OdeOptions};
use crate::quadrature::{integrate, principal_value};

/// Thermal bath with `k_B = hbar = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub temperature: f64,
    /// Overall coupling `g` in `gamma(alpha) = g alpha^3 (1 + N(alpha))`.
    pub coupling: f64,
    /// Upper frequency of the Lamb-shift integral.
    pub cutoff: f64,
}

impl BathSpec {
    pub fn new(temperature: f64, coupling: f64, cutoff: f64) -> Result<Self> {
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidInput("bath temperature must be finite and >= 0".into()));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidInput("bath coupling must be finite and >= 0".into()));
        }
        if !(cutoff > 0.0) {
            return Err(Error::InvalidInput("bath cutoff must be positive".into()));
        }
        Ok(Self { temperature, coupling, cutoff })
    }

    /// Bose-Einstein occupation at `w > 0`.
    pub fn occupation(&self, w: f64) -> f64 {
        if self.temperature == 0.0 || w <= 0.0 {
            return 0.0;
        }
        1.0 / (w / self.temperature).exp_m1()
    }

    /// `w^3 N(w)`, finite at `w = 0`.
    fn cubic_occupation(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        w * w * w * self.occupation(w)
    }
}

/// Emission rate `g a^3 (1 + N(a))` for `a > 0`, absorption `g |a|^3 N(|a|)`
/// for `a < 0`, zero at `a = 0`. Satisfies `gamma(a) / gamma(-a) = exp(a / T)`.
pub fn decay_rate(bath: &BathSpec, alpha: f64) -> f64 {
    let w = alpha.abs();
    if w == 0.0 {
        return 0.0;
    }
    let n = bath.occupation(w);
    let g = bath.coupling * w * w * w;
    if alpha > 0.0 {
        g * (1.0 + n)
    } else {
        g * n
    }
}

/// Lamb shift `S(a) = 2 g P int_0^cutoff dw w^3 [(1 + N(w))/(a - w) + N(w)/(a + w)]`.
pub fn lamb_shift(bath: &BathSpec, alpha: f64) -> Result<f64> {
    if bath.coupling == 0.0 {
        return Ok(0.0);
    }
    let wc = bath.cutoff;
    if !(alpha.abs() < wc) {
        return Err(Error::InvalidInput(format!("|alpha| = {} must stay below the cutoff {wc}", alpha.abs())));
    }
    let tol = 1e-12 * wc.powi(3);
    let emit = |w: f64| w * w * w + bath.cubic_occupation(w);
    let absorb = |w: f64| bath.cubic_occupation(w);
    let (first, second) = if alpha == 0.0 {
        (
            -integrate(|w| if w == 0.0 { 0.0 } else { emit(w) / w }, 0.0, wc, tol, 1e-12)?,
            integrate(|w| if w == 0.0 { 0.0 } else { absorb(w) / w }, 0.0, wc, tol, 1e-12)?,
        )
    } else {
        // 1/(a - w) = -1/(w - a),  1/(a + w) = 1/(w - (-a))
        (
            -principal_value(emit, alpha, 0.0, wc, tol, 1e-12)?,
            principal_value(absorb, -alpha, 0.0, wc, tol, 1e-12)?,
        )
    };
    Ok(2.0 * bath.coupling * (first + second))
}

/// Zero-temperature closed form of the Lamb-shift integral (without the `2 g`).
pub fn lamb_integral_zero_temperature(alpha: f64, cutoff: f64) -> f64 {
    let a = alpha;
    let w = cutoff;
    let log = if a == 0.0 { 0.0 } else { a * a * a * (a.abs() / (w - a)).ln() };
    -w * w * w / 3.0 - a * w * w / 2.0 - a * a * w + log
}

/// Frames at `ts` with modes matched (permutation only, no re-phasing) to `reference`.
fn matched_frames(fact: &Factorization, ts: &[f64], reference: &EigenFrame, opts: &EigenOptions) -> Result<Vec<EigenFrame>> {
    ts.iter()
        .map(|&t| {
            let raw = fact.frame_at(t, opts)?;
            let mut tr = track_continuity(reference, &raw)?;
            tr.phases.iter_mut().for_each(|p| *p = c(1.0, 0.0));
            Ok(raw.apply_tracking(&tr))
        })
        .collect()
}

/// Effective frequencies `alpha_k = Re[lambda_k Omega - i (G_k|dF_k/dt)]` in
/// the reference gauge, by finite differences of the frames.
pub fn effective_frequencies(fact: &Factorization, t: f64, opts: &EigenOptions) -> Result<Vec<f64>> {
    let fr = fact.frame_at(t, opts)?;
    let om = fact.protocol.omega(t)?;
    let h = 1e-5 / om.max(1e-3);
    let (ts, w): (Vec<f64>, [f64; 3]) = if t >= h {
        (vec![t - h, t + h], [-0.5, 0.5, 0.0])
    } else {
        (vec![t + h, t + 2.0 * h], [2.0, -0.5, -1.5])
    };
    let nb = matched_frames(fact, &ts, &fr, opts)?;
    Ok((0..fr.len())
        .map(|k| {
            // weights on (ts[0], ts[1], t)
            let df = (&nb[0].rights[k] * c(w[0], 0.0) + &nb[1].rights[k] * c(w[1], 0.0) + &fr.rights[k] * c(w[2], 0.0))
                / c(h, 0.0);
            let y = braket(&fr.lefts[k], &df);
            (fr.lambdas[k] * om - I * y).re
        })
        .collect())
}

pub fn effective_frequency(fact: &Factorization, t: f64, j: usize, opts: &EigenOptions) -> Result<f64> {
    effective_frequencies(fact, t, opts)?
        .get(j)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("mode {j} out of range")))
}

/// Jump operators and dipole coefficients of the master equation.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterEquationSpec {
    /// `F_j` as 2x2 matrices, one per mode of the frame at `t = 0`.
    pub jump_ops: Vec<CMatrix>,
    /// `a_j = tr(D F_j^†)`.
    pub dipole_coeffs: Vec<C64>,
    pub dipole: CMatrix,
    pub lamb_shift_enabled: bool,
}

/// Dipole operator `d . sigma`.
pub fn dipole_operator(d: [f64; 3]) -> CMatrix {
    let [sx, sy, sz] = spin_ops();
    (sx * c(d[0], 0.0) + sy * c(d[1], 0.0) + sz * c(d[2], 0.0)) * c(2.0, 0.0)
}

pub fn master_equation_spec(
    tls: &TwoLevelSystem,
    dipole: &CMatrix,
    lamb_shift_enabled: bool,
    opts: &EigenOptions,
) -> Result<MasterEquationSpec> {
    let fact = tls.factorization();
    let fr = fact.frame_at(0.0, opts)?;
    let basis = tls.protocol.basis(0.0)?;
    let mut jump_ops = Vec::with_capacity(fr.len());
    for g in &fr.lefts {
        let mut x = CMatrix::zeros(2, 2);
        for (gi, b) in g.iter().zip(&basis) {
            x += b * gi.conj();
        }
        let n = x.norm();
        jump_ops.push(x / c(n, 0.0));
    }
    let dipole_coeffs: Vec<C64> = jump_ops.iter().map(|f| (dipole * f.adjoint()).trace()).collect();
    let mut rebuilt = CMatrix::zeros(2, 2);
    for (a, f) in dipole_coeffs.iter().zip(&jump_ops) {
        rebuilt += f * *a;
    }
    if (&rebuilt - dipole).norm() > 1e-10 * dipole.norm().max(1.0) {
        return Err(Error::InvalidInput("jump operators do not resolve the dipole operator".into()));
    }
    Ok(MasterEquationSpec { jump_ops, dipole_coeffs, dipole: dipole.clone(), lamb_shift_enabled })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NameOptions {
    pub ode: OdeOptions,
    pub eigen: EigenOptions,
    /// Dipole direction `d` in `D = d . sigma`.
    pub dipole: [f64; 3],
    pub lamb_shift: bool,
    /// Most negative eigenvalue tolerated before failing.
    pub positivity_tol: f64,
    /// Secular-approximation warning level for `|Lambda_i + Lambda_j|`.
    pub secular_threshold: f64,
}

impl Default for NameOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::with_tol(1e-11, 1e-13),
            eigen: EigenOptions::default(),
            dipole: [1.0, 0.0, 0.0],
            lamb_shift: false,
            positivity_tol: 1e-7,
            secular_threshold: 10.0,
        }
    }
}

/// State of the open system at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct NameRecord {
    pub t: f64,
    /// Schrödinger-picture density matrix.
    pub rho: CMatrix,
    pub bloch: [f64; 3],
    pub bloch_interaction: [f64; 3],
    /// Populations in the instantaneous energy basis.
    pub p_excited: f64,
    pub p_ground: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
    pub alpha: Vec<f64>,
    pub rates: Vec<f64>,
    /// Accumulated phases `Lambda_j = int alpha_j dt`.
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NameTrajectory {
    pub spec: MasterEquationSpec,
    pub records: Vec<NameRecord>,
    pub warnings: Vec<String>,
}

fn bloch_of(rho: &CMatrix) -> [f64; 3] {
    let [sx, sy, sz] = spin_ops();
    let e = |s: &CMatrix| 2.0 * (rho * s).trace().re;
    [e(&sx), e(&sy), e(&sz)]
}

fn rho_of(r: [f64; 3]) -> CMatrix {
    let [sx, sy, sz] = spin_ops();
    CMatrix::identity(2, 2) * c(0.5, 0.0) + (sx * c(r[0], 0.0) + sy * c(r[1], 0.0) + sz * c(r[2], 0.0))
}

struct Channels<'a> {
    fact: Factorization<'a>,
    bath: &'a BathSpec,
    spec: &'a MasterEquationSpec,
    eigen: EigenOptions,
}

impl Channels<'_> {
    /// `(alpha_j, gamma_j, S_j)` at time `t`.
    fn at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let alpha = effective_frequencies(&self.fact, t, &self.eigen)?;
        let mut rates = Vec::with_capacity(alpha.len());
        let mut shifts = Vec::with_capacity(alpha.len());
        for (a, d) in alpha.iter().zip(&self.spec.dipole_coeffs) {
            let w = d.norm_sqr();
            rates.push(w * decay_rate(self.bath, *a));
            shifts.push(if self.spec.lamb_shift_enabled && w > 0.0 { w * lamb_shift(self.bath, *a)? } else { 0.0 });
        }
        Ok((alpha, rates, shifts))
    }

    fn rhs(&self, t: f64, rho: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
        let (alpha, rates, shifts) = self.at(t)?;
        let mut d = CMatrix::zeros(2, 2);
        for ((f, g), s) in self.spec.jump_ops.iter().zip(&rates).zip(&shifts) {
            let fd = f.adjoint();
            let ff = &fd * f;
            if *g != 0.0 {
                d += (f * rho * &fd - (&ff * rho + rho * &ff) * c(0.5, 0.0)) * c(*g, 0.0);
            }
            if *s != 0.0 {
                d -= (&ff * rho - rho * &ff) * (I * *s);
            }
        }
        Ok((d, alpha))
    }
}

/// Integrate the master equation from `rho0` (at `t = 0`) and report states at
/// the times in `t_grid` (non-negative, any order).
pub fn name_evolve(
    tls: &TwoLevelSystem,
    bath: &BathSpec,
    rho0: &CMatrix,
    t_grid: &[f64],
    opts: &NameOptions,
) -> Result<NameTrajectory> {
    if rho0.shape() != (2, 2) {
        return Err(Error::InvalidInput("initial state must be a 2x2 density matrix".into()));
    }
    let spec = master_equation_spec(tls, &dipole_operator(opts.dipole), opts.lamb_shift, &opts.eigen)?;
    let fact = tls.factorization();
    let ch = Channels { fact, bath, spec: &spec, eigen: opts.eigen };
    let m = spec.jump_ops.len();

    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&a, &b| t_grid[a].total_cmp(&t_grid[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| t_grid[i]).collect();

    let mut y0: Vec<C64> = rho0.iter().copied().collect();
    y0.extend(std::iter::repeat_n(c(0.0, 0.0), m));
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
        let rho = CMatrix::from_column_slice(2, 2, &y[..4]);
        let (d, alpha) = ch.rhs(t, &rho)?;
        dy[..4].copy_from_slice(d.as_slice());
        for (j, a) in alpha.iter().enumerate() {
            dy[4 + j] = c(*a, 0.0);
        }
        Ok(())
    };
    let (ys, _) = integrate_dense(rhs, 0.0, &y0, &sorted, &opts.ode)?;

    // free rotation of Bloch vectors from exactly propagated basis states
    let eng = EngineOptions { ode: opts.ode, eigen: opts.eigen, ..EngineOptions::default() };
    let mut cols = Vec::with_capacity(3);
    for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let v0 = tls.vector_from_bloch(0.0, e)?;
        let out: Vec<LiouvilleVector> = propagate_exact(&fact, &v0, &sorted, &eng)?;
        cols.push(out.iter().map(|v| tls.bloch(v)).collect::<Result<Vec<_>>>()?);
    }

    let mut records = vec![None; t_grid.len()];
    let mut warnings = Vec::new();
    for (pos, &idx) in order.iter().enumerate() {
        let t = sorted[pos];
        let y = &ys[pos];
        let rt = CMatrix::from_column_slice(2, 2, &y[..4]);
        let rt = (&rt + rt.adjoint()) * c(0.5, 0.0);
        let ri = bloch_of(&rt);
        let mut rs = [0.0; 3];
        for (a, col) in cols.iter().enumerate() {
            for (b, x) in col[pos].iter().enumerate() {
                rs[b] += x * ri[a];
            }
        }
        let rho = rho_of(rs) + CMatrix::identity(2, 2) * c(0.5 * (rt.trace().re - 1.0), 0.0);
        let min_eigenvalue = hermitian_eigenvalues(&rt)[0];
        if min_eigenvalue < -opts.positivity_tol {
            return Err(Error::PositivityViolation { t, min_eigenvalue });
        }
        let w = tls.protocol.detuning(t)?;
        let e = tls.protocol.epsilon;
        let rabi = tls.protocol.omega(t)?;
        let proj = (rs[0] * e + rs[2] * w) / rabi;
        let tr = rt.trace().re;
        let (alpha, rates, _) = ch.at(t)?;
        let phases: Vec<f64> = y[4..].iter().map(|z| z.re).collect();
        records[idx] = Some(NameRecord {
            t,
            rho,
            bloch: rs,
            bloch_interaction: ri,
            p_excited: 0.5 * (tr + proj),
            p_ground: 0.5 * (tr - proj),
            trace_deviation: (tr - 1.0).abs(),
            min_eigenvalue,
            alpha,
            rates,
            phases,
        });
    }

    // secular approximation: non-conjugate pairs should dephase quickly
    if let Some(last) = records.iter().flatten().max_by(|a, b| a.t.total_cmp(&b.t)) {
        let tol = 1e-9 * last.phases.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let mut worst = f64::INFINITY;
        for i in 0..m {
            for j in i..m {
                let s = last.phases[i] + last.phases[j];
                let paired = (last.alpha[i] + last.alpha[j]).abs() <= 1e-9 * last.alpha[i].abs().max(1.0);
                if !paired && s.abs() > tol {
                    worst = worst.min(s.abs());
                }
            }
        }
        if worst < opts.secular_threshold {
            let msg = format!(
                "secular approximation questionable: min |Lambda_i + Lambda_j| = {worst:.3} < {}",
                opts.secular_threshold
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(NameTrajectory { spec, records: records.into_iter().map(|r| r.expect("every time filled")).collect(), warnings })
}

/// Thermal state `exp(-H/T)/Z` of `H = w Sz + e Sx`.
pub fn gibbs_state(w: f64, e: f64, temperature: f64) -> CMatrix {
    let rabi = w.hypot(e);
    let m = if temperature == 0.0 { 1.0 } else { (0.5 * rabi / temperature).tanh() };
    rho_of([-m * e / rabi, 0.0, -m * w / rabi])
}

/// Trace distance `||a - b||_1 / 2` of Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a - b;
    let d = (&d + d.adjoint()) * c(0.5, 0.0);
    0.5 * hermitian_eigenvalues(&d).iter().map(|x| x.abs()).sum::<f64>()
}
