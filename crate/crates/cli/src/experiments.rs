//! Experiment runners producing ordered tables.

use inertial_core::diagnostics::{
    fidelity, fidelity_sweep, ho_inertial_parameter_closed, infidelity, inertial_parameter_at, log_grid, SweepModel,
    SweepOptions,
};
use inertial_core::engine::{inertial_trajectory, propagate_adiabatic, propagate_exact};
use inertial_core::geometric::{geometric_phases_line, geometric_phases_surface, GeoOptions, ParameterCircuit, SpinInField};
use inertial_core::linalg::{c, CMatrix};
use inertial_core::models::{
    spin_ops, HarmonicOscillator, HoGenerator, HoProtocol, TlsGenerator, TlsProtocol, TwoLevelSystem, TwoSpin,
    TwoSpinGenerator, TwoSpinLocal, TwoSpinNonLocal, TwoSpinProtocol,
};
use inertial_core::open::{name_evolve, BathSpec, NameOptions};
use inertial_core::ode::OdeOptions;
use inertial_core::{EigenOptions, EngineOptions, Error, GeneratorFamily, Model, Protocol};

use crate::config::{CircuitKind, CircuitSection, ConfigInvalid, FamilyKind, ModelKind, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: &'static str,
    /// Library operation that produced the values.
    pub source: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub index: usize,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Number of attempted points (rows or whole-run units).
    pub points: usize,
    pub failures: Vec<PointFailure>,
    pub warnings: Vec<String>,
}

impl Table {
    fn new(columns: &[(&'static str, &'static str)]) -> Self {
        Self {
            columns: columns.iter().map(|&(name, source)| Column { name, source }).collect(),
            rows: vec![],
            points: 0,
            failures: vec![],
            warnings: vec![],
        }
    }

    /// Whole run failed before producing rows.
    fn failed(mut self, e: &Error) -> Self {
        self.points = 1;
        self.failures.push(PointFailure { index: 0, kind: e.kind(), message: e.to_string() });
        self
    }

    fn fail_row(&mut self, index: usize, e: &Error) -> Cell {
        self.failures.push(PointFailure { index, kind: e.kind(), message: e.to_string() });
        Cell::Text(e.kind().into())
    }
}

fn ok() -> Cell {
    Cell::Text("ok".into())
}

fn opt(x: Option<f64>) -> Cell {
    x.map(Cell::Num).unwrap_or(Cell::Empty)
}

pub fn engine_options(cfg: &RunConfig) -> EngineOptions {
    EngineOptions {
        ode: OdeOptions::with_tol(cfg.numerics.rtol, cfg.numerics.atol),
        eigen: eigen_options(cfg),
        ..EngineOptions::default()
    }
}

fn eigen_options(cfg: &RunConfig) -> EigenOptions {
    EigenOptions { degeneracy_threshold: cfg.numerics.degeneracy_threshold, ..EigenOptions::default() }
}

fn model_t_f(cfg: &RunConfig) -> f64 {
    match cfg.model {
        ModelKind::Ho => cfg.ho.t_f,
        ModelKind::Tls => cfg.tls.t_f,
        ModelKind::TwoSpin => cfg.two_spin.t_f,
    }
}

fn build_model(cfg: &RunConfig) -> Result<Box<dyn Model + Send>, ConfigInvalid> {
    let bad = |key: &str, e: Error| ConfigInvalid { key: key.into(), message: e.to_string() };
    match cfg.model {
        ModelKind::Ho => {
            let h = &cfg.ho;
            let p = HoProtocol::for_endpoints(h.omega0, h.omega_f, h.accel, h.t_f).map_err(|e| bad("ho", e))?;
            p.validate_horizon(h.t_f).map_err(|e| bad("ho.t_f", e))?;
            Ok(Box::new(HarmonicOscillator { mass: h.mass, ..HarmonicOscillator::new(p) }))
        }
        ModelKind::Tls => {
            let t = &cfg.tls;
            let p = TlsProtocol::for_endpoints(t.epsilon, t.rabi0, t.rabi_f, t.accel, t.t_f).map_err(|e| bad("tls", e))?;
            p.validate_horizon(t.t_f).map_err(|e| bad("tls.t_f", e))?;
            Ok(Box::new(TwoLevelSystem { protocol: p, initial: t.initial }))
        }
        ModelKind::TwoSpin => {
            let s = &cfg.two_spin;
            let protocol =
                TwoSpinProtocol { rabi0: s.rabi0, rabi_rate: s.rabi_rate, chi0: s.chi0, accel: s.accel, alpha0: s.alpha0 };
            if s.t_f >= protocol.domain_end() {
                return Err(ConfigInvalid { key: "two_spin.t_f".into(), message: "beyond the protocol domain".into() });
            }
            Ok(Box::new(TwoSpin { protocol, bloch0: s.bloch0 }))
        }
    }
}

fn sweep_model(cfg: &RunConfig) -> Result<SweepModel, ConfigInvalid> {
    match cfg.model {
        ModelKind::Ho => {
            let h = &cfg.ho;
            Ok(SweepModel::Oscillator { omega0: h.omega0, omega_f: h.omega_f, accel: h.accel, mass: h.mass })
        }
        ModelKind::Tls => {
            let t = &cfg.tls;
            Ok(SweepModel::TwoLevel {
                epsilon: t.epsilon,
                rabi0: t.rabi0,
                rabi_f: t.rabi_f,
                accel: t.accel,
                initial: t.initial,
            })
        }
        ModelKind::TwoSpin => {
            Err(ConfigInvalid { key: "model".into(), message: "sweep supports the ho and tls models".into() })
        }
    }
}

const SWEEP: &str = "diagnostics::fidelity_sweep";

pub fn sweep(cfg: &RunConfig) -> Result<Table, ConfigInvalid> {
    let model = sweep_model(cfg)?;
    let g = &cfg.numerics.grid;
    let grid = log_grid(g.lo, g.hi, g.n);
    let opts =
        SweepOptions { engine: engine_options(cfg), include_geo: cfg.numerics.include_geo, samples: cfg.numerics.samples };
    let res = fidelity_sweep(&model, &grid, &opts);
    let mut table = Table::new(&[
        ("t_f", "diagnostics::log_grid"),
        ("status", SWEEP),
        ("chi0", "models::*Protocol::for_endpoints"),
        ("F_inertial", "diagnostics::fidelity"),
        ("F_adiabatic", "diagnostics::fidelity"),
        ("neglog1mF_inertial", "diagnostics::infidelity"),
        ("neglog1mF_adiabatic", "diagnostics::infidelity"),
        ("infidelity_inertial", "diagnostics::infidelity"),
        ("infidelity_adiabatic", "diagnostics::infidelity"),
        ("mu_max", "models::Model::adiabatic_parameter"),
        ("upsilon_max", "diagnostics::inertial_parameter_max"),
        ("upsilon_closed_max", "diagnostics::ho_inertial_parameter_closed_max"),
        ("upsilon_singular", "diagnostics::ho_inertial_parameter_closed_max"),
        ("geo_ratio", "engine::propagate_inertial"),
    ]);
    table.points = res.points.len();
    for (i, p) in res.points.iter().enumerate() {
        let row = match &p.outcome {
            Ok(m) => vec![
                Cell::Num(p.t_f),
                ok(),
                Cell::Num(m.chi0),
                Cell::Num(m.f_inertial),
                Cell::Num(m.f_adiabatic),
                Cell::Num(m.neglog_inertial()),
                Cell::Num(m.neglog_adiabatic()),
                Cell::Num(m.infidelity_inertial),
                Cell::Num(m.infidelity_adiabatic),
                Cell::Num(m.mu_max),
                Cell::Num(m.upsilon_max),
                opt(m.upsilon_closed_max),
                Cell::Int(m.upsilon_singular as i64),
                Cell::Num(m.geo_ratio),
            ],
            Err(e) => {
                let mut row = vec![Cell::Num(p.t_f), table.fail_row(i, e)];
                row.resize(table.columns.len(), Cell::Empty);
                row
            }
        };
        table.rows.push(row);
    }
    Ok(table)
}

fn time_grid(t_f: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| t_f * i as f64 / n as f64).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn diagnose(cfg: &RunConfig) -> Result<Table, ConfigInvalid> {
    let m = build_model(cfg)?;
    let fact = m.factorization();
    let eo = eigen_options(cfg);
    let ho = match cfg.model {
        ModelKind::Ho => Some(HoProtocol::for_endpoints(cfg.ho.omega0, cfg.ho.omega_f, cfg.ho.accel, cfg.ho.t_f).expect("validated")),
        _ => None,
    };
    let mut table = Table::new(&[
        ("t", "cli::time_grid"),
        ("status", "diagnostics::inertial_parameter_at"),
        ("omega", "engine::Protocol::omega"),
        ("mu_abs_max", "models::Model::adiabatic_parameter"),
        ("upsilon", "diagnostics::inertial_parameter_at"),
        ("upsilon_closed", "diagnostics::ho_inertial_parameter_closed"),
        ("min_gap", "linalg::EigenFrame::min_block_gap"),
    ]);
    let ts = time_grid(model_t_f(cfg), cfg.numerics.samples);
    table.points = ts.len();
    for (i, &t) in ts.iter().enumerate() {
        let eval = || -> inertial_core::Result<Vec<Cell>> {
            let closed = match &ho {
                Some(p) => match ho_inertial_parameter_closed(p, t) {
                    Ok(v) => Cell::Num(v),
                    Err(Error::SingularDenominator { .. }) => Cell::Empty,
                    Err(e) => return Err(e),
                },
                None => Cell::Empty,
            };
            Ok(vec![
                Cell::Num(t),
                ok(),
                Cell::Num(fact.protocol.omega(t)?),
                Cell::Num(max_abs(&m.adiabatic_parameter(t)?)),
                Cell::Num(inertial_parameter_at(&fact, t, &eo)?),
                closed,
                Cell::Num(fact.frame_at(t, &eo)?.min_block_gap()),
            ])
        };
        let row = match eval() {
            Ok(r) => r,
            Err(e) => {
                let mut row = vec![Cell::Num(t), table.fail_row(i, &e)];
                row.resize(table.columns.len(), Cell::Empty);
                row
            }
        };
        table.rows.push(row);
    }
    Ok(table)
}

pub fn single(cfg: &RunConfig) -> Result<Table, ConfigInvalid> {
    let m = build_model(cfg)?;
    let fact = m.factorization();
    let opts = engine_options(cfg);
    let mut table = Table::new(&[
        ("t", "cli::time_grid"),
        ("status", "engine::propagate_*"),
        ("omega", "engine::Protocol::omega"),
        ("mu_abs_max", "models::Model::adiabatic_parameter"),
        ("F_inertial", "diagnostics::fidelity"),
        ("F_adiabatic", "diagnostics::fidelity"),
        ("neglog1mF_inertial", "diagnostics::infidelity"),
        ("neglog1mF_adiabatic", "diagnostics::infidelity"),
        ("vector_error_inertial", "engine::inertial_trajectory"),
        ("vector_error_adiabatic", "engine::propagate_adiabatic"),
    ]);
    let ts = time_grid(model_t_f(cfg), cfg.numerics.samples);
    let v0 = m.initial_vector();
    let exact = match propagate_exact(&fact, &v0, &ts, &opts) {
        Ok(x) => x,
        Err(e) => return Ok(table.failed(&e)),
    };
    let inert = match inertial_trajectory(&fact, &v0, &ts, cfg.numerics.include_geo, &opts) {
        Ok(x) => x,
        Err(e) => return Ok(table.failed(&e)),
    };
    table.points = ts.len();
    for (i, ((&t, ex), (inr, _))) in ts.iter().zip(&exact).zip(&inert).enumerate() {
        let eval = || -> inertial_core::Result<Vec<Cell>> {
            let ad = propagate_adiabatic(&fact, &v0, t, &opts)?;
            let s_ex = m.reconstruct_state(ex)?;
            let s_in = m.reconstruct_state(inr)?;
            let s_ad = m.reconstruct_state(&ad)?;
            let norm = ex.data.norm();
            Ok(vec![
                Cell::Num(t),
                ok(),
                Cell::Num(fact.protocol.omega(t)?),
                Cell::Num(max_abs(&m.adiabatic_parameter(t)?)),
                Cell::Num(fidelity(&s_ex, &s_in)?),
                Cell::Num(fidelity(&s_ex, &s_ad)?),
                Cell::Num(-infidelity(&s_ex, &s_in)?.log10()),
                Cell::Num(-infidelity(&s_ex, &s_ad)?.log10()),
                Cell::Num((&ex.data - &inr.data).norm() / norm),
                Cell::Num((&ex.data - &ad.data).norm() / norm),
            ])
        };
        let row = match eval() {
            Ok(r) => r,
            Err(e) => {
                let mut row = vec![Cell::Num(t), table.fail_row(i, &e)];
                row.resize(table.columns.len(), Cell::Empty);
                row
            }
        };
        table.rows.push(row);
    }
    Ok(table)
}

fn bloch_matrix(r: [f64; 3]) -> CMatrix {
    let [sx, sy, sz] = spin_ops();
    CMatrix::identity(2, 2) * c(0.5, 0.0) + sx * c(r[0], 0.0) + sy * c(r[1], 0.0) + sz * c(r[2], 0.0)
}

pub fn open(cfg: &RunConfig) -> Result<Table, ConfigInvalid> {
    if cfg.model != ModelKind::Tls {
        return Err(ConfigInvalid { key: "model".into(), message: "open-system runs support the tls model only".into() });
    }
    let t = &cfg.tls;
    let o = &cfg.open;
    let protocol = TlsProtocol::for_endpoints(t.epsilon, t.rabi0, t.rabi_f, t.accel, t.t_f)
        .map_err(|e| ConfigInvalid { key: "tls".into(), message: e.to_string() })?;
    let t_end = o.t_end.unwrap_or(t.t_f);
    protocol
        .validate_horizon(t_end)
        .map_err(|e| ConfigInvalid { key: "open.t_end".into(), message: e.to_string() })?;
    let tls = TwoLevelSystem { protocol, initial: t.initial };
    let bath = BathSpec::new(o.temperature, o.coupling, o.cutoff)
        .map_err(|e| ConfigInvalid { key: "open".into(), message: e.to_string() })?;
    let opts = NameOptions {
        ode: OdeOptions::with_tol(cfg.numerics.rtol.min(1e-10), cfg.numerics.atol.min(1e-12)),
        eigen: eigen_options(cfg),
        dipole: o.dipole,
        lamb_shift: o.lamb_shift,
        ..NameOptions::default()
    };
    let src = "open::name_evolve";
    let mut table = Table::new(&[
        ("t", "cli::time_grid"),
        ("bloch_x", src),
        ("bloch_y", src),
        ("bloch_z", src),
        ("bloch_int_x", src),
        ("bloch_int_y", src),
        ("bloch_int_z", src),
        ("p_excited", src),
        ("p_ground", src),
        ("trace_deviation", src),
        ("min_eigenvalue", src),
    ]);
    let mut ts = vec![0.0];
    ts.extend(time_grid(t_end, o.steps));
    let traj = match name_evolve(&tls, &bath, &bloch_matrix(o.initial), &ts, &opts) {
        Ok(x) => x,
        Err(e) => return Ok(table.failed(&e)),
    };
    table.points = ts.len();
    table.warnings = traj.warnings.clone();
    for r in &traj.records {
        let mut row = vec![Cell::Num(r.t)];
        row.extend(r.bloch.iter().chain(&r.bloch_interaction).map(|x| Cell::Num(*x)));
        row.extend([r.p_excited, r.p_ground, r.trace_deviation, r.min_eigenvalue].map(Cell::Num));
        table.rows.push(row);
    }
    Ok(table)
}

fn family(cfg: &RunConfig) -> (FamilyKind, Box<dyn GeneratorFamily>) {
    let kind = cfg.geo.family.unwrap_or(match cfg.model {
        ModelKind::Ho => FamilyKind::Ho,
        ModelKind::Tls => FamilyKind::Tls,
        ModelKind::TwoSpin => FamilyKind::TwoSpin,
    });
    let fam: Box<dyn GeneratorFamily> = match kind {
        FamilyKind::Ho => Box::new(HoGenerator),
        FamilyKind::Tls => Box::new(TlsGenerator),
        FamilyKind::TwoSpin => Box::new(TwoSpinGenerator),
        FamilyKind::Local => Box::new(TwoSpinLocal),
        FamilyKind::Nonlocal => Box::new(TwoSpinNonLocal),
        FamilyKind::Spin => Box::new(SpinInField { loss: cfg.geo.loss }),
    };
    (kind, fam)
}

fn circuit(sec: &CircuitSection, n: usize) -> Result<ParameterCircuit, ConfigInvalid> {
    let bad = |key: &str, msg: String| ConfigInvalid { key: format!("geo.circuit.{key}"), message: msg };
    let axes = (sec.axes[0], sec.axes[1]);
    let res = match sec.kind {
        CircuitKind::Polygon | CircuitKind::Retraced => {
            if sec.waypoints.iter().any(|p| p.len() != n) {
                return Err(bad("waypoints", format!("every waypoint needs {n} components")));
            }
            if sec.kind == CircuitKind::Polygon {
                ParameterCircuit::polygon(sec.waypoints.clone(), sec.samples)
            } else {
                ParameterCircuit::retraced(sec.waypoints.clone(), sec.samples)
            }
        }
        CircuitKind::Square | CircuitKind::Circle => {
            if sec.center.len() != n {
                return Err(bad("center", format!("needs {n} components")));
            }
            if sec.kind == CircuitKind::Square {
                ParameterCircuit::square(sec.center.clone(), sec.side, axes, sec.samples)
            } else {
                ParameterCircuit::circle(sec.center.clone(), sec.radius, axes, sec.samples)
            }
        }
    };
    res.map_err(|e| bad("kind", e.to_string()))
}

pub fn geo(cfg: &RunConfig) -> Result<Table, ConfigInvalid> {
    let (kind, fam) = family(cfg);
    let n = kind.n_params();
    let sec = cfg.geo.circuit.clone().unwrap_or_else(|| CircuitSection::default_for(n));
    let circ = circuit(&sec, n)?;
    let opts = GeoOptions { eigen: eigen_options(cfg), tol: cfg.geo.tol, max_refinements: cfg.geo.max_refinements };
    let mut table = Table::new(&[
        ("mode", "linalg::decompose_blocks"),
        ("lambda_re", "linalg::decompose_blocks"),
        ("lambda_im", "linalg::decompose_blocks"),
        ("phase_line", "geometric::geometric_phases_line"),
        ("phase_surface", "geometric::geometric_phases_surface"),
        ("line_minus_surface", "geometric::geometric_phases_*"),
    ]);
    let start = circ.nodes(0).remove(0);
    let frame = match fam.frame(&start, &opts.eigen) {
        Ok(f) => f,
        Err(e) => return Ok(table.failed(&e)),
    };
    let line = match geometric_phases_line(fam.as_ref(), &circ, &opts) {
        Ok(x) => x,
        Err(e) => return Ok(table.failed(&e)),
    };
    let surface = if cfg.geo.surface {
        match geometric_phases_surface(fam.as_ref(), &circ, &opts) {
            Ok(s) => Some(s),
            Err(e) => {
                table.warnings.push(format!("surface form skipped: {e}"));
                None
            }
        }
    } else {
        None
    };
    table.points = line.len();
    for (k, phi) in line.iter().enumerate() {
        let s = surface.as_ref().map(|s| s[k]);
        table.rows.push(vec![
            Cell::Int(k as i64),
            Cell::Num(frame.lambdas[k].re),
            Cell::Num(frame.lambdas[k].im),
            Cell::Num(*phi),
            opt(s),
            opt(s.map(|s| phi - s)),
        ]);
    }
    Ok(table)
}
