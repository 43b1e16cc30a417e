//! Run configuration: a JSON tree with embedded defaults.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ho,
    Tls,
    TwoSpin,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ho => "ho",
            ModelKind::Tls => "tls",
            ModelKind::TwoSpin => "two-spin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoSection {
    pub omega0: f64,
    pub omega_f: f64,
    pub accel: f64,
    pub mass: f64,
    /// Protocol duration for `single`, `diagnose`.
    pub t_f: f64,
}

impl Default for HoSection {
    fn default() -> Self {
        Self { omega0: 20.0, omega_f: 10.0, accel: -5e-3, mass: 1.0, t_f: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TlsSection {
    pub epsilon: f64,
    pub rabi0: f64,
    pub rabi_f: f64,
    pub accel: f64,
    /// Initial expectation values of `{H, L, C}`.
    pub initial: [f64; 3],
    pub t_f: f64,
}

impl Default for TlsSection {
    fn default() -> Self {
        Self { epsilon: 8.0, rabi0: 20.0, rabi_f: 10.0, accel: -5e-3, initial: [4.0, 1.0, 1.0], t_f: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoSpinSection {
    pub rabi0: f64,
    pub rabi_rate: f64,
    pub chi0: [f64; 2],
    pub accel: [f64; 2],
    pub alpha0: [f64; 2],
    pub bloch0: [[f64; 3]; 2],
    pub t_f: f64,
}

impl Default for TwoSpinSection {
    fn default() -> Self {
        Self {
            rabi0: 6.0,
            rabi_rate: 0.8,
            chi0: [0.1, -0.25],
            accel: [0.05, 0.02],
            alpha0: [0.3, 1.2],
            bloch0: [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]],
            t_f: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { lo: 0.05, hi: 5.0, n: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub rtol: f64,
    pub atol: f64,
    pub grid: GridSection,
    /// Times sampled along a protocol for maxima and time series.
    pub samples: usize,
    pub include_geo: bool,
    pub degeneracy_threshold: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, grid: GridSection::default(), samples: 64, include_geo: true, degeneracy_threshold: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpenSection {
    pub temperature: f64,
    pub coupling: f64,
    pub cutoff: f64,
    /// End of the output grid; defaults to the protocol duration.
    pub t_end: Option<f64>,
    pub steps: usize,
    pub dipole: [f64; 3],
    pub lamb_shift: bool,
    /// Initial Bloch vector.
    pub initial: [f64; 3],
}

impl Default for OpenSection {
    fn default() -> Self {
        Self {
            temperature: 2.0,
            coupling: 2e-3,
            cutoff: 100.0,
            t_end: None,
            steps: 100,
            dipole: [1.0, 0.0, 0.0],
            lamb_shift: false,
            initial: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Ho,
    Tls,
    TwoSpin,
    Local,
    Nonlocal,
    Spin,
}

impl FamilyKind {
    pub fn n_params(self) -> usize {
        match self {
            FamilyKind::Ho | FamilyKind::Tls => 1,
            FamilyKind::TwoSpin | FamilyKind::Local | FamilyKind::Nonlocal => 2,
            FamilyKind::Spin => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitKind {
    Polygon,
    Retraced,
    Square,
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub kind: CircuitKind,
    #[serde(default)]
    pub waypoints: Vec<Vec<f64>>,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default)]
    pub side: f64,
    #[serde(default)]
    pub radius: f64,
    #[serde(default = "default_axes")]
    pub axes: [usize; 2],
    #[serde(default = "default_circuit_samples")]
    pub samples: usize,
}

fn default_axes() -> [usize; 2] {
    [0, 1]
}

fn default_circuit_samples() -> usize {
    16
}

impl CircuitSection {
    /// Default circuit for a family with `n` parameters.
    pub fn default_for(n: usize) -> Self {
        let base = Self {
            kind: CircuitKind::Square,
            waypoints: vec![],
            center: vec![],
            side: 0.0,
            radius: 0.0,
            axes: default_axes(),
            samples: default_circuit_samples(),
        };
        match n {
            1 => Self { kind: CircuitKind::Polygon, waypoints: vec![vec![-0.4], vec![0.9], vec![0.1]], ..base },
            2 => Self { center: vec![0.3, 0.6], side: 0.1, ..base },
            _ => Self { kind: CircuitKind::Circle, center: vec![0.2, -0.1, 0.8], radius: 0.5, samples: 32, ..base },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoSection {
    /// Generator family; defaults to the model's own.
    pub family: Option<FamilyKind>,
    /// Imaginary field component of the `spin` family.
    pub loss: f64,
    pub circuit: Option<CircuitSection>,
    pub tol: f64,
    pub max_refinements: u32,
    pub surface: bool,
}

impl Default for GeoSection {
    fn default() -> Self {
        Self { family: None, loss: 0.0, circuit: None, tol: 1e-8, max_refinements: 8, surface: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub ho: HoSection,
    #[serde(default)]
    pub tls: TlsSection,
    #[serde(default)]
    pub two_spin: TwoSpinSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub open: OpenSection,
    #[serde(default)]
    pub geo: GeoSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[cfg(test)]
impl RunConfig {
    pub fn defaults(model: ModelKind) -> Self {
        Self {
            model,
            ho: HoSection::default(),
            tls: TlsSection::default(),
            two_spin: TwoSpinSection::default(),
            numerics: NumericsSection::default(),
            open: OpenSection::default(),
            geo: GeoSection::default(),
            output: OutputSection::default(),
        }
    }
}

pub const REQUIRED_KEYS: &[&str] = &["model"];

/// Configuration problem, with the offending key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigInvalid {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigInvalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ConfigInvalid: {}: {}", self.key, self.message)
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigInvalid {
    ConfigInvalid { key: key.into(), message: message.into() }
}

/// Parse a config document. `model_override` satisfies the `model` key when given.
pub fn parse(text: &str, model_override: Option<ModelKind>) -> Result<RunConfig, ConfigInvalid> {
    let mut value: serde_json::Value = if text.trim().is_empty() {
        serde_json::Value::Object(Default::default())
    } else {
        serde_json::from_str(text).map_err(|e| invalid("<document>", format!("not valid JSON: {e}")))?
    };
    let obj = value.as_object_mut().ok_or_else(|| invalid("<document>", "top level must be an object"))?;
    if let Some(m) = model_override {
        obj.insert("model".into(), serde_json::Value::String(m.name().into()));
    }
    let missing: Vec<&str> = REQUIRED_KEYS.iter().copied().filter(|k| !obj.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(invalid(&missing.join(", "), format!("missing required keys: {}", missing.join(", "))));
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let key = e.path().to_string();
        invalid(&key, e.into_inner().to_string())
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

fn positive(key: &str, x: f64) -> Result<(), ConfigInvalid> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {x}")))
    }
}

fn finite(key: &str, xs: &[f64]) -> Result<(), ConfigInvalid> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(key, "must be finite"))
    }
}

pub fn validate(cfg: &RunConfig) -> Result<(), ConfigInvalid> {
    let h = &cfg.ho;
    positive("ho.omega0", h.omega0)?;
    positive("ho.omega_f", h.omega_f)?;
    positive("ho.mass", h.mass)?;
    positive("ho.t_f", h.t_f)?;
    finite("ho.accel", &[h.accel])?;
    let t = &cfg.tls;
    positive("tls.epsilon", t.epsilon)?;
    positive("tls.t_f", t.t_f)?;
    finite("tls.accel", &[t.accel])?;
    finite("tls.initial", &t.initial)?;
    if !(t.rabi0 > t.epsilon) {
        return Err(invalid("tls.rabi0", "must exceed tls.epsilon"));
    }
    if !(t.rabi_f > t.epsilon) {
        return Err(invalid("tls.rabi_f", "must exceed tls.epsilon"));
    }
    let s = &cfg.two_spin;
    positive("two_spin.rabi0", s.rabi0)?;
    positive("two_spin.t_f", s.t_f)?;
    finite("two_spin.rabi_rate", &[s.rabi_rate])?;
    finite("two_spin.chi0", &s.chi0)?;
    finite("two_spin.accel", &s.accel)?;
    finite("two_spin.alpha0", &s.alpha0)?;
    for (i, b) in s.bloch0.iter().enumerate() {
        if b.iter().map(|x| x * x).sum::<f64>().sqrt() > 1.0 + 1e-12 {
            return Err(invalid(&format!("two_spin.bloch0[{i}]"), "Bloch vector longer than 1"));
        }
    }
    let n = &cfg.numerics;
    positive("numerics.rtol", n.rtol)?;
    positive("numerics.atol", n.atol)?;
    positive("numerics.degeneracy_threshold", n.degeneracy_threshold)?;
    positive("numerics.grid.lo", n.grid.lo)?;
    if !(n.grid.hi >= n.grid.lo && n.grid.hi.is_finite()) {
        return Err(invalid("numerics.grid.hi", "must be finite and >= numerics.grid.lo"));
    }
    if n.grid.n == 0 {
        return Err(invalid("numerics.grid.n", "must be at least 1"));
    }
    if n.samples == 0 {
        return Err(invalid("numerics.samples", "must be at least 1"));
    }
    let o = &cfg.open;
    if !(o.temperature >= 0.0 && o.temperature.is_finite()) {
        return Err(invalid("open.temperature", "must be finite and >= 0"));
    }
    if !(o.coupling >= 0.0 && o.coupling.is_finite()) {
        return Err(invalid("open.coupling", "must be finite and >= 0"));
    }
    positive("open.cutoff", o.cutoff)?;
    if let Some(te) = o.t_end {
        positive("open.t_end", te)?;
    }
    if o.steps == 0 {
        return Err(invalid("open.steps", "must be at least 1"));
    }
    finite("open.dipole", &o.dipole)?;
    if o.dipole.iter().all(|x| *x == 0.0) {
        return Err(invalid("open.dipole", "must be non-zero"));
    }
    if o.initial.iter().map(|x| x * x).sum::<f64>().sqrt() > 1.0 + 1e-12 {
        return Err(invalid("open.initial", "Bloch vector longer than 1"));
    }
    let g = &cfg.geo;
    positive("geo.tol", g.tol)?;
    finite("geo.loss", &[g.loss])?;
    if let Some(c) = &g.circuit {
        if c.samples == 0 {
            return Err(invalid("geo.circuit.samples", "must be at least 1"));
        }
        match c.kind {
            CircuitKind::Polygon | CircuitKind::Retraced if c.waypoints.is_empty() => {
                return Err(invalid("geo.circuit.waypoints", "required for polygon and retraced circuits"));
            }
            CircuitKind::Square | CircuitKind::Circle if c.center.is_empty() => {
                return Err(invalid("geo.circuit.center", "required for square and circle circuits"));
            }
            CircuitKind::Square => positive("geo.circuit.side", c.side)?,
            CircuitKind::Circle => positive("geo.circuit.radius", c.radius)?,
            _ => {}
        }
    }
    if cfg.output.dir.is_empty() {
        return Err(invalid("output.dir", "must not be empty"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_lists_required_keys() {
        let e = parse("", None).unwrap_err();
        assert_eq!(e.key, "model");
        assert!(e.message.contains("model"));
        let e = parse("{}", None).unwrap_err();
        assert!(e.message.contains("missing required keys"));
    }

    #[test]
    fn unknown_and_mistyped_keys_name_their_path() {
        let e = parse(r#"{"model":"ho","ho":{"omega":3}}"#, None).unwrap_err();
        assert!(e.key.starts_with("ho"), "{e}");
        let e = parse(r#"{"model":"ho","numerics":{"grid":{"n":"many"}}}"#, None).unwrap_err();
        assert_eq!(e.key, "numerics.grid.n");
    }

    #[test]
    fn validation_names_key() {
        let e = parse(r#"{"model":"tls","tls":{"rabi_f":5}}"#, None).unwrap_err();
        assert_eq!(e.key, "tls.rabi_f");
        let e = parse(r#"{"model":"ho","ho":{"omega_f":-1}}"#, None).unwrap_err();
        assert_eq!(e.key, "ho.omega_f");
    }

    #[test]
    fn override_and_defaults() {
        let c = parse("", Some(ModelKind::Tls)).unwrap();
        assert_eq!(c, RunConfig::defaults(ModelKind::Tls));
        let c = parse(r#"{"model":"ho"}"#, Some(ModelKind::TwoSpin)).unwrap();
        assert_eq!(c.model, ModelKind::TwoSpin);
    }
}
