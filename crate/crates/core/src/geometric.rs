//! Geometric phases of eigen-operators transported around closed circuits in
//! parameter space.
//!
//! Two independent evaluations are provided. The line form accumulates the
//! discrete transport `sum ln (G_k(chi_i)|F_k(chi_{i+1}))` (symmetrized so that
//! reversing a step negates it exactly); the surface form integrates the
//! curvature
//!
//! `V_ab = sum_{m != k} [(G_k|d_a B|F_m)(G_m|d_b B|F_k) - (a <-> b)] / (lambda_m - lambda_k)^2`
//!
//! over a surface spanning the circuit. Both report `phi_k = -Im(...)`.

use crate::engine::{GeneratorFamily, InertialSolution};
use crate::error::{Error, Result};
use crate::linalg::{braket, c, track_continuity, CMatrix, EigenFrame, EigenOptions, C64, I};
use crate::quadrature::gauss_legendre;

/// Geometry of a circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum CircuitPath {
    /// Straight segments through the waypoints.
    Polyline(Vec<Vec<f64>>),
    /// Circle in the plane of parameter axes `axes`.
    Circle { center: Vec<f64>, radius: f64, axes: (usize, usize) },
}

/// A piecewise-smooth curve `chi(s)`, `s in [0, 1]`, in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterCircuit {
    pub path: CircuitPath,
    pub closed: bool,
    /// Number of steps of the coarsest discretization.
    pub samples: usize,
}

const CLOSURE_TOL: f64 = 1e-12;

impl ParameterCircuit {
    /// Open polyline through `points`.
    pub fn polyline(points: Vec<Vec<f64>>, samples: usize) -> Result<Self> {
        Self::check_points(&points)?;
        Ok(Self { path: CircuitPath::Polyline(points), closed: false, samples: samples.max(1) })
    }

    /// Closed polygon; the first point is appended if missing.
    pub fn polygon(mut points: Vec<Vec<f64>>, samples: usize) -> Result<Self> {
        Self::check_points(&points)?;
        let first = points[0].clone();
        if dist(&first, points.last().expect("non-empty")) > CLOSURE_TOL {
            points.push(first);
        }
        Ok(Self { path: CircuitPath::Polyline(points), closed: true, samples: samples.max(1) })
    }

    /// Circuit along `points` and back again; it encloses no area.
    pub fn retraced(points: Vec<Vec<f64>>, samples: usize) -> Result<Self> {
        Self::check_points(&points)?;
        let mut all = points.clone();
        all.extend(points.iter().rev().skip(1).cloned());
        Ok(Self { path: CircuitPath::Polyline(all), closed: true, samples: samples.max(1) })
    }

    /// Axis-aligned square of side `side` centred at `center` in the plane `axes`.
    pub fn square(center: Vec<f64>, side: f64, axes: (usize, usize), samples: usize) -> Result<Self> {
        let h = 0.5 * side;
        let corner = |da: f64, db: f64| {
            let mut p = center.clone();
            p[axes.0] += da;
            p[axes.1] += db;
            p
        };
        Self::check_axes(&center, axes)?;
        Self::polygon(vec![corner(-h, -h), corner(h, -h), corner(h, h), corner(-h, h)], samples)
    }

    pub fn circle(center: Vec<f64>, radius: f64, axes: (usize, usize), samples: usize) -> Result<Self> {
        Self::check_axes(&center, axes)?;
        if !(radius >= 0.0) {
            return Err(Error::InvalidInput("circle radius must be non-negative".into()));
        }
        Ok(Self { path: CircuitPath::Circle { center, radius, axes }, closed: true, samples: samples.max(3) })
    }

    fn check_points(points: &[Vec<f64>]) -> Result<()> {
        let d = points.first().map(|p| p.len()).unwrap_or(0);
        if d == 0 || points.iter().any(|p| p.len() != d || p.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidInput("waypoints must be non-empty, finite and of equal dimension".into()));
        }
        Ok(())
    }

    fn check_axes(center: &[f64], axes: (usize, usize)) -> Result<()> {
        if axes.0 == axes.1 || axes.0 >= center.len() || axes.1 >= center.len() {
            return Err(Error::InvalidInput("circuit plane axes must be two distinct parameter indices".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.path {
            CircuitPath::Polyline(p) => p[0].len(),
            CircuitPath::Circle { center, .. } => center.len(),
        }
    }

    /// Traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let path = match &self.path {
            CircuitPath::Polyline(p) => CircuitPath::Polyline(p.iter().rev().cloned().collect()),
            CircuitPath::Circle { center, radius, axes } => {
                CircuitPath::Circle { center: center.clone(), radius: *radius, axes: (axes.1, axes.0) }
            }
        };
        Self { path, ..self.clone() }
    }

    /// Nodes of the discretization with `samples * 2^level` steps. Polyline
    /// vertices are always nodes; closed circuits repeat the first node last.
    pub fn nodes(&self, level: u32) -> Vec<Vec<f64>> {
        let n = self.samples << level;
        match &self.path {
            CircuitPath::Polyline(p) => {
                if p.len() == 1 {
                    return vec![p[0].clone(); 2];
                }
                let lens: Vec<f64> = p.windows(2).map(|w| dist(&w[0], &w[1])).collect();
                let total: f64 = lens.iter().sum();
                let mut out = vec![p[0].clone()];
                for (w, len) in p.windows(2).zip(&lens) {
                    let m = if total > 0.0 { ((n as f64 * len / total).round() as usize).max(1) } else { 1 };
                    for j in 1..=m {
                        let s = j as f64 / m as f64;
                        out.push(w[0].iter().zip(&w[1]).map(|(a, b)| a + s * (b - a)).collect());
                    }
                }
                if self.closed {
                    *out.last_mut().expect("non-empty") = p[0].clone();
                }
                out
            }
            CircuitPath::Circle { center, radius, axes } => {
                let mut out: Vec<Vec<f64>> = (0..n)
                    .map(|j| circle_point(center, *radius, *axes, std::f64::consts::TAU * j as f64 / n as f64))
                    .collect();
                out.push(out[0].clone());
                out
            }
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn circle_point(center: &[f64], r: f64, axes: (usize, usize), ang: f64) -> Vec<f64> {
    let mut p = center.to_vec();
    p[axes.0] += r * ang.cos();
    p[axes.1] += r * ang.sin();
    p
}

/// Refinement control for both forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoOptions {
    pub eigen: EigenOptions,
    /// Required agreement between successive refinements.
    pub tol: f64,
    /// Maximum number of doublings after the coarsest level.
    pub max_refinements: u32,
}

impl Default for GeoOptions {
    fn default() -> Self {
        Self { eigen: EigenOptions::default(), tol: 1e-8, max_refinements: 8 }
    }
}

/// Symmetric transport `sum_i [ln(G_i|F_{i+1}) - ln(G_{i+1}|F_i)] / 2` along a
/// sequence of frames, modes followed by continuity from the first frame.
/// Returns the transport and the final frame in the continuity gauge.
pub fn transport_along(frames: &[EigenFrame]) -> Result<(Vec<C64>, EigenFrame)> {
    let first = frames.first().ok_or_else(|| Error::InvalidInput("no frames".into()))?;
    let m = first.len();
    let mut acc = vec![C64::new(0.0, 0.0); m];
    let mut prev = first.clone();
    for fr in &frames[1..] {
        let next = fr.apply_tracking(&track_continuity(&prev, fr)?);
        for (k, a) in acc.iter_mut().enumerate() {
            let fwd = braket(&prev.lefts[k], &next.rights[k]).ln();
            let bwd = braket(&next.lefts[k], &prev.rights[k]).ln();
            *a += 0.5 * (fwd - bwd);
        }
        prev = next;
    }
    Ok((acc, prev))
}

/// Transport around a closed sequence of frames (first and last at the same
/// parameters), expressed in the gauge of the first frame. Gauge invariant.
pub fn loop_transport(frames: &[EigenFrame]) -> Result<Vec<C64>> {
    let (acc, last) = transport_along(frames)?;
    let first = &frames[0];
    let tr = track_continuity(first, &last)?;
    if tr.permutation.iter().enumerate().any(|(k, &j)| k != j) {
        return Err(Error::InvalidInput("circuit exchanges eigenmodes".into()));
    }
    Ok(acc
        .iter()
        .enumerate()
        .map(|(k, a)| a - I * braket(&first.lefts[k], &last.rights[k]).arg())
        .collect())
}

fn check_family(family: &dyn GeneratorFamily, circuit: &ParameterCircuit) -> Result<()> {
    if circuit.dim() != family.n_params() {
        return Err(Error::InvalidInput(format!(
            "circuit has {} coordinates but the generator takes {}",
            circuit.dim(),
            family.n_params()
        )));
    }
    if !circuit.closed {
        return Err(Error::InvalidInput("geometric phases need a closed circuit".into()));
    }
    Ok(())
}

fn line_phases_at(family: &dyn GeneratorFamily, circuit: &ParameterCircuit, level: u32, opts: &EigenOptions) -> Result<Vec<f64>> {
    let frames: Vec<EigenFrame> =
        circuit.nodes(level).iter().map(|p| family.frame(p, opts)).collect::<Result<_>>()?;
    Ok(loop_transport(&frames)?.iter().map(|l| -l.im).collect())
}

/// Refine until successive Richardson estimates agree within `tol`.
fn refine<F: FnMut(u32) -> Result<Vec<f64>>>(mut eval: F, order: i32, opts: &GeoOptions) -> Result<Vec<f64>> {
    let r = 2f64.powi(order);
    let mut prev = eval(0)?;
    let mut prev_ext: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;
    for level in 1..=opts.max_refinements {
        let cur = eval(level)?;
        let ext: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| (r * a - b) / (r - 1.0)).collect();
        let raw_change = cur.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if raw_change <= opts.tol {
            return Ok(ext);
        }
        if let Some(pe) = &prev_ext {
            last_change = ext.iter().zip(pe).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if last_change <= opts.tol {
                return Ok(ext);
            }
        }
        prev = cur;
        prev_ext = Some(ext);
    }
    Err(Error::NotConverged(format!("geometric phase still changes by {last_change:e} after refinement")))
}

/// Geometric phases of all modes from the discrete transport around `circuit`.
/// Modes are indexed as in the frame at the circuit's first point.
pub fn geometric_phases_line(family: &dyn GeneratorFamily, circuit: &ParameterCircuit, opts: &GeoOptions) -> Result<Vec<f64>> {
    check_family(family, circuit)?;
    refine(|lvl| line_phases_at(family, circuit, lvl, &opts.eigen), 2, opts)
}

pub fn geometric_phase_line(family: &dyn GeneratorFamily, circuit: &ParameterCircuit, k: usize, opts: &GeoOptions) -> Result<f64> {
    geometric_phases_line(family, circuit, opts)?
        .get(k)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("mode {k} out of range")))
}

/// Curvature two-form `V_ab` of every mode at `chi`, as `d x d` matrices.
pub fn curvature(family: &dyn GeneratorFamily, chi: &[f64], opts: &EigenOptions) -> Result<Vec<CMatrix>> {
    let fr = family.frame(chi, opts)?;
    let grads = family.gradient(chi);
    let d = grads.len();
    let m = fr.len();
    let mut out = vec![CMatrix::zeros(d, d); m];
    for k in 0..m {
        for n in 0..m {
            if n == k || fr.blocks[n] != fr.blocks[k] {
                continue;
            }
            let gap = fr.lambdas[n] - fr.lambdas[k];
            let den = gap * gap;
            let x: Vec<C64> = grads.iter().map(|g| braket(&fr.lefts[k], &(g * &fr.rights[n]))).collect();
            let y: Vec<C64> = grads.iter().map(|g| braket(&fr.lefts[n], &(g * &fr.rights[k]))).collect();
            for a in 0..d {
                for b in 0..d {
                    out[k][(a, b)] += (x[a] * y[b] - x[b] * y[a]) / den;
                }
            }
        }
    }
    Ok(out)
}

/// Flux of the curvature through a triangle `(p0, p1, p2)`, 7-point degree-5 rule.
fn triangle_flux(
    family: &dyn GeneratorFamily,
    p: [&[f64]; 3],
    opts: &EigenOptions,
    acc: &mut [C64],
) -> Result<()> {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    let pts: [([f64; 3], f64); 7] = [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a1, a1, 1.0 - 2.0 * a1], w1),
        ([a1, 1.0 - 2.0 * a1, a1], w1),
        ([1.0 - 2.0 * a1, a1, a1], w1),
        ([a2, a2, 1.0 - 2.0 * a2], w2),
        ([a2, 1.0 - 2.0 * a2, a2], w2),
        ([1.0 - 2.0 * a2, a2, a2], w2),
    ];
    let d = p[0].len();
    let e1: Vec<f64> = (0..d).map(|i| p[1][i] - p[0][i]).collect();
    let e2: Vec<f64> = (0..d).map(|i| p[2][i] - p[0][i]).collect();
    for (bc, w) in pts {
        let x: Vec<f64> = (0..d).map(|i| bc[0] * p[0][i] + bc[1] * p[1][i] + bc[2] * p[2][i]).collect();
        let v = curvature(family, &x, opts)?;
        for (k, vk) in v.iter().enumerate() {
            let mut f = C64::new(0.0, 0.0);
            for a in 0..d {
                for b in (a + 1)..d {
                    f += vk[(a, b)] * (e1[a] * e2[b] - e1[b] * e2[a]);
                }
            }
            // reference triangle has area 1/2
            acc[k] += f * (0.5 * w);
        }
    }
    Ok(())
}

fn subdivide(t: [Vec<f64>; 3], level: u32, out: &mut Vec<[Vec<f64>; 3]>) {
    if level == 0 {
        out.push(t);
        return;
    }
    let mid = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<f64>>();
    let m01 = mid(&t[0], &t[1]);
    let m12 = mid(&t[1], &t[2]);
    let m20 = mid(&t[2], &t[0]);
    let [p0, p1, p2] = t;
    subdivide([p0, m01.clone(), m20.clone()], level - 1, out);
    subdivide([m01.clone(), p1, m12.clone()], level - 1, out);
    subdivide([m20.clone(), m12.clone(), p2], level - 1, out);
    subdivide([m01, m12, m20], level - 1, out);
}

fn surface_phases_at(family: &dyn GeneratorFamily, circuit: &ParameterCircuit, level: u32, opts: &EigenOptions) -> Result<Vec<f64>> {
    let m = family.frame(&circuit.nodes(0)[0], opts)?.len();
    let mut acc = vec![C64::new(0.0, 0.0); m];
    match &circuit.path {
        CircuitPath::Polyline(p) => {
            // cone over the centroid of the distinct vertices
            let verts = &p[..p.len() - 1];
            if verts.len() < 3 {
                return Ok(vec![0.0; m]);
            }
            let d = verts[0].len();
            let cen: Vec<f64> =
                (0..d).map(|i| verts.iter().map(|v| v[i]).sum::<f64>() / verts.len() as f64).collect();
            let split = level + circuit.samples.max(1).ilog2() / 2;
            for j in 0..verts.len() {
                let mut tris = Vec::new();
                subdivide([cen.clone(), verts[j].clone(), verts[(j + 1) % verts.len()].clone()], split, &mut tris);
                for t in &tris {
                    triangle_flux(family, [&t[0], &t[1], &t[2]], opts, &mut acc)?;
                }
            }
        }
        CircuitPath::Circle { center, radius, axes } => {
            let nr = 4usize << level;
            let nt = circuit.samples << level;
            let (xr, wr) = gauss_legendre(nr);
            for (x, w) in xr.iter().zip(&wr) {
                let r = 0.5 * radius * (x + 1.0);
                let jac = 0.5 * radius * w * r * std::f64::consts::TAU / nt as f64;
                for j in 0..nt {
                    let ang = std::f64::consts::TAU * j as f64 / nt as f64;
                    let v = curvature(family, &circle_point(center, r, *axes, ang), opts)?;
                    for (k, vk) in v.iter().enumerate() {
                        acc[k] += vk[(axes.0, axes.1)] * jac;
                    }
                }
            }
        }
    }
    Ok(acc.iter().map(|z| -z.im).collect())
}

/// Geometric phases of all modes from the curvature flux through a surface
/// spanning `circuit` (a cone over the centroid for polygons, the flat disc for
/// circles). Modes are indexed by their position in each frame's ordering.
pub fn geometric_phases_surface(
    family: &dyn GeneratorFamily,
    circuit: &ParameterCircuit,
    opts: &GeoOptions,
) -> Result<Vec<f64>> {
    check_family(family, circuit)?;
    if family.n_params() > 3 {
        return Err(Error::UnsupportedDimension(family.n_params()));
    }
    refine(|lvl| surface_phases_at(family, circuit, lvl, &opts.eigen), 4, opts)
}

pub fn geometric_phase_surface(
    family: &dyn GeneratorFamily,
    circuit: &ParameterCircuit,
    k: usize,
    opts: &GeoOptions,
) -> Result<f64> {
    geometric_phases_surface(family, circuit, opts)?
        .get(k)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("mode {k} out of range")))
}

/// Accumulated phase of an inertial solution split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatedPhase {
    /// `int lambda_k dtheta`.
    pub dynamical: Vec<C64>,
    /// Geometric contribution `phi_k`.
    pub geometric: Vec<f64>,
    /// `Lambda_k = dynamical - phi_k`.
    pub total: Vec<C64>,
}

pub fn accumulated_phase(sol: &InertialSolution) -> AccumulatedPhase {
    AccumulatedPhase {
        dynamical: sol.dyn_phase.clone(),
        geometric: sol.geo_phase.clone(),
        total: sol.dyn_phase.iter().zip(&sol.geo_phase).map(|(d, g)| d - c(*g, 0.0)).collect(),
    }
}

/// A spin-1/2 in a field, `B = (chi_x sx + chi_y sy + (chi_z + i loss) sz) / 2`.
/// With `loss = 0` this is Hermitian and the phases are minus half the solid
/// angle times the spin projection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpinInField {
    pub loss: f64,
}

impl SpinInField {
    fn paulis() -> [CMatrix; 3] {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        [
            CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            CMatrix::from_row_slice(2, 2, &[z, -I, I, z]),
            CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        ]
    }
}

impl GeneratorFamily for SpinInField {
    fn dim(&self) -> usize {
        2
    }
    fn n_params(&self) -> usize {
        3
    }
    fn generator(&self, chi: &[f64]) -> CMatrix {
        let [sx, sy, sz] = Self::paulis();
        (sx * c(chi[0], 0.0) + sy * c(chi[1], 0.0) + sz * c(chi[2], self.loss)) * c(0.5, 0.0)
    }
    fn gradient(&self, _chi: &[f64]) -> Vec<CMatrix> {
        Self::paulis().into_iter().map(|s| s * c(0.5, 0.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_close_and_hit_vertices() {
        let sq = ParameterCircuit::square(vec![0.0, 0.0], 1.0, (0, 1), 8).unwrap();
        let n = sq.nodes(1);
        assert_eq!(n.first(), n.last());
        assert!(n.contains(&vec![0.5, 0.5]));
        let circ = ParameterCircuit::circle(vec![0.0, 0.0, 1.0], 0.5, (0, 1), 16).unwrap();
        assert_eq!(circ.nodes(0).len(), 17);
    }

    #[test]
    fn hermitian_spin_half_solid_angle() {
        // field on a cone of half-angle 60 degrees: solid angle 2 pi (1 - cos)
        let z = 0.5;
        let r = 0.75f64.sqrt();
        let circ = ParameterCircuit::circle(vec![0.0, 0.0, z], r, (0, 1), 32).unwrap();
        let ph = geometric_phases_line(&SpinInField::default(), &circ, &GeoOptions::default()).unwrap();
        let omega = std::f64::consts::TAU * (1.0 - z);
        // modes sorted by eigenvalue: -1/2 then +1/2
        assert!((ph[0] - 0.5 * omega).abs() < 1e-8, "{ph:?}");
        assert!((ph[1] + 0.5 * omega).abs() < 1e-8, "{ph:?}");
    }
}
