//! Dense complex linear algebra: bi-orthogonal eigenframes, block
//! decomposition, continuity tracking and a few matrix helpers.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Conjugate-linear in the first slot: `(g|f) = sum conj(g_i) f_i`.
#[inline]
pub fn braket(g: &CVector, f: &CVector) -> C64 {
    g.dotc(f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Minimum eigenvalue separation inside a block.
    pub degeneracy_threshold: f64,
    /// Relative tolerance used to break ties when picking the gauge component.
    pub tie_tolerance: f64,
    /// Minimum normalized |(G|F)| before the pair is declared defective.
    pub defect_threshold: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { degeneracy_threshold: 1e-8, tie_tolerance: 1e-10, defect_threshold: 1e-10 }
    }
}

/// Right eigenvectors `F`, left eigenvectors `G` (with `B^† G = conj(lambda) G`),
/// normalized so that `(G_k|F_n) = delta_kn`.
///
/// Gauge: each `F` has unit norm and its first largest-magnitude component
/// real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFrame {
    pub chi: Vec<f64>,
    pub lambdas: Vec<C64>,
    pub rights: Vec<CVector>,
    pub lefts: Vec<CVector>,
    /// Block index of every mode.
    pub blocks: Vec<usize>,
}

impl EigenFrame {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rights.first().map_or(0, |v| v.len())
    }

    /// `c_k = (G_k|v)`.
    pub fn coefficients(&self, v: &CVector) -> CVector {
        CVector::from_iterator(self.len(), self.lefts.iter().map(|g| braket(g, v)))
    }

    /// `sum_k c_k F_k`.
    pub fn synthesize(&self, coeffs: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim());
        for (ck, f) in coeffs.iter().zip(&self.rights) {
            out.axpy(*ck, f, ONE);
        }
        out
    }

    /// `sum_k lambda_k F_k (G_k|`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for k in 0..self.len() {
            m += (&self.rights[k] * self.lefts[k].adjoint()) * self.lambdas[k];
        }
        m
    }

    /// `max |(G_k|F_n) - delta_kn|`.
    pub fn biorthogonality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, g) in self.lefts.iter().enumerate() {
            for (n, f) in self.rights.iter().enumerate() {
                let target = if k == n { ONE } else { ZERO };
                worst = worst.max((braket(g, f) - target).norm());
            }
        }
        worst
    }

    /// `max |sum_k F_k(G_k| - 1|`, entrywise.
    pub fn completeness_error(&self) -> f64 {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for k in 0..self.len() {
            m += &self.rights[k] * self.lefts[k].adjoint();
        }
        m -= CMatrix::identity(n, n);
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue separation between modes of the same block.
    pub fn min_block_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for k in 0..self.len() {
            for n in (k + 1)..self.len() {
                if self.blocks[k] == self.blocks[n] {
                    gap = gap.min((self.lambdas[k] - self.lambdas[n]).norm());
                }
            }
        }
        gap
    }

    /// Reorder and re-phase according to a tracking result.
    pub fn apply_tracking(&self, tracking: &Tracking) -> EigenFrame {
        let mut out = EigenFrame {
            chi: self.chi.clone(),
            lambdas: Vec::with_capacity(self.len()),
            rights: Vec::with_capacity(self.len()),
            lefts: Vec::with_capacity(self.len()),
            blocks: Vec::with_capacity(self.len()),
        };
        for (k, &j) in tracking.permutation.iter().enumerate() {
            let ph = tracking.phases[k];
            out.lambdas.push(self.lambdas[j]);
            out.rights.push(&self.rights[j] * ph);
            out.lefts.push(&self.lefts[j] * ph);
            out.blocks.push(self.blocks[j]);
        }
        out
    }
}

/// Result of matching the modes of a new frame to a reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    /// `permutation[k]` is the index in the new frame continuing reference mode `k`.
    pub permutation: Vec<usize>,
    /// Unit phase applied to both `F` and `G` of the matched mode.
    pub phases: Vec<C64>,
}

fn schur_form(b: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if let Some(s) = Schur::try_new(b.clone(), f64::EPSILON, 100_000) {
        return Ok(s.unpack());
    }
    // The shifted QR iteration can stall on highly symmetric matrices; a fixed
    // Householder similarity breaks the symmetry.
    let n = b.nrows();
    for seed in 1..=3 {
        let v = CVector::from_iterator(n, (0..n).map(|i| c(1.0 + 0.37 * (i * seed) as f64, 0.21 * (i + seed) as f64)));
        let v = &v / c(v.norm(), 0.0);
        let h = CMatrix::identity(n, n) - &v * v.adjoint() * c(2.0, 0.0);
        if let Some(s) = Schur::try_new(&h * b * &h, f64::EPSILON, 100_000) {
            let (q, t) = s.unpack();
            return Ok((h * q, t));
        }
    }
    Err(Error::NotConverged("complex Schur iteration".into()))
}

/// Eigenvalues from the complex Schur form.
pub fn eigenvalues(b: &CMatrix) -> Result<Vec<C64>> {
    check_finite(b)?;
    let (_, t) = schur_form(b)?;
    Ok((0..t.nrows()).map(|k| t[(k, k)]).collect())
}

fn check_finite(b: &CMatrix) -> Result<()> {
    if !b.is_square() {
        return Err(Error::InvalidInput(format!("matrix is {}x{}", b.nrows(), b.ncols())));
    }
    if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Right eigenpairs via Schur form and triangular back-substitution.
fn right_eigenpairs(b: &CMatrix) -> Result<(Vec<C64>, Vec<CVector>)> {
    let n = b.nrows();
    let (q, t) = schur_form(b)?;
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * scale;
    let mut lambdas = Vec::with_capacity(n);
    let mut vecs = Vec::with_capacity(n);
    for k in 0..n {
        let lam = t[(k, k)];
        let mut y = CVector::zeros(n);
        y[k] = ONE;
        for j in (0..k).rev() {
            let mut s = ZERO;
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[l];
            }
            let mut d = t[(j, j)] - lam;
            if d.norm() < smin {
                d = c(smin, 0.0);
            }
            y[j] = -s / d;
        }
        let mut x = &q * y;
        let nrm = x.norm();
        x /= c(nrm, 0.0);
        lambdas.push(lam);
        vecs.push(x);
    }
    Ok((lambdas, vecs))
}

fn gauge_fix(f: &mut CVector, g: &mut CVector, opts: &EigenOptions) -> Result<()> {
    let nrm = f.norm();
    *f /= c(nrm, 0.0);
    let max = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = f
        .iter()
        .position(|z| z.norm() >= (1.0 - opts.tie_tolerance) * max)
        .unwrap_or(0);
    let ph = f[pivot] / f[pivot].norm();
    *f *= ph.conj();
    let s = braket(g, f);
    let overlap = s.norm() / g.norm();
    if !(overlap >= opts.defect_threshold) {
        return Err(Error::NotDiagonalizable { overlap });
    }
    *g /= s.conj();
    Ok(())
}

fn order_key(a: &C64, b: &C64) -> std::cmp::Ordering {
    let tol = 1e-9 * (1.0 + a.norm().max(b.norm()));
    if (a.re - b.re).abs() > tol {
        a.re.total_cmp(&b.re)
    } else {
        a.im.total_cmp(&b.im)
    }
}

/// Decomposition of a single block, modes sorted by (Re, Im) of the eigenvalue.
fn decompose_dense(b: &CMatrix, opts: &EigenOptions) -> Result<(Vec<C64>, Vec<CVector>, Vec<CVector>)> {
    let n = b.nrows();
    let (lam_r, vec_r) = right_eigenpairs(b)?;
    let mut gap = f64::INFINITY;
    for k in 0..n {
        for j in (k + 1)..n {
            gap = gap.min((lam_r[k] - lam_r[j]).norm());
        }
    }
    if gap < opts.degeneracy_threshold {
        return Err(Error::DegenerateSpectrum { gap, threshold: opts.degeneracy_threshold });
    }
    let (lam_l, vec_l) = right_eigenpairs(&b.adjoint())?;
    let mut used = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| order_key(&lam_r[x], &lam_r[y]));
    let mut lambdas = Vec::with_capacity(n);
    let mut rights = Vec::with_capacity(n);
    let mut lefts = Vec::with_capacity(n);
    for &k in &order {
        let j = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&x, &y| {
                (lam_l[x].conj() - lam_r[k])
                    .norm()
                    .total_cmp(&(lam_l[y].conj() - lam_r[k]).norm())
            })
            .expect("left eigenpair available");
        used[j] = true;
        let mut f = vec_r[k].clone();
        let mut g = vec_l[j].clone();
        gauge_fix(&mut f, &mut g, opts)?;
        lambdas.push(lam_r[k]);
        rights.push(f);
        lefts.push(g);
    }
    Ok((lambdas, rights, lefts))
}

/// Full bi-orthogonal eigendecomposition treating the matrix as one block.
pub fn bi_eigendecompose(b: &CMatrix, opts: &EigenOptions) -> Result<EigenFrame> {
    let n = b.nrows();
    decompose_blocks(b, &[(0..n).collect()], opts)
}

/// Eigendecomposition restricted to an invariant block partition.
///
/// Degeneracies between different blocks are allowed; each block must be
/// non-degenerate on its own. Couplings between blocks are assumed zero and
/// are checked to be.
pub fn decompose_blocks(b: &CMatrix, blocks: &[Vec<usize>], opts: &EigenOptions) -> Result<EigenFrame> {
    check_finite(b)?;
    let n = b.nrows();
    let mut seen = vec![false; n];
    for idx in blocks.iter().flatten() {
        if *idx >= n || seen[*idx] {
            return Err(Error::InvalidInput("block partition is not a partition of the basis".into()));
        }
        seen[*idx] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidInput("block partition does not cover the basis".into()));
    }
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    for (bi, blk) in blocks.iter().enumerate() {
        for (bj, other) in blocks.iter().enumerate() {
            if bi == bj {
                continue;
            }
            for &r in blk {
                for &col in other {
                    if b[(r, col)].norm() > 1e-12 * scale {
                        return Err(Error::InvalidInput(format!(
                            "block partition is not invariant: entry ({r},{col}) couples blocks"
                        )));
                    }
                }
            }
        }
    }

    let mut frame = EigenFrame { chi: vec![], lambdas: vec![], rights: vec![], lefts: vec![], blocks: vec![] };
    for (bi, blk) in blocks.iter().enumerate() {
        let m = blk.len();
        let sub = CMatrix::from_fn(m, m, |r, col| b[(blk[r], blk[col])]);
        let (lams, fs, gs) = decompose_dense(&sub, opts)?;
        for ((lam, f), g) in lams.into_iter().zip(fs).zip(gs) {
            let mut fe = CVector::zeros(n);
            let mut ge = CVector::zeros(n);
            for (r, &idx) in blk.iter().enumerate() {
                fe[idx] = f[r];
                ge[idx] = g[r];
            }
            frame.lambdas.push(lam);
            frame.rights.push(fe);
            frame.lefts.push(ge);
            frame.blocks.push(bi);
        }
    }
    Ok(frame)
}

/// Eigenpair closest to `guess`, requiring only that this eigenvalue be
/// isolated from the rest of the spectrum by the degeneracy threshold.
pub fn isolated_eigenpair(b: &CMatrix, guess: C64, opts: &EigenOptions) -> Result<(C64, CVector, CVector)> {
    check_finite(b)?;
    let n = b.nrows();
    let (lam_r, vec_r) = right_eigenpairs(b)?;
    let k = (0..n)
        .min_by(|&x, &y| (lam_r[x] - guess).norm().total_cmp(&(lam_r[y] - guess).norm()))
        .ok_or_else(|| Error::InvalidInput("empty matrix".into()))?;
    let lam = lam_r[k];
    let gap = (0..n)
        .filter(|&j| j != k)
        .map(|j| (lam_r[j] - lam).norm())
        .fold(f64::INFINITY, f64::min);
    if gap < opts.degeneracy_threshold {
        return Err(Error::DegenerateSpectrum { gap, threshold: opts.degeneracy_threshold });
    }
    let (lam_l, vec_l) = right_eigenpairs(&b.adjoint())?;
    let j = (0..n)
        .min_by(|&x, &y| (lam_l[x].conj() - lam).norm().total_cmp(&(lam_l[y].conj() - lam).norm()))
        .expect("non-empty");
    let mut f = vec_r[k].clone();
    let mut g = vec_l[j].clone();
    gauge_fix(&mut f, &mut g, opts)?;
    Ok((lam, f, g))
}

/// Match modes of `next` to those of `prev` by maximal |(G_prev|F_next)| and
/// choose phases making each diagonal overlap real and positive.
pub fn track_continuity(prev: &EigenFrame, next: &EigenFrame) -> Result<Tracking> {
    let n = prev.len();
    if next.len() != n {
        return Err(Error::InvalidInput("frames have different sizes".into()));
    }
    let mut permutation = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    let mut taken = vec![false; n];
    for k in 0..n {
        let gnorm = prev.lefts[k].norm().max(f64::MIN_POSITIVE);
        let mut best = (usize::MAX, -1.0, ZERO);
        let mut second = -1.0;
        for j in 0..n {
            let s = braket(&prev.lefts[k], &next.rights[j]);
            let o = s.norm() / gnorm;
            if o > best.1 {
                second = best.1;
                best = (j, o, s);
            } else if o > second {
                second = o;
            }
        }
        if best.1 - second.max(0.0) < 1e-6 || taken[best.0] {
            return Err(Error::AmbiguousMatching { best: best.1, second: second.max(0.0) });
        }
        taken[best.0] = true;
        permutation.push(best.0);
        phases.push((best.2 / best.2.norm()).conj());
    }
    Ok(Tracking { permutation, phases })
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Principal square root of a Hermitian positive semi-definite matrix.
/// Negative eigenvalues from round-off are clipped to zero.
pub fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let d = eig.eigenvalues.map(|x| c(x.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let theta13 = 5.371920351148152;
    let s = if norm1 > theta13 { (norm1 / theta13).log2().ceil() as i32 } else { 0 };
    let a = a * c(0.5f64.powi(s), 0.0);
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let r = |x: f64| c(x, 0.0);
    let u_inner = &a6 * (&a6 * r(B[13]) + &a4 * r(B[11]) + &a2 * r(B[9]))
        + &a6 * r(B[7])
        + &a4 * r(B[5])
        + &a2 * r(B[3])
        + &id * r(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * r(B[12]) + &a4 * r(B[10]) + &a2 * r(B[8]))
        + &a6 * r(B[6])
        + &a4 * r(B[4])
        + &a2 * r(B[2])
        + &id * r(B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut x = q.lu().solve(&p).expect("Pade denominator is invertible");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        // small LCG; enough for deterministic fixtures
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        CMatrix::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn pauli_x_frame() {
        let b = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let fr = bi_eigendecompose(&b, &EigenOptions::default()).unwrap();
        assert!((fr.lambdas[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((fr.lambdas[1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(fr.biorthogonality_error() < 1e-14);
        // gauge: first largest component real positive
        assert!(fr.rights[1][0].im.abs() < 1e-15 && fr.rights[1][0].re > 0.0);
        assert!((fr.rights[0][0] - c(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn schur_is_triangular_for_random_complex() {
        for seed in 0..20 {
            let b = random_matrix(9, seed);
            let (q, t) = schur_form(&b).unwrap();
            for r in 0..9 {
                for col in 0..r {
                    assert!(t[(r, col)].norm() < 1e-12, "seed {seed} ({r},{col})");
                }
            }
            let rec = &q * &t * q.adjoint();
            assert!((rec - &b).norm() < 1e-12);
        }
    }

    #[test]
    fn random_nonnormal_reconstruction() {
        for seed in 0..20 {
            let b = random_matrix(7, 100 + seed);
            let fr = bi_eigendecompose(&b, &EigenOptions::default()).unwrap();
            assert!((fr.reconstruct() - &b).norm() < 1e-11);
            assert!(fr.biorthogonality_error() < 1e-11);
            assert!(fr.completeness_error() < 1e-11);
            for k in 0..fr.len() {
                let r = &b * &fr.rights[k] - &fr.rights[k] * fr.lambdas[k];
                assert!(r.norm() < 1e-12);
                let l = b.adjoint() * &fr.lefts[k] - &fr.lefts[k] * fr.lambdas[k].conj();
                assert!(l.norm() < 1e-11 * fr.lefts[k].norm());
            }
        }
    }

    #[test]
    fn symmetric_tridiagonal_does_not_stall() {
        // plain shifted QR stalls on this matrix
        let z = c(0.0, 0.0);
        let b = CMatrix::from_row_slice(3, 3, &[z, I, z, -I, z, I, z, -I, z]);
        let f = bi_eigendecompose(&b, &EigenOptions::default()).unwrap();
        assert!((f.lambdas[2].re - 2f64.sqrt()).abs() < 1e-14);
        assert!((f.reconstruct() - b).norm() < 1e-13);
    }

    #[test]
    fn jordan_block_is_degenerate() {
        let b = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        match bi_eigendecompose(&b, &EigenOptions::default()) {
            Err(Error::DegenerateSpectrum { .. }) | Err(Error::NotDiagonalizable { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blocks_allow_cross_block_degeneracy() {
        let mut b = CMatrix::zeros(4, 4);
        b[(0, 1)] = ONE;
        b[(1, 0)] = ONE;
        b[(2, 3)] = ONE;
        b[(3, 2)] = ONE;
        assert!(matches!(
            bi_eigendecompose(&b, &EigenOptions::default()),
            Err(Error::DegenerateSpectrum { .. })
        ));
        let fr = decompose_blocks(&b, &[vec![0, 1], vec![2, 3]], &EigenOptions::default()).unwrap();
        assert_eq!(fr.blocks, vec![0, 0, 1, 1]);
        assert!((fr.reconstruct() - &b).norm() < 1e-14);
        assert!(decompose_blocks(&b, &[vec![0, 2], vec![1, 3]], &EigenOptions::default()).is_err());
    }

    #[test]
    fn tracking_detects_swap_and_phase() {
        let b = random_matrix(5, 7);
        let fr = bi_eigendecompose(&b, &EigenOptions::default()).unwrap();
        let mut swapped = fr.clone();
        swapped.lambdas.swap(1, 2);
        swapped.rights.swap(1, 2);
        swapped.lefts.swap(1, 2);
        let ph = C64::from_polar(1.0, 0.7);
        swapped.rights[3] *= ph;
        swapped.lefts[3] *= ph;
        let tr = track_continuity(&fr, &swapped).unwrap();
        assert_eq!(tr.permutation, vec![0, 2, 1, 3, 4]);
        let back = swapped.apply_tracking(&tr);
        for k in 0..5 {
            assert!((&back.rights[k] - &fr.rights[k]).norm() < 1e-13);
            assert!((&back.lefts[k] - &fr.lefts[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn tracking_ambiguous_for_degenerate_mix() {
        let mut fr = EigenFrame {
            chi: vec![],
            lambdas: vec![ZERO, ONE],
            rights: vec![CVector::from_vec(vec![ONE, ZERO]), CVector::from_vec(vec![ZERO, ONE])],
            lefts: vec![CVector::from_vec(vec![ONE, ZERO]), CVector::from_vec(vec![ZERO, ONE])],
            blocks: vec![0, 0],
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let next = EigenFrame {
            rights: vec![CVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]), CVector::from_vec(vec![c(s, 0.0), c(-s, 0.0)])],
            ..fr.clone()
        };
        assert!(matches!(track_continuity(&fr, &next), Err(Error::AmbiguousMatching { .. })));
        fr.chi = vec![0.0];
    }

    #[test]
    fn isolated_pair_inside_degenerate_spectrum() {
        let b = CMatrix::from_diagonal(&CVector::from_vec(vec![ZERO, ZERO, c(2.0, 0.0)]));
        let (lam, f, g) = isolated_eigenpair(&b, c(1.9, 0.0), &EigenOptions::default()).unwrap();
        assert!((lam - c(2.0, 0.0)).norm() < 1e-14);
        assert!((braket(&g, &f) - ONE).norm() < 1e-14);
        assert!(matches!(
            isolated_eigenpair(&b, ZERO, &EigenOptions::default()),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.8;
        let a = CMatrix::from_row_slice(2, 2, &[ZERO, c(-t, 0.0), c(t, 0.0), ZERO]);
        let e = expm(&a);
        assert!((e[(0, 0)] - c(t.cos(), 0.0)).norm() < 1e-14);
        assert!((e[(1, 0)] - c(t.sin(), 0.0)).norm() < 1e-14);
        let big = random_matrix(4, 3) * c(9.0, 0.0);
        let e1 = expm(&big);
        let e2 = expm(&(&big * c(0.5, 0.0)));
        assert!((&e2 * &e2 - &e1).norm() < 1e-9 * e1.norm());
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let a = random_matrix(4, 11);
        let m = &a * a.adjoint();
        let s = hermitian_sqrt(&m);
        assert!((&s * &s - &m).norm() < 1e-12 * m.norm());
    }
}
