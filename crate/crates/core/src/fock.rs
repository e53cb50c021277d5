//! Dense Fock-space numerics under the Jordan-Wigner transformation.
//!
//! Mode ordering is site-major: mode `(site - 1) * p + (alpha - 1)` carries
//! the pair `m^{2 alpha - 1} = f^dagger + f`, `m^{2 alpha} = i (f^dagger - f)`.
//! Mode 0 is the first (most significant) tensor factor, so a Fock basis
//! index `b` has mode `mu` occupied iff bit `N - 1 - mu` of `b` is set.
//! Under this convention `m_j^1` on a single mode is Pauli X and
//! `m_j^2` is Pauli Y, each preceded by a Z string on all earlier modes.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigh, eigvalsh, CMatrix, HermitianEigen};
use crate::majorana::{BitIter, MajoranaWord, OperatorExpansion, SitePermutation, SystemShape};

pub const DEFAULT_MODE_CAP: usize = 12;

static MODE_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_MODE_CAP);

/// Largest `pV` for which dense matrices are built.
pub fn mode_cap() -> usize {
    MODE_CAP.load(Ordering::Relaxed)
}

pub fn set_mode_cap(cap: usize) {
    MODE_CAP.store(cap, Ordering::Relaxed);
}

pub fn check_modes(shape: &SystemShape) -> Result<()> {
    let cap = mode_cap();
    if shape.modes() > cap {
        return Err(Error::Resource {
            modes: shape.modes(),
            cap,
        });
    }
    Ok(())
}

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const PARITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;

/// A Majorana word acting on the Fock basis: `W |b> = phase[b] |b ^ flip>`.
#[derive(Debug, Clone)]
pub struct WordAction {
    pub flip: usize,
    pub phase: Vec<Complex64>,
}

impl WordAction {
    pub fn new(shape: &SystemShape, w: MajoranaWord) -> Self {
        let n = shape.modes();
        let dim = 1usize << n;
        let gens: Vec<u32> = BitIter(w.bits()).collect();
        let mut flip = 0usize;
        for &g in &gens {
            flip ^= 1 << (n - 1 - g as usize / 2);
        }
        let i = Complex64::new(0.0, 1.0);
        let phase = (0..dim)
            .map(|b0| {
                let mut b = b0;
                let mut ph = Complex64::new(1.0, 0.0);
                for &g in gens.iter().rev() {
                    let mode = g as usize / 2;
                    let pos = n - 1 - mode;
                    // Z string on all earlier modes = higher bit positions
                    if (b >> (pos + 1)).count_ones() % 2 == 1 {
                        ph = -ph;
                    }
                    let occupied = (b >> pos) & 1 == 1;
                    if g % 2 == 1 {
                        // Y|0> = i|1>, Y|1> = -i|0>
                        ph *= if occupied { -i } else { i };
                    }
                    b ^= 1 << pos;
                }
                ph
            })
            .collect();
        WordAction { flip, phase }
    }

    /// `tr(M W)`.
    pub fn trace_with(&self, m: &CMatrix) -> Complex64 {
        self.phase
            .iter()
            .enumerate()
            .map(|(b, ph)| m[(b, b ^ self.flip)] * ph)
            .sum()
    }
}

/// Square matrix over the Fock basis of a [`SystemShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    shape: SystemShape,
    matrix: CMatrix,
}

impl DenseOperator {
    pub fn new(shape: SystemShape, matrix: CMatrix) -> Result<Self> {
        check_modes(&shape)?;
        if matrix.dim() != 1 << shape.modes() {
            return Err(Error::domain(format!(
                "matrix of dimension {} does not match {shape}",
                matrix.dim()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::domain("matrix has non-finite entries"));
        }
        Ok(DenseOperator { shape, matrix })
    }

    pub fn identity(shape: SystemShape) -> Result<Self> {
        check_modes(&shape)?;
        Ok(DenseOperator {
            shape,
            matrix: CMatrix::identity(1 << shape.modes()),
        })
    }

    pub fn maximally_mixed(shape: SystemShape) -> Result<Self> {
        let id = Self::identity(shape)?;
        let d = id.dim() as f64;
        Ok(id.map(|m| m.scale_real(1.0 / d)))
    }

    /// Projector onto a Fock basis state; `occupied[mu]` for each mode.
    pub fn basis_projector(shape: SystemShape, occupied: &[bool]) -> Result<Self> {
        check_modes(&shape)?;
        let n = shape.modes();
        if occupied.len() != n {
            return Err(Error::domain("occupation list length differs from mode count"));
        }
        let b = occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .fold(0usize, |acc, (mu, _)| acc | 1 << (n - 1 - mu));
        let mut m = CMatrix::zeros(1 << n);
        m[(b, b)] = Complex64::new(1.0, 0.0);
        Ok(DenseOperator { shape, matrix: m })
    }

    pub fn vacuum(shape: SystemShape) -> Result<Self> {
        Self::basis_projector(shape, &vec![false; shape.modes()])
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Applies a shape-preserving matrix map.
    pub fn map(&self, f: impl FnOnce(&CMatrix) -> CMatrix) -> Self {
        let matrix = f(&self.matrix);
        assert_eq!(matrix.dim(), self.matrix.dim());
        DenseOperator {
            shape: self.shape,
            matrix,
        }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::domain(format!(
                "shape mismatch: {} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(self.map(|m| m.sub(&other.matrix)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(self.map(|m| m.add(&other.matrix)))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(self.map(|m| m.mul(&other.matrix)))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `tr(self * w)`.
    pub fn word_expectation(&self, w: MajoranaWord) -> Complex64 {
        WordAction::new(&self.shape, w).trace_with(&self.matrix)
    }

    /// Majorana-basis coefficient of `w`: `tr(M w^dagger) / 2^{pV}`.
    pub fn coefficient(&self, w: MajoranaWord) -> Complex64 {
        self.word_expectation(w) * (w.adjoint_sign().value() / self.dim() as f64)
    }

    /// `U M U^dagger` for the Fock unitary with `U m_j U^dagger = m_{pi(j)}`.
    pub fn permute_sites(&self, pi: &SitePermutation) -> Result<Self> {
        if pi.sites() != self.shape.sites() {
            return Err(Error::domain("permutation size differs from site count"));
        }
        let (target, sign) = mode_permutation(&self.shape, pi);
        let dim = self.dim();
        let mut out = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out[(target[i], target[j])] = self.matrix[(i, j)] * (sign[i] * sign[j]);
            }
        }
        Ok(DenseOperator {
            shape: self.shape,
            matrix: out,
        })
    }

    /// Fermionic partial trace onto `keep` (1-based sites, relabeled in
    /// ascending order).
    pub fn partial_trace_sites(&self, keep: &[usize]) -> Result<Self> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(Error::domain("partial trace onto an empty site set"));
        }
        let v = self.shape.sites();
        if keep.iter().any(|&s| s == 0 || s > v) {
            return Err(Error::domain(format!("keep set {keep:?} out of range 1..={v}")));
        }
        let prefix = keep.iter().enumerate().all(|(i, &s)| s == i + 1);
        let moved = if prefix {
            self.clone()
        } else {
            // send kept sites to the front in order, the rest behind them
            let mut images = vec![0; v];
            let mut next = 1;
            for &s in &keep {
                images[s - 1] = next;
                next += 1;
            }
            for (s, img) in images.iter_mut().enumerate() {
                if !keep.contains(&(s + 1)) {
                    *img = next;
                    next += 1;
                }
            }
            self.permute_sites(&SitePermutation::from_images(&images)?)?
        };
        let target = self.shape.with_sites(keep.len())?;
        let traced_modes = self.shape.modes() - target.modes();
        let rest = 1usize << traced_modes;
        let kd = 1usize << target.modes();
        let m = &moved.matrix;
        let reduced = CMatrix::from_fn(kd, |i, j| {
            (0..rest).map(|r| m[((i << traced_modes) | r, (j << traced_modes) | r)]).sum()
        });
        Ok(DenseOperator {
            shape: target,
            matrix: reduced,
        })
    }

    /// Reduction onto sites `1..=k`.
    pub fn reduce_to_first(&self, k: usize) -> Result<Self> {
        self.partial_trace_sites(&(1..=k).collect::<Vec<_>>())
    }

    /// Header `dim`, then one row per line of interleaved `re im` values.
    pub fn to_text(&self) -> String {
        matrix_to_text(&self.matrix)
    }

    pub fn from_text(shape: SystemShape, text: &str) -> Result<Self> {
        Self::new(shape, matrix_from_text(text)?)
    }
}

pub fn matrix_to_text(m: &CMatrix) -> String {
    let n = m.dim();
    let mut s = format!("{n}\n");
    for i in 0..n {
        let row: Vec<String> = m.row(i).iter().map(|c| format!("{} {}", c.re, c.im)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn matrix_from_text(text: &str) -> Result<CMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hl, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing dimension header".into(),
    })?;
    let n: usize = header.trim().parse().map_err(|_| Error::Parse {
        line: hl + 1,
        msg: format!("bad dimension {header:?}"),
    })?;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n {
        let (ln, row) = lines.next().ok_or(Error::Parse {
            line: hl + 1,
            msg: format!("expected {n} rows"),
        })?;
        let vals: std::result::Result<Vec<f64>, _> = row.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|_| Error::Parse {
            line: ln + 1,
            msg: "bad number".into(),
        })?;
        if vals.len() != 2 * n {
            return Err(Error::Parse {
                line: ln + 1,
                msg: format!("expected {} values, found {}", 2 * n, vals.len()),
            });
        }
        data.extend(vals.chunks(2).map(|c| Complex64::new(c[0], c[1])));
    }
    Ok(CMatrix::from_rows(n, data).expect("row count checked"))
}

/// Basis relabeling and signs of the Fock unitary induced by a site permutation.
fn mode_permutation(shape: &SystemShape, pi: &SitePermutation) -> (Vec<usize>, Vec<f64>) {
    let n = shape.modes();
    let p = shape.modes_per_site();
    let new_mode: Vec<usize> = (0..n).map(|mu| (pi.apply(mu / p + 1) - 1) * p + mu % p).collect();
    let dim = 1usize << n;
    let mut target = vec![0; dim];
    let mut sign = vec![1.0; dim];
    for b in 0..dim {
        let mut t = 0usize;
        let mut seen = 0u64;
        let mut odd = false;
        for mu in 0..n {
            if (b >> (n - 1 - mu)) & 1 == 1 {
                let nm = new_mode[mu];
                odd ^= (seen >> (nm + 1)).count_ones() % 2 == 1;
                seen |= 1 << nm;
                t |= 1 << (n - 1 - nm);
            }
        }
        target[b] = t;
        sign[b] = if odd { -1.0 } else { 1.0 };
    }
    (target, sign)
}

/// Jordan-Wigner matrix of a canonical word.
pub fn jw_matrix(w: MajoranaWord, shape: SystemShape) -> Result<DenseOperator> {
    check_modes(&shape)?;
    if w.bits() & !low_mask(shape.majoranas()) != 0 {
        return Err(Error::domain("word exceeds shape"));
    }
    let action = WordAction::new(&shape, w);
    let dim = 1usize << shape.modes();
    let mut m = CMatrix::zeros(dim);
    for b in 0..dim {
        m[(b ^ action.flip, b)] = action.phase[b];
    }
    Ok(DenseOperator { shape, matrix: m })
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn to_matrix(a: &OperatorExpansion) -> Result<DenseOperator> {
    let shape = a.shape();
    check_modes(&shape)?;
    let dim = 1usize << shape.modes();
    let mut m = CMatrix::zeros(dim);
    for (w, c) in a.terms() {
        let action = WordAction::new(&shape, w);
        for b in 0..dim {
            m[(b ^ action.flip, b)] += c * action.phase[b];
        }
    }
    Ok(DenseOperator { shape, matrix: m })
}

/// Full Majorana expansion (all `4^{pV}` words).
pub fn to_expansion(m: &DenseOperator) -> OperatorExpansion {
    to_expansion_truncated(m, m.shape().majoranas())
}

/// Majorana expansion restricted to words of degree at most `max_degree`.
pub fn to_expansion_truncated(m: &DenseOperator, max_degree: usize) -> OperatorExpansion {
    let shape = m.shape();
    let words = words_up_to_degree(shape.majoranas(), max_degree);
    OperatorExpansion::from_terms(shape, words.into_iter().map(|w| (w, m.coefficient(w))))
}

/// All words over `n` generators with at most `max_degree` factors.
pub fn words_up_to_degree(n: usize, max_degree: usize) -> Vec<MajoranaWord> {
    let mut out = vec![MajoranaWord::IDENTITY];
    let mut frontier = vec![0u64];
    for _ in 0..max_degree.min(n) {
        let mut next = Vec::new();
        for &w in &frontier {
            let start = if w == 0 { 0 } else { 64 - w.leading_zeros() as usize };
            for b in start..n {
                next.push(w | 1 << b);
            }
        }
        out.extend(next.iter().map(|&w| MajoranaWord::from_bits(w)));
        frontier = next;
    }
    out
}

pub fn hermitian_eig(m: &DenseOperator) -> Result<HermitianEigen> {
    hermitian_eig_matrix(&m.matrix)
}

pub fn hermitian_eig_matrix(m: &CMatrix) -> Result<HermitianEigen> {
    let r = m.hermiticity_residual();
    if r > HERMITIAN_TOL {
        return Err(Error::domain(format!("matrix is not Hermitian (residual {r:.3e})")));
    }
    Ok(eigh(&m.hermitian_part()))
}

/// Sum of absolute eigenvalues of a Hermitian operator.
pub fn trace_norm(m: &DenseOperator) -> Result<f64> {
    trace_norm_matrix(&m.matrix)
}

pub fn trace_norm_matrix(m: &CMatrix) -> Result<f64> {
    let r = m.hermiticity_residual();
    if r > HERMITIAN_TOL {
        return Err(Error::domain(format!("matrix is not Hermitian (residual {r:.3e})")));
    }
    Ok(eigvalsh(&m.hermitian_part()).iter().map(|l| l.abs()).sum())
}

/// Largest singular value of an arbitrary matrix.
pub fn operator_norm(m: &CMatrix) -> f64 {
    let gram = m.adjoint().mul(m).hermitian_part();
    eigvalsh(&gram).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// `P_1 ... P_V`, diagonal `(-1)^{particle number}`.
pub fn global_parity(shape: SystemShape) -> Result<DenseOperator> {
    check_modes(&shape)?;
    let diag: Vec<f64> = (0..1usize << shape.modes())
        .map(|b| if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    Ok(DenseOperator {
        shape,
        matrix: CMatrix::from_diag(&diag),
    })
}

/// `P_j = prod_alpha (1 - 2 n_j^alpha)`.
pub fn site_parity(shape: SystemShape, site: usize) -> Result<DenseOperator> {
    check_modes(&shape)?;
    if site == 0 || site > shape.sites() {
        return Err(Error::domain(format!("site {site} out of range")));
    }
    let n = shape.modes();
    let p = shape.modes_per_site();
    let mut mask = 0usize;
    for alpha in 0..p {
        mask |= 1 << (n - 1 - ((site - 1) * p + alpha));
    }
    let diag: Vec<f64> = (0..1usize << n)
        .map(|b| if (b & mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    Ok(DenseOperator {
        shape,
        matrix: CMatrix::from_diag(&diag),
    })
}

/// `C^sigma_P(X) = (X + sigma P X P) / 2` for an arbitrary operator `P`.
pub fn pinch(x: &CMatrix, p: &CMatrix, plus: bool) -> CMatrix {
    let pxp = p.mul(x).mul(p);
    let s = if plus { 1.0 } else { -1.0 };
    x.add(&pxp.scale_real(s)).scale_real(0.5)
}

/// `(||C^sigma_P(A)||, ||A||)` in operator norm; the first never exceeds the second
/// for a parity operator `P`.
pub fn pinch_norms(a: &CMatrix, p: &CMatrix, plus: bool) -> (f64, f64) {
    (operator_norm(&pinch(a, p, plus)), operator_norm(a))
}

/// `(|tr(rho A)|^2, tr(rho A A^dagger))`; the first never exceeds the second.
pub fn cauchy_schwarz_pair(rho: &DenseOperator, a: &CMatrix) -> (f64, f64) {
    let m = rho.matrix();
    (m.trace_of_product(a).norm_sqr(), m.trace_of_product(&a.mul(&a.adjoint())).re)
}

/// Random even state `G G^dagger / tr` with `G` block diagonal in parity.
pub fn random_even_state(shape: SystemShape, rng: &mut impl Rng) -> Result<DenseOperator> {
    check_modes(&shape)?;
    let dim = 1usize << shape.modes();
    let g = CMatrix::from_fn(dim, |i, j| {
        if (i.count_ones() + j.count_ones()) % 2 == 0 {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let rho = g.mul(&g.adjoint());
    let t = rho.trace().re;
    DenseOperator::new(shape, rho.scale_real(1.0 / t).hermitian_part())
}

/// Random operator with independent uniform complex entries.
pub fn random_operator(shape: SystemShape, rng: &mut impl Rng) -> Result<CMatrix> {
    check_modes(&shape)?;
    let dim = 1usize << shape.modes();
    Ok(CMatrix::from_fn(dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateValidity {
    pub trace_ok: bool,
    pub positive_ok: bool,
    pub parity_ok: bool,
    pub hermitian_ok: bool,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub parity_violation: f64,
}

impl StateValidity {
    pub fn is_valid(&self) -> bool {
        self.trace_ok && self.positive_ok && self.parity_ok && self.hermitian_ok
    }

    pub fn describe_failures(&self) -> String {
        let mut out = Vec::new();
        if !self.trace_ok {
            out.push(format!("trace {} != 1", self.trace));
        }
        if !self.hermitian_ok {
            out.push("not Hermitian".to_string());
        }
        if !self.positive_ok {
            out.push(format!("min eigenvalue {:.3e}", self.min_eigenvalue));
        }
        if !self.parity_ok {
            out.push(format!("parity violation {:.3e}", self.parity_violation));
        }
        out.join(", ")
    }
}

pub fn check_state(m: &DenseOperator) -> StateValidity {
    let mat = &m.matrix;
    let trace = mat.trace();
    let herm = mat.hermiticity_residual() <= HERMITIAN_TOL;
    let min_eigenvalue = eigvalsh(&mat.hermitian_part()).first().copied().unwrap_or(0.0);
    let dim = mat.dim();
    let mut parity_violation: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            if (i.count_ones() + j.count_ones()) % 2 == 1 {
                parity_violation = parity_violation.max(mat[(i, j)].norm());
            }
        }
    }
    StateValidity {
        trace_ok: (trace - 1.0).norm() <= TRACE_TOL,
        positive_ok: herm && min_eigenvalue >= -POSITIVITY_TOL,
        parity_ok: parity_violation <= PARITY_TOL,
        hermitian_ok: herm,
        min_eigenvalue,
        trace: trace.re,
        parity_violation,
    }
}
