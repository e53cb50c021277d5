//! Permutation-invariant Hamiltonians `H = |S|^{-1} sum_S H_S`, their exact
//! ground states, and the gap to the best i.i.d. mode product state.
//!
//! For a product state `xi^{(x) V}` the reduction to any `k` sites is
//! `xi^{(x) k}`, so the product energy only needs the `k`-site template.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cumulant::max_fourth_cumulant;
use crate::definetti::{theorem1_bound, ProductMixture};
use crate::error::{Error, Result};
use crate::even_state::SingleSiteState;
use crate::fock::{to_expansion_truncated, to_matrix, DenseOperator};
use crate::invariance::{check_invariance_with, InvarianceOptions, InvarianceReport, DEFAULT_DEGREE_CAP};
use crate::linalg::{eigh, eigvalsh, lowest_eigenspace, CMatrix};
use crate::majorana::{ModeIndex, OperatorExpansion, SystemShape};
use crate::report::VerificationReport;

pub const NORM_TOL: f64 = 1e-9;
pub const HAMILTONIAN_HERMITIAN_TOL: f64 = 1e-10;
pub const GAP_TOL: f64 = 1e-6;
pub const NEGATIVE_GAP_TOL: f64 = 1e-9;
pub const DEGENERACY_TOL: f64 = 1e-8;
pub const GS_INVARIANCE_TOL: f64 = 1e-8;
pub const CONVEXITY_TOL: f64 = 1e-9;
/// Purity above which an optimizer result counts as a pure state.
pub const PURE_TOL: f64 = 1e-6;

/// `f` on (site, mode): `(m^{2a-1} + i m^{2a}) / 2`.
pub fn annihilator(shape: SystemShape, site: usize, mode: usize) -> Result<OperatorExpansion> {
    if mode == 0 || mode > shape.modes_per_site() {
        return Err(Error::domain(format!("mode {mode} out of range")));
    }
    let odd = OperatorExpansion::from_product(shape, &[ModeIndex { site, majorana: 2 * mode - 1 }], Complex64::new(0.5, 0.0))?;
    let even = OperatorExpansion::from_product(shape, &[ModeIndex { site, majorana: 2 * mode }], Complex64::new(0.0, 0.5))?;
    odd.add(&even)
}

pub fn creator(shape: SystemShape, site: usize, mode: usize) -> Result<OperatorExpansion> {
    Ok(annihilator(shape, site, mode)?.adjoint())
}

pub fn number(shape: SystemShape, site: usize, mode: usize) -> Result<OperatorExpansion> {
    creator(shape, site, mode)?.multiply(&annihilator(shape, site, mode)?)
}

/// `f^dagger_{a} f_{b} + h.c.` between (site, mode) pairs.
pub fn hopping(shape: SystemShape, a: (usize, usize), b: (usize, usize)) -> Result<OperatorExpansion> {
    let t = creator(shape, a.0, a.1)?.multiply(&annihilator(shape, b.0, b.1)?)?;
    t.add(&t.adjoint())
}

/// All increasing `k`-subsets of `1..=sites`.
pub fn all_k_subsets(sites: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, sites: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for s in start..=sites {
            cur.push(s);
            rec(s + 1, sites, k, cur, out);
            cur.pop();
        }
    }
    if k >= 1 && k <= sites {
        rec(1, sites, k, &mut cur, &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    shape: SystemShape,
    subsets: Vec<Vec<usize>>,
    template: OperatorExpansion,
    template_norm: f64,
    /// Factor applied to the template to bring its norm to 1 (1 if none).
    rescale_factor: f64,
}

impl HamiltonianSpec {
    /// Subsets are sorted; the template lives on `k` sites with the same
    /// modes per site. An over-normalized template is rejected, or rescaled
    /// when `rescale` is set.
    pub fn new(shape: SystemShape, subsets: Vec<Vec<usize>>, template: OperatorExpansion, rescale: bool) -> Result<Self> {
        let k = template.shape().sites();
        if template.shape().modes_per_site() != shape.modes_per_site() {
            return Err(Error::domain("template and system differ in modes per site"));
        }
        if subsets.is_empty() {
            return Err(Error::domain("no subsets given"));
        }
        let mut sorted = Vec::with_capacity(subsets.len());
        for s in subsets {
            let mut s = s;
            s.sort_unstable();
            if s.len() != k || s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::domain(format!("subset {s:?} is not a set of {k} distinct sites")));
            }
            for &j in &s {
                if j == 0 || j > shape.sites() {
                    return Err(Error::domain(format!("site {j} outside 1..={}", shape.sites())));
                }
            }
            sorted.push(s);
        }
        let herm = template.max_abs_diff(&template.adjoint());
        if herm > HAMILTONIAN_HERMITIAN_TOL {
            return Err(Error::domain(format!("template is not Hermitian (residual {herm:.3e})")));
        }
        let norm = hermitian_norm(&template)?;
        let mut rescale_factor = 1.0;
        let mut template = template;
        if norm > 1.0 + NORM_TOL {
            if !rescale {
                return Err(Error::domain(format!("template norm {norm:.6} exceeds 1")));
            }
            rescale_factor = 1.0 / norm;
            log::info!("rescaling template by {rescale_factor:.6} (norm {norm:.6})");
            template = template.scale(Complex64::new(rescale_factor, 0.0));
        }
        Ok(HamiltonianSpec {
            shape,
            subsets: sorted,
            template,
            template_norm: norm,
            rescale_factor,
        })
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn k(&self) -> usize {
        self.template.shape().sites()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn template(&self) -> &OperatorExpansion {
        &self.template
    }

    /// Norm of the template as given, before any rescaling.
    pub fn template_norm(&self) -> f64 {
        self.template_norm
    }

    pub fn rescale_factor(&self) -> f64 {
        self.rescale_factor
    }

    /// The template moved onto `subset` (sorted, so word order is kept).
    pub fn transplant(&self, subset: &[usize]) -> Result<OperatorExpansion> {
        let map: Vec<Option<usize>> = subset.iter().map(|&s| Some(s)).collect();
        self.template.relabel_sites(self.shape, &map)
    }

    pub fn expansion(&self) -> Result<OperatorExpansion> {
        let mut h = OperatorExpansion::zero(self.shape);
        for s in &self.subsets {
            h = h.add(&self.transplant(s)?)?;
        }
        Ok(h.scale(Complex64::new(1.0 / self.subsets.len() as f64, 0.0)))
    }

    pub fn template_matrix(&self) -> Result<CMatrix> {
        Ok(to_matrix(&self.template)?.into_matrix())
    }
}

fn hermitian_norm(a: &OperatorExpansion) -> Result<f64> {
    let m = to_matrix(a)?.into_matrix().hermitian_part();
    Ok(eigvalsh(&m).iter().fold(0.0f64, |acc, l| acc.max(l.abs())))
}

pub fn build_hamiltonian(spec: &HamiltonianSpec) -> Result<DenseOperator> {
    let h = to_matrix(&spec.expansion()?)?;
    let r = h.matrix().hermiticity_residual();
    if r > HAMILTONIAN_HERMITIAN_TOL {
        return Err(Error::domain(format!("Hamiltonian is not Hermitian (residual {r:.3e})")));
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub degeneracy: usize,
    /// Uniform mixture over the ground space.
    pub state: DenseOperator,
}

pub fn ground_state(h: &DenseOperator) -> Result<GroundState> {
    let (energy, space) = lowest_eigenspace(&h.matrix().hermitian_part(), DEGENERACY_TOL);
    let dim = h.dim();
    let w = 1.0 / space.len() as f64;
    let mut rho = CMatrix::zeros(dim);
    for v in &space {
        let nz: Vec<usize> = (0..dim).filter(|&i| v[i].norm_sqr() > 0.0).collect();
        for &i in &nz {
            for &j in &nz {
                rho[(i, j)] += v[i] * v[j].conj() * w;
            }
        }
    }
    Ok(GroundState {
        energy,
        degeneracy: space.len(),
        state: DenseOperator::new(h.shape(), rho.hermitian_part())?,
    })
}

/// Invariance of a ground state, checked on its expansion up to the default
/// degree cap.
pub fn ground_state_invariance(gs: &GroundState) -> Result<InvarianceReport> {
    let expansion = to_expansion_truncated(&gs.state, DEFAULT_DEGREE_CAP);
    let opts = InvarianceOptions {
        tol: GS_INVARIANCE_TOL,
        validate_state: false,
        ..InvarianceOptions::default()
    };
    check_invariance_with(&expansion, &opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductSearch {
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for ProductSearch {
    fn default() -> Self {
        ProductSearch {
            restarts: 8,
            iters: 400,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductMinimum {
    pub xi: SingleSiteState,
    pub energy: f64,
}

fn digit(index: usize, site: usize, k: usize, d: usize) -> usize {
    (index / d.pow((k - 1 - site) as u32)) % d
}

/// `tr(T xi^{(x) k})` for a `k`-site operator `T`.
pub fn product_energy(t: &CMatrix, k: usize, xi: &CMatrix) -> f64 {
    let d = xi.dim();
    let dim = t.dim();
    let mut e = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for (j, &tij) in t.row(i).iter().enumerate() {
            if tij.norm_sqr() == 0.0 {
                continue;
            }
            let mut f = tij;
            for s in 0..k {
                f *= xi[(digit(j, s, k, d), digit(i, s, k, d))];
            }
            e += f;
        }
    }
    e.re
}

/// Energy and `dE/dxi`: the sum over sites of `T` contracted with `xi`
/// everywhere else.
fn energy_gradient(t: &CMatrix, k: usize, xi: &CMatrix) -> (f64, CMatrix) {
    let d = xi.dim();
    let dim = t.dim();
    let mut g = CMatrix::zeros(d);
    let mut e = Complex64::new(0.0, 0.0);
    let mut factors = vec![Complex64::new(0.0, 0.0); k];
    for i in 0..dim {
        for (j, &tij) in t.row(i).iter().enumerate() {
            if tij.norm_sqr() == 0.0 {
                continue;
            }
            for (s, f) in factors.iter_mut().enumerate() {
                *f = xi[(digit(j, s, k, d), digit(i, s, k, d))];
            }
            e += factors.iter().fold(tij, |acc, f| acc * f);
            for s in 0..k {
                let others = factors
                    .iter()
                    .enumerate()
                    .filter(|&(r, _)| r != s)
                    .fold(tij, |acc, (_, f)| acc * f);
                g[(digit(i, s, k, d), digit(j, s, k, d))] += others;
            }
        }
    }
    (e.re, g.hermitian_part())
}

fn even_mask(d: usize) -> impl Fn(usize, usize) -> bool {
    move |i, j| i < d && j < d && (i.count_ones() + j.count_ones()) % 2 == 0
}

fn state_of(a: &CMatrix) -> CMatrix {
    let rho = a.mul(&a.adjoint());
    let t = rho.trace().re;
    rho.scale_real(1.0 / t).hermitian_part()
}

fn normalized(a: CMatrix) -> CMatrix {
    let f = a.frobenius();
    a.scale_real(1.0 / f)
}

fn random_amplitude(modes: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let d = 1usize << modes;
    let mask = even_mask(d);
    normalized(CMatrix::from_fn(d, |i, j| {
        if mask(i, j) {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

fn amplitude_of(xi: &SingleSiteState) -> CMatrix {
    normalized(eigh(&xi.matrix().hermitian_part()).map_spectrum(|l| l.max(0.0).sqrt()))
}

/// Projected gradient descent on `xi = A A^dagger / tr(A A^dagger)` with
/// `A` block diagonal in parity, so pure states are reachable.
fn descend_energy(t: &CMatrix, k: usize, mut a: CMatrix, iters: usize) -> (CMatrix, f64) {
    let d = a.dim();
    let mask = even_mask(d);
    let mut xi = state_of(&a);
    let (mut e, mut g) = energy_gradient(t, k, &xi);
    let mut step = 0.25;
    for _ in 0..iters {
        let c = g.trace_of_product(&xi).re;
        let shifted = g.sub(&CMatrix::identity(d).scale_real(c));
        let raw = shifted.mul(&a).scale_real(2.0);
        let grad = CMatrix::from_fn(d, |i, j| if mask(i, j) { raw[(i, j)] } else { Complex64::new(0.0, 0.0) });
        let gn = grad.frobenius().powi(2);
        if gn < 1e-28 {
            break;
        }
        let mut trial = step * 4.0;
        let mut found: Option<(f64, f64, CMatrix, CMatrix)> = None;
        while trial > 1e-14 {
            for f in [1.0, 0.5, 0.25, 0.125] {
                let s = trial * f;
                let cand = normalized(a.sub(&grad.scale_real(s)));
                let cxi = state_of(&cand);
                let ce = product_energy(t, k, &cxi);
                if ce < found.as_ref().map_or(e, |b| b.1) {
                    found = Some((s, ce, cand, cxi));
                }
            }
            if found.is_some() {
                break;
            }
            trial /= 16.0;
        }
        let Some((s, ce, cand, cxi)) = found else { break };
        let improvement = e - ce;
        step = s;
        a = cand;
        xi = cxi;
        let next = energy_gradient(t, k, &xi);
        e = next.0;
        g = next.1;
        if improvement <= 1e-15 {
            break;
        }
    }
    (xi, e)
}

/// Minimum of `tr(T xi^{(x) k})` over even single-site states, searched from
/// `starts` and from `search.restarts` seeded random points.
pub fn min_product_energy_local(
    t: &CMatrix,
    k: usize,
    modes: usize,
    search: &ProductSearch,
    starts: &[SingleSiteState],
) -> Result<ProductMinimum> {
    let d = 1usize << modes;
    if t.dim() != d.pow(k as u32) {
        return Err(Error::domain("operator dimension does not match the product shape"));
    }
    if starts.iter().any(|s| s.modes() != modes) {
        return Err(Error::domain("start states have the wrong number of modes"));
    }
    let mut initial: Vec<CMatrix> = starts.iter().map(amplitude_of).collect();
    for r in 0..search.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed.wrapping_add(r as u64));
        initial.push(random_amplitude(modes, &mut rng));
    }
    if initial.is_empty() {
        return Err(Error::domain("product search needs at least one start"));
    }
    let runs: Vec<(CMatrix, f64)> = initial
        .into_par_iter()
        .map(|a| descend_energy(t, k, a, search.iters))
        .collect();
    let (xi, energy) = runs
        .into_iter()
        .reduce(|best, run| if run.1 < best.1 { run } else { best })
        .expect("nonempty");
    Ok(ProductMinimum {
        xi: SingleSiteState::new(modes, xi)?,
        energy,
    })
}

/// Minimum of `tr(H xi^{(x) V})` over even single-site states on the full
/// system (cost grows with the nonzeros of `H`).
pub fn min_product_energy(h: &DenseOperator, modes: usize, search: &ProductSearch) -> Result<ProductMinimum> {
    if h.shape().modes_per_site() != modes {
        return Err(Error::domain("modes per site differ from the operator's shape"));
    }
    min_product_energy_local(h.matrix(), h.shape().sites(), modes, search, &[])
}

/// `2^{2p} k^{3/2} / V`.
pub fn gs_bound(modes_per_site: usize, sites: usize, k: usize) -> f64 {
    4f64.powi(modes_per_site as i32) * (k as f64).powf(1.5) / sites as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapLabel {
    Certified,
    BoundExceeded,
    NegativeGap,
    PreconditionFailed,
}

impl GapLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GapLabel::Certified => "certified",
            GapLabel::BoundExceeded => "bound exceeded",
            GapLabel::NegativeGap => "negative gap",
            GapLabel::PreconditionFailed => "precondition failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldResult {
    pub e_product_min: f64,
    pub e_ground: f64,
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
    pub label: GapLabel,
    pub degeneracy: usize,
    pub invariance_violation: f64,
    pub xi: SingleSiteState,
    pub xi_purity: f64,
    /// Largest fourth cumulant of `xi` when it is pure.
    pub pure_fourth_cumulant: Option<f64>,
    /// `|tr(H xi^{(x) V}) - tr(T xi^{(x) k})|` for the returned `xi`.
    pub energy_consistency: f64,
    /// Bound obtained by routing the gap through the mixture bound instead.
    pub composite_bound: f64,
}

pub fn verify_gs_bound(spec: &HamiltonianSpec, search: &ProductSearch) -> Result<(MeanFieldResult, VerificationReport)> {
    let start = Instant::now();
    let shape = spec.shape();
    let (v, p, k) = (shape.sites(), shape.modes_per_site(), spec.k());
    let h = build_hamiltonian(spec)?;
    let gs = ground_state(&h)?;
    let inv = ground_state_invariance(&gs)?;
    let violation = inv.condition1_max_violation.max(inv.condition2_max_violation);
    let precondition = violation <= GS_INVARIANCE_TOL;

    let t = spec.template_matrix()?;
    let bound = gs_bound(p, v, k);
    let mut best = min_product_energy_local(&t, k, p, search, &[])?;
    let mut restarts_used = search.restarts;
    if best.energy - gs.energy > bound + GAP_TOL {
        let extra = ProductSearch {
            restarts: 4 * search.restarts.max(1),
            seed: search.seed.wrapping_add(1 << 32),
            ..*search
        };
        restarts_used += extra.restarts;
        let again = min_product_energy_local(&t, k, p, &extra, std::slice::from_ref(&best.xi))?;
        if again.energy < best.energy {
            best = again;
        }
    }
    let dense_energy = product_energy(h.matrix(), v, best.xi.matrix());
    let energy_consistency = (dense_energy - best.energy).abs();
    let gap = best.energy - gs.energy;
    let purity = best.xi.purity();
    let pure_fourth_cumulant = if p <= 3 && purity > 1.0 - PURE_TOL {
        Some(max_fourth_cumulant(&best.xi)?)
    } else {
        None
    };
    let label = if !precondition {
        GapLabel::PreconditionFailed
    } else if gap < -NEGATIVE_GAP_TOL {
        GapLabel::NegativeGap
    } else if gap > bound + GAP_TOL {
        GapLabel::BoundExceeded
    } else {
        GapLabel::Certified
    };
    let result = MeanFieldResult {
        e_product_min: best.energy,
        e_ground: gs.energy,
        gap,
        bound,
        pass: label == GapLabel::Certified,
        label,
        degeneracy: gs.degeneracy,
        invariance_violation: violation,
        xi: best.xi.clone(),
        xi_purity: purity,
        pure_fourth_cumulant,
        energy_consistency,
        composite_bound: theorem1_bound(p, v, k),
    };
    let mut report = VerificationReport::inequality("gs-bound", gap, bound, GAP_TOL)
        .input("V", v)
        .input("p", p)
        .input("k", k)
        .input("subsets", spec.subsets().len())
        .input("restarts", restarts_used)
        .input("iters", search.iters)
        .input("seed", search.seed)
        .note(format!("ground energy {:.12}", gs.energy))
        .note(format!("product energy {:.12}", best.energy))
        .note(format!("ground degeneracy {}", gs.degeneracy))
        .note(format!("ground-state invariance violation {violation:.3e}"))
        .note(format!("full-system product energy differs by {energy_consistency:.3e}"))
        .note(format!("composite bound via mixture distance {:.6}", result.composite_bound));
    if spec.rescale_factor() != 1.0 {
        report = report.note(format!("template rescaled by {:.12}", spec.rescale_factor()));
    }
    if let Some(c) = pure_fourth_cumulant {
        report = report.note(format!("pure product state, max fourth cumulant {c:.3e}"));
    }
    if energy_consistency > 1e-9 {
        report = report.fail(format!("product energy mismatch {energy_consistency:.3e}"));
    }
    match label {
        GapLabel::Certified => {}
        GapLabel::PreconditionFailed => {
            report = report.fail(format!("precondition failed: ground state not permutation invariant ({violation:.3e})"))
        }
        GapLabel::NegativeGap => report = report.fail(format!("negative gap {gap:.3e}")),
        GapLabel::BoundExceeded => report = report.fail("gap exceeds the bound after extra restarts"),
    }
    Ok((result, report.timed(start)))
}

/// `tr(H sum_l a_l xi_l^{(x) V}) >= min_xi tr(H xi^{(x) V})` for a given
/// mixture; the minimum search also starts from every component.
pub fn verify_convexity(
    spec: &HamiltonianSpec,
    mixture: &ProductMixture,
    search: &ProductSearch,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let shape = spec.shape();
    let p = shape.modes_per_site();
    if mixture.modes() != p {
        return Err(Error::domain("mixture components have the wrong number of modes"));
    }
    let h = build_hamiltonian(spec)?;
    let mixed: f64 = mixture
        .weights
        .iter()
        .zip(&mixture.components)
        .map(|(a, c)| a * product_energy(h.matrix(), shape.sites(), c.matrix()))
        .sum();
    let t = spec.template_matrix()?;
    let best = min_product_energy_local(&t, spec.k(), p, search, &mixture.components)?;
    Ok(VerificationReport::inequality("gs-convexity", best.energy, mixed, CONVEXITY_TOL)
        .input("V", shape.sites())
        .input("p", p)
        .input("k", spec.k())
        .input("components", mixture.len())
        .note(format!("mixture energy {mixed:.12}"))
        .note(format!("product minimum {:.12}", best.energy))
        .timed(start))
}

/// Hamiltonian families used for certification sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HamiltonianFamily {
    /// `1 - 2 n` on every site.
    Field,
    /// `f_1^dagger f_2 + h.c.` on every pair.
    PairHopping,
    /// `i m_1^1 m_2^1` on every pair.
    MajoranaPair,
    /// Hopping plus density-density on every pair.
    Interacting,
    /// Two-mode sites: spin hopping, on-site repulsion and spin exchange.
    Hubbard,
}

impl HamiltonianFamily {
    pub const ALL: [HamiltonianFamily; 5] = [
        HamiltonianFamily::Field,
        HamiltonianFamily::PairHopping,
        HamiltonianFamily::MajoranaPair,
        HamiltonianFamily::Interacting,
        HamiltonianFamily::Hubbard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HamiltonianFamily::Field => "field",
            HamiltonianFamily::PairHopping => "pair-hopping",
            HamiltonianFamily::MajoranaPair => "majorana-pair",
            HamiltonianFamily::Interacting => "interacting",
            HamiltonianFamily::Hubbard => "hubbard",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::domain(format!("unknown Hamiltonian family '{name}'")))
    }

    pub fn modes_per_site(self) -> usize {
        match self {
            HamiltonianFamily::Hubbard => 2,
            _ => 1,
        }
    }

    pub fn k(self) -> usize {
        match self {
            HamiltonianFamily::Field => 1,
            _ => 2,
        }
    }

    pub fn template(self) -> Result<OperatorExpansion> {
        let shape = SystemShape::new(self.k(), self.modes_per_site())?;
        let one = OperatorExpansion::identity(shape);
        match self {
            HamiltonianFamily::Field => one.sub(&number(shape, 1, 1)?.scale(Complex64::new(2.0, 0.0))),
            HamiltonianFamily::PairHopping => hopping(shape, (1, 1), (2, 1)),
            HamiltonianFamily::MajoranaPair => OperatorExpansion::from_product(
                shape,
                &[ModeIndex { site: 1, majorana: 1 }, ModeIndex { site: 2, majorana: 1 }],
                Complex64::new(0.0, 1.0),
            ),
            HamiltonianFamily::Interacting => {
                hopping(shape, (1, 1), (2, 1))?.add(&number(shape, 1, 1)?.multiply(&number(shape, 2, 1)?)?)
            }
            HamiltonianFamily::Hubbard => {
                let mut h = OperatorExpansion::zero(shape);
                for spin in 1..=2 {
                    h = h.sub(&hopping(shape, (1, spin), (2, spin))?)?;
                }
                for site in 1..=2 {
                    h = h.add(&number(shape, site, 1)?.multiply(&number(shape, site, 2)?)?)?;
                }
                let flip = creator(shape, 1, 1)?
                    .multiply(&annihilator(shape, 1, 2)?)?
                    .multiply(&creator(shape, 2, 2)?)?
                    .multiply(&annihilator(shape, 2, 1)?)?;
                h.add(&flip)?.add(&flip.adjoint())
            }
        }
    }

    /// The family on `sites` sites over all `k`-subsets, rescaled to norm 1.
    pub fn spec(self, sites: usize) -> Result<HamiltonianSpec> {
        let shape = SystemShape::new(sites, self.modes_per_site())?;
        HamiltonianSpec::new(shape, all_k_subsets(sites, self.k()), self.template()?, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definetti::product_power;
    use crate::fock::{check_state, DenseOperator};

    fn shape(v: usize, p: usize) -> SystemShape {
        SystemShape::new(v, p).unwrap()
    }

    #[test]
    fn ladder_operators_match_occupation() {
        let s = shape(1, 1);
        let n = to_matrix(&number(s, 1, 1).unwrap()).unwrap();
        assert!(n.matrix().max_abs_diff(&CMatrix::from_diag(&[0.0, 1.0])) < 1e-12);
        let f = to_matrix(&annihilator(s, 1, 1).unwrap()).unwrap();
        assert!((f.matrix()[(0, 1)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let s2 = shape(2, 1);
        let anti = creator(s2, 1, 1)
            .unwrap()
            .multiply(&annihilator(s2, 2, 1).unwrap())
            .unwrap()
            .add(&annihilator(s2, 2, 1).unwrap().multiply(&creator(s2, 1, 1).unwrap()).unwrap())
            .unwrap();
        assert!(anti.max_abs_diff(&OperatorExpansion::zero(s2)) < 1e-12);
    }

    #[test]
    fn subsets_enumerated() {
        assert_eq!(all_k_subsets(4, 2).len(), 6);
        assert_eq!(all_k_subsets(6, 3).len(), 20);
        assert_eq!(all_k_subsets(3, 1), vec![vec![1], vec![2], vec![3]]);
        assert!(all_k_subsets(2, 3).is_empty());
    }

    #[test]
    fn field_hamiltonian_ground_state() {
        let spec = HamiltonianFamily::Field.spec(4).unwrap();
        assert_eq!(spec.rescale_factor(), 1.0);
        let h = build_hamiltonian(&spec).unwrap();
        let gs = ground_state(&h).unwrap();
        assert!((gs.energy + 1.0).abs() < 1e-12);
        assert_eq!(gs.degeneracy, 1);
        let full = DenseOperator::basis_projector(shape(4, 1), &[true; 4]).unwrap();
        assert!(gs.state.matrix().max_abs_diff(full.matrix()) < 1e-10);
        let best = min_product_energy(&h, 1, &ProductSearch::default()).unwrap();
        assert!((best.energy + 1.0).abs() < 1e-9, "{}", best.energy);
        assert!((best.xi.matrix()[(1, 1)].re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identity_hamiltonian() {
        let s = shape(3, 1);
        let spec = HamiltonianSpec::new(s, all_k_subsets(3, 1), OperatorExpansion::identity(shape(1, 1)), false).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        assert!(h.matrix().max_abs_diff(&CMatrix::identity(8)) < 1e-12);
        let gs = ground_state(&h).unwrap();
        assert!((gs.energy - 1.0).abs() < 1e-12);
        assert_eq!(gs.degeneracy, 8);
        assert!(gs.state.matrix().max_abs_diff(&CMatrix::identity(8).scale_real(0.125)) < 1e-12);
        let best = min_product_energy(&h, 1, &ProductSearch::default()).unwrap();
        assert!((best.energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn majorana_pair_spectrum_is_symmetric() {
        let spec = HamiltonianFamily::MajoranaPair.spec(4).unwrap();
        assert!((spec.template_norm() - 1.0).abs() < 1e-12);
        let h = build_hamiltonian(&spec).unwrap();
        let vals = eigvalsh(h.matrix());
        let n = vals.len();
        for i in 0..n {
            assert!((vals[i] + vals[n - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn spec_validation() {
        let s = shape(4, 1);
        let t = HamiltonianFamily::PairHopping.template().unwrap();
        assert!(HamiltonianSpec::new(s, vec![], t.clone(), false).is_err());
        assert!(HamiltonianSpec::new(s, vec![vec![1, 1]], t.clone(), false).is_err());
        assert!(HamiltonianSpec::new(s, vec![vec![1, 5]], t.clone(), false).is_err());
        assert!(HamiltonianSpec::new(s, vec![vec![1, 2, 3]], t.clone(), false).is_err());
        let big = t.scale(Complex64::new(3.0, 0.0));
        let err = HamiltonianSpec::new(s, vec![vec![1, 2]], big.clone(), false).unwrap_err();
        assert!(err.to_string().contains("3.000000"), "{err}");
        let ok = HamiltonianSpec::new(s, vec![vec![2, 1]], big, true).unwrap();
        assert!((ok.rescale_factor() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(ok.subsets(), &[vec![1, 2]]);
        let nonherm = OperatorExpansion::from_product(shape(1, 1), &[ModeIndex { site: 1, majorana: 1 }, ModeIndex { site: 1, majorana: 2 }], Complex64::new(1.0, 0.0)).unwrap();
        assert!(HamiltonianSpec::new(s, vec![vec![1]], nonherm, false).is_err());
    }

    #[test]
    fn product_energy_reduces_to_template() {
        let spec = HamiltonianFamily::Interacting.spec(5).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let t = spec.template_matrix().unwrap();
        for alpha in [0.0, 0.3, 0.77, 1.0] {
            let xi = SingleSiteState::diagonal(alpha).unwrap();
            let full = product_energy(h.matrix(), 5, xi.matrix());
            let local = product_energy(&t, 2, xi.matrix());
            let direct = product_power(&xi, 5).unwrap().matrix().trace_of_product(h.matrix()).re;
            assert!((full - local).abs() < 1e-12);
            assert!((full - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = HamiltonianFamily::Hubbard.spec(2).unwrap();
        let t = spec.template_matrix().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_amplitude(2, &mut rng);
        let xi = state_of(&a);
        let (e, g) = energy_gradient(&t, 2, &xi);
        assert!((e - product_energy(&t, 2, &xi)).abs() < 1e-12);
        let dir = state_of(&random_amplitude(2, &mut rng)).sub(&xi);
        let h = 1e-6;
        let up = product_energy(&t, 2, &xi.add(&dir.scale_real(h)));
        let down = product_energy(&t, 2, &xi.sub(&dir.scale_real(h)));
        let fd = (up - down) / (2.0 * h);
        assert!((fd - g.trace_of_product(&dir).re).abs() < 1e-7);
    }

    #[test]
    fn pair_hopping_gap_and_invariance() {
        let spec = HamiltonianFamily::PairHopping.spec(6).unwrap();
        let (res, report) = verify_gs_bound(&spec, &ProductSearch::default()).unwrap();
        assert!(res.gap >= -NEGATIVE_GAP_TOL);
        assert!(res.invariance_violation <= GS_INVARIANCE_TOL, "{}", res.invariance_violation);
        assert!(report.pass, "{}", report.summary_line());
        assert!(res.energy_consistency < 1e-10);
        assert!(check_state(&ground_state(&build_hamiltonian(&spec).unwrap()).unwrap().state).is_valid());
    }

    #[test]
    fn field_gap_is_zero() {
        let spec = HamiltonianFamily::Field.spec(6).unwrap();
        let (res, report) = verify_gs_bound(&spec, &ProductSearch::default()).unwrap();
        assert!(res.gap.abs() < 1e-9);
        assert!((res.bound - 4.0 / 6.0).abs() < 1e-12);
        assert!(report.pass);
        assert!(res.pure_fourth_cumulant.unwrap() < 1e-6);
    }

    #[test]
    fn non_invariant_ground_state_is_labelled() {
        let s = shape(4, 1);
        let spec = HamiltonianSpec::new(s, vec![vec![1]], HamiltonianFamily::Field.template().unwrap(), false).unwrap();
        let (res, report) = verify_gs_bound(&spec, &ProductSearch::default()).unwrap();
        assert_eq!(res.label, GapLabel::PreconditionFailed);
        assert!(!report.pass);
        assert!(report.notes.iter().any(|n| n.contains("precondition failed")));
    }

    #[test]
    fn convexity_on_mixture() {
        let spec = HamiltonianFamily::Interacting.spec(4).unwrap();
        let mixture = ProductMixture::new(
            vec![0.25, 0.75],
            vec![SingleSiteState::diagonal(0.2).unwrap(), SingleSiteState::diagonal(0.9).unwrap()],
        )
        .unwrap();
        let report = verify_convexity(&spec, &mixture, &ProductSearch::default()).unwrap();
        assert!(report.pass, "{}", report.summary_line());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let spec = HamiltonianFamily::Hubbard.spec(3).unwrap();
        let t = spec.template_matrix().unwrap();
        let search = ProductSearch { restarts: 3, iters: 100, seed: 9 };
        let a = min_product_energy_local(&t, 2, 2, &search, &[]).unwrap();
        let b = min_product_energy_local(&t, 2, 2, &search, &[]).unwrap();
        assert_eq!(a, b);
    }
}
