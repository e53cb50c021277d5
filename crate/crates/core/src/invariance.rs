//! Permutation invariance of fermionic states and suppression of their
//! locally odd part.
//!
//! A state is permutation invariant when its expectation values are unchanged
//! (1) under every site permutation that keeps the written order of a word,
//! and (2) under every site permutation for words that are even on every
//! site. Checking works on the Majorana expansion: `tr(rho w)` is nonzero only
//! for words in the support of `rho`, so it suffices to examine pairs where
//! `w` or `pi(w)` is in that support.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{check_state, mode_cap, to_matrix, trace_norm};
use crate::majorana::{MajoranaWord, ModeIndex, OperatorExpansion, SitePermutation, SystemShape};
use crate::report::VerificationReport;

pub const INVARIANCE_TOL: f64 = 1e-9;
pub const BOUND_TOL: f64 = 1e-9;
pub const DEFAULT_DEGREE_CAP: usize = 4;

/// All permutations are enumerated up to this many sites; beyond it a
/// seeded sample is used.
pub const EXHAUSTIVE_PERMUTATION_SITES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub condition1_max_violation: f64,
    pub condition2_max_violation: f64,
    /// Largest violation of full (order-agnostic) permutation invariance.
    pub full_max_violation: f64,
    pub checked_words: usize,
    pub checked_permutations: usize,
    pub exhaustive: bool,
    pub fully_invariant: bool,
    pub tolerance: f64,
}

impl InvarianceReport {
    pub fn is_invariant(&self) -> bool {
        self.condition1_max_violation <= self.tolerance && self.condition2_max_violation <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct InvarianceOptions {
    pub degree_cap: usize,
    pub tol: f64,
    pub sampled_permutations: usize,
    pub seed: u64,
    /// Reject inputs that fail the dense state check (when within the mode cap).
    pub validate_state: bool,
}

impl Default for InvarianceOptions {
    fn default() -> Self {
        InvarianceOptions {
            degree_cap: DEFAULT_DEGREE_CAP,
            tol: INVARIANCE_TOL,
            sampled_permutations: 4096,
            seed: 0x5eed,
            validate_state: true,
        }
    }
}

/// True iff `pi` keeps the generators of `w` strictly increasing.
pub fn is_order_preserving(shape: &SystemShape, pi: &SitePermutation, w: MajoranaWord) -> bool {
    pi.is_order_preserving(shape, w)
}

pub fn check_invariance(rho: &OperatorExpansion, degree_cap: usize, tol: f64) -> Result<InvarianceReport> {
    check_invariance_with(
        rho,
        &InvarianceOptions {
            degree_cap,
            tol,
            ..InvarianceOptions::default()
        },
    )
}

pub fn check_invariance_with(rho: &OperatorExpansion, opts: &InvarianceOptions) -> Result<InvarianceReport> {
    let shape = rho.shape();
    if opts.validate_state {
        validate_expansion_state(rho)?;
    }
    let support: Vec<MajoranaWord> = rho
        .terms()
        .map(|(w, _)| w)
        .filter(|w| !w.is_identity() && w.degree() <= opts.degree_cap)
        .collect();

    let v = shape.sites();
    let exhaustive = v <= EXHAUSTIVE_PERMUTATION_SITES;
    let perms: Vec<SitePermutation> = if exhaustive {
        SitePermutation::all(v).collect()
    } else {
        sample_permutations(v, opts.sampled_permutations, opts.seed)
    };

    let expect = |w: MajoranaWord| rho.expectation(w);
    let (c1, c2, full, words) = perms
        .par_iter()
        .map(|pi| {
            let inv = pi.inverse();
            let mut c1: f64 = 0.0;
            let mut c2: f64 = 0.0;
            let mut full: f64 = 0.0;
            let mut words = HashSet::new();
            for &target in &support {
                let (_, pre) = inv.act_on_word(&shape, target);
                for w in [target, pre] {
                    words.insert(w);
                    let (sign, image) = pi.act_on_word(&shape, w);
                    let viol = (expect(w) - expect(image) * sign.value()).norm();
                    full = full.max(viol);
                    if pi.is_order_preserving(&shape, w) {
                        c1 = c1.max(viol);
                    }
                    if w.is_even_on_all_sites(&shape) {
                        c2 = c2.max(viol);
                    }
                }
            }
            (c1, c2, full, words)
        })
        .reduce(
            || (0.0, 0.0, 0.0, HashSet::new()),
            |mut a, b| {
                a.3.extend(b.3);
                (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2), a.3)
            },
        );

    Ok(InvarianceReport {
        condition1_max_violation: c1,
        condition2_max_violation: c2,
        full_max_violation: full,
        checked_words: words.len(),
        checked_permutations: perms.len(),
        exhaustive,
        fully_invariant: full <= opts.tol,
        tolerance: opts.tol,
    })
}

fn sample_permutations(sites: usize, count: usize, seed: u64) -> Vec<SitePermutation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<SitePermutation> = Vec::with_capacity(count + sites * sites);
    for a in 1..=sites {
        for b in a + 1..=sites {
            out.push(SitePermutation::transposition(sites, a, b).expect("in range"));
        }
    }
    let mut images: Vec<usize> = (1..=sites).collect();
    for _ in 0..count {
        images.shuffle(&mut rng);
        out.push(SitePermutation::from_images(&images).expect("shuffled identity"));
    }
    out
}

/// Dense validity check of an expansion when it fits under the mode cap;
/// otherwise the symbolic checks (trace, Hermiticity, global evenness).
pub fn validate_expansion_state(rho: &OperatorExpansion) -> Result<()> {
    let shape = rho.shape();
    if (rho.trace() - 1.0).norm() > 1e-10 {
        return Err(Error::domain(format!("trace {} != 1", rho.trace())));
    }
    if rho.adjoint().max_abs_diff(rho) > 1e-12 {
        return Err(Error::domain("state is not Hermitian"));
    }
    if rho.terms().any(|(w, _)| w.degree() % 2 == 1) {
        return Err(Error::domain("state violates parity superselection"));
    }
    if shape.modes() <= mode_cap().min(10) {
        let v = check_state(&to_matrix(rho)?);
        if !v.is_valid() {
            return Err(Error::domain(format!("invalid state: {}", v.describe_failures())));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuFamilyParams {
    pub sites: usize,
    pub modes_per_site: usize,
    pub mu: f64,
}

/// `(1 / 2^{pV}) (1 + i tan(pi / 2V) mu sum_{j<l} m_j^1 m_l^1)`, checked to be
/// a state. Positivity holds only for `|mu| <= mu_family_max_mu(V)`, which is
/// below 1 once `V >= 4`.
pub fn mu_family_state(params: MuFamilyParams) -> Result<OperatorExpansion> {
    let rho = mu_family_operator(params)?;
    // the spectrum only involves the m^1 generators, so the p = 1 system
    // carries every eigenvalue
    let probe = mu_family_expansion(SystemShape::new(params.sites, 1)?, params.mu)?;
    let validity = check_state(&to_matrix(&probe)?);
    if !validity.positive_ok {
        return Err(Error::domain(format!(
            "mu family operator at V = {}, mu = {} is not positive: min eigenvalue {:.3e} (positive for |mu| <= {:.6})",
            params.sites,
            params.mu,
            validity.min_eigenvalue,
            mu_family_max_mu(params.sites)
        )));
    }
    Ok(rho)
}

/// The same expansion without the positivity check.
pub fn mu_family_operator(params: MuFamilyParams) -> Result<OperatorExpansion> {
    let MuFamilyParams {
        sites,
        modes_per_site,
        mu,
    } = params;
    if sites < 2 {
        return Err(Error::domain(format!("mu family needs V >= 2, got {sites}")));
    }
    if !(-1.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!("mu = {mu} outside [-1, 1]")));
    }
    mu_family_expansion(SystemShape::new(sites, modes_per_site)?, mu)
}

/// Largest eigenvalue of `i sum_{j<l} m_j m_l` over `V` Majoranas:
/// `sum_{k=1}^{floor(V/2)} cot((2k - 1) pi / 2V)`.
pub fn pair_sum_spectral_radius(sites: usize) -> f64 {
    let v = sites as f64;
    (1..=sites / 2)
        .map(|k| 1.0 / ((2 * k - 1) as f64 * PI / (2.0 * v)).tan())
        .sum()
}

/// Largest `|mu|` for which the mu family operator is positive.
pub fn mu_family_max_mu(sites: usize) -> f64 {
    let t = (PI / (2.0 * sites as f64)).tan();
    (1.0 / (t * pair_sum_spectral_radius(sites))).min(1.0)
}

fn mu_family_expansion(shape: SystemShape, mu: f64) -> Result<OperatorExpansion> {
    let v = shape.sites();
    let norm = 1.0 / shape.fock_dim_f64();
    let t = (PI / (2.0 * v as f64)).tan();
    let mut rho = OperatorExpansion::identity(shape).scale(Complex64::new(norm, 0.0));
    for j in 1..=v {
        for l in j + 1..=v {
            let w = MajoranaWord::from_sorted(&shape, &[ModeIndex::new(j, 1), ModeIndex::new(l, 1)])?;
            rho.add_term(w, Complex64::new(0.0, t * mu * norm));
        }
    }
    Ok(rho)
}

/// Trace distance between the first-`k`-site reductions of `rho` and of its
/// locally even part.
pub fn odd_part_distance(rho: &OperatorExpansion, k: usize) -> Result<f64> {
    let keep: Vec<usize> = (1..=k).collect();
    odd_part_distance_on(rho, &keep)
}

pub fn odd_part_distance_on(rho: &OperatorExpansion, keep: &[usize]) -> Result<f64> {
    let reduced = rho.reduce_to_sites(keep)?;
    let even = rho.global_channel().reduce_to_sites(keep)?;
    let diff = reduced.sub(&even)?;
    if diff.is_empty() {
        return Ok(0.0);
    }
    trace_norm(&to_matrix(&diff)?)
}

pub fn lemma3_bound(modes_per_site: usize, sites: usize, k: usize) -> f64 {
    let p = modes_per_site as f64;
    (2.0 / 3f64.sqrt()) * (2.0 * p).exp2() * ((k as f64) - 1.0).max(0.0).powf(1.5) / sites as f64
}

fn check_site_preconditions(shape: &SystemShape, k: usize) -> Vec<String> {
    let mut problems = Vec::new();
    if shape.sites() < 6 {
        problems.push(format!("V = {} < 6", shape.sites()));
    }
    if k < 1 || k >= shape.sites() {
        problems.push(format!("k = {k} outside 1 <= k < V = {}", shape.sites()));
    }
    problems
}

/// Checks preconditions shared by the suppression and de Finetti bounds.
pub fn require_bound_preconditions(rho: &OperatorExpansion, k: usize) -> Result<InvarianceReport> {
    let shape = rho.shape();
    let mut problems = check_site_preconditions(&shape, k);
    let report = check_invariance(rho, DEFAULT_DEGREE_CAP, INVARIANCE_TOL)?;
    if !report.is_invariant() {
        problems.push(format!(
            "state is not permutation invariant (violations {:.3e}, {:.3e})",
            report.condition1_max_violation, report.condition2_max_violation
        ));
    }
    if problems.is_empty() {
        Ok(report)
    } else {
        Err(Error::domain(format!("precondition violated: {}", problems.join("; "))))
    }
}

/// `||tr_{>k} rho - tr_{>k} C(rho)||_1 <= (2/sqrt3) 2^{2p} (k-1)^{3/2} / V`.
pub fn verify_lemma3(rho: &OperatorExpansion, k: usize) -> Result<VerificationReport> {
    let start = Instant::now();
    let shape = rho.shape();
    require_bound_preconditions(rho, k)?;
    let lhs = odd_part_distance(rho, k)?;
    let rhs = lemma3_bound(shape.modes_per_site(), shape.sites(), k);
    let mut report = VerificationReport::inequality("lemma3", lhs, rhs, BOUND_TOL)
        .input("V", shape.sites())
        .input("p", shape.modes_per_site())
        .input("k", k);
    if k == 1 && lhs != 0.0 {
        report = report.fail(format!("single-site distance must vanish exactly, got {lhs:e}"));
    }
    Ok(report.timed(start))
}
