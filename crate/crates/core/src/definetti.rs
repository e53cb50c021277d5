//! Convex mixtures of mode product states `sum_l a_l xi_l^{(x) k}` and the
//! search for one close to a given reduced state.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::even_state::{EvenParams, SingleSiteState};
use crate::fock::{check_modes, check_state, to_matrix, DenseOperator};
use crate::invariance::{lemma3_bound, require_bound_preconditions, BOUND_TOL};
use crate::linalg::{eigh, eigh_warm, eigvalsh, CMatrix, HermitianEigen};
use crate::majorana::{OperatorExpansion, SystemShape};
use crate::report::VerificationReport;

/// Off-diagonal tolerance for single-mode components.
pub const DIAGONAL_TOL: f64 = 1e-8;

/// `xi^{(x) k}`: the matrix tensor power under site-major ordering.
pub fn product_power(xi: &SingleSiteState, k: usize) -> Result<DenseOperator> {
    if k == 0 {
        return Err(Error::domain("product power needs k >= 1"));
    }
    let shape = SystemShape::new(k, xi.modes())?;
    check_modes(&shape)?;
    DenseOperator::new(shape, kron_power(xi.matrix(), k))
}

fn kron_power(m: &CMatrix, k: usize) -> CMatrix {
    let mut out = m.clone();
    for _ in 1..k {
        out = out.kron(m);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductMixture {
    pub weights: Vec<f64>,
    pub components: Vec<SingleSiteState>,
}

impl ProductMixture {
    pub fn new(weights: Vec<f64>, components: Vec<SingleSiteState>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(Error::domain("mixture needs one weight per component"));
        }
        if weights.iter().any(|&a| !(a >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::domain("mixture weights must lie on the simplex"));
        }
        let modes = components[0].modes();
        if components.iter().any(|c| c.modes() != modes) {
            return Err(Error::domain("components must share the number of modes"));
        }
        Ok(ProductMixture { weights, components })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.components[0].modes()
    }

    /// `sum_l a_l xi_l^{(x) k}`.
    pub fn to_dense(&self, k: usize) -> Result<DenseOperator> {
        let shape = SystemShape::new(k, self.modes())?;
        check_modes(&shape)?;
        DenseOperator::new(shape, mixture_matrix(&self.weights, &self.components, k))
    }

    /// Writes weights and component matrices in the matrix text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("# components {}\n", self.len());
        for (a, c) in self.weights.iter().zip(&self.components) {
            out.push_str(&format!("weight {a:.17e}\n"));
            out.push_str(&crate::fock::matrix_to_text(c.matrix()));
        }
        out
    }
}

fn mixture_matrix(weights: &[f64], components: &[SingleSiteState], k: usize) -> CMatrix {
    let d = 1usize << (components[0].modes() * k);
    let mut m = CMatrix::zeros(d);
    for (a, c) in weights.iter().zip(components) {
        if *a != 0.0 {
            m = m.add(&kron_power(c.matrix(), k).scale_real(*a));
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerParams {
    pub components: usize,
    pub restarts: usize,
    pub iters: usize,
    pub step: f64,
    pub seed: u64,
    /// Iterations without improvement before a restart stops early.
    pub patience: usize,
}

impl OptimizerParams {
    pub fn for_modes(modes_per_site: usize) -> Self {
        OptimizerParams {
            components: 2 * modes_per_site + 2,
            restarts: 8,
            iters: 500,
            step: 0.5,
            seed: 0,
            patience: 150,
        }
    }
}

/// Minimizes `||rho_k - sum_l a_l xi_l^{(x) k}||_1` by alternating projected
/// subgradient steps on the weights and on the component coordinates.
/// Returns the best mixture seen and its distance.
pub fn best_mixture_approx(rho_k: &DenseOperator, params: &OptimizerParams) -> Result<(ProductMixture, f64)> {
    validate_target(rho_k)?;
    if params.components == 0 || params.restarts == 0 {
        return Err(Error::domain("optimizer needs at least one component and one restart"));
    }
    let shape = rho_k.shape();
    let marginal = marginal_state(rho_k)?;
    let runs: Vec<(Vec<f64>, Vec<EvenParams>, f64)> = (0..params.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(restart as u64));
            let mut comps: Vec<EvenParams> = (0..params.components)
                .map(|_| EvenParams::random(shape.modes_per_site(), &mut rng))
                .collect();
            if restart == 0 {
                comps[0] = EvenParams::from_state(&marginal);
            }
            let weights = if restart == 0 {
                let mut w = vec![0.0; params.components];
                w[0] = 1.0;
                w
            } else {
                vec![1.0 / params.components as f64; params.components]
            };
            descend(rho_k, weights, comps, params)
        })
        .collect();
    let (weights, comps, dist) = pick_best(runs);
    Ok((assemble(weights, &comps)?, dist))
}

/// Continues the search from `start`, adding zero-weight components until
/// `params.components` are present. The result is never worse than `start`.
pub fn refine_mixture(
    rho_k: &DenseOperator,
    start: &ProductMixture,
    params: &OptimizerParams,
) -> Result<(ProductMixture, f64)> {
    validate_target(rho_k)?;
    if start.modes() != rho_k.shape().modes_per_site() {
        return Err(Error::domain("mixture and target disagree on modes per site"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut weights = start.weights.clone();
    let mut comps: Vec<EvenParams> = start.components.iter().map(EvenParams::from_state).collect();
    while comps.len() < params.components {
        comps.push(EvenParams::random(start.modes(), &mut rng));
        weights.push(0.0);
    }
    let start_dist = distance(rho_k, &start.weights, &start.components)?;
    let (w, c, d) = descend(rho_k, weights, comps, params);
    if d <= start_dist {
        Ok((assemble(w, &c)?, d))
    } else {
        Ok((start.clone(), start_dist))
    }
}

fn validate_target(rho_k: &DenseOperator) -> Result<()> {
    let v = check_state(rho_k);
    if !v.is_valid() {
        return Err(Error::domain(format!("target is not a valid state: {}", v.describe_failures())));
    }
    Ok(())
}

fn marginal_state(rho_k: &DenseOperator) -> Result<SingleSiteState> {
    let m = rho_k.partial_trace_sites(&[1])?.into_matrix().hermitian_part();
    SingleSiteState::new(rho_k.shape().modes_per_site(), m)
}

fn pick_best(runs: Vec<(Vec<f64>, Vec<EvenParams>, f64)>) -> (Vec<f64>, Vec<EvenParams>, f64) {
    let mut best: Option<(Vec<f64>, Vec<EvenParams>, f64)> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

fn assemble(weights: Vec<f64>, comps: &[EvenParams]) -> Result<ProductMixture> {
    // drop numerically empty components
    let mut w = Vec::new();
    let mut c = Vec::new();
    for (a, p) in weights.into_iter().zip(comps) {
        if a > 1e-15 {
            w.push(a);
            c.push(p.state());
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|a| *a /= total);
    ProductMixture::new(w, c)
}

fn distance(rho_k: &DenseOperator, weights: &[f64], comps: &[SingleSiteState]) -> Result<f64> {
    let k = rho_k.shape().sites();
    let delta = rho_k.matrix().sub(&mixture_matrix(weights, comps, k));
    Ok(eigvalsh(&delta).iter().map(|l| l.abs()).sum())
}

fn descend(
    rho_k: &DenseOperator,
    mut weights: Vec<f64>,
    mut comps: Vec<EvenParams>,
    params: &OptimizerParams,
) -> (Vec<f64>, Vec<EvenParams>, f64) {
    let k = rho_k.shape().sites();
    let target = rho_k.matrix();
    let mut best = (weights.clone(), comps.clone(), f64::INFINITY);
    let mut basis: Option<CMatrix> = None;
    let mut stall = 0;
    for t in 0..=params.iters {
        let states: Vec<SingleSiteState> = comps.iter().map(EvenParams::state).collect();
        let delta = target.sub(&mixture_matrix(&weights, &states, k));
        let eig = match &basis {
            Some(guess) => eigh_warm(&delta, guess),
            None => eigh(&delta),
        };
        let dist: f64 = eig.values.iter().map(|l| l.abs()).sum();
        if dist < best.2 - 1e-13 {
            best = (weights.clone(), comps.clone(), dist);
            stall = 0;
        } else {
            stall += 1;
        }
        if t == params.iters || dist < 1e-12 || stall > params.patience {
            break;
        }
        let sign = sign_matrix(&eig);
        basis = Some(eig.vectors);
        let eta = params.step / ((t + 1) as f64).sqrt();

        // d dist / d a_l = -tr(S xi_l^{(x) k})
        let envs: Vec<Vec<CMatrix>> = states.iter().map(|s| environments(&sign, s.matrix(), k)).collect();
        let grad_w: Vec<f64> = envs
            .iter()
            .zip(&states)
            .map(|(e, s)| -e[0].trace_of_product(s.matrix()).re)
            .collect();
        for (l, p) in comps.iter_mut().enumerate() {
            if weights[l] == 0.0 {
                continue;
            }
            // sum over positions of tr(E_s dxi)
            let total_env = envs[l].iter().fold(CMatrix::zeros(sign_dim(p)), |acc, e| acc.add(e));
            let grad: Vec<f64> = p
                .matrix_derivatives()
                .iter()
                .map(|d| -weights[l] * total_env.trace_of_product(d).re)
                .collect();
            p.step(&grad, eta);
        }
        for (a, g) in weights.iter_mut().zip(&grad_w) {
            *a -= eta * g;
        }
        project_to_simplex(&mut weights);
    }
    best
}

fn sign_dim(p: &EvenParams) -> usize {
    1usize << p.modes()
}

fn sign_matrix(eig: &HermitianEigen) -> CMatrix {
    eig.map_spectrum(|l| {
        if l > 0.0 {
            1.0
        } else if l < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// For each site `s`, the `d x d` matrix `E_s` with
/// `tr(S (xi (x) .. (x) X_s (x) .. (x) xi)) = tr(E_s X_s)`.
fn environments(sign: &CMatrix, xi: &CMatrix, k: usize) -> Vec<CMatrix> {
    let d = xi.dim();
    let n = sign.dim();
    let mut envs = vec![CMatrix::zeros(d); k];
    let diagonal = (0..d).all(|a| (0..d).all(|b| a == b || xi[(a, b)] == Complex64::new(0.0, 0.0)));
    let digits = |mut i: usize| {
        let mut out = vec![0usize; k];
        for t in (0..k).rev() {
            out[t] = i % d;
            i /= d;
        }
        out
    };
    let mut prefix = vec![Complex64::new(1.0, 0.0); k + 1];
    let mut suffix = vec![Complex64::new(1.0, 0.0); k + 1];
    let mut accumulate = |i: usize, j: usize, s_ij: Complex64| {
        let di = digits(i);
        let dj = digits(j);
        for t in 0..k {
            prefix[t + 1] = prefix[t] * xi[(dj[t], di[t])];
        }
        for t in (0..k).rev() {
            suffix[t] = suffix[t + 1] * xi[(dj[t], di[t])];
        }
        for s in 0..k {
            // tr(E X) = sum E[a, b] X[b, a] with a = i_s, b = j_s
            envs[s][(di[s], dj[s])] += s_ij * prefix[s] * suffix[s + 1];
        }
    };
    if diagonal {
        for i in 0..n {
            accumulate(i, i, sign[(i, i)]);
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                let s_ij = sign[(i, j)];
                if s_ij.norm_sqr() > 0.0 {
                    accumulate(i, j, s_ij);
                }
            }
        }
    }
    envs
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// `(2/sqrt3) 2^{2p} (k-1)^{3/2} / V + 2 2^{2p} k / V`.
pub fn theorem1_bound(modes_per_site: usize, sites: usize, k: usize) -> f64 {
    lemma3_bound(modes_per_site, sites, k) + spin_term(modes_per_site, sites, k, 2 * modes_per_site)
}

/// `2 2^{e} k / V` for exponent `e`.
pub fn spin_term(_modes_per_site: usize, sites: usize, k: usize, exponent: usize) -> f64 {
    2.0 * (exponent as f64).exp2() * k as f64 / sites as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Outcome {
    pub report: VerificationReport,
    pub mixture: ProductMixture,
    pub distance: f64,
}

pub fn verify_theorem1(rho: &OperatorExpansion, k: usize, params: &OptimizerParams) -> Result<VerificationReport> {
    certify_theorem1(rho, k, params).map(|o| o.report)
}

/// Searches a product mixture for the first `k` sites of `rho` and compares
/// its distance with the stated bound.
pub fn certify_theorem1(rho: &OperatorExpansion, k: usize, params: &OptimizerParams) -> Result<Theorem1Outcome> {
    let start = Instant::now();
    let shape = rho.shape();
    require_bound_preconditions(rho, k)?;
    let keep: Vec<usize> = (1..=k).collect();
    let rho_k = to_matrix(&rho.reduce_to_sites(&keep)?)?;
    let (mixture, distance) = best_mixture_approx(&rho_k, params)?;

    let (p, v) = (shape.modes_per_site(), shape.sites());
    let lemma = lemma3_bound(p, v, k);
    let stated = spin_term(p, v, k, 2 * p);
    let proof = spin_term(p, v, k, p);
    let bound = lemma + stated;
    let mut report = VerificationReport::inequality("theorem1", distance, bound, BOUND_TOL)
        .input("V", v)
        .input("p", p)
        .input("k", k)
        .input("r", params.components)
        .input("seed", params.seed)
        .note(format!("odd-part term {lemma:.6e}"))
        .note(format!("spin term 2*2^(2p)*k/V = {stated:.6e}"))
        .note(format!(
            "spin term with 2^p (proof constant) = {proof:.6e}; bound {:.6e}; distance within it: {}",
            lemma + proof,
            distance <= lemma + proof + BOUND_TOL
        ));
    if bound > 2.0 {
        report = report.note("bound exceeds trace-distance diameter");
    }
    for (l, c) in mixture.components.iter().enumerate() {
        let v = check_state(&c.to_dense());
        if !v.is_valid() {
            report = report.fail(format!("component {l} invalid: {}", v.describe_failures()));
        }
        if p == 1 && c.off_diagonal_mass() > DIAGONAL_TOL {
            report = report.fail(format!("component {l} is not diagonal"));
        }
    }
    Ok(Theorem1Outcome {
        report: report.timed(start),
        mixture,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{trace_norm, words_up_to_degree};
    use crate::invariance::{mu_family_state, MuFamilyParams};
    use crate::majorana::MajoranaWord;

    fn quick(p: usize) -> OptimizerParams {
        OptimizerParams {
            restarts: 3,
            iters: 200,
            ..OptimizerParams::for_modes(p)
        }
    }

    #[test]
    fn product_power_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in 1..=2 {
            let xi = EvenParams::random(p, &mut rng).state();
            assert_eq!(product_power(&xi, 1).unwrap().matrix(), xi.matrix());
            let pair = product_power(&xi, 2).unwrap();
            let two = SystemShape::new(2, p).unwrap();
            let xi_op = xi.to_dense();
            for w in words_up_to_degree(two.majoranas(), 4) {
                let w = MajoranaWord::from_bits(w.bits());
                let lhs = pair.word_expectation(w);
                let a = MajoranaWord::from_bits(w.local_bits(&two, 1));
                let b = MajoranaWord::from_bits(w.local_bits(&two, 2));
                let rhs = xi_op.word_expectation(a) * xi_op.word_expectation(b);
                // site 1 generators already precede site 2 generators
                assert!((lhs - rhs).norm() < 1e-12, "{w:?}");
            }
        }
        let vac = SingleSiteState::diagonal(1.0).unwrap();
        let two = product_power(&vac, 2).unwrap();
        assert_eq!(two.matrix()[(0, 0)], Complex64::new(1.0, 0.0));
        assert!((two.trace() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5, 0.5];
        project_to_simplex(&mut v);
        assert!(v.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let mut v = vec![2.0, -1.0, 0.0];
        project_to_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn environments_match_direct_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xi = EvenParams::random(2, &mut rng).state();
        let y = EvenParams::random(2, &mut rng).state();
        let k = 3;
        let s = CMatrix::from_fn(64, |i, j| Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0));
        let envs = environments(&s, xi.matrix(), k);
        for pos in 0..k {
            let mut m = CMatrix::identity(1);
            for t in 0..k {
                m = m.kron(if t == pos { y.matrix() } else { xi.matrix() });
            }
            let direct = s.trace_of_product(&m);
            assert!((direct - envs[pos].trace_of_product(y.matrix())).norm() < 1e-10);
        }
    }

    #[test]
    fn exact_products_are_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for p in 1..=2 {
            let xi = EvenParams::random(p, &mut rng).state();
            let target = product_power(&xi, 2).unwrap();
            let params = OptimizerParams {
                components: 1,
                ..quick(p)
            };
            let (_, d) = best_mixture_approx(&target, &params).unwrap();
            assert!(d < 1e-6, "p={p}: {d}");
        }
        let mixed = DenseOperator::maximally_mixed(SystemShape::new(3, 1).unwrap()).unwrap();
        let (m, d) = best_mixture_approx(&mixed, &quick(1)).unwrap();
        assert!(d < 1e-6);
        assert!(m.components.iter().all(|c| c.off_diagonal_mass() < DIAGONAL_TOL));
    }

    #[test]
    fn mixtures_of_products_are_recovered() {
        let a = SingleSiteState::diagonal(0.9).unwrap();
        let b = SingleSiteState::diagonal(0.2).unwrap();
        let target = ProductMixture::new(vec![0.3, 0.7], vec![a, b]).unwrap().to_dense(3).unwrap();
        let (_, d) = best_mixture_approx(&target, &quick(1)).unwrap();
        // the initial marginal alone is far from the target
        assert!(d < 0.05, "{d}");
    }

    #[test]
    fn odd_correlations_are_not_reproduced() {
        let rho = mu_family_state(MuFamilyParams {
            sites: 6,
            modes_per_site: 1,
            mu: 0.5,
        })
        .unwrap();
        let rho2 = to_matrix(&rho.reduce_to_sites(&[1, 2]).unwrap()).unwrap();
        let (m, d) = best_mixture_approx(&rho2, &quick(1)).unwrap();
        // no mixture of diagonal products reaches the odd part
        let odd = 0.5 * (std::f64::consts::PI / 12.0).tan();
        assert!(d >= odd - 1e-9 && d <= odd + 1e-6, "{d}");
        assert!((trace_norm(&rho2.sub(&m.to_dense(2).unwrap()).unwrap()).unwrap() - d).abs() < 1e-9);
    }

    #[test]
    fn refinement_is_monotone() {
        let a = SingleSiteState::diagonal(0.8).unwrap();
        let b = SingleSiteState::diagonal(0.1).unwrap();
        let target = ProductMixture::new(vec![0.5, 0.5], vec![a, b]).unwrap().to_dense(2).unwrap();
        let one = OptimizerParams {
            components: 1,
            ..quick(1)
        };
        let (m1, d1) = best_mixture_approx(&target, &one).unwrap();
        let (_, d2) = refine_mixture(&target, &m1, &OptimizerParams { components: 2, ..quick(1) }).unwrap();
        assert!(d2 <= d1 + 1e-9);
    }

    #[test]
    fn theorem1_examples() {
        let zero = mu_family_state(MuFamilyParams {
            sites: 6,
            modes_per_site: 1,
            mu: 0.0,
        })
        .unwrap();
        let out = certify_theorem1(&zero, 2, &quick(1)).unwrap();
        assert!(out.distance < 1e-6 && out.report.pass);

        let half = mu_family_state(MuFamilyParams {
            sites: 6,
            modes_per_site: 1,
            mu: 0.5,
        })
        .unwrap();
        let out = certify_theorem1(&half, 3, &quick(1)).unwrap();
        assert!((out.report.rhs - 6.177324215807269).abs() < 1e-12);
        assert!(out.report.pass);
        assert!(out.report.notes.iter().any(|n| n.contains("diameter")));
        assert!(certify_theorem1(&half, 6, &quick(1)).is_err());
    }

    #[test]
    fn invalid_target_rejected() {
        let bad = DenseOperator::new(SystemShape::new(1, 1).unwrap(), CMatrix::from_diag(&[2.0, -1.0])).unwrap();
        assert!(best_mixture_approx(&bad, &quick(1)).is_err());
    }
}
