//! One-particle reduced density matrices `Gamma_{jk} = <f_j^dag f_k>`.
//!
//! For a permutation invariant single-mode system `Gamma` has a constant
//! diagonal `a`, the value `b` below the diagonal and `b*` above it.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::cumulant::{LadderIndex, MomentEngine};
use crate::error::{Error, Result};
use crate::fock::{check_state, DenseOperator};
use crate::linalg::{eigvalsh, CMatrix};
use crate::report::VerificationReport;

pub const SINGULAR_TOL: f64 = 1e-12;
pub const SPECTRUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneRdm {
    #[serde(skip)]
    pub gamma: CMatrix,
    pub sites: usize,
    pub modes_per_site: usize,
    pub hermiticity_residual: f64,
}

impl OneRdm {
    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.gamma)
    }

    pub fn particle_number(&self) -> f64 {
        self.gamma.trace().re
    }

    /// `<f_2^dag f_1>` for single-mode systems.
    pub fn lower_value(&self) -> Complex64 {
        if self.dim() < 2 {
            Complex64::new(0.0, 0.0)
        } else {
            self.gamma[(1, 0)]
        }
    }
}

pub fn one_rdm(rho: &DenseOperator) -> Result<OneRdm> {
    let v = check_state(rho);
    if !v.is_valid() {
        return Err(Error::domain(format!("invalid state: {}", v.describe_failures())));
    }
    let shape = rho.shape();
    let p = shape.modes_per_site();
    let k = shape.modes();
    let mut engine = MomentEngine::new(rho);
    let index = |m: usize| (m / p + 1, m % p + 1);
    let mut raw = CMatrix::zeros(k);
    for a in 0..k {
        for b in 0..k {
            let (ja, alpha) = index(a);
            let (jb, beta) = index(b);
            raw[(a, b)] = engine.moment(&[LadderIndex::create(ja, alpha), LadderIndex::annihilate(jb, beta)])?;
        }
    }
    let residual = raw.hermiticity_residual();
    Ok(OneRdm {
        gamma: raw.hermitian_part(),
        sites: shape.sites(),
        modes_per_site: p,
        hermiticity_residual: residual,
    })
}

/// Variance of the total particle number.
pub fn number_variance(rho: &DenseOperator) -> f64 {
    let m = rho.matrix();
    let mut mean = 0.0;
    let mut second = 0.0;
    for b in 0..rho.dim() {
        let (count, weight) = (b.count_ones() as f64, m[(b, b)].re);
        mean += count * weight;
        second += count * count * weight;
    }
    second - mean * mean
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CirculantParams {
    pub sites: usize,
    pub a: f64,
    pub b: Complex64,
}

impl CirculantParams {
    /// `a` on the diagonal, `b` below it and `b*` above it.
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.sites, |j, k| {
            if j == k {
                Complex64::new(self.a, 0.0)
            } else if j > k {
                self.b
            } else {
                self.b.conj()
            }
        })
    }

    fn is_real(&self) -> bool {
        self.b.im == 0.0
    }
}

/// The displayed eigenvalue formula, `k = 0..V-1`.
pub fn circulant_spectrum(params: CirculantParams) -> Result<Vec<f64>> {
    let entries = circulant_formula(params)?;
    let singular: Vec<usize> = entries.iter().enumerate().filter(|(_, e)| e.is_none()).map(|(k, _)| k).collect();
    if !singular.is_empty() {
        return Err(Error::domain(format!("eigenvalue formula is singular at k = {singular:?}")));
    }
    Ok(entries.into_iter().map(|e| e.expect("checked")).collect())
}

/// Formula values with `None` at singular `k`.
pub fn circulant_formula(params: CirculantParams) -> Result<Vec<Option<f64>>> {
    let CirculantParams { sites, a, b } = params;
    if sites < 2 {
        return Err(Error::domain(format!("circulant spectrum needs V >= 2, got {sites}")));
    }
    let v = sites as f64;
    if params.is_real() {
        let b = b.re;
        return Ok((0..sites)
            .map(|k| Some(a - b + if k == 0 { b * v } else { 0.0 }))
            .collect());
    }
    let (r, phi) = b.to_polar();
    Ok((0..sites)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / v;
            let denom = 1.0 - (theta - 2.0 * phi / v).cos();
            if denom.abs() < SINGULAR_TOL {
                None
            } else {
                Some(a + r * ((theta + (v - 2.0) * phi / v).cos() - phi.cos()) / denom)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub sites: usize,
    pub k: usize,
    pub formula: Option<f64>,
    pub direct: f64,
    pub abs_diff: Option<f64>,
}

/// Formula against direct diagonalization. Formula values are matched to the
/// closest unused direct eigenvalue; singular `k` take the leftovers.
pub fn spectrum_rows(params: CirculantParams) -> Result<Vec<SpectrumRow>> {
    let formula = circulant_formula(params)?;
    let direct = eigvalsh(&params.matrix());
    let mut used = vec![false; direct.len()];
    let mut rows: Vec<SpectrumRow> = Vec::with_capacity(formula.len());
    let mut order: Vec<usize> = (0..formula.len()).filter(|&k| formula[k].is_some()).collect();
    order.sort_by(|&x, &y| formula[x].unwrap().total_cmp(&formula[y].unwrap()));
    let mut matched = vec![f64::NAN; formula.len()];
    for k in order {
        let f = formula[k].unwrap();
        let best = (0..direct.len())
            .filter(|&i| !used[i])
            .min_by(|&x, &y| (direct[x] - f).abs().total_cmp(&(direct[y] - f).abs()))
            .expect("as many eigenvalues as formula entries");
        used[best] = true;
        matched[k] = direct[best];
    }
    let mut leftovers = (0..direct.len()).filter(|&i| !used[i]);
    for k in 0..formula.len() {
        if formula[k].is_none() {
            matched[k] = direct[leftovers.next().expect("one leftover per singular k")];
        }
        rows.push(SpectrumRow {
            sites: params.sites,
            k,
            formula: formula[k],
            direct: matched[k],
            abs_diff: formula[k].map(|f| (f - matched[k]).abs()),
        });
    }
    Ok(rows)
}

/// Bound `8 / (sqrt3 V)` on the off-diagonal value.
pub fn off_diagonal_bound(sites: usize) -> f64 {
    8.0 / (3f64.sqrt() * sites as f64)
}

/// Eigenvalues in `[0, 1]`, trace consistency, and (for permutation invariant
/// single-mode sources) the bound on the off-diagonal value.
pub fn verify_pauli_constraints(gamma: &OneRdm, invariant_source: bool) -> VerificationReport {
    let start = Instant::now();
    let eig = gamma.eigenvalues();
    let lo = eig.first().copied().unwrap_or(0.0);
    let hi = eig.last().copied().unwrap_or(0.0);
    let trace_gap = (eig.iter().sum::<f64>() - gamma.particle_number()).abs();
    let mut pass = lo >= -SPECTRUM_TOL && hi <= 1.0 + SPECTRUM_TOL && trace_gap <= 1e-9;
    let mut report = VerificationReport::property("pauli-constraints", lo, hi, SPECTRUM_TOL, true)
        .input("V", gamma.sites)
        .input("p", gamma.modes_per_site)
        .note(format!("trace {:.12} (eigenvalue sum gap {trace_gap:.1e})", gamma.particle_number()));
    if lo < -SPECTRUM_TOL {
        report = report.note(format!("negative eigenvalue {lo:.6e}"));
    }
    if hi > 1.0 + SPECTRUM_TOL {
        report = report.note(format!("eigenvalue above one {hi:.6e}"));
    }
    if invariant_source && gamma.modes_per_site == 1 && gamma.sites >= 2 {
        let b = gamma.lower_value().norm();
        let bound = off_diagonal_bound(gamma.sites);
        report = report.note(format!("|b| = {b:.6e} against {bound:.6e}"));
        pass &= b <= bound + 1e-9;
    }
    if !pass {
        report = report.fail("constraint violated");
    }
    report.timed(start)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockStructure {
    #[serde(skip)]
    pub diagonal_block: CMatrix,
    #[serde(skip)]
    pub lower_block: CMatrix,
    /// Largest deviation of `Gamma` from the block ansatz.
    pub residual: f64,
    pub diagonal_trace: f64,
    pub lower_norm: f64,
}

/// Least-squares fit of `Gamma` to diagonal blocks `A`, blocks `B` below the
/// diagonal and `B^dag` above it.
pub fn block_rdm_structure(rho: &DenseOperator) -> Result<BlockStructure> {
    let shape = rho.shape();
    let p = shape.modes_per_site();
    if p < 2 {
        return Err(Error::domain("block structure needs p >= 2"));
    }
    let gamma = one_rdm(rho)?.gamma;
    let v = shape.sites();
    let block = |j: usize, k: usize| CMatrix::from_fn(p, |a, b| gamma[(j * p + a, k * p + b)]);
    let mut a = CMatrix::zeros(p);
    let mut b = CMatrix::zeros(p);
    for j in 0..v {
        a = a.add(&block(j, j));
        for k in 0..j {
            b = b.add(&block(j, k)).add(&block(k, j).adjoint());
        }
    }
    a = a.scale_real(1.0 / v as f64);
    let pairs = (v * (v - 1)) as f64;
    if pairs > 0.0 {
        b = b.scale_real(1.0 / pairs);
    }
    let mut residual: f64 = 0.0;
    for j in 0..v {
        for k in 0..v {
            let expected = if j == k {
                a.clone()
            } else if j > k {
                b.clone()
            } else {
                b.adjoint()
            };
            residual = residual.max(block(j, k).max_abs_diff(&expected));
        }
    }
    Ok(BlockStructure {
        diagonal_trace: a.trace().re,
        lower_norm: b.max_abs(),
        diagonal_block: a,
        lower_block: b,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definetti::product_power;
    use crate::even_state::EvenParams;
    use crate::fock::to_matrix;
    use crate::invariance::{mu_family_state, MuFamilyParams};
    use crate::majorana::SystemShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mu_dense(v: usize, p: usize, mu: f64) -> DenseOperator {
        to_matrix(&mu_family_state(MuFamilyParams { sites: v, modes_per_site: p, mu }).unwrap()).unwrap()
    }

    #[test]
    fn vacuum_and_full() {
        let s = SystemShape::new(3, 1).unwrap();
        let vac = one_rdm(&DenseOperator::vacuum(s).unwrap()).unwrap();
        assert_eq!(vac.gamma.max_abs(), 0.0);
        let full = one_rdm(&DenseOperator::basis_projector(s, &[true, true, true]).unwrap()).unwrap();
        assert!(full.gamma.max_abs_diff(&CMatrix::identity(3)) < 1e-15);
        assert!(verify_pauli_constraints(&vac, true).pass);
    }

    #[test]
    fn mu_family_rdm_is_circulant() {
        let rho = mu_dense(6, 1, 0.5);
        let g = one_rdm(&rho).unwrap();
        let t = (PI / 12.0).tan();
        assert!((g.gamma[(0, 0)].re - 0.5).abs() < 1e-13);
        // <f_2^dag f_1> = (1/4) <m_2 m_1> = (1/4)(i t mu)
        let b = g.lower_value();
        assert!((b - Complex64::new(0.0, 0.125 * t)).norm() < 1e-13, "{b}");
        let params = CirculantParams { sites: 6, a: 0.5, b };
        assert!(params.matrix().max_abs_diff(&g.gamma) < 1e-13);
        let r = verify_pauli_constraints(&g, true);
        assert!(r.pass, "{:?}", r.notes);
        assert!(g.hermiticity_residual < 1e-13);
    }

    #[test]
    fn formula_branches() {
        let zero = circulant_spectrum(CirculantParams { sites: 5, a: 0.4, b: Complex64::new(0.0, 0.0) }).unwrap();
        assert!(zero.iter().all(|&l| l == 0.4));
        let real = circulant_spectrum(CirculantParams { sites: 5, a: 0.4, b: Complex64::new(0.05, 0.0) }).unwrap();
        assert_eq!(real[0], 0.4 + 0.05 * 4.0);
        assert!(real[1..].iter().all(|&l| l == 0.4 - 0.05));
        let p = CirculantParams { sites: 6, a: 0.5, b: Complex64::from_polar(0.05, PI / 5.0) };
        for row in spectrum_rows(p).unwrap() {
            assert!(row.abs_diff.unwrap() < 1e-10, "{row:?}");
        }
    }

    #[test]
    fn formula_matches_direct_over_sizes() {
        for v in 2..=12 {
            let vf = v as f64;
            for b in [
                Complex64::new(-0.1, 0.0),
                Complex64::new(0.05, 0.0),
                Complex64::new(0.3 / vf, 0.0),
                Complex64::from_polar(0.05, 0.7),
                Complex64::new(0.0, 0.02),
                Complex64::from_polar(0.3 / vf, -2.1),
            ] {
                let rows = spectrum_rows(CirculantParams { sites: v, a: 0.5, b }).unwrap();
                let sum: f64 = rows.iter().map(|r| r.direct).sum();
                assert!((sum - 0.5 * vf).abs() < 1e-10);
                for r in rows {
                    if let Some(d) = r.abs_diff {
                        assert!(d < 1e-10, "V={v} b={b} k={}: {d}", r.k);
                    }
                }
            }
        }
    }

    #[test]
    fn singular_denominator_is_reported() {
        // denominator vanishes at k with 2 pi k / V = 2 phi / V, e.g. phi = pi, k = 1
        let p = CirculantParams { sites: 4, a: 0.5, b: Complex64::from_polar(0.05, PI - 1e-15) };
        let p = CirculantParams { b: Complex64::new(p.b.re, 1e-17), ..p };
        let err = circulant_spectrum(p).unwrap_err();
        assert!(err.to_string().contains("k = [1]"), "{err}");
        let rows = spectrum_rows(p).unwrap();
        assert!(rows[1].formula.is_none() && rows[1].direct.is_finite());
    }

    #[test]
    fn hand_built_violation() {
        let g = OneRdm {
            gamma: CirculantParams { sites: 4, a: 0.5, b: Complex64::new(1.0, 0.0) }.matrix(),
            sites: 4,
            modes_per_site: 1,
            hermiticity_residual: 0.0,
        };
        let r = verify_pauli_constraints(&g, false);
        assert!(!r.pass);
        assert!(r.notes.iter().any(|n| n.contains("negative eigenvalue")));
    }

    #[test]
    fn block_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let xi = EvenParams::random(2, &mut rng).state();
        let prod = product_power(&xi, 3).unwrap();
        let s = block_rdm_structure(&prod).unwrap();
        assert!(s.residual < 1e-10);
        assert!(s.lower_norm < 1e-12);

        let mu = mu_dense(4, 2, 0.5);
        let s = block_rdm_structure(&mu).unwrap();
        assert!(s.residual < 1e-9);
        assert!(s.lower_norm > 1e-3);
        assert!((s.diagonal_trace - 1.0).abs() < 1e-12);
    }

    #[test]
    fn off_diagonal_value_shrinks_with_size() {
        let scaled: Vec<f64> = [6, 8, 10]
            .iter()
            .map(|&v| one_rdm(&mu_dense(v, 1, 0.5)).unwrap().lower_value().norm() * v as f64)
            .collect();
        for s in &scaled {
            assert!(*s < 0.25);
        }
    }

    #[test]
    fn number_eigenstates_have_zero_variance() {
        let s = SystemShape::new(3, 1).unwrap();
        let rho = DenseOperator::basis_projector(s, &[true, false, true]).unwrap();
        assert_eq!(number_variance(&rho), 0.0);
        assert!(number_variance(&DenseOperator::maximally_mixed(s).unwrap()) > 0.5);
    }
}
