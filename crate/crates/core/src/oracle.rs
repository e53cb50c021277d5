//! Seeded random cross-checks: symbolic products, adjoints and permutations
//! against dense Jordan-Wigner matrices, and the two operator inequalities
//! used by the suppression bound (pinching does not increase the operator
//! norm; `|tr(rho A)|^2 <= tr(rho A A^dagger)`).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fock::{cauchy_schwarz_pair, jw_matrix, pinch_norms, random_even_state, random_operator, site_parity};
use crate::majorana::{MajoranaWord, SitePermutation, SystemShape};

/// Shapes with `pV <= 4`.
pub const ORACLE_SHAPES: [(usize, usize); 8] = [(1, 1), (2, 1), (3, 1), (4, 1), (1, 2), (2, 2), (1, 3), (1, 4)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraRow {
    pub case: usize,
    pub sites: usize,
    pub modes_per_site: usize,
    pub product_diff: f64,
    pub adjoint_diff: f64,
    pub permutation_diff: f64,
}

impl AlgebraRow {
    pub fn max_diff(&self) -> f64 {
        self.product_diff.max(self.adjoint_diff).max(self.permutation_diff)
    }
}

fn shape_for(rng: &mut ChaCha8Rng) -> Result<SystemShape> {
    let (v, p) = ORACLE_SHAPES[rng.gen_range(0..ORACLE_SHAPES.len())];
    SystemShape::new(v, p)
}

fn random_word(shape: SystemShape, rng: &mut ChaCha8Rng) -> MajoranaWord {
    MajoranaWord::from_bits(rng.gen_range(0..1u64 << shape.majoranas()))
}

pub fn algebra_sweep(cases: usize, seed: u64) -> Result<Vec<AlgebraRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(cases);
    for case in 0..cases {
        let shape = shape_for(&mut rng)?;
        let (a, b) = (random_word(shape, &mut rng), random_word(shape, &mut rng));
        let (ma, mb) = (jw_matrix(a, shape)?, jw_matrix(b, shape)?);
        let (sign, ab) = a.mul(b);
        let product_diff = ma
            .mul(&mb)?
            .matrix()
            .max_abs_diff(&jw_matrix(ab, shape)?.matrix().scale_real(sign.value()));
        let adjoint_diff = ma
            .matrix()
            .adjoint()
            .max_abs_diff(&ma.matrix().scale_real(a.adjoint_sign().value()));
        let mut images: Vec<usize> = (1..=shape.sites()).collect();
        images.shuffle(&mut rng);
        let pi = SitePermutation::from_images(&images)?;
        let (psign, image) = pi.act_on_word(&shape, a);
        let permutation_diff = ma
            .permute_sites(&pi)?
            .matrix()
            .max_abs_diff(&jw_matrix(image, shape)?.matrix().scale_real(psign.value()));
        rows.push(AlgebraRow {
            case,
            sites: shape.sites(),
            modes_per_site: shape.modes_per_site(),
            product_diff,
            adjoint_diff,
            permutation_diff,
        });
    }
    Ok(rows)
}

/// One random instance of an operator inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityRow {
    pub case: usize,
    pub sites: usize,
    pub modes_per_site: usize,
    /// Site of the parity operator (pinching rows only).
    pub site: Option<usize>,
    pub plus: Option<bool>,
    pub lhs: f64,
    pub rhs: f64,
}

pub fn pinching_sweep(cases: usize, seed: u64) -> Result<Vec<InequalityRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(cases);
    for case in 0..cases {
        let shape = shape_for(&mut rng)?;
        let a = random_operator(shape, &mut rng)?;
        let site = rng.gen_range(1..=shape.sites());
        let plus = rng.gen_bool(0.5);
        let p = site_parity(shape, site)?;
        let (lhs, rhs) = pinch_norms(&a, p.matrix(), plus);
        rows.push(InequalityRow {
            case,
            sites: shape.sites(),
            modes_per_site: shape.modes_per_site(),
            site: Some(site),
            plus: Some(plus),
            lhs,
            rhs,
        });
    }
    Ok(rows)
}

pub fn cauchy_schwarz_sweep(cases: usize, seed: u64) -> Result<Vec<InequalityRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(cases);
    for case in 0..cases {
        let shape = shape_for(&mut rng)?;
        let rho = random_even_state(shape, &mut rng)?;
        let a = random_operator(shape, &mut rng)?;
        let (lhs, rhs) = cauchy_schwarz_pair(&rho, &a);
        rows.push(InequalityRow {
            case,
            sites: shape.sites(),
            modes_per_site: shape.modes_per_site(),
            site: None,
            plus: None,
            lhs,
            rhs,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps_are_deterministic_and_hold() {
        let a = algebra_sweep(50, 3).unwrap();
        assert_eq!(a, algebra_sweep(50, 3).unwrap());
        assert!(a.iter().all(|r| r.max_diff() < 1e-10));
        let l1 = pinching_sweep(40, 4).unwrap();
        assert!(l1.iter().all(|r| r.lhs <= r.rhs + 1e-9));
        let l2 = cauchy_schwarz_sweep(40, 5).unwrap();
        assert!(l2.iter().all(|r| r.lhs <= r.rhs + 1e-9));
        assert!(l2.iter().any(|r| r.sites * r.modes_per_site == 4));
    }
}
