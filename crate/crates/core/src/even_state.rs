//! Even (parity-superselected) single-site states and their parametrization.
//!
//! For `p = 1` an even state is diagonal, `alpha |0><0| + (1 - alpha) |1><1|`,
//! and is parametrized by `alpha` directly. For `p >= 2` a state is
//! `exp(X) / tr exp(X)` with `X` an even Hermitian generator, i.e. block
//! diagonal in the two parity sectors of the `2^p` single-site Fock basis.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{check_state, DenseOperator};
use crate::linalg::{eigh, CMatrix};
use crate::majorana::SystemShape;

const STATE_TOL: f64 = 1e-9;

/// Even density matrix on the `2^p`-dimensional Fock space of one site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleSiteState {
    modes: usize,
    #[serde(skip)]
    matrix: CMatrix,
}

impl SingleSiteState {
    pub fn new(modes: usize, matrix: CMatrix) -> Result<Self> {
        let shape = SystemShape::new(1, modes)?;
        let op = DenseOperator::new(shape, matrix)?;
        let v = check_state(&op);
        if (v.trace - 1.0).abs() > STATE_TOL || v.min_eigenvalue < -STATE_TOL || v.parity_violation > STATE_TOL || !v.hermitian_ok {
            return Err(Error::domain(format!("not an even single-site state: {}", v.describe_failures())));
        }
        Ok(SingleSiteState {
            modes,
            matrix: op.into_matrix(),
        })
    }

    /// `alpha |0><0| + (1 - alpha) |1><1|` for a single mode.
    pub fn diagonal(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::domain(format!("alpha {alpha} outside [0, 1]")));
        }
        Ok(SingleSiteState {
            modes: 1,
            matrix: CMatrix::from_diag(&[alpha, 1.0 - alpha]),
        })
    }

    pub fn maximally_mixed(modes: usize) -> Self {
        let d = 1usize << modes;
        SingleSiteState {
            modes,
            matrix: CMatrix::identity(d).scale_real(1.0 / d as f64),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn shape(&self) -> SystemShape {
        SystemShape::new(1, self.modes).expect("validated at construction")
    }

    pub fn to_dense(&self) -> DenseOperator {
        DenseOperator::new(self.shape(), self.matrix.clone()).expect("validated at construction")
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_of_product(&self.matrix).re
    }

    /// Largest matrix element connecting different parity sectors.
    pub fn parity_violation(&self) -> f64 {
        check_state(&self.to_dense()).parity_violation
    }

    pub fn off_diagonal_mass(&self) -> f64 {
        let n = self.matrix.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.matrix[(i, j)].norm());
                }
            }
        }
        m
    }
}

/// Coordinates of an even state.
#[derive(Debug, Clone, PartialEq)]
pub enum EvenParams {
    /// Occupation of `|0>` for `p = 1`.
    Diagonal(f64),
    /// Real coordinates of an even Hermitian generator.
    Generator { modes: usize, values: Vec<f64> },
}

fn sectors(modes: usize) -> [Vec<usize>; 2] {
    let d = 1usize << modes;
    let even = (0..d).filter(|b: &usize| b.count_ones() % 2 == 0).collect();
    let odd = (0..d).filter(|b: &usize| b.count_ones() % 2 == 1).collect();
    [even, odd]
}

/// Number of real coordinates of an even Hermitian generator on `p` modes.
pub fn generator_len(modes: usize) -> usize {
    sectors(modes).iter().map(|s| s.len() * s.len()).sum()
}

impl EvenParams {
    pub fn len(&self) -> usize {
        match self {
            EvenParams::Diagonal(_) => 1,
            EvenParams::Generator { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn modes(&self) -> usize {
        match self {
            EvenParams::Diagonal(_) => 1,
            EvenParams::Generator { modes, .. } => *modes,
        }
    }

    pub fn random(modes: usize, rng: &mut impl Rng) -> Self {
        if modes == 1 {
            EvenParams::Diagonal(rng.gen_range(0.0..=1.0))
        } else {
            let values = (0..generator_len(modes)).map(|_| rng.gen_range(-1.5..1.5)).collect();
            EvenParams::Generator { modes, values }
        }
    }

    /// Coordinates reproducing `xi` (eigenvalues clamped at `1e-12` for the log).
    pub fn from_state(xi: &SingleSiteState) -> Self {
        let modes = xi.modes();
        if modes == 1 {
            return EvenParams::Diagonal(xi.matrix()[(0, 0)].re.clamp(0.0, 1.0));
        }
        let e = eigh(&xi.matrix().hermitian_part());
        let log = e.map_spectrum(|l| l.max(1e-12).ln());
        let mut values = Vec::with_capacity(generator_len(modes));
        for sector in sectors(modes) {
            for (a, &i) in sector.iter().enumerate() {
                values.push(log[(i, i)].re);
                for &j in &sector[a + 1..] {
                    values.push(log[(i, j)].re);
                    values.push(log[(i, j)].im);
                }
            }
        }
        EvenParams::Generator { modes, values }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            EvenParams::Diagonal(a) => *a,
            EvenParams::Generator { values, .. } => values[i],
        }
    }

    pub fn set(&mut self, i: usize, x: f64) {
        match self {
            EvenParams::Diagonal(a) => *a = x.clamp(0.0, 1.0),
            EvenParams::Generator { values, .. } => values[i] = x,
        }
    }

    /// Density matrix for these coordinates.
    pub fn matrix(&self) -> CMatrix {
        match self {
            EvenParams::Diagonal(a) => {
                let a = a.clamp(0.0, 1.0);
                CMatrix::from_diag(&[a, 1.0 - a])
            }
            EvenParams::Generator { modes, values } => {
                let d = 1usize << modes;
                let mut x = CMatrix::zeros(d);
                let mut k = 0;
                for sector in sectors(*modes) {
                    for (a, &i) in sector.iter().enumerate() {
                        x[(i, i)] = Complex64::new(values[k], 0.0);
                        k += 1;
                        for &j in &sector[a + 1..] {
                            let z = Complex64::new(values[k], values[k + 1]);
                            x[(i, j)] = z;
                            x[(j, i)] = z.conj();
                            k += 2;
                        }
                    }
                }
                let e = eigh(&x);
                let top = e.values.last().copied().unwrap_or(0.0);
                let rho = e.map_spectrum(|l| (l - top).exp());
                let tr = rho.trace().re;
                rho.scale_real(1.0 / tr).hermitian_part()
            }
        }
    }

    pub fn state(&self) -> SingleSiteState {
        SingleSiteState {
            modes: self.modes(),
            matrix: self.matrix(),
        }
    }

    /// Partial derivatives of the density matrix, one per coordinate.
    pub fn matrix_derivatives(&self) -> Vec<CMatrix> {
        match self {
            EvenParams::Diagonal(_) => vec![CMatrix::from_diag(&[1.0, -1.0])],
            EvenParams::Generator { .. } => {
                const H: f64 = 1e-6;
                (0..self.len())
                    .map(|i| {
                        let mut up = self.clone();
                        let mut down = self.clone();
                        up.set(i, self.get(i) + H);
                        down.set(i, self.get(i) - H);
                        up.matrix().sub(&down.matrix()).scale_real(0.5 / H)
                    })
                    .collect()
            }
        }
    }

    /// Gradient step `theta -= step * grad` (projected for the diagonal case).
    pub fn step(&mut self, grad: &[f64], step: f64) {
        for (i, g) in grad.iter().enumerate() {
            let x = self.get(i) - step * g;
            self.set(i, x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_generators_give_even_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for modes in 1..=3 {
            for _ in 0..5 {
                let params = EvenParams::random(modes, &mut rng);
                let xi = SingleSiteState::new(modes, params.matrix()).unwrap();
                assert!(xi.parity_violation() < 1e-12);
            }
        }
        assert_eq!(generator_len(2), 8);
        assert_eq!(generator_len(3), 32);
    }

    #[test]
    fn from_state_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = EvenParams::random(2, &mut rng);
        let xi = params.state();
        let back = EvenParams::from_state(&xi).state();
        assert!(back.matrix().max_abs_diff(xi.matrix()) < 1e-9);
    }

    #[test]
    fn derivatives_match_finite_difference_of_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = EvenParams::random(2, &mut rng);
        for d in params.matrix_derivatives() {
            // trace is fixed at 1
            assert!(d.trace().norm() < 1e-6);
            assert!(d.hermiticity_residual() < 1e-6);
        }
    }

    #[test]
    fn rejects_odd_or_unnormalized() {
        let odd = CMatrix::from_fn(2, |_, _| Complex64::new(0.5, 0.0));
        assert!(SingleSiteState::new(1, odd).is_err());
        assert!(SingleSiteState::new(1, CMatrix::from_diag(&[0.5, 0.6])).is_err());
        assert!(SingleSiteState::diagonal(1.2).is_err());
        assert!(SingleSiteState::diagonal(0.25).is_ok());
    }
}
