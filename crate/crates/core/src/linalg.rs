//! Dense complex matrices and a cyclic Jacobi eigensolver for Hermitian input.

use std::ops::{Index, IndexMut};

use faer::complex_native::c64;
use num_complex::Complex64;
use rayon::prelude::*;

/// Off-diagonal Frobenius norm (relative to the block norm) at which a Jacobi
/// block counts as diagonal.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMatrix { n, data }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Row-major data of length `n * n`.
    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Option<Self> {
        (data.len() == n * n).then_some(CMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMatrix) -> CMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &CMatrix) -> CMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &CMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> CMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn kron(&self, rhs: &CMatrix) -> CMatrix {
        let (n, m) = (self.n, rhs.n);
        let mut out = CMatrix::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// `tr(self * rhs)` without forming the product.
    pub fn trace_of_product(&self, rhs: &CMatrix) -> Complex64 {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.data[i * n + j] * rhs.data[j * n + i];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.norm()))
    }

    pub fn max_abs_diff(&self, rhs: &CMatrix) -> f64 {
        self.sub(rhs).max_abs()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn diag_real(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)].re).collect()
    }

    /// `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> CMatrix {
        CMatrix::from_fn(idx.len(), |i, j| self[(idx[i], idx[j])])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenpairs of a Hermitian matrix: ascending values, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// `U f(Lambda) U^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let u = &self.vectors;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for (k, &w) in fv.iter().enumerate() {
                    if w != 0.0 {
                        acc += u[(i, k)] * u[(j, k)].conj() * w;
                    }
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Diagonal of `U f(Lambda) U^dagger` only.
    pub fn map_spectrum_diag(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        (0..n)
            .map(|i| {
                fv.iter()
                    .enumerate()
                    .map(|(k, w)| self.vectors[(i, k)].norm_sqr() * w)
                    .sum()
            })
            .collect()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_spectrum(|l| l)
    }
}

/// Blocks up to this size use Jacobi; larger ones go to a tridiagonal
/// reduction solver.
pub const JACOBI_MAX_BLOCK: usize = 48;

/// Eigendecomposition of a Hermitian matrix.
///
/// The matrix is first split into the connected components of its sparsity
/// graph; small blocks are diagonalized by cyclic Jacobi rotations.
pub fn eigh(m: &CMatrix) -> HermitianEigen {
    let n = m.dim();
    let cutoff = m.max_abs() * 1e-15;
    let solved: Vec<(Vec<usize>, Vec<f64>, CMatrix)> = connected_blocks(m, cutoff)
        .into_par_iter()
        .map(|idx| {
            let (vals, vecs) = solve_block(&m.submatrix(&idx));
            (idx, vals, vecs)
        })
        .collect();
    let mut order: Vec<(f64, usize, usize, usize)> = Vec::with_capacity(n);
    for (b, (idx, vals, _)) in solved.iter().enumerate() {
        for (k, &v) in vals.iter().enumerate() {
            order.push((v, idx[0], b, k));
        }
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
    let mut vectors = CMatrix::zeros(n);
    let mut values = Vec::with_capacity(n);
    for (col, &(v, _, b, k)) in order.iter().enumerate() {
        values.push(v);
        let (idx, _, vecs) = &solved[b];
        for (local, &global) in idx.iter().enumerate() {
            vectors[(global, col)] = vecs[(local, k)];
        }
    }
    HermitianEigen { values, vectors }
}

/// Lowest eigenvalue and an orthonormal basis of all eigenvectors within
/// `tol` of it.
pub fn lowest_eigenspace(m: &CMatrix, tol: f64) -> (f64, Vec<Vec<Complex64>>) {
    let n = m.dim();
    let cutoff = m.max_abs() * 1e-15;
    let candidates: Vec<(f64, Vec<Complex64>)> = connected_blocks(m, cutoff)
        .into_par_iter()
        .flat_map_iter(|idx| {
            let (vals, vecs) = solve_block(&m.submatrix(&idx));
            let low = vals.first().copied().unwrap_or(f64::INFINITY);
            let mut out = Vec::new();
            for (k, &v) in vals.iter().enumerate() {
                if v <= low + tol {
                    let mut col = vec![ZERO; n];
                    for (local, &global) in idx.iter().enumerate() {
                        col[global] = vecs[(local, k)];
                    }
                    out.push((v, col));
                }
            }
            out
        })
        .collect();
    let low = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let space = candidates.into_iter().filter(|c| c.0 <= low + tol).map(|c| c.1).collect();
    (low, space)
}

fn solve_block(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    if a.dim() <= JACOBI_MAX_BLOCK {
        let (vals, vecs) = jacobi(a.clone());
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let sorted = order.iter().map(|&i| vals[i]).collect();
        let n = a.dim();
        (sorted, CMatrix::from_fn(n, |r, c| vecs[(r, order[c])]))
    } else {
        dense_eigh(a)
    }
}

/// Ascending eigenvalues of a Hermitian matrix, without eigenvectors.
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let cutoff = m.max_abs() * 1e-15;
    let mut values: Vec<f64> = connected_blocks(m, cutoff)
        .into_par_iter()
        .flat_map_iter(|idx| {
            let sub = m.submatrix(&idx);
            if idx.len() <= JACOBI_MAX_BLOCK {
                jacobi(sub).0
            } else {
                to_faer(&sub).selfadjoint_eigenvalues(faer::Side::Lower)
            }
        })
        .collect();
    values.sort_by(f64::total_cmp);
    values
}

fn to_faer(a: &CMatrix) -> faer::Mat<c64> {
    faer::Mat::from_fn(a.dim(), a.dim(), |i, j| {
        let z = a[(i, j)];
        c64::new(z.re, z.im)
    })
}

fn dense_eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.dim();
    let e = to_faer(a).selfadjoint_eigendecomposition(faer::Side::Lower);
    let s = e.s().column_vector();
    let u = e.u();
    let values = (0..n).map(|k| s.read(k).re).collect();
    let vectors = CMatrix::from_fn(n, |i, k| {
        let z = u.read(i, k);
        Complex64::new(z.re, z.im)
    });
    (values, vectors)
}

/// Eigendecomposition starting from an approximate eigenbasis `guess`
/// (unitary). Jacobi converges in few sweeps on the nearly diagonal
/// `guess^dagger M guess`.
pub fn eigh_warm(m: &CMatrix, guess: &CMatrix) -> HermitianEigen {
    let rotated = guess.adjoint().mul(m).mul(guess).hermitian_part();
    let inner = eigh(&rotated);
    HermitianEigen {
        values: inner.values,
        vectors: guess.mul(&inner.vectors),
    }
}

fn connected_blocks(m: &CMatrix, cutoff: f64) -> Vec<Vec<usize>> {
    let n = m.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if m[(i, j)].norm() > cutoff || m[(j, i)].norm() > cutoff {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += a[(i, j)].norm_sqr();
        }
    }
    (2.0 * s).sqrt()
}

fn jacobi(mut a: CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.dim();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let ph = apq.conj() / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s, ph);
                a[(p, p)] = Complex64::new(app - t * r, 0.0);
                a[(q, q)] = Complex64::new(aqq + t * r, 0.0);
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
            }
        }
    }
    (a.diag_real(), v)
}

/// `A <- J^dagger A J`, `V <- V J` with `J = [[c, s], [-s ph, c ph]]` on (p, q).
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, ph: Complex64) {
    let n = a.dim();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * ph * s;
        a[(k, q)] = akp * s + akq * ph * c;
    }
    let phc = ph.conj();
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phc * s;
        a[(q, k)] = apk * s + aqk * phc * c;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * ph * s;
        v[(k, q)] = vkp * s + vkq * ph * c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let m = CMatrix::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        m.hermitian_part()
    }

    #[test]
    fn diag_and_identity() {
        let e = eigh(&CMatrix::from_diag(&[1.0, -1.0]));
        assert_eq!(e.values, vec![-1.0, 1.0]);
        let e = eigh(&CMatrix::identity(5));
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 5, 16, 33] {
            let m = random_hermitian(n, &mut rng);
            let e = eigh(&m);
            assert!(e.reconstruct().max_abs_diff(&m) < 1e-9, "n={n}");
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let u = &e.vectors;
            assert!(u.adjoint().mul(u).max_abs_diff(&CMatrix::identity(n)) < 1e-10);
        }
    }

    #[test]
    fn block_diagonal_input_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(3, &mut rng);
        let b = random_hermitian(4, &mut rng);
        let mut m = CMatrix::zeros(7);
        for i in 0..3 {
            for j in 0..3 {
                m[(2 * i, 2 * j)] = a[(i, j)];
            }
        }
        let odd = [1, 3, 5, 6];
        for i in 0..4 {
            for j in 0..4 {
                m[(odd[i], odd[j])] = b[(i, j)];
            }
        }
        assert_eq!(connected_blocks(&m, 0.0).len(), 2);
        let e = eigh(&m);
        assert!(e.reconstruct().max_abs_diff(&m) < 1e-10);
    }

    #[test]
    fn warm_start_matches_cold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_hermitian(12, &mut rng);
        let cold = eigh(&m);
        let perturbed = m.add(&random_hermitian(12, &mut rng).scale_real(1e-3));
        let warm = eigh_warm(&perturbed, &cold.vectors);
        assert!(warm.reconstruct().max_abs_diff(&perturbed) < 1e-9);
    }

    #[test]
    fn large_blocks_agree_with_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_hermitian(80, &mut rng);
        let fast = eigh(&m);
        let (slow, _) = jacobi(m.clone());
        let mut slow = slow;
        slow.sort_by(f64::total_cmp);
        for (a, b) in fast.values.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(fast.reconstruct().max_abs_diff(&m) < 1e-10);
        let vals = eigvalsh(&m);
        assert!(vals.iter().zip(&fast.values).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn lowest_eigenspace_collects_degenerate_blocks() {
        let m = CMatrix::from_diag(&[2.0, -1.0, 0.5, -1.0, -1.0 + 1e-12]);
        let (low, space) = lowest_eigenspace(&m, 1e-9);
        assert_eq!(low, -1.0);
        assert_eq!(space.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(60, &mut rng);
        let (low, space) = lowest_eigenspace(&h, 1e-9);
        assert_eq!(space.len(), 1);
        assert!((low - eigh(&h).values[0]).abs() < 1e-10);
    }

    #[test]
    fn kron_and_trace_of_product() {
        let x = CMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO });
        let z = CMatrix::from_diag(&[1.0, -1.0]);
        let zx = z.kron(&x);
        assert_eq!(zx[(0, 1)], ONE);
        assert_eq!(zx[(2, 3)], -ONE);
        assert_eq!(zx.trace_of_product(&zx), Complex64::new(4.0, 0.0));
    }
}
