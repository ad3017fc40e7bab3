//! Dense complex linear algebra used by the semigroup and splitting code.
//!
//! nalgebra provides the complex Schur form, SVD and LU/QR factorizations.
//! Everything built on top of them (triangular eigenvectors, Schur
//! reordering, the block Schur–Parlett exponential and the matrix sign
//! iteration) lives here.

use std::ops::Range;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues closer than this are grouped into one Schur–Parlett block.
const CLUSTER_SEPARATION: f64 = 0.1;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Embeds a row-major real matrix.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| c(x, 0.0)))
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    diag(&values.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>())
}

/// Complex Schur form `a = q t q^*` with `t` upper triangular.
pub fn schur(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigFailure("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    if a.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok((CMatrix::identity(n, n), a.clone()));
    }
    let s = Schur::try_new(a.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::EigFailure("Schur iteration did not converge".into()))?;
    let (q, mut t) = s.unpack();
    if q.iter().chain(t.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigFailure("Schur factors are not finite".into()));
    }
    // The QR sweep leaves roundoff below the diagonal; the routines here
    // assume exact triangularity.
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    let (_, t) = schur(a)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Spectral norm (largest singular value).
pub fn sigma_max(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

pub fn sigma_min(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(f64::INFINITY, f64::min)
}

/// 2-norm condition number; infinite for numerically singular input.
pub fn condition_number(a: &CMatrix) -> f64 {
    let s = singular_values(a);
    let hi = s.iter().copied().fold(0.0, f64::max);
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::EigFailure("matrix is singular".into()))
}

/// Diagonalization `a = v diag(values) v^{-1}` built from the Schur form.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
    /// Condition number of `vectors` (columns normalized).
    pub condition: f64,
}

impl Eigen {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let (q, t) = schur(a)?;
        let n = t.nrows();
        let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-100);
        let small = f64::EPSILON * scale;
        let mut y = CMatrix::zeros(n, n);
        for k in 0..n {
            let lambda = t[(k, k)];
            y[(k, k)] = c(1.0, 0.0);
            for j in (0..k).rev() {
                let mut acc = c(0.0, 0.0);
                for l in (j + 1)..=k {
                    acc += t[(j, l)] * y[(l, k)];
                }
                let mut denom = t[(j, j)] - lambda;
                if denom.norm() < small {
                    denom = c(small, 0.0);
                }
                y[(j, k)] = -acc / denom;
            }
        }
        let mut vectors = q * y;
        for mut col in vectors.column_iter_mut() {
            let nrm = col.norm();
            if nrm > 0.0 && nrm.is_finite() {
                col /= c(nrm, 0.0);
            }
        }
        let condition = condition_number(&vectors);
        let inverse = if condition.is_finite() {
            vectors.clone().try_inverse().unwrap_or_else(|| CMatrix::zeros(n, n))
        } else {
            CMatrix::zeros(n, n)
        };
        let values = (0..n).map(|i| t[(i, i)]).collect();
        Ok(Self {
            values,
            vectors,
            inverse,
            condition,
        })
    }

    /// `v f(diag) v^{-1}`
    pub fn apply_fn(&self, f: impl Fn(C64) -> C64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        scaled * &self.inverse
    }
}

/// Swaps the diagonal entries `k` and `k + 1` of the triangular factor with a
/// unitary rotation, updating `q` so that `q t q^*` is unchanged.
pub fn swap_schur(q: &mut CMatrix, t: &mut CMatrix, k: usize) {
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let off = t[(k, k + 1)];
    // eigenvector of the 2x2 block for eigenvalue b
    let v0 = off;
    let v1 = b - a;
    let nrm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if nrm == 0.0 {
        return;
    }
    let (g0, g1) = (v0 / nrm, v1 / nrm);
    // G = [[g0, -conj(g1)], [g1, conj(g0)]], unitary with first column v/|v|
    let n = t.nrows();
    // t <- G^* t G
    for j in 0..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = g0.conj() * x + g1.conj() * y;
        t[(k + 1, j)] = -g1 * x + g0 * y;
    }
    for i in 0..n {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * g0 + y * g1;
        t[(i, k + 1)] = -x * g1.conj() + y * g0.conj();
    }
    for i in 0..n {
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * g0 + y * g1;
        q[(i, k + 1)] = -x * g1.conj() + y * g0.conj();
    }
    t[(k + 1, k)] = c(0.0, 0.0);
    t[(k, k)] = b;
    t[(k + 1, k + 1)] = a;
}

/// Groups eigenvalues into clusters (transitive closure of |λi - λj| <= sep).
fn cluster_labels(values: &[C64], sep: f64) -> Vec<usize> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        let mut j = i;
        while label[j] != r {
            let next = label[j];
            label[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= sep {
                let (ri, rj) = (find(&mut label, i), find(&mut label, j));
                if ri != rj {
                    label[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    (0..n).map(|i| find(&mut label, i)).collect()
}

/// Reordered Schur form with contiguous eigenvalue clusters, ready for the
/// block Parlett recurrence.
#[derive(Debug, Clone)]
pub struct SchurBlocks {
    pub q: CMatrix,
    pub t: CMatrix,
    pub blocks: Vec<Range<usize>>,
}

impl SchurBlocks {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let (mut q, mut t) = schur(a)?;
        let n = t.nrows();
        let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
        let labels = cluster_labels(&values, CLUSTER_SEPARATION);
        // Order of clusters: first appearance along the diagonal.
        let mut order: Vec<usize> = Vec::new();
        for &l in &labels {
            if !order.contains(&l) {
                order.push(l);
            }
        }
        let rank: Vec<usize> = labels
            .iter()
            .map(|l| order.iter().position(|o| o == l).unwrap())
            .collect();
        // Bubble sort the diagonal by cluster rank with adjacent swaps.
        let mut keys = rank;
        for pass in 0..n {
            let mut swapped = false;
            for k in 0..n.saturating_sub(1 + pass) {
                if keys[k] > keys[k + 1] {
                    swap_schur(&mut q, &mut t, k);
                    keys.swap(k, k + 1);
                    swapped = true;
                }
            }
            if !swapped {
                break;
            }
        }
        let mut blocks = Vec::new();
        let mut start = 0;
        for k in 1..=n {
            if k == n || keys[k] != keys[start] {
                blocks.push(start..k);
                start = k;
            }
        }
        Ok(Self { q, t, blocks })
    }

    /// Triangular factor of `exp(time * t)` by the block Parlett recurrence.
    pub fn exp_triangular(&self, time: f64) -> CMatrix {
        let n = self.t.nrows();
        let tt = &self.t * c(time, 0.0);
        let mut f = CMatrix::zeros(n, n);
        for b in &self.blocks {
            let len = b.len();
            let blk = tt.view((b.start, b.start), (len, len)).clone_owned();
            f.view_mut((b.start, b.start), (len, len)).copy_from(&blk.exp());
        }
        let nb = self.blocks.len();
        for d in 1..nb {
            for bi in 0..(nb - d) {
                let bj = bi + d;
                let (ri, rj) = (self.blocks[bi].clone(), self.blocks[bj].clone());
                let sub = |m: &CMatrix, r: &Range<usize>, s: &Range<usize>| {
                    m.view((r.start, s.start), (r.len(), s.len())).clone_owned()
                };
                let tii = sub(&tt, &ri, &ri);
                let tjj = sub(&tt, &rj, &rj);
                let tij = sub(&tt, &ri, &rj);
                let fii = sub(&f, &ri, &ri);
                let fjj = sub(&f, &rj, &rj);
                let mut rhs = &fii * &tij - &tij * &fjj;
                for bk in (bi + 1)..bj {
                    let rk = self.blocks[bk].clone();
                    rhs += sub(&f, &ri, &rk) * sub(&tt, &rk, &rj)
                        - sub(&tt, &ri, &rk) * sub(&f, &rk, &rj);
                }
                let x = solve_triangular_sylvester(&tii, &tjj, &rhs);
                f.view_mut((ri.start, rj.start), (ri.len(), rj.len())).copy_from(&x);
            }
        }
        f
    }

    pub fn exp(&self, time: f64) -> CMatrix {
        &self.q * self.exp_triangular(time) * self.q.adjoint()
    }
}

/// Solves `a x - x b = rhs` for upper triangular `a`, `b` with disjoint spectra.
pub fn solve_triangular_sylvester(a: &CMatrix, b: &CMatrix, rhs: &CMatrix) -> CMatrix {
    let (p, q) = (a.nrows(), b.nrows());
    let mut x = CMatrix::zeros(p, q);
    for col in 0..q {
        let mut r: Vec<C64> = (0..p).map(|i| rhs[(i, col)]).collect();
        for l in 0..col {
            for (i, ri) in r.iter_mut().enumerate() {
                *ri += x[(i, l)] * b[(l, col)];
            }
        }
        let shift = b[(col, col)];
        for i in (0..p).rev() {
            let mut acc = r[i];
            for k in (i + 1)..p {
                acc -= a[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = acc / (a[(i, i)] - shift);
        }
    }
    x
}

/// Matrix sign function by the scaled Newton iteration. Requires no
/// eigenvalues on the imaginary axis.
pub fn sign_function(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    let mut s = a.clone();
    for _ in 0..100 {
        let inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::EigFailure("sign iteration hit a singular iterate".into()))?;
        let det = s.determinant().norm();
        let mu = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / n as f64)
        } else {
            1.0
        };
        let next = (&s * c(mu, 0.0) + inv * c(1.0 / mu, 0.0)) * c(0.5, 0.0);
        let diff = (&next - &s).norm();
        let size = next.norm();
        s = next;
        if diff <= 1e-14 * size {
            // one more unscaled step polishes the result
            let inv = s.clone().try_inverse().unwrap_or_else(|| s.clone());
            return Ok((&s + inv) * c(0.5, 0.0));
        }
    }
    Err(Error::EigFailure("sign iteration did not converge".into()))
}

/// Largest absolute entry difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schur_exp_matches_pade_on_jordan_block() {
        let a = real_matrix(3, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 2.0]);
        let sb = SchurBlocks::new(&a).unwrap();
        for &t in &[0.0, 0.3, 1.0, 4.0] {
            let lhs = sb.exp(t);
            let rhs = (&a * c(t, 0.0)).exp();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-10 * (1.0 + rhs.norm()), "t={t}");
        }
    }

    #[test]
    fn reordering_keeps_similarity() {
        let a = real_matrix(
            4,
            4,
            &[1.0, 2.0, 0.5, 0.0, 0.0, 3.0, 1.0, 0.2, 0.0, 0.0, 1.05, 1.0, 0.0, 0.0, 0.0, 3.02],
        );
        let sb = SchurBlocks::new(&a).unwrap();
        let back = &sb.q * &sb.t * sb.q.adjoint();
        assert!(max_abs_diff(&back, &a) < 1e-12);
        assert_eq!(sb.blocks.len(), 2);
    }

    #[test]
    fn eigen_of_defective_is_ill_conditioned() {
        let a = real_matrix(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        assert!(Eigen::new(&a).unwrap().condition > 1e8);
    }

    #[test]
    fn sign_of_saddle() {
        let a = real_matrix(2, 2, &[-1.0, 5.0, 0.0, 2.0]);
        let s = sign_function(&a).unwrap();
        let s2 = &s * &s;
        assert!(max_abs_diff(&s2, &CMatrix::identity(2, 2)) < 1e-12);
        assert!((s.trace().re - 0.0).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_diag() {
        let a = real_diag(&[3.0, -4.0]);
        assert!((sigma_max(&a) - 4.0).abs() < 1e-14);
        assert!((sigma_min(&a) - 3.0).abs() < 1e-14);
    }
}
