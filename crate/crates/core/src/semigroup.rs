//! State vectors, norms and the semigroup abstraction.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, Eigen, SchurBlocks, C64};
use crate::splitting::HyperbolicSplitting;

/// Tolerances shared by the algebraic checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub algebraic: f64,
    pub grid: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-8,
            grid: 1e-9,
        }
    }
}

/// A finite complex coordinate vector.
#[derive(Clone, PartialEq)]
pub struct Vector(pub CVector);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Self(CVector::zeros(dim))
    }

    pub fn from_complex(coords: Vec<C64>) -> Self {
        Self(CVector::from_vec(coords))
    }

    pub fn from_real(coords: &[f64]) -> Self {
        Self(CVector::from_iterator(coords.len(), coords.iter().map(|&x| c(x, 0.0))))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = c(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[C64] {
        self.0.as_slice()
    }

    /// Hermitian 2-norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self(&self.0 * alpha)
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// `self - other`, erroring on mismatched dimensions.
    pub fn try_sub(&self, other: &Vector) -> Result<Vector> {
        other.check_dim(self.dim())?;
        Ok(Vector(&self.0 - &other.0))
    }

    pub fn try_add(&self, other: &Vector) -> Result<Vector> {
        other.check_dim(self.dim())?;
        Ok(Vector(&self.0 + &other.0))
    }

    /// `[[re, im], ...]` pairs.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.0.iter().map(|z| [z.re, z.im]).collect()
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Self {
        Self::from_complex(pairs.iter().map(|p| c(p[0], p[1])).collect())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        Vector(&self.0 + &rhs.0)
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        Vector(&self.0 - &rhs.0)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        Vector(-&self.0)
    }
}

impl Mul<&Vector> for &CMatrix {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        Vector(self * &rhs.0)
    }
}

impl Serialize for Vector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(Self::from_pairs(&pairs))
    }
}

pub fn norm(x: &Vector) -> f64 {
    x.norm()
}

/// `max(|P_M x|, |P_N x|)`, the norm adapted to a splitting.
pub fn coupled_norm(x: &Vector, split: &HyperbolicSplitting) -> Result<f64> {
    x.check_dim(split.dim())?;
    let m = &split.p_m * x;
    let n = &split.p_n * x;
    Ok(m.norm().max(n.norm()))
}

/// Snaps `t` to the grid `step`, rejecting negative or off-grid times.
pub fn grid_steps(t: f64, step: f64, tol: f64) -> Result<u64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let k = (t / step).round();
    if ((t / step) - k).abs() > tol {
        return Err(Error::OffGrid { time: t, step });
    }
    Ok(k as u64)
}

/// A family `t -> T(t)` of bounded linear maps with `T(0) = I` and
/// `T(s + t) = T(s) T(t)`.
pub trait Semigroup: Send + Sync {
    fn dim(&self) -> usize;

    /// Grid step when the semigroup is only defined at multiples of it.
    fn time_grid(&self) -> Option<f64> {
        None
    }

    fn generator(&self) -> Option<&CMatrix> {
        None
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances::default()
    }

    /// Matrix of `T(t)`.
    fn map_matrix(&self, t: f64) -> Result<CMatrix>;

    /// Matrix of `T(t)^{-1}`.
    fn inverse_matrix(&self, _t: f64) -> Result<CMatrix> {
        Err(Error::NotInvertible)
    }

    fn has_inverse(&self) -> bool {
        false
    }

    fn apply(&self, t: f64, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        Ok(&self.map_matrix(t)? * x)
    }

    fn apply_inverse(&self, t: f64, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        Ok(&self.inverse_matrix(t)? * x)
    }

    /// Rejects negative times and, for gridded semigroups, off-grid times.
    fn check_time(&self, t: f64) -> Result<()> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::NegativeTime(t));
        }
        if let Some(h) = self.time_grid() {
            grid_steps(t, h, self.tolerances().grid)?;
        }
        Ok(())
    }
}

pub fn semigroup_apply(semigroup: &dyn Semigroup, t: f64, x: &Vector) -> Result<Vector> {
    semigroup.apply(t, x)
}

/// Spectral norm of the explicit `T(t)` matrix.
pub fn operator_norm_estimate(semigroup: &dyn Semigroup, t: f64) -> Result<f64> {
    Ok(linalg::sigma_max(&semigroup.map_matrix(t)?))
}

/// Spectral norm of `T(t)^{-1}`.
pub fn inverse_norm_estimate(semigroup: &dyn Semigroup, t: f64) -> Result<f64> {
    Ok(linalg::sigma_max(&semigroup.inverse_matrix(t)?))
}

#[derive(Debug, Clone)]
enum ExpRoute {
    Eigen(Eigen),
    Schur(SchurBlocks),
}

/// `T(t) = e^{tA}` for a dense complex generator.
#[derive(Debug, Clone)]
pub struct MatrixSemigroup {
    generator: CMatrix,
    route: ExpRoute,
    tolerances: Tolerances,
}

/// Eigenvector matrices worse conditioned than this use the Schur route.
pub const EIGEN_CONDITION_LIMIT: f64 = 1e8;

impl MatrixSemigroup {
    pub fn new(generator: CMatrix) -> Result<Self> {
        if generator.nrows() != generator.ncols() || generator.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: generator.nrows(),
                got: generator.ncols(),
            });
        }
        let eig = Eigen::new(&generator)?;
        let route = if eig.condition < EIGEN_CONDITION_LIMIT {
            ExpRoute::Eigen(eig)
        } else {
            ExpRoute::Schur(SchurBlocks::new(&generator)?)
        };
        Ok(Self {
            generator,
            route,
            tolerances: Tolerances::default(),
        })
    }

    pub fn from_real(rows: usize, data: &[f64]) -> Result<Self> {
        Self::new(linalg::real_matrix(rows, rows, data))
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.generator
    }

    pub fn uses_eigen_route(&self) -> bool {
        matches!(self.route, ExpRoute::Eigen(_))
    }

    /// `e^{tA}` for any real `t` (negative gives the inverse).
    pub fn exp(&self, t: f64) -> CMatrix {
        match &self.route {
            ExpRoute::Eigen(e) => e.apply_fn(|mu| (mu * t).exp()),
            ExpRoute::Schur(s) => s.exp(t),
        }
    }
}

impl Semigroup for MatrixSemigroup {
    fn dim(&self) -> usize {
        self.generator.nrows()
    }

    fn generator(&self) -> Option<&CMatrix> {
        Some(&self.generator)
    }

    fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    fn map_matrix(&self, t: f64) -> Result<CMatrix> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(CMatrix::identity(self.dim(), self.dim()));
        }
        Ok(self.exp(t))
    }

    fn inverse_matrix(&self, t: f64) -> Result<CMatrix> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(CMatrix::identity(self.dim(), self.dim()));
        }
        Ok(self.exp(-t))
    }

    fn has_inverse(&self) -> bool {
        true
    }
}
