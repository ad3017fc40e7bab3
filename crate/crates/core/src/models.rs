//! Example systems: discretized heat flow, damped transport on a ring, planar
//! rotation and a weighted shift that is generalized hyperbolic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::semigroup::{grid_steps, MatrixSemigroup, Semigroup, Tolerances, Vector};

/// `T(t)x = e^{rate t} x` on a single coordinate.
pub fn make_scalar(rate: f64) -> MatrixSemigroup {
    MatrixSemigroup::new(linalg::real_diag(&[rate])).expect("1x1 generator")
}

/// Dirichlet Laplacian on `(0, length)` with `n` interior nodes.
#[derive(Debug, Clone)]
pub struct HeatModel {
    pub n_interior: usize,
    pub length: f64,
    pub semigroup: MatrixSemigroup,
    /// Smallest eigenvalue of `-A`; the model contracts with `K = 1` at this rate.
    pub decay_rate: f64,
}

impl HeatModel {
    pub fn step(&self) -> f64 {
        self.length / (self.n_interior + 1) as f64
    }
}

pub fn heat_generator(n: usize, length: f64) -> CMatrix {
    let h = length / (n + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let mut a = CMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = c(-2.0 * inv_h2, 0.0);
        if i + 1 < n {
            a[(i, i + 1)] = c(inv_h2, 0.0);
            a[(i + 1, i)] = c(inv_h2, 0.0);
        }
    }
    a
}

pub fn make_heat(n: usize, length: f64) -> Result<HeatModel> {
    if n == 0 {
        return Err(Error::InvalidParameter("heat model needs n >= 1".into()));
    }
    if !(length > 0.0) {
        return Err(Error::InvalidParameter("domain length must be positive".into()));
    }
    let a = heat_generator(n, length);
    let decay_rate = linalg::eigenvalues(&a)?
        .iter()
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min);
    Ok(HeatModel {
        n_interior: n,
        length,
        semigroup: MatrixSemigroup::new(a)?,
        decay_rate,
    })
}

/// `(T(t)u)_j = e^{-t theta} u_{(j+k) mod n}` for `t = k h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportModel {
    pub theta: f64,
    pub n: usize,
    pub h: f64,
}

pub fn make_transport(theta: f64, n: usize, h: f64) -> Result<TransportModel> {
    if theta == 0.0 {
        return Err(Error::ZeroTheta);
    }
    if n < 2 {
        return Err(Error::InvalidParameter("transport ring needs n >= 2".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    Ok(TransportModel { theta, n, h })
}

impl TransportModel {
    fn shift(&self, k: i64, scale: f64) -> CMatrix {
        let n = self.n as i64;
        let mut m = CMatrix::zeros(self.n, self.n);
        for j in 0..n {
            let src = (j + k).rem_euclid(n) as usize;
            m[(j as usize, src)] = c(scale, 0.0);
        }
        m
    }
}

impl Semigroup for TransportModel {
    fn dim(&self) -> usize {
        self.n
    }

    fn time_grid(&self) -> Option<f64> {
        Some(self.h)
    }

    fn map_matrix(&self, t: f64) -> Result<CMatrix> {
        let k = grid_steps(t, self.h, self.tolerances().grid)?;
        let t = k as f64 * self.h;
        Ok(self.shift(k as i64, (-t * self.theta).exp()))
    }

    fn inverse_matrix(&self, t: f64) -> Result<CMatrix> {
        let k = grid_steps(t, self.h, self.tolerances().grid)?;
        let t = k as f64 * self.h;
        Ok(self.shift(-(k as i64), (t * self.theta).exp()))
    }

    fn has_inverse(&self) -> bool {
        true
    }

    fn apply(&self, t: f64, x: &Vector) -> Result<Vector> {
        x.check_dim(self.n)?;
        let k = grid_steps(t, self.h, self.tolerances().grid)? as usize;
        let scale = (-(k as f64 * self.h) * self.theta).exp();
        let coords = (0..self.n).map(|j| x.0[(j + k) % self.n] * scale).collect();
        Ok(Vector::from_complex(coords))
    }

    fn apply_inverse(&self, t: f64, x: &Vector) -> Result<Vector> {
        x.check_dim(self.n)?;
        let k = grid_steps(t, self.h, self.tolerances().grid)? as usize;
        let scale = ((k as f64 * self.h) * self.theta).exp();
        let n = self.n;
        let coords = (0..n).map(|j| x.0[(j + n - k % n) % n] * scale).collect();
        Ok(Vector::from_complex(coords))
    }
}

/// Multiplication by `e^{i theta t}` written as a real 2x2 flow.
pub fn make_rotation(theta: f64) -> Result<MatrixSemigroup> {
    if theta == 0.0 {
        return Err(Error::ZeroTheta);
    }
    MatrixSemigroup::from_real(2, &[0.0, -theta, theta, 0.0])
}

/// Weight profile of the shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightConvention {
    /// `w(x) = e^{|x|}`
    ExpAbs,
    /// `w(x) = e^{-|x|}`
    ExpNegAbs,
}

impl WeightConvention {
    fn sign(self) -> f64 {
        match self {
            Self::ExpAbs => 1.0,
            Self::ExpNegAbs => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Self::ExpAbs => Self::ExpNegAbs,
            Self::ExpNegAbs => Self::ExpAbs,
        }
    }
}

/// Weighted shift `(Tu)_j = (w_j / w_{j+1}) u_{j+1}` on the window
/// `j = -m..=m` with zero boundary. `M` is `j < 0`, `N` is `j >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhShiftModel {
    pub m: usize,
    pub h: f64,
    pub convention: WeightConvention,
    /// Set once [`verify_gh_convention`] has confirmed the convention.
    pub convention_verified: bool,
}

/// Cells from the window edge that count as "exited".
pub const WINDOW_GUARD: usize = 2;

pub fn make_gh_shift(m: usize, h: f64, convention: WeightConvention) -> Result<GhShiftModel> {
    if m < 4 {
        return Err(Error::WindowTooSmall(m));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    Ok(GhShiftModel {
        m,
        h,
        convention,
        convention_verified: false,
    })
}

impl GhShiftModel {
    pub fn index(&self, j: i64) -> usize {
        (j + self.m as i64) as usize
    }

    pub fn position(&self, idx: usize) -> i64 {
        idx as i64 - self.m as i64
    }

    /// `w_a / w_b` evaluated as a single exponential.
    fn weight_ratio(&self, a: i64, b: i64) -> f64 {
        (self.convention.sign() * (a.abs() - b.abs()) as f64 * self.h).exp()
    }

    pub fn m_indices(&self) -> Vec<usize> {
        (0..self.m).collect()
    }

    pub fn n_indices(&self) -> Vec<usize> {
        (self.m..=2 * self.m).collect()
    }

    pub fn project_m(&self, u: &Vector) -> Vector {
        let mut out = u.clone();
        for idx in self.n_indices() {
            out.0[idx] = c(0.0, 0.0);
        }
        out
    }

    pub fn project_n(&self, u: &Vector) -> Vector {
        let mut out = u.clone();
        for idx in self.m_indices() {
            out.0[idx] = c(0.0, 0.0);
        }
        out
    }

    /// Norm carried by the cells within [`WINDOW_GUARD`] of either edge.
    pub fn edge_mass(&self, u: &Vector) -> f64 {
        let d = self.dim();
        (0..d)
            .filter(|&i| i < WINDOW_GUARD || i + WINDOW_GUARD >= d)
            .map(|i| u.0[i].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn touches_edge(&self, u: &Vector) -> bool {
        self.edge_mass(u) > 0.0
    }

    /// Support indices (as window positions) of `u`.
    pub fn support(&self, u: &Vector) -> Vec<i64> {
        (0..self.dim())
            .filter(|&i| u.0[i].norm() > 0.0)
            .map(|i| self.position(i))
            .collect()
    }

    /// Time-`h` map closed into a cycle (`u_{m+1} := u_{-m}`). The wrap
    /// weight is `w_m / w_{-m} = 1`, so the product of weights around the
    /// cycle is one.
    pub fn ring_closure_step(&self) -> CMatrix {
        let mut t = self.map_matrix(self.h).expect("on-grid");
        let last = self.index(self.m as i64);
        t[(last, 0)] = c(1.0, 0.0);
        t
    }
}

impl Semigroup for GhShiftModel {
    fn dim(&self) -> usize {
        2 * self.m + 1
    }

    fn time_grid(&self) -> Option<f64> {
        Some(self.h)
    }

    fn map_matrix(&self, t: f64) -> Result<CMatrix> {
        let k = grid_steps(t, self.h, self.tolerances().grid)? as i64;
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        let m = self.m as i64;
        for j in -m..=m {
            if j + k <= m {
                out[(self.index(j), self.index(j + k))] = c(self.weight_ratio(j, j + k), 0.0);
            }
        }
        Ok(out)
    }

    /// Backward shift; exact on vectors whose support stays inside the window.
    fn inverse_matrix(&self, t: f64) -> Result<CMatrix> {
        let k = grid_steps(t, self.h, self.tolerances().grid)? as i64;
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        let m = self.m as i64;
        for j in -m..=m {
            if j - k >= -m {
                out[(self.index(j), self.index(j - k))] = c(self.weight_ratio(j, j - k), 0.0);
            }
        }
        Ok(out)
    }

    fn has_inverse(&self) -> bool {
        true
    }

    fn apply(&self, t: f64, u: &Vector) -> Result<Vector> {
        u.check_dim(self.dim())?;
        let k = grid_steps(t, self.h, self.tolerances().grid)? as i64;
        let m = self.m as i64;
        let mut out = Vector::zeros(self.dim());
        for j in -m..=(m - k) {
            out.0[self.index(j)] = u.0[self.index(j + k)] * self.weight_ratio(j, j + k);
        }
        Ok(out)
    }

    fn apply_inverse(&self, t: f64, u: &Vector) -> Result<Vector> {
        u.check_dim(self.dim())?;
        let k = grid_steps(t, self.h, self.tolerances().grid)? as i64;
        let m = self.m as i64;
        let mut out = Vector::zeros(self.dim());
        for j in (k - m)..=m {
            out.0[self.index(j)] = u.0[self.index(j - k)] * self.weight_ratio(j, j - k);
        }
        Ok(out)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances::default()
    }
}

/// Worst deviation from the decay identities on interior basis vectors:
/// `|T(h)e_j| = e^{-h}` for `j in M` and `|T(h)^{-1}e_j| = e^{-h}` for `j in N`.
pub fn gh_identity_defect(model: &GhShiftModel) -> f64 {
    let target = (-model.h).exp();
    let m = model.m as i64;
    let d = model.dim();
    let forward = (-m + 1..=-1).map(|j| {
        let u = Vector::basis(d, model.index(j));
        (model.apply(model.h, &u).expect("on-grid").norm() - target).abs()
    });
    let backward = (0..=m - 1).map(|j| {
        let u = Vector::basis(d, model.index(j));
        (model.apply_inverse(model.h, &u).expect("on-grid").norm() - target).abs()
    });
    forward.chain(backward).fold(0.0, f64::max)
}

/// Identities are accepted when they hold to this absolute tolerance.
pub const GH_IDENTITY_TOL: f64 = 1e-12;

/// Tries both weight conventions and keeps the one that realizes the decay
/// identities, recording it in the model.
pub fn verify_gh_convention(model: &mut GhShiftModel) -> Result<WeightConvention> {
    let holds = |conv: WeightConvention| {
        let probe = GhShiftModel {
            convention: conv,
            ..*model
        };
        gh_identity_defect(&probe) <= GH_IDENTITY_TOL
    };
    let a = holds(WeightConvention::ExpAbs);
    let b = holds(WeightConvention::ExpNegAbs);
    let chosen = match (a, b) {
        (true, false) => WeightConvention::ExpAbs,
        (false, true) => WeightConvention::ExpNegAbs,
        _ => return Err(Error::NeitherConventionHolds),
    };
    model.convention = chosen;
    model.convention_verified = true;
    Ok(chosen)
}

/// Largest violation of `|T(kh)u| <= e^{-kh}|u|` (M) and
/// `|T(kh)^{-1}u| <= e^{-kh}|u|` (N) over interior basis vectors and all step
/// counts that keep the support inside the window.
pub fn gh_inequality_violation(model: &GhShiftModel) -> f64 {
    let m = model.m as i64;
    let d = model.dim();
    let mut worst: f64 = 0.0;
    for j in -m + 1..=-1 {
        let u = Vector::basis(d, model.index(j));
        for k in 1..=(j + m) {
            let t = k as f64 * model.h;
            let v = model.apply(t, &u).expect("on-grid").norm();
            worst = worst.max(v - (-t).exp());
        }
    }
    for j in 0..=m - 1 {
        let u = Vector::basis(d, model.index(j));
        for k in 1..=(m - j) {
            let t = k as f64 * model.h;
            let v = model.apply_inverse(t, &u).expect("on-grid").norm();
            worst = worst.max(v - (-t).exp());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::operator_norm_estimate;
    use std::f64::consts::PI;

    #[test]
    fn heat_single_node() {
        let heat = make_heat(1, PI).unwrap();
        let a = heat.semigroup.matrix();
        assert!((a[(0, 0)].re + 2.0 / (PI / 2.0).powi(2)).abs() < 1e-12);
        assert!((heat.decay_rate - 0.810_569_469_138_7).abs() < 1e-9);
    }

    #[test]
    fn heat_three_nodes_closed_form() {
        let heat = make_heat(3, PI).unwrap();
        let h = PI / 4.0;
        let mut eig: Vec<f64> = linalg::eigenvalues(heat.semigroup.matrix())
            .unwrap()
            .iter()
            .map(|z| -z.re)
            .collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, e) in eig.iter().enumerate() {
            let closed = 2.0 / (h * h) * (1.0 - ((k + 1) as f64 * PI / 4.0).cos());
            assert!((e - closed).abs() < 1e-10);
        }
        assert!((eig[0] - 0.94964).abs() < 1e-5);
        assert!((eig[1] - 3.24228).abs() < 1e-5);
        assert!((eig[2] - 5.53491).abs() < 1e-5);
    }

    #[test]
    fn heat_first_mode_has_one_sign() {
        let heat = make_heat(9, PI).unwrap();
        let eig = linalg::Eigen::new(heat.semigroup.matrix()).unwrap();
        let k = (0..9)
            .max_by(|&a, &b| eig.values[a].re.partial_cmp(&eig.values[b].re).unwrap())
            .unwrap();
        let v = eig.vectors.column(k).into_owned();
        let av = heat.semigroup.matrix() * &v;
        let pivot = v.iter().max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap()).unwrap();
        let phase = pivot / pivot.norm();
        let signs: Vec<f64> = av.iter().map(|z| (z / phase).re).collect();
        assert!(signs.iter().all(|&s| s < 0.0) || signs.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn heat_rejects_bad_params() {
        assert!(make_heat(0, PI).is_err());
        assert!(make_heat(3, 0.0).is_err());
    }

    #[test]
    fn transport_two_step_shift() {
        let tr = make_transport(1.0, 8, 0.25).unwrap();
        let y = tr.apply(0.5, &Vector::basis(8, 0)).unwrap();
        let expected = Vector::basis(8, 6).scale(c((-0.5f64).exp(), 0.0));
        assert!((&y - &expected).norm() < 1e-15);
        assert!((y.norm() - 0.60653).abs() < 1e-5);
        assert!((operator_norm_estimate(&tr, 0.5).unwrap() - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn transport_expanding_inverse_norm() {
        let tr = make_transport(-1.0, 8, 0.25).unwrap();
        let inv = linalg::sigma_max(&tr.inverse_matrix(1.0).unwrap());
        assert!((inv - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn transport_identity_and_errors() {
        let tr = make_transport(1.0, 8, 0.25).unwrap();
        let x = Vector::from_real(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(tr.apply(0.0, &x).unwrap(), x);
        assert!(matches!(tr.apply(0.3, &x), Err(Error::OffGrid { .. })));
        assert_eq!(make_transport(0.0, 8, 0.25), Err(Error::ZeroTheta));
        let back = tr.apply_inverse(1.75, &tr.apply(1.75, &x).unwrap()).unwrap();
        assert!((&back - &x).norm() < 1e-12);
    }

    #[test]
    fn rotation_period_and_spectrum() {
        let rot = make_rotation(1.0).unwrap();
        let y = rot.apply(2.0 * PI, &Vector::from_real(&[1.0, 0.0])).unwrap();
        assert!((&y - &Vector::from_real(&[1.0, 0.0])).norm() < 1e-12);
        for z in linalg::eigenvalues(&rot.map_matrix(1.0).unwrap()).unwrap() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            assert!((z.im.abs() - 1.0f64.sin()).abs() < 1e-12);
        }
        assert_eq!(make_rotation(0.0).unwrap_err(), Error::ZeroTheta);
    }

    #[test]
    fn gh_window_guard() {
        assert_eq!(
            make_gh_shift(3, 0.5, WeightConvention::ExpNegAbs),
            Err(Error::WindowTooSmall(3))
        );
        assert!(make_gh_shift(4, 0.0, WeightConvention::ExpNegAbs).is_err());
    }

    #[test]
    fn gh_convention_resolution() {
        let mut model = make_gh_shift(16, 0.5, WeightConvention::ExpAbs).unwrap();
        let conv = verify_gh_convention(&mut model).unwrap();
        assert_eq!(conv, WeightConvention::ExpNegAbs);
        assert!(model.convention_verified);
        // exactly one formula gives the e^{-h} ratio on e_{-4}
        let d = model.dim();
        let u = Vector::basis(d, model.index(-4));
        let ratios: Vec<f64> = [WeightConvention::ExpAbs, WeightConvention::ExpNegAbs]
            .iter()
            .map(|&cv| {
                let probe = GhShiftModel { convention: cv, ..model };
                probe.apply(0.5, &u).unwrap().norm()
            })
            .collect();
        assert!((ratios[0] - 0.5f64.exp()).abs() < 1e-12);
        assert!((ratios[1] - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn gh_interior_decay() {
        let mut model = make_gh_shift(16, 0.5, WeightConvention::ExpNegAbs).unwrap();
        verify_gh_convention(&mut model).unwrap();
        let d = model.dim();
        let u = Vector::basis(d, model.index(4));
        let back = model.apply_inverse(0.5, &u).unwrap();
        assert!((back.norm() - (-0.5f64).exp()).abs() < 1e-12);
        assert!(gh_identity_defect(&model) < 1e-12);
        assert!(gh_inequality_violation(&model) <= 1e-12);
    }

    #[test]
    fn gh_point_in_n_drifts_into_m_and_decays() {
        let model = make_gh_shift(32, 0.5, WeightConvention::ExpNegAbs).unwrap();
        let d = model.dim();
        let u = Vector::basis(d, model.index(2));
        let late = model.apply(12.0, &u).unwrap();
        assert!(model.support(&late).iter().all(|&j| j < 0));
        assert!(late.norm() < model.apply(6.0, &u).unwrap().norm());
        assert!(late.norm() < 1e-2);
        let back = model.apply_inverse(12.0, &u).unwrap();
        assert!(back.norm() < 1e-2);
    }

    #[test]
    fn gh_forward_invariance_of_m() {
        let model = make_gh_shift(8, 0.25, WeightConvention::ExpNegAbs).unwrap();
        let d = model.dim();
        let mut u = Vector::zeros(d);
        for idx in model.m_indices() {
            u.0[idx] = c(1.0 + idx as f64, -0.5);
        }
        for k in 1..10 {
            let v = model.apply(k as f64 * 0.25, &u).unwrap();
            assert!(model.support(&v).iter().all(|&j| j < 0));
        }
    }

    #[test]
    fn ring_closure_is_periodic() {
        let model = make_gh_shift(4, 0.5, WeightConvention::ExpNegAbs).unwrap();
        let step = model.ring_closure_step();
        let mut p = CMatrix::identity(9, 9);
        for _ in 0..9 {
            p = &step * p;
        }
        assert!(linalg::max_abs_diff(&p, &CMatrix::identity(9, 9)) < 1e-12);
    }
}
