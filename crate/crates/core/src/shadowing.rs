//! Shadow-point construction and verification.
//!
//! * stable case: the contraction on sequence space has the orbit of `x_0`
//!   as its fixed point;
//! * inverse-contracting case: `x = x_0 + Σ_k T(t̂_k)^{-1} h_{k-1}`;
//! * hyperbolic case: both, one per half of the splitting.
//!
//! Shadow orbits are evaluated from anchors. The forward-stable part is
//! pushed forward from `t = 0`; the inverse-contracting part is pulled back
//! from the last orbit point at `t̂_n`. Both evaluations only ever contract,
//! which keeps long horizons free of exponential round-off growth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Eigen, C64};
use crate::pseudo_orbit::{evaluate_star, validate, PseudoOrbit};
use crate::semigroup::{coupled_norm, grid_steps, MatrixSemigroup, Semigroup, Vector, EIGEN_CONDITION_LIMIT};
use crate::splitting::HyperbolicSplitting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateDirection {
    /// `|T(t)| <= K e^{-λt}`
    ForwardContraction,
    /// `|T(t)^{-1}| <= K e^{-λt}`
    InverseContraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub k: f64,
    pub lambda: f64,
    pub direction: RateDirection,
}

impl RateBound {
    /// Estimates below one are rescaled to one.
    pub fn new(k: f64, lambda: f64, direction: RateDirection) -> Result<Self> {
        if !(lambda > 0.0) || !(k > 0.0) {
            return Err(Error::InvalidParameter("rate bound needs K > 0 and λ > 0".into()));
        }
        Ok(Self {
            k: k.max(1.0),
            lambda,
            direction,
        })
    }

    /// Sampled check of the bound on `[0, horizon]` (default `50/λ`).
    pub fn certify(&self, semigroup: &dyn Semigroup, samples: usize, horizon: Option<f64>) -> Result<f64> {
        let horizon = horizon.unwrap_or(50.0 / self.lambda);
        let grid = semigroup.time_grid();
        let mut worst: f64 = f64::NEG_INFINITY;
        for k in 0..=samples {
            let mut t = horizon * k as f64 / samples as f64;
            if let Some(h) = grid {
                t = (t / h).round() * h;
            }
            let norm = match self.direction {
                RateDirection::ForwardContraction => linalg::sigma_max(&semigroup.map_matrix(t)?),
                RateDirection::InverseContraction => linalg::sigma_max(&semigroup.inverse_matrix(t)?),
            };
            let bound = self.k * (-self.lambda * t).exp();
            worst = worst.max((norm - bound) / bound);
        }
        if worst > 1e-9 {
            return Err(Error::BoundNotCertified(format!(
                "sampled operator norm exceeds K e^(-λt) by a relative {worst:.3e}"
            )));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParameters {
    pub delta: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

/// `R = max(R_min, ln(2K)/λ)` and `δ = (1 - K e^{-λR}) ε / K`.
pub fn delta_for_epsilon_stable(bound: &RateBound, epsilon: f64, r_min: f64) -> Result<StableParameters> {
    if bound.direction != RateDirection::ForwardContraction {
        return Err(Error::InvalidParameter("stable δ needs a forward-contraction bound".into()));
    }
    let r = r_min.max((2.0 * bound.k).ln() / bound.lambda);
    let q = bound.k * (-bound.lambda * r).exp();
    Ok(StableParameters {
        delta: (1.0 - q) * epsilon.max(0.0) / bound.k,
        r,
    })
}

/// `δ = ε (1 - e^{-λ}) / (2K)`.
pub fn delta_for_epsilon_unstable(bound: &RateBound, epsilon: f64) -> Result<f64> {
    if bound.direction != RateDirection::InverseContraction {
        return Err(Error::InvalidParameter("unstable δ needs an inverse-contraction bound".into()));
    }
    Ok(epsilon.max(0.0) * (1.0 - (-bound.lambda).exp()) / (2.0 * bound.k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowMethod {
    Stable,
    UnstableSeries,
    HyperbolicCombined,
    Oracle,
    Candidate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShadowCertificate {
    pub method: ShadowMethod,
    pub epsilon: f64,
    pub shadow_point: Vector,
    pub sample_times: Vec<f64>,
    pub errors: Vec<f64>,
    pub sup_error: f64,
    /// Sup over the last quarter of the samples.
    pub tail_sup: f64,
    pub pass_eps: bool,
    pub pass_limit: bool,
    /// Norm used for `errors`: "ambient" or "coupled".
    pub norm: String,
    /// Ambient-norm sup when `errors` are in the coupled norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_error_ambient: Option<f64>,
    /// `C · sup_{k >= n/2} |h_k|`, the tail bound `pass_limit` is tested against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_bound: Option<f64>,
    /// Floating-point resolution of the tail comparison, `64 ε_mach max_{i >= n/2} |x_i|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roundoff_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ShadowCertificate {
    /// `[t, err]` pairs.
    pub fn samples(&self) -> Vec<[f64; 2]> {
        self.sample_times.iter().zip(&self.errors).map(|(&t, &e)| [t, e]).collect()
    }

    /// Error at the first sample of every leg.
    pub fn leg_start_errors(&self, orbit: &PseudoOrbit) -> Vec<f64> {
        orbit.leg_starts()[..orbit.len()]
            .iter()
            .map(|s| {
                let i = self.sample_times.partition_point(|&t| t < *s);
                self.errors[i]
            })
            .collect()
    }

    /// The report layout: method, epsilon, sup/tail errors, flags and samples.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "method": self.method,
            "epsilon": self.epsilon,
            "sup_error": self.sup_error,
            "tail_sup": self.tail_sup,
            "pass_eps": self.pass_eps,
            "pass_limit": self.pass_limit,
            "norm": self.norm,
            "shadow_point": self.shadow_point,
            "samples": self.samples(),
        });
        if let Some(a) = self.sup_error_ambient {
            v["sup_error_ambient"] = serde_json::json!(a);
        }
        if let Some(b) = self.limit_bound {
            v["limit_bound"] = serde_json::json!(b);
        }
        if let Some(f) = self.roundoff_floor {
            v["roundoff_floor"] = serde_json::json!(f);
        }
        if !self.notes.is_empty() {
            v["notes"] = serde_json::json!(self.notes);
        }
        v
    }

    /// `t,err` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,err\n");
        for (t, e) in self.sample_times.iter().zip(&self.errors) {
            out.push_str(&format!("{t},{e}\n"));
        }
        out
    }
}

/// Sample times: `n_per_leg` uniform points per leg starting at `t̂_i`.
/// Gridded semigroups get grid points only.
pub fn leg_samples(orbit: &PseudoOrbit, semigroup: &dyn Semigroup, n_per_leg: usize) -> Result<Vec<f64>> {
    let n_per_leg = n_per_leg.max(1);
    let starts = orbit.leg_starts();
    let mut out = Vec::with_capacity(orbit.len() * n_per_leg);
    for (i, &d) in orbit.durations.iter().enumerate() {
        match semigroup.time_grid() {
            Some(h) => {
                let steps = grid_steps(d, h, semigroup.tolerances().grid)? as usize;
                let take = n_per_leg.min(steps.max(1));
                let mut last = None;
                for k in 0..take {
                    let s = (k * steps) / take;
                    if last != Some(s) {
                        out.push(starts[i] + s as f64 * h);
                        last = Some(s);
                    }
                }
            }
            None => {
                for k in 0..n_per_leg {
                    out.push(starts[i] + d * k as f64 / n_per_leg as f64);
                }
            }
        }
    }
    Ok(out)
}

fn tail_of(errors: &[f64]) -> f64 {
    let n = errors.len();
    let start = n - (n / 4).max(1).min(n);
    errors[start..].iter().copied().fold(0.0, f64::max)
}

/// `|orbit(t) - x₀*t|` at each sample, evaluated in parallel.
fn error_trace(
    orbit: &PseudoOrbit,
    semigroup: &dyn Semigroup,
    samples: &[f64],
    trajectory: &(dyn Fn(f64) -> Result<Vector> + Sync),
    norm: &(dyn Fn(&Vector) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let starts = orbit.leg_starts();
    samples
        .par_iter()
        .map(|&t| {
            let i = starts.partition_point(|&s| s <= t).saturating_sub(1).min(orbit.len() - 1);
            let star = semigroup.apply((t - starts[i]).max(0.0), &orbit.points[i])?;
            Ok(norm(&(&trajectory(t)? - &star)))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn certificate(
    method: ShadowMethod,
    epsilon: f64,
    shadow_point: Vector,
    sample_times: Vec<f64>,
    errors: Vec<f64>,
    norm: &str,
) -> ShadowCertificate {
    let sup_error = errors.iter().copied().fold(0.0, f64::max);
    let tail_sup = tail_of(&errors);
    ShadowCertificate {
        method,
        epsilon,
        shadow_point,
        pass_eps: sup_error <= epsilon,
        pass_limit: false,
        sample_times,
        errors,
        sup_error,
        tail_sup,
        norm: norm.into(),
        sup_error_ambient: None,
        limit_bound: None,
        roundoff_floor: None,
        notes: Vec::new(),
    }
}

/// Checks `|T(t)x - x₀*t| <= ε` on `n_per_leg` samples per leg.
pub fn verify_shadowing(
    x: &Vector,
    orbit: &PseudoOrbit,
    semigroup: &dyn Semigroup,
    epsilon: f64,
    n_per_leg: usize,
) -> Result<ShadowCertificate> {
    x.check_dim(semigroup.dim())?;
    let samples = leg_samples(orbit, semigroup, n_per_leg)?;
    let traj = |t: f64| semigroup.apply(t, x);
    let errors = error_trace(orbit, semigroup, &samples, &traj, &|v: &Vector| v.norm())?;
    let mut cert = certificate(ShadowMethod::Candidate, epsilon, x.clone(), samples, errors, "ambient");
    if semigroup.time_grid().is_some() {
        cert.notes.push("sampling restricted to grid times".into());
    }
    Ok(cert)
}

/// `sup_{k >= n/2} |h_k|` from a list of jump norms.
pub fn tail_jump_sup(jump_norms: &[f64]) -> f64 {
    jump_norms[jump_norms.len() / 2..].iter().copied().fold(0.0, f64::max)
}

/// Errors of size `|x|` are only resolved to a few ulps of `|x|`; tails of
/// pseudo-orbits that stay O(1) cannot be compared below this.
pub fn roundoff_floor(orbit: &PseudoOrbit) -> f64 {
    let scale = orbit.points[orbit.len() / 2..].iter().map(|x| x.norm()).fold(0.0, f64::max);
    64.0 * f64::EPSILON * scale
}

fn set_limit(cert: &mut ShadowCertificate, orbit: &PseudoOrbit, limit: f64) {
    let floor = roundoff_floor(orbit);
    cert.limit_bound = Some(limit);
    cert.roundoff_floor = Some(floor);
    cert.pass_limit = orbit.decaying && cert.tail_sup <= limit + floor;
}

fn require_valid(orbit: &PseudoOrbit, semigroup: &dyn Semigroup) -> Result<Vec<f64>> {
    let rep = validate(orbit, semigroup);
    if !rep.valid {
        return Err(Error::InvalidPseudoOrbit(rep.messages.join("; ")));
    }
    Ok(rep.jump_norms)
}

fn min_duration(orbit: &PseudoOrbit) -> f64 {
    orbit.durations.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Checks the stable preconditions: `q = K e^{-λR} < 1` and
/// `max |h_i| <= (1 - q) ε / K`.
fn stable_gate(bound: &RateBound, epsilon: f64, r: f64, delta_actual: f64) -> Result<f64> {
    let q = bound.k * (-bound.lambda * r).exp();
    if q >= 1.0 {
        return Err(Error::InvalidPseudoOrbit(format!(
            "durations too short: K e^(-λR) = {q:.4} >= 1"
        )));
    }
    let allowed = (1.0 - q) * epsilon / bound.k;
    if delta_actual > allowed * (1.0 + 1e-9) {
        return Err(Error::InvalidPseudoOrbit(format!(
            "jumps {delta_actual:.3e} exceed δ(ε) = {allowed:.3e}"
        )));
    }
    Ok(q)
}

fn unstable_gate(bound: &RateBound, epsilon: f64, r: f64, delta_actual: f64) -> Result<()> {
    if r < 1.0 - 1e-12 {
        return Err(Error::InvalidPseudoOrbit("durations must be at least 1".into()));
    }
    let allowed = epsilon * (1.0 - (-bound.lambda).exp()) / bound.k;
    if delta_actual >= allowed {
        return Err(Error::InvalidPseudoOrbit(format!(
            "jumps {delta_actual:.3e} do not satisfy K Σ e^(-λk) δ < ε (limit {allowed:.3e})"
        )));
    }
    Ok(())
}

/// Shadowing for a forward-contracting semigroup: the shadow point is `x_0`.
pub fn shadow_stable(
    orbit: &PseudoOrbit,
    semigroup: &dyn Semigroup,
    bound: &RateBound,
    epsilon: f64,
    n_per_leg: usize,
) -> Result<ShadowCertificate> {
    if bound.direction != RateDirection::ForwardContraction {
        return Err(Error::BoundNotCertified("expected a forward-contraction bound".into()));
    }
    bound.certify(semigroup, 200, None)?;
    let jump_norms = require_valid(orbit, semigroup)?;
    let delta_actual = jump_norms.iter().copied().fold(0.0, f64::max);
    let q = stable_gate(bound, epsilon, min_duration(orbit), delta_actual)?;
    let x0 = orbit.points[0].clone();
    let mut cert = verify_shadowing(&x0, orbit, semigroup, epsilon, n_per_leg)?;
    cert.method = ShadowMethod::Stable;
    let c_const = bound.k / (1.0 - q);
    let limit = c_const * tail_jump_sup(&jump_norms);
    set_limit(&mut cert, orbit, limit);
    Ok(cert)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionTrace {
    /// `D(Γ^{k+1} y⁰, Γ^k y⁰)` for `k = 0..m`.
    pub distances: Vec<f64>,
    /// Successive ratios where the previous distance is nonzero.
    pub ratios: Vec<f64>,
    /// `K e^{-λR}`
    pub contraction_factor: f64,
    pub limit: Vec<Vector>,
    /// `sup_i |limit_i - T(t̂_i) x_0|`
    pub fixed_point_defect: f64,
}

/// Iterates `Γ(y)_0 = x_0`, `Γ(y)_i = T(t_{i-1}) y_{i-1}` from `y⁰ = points`.
pub fn contraction_iterate(
    orbit: &PseudoOrbit,
    semigroup: &dyn Semigroup,
    bound: &RateBound,
    epsilon: f64,
    iterations: usize,
) -> Result<ContractionTrace> {
    if bound.direction != RateDirection::ForwardContraction {
        return Err(Error::BoundNotCertified("expected a forward-contraction bound".into()));
    }
    let jump_norms = require_valid(orbit, semigroup)?;
    let delta_actual = jump_norms.iter().copied().fold(0.0, f64::max);
    let q = stable_gate(bound, epsilon, min_duration(orbit), delta_actual)?;
    let maps: Vec<CMatrix> = orbit
        .durations
        .iter()
        .map(|&t| semigroup.map_matrix(t))
        .collect::<Result<_>>()?;
    let gamma = |y: &[Vector]| -> Vec<Vector> {
        let mut out = Vec::with_capacity(y.len());
        out.push(orbit.points[0].clone());
        for i in 1..y.len() {
            out.push(&maps[i - 1] * &y[i - 1]);
        }
        out
    };
    let dist = |a: &[Vector], b: &[Vector]| a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
    let mut y = orbit.points.clone();
    let mut distances = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let next = gamma(&y);
        distances.push(dist(&next, &y));
        y = next;
    }
    let ratios = distances
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let starts = orbit.leg_starts();
    let mut fixed_point_defect: f64 = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let exact = semigroup.apply(starts[i], &orbit.points[0])?;
        fixed_point_defect = fixed_point_defect.max((yi - &exact).norm());
    }
    Ok(ContractionTrace {
        distances,
        ratios,
        contraction_factor: q,
        limit: y,
        fixed_point_defect,
    })
}

/// Shadowing for a semigroup with contracting inverses.
///
/// The series `x_0 + Σ_{k=1}^{n} T(t̂_k)^{-1} h_{k-1}` is summed to the
/// orbit end, where it telescopes to `T(t̂_n)^{-1} x_n`; the shadow orbit is
/// evaluated as `T(t) x = T(t̂_n - t)^{-1} x_n`.
pub fn shadow_unstable(
    orbit: &PseudoOrbit,
    semigroup: &dyn Semigroup,
    bound: &RateBound,
    epsilon: f64,
    n_per_leg: usize,
) -> Result<ShadowCertificate> {
    if !semigroup.has_inverse() {
        return Err(Error::NotInvertible);
    }
    if bound.direction != RateDirection::InverseContraction {
        return Err(Error::BoundNotCertified("expected an inverse-contraction bound".into()));
    }
    bound.certify(semigroup, 200, None)?;
    let jump_norms = require_valid(orbit, semigroup)?;
    let delta_actual = jump_norms.iter().copied().fold(0.0, f64::max);
    unstable_gate(bound, epsilon, min_duration(orbit), delta_actual)?;

    let end = orbit.end_time();
    let anchor = orbit.points[orbit.len()].clone();
    let shadow_point = nested_series(orbit, semigroup)?;
    let samples = leg_samples(orbit, semigroup, n_per_leg)?;
    let traj = |t: f64| semigroup.apply_inverse(snap(semigroup, end - t), &anchor);
    let errors = error_trace(orbit, semigroup, &samples, &traj, &|v: &Vector| v.norm())?;
    let mut cert = certificate(ShadowMethod::UnstableSeries, epsilon, shadow_point, samples, errors, "ambient");
    let c_const = bound.k / (1.0 - (-bound.lambda).exp());
    let limit = c_const * tail_jump_sup(&jump_norms);
    set_limit(&mut cert, orbit, limit);
    cert.notes.push(format!("series summed over all {} jumps", orbit.len()));
    Ok(cert)
}

/// Evaluates the correction series in nested form
/// `x_0 + T(t_0)^{-1}(h_0 + T(t_1)^{-1}(h_1 + ...))`, re-associated so that
/// each step is `z_i = T(t_i)^{-1} z_{i+1}` with `z_n = x_n`.
fn nested_series(orbit: &PseudoOrbit, semigroup: &dyn Semigroup) -> Result<Vector> {
    let mut z = orbit.points[orbit.len()].clone();
    for i in (0..orbit.len()).rev() {
        z = semigroup.apply_inverse(orbit.durations[i], &z)?;
    }
    Ok(z)
}

/// Correction series summed term by term (cancellation-prone; diagnostics
/// and short orbits only).
pub fn direct_series(orbit: &PseudoOrbit, semigroup: &dyn Semigroup, terms: usize) -> Result<Vector> {
    let jumps = orbit.jumps(semigroup)?;
    let starts = orbit.leg_starts();
    let mut x = orbit.points[0].clone();
    for k in 1..=terms.min(orbit.len()) {
        x = &x + &semigroup.apply_inverse(starts[k], &jumps[k - 1])?;
    }
    Ok(x)
}

fn snap(semigroup: &dyn Semigroup, t: f64) -> f64 {
    let t = t.max(0.0);
    match semigroup.time_grid() {
        Some(h) => (t / h).round() * h,
        None => t,
    }
}

/// Combined shadow `x = x^M + x^N` for a hyperbolic matrix semigroup.
/// Errors are reported in the coupled norm; the ambient sup is kept too.
pub fn shadow_hyperbolic(
    orbit: &PseudoOrbit,
    semigroup: &MatrixSemigroup,
    split: &HyperbolicSplitting,
    epsilon: f64,
    n_per_leg: usize,
) -> Result<ShadowCertificate> {
    orbit.points[0].check_dim(split.dim())?;
    if split.dim() != semigroup.dim() {
        return Err(Error::DimensionMismatch {
            expected: semigroup.dim(),
            got: split.dim(),
        });
    }
    if split.gap <= 0.0 {
        return Err(Error::NotHyperbolic { gap: split.gap });
    }
    let req = hyperbolic_requirements(split, epsilon, 1.0)?;
    let rep = validate(orbit, semigroup);
    if !rep.valid {
        return Err(Error::InvalidPseudoOrbit(rep.messages.join("; ")));
    }
    let jumps = orbit.jumps(semigroup)?;
    let coupled_jumps: Vec<f64> = jumps.iter().map(|h| coupled_norm(h, split)).collect::<Result<_>>()?;
    let delta_coupled = coupled_jumps.iter().copied().fold(0.0, f64::max);
    let r = min_duration(orbit);
    if r < req.r * (1.0 - 1e-12) {
        return Err(Error::InvalidPseudoOrbit(format!(
            "durations must be at least R = {:.4}",
            req.r
        )));
    }
    let mut q_m = 0.0;
    if split.dim_m > 0 {
        q_m = stable_gate(&split.stable_bound(), epsilon, r, delta_coupled)?;
    }
    if split.dim_n > 0 {
        unstable_gate(&split.unstable_bound(), epsilon, r, delta_coupled)?;
    }

    let end = orbit.end_time();
    let x_m = split.project_m(&orbit.points[0]);
    let y_n = split.project_n(&orbit.points[orbit.len()]);
    let x_n = &split.unstable_inverse_flow(end) * &y_n;
    let shadow_point = &x_m + &x_n;
    let samples = leg_samples(orbit, semigroup, n_per_leg)?;
    let traj = |t: f64| -> Result<Vector> {
        let m = &split.stable_flow(t) * &x_m;
        let n = &split.unstable_inverse_flow((end - t).max(0.0)) * &y_n;
        Ok(&m + &n)
    };
    let coupled = |v: &Vector| coupled_norm(v, split).unwrap_or(f64::NAN);
    let errors = error_trace(orbit, semigroup, &samples, &traj, &coupled)?;
    let ambient = error_trace(orbit, semigroup, &samples, &traj, &|v: &Vector| v.norm())?;
    let mut cert = certificate(ShadowMethod::HyperbolicCombined, epsilon, shadow_point, samples, errors, "coupled");
    cert.sup_error_ambient = Some(ambient.iter().copied().fold(0.0, f64::max));
    let c_m = if split.dim_m > 0 { split.k_m / (1.0 - q_m) } else { 0.0 };
    let c_n = if split.dim_n > 0 {
        split.k_n / (1.0 - (-split.lambda_n).exp())
    } else {
        0.0
    };
    let limit = c_m.max(c_n) * tail_jump_sup(&coupled_jumps);
    set_limit(&mut cert, orbit, limit);
    Ok(cert)
}

/// `δ = min(δ_M, δ_N)` and `R = max(R_M, 1)` for a splitting.
pub fn hyperbolic_requirements(split: &HyperbolicSplitting, epsilon: f64, r_min: f64) -> Result<StableParameters> {
    let mut delta = f64::INFINITY;
    let mut r = r_min.max(1.0);
    if split.dim_m > 0 {
        let sp = delta_for_epsilon_stable(&split.stable_bound(), epsilon, r_min)?;
        delta = delta.min(sp.delta);
        r = r.max(sp.r);
    }
    if split.dim_n > 0 {
        delta = delta.min(delta_for_epsilon_unstable(&split.unstable_bound(), epsilon)?);
    }
    Ok(StableParameters { delta, r })
}

/// Parametrization used by the least-squares oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleBasis {
    /// Unknown is `x` itself.
    Ambient,
    /// Unknowns are eigen-coordinates, each anchored where its mode is
    /// largest on the horizon; same objective, bounded rows.
    Modal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub certificate: ShadowCertificate,
    pub basis: OracleBasis,
    pub rank: usize,
    pub rank_deficient: bool,
    /// `Σ_s |T(t_s)x - x₀*t_s|²` at the least-squares minimizer.
    pub objective: f64,
    /// Sampled sup error of the least-squares minimizer.
    pub least_squares_sup: f64,
    pub minimax_iterations: usize,
}

/// Reweighting passes after the least-squares solve.
pub const LAWSON_ITERATIONS: usize = 200;

/// Euclidean norms of consecutive `dim`-row blocks of a column.
fn block_norms(residual: &CMatrix, dim: usize) -> Vec<f64> {
    residual
        .as_slice()
        .chunks(dim)
        .map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Minimizes `Σ_s |T(t_s)x - x₀*t_s|²` over `x`, then runs Lawson
/// reweighting toward the minimizer of `max_s |T(t_s)x - x₀*t_s|` and reports
/// the iterate with the smallest sampled sup.
pub fn brute_force_shadow(
    orbit: &PseudoOrbit,
    semigroup: &dyn Semigroup,
    sample_times: &[f64],
    epsilon: f64,
) -> Result<OracleResult> {
    let rep = validate(orbit, semigroup);
    if !rep.valid {
        return Err(Error::InvalidPseudoOrbit(rep.messages.join("; ")));
    }
    let dim = semigroup.dim();
    let end = orbit.end_time();
    let targets: Vec<Vector> = sample_times
        .iter()
        .map(|&t| evaluate_star(orbit, semigroup, t))
        .collect::<Result<_>>()?;

    // Modal parametrization when the generator is diagonalizable.
    let modal = semigroup
        .generator()
        .map(Eigen::new)
        .transpose()?
        .filter(|e| e.condition < EIGEN_CONDITION_LIMIT);
    let anchor = |mu: C64| if mu.re > 0.0 { end } else { 0.0 };
    let row_block = |t: f64| -> Result<CMatrix> {
        match &modal {
            Some(e) => {
                let mut m = e.vectors.clone();
                for (j, mut col) in m.column_iter_mut().enumerate() {
                    let mu = e.values[j];
                    col *= (mu * (t - anchor(mu))).exp();
                }
                Ok(m)
            }
            None => semigroup.map_matrix(t),
        }
    };
    let rows = sample_times.len() * dim;
    let mut a = CMatrix::zeros(rows, dim);
    let mut b = CMatrix::zeros(rows, 1);
    for (s, &t) in sample_times.iter().enumerate() {
        a.view_mut((s * dim, 0), (dim, dim)).copy_from(&row_block(t)?);
        for r in 0..dim {
            b[(s * dim + r, 0)] = targets[s].0[r];
        }
    }
    let solve = |a: CMatrix, b: &CMatrix| -> Result<(CMatrix, usize)> {
        let svd = a.svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let cutoff = smax * f64::EPSILON * rows.max(dim) as f64;
        let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        let z = svd
            .solve(b, cutoff)
            .map_err(|e| Error::EigFailure(format!("least squares failed: {e}")))?;
        Ok((z, rank))
    };
    let (coeffs, rank) = solve(a.clone(), &b)?;
    let residual = &a * &coeffs - &b;
    let objective = residual.iter().map(|z| z.norm_sqr()).sum();
    let least_squares_sup = block_norms(&residual, dim).into_iter().fold(0.0, f64::max);

    // Lawson reweighting toward the minimax point; the best iterate is kept.
    let n_samples = sample_times.len();
    let mut weights = vec![1.0 / n_samples as f64; n_samples];
    let (mut best, mut best_sup) = (coeffs, least_squares_sup);
    let mut current = residual;
    let mut minimax_iterations = 0;
    for _ in 0..LAWSON_ITERATIONS {
        let norms = block_norms(&current, dim);
        let total: f64 = weights.iter().zip(&norms).map(|(w, r)| w * r).sum();
        if !(total > 0.0) {
            break;
        }
        for (w, r) in weights.iter_mut().zip(&norms) {
            *w *= r / total;
        }
        let (mut aw, mut bw) = (a.clone(), b.clone());
        for (s, w) in weights.iter().enumerate() {
            aw.view_mut((s * dim, 0), (dim, dim)).scale_mut(w.sqrt());
            bw.view_mut((s * dim, 0), (dim, 1)).scale_mut(w.sqrt());
        }
        let (z, _) = solve(aw, &bw)?;
        current = &a * &z - &b;
        minimax_iterations += 1;
        let sup = block_norms(&current, dim).into_iter().fold(0.0, f64::max);
        if sup < best_sup {
            let gain = (best_sup - sup) / best_sup;
            best = z;
            best_sup = sup;
            if gain < 1e-12 {
                break;
            }
        }
    }
    let coeffs = best;

    let coeffs: Vec<C64> = coeffs.column(0).iter().copied().collect();
    let (basis, shadow_point) = match &modal {
        Some(e) => {
            let mut x = Vector::zeros(dim);
            for (j, &d) in coeffs.iter().enumerate() {
                let mu = e.values[j];
                let w = d * (-mu * anchor(mu)).exp();
                x = &x + &Vector(e.vectors.column(j).into_owned() * w);
            }
            (OracleBasis::Modal, x)
        }
        None => (OracleBasis::Ambient, Vector::from_complex(coeffs.clone())),
    };
    let errors: Vec<f64> = sample_times
        .par_iter()
        .zip(targets.par_iter())
        .map(|(&t, target)| -> Result<f64> {
            let value = match &modal {
                Some(_) => Vector(&row_block(t)? * nalgebra::DVector::from_column_slice(&coeffs)),
                None => semigroup.apply(t, &shadow_point)?,
            };
            Ok((&value - target).norm())
        })
        .collect::<Result<_>>()?;
    let mut cert = certificate(
        ShadowMethod::Oracle,
        epsilon,
        shadow_point,
        sample_times.to_vec(),
        errors,
        "ambient",
    );
    if rank < dim {
        cert.notes.push(format!("rank deficient ({rank} of {dim}); pseudo-inverse solution"));
    }
    Ok(OracleResult {
        certificate: cert,
        basis,
        rank,
        rank_deficient: rank < dim,
        objective,
        least_squares_sup,
        minimax_iterations,
    })
}
