//! `(δ, R)`-pseudo orbits: construction, validation and the piecewise
//! trajectory `x₀ * t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::c;
use crate::semigroup::{grid_steps, Semigroup, Vector};
use crate::splitting::HyperbolicSplitting;

/// Default absolute floor for the decaying-tail proxy.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Points `x_0..=x_n` and durations `t_0..t_{n-1}` with
/// `x_{i+1} = T(t_i) x_i + h_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbit {
    pub points: Vec<Vector>,
    pub durations: Vec<f64>,
    pub delta: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub decaying: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PseudoOrbit {
    pub fn new(points: Vec<Vector>, durations: Vec<f64>, delta: f64, r: f64, decaying: bool) -> Result<Self> {
        if points.len() != durations.len() + 1 {
            return Err(Error::InvalidPseudoOrbit(format!(
                "{} points need {} durations, got {}",
                points.len(),
                points.len().saturating_sub(1),
                durations.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidPseudoOrbit("no points".into()));
        }
        let dim = points[0].dim();
        for p in &points {
            p.check_dim(dim)?;
        }
        Ok(Self {
            points,
            durations,
            delta,
            r,
            decaying,
            seed: None,
        })
    }

    /// Number of legs `n`.
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Leg start times `t̂_0 = 0, t̂_i = Σ_{j<i} t_j` for `i = 0..=n`.
    pub fn leg_starts(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.durations.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for &d in &self.durations {
            acc += d;
            out.push(acc);
        }
        out
    }

    pub fn end_time(&self) -> f64 {
        self.durations.iter().sum()
    }

    /// Jumps `h_i = x_{i+1} - T(t_i) x_i`.
    pub fn jumps(&self, semigroup: &dyn Semigroup) -> Result<Vec<Vector>> {
        (0..self.len())
            .map(|i| {
                let image = semigroup.apply(self.durations[i], &self.points[i])?;
                self.points[i + 1].try_sub(&image)
            })
            .collect()
    }

    /// Leg index `i` with `t̂_i <= t < t̂_{i+1}`.
    pub fn leg_index(&self, t: f64) -> Result<usize> {
        let starts = self.leg_starts();
        let end = *starts.last().unwrap();
        if !(t >= 0.0 && t < end) {
            return Err(Error::OutOfRange { time: t, end });
        }
        Ok(starts.partition_point(|&s| s <= t) - 1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pseudo-orbit serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PseudoOrbit =
            serde_json::from_str(text).map_err(|e| Error::InvalidPseudoOrbit(e.to_string()))?;
        let (seed, decaying) = (p.seed, p.decaying);
        let mut checked = PseudoOrbit::new(p.points, p.durations, p.delta, p.r, decaying)?;
        checked.seed = seed;
        Ok(checked)
    }
}

/// `x₀ * t = T(t - t̂_i) x_i` on leg `i`.
pub fn evaluate_star(orbit: &PseudoOrbit, semigroup: &dyn Semigroup, t: f64) -> Result<Vector> {
    let i = orbit.leg_index(t)?;
    let start = orbit.leg_starts()[i];
    semigroup.apply((t - start).max(0.0), &orbit.points[i])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub jump_norms: Vec<f64>,
    /// `max_i |h_i|`
    pub delta_actual: f64,
    pub worst_jump_index: Option<usize>,
    pub jump_violations: Vec<usize>,
    pub short_durations: Vec<usize>,
    pub off_grid: Vec<usize>,
    pub times_increasing: bool,
    /// `None` when the orbit does not declare decaying jumps.
    pub decaying_ok: Option<bool>,
    pub messages: Vec<String>,
}

/// Recomputes the jumps and checks every pseudo-orbit condition.
pub fn validate(orbit: &PseudoOrbit, semigroup: &dyn Semigroup) -> ValidationReport {
    validate_with_tail(orbit, semigroup, DEFAULT_TAIL_TOL)
}

pub fn validate_with_tail(orbit: &PseudoOrbit, semigroup: &dyn Semigroup, tail_tol: f64) -> ValidationReport {
    let mut messages = Vec::new();
    let mut short_durations = Vec::new();
    let mut off_grid = Vec::new();
    for (i, &d) in orbit.durations.iter().enumerate() {
        if d < orbit.r * (1.0 - 1e-12) {
            short_durations.push(i);
        }
        if let Some(h) = semigroup.time_grid() {
            if grid_steps(d, h, semigroup.tolerances().grid).is_err() {
                off_grid.push(i);
            }
        }
    }
    if !off_grid.is_empty() {
        messages.push(format!("durations off the time grid at legs {off_grid:?}"));
    }
    if !short_durations.is_empty() {
        messages.push(format!("durations shorter than R at legs {short_durations:?}"));
    }
    let starts = orbit.leg_starts();
    let times_increasing = starts.windows(2).all(|w| w[1] > w[0]);
    if !times_increasing {
        messages.push("leg start times are not strictly increasing".into());
    }

    let mut jump_norms = Vec::with_capacity(orbit.len());
    let mut jump_violations = Vec::new();
    if orbit.dim() != semigroup.dim() {
        messages.push(format!(
            "orbit dimension {} does not match semigroup dimension {}",
            orbit.dim(),
            semigroup.dim()
        ));
    } else if off_grid.is_empty() {
        for i in 0..orbit.len() {
            match semigroup.apply(orbit.durations[i], &orbit.points[i]) {
                Ok(image) => {
                    let h = (&orbit.points[i + 1] - &image).norm();
                    let slack = orbit.delta * 1e-9 + 1e-13 * orbit.points[i + 1].norm().max(1.0);
                    if h > orbit.delta + slack {
                        jump_violations.push(i);
                    }
                    jump_norms.push(h);
                }
                Err(e) => {
                    messages.push(format!("leg {i}: {e}"));
                    jump_norms.push(f64::NAN);
                }
            }
        }
    }
    if !jump_violations.is_empty() {
        messages.push(format!("jumps exceed delta at legs {jump_violations:?}"));
    }
    let (worst_jump_index, delta_actual) = jump_norms
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold((None, 0.0), |(bi, bv), (i, &v)| if v > bv || bi.is_none() { (Some(i), v) } else { (bi, bv) });

    let decaying_ok = orbit.decaying.then(|| {
        let n = jump_norms.len();
        let tail = jump_norms[n / 2..].iter().copied().fold(0.0, f64::max);
        tail <= tail_tol.max(delta_actual / 10.0)
    });
    if decaying_ok == Some(false) {
        messages.push("declared decaying but the tail jumps do not shrink".into());
    }
    let valid = messages.is_empty() && jump_norms.iter().all(|v| v.is_finite());
    ValidationReport {
        valid,
        jump_norms,
        delta_actual,
        worst_jump_index,
        jump_violations,
        short_durations,
        off_grid,
        times_increasing,
        decaying_ok,
        messages,
    }
}

/// How leg durations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationRule {
    Constant { t: f64 },
    Uniform { min: f64, max: f64 },
}

impl DurationRule {
    pub fn minimum(&self) -> f64 {
        match *self {
            Self::Constant { t } => t,
            Self::Uniform { min, .. } => min,
        }
    }
}

/// Size profile of the jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpSize {
    Zero,
    Constant,
    /// `|h_i| = δ ρ^i`
    Decaying { rho: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRule {
    pub size: JumpSize,
    pub delta: f64,
    /// Fixed jump direction; `None` draws uniformly on the sphere.
    pub direction: Option<Vector>,
}

impl JumpRule {
    pub fn zero() -> Self {
        Self {
            size: JumpSize::Zero,
            delta: 0.0,
            direction: None,
        }
    }

    pub fn constant(delta: f64) -> Self {
        Self {
            size: JumpSize::Constant,
            delta,
            direction: None,
        }
    }

    pub fn decaying(delta: f64, rho: f64) -> Self {
        Self {
            size: JumpSize::Decaying { rho },
            delta,
            direction: None,
        }
    }

    pub fn along(mut self, direction: Vector) -> Self {
        self.direction = Some(direction);
        self
    }

    fn radius(&self, i: usize) -> f64 {
        match self.size {
            JumpSize::Zero => 0.0,
            JumpSize::Constant => self.delta,
            JumpSize::Decaying { rho } => self.delta * rho.powi(i as i32),
        }
    }
}

/// Where the generated orbit is pinned.
#[derive(Debug, Clone)]
pub enum Anchor<'a> {
    /// Forward recursion from `x_0`.
    Initial(Vector),
    /// Backward recursion from `x_n`; needs an invertible semigroup. Keeps
    /// points bounded for expanding dynamics.
    Terminal(Vector),
    /// Stable part forward from `P_M x_0`, unstable part backward from `P_N x_n`.
    Split {
        initial: Vector,
        terminal: Vector,
        split: &'a HyperbolicSplitting,
    },
}

fn unit_sphere(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    loop {
        let coords: Vec<_> = (0..dim)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let v = Vector::from_complex(coords);
        let n = v.norm();
        if n > 1e-12 {
            return v.scale(c(1.0 / n, 0.0));
        }
    }
}

fn draw_duration(rule: &DurationRule, rng: &mut ChaCha8Rng, grid: Option<f64>) -> Result<f64> {
    let raw = match *rule {
        DurationRule::Constant { t } => t,
        DurationRule::Uniform { min, max } => {
            if max < min {
                return Err(Error::InvalidParameter("duration range is empty".into()));
            }
            match grid {
                Some(h) => {
                    let lo = (min / h - 1e-9).ceil() as u64;
                    let hi = (max / h + 1e-9).floor() as u64;
                    if hi < lo {
                        return Err(Error::InvalidParameter("no grid time inside the duration range".into()));
                    }
                    return Ok(rng.random_range(lo..=hi) as f64 * h);
                }
                None => rng.random_range(min..=max),
            }
        }
    };
    if let Some(h) = grid {
        let k = grid_steps(raw, h, 1e-9)?;
        return Ok(k as f64 * h);
    }
    Ok(raw)
}

/// Generates `x_{i+1} = T(t_i) x_i + h_i` with seeded jumps.
pub fn from_perturbed_orbit(
    semigroup: &dyn Semigroup,
    anchor: Anchor<'_>,
    n: usize,
    durations: DurationRule,
    jumps: &JumpRule,
    seed: u64,
) -> Result<PseudoOrbit> {
    if n == 0 {
        return Err(Error::InvalidParameter("orbit needs at least one leg".into()));
    }
    if durations.minimum() <= 0.0 {
        return Err(Error::InvalidParameter("durations must be positive".into()));
    }
    if jumps.delta < 0.0 {
        return Err(Error::InvalidParameter("jump bound must be nonnegative".into()));
    }
    if let JumpSize::Decaying { rho } = jumps.size {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter("decay ratio must lie in [0, 1)".into()));
        }
    }
    let dim = semigroup.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts: Vec<f64> = (0..n)
        .map(|_| draw_duration(&durations, &mut rng, semigroup.time_grid()))
        .collect::<Result<_>>()?;
    let direction = match &jumps.direction {
        Some(d) => {
            d.check_dim(dim)?;
            let nrm = d.norm();
            if nrm == 0.0 {
                return Err(Error::InvalidParameter("jump direction is zero".into()));
            }
            Some(d.scale(c(1.0 / nrm, 0.0)))
        }
        None => None,
    };
    let hs: Vec<Vector> = (0..n)
        .map(|i| {
            let u = direction.clone().unwrap_or_else(|| unit_sphere(&mut rng, dim));
            u.scale(c(jumps.radius(i), 0.0))
        })
        .collect();

    let mut points = vec![Vector::zeros(dim); n + 1];
    match anchor {
        Anchor::Initial(x0) => {
            x0.check_dim(dim)?;
            points[0] = x0;
            for i in 0..n {
                points[i + 1] = &semigroup.apply(ts[i], &points[i])? + &hs[i];
            }
        }
        Anchor::Terminal(xn) => {
            xn.check_dim(dim)?;
            if !semigroup.has_inverse() {
                return Err(Error::NotInvertible);
            }
            points[n] = xn;
            for i in (0..n).rev() {
                points[i] = semigroup.apply_inverse(ts[i], &(&points[i + 1] - &hs[i]))?;
            }
        }
        Anchor::Split {
            initial,
            terminal,
            split,
        } => {
            initial.check_dim(dim)?;
            terminal.check_dim(dim)?;
            let mut stable = vec![Vector::zeros(dim); n + 1];
            let mut unstable = vec![Vector::zeros(dim); n + 1];
            stable[0] = split.project_m(&initial);
            for i in 0..n {
                let hm = split.project_m(&hs[i]);
                stable[i + 1] = &(&split.stable_flow(ts[i]) * &stable[i]) + &hm;
            }
            unstable[n] = split.project_n(&terminal);
            for i in (0..n).rev() {
                let hn = split.project_n(&hs[i]);
                unstable[i] = &split.unstable_inverse_flow(ts[i]) * &(&unstable[i + 1] - &hn);
            }
            for i in 0..=n {
                points[i] = &stable[i] + &unstable[i];
            }
        }
    }
    let mut orbit = PseudoOrbit::new(
        points,
        ts,
        jumps.delta,
        durations.minimum(),
        !matches!(jumps.size, JumpSize::Constant),
    )?;
    orbit.seed = Some(seed);
    Ok(orbit)
}

/// The constant chain `(x_i, t_i) = (x_0, t_star)`.
pub fn periodic_chain(x0: Vector, t_star: f64, n: usize, delta: f64) -> Result<PseudoOrbit> {
    if !(t_star > 0.0) {
        return Err(Error::InvalidParameter("t_star must be positive".into()));
    }
    PseudoOrbit::new(vec![x0; n + 1], vec![t_star; n], delta, t_star, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_rotation, make_scalar, make_transport};
    use std::f64::consts::PI;

    #[test]
    fn exact_orbit_is_valid() {
        let t = make_scalar(-1.0);
        let p = from_perturbed_orbit(
            &t,
            Anchor::Initial(Vector::from_real(&[1.0])),
            10,
            DurationRule::Constant { t: 1.0 },
            &JumpRule::zero(),
            0,
        )
        .unwrap();
        let rep = validate(&p, &t);
        assert!(rep.valid);
        assert!(rep.delta_actual < 1e-15);
    }

    #[test]
    fn oversized_jump_reported() {
        let t = make_scalar(-1.0);
        let mut p = from_perturbed_orbit(
            &t,
            Anchor::Initial(Vector::from_real(&[1.0])),
            5,
            DurationRule::Constant { t: 1.0 },
            &JumpRule::constant(0.01),
            3,
        )
        .unwrap();
        p.points[3] = &p.points[3] + &Vector::from_real(&[0.03]);
        let rep = validate(&p, &t);
        assert!(!rep.valid);
        assert!(rep.jump_violations.contains(&2));
    }

    #[test]
    fn off_grid_durations_surface() {
        let tr = make_transport(1.0, 8, 0.25).unwrap();
        let p = PseudoOrbit::new(vec![Vector::basis(8, 0); 3], vec![0.3, 0.3], 0.1, 0.3, false).unwrap();
        let rep = validate(&p, &tr);
        assert!(!rep.valid);
        assert_eq!(rep.off_grid, vec![0, 1]);
    }

    #[test]
    fn constant_jump_closed_form() {
        let t = make_scalar(-1.0);
        let delta = 0.05;
        let p = from_perturbed_orbit(
            &t,
            Anchor::Initial(Vector::from_real(&[1.0])),
            20,
            DurationRule::Constant { t: 1.0 },
            &JumpRule::constant(delta).along(Vector::from_real(&[1.0])),
            0,
        )
        .unwrap();
        let e1 = (-1.0f64).exp();
        for (i, x) in p.points.iter().enumerate() {
            let ei = (-(i as f64)).exp();
            let closed = ei + delta * (1.0 - ei) / (1.0 - e1);
            assert!((x.0[0].re - closed).abs() < 1e-14);
        }
        assert!(validate(&p, &t).valid);
    }

    #[test]
    fn decaying_jump_norms() {
        let t = make_scalar(-1.0);
        let p = from_perturbed_orbit(
            &t,
            Anchor::Initial(Vector::from_real(&[1.0])),
            12,
            DurationRule::Constant { t: 1.0 },
            &JumpRule::decaying(0.1, 0.5),
            9,
        )
        .unwrap();
        assert!(p.decaying);
        let rep = validate(&p, &t);
        for (i, h) in rep.jump_norms.iter().enumerate() {
            assert!((h - 0.1 * 0.5f64.powi(i as i32)).abs() < 1e-15);
        }
        assert_eq!(rep.decaying_ok, Some(true));
    }

    #[test]
    fn periodic_chain_examples() {
        let rot = make_rotation(1.0).unwrap();
        let p = periodic_chain(Vector::from_real(&[1.0, 0.0]), 2.0 * PI, 4, 1e-9).unwrap();
        let rep = validate(&p, &rot);
        assert!(rep.valid && rep.delta_actual < 1e-12);

        let zero = periodic_chain(Vector::zeros(2), 1.0, 4, 0.0).unwrap();
        assert!(validate(&zero, &rot).valid);

        let s = make_scalar(-1.0);
        let p = periodic_chain(Vector::from_real(&[1.0]), 1.0, 3, 1.0).unwrap();
        let rep = validate(&p, &s);
        assert!((rep.delta_actual - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn star_evaluation() {
        let t = make_scalar(-1.0);
        let p = from_perturbed_orbit(
            &t,
            Anchor::Initial(Vector::from_real(&[1.0])),
            4,
            DurationRule::Constant { t: 1.0 },
            &JumpRule::zero(),
            0,
        )
        .unwrap();
        assert_eq!(evaluate_star(&p, &t, 0.0).unwrap(), p.points[0]);
        assert_eq!(evaluate_star(&p, &t, 2.0).unwrap(), p.points[2]);
        let mid = evaluate_star(&p, &t, 1.5).unwrap();
        assert!((mid.0[0].re - (-1.5f64).exp()).abs() < 1e-15);
        assert!(matches!(evaluate_star(&p, &t, 4.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(evaluate_star(&p, &t, -0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn terminal_anchor_keeps_expanding_orbit_bounded() {
        let t = make_scalar(1.0);
        let p = from_perturbed_orbit(
            &t,
            Anchor::Terminal(Vector::zeros(1)),
            100,
            DurationRule::Constant { t: 1.0 },
            &JumpRule::constant(0.01),
            5,
        )
        .unwrap();
        assert!(p.points.iter().all(|x| x.norm() < 0.01));
        let rep = validate(&p, &t);
        assert!(rep.valid, "{:?}", rep.messages);
    }

    #[test]
    fn json_layout() {
        let p = periodic_chain(Vector::from_real(&[1.0, -2.0]), 1.5, 2, 0.1).unwrap();
        let text = p.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["points"][0][1], serde_json::json!([-2.0, 0.0]));
        assert_eq!(v["R"], serde_json::json!(1.5));
        assert_eq!(PseudoOrbit::from_json(&text).unwrap(), p);
        assert!(PseudoOrbit::from_json(r#"{"points":[],"durations":[1.0],"delta":0,"R":1,"decaying":false}"#).is_err());
    }
}
