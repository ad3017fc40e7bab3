//! Nonwandering and chain-recurrence diagnostics on finite grids, plus two
//! canned demonstrations: an unshadowable rotation pseudo-orbit and a
//! recurrent chain for the weighted shift.
//!
//! Chain edges test a finite set of on-grid times, so the graph is an
//! under-approximation of chain reachability: missing edges are possible,
//! spurious ones are not.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::models::{GhShiftModel, WINDOW_GUARD};
use crate::pseudo_orbit::{validate, PseudoOrbit};
use crate::semigroup::{MatrixSemigroup, Semigroup, Vector};
use crate::shadowing::{brute_force_shadow, leg_samples, verify_shadowing};
use crate::splitting::{check_hyperbolic_map, HyperbolicityCheck, DEFAULT_GAP_TOL};

/// Number of probe times used by [`is_nonwandering`].
pub const PROBE_TIMES: usize = 256;
/// Default number of chain-edge test times.
pub const CHAIN_TIMES: usize = 32;

/// Probe radii are drawn from `2^{-j}`, `j = 0..=PROBE_LADDER`, keeping
/// those inside the ball. The ladder does not depend on `ε`, so a probe
/// that succeeds at `ε` also exists at `2ε`.
const PROBE_LADDER: i32 = 40;

/// `n` on-grid times in `[r, t_max]`: uniform or log-spaced, deduplicated.
fn probe_times(semigroup: &dyn Semigroup, r: f64, t_max: f64, n: usize, log: bool) -> Vec<f64> {
    let n = n.max(1);
    let raw = (0..n).map(|k| {
        let frac = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
        if log && r > 0.0 {
            r * (t_max / r).powf(frac)
        } else {
            r + (t_max - r) * frac
        }
    });
    let mut out: Vec<f64> = match semigroup.time_grid() {
        Some(h) => {
            let lo = (r / h - 1e-9).ceil() * h;
            raw.map(|t| ((t / h).round() * h).max(lo))
                .filter(|&t| t <= t_max + 1e-9 * h)
                .collect()
        }
        None => raw.collect(),
    };
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

/// Deterministic unit directions: `±e_k` then seeded Gaussian directions.
fn probe_directions(dim: usize, n: usize) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::with_capacity(n);
    for k in 0..dim {
        out.push(Vector::basis(dim, k));
        out.push(-&Vector::basis(dim, k));
    }
    while out.len() < n {
        let coords: Vec<_> = (0..dim)
            .map(|_| c(StandardNormal.sample(&mut rng), 0.0))
            .collect();
        let v = Vector::from_complex(coords);
        let nrm = v.norm();
        if nrm > 1e-12 {
            out.push(v.scale(c(1.0 / nrm, 0.0)));
        }
    }
    out.truncate(n.max(1));
    out
}

/// Probes `y = x + r u` for ladder radii `r < ε` and `n_probe` fixed
/// directions `u`, at on-grid times in `[R, t_max]`; true iff some
/// `|T(t)y - x| < ε`. `false` means "not detected at this resolution".
pub fn is_nonwandering(
    x: &Vector,
    semigroup: &dyn Semigroup,
    eps_nbhd: f64,
    r: f64,
    t_max: f64,
    n_probe: usize,
) -> Result<bool> {
    x.check_dim(semigroup.dim())?;
    if !(eps_nbhd > 0.0 && r > 0.0 && t_max >= r) {
        return Err(Error::InvalidParameter("need ε > 0 and 0 < R <= t_max".into()));
    }
    let mut probes = vec![x.clone()];
    for u in probe_directions(semigroup.dim(), n_probe) {
        for j in 0..=PROBE_LADDER {
            let rad = 2f64.powi(-j);
            if rad < eps_nbhd {
                probes.push(x + &u.scale(c(rad, 0.0)));
            }
        }
    }
    let times = probe_times(semigroup, r, t_max, PROBE_TIMES, false);
    let hits: Vec<bool> = times
        .par_iter()
        .map(|&t| -> Result<bool> {
            let map = semigroup.map_matrix(t)?;
            Ok(probes.iter().any(|y| (&(&map * y) - x).norm() < eps_nbhd))
        })
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().any(|h| h))
}

/// Directed graph of `(δ, R)`-relations between grid points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainGraph {
    pub nodes: Vec<Vector>,
    /// Sorted `(i, j)` pairs.
    pub edges: Vec<(usize, usize)>,
    pub delta: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub t_max: f64,
    pub times: Vec<f64>,
}

impl ChainGraph {
    /// Edge `i -> j` iff `|T(t)x_i - x_j| < δ` for one of the test times.
    pub fn build(
        semigroup: &dyn Semigroup,
        nodes: Vec<Vector>,
        delta: f64,
        r: f64,
        t_max: f64,
        n_times: usize,
    ) -> Result<Self> {
        if !(delta > 0.0 && r > 0.0 && t_max >= r) {
            return Err(Error::InvalidParameter("need δ > 0 and 0 < R <= t_max".into()));
        }
        for v in &nodes {
            v.check_dim(semigroup.dim())?;
        }
        let times = probe_times(semigroup, r, t_max, n_times, true);
        let maps: Vec<CMatrix> = times.iter().map(|&t| semigroup.map_matrix(t)).collect::<Result<_>>()?;
        let edges: Vec<(usize, usize)> = (0..nodes.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let images: Vec<Vector> = maps.iter().map(|m| m * &nodes[i]).collect();
                let nodes = &nodes;
                (0..nodes.len())
                    .filter(move |&j| images.iter().any(|y| (y - &nodes[j]).norm() < delta))
                    .map(move |j| (i, j))
            })
            .collect();
        Ok(Self {
            nodes,
            edges,
            delta,
            r,
            t_max,
            times,
        })
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(i, j) in &self.edges {
            adj[i].push(j);
        }
        adj
    }

    /// Nodes on a cycle: in a strongly connected component of size > 1, or
    /// carrying a self-loop. Sorted.
    pub fn recurrent_nodes(&self) -> Vec<usize> {
        let mut g = DiGraph::<(), ()>::new();
        let idx: Vec<_> = (0..self.nodes.len()).map(|_| g.add_node(())).collect();
        for &(i, j) in &self.edges {
            g.add_edge(idx[i], idx[j], ());
        }
        let mut out = Vec::new();
        for scc in tarjan_scc(&g) {
            let looped = scc.len() == 1 && g.contains_edge(scc[0], scc[0]);
            if scc.len() > 1 || looped {
                out.extend(scc.iter().map(|n| n.index()));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn nearest_to_origin(&self) -> Option<usize> {
        (0..self.nodes.len()).min_by(|&a, &b| self.nodes[a].norm().total_cmp(&self.nodes[b].norm()))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "delta": self.delta,
            "R": self.r,
            "t_max": self.t_max,
            "times": self.times,
            "nodes": self.nodes,
            "adjacency": self.successors(),
        })
    }

    /// `source,target` rows.
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("source,target\n");
        for (i, j) in &self.edges {
            out.push_str(&format!("{i},{j}\n"));
        }
        out
    }
}

/// Grid nodes lying on a `(δ, R)`-cycle, with the graph used.
pub fn chain_recurrent_set(
    semigroup: &dyn Semigroup,
    grid: Vec<Vector>,
    delta: f64,
    r: f64,
    t_max: f64,
) -> Result<(Vec<usize>, ChainGraph)> {
    let graph = ChainGraph::build(semigroup, grid, delta, r, t_max, CHAIN_TIMES)?;
    Ok((graph.recurrent_nodes(), graph))
}

/// Real grid `{k · step : |k · step| <= half_width}^dim`.
pub fn box_grid(dim: usize, half_width: f64, step: f64) -> Vec<Vector> {
    let k = (half_width / step + 1e-9).floor() as i64;
    let axis: Vec<f64> = (-k..=k).map(|i| i as f64 * step).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out.iter().map(|p| Vector::from_real(p)).collect()
}

/// `n` points on the circle of radius `radius` in the first two coordinates.
pub fn circle_grid(n: usize, radius: f64) -> Vec<Vector> {
    (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Vector::from_real(&[radius * a.cos(), radius * a.sin()])
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationDemo {
    pub pseudo_orbit: PseudoOrbit,
    /// `m δ' / 2`
    pub lower_bound: f64,
    /// Best sup error found by searching over true orbits.
    pub numeric_bound: f64,
    /// Sup error of the least-squares oracle.
    pub oracle_sup: f64,
    pub epsilon: f64,
    pub certified: bool,
}

/// Radius-drifting pseudo-orbit `x_i = (1 + i δ') e_1` with full-period legs
/// `2π/θ`. True orbits keep their modulus, so every candidate misses some
/// leg by at least `m δ'/2`. `δ' = 0` gives an exact orbit and
/// `certified = false`.
pub fn rotation_no_shadowing_demo(theta: f64, epsilon: f64, delta_prime: f64, m: usize) -> Result<RotationDemo> {
    let rot = crate::models::make_rotation(theta)?;
    if delta_prime < 0.0 || m == 0 {
        return Err(Error::InvalidParameter("need δ' >= 0 and m >= 1".into()));
    }
    if delta_prime > 0.0 && (m as f64 * delta_prime) < 3.0 * epsilon * (1.0 - 1e-12) {
        return Err(Error::ParameterTooSmall(format!(
            "m δ' = {:.4} must be at least 3ε = {:.4}",
            m as f64 * delta_prime,
            3.0 * epsilon
        )));
    }
    let period = 2.0 * std::f64::consts::PI / theta.abs();
    // m + 1 legs so that the moduli r_0..r_m are all visited.
    let points: Vec<Vector> = (0..=m + 1)
        .map(|i| Vector::from_real(&[1.0 + i as f64 * delta_prime, 0.0]))
        .collect();
    let orbit = PseudoOrbit::new(points, vec![period; m + 1], delta_prime * (1.0 + 1e-9), period, false)?;
    let rep = validate(&orbit, &rot);
    if !rep.valid {
        return Err(Error::InvalidPseudoOrbit(rep.messages.join("; ")));
    }
    let lower_bound = m as f64 * delta_prime / 2.0;
    let numeric_bound = search_rotation_candidates(&rot, &orbit, 1.0, 1.0 + (m + 1) as f64 * delta_prime)?;
    let samples = leg_samples(&orbit, &rot, 8)?;
    let oracle_sup = brute_force_shadow(&orbit, &rot, &samples, epsilon)?.certificate.sup_error;
    let agree = lower_bound > 0.0 && (numeric_bound - lower_bound).abs() <= 0.01 * lower_bound;
    Ok(RotationDemo {
        certified: delta_prime > 0.0 && lower_bound > epsilon && numeric_bound > epsilon && agree,
        pseudo_orbit: orbit,
        lower_bound,
        numeric_bound,
        oracle_sup,
        epsilon,
    })
}

/// Minimizes the sampled sup error over `x = r (cos φ, sin φ)`: ternary
/// search in `r` (the error is convex in `x`) for a ring of phases.
fn search_rotation_candidates(rot: &MatrixSemigroup, orbit: &PseudoOrbit, r_lo: f64, r_hi: f64) -> Result<f64> {
    let sup_at = |r: f64, phi: f64| -> Result<f64> {
        let x = Vector::from_real(&[r * phi.cos(), r * phi.sin()]);
        Ok(verify_shadowing(&x, orbit, rot, f64::INFINITY, 4)?.sup_error)
    };
    let mut best = f64::INFINITY;
    for k in 0..16 {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
        let (mut a, mut b) = (r_lo.min(r_hi) * 0.5, r_hi.max(r_lo) * 1.5);
        for _ in 0..80 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if sup_at(m1, phi)? <= sup_at(m2, phi)? {
                b = m2;
            } else {
                a = m1;
            }
        }
        best = best.min(sup_at(0.5 * (a + b), phi)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GhRecurrenceReport {
    pub support_j: Option<i64>,
    pub h: f64,
    /// `(t, |T(t)u|)` until the forward image is below `δ/2`.
    pub forward_norms: Vec<[f64; 2]>,
    /// `(t, |T(t)^{-1}u|)` until the backward image is below `δ/2`.
    pub backward_norms: Vec<[f64; 2]>,
    /// Step ratio `e^{-h}` holds once the forward support has crossed to `j < 0`.
    pub forward_decay_ok: bool,
    pub backward_decay_ok: bool,
    /// The chain `u -> 0 -> v -> u` with `v = T(t_b)^{-1}u`.
    pub chain: PseudoOrbit,
    pub chain_jumps: Vec<f64>,
    pub chain_closes: bool,
    /// Spectrum test on the window map closed into a ring.
    pub ring_check: HyperbolicityCheck,
    /// Nonzero recurrent point found, so the model cannot be hyperbolic.
    pub not_hyperbolic: bool,
}

/// Builds a `(δ, R)`-chain from `u = e_j` back to itself through `0`.
pub fn gh_recurrence_demo(model: &GhShiftModel, support_j: Option<i64>, delta: f64, r: f64) -> Result<GhRecurrenceReport> {
    if !(delta > 0.0 && r > 0.0) {
        return Err(Error::InvalidParameter("need δ > 0 and R > 0".into()));
    }
    let d = model.dim();
    let h = model.h;
    let m = model.m as i64;
    let min_steps = (r / h - 1e-9).ceil().max(1.0) as usize;
    let ring_check = check_hyperbolic_map(&model.ring_closure_step(), h, DEFAULT_GAP_TOL)?;

    let Some(j) = support_j else {
        let zero = Vector::zeros(d);
        let t = min_steps as f64 * h;
        let chain = PseudoOrbit::new(vec![zero.clone(), zero], vec![t], delta, t, false)?;
        return Ok(GhRecurrenceReport {
            support_j: None,
            h,
            forward_norms: vec![[0.0, 0.0]],
            backward_norms: vec![[0.0, 0.0]],
            forward_decay_ok: true,
            backward_decay_ok: true,
            chain,
            chain_jumps: vec![0.0],
            chain_closes: true,
            ring_check,
            not_hyperbolic: false,
        });
    };
    let edge = m - WINDOW_GUARD as i64;
    if j.abs() > edge {
        return Err(Error::WindowExit(format!("support {j} is within {WINDOW_GUARD} cells of the edge")));
    }
    let u = Vector::basis(d, model.index(j));
    let target = delta / 2.0;
    let ratio = (-h).exp();

    // Forward: support moves to j - k.
    let mut forward_norms = vec![[0.0, 1.0]];
    let mut forward_decay_ok = true;
    let mut k_f = 0usize;
    let mut prev = 1.0;
    loop {
        k_f += 1;
        if j - k_f as i64 <= -edge {
            return Err(Error::WindowExit("forward image reached the window edge; enlarge m".into()));
        }
        let v = model.apply(k_f as f64 * h, &u)?.norm();
        forward_norms.push([k_f as f64 * h, v]);
        if j < k_f as i64 {
            forward_decay_ok &= (v / prev - ratio).abs() <= 1e-12;
        }
        prev = v;
        if v < target && k_f >= min_steps {
            break;
        }
    }
    // Backward: support moves to j + k.
    let mut backward_norms = vec![[0.0, 1.0]];
    let mut backward_decay_ok = true;
    let mut k_b = 0usize;
    let mut prev = 1.0;
    loop {
        k_b += 1;
        if j + k_b as i64 >= edge {
            return Err(Error::WindowExit("backward image reached the window edge; enlarge m".into()));
        }
        let v = model.apply_inverse(k_b as f64 * h, &u)?.norm();
        backward_norms.push([k_b as f64 * h, v]);
        if j + (k_b as i64) > 0 {
            backward_decay_ok &= (v / prev - ratio).abs() <= 1e-12;
        }
        prev = v;
        if v < target && k_b >= min_steps {
            break;
        }
    }
    let v = model.apply_inverse(k_b as f64 * h, &u)?;
    let zero = Vector::zeros(d);
    let durations = vec![k_f as f64 * h, min_steps as f64 * h, k_b as f64 * h];
    let chain = PseudoOrbit::new(vec![u.clone(), zero, v, u], durations, delta, r, false)?;
    let rep = validate(&chain, model);
    let chain_closes = rep.valid && rep.jump_norms.iter().all(|&x| x < delta);
    Ok(GhRecurrenceReport {
        support_j: Some(j),
        h,
        forward_norms,
        backward_norms,
        forward_decay_ok,
        backward_decay_ok,
        chain_jumps: rep.jump_norms,
        chain,
        chain_closes,
        not_hyperbolic: chain_closes && !ring_check.hyperbolic,
        ring_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_gh_shift, make_rotation, make_scalar, WeightConvention};
    use crate::semigroup::MatrixSemigroup;
    use std::collections::VecDeque;

    /// Reachability oracle: `i` is recurrent iff BFS from its successors returns to it.
    fn bfs_recurrent(g: &ChainGraph) -> Vec<usize> {
        let adj = g.successors();
        (0..g.nodes.len())
            .filter(|&i| {
                let mut seen = vec![false; adj.len()];
                let mut queue: VecDeque<usize> = adj[i].iter().copied().collect();
                while let Some(k) = queue.pop_front() {
                    if k == i {
                        return true;
                    }
                    if !seen[k] {
                        seen[k] = true;
                        queue.extend(adj[k].iter().copied());
                    }
                }
                false
            })
            .collect()
    }

    #[test]
    fn nonwandering_examples() {
        let sc = make_scalar(-1.0);
        assert!(is_nonwandering(&Vector::zeros(1), &sc, 0.1, 1.0, 10.0, 8).unwrap());
        assert!(!is_nonwandering(&Vector::from_real(&[1.0]), &sc, 0.1, 1.0, 10.0, 8).unwrap());
        let rot = make_rotation(1.0).unwrap();
        assert!(is_nonwandering(&Vector::from_real(&[1.0, 0.0]), &rot, 0.1, 1.0, 7.0, 8).unwrap());
    }

    #[test]
    fn saddle_collapses_to_origin() {
        let saddle = MatrixSemigroup::from_real(2, &[-1.0, 0.0, 0.0, 1.0]).unwrap();
        let (rec, g) = chain_recurrent_set(&saddle, box_grid(2, 1.0, 0.1), 0.02, 1.0, 10.0).unwrap();
        assert_eq!(rec, vec![g.nearest_to_origin().unwrap()]);
        assert_eq!(rec, bfs_recurrent(&g));
    }

    #[test]
    fn scalar_collapses_to_origin() {
        let sc = make_scalar(-1.0);
        let (rec, g) = chain_recurrent_set(&sc, box_grid(1, 1.0, 0.1), 0.02, 1.0, 10.0).unwrap();
        assert_eq!(rec, vec![10]);
        assert_eq!(g.nodes[10].norm(), 0.0);
    }

    #[test]
    fn rotation_circle_all_recurrent() {
        let rot = make_rotation(1.0).unwrap();
        let nodes = circle_grid(64, 1.0);
        let spacing = 2.0 * (std::f64::consts::PI / 64.0).sin();
        let (rec, g) = chain_recurrent_set(&rot, nodes, 1.5 * spacing, 1.0, 10.0).unwrap();
        assert_eq!(rec, (0..64).collect::<Vec<_>>());
        assert_eq!(rec, bfs_recurrent(&g));
    }

    #[test]
    fn rotation_demo_values() {
        let d = rotation_no_shadowing_demo(1.0, 0.1, 0.01, 30).unwrap();
        assert!((d.lower_bound - 0.15).abs() < 1e-12);
        assert!(d.certified);
        assert!((d.numeric_bound - d.lower_bound).abs() <= 0.01 * d.lower_bound);
        assert!(d.oracle_sup > 0.1);
        assert!(matches!(
            rotation_no_shadowing_demo(1.0, 0.1, 0.01, 20),
            Err(Error::ParameterTooSmall(_))
        ));
        let exact = rotation_no_shadowing_demo(1.0, 0.1, 0.0, 30).unwrap();
        assert!(!exact.certified);
        assert!(exact.numeric_bound < 1e-9);
    }

    #[test]
    fn gh_chain_closes() {
        let model = make_gh_shift(32, 0.5, WeightConvention::ExpNegAbs).unwrap();
        let rep = gh_recurrence_demo(&model, Some(4), 0.05, 1.0).unwrap();
        assert!(rep.chain_closes);
        assert!(rep.forward_decay_ok && rep.backward_decay_ok);
        assert!(!rep.ring_check.hyperbolic);
        assert!(rep.not_hyperbolic);
        assert_eq!(rep.chain.durations, vec![8.0, 1.0, 4.0]);
        assert!(gh_recurrence_demo(&model, Some(31), 0.05, 1.0).is_err());
        let zero = gh_recurrence_demo(&model, None, 0.05, 1.0).unwrap();
        assert!(zero.chain_closes);
    }
}
