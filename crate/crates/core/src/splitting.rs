//! Hyperbolicity tests and the stable/unstable splitting `X = M ⊕ N`.
//!
//! The splitting is assembled from a complex Schur form reordered so that
//! the stable eigenvalues come first, then block-diagonalized with a
//! Sylvester solve. Component flows `e^{tA} P_M` and `e^{-tA} P_N` are
//! evaluated on the diagonal blocks, so neither ever sees the modes of the
//! other subspace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64};
use crate::semigroup::{MatrixSemigroup, Semigroup, Vector};
use crate::shadowing::{RateBound, RateDirection};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperbolicityCheck {
    pub hyperbolic: bool,
    /// Minimum distance of `σ(T(1))` to the unit circle.
    pub gap: f64,
    /// `[re, im]` of the eigenvalues of `T(1)`.
    pub time_one_spectrum: Vec<[f64; 2]>,
}

fn hyperbolicity_from_moduli(spectrum: &[C64], moduli: &[f64], gap_tol: f64) -> HyperbolicityCheck {
    let gap = moduli.iter().map(|r| (r - 1.0).abs()).fold(f64::INFINITY, f64::min);
    HyperbolicityCheck {
        hyperbolic: gap > gap_tol,
        gap,
        time_one_spectrum: spectrum.iter().map(|z| [z.re, z.im]).collect(),
    }
}

/// Tests whether `σ(T(1))` avoids the unit circle by more than `gap_tol`.
pub fn check_hyperbolic(semigroup: &MatrixSemigroup, gap_tol: f64) -> Result<HyperbolicityCheck> {
    let time_one = semigroup.map_matrix(1.0)?;
    let spectrum = linalg::eigenvalues(&time_one)?;
    let moduli: Vec<f64> = spectrum.iter().map(|z| z.norm()).collect();
    Ok(hyperbolicity_from_moduli(&spectrum, &moduli, gap_tol))
}

/// Same test for a semigroup known only through its time-`step` map:
/// time-one moduli are `|μ|^{1/step}`.
pub fn check_hyperbolic_map(step_map: &CMatrix, step: f64, gap_tol: f64) -> Result<HyperbolicityCheck> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let spectrum = linalg::eigenvalues(step_map)?;
    let moduli: Vec<f64> = spectrum.iter().map(|z| z.norm().powf(1.0 / step)).collect();
    Ok(hyperbolicity_from_moduli(&spectrum, &moduli, gap_tol))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralCondition {
    pub no_imaginary_spectrum: bool,
    pub min_abs_real: f64,
    /// Largest sampled `|(iω - A)^{-1}|`; infinite when the spectrum meets iℝ.
    pub resolvent_sup: f64,
    pub argmax_omega: f64,
    pub omegas: Vec<f64>,
}

pub const SPECTRAL_TOL: f64 = 1e-8;

/// Sample frequencies: 0 plus `±` log-spaced points up to `omega_max`.
pub fn resolvent_frequencies(omega_max: f64, n_samples: usize) -> Vec<f64> {
    let half = (n_samples - 1) / 2;
    let lo = (omega_max * 1e-3).clamp(f64::MIN_POSITIVE, 1e-2);
    let mut out = vec![0.0];
    for k in 0..half {
        let frac = if half == 1 { 1.0 } else { k as f64 / (half - 1) as f64 };
        let w = lo * (omega_max / lo).powf(frac);
        out.push(w);
        out.push(-w);
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Checks that `σ(A)` misses the imaginary axis and samples the resolvent
/// norm along it.
pub fn check_spectral_condition(a: &CMatrix, omega_max: f64, n_samples: usize) -> Result<SpectralCondition> {
    if n_samples < 3 {
        return Err(Error::InvalidParameter("need at least 3 resolvent samples".into()));
    }
    let spectrum = linalg::eigenvalues(a)?;
    let min_abs_real = spectrum.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let omegas = resolvent_frequencies(omega_max, n_samples);
    if min_abs_real <= SPECTRAL_TOL {
        return Ok(SpectralCondition {
            no_imaginary_spectrum: false,
            min_abs_real,
            resolvent_sup: f64::INFINITY,
            argmax_omega: f64::NAN,
            omegas,
        });
    }
    let n = a.nrows();
    let mut sup = 0.0;
    let mut arg = 0.0;
    for &w in &omegas {
        let shifted = CMatrix::identity(n, n) * c(0.0, w) - a;
        let smin = linalg::sigma_min(&shifted);
        if smin <= f64::EPSILON * (1.0 + a.norm()) {
            return Err(Error::SingularResolvent(w));
        }
        let r = 1.0 / smin;
        if r > sup {
            sup = r;
            arg = w;
        }
    }
    Ok(SpectralCondition {
        no_imaginary_spectrum: true,
        min_abs_real,
        resolvent_sup: sup,
        argmax_omega: arg,
        omegas,
    })
}

/// Bound rounding applied to the sampled sup unless the sampled profile is
/// non-increasing (then the sup is the exact value at `t = 0`).
pub const K_ROUNDUP: f64 = 1.05;
pub const K_SAMPLES: usize = 400;
pub const CERT_SAMPLES: usize = 200;
pub const DEFAULT_MARGIN: f64 = 0.9;
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// `X = M ⊕ N` with `|T(t)|_M| <= K_M e^{-λ_M t}` and
/// `|(T(t)|_N)^{-1}| <= K_N e^{-λ_N t}`.
#[derive(Debug, Clone)]
pub struct HyperbolicSplitting {
    pub p_m: CMatrix,
    pub p_n: CMatrix,
    pub k_m: f64,
    pub lambda_m: f64,
    pub k_n: f64,
    pub lambda_n: f64,
    pub gap: f64,
    pub horizon: f64,
    pub dim_m: usize,
    pub dim_n: usize,
    /// `Q S` and `(Q S)^{-1}` of the block diagonalization.
    basis: CMatrix,
    basis_inv: CMatrix,
    stable_block: Option<MatrixSemigroup>,
    unstable_block: Option<MatrixSemigroup>,
}

impl HyperbolicSplitting {
    pub fn dim(&self) -> usize {
        self.p_m.nrows()
    }

    fn lift(&self, block: Option<CMatrix>, stable: bool) -> CMatrix {
        let n = self.dim();
        let mut mid = CMatrix::zeros(n, n);
        if let Some(b) = block {
            let off = if stable { 0 } else { self.dim_m };
            mid.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(&b);
        }
        &self.basis * mid * &self.basis_inv
    }

    /// `e^{tA} P_M`
    pub fn stable_flow(&self, t: f64) -> CMatrix {
        self.lift(self.stable_block.as_ref().map(|s| s.exp(t)), true)
    }

    /// `e^{tA} P_N`
    pub fn unstable_flow(&self, t: f64) -> CMatrix {
        self.lift(self.unstable_block.as_ref().map(|s| s.exp(t)), false)
    }

    /// `e^{-tA} P_N`
    pub fn unstable_inverse_flow(&self, t: f64) -> CMatrix {
        self.lift(self.unstable_block.as_ref().map(|s| s.exp(-t)), false)
    }

    pub fn project_m(&self, x: &Vector) -> Vector {
        &self.p_m * x
    }

    pub fn project_n(&self, x: &Vector) -> Vector {
        &self.p_n * x
    }

    pub fn stable_bound(&self) -> RateBound {
        RateBound {
            k: self.k_m,
            lambda: self.lambda_m,
            direction: RateDirection::ForwardContraction,
        }
    }

    pub fn unstable_bound(&self) -> RateBound {
        RateBound {
            k: self.k_n,
            lambda: self.lambda_n,
            direction: RateDirection::InverseContraction,
        }
    }

    /// `max(|P_M|, |P_N|)`; jumps of ambient size `δ / this` have coupled
    /// size at most `δ`.
    pub fn projection_scale(&self) -> f64 {
        linalg::sigma_max(&self.p_m).max(linalg::sigma_max(&self.p_n))
    }

    pub fn summary(&self) -> SplittingSummary {
        SplittingSummary {
            dim_m: self.dim_m,
            dim_n: self.dim_n,
            k_m: self.k_m,
            lambda_m: self.lambda_m,
            k_n: self.k_n,
            lambda_n: self.lambda_n,
            gap: self.gap,
            horizon: self.horizon,
            norm_p_m: linalg::sigma_max(&self.p_m),
            norm_p_n: linalg::sigma_max(&self.p_n),
            constants: "empirical: sampled sup over [0, horizon], rounded up 5% unless the profile is non-increasing".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplittingSummary {
    pub dim_m: usize,
    pub dim_n: usize,
    pub k_m: f64,
    pub lambda_m: f64,
    pub k_n: f64,
    pub lambda_n: f64,
    pub gap: f64,
    pub horizon: f64,
    pub norm_p_m: f64,
    pub norm_p_n: f64,
    pub constants: String,
}

/// Sampled `sup_t f(t)` with the roundup rule.
fn certify_constant(horizon: f64, mut profile: impl FnMut(f64) -> f64) -> f64 {
    let values: Vec<f64> = (0..=K_SAMPLES)
        .map(|k| profile(horizon * k as f64 / K_SAMPLES as f64))
        .collect();
    let sup = values.iter().copied().fold(0.0, f64::max);
    let monotone = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let k = if monotone { sup } else { sup * K_ROUNDUP };
    k.max(1.0)
}

/// Computes `M ⊕ N`, the decay rates (`margin` times the spectral abscissae)
/// and the constants `K_M`, `K_N` certified on `[0, horizon]`.
/// `horizon = None` uses `50 / min(λ_M, λ_N)`.
pub fn compute_splitting(
    semigroup: &MatrixSemigroup,
    horizon: Option<f64>,
    margin: f64,
) -> Result<HyperbolicSplitting> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidParameter("margin must lie in (0, 1)".into()));
    }
    let check = check_hyperbolic(semigroup, DEFAULT_GAP_TOL)?;
    if !check.hyperbolic {
        return Err(Error::NotHyperbolic { gap: check.gap });
    }
    let a = semigroup.matrix();
    let n = a.nrows();
    let (mut q, mut t) = linalg::schur(a)?;
    // Stable eigenvalues to the front by adjacent swaps.
    for pass in 0..n {
        let mut swapped = false;
        for k in 0..n.saturating_sub(1 + pass) {
            if t[(k, k)].re > 0.0 && t[(k + 1, k + 1)].re < 0.0 {
                linalg::swap_schur(&mut q, &mut t, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let dim_m = (0..n).filter(|&i| t[(i, i)].re < 0.0).count();
    let dim_n = n - dim_m;
    let t11 = t.view((0, 0), (dim_m, dim_m)).clone_owned();
    let t22 = t.view((dim_m, dim_m), (dim_n, dim_n)).clone_owned();
    let t12 = t.view((0, dim_m), (dim_m, dim_n)).clone_owned();
    let mut s = CMatrix::identity(n, n);
    let mut s_inv = CMatrix::identity(n, n);
    if dim_m > 0 && dim_n > 0 {
        let x = linalg::solve_triangular_sylvester(&t11, &t22, &(-t12));
        s.view_mut((0, dim_m), (dim_m, dim_n)).copy_from(&x);
        s_inv.view_mut((0, dim_m), (dim_m, dim_n)).copy_from(&(-x));
    }
    let basis = &q * s;
    let basis_inv = s_inv * q.adjoint();
    let stable_block = (dim_m > 0).then(|| MatrixSemigroup::new(t11)).transpose()?;
    let unstable_block = (dim_n > 0).then(|| MatrixSemigroup::new(t22)).transpose()?;

    let spectrum = linalg::eigenvalues(a)?;
    let abscissa = |stable: bool| {
        spectrum
            .iter()
            .filter(|z| (z.re < 0.0) == stable)
            .map(|z| z.re.abs())
            .fold(f64::INFINITY, f64::min)
    };
    let lambda_m = if dim_m > 0 { margin * abscissa(true) } else { f64::NAN };
    let lambda_n = if dim_n > 0 { margin * abscissa(false) } else { f64::NAN };
    let slowest = [lambda_m, lambda_n]
        .into_iter()
        .filter(|l| l.is_finite())
        .fold(f64::INFINITY, f64::min);
    let horizon = horizon.unwrap_or(50.0 / slowest);

    let mut split = HyperbolicSplitting {
        p_m: CMatrix::zeros(n, n),
        p_n: CMatrix::zeros(n, n),
        k_m: 1.0,
        lambda_m: if dim_m > 0 { lambda_m } else { lambda_n },
        k_n: 1.0,
        lambda_n: if dim_n > 0 { lambda_n } else { lambda_m },
        gap: check.gap,
        horizon,
        dim_m,
        dim_n,
        basis,
        basis_inv,
        stable_block,
        unstable_block,
    };
    split.p_m = split.stable_flow(0.0);
    split.p_n = split.unstable_flow(0.0);
    if dim_m > 0 {
        split.k_m = certify_constant(horizon, |s| {
            linalg::sigma_max(&split.stable_flow(s)) * (split.lambda_m * s).exp()
        });
    }
    if dim_n > 0 {
        split.k_n = certify_constant(horizon, |s| {
            linalg::sigma_max(&split.unstable_inverse_flow(s)) * (split.lambda_n * s).exp()
        });
    }
    Ok(split)
}

/// Defects of the splitting identities and decay bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitCertificate {
    pub idempotent_defect: f64,
    pub complement_defect: f64,
    pub orthogonality_defect: f64,
    /// `|P_M T(t) - T(t) P_M| / max(1, |T(t)|)` over `t` in `[0, 2]`.
    pub commutation_defect: f64,
    /// Largest `|T(t)P_M| - K_M e^{-λ_M t}` over the certification samples.
    pub stable_decay_violation: f64,
    pub unstable_decay_violation: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Checks the projection algebra and the decay inequalities at
/// [`CERT_SAMPLES`] midpoints of `[0, horizon]` (disjoint from the grid used
/// to fit the constants).
pub fn certify_splitting(
    semigroup: &MatrixSemigroup,
    split: &HyperbolicSplitting,
    tol: f64,
) -> Result<SplitCertificate> {
    let n = split.dim();
    let id = CMatrix::identity(n, n);
    let idempotent_defect = linalg::max_abs_diff(&(&split.p_m * &split.p_m), &split.p_m)
        .max(linalg::max_abs_diff(&(&split.p_n * &split.p_n), &split.p_n));
    let complement_defect = linalg::max_abs_diff(&(&split.p_m + &split.p_n), &id);
    let orthogonality_defect = (&split.p_m * &split.p_n).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut commutation_defect: f64 = 0.0;
    for k in 0..=10 {
        let t = 0.2 * k as f64;
        let tm = semigroup.map_matrix(t)?;
        let d = linalg::max_abs_diff(&(&split.p_m * &tm), &(&tm * &split.p_m));
        commutation_defect = commutation_defect.max(d / linalg::sigma_max(&tm).max(1.0));
    }
    let mut stable_decay_violation: f64 = f64::NEG_INFINITY;
    let mut unstable_decay_violation: f64 = f64::NEG_INFINITY;
    for k in 0..CERT_SAMPLES {
        let t = split.horizon * (k as f64 + 0.5) / CERT_SAMPLES as f64;
        if split.dim_m > 0 {
            let lhs = linalg::sigma_max(&split.stable_flow(t));
            stable_decay_violation =
                stable_decay_violation.max(lhs - split.k_m * (-split.lambda_m * t).exp());
        }
        if split.dim_n > 0 {
            let lhs = linalg::sigma_max(&split.unstable_inverse_flow(t));
            unstable_decay_violation =
                unstable_decay_violation.max(lhs - split.k_n * (-split.lambda_n * t).exp());
        }
    }
    let passed = idempotent_defect <= tol
        && complement_defect <= tol
        && orthogonality_defect <= tol
        && commutation_defect <= tol
        && stable_decay_violation <= 0.0
        && unstable_decay_violation <= 0.0;
    Ok(SplitCertificate {
        idempotent_defect,
        complement_defect,
        orthogonality_defect,
        commutation_defect,
        stable_decay_violation,
        unstable_decay_violation,
        samples: CERT_SAMPLES,
        passed,
    })
}

/// The component semigroup `t -> T(t) P` for one half of a splitting.
#[derive(Debug, Clone, Copy)]
pub struct ComponentFlow<'a> {
    pub split: &'a HyperbolicSplitting,
    pub stable: bool,
}

impl Semigroup for ComponentFlow<'_> {
    fn dim(&self) -> usize {
        self.split.dim()
    }

    fn map_matrix(&self, t: f64) -> Result<CMatrix> {
        self.check_time(t)?;
        Ok(if self.stable {
            self.split.stable_flow(t)
        } else {
            self.split.unstable_flow(t)
        })
    }

    fn inverse_matrix(&self, t: f64) -> Result<CMatrix> {
        self.check_time(t)?;
        if self.stable {
            return Err(Error::NotInvertible);
        }
        Ok(self.split.unstable_inverse_flow(t))
    }

    fn has_inverse(&self) -> bool {
        !self.stable
    }
}
