#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use shadowlab::linalg::{self, c, CMatrix};
use shadowlab::MatrixSemigroup;

/// Real generator `V D V^{-1}` with `D` block diagonal (1x1 real blocks and
/// 2x2 rotation blocks), real parts of modulus in `[0.2, 1]`, both signs
/// present, and `cond(V) <= 50`.
pub fn random_hyperbolic(seed: u64, max_dim: usize) -> (MatrixSemigroup, CMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..=max_dim);
    loop {
        let mut d = CMatrix::zeros(dim, dim);
        let mut signs = Vec::new();
        let mut i = 0;
        while i < dim {
            let re: f64 = rng.random_range(0.2..=1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            signs.push(re > 0.0);
            if i + 1 < dim && rng.random_bool(0.4) {
                let im: f64 = rng.random_range(0.3..2.0);
                d[(i, i)] = c(re, 0.0);
                d[(i + 1, i + 1)] = c(re, 0.0);
                d[(i, i + 1)] = c(-im, 0.0);
                d[(i + 1, i)] = c(im, 0.0);
                i += 2;
            } else {
                d[(i, i)] = c(re, 0.0);
                i += 1;
            }
        }
        if signs.iter().all(|&s| s) || signs.iter().all(|&s| !s) {
            continue;
        }
        let g = CMatrix::from_fn(dim, dim, |_, _| c(0.4 * rng.sample::<f64, _>(StandardNormal) / (dim as f64).sqrt(), 0.0));
        let v = CMatrix::identity(dim, dim) + g;
        if linalg::condition_number(&v) > 50.0 {
            continue;
        }
        let a = &v * d * linalg::inverse(&v).unwrap();
        let a = a.map(|z| c(z.re, 0.0));
        return (MatrixSemigroup::new(a.clone()).unwrap(), a);
    }
}

/// `e^{tA}` by classical RK4 on `X' = AX`, halving the step until two
/// successive results agree to `tol` relative to their size.
pub fn rk4_expm(a: &CMatrix, t: f64, tol: f64) -> CMatrix {
    let n = a.nrows();
    let run = |steps: usize| {
        let h = c(t / steps as f64, 0.0);
        let mut x = CMatrix::identity(n, n);
        for _ in 0..steps {
            let k1 = a * &x;
            let k2 = a * (&x + &k1 * (h * 0.5));
            let k3 = a * (&x + &k2 * (h * 0.5));
            let k4 = a * (&x + &k3 * h);
            x += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * (h / 6.0);
        }
        x
    };
    let mut steps = 64;
    let mut prev = run(steps);
    loop {
        steps *= 2;
        let next = run(steps);
        let scale = linalg::sigma_max(&next).max(1.0);
        if linalg::max_abs_diff(&next, &prev) / scale < tol || steps > 1 << 18 {
            return next;
        }
        prev = next;
    }
}
