//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::time::{Duration, Instant};

use shadowlab::cli::{canned_config, shadow, Command, DemoKind};
use shadowlab::models::{
    gh_identity_defect, gh_inequality_violation, make_gh_shift, make_heat, make_rotation, make_scalar,
    verify_gh_convention, WeightConvention,
};
use shadowlab::pseudo_orbit::{from_perturbed_orbit, Anchor, DurationRule, JumpRule};
use shadowlab::recurrence::{box_grid, chain_recurrent_set, circle_grid, gh_recurrence_demo, rotation_no_shadowing_demo};
use shadowlab::shadowing::{
    brute_force_shadow, delta_for_epsilon_stable, delta_for_epsilon_unstable, hyperbolic_requirements,
    shadow_hyperbolic, shadow_stable, shadow_unstable, RateBound, RateDirection, ShadowCertificate,
};
use shadowlab::splitting::{certify_splitting, compute_splitting, HyperbolicSplitting, DEFAULT_MARGIN};
use shadowlab::{MatrixSemigroup, Semigroup, Vector};

const SEEDS: u64 = 100;
const LEGS: usize = 100;
const HYPERBOLIC_INSTANCES: u64 = 50;
const RHO: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Duration, f: impl FnOnce() -> Result<Outcome, String>) -> Outcome {
    let start = Instant::now();
    let out = f().unwrap_or_else(|e| Outcome {
        pass: false,
        detail: format!("error: {e}"),
    });
    let elapsed = start.elapsed();
    Outcome {
        pass: out.pass && elapsed <= limit,
        detail: format!("{}; {:.2}s (limit {:.0}s)", out.detail, elapsed.as_secs_f64(), limit.as_secs_f64()),
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn stable_scalar() -> (MatrixSemigroup, RateBound) {
    (
        make_scalar(-1.0),
        RateBound::new(1.0, 1.0, RateDirection::ForwardContraction).expect("valid"),
    )
}

fn unstable_scalar() -> (MatrixSemigroup, RateBound) {
    (
        make_scalar(1.0),
        RateBound::new(1.0, 1.0, RateDirection::InverseContraction).expect("valid"),
    )
}

fn criterion_1() -> Result<Outcome, String> {
    let eps = 0.1;
    let (sg, bound) = stable_scalar();
    let sp = delta_for_epsilon_stable(&bound, eps, 1.0).map_err(err)?;
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let p = from_perturbed_orbit(&sg, Anchor::Initial(Vector::from_real(&[1.0])), LEGS,
            DurationRule::Constant { t: sp.r }, &JumpRule::constant(sp.delta), seed).map_err(err)?;
        let cert = shadow_stable(&p, &sg, &bound, eps, 8).map_err(err)?;
        worst = worst.max(cert.sup_error);
    }
    // Aligned jumps from 0: x_i = δ (1 - e^{-i}) / (1 - e^{-1}) = ε (1 - e^{-i}).
    let p = from_perturbed_orbit(&sg, Anchor::Initial(Vector::zeros(1)), LEGS, DurationRule::Constant { t: sp.r },
        &JumpRule::constant(sp.delta).along(Vector::from_real(&[1.0])), 0).map_err(err)?;
    let cert = shadow_stable(&p, &sg, &bound, eps, 8).map_err(err)?;
    let expected_sup = eps * (1.0 - (-((LEGS - 1) as f64)).exp());
    let per_index = cert
        .leg_start_errors(&p)
        .iter()
        .enumerate()
        .map(|(i, e)| (e - eps * (1.0 - (-(i as f64)).exp())).abs())
        .fold(0.0, f64::max);
    let sup_dev = (cert.sup_error - expected_sup).abs();
    let eps_dev = (cert.sup_error - eps).abs();
    Ok(Outcome {
        pass: worst <= eps && sup_dev <= 1e-10 && eps_dev <= 1e-9 && per_index <= 1e-10,
        detail: format!(
            "δ={:.6}, R={}, random sup={worst:.6} <= ε={eps}, aligned sup-ε={eps_dev:.1e}, per-index dev={per_index:.1e}",
            sp.delta, sp.r
        ),
    })
}

fn criterion_2() -> Result<Outcome, String> {
    let eps = 0.1;
    let (sg, bound) = unstable_scalar();
    let delta = delta_for_epsilon_unstable(&bound, eps).map_err(err)?;
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let p = from_perturbed_orbit(&sg, Anchor::Terminal(Vector::from_real(&[1.0])), LEGS,
            DurationRule::Constant { t: 1.0 }, &JumpRule::constant(delta), seed).map_err(err)?;
        let cert = shadow_unstable(&p, &sg, &bound, eps, 8).map_err(err)?;
        worst = worst.max(cert.sup_error);
    }
    // Aligned jumps into 0: |x_i| = δ Σ_{k=1}^{n-i} e^{-k} = δ (1 - e^{-(n-i)}) / (e - 1).
    let p = from_perturbed_orbit(&sg, Anchor::Terminal(Vector::zeros(1)), LEGS, DurationRule::Constant { t: 1.0 },
        &JumpRule::constant(delta).along(Vector::from_real(&[1.0])), 0).map_err(err)?;
    let cert = shadow_unstable(&p, &sg, &bound, eps, 8).map_err(err)?;
    let e1 = std::f64::consts::E - 1.0;
    let errors = cert.leg_start_errors(&p);
    let mut finite_dev: f64 = 0.0;
    let mut limit_dev: f64 = 0.0;
    let mut limit_indices = 0;
    for (i, e) in errors.iter().enumerate() {
        let tail = (-((LEGS - i) as f64)).exp();
        finite_dev = finite_dev.max((e - delta * (1.0 - tail) / e1).abs());
        if tail * delta / e1 < 1e-10 {
            limit_dev = limit_dev.max((e - delta / e1).abs());
            limit_indices += 1;
        }
    }
    Ok(Outcome {
        pass: worst <= eps && finite_dev <= 1e-9 && limit_dev <= 1e-9 && limit_indices > 0,
        detail: format!(
            "δ={delta:.6}, random sup={worst:.6} <= ε={eps}, finite closed form dev={finite_dev:.1e}, δ/(e-1) dev={limit_dev:.1e} on {limit_indices} indices"
        ),
    })
}

struct Instance {
    seed: u64,
    sg: MatrixSemigroup,
    split: HyperbolicSplitting,
}

fn instances() -> Vec<Instance> {
    (0..HYPERBOLIC_INSTANCES)
        .filter_map(|seed| {
            let (sg, _) = common::random_hyperbolic(seed, 8);
            let split = compute_splitting(&sg, None, DEFAULT_MARGIN).ok()?;
            Some(Instance { seed, sg, split })
        })
        .collect()
}

fn hyperbolic_run(inst: &Instance, eps: f64, jumps: JumpRule, terminal: Vector) -> Result<ShadowCertificate, String> {
    let req = hyperbolic_requirements(&inst.split, eps, 1.0).map_err(err)?;
    let ambient = req.delta / inst.split.projection_scale();
    let jumps = JumpRule { delta: ambient, ..jumps };
    let dim = inst.sg.dim();
    let mut x0 = vec![0.0; dim];
    x0[0] = 1.0;
    let anchor = Anchor::Split {
        initial: Vector::from_real(&x0),
        terminal,
        split: &inst.split,
    };
    let p = from_perturbed_orbit(&inst.sg, anchor, LEGS, DurationRule::Constant { t: req.r }, &jumps, inst.seed)
        .map_err(err)?;
    let cert = shadow_hyperbolic(&p, &inst.sg, &inst.split, eps, 4).map_err(err)?;
    if jumps.size == shadowlab::pseudo_orbit::JumpSize::Constant {
        let oracle = brute_force_shadow(&p, &inst.sg, &cert.sample_times, eps).map_err(err)?;
        let constructive = cert.sup_error_ambient.unwrap_or(cert.sup_error);
        if oracle.certificate.sup_error > constructive + 1e-9 {
            return Err(format!(
                "seed {}: oracle sup {:.3e} above constructive {:.3e}",
                inst.seed, oracle.certificate.sup_error, constructive
            ));
        }
    }
    Ok(cert)
}

fn criterion_3(inst: &[Instance]) -> Result<Outcome, String> {
    let eps = 1e-2;
    let mut worst: f64 = 0.0;
    let mut passed = 0;
    for i in inst {
        let dim = i.sg.dim();
        let mut xn = vec![0.0; dim];
        xn[dim - 1] = 1.0;
        let cert = hyperbolic_run(i, eps, JumpRule::constant(0.0), Vector::from_real(&xn))?;
        worst = worst.max(cert.sup_error);
        passed += cert.pass_eps as usize;
    }
    Ok(Outcome {
        pass: inst.len() as u64 == HYPERBOLIC_INSTANCES && passed == inst.len(),
        detail: format!(
            "{passed}/{} instances pass in the coupled norm, worst sup={worst:.3e} <= ε={eps}, oracle dominance held",
            inst.len()
        ),
    })
}

fn strict_limit(cert: &ShadowCertificate) -> bool {
    cert.pass_limit && cert.limit_bound.is_some_and(|b| cert.tail_sup <= b)
}

fn criterion_4(inst: &[Instance]) -> Result<Outcome, String> {
    let eps = 0.1;
    let mut failures = Vec::new();

    let (sg, bound) = stable_scalar();
    let sp = delta_for_epsilon_stable(&bound, eps, 1.0).map_err(err)?;
    let p = from_perturbed_orbit(&sg, Anchor::Initial(Vector::from_real(&[1.0])), LEGS,
        DurationRule::Constant { t: sp.r }, &JumpRule::decaying(sp.delta, RHO), 1).map_err(err)?;
    let stable = shadow_stable(&p, &sg, &bound, eps, 8).map_err(err)?;
    if !strict_limit(&stable) {
        failures.push("scalar stable".to_string());
    }

    let (sg, bound) = unstable_scalar();
    let delta = delta_for_epsilon_unstable(&bound, eps).map_err(err)?;
    let p = from_perturbed_orbit(&sg, Anchor::Terminal(Vector::zeros(1)), LEGS,
        DurationRule::Constant { t: 1.0 }, &JumpRule::decaying(delta, RHO), 1).map_err(err)?;
    let unstable = shadow_unstable(&p, &sg, &bound, eps, 8).map_err(err)?;
    if !strict_limit(&unstable) {
        failures.push("scalar unstable".to_string());
    }

    for i in inst {
        let cert = hyperbolic_run(i, 1e-2, JumpRule::decaying(0.0, RHO), Vector::zeros(i.sg.dim()))?;
        if !strict_limit(&cert) {
            failures.push(format!(
                "hyperbolic seed {} (tail {:.3e} vs bound {:.3e})",
                i.seed,
                cert.tail_sup,
                cert.limit_bound.unwrap_or(f64::NAN)
            ));
        }
    }
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "ρ={RHO}: tail_sup <= C sup_(k>=n/2)|h_k| on 2 scalar + {} hyperbolic orbits (stable tail {:.1e} <= {:.1e})",
                inst.len(),
                stable.tail_sup,
                stable.limit_bound.unwrap_or(f64::NAN)
            )
        } else {
            format!("failed: {}", failures.join(", "))
        },
    })
}

fn criterion_5() -> Result<Outcome, String> {
    let config = canned_config(&Command::Demo { which: DemoKind::Heat });
    let heat = make_heat(32, std::f64::consts::PI).map_err(err)?;
    let h = heat.step();
    let discrete = 4.0 / (h * h) * (h / 2.0).sin().powi(2);
    let formula_dev = (heat.decay_rate - discrete).abs();
    let rel = (heat.decay_rate - 1.0).abs();
    let run = shadow(&config).map_err(err)?;
    let c = &run.certificate;
    Ok(Outcome {
        pass: rel <= 3e-3 && formula_dev <= 1e-10 && c.pass_eps && c.pass_limit,
        detail: format!(
            "λ1={:.6} (rel err {rel:.2e}, discrete formula dev {formula_dev:.1e}), sup={:.3e}, pass_eps={}, pass_limit={}",
            heat.decay_rate, c.sup_error, c.pass_eps, c.pass_limit
        ),
    })
}

fn criterion_6() -> Result<Outcome, String> {
    let d = rotation_no_shadowing_demo(1.0, 0.1, 0.01, 30).map_err(err)?;
    let agree = (d.numeric_bound - d.lower_bound).abs() <= 0.01 * d.lower_bound;
    Ok(Outcome {
        pass: d.lower_bound >= 0.15 - 1e-12 && agree && d.certified,
        detail: format!(
            "lower bound={:.6}, numeric={:.6}, oracle sup={:.6}, certified={}",
            d.lower_bound, d.numeric_bound, d.oracle_sup, d.certified
        ),
    })
}

fn criterion_7() -> Result<Outcome, String> {
    let saddle = MatrixSemigroup::from_real(2, &[-1.0, 0.0, 0.0, 1.0]).map_err(err)?;
    let (rec, g) = chain_recurrent_set(&saddle, box_grid(2, 1.0, 0.1), 0.02, 1.0, 10.0).map_err(err)?;
    let only_origin = g.nearest_to_origin().is_some_and(|z| rec == vec![z]);

    let rot = make_rotation(1.0).map_err(err)?;
    let n = 64;
    let spacing = 2.0 * (std::f64::consts::PI / n as f64).sin();
    let (rec_rot, g_rot) = chain_recurrent_set(&rot, circle_grid(n, 1.0), 1.5 * spacing, 1.0, 10.0).map_err(err)?;
    let all = rec_rot.len() == g_rot.nodes.len();
    Ok(Outcome {
        pass: only_origin && all,
        detail: format!(
            "saddle: {} of {} nodes recurrent (origin only: {only_origin}); rotation circle: {}/{} recurrent",
            rec.len(),
            g.nodes.len(),
            rec_rot.len(),
            g_rot.nodes.len()
        ),
    })
}

fn criterion_8() -> Result<Outcome, String> {
    let mut model = make_gh_shift(32, 0.5, WeightConvention::ExpAbs).map_err(err)?;
    let convention = verify_gh_convention(&mut model).map_err(err)?;
    let identity = gh_identity_defect(&model);
    let inequality = gh_inequality_violation(&model);
    let rep = gh_recurrence_demo(&model, Some(4), 0.05, 1.0).map_err(err)?;
    Ok(Outcome {
        pass: convention == WeightConvention::ExpNegAbs
            && identity <= 1e-12
            && inequality <= 1e-12
            && rep.chain_closes
            && !rep.ring_check.hyperbolic
            && rep.not_hyperbolic,
        detail: format!(
            "convention={convention:?}, identity defect={identity:.1e}, inequality violation={inequality:.1e}, chain closes={}, ring gap={:.1e}",
            rep.chain_closes, rep.ring_check.gap
        ),
    })
}

fn criterion_9(inst: &[Instance]) -> Result<Outcome, String> {
    let mut worst_comm: f64 = 0.0;
    let mut worst_idem: f64 = 0.0;
    let mut passed = 0;
    for i in inst {
        let c = certify_splitting(&i.sg, &i.split, 1e-8).map_err(err)?;
        worst_comm = worst_comm.max(c.commutation_defect);
        worst_idem = worst_idem.max(c.idempotent_defect.max(c.complement_defect));
        passed += c.passed as usize;
    }
    Ok(Outcome {
        pass: inst.len() as u64 == HYPERBOLIC_INSTANCES && passed == inst.len(),
        detail: format!(
            "{passed}/{HYPERBOLIC_INSTANCES} splittings certified at 1e-8, worst idempotent defect={worst_idem:.1e}, worst commutation defect={worst_comm:.1e}"
        ),
    })
}

fn main() {
    let setup = Instant::now();
    let inst = instances();
    let setup = setup.elapsed();
    let results = [
        ("1 stable scalar shadowing", timed(Duration::from_secs(1), criterion_1)),
        ("2 unstable scalar shadowing", timed(Duration::from_secs(1), criterion_2)),
        ("3 hyperbolic shadowing and oracle", timed(Duration::from_secs(30).saturating_sub(setup), || criterion_3(&inst))),
        ("4 limit shadowing", timed(Duration::from_secs(60), || criterion_4(&inst))),
        ("5 heat equation", timed(Duration::from_secs(5), criterion_5)),
        ("6 rotation without shadowing", timed(Duration::from_secs(1), criterion_6)),
        ("7 chain recurrence", timed(Duration::from_secs(10), criterion_7)),
        ("8 weighted shift", timed(Duration::from_secs(5), criterion_8)),
        ("9 splitting certificates", timed(Duration::from_secs(30), || criterion_9(&inst))),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
