//! Acceptance run: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit on
//! any failure. Reference values come from the oracles in `common`, never
//! from the routine under test.

mod common;

use std::time::{Duration, Instant};

use common::*;
use ctred::certify::{check_cor1, check_cor2, check_thm1, check_thm2_bound, check_thm3, lqg_cost, ReductionCertificate};
use ctred::experiments::{
    example_controller, example_plant, gen_instance, repro_scaling, repro_spread, unstable_example_controller,
    unstable_example_plant,
};
use ctred::lti::StateSpace;
use ctred::norms::{h2_norm_squared, hinf_norm};
use ctred::polezero::{cancellation_scale_search, partial_fractions, residue_factorization, small_block_cancellation_probe};
use ctred::reduce::{balance, balanced_truncate, balanced_truncate_unstable, modal_truncate, modal_truncate_stable};
use ctred::{Error, Matrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TABLE1_J: f64 = 8.0552;
const TABLE1_J_MODAL: f64 = 8.9928;
const TABLE1_DELTA_MODAL: f64 = 0.0580;
const TABLE1_COST_RTOL: f64 = 0.01;
const TABLE1_DELTA_RTOL: f64 = 0.05;
const TABLE1_DELTA_BALANCED_MAX: f64 = 1e-5;
const TABLE1_POLES: [f64; 3] = [-0.38, -2.53, -2.15];
const POLE_ATOL: f64 = 0.01;
const UNSTABLE_J: f64 = 343.2;
const UNSTABLE_J_REDUCED: f64 = 58.2;
const UNSTABLE_RTOL: f64 = 0.05;
const FAST: Duration = Duration::from_secs(1);
const BOUND_SLACK: f64 = 1e-9;
const GRAMIAN_RTOL: f64 = 1e-7;
const HINF_RTOL: f64 = 1e-6;
const HINF_GRID_POINTS: usize = 100_000;
const H2_RTOL: f64 = 1e-4;
const COST_RTOL: f64 = 1e-9;
const RESIDUE_RTOL: f64 = 1e-8;
const R2_MIN: f64 = 0.95;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

/// Criterion 1: costs and truncation errors of the built-in example.
fn table1() -> Outcome {
    let start = Instant::now();
    let (g, k) = (example_plant(), example_controller());
    let bt = balanced_truncate_unstable(&k, 2).unwrap();
    let mt = modal_truncate_stable(&k, 1).unwrap();
    let (j, j_bt, j_mt) = (lqg_cost(&g, &k).unwrap(), lqg_cost(&g, &bt.reduced).unwrap(), lqg_cost(&g, &mt.reduced).unwrap());
    let (d_bt, d_mt) = (hinf_norm(&bt.delta).unwrap(), hinf_norm(&mt.delta).unwrap());
    let elapsed = start.elapsed();
    let oracle = [cost_oracle(&g, &k), cost_oracle(&g, &bt.reduced), cost_oracle(&g, &mt.reduced)];
    let agree = [j, j_bt, j_mt].iter().zip(oracle).all(|(a, b)| rel(*a, b) <= COST_RTOL);
    let passed = rel(j, TABLE1_J) <= TABLE1_COST_RTOL
        && rel(j_bt, TABLE1_J) <= TABLE1_COST_RTOL
        && rel(j_mt, TABLE1_J_MODAL) <= TABLE1_COST_RTOL
        && rel(d_mt, TABLE1_DELTA_MODAL) <= TABLE1_DELTA_RTOL
        && d_bt <= TABLE1_DELTA_BALANCED_MAX
        && agree
        && elapsed < FAST;
    outcome(
        passed,
        format!(
            "J(K)={j:.4} J_bt={j_bt:.4} J_mt={j_mt:.4} |D_mt|={d_mt:.4} |D_bt|={d_bt:.3e} oracle-agree={agree} t={:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Smallest achievable worst-case distance over pairings of `a` with `b`.
fn best_matching(a: &[C64], b: &[C64]) -> f64 {
    let Some((first, rest)) = a.split_first() else { return 0.0 };
    (0..b.len())
        .map(|i| {
            let mut others = b.to_vec();
            let t = others.remove(i);
            (first - t).norm().max(best_matching(rest, &others))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Criterion 2: closed-loop poles of the built-in example.
fn table1_poles() -> Outcome {
    let poles = closed_loop_eigs(&example_plant(), &example_controller());
    let targets: Vec<C64> = TABLE1_POLES.iter().flat_map(|&p| [C64::new(p, 0.0); 2]).collect();
    let worst = best_matching(&poles, &targets);
    let mut shown: Vec<String> = poles.iter().map(|p| format!("{:.3}{:+.3}i", p.re, p.im)).collect();
    shown.sort();
    outcome(worst <= POLE_ATOL, format!("worst distance {worst:.4} (tol {POLE_ATOL}); poles {}", shown.join(" ")))
}

/// Criterion 3: unstable-mode removal example.
fn unstable_example() -> Outcome {
    let start = Instant::now();
    let (g, k) = (unstable_example_plant(), unstable_example_controller());
    let mt = modal_truncate(&k, 1).unwrap();
    let j = lqg_cost(&g, &k).unwrap();
    let abscissa = max_real(&closed_loop_eigs(&g, &mt.reduced));
    let j_r = if abscissa < 0.0 { lqg_cost(&g, &mt.reduced).unwrap() } else { f64::INFINITY };
    let cert = check_thm3(&g, &k, &mt.reduced).unwrap();
    let elapsed = start.elapsed();
    let passed = rel(j, UNSTABLE_J) <= UNSTABLE_RTOL
        && rel(j_r, UNSTABLE_J_REDUCED) <= UNSTABLE_RTOL
        && cert.condition_satisfied
        && abscissa < 0.0
        && elapsed < FAST;
    outcome(
        passed,
        format!(
            "J(K)={j:.2} ({:.1}% off) J(K_r)={j_r:.2} ({:.1}% off) thm3={} abscissa(K_r)={abscissa:.3} t={:.3}s",
            100.0 * rel(j, UNSTABLE_J),
            100.0 * rel(j_r, UNSTABLE_J_REDUCED),
            cert.condition_satisfied,
            elapsed.as_secs_f64()
        ),
    )
}

/// Hankel singular values from the Kronecker-product Gramians.
fn hsv_oracle(s: &StateSpace) -> Vec<f64> {
    let w = controllability_gramian(s) * observability_gramian(s);
    let mut v: Vec<f64> = eigs(&w).iter().map(|z| z.re.max(0.0).sqrt()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Stable minimal systems of orders 4 to 8 that balance cleanly.
fn balanced_corpus(count: usize, seed: u64) -> Vec<ModalSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let n = rng.gen_range(4..=8);
        let io = rng.gen_range(1..=2);
        let s = random_stable(&mut rng, n, io, io);
        if balance(&s.system).is_ok() {
            out.push(s);
        }
    }
    out
}

/// Criterion 4: balanced-truncation error bound.
fn truncation_bound() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut ties = 0;
    for s in balanced_corpus(100, 4) {
        let n = s.order();
        let sigma = hsv_oracle(&s.system);
        let t = loop {
            let r = rng.gen_range(1..n);
            match balanced_truncate(&s.system, r) {
                Err(Error::PartitionTie) => ties += 1,
                other => break other.unwrap(),
            }
        };
        let r = n - t.truncated_tail.len();
        let tail: f64 = sigma[r..].iter().sum();
        let err = hinf_norm(&t.delta).unwrap();
        let slack = BOUND_SLACK * sigma[0];
        if tail > slack {
            worst_ratio = worst_ratio.max(err / (2.0 * tail));
        }
        if err > 2.0 * tail + slack {
            violations += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && elapsed < Duration::from_secs(30),
        format!(
            "100 systems, {violations} violations, worst err/(2·tail) = {worst_ratio:.4}, {ties} tied cuts redrawn, t={:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Criterion 5: balanced Gramians are diag(σ).
fn balancing_invariant() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in balanced_corpus(100, 5) {
        let bal = balance(&s.system).unwrap();
        let sigma = Matrix::from_diagonal(&nalgebra::DVector::from_vec(bal.hankel_singular_values.clone()));
        let scale = bal.hankel_singular_values[0];
        for w in [controllability_gramian(&bal.system), observability_gramian(&bal.system)] {
            worst = worst.max((w - &sigma).abs().max() / scale);
        }
    }
    outcome(worst <= GRAMIAN_RTOL, format!("100 systems, worst |W - diag(σ)|/σ₁ = {worst:.2e} (tol {GRAMIAN_RTOL:e})"))
}

/// Criterion 6: H∞ and H2 against grid and quadrature oracles.
fn norm_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut hinf_worst, mut h2_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let s = random_system(&mut rng, 1, 8);
        let oracle = hinf_oracle(&s, HINF_GRID_POINTS);
        hinf_worst = hinf_worst.max(rel(hinf_norm(&s.system).unwrap(), oracle));
    }
    for _ in 0..100 {
        let s = random_system(&mut rng, 1, 8);
        h2_worst = h2_worst.max(rel(h2_norm_squared(&s.system).unwrap(), h2_squared_oracle(&s)));
    }
    outcome(
        hinf_worst <= HINF_RTOL && h2_worst <= H2_RTOL,
        format!("H∞ worst rel {hinf_worst:.2e} (tol {HINF_RTOL:e}), H2² worst rel {h2_worst:.2e} (tol {H2_RTOL:e})"),
    )
}

/// `(G, K)` pairs cycling through orders 3 to 6 and up to two unstable modes.
fn instance(seed: u64) -> Option<(StateSpace, StateSpace)> {
    let order = 3 + (seed % 4) as usize;
    let unstable = (seed / 4 % 3) as usize;
    gen_instance(order, unstable.min(order - 2), seed).ok()
}

/// Reduced controllers of three kinds for one pair.
fn reductions(k: &StateSpace, rng: &mut ChaCha8Rng) -> Vec<(&'static str, StateSpace, Option<Vec<f64>>)> {
    let mut out = Vec::new();
    let n = k.order();
    let n_unstable = k.poles().unwrap().iter().filter(|p| p.re > 0.0).count();
    if n > n_unstable + 1 {
        let r = rng.gen_range(n_unstable.max(1)..n);
        if let Ok(t) = balanced_truncate_unstable(k, r) {
            out.push(("balanced", t.reduced, Some(t.truncated_tail)));
        }
    }
    if let Ok(t) = modal_truncate_stable(k, 1) {
        out.push(("modal", t.reduced, None));
    }
    let size = 10f64.powf(rng.gen_range(-4.0..0.0)) * k.a.norm();
    let e = normal(rng, n, n) * (size / n as f64);
    out.push(("perturbed", StateSpace::new(&k.a + e, k.b.clone(), k.c.clone(), k.d.clone()).unwrap(), None));
    out
}

/// Criterion 7: Theorem 1 certificates imply closed-loop stability.
fn thm1_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut triples, mut certified, mut violations, mut errors) = (0, 0, 0, 0);
    let mut seed = 0;
    while triples < 500 {
        seed += 1;
        let Some((g, k)) = instance(seed) else { continue };
        for (_, k_r, _) in reductions(&k, &mut rng) {
            triples += 1;
            match check_thm1(&g, &k, &k_r) {
                Ok(c) if c.condition_satisfied => {
                    certified += 1;
                    if max_real(&closed_loop_eigs(&g, &k_r)) >= 0.0 {
                        violations += 1;
                    }
                }
                Ok(_) => {}
                Err(_) => errors += 1,
            }
        }
    }
    outcome(
        violations == 0 && certified > 0,
        format!("{triples} triples, {certified} certified, {violations} violations, {errors} rejected by preconditions"),
    )
}

fn bound_holds(g: &StateSpace, k_r: &StateSpace, cert: &ReductionCertificate) -> bool {
    let bound = cert.cost_bound.expect("bound accompanies a satisfied condition");
    max_real(&closed_loop_eigs(g, k_r)) < 0.0 && cost_oracle(g, k_r) <= bound * (1.0 + BOUND_SLACK)
}

/// Criterion 8: Theorem 2 and Corollaries 1 and 2 cost bounds.
fn cost_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut held = [0usize; 3];
    let mut violations = [0usize; 3];
    let mut seed = 10_000;
    while held.iter().any(|&h| h < 100) && seed < 40_000 {
        seed += 1;
        let Some((g, k)) = instance(seed) else { continue };
        for (kind, k_r, tail) in reductions(&k, &mut rng) {
            if kind == "perturbed" {
                continue;
            }
            let mut certs = vec![(0, check_thm2_bound(&g, &k, &k_r))];
            if let Some(tail) = &tail {
                certs.push((1, check_cor1(&g, &k, &k_r, tail)));
            } else {
                certs.push((2, check_cor2(&g, &k, &k_r)));
            }
            for (i, c) in certs {
                if let Ok(c) = c {
                    if c.condition_satisfied {
                        held[i] += 1;
                        if !bound_holds(&g, &k_r, &c) {
                            violations[i] += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        held.iter().all(|&h| h >= 100) && violations.iter().all(|&v| v == 0),
        format!(
            "condition held/bound violated: thm2 {}/{}, cor1 {}/{}, cor2 {}/{}",
            held[0], violations[0], held[1], violations[1], held[2], violations[2]
        ),
    )
}

/// Criterion 9: Theorem 3 on SISO removals of an unstable mode.
fn thm3_soundness() -> Outcome {
    let (mut evaluated, mut certified, mut violations) = (0, 0, 0);
    let mut seed = 20_000;
    while evaluated < 100 && seed < 40_000 {
        seed += 1;
        let order = 3 + (seed % 4) as usize;
        let Ok((g, k)) = gen_instance(order, 1 + (seed % 2) as usize, seed) else { continue };
        let Ok(t) = modal_truncate(&k, 1) else { continue };
        if !t.delta.poles().unwrap().iter().any(|p| p.re > 0.0) {
            continue;
        }
        if max_real(&closed_loop_eigs(&g, &t.reduced)) >= 0.0 {
            continue;
        }
        let Ok(cert) = check_thm3(&g, &k, &t.reduced) else { continue };
        evaluated += 1;
        if cert.condition_satisfied {
            certified += 1;
            if !bound_holds(&g, &t.reduced, &cert) {
                violations += 1;
            }
        }
    }
    let skip = 100.0 * (evaluated - certified) as f64 / evaluated.max(1) as f64;
    let vacuous = if certified == 0 { " (vacuous: no instance certified)" } else { "" };
    outcome(
        evaluated >= 100 && violations == 0,
        format!("{evaluated} instances, {certified} certified, {violations} violations, skip rate {skip:.0}%{vacuous}"),
    )
}

/// Criterion 10: residue = (p - q)·r at simple poles.
fn residue_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut done, mut worst_identity, mut worst_oracle): (usize, f64, f64) = (0, 0.0, 0.0);
    while done < 100 {
        let (f, poles) = random_rational(&mut rng, false);
        if f.numerator.len() < 2 {
            continue;
        }
        let p = poles[0];
        let rf = residue_factorization(&f, p).unwrap();
        let oracle = poly_eval(&f.numerator, p) / poly_eval(&poly_derivative(&f.denominator), p);
        let product = rf.gap_product.unwrap() * rf.remainder.unwrap();
        worst_identity = worst_identity.max((rf.residue - product).norm() / rf.residue.norm());
        worst_oracle = worst_oracle.max((rf.residue - oracle).norm() / oracle.norm());
        done += 1;
    }
    outcome(
        worst_identity <= RESIDUE_RTOL && worst_oracle <= RESIDUE_RTOL,
        format!("100 functions, identity worst rel {worst_identity:.2e}, residue vs n(p)/d'(p) worst rel {worst_oracle:.2e}"),
    )
}

/// Criterion 11: shrinking the coefficient at p captures its zeros.
fn cancellation_probe() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut found, mut failures) = (0, Vec::new());
    for i in 0..20 {
        let (f, poles) = random_rational(&mut rng, i % 2 == 1);
        let p = poles[0];
        let pf = partial_fractions(&f).unwrap();
        let others = poles.iter().filter(|q| (*q - p).norm() > 1e-9).map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min);
        let mut eps = 0.25 * others.min(if p.im != 0.0 { 2.0 * p.im.abs() } else { f64::INFINITY });
        if let Err(Error::Radius { limit, .. }) = small_block_cancellation_probe(&pf, p, 1.0, eps) {
            eps = 0.5 * limit;
        }
        match cancellation_scale_search(&pf, p, eps) {
            Ok(Some(scale)) if small_block_cancellation_probe(&pf, p, scale, eps).unwrap().captured => found += 1,
            other => failures.push(format!("#{i}: {other:?}")),
        }
    }
    outcome(found == 20, format!("{found}/20 instances found a capturing scale {}", failures.join(" ")))
}

/// Criterion 12: cost gap grows linearly with ‖Δ‖∞.
fn scaling_linearity() -> Outcome {
    let (_, points) = repro_scaling().unwrap();
    let x: Vec<f64> = points.iter().map(|p| p.delta_hinf).collect();
    let y: Vec<f64> = points.iter().map(|p| p.cost_gap_ratio).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    outcome(
        points.len() == 30 && r2 >= R2_MIN,
        format!("30 points, R² = {r2:.6} (min {R2_MIN}); slope {:.4} is specific to the synthesized plants", sxy / sxx),
    )
}

fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let i = pos.floor() as usize;
        if i + 1 < v.len() { v[i] + (pos - i as f64) * (v[i + 1] - v[i]) } else { v[i] }
    };
    at(0.75) - at(0.25)
}

/// Criterion 13: balanced truncation has the tighter cost-ratio spread.
fn spread() -> Outcome {
    let (_, trials) = repro_spread(1, 30).unwrap();
    let rb: Vec<f64> = trials.iter().map(|t| t.ratio_balanced).collect();
    let rm: Vec<f64> = trials.iter().map(|t| t.ratio_modal).collect();
    let (b, m) = (iqr(&rb), iqr(&rm));
    outcome(trials.len() == 30 && b < m, format!("30 instances, IQR of J(K_r)/J(K): balanced {b:.3e}, modal {m:.3e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("example costs and truncation errors", table1),
        ("example closed-loop poles", table1_poles),
        ("unstable-mode removal example", unstable_example),
        ("balanced-truncation error bound", truncation_bound),
        ("balanced Gramians equal diag(sigma)", balancing_invariant),
        ("H-infinity and H2 norm oracles", norm_oracles),
        ("Theorem 1 soundness", thm1_soundness),
        ("Theorem 2 / Corollary 1 / Corollary 2 bounds", cost_bounds),
        ("Theorem 3 soundness", thm3_soundness),
        ("residue factorization identity", residue_identity),
        ("cancellation probe terminates", cancellation_probe),
        ("cost gap linear in the truncation error", scaling_linearity),
        ("balanced versus modal cost spread", spread),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name} ({:.2}s): {}", i + 1, start.elapsed().as_secs_f64(), o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
