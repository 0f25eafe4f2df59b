mod common;

use common::*;
use ctred::certify::{closed_loop_poles, lqg_cost};
use ctred::experiments::{example_controller, example_plant, gen_instance};
use ctred::lti::four_block;
use ctred::norms::{h2_norm_squared, hinf_norm};
use ctred::reduce::balance;
use ctred::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn hinf_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let s = random_system(&mut rng, 1, 8);
        let lib = hinf_norm(&s.system).unwrap();
        let oracle = hinf_oracle(&s, 100_000);
        assert!((lib - oracle).abs() <= 1e-6 * oracle, "lib {lib} oracle {oracle}");
    }
}

#[test]
fn h2_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let s = random_system(&mut rng, 1, 8);
        let lib = h2_norm_squared(&s.system).unwrap();
        let oracle = h2_squared_oracle(&s);
        assert!((lib - oracle).abs() <= 1e-4 * oracle, "lib {lib} oracle {oracle}");
    }
}

#[test]
fn balanced_gramians_are_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let s = random_system(&mut rng, 2, 8);
        let n = s.order();
        let bal = balance(&s.system).unwrap();
        let sigma = &bal.hankel_singular_values;
        for w in [controllability_gramian(&bal.system), observability_gramian(&bal.system)] {
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { sigma[i] } else { 0.0 };
                    assert!((w[(i, j)] - target).abs() <= 1e-7 * sigma[0], "entry ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn lqg_cost_matches_four_block_quadrature() {
    let mut cases = vec![(example_plant(), example_controller())];
    for seed in 0..6 {
        cases.push(gen_instance(3 + seed as usize % 3, seed as usize % 2, seed).unwrap());
    }
    for (g, k) in cases {
        let fb = four_block(&g, &k).unwrap().realization;
        let cb = &fb.c * &fb.b;
        let tail = cb.iter().map(|x| x * x).sum::<f64>();
        let scale = fb.a.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let oracle = h2_squared_quadrature(&|w| response(&fb, C64::new(0.0, w)), scale, tail, 1e-9);
        let j = lqg_cost(&g, &k).unwrap();
        assert!((j - oracle).abs() <= 1e-4 * oracle, "J {j} oracle {oracle}");
    }
}

#[test]
fn closed_loop_poles_match_direct_eigenvalues() {
    for seed in 0..5 {
        let (g, k) = gen_instance(4, 1, seed).unwrap();
        let mut lib: Vec<C64> = closed_loop_poles(&g, &k).unwrap();
        let mut direct = closed_loop_eigs(&g, &k);
        let key = |a: &C64, b: &C64| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        lib.sort_by(key);
        direct.sort_by(key);
        for (a, b) in lib.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()), "{a} vs {b}");
        }
    }
}

#[test]
fn modal_oracle_agrees_with_dense_response() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let s = random_stable(&mut rng, 6, 2, 2);
    let gap = response_gap(&|z| s.eval(z), &|z| response(&s.system, z), 500);
    assert!(gap < 1e-10, "{gap}");
}
