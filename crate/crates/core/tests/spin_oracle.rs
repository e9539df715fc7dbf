mod common;

use common::{brute_marginal, random_frame, singlet_joint_bruteforce};
use eqm_core::{
    build_eigenstate, build_isotropic, build_singlet_entangled, build_singlet_factorized, interference_residual_3,
    marginal_probabilities, models_agree, project_marginal, Direction, DirectionFrame, SingletModel, Trials,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn components(frame: &DirectionFrame) -> Vec<[f64; 3]> {
    frame.directions().iter().map(|d| d.components()).collect()
}

#[test]
fn projection_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for n in 1..=12 {
        let frame = random_frame(&mut rng, n);
        let dirs = components(&frame);
        let axis = rng.random_range(0..n);
        let sign = if rng.random::<bool>() { 1 } else { -1 };
        let eigen = build_eigenstate(frame.clone(), axis, sign).unwrap();
        let iso = build_isotropic(frame.clone());
        let k = rng.random_range(1..=n.min(4));
        let mut subset: Vec<usize> = (0..n).collect();
        for t in 0..k {
            let s = rng.random_range(t..n);
            subset.swap(t, s);
        }
        subset.truncate(k);

        let got = marginal_probabilities(&eigen, &subset).unwrap();
        let want = brute_marginal(&dirs, |s| s[axis] == sign, &subset);
        for (g, w) in got.values().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "n={n} eigen {subset:?}: {g} vs {w}");
        }
        let got = marginal_probabilities(&iso, &subset).unwrap();
        let want = brute_marginal(&dirs, |_| true, &subset);
        for (g, w) in got.values().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "n={n} iso {subset:?}: {g} vs {w}");
        }
    }
}

#[test]
fn projection_is_independent_of_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let frame = random_frame(&mut rng, 16);
    let state = build_isotropic(frame);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| project_marginal(&state, &[3, 9]).unwrap())
    };
    assert_eq!(run(1), run(5));
}

#[test]
fn interference_residual_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for n in 3..=8 {
        let frame = random_frame(&mut rng, n);
        let dirs = components(&frame);
        let state = build_isotropic(frame);
        let got = interference_residual_3(&state, 0, 1, 2).unwrap();
        let triple = brute_marginal(&dirs, |_| true, &[0, 1, 2]);
        let pair = brute_marginal(&dirs, |_| true, &[0, 1]);
        for m in 0..4 {
            let want = triple[m] + triple[m + 4] - pair[m];
            assert!((got.values()[m] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn singlet_correlation_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..100 {
        let frame = random_frame(&mut rng, 2);
        let dirs = components(&frame);
        let ent = build_singlet_entangled(frame.clone());
        let fac = build_singlet_factorized(frame.clone());
        let dot = frame.direction(0).unwrap().dot(frame.direction(1).unwrap());
        let brute = singlet_joint_bruteforce(&dirs, 0, 1);
        for model in [&ent as &dyn SingletModel, &fac] {
            assert!((model.correlation(0, 1).unwrap() + dot).abs() < 1e-12);
            for (ra, sa) in [1i8, -1].into_iter().enumerate() {
                for (rb, sb) in [1i8, -1].into_iter().enumerate() {
                    let p = model.joint_outcome_probability(0, 1, sa, sb).unwrap();
                    assert!((p - brute[ra][rb]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn singlet_brute_force_in_larger_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for n in 3..=5 {
        let frame = random_frame(&mut rng, n);
        let dirs = components(&frame);
        let ent = build_singlet_entangled(frame.clone());
        for i in 0..n {
            for j in 0..n {
                let brute = singlet_joint_bruteforce(&dirs, i, j);
                let e = brute[0][0] + brute[1][1] - brute[0][1] - brute[1][0];
                assert!((ent.correlation(i, j).unwrap() - e).abs() < 1e-12);
            }
        }
        assert!(models_agree(&frame, Trials::Exhaustive).unwrap() < 1e-12);
    }
}

fn rotate(d: Direction, axis: [f64; 3], angle: f64) -> Direction {
    // Rodrigues
    let v = d.components();
    let (s, c) = angle.sin_cos();
    let cross = [axis[1] * v[2] - axis[2] * v[1], axis[2] * v[0] - axis[0] * v[2], axis[0] * v[1] - axis[1] * v[0]];
    let dot: f64 = (0..3).map(|t| axis[t] * v[t]).sum();
    Direction::normalized([0, 1, 2].map(|t| v[t] * c + cross[t] * s + axis[t] * dot * (1.0 - c))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chsh_is_rotation_invariant(seed in any::<u64>(), angle in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_frame(&mut rng, 4);
        let axis = common::random_direction(&mut rng).components();
        let rotated = DirectionFrame::new(
            frame.directions().iter().map(|&d| rotate(d, axis, angle)).collect(),
        ).unwrap();
        let s0 = build_singlet_entangled(frame).chsh_value(0, 1, 2, 3).unwrap();
        let s1 = build_singlet_entangled(rotated).chsh_value(0, 1, 2, 3).unwrap();
        prop_assert!((s0 - s1).abs() < 1e-10);
        prop_assert!(s0.abs() <= 2.0 * 2f64.sqrt() + 1e-9);
    }

    #[test]
    fn marginals_sum_to_one(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_frame(&mut rng, n);
        let state = build_isotropic(frame);
        let p = marginal_probabilities(&state, &[0, n - 1]).unwrap();
        prop_assert!((p.total() - 1.0).abs() < 1e-12);
        prop_assert!(p.values().iter().all(|&x| x >= 0.0));
    }
}
