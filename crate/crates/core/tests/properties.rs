//! Property tests against independent oracles: dense band-matrix products,
//! dense triangular solves and brute-force state comparisons.

use nmf::aggregators::{
    conv_aggregate, corr_aggregate, group_aggregate, har_aggregate, har_decode, invert_coefficients, named_functors,
    roundtrip_error, FunctorSpec, Kernel,
};
use nmf::envs::make_random_mdp;
use nmf::process::{FiniteMdp, StateVec};
use proptest::prelude::*;

fn trajectory(max_dim: usize, max_len: usize) -> impl Strategy<Value = Vec<StateVec>> {
    (1..=max_dim).prop_flat_map(move |dim| {
        prop::collection::vec(
            prop::collection::vec(-1.0..=1.0f64, dim).prop_map(|v| StateVec::new(v).unwrap()),
            1..=max_len,
        )
    })
}

/// `b ≤ 8`, `|w_0| ∈ [0.5, 2]`, `|w_i| ≤ 2`.
fn band_kernel() -> impl Strategy<Value = Vec<f64>> {
    (0.5..=2.0f64, any::<bool>(), prop::collection::vec(-2.0..=2.0f64, 0..8)).prop_map(|(head, neg, tail)| {
        let mut w = vec![if neg { -head } else { head }];
        w.extend(tail);
        w
    })
}

/// Kernels whose inverse decays: `|w_0| ∈ [1, 2]`, `Σ_{i≥1} |w_i| < |w_0|/2`.
fn damped_kernel() -> impl Strategy<Value = Vec<f64>> {
    (1.0..=2.0f64, prop::collection::vec(-1.0..=1.0f64, 0..6)).prop_map(|(head, tail)| {
        let total: f64 = tail.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        let mut w = vec![head];
        w.extend(tail.iter().map(|x| x * head / (2.0 * total)));
        w
    })
}

/// Dense lower-triangular Toeplitz product `r = W s`, `W[i][j] = w_{i-j}`.
fn dense_conv(w: impl Fn(usize) -> f64, s: &[StateVec]) -> Vec<Vec<f64>> {
    let dim = s[0].dim();
    (0..s.len())
        .map(|i| {
            let mut row = vec![0.0; dim];
            for (j, sj) in s.iter().enumerate().take(i + 1) {
                for (k, x) in sj.as_slice().iter().enumerate() {
                    row[k] += w(i - j) * x;
                }
            }
            row
        })
        .collect()
}

/// First column of `W⁻¹` by dense forward elimination on `W x = e_0`.
fn dense_inverse_column(w: &[f64], len: usize) -> Vec<f64> {
    let coeff = |i: usize| w.get(i).copied().unwrap_or(0.0);
    let mat: Vec<Vec<f64>> = (0..len)
        .map(|i| (0..len).map(|j| if j <= i { coeff(i - j) } else { 0.0 }).collect())
        .collect();
    let mut x = vec![0.0; len];
    for i in 0..len {
        let rhs = if i == 0 { 1.0 } else { 0.0 };
        let acc: f64 = (0..i).map(|j| mat[i][j] * x[j]).sum();
        x[i] = (rhs - acc) / mat[i][i];
    }
    x
}

fn growth(w: &[f64], len: usize) -> f64 {
    invert_coefficients(w, len)
        .unwrap()
        .iter()
        .fold(1.0, |m: f64, c| m.max(c.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn named_functors_round_trip(traj in trajectory(6, 64)) {
        for spec in named_functors() {
            let e = roundtrip_error(&spec, std::slice::from_ref(&traj)).unwrap();
            prop_assert!(e <= 1e-6, "{spec}: {e}");
        }
    }

    #[test]
    fn damped_kernels_round_trip(w in damped_kernel(), traj in trajectory(6, 64)) {
        let spec = FunctorSpec::single(nmf::aggregators::Functor::Conv(Kernel::band(w).unwrap()));
        let e = roundtrip_error(&spec, std::slice::from_ref(&traj)).unwrap();
        prop_assert!(e <= 1e-6, "{spec}: {e}");
    }

    #[test]
    fn band_kernel_error_tracks_conditioning(w in band_kernel(), traj in trajectory(6, 64)) {
        let g = growth(&w, traj.len());
        let spec = FunctorSpec::single(nmf::aggregators::Functor::Conv(Kernel::band(w).unwrap()));
        let e = roundtrip_error(&spec, std::slice::from_ref(&traj)).unwrap();
        prop_assert!(e <= 1e-12 * g, "{spec}: error {e} growth {g}");
    }

    #[test]
    fn band_incremental_matches_dense(w in band_kernel(), traj in trajectory(4, 32)) {
        let got = conv_aggregate(&Kernel::band(w.clone()).unwrap(), &traj).unwrap();
        let want = dense_conv(|i| w.get(i).copied().unwrap_or(0.0), &traj);
        for (g, r) in got.iter().zip(&want) {
            for (a, b) in g.as_slice().iter().zip(r) {
                prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn geometric_incremental_matches_dense(first in 0.5..=2.0f64, ratio in -1.0..=1.0f64, traj in trajectory(4, 32)) {
        let got = conv_aggregate(&Kernel::geometric(first, ratio).unwrap(), &traj).unwrap();
        let want = dense_conv(|i| first * ratio.powi(i as i32), &traj);
        for (g, r) in got.iter().zip(&want) {
            for (a, b) in g.as_slice().iter().zip(r) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn inverse_matches_dense_elimination(w in band_kernel(), len in 1usize..12) {
        let got = invert_coefficients(&w, len).unwrap();
        let want = dense_inverse_column(&w, len);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_composes_to_identity(w in damped_kernel(), len in 1usize..32) {
        let inv = invert_coefficients(&w, len).unwrap();
        let id = nmf::aggregators::convolve(&w, &inv, len);
        for (i, x) in id.iter().enumerate() {
            let want = if i == 0 { 1.0 } else { 0.0 };
            prop_assert!((x - want).abs() <= 1e-9, "coefficient {i}: {x}");
        }
    }

    #[test]
    fn double_inverse_is_identity(w in damped_kernel(), len in 1usize..32) {
        let inv = invert_coefficients(&w, len).unwrap();
        let back = invert_coefficients(&inv, len).unwrap();
        for (i, x) in back.iter().enumerate() {
            let want = w.get(i).copied().unwrap_or(0.0);
            prop_assert!((x - want).abs() <= 1e-8, "coefficient {i}: {x} vs {want}");
        }
    }

    #[test]
    fn identity_functors_exact(traj in trajectory(6, 32)) {
        for spec in ["S_l:0", "D_l:0", "G^0", "id"] {
            let spec: FunctorSpec = spec.parse().unwrap();
            let out = nmf::aggregators::run(spec.aggregator().unwrap().as_mut(), &traj).unwrap();
            prop_assert_eq!(&out, &traj);
        }
    }

    #[test]
    fn unit_correlation_is_prefix_sum(traj in trajectory(4, 32)) {
        let ones = vec![1.0; traj.len()];
        prop_assert_eq!(corr_aggregate(&ones, &traj).unwrap(), group_aggregate(&traj).unwrap());
    }

    #[test]
    fn har_round_trip(rewards in prop::collection::vec(-1.0..=1.0f64, 1..64), w in damped_kernel()) {
        let w_str: Vec<String> = w.iter().map(|x| x.to_string()).collect();
        for spec in ["sum".to_string(), format!("conv:{}", w_str.join(","))] {
            let spec: FunctorSpec = spec.parse().unwrap();
            let back = har_decode(&spec, &har_aggregate(&spec, &rewards).unwrap()).unwrap();
            for (a, b) in rewards.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn degeneracy_invariant_under_relabeling(seed in 0u64..500, states in 1usize..5, perm_seed in any::<u64>()) {
        let m = make_random_mdp(seed, states, 2, 2).unwrap();
        let mut perm: Vec<usize> = (0..states).collect();
        let mut x = perm_seed;
        for i in (1..states).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (x >> 33) as usize % (i + 1));
        }
        let relabeled = m.relabel(&perm).unwrap();
        prop_assert_eq!(m.is_degenerate(), relabeled.is_degenerate());
        prop_assert_eq!(&FiniteMdp::from_json_str(&m.to_json()).unwrap(), &m);
    }
}

/// Brute-force degeneracy: two states equal iff their sorted outcome lists
/// agree on every action.
fn brute_degenerate(m: &FiniteMdp) -> bool {
    let key = |s: usize, a: usize| {
        let mut row: Vec<(usize, u64, u64)> = m
            .outcomes(s, a)
            .iter()
            .map(|o| (o.next, o.reward.to_bits(), o.prob.to_bits()))
            .collect();
        row.sort();
        row
    };
    (0..m.num_states())
        .any(|s| (0..m.num_states()).any(|s2| s != s2 && (0..m.num_actions()).all(|a| key(s, a) == key(s2, a))))
}

#[test]
fn degeneracy_agrees_with_brute_force() {
    for seed in 0..50 {
        let m = make_random_mdp(seed, 3, 2, 2).unwrap();
        assert_eq!(m.is_degenerate(), brute_degenerate(&m), "seed {seed}");

        let mut doc: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        let row = doc["outcomes"][0].clone();
        doc["outcomes"][1] = row;
        let dup = FiniteMdp::from_json_str(&doc.to_string()).unwrap();
        assert!(brute_degenerate(&dup));
        assert!(dup.is_degenerate(), "seed {seed}");
    }
}
