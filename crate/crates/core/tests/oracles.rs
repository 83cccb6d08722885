//! Independent cross-checks of library results.

use bellkey::attack::{alice_bob_stats, optimal_attack, sift, Block};
use bellkey::boxes::{NsBox, Visibility};
use bellkey::polytope::{min_nonlocal_decomposition, vertices};
use bellkey::rates::intrinsic::{conditional_information, Channel};
use bellkey::rates::{self, binary_entropy, intrinsic_numeric, IntrinsicConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h(p: f64) -> f64 {
    binary_entropy(p).unwrap()
}

#[test]
fn binary_entropy_at_quarter() {
    let direct = -0.25 * 0.25f64.log2() - 0.75 * 0.75f64.log2();
    assert!((h(0.25) - direct).abs() < 1e-15);
    assert!((h(0.25) - 0.811_278).abs() < 1e-6);
}

/// Local iff nonnegative and every CHSH variant is at most 3.
fn local_by_inequalities(p: &[f64; 16]) -> bool {
    if p.iter().any(|&v| v < -1e-12) {
        return false;
    }
    let b = NsBox::validate(p, 1e-9).unwrap();
    b.max_chsh() <= 3.0 + 1e-12
}

/// Smallest weight `t` on a single nonlocal vertex leaving a local remainder,
/// scanned on a grid of step `1e−4`.
fn scan_nonlocal_weight(b: &NsBox) -> f64 {
    let mut best: f64 = 1.0;
    for vx in vertices().iter().filter(|v| !v.is_local()) {
        for k in 0..10_000 {
            let t = k as f64 * 1e-4;
            if t >= best {
                break;
            }
            let mut rest = [0.0; 16];
            for (i, r) in rest.iter_mut().enumerate() {
                *r = (b.as_array()[i] - t * vx.ns_box().as_array()[i]) / (1.0 - t);
            }
            if local_by_inequalities(&rest) {
                best = t;
                break;
            }
        }
    }
    best
}

#[test]
fn lp_weight_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..40 {
        // One nonlocal vertex mixed with local ones: the minimal weight is
        // carried by that vertex alone.
        let nl = &vertices()[16 + rng.gen_range(0..8)];
        let t = rng.gen_range(0.0..0.8);
        let w: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = w.iter().sum();
        let mut parts: Vec<(f64, &NsBox)> = vertices()[..16]
            .iter()
            .zip(&w)
            .map(|(v, wi)| ((1.0 - t) * wi / s, v.ns_box()))
            .collect();
        parts.push((t, nl.ns_box()));
        let b = NsBox::mixture(parts);
        let lp = min_nonlocal_decomposition(&b).unwrap().nonlocal_weight();
        let scan = scan_nonlocal_weight(&b);
        assert!((lp - scan).abs() <= 1e-3 + 1e-9, "lp {lp} scan {scan}");
    }
}

#[test]
fn sifted_joint_informations() {
    for i in 0..=50 {
        let p = i as f64 / 50.0;
        let p_l = 1.0 - p;
        let j = sift(&optimal_attack(Visibility::from_p_nl(p).unwrap())).unwrap();
        let s = alice_bob_stats(&j);
        assert!((s.qber - p_l / 4.0).abs() < 1e-15);
        assert!((s.i_ae - p_l / 2.0).abs() < 1e-12);
        assert!((s.i_be - p_l).abs() < 1e-12);
        assert!(s.i_be >= s.i_ae);
        assert!((s.i_ab - (1.0 - h(p_l / 4.0))).abs() < 1e-12);
    }
}

fn channel(rows: Vec<Vec<f64>>) -> Channel {
    Channel::new(rows, 1e-12).unwrap()
}

#[test]
fn numeric_minimum_beats_explicit_channels() {
    // Rows follow the symbol order (0,0), (1,1), (?,0), (?,1), (?,?).
    let keep_known = channel(vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0],
    ]);
    let bob_bit_with_half_unknown = channel(vec![
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![0.5, 0.5],
    ]);
    let cfg = IntrinsicConfig::default();
    for i in 1..=9 {
        let p = i as f64 / 10.0;
        let blocks = rates::table_one_blocks(p).unwrap();
        let num = intrinsic_numeric(&blocks, &cfg).unwrap();
        let a = conditional_information(&blocks, &keep_known).unwrap();
        let b = conditional_information(&blocks, &bob_bit_with_half_unknown).unwrap();
        // The second channel reproduces the closed-form curve exactly.
        assert!(
            (b - rates::intrinsic_closed(p).unwrap()).abs() < 1e-12,
            "p={p}"
        );
        let p_l = 1.0 - p;
        let m = p_l / 2.0 + p;
        assert!((a - m * (1.0 - h(p_l / 4.0 / m))).abs() < 1e-12);
        assert!(num.value <= a.min(b) + 1e-12);
        assert!(num.value <= num.conditional.min(num.mutual) + 1e-12);
        assert!(num.value >= 0.0);
    }
}

#[test]
fn announced_variant_vanishes_below_one_fifth() {
    let cfg = IntrinsicConfig::default();
    for p in [0.05, 0.1, 0.15, 0.19] {
        let j = rates::alice_announces(p).unwrap();
        let v = intrinsic_numeric(&j.blocks(), &cfg).unwrap().value;
        assert!(v < 1e-9, "p={p}: {v}");
    }
    for p in [0.25, 0.4] {
        let j = rates::alice_announces(p).unwrap();
        let v = intrinsic_numeric(&j.blocks(), &cfg).unwrap().value;
        assert!(v > 1e-4, "p={p}: {v}");
    }
}

#[test]
fn restarts_never_hurt() {
    let blocks: Vec<Block> = rates::table_one_blocks(0.4).unwrap();
    let mut prev = f64::INFINITY;
    for restarts in [1, 2, 4, 8, 16, 32] {
        let cfg = IntrinsicConfig {
            restarts,
            seed: 99,
            ..Default::default()
        };
        let v = intrinsic_numeric(&blocks, &cfg).unwrap().value;
        assert!(v <= prev, "{restarts}: {v} > {prev}");
        prev = v;
    }
}

#[test]
fn intrinsic_is_seed_deterministic() {
    let blocks = rates::table_one_blocks(0.3).unwrap();
    let cfg = IntrinsicConfig {
        restarts: 8,
        seed: 5,
        ..Default::default()
    };
    let a = intrinsic_numeric(&blocks, &cfg).unwrap();
    let b = intrinsic_numeric(&blocks, &cfg).unwrap();
    assert_eq!(a.value, b.value);
    assert_eq!(a.channel, b.channel);
}

#[test]
fn optimized_rate_is_monotone() {
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=100 {
        let p = i as f64 / 100.0;
        let r = rates::optimize_preprocessing(p).unwrap().rate;
        assert!(r >= prev - 1e-12, "p={p}");
        assert!(r + 1e-9 >= rates::ck_rate(p).unwrap());
        prev = r;
    }
}

#[test]
fn advantage_distillation_helps_at_point_three() {
    assert!(rates::ck_rate(0.3).unwrap() < 0.0);
    let blocks = rates::table_one_blocks(0.3).unwrap();
    let best = (1..=30)
        .map(|n| rates::ad_stats(&blocks, n).unwrap().rate)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(best > 0.0);
}

#[test]
fn report_invariants() {
    let cfg = IntrinsicConfig {
        restarts: 8,
        ..Default::default()
    };
    for p in [0.0, 0.2, 0.4, 0.6, 1.0] {
        let r = rates::rate_report(p, &cfg).unwrap();
        assert!(r.rate_oneway <= r.rate_oneway_preprocessed + 1e-9);
        assert!(r.intrinsic_numeric <= r.intrinsic_closed + 1e-3);
        assert!((0.0..=0.5).contains(&r.q_opt));
        assert_eq!(r.disturbance.is_some(), p <= std::f64::consts::SQRT_2 - 1.0);
    }
}
