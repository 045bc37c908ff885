use heightbev_core::bev::{oracle_bev, BevSpec};
use heightbev_core::geometry::EgoPose;
use heightbev_core::localizer::{
    localize, match_template, perturb, soft_argmax, softmax2d, FeatureEncoder, FeatureGrid, LocalizerConfig,
    SimilarityMap, DISTANCE_CLAMP,
};
use heightbev_core::synthworld::{generate_world, World, WorldSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(w: usize, h: usize, c: usize, data: Vec<f64>) -> FeatureGrid {
    FeatureGrid {
        width: w,
        height: h,
        channels: c,
        stride: 1,
        data,
    }
}

/// Masked cosine similarity evaluated placement by placement.
fn exhaustive(t: &FeatureGrid, mask: &[bool], tile: &FeatureGrid) -> Vec<f64> {
    let (ow, oh) = (tile.width - t.width + 1, tile.height - t.height + 1);
    let tnorm: f64 = (0..t.channels)
        .flat_map(|c| (0..t.height * t.width).map(move |p| (c, p)))
        .filter(|&(_, p)| mask[p])
        .map(|(c, p)| t.data[c * t.width * t.height + p].powi(2))
        .sum::<f64>()
        .sqrt();
    let mut raw = Vec::with_capacity(ow * oh);
    for i in 0..oh {
        for j in 0..ow {
            let (mut num, mut energy) = (0.0, 0.0);
            for c in 0..t.channels {
                for p in 0..t.height {
                    for q in 0..t.width {
                        if !mask[p * t.width + q] {
                            continue;
                        }
                        let b = t.get(c, p, q);
                        let x = tile.get(c, i + p, j + q);
                        num += b * x;
                        energy += x * x;
                    }
                }
            }
            raw.push((num, energy));
        }
    }
    let max_e = raw.iter().fold(0.0f64, |m, r| m.max(r.1));
    raw.iter()
        .map(|&(n, e)| {
            if tnorm == 0.0 || e <= 1e-9 * max_e || e == 0.0 {
                0.0
            } else {
                (n / (tnorm * e.sqrt())).clamp(-1.0, 1.0)
            }
        })
        .collect()
}

/// Template in channels 0..2, tile background only in channel 2, copy
/// planted at `(a, b)`.
fn planted(rng: &mut ChaCha8Rng, s: usize, l: usize) -> (FeatureGrid, Vec<bool>, FeatureGrid, (usize, usize)) {
    let c = 3;
    let mut t = vec![0.0; c * s * s];
    for v in t[..2 * s * s].iter_mut() {
        *v = if rng.gen_bool(0.4) { 1.0 } else { 0.0 };
    }
    let mask: Vec<bool> = (0..s * s).map(|_| rng.gen_bool(0.9)).collect();
    let mut tile = vec![0.0; c * l * l];
    for v in tile[2 * l * l..].iter_mut() {
        *v = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
    }
    let (a, b) = (rng.gen_range(0..=l - s), rng.gen_range(0..=l - s));
    for ch in 0..c {
        for p in 0..s {
            for q in 0..s {
                tile[(ch * l + a + p) * l + b + q] = t[(ch * s + p) * s + q];
            }
        }
    }
    (grid(s, s, c, t), mask, grid(l, l, c, tile), (a, b))
}

#[test]
fn planted_copies_are_recovered_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for k in 0..50 {
        let (s, l) = (rng.gen_range(4..14), rng.gen_range(20..48));
        let (t, mask, tile, (a, b)) = planted(&mut rng, s, l);
        let sim = match_template(&t, &mask, &tile).unwrap();
        assert_eq!(sim.argmax(), (a, b), "plant {k}");
        assert!((sim.get(a, b) - 1.0).abs() < 1e-6);
        let oracle = exhaustive(&t, &mask, &tile);
        for (x, y) in sim.scores.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9, "plant {k}: {x} vs {y}");
        }
    }
}

#[test]
fn planted_copies_on_the_fft_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..3 {
        let (t, mask, tile, (a, b)) = planted(&mut rng, 48, 160);
        // Well above the direct-evaluation work limit.
        assert!((160 - 48 + 1usize).pow(2) * 48 * 48 * 3 > 1 << 22);
        let sim = match_template(&t, &mask, &tile).unwrap();
        assert_eq!(sim.argmax(), (a, b));
        assert!((sim.get(a, b) - 1.0).abs() < 1e-6);
        let oracle = exhaustive(&t, &mask, &tile);
        let worst = sim
            .scores
            .iter()
            .zip(&oracle)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
}

#[test]
fn constant_inputs_give_constant_scores() {
    let t = grid(5, 5, 2, vec![0.5; 50]);
    let tile = grid(20, 17, 2, vec![2.0; 2 * 20 * 17]);
    let sim = match_template(&t, &[true; 25], &tile).unwrap();
    assert!(sim.scores.iter().all(|&s| (s - sim.scores[0]).abs() < 1e-12));
    assert!((sim.scores[0] - 1.0).abs() < 1e-12);
}

fn shift_right(tile: &FeatureGrid) -> FeatureGrid {
    let mut out = FeatureGrid::zeros(tile.width, tile.height, tile.channels, 1);
    for c in 0..tile.channels {
        for r in 0..tile.height {
            for q in 1..tile.width {
                out.data[(c * tile.height + r) * tile.width + q] = tile.get(c, r, q - 1);
            }
        }
    }
    out
}

#[test]
fn matching_is_shift_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (s, l, tol) in [(6, 30, 0.0), (48, 150, 1e-9)] {
        let (t, mask, tile, _) = planted(&mut rng, s, l);
        let a = match_template(&t, &mask, &tile).unwrap();
        let b = match_template(&t, &mask, &shift_right(&tile)).unwrap();
        for i in 0..a.height {
            for j in 1..a.width {
                let (x, y) = (b.get(i, j), a.get(i, j - 1));
                assert!((x - y).abs() <= tol, "({i}, {j}): {x} vs {y}");
            }
        }
    }
}

#[test]
fn distance_encoder_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let (w, h, res) = (rng.gen_range(5..40), rng.gen_range(5..40), 0.3);
        let density = rng.gen_range(0.0..0.6);
        let plane: Vec<f64> = (0..w * h)
            .map(|_| if rng.gen_bool(density) { 1.0 } else { 0.0 })
            .collect();
        let g = FeatureEncoder::Distance { stride: 1 }
            .encode(&plane, w, h, 1, res)
            .unwrap();
        for r in 0..h {
            for c in 0..w {
                let me = plane[r * w + c] >= 0.5;
                let nearest = (0..w * h)
                    .filter(|&i| (plane[i] >= 0.5) != me)
                    .map(|i| {
                        let (rr, cc) = ((i / w) as f64, (i % w) as f64);
                        (rr - r as f64).hypot(cc - c as f64)
                    })
                    .fold(f64::INFINITY, f64::min);
                let d = nearest * res;
                let expect = if me { -d } else { d }.clamp(-DISTANCE_CLAMP, DISTANCE_CLAMP);
                assert!(
                    (g.get(0, r, c) - expect).abs() < 1e-9,
                    "({r}, {c}) {} vs {expect}",
                    g.get(0, r, c)
                );
            }
        }
    }
}

fn sim_map(w: usize, h: usize, scores: Vec<f64>) -> SimilarityMap {
    SimilarityMap {
        width: w,
        height: h,
        scores,
    }
}

proptest! {
    #[test]
    fn softmax_is_normalised_and_shift_invariant(
        w in 1usize..25, h in 1usize..25, tau in 1e-3..2.0f64, shift in -5.0..5.0f64, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = softmax2d(&sim_map(w, h, scores.clone()), tau).unwrap();
        prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.probs.iter().all(|&v| v >= 0.0));
        let q = softmax2d(&sim_map(w, h, scores.iter().map(|s| s + shift).collect()), tau).unwrap();
        for (a, b) in p.probs.iter().zip(&q.probs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let (pa, qa) = (soft_argmax(&p), soft_argmax(&q));
        prop_assert!((pa[0] - qa[0]).abs() < 1e-9 && (pa[1] - qa[1]).abs() < 1e-9);
    }

    #[test]
    fn low_temperature_soft_argmax_hits_argmax(
        w in 1usize..40, h in 1usize..40, margin in 0.01..0.5f64, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scores: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-1.0..0.4)).collect();
        let top = rng.gen_range(0..w * h);
        let runner = scores.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, &s)| s).fold(f64::NEG_INFINITY, f64::max);
        scores[top] = if runner.is_finite() { runner + margin } else { 0.5 };
        let p = softmax2d(&sim_map(w, h, scores), 1e-3).unwrap();
        let s = soft_argmax(&p);
        let (r, c) = ((top / w) as f64, (top % w) as f64);
        prop_assert!((s[0] - r).hypot(s[1] - c) < 0.01, "{:?} vs ({}, {})", s, r, c);
    }
}

#[test]
fn soft_argmax_reference_cases() {
    let mut m = vec![0.0; 8 * 9];
    m[3 * 9 + 5] = 1.0;
    let p = heightbev_core::localizer::ProbabilityMap {
        width: 9,
        height: 8,
        probs: m,
        tau: 1.0,
    };
    assert_eq!(soft_argmax(&p), [3.0, 5.0]);
    let mut m = vec![0.0; 11];
    m[0] = 0.5;
    m[10] = 0.5;
    let p = heightbev_core::localizer::ProbabilityMap {
        width: 11,
        height: 1,
        probs: m,
        tau: 1.0,
    };
    assert_eq!(soft_argmax(&p), [0.0, 5.0]);
    for n in [1usize, 2, 7, 30] {
        let p = softmax2d(&sim_map(n, n, vec![0.3; n * n]), 0.5).unwrap();
        let mid = (n as f64 - 1.0) / 2.0;
        assert_eq!(soft_argmax(&p), [mid, mid]);
        assert!(p.probs.iter().all(|&v| (v - 1.0 / (n * n) as f64).abs() < 1e-15));
    }
}

#[test]
fn perturbation_radius_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pose = EgoPose::new(10.0, -20.0, 0.7);
    let n = 100_000;
    let (mut sum_r, mut sum_c, mut sum_s, mut max_r) = (0.0, 0.0, 0.0, 0.0f64);
    for _ in 0..n {
        let p = perturb(&pose, &mut rng, 100.0);
        let (dx, dy) = (p.x - pose.x, p.y - pose.y);
        let r = dx.hypot(dy);
        sum_r += r;
        if r > 0.0 {
            sum_c += dx / r;
            sum_s += dy / r;
        }
        max_r = max_r.max(r);
        assert_eq!(p.yaw, pose.yaw);
    }
    let mean = sum_r / n as f64;
    assert!((mean - 50.0).abs() < 0.5, "mean radius {mean}");
    assert!(max_r <= 100.0);
    assert!((sum_c / n as f64).abs() < 0.01 && (sum_s / n as f64).abs() < 0.01);
}

fn world(seed: u64) -> World {
    generate_world(&WorldSpec {
        seed,
        ..WorldSpec::default()
    })
    .unwrap()
}

fn cfg() -> LocalizerConfig {
    LocalizerConfig {
        tau: 0.01,
        ..LocalizerConfig::default()
    }
}

#[test]
fn truth_prior_recovers_pose_within_a_cell() {
    let w = world(31);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pose = w.sample_pose(&mut rng, 60.0).unwrap();
    let bev = oracle_bev(&w, &pose, &BevSpec::default()).unwrap();
    let res = localize(&bev, &w.map, &pose, &cfg()).unwrap();
    assert!(
        res.estimate.distance_to(&pose) < 0.3,
        "{:?} vs {:?}",
        res.estimate,
        pose
    );
}

#[test]
fn whole_cell_prior_shift_leaves_estimate_unchanged() {
    let w = world(32);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pose = w.sample_pose(&mut rng, 60.0).unwrap();
    let bev = oracle_bev(&w, &pose, &BevSpec::default()).unwrap();
    let prior = EgoPose::new(pose.x + 3.1, pose.y - 4.3, pose.yaw);
    let a = localize(&bev, &w.map, &prior, &cfg()).unwrap();
    let shifted = EgoPose::new(prior.x + 7.0 * 0.3, prior.y, prior.yaw);
    let b = localize(&bev, &w.map, &shifted, &cfg()).unwrap();
    // Raster georeference is stored in f32; allow for its rounding.
    assert!(
        a.estimate.distance_to(&b.estimate) < 1e-4,
        "{:?} vs {:?}",
        a.estimate,
        b.estimate
    );
    assert_eq!((a.argmax.0, a.argmax.1), (b.argmax.0, b.argmax.1 + 7));
}

#[test]
fn moving_the_pose_moves_the_estimate() {
    let w = world(33);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pose = w.sample_pose(&mut rng, 80.0).unwrap();
    let (s, c) = pose.yaw.sin_cos();
    let delta = [6.0 * c, 6.0 * s];
    let moved = EgoPose::new(pose.x + delta[0], pose.y + delta[1], pose.yaw);
    let offset = [-12.0, 9.0];
    let est = |p: &EgoPose| {
        let bev = oracle_bev(&w, p, &BevSpec::default()).unwrap();
        let prior = EgoPose::new(p.x + offset[0], p.y + offset[1], p.yaw);
        localize(&bev, &w.map, &prior, &cfg()).unwrap().estimate
    };
    let (a, b) = (est(&pose), est(&moved));
    let moved_by = [b.x - a.x, b.y - a.y];
    let err = (moved_by[0] - delta[0]).hypot(moved_by[1] - delta[1]);
    assert!(err < 0.3, "estimate moved by {moved_by:?}, pose by {delta:?}");
}
