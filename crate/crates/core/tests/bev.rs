use heightbev_core::bev::{
    build_bev, flatten_volume, oracle_bev, project_to_volume, BevSpec, FeatureImage, HeightDistribution,
};
use heightbev_core::geometry::{
    Camera, CameraExtrinsics, CameraIntrinsics, CameraRig, EgoPose, HeightLift, SurroundRigSpec,
};
use heightbev_core::linalg::Vec3;
use heightbev_core::semantic_map::{rasterize, Bounds};
use heightbev_core::synthworld::{generate_world, render_surround, HeightBins, RenderOptions, WorldSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W: usize = 40;
const H: usize = 30;

fn overlapping_rig() -> CameraRig {
    let intr = CameraIntrinsics::new(30.0, 30.0, [19.5, 14.5], [W, H]).unwrap();
    let cams = [(0.0, 0.1), (0.3, -0.2)]
        .iter()
        .enumerate()
        .map(|(i, &(yaw, y))| {
            Camera::new(
                format!("c{i}"),
                intr,
                CameraExtrinsics::from_mount(Vec3::new(-3.0, y, 2.0), yaw, -0.5),
            )
            .unwrap()
        })
        .collect();
    CameraRig::new(cams).unwrap()
}

fn random_inputs(
    rng: &mut ChaCha8Rng,
    cams: usize,
    channels: usize,
    bins: usize,
) -> (Vec<FeatureImage>, Vec<HeightDistribution>) {
    let feats = (0..cams)
        .map(|_| {
            FeatureImage::new(
                W,
                H,
                channels,
                (0..W * H * channels).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .unwrap()
        })
        .collect();
    let dists = (0..cams)
        .map(|_| {
            let mut d = Vec::with_capacity(W * H * bins);
            for _ in 0..W * H {
                let raw: Vec<f64> = (0..bins).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = raw.iter().sum();
                d.extend(raw.iter().map(|v| v / s));
            }
            HeightDistribution::new(W, H, bins, d).unwrap()
        })
        .collect();
    (feats, dists)
}

fn small_spec() -> BevSpec {
    BevSpec::new(10.0, 0.5, HeightBins::default()).unwrap()
}

#[test]
fn accumulation_matches_per_pixel_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rig = overlapping_rig();
    let spec = small_spec();
    let (feats, dists) = random_inputs(&mut rng, 2, 3, spec.bins.len());
    let vol = project_to_volume(&feats, &dists, &rig, &spec).unwrap();
    let s = spec.size();
    let mut touched = 0;
    for row in 0..s {
        for col in 0..s {
            let p = [
                (col as f64 + 0.5 - s as f64 / 2.0) * 0.5,
                (row as f64 + 0.5 - s as f64 / 2.0) * 0.5,
            ];
            for (k, &b) in spec.bins.values().iter().enumerate() {
                let mut acc = [0.0; 3];
                let mut wsum = 0.0;
                let mut cams_seeing = 0;
                for (ci, cam) in rig.cameras.iter().enumerate() {
                    let m = cam.lifted_projection(HeightLift(b));
                    let x = [p[0], p[1], 0.0, 1.0];
                    let q: Vec<f64> = m.iter().map(|r| (0..4).map(|j| r[j] * x[j]).sum()).collect();
                    if q[2] <= 0.0 {
                        continue;
                    }
                    let (u, v) = (q[0] / q[2], q[1] / q[2]);
                    if u < 0.0 || v < 0.0 || u > (W - 1) as f64 || v > (H - 1) as f64 {
                        continue;
                    }
                    cams_seeing += 1;
                    // Tent kernel over every pixel: the bilinear weights.
                    for pr in 0..H {
                        for pc in 0..W {
                            let a = (1.0 - (u - pc as f64).abs()).max(0.0) * (1.0 - (v - pr as f64).abs()).max(0.0);
                            if a == 0.0 {
                                continue;
                            }
                            let hk = dists[ci].pixel(pc, pr)[k];
                            wsum += a * hk;
                            for (c, f) in feats[ci].pixel(pc, pr).iter().enumerate() {
                                acc[c] += a * hk * f;
                            }
                        }
                    }
                }
                if cams_seeing == 2 {
                    touched += 1;
                }
                assert!((vol.weight(row, col, k) - wsum).abs() < 1e-6);
                for (c, a) in acc.iter().enumerate() {
                    assert!((vol.feature(row, col, k)[c] - a).abs() < 1e-6);
                }
            }
        }
    }
    assert!(touched > 50, "cameras barely overlap ({touched} cell-bins)");
}

#[test]
fn scores_scale_linearly_with_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rig = overlapping_rig();
    let spec = small_spec();
    let (feats, dists) = random_inputs(&mut rng, 2, 2, spec.bins.len());
    let base = flatten_volume(&project_to_volume(&feats, &dists, &rig, &spec).unwrap());
    for c in [4.0, 3.0, 0.37] {
        let scaled: Vec<FeatureImage> = feats
            .iter()
            .map(|f| FeatureImage::new(f.width, f.height, f.channels, f.data.iter().map(|v| v * c).collect()).unwrap())
            .collect();
        let g = flatten_volume(&project_to_volume(&scaled, &dists, &rig, &spec).unwrap());
        assert_eq!(g.mask, base.mask);
        for (a, b) in g.scores.iter().zip(&base.scores) {
            if c == 4.0 {
                assert_eq!(*a, b * c);
            } else {
                assert!((a - b * c).abs() <= 1e-12 * (b * c).abs().max(1.0));
            }
        }
    }
}

#[test]
fn camera_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rig = overlapping_rig();
    let spec = small_spec();
    let (feats, dists) = random_inputs(&mut rng, 2, 3, spec.bins.len());
    let a = flatten_volume(&project_to_volume(&feats, &dists, &rig, &spec).unwrap());
    let rev = CameraRig::new(rig.cameras.iter().rev().cloned().collect()).unwrap();
    let fr: Vec<_> = feats.iter().rev().cloned().collect();
    let dr: Vec<_> = dists.iter().rev().cloned().collect();
    let b = flatten_volume(&project_to_volume(&fr, &dr, &rev, &spec).unwrap());
    assert_eq!(a.mask, b.mask);
    for (x, y) in a.scores.iter().zip(&b.scores) {
        assert!((x - y).abs() <= 1e-9);
    }
}

fn rendered_scene(seed: u64) -> (heightbev_core::synthworld::World, EgoPose, CameraRig) {
    let world = generate_world(&WorldSpec {
        seed,
        ..WorldSpec::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let pose = world.sample_pose(&mut rng, 60.0).unwrap();
    let rig = CameraRig::surround(&SurroundRigSpec {
        width: 136,
        height: 56,
        ..SurroundRigSpec::default()
    })
    .unwrap();
    (world, pose, rig)
}

#[test]
fn nonzero_cells_are_reachable() {
    let (world, pose, rig) = rendered_scene(5);
    let spec = BevSpec::new(40.0, 0.5, HeightBins::default()).unwrap();
    let obs = render_surround(&world, &rig, &pose, &RenderOptions::default());
    let bev = build_bev(&obs, &rig, &spec).unwrap();
    let s = spec.size();
    let mut nonzero = 0;
    for row in 0..s {
        for col in 0..s {
            if !(0..bev.channels).any(|c| bev.score(c, row, col) != 0.0) {
                continue;
            }
            nonzero += 1;
            let p = spec.cell_center(row, col);
            let seen = rig.cameras.iter().any(|cam| {
                spec.bins.values().iter().any(|&b| {
                    cam.ground_to_pixel(p, HeightLift(b)).is_some_and(|q| {
                        q.depth > 0.0
                            && (0.0..=(cam.intrinsics.width() - 1) as f64).contains(&q.u)
                            && (0.0..=(cam.intrinsics.height() - 1) as f64).contains(&q.v)
                    })
                })
            });
            assert!(seen, "cell ({row}, {col}) has score but no camera sees it");
        }
    }
    assert!(nonzero > 100);
}

#[test]
fn oracle_bev_matches_rasterized_ego_map() {
    let (world, pose, _) = rendered_scene(9);
    let spec = BevSpec::default();
    let bev = oracle_bev(&world, &pose, &spec).unwrap();
    let r = rasterize(
        &world.map.in_ego_frame(&pose),
        Bounds::new([-50.0, -50.0], [50.0, 50.0]),
        0.5,
    )
    .unwrap();
    assert_eq!((r.width, r.height), (200, 200));
    for c in 0..bev.channels {
        for (a, &b) in bev.channel(c).iter().zip(r.channel(c)) {
            assert_eq!(*a, f64::from(b));
        }
    }
    assert!(bev.mask.iter().all(|&m| m));
}

#[test]
fn oracle_bev_half_turn_flips_grid() {
    let (world, pose, _) = rendered_scene(13);
    let spec = BevSpec::default();
    let a = oracle_bev(&world, &pose, &spec).unwrap();
    let b = oracle_bev(
        &world,
        &EgoPose::new(pose.x, pose.y, pose.yaw + std::f64::consts::PI),
        &spec,
    )
    .unwrap();
    let s = spec.size();
    let mut differ = 0;
    for c in 0..a.channels {
        for row in 0..s {
            for col in 0..s {
                differ += usize::from(a.score(c, row, col) != b.score(c, s - 1 - row, s - 1 - col));
            }
        }
    }
    assert_eq!(differ, 0);
}
