//! Monte Carlo relocalization experiment and per-stage benchmark.

use std::io::Write;
use std::time::Instant;

use heightbev_core::bev::{build_bev, flatten_volume, oracle_bev, oracle_inputs, project_to_volume, BevGrid, BevSpec};
use heightbev_core::geometry::{CameraRig, EgoPose};
use heightbev_core::localizer::{localize, localize_in_tile, perturb};
use heightbev_core::metrics::{iou, mean_iou, quantile, recall_accuracy, IouEntry, RecallReport, RECALL_THRESHOLDS};
use heightbev_core::semantic_map::crop_tile;
use heightbev_core::synthworld::{generate_world, render_surround, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BevSource, ExperimentConfig, Validated};
use crate::error::{CliError, Result};

/// Per-trial seed: SplitMix64 finalizer over master seed and trial index,
/// so trial streams do not depend on scheduling.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut z = master ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A world and a pose on it, both derived from `seed`.
pub fn scene(cfg: &ExperimentConfig, seed: u64) -> Result<(World, EgoPose, ChaCha8Rng)> {
    let mut spec = cfg.world.clone();
    spec.seed = seed;
    let world = generate_world(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let pose = world.sample_pose(&mut rng, cfg.pose_margin).ok_or_else(|| {
        CliError::ConfigInvalid("no road piece far enough from the world edge to place a pose".into())
    })?;
    Ok((world, pose, rng))
}

/// Rendered-pipeline BEV for one scene and its IoU against the oracle, per
/// category.
pub fn reconstruction(
    cfg: &ExperimentConfig,
    rig: &CameraRig,
    world: &World,
    pose: &EgoPose,
    spec: &BevSpec,
) -> Result<(BevGrid, Vec<IouEntry>)> {
    let obs = render_surround(world, rig, pose, &cfg.render);
    let bev = build_bev(&obs, rig, spec)?;
    let gt = oracle_bev(world, pose, spec)?;
    let entries = (0..bev.channels)
        .map(|c| iou(&bev, &gt, c, cfg.iou_mask, cfg.iou_threshold))
        .collect::<heightbev_core::Result<Vec<_>>>()?;
    Ok((bev, entries))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub true_x: f64,
    pub true_y: f64,
    pub prior_x: f64,
    pub prior_y: f64,
    pub est_x: f64,
    pub est_y: f64,
    /// Euclidean position error, metres; `inf` for a failed trial.
    pub error_m: f64,
    pub peak_prob: f64,
    pub wall_ms: f64,
    #[serde(skip)]
    pub argmax_error_m: f64,
    /// Per-category IoU of the rendered BEV (empty for oracle BEVs).
    #[serde(skip)]
    pub iou: Vec<IouEntry>,
    #[serde(skip)]
    pub failure: Option<String>,
}

impl TrialRecord {
    fn failed(trial: usize, seed: u64, msg: String) -> Self {
        TrialRecord {
            trial,
            seed,
            true_x: f64::NAN,
            true_y: f64::NAN,
            prior_x: f64::NAN,
            prior_y: f64::NAN,
            est_x: f64::NAN,
            est_y: f64::NAN,
            error_m: f64::INFINITY,
            peak_prob: f64::NAN,
            wall_ms: 0.0,
            argmax_error_m: f64::INFINITY,
            iou: Vec::new(),
            failure: Some(msg),
        }
    }
}

fn try_trial(cfg: &ExperimentConfig, v: &Validated, trial: usize, seed: u64) -> Result<TrialRecord> {
    let (world, pose, mut rng) = scene(cfg, seed)?;
    let (bev, iou) = match cfg.bev_source {
        BevSource::Oracle => (oracle_bev(&world, &pose, &cfg.bev)?, Vec::new()),
        BevSource::Rendered => reconstruction(cfg, &v.rig, &world, &pose, &cfg.bev)?,
    };
    let prior = perturb(&pose, &mut rng, cfg.localizer.r_max);
    let res = localize(&bev, &world.map, &prior, &cfg.localizer)?;
    Ok(TrialRecord {
        trial,
        seed,
        true_x: pose.x,
        true_y: pose.y,
        prior_x: prior.x,
        prior_y: prior.y,
        est_x: res.estimate.x,
        est_y: res.estimate.y,
        error_m: res.estimate.distance_to(&pose),
        peak_prob: res.peak_prob,
        wall_ms: 0.0,
        argmax_error_m: res.argmax_estimate.distance_to(&pose),
        iou,
        failure: None,
    })
}

/// One trial; failures are recorded, never dropped.
pub fn run_trial(cfg: &ExperimentConfig, v: &Validated, trial: usize) -> TrialRecord {
    let seed = trial_seed(cfg.seed, trial);
    let start = Instant::now();
    let mut rec = try_trial(cfg, v, trial, seed).unwrap_or_else(|e| {
        log::warn!("trial {trial} failed: {e}");
        TrialRecord::failed(trial, seed, e.to_string())
    });
    if cfg.timing {
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    rec
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Latency {
    pub median_ms: f64,
    pub p90_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub seed: u64,
    pub bev_source: BevSource,
    /// Recall of the soft-argmax estimate.
    pub recall: RecallReport,
    /// Recall of the integer argmax, for reference.
    pub argmax_recall: RecallReport,
    /// Mean IoU per category name (rendered BEVs only).
    pub iou: Vec<(String, Option<f64>)>,
    pub latency: Option<Latency>,
    pub failures: Vec<Failure>,
}

pub struct Experiment {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let v = cfg.validate()?;
    let records: Vec<TrialRecord> = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &v, t)).collect();
    let summary = summarize(cfg, &records)?;
    Ok(Experiment { records, summary })
}

pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<Summary> {
    let errors: Vec<f64> = records.iter().map(|r| r.error_m).collect();
    let argmax: Vec<f64> = records.iter().map(|r| r.argmax_error_m).collect();
    let recall = recall_accuracy(&errors, &RECALL_THRESHOLDS)?;
    let argmax_recall = recall_accuracy(&argmax, &RECALL_THRESHOLDS)?;
    let names = heightbev_core::synthworld::CATEGORY_NAMES;
    let iou = match cfg.bev_source {
        BevSource::Oracle => Vec::new(),
        BevSource::Rendered => names
            .iter()
            .enumerate()
            .map(|(c, n)| {
                let entries: Vec<IouEntry> = records.iter().filter_map(|r| r.iou.get(c).copied()).collect();
                (n.to_string(), mean_iou(&entries))
            })
            .collect(),
    };
    let latency = cfg.timing.then(|| {
        let mut t: Vec<f64> = records.iter().map(|r| r.wall_ms).collect();
        t.sort_by(f64::total_cmp);
        Latency {
            median_ms: quantile(&t, 0.5),
            p90_ms: quantile(&t, 0.9),
        }
    });
    Ok(Summary {
        trials: records.len(),
        seed: cfg.seed,
        bev_source: cfg.bev_source,
        recall,
        argmax_recall,
        iou,
        latency,
        failures: records
            .iter()
            .filter_map(|r| {
                r.failure.as_ref().map(|m| Failure {
                    trial: r.trial,
                    message: m.clone(),
                })
            })
            .collect(),
    })
}

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| CliError::Parse(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| CliError::io(std::path::Path::new("<csv>"), e))?;
    Ok(())
}

pub fn csv_bytes(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(buf)
}

// --- Benchmark --------------------------------------------------------------

pub const STAGES: [&str; 8] = [
    "world",
    "render",
    "projection",
    "flatten",
    "oracle_bev",
    "crop",
    "matching",
    "end_to_end",
];

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

/// Times every pipeline stage over `cfg.trials` scenes, run one after
/// another so stages do not compete for cores. The BEV used for matching
/// is the rendered one.
pub fn bench(cfg: &ExperimentConfig) -> Result<Vec<StageTiming>> {
    let v = cfg.validate()?;
    let mut samples = vec![Vec::with_capacity(cfg.trials); STAGES.len()];
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;
    for trial in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, trial);
        let t_all = Instant::now();
        let t = Instant::now();
        let (world, pose, mut rng) = scene(cfg, seed)?;
        samples[0].push(ms(t));
        let t = Instant::now();
        let obs = render_surround(&world, &v.rig, &pose, &cfg.render);
        samples[1].push(ms(t));
        let (feats, dists) = oracle_inputs(&obs, &cfg.bev.bins);
        let t = Instant::now();
        let vol = project_to_volume(&feats, &dists, &v.rig, &cfg.bev)?;
        samples[2].push(ms(t));
        let t = Instant::now();
        let bev = flatten_volume(&vol);
        samples[3].push(ms(t));
        let t = Instant::now();
        let _ = oracle_bev(&world, &pose, &cfg.bev)?;
        samples[4].push(ms(t));
        let prior = perturb(&pose, &mut rng, cfg.localizer.r_max);
        let t = Instant::now();
        let tile = crop_tile(
            &world.map,
            &prior,
            cfg.localizer.tile_side,
            cfg.localizer.tile_resolution,
        )?;
        samples[5].push(ms(t));
        let t = Instant::now();
        let _ = localize_in_tile(&bev, &tile, &prior, &cfg.localizer, &v.encoder)?;
        samples[6].push(ms(t));
        samples[7].push(ms(t_all));
    }
    Ok(STAGES
        .iter()
        .zip(samples)
        .map(|(name, mut s)| {
            s.sort_by(f64::total_cmp);
            StageTiming {
                stage: name.to_string(),
                median_ms: quantile(&s, 0.5),
                mean_ms: s.iter().sum::<f64>() / s.len() as f64,
                max_ms: s.last().copied().unwrap_or(0.0),
            }
        })
        .collect())
}

pub fn format_bench(rows: &[StageTiming]) -> String {
    let mut s = format!(
        "{:<12} {:>12} {:>12} {:>12}\n",
        "stage", "median_ms", "mean_ms", "max_ms"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<12} {:>12.3} {:>12.3} {:>12.3}\n",
            r.stage, r.median_ms, r.mean_ms, r.max_ms
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(42, t)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn failed_trial_counts_as_miss() {
        let rec = TrialRecord::failed(0, 1, "boom".into());
        let cfg = ExperimentConfig::default();
        let s = summarize(&cfg, &[rec]).unwrap();
        assert_eq!(s.recall.recall, vec![0.0; 4]);
        assert_eq!(s.recall.failures, 1);
        assert_eq!(s.failures.len(), 1);
    }
}
