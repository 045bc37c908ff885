//! Command-line front end. Every subcommand resolves an
//! [`ExperimentConfig`] (defaults ← `--config` ← `--set` ← dedicated
//! flags), writes it next to its outputs together with the argument list
//! that produced them, and then calls into the core crate.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use heightbev_core::bev::{build_bev, oracle_bev, BevGrid};
use heightbev_core::geometry::{CameraRig, EgoPose};
use heightbev_core::localizer::localize;
use heightbev_core::synthworld::{generate_world, render_surround};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{bench, csv_bytes, format_bench, run_experiment};
use crate::formats;

#[derive(Debug, Parser)]
#[command(
    name = "heightbev",
    version,
    about = "Height-layered BEV construction and SD-map relocalization"
)]
pub struct Cli {
    /// Master seed for everything random (overrides the config's `seed`
    /// and `world.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
    /// Experiment config JSON merged over the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted `key=value` override, e.g. `localizer.tau=0.01`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world (map, surface heights, buildings).
    GenWorld {
        #[arg(long)]
        extent: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the surround-view observation at a pose.
    Render {
        #[arg(long)]
        world: PathBuf,
        /// Rig JSON; the configured surround rig if absent.
        #[arg(long)]
        rig: Option<PathBuf>,
        /// `x,y,heading_deg` in the map frame.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        pose: EgoPose,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a BEV grid from an observation, or the oracle BEV from a world.
    BuildBev {
        #[command(flatten)]
        source: BevInput,
        #[arg(long)]
        bev_res: Option<f64>,
        /// Comma-separated height bins, metres.
        #[arg(long, allow_hyphen_values = true)]
        bins: Option<String>,
        #[arg(long, value_enum, default_value_t = BevFormat::Smr)]
        format: BevFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Localize a BEV against a map around a prior.
    Localize {
        /// BEV file (.smr or f32).
        #[arg(long, conflicts_with = "obs")]
        bev: Option<PathBuf>,
        /// Observation manifest; the BEV is built first.
        #[arg(long)]
        obs: Option<PathBuf>,
        #[arg(long, requires = "obs")]
        rig: Option<PathBuf>,
        /// Map or world JSON.
        #[arg(long)]
        map: PathBuf,
        /// `x,y,heading_deg`.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        prior: EgoPose,
        /// True position `x,y[,heading_deg]`, to report the error.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        truth: Option<EgoPose>,
        #[arg(long)]
        encoder: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte Carlo relocalization experiment.
    Evaluate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Time each pipeline stage.
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a recorded invocation into a new output directory.
    Replay {
        /// `invocation.json` written by an earlier run.
        invocation: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
pub struct BevInput {
    /// Observation manifest (`obs.json`).
    #[arg(long, conflicts_with = "world")]
    pub obs: Option<PathBuf>,
    #[arg(long, requires = "obs")]
    pub rig: Option<PathBuf>,
    /// World JSON, for the oracle BEV.
    #[arg(long, requires = "pose")]
    pub world: Option<PathBuf>,
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true, requires = "world")]
    pub pose: Option<EgoPose>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BevFormat {
    /// u8-quantized `.smr`.
    Smr,
    /// Lossless f32 planes.
    F32,
}

/// `x,y` or `x,y,heading_deg`.
pub fn parse_pose(s: &str) -> std::result::Result<EgoPose, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [x, y] => Ok(EgoPose::new(x, y, 0.0)),
        [x, y, deg] if parts.iter().all(|v| v.is_finite()) => Ok(EgoPose::new(x, y, deg.to_radians())),
        _ => Err("expected x,y[,heading_deg] with finite values".into()),
    }
}

/// Recorded next to every output so the run can be replayed.
#[derive(Debug, Serialize, Deserialize)]
pub struct Invocation {
    pub argv: Vec<String>,
    pub config: ExperimentConfig,
}

/// Parses `argv` (without the program name) and runs it.
pub fn run_args(argv: &[String]) -> Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("heightbev".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    run(&cli, argv)
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::ConfigInvalid("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::ConfigInvalid(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli, argv))
}

fn resolve(cli: &Cli, extra: &[String]) -> Result<ExperimentConfig> {
    let mut sets: Vec<String> = cli
        .seed
        .iter()
        .flat_map(|s| [format!("seed={s}"), format!("world.seed={s}")])
        .collect();
    sets.extend(cli.overrides.iter().cloned());
    sets.extend(extra.iter().cloned());
    ExperimentConfig::load(cli.config.as_deref(), &sets)
}

struct Output<'a> {
    dir: &'a Path,
    force: bool,
}

impl Output<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        formats::write_new(&p, bytes, self.force)?;
        Ok(p)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn invocation(&self, argv: &[String], config: &ExperimentConfig) -> Result<()> {
        self.json(
            "invocation.json",
            &Invocation {
                argv: argv.to_vec(),
                config: config.clone(),
            },
        )?;
        Ok(())
    }
}

fn load_rig_or_default(path: Option<&Path>, cfg: &ExperimentConfig) -> Result<CameraRig> {
    match path {
        Some(p) => formats::load_rig(p),
        None => Ok(CameraRig::surround(&cfg.rig)?),
    }
}

fn bev_from_obs(obs_path: &Path, rig: Option<&Path>, cfg: &ExperimentConfig) -> Result<BevGrid> {
    let (obs, _, _) = formats::load_observation(obs_path)?;
    let rig = load_rig_or_default(rig, cfg)?;
    if rig.len() != obs.cameras.len() {
        return Err(CliError::Dimension(format!(
            "rig has {} cameras, observation has {}",
            rig.len(),
            obs.cameras.len()
        )));
    }
    for (cam, img) in rig.cameras.iter().zip(&obs.cameras) {
        if cam.intrinsics.width() != img.width || cam.intrinsics.height() != img.height {
            return Err(CliError::Dimension(format!(
                "camera `{}` image size differs from the rig",
                cam.name
            )));
        }
    }
    Ok(build_bev(&obs, &rig, &cfg.bev)?)
}

fn pgm_of_bev(bev: &BevGrid, c: usize) -> Vec<u8> {
    let v: Vec<f64> = bev
        .channel(c)
        .iter()
        .zip(&bev.mask)
        .map(|(&s, &m)| if m { s } else { 0.0 })
        .collect();
    formats::encode_pgm16(&v, bev.size, bev.size)
}

fn pose_json(p: &EgoPose) -> serde_json::Value {
    serde_json::json!({ "x": p.x, "y": p.y, "heading_deg": p.yaw.to_degrees() })
}

fn dispatch(cli: &Cli, argv: &[String]) -> Result<()> {
    match &cli.command {
        Command::GenWorld { extent, out } => {
            let extra: Vec<String> = extent.iter().map(|e| format!("world.extent={e}")).collect();
            let cfg = resolve(cli, &extra)?;
            let world = generate_world(&cfg.world)?;
            let o = Output {
                dir: out,
                force: cli.force,
            };
            o.write("world.json", &formats::world_json(&world))?;
            o.invocation(argv, &cfg)
        }
        Command::Render { world, rig, pose, out } => {
            let cfg = resolve(cli, &[])?;
            let w = formats::load_world(world)?;
            let rig = load_rig_or_default(rig.as_deref(), &cfg)?;
            let obs = render_surround(&w, &rig, pose, &cfg.render);
            let o = Output {
                dir: out,
                force: cli.force,
            };
            formats::save_observation(&obs, &w.map.categories, pose, out, cli.force)?;
            o.write("rig.json", &formats::rig_json(&rig))?;
            o.invocation(argv, &cfg)
        }
        Command::BuildBev {
            source,
            bev_res,
            bins,
            format,
            out,
        } => {
            let mut extra = Vec::new();
            if let Some(r) = bev_res {
                extra.push(format!("bev.resolution={r}"));
            }
            if let Some(b) = bins {
                extra.push(format!("bev.bins=[{b}]"));
            }
            let cfg = resolve(cli, &extra)?;
            cfg.bev.validate()?;
            let (bev, names) = if let Some(obs) = &source.obs {
                let (_, names, _) = formats::load_observation(obs)?;
                (bev_from_obs(obs, source.rig.as_deref(), &cfg)?, names)
            } else {
                let (world, pose) = match (&source.world, &source.pose) {
                    (Some(w), Some(p)) => (w, p),
                    _ => return Err(CliError::ConfigInvalid("oracle BEV needs --world and --pose".into())),
                };
                let w = formats::load_world(world)?;
                (oracle_bev(&w, pose, &cfg.bev)?, w.map.categories.clone())
            };
            let o = Output {
                dir: out,
                force: cli.force,
            };
            match format {
                BevFormat::Smr => o.write("bev.smr", &formats::encode_bev_smr(&bev))?,
                BevFormat::F32 => o.write("bev.f32", &formats::encode_bev_f32(&bev))?,
            };
            for (c, name) in names.iter().enumerate().take(bev.channels) {
                o.write(&format!("bev_{name}.pgm"), &pgm_of_bev(&bev, c))?;
            }
            o.invocation(argv, &cfg)
        }
        Command::Localize {
            bev,
            obs,
            rig,
            map,
            prior,
            truth,
            encoder,
            out,
        } => {
            let extra: Vec<String> = encoder.iter().map(|e| format!("localizer.encoder={e}")).collect();
            let cfg = resolve(cli, &extra)?;
            cfg.localizer.validate()?;
            let grid = match (bev, obs) {
                (Some(b), _) => formats::load_bev(b)?,
                (None, Some(o)) => bev_from_obs(o, rig.as_deref(), &cfg)?,
                (None, None) => return Err(CliError::ConfigInvalid("one of --bev or --obs is required".into())),
            };
            let m = formats::load_map_or_world(map)?;
            let res = localize(&grid, &m, prior, &cfg.localizer)?;
            let stride = cfg.localizer.stride.max(1) as f64;
            let mut report = serde_json::json!({
                "estimate": pose_json(&res.estimate),
                "argmax_estimate": pose_json(&res.argmax_estimate),
                "prior": pose_json(prior),
                "peak_prob": res.peak_prob,
                "peak_cell": res.peak,
                "encoded_cell_m": cfg.localizer.tile_resolution * stride,
                "likelihood_size": [res.probability.width, res.probability.height],
            });
            if let Some(t) = truth {
                report["truth"] = pose_json(t);
                report["error_m"] = res.estimate.distance_to(t).into();
                report["argmax_error_m"] = res.argmax_estimate.distance_to(t).into();
            }
            let o = Output {
                dir: out,
                force: cli.force,
            };
            o.json("result.json", &report)?;
            o.write(
                "likelihood.pgm",
                &formats::encode_pgm16(&res.probability.probs, res.probability.width, res.probability.height),
            )?;
            o.invocation(argv, &cfg)
        }
        Command::Evaluate { out } => {
            let cfg = resolve(cli, &[])?;
            let exp = run_experiment(&cfg)?;
            let o = Output {
                dir: out,
                force: cli.force,
            };
            o.write("trials.csv", &csv_bytes(&exp.records)?)?;
            o.json("summary.json", &exp.summary)?;
            let r = &exp.summary.recall;
            log::info!(
                "recall@{:?} = {:?} over {} trials ({} failed)",
                r.thresholds,
                r.recall,
                r.samples,
                r.failures
            );
            o.invocation(argv, &cfg)
        }
        Command::Bench { out } => {
            let cfg = resolve(cli, &[])?;
            let rows = bench(&cfg)?;
            print!("{}", format_bench(&rows));
            if let Some(out) = out {
                let o = Output {
                    dir: out,
                    force: cli.force,
                };
                o.json("bench.json", &rows)?;
                o.invocation(argv, &cfg)?;
            }
            Ok(())
        }
        Command::Replay { invocation, out } => {
            let text = fs::read_to_string(invocation).map_err(|e| CliError::io(invocation, e))?;
            let inv: Invocation = serde_json::from_str(&text).map_err(|e| CliError::parse(invocation, e))?;
            let argv = replace_out(&inv.argv, out)?;
            let mut cli2 = Cli::try_parse_from(std::iter::once("heightbev".to_string()).chain(argv.iter().cloned()))
                .map_err(|e| CliError::parse(invocation, e))?;
            if matches!(cli2.command, Command::Replay { .. }) {
                return Err(CliError::ConfigInvalid("cannot replay a replay".into()));
            }
            cli2.force |= cli.force;
            dispatch(&cli2, &argv)
        }
    }
}

/// Swaps the `--out` value of a recorded argument list.
fn replace_out(argv: &[String], out: &Path) -> Result<Vec<String>> {
    let mut res = Vec::with_capacity(argv.len());
    let mut found = false;
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
            found = true;
            res.push(a.clone());
            res.push(out.display().to_string());
        } else if a.starts_with("--out=") {
            found = true;
            res.push(format!("--out={}", out.display()));
        } else {
            res.push(a.clone());
        }
    }
    if !found {
        res.push("--out".into());
        res.push(out.display().to_string());
    }
    Ok(res)
}
