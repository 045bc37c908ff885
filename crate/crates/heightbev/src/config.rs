//! Experiment configuration: defaults, JSON file, then `key=value`
//! overrides, in that order. Unknown keys are rejected at every level.

use std::fs;
use std::path::Path;

use heightbev_core::bev::BevSpec;
use heightbev_core::geometry::{CameraRig, SurroundRigSpec};
use heightbev_core::localizer::{FeatureEncoder, LocalizerConfig};
use heightbev_core::metrics::MaskPolicy;
use heightbev_core::synthworld::{RenderOptions, WorldSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BevSource {
    /// Rasterized ground truth around the true pose.
    #[default]
    Oracle,
    /// Rendered surround view pushed through projection and flatten.
    Rendered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every trial derives its own stream from it.
    pub seed: u64,
    pub trials: usize,
    /// World template; its `seed` is replaced per trial.
    pub world: WorldSpec,
    pub rig: SurroundRigSpec,
    pub render: RenderOptions,
    pub bev: BevSpec,
    pub localizer: LocalizerConfig,
    pub bev_source: BevSource,
    /// Poses are sampled on roads at least this far from the world edge.
    pub pose_margin: f64,
    pub iou_threshold: f64,
    pub iou_mask: MaskPolicy,
    /// Record per-trial wall time. Off by default so CSVs are reproducible.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            trials: 100,
            world: WorldSpec::default(),
            rig: SurroundRigSpec::default(),
            render: RenderOptions::default(),
            bev: BevSpec::default(),
            localizer: LocalizerConfig::default(),
            bev_source: BevSource::Oracle,
            pose_margin: 60.0,
            iou_threshold: 0.5,
            iou_mask: MaskPolicy::Observed,
            timing: false,
        }
    }
}

/// Parts of a config that are expensive or fallible to derive.
#[derive(Debug, Clone)]
pub struct Validated {
    pub rig: CameraRig,
    pub encoder: FeatureEncoder,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Validated> {
        let invalid = |m: &str| Err(CliError::ConfigInvalid(m.to_string()));
        if self.trials == 0 {
            return invalid("trials must be >= 1");
        }
        if !(self.pose_margin >= 0.0 && self.pose_margin.is_finite()) {
            return invalid("pose_margin must be finite and >= 0");
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return invalid("iou_threshold must be in (0, 1]");
        }
        if !(self.render.max_range > 0.0 && self.render.grid_cell > 0.0) {
            return invalid("render.max_range and render.grid_cell must be positive");
        }
        self.world.validate()?;
        self.bev.validate()?;
        let encoder = self.localizer.validate()?;
        let rig = CameraRig::surround(&self.rig)?;
        Ok(Validated { rig, encoder })
    }

    /// Defaults, merged with `path` if given, then with `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(ExperimentConfig::default()).expect("defaults serialize");
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let file: Value = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
            merge(&mut value, file, "")?;
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }
}

/// Deep-merges `src` into `dst`. Objects merge key by key; a key absent
/// from `dst` is unknown and rejected.
fn merge(dst: &mut Value, src: Value, prefix: &str) -> Result<()> {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (k, v) in s {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                match d.get_mut(&k) {
                    Some(slot) => merge(slot, v, &key)?,
                    None => return Err(CliError::ConfigInvalid(format!("unknown config key `{key}`"))),
                }
            }
            Ok(())
        }
        (d, s) => {
            *d = s;
            Ok(())
        }
    }
}

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and
/// taken as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::ConfigInvalid(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::ConfigInvalid(format!("override `{spec}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| CliError::ConfigInvalid(format!("unknown config key `{key}`")))?;
    }
    *slot = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = ExperimentConfig::load(None, &["localizer.tau=0.01".into(), "bev_source=rendered".into()]).unwrap();
        assert_eq!(cfg.localizer.tau, 0.01);
        assert_eq!(cfg.bev_source, BevSource::Rendered);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            ExperimentConfig::load(None, &["localizer.temperature=1".into()]),
            Err(CliError::ConfigInvalid(_))
        ));
        let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        let err = merge(&mut v, serde_json::json!({"world": {"roads": 3}}), "").unwrap_err();
        assert!(err.to_string().contains("world.roads"));
    }

    #[test]
    fn zero_trials_invalid() {
        let cfg = ExperimentConfig::load(None, &["trials=0".into()]).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::ConfigInvalid(_))));
    }
}
