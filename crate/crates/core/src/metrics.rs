//! IoU and recall accuracy.

use alloc::vec::Vec;

use crate::bev::BevGrid;
use crate::{Error, Result};

/// Standard recall thresholds, metres.
pub const RECALL_THRESHOLDS: [f64; 4] = [1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MaskPolicy {
    /// Only cells the prediction observed.
    #[default]
    Observed,
    FullGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IouEntry {
    pub intersection: usize,
    pub union: usize,
    /// `None` for an empty union.
    pub iou: Option<f64>,
}

/// IoU of one channel after binarizing both grids at `threshold`.
pub fn iou(pred: &BevGrid, gt: &BevGrid, category: usize, policy: MaskPolicy, threshold: f64) -> Result<IouEntry> {
    if pred.size != gt.size || pred.channels != gt.channels {
        return Err(Error::ShapeMismatch("prediction and ground truth grids differ".into()));
    }
    if category >= pred.channels {
        return Err(Error::ShapeMismatch("category out of range".into()));
    }
    let (p, g) = (pred.channel(category), gt.channel(category));
    let (mut inter, mut union) = (0usize, 0usize);
    for cell in 0..p.len() {
        if policy == MaskPolicy::Observed && !(pred.mask[cell] && gt.mask[cell]) {
            continue;
        }
        let a = p[cell] >= threshold;
        let b = g[cell] >= threshold;
        inter += usize::from(a && b);
        union += usize::from(a || b);
    }
    Ok(IouEntry {
        intersection: inter,
        union,
        iou: (union > 0).then(|| inter as f64 / union as f64),
    })
}

/// Mean over defined entries; `None` if none is defined.
pub fn mean_iou(entries: &[IouEntry]) -> Option<f64> {
    let defined: Vec<f64> = entries.iter().filter_map(|e| e.iou).collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecallReport {
    pub thresholds: Vec<f64>,
    pub recall: Vec<f64>,
    pub samples: usize,
    /// Trials that failed (infinite error).
    pub failures: usize,
    pub median: f64,
    pub p90: f64,
}

/// Fraction of errors at or below each threshold. Failed trials are passed
/// as `+∞` and count as misses everywhere.
pub fn recall_accuracy(errors: &[f64], thresholds: &[f64]) -> Result<RecallReport> {
    if errors.is_empty() {
        return Err(Error::EmptyErrors);
    }
    if let Some(&bad) = errors.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::InvalidErrorValue(bad));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let recall = thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&e| e <= t) as f64 / n)
        .collect();
    Ok(RecallReport {
        thresholds: thresholds.to_vec(),
        recall,
        samples: sorted.len(),
        failures: sorted.iter().filter(|e| e.is_infinite()).count(),
        median: quantile(&sorted, 0.5),
        p90: quantile(&sorted, 0.9),
    })
}

/// Linear-interpolated quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let (a, b) = (sorted[lo], sorted[hi]);
    if a == b || pos == lo as f64 {
        return a;
    }
    a + (b - a) * (pos - lo as f64)
}
