use heightbev_core::bev::BevGrid;
use heightbev_core::metrics::{iou, mean_iou, quantile, recall_accuracy, MaskPolicy, RECALL_THRESHOLDS};
use proptest::prelude::*;

fn grid(scores: Vec<f64>, mask: Vec<bool>) -> BevGrid {
    let size = (scores.len() as f64).sqrt() as usize;
    BevGrid {
        size,
        channels: 1,
        resolution: 0.5,
        scores,
        mask,
    }
}

#[test]
fn recall_examples() {
    let r = recall_accuracy(&[0.5, 3.0, 7.0, 20.0], &RECALL_THRESHOLDS).unwrap();
    assert_eq!(r.recall, [0.25, 0.25, 0.5, 0.75]);
    assert_eq!(recall_accuracy(&[0.0; 7], &RECALL_THRESHOLDS).unwrap().recall, [1.0; 4]);
    assert_eq!(
        recall_accuracy(&[10.5, 11.0, 1e6], &RECALL_THRESHOLDS).unwrap().recall,
        [0.0; 4]
    );
    // Thresholds are inclusive.
    assert_eq!(
        recall_accuracy(&[1.0, 2.0], &RECALL_THRESHOLDS).unwrap().recall,
        [0.5, 1.0, 1.0, 1.0]
    );
}

#[test]
fn iou_examples() {
    let all = vec![true; 16];
    let gt = grid((0..16).map(|i| f64::from(u8::from(i < 8))).collect(), all.clone());
    assert_eq!(iou(&gt, &gt, 0, MaskPolicy::Observed, 0.5).unwrap().iou, Some(1.0));
    let disjoint = grid((0..16).map(|i| f64::from(u8::from(i >= 8))).collect(), all.clone());
    assert_eq!(
        iou(&disjoint, &gt, 0, MaskPolicy::Observed, 0.5).unwrap().iou,
        Some(0.0)
    );
    let half = grid((0..16).map(|i| f64::from(u8::from(i < 4))).collect(), all.clone());
    assert_eq!(iou(&half, &gt, 0, MaskPolicy::Observed, 0.5).unwrap().iou, Some(0.5));
    let wrong = BevGrid::zeros(5, 1, 0.5);
    assert!(iou(&wrong, &gt, 0, MaskPolicy::Observed, 0.5).is_err());
}

#[test]
fn mask_policy_excludes_unobserved_cells() {
    let gt = grid(vec![1.0; 16], vec![true; 16]);
    let pred = grid(
        (0..16).map(|i| f64::from(u8::from(i < 8))).collect(),
        (0..16).map(|i| i < 8).collect(),
    );
    assert_eq!(iou(&pred, &gt, 0, MaskPolicy::Observed, 0.5).unwrap().iou, Some(1.0));
    assert_eq!(iou(&pred, &gt, 0, MaskPolicy::FullGrid, 0.5).unwrap().iou, Some(0.5));
    let empty = grid(vec![0.0; 16], vec![true; 16]);
    let e = iou(&empty, &empty, 0, MaskPolicy::FullGrid, 0.5).unwrap();
    assert_eq!(e.iou, None);
    assert_eq!(
        mean_iou(&[e, iou(&pred, &gt, 0, MaskPolicy::FullGrid, 0.5).unwrap()]),
        Some(0.5)
    );
    assert_eq!(mean_iou(&[e]), None);
}

#[test]
fn quantiles_interpolate() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(quantile(&v, 0.5), 2.5);
    assert_eq!(quantile(&v, 0.0), 1.0);
    assert_eq!(quantile(&v, 1.0), 4.0);
    assert!(quantile(&[], 0.5).is_nan());
}

proptest! {
    #[test]
    fn recall_is_monotone_and_bounded(
        errors in prop::collection::vec(prop_oneof![0.0..30.0f64, Just(f64::INFINITY)], 1..60),
        mut ts in prop::collection::vec(0.0..30.0f64, 1..8),
    ) {
        ts.sort_by(f64::total_cmp);
        let r = recall_accuracy(&errors, &ts).unwrap();
        prop_assert!(r.recall.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r.recall.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert_eq!(r.failures, errors.iter().filter(|e| e.is_infinite()).count());
    }

    #[test]
    fn iou_is_symmetric_and_bounded(
        a in prop::collection::vec(0.0..1.0f64, 36),
        b in prop::collection::vec(0.0..1.0f64, 36),
        ma in prop::collection::vec(any::<bool>(), 36),
        mb in prop::collection::vec(any::<bool>(), 36),
        full in any::<bool>(),
    ) {
        let policy = if full { MaskPolicy::FullGrid } else { MaskPolicy::Observed };
        let (p, g) = (grid(a, ma), grid(b, mb));
        let x = iou(&p, &g, 0, policy, 0.5).unwrap();
        let y = iou(&g, &p, 0, policy, 0.5).unwrap();
        prop_assert_eq!(x, y);
        if let Some(v) = x.iou {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v == 1.0, x.intersection == x.union);
        }
    }
}
