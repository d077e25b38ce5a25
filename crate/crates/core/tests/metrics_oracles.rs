use brelu_core::metrics::{confusion_metrics, r2, roc_auc};
use brelu_core::numerics::RngStream;
use proptest::prelude::*;

/// Definitions written out longhand from the four counts.
fn brute_force(pred: &[bool], label: &[bool]) -> (f64, f64, f64, f64) {
    let count = |p: bool, l: bool| {
        pred.iter()
            .zip(label)
            .filter(|(&a, &b)| a == p && b == l)
            .count() as f64
    };
    let (tp, fp, tn, fn_) = (
        count(true, true),
        count(true, false),
        count(false, false),
        count(false, true),
    );
    let acc = (tp + tn) / pred.len() as f64;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (acc, precision, recall, f1)
}

#[test]
fn confusion_metrics_match_enumeration_on_all_length_4_patterns() {
    for bits in 0u32..256 {
        let pred: Vec<bool> = (0..4).map(|k| bits >> k & 1 == 1).collect();
        let label: Vec<bool> = (4..8).map(|k| bits >> k & 1 == 1).collect();
        let probs: Vec<f64> = pred.iter().map(|&p| if p { 0.75 } else { 0.25 }).collect();
        let labels: Vec<f64> = label.iter().map(|&l| l as u8 as f64).collect();
        assert_eq!(
            confusion_metrics(&probs, &labels, 0.5).unwrap(),
            brute_force(&pred, &label),
            "pattern {bits:08b}"
        );
    }
}

/// Pairwise definition of AUC, O(n^2).
fn auc_pairs(score: &[f64], label: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in label.iter().enumerate() {
        for (j, &lj) in label.iter().enumerate() {
            if li == 1.0 && lj == 0.0 {
                pairs += 1.0;
                wins += if score[i] > score[j] {
                    1.0
                } else if score[i] == score[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_of_random_scores_is_near_half() {
    let mut rng = RngStream::new(10, 0);
    let n = 10_000;
    let score: Vec<f64> = (0..n).map(|_| rng.next_uniform()).collect();
    let label: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let auc = roc_auc(&score, &label).unwrap();
    assert!((auc - 0.5).abs() <= 0.02, "{auc}");
}

proptest! {
    #[test]
    fn auc_matches_pairwise_definition(
        data in proptest::collection::vec((0u8..6, proptest::bool::ANY), 2..40)
    ) {
        let score: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
        let label: Vec<f64> = data.iter().map(|(_, l)| *l as u8 as f64).collect();
        let both = label.iter().any(|&l| l == 1.0) && label.iter().any(|&l| l == 0.0);
        prop_assume!(both);
        let fast = roc_auc(&score, &label).unwrap();
        prop_assert!((fast - auc_pairs(&score, &label)).abs() < 1e-12);
    }

    #[test]
    fn auc_flips_under_negation(
        data in proptest::collection::vec((-1e3f64..1e3, proptest::bool::ANY), 2..60)
    ) {
        let score: Vec<f64> = data.iter().map(|(s, _)| *s).collect();
        let label: Vec<f64> = data.iter().map(|(_, l)| *l as u8 as f64).collect();
        let mut sorted = score.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
        prop_assume!(label.iter().any(|&l| l == 1.0) && label.iter().any(|&l| l == 0.0));
        let neg: Vec<f64> = score.iter().map(|s| -s).collect();
        let total = roc_auc(&score, &label).unwrap() + roc_auc(&neg, &label).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let warped: Vec<f64> = score.iter().map(|s| (s / 100.0).exp() + 3.0 * s).collect();
        prop_assert_eq!(roc_auc(&warped, &label).unwrap(), roc_auc(&score, &label).unwrap());
    }

    #[test]
    fn r2_is_shift_invariant(
        pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..30),
        shift in -100.0f64..100.0,
    ) {
        let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let target: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mean = target.iter().sum::<f64>() / target.len() as f64;
        let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
        prop_assume!(ss_tot > 1e-3);
        let a = r2(&pred, &target).unwrap();
        let sp: Vec<f64> = pred.iter().map(|v| v + shift).collect();
        let st: Vec<f64> = target.iter().map(|v| v + shift).collect();
        let b = r2(&sp, &st).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
        prop_assert!(a <= 1.0);
    }
}
