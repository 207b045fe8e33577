use evseq::evaluation::{roc_auc_binary, roc_auc_weighted};
use evseq::rng::{self, Stream};
use evseq::Matrix;
use proptest::prelude::*;
use rand::Rng;

/// Exhaustive pair counting with ties worth one half, as an exact rational.
fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                twice_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

fn random_case(rng: &mut evseq::rng::Rng) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.random_range(2..=50);
        let levels = rng.random_range(1..=12);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.37 - 1.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

#[test]
fn binary_auc_equals_pairwise_oracle() {
    let mut rng = rng::stream(7, Stream::Check, &[]);
    for case in 0..1000 {
        let (s, l) = random_case(&mut rng);
        assert_eq!(roc_auc_binary(&s, &l).unwrap(), pairwise_auc(&s, &l), "case {case}");
    }
}

#[test]
fn weighted_auc_reduces_to_binary_for_two_classes() {
    let mut rng = rng::stream(8, Stream::Check, &[]);
    for _ in 0..200 {
        let (s, l) = random_case(&mut rng);
        let p1: Vec<f64> = s.iter().map(|x| (x + 1.0) / 5.0).collect();
        let rows: Vec<Vec<f64>> = p1.iter().map(|&p| vec![1.0 - p, p]).collect();
        let y: Vec<usize> = l.iter().map(|&b| b as usize).collect();
        let got = roc_auc_weighted(&Matrix::from_rows(&rows), &y).unwrap().auc;

        // support-weighted one-vs-rest average over both columns
        let n1 = y.iter().filter(|&&c| c == 1).count() as f64;
        let n0 = y.len() as f64 - n1;
        let a1 = pairwise_auc(&p1, &l);
        let col0: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let is0: Vec<bool> = l.iter().map(|b| !b).collect();
        let a0 = pairwise_auc(&col0, &is0);
        let general = (n0 * a0 + n1 * a1) / (n0 + n1);
        assert!((got - general).abs() < 1e-12, "{got} vs {general}");
        assert!((got - a1).abs() < 1e-12);
    }
}

#[test]
fn weighted_auc_skips_single_class_columns() {
    let scores = Matrix::from_rows(&[
        vec![0.7, 0.2, 0.1],
        vec![0.1, 0.8, 0.1],
        vec![0.4, 0.5, 0.1],
        vec![0.3, 0.3, 0.4],
    ]);
    let w = roc_auc_weighted(&scores, &[0, 1, 1, 0]).unwrap();
    assert_eq!(w.skipped().collect::<Vec<_>>(), [2]);
    let a0 = w.per_class[0].auc.unwrap();
    let a1 = w.per_class[1].auc.unwrap();
    assert!((w.auc - (a0 + a1) / 2.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn auc_depends_only_on_order(
        scores in prop::collection::vec(-5i32..5, 2..40),
        flips in prop::collection::vec(any::<bool>(), 40),
        a in 0.1f64..10.0,
        b in -3.0f64..3.0,
    ) {
        let labels: Vec<bool> = flips[..scores.len()].to_vec();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let s: Vec<f64> = scores.iter().map(|&x| x as f64).collect();
        let base = roc_auc_binary(&s, &labels).unwrap();
        let affine: Vec<f64> = s.iter().map(|x| a * x + b).collect();
        let squashed: Vec<f64> = s.iter().map(|x| x.tanh() + x.exp()).collect();
        prop_assert_eq!(roc_auc_binary(&affine, &labels).unwrap(), base);
        prop_assert_eq!(roc_auc_binary(&squashed, &labels).unwrap(), base);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        prop_assert!((roc_auc_binary(&neg, &labels).unwrap() - (1.0 - base)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }
}
