use std::collections::BTreeSet;

use evseq::objectives::{
    cmlm_loss, coles_loss, distance_matrix, hybrid_loss, mine_pairs, sample_mask, sample_negatives, sample_views,
    MaskedBatch, ViewLenRange,
};
use evseq::rng::{self, Stream};
use evseq::Matrix;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Pairs = Vec<(usize, usize)>;

/// Negatives by rank counting: `b` is nominated by `a` when fewer than
/// `n_hard` other-origin views precede it in `(distance, index)` order.
fn brute_force_pairs(dist: &Matrix<f64>, origins: &[usize], n_hard: usize) -> (Pairs, Pairs) {
    let m = origins.len();
    let mut pos = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if origins[a] == origins[b] {
                pos.push((a, b));
            }
        }
    }
    let mut neg = BTreeSet::new();
    for a in 0..m {
        for b in (0..m).filter(|&b| origins[b] != origins[a]) {
            let ahead = (0..m)
                .filter(|&c| origins[c] != origins[a])
                .filter(|&c| (dist.get(a, c), c) < (dist.get(a, b), b))
                .count();
            if ahead < n_hard {
                neg.insert((a.min(b), a.max(b)));
            }
        }
    }
    (pos, neg.into_iter().collect())
}

/// Views (2..=6) with at least two origins, as (embeddings, origins).
fn view_batch() -> impl Strategy<Value = (Matrix<f64>, Vec<usize>)> {
    (2usize..=6, 2usize..=4).prop_flat_map(|(m, dim)| {
        (
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), m),
            prop::collection::vec(0usize..3, m),
        )
            .prop_filter("two origins", |(_, o)| o.iter().collect::<BTreeSet<_>>().len() >= 2)
            .prop_map(|(rows, o)| (Matrix::from_rows(&rows), o))
    })
}

#[test]
fn pair_construction_matches_brute_force() {
    let mut rng = rng::stream(1, Stream::Check, &[]);
    for _ in 0..100 {
        let m = rng.random_range(2..=6);
        let origins: Vec<usize> = loop {
            let o: Vec<usize> = (0..m).map(|_| rng.random_range(0..3)).collect();
            if o.iter().collect::<BTreeSet<_>>().len() >= 2 {
                break o;
            }
        };
        // coarse coordinates make distance ties common
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..2).map(|_| rng.random_range(-2i32..=2) as f64 + 0.5).collect())
            .collect();
        let dist = distance_matrix(&Matrix::from_rows(&rows));
        for n_hard in 1..=m {
            let got = mine_pairs(&dist, &origins, n_hard);
            let (pos, neg) = brute_force_pairs(&dist, &origins, n_hard);
            assert_eq!(got.positives, pos);
            assert_eq!(got.negatives, neg, "origins {origins:?}, n_hard {n_hard}");
        }
    }
}

#[test]
#[allow(clippy::approx_constant)] // 0.6931 is the rounded value the worked example uses
fn hand_derived_loss_values() {
    let z = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    let c = coles_loss(&z, &[0, 0, 1], 0.5, 1).unwrap();
    assert!((c.loss - 0.625f64).abs() < 1e-12);

    let two = MaskedBatch {
        targets: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
        predictions: Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]),
        negatives: vec![vec![1], vec![0]],
    };
    let out = cmlm_loss(&two).unwrap();
    assert!((out.per_term[0] - 2f64.ln()).abs() < 1e-12);

    let opposite = MaskedBatch {
        targets: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
        predictions: Matrix::from_rows(&[vec![3.0, 0.0], vec![-0.5, 0.0]]),
        negatives: vec![vec![1], vec![0]],
    };
    let out = cmlm_loss(&opposite).unwrap();
    assert!((out.per_term[0] - (-2f64).exp().ln_1p()).abs() < 1e-12);

    let h: f64 = hybrid_loss(0.625, 0.6931, 0.05).unwrap();
    assert!((h - 0.659655).abs() < 1e-12);
}

#[test]
fn view_counts_and_origins() {
    let mut rng = rng::stream(0, Stream::Check, &[]);
    let views = sample_views(&[10, 7, 12], 2, ViewLenRange::fixed(2, 5), &mut rng).unwrap();
    let origins: Vec<usize> = views.iter().map(|v| v.origin).collect();
    assert_eq!(origins, [0, 0, 1, 1, 2, 2]);
}

#[test]
fn negative_sampling_exhausts_small_pools() {
    let mut rng = rng::stream(0, Stream::Check, &[]);
    assert_eq!(sample_negatives(2, 5, 0, &mut rng).unwrap(), [1]);
    let j = sample_negatives(100, 10, 42, &mut rng).unwrap();
    assert_eq!(j.len(), 10);
    assert!(!j.contains(&42));
    assert_eq!(j.iter().collect::<BTreeSet<_>>().len(), 10);
}

#[test]
fn mask_fraction_matches_rate() {
    let mut rng = rng::stream(3, Stream::Check, &[]);
    let lengths = vec![100; 1000];
    let plan = sample_mask(&lengths, 0.15, &mut rng).unwrap();
    let frac = plan.total() as f64 / 1e5;
    assert!((frac - 0.15).abs() <= 0.02, "mask fraction {frac}");
    for (p, &t) in plan.positions.iter().zip(&lengths) {
        assert!(!p.is_empty() && p.windows(2).all(|w| w[0] < w[1]) && p.iter().all(|&i| i < t));
    }
}

#[test]
fn view_lengths_and_starts_are_uniform() {
    let mut rng = rng::stream(4, Stream::Check, &[]);
    let (lo, hi, t) = (5usize, 24usize, 40usize);
    let views = sample_views(&[t], 100_000, ViewLenRange::fixed(lo, hi), &mut rng).unwrap();
    let mut counts = vec![0f64; hi - lo + 1];
    for v in &views {
        assert!(v.end() <= t);
        counts[v.len - lo] += 1.0;
    }
    let p = chi_square_p(&counts);
    assert!(p > 0.01, "length chi-square p = {p}");

    let len10: Vec<usize> = views.iter().filter(|v| v.len == 10).map(|v| v.start).collect();
    let mut starts = vec![0f64; t - 10 + 1];
    for s in len10 {
        starts[s] += 1.0;
    }
    let p = chi_square_p(&starts);
    assert!(p > 0.01, "start chi-square p = {p}");
}

fn chi_square_p(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    let e = n / counts.len() as f64;
    let stat: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

fn permuted(z: &Matrix<f64>, origins: &[usize], perm: &[usize]) -> (Matrix<f64>, Vec<usize>) {
    let rows: Vec<Vec<f64>> = perm.iter().map(|&i| z.row(i).to_vec()).collect();
    (Matrix::from_rows(&rows), perm.iter().map(|&i| origins[i]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coles_is_invariant_to_view_order_and_origin_names(
        (z, origins) in view_batch(),
        seed in any::<u64>(),
        n_hard in 1usize..6,
    ) {
        use rand::seq::SliceRandom;
        // mining breaks distance ties by index, which a permutation changes
        let d = distance_matrix(&z);
        let m = origins.len();
        for a in 0..m {
            for b in 0..m {
                for c in b + 1..m {
                    prop_assume!(a == b || a == c || (d.get(a, b) - d.get(a, c)).abs() > 1e-9);
                }
            }
        }
        let base = coles_loss(&z, &origins, 0.5, n_hard).unwrap();
        let mut perm: Vec<usize> = (0..origins.len()).collect();
        perm.shuffle(&mut rng::stream(seed, Stream::Check, &[]));
        let (pz, po) = permuted(&z, &origins, &perm);
        let p = coles_loss(&pz, &po, 0.5, n_hard).unwrap();
        prop_assert!((p.loss - base.loss).abs() < 1e-12);
        for (k, &i) in perm.iter().enumerate() {
            for (a, b) in p.grad.row(k).iter().zip(base.grad.row(i)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
        let renamed: Vec<usize> = origins.iter().map(|o| 10 + 7 * (2 - o)).collect();
        let r = coles_loss(&z, &renamed, 0.5, n_hard).unwrap();
        prop_assert_eq!(r.loss, base.loss);
    }

    #[test]
    fn all_negatives_bound_mined_sum((z, origins) in view_batch(), n_hard in 1usize..6, rho in 0.05f64..2.0) {
        let mined = coles_loss(&z, &origins, rho, n_hard).unwrap();
        let all = coles_loss(&z, &origins, rho, usize::MAX).unwrap();
        prop_assert!(all.sum >= mined.sum - 1e-12);
        prop_assert!(mined.loss >= 0.0);
    }

    #[test]
    fn coles_ignores_embedding_scale((z, origins) in view_batch(), scale in 0.01f64..100.0) {
        let mut s = z.clone();
        s.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
        let a = coles_loss(&z, &origins, 0.5, 2).unwrap();
        let b = coles_loss(&s, &origins, 0.5, 2).unwrap();
        prop_assert!((a.loss - b.loss).abs() < 1e-9);
    }

    #[test]
    fn cmlm_ignores_row_scales(
        n in 2usize..8,
        dim in 1usize..5,
        seed in any::<u64>(),
        n_neg in 1usize..8,
    ) {
        let mut rng = rng::stream(seed, Stream::Check, &[]);
        let rand_rows = |rng: &mut evseq::rng::Rng| {
            Matrix::from_rows(&(0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect::<Vec<Vec<f64>>>())
        };
        let targets = rand_rows(&mut rng);
        let predictions = rand_rows(&mut rng);
        let negatives: Vec<Vec<usize>> = (0..n).map(|i| sample_negatives(n, n_neg, i, &mut rng).unwrap()).collect();
        let mb = MaskedBatch { targets, predictions, negatives };
        let base = cmlm_loss(&mb).unwrap();
        let mut scaled = mb.clone();
        for i in 0..n {
            let (a, b) = (rng.random_range(0.1..10.0), rng.random_range(0.1..10.0));
            scaled.targets.row_mut(i).iter_mut().for_each(|x| *x *= a);
            scaled.predictions.row_mut(i).iter_mut().for_each(|x| *x *= b);
        }
        let s = cmlm_loss(&scaled).unwrap();
        prop_assert!((s.loss - base.loss).abs() < 1e-9);
        prop_assert!(base.per_term.iter().all(|&t| t > 0.0));

        // identical predictions leave only the softmax size
        let mut flat = mb.clone();
        for i in 0..n {
            flat.predictions.row_mut(i).iter_mut().for_each(|x| *x = 1.0);
        }
        let f = cmlm_loss(&flat).unwrap();
        for (t, j) in f.per_term.iter().zip(&flat.negatives) {
            prop_assert!((t - ((j.len() + 1) as f64).ln()).abs() < 1e-12);
        }
    }
}
