use evseq::data::{synthesize_dataset, SynthSpec};
use evseq::objectives::ViewLenRange;
use evseq::training::{resume_with, train_with, EpochRecord, TrainOptions};
use evseq::{Checkpoint, Dataset, Error, Method, TrainConfig};

fn dataset() -> Dataset {
    let spec = SynthSpec {
        num_sequences: 60,
        min_len: 10,
        max_len: 30,
        num_codes: 8,
        beta: 0.8,
        ..SynthSpec::default()
    };
    let ds = synthesize_dataset(&spec, 1).unwrap().dataset;
    evseq::data::normalize_amounts(ds, None).unwrap()
}

fn config(method: Method, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        method,
        k: 4,
        hidden: 8,
        batch_size: 16,
        epochs,
        lr: 1e-2,
        seed,
        view_len_range: ViewLenRange {
            min: 3,
            max: 30,
            min_fraction: 0.25,
        },
        ..TrainConfig::default()
    }
}

fn losses(cfg: &TrainConfig, ds: &Dataset) -> (Checkpoint, Vec<f64>) {
    let mut seen = Vec::new();
    let cp = train_with::<f64>(cfg, ds, &mut |r: &EpochRecord| seen.push(r.loss)).unwrap();
    assert_eq!(seen, cp.loss_history);
    (cp, seen)
}

#[test]
fn identical_runs_match_bit_for_bit() {
    let ds = dataset();
    for method in Method::ALL {
        let cfg = config(method, 2, 3);
        let (a, la) = losses(&cfg, &ds);
        let (b, lb) = losses(&cfg, &ds);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&la), bits(&lb), "{method}");
        assert_eq!(a, b, "{method}");
        let (c, _) = losses(&config(method, 2, 4), &ds);
        assert_ne!(a.params, c.params, "{method}: seed has no effect");
    }
}

#[test]
fn split_resume_equals_straight_training() {
    let ds = dataset();
    for method in [Method::Coles, Method::Hybrid] {
        let (straight, _) = losses(&config(method, 3, 5), &ds);
        let (first, _) = losses(&config(method, 1, 5), &ds);
        // through the on-disk format
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        first.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, first);
        let cfg = config(method, 3, 5);
        let mid = resume_with::<f64>(loaded, &config(method, 2, 5), &ds, TrainOptions::default(), &mut |_| {}).unwrap();
        let done = resume_with::<f64>(mid, &cfg, &ds, TrainOptions::default(), &mut |_| {}).unwrap();
        assert_eq!(done, straight, "{method}");
    }
}

#[test]
fn resume_refuses_other_configs() {
    let ds = dataset();
    let (cp, _) = losses(&config(Method::Coles, 1, 0), &ds);
    let other = TrainConfig {
        rho: 0.3,
        ..config(Method::Coles, 2, 0)
    };
    let err = resume_with::<f64>(cp.clone(), &other, &ds, TrainOptions::default(), &mut |_| {}).unwrap_err();
    assert!(matches!(err, Error::ConfigMismatch { .. }), "{err}");
    let forced = resume_with::<f64>(cp, &other, &ds, TrainOptions { force: true }, &mut |_| {}).unwrap();
    assert_eq!(forced.epoch, 2);
}

#[test]
fn single_precision_trains() {
    let ds = dataset();
    for method in Method::ALL {
        let cfg = config(method, 2, 1);
        let cp = train_with::<f32>(&cfg, &ds, &mut |_| {}).unwrap();
        assert!(cp.params.is_finite());
        assert_eq!(cp.loss_history.len(), 2);
        let (f64_cp, _) = losses(&cfg, &ds);
        // same schedule, nearby numbers
        for (a, b) in cp.loss_history.iter().zip(&f64_cp.loss_history) {
            assert!((a - b).abs() < 0.05 * b.abs().max(0.1), "{method}: {a} vs {b}");
        }
    }
}

#[test]
fn losses_decrease_for_every_method() {
    let ds = dataset();
    for method in Method::ALL {
        for seed in 0..3 {
            let (_, l) = losses(&config(method, 5, seed), &ds);
            assert!(l[4] < l[0], "{method} seed {seed}: {l:?}");
        }
    }
}
