//! Training loop, curricula and checkpoints on rendered toy lines.

use std::collections::BTreeMap;
use std::path::Path;

use htr_core::ctc::ctc_loss;
use htr_core::imaging::preprocess;
use htr_core::netcore::{Network, NetworkShape};
use htr_core::pageio::build_alphabet;
use htr_core::synth::{render_line, RenderConfig, FIXTURE_LINES};
use htr_core::training::{
    derive_seed, filter_short, read_checkpoint, resume_curriculum, run_curriculum, run_epoch, Curriculum, DatasetSpec,
    Sample, TrainOptions, TrainingStage, Weights,
};
use htr_core::{Alphabet, HtrError};

const SMALL: NetworkShape = NetworkShape {
    first_mdleaky: 3,
    tanh: 4,
    second_mdleaky: 5,
};

fn texts(n: usize) -> Vec<&'static str> {
    FIXTURE_LINES.iter().take(n).map(|l| l.2).collect()
}

fn dataset(name: &str, lines: &[&str], alphabet: &Alphabet) -> DatasetSpec {
    let samples = lines
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let img = preprocess(&render_line(t, RenderConfig::default()).unwrap()).unwrap();
            Sample::new(format!("l{i}"), img, *t, alphabet).unwrap()
        })
        .collect();
    DatasetSpec::new(name, samples)
}

fn toy(n: usize, shape: NetworkShape) -> (Network, DatasetSpec) {
    let lines = texts(n);
    let alphabet = build_alphabet(&lines, '~').unwrap();
    let net = Network::new(alphabet.len(), shape).unwrap();
    (net, dataset("full", &lines, &alphabet))
}

fn dataset_loss(net: &Network, weights: &Weights, ds: &DatasetSpec) -> f64 {
    let total: f64 = ds
        .records
        .iter()
        .map(|s| {
            let trace = net.forward_trace(s.features(net).unwrap(), &weights.params).unwrap();
            ctc_loss(trace.matrix(), s.labels()).unwrap()
        })
        .sum();
    total / ds.len() as f64
}

fn datasets(ds: DatasetSpec) -> BTreeMap<String, DatasetSpec> {
    let short = filter_short(&ds, 8).unwrap().renamed("short");
    BTreeMap::from([("full".to_string(), ds), ("short".to_string(), short)])
}

/// Plain descent (momentum 0) at lr 1e-3; the loss is the dataset mean after
/// each epoch, so shuffle order does not add noise to the measurement.
#[test]
fn dataset_loss_is_nonincreasing_after_epoch_ten() {
    let (net, ds) = toy(5, NetworkShape::default());
    let mut monotone = 0;
    for seed in 0..10u64 {
        let mut w = Weights::new(net.init_params(seed));
        let losses: Vec<f64> = (0..50u64)
            .map(|e| {
                run_epoch(&net, &mut w, &ds, 1e-3, 0.0, derive_seed(seed, &[e]), None).unwrap();
                dataset_loss(&net, &w, &ds)
            })
            .collect();
        if losses[10..].windows(2).all(|p| p[1] <= p[0]) {
            monotone += 1;
        }
        assert!(losses[49] < losses[0], "seed {seed}: {losses:?}");
    }
    assert!(monotone >= 9, "{monotone}/10 runs monotone");
}

#[test]
fn singleton_dataset_takes_exactly_one_update() {
    let (net, ds) = toy(1, SMALL);
    let before = net.init_params(1);
    let mut w = Weights::new(before.clone());
    let s = run_epoch(&net, &mut w, &ds, 1e-2, 0.0, 7, None).unwrap();
    assert_eq!((s.samples, s.skipped), (1, 0));

    // the same single step by hand
    let sample = &ds.records[0];
    let trace = net.forward_trace(sample.features(&net).unwrap(), &before).unwrap();
    let (loss, g) = htr_core::ctc::ctc_loss_and_gradient(trace.matrix(), sample.labels()).unwrap();
    let grad = net.backward_trace(&trace, &before, &g).unwrap();
    let expected: Vec<f64> = before.weights.iter().zip(&grad).map(|(p, g)| p - 1e-2 * g).collect();
    assert_eq!(w.params.weights, expected);
    assert_eq!(s.mean_loss, loss);
}

#[test]
fn same_seed_gives_identical_params() {
    let (net, ds) = toy(4, SMALL);
    let run = || {
        let mut w = Weights::new(net.init_params(3));
        for e in 0..3 {
            run_epoch(&net, &mut w, &ds, 5e-3, 0.9, derive_seed(3, &[e]), None).unwrap();
        }
        w
    };
    assert_eq!(run(), run());
}

#[test]
fn empty_dataset_is_a_config_error() {
    let (net, _) = toy(1, SMALL);
    let mut w = Weights::new(net.init_params(0));
    let empty = DatasetSpec::new("none", Vec::new());
    assert!(matches!(run_epoch(&net, &mut w, &empty, 1e-3, 0.9, 0, None), Err(HtrError::Config(_))));
}

#[test]
fn infeasible_targets_are_skipped_and_counted() {
    let alphabet = build_alphabet(&["ab"], '~').unwrap();
    let net = Network::new(alphabet.len(), SMALL).unwrap();
    // 8 columns give 2 timesteps, too few for "abab"
    let img = htr_core::GrayImage::filled(8, 64, 255).unwrap();
    let ds = DatasetSpec::new("d", vec![Sample::new("x", img, "abab", &alphabet).unwrap()]);
    let before = net.init_params(0);
    let mut w = Weights::new(before.clone());
    let s = run_epoch(&net, &mut w, &ds, 1e-3, 0.9, 0, None).unwrap();
    assert_eq!((s.samples, s.skipped, s.mean_loss), (0, 1, 0.0));
    assert_eq!(w.params, before);
}

#[test]
fn single_stage_curriculum_equals_repeated_epochs() {
    let (net, ds) = toy(3, SMALL);
    let curriculum = Curriculum::new(
        0.9,
        vec![TrainingStage {
            epochs: 3,
            dataset: "full".into(),
            learning_rate: 4e-3,
        }],
    )
    .unwrap();
    let options = TrainOptions {
        seed: 11,
        ..TrainOptions::default()
    };
    let state = run_curriculum(&net, net.init_params(11), &curriculum, &datasets(ds.clone()), &options).unwrap();
    let mut w = Weights::new(net.init_params(11));
    for e in 0..3 {
        run_epoch(&net, &mut w, &ds, 4e-3, 0.9, derive_seed(11, &[e]), None).unwrap();
    }
    assert_eq!(state.weights, w);
    assert_eq!(state.log.len(), 3);
}

fn write_checkpoints(net: &Network, ds: DatasetSpec, curriculum: &Curriculum, dir: &Path) -> htr_core::training::TrainState {
    let options = TrainOptions {
        seed: 5,
        checkpoint_dir: Some(dir.to_path_buf()),
        ..TrainOptions::default()
    };
    run_curriculum(net, net.init_params(5), curriculum, &datasets(ds), &options).unwrap()
}

#[test]
fn checkpoints_follow_stages_and_every_tenth_epoch() {
    let (net, ds) = toy(2, SMALL);
    let curriculum = Curriculum::parse("momentum 0.9\n3 short 2e-3\n14 full 5e-3\n4 full 1e-3\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let state = write_checkpoints(&net, ds, &curriculum, dir.path());
    let mut names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["epoch-0003.ckpt", "epoch-0010.ckpt", "epoch-0017.ckpt", "epoch-0020.ckpt", "epoch-0021.ckpt"]);
    let last = read_checkpoint(&dir.path().join("epoch-0021.ckpt")).unwrap();
    assert_eq!(last.state, state);
    assert_eq!(last.seed, 5);
    assert_eq!(state.stage_log(&curriculum).lines().count(), 22);
}

#[test]
fn resuming_from_any_checkpoint_is_bit_exact() {
    let (net, ds) = toy(3, SMALL);
    let curriculum = Curriculum::parse("momentum 0.9\n2 short 2e-3\n9 full 5e-3\n2 full 1e-3\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let full = write_checkpoints(&net, ds.clone(), &curriculum, dir.path());
    for name in ["epoch-0002.ckpt", "epoch-0010.ckpt", "epoch-0011.ckpt"] {
        let ck = read_checkpoint(&dir.path().join(name)).unwrap();
        let options = TrainOptions {
            seed: ck.seed,
            ..TrainOptions::default()
        };
        let resumed = resume_curriculum(&ck.net, ck.state, &curriculum, &datasets(ds.clone()), &options).unwrap();
        assert_eq!(resumed, full, "{name}");
    }

    // an interrupted run picks up where it stopped
    let options = TrainOptions {
        seed: 5,
        stop_after: Some(6),
        ..TrainOptions::default()
    };
    let part = run_curriculum(&net, net.init_params(5), &curriculum, &datasets(ds.clone()), &options).unwrap();
    assert_eq!(part.global_epoch(), 6);
    let options = TrainOptions {
        seed: 5,
        ..TrainOptions::default()
    };
    assert_eq!(resume_curriculum(&net, part, &curriculum, &datasets(ds), &options).unwrap(), full);
}

#[test]
fn four_stage_curriculum_file_parses_and_runs() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/four_stage.curriculum");
    let curriculum = Curriculum::load(&path).unwrap();
    let rows: Vec<(usize, &str, f64)> =
        curriculum.stages.iter().map(|s| (s.epochs, s.dataset.as_str(), s.learning_rate)).collect();
    assert_eq!(rows, [(40, "short", 2e-3), (32, "full", 5e-3), (16, "full", 2e-3), (16, "full", 1e-3)]);
    assert_eq!(curriculum.momentum, 0.9);

    let (net, ds) = toy(2, NetworkShape {
        first_mdleaky: 2,
        tanh: 2,
        second_mdleaky: 2,
    });
    let options = TrainOptions {
        seed: 1,
        ..TrainOptions::default()
    };
    let state = run_curriculum(&net, net.init_params(1), &curriculum, &datasets(ds), &options).unwrap();
    assert_eq!(state.global_epoch(), 104);
    assert!(state.log.iter().all(|r| r.summary.mean_loss.is_finite()));
}

#[test]
fn unknown_dataset_is_a_config_error() {
    let (net, ds) = toy(1, SMALL);
    let curriculum = Curriculum::parse("momentum 0.9\n1 nowhere 1e-3\n").unwrap();
    let err = run_curriculum(&net, net.init_params(0), &curriculum, &datasets(ds), &TrainOptions::default());
    assert!(matches!(err, Err(HtrError::Config(_))));
}

#[test]
fn filter_short_keeps_lines_up_to_the_limit() {
    let alphabet = build_alphabet(&["x"], '~').unwrap();
    let img = || htr_core::GrayImage::filled(4, 64, 255).unwrap();
    let records = [10, 30, 31].iter().map(|&n| Sample::new(format!("{n}"), img(), "x".repeat(n), &alphabet).unwrap()).collect();
    let ds = DatasetSpec::new("d", records);
    let kept: Vec<String> = filter_short(&ds, 30).unwrap().records.iter().map(|s| s.id.clone()).collect();
    assert_eq!(kept, ["10", "30"]);
    assert_eq!(filter_short(&ds, 100).unwrap().len(), 3);
    assert!(filter_short(&ds, 0).is_err());
}
