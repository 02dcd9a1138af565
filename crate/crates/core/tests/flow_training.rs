mod common;

use vshift::dataset::{build_condition_frame, ConditionSample};
use vshift::flow::{load_checkpoint, sample, save_checkpoint, train, TrainConfig};
use vshift::oracle::gen_scene;
use vshift::{PipelineParams, ShiftSpec};

fn samples(n: usize) -> (tempfile::TempDir, Vec<ConditionSample>) {
    let dir = tempfile::tempdir().unwrap();
    let m = gen_scene(&common::street_scene("train", 16, n), dir.path()).unwrap();
    let s = (0..n)
        .map(|f| build_condition_frame(&m, f, (f % 3) as u16, &ShiftSpec::lateral(0.5), &PipelineParams::default()).unwrap())
        .collect();
    (dir, s)
}

#[test]
fn mispaired_conditions_train_worse() {
    let (_d, good) = samples(4);
    let mut bad = good.clone();
    for i in 0..bad.len() {
        bad[i].condition = good[(i + 1) % good.len()].condition.clone();
    }
    let cfg = TrainConfig {
        steps: 600,
        hidden: 16,
        downscale: 2,
        probe_pairs: 4,
        seed: 9,
        ..TrainConfig::default()
    };
    let paired = *train(&good, &cfg).unwrap().loss_trace.last().unwrap();
    let mispaired = *train(&bad, &cfg).unwrap().loss_trace.last().unwrap();
    assert!(mispaired > paired, "paired {paired} mispaired {mispaired}");
}

#[test]
fn checkpoint_reload_samples_identically() {
    let (_d, s) = samples(2);
    let cfg = TrainConfig {
        steps: 50,
        hidden: 8,
        downscale: 2,
        ..TrainConfig::default()
    };
    let model = train(&s, &cfg).unwrap().model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(sample(&model, &s[0].condition, 7, 3).unwrap(), sample(&back, &s[0].condition, 7, 3).unwrap());
}
