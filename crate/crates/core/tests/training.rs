use std::sync::OnceLock;

use sgh::datakit::{
    make_split, sample_training_patches, synth_benchmark, DatasetManifest, Normalization, PatchSpec, PlanarImage,
    Scale, SplitPlan, SynthSources,
};
use sgh::exec::Execution;
use sgh::nn::{Adam, AdamConfig};
use sgh::perception::EncoderConfig;
use sgh::training::{
    evaluate, forward_backward, run_trials, train, train_logged, Checkpoint, Framework, Model, Sample, TrainConfig,
};
use sgh::Error;

struct Fixture {
    _dir: tempfile::TempDir,
    manifest: DatasetManifest,
}

fn tiny() -> &'static DatasetManifest {
    static F: OnceLock<Fixture> = OnceLock::new();
    &F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let src = SynthSources::Procedural { count: 5, size: 256 };
        let manifest = synth_benchmark(&src, &[2, 3, 4], 11, dir.path()).unwrap();
        Fixture { _dir: dir, manifest }
    })
    .manifest
}

fn tiny_config(framework: Framework) -> TrainConfig {
    TrainConfig {
        framework,
        epochs: 1,
        batch_patches: 8,
        images_per_batch: 4,
        adam: AdamConfig { learning_rate: 1e-3, ..AdamConfig::default() },
        encoder: EncoderConfig::builtin(16, vec![4, 8]),
        patch: PatchSpec { size: 16, stride: 64, count: 8 },
        ..TrainConfig::default()
    }
}

fn fixed_batch(m: &DatasetManifest, records: usize) -> (Vec<Scale>, Vec<Sample<f64>>) {
    let scales: Vec<Scale> = m.scales().into_iter().collect();
    let spec = PatchSpec { size: 16, stride: 16, count: 4 };
    let norm = Normalization::default();
    let mut samples = Vec::new();
    for r in m.records.iter().take(records) {
        let img = PlanarImage::load(&m.resolve(r)).unwrap();
        for p in sample_training_patches(&img, &spec, 1).unwrap() {
            samples.push(Sample {
                input: norm.apply(&p),
                scale: scales.binary_search(&r.scale).unwrap(),
                target: m.normalized_label(r),
            });
        }
    }
    (scales, samples)
}

#[test]
fn one_small_step_lowers_fixed_batch_loss() {
    let m = tiny();
    let enc = EncoderConfig::builtin(16, vec![4, 8]);
    for fw in [Framework::Sgh, Framework::Fusion, Framework::Blind] {
        let (scales, samples) = fixed_batch(m, 4);
        let mut model = Model::<f64>::init(fw, &enc, &mut rand_chacha::ChaCha8Rng::from_seed_u64(5)).unwrap();
        let before = forward_backward(&model, &scales, &samples, true, Execution::Sequential).unwrap();
        let mut adam = Adam::new(AdamConfig { learning_rate: 1e-6, ..AdamConfig::default() });
        adam.step(model.tensors_mut(true), before.grads.tensors(true));
        let after = forward_backward(&model, &scales, &samples, true, Execution::Sequential).unwrap();
        assert!(after.loss < before.loss, "{fw}: {} -> {}", before.loss, after.loss);
    }
}

#[test]
fn single_record_repeated_batch_loss_decreases() {
    let m = tiny();
    let enc = EncoderConfig::builtin(16, vec![4, 8]);
    let (scales, samples) = fixed_batch(m, 1);
    let mut model = Model::<f64>::init(Framework::Sgh, &enc, &mut rand_chacha::ChaCha8Rng::from_seed_u64(6)).unwrap();
    let mut adam = Adam::new(AdamConfig::default());
    let step0 = forward_backward(&model, &scales, &samples, true, Execution::Sequential).unwrap();
    adam.step(model.tensors_mut(true), step0.grads.tensors(true));
    let step1 = forward_backward(&model, &scales, &samples, true, Execution::Sequential).unwrap();
    assert!(step1.loss < step0.loss);
}

#[test]
fn batch_gradient_does_not_depend_on_execution_mode() {
    let m = tiny();
    let enc = EncoderConfig::builtin(16, vec![4, 8]);
    let (scales, samples) = fixed_batch(m, 6);
    for fw in [Framework::Sgh, Framework::Fusion, Framework::Blind] {
        let model = Model::<f64>::init(fw, &enc, &mut rand_chacha::ChaCha8Rng::from_seed_u64(7)).unwrap();
        let a = forward_backward(&model, &scales, &samples, true, Execution::Sequential).unwrap();
        let b = forward_backward(&model, &scales, &samples, true, Execution::Parallel).unwrap();
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        assert_eq!(a.grads, b.grads);
    }
}

#[test]
fn frozen_encoder_gets_no_gradient() {
    let m = tiny();
    let enc = EncoderConfig::builtin(16, vec![4, 8]);
    let (scales, samples) = fixed_batch(m, 2);
    let model = Model::<f64>::init(Framework::Sgh, &enc, &mut rand_chacha::ChaCha8Rng::from_seed_u64(8)).unwrap();
    let g = forward_backward(&model, &scales, &samples, false, Execution::Sequential).unwrap();
    assert!(g.grads.encoder.params().iter().all(|(_, t)| t.data.iter().all(|&v| v == 0.0)));
    assert!(g.grads.tensors(false).iter().any(|t| t.data.iter().any(|&v| v != 0.0)));
}

fn split(m: &DatasetManifest) -> SplitPlan {
    make_split(m, 0, 0.8).unwrap()
}

#[test]
fn training_is_reproducible_and_worker_independent() {
    let m = tiny();
    let plan = split(m);
    let cfg = tiny_config(Framework::Sgh);
    let a = train(m, &plan, &cfg).unwrap();
    let b = train(m, &plan, &TrainConfig { execution: Execution::Sequential, ..cfg.clone() }).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let c = train(m, &plan, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
}

#[test]
fn frozen_training_leaves_encoder_untouched() {
    let m = tiny();
    let plan = split(m);
    let cfg = tiny_config(Framework::Blind);
    let moving = train(m, &plan, &cfg).unwrap();
    let frozen = train(m, &plan, &TrainConfig { freeze_encoder: true, ..cfg.clone() }).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let init = Model::<f32>::init(Framework::Blind, &cfg.encoder, &mut rng).unwrap();
    assert_eq!(frozen.model.encoder, init.encoder);
    assert_ne!(moving.model.encoder, init.encoder);
    assert_ne!(frozen.model.head, init.head);
}

#[test]
fn frameworks_have_distinct_parameter_inventories() {
    let m = tiny();
    let plan = split(m);
    let names = |fw| -> Vec<String> {
        let c = train(m, &plan, &tiny_config(fw)).unwrap();
        c.model.named().into_iter().map(|(n, _)| n).collect()
    };
    let (s, f, b) = (names(Framework::Sgh), names(Framework::Fusion), names(Framework::Blind));
    assert!(s.iter().any(|n| n.starts_with("generator.")) && !s.iter().any(|n| n.starts_with("head.")));
    assert!(f.iter().any(|n| n.starts_with("embedder.")) && f.iter().any(|n| n.starts_with("head.")));
    assert!(!b.iter().any(|n| n.starts_with("embedder.") || n.starts_with("generator.")));
    assert_ne!(s, f);
    assert_ne!(f, b);
}

#[test]
fn checkpoint_round_trip_preserves_evaluation() {
    let m = tiny();
    let plan = split(m);
    let cfg = tiny_config(Framework::Fusion);
    let (ckpt, log) = train_logged(m, &plan, &cfg).unwrap();
    assert_eq!(log.epoch_losses.len(), 1);
    assert_eq!(log.step_losses.len(), plan.train_indices(m).len().div_ceil(4));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.ckpt");
    ckpt.save(&p).unwrap();
    let back = Checkpoint::load(&p).unwrap();
    let a = evaluate(m, &plan, &ckpt, &cfg.patch).unwrap();
    let b = evaluate(m, &plan, &back, &cfg.patch).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_test, plan.test_indices(m).len());
    assert!(a.srcc.abs() <= 1.0 && a.krcc.abs() <= 1.0);
}

#[test]
fn trials_use_seeds_in_order() {
    let m = tiny();
    let r = run_trials(m, &tiny_config(Framework::Blind), 3).unwrap();
    assert_eq!(r.trials.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert_eq!(r.srcc.len(), 3);
    let mean = r.srcc.iter().sum::<f64>() / 3.0;
    assert!((r.mean_srcc - mean).abs() < 1e-15);
    assert!(r.srcc_box.min <= r.srcc_box.median && r.srcc_box.median <= r.srcc_box.max);
}

#[test]
fn error_paths() {
    let m = tiny();
    let plan = split(m);
    let mut cfg = tiny_config(Framework::Sgh);
    cfg.patch.size = 300;
    cfg.encoder.input_size = 300;
    assert!(matches!(train(m, &plan, &cfg), Err(Error::TooSmallImage { .. })));

    let mut foreign = plan.clone();
    foreign.train_ids = vec!["nope".into()];
    assert!(train(m, &foreign, &tiny_config(Framework::Sgh)).is_err());

    let cfg = tiny_config(Framework::Blind);
    let ckpt = train(m, &plan, &cfg).unwrap();
    let wrong = PatchSpec { size: 32, ..cfg.patch };
    assert!(matches!(evaluate(m, &plan, &ckpt, &wrong), Err(Error::InvalidConfig(_))));
    assert!(matches!(run_trials(m, &cfg, 0), Err(Error::InvalidConfig(_))));
}

trait FromSeedU64 {
    fn from_seed_u64(seed: u64) -> Self;
}

impl FromSeedU64 for rand_chacha::ChaCha8Rng {
    fn from_seed_u64(seed: u64) -> Self {
        <Self as rand::SeedableRng>::seed_from_u64(seed)
    }
}
