//! Model assembly for the three frameworks, minibatch training with Adam,
//! patch-averaged evaluation and repeated random-split trials.

mod batch;
mod checkpoint;
mod config;
mod model;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datakit::{
    make_split, sample_training_patches, tile_eval_patches, DatasetManifest, Normalization, PatchSpec, PlanarImage, Scale,
    SplitPlan,
};
use crate::error::{Error, Result};
use crate::evalstats::{krcc, plcc, quantile, srcc};
use crate::exec::{try_map_range, Execution};
use crate::nn::Adam;
use crate::perception::gap_flatten;

pub use batch::{forward_backward, mae_loss, BatchGrad, Sample, CHUNK};
pub use checkpoint::{write_atomic, BlockInfo, Checkpoint, RngState, MAGIC, TOOL_VERSION};
pub use config::TrainConfig;
pub use model::{blind_forward, fusion_forward, Framework, Model, ScaleContext};

/// Where a report came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config: TrainConfig,
}

impl Provenance {
    pub fn of(config: &TrainConfig) -> Self {
        Provenance { tool_version: TOOL_VERSION.into(), config: config.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub sr_path: String,
    pub content_id: String,
    pub scale: Scale,
    /// Ground-truth label after normalization to `[0, 1]`, higher is better.
    pub label: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub framework: Framework,
    pub srcc: f64,
    pub plcc: f64,
    pub krcc: f64,
    pub n_test: usize,
    pub per_image_scores: Vec<ImageScore>,
    pub provenance: Provenance,
}

/// Per-epoch and per-step mean training losses.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub step_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

fn load_checked(manifest: &DatasetManifest, index: usize, size: usize) -> Result<PlanarImage> {
    let img = PlanarImage::load(&manifest.resolve(&manifest.records[index]))?;
    if img.width < size || img.height < size {
        return Err(Error::TooSmallImage { width: img.width, height: img.height, size });
    }
    Ok(img)
}

fn scale_list(manifest: &DatasetManifest) -> Vec<Scale> {
    manifest.scales().into_iter().collect()
}

pub fn train(manifest: &DatasetManifest, split: &SplitPlan, config: &TrainConfig) -> Result<Checkpoint> {
    train_logged(manifest, split, config).map(|(c, _)| c)
}

/// Trains on the split's training records. Each step draws
/// `images_per_batch` records uniformly with replacement and crops
/// `batch_patches` patches from them in total; an epoch is enough steps to
/// visit as many records as the training side holds.
pub fn train_logged(manifest: &DatasetManifest, split: &SplitPlan, config: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    config.validate()?;
    manifest.validate()?;
    split.validate_against(manifest)?;
    let indices = split.train_indices(manifest);
    if indices.is_empty() {
        return Err(Error::InvalidSplit("training side matches no records".into()));
    }
    let exec = config.execution;
    let size = config.patch.size;
    let images = try_map_range(exec, indices.len(), |k| load_checked(manifest, indices[k], size))?;
    let scales = scale_list(manifest);
    let scale_of: Vec<usize> = indices
        .iter()
        .map(|&i| scales.binary_search(&manifest.records[i].scale).expect("scale is listed"))
        .collect();
    let targets: Vec<f32> =
        indices.iter().map(|&i| manifest.normalized_label(&manifest.records[i]) as f32).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::<f32>::init(config.framework, &config.encoder, &mut rng)?;
    let mut adam = Adam::new(config.adam);
    let train_encoder = !config.freeze_encoder;
    let steps = indices.len().div_ceil(config.images_per_batch);
    let mut log = TrainLog::default();
    info!(
        "training {} on {} records ({} scales), {} epochs x {} steps",
        config.framework,
        indices.len(),
        scales.len(),
        config.epochs,
        steps
    );

    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..steps {
            let picks: Vec<(usize, u64)> =
                (0..config.images_per_batch).map(|_| (rng.random_range(0..indices.len()), rng.random())).collect();
            let per_image = try_map_range(exec, picks.len(), |k| -> Result<Vec<Sample<f32>>> {
                let (r, seed) = picks[k];
                let spec = PatchSpec { count: config.patches_for_image(k), ..config.patch };
                let patches = sample_training_patches(&images[r], &spec, seed)?;
                Ok(patches
                    .iter()
                    .map(|p| Sample { input: config.normalization.apply(p), scale: scale_of[r], target: targets[r] })
                    .collect())
            })?;
            let samples: Vec<Sample<f32>> = per_image.into_iter().flatten().collect();
            let bg = forward_backward(&model, &scales, &samples, train_encoder, exec)?;
            if !bg.loss.is_finite() {
                return Err(Error::InvalidInput(format!("training loss became {} at epoch {epoch}", bg.loss)));
            }
            adam.step(model.tensors_mut(train_encoder), bg.grads.tensors(train_encoder));
            log.step_losses.push(bg.loss as f64);
            epoch_loss += bg.loss as f64;
        }
        let mean = epoch_loss / steps as f64;
        debug!("epoch {epoch}: mean loss {mean:.5}");
        log.epoch_losses.push(mean);
    }

    let rng_state = RngState { seed: config.seed, word_pos: rng.get_word_pos().to_string() };
    Ok((Checkpoint::new(config.clone(), config.epochs, rng_state, model), log))
}

/// Image score (mean over tiled patches, accumulated in 64-bit) and the
/// individual patch scores in tiling order.
pub fn score_image(
    model: &Model<f32>,
    image: &PlanarImage,
    ctx: &ScaleContext<f32>,
    spec: &PatchSpec,
    norm: &Normalization,
) -> Result<(f64, Vec<f64>)> {
    let patches = tile_eval_patches(image, spec)?;
    let scores = patches
        .iter()
        .map(|p| {
            let (map, _) = model.encoder.forward_trace(&norm.apply::<f32>(p))?;
            Ok(model.score_features(&gap_flatten(&map)?, ctx)? as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((mean, scores))
}

/// Scores every test record as the mean over its tiled patches and
/// correlates the scores with the normalized labels.
pub fn evaluate(manifest: &DatasetManifest, split: &SplitPlan, checkpoint: &Checkpoint, spec: &PatchSpec) -> Result<EvalReport> {
    evaluate_with(manifest, split, checkpoint, spec, checkpoint.config.execution)
}

pub fn evaluate_with(
    manifest: &DatasetManifest,
    split: &SplitPlan,
    checkpoint: &Checkpoint,
    spec: &PatchSpec,
    exec: Execution,
) -> Result<EvalReport> {
    spec.validate()?;
    split.validate_against(manifest)?;
    let model = &checkpoint.model;
    let input = checkpoint.config.encoder.input_size;
    if spec.size != input {
        return Err(Error::InvalidConfig(format!("patch size {} differs from encoder input size {input}", spec.size)));
    }
    let indices = split.test_indices(manifest);
    if indices.is_empty() {
        return Err(Error::InvalidSplit("test side matches no records".into()));
    }
    let scales = scale_list(manifest);
    let contexts = scales.iter().map(|&s| model.scale_context(s)).collect::<Result<Vec<_>>>()?;
    let norm = checkpoint.config.normalization;

    let scores = try_map_range(exec, indices.len(), |k| -> Result<f64> {
        let rec = &manifest.records[indices[k]];
        let img = load_checked(manifest, indices[k], spec.size)?;
        let ctx = &contexts[scales.binary_search(&rec.scale).expect("scale is listed")];
        Ok(score_image(model, &img, ctx, spec, &norm)?.0)
    })?;

    let labels: Vec<f64> = indices.iter().map(|&i| manifest.normalized_label(&manifest.records[i])).collect();
    let per_image_scores = indices
        .iter()
        .zip(&scores)
        .zip(&labels)
        .map(|((&i, &score), &label)| {
            let r = &manifest.records[i];
            ImageScore {
                sr_path: r.sr_path.to_string_lossy().into_owned(),
                content_id: r.content_id.clone(),
                scale: r.scale,
                label,
                score,
            }
        })
        .collect();
    Ok(EvalReport {
        seed: split.seed,
        framework: checkpoint.framework,
        srcc: srcc(&scores, &labels)?,
        plcc: plcc(&scores, &labels)?,
        krcc: krcc(&scores, &labels)?,
        n_test: indices.len(),
        per_image_scores,
        provenance: Provenance::of(&checkpoint.config),
    })
}

/// Five-number summary of per-trial values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxSummary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        BoxSummary {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    pub framework: Framework,
    pub n_trials: usize,
    pub mean_srcc: f64,
    pub mean_plcc: f64,
    pub mean_krcc: f64,
    pub srcc: Vec<f64>,
    pub plcc: Vec<f64>,
    pub krcc: Vec<f64>,
    pub srcc_box: BoxSummary,
    pub trials: Vec<EvalReport>,
    pub provenance: Provenance,
}

impl TrialsReport {
    pub fn from_trials(config: &TrainConfig, trials: Vec<EvalReport>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::InsufficientData("no trials".into()));
        }
        let col = |f: fn(&EvalReport) -> f64| trials.iter().map(f).collect::<Vec<_>>();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (s, p, k) = (col(|r| r.srcc), col(|r| r.plcc), col(|r| r.krcc));
        Ok(TrialsReport {
            framework: config.framework,
            n_trials: trials.len(),
            mean_srcc: mean(&s),
            mean_plcc: mean(&p),
            mean_krcc: mean(&k),
            srcc_box: BoxSummary::of(&s),
            srcc: s,
            plcc: p,
            krcc: k,
            trials,
            provenance: Provenance::of(config),
        })
    }
}

/// One trial: split with `seed`, train with `seed`, evaluate on the held-out side.
pub fn run_trial(manifest: &DatasetManifest, config: &TrainConfig, seed: u64) -> Result<EvalReport> {
    let split = make_split(manifest, seed, config.split_ratio)?;
    let cfg = TrainConfig { seed, ..config.clone() };
    let ckpt = train(manifest, &split, &cfg)?;
    evaluate(manifest, &split, &ckpt, &cfg.patch)
}

/// Trials with seeds `0..n_trials`, run one after another (each trial is
/// internally parallel). `on_trial` sees every report as soon as it exists.
pub fn run_trials_with<F>(manifest: &DatasetManifest, config: &TrainConfig, n_trials: usize, mut on_trial: F) -> Result<TrialsReport>
where
    F: FnMut(&EvalReport) -> Result<()>,
{
    if n_trials == 0 {
        return Err(Error::InvalidConfig("trial count must be positive".into()));
    }
    let mut reports = Vec::with_capacity(n_trials);
    for seed in 0..n_trials as u64 {
        let r = run_trial(manifest, config, seed)?;
        info!("trial {seed}: srcc {:.4} plcc {:.4} krcc {:.4}", r.srcc, r.plcc, r.krcc);
        on_trial(&r)?;
        reports.push(r);
    }
    TrialsReport::from_trials(config, reports)
}

pub fn run_trials(manifest: &DatasetManifest, config: &TrainConfig, n_trials: usize) -> Result<TrialsReport> {
    run_trials_with(manifest, config, n_trials, |_| Ok(()))
}
