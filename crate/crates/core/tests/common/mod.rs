#![allow(dead_code)]

use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, MutexGuard, OnceLock};

use sgh::datakit::{synth_benchmark, DatasetManifest, PatchSpec, SynthSources};
use sgh::nn::AdamConfig;
use sgh::perception::EncoderConfig;
use sgh::training::{Framework, TrainConfig};

/// Benchmark used by the end-to-end checks: 60 procedural sources x {2,3,4,8}.
pub const BENCH_SOURCES: usize = 60;
pub const BENCH_SCALES: [u32; 4] = [2, 3, 4, 8];
pub const BENCH_EPOCHS: usize = 60;

struct Bench {
    _dir: tempfile::TempDir,
    manifest: DatasetManifest,
}

pub fn bench() -> &'static DatasetManifest {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    &BENCH
        .get_or_init(|| {
            let dir = tempfile::tempdir().unwrap();
            let src = SynthSources::Procedural { count: BENCH_SOURCES, size: 256 };
            let manifest = synth_benchmark(&src, &BENCH_SCALES, 0, dir.path()).unwrap();
            Bench { _dir: dir, manifest }
        })
        .manifest
}

pub fn bench_dir() -> &'static Path {
    &bench().root
}

/// Small-patch training setup that fits a single-core time budget.
pub fn bench_config(framework: Framework) -> TrainConfig {
    TrainConfig {
        framework,
        epochs: BENCH_EPOCHS,
        batch_patches: 32,
        images_per_batch: 4,
        adam: AdamConfig { learning_rate: 1e-3, ..AdamConfig::default() },
        encoder: EncoderConfig::builtin(32, vec![8, 16, 32, 64]),
        patch: PatchSpec { size: 32, stride: 32, count: 64 },
        ..TrainConfig::default()
    }
}

/// The same setup as a run-config file for the command-line tool.
pub fn bench_config_toml(framework: &str, epochs: usize) -> String {
    format!(
        r#"trials = 10

[train]
framework = "{framework}"
epochs = {epochs}
batch_patches = 32
images_per_batch = 4

[train.adam]
learning_rate = 1e-3
beta1 = 0.9
beta2 = 0.999
epsilon = 1e-8
weight_decay = 0.0

[train.encoder]
kind = "builtin_small_cnn"
feature_dim = 64
input_size = 32
channels = [8, 16, 32, 64]

[train.patch]
size = 32
stride = 32
count = 64
"#
    )
}

/// Serializes expensive tests so wall-clock budgets are measured without contention.
pub fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes straight to the process stdout so the line survives output capture.
pub fn report_line(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
