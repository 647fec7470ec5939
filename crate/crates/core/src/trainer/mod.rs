//! Mini-batch training with plateau learning-rate reduction, bootstrap
//! protected early stopping and final-model selection.

mod adam;
mod schedule;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{Batch, ForwardOptions, Model, ModelConfig};
use crate::signal::{ChannelLayout, Segment};

pub use adam::Adam;
pub use schedule::{Decision, ScheduleState, TrainSchedule};

/// Segments per gradient or evaluation work unit. Fixed so that results do
/// not depend on the number of workers.
pub const CHUNK: usize = 16;

fn default_seed() -> u64 {
    42
}

/// Everything a training run reads from its configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSchedule,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::config(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        if !path.exists() {
            return Err(Error::MissingFiles(vec![path.to_path_buf()]));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("run config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss (0 before the first epoch).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.lr));
        }
        s
    }
}

pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub best: Model,
    pub last: Model,
    pub history: TrainHistory,
}

/// Which candidate [`select_final`] kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Best,
    Last,
}

fn mix(parts: &[u64]) -> u64 {
    // splitmix64 folded over the parts
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Runs `f` over `items` in chunks, `workers` threads at a time, and returns
/// the per-chunk results in order.
fn par_chunks<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(usize, &[T]) -> Result<R> + Sync) -> Result<Vec<R>> {
    let chunks: Vec<&[T]> = items.chunks(CHUNK).collect();
    if workers <= 1 || chunks.len() <= 1 {
        return chunks.iter().enumerate().map(|(i, c)| f(i, c)).collect();
    }
    let workers = workers.min(chunks.len());
    let mut slots: Vec<Option<Result<R>>> = (0..chunks.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (chunks, f) = (&chunks, &f);
                s.spawn(move || {
                    (w..chunks.len())
                        .step_by(workers)
                        .map(|i| (i, f(i, chunks[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.unwrap()).collect()
}

fn check_layout(model: &Model, layout: &ChannelLayout, segments: &[Segment]) -> Result<()> {
    let cfg = model.config();
    if cfg.channels != layout.channels {
        return Err(Error::config(format!(
            "model expects {} channels ({}) but the data has {} ({})",
            cfg.channels.len(),
            names(&cfg.channels),
            layout.len(),
            names(&layout.channels)
        )));
    }
    if let Some(s) = segments.iter().find(|s| s.len() != cfg.segment_length || s.channels() != layout.len()) {
        return Err(Error::config(format!(
            "model expects segments of {} samples, data has {}x{}",
            cfg.segment_length,
            s.channels(),
            s.len()
        )));
    }
    if let Some(s) = segments.iter().find(|s| s.label >= cfg.class_count) {
        return Err(Error::config(format!("label {} outside the model's {} classes", s.label, cfg.class_count)));
    }
    Ok(())
}

fn names(ch: &[crate::signal::ChannelInfo]) -> String {
    ch.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",")
}

/// Mean loss and evaluation report of `model` on `segments` (dropout off).
pub fn evaluate(model: &Model, layout: &ChannelLayout, segments: &[Segment], workers: usize) -> Result<(f64, EvalReport)> {
    if segments.is_empty() {
        return Err(Error::usage("cannot evaluate on an empty split"));
    }
    check_layout(model, layout, segments)?;
    let parts = par_chunks(segments, workers, |_, chunk| {
        let refs: Vec<&Segment> = chunk.iter().collect();
        model.loss_and_predictions(&Batch::from_segments(&refs)?)
    })?;
    let mut loss = 0.0;
    let mut preds = Vec::with_capacity(segments.len());
    for ((l, p), chunk) in parts.into_iter().zip(segments.chunks(CHUNK)) {
        loss += l * chunk.len() as f64;
        preds.extend(p);
    }
    let actual: Vec<usize> = segments.iter().map(|s| s.label).collect();
    let report = EvalReport::from_predictions(model.config().class_count, &actual, &preds)?;
    Ok((loss / segments.len() as f64, report))
}

/// Loss and parameter gradients of one mini-batch, summed over fixed chunks.
fn batch_grads(model: &Model, batch: &[&Segment], seeds: (u64, usize, usize), workers: usize) -> Result<(f64, Vec<Vec<f64>>)> {
    let (seed, epoch, index) = seeds;
    let n = batch.len() as f64;
    let parts = par_chunks(batch, workers, |c, chunk| {
        let opts = ForwardOptions {
            train_seed: Some(mix(&[seed, epoch as u64, index as u64, c as u64])),
            ..Default::default()
        };
        let (l, g) = model.loss_and_grads(&Batch::from_segments(chunk)?, &opts)?;
        Ok((l, g, chunk.len() as f64 / n))
    })?;
    let mut grads = model.params().zeros_like();
    let mut loss = 0.0;
    for (l, g, w) in parts {
        loss += w * l;
        for (acc, gi) in grads.iter_mut().zip(&g) {
            for (a, b) in acc.iter_mut().zip(gi) {
                *a += w * b;
            }
        }
    }
    Ok((loss, grads))
}

fn snapshot(model: &Model) -> ParamStore {
    model.params().clone()
}

/// Trains `model` on `train`, monitoring `val`. `on_epoch` sees every record
/// as soon as it is complete.
pub fn train(
    mut model: Model,
    layout: &ChannelLayout,
    train: &[Segment],
    val: &[Segment],
    schedule: &TrainSchedule,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    schedule.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::usage("training and validation splits must be non-empty"));
    }
    check_layout(&model, layout, train)?;
    check_layout(&model, layout, val)?;
    let mut adam = Adam::new(model.params().iter().map(|(_, p)| p.data.len()));
    let mut state = ScheduleState::new(schedule);
    let mut history = TrainHistory::default();
    let mut best = snapshot(&model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut last_finite = None;
    for epoch in 1..=schedule.max_epochs {
        let lr = state.lr();
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(&[seed, epoch as u64])));
        let mut total = 0.0;
        for (b, idx) in order.chunks(schedule.batch_size).enumerate() {
            let batch: Vec<&Segment> = idx.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = batch_grads(&model, &batch, (seed, epoch, b), schedule.workers)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    lr,
                    last_finite,
                });
            }
            last_finite = Some(loss);
            total += loss * batch.len() as f64;
            adam.step(lr, model.params_mut().iter_mut().map(|p| &mut p.data), &grads);
        }
        let train_loss = total / train.len() as f64;
        let (val_loss, report) = evaluate(&model, layout, val, schedule.workers)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                lr,
                last_finite,
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy: report.accuracy,
            val_macro_f1: report.macro_f1,
            lr,
        };
        on_epoch(&record);
        history.epochs.push(record);
        let d = state.observe(train_loss, val_loss);
        if d.val_improved {
            best = snapshot(&model);
            history.best_epoch = epoch;
        }
        if d.stop {
            history.stopped_early = epoch < schedule.max_epochs;
            break;
        }
    }
    let best = Model::with_params(model.config().clone(), &best)?;
    Ok(TrainOutcome {
        best,
        last: model,
        history,
    })
}

/// Keeps the candidate with the higher validation macro F1, then the lower
/// validation loss; exact ties keep `best`.
pub fn select_final(best: Model, last: Model, layout: &ChannelLayout, val: &[Segment], workers: usize) -> Result<(Model, Choice)> {
    let (lb, rb) = evaluate(&best, layout, val, workers)?;
    let (ll, rl) = evaluate(&last, layout, val, workers)?;
    let last_wins = rl.macro_f1 > rb.macro_f1 || (rl.macro_f1 == rb.macro_f1 && ll < lb);
    Ok(if last_wins { (last, Choice::Last) } else { (best, Choice::Best) })
}
