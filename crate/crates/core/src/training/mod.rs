//! Momentum SGD over the CTC loss, one sample per update, driven by a
//! staged [`Curriculum`].
//!
//! Randomness is derived, never carried: the shuffle of global epoch `e`
//! depends only on `(seed, e)` and the augmentation of a presentation only
//! on `(seed, e, record)`. A run resumed from a checkpoint therefore
//! reproduces the uninterrupted run bit for bit.

mod checkpoint;
mod curriculum;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use curriculum::{Curriculum, TrainingStage};

use crate::ctc::{ctc_loss_and_gradient, Alphabet, LabelSequence};
use crate::error::{HtrError, Result};
use crate::imaging::{augment, AugmentationParams, GrayImage};
use crate::netcore::{FeatureMap, Network, NetworkParams};

/// Epoch interval between periodic checkpoints.
pub const CHECKPOINT_EVERY: usize = 10;

/// `velocity <- momentum * velocity - lr * gradient; params += velocity`.
pub fn sgd_step(params: &mut [f64], gradient: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) -> Result<()> {
    if params.len() != gradient.len() || params.len() != velocity.len() {
        return Err(HtrError::Shape(format!(
            "sgd_step lengths differ: params {}, gradient {}, velocity {}",
            params.len(),
            gradient.len(),
            velocity.len()
        )));
    }
    for ((p, &g), v) in params.iter_mut().zip(gradient).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
    Ok(())
}

/// Mixes a seed with further integers into a new seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut s = seed;
    for &p in parts {
        s = ChaCha8Rng::seed_from_u64(s ^ p.rotate_left(32)).next_u64();
    }
    ChaCha8Rng::seed_from_u64(s).next_u64()
}

/// One training line.
#[derive(Debug)]
pub struct Sample {
    pub id: String,
    /// Preprocessed, 64 rows high.
    pub image: GrayImage,
    /// Extracted but unnormalized image, the input of augmentation.
    pub raw: Option<GrayImage>,
    pub text: String,
    labels: LabelSequence,
    features: OnceLock<FeatureMap>,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: GrayImage, text: impl Into<String>, alphabet: &Alphabet) -> Result<Self> {
        let text = text.into();
        let id = id.into();
        let labels = alphabet
            .encode(&text)
            .map_err(|e| HtrError::InvalidInput(format!("line {id}: {e}")))?;
        Ok(Sample {
            id,
            image,
            raw: None,
            text,
            labels,
            features: OnceLock::new(),
        })
    }

    pub fn with_raw(mut self, raw: GrayImage) -> Self {
        self.raw = Some(raw);
        self
    }

    pub fn labels(&self) -> &LabelSequence {
        &self.labels
    }

    /// Filter-bank features of the preprocessed image, computed once.
    pub fn features(&self, net: &Network) -> Result<&FeatureMap> {
        if let Some(f) = self.features.get() {
            return Ok(f);
        }
        let f = net.features(&self.image)?;
        Ok(self.features.get_or_init(|| f))
    }
}

/// Named list of samples; filtered views share samples with their source.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub name: String,
    pub records: Vec<Arc<Sample>>,
    /// Set by [`filter_short`].
    pub max_chars: Option<usize>,
}

impl DatasetSpec {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Self {
        DatasetSpec {
            name: name.into(),
            records: samples.into_iter().map(Arc::new).collect(),
            max_chars: None,
        }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Records whose transcription has at most `max_chars` characters.
pub fn filter_short(dataset: &DatasetSpec, max_chars: usize) -> Result<DatasetSpec> {
    if max_chars == 0 {
        return Err(HtrError::Config("length filter needs max_chars >= 1".into()));
    }
    Ok(DatasetSpec {
        name: dataset.name.clone(),
        records: dataset
            .records
            .iter()
            .filter(|r| r.text.chars().count() <= max_chars)
            .cloned()
            .collect(),
        max_chars: Some(dataset.max_chars.map_or(max_chars, |m| m.min(max_chars))),
    })
}

/// Weights and their momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub params: NetworkParams,
    pub velocity: Vec<f64>,
}

impl Weights {
    pub fn new(params: NetworkParams) -> Self {
        let velocity = vec![0.0; params.len()];
        Weights { params, velocity }
    }
}

/// Outcome of one pass over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    /// Mean CTC loss of the trained samples, measured before each update;
    /// zero when every sample was skipped.
    pub mean_loss: f64,
    pub samples: usize,
    /// Samples whose target needs more timesteps than their matrix has.
    pub skipped: usize,
}

/// Presents every record once in a shuffle determined by `epoch_seed`.
pub fn run_epoch(
    net: &Network,
    weights: &mut Weights,
    dataset: &DatasetSpec,
    lr: f64,
    momentum: f64,
    epoch_seed: u64,
    augmentation: Option<&AugmentationParams>,
) -> Result<EpochSummary> {
    if dataset.is_empty() {
        return Err(HtrError::Config(format!("dataset {:?} is empty", dataset.name)));
    }
    let order = epoch_order(dataset.len(), epoch_seed);
    let mut total = 0.0;
    let mut samples = 0;
    let mut skipped = 0;
    for idx in order {
        let sample = &dataset.records[idx];
        let augmented;
        let features = match (augmentation, &sample.raw) {
            (Some(aug), Some(raw)) => {
                let params = AugmentationParams {
                    seed: derive_seed(epoch_seed, &[idx as u64]),
                    ..*aug
                };
                augmented = net.features(&augment(raw, &params)?)?;
                &augmented
            }
            _ => sample.features(net)?,
        };
        let trace = net.forward_trace(features, &weights.params)?;
        let (loss, grad_logits) = match ctc_loss_and_gradient(trace.matrix(), sample.labels()) {
            Ok(v) => v,
            Err(HtrError::InfeasibleTarget { .. }) => {
                skipped += 1;
                continue;
            }
            Err(HtrError::InvalidInput(msg)) => {
                warn!("line {}: {msg}; skipped", sample.id);
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let grad = net.backward_trace(&trace, &weights.params, &grad_logits)?;
        sgd_step(&mut weights.params.weights, &grad, &mut weights.velocity, lr, momentum)?;
        total += loss;
        samples += 1;
    }
    Ok(EpochSummary {
        mean_loss: if samples > 0 { total / samples as f64 } else { 0.0 },
        samples,
        skipped,
    })
}

/// Visiting order of one epoch.
pub fn epoch_order(len: usize, epoch_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
    order
}

/// Position in a curriculum: `epoch` epochs of stage `stage` are done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cursor {
    pub stage: usize,
    pub epoch: usize,
}

/// One stage-log row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub stage: usize,
    /// 1-based within the stage.
    pub epoch: usize,
    pub summary: EpochSummary,
}

/// Everything needed to continue a curriculum.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub weights: Weights,
    pub cursor: Cursor,
    pub log: Vec<EpochRecord>,
}

impl TrainState {
    pub fn new(params: NetworkParams) -> Self {
        TrainState {
            weights: Weights::new(params),
            cursor: Cursor::default(),
            log: Vec::new(),
        }
    }

    /// Epochs completed over all stages.
    pub fn global_epoch(&self) -> usize {
        self.log.len()
    }

    /// Tab-separated stage log with a header row.
    pub fn stage_log(&self, curriculum: &Curriculum) -> String {
        let mut s = String::from("stage\tepoch\tdataset\tlr\tmean_loss\tsamples\tskipped\n");
        for r in &self.log {
            let st = &curriculum.stages[r.stage];
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.6}\t{}\t{}",
                r.stage + 1,
                r.epoch,
                st.dataset,
                st.learning_rate,
                r.summary.mean_loss,
                r.summary.samples,
                r.summary.skipped
            )
            .unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub seed: u64,
    /// Jitter template; its seed is replaced per presentation. Samples
    /// without a raw image are never augmented.
    pub augmentation: Option<AugmentationParams>,
    /// Where checkpoints go; none are written when unset.
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop once this many epochs are complete overall.
    pub stop_after: Option<usize>,
}

/// Runs a curriculum from fresh weights.
pub fn run_curriculum(
    net: &Network,
    params: NetworkParams,
    curriculum: &Curriculum,
    datasets: &BTreeMap<String, DatasetSpec>,
    options: &TrainOptions,
) -> Result<TrainState> {
    resume_curriculum(net, TrainState::new(params), curriculum, datasets, options)
}

/// Continues a curriculum from `state`. Checkpoints are written after every
/// stage and every [`CHECKPOINT_EVERY`] epochs.
pub fn resume_curriculum(
    net: &Network,
    mut state: TrainState,
    curriculum: &Curriculum,
    datasets: &BTreeMap<String, DatasetSpec>,
    options: &TrainOptions,
) -> Result<TrainState> {
    curriculum.validate()?;
    for s in &curriculum.stages {
        match datasets.get(&s.dataset) {
            None => return Err(HtrError::Config(format!("unknown dataset {:?}", s.dataset))),
            Some(d) if d.is_empty() => return Err(HtrError::Config(format!("dataset {:?} is empty", s.dataset))),
            Some(_) => {}
        }
    }
    if let Some(aug) = &options.augmentation {
        aug.validate()?;
    }
    if state.weights.params.len() != net.param_count() || state.weights.velocity.len() != net.param_count() {
        return Err(HtrError::Shape("training state does not match the network".into()));
    }
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| HtrError::io(dir, e))?;
    }
    while state.cursor.stage < curriculum.stages.len() {
        if options.stop_after.is_some_and(|n| state.global_epoch() >= n) {
            break;
        }
        let stage = &curriculum.stages[state.cursor.stage];
        let dataset = &datasets[&stage.dataset];
        let epoch_seed = derive_seed(options.seed, &[state.global_epoch() as u64]);
        let summary = run_epoch(
            net,
            &mut state.weights,
            dataset,
            stage.learning_rate,
            curriculum.momentum,
            epoch_seed,
            options.augmentation.as_ref(),
        )?;
        state.cursor.epoch += 1;
        state.log.push(EpochRecord {
            stage: state.cursor.stage,
            epoch: state.cursor.epoch,
            summary,
        });
        info!(
            "stage {} epoch {}/{}: loss {:.4} ({} samples, {} skipped)",
            state.cursor.stage + 1,
            state.cursor.epoch,
            stage.epochs,
            summary.mean_loss,
            summary.samples,
            summary.skipped
        );
        let stage_done = state.cursor.epoch == stage.epochs;
        if stage_done {
            state.cursor = Cursor {
                stage: state.cursor.stage + 1,
                epoch: 0,
            };
        }
        if let Some(dir) = &options.checkpoint_dir {
            if stage_done || state.global_epoch().is_multiple_of(CHECKPOINT_EVERY) {
                let path = dir.join(format!("epoch-{:04}.ckpt", state.global_epoch()));
                write_checkpoint(&path, &Checkpoint { net: net.clone(), state: state.clone(), seed: options.seed })?;
            }
        }
    }
    Ok(state)
}
