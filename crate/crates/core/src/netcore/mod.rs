//! The recognition network.
//!
//! A fixed Gabor filter bank feeds two MDLeaky layers with a tanh layer in
//! between; each of these three subsamples its input (x by 3, 1 and 2, y by
//! 4 each) so a 64-row line shrinks to one row. A collapse layer sums what
//! remains of each column and an affine softmax layer produces one
//! probability vector per column.

mod container;
mod dense;
mod feature;
mod gabor;
mod mdleaky;
mod scan;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HtrError, Result};
use crate::imaging::{GrayImage, LINE_HEIGHT};
use crate::matrix::ConfidenceMatrix;

pub use container::{read_matrix, read_model, write_matrix, write_model, ContainerKind, MAGIC};
pub(crate) use container::{read_f64s, read_header, read_network, read_u32, read_u64, write_f64s, write_header, write_network};
pub use dense::{affine_param_count, collapse_backward, collapse_layer, output_logits, tanh_backward, tanh_layer};
pub use feature::{pool, pool_backward, FeatureMap, Pooling};
pub use gabor::{gabor_layer, image_to_input, GaborBank, GABOR_CHANNELS, GABOR_L1_NORM, GABOR_ORIENTATIONS_DEG, GABOR_WAVELENGTHS};
pub use mdleaky::{
    direction_param_count, mdleaky_backward, param_count as mdleaky_param_count, mdleaky_forward, mdleaky_forward_direction, MdLeakyCache, LEAK_X, LEAK_Y,
};
pub use scan::{directional_scan, Direction};


#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Gabor,
    MdLeaky,
    Tanh,
    Collapse,
    Softmax,
}

impl LayerKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            LayerKind::Gabor => 0,
            LayerKind::MdLeaky => 1,
            LayerKind::Tanh => 2,
            LayerKind::Collapse => 3,
            LayerKind::Softmax => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => LayerKind::Gabor,
            1 => LayerKind::MdLeaky,
            2 => LayerKind::Tanh,
            3 => LayerKind::Collapse,
            4 => LayerKind::Softmax,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub inputs: usize,
    pub outputs: usize,
    /// Horizontal subsampling of this layer's input: 1, 2 or 3.
    pub subsample_x: usize,
    /// Vertical subsampling of this layer's input: 1 or 4.
    pub subsample_y: usize,
}

impl LayerSpec {
    pub fn trainable(&self) -> bool {
        !matches!(self.kind, LayerKind::Gabor | LayerKind::Collapse)
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Gabor | LayerKind::Collapse => 0,
            LayerKind::MdLeaky => mdleaky::param_count(self.inputs, self.outputs),
            LayerKind::Tanh | LayerKind::Softmax => affine_param_count(self.inputs, self.outputs),
        }
    }

    /// Initialization ranges as `(count, r)` blocks in storage order: every
    /// weight and bias feeding a unit is uniform in `[-r, r]` with
    /// `r = sqrt(3 / fan_in)`, which keeps pre-activation variance near 1.
    pub fn init_blocks(&self) -> Vec<(usize, f64)> {
        let r = |fan_in: usize| (3.0 / fan_in as f64).sqrt();
        let (i, o) = (self.inputs, self.outputs);
        match self.kind {
            LayerKind::Gabor | LayerKind::Collapse => Vec::new(),
            LayerKind::MdLeaky => {
                let (ru, rg) = (r(i), r(i + 2 * o));
                let dir = [(o * i + o, ru), (o * i + 2 * o * o + o, rg)];
                dir.iter().copied().cycle().take(8).collect()
            }
            LayerKind::Tanh | LayerKind::Softmax => vec![(o * i + o, r(i))],
        }
    }
}

/// Hidden widths of the two MDLeaky layers and the tanh layer between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub first_mdleaky: usize,
    pub tanh: usize,
    pub second_mdleaky: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            first_mdleaky: 24,
            tanh: 40,
            second_mdleaky: 60,
        }
    }
}

/// Flat trainable weights, grouped by layer in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub weights: Vec<f64>,
}

impl NetworkParams {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Network architecture; weights live separately in [`NetworkParams`].
#[derive(Debug, Clone)]
pub struct Network {
    specs: Vec<LayerSpec>,
    ranges: Vec<Range<usize>>,
    bank: GaborBank,
}

impl Network {
    /// Standard architecture for `classes` output classes.
    pub fn new(classes: usize, shape: NetworkShape) -> Result<Self> {
        let spec = |kind, inputs, outputs, subsample_x, subsample_y| LayerSpec {
            kind,
            inputs,
            outputs,
            subsample_x,
            subsample_y,
        };
        Self::from_specs(vec![
            spec(LayerKind::Gabor, 1, GABOR_CHANNELS, 1, 1),
            spec(LayerKind::MdLeaky, GABOR_CHANNELS, shape.first_mdleaky, 3, 4),
            spec(LayerKind::Tanh, shape.first_mdleaky, shape.tanh, 1, 4),
            spec(LayerKind::MdLeaky, shape.tanh, shape.second_mdleaky, 2, 4),
            spec(LayerKind::Collapse, shape.second_mdleaky, shape.second_mdleaky, 1, 1),
            spec(LayerKind::Softmax, shape.second_mdleaky, classes, 1, 1),
        ])
    }

    /// Validates an explicit layer table: a Gabor layer first, a collapse
    /// then a softmax layer last, matching widths, allowed subsampling and
    /// a total vertical reduction of 64 to 1.
    pub fn from_specs(specs: Vec<LayerSpec>) -> Result<Self> {
        let bad = |msg: String| Err(HtrError::Config(msg));
        let n = specs.len();
        if n < 3 {
            return bad(format!("network needs at least 3 layers, got {n}"));
        }
        if specs[0].kind != LayerKind::Gabor || specs[0].inputs != 1 || specs[0].outputs != GABOR_CHANNELS {
            return bad("first layer must be the 1 -> 8 Gabor bank".into());
        }
        if specs[n - 1].kind != LayerKind::Softmax || specs[n - 2].kind != LayerKind::Collapse {
            return bad("network must end with collapse then softmax".into());
        }
        if specs[n - 1].outputs < 2 {
            return bad("softmax layer needs at least 2 classes".into());
        }
        let mut y_total = 1;
        for (i, s) in specs.iter().enumerate() {
            if i > 0 && s.inputs != specs[i - 1].outputs {
                return bad(format!("layer {i} takes {} inputs but receives {}", s.inputs, specs[i - 1].outputs));
            }
            if i > 0 && i < n - 2 && !matches!(s.kind, LayerKind::MdLeaky | LayerKind::Tanh) {
                return bad(format!("layer {i} must be MDLeaky or tanh"));
            }
            if !(1..=3).contains(&s.subsample_x) || !matches!(s.subsample_y, 1 | 4) {
                return bad(format!("layer {i} has unsupported subsampling {}x{}", s.subsample_x, s.subsample_y));
            }
            if matches!(s.kind, LayerKind::Gabor | LayerKind::Collapse | LayerKind::Softmax)
                && (s.subsample_x, s.subsample_y) != (1, 1)
            {
                return bad(format!("layer {i} ({:?}) cannot subsample", s.kind));
            }
            if s.kind == LayerKind::Collapse && s.inputs != s.outputs {
                return bad("collapse layer must preserve width".into());
            }
            if s.outputs == 0 {
                return bad(format!("layer {i} has no outputs"));
            }
            y_total *= s.subsample_y;
        }
        if y_total != LINE_HEIGHT {
            return bad(format!("vertical subsampling totals {y_total}, expected {LINE_HEIGHT}"));
        }
        let mut ranges = Vec::with_capacity(n);
        let mut at = 0;
        for s in &specs {
            ranges.push(at..at + s.param_count());
            at += s.param_count();
        }
        Ok(Network {
            specs,
            ranges,
            bank: GaborBank::new(),
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn classes(&self) -> usize {
        self.specs.last().unwrap().outputs
    }

    pub fn param_count(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    /// Seeded fan-in scaled uniform weights; see [`LayerSpec::init_blocks`].
    pub fn init_params(&self, seed: u64) -> NetworkParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(self.param_count());
        for (n, r) in self.specs.iter().flat_map(LayerSpec::init_blocks) {
            weights.extend((0..n).map(|_| rng.random_range(-r..=r)));
        }
        NetworkParams { weights }
    }

    /// Number of output timesteps for an input of the given width.
    pub fn output_timesteps(&self, width: usize) -> usize {
        self.specs.iter().fold(width, |w, s| w.div_ceil(s.subsample_x))
    }

    fn check_params(&self, params: &NetworkParams) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(HtrError::Shape(format!(
                "network needs {} weights, got {}",
                self.param_count(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Output of the non-trainable filter bank; the rest of the network
    /// depends on the image only through this.
    pub fn features(&self, img: &GrayImage) -> Result<FeatureMap> {
        gabor_layer(img, &self.bank)
    }

    pub fn forward(&self, img: &GrayImage, params: &NetworkParams) -> Result<ConfidenceMatrix> {
        Ok(self.forward_trace(&self.features(img)?, params)?.matrix)
    }

    /// Forward pass from filter-bank features, keeping what the backward
    /// pass needs.
    pub fn forward_trace(&self, features: &FeatureMap, params: &NetworkParams) -> Result<ForwardTrace> {
        self.check_params(params)?;
        features.expect_channels(GABOR_CHANNELS, "first recurrent layer")?;
        let mut steps = Vec::with_capacity(self.specs.len());
        let mut current = features.clone();
        let mut logits = Vec::new();
        for (i, spec) in self.specs.iter().enumerate().skip(1) {
            let weights = &params.weights[self.ranges[i].clone()];
            let mode = if i == 1 { Pooling::MeanAbs } else { Pooling::Mean };
            let (pre_w, pre_h) = (current.width(), current.height());
            let input = pool(&current, spec.subsample_x, spec.subsample_y, mode);
            let step = match spec.kind {
                LayerKind::MdLeaky => {
                    let (out, cache) = mdleaky_forward(&input, weights, spec.outputs)?;
                    current = out;
                    LayerState::MdLeaky(cache)
                }
                LayerKind::Tanh => {
                    current = tanh_layer(&input, weights, spec.outputs)?;
                    LayerState::Tanh(current.clone())
                }
                LayerKind::Collapse => {
                    current = collapse_layer(&input);
                    LayerState::Collapse
                }
                LayerKind::Softmax => {
                    logits = output_logits(&input, weights, spec.outputs)?;
                    LayerState::Softmax
                }
                LayerKind::Gabor => unreachable!("validated layer order"),
            };
            steps.push(Step {
                layer: i,
                pre_pool: (pre_w, pre_h),
                input,
                state: step,
            });
        }
        let timesteps = logits.len() / self.classes();
        let matrix = ConfidenceMatrix::from_logits(timesteps, self.classes(), &logits)?;
        Ok(ForwardTrace { steps, matrix })
    }

    /// Weight gradient given the gradient with respect to the output
    /// layer's pre-softmax activations (what [`crate::ctc::ctc_gradient`]
    /// returns).
    pub fn backward(&self, img: &GrayImage, params: &NetworkParams, grad_logits: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_trace(&self.features(img)?, params)?;
        self.backward_trace(&trace, params, grad_logits)
    }

    pub fn backward_trace(&self, trace: &ForwardTrace, params: &NetworkParams, grad_logits: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params)?;
        if grad_logits.len() != trace.matrix.data().len() {
            return Err(HtrError::Shape(format!(
                "output gradient has {} entries, matrix has {}",
                grad_logits.len(),
                trace.matrix.data().len()
            )));
        }
        let mut grad = vec![0.0; self.param_count()];
        let mut upstream: Option<FeatureMap> = None;
        for step in trace.steps.iter().rev() {
            let spec = &self.specs[step.layer];
            let range = self.ranges[step.layer].clone();
            let weights = &params.weights[range.clone()];
            // the first recurrent layer's input is the fixed filter bank
            let need_input = step.layer > 1;
            let grad_input = match &step.state {
                LayerState::Softmax => {
                    let (g, gi) = dense::output_backward(&step.input, weights, grad_logits, spec.outputs)?;
                    grad[range].copy_from_slice(&g);
                    Some(gi)
                }
                LayerState::Collapse => {
                    let go = upstream.take().expect("gradient from the layer above");
                    Some(collapse_backward(&go, step.input.height()))
                }
                LayerState::Tanh(output) => {
                    let go = upstream.take().expect("gradient from the layer above");
                    let (g, gi) = tanh_backward(&step.input, output, weights, &go, need_input)?;
                    grad[range].copy_from_slice(&g);
                    gi
                }
                LayerState::MdLeaky(cache) => {
                    let go = upstream.take().expect("gradient from the layer above");
                    let (g, gi) = mdleaky_backward(&step.input, weights, spec.outputs, cache, &go, need_input)?;
                    grad[range].copy_from_slice(&g);
                    gi
                }
            };
            upstream = grad_input.map(|gi| {
                let (w, h) = step.pre_pool;
                pool_backward(&gi, w, h, spec.subsample_x, spec.subsample_y)
            });
        }
        Ok(grad)
    }
}

#[derive(Debug, Clone)]
enum LayerState {
    MdLeaky(MdLeakyCache),
    Tanh(FeatureMap),
    Collapse,
    Softmax,
}

#[derive(Debug, Clone)]
struct Step {
    layer: usize,
    pre_pool: (usize, usize),
    input: FeatureMap,
    state: LayerState,
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    steps: Vec<Step>,
    matrix: ConfidenceMatrix,
}

impl ForwardTrace {
    pub fn matrix(&self) -> &ConfidenceMatrix {
        &self.matrix
    }

    /// Pooled input of each layer after the filter bank, in network order.
    pub fn layer_inputs(&self) -> impl Iterator<Item = &FeatureMap> {
        self.steps.iter().map(|s| &s.input)
    }
}
