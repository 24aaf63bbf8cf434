//! Position-wise layers: the tanh layer, the height collapse and the affine
//! output layer.

use super::FeatureMap;
use crate::error::{HtrError, Result};

/// Weights of a `inputs -> outputs` affine map: row-major matrix, then bias.
pub fn affine_param_count(inputs: usize, outputs: usize) -> usize {
    outputs * inputs + outputs
}

fn check_affine(input: &FeatureMap, params: &[f64], outputs: usize, what: &str) -> Result<()> {
    let expected = affine_param_count(input.channels(), outputs);
    if params.len() != expected {
        return Err(HtrError::Shape(format!(
            "{what} with {} inputs and {outputs} outputs needs {expected} weights, got {}",
            input.channels(),
            params.len()
        )));
    }
    Ok(())
}

fn affine(input: &FeatureMap, params: &[f64], outputs: usize, activation: impl Fn(f64) -> f64) -> FeatureMap {
    let inputs = input.channels();
    let (weights, bias) = params.split_at(outputs * inputs);
    let mut out = FeatureMap::zeros(input.width(), input.height(), outputs);
    for y in 0..input.height() {
        for x in 0..input.width() {
            let inp = input.at(x, y);
            let dst = out.at_mut(x, y);
            for (o, slot) in dst.iter_mut().enumerate() {
                let row = &weights[o * inputs..(o + 1) * inputs];
                let z: f64 = bias[o] + row.iter().zip(inp).map(|(a, b)| a * b).sum::<f64>();
                *slot = activation(z);
            }
        }
    }
    out
}

/// Weight gradient (and optionally input gradient) of an affine map given
/// the gradient with respect to its pre-activation output.
fn affine_backward(input: &FeatureMap, params: &[f64], grad_z: &FeatureMap, want_input_grad: bool) -> (Vec<f64>, Option<FeatureMap>) {
    let inputs = input.channels();
    let outputs = grad_z.channels();
    let weights = &params[..outputs * inputs];
    let mut grad = vec![0.0; params.len()];
    let mut grad_in = want_input_grad.then(|| FeatureMap::zeros(input.width(), input.height(), inputs));
    for y in 0..input.height() {
        for x in 0..input.width() {
            let inp = input.at(x, y);
            let gz = grad_z.at(x, y);
            let (gw, gb) = grad.split_at_mut(outputs * inputs);
            for o in 0..outputs {
                let g = gz[o];
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                for (w, &xi) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(inp) {
                    *w += g * xi;
                }
            }
            if let Some(gi) = grad_in.as_mut() {
                let dst = gi.at_mut(x, y);
                for o in 0..outputs {
                    let g = gz[o];
                    for (d, &w) in dst.iter_mut().zip(&weights[o * inputs..(o + 1) * inputs]) {
                        *d += g * w;
                    }
                }
            }
        }
    }
    (grad, grad_in)
}

/// Position-wise `tanh(W x + b)`.
pub fn tanh_layer(input: &FeatureMap, params: &[f64], outputs: usize) -> Result<FeatureMap> {
    check_affine(input, params, outputs, "tanh layer")?;
    Ok(affine(input, params, outputs, f64::tanh))
}

pub fn tanh_backward(
    input: &FeatureMap,
    output: &FeatureMap,
    params: &[f64],
    grad_out: &FeatureMap,
    want_input_grad: bool,
) -> Result<(Vec<f64>, Option<FeatureMap>)> {
    check_affine(input, params, output.channels(), "tanh layer")?;
    let mut grad_z = grad_out.clone();
    for (g, &y) in grad_z.values_mut().iter_mut().zip(output.values()) {
        *g *= 1.0 - y * y;
    }
    Ok(affine_backward(input, params, &grad_z, want_input_grad))
}

/// Sums every column over its rows, leaving a single row.
pub fn collapse_layer(input: &FeatureMap) -> FeatureMap {
    let ch = input.channels();
    let mut out = FeatureMap::zeros(input.width(), 1, ch);
    for y in 0..input.height() {
        for x in 0..input.width() {
            let src = input.at(x, y);
            for (o, v) in out.at_mut(x, 0).iter_mut().zip(src) {
                *o += v;
            }
        }
    }
    out
}

pub fn collapse_backward(grad_out: &FeatureMap, height: usize) -> FeatureMap {
    let (w, ch) = (grad_out.width(), grad_out.channels());
    let mut grad_in = FeatureMap::zeros(w, height, ch);
    for y in 0..height {
        for x in 0..w {
            grad_in.at_mut(x, y).copy_from_slice(grad_out.at(x, 0));
        }
    }
    grad_in
}

/// Per-column class activations from a single-row map, `timesteps x classes`.
pub fn output_logits(input: &FeatureMap, params: &[f64], classes: usize) -> Result<Vec<f64>> {
    if input.height() != 1 {
        return Err(HtrError::Shape(format!("output layer expects a single row, got {}", input.height())));
    }
    check_affine(input, params, classes, "output layer")?;
    Ok(affine(input, params, classes, |z| z).values().to_vec())
}

pub fn output_backward(input: &FeatureMap, params: &[f64], grad_logits: &[f64], classes: usize) -> Result<(Vec<f64>, FeatureMap)> {
    check_affine(input, params, classes, "output layer")?;
    let grad_z = FeatureMap::from_values(input.width(), 1, classes, grad_logits.to_vec())?;
    let (g, gi) = affine_backward(input, params, &grad_z, true);
    Ok((g, gi.expect("requested")))
}
