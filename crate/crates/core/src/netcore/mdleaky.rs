//! Two-dimensional leaky-integrator cells.
//!
//! For each scan direction the state at grid position `p` is
//!
//! ```text
//! u    = tanh(Wu x(p) + bu)
//! g    = sigmoid(Wg x(p) + Ux s(p-ex) + Uy s(p-ey) + bg)
//! s(p) = g * (lx s(p-ex) + ly s(p-ey)) / (lx + ly) + (1 - g) * u
//! ```
//!
//! where `p-ex` and `p-ey` are the predecessors along the direction's
//! column and row axes and states outside the grid are zero. The layer
//! output is the sum of the four directional state maps.

use super::{Direction, FeatureMap};
use crate::error::{HtrError, Result};

pub const LEAK_X: f64 = 1.0;
pub const LEAK_Y: f64 = 1.0;

/// Trainable weights of one direction, in storage order.
pub(crate) struct DirectionWeights<'a> {
    pub wu: &'a [f64],
    pub bu: &'a [f64],
    pub wg: &'a [f64],
    pub ux: &'a [f64],
    pub uy: &'a [f64],
    pub bg: &'a [f64],
}

pub fn direction_param_count(inputs: usize, cells: usize) -> usize {
    2 * cells * inputs + 2 * cells * cells + 2 * cells
}

pub fn param_count(inputs: usize, cells: usize) -> usize {
    4 * direction_param_count(inputs, cells)
}

fn split_mut(p: &mut [f64], inputs: usize, cells: usize) -> [&mut [f64]; 6] {
    let (wu, rest) = p.split_at_mut(cells * inputs);
    let (bu, rest) = rest.split_at_mut(cells);
    let (wg, rest) = rest.split_at_mut(cells * inputs);
    let (ux, rest) = rest.split_at_mut(cells * cells);
    let (uy, bg) = rest.split_at_mut(cells * cells);
    [wu, bu, wg, ux, uy, bg]
}

pub(crate) fn direction_weights(p: &[f64], inputs: usize, cells: usize) -> DirectionWeights<'_> {
    let (wu, rest) = p.split_at(cells * inputs);
    let (bu, rest) = rest.split_at(cells);
    let (wg, rest) = rest.split_at(cells * inputs);
    let (ux, rest) = rest.split_at(cells * cells);
    let (uy, bg) = rest.split_at(cells * cells);
    DirectionWeights { wu, bu, wg, ux, uy, bg }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-direction activations kept for the backward pass, indexed by step
/// `(xc * height + yc) * cells` in the direction's own frame.
#[derive(Debug, Clone)]
pub struct DirectionCache {
    u: Vec<f64>,
    g: Vec<f64>,
    s: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MdLeakyCache {
    dirs: Vec<DirectionCache>,
}

fn run_direction(input: &FeatureMap, w: &DirectionWeights<'_>, cells: usize, dir: Direction) -> DirectionCache {
    let (width, height, inputs) = (input.width(), input.height(), input.channels());
    let n = width * height * cells;
    let mut cache = DirectionCache {
        u: vec![0.0; n],
        g: vec![0.0; n],
        s: vec![0.0; n],
    };
    let zeros = vec![0.0; cells];
    let norm = LEAK_X + LEAK_Y;
    for xc in 0..width {
        for yc in 0..height {
            let (x, y) = dir.position(xc, yc, width, height);
            let inp = input.at(x, y);
            let here = (xc * height + yc) * cells;
            let (before, current) = cache.s.split_at_mut(here);
            let left = if xc > 0 { &before[here - height * cells..here - height * cells + cells] } else { &zeros[..] };
            let up = if yc > 0 { &before[here - cells..here] } else { &zeros[..] };
            for k in 0..cells {
                let au = w.bu[k] + dot(&w.wu[k * inputs..(k + 1) * inputs], inp);
                let ag = w.bg[k]
                    + dot(&w.wg[k * inputs..(k + 1) * inputs], inp)
                    + dot(&w.ux[k * cells..(k + 1) * cells], left)
                    + dot(&w.uy[k * cells..(k + 1) * cells], up);
                let u = au.tanh();
                let g = sigmoid(ag);
                let m = (LEAK_X * left[k] + LEAK_Y * up[k]) / norm;
                cache.u[here + k] = u;
                cache.g[here + k] = g;
                current[k] = g * m + (1.0 - g) * u;
            }
        }
    }
    cache
}

fn check_params(input: &FeatureMap, params: &[f64], cells: usize) -> Result<()> {
    let expected = param_count(input.channels(), cells);
    if params.len() != expected {
        return Err(HtrError::Shape(format!(
            "MDLeaky layer with {} inputs and {cells} cells needs {expected} weights, got {}",
            input.channels(),
            params.len()
        )));
    }
    Ok(())
}

/// State map of a single scan direction. `params` holds that direction's
/// weights only.
pub fn mdleaky_forward_direction(input: &FeatureMap, params: &[f64], cells: usize, dir: Direction) -> Result<FeatureMap> {
    let expected = direction_param_count(input.channels(), cells);
    if params.len() != expected {
        return Err(HtrError::Shape(format!("direction needs {expected} weights, got {}", params.len())));
    }
    let w = direction_weights(params, input.channels(), cells);
    let cache = run_direction(input, &w, cells, dir);
    let mut out = FeatureMap::zeros(input.width(), input.height(), cells);
    scatter_states(&mut out, &cache, dir);
    Ok(out)
}

fn scatter_states(out: &mut FeatureMap, cache: &DirectionCache, dir: Direction) {
    let (width, height, cells) = (out.width(), out.height(), out.channels());
    for xc in 0..width {
        for yc in 0..height {
            let (x, y) = dir.position(xc, yc, width, height);
            let here = (xc * height + yc) * cells;
            for (o, s) in out.at_mut(x, y).iter_mut().zip(&cache.s[here..here + cells]) {
                *o += s;
            }
        }
    }
}

/// Sum of the four directional state maps.
pub fn mdleaky_forward(input: &FeatureMap, params: &[f64], cells: usize) -> Result<(FeatureMap, MdLeakyCache)> {
    check_params(input, params, cells)?;
    let per_dir = direction_param_count(input.channels(), cells);
    let mut out = FeatureMap::zeros(input.width(), input.height(), cells);
    let mut dirs = Vec::with_capacity(4);
    for (d, dir) in Direction::ALL.into_iter().enumerate() {
        let w = direction_weights(&params[d * per_dir..(d + 1) * per_dir], input.channels(), cells);
        let cache = run_direction(input, &w, cells, dir);
        scatter_states(&mut out, &cache, dir);
        dirs.push(cache);
    }
    Ok((out, MdLeakyCache { dirs }))
}

/// Backpropagation through all four recurrences. Returns the weight gradient
/// and, when `want_input_grad` is set, the gradient with respect to `input`.
pub fn mdleaky_backward(
    input: &FeatureMap,
    params: &[f64],
    cells: usize,
    cache: &MdLeakyCache,
    grad_out: &FeatureMap,
    want_input_grad: bool,
) -> Result<(Vec<f64>, Option<FeatureMap>)> {
    check_params(input, params, cells)?;
    if grad_out.width() != input.width() || grad_out.height() != input.height() || grad_out.channels() != cells {
        return Err(HtrError::Shape("MDLeaky output gradient has the wrong shape".into()));
    }
    let (width, height, inputs) = (input.width(), input.height(), input.channels());
    let per_dir = direction_param_count(inputs, cells);
    let mut grad = vec![0.0; params.len()];
    let mut grad_in = want_input_grad.then(|| FeatureMap::zeros(width, height, inputs));
    let zeros = vec![0.0; cells];
    let norm = LEAK_X + LEAK_Y;

    let mut ds = vec![0.0; width * height * cells];
    let mut dsv = vec![0.0; cells];
    let mut dau = vec![0.0; cells];
    let mut dag = vec![0.0; cells];
    let mut dm = vec![0.0; cells];

    for (d, dir) in Direction::ALL.into_iter().enumerate() {
        let w = direction_weights(&params[d * per_dir..(d + 1) * per_dir], inputs, cells);
        let [gwu, gbu, gwg, gux, guy, gbg] = split_mut(&mut grad[d * per_dir..(d + 1) * per_dir], inputs, cells);
        let c = &cache.dirs[d];
        ds.iter_mut().for_each(|v| *v = 0.0);

        for xc in (0..width).rev() {
            for yc in (0..height).rev() {
                let (x, y) = dir.position(xc, yc, width, height);
                let here = (xc * height + yc) * cells;
                let left_at = (xc > 0).then(|| here - height * cells);
                let up_at = (yc > 0).then(|| here - cells);
                let left = left_at.map_or(&zeros[..], |i| &c.s[i..i + cells]);
                let up = up_at.map_or(&zeros[..], |i| &c.s[i..i + cells]);
                let go = grad_out.at(x, y);
                for k in 0..cells {
                    dsv[k] = ds[here + k] + go[k];
                    let (u, g) = (c.u[here + k], c.g[here + k]);
                    let m = (LEAK_X * left[k] + LEAK_Y * up[k]) / norm;
                    dau[k] = dsv[k] * (1.0 - g) * (1.0 - u * u);
                    dag[k] = dsv[k] * (m - u) * g * (1.0 - g);
                    dm[k] = dsv[k] * g;
                }
                let inp = input.at(x, y);
                for k in 0..cells {
                    let (a, b) = (dau[k], dag[k]);
                    gbu[k] += a;
                    gbg[k] += b;
                    if a != 0.0 {
                        for (gw, &xi) in gwu[k * inputs..(k + 1) * inputs].iter_mut().zip(inp) {
                            *gw += a * xi;
                        }
                    }
                    if b != 0.0 {
                        for (gw, &xi) in gwg[k * inputs..(k + 1) * inputs].iter_mut().zip(inp) {
                            *gw += b * xi;
                        }
                        for (gw, &sj) in gux[k * cells..(k + 1) * cells].iter_mut().zip(left) {
                            *gw += b * sj;
                        }
                        for (gw, &sj) in guy[k * cells..(k + 1) * cells].iter_mut().zip(up) {
                            *gw += b * sj;
                        }
                    }
                }
                if let Some(gi) = grad_in.as_mut() {
                    let dst = gi.at_mut(x, y);
                    for k in 0..cells {
                        let (a, b) = (dau[k], dag[k]);
                        let wu_k = &w.wu[k * inputs..(k + 1) * inputs];
                        let wg_k = &w.wg[k * inputs..(k + 1) * inputs];
                        for i in 0..inputs {
                            dst[i] += a * wu_k[i] + b * wg_k[i];
                        }
                    }
                }
                if let Some(li) = left_at {
                    for j in 0..cells {
                        ds[li + j] += LEAK_X / norm * dm[j];
                    }
                    for k in 0..cells {
                        let b = dag[k];
                        for (dst, &wkj) in ds[li..li + cells].iter_mut().zip(&w.ux[k * cells..(k + 1) * cells]) {
                            *dst += b * wkj;
                        }
                    }
                }
                if let Some(ui) = up_at {
                    for j in 0..cells {
                        ds[ui + j] += LEAK_Y / norm * dm[j];
                    }
                    for k in 0..cells {
                        let b = dag[k];
                        for (dst, &wkj) in ds[ui..ui + cells].iter_mut().zip(&w.uy[k * cells..(k + 1) * cells]) {
                            *dst += b * wkj;
                        }
                    }
                }
            }
        }
    }
    Ok((grad, grad_in))
}
