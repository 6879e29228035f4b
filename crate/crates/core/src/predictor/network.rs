//! Forward pass and manual backpropagation through time.

use super::{LstmSlots, PredictorModel};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;
use crate::tensor::{affine, gemv_acc, gemv_t_acc, outer_acc};

/// Output clamp keeping predictions strictly inside (0, 1).
const OUTPUT_EPS: f64 = 1e-6;

#[inline]
fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Activations of one LSTM direction, stored in processing order.
#[derive(Debug, Clone)]
struct DirCache<S> {
    /// Post-activation gates `[i, f, g, o]`, one row of `4H` per step.
    gates: Vec<S>,
    cell: Vec<S>,
    hidden: Vec<S>,
}

#[derive(Debug, Clone)]
struct LayerCache<S> {
    /// Layer input, time-major `T × in`.
    input: Vec<S>,
    input_dim: usize,
    dirs: [DirCache<S>; 2],
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass<S> {
    frames: usize,
    layers: Vec<LayerCache<S>>,
    /// Final BLSTM output, `T × D`.
    embed: Vec<S>,
    /// Pre-ReLU attention hidden activations, `T × A`.
    att_pre: Vec<S>,
    weights: Vec<S>,
    pooled: Vec<S>,
    raw: S,
}

impl<S: Scalar> ForwardPass<S> {
    /// Sigmoid output clamped to `[eps, 1 - eps]`. NaN passes through.
    pub fn output(&self) -> S {
        if self.raw.is_nan() {
            return self.raw;
        }
        let eps = S::lit(OUTPUT_EPS);
        self.raw.max(eps).min(S::one() - eps)
    }

    /// Attention weights over frames; they sum to one.
    pub fn attention(&self) -> &[S] {
        &self.weights
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }
}

#[inline]
fn step_time(dir: usize, step: usize, frames: usize) -> usize {
    if dir == 0 {
        step
    } else {
        frames - 1 - step
    }
}

fn run_direction<S: Scalar>(
    p: &[S],
    slots: &LstmSlots,
    input: &[S],
    in_dim: usize,
    hidden: usize,
    frames: usize,
    dir: usize,
) -> DirCache<S> {
    let g4 = 4 * hidden;
    let w_ih = &p[slots.w_ih.clone()];
    let w_hh = &p[slots.w_hh.clone()];
    let b_ih = &p[slots.b_ih.clone()];
    let b_hh = &p[slots.b_hh.clone()];
    let mut gates = vec![S::zero(); frames * g4];
    let mut cell = vec![S::zero(); frames * hidden];
    let mut hid = vec![S::zero(); frames * hidden];
    let zero_state = vec![S::zero(); hidden];
    for s in 0..frames {
        let t = step_time(dir, s, frames);
        let x = &input[t * in_dim..(t + 1) * in_dim];
        let z = &mut gates[s * g4..(s + 1) * g4];
        affine(w_ih, Some(b_ih), x, z);
        for (zi, &b) in z.iter_mut().zip(b_hh) {
            *zi += b;
        }
        let (h_prev, c_prev) = if s == 0 {
            (&zero_state[..], &zero_state[..])
        } else {
            (
                &hid[(s - 1) * hidden..s * hidden],
                &cell[(s - 1) * hidden..s * hidden],
            )
        };
        gemv_acc(w_hh, h_prev, z);
        let mut c_new = vec![S::zero(); hidden];
        let mut h_new = vec![S::zero(); hidden];
        for k in 0..hidden {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hidden + k]);
            let g = z[2 * hidden + k].tanh();
            let o = sigmoid(z[3 * hidden + k]);
            z[k] = i;
            z[hidden + k] = f;
            z[2 * hidden + k] = g;
            z[3 * hidden + k] = o;
            let c = f * c_prev[k] + i * g;
            c_new[k] = c;
            h_new[k] = o * c.tanh();
        }
        cell[s * hidden..(s + 1) * hidden].copy_from_slice(&c_new);
        hid[s * hidden..(s + 1) * hidden].copy_from_slice(&h_new);
    }
    DirCache {
        gates,
        cell,
        hidden: hid,
    }
}

pub(super) fn forward<S: Scalar>(model: &PredictorModel<S>, feats: &FeatureMatrix<S>) -> ForwardPass<S> {
    let cfg = &model.config;
    let p = &model.params;
    let h = cfg.blstm_hidden;
    let d = cfg.embed_dim();
    let frames = feats.num_frames();

    let mut layers = Vec::with_capacity(cfg.blstm_layers);
    let mut input = feats.values().as_slice().to_vec();
    for layer in 0..cfg.blstm_layers {
        let in_dim = cfg.layer_input_dim(layer);
        let fwd = run_direction(p, &model.layout.lstm(layer, 0), &input, in_dim, h, frames, 0);
        let bwd = run_direction(p, &model.layout.lstm(layer, 1), &input, in_dim, h, frames, 1);
        let mut out = vec![S::zero(); frames * d];
        for t in 0..frames {
            let row = &mut out[t * d..(t + 1) * d];
            row[..h].copy_from_slice(&fwd.hidden[t * h..(t + 1) * h]);
            let sb = frames - 1 - t;
            row[h..].copy_from_slice(&bwd.hidden[sb * h..(sb + 1) * h]);
        }
        layers.push(LayerCache {
            input,
            input_dim: in_dim,
            dirs: [fwd, bwd],
        });
        input = out;
    }
    let embed = input;

    let head = model.layout.head();
    let a = cfg.attention_hidden;
    let mut att_pre = vec![S::zero(); frames * a];
    let mut scores = vec![S::zero(); frames];
    for t in 0..frames {
        let e = &embed[t * d..(t + 1) * d];
        let u = &mut att_pre[t * a..(t + 1) * a];
        affine(&p[head.att1_w.clone()], Some(&p[head.att1_b.clone()]), e, u);
        let w2 = &p[head.att2_w.clone()];
        let mut s = p[head.att2_b.start];
        for (&wk, &uk) in w2.iter().zip(u.iter()) {
            s += wk * uk.max(S::zero());
        }
        scores[t] = s;
    }
    let max = scores.iter().copied().fold(S::neg_infinity(), S::max);
    let mut weights: Vec<S> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: S = weights.iter().copied().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut pooled = vec![S::zero(); d];
    for t in 0..frames {
        let w = weights[t];
        for (acc, &e) in pooled.iter_mut().zip(&embed[t * d..(t + 1) * d]) {
            *acc += w * e;
        }
    }
    let mut z = p[head.out_b.start];
    for (&w, &x) in p[head.out_w.clone()].iter().zip(&pooled) {
        z += w * x;
    }
    ForwardPass {
        frames,
        layers,
        embed,
        att_pre,
        weights,
        pooled,
        raw: sigmoid(z),
    }
}

/// Backpropagates `d_embed` (time-major, `T × 2H`) through one direction,
/// accumulating parameter gradients and, when requested, input gradients.
#[allow(clippy::too_many_arguments)]
fn backward_direction<S: Scalar>(
    p: &[S],
    grad: &mut [S],
    slots: &LstmSlots,
    cache: &DirCache<S>,
    layer: &LayerCache<S>,
    d_out: &[S],
    hidden: usize,
    dir: usize,
    d_input: Option<&mut [S]>,
) {
    let frames = cache.hidden.len() / hidden;
    let in_dim = layer.input_dim;
    let g4 = 4 * hidden;
    let d = 2 * hidden;
    let w_ih = &p[slots.w_ih.clone()];
    let w_hh = &p[slots.w_hh.clone()];
    let mut dh_next = vec![S::zero(); hidden];
    let mut dc_next = vec![S::zero(); hidden];
    let mut dz = vec![S::zero(); g4];
    let zero_state = vec![S::zero(); hidden];
    let mut d_input = d_input;
    for s in (0..frames).rev() {
        let t = step_time(dir, s, frames);
        let gates = &cache.gates[s * g4..(s + 1) * g4];
        let c = &cache.cell[s * hidden..(s + 1) * hidden];
        let (h_prev, c_prev) = if s == 0 {
            (&zero_state[..], &zero_state[..])
        } else {
            (
                &cache.hidden[(s - 1) * hidden..s * hidden],
                &cache.cell[(s - 1) * hidden..s * hidden],
            )
        };
        let ext = &d_out[t * d + dir * hidden..t * d + (dir + 1) * hidden];
        for k in 0..hidden {
            let i = gates[k];
            let f = gates[hidden + k];
            let g = gates[2 * hidden + k];
            let o = gates[3 * hidden + k];
            let tc = c[k].tanh();
            let dh = ext[k] + dh_next[k];
            let dc = dc_next[k] + dh * o * (S::one() - tc * tc);
            dz[k] = dc * g * i * (S::one() - i);
            dz[hidden + k] = dc * c_prev[k] * f * (S::one() - f);
            dz[2 * hidden + k] = dc * i * (S::one() - g * g);
            dz[3 * hidden + k] = dh * tc * o * (S::one() - o);
            dc_next[k] = dc * f;
        }
        let x = &layer.input[t * in_dim..(t + 1) * in_dim];
        outer_acc(&mut grad[slots.w_ih.clone()], &dz, x);
        outer_acc(&mut grad[slots.w_hh.clone()], &dz, h_prev);
        for (gb, &v) in grad[slots.b_ih.clone()].iter_mut().zip(&dz) {
            *gb += v;
        }
        for (gb, &v) in grad[slots.b_hh.clone()].iter_mut().zip(&dz) {
            *gb += v;
        }
        if let Some(dx) = d_input.as_deref_mut() {
            gemv_t_acc(w_ih, &dz, &mut dx[t * in_dim..(t + 1) * in_dim]);
        }
        dh_next.iter_mut().for_each(|v| *v = S::zero());
        gemv_t_acc(w_hh, &dz, &mut dh_next);
    }
}

pub(super) fn backward<S: Scalar>(model: &PredictorModel<S>, pass: &ForwardPass<S>, d_out: S, grad: &mut [S]) {
    let cfg = &model.config;
    let p = &model.params;
    let h = cfg.blstm_hidden;
    let d = cfg.embed_dim();
    let a = cfg.attention_hidden;
    let frames = pass.frames;
    let head = model.layout.head();

    // The clamp is treated as identity; it only binds at the sigmoid's saturation.
    let y = pass.raw;
    let dz = d_out * y * (S::one() - y);
    grad[head.out_b.start] += dz;
    let mut d_pooled = vec![S::zero(); d];
    for ((g, dp), (&w, &x)) in grad[head.out_w.clone()]
        .iter_mut()
        .zip(d_pooled.iter_mut())
        .zip(p[head.out_w.clone()].iter().zip(&pass.pooled))
    {
        *g += dz * x;
        *dp = dz * w;
    }

    let mut d_embed = vec![S::zero(); frames * d];
    let mut d_weights = vec![S::zero(); frames];
    for t in 0..frames {
        let e = &pass.embed[t * d..(t + 1) * d];
        let w = pass.weights[t];
        let mut dot = S::zero();
        for ((de, &dp), &ev) in d_embed[t * d..(t + 1) * d].iter_mut().zip(&d_pooled).zip(e) {
            *de += w * dp;
            dot += dp * ev;
        }
        d_weights[t] = dot;
    }
    let mean: S = pass
        .weights
        .iter()
        .zip(&d_weights)
        .map(|(&w, &dw)| w * dw)
        .sum();

    let w2 = &p[head.att2_w.clone()];
    let w1 = &p[head.att1_w.clone()];
    let mut du = vec![S::zero(); a];
    let mut relu = vec![S::zero(); a];
    for t in 0..frames {
        let ds = pass.weights[t] * (d_weights[t] - mean);
        if ds == S::zero() {
            continue;
        }
        grad[head.att2_b.start] += ds;
        let u = &pass.att_pre[t * a..(t + 1) * a];
        for k in 0..a {
            relu[k] = u[k].max(S::zero());
            du[k] = if u[k] > S::zero() { ds * w2[k] } else { S::zero() };
        }
        for (g, &r) in grad[head.att2_w.clone()].iter_mut().zip(&relu) {
            *g += ds * r;
        }
        let e = &pass.embed[t * d..(t + 1) * d];
        outer_acc(&mut grad[head.att1_w.clone()], &du, e);
        for (g, &v) in grad[head.att1_b.clone()].iter_mut().zip(&du) {
            *g += v;
        }
        gemv_t_acc(w1, &du, &mut d_embed[t * d..(t + 1) * d]);
    }

    let mut d_layer_out = d_embed;
    for layer in (0..cfg.blstm_layers).rev() {
        let cache = &pass.layers[layer];
        let mut d_in = if layer > 0 {
            Some(vec![S::zero(); frames * cache.input_dim])
        } else {
            None
        };
        for dir in 0..2 {
            backward_direction(
                p,
                grad,
                &model.layout.lstm(layer, dir),
                &cache.dirs[dir],
                cache,
                &d_layer_out,
                h,
                dir,
                d_in.as_deref_mut(),
            );
        }
        match d_in {
            Some(v) => d_layer_out = v,
            None => break,
        }
    }
}
