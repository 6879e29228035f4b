//! Deterministic stand-in for a pretrained speech-representation model.
//!
//! The encoder is a stack of strided 1-D convolutions with tanh activations;
//! the output stage is a bias-free linear map applied frame by frame, so both
//! stages have the same frame count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backend::{BackendDescriptor, FeatureBackend};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{affine, Matrix};

/// Channel width of every conv layer except the last, which emits `fe_dim`.
pub const MOCK_CONV_WIDTH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<S> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[out][in][k]`, row-major.
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> ConvLayer<S> {
    pub fn output_len(&self, input_len: usize) -> usize {
        if input_len < self.kernel {
            0
        } else {
            (input_len - self.kernel) / self.stride + 1
        }
    }

    /// `input` is channel-major (`in_channels` rows of `len` samples).
    fn forward(&self, input: &[S], len: usize) -> (Vec<S>, usize) {
        let out_len = self.output_len(len);
        let mut out = vec![S::zero(); self.out_channels * out_len];
        let span = self.in_channels * self.kernel;
        for o in 0..self.out_channels {
            let w = &self.weight[o * span..(o + 1) * span];
            for t in 0..out_len {
                let start = t * self.stride;
                let mut acc = self.bias[o];
                for i in 0..self.in_channels {
                    let x = &input[i * len + start..i * len + start + self.kernel];
                    let wk = &w[i * self.kernel..(i + 1) * self.kernel];
                    for (&a, &b) in wk.iter().zip(x) {
                        acc += a * b;
                    }
                }
                out[o * out_len + t] = acc.tanh();
            }
        }
        (out, out_len)
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend<S> {
    descriptor: BackendDescriptor,
    seed: u64,
    layers: Vec<ConvLayer<S>>,
    /// ol_dim × fe_dim.
    projection: Matrix<S>,
}

/// (kernel, stride) per layer. Hop 320 reproduces the wav2vec2 encoder geometry.
fn geometry(hop: usize) -> Vec<(usize, usize)> {
    if hop == 320 {
        return vec![(10, 5), (3, 2), (3, 2), (3, 2), (3, 2), (2, 2), (2, 2)];
    }
    let mut factors = Vec::new();
    let mut rest = hop;
    let mut p = 2;
    while rest > 1 {
        while rest % p == 0 {
            factors.push(p);
            rest /= p;
        }
        p += 1;
    }
    if factors.is_empty() {
        return vec![(1, 1)];
    }
    factors.sort_unstable_by(|a, b| b.cmp(a));
    factors
        .iter()
        .enumerate()
        .map(|(l, &s)| if l == 0 { (2 * s, s) } else { (s + 1, s) })
        .collect()
}

fn uniform<S: Scalar>(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<S> {
    (0..n).map(|_| S::lit(rng.gen_range(-bound..bound))).collect()
}

pub fn register_mock_backend<S: Scalar>(
    seed: u64,
    fe_dim: usize,
    ol_dim: usize,
    hop: usize,
) -> Result<MockBackend<S>> {
    if fe_dim == 0 || ol_dim == 0 || hop == 0 {
        return Err(Error::invalid("mock backend dims and hop must be positive"));
    }
    let geo = geometry(hop);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(geo.len());
    let mut in_ch = 1;
    for (l, &(kernel, stride)) in geo.iter().enumerate() {
        let out_ch = if l + 1 == geo.len() { fe_dim } else { MOCK_CONV_WIDTH };
        // Variance-preserving bound for tanh; small biases keep the output
        // driven by the waveform rather than by constants.
        let bound = (3.0 / (in_ch * kernel) as f64).sqrt();
        layers.push(ConvLayer {
            in_channels: in_ch,
            out_channels: out_ch,
            kernel,
            stride,
            weight: uniform(&mut rng, out_ch * in_ch * kernel, bound),
            bias: uniform(&mut rng, out_ch, 0.1 * bound),
        });
        in_ch = out_ch;
    }
    let projection = Matrix::from_vec(
        ol_dim,
        fe_dim,
        uniform(&mut rng, ol_dim * fe_dim, 1.0 / (fe_dim as f64).sqrt()),
    );

    let mut receptive_field = 0;
    let mut jump = 1;
    for (i, l) in layers.iter().enumerate() {
        receptive_field += if i == 0 { l.kernel } else { (l.kernel - 1) * jump };
        jump *= l.stride;
    }
    debug_assert_eq!(jump, hop);

    Ok(MockBackend {
        descriptor: BackendDescriptor {
            backend_id: "mock".into(),
            fe_dim,
            ol_dim,
            frame_hop: hop,
            receptive_field,
            expected_sample_rate: 16000,
            ol_tap: "frame-wise linear map of the encoder output".into(),
        },
        seed,
        layers,
        projection,
    })
}

impl<S: Scalar> MockBackend<S> {
    pub fn layers(&self) -> &[ConvLayer<S>] {
        &self.layers
    }

    pub fn projection(&self) -> &Matrix<S> {
        &self.projection
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Use a backend id other than `mock`, e.g. to stand in for a registry entry.
    pub fn with_id(mut self, backend_id: impl Into<String>) -> Self {
        self.descriptor.backend_id = backend_id.into();
        self
    }
}

impl<S: Scalar> FeatureBackend<S> for MockBackend<S> {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn encode(&self, samples: &[S]) -> Result<Matrix<S>> {
        let mut buf = samples.to_vec();
        let mut len = samples.len();
        for layer in &self.layers {
            if layer.output_len(len) == 0 {
                return Err(Error::invalid(format!(
                    "input of {} samples is shorter than the {}-sample receptive field",
                    samples.len(),
                    self.descriptor.receptive_field
                )));
            }
            let (next, next_len) = layer.forward(&buf, len);
            buf = next;
            len = next_len;
        }
        let dim = self.descriptor.fe_dim;
        let mut out = Matrix::zeros(len, dim);
        for c in 0..dim {
            for t in 0..len {
                out.set(t, c, buf[c * len + t]);
            }
        }
        Ok(out)
    }

    fn contextualize(&self, samples: &[S]) -> Result<Matrix<S>> {
        let fe = self.encode(samples)?;
        let mut out = Matrix::zeros(fe.rows(), self.descriptor.ol_dim);
        for t in 0..fe.rows() {
            affine(self.projection.as_slice(), None, fe.row(t), out.row_mut(t));
        }
        Ok(out)
    }

    fn fingerprint(&self) -> String {
        format!(
            "{}|seed={}",
            serde_json::to_string(&self.descriptor).unwrap_or_default(),
            self.seed
        )
    }
}
