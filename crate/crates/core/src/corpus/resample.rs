//! Offline band-limited resampling with a Kaiser-windowed sinc kernel.
//!
//! Each output sample `y[m]` sits at source position `t = m * src / dst` and is
//! `sum_k x[k] * h(t - k)` with
//! `h(u) = fc * sinc(fc * u) * kaiser(u / half_width)`,
//! `fc = rolloff * min(1, dst / src)` and `half_width = zero_crossings / fc`.
//! Output length is `ceil(len * dst / src)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplerParams {
    /// Zero crossings of the sinc on each side of the kernel centre.
    pub zero_crossings: usize,
    /// Passband edge as a fraction of the lower Nyquist frequency.
    pub rolloff: f64,
    pub kaiser_beta: f64,
}

impl Default for ResamplerParams {
    fn default() -> Self {
        Self {
            zero_crossings: 32,
            rolloff: 0.945,
            kaiser_beta: 8.6,
        }
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= y / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

pub fn resample<S: Scalar>(
    input: &[S],
    src_rate: u32,
    dst_rate: u32,
    params: &ResamplerParams,
) -> Result<Vec<S>> {
    if src_rate == 0 || dst_rate == 0 {
        return Err(Error::invalid("sample rates must be positive"));
    }
    if input.is_empty() {
        return Err(Error::invalid("cannot resample empty signal"));
    }
    if src_rate == dst_rate {
        return Ok(input.to_vec());
    }
    let src = src_rate as u64;
    let dst = dst_rate as u64;
    let out_len = (input.len() as u64 * dst).div_ceil(src) as usize;
    let ratio = dst_rate as f64 / src_rate as f64;
    let fc = params.rolloff * ratio.min(1.0);
    let half_width = params.zero_crossings as f64 / fc;
    let i0_beta = bessel_i0(params.kaiser_beta);
    let kernel = |u: f64| {
        let r = u / half_width;
        if r.abs() > 1.0 {
            return 0.0;
        }
        let w = bessel_i0(params.kaiser_beta * (1.0 - r * r).sqrt()) / i0_beta;
        fc * sinc(fc * u) * w
    };

    // Source positions repeat their fractional part every dst/gcd outputs,
    // so the taps are tabulated once per phase.
    let g = gcd(src, dst);
    let phases = (dst / g) as usize;
    let reach = half_width.ceil() as i64 + 1;
    let taps = (2 * reach) as usize;
    let mut table = vec![0.0; phases * taps];
    for q in 0..phases {
        let frac = (q as u64 * g) as f64 / dst as f64;
        for (j, slot) in table[q * taps..(q + 1) * taps].iter_mut().enumerate() {
            let offset = j as i64 - reach + 1;
            *slot = kernel(frac - offset as f64);
        }
    }

    let x: Vec<f64> = input.iter().map(|v| v.as_f64()).collect();
    let n = x.len() as i64;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len as u64 {
        let pos = m * src;
        let base = (pos / dst) as i64;
        let q = ((pos % dst) / g) as usize;
        let row = &table[q * taps..(q + 1) * taps];
        let mut acc = 0.0;
        for (j, &w) in row.iter().enumerate() {
            let k = base + j as i64 - reach + 1;
            if (0..n).contains(&k) {
                acc += x[k as usize] * w;
            }
        }
        out.push(S::lit(acc));
    }
    Ok(out)
}
