//! Real-sequence convolution and powering through complex FFTs.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Below this many multiply-adds a direct convolution beats the transform.
const DIRECT_WORK_LIMIT: usize = 1 << 16;

pub(crate) fn transform_len(n: usize, cap: usize) -> Result<usize> {
    let len = n.next_power_of_two().max(256);
    if len > cap {
        return Err(Error::GridOverflow { requested: len, cap });
    }
    Ok(len)
}

fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Linear convolution of two real sequences. Returns the output and the transform length
/// used (0 for the direct path).
pub(crate) fn convolve(a: &[f64], b: &[f64], cap: usize) -> Result<(Vec<f64>, usize)> {
    if a.is_empty() || b.is_empty() {
        return Ok((Vec::new(), 0));
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 16 || a.len() * b.len() <= DIRECT_WORK_LIMIT {
        return Ok((direct(a, b), 0));
    }
    let len = transform_len(out_len, cap)?;
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);

    // Pack both inputs into one complex transform: z = a + i·b.
    let mut z = vec![Complex64::new(0.0, 0.0); len];
    for (k, &x) in a.iter().enumerate() {
        z[k].re = x;
    }
    for (k, &y) in b.iter().enumerate() {
        z[k].im = y;
    }
    forward.process(&mut z);
    let mut prod = vec![Complex64::new(0.0, 0.0); len];
    for j in 0..len {
        let zj = z[j];
        let zc = z[(len - j) % len].conj();
        let fa = (zj + zc) * 0.5;
        let fb = (zj - zc) * Complex64::new(0.0, -0.5);
        prod[j] = fa * fb;
    }
    inverse.process(&mut prod);
    let scale = 1.0 / len as f64;
    Ok((prod[..out_len].iter().map(|c| c.re * scale).collect(), len))
}

/// n-fold cyclic self-convolution of `a` folded onto a ring of `len` cells.
pub(crate) fn cyclic_power(a: &[f64], n: u64, len: usize) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let mut z = vec![Complex64::new(0.0, 0.0); len];
    for (k, &x) in a.iter().enumerate() {
        z[k % len].re += x;
    }
    forward.process(&mut z);
    let exp = u32::try_from(n).expect("power fits in u32");
    for c in z.iter_mut() {
        *c = c.powu(exp);
    }
    inverse.process(&mut z);
    let scale = 1.0 / len as f64;
    z.iter().map(|c| c.re * scale).collect()
}
