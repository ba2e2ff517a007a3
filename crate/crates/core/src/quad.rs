//! Adaptive Gauss–Kronrod and fixed Gauss–Legendre quadrature.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss 7-point weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_6,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7–K15 integration of `f` over `[a, b]`.
///
/// Bisects the segment with the largest error estimate until the summed estimate is
/// below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    while !(total_err <= abs_tol.max(rel_tol * total.abs())) {
        if heap.len() >= max_segments || !total.is_finite() {
            return Err(Error::QuadratureNonconvergence {
                error: total_err,
                tolerance: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let seg = heap.pop().expect("heap never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Segment is at floating-point resolution; accept what we have.
            heap.push(seg);
            break;
        }
        let (lv, le) = gk15(&f, seg.a, mid);
        let (rv, re) = gk15(&f, mid, seg.b);
        evaluations += 30;
        total += lv + rv - seg.value;
        total_err += le + re - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: seg.b, value: rv, error: re });
    }
    // Re-sum to shed the drift of incremental updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    if !value.is_finite() {
        return Err(Error::QuadratureNonconvergence { error, tolerance: abs_tol });
    }
    Ok(Quadrature { value, error, evaluations })
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre: `panels` equal panels of an `order`-point rule.
pub fn composite_gauss_legendre<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rule: &(Vec<f64>, Vec<f64>),
    panels: usize,
) -> f64 {
    let (nodes, weights) = rule;
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let c = lo + 0.5 * width;
        let h = 0.5 * width;
        let s: f64 = nodes.iter().zip(weights).map(|(x, w)| w * f(c + h * x)).sum();
        total += s * h;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 64] {
            let rule = gauss_legendre(n);
            let wsum: f64 = rule.1.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n={n}");
            // ∫_{-1}^{1} x^{2n-2} dx = 2/(2n-1)
            let deg = 2 * n as i32 - 2;
            let val = composite_gauss_legendre(&|x: f64| x.powi(deg), -1.0, 1.0, &rule, 1);
            assert!((val - 2.0 / (deg as f64 + 1.0)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_oscillation_and_kinks() {
        let q = integrate(|x: f64| (50.0 * x).cos(), 0.0, 3.0, 1e-13, 0.0, 1000).unwrap();
        assert!((q.value - (150.0f64).sin() / 50.0).abs() < 1e-12);
        let q = integrate(|x: f64| x.abs(), -1.0, 2.0, 1e-12, 0.0, 1000).unwrap();
        assert!((q.value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 1e-15, 0.0, 4);
        assert!(matches!(r, Err(Error::QuadratureNonconvergence { .. })));
    }
}
