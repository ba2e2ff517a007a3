//! Normal-law helpers and log-space combinatorics.

use libm::erfc;
use libm::lgamma as ln_gamma;
use std::f64::consts::FRAC_1_SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF Φ(x), accurate in both tails.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail Q(x) = 1 − Φ(x).
#[inline]
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Density of N(mean, sd²).
#[inline]
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    std_normal_pdf((x - mean) / sd) / sd
}

/// P(lo < Z ≤ hi) for Z ~ N(mean, sd²), computed on the side that avoids cancellation.
pub fn normal_interval_mass(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    if a >= 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    }
}

/// Mills ratio R(x) = Q(x)/φ(x) for x ≥ 0.
///
/// Uses the erfc ratio below 5 and the Laplace continued fraction above, where the
/// ratio form would lose digits to underflow.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0 || x.is_nan());
    if x < 5.0 {
        return std_normal_sf(x) / std_normal_pdf(x);
    }
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))), modified Lentz.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// ln C(n, k).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// log(Σ exp(xᵢ)) without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
