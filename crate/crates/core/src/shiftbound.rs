//! A computable bound on d_TV(S_n, S_n + γ) from the decomposition of F^{2∗}.
//!
//! Pairing summands gives S_{2m} as a Binomial(m, θ) number of triangular pieces plus an
//! independent remainder. Shifts are absorbed by the triangular pieces when there are at
//! least k₀ = ⌊mθ/2⌋ of them, and the chance of fewer is a binomial tail.

use crate::decompose::{build_certificate, DecompositionCertificate};
use crate::dist::MixtureDistribution;
use crate::error::{Error, Result};
use crate::special::{ln_choose, log_sum_exp};
use crate::triangular::lemma1_bound;
use crate::tvmetric::shift_tv;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftBoundBreakdown {
    pub m: u64,
    pub theta: f64,
    pub a: f64,
    pub k0: u64,
    pub triangular_term: f64,
    pub binomial_tail: f64,
    pub total: f64,
}

impl ShiftBoundBreakdown {
    /// True when k₀ = 0 and the triangular term is the vacuous 1.
    pub fn is_vacuous(&self) -> bool {
        self.k0 == 0
    }
}

/// P(Binomial(m, θ) ≤ k), summed exactly in log space.
pub fn binomial_tail_cdf(m: u64, theta: f64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as u64;
    if k >= m || theta <= 0.0 {
        return 1.0;
    }
    if theta >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (theta.ln(), (-theta).ln_1p());
    let terms: Vec<f64> = (0..=k)
        .map(|j| ln_choose(m, j) + j as f64 * lp + (m - j) as f64 * lq)
        .collect();
    log_sum_exp(&terms).exp().min(1.0)
}

/// The bound for a given certificate of F^{2∗}.
pub fn lemma3_bound_from(cert: &DecompositionCertificate, n: u64, gamma: f64) -> Result<ShiftBoundBreakdown> {
    if n < 2 {
        return Err(Error::InvalidParameter("the shift bound needs n ≥ 2".into()));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("shift must be finite and ≥ 0, got {gamma}")));
    }
    let m = n / 2;
    let theta = cert.theta;
    let k0 = (0.5 * m as f64 * theta).floor() as u64;
    let triangular_term = if k0 >= 1 {
        let k = u32::try_from(k0).map_err(|_| Error::InvalidParameter("n too large".into()))?;
        lemma1_bound(cert.a, k, gamma)
    } else {
        log::warn!("k0 = 0 for m = {m}, θ = {theta}: the shift bound is vacuous");
        1.0
    };
    let binomial_tail = binomial_tail_cdf(m, theta, k0 as i64 - 1);
    Ok(ShiftBoundBreakdown {
        m,
        theta,
        a: cert.a,
        k0,
        triangular_term,
        binomial_tail,
        total: triangular_term + binomial_tail,
    })
}

/// Bound on d_TV(S_n, S_n + γ) for sums of iid copies of `f`.
pub fn lemma3_bound(f: &MixtureDistribution, n: u64, gamma: f64) -> Result<ShiftBoundBreakdown> {
    let cert = build_certificate(f)?;
    lemma3_bound_from(&cert, n, gamma)
}

/// Checks d_TV(S_n, S_n + γ) ≤ d_TV(S_{2m}, S_{2m} + γ) for m = ⌊n/2⌋, up to tolerance.
pub fn verify_contraction_chain(f: &MixtureDistribution, n: u64, gamma: f64) -> Result<bool> {
    if n < 2 {
        return Err(Error::InvalidParameter("the contraction chain needs n ≥ 2".into()));
    }
    let full = shift_tv(f, n, gamma)?;
    if n % 2 == 0 {
        return Ok(true);
    }
    let even = shift_tv(f, n - 1, gamma)?;
    Ok(full.value <= even.value + full.tolerance + even.tolerance)
}
