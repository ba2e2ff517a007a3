//! Splitting the two-fold convolution of a non-singular law into a triangular piece and
//! a remainder: F^{2∗} = (1 − θ)H₂ + θ·(κ_a shifted to u).
//!
//! The triangle is fitted under the peak of f₀^{2∗}, where f₀ is a bounded, compactly
//! supported piece of F's density. Since f₀^{2∗} sits below the density of F^{2∗}, a
//! triangle below the half-peak level of f₀^{2∗} leaves a nonnegative remainder.

use crate::convolve::convolve_pair;
use crate::dist::{classify, trapezoid, AtomicMeasure, Classification, GridDensity, MixtureDistribution};
use crate::error::{Error, Result};
use crate::tvmetric::tv_distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Residual values below this are treated as round-off.
pub const RESIDUAL_FLOOR: f64 = -1e-12;
/// The level set must keep at least this many grid steps.
pub const MIN_STEPS: usize = 4;
const MAX_SHRINKS: u32 = 40;

/// Witness for F^{2∗} = (1 − θ)H₂ + θ·H₁∗δ_u with H₁ the tent law of half-width a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCertificate {
    pub u: f64,
    pub v: f64,
    pub b: f64,
    pub theta: f64,
    pub a: f64,
    /// True when √(v/b) exceeded v and the half-width was capped at v.
    pub a_capped: bool,
    /// Times v was halved before the remainder came out nonnegative.
    pub shrinks: u32,
    /// H₂.
    pub residual: MixtureDistribution,
    pub reconstruction_l1: f64,
    pub residual_min: f64,
}

/// The scalar part of a certificate, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub u: f64,
    pub v: f64,
    pub b: f64,
    pub theta: f64,
    pub a: f64,
    pub a_capped: bool,
    pub shrinks: u32,
    pub reconstruction_l1: f64,
    pub residual_min: f64,
}

impl DecompositionCertificate {
    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            u: self.u,
            v: self.v,
            b: self.b,
            theta: self.theta,
            a: self.a,
            a_capped: self.a_capped,
            shrinks: self.shrinks,
            reconstruction_l1: self.reconstruction_l1,
            residual_min: self.residual_min,
        }
    }

    /// The triangular component θ·κ_a(· − u) on `grid`'s nodes.
    fn tent_on(&self, grid: &GridDensity) -> Vec<f64> {
        tent_values(grid, self.u, self.a, self.theta)
    }
}

fn tent_values(grid: &GridDensity, u: f64, a: f64, theta: f64) -> Vec<f64> {
    grid.nodes()
        .map(|x| {
            let r = (x - u).abs() / a;
            if r < 1.0 {
                theta / a * (1.0 - r)
            } else {
                0.0
            }
        })
        .collect()
}

/// A bounded, compactly supported piece f₀ ≤ f of the density of `f`.
///
/// Isolated spikes above ten times the 99.9th percentile are capped at that percentile,
/// provided at least 90% of the mass survives; zero tails are trimmed.
pub fn extract_subdensity(f: &MixtureDistribution) -> Result<GridDensity> {
    if classify(f) == Classification::Singular {
        return Err(Error::SingularInput);
    }
    let d = &f.density;
    let mut values = d.values().to_vec();
    let mut positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    positive.sort_by(f64::total_cmp);
    let idx = ((positive.len() as f64 * 0.999).ceil() as usize).clamp(1, positive.len()) - 1;
    let p999 = positive[idx];
    let max = *positive.last().expect("non-singular law has positive density");
    if max > 10.0 * p999 {
        let capped: Vec<f64> = values.iter().map(|v| v.min(p999)).collect();
        if d.step() * trapezoid(&capped) >= 0.9 * d.mass() {
            values = capped;
        }
    }
    let first = values.iter().position(|v| *v > 0.0).unwrap_or(0);
    let last = values.iter().rposition(|v| *v > 0.0).unwrap_or(values.len() - 1);
    // Keep one zero node on each side so trimmed tails stay tails rather than jumps.
    let lo = first.saturating_sub(1);
    let hi = (last + 1).min(values.len() - 1);
    Ok(GridDensity::from_parts_unchecked(d.node(lo), d.step(), values[lo..=hi].to_vec()))
}

/// Peak u (first maximizing node), b = half the peak, and the largest whole-step v such
/// that every node of [u − v, u + v] lies on the grid with value ≥ b (up to round-off).
pub fn find_peak_level_set(f2: &GridDensity) -> Result<(f64, f64, f64)> {
    let vals = f2.values();
    let mut iu = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > vals[iu] {
            iu = i;
        }
    }
    if vals.is_empty() || !(vals[iu] > 0.0) {
        return Err(Error::ZeroDensity);
    }
    let b = 0.5 * vals[iu];
    // Samples meant to equal b exactly may come out of a transform a few ulps low.
    let level = b - 1e-12 * vals[iu];
    let mut k = 0;
    while iu > k && iu + k + 1 < vals.len() && vals[iu - k - 1] >= level && vals[iu + k + 1] >= level {
        k += 1;
    }
    Ok((f2.node(iu), k as f64 * f2.step(), b))
}

/// Builds the certificate for F^{2∗}.
pub fn build_certificate(f: &MixtureDistribution) -> Result<DecompositionCertificate> {
    let f0 = extract_subdensity(f)?;
    let law0 = MixtureDistribution::new(AtomicMeasure::empty(), f0);
    let f0_2 = convolve_pair(&law0, &law0)?;
    let (u, v_full, b) = find_peak_level_set(&f0_2.density)?;
    let f2 = convolve_pair(f, f)?;
    let h = f2.density.step();
    let mut steps = (v_full / h).round() as usize;
    let mut shrinks = 0;
    loop {
        if steps < MIN_STEPS {
            return Err(Error::ShrinkExhausted { min_steps: MIN_STEPS });
        }
        let v = steps as f64 * h;
        let a_sqrt = (v / b).sqrt();
        let a_capped = a_sqrt > v;
        // Whole steps keep the tent's corners on nodes.
        let a_steps = ((a_sqrt.min(v) / h) + 1e-9).floor().max(1.0) as usize;
        let a = a_steps as f64 * h;
        let theta = (a * b).min(1.0);
        let tent = tent_values(&f2.density, u, a, theta);
        let remainder: Vec<f64> = f2.density.values().iter().zip(&tent).map(|(x, t)| x - t).collect();
        let residual_min = remainder.iter().copied().fold(f64::INFINITY, f64::min);
        if residual_min >= RESIDUAL_FLOOR {
            let residual = if 1.0 - theta > 1e-15 {
                let scale = 1.0 / (1.0 - theta);
                let atoms: Vec<(f64, f64)> =
                    f2.atomic.atoms().iter().map(|&(x, p)| (x, p * scale)).collect();
                let (atomic, _) = AtomicMeasure::normalize(atoms)?;
                let density = GridDensity::from_parts_unchecked(
                    f2.density.origin(),
                    h,
                    remainder.iter().map(|r| r * scale).collect(),
                );
                MixtureDistribution { atomic, density, error_budget: f2.error_budget * scale }
            } else {
                MixtureDistribution::new(AtomicMeasure::empty(), GridDensity::empty())
            };
            let mut cert = DecompositionCertificate {
                u,
                v,
                b,
                theta,
                a,
                a_capped,
                shrinks,
                residual,
                reconstruction_l1: 0.0,
                residual_min,
            };
            cert.reconstruction_l1 = reconstruction_l1(&cert, &f2);
            return Ok(cert);
        }
        if shrinks == MAX_SHRINKS {
            return Err(Error::ShrinkExhausted { min_steps: MIN_STEPS });
        }
        shrinks += 1;
        steps /= 2;
    }
}

/// ‖F^{2∗} − [(1 − θ)H₂ + θ·H₁∗δ_u]‖_L1 with the triangle read on F^{2∗}'s grid.
pub fn reconstruction_l1(cert: &DecompositionCertificate, f2: &MixtureDistribution) -> f64 {
    let keep = 1.0 - cert.theta;
    let tent = cert.tent_on(&f2.density);
    let h2 = &cert.residual;
    let density = if h2.density.is_empty() {
        GridDensity::from_parts_unchecked(f2.density.origin(), f2.density.step(), tent)
    } else {
        let values = tent
            .iter()
            .enumerate()
            .map(|(i, t)| keep * h2.density.value_at(f2.density.node(i)) + t)
            .collect();
        GridDensity::from_parts_unchecked(f2.density.origin(), f2.density.step(), values)
    };
    let atoms: Vec<(f64, f64)> = h2.atomic.atoms().iter().map(|&(x, p)| (x, keep * p)).collect();
    let atomic = if atoms.is_empty() {
        AtomicMeasure::empty()
    } else {
        AtomicMeasure::normalize(atoms).map(|a| a.0).unwrap_or_else(|_| AtomicMeasure::empty())
    };
    let rebuilt = MixtureDistribution::new(atomic, density);
    let strip = |m: &MixtureDistribution| MixtureDistribution { error_budget: 0.0, ..m.clone() };
    2.0 * tv_distance(&strip(f2), &rebuilt).value
}

/// Draws from H₂ by atom selection, then inverse CDF on the piecewise-linear density.
fn sample_residual(h2: &MixtureDistribution, rng: &mut ChaCha8Rng) -> f64 {
    let atom_mass = h2.atomic.total();
    let total = atom_mass + h2.density.mass();
    let mut t = rng.gen::<f64>() * total;
    if t < atom_mass {
        for &(x, p) in h2.atomic.atoms() {
            if t < p {
                return x;
            }
            t -= p;
        }
        return h2.atomic.atoms().last().map(|a| a.0).unwrap_or(0.0);
    }
    t -= atom_mass;
    let d = &h2.density;
    let v = d.values();
    let h = d.step();
    for i in 0..v.len() - 1 {
        let panel = 0.5 * (v[i] + v[i + 1]) * h;
        if t < panel || i + 2 == v.len() {
            // Solve ∫_0^s (v_i + (v_{i+1} − v_i)y/h) dy = t for s in [0, h].
            let slope = (v[i + 1] - v[i]) / h;
            let s = if slope.abs() < 1e-300 {
                if v[i] > 0.0 { t / v[i] } else { 0.5 * h }
            } else {
                let disc = (v[i] * v[i] + 2.0 * slope * t).max(0.0);
                2.0 * t / (v[i] + disc.sqrt()).max(1e-300)
            };
            return d.node(i) + s.clamp(0.0, h);
        }
        t -= panel;
    }
    d.end()
}

/// `count` draws of (X₁ + u)X₃ + X₂(1 − X₃) with X₁ ~ κ_a, X₂ ~ H₂, X₃ ~ Bernoulli(θ).
pub fn sample_representation(cert: &DecompositionCertificate, seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let residual_empty = cert.residual.total_mass() <= 0.0;
    (0..count)
        .map(|_| {
            if residual_empty || rng.gen::<f64>() < cert.theta {
                let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
                cert.u + cert.a * (u1 + u2 - 1.0)
            } else {
                sample_residual(&cert.residual, &mut rng)
            }
        })
        .collect()
}
