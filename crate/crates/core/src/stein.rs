//! Solutions of the Stein equation f′(w) − w·f(w) = 1_A(w) − P(Z ∈ A) for unions of
//! intervals, and the bound on Δ_n they lead to.
//!
//! f(w) = (1/φ(w))∫_{−∞}^w (1_A − Nh)φ. For w ≥ 0 the equivalent right-tail form is used;
//! every ratio Q(t)/φ(w) is written as R(t)·exp((w² − t²)/2) with R the Mills ratio, so
//! nothing overflows however far out w is.

use crate::convolve::self_convolve;
use crate::dist::{moments, standardize, MixtureDistribution};
use crate::error::{Error, Result};
use crate::quad::{composite_gauss_legendre, gauss_legendre};
use crate::special::{mills_ratio, normal_interval_mass};
use crate::tvmetric::{shift_tv, shift_tv_of_law};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A finite union of disjoint intervals (lo, hi], sorted, ends possibly infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorelSetSpec {
    intervals: Vec<(f64, f64)>,
}

impl BorelSetSpec {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::InvalidParameter(format!("bad interval ({lo}, {hi})")));
            }
        }
        if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::InvalidParameter("intervals must be sorted and disjoint".into()));
        }
        Ok(BorelSetSpec { intervals })
    }

    pub fn empty() -> Self {
        BorelSetSpec { intervals: Vec::new() }
    }

    pub fn real_line() -> Self {
        BorelSetSpec { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// 1_A(w).
    pub fn contains(&self, w: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo < w && w <= hi)
    }

    /// P(Z ∈ A) for standard normal Z.
    pub fn normal_measure(&self) -> f64 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| normal_interval_mass(lo, hi, 0.0, 1.0))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// −A.
    fn reflected(&self) -> BorelSetSpec {
        BorelSetSpec { intervals: self.intervals.iter().rev().map(|&(lo, hi)| (-hi, -lo)).collect() }
    }

    /// Finite endpoints, where f′ jumps.
    pub fn endpoints(&self) -> Vec<f64> {
        self.intervals
            .iter()
            .flat_map(|&(lo, hi)| [lo, hi])
            .filter(|x| x.is_finite())
            .collect()
    }

    /// Union of 1..=5 intervals with endpoints in [−4, 4]; each outer end is unbounded
    /// with probability ¼.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let k = rng.gen_range(1..=5);
        let mut pts: Vec<f64> = (0..2 * k).map(|_| rng.gen_range(-4.0..4.0)).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.len() % 2 == 1 {
            pts.pop();
        }
        if rng.gen_bool(0.25) {
            pts[0] = f64::NEG_INFINITY;
        }
        if rng.gen_bool(0.25) {
            let last = pts.len() - 1;
            pts[last] = f64::INFINITY;
        }
        let intervals = pts.chunks(2).map(|c| (c[0], c[1])).filter(|c| c.0 < c.1).collect();
        BorelSetSpec { intervals }
    }
}

/// (1/φ(w))·P(Z ∈ A, Z > w) − Nh·Q(w)/φ(w) for w ≥ 0.
fn right_tail_form(set: &BorelSetSpec, nh: f64, w: f64) -> f64 {
    let e = |t: f64| -> f64 {
        if t == f64::INFINITY {
            0.0
        } else {
            mills_ratio(t) * (0.5 * (w - t) * (w + t)).exp()
        }
    };
    let mut s = 0.0;
    for &(lo, hi) in set.intervals() {
        if hi <= w {
            continue;
        }
        s += e(lo.max(w)) - e(hi);
    }
    s - nh * mills_ratio(w)
}

/// The Stein solution for 1_A, tabulated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinSolution {
    pub set: BorelSetSpec,
    pub nh: f64,
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
    /// Largest |f′ − w·f − (1_A − Nh)| with f′ from finite differences of f.
    pub residual: f64,
    /// Largest |f′| over the grid and the one-sided limits at the endpoints of A.
    pub sup_f_prime: f64,
}

/// f_A(w).
pub fn stein_f(set: &BorelSetSpec, nh: f64, w: f64) -> f64 {
    if w >= 0.0 {
        -right_tail_form(set, nh, w)
    } else {
        // Reflect: P(Z ∈ A, Z ≤ w) = P(Z ∈ −A, Z ≥ −w) and Φ(w) = Q(−w).
        right_tail_form(&set.reflected(), nh, -w)
    }
}

/// f_A′(w) from the equation, with 1_A(w) taken as `inside`.
fn stein_f_prime(set: &BorelSetSpec, nh: f64, w: f64, inside: bool) -> f64 {
    w * stein_f(set, nh, w) + if inside { 1.0 } else { 0.0 } - nh
}

const FD_STEP: f64 = 1e-3;

/// Default grid: 4001 points on [−10, 10].
pub fn default_grid() -> Vec<f64> {
    (0..=4000).map(|i| -10.0 + i as f64 * 0.005).collect()
}

pub fn solve_stein(set: &BorelSetSpec) -> SteinSolution {
    solve_stein_on(set, &default_grid())
}

pub fn solve_stein_on(set: &BorelSetSpec, grid: &[f64]) -> SteinSolution {
    let nh = set.normal_measure();
    let f: Vec<f64> = grid.iter().map(|&w| stein_f(set, nh, w)).collect();
    let f_prime: Vec<f64> = grid
        .iter()
        .map(|&w| stein_f_prime(set, nh, w, set.contains(w)))
        .collect();
    let ends = set.endpoints();
    let h = FD_STEP;
    let mut residual: f64 = 0.0;
    for &w in grid {
        if ends.iter().any(|e| (e - w).abs() <= 2.5 * h) {
            continue;
        }
        let fd = (stein_f(set, nh, w - 2.0 * h) - 8.0 * stein_f(set, nh, w - h)
            + 8.0 * stein_f(set, nh, w + h)
            - stein_f(set, nh, w + 2.0 * h))
            / (12.0 * h);
        let rhs = w * stein_f(set, nh, w) + if set.contains(w) { 1.0 } else { 0.0 } - nh;
        residual = residual.max((fd - rhs).abs());
    }
    let mut sup = f_prime.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for &e in &ends {
        for inside in [false, true] {
            sup = sup.max(stein_f_prime(set, nh, e, inside).abs());
        }
    }
    SteinSolution { set: set.clone(), nh, grid: grid.to_vec(), f, f_prime, residual, sup_f_prime: sup }
}

/// d_{n,s} = d_TV(S_{n−1} + |s|, S_{n−1}) for sums of the standardized summand.
pub fn shift_profile(f: &MixtureDistribution, n: u64, s: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("shift profile needs n ≥ 2".into()));
    }
    let eta = standardize(f)?;
    Ok(shift_tv(&eta, n - 1, s.abs())?.value)
}

/// d_{n,·} tabulated on an even grid of |s| and read by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftProfile {
    s_max: f64,
    values: Vec<f64>,
    /// Largest tolerance among the tabulated distances, plus the largest step between
    /// neighbouring entries (the interpolation error where d is monotone across a cell).
    pub tolerance: f64,
}

impl ShiftProfile {
    /// Tabulates d_TV(law + s, law) at `points` values of s in [0, s_max].
    pub fn tabulate(law: &MixtureDistribution, s_max: f64, points: usize) -> Result<Self> {
        let points = points.max(2);
        let s_max = if s_max > 0.0 { s_max } else { 1.0 };
        let reports: Vec<_> = (0..points)
            .into_par_iter()
            .map(|j| shift_tv_of_law(law, s_max * j as f64 / (points - 1) as f64))
            .collect::<Result<_>>()?;
        let values: Vec<f64> = reports.iter().map(|r| r.value).collect();
        let step = values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        Ok(ShiftProfile {
            s_max,
            tolerance: reports.iter().map(|r| r.tolerance).fold(0.0, f64::max) + step,
            values,
        })
    }

    pub fn at(&self, s: f64) -> f64 {
        let s = s.abs();
        if s >= self.s_max {
            return *self.values.last().unwrap();
        }
        let t = s / self.s_max * (self.values.len() - 1) as f64;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let fr = t - i as f64;
        self.values[i] * (1.0 - fr) + self.values[i + 1] * fr
    }

    /// ∫₀¹ d(v·u) du by 64-point Gauss–Legendre, doubling panels until the change is
    /// at most 1e−6.
    pub fn mean_on_segment(&self, v: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
        let f = |u: f64| self.at(v * u);
        let mut panels = 1;
        let mut prev = composite_gauss_legendre(&f, 0.0, 1.0, rule, panels);
        while panels < 1 << 12 {
            panels *= 2;
            let next = composite_gauss_legendre(&f, 0.0, 1.0, rule, panels);
            if (next - prev).abs() <= 1e-6 {
                return next;
            }
            prev = next;
        }
        prev
    }
}

/// Right side of Δ_n ≤ 4∫{d_{n,v} + (∫₀¹ d_{n,vu} du)·v²} dF_η(v), with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRhs {
    pub n: u64,
    pub value: f64,
    pub tolerance: f64,
}

/// Profile grid size for [`theorem_bound_rhs`].
pub const PROFILE_POINTS: usize = 512;

pub fn theorem_bound_rhs(f: &MixtureDistribution, n: u64) -> Result<BoundRhs> {
    if n < 2 {
        return Err(Error::InvalidParameter("the bound needs n ≥ 2".into()));
    }
    if moments(f).variance <= 0.0 {
        // Every nonzero shift of a point mass is at distance 1; nothing to integrate.
        return Err(Error::InvalidParameter("cannot standardize a degenerate law".into()));
    }
    let eta = standardize(f)?;
    let s = self_convolve(&eta, n - 1)?;
    let mut s_max: f64 = 0.0;
    for &(x, _) in eta.atomic.atoms() {
        s_max = s_max.max(x.abs());
    }
    if eta.density.len() >= 2 {
        s_max = s_max.max(eta.density.origin().abs()).max(eta.density.end().abs());
    }
    let profile = ShiftProfile::tabulate(&s, s_max, PROFILE_POINTS)?;
    let rule = gauss_legendre(64);
    let integrand = |v: f64| profile.at(v) + profile.mean_on_segment(v, &rule) * v * v;
    let atoms: f64 = eta.atomic.atoms().iter().map(|&(v, p)| p * integrand(v)).sum();
    let dens = if eta.density.len() >= 2 { eta.density.integrate_with(integrand) } else { 0.0 };
    // An error ε in d moves the integrand by at most ε(1 + v²), and E v² = 1.
    let tolerance = 4.0 * 2.0 * (profile.tolerance + eta.error_budget);
    Ok(BoundRhs { n, value: 4.0 * (atoms + dens), tolerance })
}

/// Per-set summary for a batch of random sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinCheckRow {
    pub index: usize,
    pub intervals: usize,
    pub nh: f64,
    pub sup_f_prime: f64,
    pub residual: f64,
}

/// Solves for `count` random interval unions drawn from a seeded stream.
pub fn random_stein_checks(seed: u64, count: usize) -> Vec<SteinCheckRow> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sets: Vec<BorelSetSpec> = (0..count).map(|_| BorelSetSpec::random(&mut rng)).collect();
    sets.par_iter()
        .enumerate()
        .map(|(index, set)| {
            let sol = solve_stein(set);
            SteinCheckRow {
                index,
                intervals: set.intervals().len(),
                nh: sol.nh,
                sup_f_prime: sol.sup_f_prime,
                residual: sol.residual,
            }
        })
        .collect()
}
