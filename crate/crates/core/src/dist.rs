//! One-dimensional laws as an atomic part plus a sampled absolutely-continuous part.
//!
//! A [`GridDensity`] stores density samples on a uniform grid. Between nodes the density
//! is read by linear interpolation; outside `[origin, end]` it is zero, so the end nodes
//! may carry a jump. Integrals over the grid use the trapezoid rule.
//!
//! Only atomic singular parts are representable. Singular-continuous laws (Cantor type)
//! have no encoding here.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Atoms closer than this are the same location.
pub const ATOM_MATCH_TOL: f64 = 1e-12;

/// Atoms lighter than this are dropped; the dropped mass goes to the error budget.
pub const ATOM_PRUNE_THRESHOLD: f64 = 1e-15;

/// Sampled density on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    origin: f64,
    step: f64,
    values: Vec<f64>,
    mass: f64,
}

/// Trapezoid sum with unit step.
pub(crate) fn trapezoid(values: &[f64]) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]),
    }
}

impl GridDensity {
    pub fn new(origin: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        if values.is_empty() {
            return Err(Error::InvalidParameter("grid density needs at least one value".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("density value {v} at index {i}")));
        }
        let mass = step * trapezoid(&values);
        Ok(GridDensity { origin, step, values, mass })
    }

    /// The zero measure.
    pub fn empty() -> Self {
        GridDensity { origin: 0.0, step: 1.0, values: Vec::new(), mass: 0.0 }
    }

    pub(crate) fn from_parts_unchecked(origin: f64, step: f64, values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= 0.0 && v.is_finite()));
        let mass = step * trapezoid(&values);
        GridDensity { origin, step, values, mass }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty() || self.mass == 0.0 && self.values.iter().all(|v| *v == 0.0)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Location of the last node.
    pub fn end(&self) -> f64 {
        self.node(self.values.len().saturating_sub(1))
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.node(i))
    }

    /// Linear interpolation of the samples; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        let t = (x - self.origin) / self.step;
        let eps = 1e-9;
        if t < -eps || t > (n - 1) as f64 + eps {
            return 0.0;
        }
        let t = t.clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n.saturating_sub(2));
        if n == 1 {
            return self.values[0];
        }
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn scaled(&self, factor: f64) -> GridDensity {
        debug_assert!(factor >= 0.0);
        GridDensity::from_parts_unchecked(
            self.origin,
            self.step,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Trapezoid integral of `g(x)·f(x)` over the grid.
    pub fn integrate_with<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            s += w * v * g(self.node(i));
        }
        s * self.step
    }

    /// Trapezoid mass of nodes strictly outside `[lo, hi]`, and the density restricted to it.
    pub(crate) fn truncate(&self, lo: f64, hi: f64) -> (GridDensity, f64) {
        let n = self.values.len();
        if n == 0 || (lo <= self.origin && hi >= self.end()) {
            return (self.clone(), 0.0);
        }
        let first = ((lo - self.origin) / self.step).floor().max(0.0) as usize;
        let last = (((hi - self.origin) / self.step).ceil() as usize).min(n - 1);
        if first >= last {
            return (GridDensity::empty(), self.mass);
        }
        let kept = GridDensity::from_parts_unchecked(
            self.node(first),
            self.step,
            self.values[first..=last].to_vec(),
        );
        let dropped = (self.mass - kept.mass).max(0.0);
        (kept, dropped)
    }

    /// L1 bound on the error of replacing the density by its piecewise-linear interpolant,
    /// estimated from second differences.
    pub fn interpolation_error_estimate(&self) -> f64 {
        let v = &self.values;
        if v.len() < 3 {
            return 0.0;
        }
        let curvature: f64 = v.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).sum();
        curvature * self.step / 8.0
    }
}

/// Finite list of point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
    total: f64,
}

impl AtomicMeasure {
    pub fn empty() -> Self {
        AtomicMeasure::default()
    }

    /// Sorts, merges coincident locations and prunes tiny masses.
    ///
    /// Returns the measure and the pruned mass.
    pub fn normalize(mut raw: Vec<(f64, f64)>) -> Result<(Self, f64)> {
        for &(x, p) in &raw {
            if !x.is_finite() || !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidParameter(format!("bad atom ({x}, {p})")));
            }
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (x, p) in raw {
            match merged.last_mut() {
                Some(last) if (x - last.0).abs() <= ATOM_MATCH_TOL => last.1 += p,
                _ => merged.push((x, p)),
            }
        }
        let mut pruned = 0.0;
        merged.retain(|&(_, p)| {
            if p <= ATOM_PRUNE_THRESHOLD {
                pruned += p;
                false
            } else {
                true
            }
        });
        let total = merged.iter().map(|a| a.1).sum();
        Ok((AtomicMeasure { atoms: merged, total }, pruned))
    }

    pub fn single(x: f64) -> Self {
        AtomicMeasure { atoms: vec![(x, 1.0)], total: 1.0 }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
    pub fn total(&self) -> f64 {
        self.total
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    /// Mass at `x`, matching locations within [`ATOM_MATCH_TOL`].
    pub fn mass_at(&self, x: f64) -> f64 {
        let i = self.atoms.partition_point(|a| a.0 < x - ATOM_MATCH_TOL);
        match self.atoms.get(i) {
            Some(&(y, p)) if (y - x).abs() <= ATOM_MATCH_TOL => p,
            _ => 0.0,
        }
    }
}

/// Atomic part plus absolutely-continuous part. Masses live inside the parts.
///
/// `error_budget` is the L1 mass by which this representation may differ from the law
/// it stands for (truncation, pruning, clipping, resampling and discretization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDistribution {
    pub atomic: AtomicMeasure,
    pub density: GridDensity,
    pub error_budget: f64,
}

/// Whether a law has a nonzero absolutely-continuous component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Singular,
    NonSingular,
}

/// Mean, variance and central absolute third moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    /// E|X − mean|³; `None` when it does not evaluate to a finite number.
    pub abs_third: Option<f64>,
}

impl MomentSummary {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl MixtureDistribution {
    pub fn new(atomic: AtomicMeasure, density: GridDensity) -> Self {
        MixtureDistribution { atomic, density, error_budget: 0.0 }
    }

    pub fn atom(x: f64) -> Self {
        MixtureDistribution::new(AtomicMeasure::single(x), GridDensity::empty())
    }

    pub fn with_budget(mut self, extra: f64) -> Self {
        self.error_budget += extra.max(0.0);
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.atomic.total() + self.density.mass()
    }

    /// Weight of the absolutely-continuous part.
    pub fn ac_weight(&self) -> f64 {
        self.density.mass()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.total_mass() - 1.0).abs() <= tol
    }

    pub fn classify(&self) -> Classification {
        classify(self)
    }

    pub fn moments(&self) -> MomentSummary {
        moments(self)
    }
}

pub fn classify(f: &MixtureDistribution) -> Classification {
    if f.density.mass() > 0.0 {
        Classification::NonSingular
    } else {
        Classification::Singular
    }
}

/// Moments by exact atom summation plus trapezoid quadrature, normalized by total mass.
pub fn moments(f: &MixtureDistribution) -> MomentSummary {
    let total = f.total_mass();
    if total <= 0.0 {
        return MomentSummary { mean: 0.0, variance: 0.0, abs_third: Some(0.0) };
    }
    let atom_sum = |g: &dyn Fn(f64) -> f64| -> f64 {
        f.atomic.atoms().iter().map(|&(x, p)| p * g(x)).sum()
    };
    let mean = (atom_sum(&|x| x) + f.density.integrate_with(|x| x)) / total;
    let variance = ((atom_sum(&|x| (x - mean).powi(2))
        + f.density.integrate_with(|x| (x - mean).powi(2)))
        / total)
        .max(0.0);
    let third = (atom_sum(&|x| (x - mean).abs().powi(3))
        + f.density.integrate_with(|x| (x - mean).abs().powi(3)))
        / total;
    MomentSummary {
        mean,
        variance,
        abs_third: third.is_finite().then_some(third.max(0.0)),
    }
}

/// Law of `scale·X + shift`.
pub fn affine(f: &MixtureDistribution, scale: f64, shift: f64) -> Result<MixtureDistribution> {
    if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
        return Err(Error::ZeroScale);
    }
    let atoms: Vec<(f64, f64)> = f
        .atomic
        .atoms()
        .iter()
        .map(|&(x, p)| (scale * x + shift, p))
        .collect();
    let (atomic, pruned) = AtomicMeasure::normalize(atoms)?;
    let d = &f.density;
    let density = if d.values().is_empty() {
        GridDensity::empty()
    } else {
        let inv = 1.0 / scale.abs();
        if scale > 0.0 {
            GridDensity::from_parts_unchecked(
                scale * d.origin() + shift,
                scale * d.step(),
                d.values().iter().map(|v| v * inv).collect(),
            )
        } else {
            GridDensity::from_parts_unchecked(
                scale * d.end() + shift,
                -scale * d.step(),
                d.values().iter().rev().map(|v| v * inv).collect(),
            )
        }
    };
    Ok(MixtureDistribution { atomic, density, error_budget: f.error_budget + pruned })
}

/// Rescale so the law has mean 0 and variance 1.
pub fn standardize(f: &MixtureDistribution) -> Result<MixtureDistribution> {
    let m = moments(f);
    if m.variance <= 0.0 {
        return Err(Error::InvalidParameter("cannot standardize a degenerate law".into()));
    }
    let sd = m.variance.sqrt();
    affine(f, 1.0 / sd, -m.mean / sd)
}
