//! Built-in families and the JSON distribution spec.
//!
//! ```json
//! {"family": "uniform", "params": {"lo": 0, "hi": 1}}
//! {"family": "mixture", "params": {"components": [{"weight": 0.5, "spec": {...}}]}}
//! ```

use crate::dist::{AtomicMeasure, GridDensity, MixtureDistribution};
use crate::error::{Error, Result};
use crate::special::{normal_interval_mass, std_normal_pdf};
use serde::{Deserialize, Serialize};

/// Default number of grid intervals used to sample an absolutely-continuous family.
pub const DEFAULT_INTERVALS: usize = 4096;

/// Fewest intervals a sampled family may use.
pub const MIN_INTERVALS: usize = 64;

/// Half-width, in standard deviations, of the window a Gaussian is sampled on.
pub const GAUSSIAN_WINDOW_SIGMAS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingOptions {
    /// Grid intervals across the support of each sampled family.
    pub intervals: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { intervals: DEFAULT_INTERVALS }
    }
}

impl SamplingOptions {
    pub fn with_intervals(intervals: usize) -> Self {
        SamplingOptions { intervals }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub spec: FamilySpec,
}

/// A distribution described by family name and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum FamilySpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Tent density of half-width `a` centered at `center`.
    Triangular {
        a: f64,
        #[serde(default)]
        center: f64,
    },
    /// Normal law. With `truncate` set, the law is conditioned on `|X − mean| ≤ truncate·sd`.
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncate: Option<f64>,
    },
    Bernoulli {
        p: f64,
    },
    AtomicList {
        atoms: Vec<(f64, f64)>,
    },
    Grid {
        origin: f64,
        step: f64,
        values: Vec<f64>,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
}

fn one() -> f64 {
    1.0
}

impl FamilySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn build(&self) -> Result<MixtureDistribution> {
        make_family(self, SamplingOptions::default())
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn check_intervals(opts: SamplingOptions) -> Result<usize> {
    if opts.intervals < MIN_INTERVALS {
        return Err(Error::GridTooCoarse { points: opts.intervals, min: MIN_INTERVALS });
    }
    Ok(opts.intervals)
}

/// Samples `pdf` on `intervals` equal steps over `[lo, hi]`.
fn sample(lo: f64, hi: f64, intervals: usize, pdf: impl Fn(f64) -> f64) -> GridDensity {
    let step = (hi - lo) / intervals as f64;
    let values = (0..=intervals).map(|i| pdf(lo + i as f64 * step).max(0.0)).collect();
    GridDensity::from_parts_unchecked(lo, step, values)
}

pub fn uniform(lo: f64, hi: f64, opts: SamplingOptions) -> Result<MixtureDistribution> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(invalid(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
    }
    let n = check_intervals(opts)?;
    let density = sample(lo, hi, n, |_| 1.0 / (hi - lo));
    Ok(MixtureDistribution::new(AtomicMeasure::empty(), density))
}

/// κ_a(x) = (1 − |x|/a)/a on |x| ≤ a.
pub fn triangular_pdf(a: f64, x: f64) -> f64 {
    if x.abs() <= a {
        (1.0 - x.abs() / a) / a
    } else {
        0.0
    }
}

pub fn triangular(a: f64, center: f64, opts: SamplingOptions) -> Result<MixtureDistribution> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("triangular half-width must be positive, got {a}")));
    }
    let n = check_intervals(opts)?;
    // An even interval count puts a node on the peak.
    let n = n + n % 2;
    let density = sample(center - a, center + a, n, |x| triangular_pdf(a, x - center));
    Ok(MixtureDistribution::new(AtomicMeasure::empty(), density))
}

pub fn gaussian(
    mean: f64,
    sd: f64,
    truncate: Option<f64>,
    opts: SamplingOptions,
) -> Result<MixtureDistribution> {
    if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
        return Err(invalid(format!("gaussian needs finite mean and sd > 0, got ({mean}, {sd})")));
    }
    if let Some(t) = truncate {
        if !(t > 0.0) {
            return Err(invalid(format!("truncation must be positive, got {t}")));
        }
    }
    let n = check_intervals(opts)?;
    let n = n + n % 2;
    let k = truncate.unwrap_or(GAUSSIAN_WINDOW_SIGMAS);
    let raw = sample(mean - k * sd, mean + k * sd, n, |x| std_normal_pdf((x - mean) / sd) / sd);
    let density = raw.scaled(1.0 / raw.mass());
    let dist = MixtureDistribution::new(AtomicMeasure::empty(), density);
    // An untruncated request is represented on a finite window; the cut tails are error.
    Ok(match truncate {
        Some(_) => dist,
        None => dist.with_budget(1.0 - normal_interval_mass(-k, k, 0.0, 1.0)),
    })
}

pub fn bernoulli(p: f64) -> Result<MixtureDistribution> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("bernoulli p must lie in [0, 1], got {p}")));
    }
    let (atomic, pruned) = AtomicMeasure::normalize(vec![(0.0, 1.0 - p), (1.0, p)])?;
    Ok(MixtureDistribution::new(atomic, GridDensity::empty()).with_budget(pruned))
}

pub fn atomic_list(atoms: &[(f64, f64)]) -> Result<MixtureDistribution> {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if atoms.is_empty() || !(total > 0.0) {
        return Err(invalid("atomic list needs positive total mass"));
    }
    let (atomic, pruned) =
        AtomicMeasure::normalize(atoms.iter().map(|&(x, p)| (x, p / total)).collect())?;
    Ok(MixtureDistribution::new(atomic, GridDensity::empty()).with_budget(pruned))
}

pub fn grid(origin: f64, step: f64, values: Vec<f64>) -> Result<MixtureDistribution> {
    let g = GridDensity::new(origin, step, values)?;
    if !(g.mass() > 0.0) {
        return Err(invalid("grid density has zero mass"));
    }
    let g = g.scaled(1.0 / g.mass());
    Ok(MixtureDistribution::new(AtomicMeasure::empty(), g))
}

/// Weighted sum of component laws. Densities on different grids are resampled onto the
/// finest grid by linear interpolation, with the interpolation error charged.
pub fn mixture(parts: &[(f64, MixtureDistribution)]) -> Result<MixtureDistribution> {
    if parts.is_empty() {
        return Err(invalid("mixture needs at least one component"));
    }
    if parts.iter().any(|(w, _)| !(*w >= 0.0 && w.is_finite())) {
        return Err(invalid("mixture weights must be finite and nonnegative"));
    }
    let wsum: f64 = parts.iter().map(|p| p.0).sum();
    if !(wsum > 0.0) {
        return Err(invalid("mixture weights sum to zero"));
    }
    let mut atoms = Vec::new();
    let mut budget = 0.0;
    for (w, d) in parts {
        let w = w / wsum;
        atoms.extend(d.atomic.atoms().iter().map(|&(x, p)| (x, w * p)));
        budget += w * d.error_budget;
    }
    let (atomic, pruned) = AtomicMeasure::normalize(atoms)?;
    budget += pruned;

    let dens: Vec<(f64, &GridDensity)> = parts
        .iter()
        .filter(|(w, d)| *w > 0.0 && !d.density.values().is_empty())
        .map(|(w, d)| (w / wsum, &d.density))
        .collect();
    let density = match dens.len() {
        0 => GridDensity::empty(),
        1 => dens[0].1.scaled(dens[0].0),
        _ => {
            let (origin, step, len) = common_grid(dens.iter().map(|d| d.1));
            let mut values = vec![0.0; len];
            for (w, g) in &dens {
                let (resampled, charge) = resample_onto(g, origin, step, len);
                budget += w * charge;
                for (v, r) in values.iter_mut().zip(resampled) {
                    *v += w * r;
                }
            }
            GridDensity::from_parts_unchecked(origin, step, values)
        }
    };
    Ok(MixtureDistribution { atomic, density, error_budget: budget })
}

/// Finest step, anchored at the finest grid's origin, covering every input grid.
pub(crate) fn common_grid<'a>(grids: impl Iterator<Item = &'a GridDensity>) -> (f64, f64, usize) {
    let grids: Vec<&GridDensity> = grids.collect();
    let finest = grids
        .iter()
        .min_by(|a, b| a.step().total_cmp(&b.step()))
        .expect("at least one grid");
    let step = finest.step();
    let lo = grids.iter().map(|g| g.origin()).fold(f64::INFINITY, f64::min);
    let hi = grids.iter().map(|g| g.end()).fold(f64::NEG_INFINITY, f64::max);
    let back = ((finest.origin() - lo) / step - 1e-9).ceil().max(0.0);
    let origin = finest.origin() - back * step;
    let len = ((hi - origin) / step - 1e-9).ceil() as usize + 1;
    (origin, step, len)
}

/// Values of `g` at the nodes of another grid, with an L1 error estimate for the move.
///
/// A nonzero end value of `g` that falls strictly inside the new grid is a jump the new
/// grid can only draw as a one-step ramp; that ramp is charged too.
pub(crate) fn resample_onto(g: &GridDensity, origin: f64, step: f64, len: usize) -> (Vec<f64>, f64) {
    let ratio = g.step() / step;
    let offset = (g.origin() - origin) / step;
    let on_lattice = (ratio - ratio.round()).abs() < 1e-9 && (offset - offset.round()).abs() < 1e-9;
    let values: Vec<f64> = (0..len).map(|i| g.value_at(origin + i as f64 * step)).collect();
    let mut charge = 0.0;
    if !(on_lattice && ratio.round() == 1.0) {
        charge += g.interpolation_error_estimate();
    }
    let v = g.values();
    let end = origin + (len - 1) as f64 * step;
    let ramp = if on_lattice { 0.5 * step } else { step };
    if g.origin() > origin + 1e-9 * step {
        charge += ramp * v[0].abs();
    }
    if g.end() < end - 1e-9 * step {
        charge += ramp * v[v.len() - 1].abs();
    }
    (values, charge)
}

/// Builds the law a [`FamilySpec`] describes.
pub fn make_family(spec: &FamilySpec, opts: SamplingOptions) -> Result<MixtureDistribution> {
    match spec {
        FamilySpec::Uniform { lo, hi } => uniform(*lo, *hi, opts),
        FamilySpec::Triangular { a, center } => triangular(*a, *center, opts),
        FamilySpec::Gaussian { mean, sd, truncate } => gaussian(*mean, *sd, *truncate, opts),
        FamilySpec::Bernoulli { p } => bernoulli(*p),
        FamilySpec::AtomicList { atoms } => atomic_list(atoms),
        FamilySpec::Grid { origin, step, values } => grid(*origin, *step, values.clone()),
        FamilySpec::Mixture { components } => {
            let parts = components
                .iter()
                .map(|c| Ok((c.weight, make_family(&c.spec, opts)?)))
                .collect::<Result<Vec<_>>>()?;
            mixture(&parts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{affine, classify, moments, Classification};

    fn opts() -> SamplingOptions {
        SamplingOptions::default()
    }

    #[test]
    fn triangular_peak_and_support() {
        let t = triangular(1.0, 0.0, opts()).unwrap();
        let d = &t.density;
        assert_eq!(d.origin(), -1.0);
        assert_eq!(d.end(), 1.0);
        assert_eq!(d.value_at(0.0), 1.0);
        assert!((t.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bernoulli_atoms() {
        let b = bernoulli(0.5).unwrap();
        assert_eq!(b.atomic.atoms(), &[(0.0, 0.5), (1.0, 0.5)]);
        assert!(b.density.values().is_empty());
        assert!(bernoulli(1.5).is_err());
    }

    #[test]
    fn uniform_is_flat_with_unit_mass() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        assert!(u.density.values().iter().all(|&v| v == 1.0));
        assert!((u.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_and_coarse_grids() {
        assert!(matches!(triangular(0.0, 0.0, opts()), Err(Error::InvalidParameter(_))));
        assert!(matches!(uniform(1.0, 1.0, opts()), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            uniform(0.0, 1.0, SamplingOptions::with_intervals(10)),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn gaussian_budget_holds_only_the_cut_tails() {
        let g = gaussian(0.0, 1.0, None, opts()).unwrap();
        assert!(g.error_budget < 1e-30);
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        let m = moments(&g);
        assert!(m.mean.abs() < 1e-14);
        assert!((m.variance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_of_atom_and_uniform() {
        let spec = FamilySpec::from_json(
            r#"{"family":"mixture","params":{"components":[
                {"weight":0.3,"spec":{"family":"atomic_list","params":{"atoms":[[0,1]]}}},
                {"weight":0.7,"spec":{"family":"uniform","params":{"lo":0,"hi":1}}}]}}"#,
        )
        .unwrap();
        let m = spec.build().unwrap();
        assert_eq!(classify(&m), Classification::NonSingular);
        assert!((m.ac_weight() - 0.7).abs() < 1e-12);
        assert!((m.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mixture_resamples_mismatched_grids() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        let t = triangular(1.0, 0.0, opts()).unwrap();
        let m = mixture(&[(0.5, u), (0.5, t)]).unwrap();
        assert_eq!(m.density.step(), 1.0 / 4096.0);
        // The uniform's jump at 1 lands inside the triangular's grid.
        assert!(m.error_budget > 0.0);
        assert!((m.total_mass() - 1.0).abs() <= m.error_budget + 1e-12);
    }

    #[test]
    fn affine_of_triangular_is_wider_triangular() {
        let t1 = triangular(1.0, 0.0, opts()).unwrap();
        let t2 = triangular(2.0, 0.0, opts()).unwrap();
        let scaled = affine(&t1, 2.0, 0.0).unwrap();
        assert_eq!(scaled.density.origin(), t2.density.origin());
        assert_eq!(scaled.density.step(), t2.density.step());
        for (a, b) in scaled.density.values().iter().zip(t2.density.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = FamilySpec::Gaussian { mean: 0.0, sd: 1.0, truncate: Some(3.0) };
        assert_eq!(FamilySpec::from_json(&spec.to_json()).unwrap(), spec);
        let parsed = FamilySpec::from_json(r#"{"family":"uniform","params":{"lo":0,"hi":1}}"#).unwrap();
        assert_eq!(parsed, FamilySpec::Uniform { lo: 0.0, hi: 1.0 });
        assert!(matches!(FamilySpec::from_json(r#"{"family":"cauchy"}"#), Err(Error::Spec(_))));
    }
}
