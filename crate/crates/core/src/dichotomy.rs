//! The Δ_n series of a summand law, which branch of the dichotomy it falls in, and the
//! empirical rate on the converging branch.

use crate::dist::MixtureDistribution;
use crate::error::{Error, Result};
use crate::tvmetric::{tv_to_matched_normal, DistanceReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Δ_n at or above this counts as 1.
pub const TV_ONE: f64 = 1.0 - 1e-9;
/// Smallest n values left out of the rate fit as pre-asymptotic.
pub const FIT_SKIP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    DegenerateTvOne,
    Converging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub n_values: Vec<u64>,
    pub deltas: Vec<f64>,
    /// n values the slope was fitted on.
    pub fit_window: Vec<u64>,
    /// Least-squares slope of log Δ_n against log n; `None` on the degenerate branch.
    pub slope: Option<f64>,
    /// max Δ_n·√n over the fit window (over all points on the degenerate branch).
    pub c_hat: f64,
    pub branch: Branch,
}

/// Default geometric grid {4, 8, …, 1024}.
pub fn default_n_values() -> Vec<u64> {
    (2..=10).map(|k| 1u64 << k).collect()
}

/// Δ_n for each n, computed in parallel.
pub fn delta_series(f: &MixtureDistribution, n_values: &[u64]) -> Result<Vec<DistanceReport>> {
    if n_values.is_empty() {
        return Err(Error::InvalidParameter("n list is empty".into()));
    }
    if n_values[0] == 0 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("n list must be positive and strictly increasing".into()));
    }
    n_values.par_iter().map(|&n| tv_to_matched_normal(f, n)).collect()
}

/// Fits the rate on `(n, Δ_n, tolerance)` points.
pub fn fit_rate(series: &[(u64, f64, f64)]) -> Result<RateFit> {
    if series.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidParameter("n values must be strictly increasing".into()));
    }
    let n_values: Vec<u64> = series.iter().map(|p| p.0).collect();
    let deltas: Vec<f64> = series.iter().map(|p| p.1).collect();
    let root_scaled = |p: &(u64, f64, f64)| p.1 * (p.0 as f64).sqrt();
    let ones = series.iter().filter(|p| p.1 >= TV_ONE).count();
    if !series.is_empty() && ones == series.len() {
        return Ok(RateFit {
            c_hat: series.iter().map(root_scaled).fold(0.0, f64::max),
            n_values,
            deltas,
            fit_window: Vec::new(),
            slope: None,
            branch: Branch::DegenerateTvOne,
        });
    }
    if ones > 0 && series.iter().any(|p| p.1 < 1.0 - p.2 && p.1 < TV_ONE) {
        return Err(Error::MixedBranch);
    }
    let below = series.iter().filter(|p| p.1 < 1.0 - 1e-6).count();
    if below < 4 {
        return Err(Error::InsufficientPoints { have: below, need: 4 });
    }
    let window: Vec<&(u64, f64, f64)> = series
        .iter()
        .skip(FIT_SKIP)
        .filter(|p| p.1 > 10.0 * p.2 && p.1 > 0.0)
        .collect();
    if window.len() < 2 {
        return Err(Error::InsufficientPoints { have: window.len(), need: 2 });
    }
    let xs: Vec<f64> = window.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(RateFit {
        c_hat: window.iter().map(|p| root_scaled(p)).fold(0.0, f64::max),
        fit_window: window.iter().map(|p| p.0).collect(),
        n_values,
        deltas,
        slope: Some(sxy / sxx),
        branch: Branch::Converging,
    })
}

/// Runs the series and the fit together.
pub fn analyze(f: &MixtureDistribution, n_values: &[u64]) -> Result<RateFit> {
    let reports = delta_series(f, n_values)?;
    let pts: Vec<(u64, f64, f64)> =
        n_values.iter().zip(&reports).map(|(&n, r)| (n, r.value, r.tolerance)).collect();
    fit_rate(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::classify;
    use crate::dist::Classification;
    use crate::family::{bernoulli, gaussian, mixture, triangular, uniform, SamplingOptions};

    #[test]
    fn exact_power_law() {
        let pts: Vec<(u64, f64, f64)> =
            default_n_values().into_iter().map(|n| (n, (n as f64).powf(-0.5), 0.0)).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope.unwrap() + 0.5).abs() < 1e-12);
        assert!((fit.c_hat - 1.0).abs() < 1e-12);
        assert_eq!(fit.fit_window.len(), pts.len() - FIT_SKIP);
        assert_eq!(fit.branch, Branch::Converging);
    }

    #[test]
    fn all_ones_is_degenerate() {
        let pts: Vec<(u64, f64, f64)> = (1..=6).map(|n| (n, 1.0, 0.0)).collect();
        let fit = fit_rate(&pts).unwrap();
        assert_eq!(fit.branch, Branch::DegenerateTvOne);
        assert!(fit.slope.is_none());
    }

    #[test]
    fn mixed_and_short_series_are_errors() {
        let pts = [(1, 1.0, 0.0), (2, 0.5, 0.0), (4, 0.3, 0.0), (8, 0.2, 0.0), (16, 0.1, 0.0)];
        assert_eq!(fit_rate(&pts).unwrap_err(), Error::MixedBranch);
        let pts = [(1, 0.5, 0.0), (2, 0.4, 0.0), (4, 0.3, 0.0)];
        assert!(matches!(fit_rate(&pts), Err(Error::InsufficientPoints { .. })));
        // Everything at the noise floor leaves nothing to fit.
        let pts: Vec<(u64, f64, f64)> = (1..=8).map(|n| (n, 1e-12, 1e-10)).collect();
        assert!(matches!(fit_rate(&pts), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn branch_follows_classification() {
        let opts = SamplingOptions::with_intervals(512);
        let ns = [1u64, 2, 4, 8, 16, 32];
        let laws = [
            bernoulli(0.5).unwrap(),
            MixtureDistribution::atom(2.0),
            uniform(0.0, 1.0, opts).unwrap(),
            triangular(1.0, 0.0, opts).unwrap(),
            mixture(&[(0.5, MixtureDistribution::atom(0.0)), (0.5, uniform(0.0, 1.0, opts).unwrap())]).unwrap(),
        ];
        for f in &laws {
            let fit = analyze(f, &ns).unwrap();
            let singular = classify(f) == Classification::Singular;
            assert_eq!(fit.branch == Branch::DegenerateTvOne, singular, "{:?}", fit);
        }
    }

    #[test]
    fn series_edge_cases() {
        let g = gaussian(0.0, 1.0, None, SamplingOptions::default()).unwrap();
        for r in delta_series(&g, &[2, 8]).unwrap() {
            assert!(r.value <= 1e-6);
        }
        let b = bernoulli(0.5).unwrap();
        assert!(delta_series(&b, &[1, 3, 9]).unwrap().iter().all(|r| r.value == 1.0));
        assert!(delta_series(&b, &[]).is_err());
        assert!(delta_series(&b, &[4, 2]).is_err());
    }

    #[test]
    fn uniform_series_decreases() {
        let u = uniform(0.0, 1.0, SamplingOptions::with_intervals(1024)).unwrap();
        let ns = [4u64, 8, 16, 32, 64];
        let r = delta_series(&u, &ns).unwrap();
        for w in r.windows(2) {
            assert!(w[1].value < w[0].value);
        }
        let fit = analyze(&u, &ns).unwrap();
        assert_eq!(fit.branch, Branch::Converging);
        assert!(fit.slope.unwrap() < -0.45);
    }

    #[test]
    fn atom_weight_floor() {
        let opts = SamplingOptions::with_intervals(512);
        let alpha = 0.5;
        let f = mixture(&[(1.0 - alpha, MixtureDistribution::atom(0.0)), (alpha, uniform(0.0, 1.0, opts).unwrap())]).unwrap();
        let ns = [1u64, 2, 4, 8];
        for (n, r) in ns.iter().zip(delta_series(&f, &ns).unwrap()) {
            assert!(r.value >= (1.0 - alpha).powi(*n as i32) - r.tolerance, "n={n}");
        }
    }
}
