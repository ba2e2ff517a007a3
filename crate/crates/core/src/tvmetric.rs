//! Total-variation and Kolmogorov distances between mixture laws.
//!
//! Grid densities are read as piecewise-linear functions, zero outside their grid. Two
//! such functions are compared exactly: every node of either grid and every atom becomes
//! a breakpoint, and on each panel the difference is linear, so `∫|f − g|` and the CDF
//! gap have closed forms. Normal laws are evaluated analytically at the breakpoints.

use crate::convolve::self_convolve;
use crate::dist::{affine, moments, GridDensity, MixtureDistribution, ATOM_MATCH_TOL};
use crate::error::Result;
use crate::special::{normal_interval_mass, normal_pdf, std_normal_cdf};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Tv,
    Kolmogorov,
}

/// A distance with the numerical slack it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub value: f64,
    pub tolerance: f64,
    pub kind: DistanceKind,
}

impl DistanceReport {
    fn new(value: f64, tolerance: f64, kind: DistanceKind) -> Self {
        DistanceReport { value: value.clamp(0.0, 1.0), tolerance: tolerance.max(0.0), kind }
    }

    /// Largest value consistent with the report.
    pub fn upper(&self) -> f64 {
        self.value + self.tolerance
    }

    /// Smallest value consistent with the report.
    pub fn lower(&self) -> f64 {
        self.value - self.tolerance
    }
}

/// Value of `d` on the panel `[x, x + ...]` whose midpoint is `mid`, approached from
/// inside the panel. Zero when the panel lies outside the grid.
fn panel_value(d: &GridDensity, x: f64, mid: f64) -> f64 {
    let n = d.len();
    if n < 2 || mid < d.origin() || mid > d.end() {
        return 0.0;
    }
    let t = ((x - d.origin()) / d.step()).clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n - 2);
    let fr = t - i as f64;
    let v = d.values();
    v[i] * (1.0 - fr) + v[i + 1] * fr
}

/// ∫ |linear| over a panel of width `w` with end values `a`, `b`.
fn abs_linear(a: f64, b: f64, w: f64) -> f64 {
    if (a >= 0.0) == (b >= 0.0) {
        0.5 * (a.abs() + b.abs()) * w
    } else {
        0.5 * (a * a + b * b) / (a.abs() + b.abs()) * w
    }
}

/// Sorted positions with near-duplicates (within the atom tolerance) merged.
fn merge_points(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(xs.len());
    for x in xs {
        match out.last() {
            Some(&last) if x - last <= ATOM_MATCH_TOL => {}
            _ => out.push(x),
        }
    }
    out
}

fn grid_points(d: &GridDensity, into: &mut Vec<f64>) {
    if d.len() >= 2 {
        into.extend(d.nodes());
    }
}

/// One side of a comparison: a grid density or a normal law given analytically.
#[derive(Clone, Copy)]
enum Side<'a> {
    Grid(&'a GridDensity),
    Normal { mean: f64, sd: f64 },
}

impl Side<'_> {
    fn value(&self, x: f64, mid: f64) -> f64 {
        match *self {
            Side::Grid(d) => panel_value(d, x, mid),
            Side::Normal { mean, sd } => normal_pdf(x, mean, sd),
        }
    }
}

/// Panel end values (right of the left end, left of the right end) of `f − g`.
fn panel_diffs(f: Side, g: Side, x0: f64, x1: f64) -> (f64, f64) {
    let mid = 0.5 * (x0 + x1);
    (f.value(x0, mid) - g.value(x0, mid), f.value(x1, mid) - g.value(x1, mid))
}

/// ∫|f − g| over consecutive panels of `points`, and the same on a grid with every
/// other interior point dropped (points in `keep` are never dropped).
fn l1_over(points: &[f64], keep: &[f64], f: Side, g: Side) -> (f64, f64) {
    if points.len() < 2 {
        return (0.0, 0.0);
    }
    let fine: f64 = points
        .windows(2)
        .map(|w| {
            let (a, b) = panel_diffs(f, g, w[0], w[1]);
            abs_linear(a, b, w[1] - w[0])
        })
        .sum();
    let last = points.len() - 1;
    let mut coarse_pts = Vec::with_capacity(points.len() / 2 + keep.len() + 2);
    let mut k = 0;
    for (i, &x) in points.iter().enumerate() {
        while k < keep.len() && keep[k] < x - ATOM_MATCH_TOL {
            k += 1;
        }
        let kept = k < keep.len() && (keep[k] - x).abs() <= ATOM_MATCH_TOL;
        if i % 2 == 0 || i == last || kept {
            coarse_pts.push(x);
        }
    }
    let coarse: f64 = coarse_pts
        .windows(2)
        .map(|w| {
            let (a, b) = panel_diffs(f, g, w[0], w[1]);
            abs_linear(a, b, w[1] - w[0])
        })
        .sum();
    (fine, coarse)
}

/// Support ends: where a grid density may jump.
fn support_ends(d: &GridDensity, into: &mut Vec<f64>) {
    if d.len() >= 2 {
        into.push(d.origin());
        into.push(d.end());
    }
}

/// Whether both grids share one lattice of nodes (or either is empty).
fn same_lattice(f: &GridDensity, g: &GridDensity) -> bool {
    if f.len() < 2 || g.len() < 2 {
        return true;
    }
    let h = f.step();
    if ((g.step() - h) / h).abs() > 1e-12 {
        return false;
    }
    let offset = (g.origin() - f.origin()) / h;
    (offset - offset.round()).abs() < 1e-9
}

/// Σ|p_F(x) − p_G(x)| over atom locations, matching locations within the tolerance.
fn atom_l1(f: &MixtureDistribution, g: &MixtureDistribution) -> f64 {
    let (a, b) = (f.atomic.atoms(), g.atomic.atoms());
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0 - ATOM_MATCH_TOL) {
            total += a[i].1;
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 - ATOM_MATCH_TOL {
            total += b[j].1;
            j += 1;
        } else {
            total += (a[i].1 - b[j].1).abs();
            i += 1;
            j += 1;
        }
    }
    total
}

/// Total-variation distance ½(Σ|p_F − p_G| + ∫|f_F − f_G|).
///
/// The tolerance is the sum of both error budgets plus a step-doubling estimate of the
/// quadrature error of the piecewise-linear reading.
pub fn tv_distance(f: &MixtureDistribution, g: &MixtureDistribution) -> DistanceReport {
    let atoms = atom_l1(f, g);
    let mut pts = Vec::with_capacity(f.density.len() + g.density.len());
    grid_points(&f.density, &mut pts);
    grid_points(&g.density, &mut pts);
    let pts = merge_points(pts);
    let mut ends = Vec::with_capacity(4);
    support_ends(&f.density, &mut ends);
    support_ends(&g.density, &mut ends);
    let ends = merge_points(ends);
    let (fine, coarse) = l1_over(&pts, &ends, Side::Grid(&f.density), Side::Grid(&g.density));
    let mut quad = (fine - coarse).abs() / 3.0;
    if !same_lattice(&f.density, &g.density) {
        // Off-lattice nodes compare each linear reading with the other's interpolation
        // between its own nodes; bound what that reading misses.
        quad += f.density.interpolation_error_estimate() + g.density.interpolation_error_estimate();
    }
    DistanceReport::new(
        0.5 * (atoms + fine),
        f.error_budget + g.error_budget + 0.5 * quad,
        DistanceKind::Tv,
    )
}

/// Total-variation distance between `f` and N(mean, sd²).
pub fn tv_to_normal(f: &MixtureDistribution, mean: f64, sd: f64) -> DistanceReport {
    let normal = Side::Normal { mean, sd };
    let d = &f.density;
    if d.len() < 2 {
        // Purely atomic: mutually singular with the normal, whatever mass pruning dropped.
        return DistanceReport::new(1.0, 0.0, DistanceKind::Tv);
    }
    let (inside, quad, outside) = {
        let pts: Vec<f64> = d.nodes().collect();
        let ends = [d.origin(), d.end()];
        let (fine, coarse) = l1_over(&pts, &ends, Side::Grid(d), normal);
        let outside = normal_interval_mass(f64::NEG_INFINITY, d.origin(), mean, sd)
            + normal_interval_mass(d.end(), f64::INFINITY, mean, sd);
        (fine, (fine - coarse).abs() / 3.0, outside)
    };
    DistanceReport::new(
        0.5 * (f.atomic.total() + inside + outside),
        f.error_budget + 0.5 * quad,
        DistanceKind::Tv,
    )
}

/// Δ_n: total-variation distance from the sum of n iid copies of `f` to the normal law
/// with the same mean and variance. A degenerate summand gives exactly 1.
pub fn tv_to_matched_normal(f: &MixtureDistribution, n: u64) -> Result<DistanceReport> {
    let m = moments(f);
    if m.variance <= 0.0 {
        return Ok(DistanceReport::new(1.0, 0.0, DistanceKind::Tv));
    }
    let s = self_convolve(f, n)?;
    let nf = n as f64;
    Ok(tv_to_normal(&s, nf * m.mean, (nf * m.variance).sqrt()))
}

/// d_TV(law, law + γ) for an already computed law.
pub fn shift_tv_of_law(law: &MixtureDistribution, gamma: f64) -> Result<DistanceReport> {
    if gamma == 0.0 {
        return Ok(DistanceReport::new(0.0, 0.0, DistanceKind::Tv));
    }
    let shifted = affine(law, 1.0, gamma)?;
    let mut r = tv_distance(law, &shifted);
    // The shifted copy carries the same budget; count it once.
    r.tolerance -= law.error_budget;
    Ok(r)
}

/// d_TV(S_n, S_n + γ) for S_n the sum of n iid copies of `f`.
pub fn shift_tv(f: &MixtureDistribution, n: u64, gamma: f64) -> Result<DistanceReport> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(crate::Error::InvalidParameter(format!("shift must be finite and ≥ 0, got {gamma}")));
    }
    let s = self_convolve(f, n)?;
    shift_tv_of_law(&s, gamma)
}

/// One side of a CDF comparison.
fn cdf_gap(f: &MixtureDistribution, g: Option<&MixtureDistribution>, normal: Option<(f64, f64)>) -> f64 {
    let mut pts = Vec::new();
    grid_points(&f.density, &mut pts);
    pts.extend(f.atomic.atoms().iter().map(|a| a.0));
    if let Some(g) = g {
        grid_points(&g.density, &mut pts);
        pts.extend(g.atomic.atoms().iter().map(|a| a.0));
    }
    let pts = merge_points(pts);
    if pts.is_empty() {
        return 0.0;
    }
    let fs = Side::Grid(&f.density);
    let gs = match (g, normal) {
        (Some(g), _) => Side::Grid(&g.density),
        (None, Some((mean, sd))) => Side::Normal { mean, sd },
        _ => unreachable!(),
    };
    let atoms_near = |m: &MixtureDistribution, x: f64, k: &mut usize| -> f64 {
        let a = m.atomic.atoms();
        let mut s = 0.0;
        while *k < a.len() && a[*k].0 <= x + ATOM_MATCH_TOL {
            s += a[*k].1;
            *k += 1;
        }
        s
    };
    // Running CDF gap F − G just left of the current point.
    let mut gap = match normal {
        Some((mean, sd)) if g.is_none() => -std_normal_cdf((pts[0] - mean) / sd),
        _ => 0.0,
    };
    let (mut kf, mut kg) = (0, 0);
    let mut best: f64 = gap.abs();
    for (i, &x) in pts.iter().enumerate() {
        gap += atoms_near(f, x, &mut kf);
        if let Some(g) = g {
            gap -= atoms_near(g, x, &mut kg);
        }
        best = best.max(gap.abs());
        if i + 1 == pts.len() {
            break;
        }
        let x1 = pts[i + 1];
        let w = x1 - x;
        let (a, b) = panel_diffs(fs, Side::Grid(&GridDensity::empty()), x, x1);
        let df = 0.5 * (a + b) * w;
        let dg = match gs {
            Side::Grid(_) => {
                let (c, d) = panel_diffs(gs, Side::Grid(&GridDensity::empty()), x, x1);
                // Gap's derivative is linear across the panel; check its zero.
                let (s0, s1) = (a - c, b - d);
                if s0 * s1 < 0.0 {
                    let t = s0 / (s0 - s1);
                    let partial = w * t * (s0 + 0.5 * t * (s1 - s0));
                    best = best.max((gap + partial).abs());
                }
                0.5 * (c + d) * w
            }
            Side::Normal { mean, sd } => {
                let mass = normal_interval_mass(x, x1, mean, sd);
                // Normal density crosses the linear f at most twice per short panel; probe
                // the ends and the midpoint.
                let half = normal_interval_mass(x, 0.5 * (x + x1), mean, sd);
                let fm = 0.5 * (a + 0.5 * (a + b)) * 0.5 * w;
                best = best.max((gap + fm - half).abs());
                mass
            }
        };
        gap += df - dg;
    }
    best = best.max(gap.abs());
    if let (Some((mean, sd)), None) = (normal, g) {
        // Past the last point only the normal tail remains.
        let tail = normal_interval_mass(*pts.last().unwrap(), f64::INFINITY, mean, sd);
        best = best.max((gap - tail).abs());
    }
    best.min(1.0)
}

/// Kolmogorov distance sup_x |F(x) − G(x)|, over grid nodes, atom locations (both one-
/// sided limits) and interior extrema of the piecewise-quadratic CDF gap.
pub fn kolmogorov_distance(f: &MixtureDistribution, g: &MixtureDistribution) -> DistanceReport {
    let mut tol = f.error_budget + g.error_budget;
    if !same_lattice(&f.density, &g.density) {
        tol += f.density.interpolation_error_estimate() + g.density.interpolation_error_estimate();
    }
    DistanceReport::new(cdf_gap(f, Some(g), None), tol, DistanceKind::Kolmogorov)
}

/// Kolmogorov distance from `f` to N(mean, sd²).
pub fn kolmogorov_to_normal(f: &MixtureDistribution, mean: f64, sd: f64) -> DistanceReport {
    DistanceReport::new(cdf_gap(f, None, Some((mean, sd))), f.error_budget, DistanceKind::Kolmogorov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolve::convolve_pair;
    use crate::family::{atomic_list, bernoulli, gaussian, mixture, triangular, uniform, SamplingOptions};
    use crate::quad::integrate;
    use crate::special::std_normal_pdf;
    use proptest::prelude::*;

    fn opts() -> SamplingOptions {
        SamplingOptions::default()
    }

    #[test]
    fn identical_laws_are_at_zero() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        assert_eq!(tv_distance(&u, &u).value, 0.0);
        assert_eq!(kolmogorov_distance(&u, &u).value, 0.0);
    }

    #[test]
    fn atoms_and_densities_are_singular() {
        let z = gaussian(0.0, 1.0, None, opts()).unwrap();
        let a = MixtureDistribution::atom(0.0);
        assert!((tv_distance(&a, &z).value - 1.0).abs() < 1e-12);
        let k = kolmogorov_distance(&MixtureDistribution::atom(0.0), &MixtureDistribution::atom(1.0));
        assert_eq!(k.value, 1.0);
    }

    #[test]
    fn shifted_normals() {
        let a = gaussian(0.0, 1.0, None, opts()).unwrap();
        let b = gaussian(1.0, 1.0, None, opts()).unwrap();
        let r = tv_distance(&a, &b);
        let exact = 2.0 * std_normal_cdf(0.5) - 1.0;
        assert!((exact - 0.382_924_922_548_026).abs() < 1e-12);
        assert!((r.value - exact).abs() <= r.tolerance, "{r:?}");
        assert!(r.tolerance < 1e-5);
        let k = kolmogorov_distance(&a, &b);
        assert!((k.value - exact).abs() <= k.tolerance, "{k:?}");
    }

    #[test]
    fn uniform_pair_against_matched_normal() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        let r = tv_to_matched_normal(&u, 2).unwrap();
        // Independent check: adaptive quadrature with the Irwin–Hall closed form.
        let sd = (2.0f64 / 12.0).sqrt();
        let ih2 = |x: f64| if (0.0..=1.0).contains(&x) { x } else if (1.0..=2.0).contains(&x) { 2.0 - x } else { 0.0 };
        let gap = |x: f64| (ih2(x) - std_normal_pdf((x - 1.0) / sd) / sd).abs();
        let mut total = 0.0;
        for (lo, hi) in [(-12.0, 0.0), (0.0, 1.0), (1.0, 2.0), (2.0, 14.0)] {
            total += integrate(gap, lo, hi, 1e-13, 0.0, 10_000).unwrap().value;
        }
        assert!((r.value - 0.5 * total).abs() < 1e-7, "{} vs {}", r.value, 0.5 * total);
    }

    #[test]
    fn gaussian_fixed_point() {
        let g = gaussian(0.0, 1.0, None, opts()).unwrap();
        for n in [1, 2, 8] {
            let r = tv_to_matched_normal(&g, n).unwrap();
            assert!(r.value <= 1e-6, "n={n}: {r:?}");
        }
    }

    #[test]
    fn degenerate_and_lattice_laws_are_at_one() {
        assert_eq!(tv_to_matched_normal(&MixtureDistribution::atom(3.0), 5).unwrap().value, 1.0);
        let r = tv_to_matched_normal(&bernoulli(0.5).unwrap(), 7).unwrap();
        assert_eq!(r.value, 1.0);
        // Far enough out that the smallest binomial atoms are pruned.
        let r = tv_to_matched_normal(&bernoulli(0.5).unwrap(), 64).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn shift_distance_edges() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        assert_eq!(shift_tv(&u, 3, 0.0).unwrap().value, 0.0);
        assert_eq!(shift_tv(&MixtureDistribution::atom(0.2), 4, 0.5).unwrap().value, 1.0);
        // Uniform shifted by γ < 1: overlap 1 − γ.
        let r = shift_tv(&u, 1, 0.25).unwrap();
        assert!((r.value - 0.25).abs() < 1e-9 + r.tolerance, "{r:?}");
    }

    #[test]
    fn shift_distance_of_triangular_matches_closed_form() {
        // κ_1 against itself shifted by 1: 2∫_0^{1/2} (1 − x) dx = 3/4.
        let t = triangular(1.0, 0.0, opts()).unwrap();
        let r = shift_tv(&t, 1, 1.0).unwrap();
        assert!((r.value - 0.75).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn kolmogorov_against_normal() {
        let g = gaussian(0.0, 1.0, None, opts()).unwrap();
        assert!(kolmogorov_to_normal(&g, 0.0, 1.0).value < 1e-6);
        let b = bernoulli(0.5).unwrap();
        let k = kolmogorov_to_normal(&b, 0.5, 0.5);
        // Largest jump gap sits at the atom at 0: Φ(−1) vs 0 and 0.5.
        assert!((k.value - (0.5 - std_normal_cdf(-1.0))).abs() < 1e-12);
    }

    #[test]
    fn singular_floor() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        let m = mixture(&[(0.5, MixtureDistribution::atom(0.0)), (0.5, u)]).unwrap();
        for n in [1u64, 2, 4] {
            let r = tv_to_matched_normal(&m, n).unwrap();
            assert!(r.value >= 0.5f64.powi(n as i32) - r.tolerance, "n={n}");
        }
    }

    fn small_law() -> impl Strategy<Value = MixtureDistribution> {
        let atoms = prop::collection::vec((-3i32..3, 1u32..5), 1..4);
        (atoms, 0.0..1.0f64, -1.0..1.0f64, 0.2..2.0f64).prop_map(|(atoms, w, c, a)| {
            let atoms: Vec<(f64, f64)> = atoms.into_iter().map(|(x, p)| (x as f64 * 0.5, p as f64)).collect();
            let disc = atomic_list(&atoms).unwrap();
            let cont = triangular(a, c, SamplingOptions::with_intervals(256)).unwrap();
            mixture(&[(1.0 - w, disc), (w, cont)]).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tv_is_symmetric_and_bounded(f in small_law(), g in small_law()) {
            let a = tv_distance(&f, &g);
            let b = tv_distance(&g, &f);
            prop_assert_eq!(a.value, b.value);
            prop_assert!((0.0..=1.0).contains(&a.value));
            let k = kolmogorov_distance(&f, &g);
            prop_assert!(k.value <= a.value + a.tolerance + 1e-12);
        }

        #[test]
        fn triangle_inequality(f in small_law(), g in small_law(), h in small_law()) {
            let fg = tv_distance(&f, &g);
            let gh = tv_distance(&g, &h);
            let fh = tv_distance(&f, &h);
            let slack = 2.0 * (fg.tolerance + gh.tolerance + fh.tolerance) + 1e-12;
            prop_assert!(fh.value <= fg.value + gh.value + slack);
        }

        #[test]
        fn convolution_contracts(f in small_law(), g in small_law(), h in small_law()) {
            let base = tv_distance(&f, &g);
            let fh = convolve_pair(&f, &h).unwrap();
            let gh = convolve_pair(&g, &h).unwrap();
            let after = tv_distance(&fh, &gh);
            prop_assert!(after.value <= base.value + base.tolerance + after.tolerance + 1e-9,
                "{:?} vs {:?}", after, base);
        }

        #[test]
        fn affine_invariance(f in small_law(), g in small_law(), s in 0.3..3.0f64, neg in any::<bool>(), t in -2.0..2.0f64) {
            let s = if neg { -s } else { s };
            let before = tv_distance(&f, &g).value;
            let after = tv_distance(&affine(&f, s, t).unwrap(), &affine(&g, s, t).unwrap()).value;
            prop_assert!((before - after).abs() <= 1e-9, "{} vs {}", before, after);
        }
    }
}
