//! Convolution of mixture laws and n-fold self-convolution.
//!
//! Atomic parts convolve by sparse sum-sets, atoms act on densities by shifting, and
//! density pairs convolve by the trapezoid rule over the overlap of their supports,
//! evaluated with zero-padded FFTs. Purely absolutely-continuous laws are powered in the
//! transform domain in one pass; anything with atoms goes through repeated squaring.
//!
//! Every lossy step (window truncation, atom pruning, negative round-off lobes,
//! resampling, off-lattice atoms) is measured and charged to the result's error budget.

use crate::dist::{moments, trapezoid, AtomicMeasure, GridDensity, MixtureDistribution};
use crate::error::{Error, Result};
use crate::family::resample_onto;
use crate::fftconv;

/// Limits and window settings for convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolveOptions {
    /// Largest transform length or dense grid allowed.
    pub max_grid_points: usize,
    /// Largest atom count allowed in any intermediate law.
    pub max_atoms: usize,
    /// Densities of sums are kept on `mean ± window_sigmas·sd`.
    pub window_sigmas: f64,
    /// Repeat self-convolutions at twice the grid step and charge the difference.
    pub refinement_check: bool,
}

impl Default for ConvolveOptions {
    fn default() -> Self {
        ConvolveOptions {
            max_grid_points: 1 << 24,
            max_atoms: 1_000_000,
            window_sigmas: 12.0,
            refinement_check: true,
        }
    }
}

/// What a convolution run did: sum count, largest transform, output window, charges.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionPlan {
    pub n: u64,
    pub grid_points: usize,
    pub domain: (f64, f64),
    pub error_budget: f64,
}

impl ConvolutionPlan {
    fn new(n: u64) -> Self {
        ConvolutionPlan { n, grid_points: 256, domain: (0.0, 1.0), error_budget: 0.0 }
    }

    fn charge(&mut self, amount: f64) {
        if amount > 0.0 {
            self.error_budget += amount;
        }
    }

    fn used(&mut self, len: usize) {
        self.grid_points = self.grid_points.max(len);
    }

    fn set_domain(&mut self, d: &MixtureDistribution) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if let (Some(first), Some(last)) = (d.atomic.atoms().first(), d.atomic.atoms().last()) {
            lo = first.0;
            hi = last.0;
        }
        if !d.density.values().is_empty() {
            lo = lo.min(d.density.origin());
            hi = hi.max(d.density.end());
        }
        if !(hi > lo) {
            let c = if lo.is_finite() { lo } else { 0.0 };
            lo = c - 0.5;
            hi = c + 0.5;
        }
        self.domain = (lo, hi);
    }
}

/// Trapezoid weight times step for each node: the mass each sample stands for.
fn node_masses(values: &[f64], step: f64) -> Vec<f64> {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(i, v)| if n > 1 && (i == 0 || i == n - 1) { 0.5 * v * step } else { v * step })
        .collect()
}

/// Density of the sum of two grid densities on a shared step: trapezoid rule over the
/// overlap of supports at every output node. Returns values and the FFT length used.
fn density_pair(f: &[f64], g: &[f64], step: f64, cap: usize) -> Result<(Vec<f64>, usize)> {
    if f.len() < 2 || g.len() < 2 {
        return Ok((Vec::new(), 0));
    }
    let mf = node_masses(f, step);
    let mg = node_masses(g, step);
    let (mut c, len) = fftconv::convolve(&mf, &mg, cap)?;
    // Product weights give 1/4 where both supports end on the same node; the overlap
    // trapezoid wants 1/2 there, and 0 where the overlap is a single point.
    let (nf, ng) = (f.len() - 1, g.len() - 1);
    let q = 0.25 * step * step;
    c[ng] += q * f[0] * g[ng];
    c[nf] += q * f[nf] * g[0];
    c[0] -= q * f[0] * g[0];
    c[nf + ng] -= q * f[nf] * g[ng];
    let inv = 1.0 / step;
    Ok((c.into_iter().map(|x| x * inv).collect(), len))
}

/// Dense accumulator for density terms on the lattice `anchor + k·step`.
struct LatticeSum {
    anchor: f64,
    step: f64,
    terms: Vec<(i64, Vec<f64>)>,
}

impl LatticeSum {
    fn add(&mut self, start: i64, values: Vec<f64>) {
        if !values.is_empty() {
            self.terms.push((start, values));
        }
    }

    fn finish(self, cap: usize, plan: &mut ConvolutionPlan) -> Result<GridDensity> {
        if self.terms.is_empty() {
            return Ok(GridDensity::empty());
        }
        let lo = self.terms.iter().map(|t| t.0).min().unwrap();
        let hi = self.terms.iter().map(|t| t.0 + t.1.len() as i64).max().unwrap();
        let len = (hi - lo) as usize;
        if len > cap {
            return Err(Error::GridOverflow { requested: len, cap });
        }
        let mut out = vec![0.0; len];
        for (start, vals) in &self.terms {
            // End jumps of a term that land inside the combined grid become one-step ramps.
            if *start > lo {
                plan.charge(0.5 * self.step * vals[0].abs());
            }
            if start + (vals.len() as i64) < hi {
                plan.charge(0.5 * self.step * vals[vals.len() - 1].abs());
            }
        }
        for (start, vals) in self.terms {
            let off = (start - lo) as usize;
            for (o, v) in out[off..off + vals.len()].iter_mut().zip(vals) {
                *o += v;
            }
        }
        plan.charge(clip_negative(&mut out, self.step));
        Ok(GridDensity::from_parts_unchecked(self.anchor + lo as f64 * self.step, self.step, out))
    }
}

/// Zeroes negative round-off lobes and returns their absolute mass.
fn clip_negative(values: &mut [f64], step: f64) -> f64 {
    let mut neg = 0.0;
    for v in values.iter_mut() {
        if *v < 0.0 || !v.is_finite() {
            if v.is_finite() {
                neg -= *v;
            }
            *v = 0.0;
        }
    }
    neg * step
}

/// Shifts `d` by every atom, placing the copies on `sum`'s lattice. Atoms off the lattice
/// are split between the two neighbouring nodes, with the smearing charged.
fn atoms_on_density(
    atoms: &AtomicMeasure,
    d: &GridDensity,
    sum: &mut LatticeSum,
    opts: &ConvolveOptions,
    plan: &mut ConvolutionPlan,
) -> Result<()> {
    if atoms.is_empty() || d.len() < 2 {
        return Ok(());
    }
    let h = sum.step;
    let curvature = d.interpolation_error_estimate() * 8.0 / h;
    let mut deposits: Vec<(i64, f64)> = Vec::with_capacity(atoms.len() * 2);
    for &(x, p) in atoms.atoms() {
        let q = (x + d.origin() - sum.anchor) / h;
        let k = q.floor();
        let frac = q - k;
        if frac < 1e-9 {
            deposits.push((k as i64, p));
        } else if frac > 1.0 - 1e-9 {
            deposits.push((k as i64 + 1, p));
        } else {
            deposits.push((k as i64, p * (1.0 - frac)));
            deposits.push((k as i64 + 1, p * frac));
            plan.charge(0.5 * p * frac * (1.0 - frac) * h * curvature);
        }
    }
    let kmin = deposits.iter().map(|d| d.0).min().unwrap();
    let kmax = deposits.iter().map(|d| d.0).max().unwrap();
    let span = (kmax - kmin + 1) as usize;
    let direct_cost = deposits.len().saturating_mul(d.len());
    if direct_cost <= 1 << 26 || span > opts.max_grid_points {
        for (k, w) in deposits {
            sum.add(k, d.values().iter().map(|v| v * w).collect());
        }
    } else {
        let mut comb = vec![0.0; span];
        for (k, w) in deposits {
            comb[(k - kmin) as usize] += w;
        }
        let (vals, len) = fftconv::convolve(&comb, d.values(), opts.max_grid_points)?;
        plan.used(len);
        sum.add(kmin, vals);
    }
    Ok(())
}

fn atom_sumset(a: &AtomicMeasure, b: &AtomicMeasure, cap: usize) -> Result<(AtomicMeasure, f64)> {
    if a.is_empty() || b.is_empty() {
        return Ok((AtomicMeasure::empty(), 0.0));
    }
    let pairs = a.len().saturating_mul(b.len());
    if pairs > cap.saturating_mul(64) {
        return Err(Error::AtomExplosion { atoms: pairs, cap });
    }
    let mut raw = Vec::with_capacity(pairs);
    for &(x, p) in a.atoms() {
        for &(y, q) in b.atoms() {
            raw.push((x + y, p * q));
        }
    }
    let (m, pruned) = AtomicMeasure::normalize(raw)?;
    if m.len() > cap {
        return Err(Error::AtomExplosion { atoms: m.len(), cap });
    }
    Ok((m, pruned))
}

/// Law of X + Y for independent X ~ f, Y ~ g.
pub fn convolve_pair(f: &MixtureDistribution, g: &MixtureDistribution) -> Result<MixtureDistribution> {
    let mut plan = ConvolutionPlan::new(2);
    convolve_pair_with(f, g, &ConvolveOptions::default(), &mut plan)
}

pub fn convolve_pair_with(
    f: &MixtureDistribution,
    g: &MixtureDistribution,
    opts: &ConvolveOptions,
    plan: &mut ConvolutionPlan,
) -> Result<MixtureDistribution> {
    let before = plan.error_budget;
    let (atomic, pruned) = atom_sumset(&f.atomic, &g.atomic, opts.max_atoms)?;
    plan.charge(pruned);

    let fd = (!f.density.values().is_empty()).then_some(&f.density);
    let gd = (!g.density.values().is_empty()).then_some(&g.density);
    let density = match (fd, gd) {
        (None, None) => GridDensity::empty(),
        _ => {
            // Common step: the finer of the two grids.
            let step = fd
                .iter()
                .chain(gd.iter())
                .map(|d| d.step())
                .fold(f64::INFINITY, f64::min);
            let refit = |d: &GridDensity, plan: &mut ConvolutionPlan| -> GridDensity {
                if d.step() == step {
                    return d.clone();
                }
                let len = ((d.end() - d.origin()) / step).round() as usize + 1;
                let (vals, charge) = resample_onto(d, d.origin(), step, len);
                plan.charge(charge);
                GridDensity::from_parts_unchecked(d.origin(), step, vals)
            };
            let fd = fd.map(|d| refit(d, plan));
            let gd = gd.map(|d| refit(d, plan));
            let anchor = match (&fd, &gd) {
                (Some(a), Some(b)) => a.origin() + b.origin(),
                (Some(a), None) => a.origin() + g.atomic.atoms()[0].0,
                (None, Some(b)) => b.origin() + f.atomic.atoms()[0].0,
                (None, None) => unreachable!(),
            };
            let mut sum = LatticeSum { anchor, step, terms: Vec::new() };
            if let (Some(a), Some(b)) = (&fd, &gd) {
                let (vals, len) = density_pair(a.values(), b.values(), step, opts.max_grid_points)?;
                plan.used(len);
                let expected = a.mass() * b.mass();
                let got = step * trapezoid(&vals);
                plan.charge((got - expected).abs());
                sum.add(0, vals);
            }
            if let Some(b) = &gd {
                atoms_on_density(&f.atomic, b, &mut sum, opts, plan)?;
            }
            if let Some(a) = &fd {
                atoms_on_density(&g.atomic, a, &mut sum, opts, plan)?;
            }
            sum.finish(opts.max_grid_points, plan)?
        }
    };
    let out = MixtureDistribution {
        atomic,
        density,
        error_budget: f.error_budget + g.error_budget + (plan.error_budget - before),
    };
    plan.set_domain(&out);
    Ok(out)
}

/// Restricts the density to `mean ± k·sd` of the whole law, charging the cut mass.
fn window(d: MixtureDistribution, k: f64, plan: &mut ConvolutionPlan) -> MixtureDistribution {
    if d.density.values().is_empty() {
        return d;
    }
    let m = moments(&d);
    let sd = m.variance.sqrt();
    let (kept, dropped) = d.density.truncate(m.mean - k * sd, m.mean + k * sd);
    plan.charge(dropped);
    MixtureDistribution { atomic: d.atomic, density: kept, error_budget: d.error_budget + dropped }
}

/// n-fold power of a pure density in the transform domain, kept on `mean ± k·sd`.
fn power_density(
    f: &GridDensity,
    n: u64,
    opts: &ConvolveOptions,
    plan: &mut ConvolutionPlan,
) -> Result<GridDensity> {
    let h = f.step();
    let steps = f.len() - 1;
    let masses = node_masses(f.values(), h);
    let total: f64 = masses.iter().sum();
    let mean = masses.iter().enumerate().map(|(i, m)| m * f.node(i)).sum::<f64>() / total;
    let var = masses
        .iter()
        .enumerate()
        .map(|(i, m)| m * (f.node(i) - mean).powi(2))
        .sum::<f64>()
        / total;
    let (mean_n, sd_n) = (n as f64 * mean, (n as f64 * var).sqrt());
    let base = n as f64 * f.origin();
    let full = (n as usize).saturating_mul(steps) + 1;
    let k = opts.window_sigmas;
    let k_lo = (((mean_n - k * sd_n) - base) / h).floor().max(0.0) as usize;
    let k_hi = ((((mean_n + k * sd_n) - base) / h).ceil() as usize).min(full - 1);
    let width = k_hi - k_lo + 1;
    let guard = (8.0 * sd_n / h).ceil() as usize;
    let len = if full <= width + 2 * guard {
        fftconv::transform_len(full, opts.max_grid_points)?
    } else {
        fftconv::transform_len(width + 2 * guard, opts.max_grid_points)?
    };
    plan.used(len);
    let ring = fftconv::cyclic_power(&masses, n, len);
    let inv = 1.0 / h;
    let mut values = Vec::with_capacity(width);
    let mut inside = 0.0;
    for i in 0..width {
        let c = ring[(k_lo + i) % len];
        inside += c.abs();
        values.push(c * inv);
    }
    let all: f64 = ring.iter().map(|c| c.abs()).sum();
    plan.charge(all - inside);
    plan.charge(clip_negative(&mut values, h));
    Ok(GridDensity::from_parts_unchecked(base + k_lo as f64 * h, h, values))
}

fn self_convolve_raw(
    f: &MixtureDistribution,
    n: u64,
    opts: &ConvolveOptions,
    plan: &mut ConvolutionPlan,
) -> Result<MixtureDistribution> {
    if n == 1 {
        return Ok(f.clone());
    }
    if f.atomic.is_empty() && f.density.len() >= 2 {
        let before = plan.error_budget;
        let density = power_density(&f.density, n, opts, plan)?;
        let charged = plan.error_budget - before;
        return Ok(MixtureDistribution {
            atomic: AtomicMeasure::empty(),
            density,
            error_budget: n as f64 * f.error_budget + charged,
        });
    }
    // Exponentiation by squaring.
    let mut acc: Option<MixtureDistribution> = None;
    let mut base = f.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => window(convolve_pair_with(&a, &base, opts, plan)?, opts.window_sigmas, plan),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = window(convolve_pair_with(&base, &base, opts, plan)?, opts.window_sigmas, plan);
    }
    Ok(acc.expect("n ≥ 1"))
}

/// Every other node of the density, when the interval count is even.
fn coarsen(f: &MixtureDistribution) -> Option<MixtureDistribution> {
    let d = &f.density;
    if d.len() < 5 || (d.len() - 1) % 2 != 0 {
        return None;
    }
    let vals: Vec<f64> = d.values().iter().step_by(2).copied().collect();
    let coarse = GridDensity::from_parts_unchecked(d.origin(), 2.0 * d.step(), vals);
    Some(MixtureDistribution { atomic: f.atomic.clone(), density: coarse, error_budget: f.error_budget })
}

/// L1 distance between a fine density and a coarse one, read at the coarse nodes.
fn coarse_node_l1(fine: &GridDensity, coarse: &GridDensity) -> f64 {
    let n = coarse.len();
    if n < 2 {
        return fine.mass();
    }
    let diffs: Vec<f64> = (0..n)
        .map(|j| {
            let x = coarse.node(j);
            let t = (x - fine.origin()) / fine.step();
            let fv = if (t - t.round()).abs() < 1e-6 && t.round() >= 0.0 && (t.round() as usize) < fine.len() {
                fine.values()[t.round() as usize]
            } else {
                fine.value_at(x)
            };
            (fv - coarse.values()[j]).abs()
        })
        .collect();
    let inside = coarse.step() * trapezoid(&diffs);
    // Fine mass outside the coarse window is not compared above.
    let (fine_in, _) = fine.truncate(coarse.origin(), coarse.end());
    inside + (fine.mass() - fine_in.mass()).abs()
}

/// Law of the sum of n iid copies.
pub fn self_convolve(f: &MixtureDistribution, n: u64) -> Result<MixtureDistribution> {
    self_convolve_with(f, n, &ConvolveOptions::default()).map(|r| r.0)
}

pub fn self_convolve_with(
    f: &MixtureDistribution,
    n: u64,
    opts: &ConvolveOptions,
) -> Result<(MixtureDistribution, ConvolutionPlan)> {
    if n == 0 {
        return Err(Error::InvalidParameter("number of summands must be at least 1".into()));
    }
    if n > u32::MAX as u64 {
        return Err(Error::InvalidParameter(format!("number of summands {n} too large")));
    }
    let mut plan = ConvolutionPlan::new(n);
    let mut out = self_convolve_raw(f, n, opts, &mut plan)?;
    if n >= 2 && opts.refinement_check {
        if let Some(coarse) = coarsen(f) {
            let mut scratch = ConvolutionPlan::new(n);
            let rough = self_convolve_raw(&coarse, n, opts, &mut scratch)?;
            // For smooth laws the step-2h answer is off by about four times as much, but kinks
            // and end jumps converge more slowly; the full difference covers both.
            let estimate = coarse_node_l1(&out.density, &rough.density);
            plan.charge(estimate);
            out.error_budget += estimate;
        }
    }
    plan.set_domain(&out);
    Ok((out, plan))
}

/// Direct trapezoid evaluation of the convolution integral at every output node.
///
/// The integration variable runs over the finer grid; the other density is read by
/// linear interpolation. O(N·M); meant as a test oracle for the transform path.
pub fn quadrature_convolve_oracle(f: &GridDensity, g: &GridDensity) -> GridDensity {
    if f.len() < 2 || g.len() < 2 || f.mass() == 0.0 || g.mass() == 0.0 {
        return GridDensity::empty();
    }
    let (inner, outer) = if f.step() <= g.step() { (f, g) } else { (g, f) };
    let h = inner.step();
    let origin = inner.origin() + outer.origin();
    let end = inner.end() + outer.end();
    let count = ((end - origin) / h).round() as usize + 1;
    let read = |d: &GridDensity, x: f64| -> f64 {
        // Inclusive of both ends: the integration limits sit on the support edges.
        let t = ((x - d.origin()) / d.step()).clamp(0.0, (d.len() - 1) as f64);
        let i = (t.floor() as usize).min(d.len() - 2);
        let fr = t - i as f64;
        d.values()[i] * (1.0 - fr) + d.values()[i + 1] * fr
    };
    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        let x = origin + k as f64 * h;
        let lo = inner.origin().max(x - outer.end());
        let hi = inner.end().min(x - outer.origin());
        if hi - lo <= 1e-12 * h {
            values.push(0.0);
            continue;
        }
        // Trapezoid over {lo, inner nodes strictly inside, hi}.
        let first = ((lo - inner.origin()) / h + 1e-9).floor() as usize + 1;
        let last_t = (hi - inner.origin()) / h - 1e-9;
        let last = if last_t < 0.0 { 0 } else { last_t.ceil() as usize - 1 };
        let mut prev_x = lo;
        let mut prev_y = read(inner, lo) * read(outer, x - lo);
        let mut acc = 0.0;
        for i in first..=last.min(inner.len() - 1) {
            let t = inner.node(i);
            if t <= lo || t >= hi {
                continue;
            }
            let y = inner.values()[i] * read(outer, x - t);
            acc += 0.5 * (y + prev_y) * (t - prev_x);
            prev_x = t;
            prev_y = y;
        }
        let y = read(inner, hi) * read(outer, x - hi);
        acc += 0.5 * (y + prev_y) * (hi - prev_x);
        values.push(acc.max(0.0));
    }
    GridDensity::from_parts_unchecked(origin, h, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{bernoulli, gaussian, triangular, uniform, SamplingOptions};

    fn opts() -> SamplingOptions {
        SamplingOptions::default()
    }

    /// Irwin–Hall density of order m.
    pub(crate) fn irwin_hall(m: u32, x: f64) -> f64 {
        if x < 0.0 || x > m as f64 {
            return 0.0;
        }
        let mut fact = 1.0;
        for i in 1..m {
            fact *= i as f64;
        }
        let mut s = 0.0;
        let mut binom = 1.0;
        for k in 0..=m {
            if (k as f64) > x {
                break;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom * (x - k as f64).powi(m as i32 - 1);
            binom = binom * (m - k) as f64 / (k + 1) as f64;
        }
        s / fact
    }

    fn l1_against(d: &GridDensity, exact: impl Fn(f64) -> f64) -> f64 {
        let diffs: Vec<f64> = d.nodes().zip(d.values()).map(|(x, v)| (v - exact(x)).abs()).collect();
        d.step() * trapezoid(&diffs)
    }

    #[test]
    fn uniform_pair_is_irwin_hall_two() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        let s = convolve_pair(&u, &u).unwrap();
        let d = &s.density;
        assert_eq!(d.origin(), 0.0);
        assert!((d.end() - 2.0).abs() < 1e-12);
        assert!((d.value_at(1.0) - 1.0).abs() < 1e-12);
        assert!(l1_against(d, |x| irwin_hall(2, x)) < 1e-10);
    }

    #[test]
    fn atoms_add() {
        let s = convolve_pair(&MixtureDistribution::atom(1.5), &MixtureDistribution::atom(-0.25)).unwrap();
        assert_eq!(s.atomic.atoms(), &[(1.25, 1.0)]);
        let b = bernoulli(0.5).unwrap();
        let s = convolve_pair(&b, &b).unwrap();
        assert_eq!(s.atomic.atoms(), &[(0.0, 0.25), (1.0, 0.5), (2.0, 0.25)]);
    }

    #[test]
    fn self_convolve_point_mass_and_binomial() {
        let s = self_convolve(&MixtureDistribution::atom(0.75), 12).unwrap();
        assert_eq!(s.atomic.atoms(), &[(9.0, 1.0)]);
        let s = self_convolve(&bernoulli(0.5).unwrap(), 10).unwrap();
        let mut c = 1.0;
        for k in 0..=10u32 {
            assert!((s.atomic.mass_at(k as f64) - c / 1024.0).abs() < 1e-15, "k={k}");
            c = c * (10 - k) as f64 / (k + 1) as f64;
        }
    }

    #[test]
    fn refinement_charge_covers_irwin_hall_error() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        for m in 2..=5u32 {
            let s = self_convolve(&u, m as u64).unwrap();
            let l1 = l1_against(&s.density, |x| irwin_hall(m, x));
            assert!(l1 <= s.error_budget, "m={m}: {l1} > {}", s.error_budget);
        }
    }

    #[test]
    fn uniform_cubed_matches_irwin_hall_three() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        let s = self_convolve(&u, 3).unwrap();
        assert!((s.density.value_at(1.5) - 0.75).abs() < 1e-6);
        assert!(l1_against(&s.density, |x| irwin_hall(3, x)) < 1e-6);
        assert!(s.error_budget < 1e-6);
    }

    #[test]
    fn mixture_power_keeps_atomic_mass_exact() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        let m = crate::family::mixture(&[(0.5, MixtureDistribution::atom(0.0)), (0.5, u)]).unwrap();
        let s = self_convolve(&m, 6).unwrap();
        assert_eq!(s.atomic.atoms(), &[(0.0, 0.5f64.powi(6))]);
        assert!((s.total_mass() - 1.0).abs() <= 1e-9 + s.error_budget);
        let mm = moments(&m);
        let ms = moments(&s);
        // Interior jumps are drawn as one-step ramps, which moves moments by O(step).
        let h = m.density.step();
        assert!((ms.mean - 6.0 * mm.mean).abs() < 10.0 * h);
        assert!((ms.variance - 6.0 * mm.variance).abs() < 10.0 * h);
    }

    #[test]
    fn gaussian_power_stays_gaussian() {
        let g = gaussian(0.0, 1.0, None, opts()).unwrap();
        let s = self_convolve(&g, 8).unwrap();
        let sd = 8f64.sqrt();
        let l1 = l1_against(&s.density, |x| crate::special::normal_pdf(x, 0.0, sd));
        assert!(l1 < 1e-10, "l1={l1}");
    }

    #[test]
    fn oracle_agrees_with_transform_path() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        let t = triangular(1.0, 0.0, opts()).unwrap();
        let fast = convolve_pair(&u, &t).unwrap();
        let slow = quadrature_convolve_oracle(&u.density, &t.density);
        assert_eq!(slow.step(), fast.density.step());
        assert!((slow.origin() - fast.density.origin()).abs() < 1e-12);
        let l1: f64 = slow
            .values()
            .iter()
            .zip(fast.density.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * slow.step();
        assert!(l1 < 1e-6, "l1={l1}");
    }

    #[test]
    fn oracle_of_empty_is_empty() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        assert!(quadrature_convolve_oracle(&GridDensity::empty(), &u.density).is_empty());
    }

    #[test]
    fn grid_cap_is_enforced() {
        let u = uniform(0.0, 1.0, opts()).unwrap();
        let small = ConvolveOptions { max_grid_points: 1024, ..Default::default() };
        assert!(matches!(self_convolve_with(&u, 64, &small), Err(Error::GridOverflow { .. })));
    }

    #[test]
    fn atom_cap_is_enforced() {
        let spread = crate::family::atomic_list(&[(0.0, 1.0), (1.0, 1.0), (std::f64::consts::PI, 1.0)]).unwrap();
        let tight = ConvolveOptions { max_atoms: 50, ..Default::default() };
        assert!(matches!(self_convolve_with(&spread, 16, &tight), Err(Error::AtomExplosion { .. })));
    }
}
