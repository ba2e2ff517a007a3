//! Sums of iid triangular variables: characteristic function, density by Fourier
//! inversion, exact shift distances, and the closed-form shift bound.
//!
//! ξ has the tent density κ_a(x) = (1/a)(1 − |x|/a) on [−a, a], so
//! ψ₁(s) = 2(1 − cos as)/(as)² and T_n = ξ₁ + … + ξ_n has ψ_n = ψ₁ⁿ.

use crate::error::{Error, Result};
use crate::quad::integrate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Truncation target for the inversion integrals, before scaling.
const TAIL_TOL: f64 = 1e-12;

/// Law of the sum of `n` iid triangular variables of half-width `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularSumLaw {
    a: f64,
    n: u32,
}

/// (2(1 − cos s)/s²), computed as sinc²(s/2) to avoid cancellation near 0.
pub fn psi1(s: f64) -> f64 {
    let h = 0.5 * s;
    if h.abs() < 1e-4 {
        let h2 = h * h;
        1.0 - h2 / 3.0 + 2.0 * h2 * h2 / 45.0
    } else {
        let r = h.sin() / h;
        r * r
    }
}

/// Sum of `f` over the panels `[2πk, 2π(k+1)]`, k < `periods`.
fn periodic_panels<F: Fn(f64) -> f64 + Copy>(f: F, periods: usize, tol: f64) -> Result<(f64, f64)> {
    let per_panel = tol / periods.max(1) as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    for k in 0..periods {
        let lo = TAU * k as f64;
        let q = integrate(f, lo, lo + TAU, per_panel, 0.0, 200)?;
        value += q.value;
        error += q.error;
    }
    Ok((value, error))
}

/// Periods needed so that a tail bounded by `c·s^{−p}/p` beyond 2πK is below the target.
fn periods_for_tail(c_ln: f64, p: f64) -> usize {
    // c·S^{−p}/p < TAIL_TOL  ⇔  S > (c/(p·TAIL_TOL))^{1/p}
    let ln_s = (c_ln - p.ln() - TAIL_TOL.ln()) / p;
    (ln_s.exp() / TAU).ceil().max(1.0) as usize
}

impl TriangularSumLaw {
    pub fn new(a: f64, n: u32) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("half-width must be positive, got {a}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one summand".into()));
        }
        Ok(TriangularSumLaw { a, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// ψ_n(s) = ψ₁(as)ⁿ.
    pub fn char_fn(&self, s: f64) -> f64 {
        psi1(self.a * s).powi(self.n as i32)
    }

    /// Density g_n(x). Closed form for one summand, Fourier inversion otherwise:
    /// g_n(x) = (1/(aπ)) ∫₀^∞ cos(sx/a) ψ₁(s)ⁿ ds, absolute error ≤ 1e−10.
    pub fn density_at(&self, x: f64) -> Result<f64> {
        let (a, n) = (self.a, self.n);
        let x = x.abs();
        if x >= n as f64 * a {
            return Ok(0.0);
        }
        if n == 1 {
            return Ok((1.0 - x / a) / a);
        }
        // ∫_S^∞ (4/s²)ⁿ ds = 4ⁿ S^{1−2n}/(2n−1)
        let p = 2.0 * n as f64 - 1.0;
        let periods = periods_for_tail(n as f64 * 4f64.ln(), p);
        let r = x / a;
        let (value, error) =
            periodic_panels(|s| (s * r).cos() * psi1(s).powi(n as i32), periods, 1e-11)?;
        let scale = 1.0 / (a * PI);
        if error * scale > 1e-10 {
            return Err(Error::QuadratureNonconvergence { error: error * scale, tolerance: 1e-10 });
        }
        Ok((value * scale).max(0.0))
    }

    /// Right side of the peak bound: (1/a)√(3/(πn)) + 2/(a(2n−1)π^{2n}).
    pub fn peak_bound(&self) -> f64 {
        lemma1_bound(self.a, self.n, 1.0)
    }

    /// d_TV(T_n, T_n + γ) = ∫_{−γ/2}^{γ/2} g_n, clamped to [0, 1].
    ///
    /// Integrating the inversion formula over the window first leaves one oscillatory
    /// integral, (2/π)∫₀^∞ sin(sγ/(2a))/s · ψ₁(s)ⁿ ds.
    pub fn shift_tv_exact(&self, gamma: f64) -> Result<f64> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("shift must be finite and ≥ 0, got {gamma}")));
        }
        let (a, n) = (self.a, self.n);
        let c = 0.5 * gamma;
        if c == 0.0 {
            return Ok(0.0);
        }
        if c >= n as f64 * a {
            return Ok(1.0);
        }
        if n == 1 {
            let r = c / a;
            return Ok((r * (2.0 - r)).clamp(0.0, 1.0));
        }
        let r = c / a;
        // |sin(rs)/s| ≤ 1/s: tail ≤ 4ⁿ S^{−2n}/(2n).
        let periods = periods_for_tail(n as f64 * 4f64.ln(), 2.0 * n as f64);
        let integrand = move |s: f64| {
            let k = if s < 1e-8 { r } else { (r * s).sin() / s };
            k * psi1(s).powi(n as i32)
        };
        let (value, error) = periodic_panels(integrand, periods, 1e-11)?;
        if error > 1e-10 {
            return Err(Error::QuadratureNonconvergence { error, tolerance: 1e-10 });
        }
        Ok((2.0 / PI * value).clamp(0.0, 1.0))
    }
}

/// (γ/a){√(3/(πn)) + 2/((2n−1)π^{2n})}. Not clamped: it is a bound, not a distance.
///
/// The second term is formed in log space and flushed to 0 below 1e−300.
pub fn lemma1_bound(a: f64, n: u32, gamma: f64) -> f64 {
    let nf = n as f64;
    let lead = (3.0 / (PI * nf)).sqrt();
    let ln_second = 2f64.ln() - (2.0 * nf - 1.0).ln() - 2.0 * nf * PI.ln();
    let second = if ln_second < 1e-300f64.ln() { 0.0 } else { ln_second.exp() };
    gamma / a * (lead + second)
}

/// Checks 0 ≤ 2(1 − cos s)/s² ≤ exp(−s²/12) at `samples` evenly spaced points of [0, 2π].
///
/// Near s = 0 the two sides agree to O(s⁴), so comparisons allow a few ulps.
pub fn verify_cosine_inequality(samples: usize) -> bool {
    let m = samples.max(2);
    (0..m).all(|i| {
        let s = TAU * i as f64 / (m - 1) as f64;
        let lhs = psi1(s);
        let rhs = (-s * s / 12.0).exp();
        lhs >= -4.0 * f64::EPSILON && lhs <= rhs + 4.0 * f64::EPSILON * rhs
    })
}

/// One point of the shift-bound sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Row {
    pub a: f64,
    pub n: u32,
    pub gamma: f64,
    pub exact: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Exact shift distance against the bound over `a_list × {1..n_max} × gamma_list`,
/// in that nesting order.
pub fn lemma1_sweep(a_list: &[f64], n_max: u32, gamma_list: &[f64]) -> Result<Vec<Lemma1Row>> {
    let mut jobs = Vec::new();
    for &a in a_list {
        for n in 1..=n_max {
            for &g in gamma_list {
                jobs.push((a, n, g));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(a, n, gamma)| {
            let exact = TriangularSumLaw::new(a, n)?.shift_tv_exact(gamma)?;
            let bound = lemma1_bound(a, n, gamma);
            Ok(Lemma1Row { a, n, gamma, exact, bound, holds: exact <= bound })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Irwin–Hall density of order m (sum of m uniforms on [0, 1]).
    fn irwin_hall(m: u32, x: f64) -> f64 {
        if x <= 0.0 || x >= m as f64 {
            return 0.0;
        }
        let mut fact = 1.0;
        for i in 1..m {
            fact *= i as f64;
        }
        let (mut s, mut binom) = (0.0, 1.0);
        for k in 0..=m {
            if k as f64 > x {
                break;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom * (x - k as f64).powi(m as i32 - 1);
            binom = binom * (m - k) as f64 / (k + 1) as f64;
        }
        s / fact
    }

    /// ξ = a(U₁ + U₂ − 1), so T_n = a(IH_{2n} − n).
    fn g_oracle(a: f64, n: u32, x: f64) -> f64 {
        irwin_hall(2 * n, x / a + n as f64) / a
    }

    #[test]
    fn char_fn_values() {
        let l = TriangularSumLaw::new(1.0, 1).unwrap();
        assert_eq!(l.char_fn(0.0), 1.0);
        assert!((l.char_fn(PI) - 4.0 / (PI * PI)).abs() < 1e-15);
        let l2 = TriangularSumLaw::new(1.0, 2).unwrap();
        assert!(l2.char_fn(TAU) < 1e-30);
        for s in [-3.0, -0.5, 0.1, 7.0] {
            assert_eq!(l2.char_fn(s), l2.char_fn(-s));
            assert!((0.0..=1.0).contains(&l2.char_fn(s)));
        }
    }

    #[test]
    fn density_matches_irwin_hall() {
        for (a, n) in [(1.0, 2u32), (0.5, 3), (2.0, 4)] {
            let l = TriangularSumLaw::new(a, n).unwrap();
            for k in 0..=20 {
                let x = n as f64 * a * (k as f64 / 20.0 - 0.02);
                let got = l.density_at(x).unwrap();
                let want = g_oracle(a, n, x);
                assert!((got - want).abs() < 1e-10, "a={a} n={n} x={x}: {got} vs {want}");
                assert_eq!(got, l.density_at(-x).unwrap());
            }
        }
        assert_eq!(TriangularSumLaw::new(1.0, 1).unwrap().density_at(0.0).unwrap(), 1.0);
    }

    #[test]
    fn density_agrees_with_grid_convolution() {
        use crate::convolve::convolve_pair;
        use crate::family::{triangular, SamplingOptions};
        // Trapezoid error at 0 is about h²/3, so 1e−8 needs a fine grid.
        let t = triangular(1.0, 0.0, SamplingOptions::with_intervals(1 << 14)).unwrap();
        let s = convolve_pair(&t, &t).unwrap();
        let l = TriangularSumLaw::new(1.0, 2).unwrap();
        assert!((s.density.value_at(0.0) - l.density_at(0.0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn density_is_unimodal_and_integrates_to_one() {
        let l = TriangularSumLaw::new(1.0, 3).unwrap();
        let peak = l.density_at(0.0).unwrap();
        for k in 1..30 {
            assert!(l.density_at(k as f64 * 0.1).unwrap() <= peak);
        }
        let q = integrate(|x| l.density_at(x).unwrap(), 0.0, 3.0, 1e-11, 0.0, 500).unwrap();
        assert!((2.0 * q.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn peak_and_shift_bounds() {
        let p = TriangularSumLaw::new(1.0, 1).unwrap().peak_bound();
        assert!((p - ((3.0 / PI).sqrt() + 2.0 / (PI * PI))).abs() < 1e-15);
        assert!((p - 1.179_85).abs() < 1e-5);
        let p2 = TriangularSumLaw::new(2.0, 1).unwrap().peak_bound();
        assert!((p2 - 0.5 * p).abs() < 1e-15);
        let p100 = TriangularSumLaw::new(1.0, 100).unwrap().peak_bound();
        assert!((p100 - (3.0 / (100.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((p100 - 0.097_72).abs() < 1e-5);
        assert_eq!(lemma1_bound(1.0, 3, 0.0), 0.0);
        assert!((lemma1_bound(1.0, 1, 1.0) - p).abs() < 1e-15);
        assert!((lemma1_bound(0.5, 6, 0.1) - 0.079_788_5).abs() < 1e-7);
    }

    #[test]
    fn exact_shift_distances() {
        let l = TriangularSumLaw::new(1.0, 1).unwrap();
        assert_eq!(l.shift_tv_exact(0.0).unwrap(), 0.0);
        assert!((l.shift_tv_exact(1.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(l.shift_tv_exact(2.0).unwrap(), 1.0);
        assert_eq!(l.shift_tv_exact(5.0).unwrap(), 1.0);
    }

    #[test]
    fn shift_distance_matches_window_integral() {
        // Against adaptive integration of the Irwin–Hall oracle over the window.
        for (a, n, gamma) in [(1.0, 2u32, 0.3), (0.5, 3, 1.0), (2.0, 5, 0.01), (1.0, 4, 5.0)] {
            let l = TriangularSumLaw::new(a, n).unwrap();
            let want = integrate(|x| g_oracle(a, n, x), -0.5 * gamma, 0.5 * gamma, 1e-13, 0.0, 2000)
                .unwrap()
                .value;
            let got = l.shift_tv_exact(gamma).unwrap();
            assert!((got - want).abs() < 1e-10, "a={a} n={n} γ={gamma}: {got} vs {want}");
        }
        // And against quadrature over the inversion density itself.
        let l = TriangularSumLaw::new(1.0, 3).unwrap();
        let direct = integrate(|x| l.density_at(x).unwrap(), -0.25, 0.25, 1e-11, 0.0, 200).unwrap();
        assert!((l.shift_tv_exact(0.5).unwrap() - direct.value).abs() < 1e-9);
    }

    #[test]
    fn shift_distance_is_monotone_in_gamma() {
        let l = TriangularSumLaw::new(1.0, 7).unwrap();
        let mut prev = 0.0;
        for k in 0..40 {
            let v = l.shift_tv_exact(k as f64 * 0.4).unwrap();
            // Monotone up to the 1e−10 quadrature accuracy.
            assert!(v >= prev - 1e-10);
            prev = v;
        }
    }

    #[test]
    fn cosine_inequality() {
        assert!(verify_cosine_inequality(10_000));
        assert!(verify_cosine_inequality(2));
        assert_eq!(psi1(0.0), 1.0);
        assert!(psi1(TAU) < 1e-30);
    }

    #[test]
    fn sweep_has_no_violations() {
        let rows = lemma1_sweep(&[0.5, 1.0, 2.0], 12, &[0.01, 0.1, 1.0]).unwrap();
        assert_eq!(rows.len(), 3 * 12 * 3);
        assert!(rows.iter().all(|r| r.holds), "{:?}", rows.iter().find(|r| !r.holds));
    }
}
