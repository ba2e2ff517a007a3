//! Subcommand implementations and the exit-code mapping.

use crate::output::{csv_bytes, emit, envelope, num};
use crate::{Cli, Command, GlobalOpts, Kind};
use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use tvclt::dichotomy::{delta_series, fit_rate};
use tvclt::dist::{affine, moments, MixtureDistribution};
use tvclt::family::{make_family, FamilySpec, SamplingOptions};
use tvclt::stein::{random_stein_checks, solve_stein, theorem_bound_rhs, BorelSetSpec, SteinCheckRow};
use tvclt::triangular::{lemma1_sweep, verify_cosine_inequality};
use tvclt::tvmetric::{kolmogorov_to_normal, tv_to_normal};
use tvclt::{build_certificate, kolmogorov_distance, self_convolve, tv_distance, tv_to_matched_normal};

/// Upper end of sup|f′| accepted by `stein-check`.
const STEIN_DERIVATIVE_CAP: f64 = 2.0 + 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Verification = 1,
    Usage = 2,
    Nonconvergence = 3,
}

impl Exit {
    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

/// A failed check; the report has already been written.
#[derive(Debug)]
struct Violation(String);

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Violation {}

pub fn run(cli: Cli) -> Exit {
    if let Some(threads) = cli.global.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return Exit::Usage;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    }
    let config = serde_json::json!({
        "command": &cli.command,
        "grid_points": cli.global.grid_points,
        "tolerance": cli.global.tolerance,
        "seed": cli.global.seed,
    });
    match dispatch(&cli.command, &cli.global, &config) {
        Ok(()) => Exit::Ok,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify(&e)
        }
    }
}

fn classify(e: &anyhow::Error) -> Exit {
    if e.downcast_ref::<Violation>().is_some() {
        return Exit::Verification;
    }
    match e.downcast_ref::<tvclt::Error>() {
        Some(err) if err.is_nonconvergence() => Exit::Nonconvergence,
        Some(tvclt::Error::MixedBranch) => Exit::Verification,
        _ => Exit::Usage,
    }
}

fn load_spec(path: &Path, g: &GlobalOpts) -> anyhow::Result<MixtureDistribution> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = FamilySpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(make_family(&spec, SamplingOptions::with_intervals(g.grid_points))?)
}

fn ensure_finite(name: &str, x: f64) -> anyhow::Result<()> {
    if !x.is_finite() {
        bail!("--{name} must be finite, got {x}");
    }
    Ok(())
}

fn dispatch(cmd: &Command, g: &GlobalOpts, config: &Value) -> anyhow::Result<()> {
    ensure_finite("tolerance", g.tolerance)?;
    match cmd {
        Command::Tv { spec_a, spec_b, n, gamma, kind, out } => {
            ensure_finite("gamma", *gamma)?;
            let a = self_convolve(&load_spec(spec_a, g)?, *n)?;
            let report = match spec_b {
                None if *gamma == 0.0 && *kind == Kind::Tv => tv_to_matched_normal(&load_spec(spec_a, g)?, *n)?,
                None => {
                    let m = moments(&a);
                    if m.variance <= 0.0 {
                        bail!("no matched normal for a degenerate law; pass --spec-b");
                    }
                    let (mean, sd) = (m.mean + gamma, m.variance.sqrt());
                    match kind {
                        Kind::Tv => tv_to_normal(&a, mean, sd),
                        Kind::Kolmogorov => kolmogorov_to_normal(&a, mean, sd),
                    }
                }
                Some(path) => {
                    let b = affine(&self_convolve(&load_spec(path, g)?, *n)?, 1.0, *gamma)?;
                    match kind {
                        Kind::Tv => tv_distance(&a, &b),
                        Kind::Kolmogorov => kolmogorov_distance(&a, &b),
                    }
                }
            };
            emit(out.as_deref(), &envelope(&report, config)?)
        }
        Command::Convolve { spec, n, out, meta_out } => {
            let f = load_spec(spec, g)?;
            let (s, plan) = tvclt::convolve::self_convolve_with(&f, *n, &Default::default())?;
            let d = &s.density;
            let rows = (0..d.len()).map(|i| vec![num(d.node(i)), num(d.values()[i])]);
            emit(Some(out), &csv_bytes(&["x", "density"], rows)?)?;
            #[derive(Serialize)]
            struct Meta<'a> {
                n: u64,
                atoms: &'a [(f64, f64)],
                ac_weight: f64,
                error_budget: f64,
                grid_points: usize,
                domain: (f64, f64),
            }
            let meta = Meta {
                n: *n,
                atoms: s.atomic.atoms(),
                ac_weight: s.ac_weight(),
                error_budget: s.error_budget,
                grid_points: plan.grid_points,
                domain: plan.domain,
            };
            let meta_path = meta_out.clone().unwrap_or_else(|| out.with_extension("json"));
            emit(Some(&meta_path), &envelope(&meta, config)?)
        }
        Command::DeltaSeries { spec, n_list, out } => {
            let f = load_spec(spec, g)?;
            let reports = delta_series(&f, n_list)?;
            let rows = n_list
                .iter()
                .zip(&reports)
                .map(|(n, r)| vec![n.to_string(), num(r.value), num(r.tolerance)]);
            emit(out.as_deref(), &csv_bytes(&["n", "delta", "tolerance"], rows)?)
        }
        Command::RateFit { input, out } => {
            let series = read_series(input)?;
            let fit = fit_rate(&series)?;
            emit(out.as_deref(), &envelope(&fit, config)?)
        }
        Command::Lemma1Verify { a_list, n_max, gamma_list, cosine_samples, out } => {
            if *n_max == 0 {
                bail!("--n-max must be at least 1");
            }
            let rows = lemma1_sweep(a_list, *n_max, gamma_list)?;
            let violations = rows.iter().filter(|r| r.exact > r.bound + g.tolerance).count();
            let csv = rows.iter().map(|r| {
                vec![
                    num(r.a),
                    r.n.to_string(),
                    num(r.gamma),
                    num(r.exact),
                    num(r.bound),
                    (r.exact <= r.bound + g.tolerance).to_string(),
                ]
            });
            emit(out.as_deref(), &csv_bytes(&["a", "n", "gamma", "exact", "bound", "holds"], csv)?)?;
            if violations > 0 {
                return Err(Violation(format!("{violations} of {} sweep points violate the bound", rows.len())).into());
            }
            if *cosine_samples > 0 && !verify_cosine_inequality(*cosine_samples) {
                return Err(Violation("cosine inequality failed".into()).into());
            }
            Ok(())
        }
        Command::Decompose { spec, out, residual_out } => {
            let f = load_spec(spec, g)?;
            let cert = build_certificate(&f)?;
            #[derive(Serialize)]
            struct Report<'a> {
                #[serde(flatten)]
                summary: tvclt::decompose::CertificateSummary,
                residual_atoms: &'a [(f64, f64)],
                residual_error_budget: f64,
            }
            let report = Report {
                summary: cert.summary(),
                residual_atoms: cert.residual.atomic.atoms(),
                residual_error_budget: cert.residual.error_budget,
            };
            emit(out.as_deref(), &envelope(&report, config)?)?;
            let residual_path = residual_out
                .clone()
                .or_else(|| out.as_ref().map(|p| p.with_extension("residual.csv")));
            if let Some(path) = residual_path {
                let d = &cert.residual.density;
                let rows = (0..d.len()).map(|i| vec![num(d.node(i)), num(d.values()[i])]);
                emit(Some(&path), &csv_bytes(&["x", "density"], rows)?)?;
            }
            Ok(())
        }
        Command::ShiftBound { spec, n, gamma, check, out } => {
            ensure_finite("gamma", *gamma)?;
            let f = load_spec(spec, g)?;
            let b = tvclt::lemma3_bound(&f, *n, *gamma)?;
            let exact = if *check { Some(tvclt::shift_tv(&f, *n, *gamma)?) } else { None };
            #[derive(Serialize)]
            struct Report {
                #[serde(flatten)]
                breakdown: tvclt::ShiftBoundBreakdown,
                #[serde(skip_serializing_if = "Option::is_none")]
                exact: Option<tvclt::DistanceReport>,
            }
            emit(out.as_deref(), &envelope(&Report { breakdown: b, exact }, config)?)?;
            if let Some(e) = exact {
                if b.total.min(1.0) < e.value - e.tolerance - g.tolerance {
                    return Err(Violation(format!("bound {} below exact {}", b.total, e.value)).into());
                }
            }
            Ok(())
        }
        Command::SteinCheck { sets, max_residual, out } => {
            let rows = stein_rows(sets, g.seed)?;
            let ok = |r: &SteinCheckRow| {
                r.residual <= max_residual + g.tolerance && r.sup_f_prime <= STEIN_DERIVATIVE_CAP + g.tolerance
            };
            let csv = rows.iter().map(|r| {
                vec![
                    r.index.to_string(),
                    r.intervals.to_string(),
                    num(r.nh),
                    num(r.sup_f_prime),
                    num(r.residual),
                    ok(r).to_string(),
                ]
            });
            emit(out.as_deref(), &csv_bytes(&["index", "intervals", "nh", "sup_f_prime", "residual", "ok"], csv)?)?;
            let bad = rows.iter().filter(|r| !ok(r)).count();
            if bad > 0 {
                return Err(Violation(format!("{bad} of {} sets failed", rows.len())).into());
            }
            Ok(())
        }
        Command::BoundRhs { spec, n, check, out } => {
            let f = load_spec(spec, g)?;
            if moments(&f).abs_third.is_none() {
                bail!("the law needs a finite third absolute moment");
            }
            let rhs = theorem_bound_rhs(&f, *n)?;
            let delta = if *check { Some(tv_to_matched_normal(&f, *n)?) } else { None };
            #[derive(Serialize)]
            struct Report {
                #[serde(flatten)]
                rhs: tvclt::stein::BoundRhs,
                #[serde(skip_serializing_if = "Option::is_none")]
                delta: Option<tvclt::DistanceReport>,
            }
            emit(out.as_deref(), &envelope(&Report { rhs, delta }, config)?)?;
            if let Some(d) = delta {
                if d.value > rhs.value + rhs.tolerance + d.tolerance + g.tolerance {
                    return Err(Violation(format!("Δ_n = {} exceeds the bound {}", d.value, rhs.value)).into());
                }
            }
            Ok(())
        }
    }
}

fn stein_rows(sets: &str, seed: u64) -> anyhow::Result<Vec<SteinCheckRow>> {
    if let Some(k) = sets.strip_prefix("random:") {
        let count: usize = k.parse().map_err(|_| anyhow!("bad set count in --sets {sets}"))?;
        if count == 0 {
            bail!("--sets needs at least one set");
        }
        return Ok(random_stein_checks(seed, count));
    }
    if let Some(list) = sets.strip_prefix("intervals:") {
        let mut intervals = Vec::new();
        for part in list.split(',').filter(|p| !p.is_empty()) {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| anyhow!("interval {part} is not LO:HI"))?;
            intervals.push((parse_bound(lo)?, parse_bound(hi)?));
        }
        let set = BorelSetSpec::new(intervals)?;
        let sol = solve_stein(&set);
        return Ok(vec![SteinCheckRow {
            index: 0,
            intervals: set.intervals().len(),
            nh: sol.nh,
            sup_f_prime: sol.sup_f_prime,
            residual: sol.residual,
        }]);
    }
    bail!("--sets must be random:K or intervals:LO:HI,…")
}

fn parse_bound(s: &str) -> anyhow::Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| anyhow!("bad interval end {t}")),
    }
}

/// Reads `(n, delta, tolerance)` rows; a missing tolerance column counts as zero.
fn read_series(path: &PathBuf) -> anyhow::Result<Vec<(u64, f64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (ni, di) = match (col("n"), col("delta")) {
        (Some(a), Some(b)) => (a, b),
        _ => bail!("{} needs n and delta columns", path.display()),
    };
    let ti = col("tolerance");
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
        let n: u64 = field(ni).parse().with_context(|| format!("row {}: bad n", line + 1))?;
        let d: f64 = field(di).parse().with_context(|| format!("row {}: bad delta", line + 1))?;
        let t: f64 = match ti {
            Some(i) => field(i).parse().with_context(|| format!("row {}: bad tolerance", line + 1))?,
            None => 0.0,
        };
        out.push((n, d, t));
    }
    Ok(out)
}
