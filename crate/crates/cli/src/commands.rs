use std::fmt::Write as _;

use serde::Serialize;

use plm_core::analytics::{
    assumption_int_check, assumption_reg_check, hole_bounds_check, hole_probability_at_cutoff,
    hole_probability_exact, hole_probability_mc, ols, radius_tail_vs_hole, Estimator, Fit, HoleEstimate,
    IntReport, RegReport, TailCurve,
};
use plm_core::cover::{cover_trial, verify_cover_properties, CoverOptions};
use plm_core::matching::{center_match_tail, match_window};
use plm_core::oned::{
    audit_blocking, tail_curve_m0, truncated_moment_curve, variance_exact, BlockingAudit, MomentCurve,
    VarianceExact,
};
use plm_core::rng::trial_seed;
use plm_core::{Error, PerturbationLaw};

use crate::config::{parse_grid, Config, GridSpec};
use crate::{Command, Failure, Output};

/// Fill in per-command defaults and drop fields the command does not read.
pub fn resolve(cmd: Command, cfg: Config) -> Result<Config, Failure> {
    let law = cfg.law.clone().ok_or_else(|| Failure::validation("a law is required (--law)".into()))?;
    let grid = |spec: &Option<GridSpec>, default: &str| -> Result<Option<GridSpec>, Failure> {
        let values = match spec {
            Some(s) => s.values()?,
            None => parse_grid(default)?,
        };
        if values.is_empty() || values.windows(2).any(|w| w[1] <= w[0]) || values.iter().any(|x| !x.is_finite()) {
            return Err(Failure::validation("grids must be nonempty, finite and strictly increasing".into()));
        }
        Ok(Some(GridSpec::List(values)))
    };
    let one_d = matches!(cmd, Command::OnedTail | Command::OnedVariance | Command::OnedMoment);
    if one_d && cfg.d.is_some_and(|d| d != 1) {
        return Err(Failure::validation(format!("{} is one-dimensional", cmd.name())));
    }
    let mut out = Config { command: Some(cmd.name().into()), law: Some(law), d: Some(cfg.d.unwrap_or(1)), ..Default::default() };
    let cover = |out: &mut Config| {
        out.l = Some(cfg.l.unwrap_or(16));
        out.trials = Some(cfg.trials.unwrap_or(10));
        out.seed = Some(cfg.seed.unwrap_or(0));
        out.i_max = cfg.i_max;
        out.reach = cfg.reach;
        let defaults = CoverOptions::default();
        out.audit_threshold = Some(cfg.audit_threshold.unwrap_or(defaults.audit_threshold));
        out.max_retries = Some(cfg.max_retries.unwrap_or(defaults.max_retries));
    };
    let line = |out: &mut Config| {
        let l = cfg.l.unwrap_or(10_000);
        out.l = Some(l);
        out.m = Some(cfg.m.unwrap_or(l));
        out.trials = Some(cfg.trials.unwrap_or(1000));
        out.seed = Some(cfg.seed.unwrap_or(0));
    };
    match cmd {
        Command::HoleExact => {
            out.r = grid(&cfg.r, "2,4,8,16,32")?;
            out.tolerance = Some(cfg.tolerance.unwrap_or(plm_core::analytics::DEFAULT_TOLERANCE));
        }
        Command::HoleMc => {
            out.r = grid(&cfg.r, "1")?;
            out.trials = Some(cfg.trials.unwrap_or(100_000));
            out.seed = Some(cfg.seed.unwrap_or(0));
        }
        Command::HoleBounds => {
            out.r = grid(&cfg.r, "2,4,8,16,32")?;
            out.max_ratio = Some(cfg.max_ratio.unwrap_or(plm_core::analytics::RHO_RATIO_LIMIT));
        }
        Command::Assumptions => {
            out.r = grid(&cfg.r, "1:1024:2")?;
            out.k = Some(cfg.k.clone().unwrap_or(vec![2.0, 3.0]));
        }
        Command::CoverVerify => cover(&mut out),
        Command::MatchTail | Command::RadiusTail => {
            cover(&mut out);
            out.r = grid(&cfg.r, "1,2,4,8")?;
        }
        Command::OnedTail => {
            line(&mut out);
            out.r = grid(&cfg.r, "1:4096:2")?;
            out.audit_trials = Some(cfg.audit_trials.unwrap_or(0));
        }
        Command::OnedMoment => {
            line(&mut out);
            let default: Vec<String> = (0..=10).map(|k| format!("{}", 10f64.powf(2.0 + k as f64 / 10.0).round())).collect();
            out.t = grid(&cfg.t, &default.join(","))?;
            out.reps = Some(cfg.reps.unwrap_or(plm_core::oned::BOOTSTRAP_REPS));
        }
        Command::OnedVariance => {
            out.t = grid(&cfg.t, "16:16384:2")?;
        }
    }
    // surfaces bad law strings and dimensions as validation errors
    law_of(&out)?;
    if out.trials == Some(0) {
        return Err(Failure::validation("trials must be positive".into()));
    }
    Ok(out)
}

fn law_of(cfg: &Config) -> Result<PerturbationLaw, Failure> {
    Ok(PerturbationLaw::parse(cfg.law.as_deref().unwrap_or_default(), cfg.d.unwrap_or(1))?)
}

fn values(g: &Option<GridSpec>) -> Vec<f64> {
    g.as_ref().map(|g| g.values().unwrap_or_default()).unwrap_or_default()
}

fn cover_options(cfg: &Config) -> CoverOptions {
    CoverOptions {
        i_max: cfg.i_max,
        reach: cfg.reach,
        audit_threshold: cfg.audit_threshold.unwrap_or(1e-9),
        max_retries: cfg.max_retries.unwrap_or(3),
    }
}

fn stamped(hash: &str, header: &str) -> String {
    format!("# config_sha256={hash}\n{header}\n")
}

pub fn execute(cmd: Command, cfg: &Config, out: &Output) -> Result<(), Failure> {
    let law = law_of(cfg)?;
    match cmd {
        Command::HoleExact => hole_exact(&law, cfg, out),
        Command::HoleMc => hole_mc(&law, cfg, out),
        Command::HoleBounds => {
            let report = hole_bounds_check(&law, &values(&cfg.r), cfg.max_ratio.unwrap_or(10.0))?;
            out.write_json("hole-bounds.json", &report)
        }
        Command::Assumptions => assumptions(&law, cfg, out),
        Command::CoverVerify => cover_verify(&law, cfg, out),
        Command::MatchTail => match_tail(&law, cfg, out),
        Command::RadiusTail => {
            let report = radius_tail_vs_hole(
                &law,
                cfg.l.unwrap_or(16),
                cfg.trials.unwrap_or(1),
                &values(&cfg.r),
                cfg.seed.unwrap_or(0),
                &cover_options(cfg),
            )?;
            let mut curve = TailCurve::new(Estimator::MonteCarlo, &report.law, report.d, report.trials, report.seed);
            for p in &report.points {
                curve.push(p.r, p.p_hat, p.stderr)?;
            }
            out.write_text("radius-tail.csv", &curve.to_csv(Some(out.hash())))?;
            out.write_json("radius-tail.json", &report)
        }
        Command::OnedTail => oned_tail(&law, cfg, out),
        Command::OnedVariance => oned_variance(&law, cfg, out),
        Command::OnedMoment => oned_moment(&law, cfg, out),
    }
}

#[derive(Serialize)]
struct HoleExactPoint {
    r: f64,
    log_h: f64,
    bound: f64,
    cutoff: i64,
    /// `|log h(r)|` change when the cutoff is doubled.
    doubled_change: f64,
}

#[derive(Serialize)]
struct HoleExactReport {
    law: String,
    d: usize,
    tolerance: f64,
    points: Vec<HoleExactPoint>,
    /// Every doubled-cutoff change lies within its bound.
    bounds_honored: bool,
    /// `ln(-log h)` against `ln r`.
    fit: Option<Fit>,
}

fn hole_exact(law: &PerturbationLaw, cfg: &Config, out: &Output) -> Result<(), Failure> {
    let tol = cfg.tolerance.unwrap_or(1e-6);
    let mut points = Vec::new();
    let mut csv = stamped(out.hash(), "r,log_h,bound,cutoff");
    for r in values(&cfg.r) {
        let h = hole_probability_exact(law, r, tol)?;
        let doubled = hole_probability_at_cutoff(law, r, 2 * h.cutoff.max(1))?;
        let doubled_change = if h.log_h == doubled.log_h { 0.0 } else { (h.log_h - doubled.log_h).abs() };
        writeln!(csv, "{:.16e},{:.16e},{:.16e},{}", h.r, h.log_h, h.bound, h.cutoff).unwrap();
        points.push(HoleExactPoint { r, log_h: h.log_h, bound: h.bound, cutoff: h.cutoff, doubled_change });
    }
    let pairs: Vec<(f64, f64)> =
        points.iter().filter(|p| p.log_h < 0.0 && p.log_h.is_finite()).map(|p| (p.r.ln(), (-p.log_h).ln())).collect();
    let report = HoleExactReport {
        law: law.to_string(),
        d: law.dim(),
        tolerance: tol,
        bounds_honored: points.iter().all(|p| p.doubled_change <= p.bound),
        fit: ols(&pairs).ok(),
        points,
    };
    out.write_text("hole-exact.csv", &csv)?;
    out.write_json("hole-exact.json", &report)
}

#[derive(Serialize)]
struct HoleMcReport {
    law: String,
    d: usize,
    estimates: Vec<HoleEstimate>,
}

fn hole_mc(law: &PerturbationLaw, cfg: &Config, out: &Output) -> Result<(), Failure> {
    let (trials, seed) = (cfg.trials.unwrap_or(1), cfg.seed.unwrap_or(0));
    let mut curve = TailCurve::new(Estimator::MonteCarlo, &law.to_string(), law.dim(), trials, seed);
    let mut estimates = Vec::new();
    for r in values(&cfg.r) {
        let e = hole_probability_mc(law, r, trials, seed)?;
        curve.push(r, e.estimate, e.stderr)?;
        estimates.push(e);
    }
    out.write_text("hole-mc.csv", &curve.to_csv(Some(out.hash())))?;
    out.write_json("hole-mc.json", &HoleMcReport { law: law.to_string(), d: law.dim(), estimates })
}

#[derive(Serialize)]
struct AssumptionsReport {
    int: IntReport,
    reg: RegReport,
}

fn assumptions(law: &PerturbationLaw, cfg: &Config, out: &Output) -> Result<(), Failure> {
    let grid = values(&cfg.r);
    let report = AssumptionsReport {
        int: assumption_int_check(law, &grid),
        reg: assumption_reg_check(law, cfg.k.as_deref().unwrap_or(&[2.0, 3.0]), &grid),
    };
    out.write_json("assumptions.json", &report)
}

#[derive(Serialize)]
struct CoverTrialRow {
    trial: u64,
    attempts: u32,
    i_max: u32,
    partition: bool,
    crossing_bound: bool,
    diameter_ratio: bool,
    counts_consistent: bool,
    matched: usize,
    sites: usize,
    interior_saturated: bool,
    distance_violations: usize,
    error: Option<String>,
}

#[derive(Serialize)]
struct CoverVerifyReport {
    law: String,
    d: usize,
    core_half_width: i64,
    trials: u64,
    cover_pass: u64,
    matching_pass: u64,
    margin_insufficient: u64,
    retried_trials: u64,
    all_pass: bool,
}

fn cover_verify(law: &PerturbationLaw, cfg: &Config, out: &Output) -> Result<(), Failure> {
    use rayon::prelude::*;
    let (l, trials, seed) = (cfg.l.unwrap_or(16), cfg.trials.unwrap_or(1), cfg.seed.unwrap_or(0));
    let opts = cover_options(cfg);
    let rows: Vec<CoverTrialRow> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<CoverTrialRow, Error> {
            let mut row = CoverTrialRow {
                trial: t,
                attempts: 0,
                i_max: 0,
                partition: false,
                crossing_bound: false,
                diameter_ratio: false,
                counts_consistent: false,
                matched: 0,
                sites: 0,
                interior_saturated: false,
                distance_violations: 0,
                error: None,
            };
            let trial = match cover_trial(law, l, trial_seed(seed, t), &opts) {
                Ok(trial) => trial,
                Err(e @ (Error::MarginInsufficient(_) | Error::MarginExceeded(_))) => {
                    row.error = Some(e.kind().into());
                    return Ok(row);
                }
                Err(e) => return Err(e),
            };
            row.attempts = trial.attempts;
            row.i_max = trial.fields.i_max;
            let rep = verify_cover_properties(&trial.realization, &trial.fields)?;
            row.partition = rep.partition;
            row.crossing_bound = rep.crossing_bound;
            row.diameter_ratio = rep.diameter_ratio;
            row.counts_consistent = rep.counts_consistent;
            match match_window(&trial.realization, &trial.fields, trial.realization.core()) {
                Ok(m) => {
                    row.matched = m.result.matched_count();
                    row.sites = m.result.sites.len();
                    row.interior_saturated = true;
                    row.distance_violations = m.distance_violations.len();
                }
                Err(e @ Error::InteriorUnsaturated { .. }) => row.error = Some(e.kind().into()),
                Err(e) => return Err(e),
            }
            Ok(row)
        })
        .collect::<Result<_, _>>()?;
    let mut csv = stamped(
        out.hash(),
        "trial,attempts,i_max,partition,crossing_bound,diameter_ratio,counts_consistent,matched,sites,interior_saturated,distance_violations,error",
    );
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.attempts,
            r.i_max,
            r.partition,
            r.crossing_bound,
            r.diameter_ratio,
            r.counts_consistent,
            r.matched,
            r.sites,
            r.interior_saturated,
            r.distance_violations,
            r.error.as_deref().unwrap_or("")
        )
        .unwrap();
    }
    let cover_ok = |r: &CoverTrialRow| r.partition && r.crossing_bound && r.diameter_ratio && r.counts_consistent;
    let match_ok = |r: &CoverTrialRow| r.interior_saturated && r.distance_violations == 0;
    let report = CoverVerifyReport {
        law: law.to_string(),
        d: law.dim(),
        core_half_width: l,
        trials,
        cover_pass: rows.iter().filter(|r| cover_ok(r)).count() as u64,
        matching_pass: rows.iter().filter(|r| match_ok(r)).count() as u64,
        margin_insufficient: rows.iter().filter(|r| r.error.as_deref() == Some("MarginInsufficient")).count() as u64,
        retried_trials: rows.iter().filter(|r| r.attempts > 1).count() as u64,
        all_pass: rows.iter().all(|r| cover_ok(r) && match_ok(r)),
    };
    out.write_text("cover-verify.csv", &csv)?;
    out.write_json("cover-verify.json", &report)
}

#[derive(Serialize)]
struct MatchTailReport {
    law: String,
    d: usize,
    core_half_width: i64,
    trials: u64,
    unmatched_center: u64,
    distance_violations: u64,
    retried_trials: u64,
}

fn match_tail(law: &PerturbationLaw, cfg: &Config, out: &Output) -> Result<(), Failure> {
    let (l, trials) = (cfg.l.unwrap_or(16), cfg.trials.unwrap_or(1));
    let tail = center_match_tail(law, l, trials, &values(&cfg.r), cfg.seed.unwrap_or(0), &cover_options(cfg))?;
    let report = MatchTailReport {
        law: law.to_string(),
        d: law.dim(),
        core_half_width: l,
        trials,
        unmatched_center: tail.samples.iter().filter(|x| x.is_infinite()).count() as u64,
        distance_violations: tail.distance_violations,
        retried_trials: tail.retried_trials,
    };
    out.write_text("match-tail.csv", &tail.curve.to_csv(Some(out.hash())))?;
    out.write_json("match-tail.json", &report)
}

#[derive(Serialize)]
struct OnedTailReport {
    law: String,
    core_half_width: i64,
    margin: i64,
    trials: u64,
    flagged: u64,
    /// `ln P̂(|M(0)| > r)` against `ln r` over the resolvable radii.
    fit: Option<Fit>,
    audit: Option<BlockingAudit>,
}

fn oned_tail(law: &PerturbationLaw, cfg: &Config, out: &Output) -> Result<(), Failure> {
    let (l, m, trials, seed) = (cfg.l.unwrap_or(1), cfg.m.unwrap_or(0), cfg.trials.unwrap_or(1), cfg.seed.unwrap_or(0));
    let tail = tail_curve_m0(law, l, m, trials, &values(&cfg.r), seed)?;
    let audit = match cfg.audit_trials.unwrap_or(0) {
        0 => None,
        n => Some(audit_blocking(law, l, m, trials, n, seed)?),
    };
    let report =
        OnedTailReport { law: law.to_string(), core_half_width: l, margin: m, trials, flagged: tail.flagged, fit: tail.fit, audit };
    out.write_text("oned-tail.csv", &tail.curve.to_csv(Some(out.hash())))?;
    out.write_json("oned-tail.json", &report)
}

#[derive(Serialize)]
struct VarianceReport {
    law: String,
    points: Vec<VarianceExact>,
    /// `ln Var` against `ln t`.
    fit: Option<Fit>,
}

fn oned_variance(law: &PerturbationLaw, cfg: &Config, out: &Output) -> Result<(), Failure> {
    let mut points = Vec::new();
    let mut csv = stamped(out.hash(), "t,variance,remainder_bound,cutoff");
    for t in values(&cfg.t) {
        if t.fract() != 0.0 {
            return Err(Failure::validation(format!("window lengths must be integers, got {t}")));
        }
        let v = variance_exact(law, t as i64)?;
        writeln!(csv, "{},{:.16e},{:.16e},{}", v.t, v.variance, v.remainder_bound, v.cutoff).unwrap();
        points.push(v);
    }
    let pairs: Vec<(f64, f64)> =
        points.iter().filter(|v| v.variance > 0.0).map(|v| ((v.t as f64).ln(), v.variance.ln())).collect();
    out.write_text("oned-variance.csv", &csv)?;
    out.write_json("oned-variance.json", &VarianceReport { law: law.to_string(), points, fit: ols(&pairs).ok() })
}

fn oned_moment(law: &PerturbationLaw, cfg: &Config, out: &Output) -> Result<(), Failure> {
    let alpha = law
        .alpha()
        .filter(|&a| a < 1.0)
        .ok_or_else(|| Failure::validation("the moment diagnostic needs a polynomial law with alpha < 1".into()))?;
    let (l, m, trials, seed) = (cfg.l.unwrap_or(1), cfg.m.unwrap_or(0), cfg.trials.unwrap_or(1), cfg.seed.unwrap_or(0));
    let tail = tail_curve_m0(law, l, m, trials, &[1.0], seed)?;
    let curve: MomentCurve =
        truncated_moment_curve(&tail.samples, alpha, &values(&cfg.t), cfg.reps.unwrap_or(1000), seed);
    out.write_text("oned-moment.csv", &curve.to_csv(Some(out.hash())))?;
    out.write_json("oned-moment.json", &curve)
}
