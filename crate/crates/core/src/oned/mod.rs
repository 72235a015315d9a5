//! Greedy stable matching on the line, the discrepancy `F(r) = r - Π[0, r)`,
//! exact count variances and the truncated-moment diagnostic.

mod moment;
mod sample;
mod stable;
mod variance;

pub use moment::{truncated_moment_curve, MomentCurve, MomentPoint, MomentVerdict, BOOTSTRAP_REPS};
pub use sample::{sample_line, LinePoint, LineSample};
pub use stable::{greedy_stable_match, stable_match_on, BlockingPair, StableMatch, UNMATCHED};
pub use variance::{variance_exact, variance_identity_sides, VarianceExact};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{fit_loglog, Estimator, Fit, TailCurve, Transform};
use crate::error::{Error, Result};
use crate::process::PerturbationLaw;
use crate::rng::{rng_from, stream_seed, trial_seed};

/// Per-site probability above which an unsampled site could reach the
/// counted interval.
pub const MARGIN_AUDIT: f64 = 1e-9;

/// `F(r) = r - Π[0, r)`.
pub fn discrepancy_f(sample: &LineSample, r: f64) -> Result<f64> {
    if !(r >= 0.0) || r > sample.core_half_width() as f64 {
        return Err(Error::InvalidParameter(format!("r = {r} outside [0, L]")));
    }
    sample.audit_interval(0.0, r, MARGIN_AUDIT)?;
    Ok(r - sample.count_in(0.0, r) as f64)
}

/// `F(r)` for `r = 0, 1, …, t`.
pub fn discrepancy_path(sample: &LineSample, t: i64) -> Result<Vec<i64>> {
    if t < 0 || t > sample.core_half_width() {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0, L]")));
    }
    sample.audit_interval(0.0, t as f64, MARGIN_AUDIT)?;
    let pts = sample.points();
    let mut i = pts.partition_point(|p| p.x < 0.0);
    let mut count = 0i64;
    let mut out = Vec::with_capacity(t as usize + 1);
    for r in 0..=t {
        while i < pts.len() && pts[i].x < r as f64 {
            count += 1;
            i += 1;
        }
        out.push(r - count);
    }
    Ok(out)
}

/// One greedy stable matching trial; the window is `[-(L + M), L + M]`.
pub fn stable_match_trial(law: &PerturbationLaw, l: i64, m: i64, seed: u64) -> Result<(LineSample, StableMatch)> {
    let sample = sample_line(law, l, m, seed)?;
    let matching = greedy_stable_match(&sample);
    Ok((sample, matching))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M0Tail {
    pub curve: TailCurve,
    /// `|M(0)|` per trial, `∞` when the origin was left unmatched.
    pub samples: Vec<f64>,
    /// Trials with `|M(0)| > L/2` or no partner.
    pub flagged: u64,
    /// Fit over the radii with at least `MIN_EXCEEDANCES` exceedances.
    pub fit: Option<Fit>,
}

pub const MIN_EXCEEDANCES: u64 = 10;

/// Empirical `P(|M(0)| > r)` over independent greedy stable matchings.
pub fn tail_curve_m0(
    law: &PerturbationLaw,
    l: i64,
    m: i64,
    trials: u64,
    r_grid: &[f64],
    seed: u64,
) -> Result<M0Tail> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (_, matching) = stable_match_trial(law, l, m, trial_seed(seed, t))?;
            Ok(matching.distance(0).unwrap_or(f64::INFINITY))
        })
        .collect::<Result<_>>()?;
    let half = l as f64 / 2.0;
    let flagged = samples.iter().filter(|&&x| x > half).count() as u64;
    if flagged * 1000 > trials {
        return Err(Error::WindowTooSmall { flagged, trials });
    }
    let curve = tail_curve_from_samples(&samples, r_grid, law, seed)?;
    let n = trials as f64;
    let mut resolvable = curve.clone();
    resolvable.points.retain(|p| p.value * n >= MIN_EXCEEDANCES as f64);
    let fit = fit_loglog(&resolvable, Transform::LogLog).ok();
    Ok(M0Tail { curve, samples, flagged, fit })
}

/// Empirical tail `P̂(X > r)` with binomial standard errors.
pub fn tail_curve_from_samples(samples: &[f64], r_grid: &[f64], law: &PerturbationLaw, seed: u64) -> Result<TailCurve> {
    let n = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut curve = TailCurve::new(Estimator::MonteCarlo, &law.to_string(), law.dim(), samples.len() as u64, seed);
    for &r in r_grid {
        let exceed = (sorted.len() - sorted.partition_point(|&x| x <= r)) as f64;
        let p = exceed / n;
        curve.push(r, p, (p * (1.0 - p) / n).sqrt())?;
    }
    Ok(curve)
}

/// Largest `|F(r)|` over `r ∈ [0, t]` for each `t` of the grid, read off one
/// path.
pub fn max_abs_discrepancy(sample: &LineSample, t_grid: &[i64]) -> Result<Vec<i64>> {
    let t_max = t_grid.iter().cloned().max().unwrap_or(0);
    let path = discrepancy_path(sample, t_max)?;
    let mut running = Vec::with_capacity(path.len());
    let mut best = 0i64;
    for f in &path {
        best = best.max(f.abs());
        running.push(best);
    }
    Ok(t_grid.iter().map(|&t| running[t as usize]).collect())
}

/// Blocking pairs found by re-running a random subset of the trials of
/// [`tail_curve_m0`] with the same seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingAudit {
    pub audited: Vec<u64>,
    pub blocking_pairs: u64,
    /// Trials with at least one blocking pair.
    pub failing_trials: Vec<u64>,
}

pub fn audit_blocking(law: &PerturbationLaw, l: i64, m: i64, trials: u64, count: u64, seed: u64) -> Result<BlockingAudit> {
    let count = count.min(trials);
    let mut rng = rng_from(stream_seed(seed, "audit"));
    let mut audited: Vec<u64> =
        rand::seq::index::sample(&mut rng, trials as usize, count as usize).iter().map(|i| i as u64).collect();
    audited.sort_unstable();
    let found: Vec<(u64, u64)> = audited
        .par_iter()
        .map(|&t| {
            let (_, matching) = stable_match_trial(law, l, m, trial_seed(seed, t))?;
            Ok((t, matching.blocking_pairs().len() as u64))
        })
        .collect::<Result<_>>()?;
    Ok(BlockingAudit {
        blocking_pairs: found.iter().map(|f| f.1).sum(),
        failing_trials: found.iter().filter(|f| f.1 > 0).map(|f| f.0).collect(),
        audited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrepancy_examples() {
        let law = PerturbationLaw::zero(1);
        let s = sample_line(&law, 10, 2, 0).unwrap();
        assert_eq!(discrepancy_f(&s, 10.0).unwrap(), 0.0);
        let law = PerturbationLaw::poly_coord(2.0, 1).unwrap();
        let xs = [-0.2, 0.1, 1.2, 1.3, 4.9, 5.0, 6.5];
        let pts = xs.iter().enumerate().map(|(i, &x)| LinePoint { x, label: i as i64 }).collect();
        let s = LineSample::from_points(&law, 6, 0, pts).unwrap();
        assert_eq!(discrepancy_f(&s, 5.0).unwrap(), 1.0);
        assert_eq!(discrepancy_path(&s, 5).unwrap(), vec![0, 0, -1, 0, 1, 1]);
    }

    #[test]
    fn gaussian_margin_audit() {
        let law = PerturbationLaw::gaussian(1.0, 1).unwrap();
        let s = sample_line(&law, 20, 0, 0).unwrap();
        assert!(matches!(discrepancy_f(&s, 20.0), Err(Error::MarginExceeded(_))));
        let s = sample_line(&law, 20, 8, 0).unwrap();
        assert!(discrepancy_f(&s, 20.0).is_ok());
    }

    #[test]
    fn point_mass_tail_is_zero() {
        let law = PerturbationLaw::zero(1);
        let t = tail_curve_m0(&law, 16, 16, 20, &[0.5, 1.0, 2.0], 1).unwrap();
        assert!(t.curve.values().iter().all(|&v| v == 0.0));
        assert_eq!(t.flagged, 0);
    }

    #[test]
    fn audit_picks_distinct_trials() {
        let law = PerturbationLaw::poly_coord(0.5, 1).unwrap();
        let a = audit_blocking(&law, 50, 50, 40, 10, 3).unwrap();
        assert_eq!(a.audited.len(), 10);
        assert!(a.audited.windows(2).all(|w| w[0] < w[1] && w[1] < 40));
        assert_eq!(a.blocking_pairs, 0);
    }
}
