//! Empirical tail of the cover radius `R_0` at the central site against the
//! exact hole probability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hole::{hole_probability_exact, DEFAULT_TOLERANCE};
use crate::cover::{cover_trial, CoverOptions};
use crate::error::{Error, Result};
use crate::process::PerturbationLaw;
use crate::rng::trial_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusPoint {
    pub r: f64,
    /// `P̂(R_0 > r)`.
    pub p_hat: f64,
    pub stderr: f64,
    pub log_h: f64,
    /// `ln P̂ / ln h`, absent where `P̂ = 0`.
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusTailReport {
    pub law: String,
    pub d: usize,
    pub core_half_width: i64,
    pub trials: u64,
    pub seed: u64,
    pub points: Vec<RadiusPoint>,
    /// Minimum exponent over resolvable radii.
    pub c_star: f64,
    pub below_half_power: bool,
    pub pass: bool,
    /// Trials that needed a retry to build the cover.
    pub retried_trials: u64,
}

/// Sample `R_0` over independent covers of `[-L, L]^d` and compare
/// `P̂(R_0 > r)` with `h(r)`. Fails with `Unresolvable` when no trial exceeds
/// any grid radius past the first.
pub fn radius_tail_vs_hole(
    law: &PerturbationLaw,
    l: i64,
    trials: u64,
    r_grid: &[f64],
    seed: u64,
    opts: &CoverOptions,
) -> Result<RadiusTailReport> {
    if trials == 0 || r_grid.is_empty() {
        return Err(Error::InvalidParameter("need at least one trial and one radius".into()));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("radius grid must increase".into()));
    }
    let d = law.dim();
    let center = vec![0i64; d];
    let samples: Vec<(u64, u32)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial = cover_trial(law, l, trial_seed(seed, t), opts)?;
            let r0 = trial.fields.radius(&center).expect("center lies in the core");
            Ok((r0, trial.attempts))
        })
        .collect::<Result<_>>()?;
    let n = trials as f64;
    let mut points = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let exceed = samples.iter().filter(|&&(r0, _)| r0 as f64 > r).count() as f64;
        let p_hat = exceed / n;
        let log_h = hole_probability_exact(law, r, DEFAULT_TOLERANCE)?.log_h;
        let exponent = (p_hat > 0.0).then(|| p_hat.ln() / log_h);
        points.push(RadiusPoint { r, p_hat, stderr: (p_hat * (1.0 - p_hat) / n).sqrt(), log_h, exponent });
    }
    let retried_trials = samples.iter().filter(|s| s.1 > 1).count() as u64;
    let trivially_zero = points.iter().all(|p| p.p_hat == 0.0);
    if !trivially_zero && points[1..].iter().all(|p| p.p_hat == 0.0) {
        return Err(Error::Unresolvable(format!(
            "no trial had R_0 > {} among {trials}",
            points.get(1).map_or(points[0].r, |p| p.r)
        )));
    }
    let c_star = points.iter().filter_map(|p| p.exponent).fold(f64::INFINITY, f64::min);
    let below_half_power = points
        .iter()
        .filter(|p| p.p_hat > 0.0)
        .all(|p| p.p_hat.ln() <= 0.5 * c_star * p.log_h);
    // with no exceedances at all the tail bound holds for any exponent
    let pass = trivially_zero || (c_star > 0.0 && c_star.is_finite() && below_half_power);
    Ok(RadiusTailReport {
        law: law.to_string(),
        d,
        core_half_width: l,
        trials,
        seed,
        points,
        c_star,
        below_half_power,
        pass,
        retried_trials,
    })
}
