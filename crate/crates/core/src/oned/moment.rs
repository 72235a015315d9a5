//! `E[X ∧ t] / t^{(1-α)/2}` with bootstrap bands, as a diagnostic for
//! `E[X^{(1+α)/2}] = ∞`: the normalized curve stays bounded below when the
//! moment is infinite and decays when it is finite.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::ols;
use crate::rng::{rng_from, stream_seed};

pub const BOOTSTRAP_REPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub t: f64,
    pub normalized_mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentVerdict {
    BoundedBelow,
    DecayingToZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub alpha: f64,
    pub points: Vec<MomentPoint>,
    /// Log-log slope of the normalized curve against `t`.
    pub slope: Option<f64>,
    pub verdict: MomentVerdict,
}

impl MomentCurve {
    pub fn to_csv(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = config_hash {
            writeln!(out, "# config_sha256={h}").unwrap();
        }
        out.push_str("t,normalized_mean,ci_lo,ci_hi\n");
        for p in &self.points {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", p.t, p.normalized_mean, p.ci_lo, p.ci_hi).unwrap();
        }
        out
    }
}

/// Normalized truncated means with percentile bootstrap 95% bands. The
/// verdict is `BoundedBelow` when every lower band is positive and the
/// fitted slope stays above `-(1-α)/4`, half the decay a finite moment
/// eventually forces.
pub fn truncated_moment_curve(samples: &[f64], alpha: f64, t_grid: &[f64], reps: usize, seed: u64) -> MomentCurve {
    let e = (1.0 - alpha) / 2.0;
    let n = samples.len();
    let norm: Vec<f64> = t_grid.iter().map(|t| t.powf(e)).collect();
    let mean_at = |t: f64, idx: &mut dyn Iterator<Item = usize>| -> f64 {
        idx.map(|i| samples[i].min(t)).sum::<f64>() / n.max(1) as f64
    };
    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); t_grid.len()];
    if n > 0 {
        let mut rng = rng_from(stream_seed(seed, "bootstrap"));
        let mut idx = vec![0usize; n];
        for _ in 0..reps {
            for i in idx.iter_mut() {
                *i = rng.random_range(0..n);
            }
            for (k, &t) in t_grid.iter().enumerate() {
                boot[k].push(mean_at(t, &mut idx.iter().cloned()) / norm[k]);
            }
        }
    }
    let points: Vec<MomentPoint> = t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let normalized_mean = mean_at(t, &mut (0..n)) / norm[k];
            let b = &mut boot[k];
            b.sort_by(f64::total_cmp);
            let (ci_lo, ci_hi) = if b.is_empty() {
                (normalized_mean, normalized_mean)
            } else {
                (percentile(b, 0.025), percentile(b, 0.975))
            };
            MomentPoint { t, normalized_mean, ci_lo, ci_hi }
        })
        .collect();
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.normalized_mean > 0.0 && p.t > 0.0)
        .map(|p| (p.t.ln(), p.normalized_mean.ln()))
        .collect();
    let slope = ols(&pts).ok().map(|f| f.slope);
    let bounded = !points.is_empty()
        && points.iter().all(|p| p.ci_lo > 0.0)
        && slope.is_none_or(|s| s > -(1.0 - alpha) / 4.0);
    let verdict = if bounded { MomentVerdict::BoundedBelow } else { MomentVerdict::DecayingToZero };
    MomentCurve { alpha, points, slope, verdict }
}

/// Linear-interpolation percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}
