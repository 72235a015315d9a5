//! Numerical checks of the integrability condition
//! `∫_r^∞ p(t) dt ≤ C r p(r)` and the regularity condition
//! `sup_{r ≥ 1} ln p(kr) / ln p(r) < ∞`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::process::PerturbationLaw;

/// A grid ratio counts as growing when the upper half of the grid exceeds
/// the lower half's maximum by more than this factor.
pub const GROWTH_SLACK: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    DivergentIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub r: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntReport {
    pub law: String,
    pub points: Vec<RatioPoint>,
    /// Grid radii where `p(r)` underflows.
    pub skipped: Vec<f64>,
    pub max_ratio: f64,
    pub verdict: Verdict,
}

/// Evaluate `∫_r^∞ p / (r p(r))` on the grid.
pub fn assumption_int_check(law: &PerturbationLaw, r_grid: &[f64]) -> IntReport {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &r in r_grid {
        let p = law.tail_probability(r);
        if !(p > 0.0) || r <= 0.0 {
            skipped.push(r);
            continue;
        }
        match law.integrated_tail(r) {
            Ok(tail) => points.push(RatioPoint { r, ratio: tail / (r * p) }),
            Err(Error::DivergentMean { .. }) => {
                return IntReport {
                    law: law.to_string(),
                    points: Vec::new(),
                    skipped,
                    max_ratio: f64::INFINITY,
                    verdict: Verdict::DivergentIntegral,
                }
            }
            Err(_) => skipped.push(r),
        }
    }
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let verdict = if bounded_on_grid(&ratios) { Verdict::Pass } else { Verdict::Fail };
    IntReport { law: law.to_string(), points, skipped, max_ratio, verdict }
}

/// Finite values whose upper half does not outgrow the lower half.
fn bounded_on_grid(values: &[f64]) -> bool {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mid = values.len().div_ceil(2);
    let lower = values[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let upper = values[mid..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    upper <= GROWTH_SLACK * lower.max(f64::MIN_POSITIVE) || values.len() == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegScale {
    pub k: f64,
    pub points: Vec<RatioPoint>,
    pub max_ratio: f64,
    /// Maximum on a grid refined by `√2` between the same endpoints.
    pub refined_max_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegReport {
    pub law: String,
    pub scales: Vec<RegScale>,
    /// Grid radii skipped because `ln p(r)` is numerically zero.
    pub skipped: Vec<f64>,
    pub pass: bool,
}

/// `ln p(kr) / ln p(r)` per `k`; passes when every maximum is finite and a
/// refined grid does not raise it by more than the growth slack.
pub fn assumption_reg_check(law: &PerturbationLaw, k_list: &[f64], r_grid: &[f64]) -> RegReport {
    let usable = |r: f64| r >= 1.0 && law.tail_probability(r) < 1.0 - 1e-15;
    let skipped: Vec<f64> = r_grid.iter().cloned().filter(|&r| !usable(r)).collect();
    let grid: Vec<f64> = r_grid.iter().cloned().filter(|&r| usable(r)).collect();
    let refined = refine(&grid);
    let ratio = |k: f64, r: f64| law.ln_tail_probability(k * r) / law.ln_tail_probability(r);
    let scales: Vec<RegScale> = k_list
        .iter()
        .map(|&k| {
            let points: Vec<RatioPoint> = grid.iter().map(|&r| RatioPoint { r, ratio: ratio(k, r) }).collect();
            let max_ratio = points.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
            let refined_max_ratio = refined.iter().map(|&r| ratio(k, r)).fold(f64::NEG_INFINITY, f64::max);
            let pass = k >= 1.0
                && max_ratio.is_finite()
                && refined_max_ratio.is_finite()
                && refined_max_ratio <= GROWTH_SLACK * max_ratio;
            RegScale { k, points, max_ratio, refined_max_ratio, pass }
        })
        .collect();
    let pass = !scales.is_empty() && !grid.is_empty() && scales.iter().all(|s| s.pass);
    RegReport { law: law.to_string(), scales, skipped, pass }
}

fn refine(grid: &[f64]) -> Vec<f64> {
    let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut r = lo;
    while r < hi * (1.0 - 1e-12) {
        out.push(r);
        r *= std::f64::consts::SQRT_2;
    }
    out.push(hi);
    out
}

/// Radii `2^0, 2^1, …` up to the largest with `ln p(r) > min_log_p`.
pub fn default_r_grid(law: &PerturbationLaw, min_log_p: f64, max_r: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = 1.0;
    while r <= max_r && law.ln_tail_probability(r) > min_log_p {
        out.push(r);
        r *= 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

    #[test]
    fn polynomial_int_ratio_closed_form() {
        let law = PerturbationLaw::poly_coord(2.0, 1).unwrap();
        let rep = assumption_int_check(&law, &GRID);
        assert_eq!(rep.verdict, Verdict::Pass);
        for p in &rep.points {
            // ∫_r^∞ t^{-2} dt / (r · r^{-2}) = 1
            assert!((p.ratio - 1.0).abs() < 1e-12, "{p:?}");
        }
        let law = PerturbationLaw::poly_coord(0.5, 1).unwrap();
        assert_eq!(assumption_int_check(&law, &GRID).verdict, Verdict::DivergentIntegral);
    }

    #[test]
    fn gaussian_int_ratio_below_one() {
        let law = PerturbationLaw::gaussian(1.0, 1).unwrap();
        let rep = assumption_int_check(&law, &GRID);
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(rep.points.iter().all(|p| p.ratio <= 1.0));
    }

    #[test]
    fn reg_ratios() {
        let law = PerturbationLaw::poly_coord(1.5, 1).unwrap();
        let rep = assumption_reg_check(&law, &[1.0, 2.0], &GRID);
        assert!(rep.pass);
        assert_eq!(rep.skipped, vec![1.0]);
        assert!(rep.scales[0].points.iter().all(|p| p.ratio == 1.0));
        for p in &rep.scales[1].points {
            let expect = (2.0 * p.r).ln() / p.r.ln();
            assert!((p.ratio - expect).abs() < 1e-12);
        }
        let law = PerturbationLaw::gaussian(1.0, 1).unwrap();
        let rep = assumption_reg_check(&law, &[2.0], &GRID);
        assert!(rep.pass);
        assert!(rep.scales[0].max_ratio <= 4.0);
    }
}
