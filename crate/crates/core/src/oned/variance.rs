//! `Var Π[0, t)` for a symmetric one-dimensional law.
//!
//! `Π[0, t)` is a sum of independent indicators with means
//! `q_k = P(k + ξ ∈ [0, t))`, and `Σ_k q_k = t` for integer `t` and a
//! continuous law, so `Var = t - Σ_k q_k²`. By symmetry the sites outside
//! `[0, t)` contribute `g(0)² + 2 Σ_{j ≥ 1} g(j)²` with
//! `g(j) = P(ξ ∈ [j, j + t))`. The squared terms decay like `j^{-2α-2}`, so
//! the series is summed directly until its terms are small and closed with
//! integrals that bracket the rest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{LawKind, PerturbationLaw};
use crate::special::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceExact {
    pub t: i64,
    pub variance: f64,
    /// Bound on the error from closing the series with integrals.
    pub remainder_bound: f64,
    /// Last `j` summed directly.
    pub cutoff: i64,
}

/// Direct summation stops once a term falls below this fraction of the sum.
const VARIANCE_REL: f64 = 1e-12;
const IDENTITY_REL: f64 = 1e-9;

pub fn variance_exact(law: &PerturbationLaw, t: i64) -> Result<VarianceExact> {
    check(law, t)?;
    if matches!(law.kind(), LawKind::PointMass { .. }) {
        return Ok(VarianceExact { t, variance: 0.0, remainder_bound: 0.0, cutoff: 0 });
    }
    let tf = t as f64;
    let q = |lo: f64, hi: f64| law.coord_interval(0, lo, hi).0;
    let inner: f64 = (0..t).map(|k| q(-(k as f64), (t - k) as f64).powi(2)).sum();
    let g = |j: f64| window_mass(law, j, tf);
    let (outer, cutoff, remainder_bound) = outer_series(law, g, |x| x * x, VARIANCE_REL)?;
    let sq = inner + g(0.0).powi(2) + 2.0 * outer;
    Ok(VarianceExact { t, variance: tf - sq, remainder_bound: 2.0 * remainder_bound, cutoff })
}

/// Both sides of `Σ_{k ∈ [0,t)} P(k + ξ ∉ [0,t)) = Σ_{m ∉ [0,t)} P(m + ξ ∈ [0,t))`,
/// evaluated independently.
pub fn variance_identity_sides(law: &PerturbationLaw, t: i64) -> Result<(f64, f64)> {
    check(law, t)?;
    let tf = t as f64;
    let q = |lo: f64, hi: f64| law.coord_interval(0, lo, hi);
    let inside: f64 = (0..t).map(|k| q(-(k as f64), (t - k) as f64).1).sum();
    let g = |j: f64| window_mass(law, j, tf);
    let (outer, _, _) = outer_series(law, g, |x| x, IDENTITY_REL)?;
    Ok((inside, g(0.0) + 2.0 * outer))
}

/// `P(ξ ∈ [j, j + t))`, keeping full accuracy when `j ≫ t`.
fn window_mass(law: &PerturbationLaw, j: f64, t: f64) -> f64 {
    match law.alpha() {
        // ½ (j^{-α} - (j + t)^{-α})
        Some(a) if j >= 1.0 => 0.5 * j.powf(-a) * -(-a * (t / j).ln_1p()).exp_m1(),
        _ => law.coord_interval(0, j, j + t).0,
    }
}

fn check(law: &PerturbationLaw, t: i64) -> Result<()> {
    if law.dim() != 1 {
        return Err(Error::InvalidParameter("variance needs a one-dimensional law".into()));
    }
    if t < 1 {
        return Err(Error::InvalidParameter(format!("t must be a positive integer, got {t}")));
    }
    if !law.is_symmetric() {
        return Err(Error::Unsupported("variance needs a symmetric law".into()));
    }
    Ok(())
}

/// `Σ_{j ≥ 1} f(g(j))` for decreasing `g`, as `(sum, last direct j, error bound)`.
fn outer_series(
    law: &PerturbationLaw,
    g: impl Fn(f64) -> f64,
    f: impl Fn(f64) -> f64,
    rel: f64,
) -> Result<(f64, i64, f64)> {
    let mut sum = 0.0;
    let mut j = 1i64;
    let cap = 1i64 << 34;
    loop {
        let term = f(g(j as f64));
        sum += term;
        if term <= rel * sum.max(1.0) {
            break;
        }
        j += 1;
        if j > cap {
            return Err(Error::NonconvergentProduct { tolerance: rel, cutoff: cap });
        }
    }
    // Σ_{i > j} h(i) lies between ∫_{j+1}^∞ h and ∫_j^∞ h; with
    // x = j u^{-1/α} the polynomial tails become smooth in u ∈ (0, 1]
    let a = law.alpha().unwrap_or(1.0);
    let tail_from = |x0: f64| {
        let h = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let x = x0 * u.powf(-1.0 / a);
            f(g(x)) * x0 / a * u.powf(-1.0 / a - 1.0)
        };
        integrate(&h, 0.0, 1.0, 1e-13).0
    };
    let upper = tail_from(j as f64);
    let lower = tail_from(j as f64 + 1.0);
    Ok((sum + 0.5 * (upper + lower), j, 0.5 * (upper - lower).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_has_no_variance() {
        assert_eq!(variance_exact(&PerturbationLaw::zero(1), 7).unwrap().variance, 0.0);
    }

    #[test]
    fn gaussian_matches_direct_sum() {
        // direct Σ q(1 - q) over |k| ≤ 60
        let law = PerturbationLaw::gaussian(1.5, 1).unwrap();
        let t = 5;
        let mut direct = 0.0;
        for k in -60..60 {
            let (p, _) = law.coord_interval(0, -(k as f64), (t - k) as f64);
            direct += p * (1.0 - p);
        }
        let v = variance_exact(&law, t).unwrap();
        assert!((v.variance - direct).abs() < 1e-12, "{} vs {direct}", v.variance);
    }

    #[test]
    fn symmetry_identity() {
        for alpha in [0.3, 0.5, 1.5] {
            let law = PerturbationLaw::poly_coord(alpha, 1).unwrap();
            for t in [1, 16, 300] {
                let (a, b) = variance_identity_sides(&law, t).unwrap();
                assert!((a / b - 1.0).abs() < 1e-6, "α={alpha} t={t}: {a} vs {b}");
            }
        }
    }
}
