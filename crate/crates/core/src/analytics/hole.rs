//! Hole probabilities `h(r) = P(Π ∩ B_r = ∅)` for the closed box
//! `B_r = [-r, r]^d`.
//!
//! The exact evaluator sums `ln P(v + ξ ∉ B_r)` over shells `‖v‖∞ = k`.
//! For the continuous laws and integer `2r` the expected number of points in
//! `B_r` is exactly `(2r)^d`, so the omitted hit mass is known without
//! summing it and enters to first order; only the second-order term
//! `Σ (-ln(1 - x) - x)` remains as truncation error.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MAX_DIM;
use crate::process::{LawKind, PerturbationLaw};
use crate::rng::{rng_from, trial_seed};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Largest shell index tried before giving up, by dimension.
fn cutoff_cap(d: usize) -> i64 {
    match d {
        1 => 1 << 22,
        2 => 1 << 13,
        3 => 1 << 9,
        _ => 1 << 7,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleExact {
    pub r: f64,
    /// `ln h(r)`; `-∞` when a point lands in `B_r` surely.
    pub log_h: f64,
    /// Bound on `|ln h(r) - log_h|` from truncating the product.
    pub bound: f64,
    /// Largest shell summed explicitly.
    pub cutoff: i64,
}

/// `ln h(r)` with shells added until the truncation bound is at most
/// `tolerance · max(1, |ln h|)`.
pub fn hole_probability_exact(law: &PerturbationLaw, r: f64, tolerance: f64) -> Result<HoleExact> {
    check_radius(r)?;
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tolerance}")));
    }
    if let Some(h) = point_mass_hole(law, r) {
        return Ok(h);
    }
    let mut acc = ShellSum::new(law, r);
    let cap = cutoff_cap(law.dim());
    let first = r.floor() as i64 + 1;
    let closed = acc.has_closed_form();
    for k in 0..=cap {
        acc.add_shell(k);
        // the tail bound without a closed form costs thousands of terms, so
        // it is only checked on a grid of relative spacing 1/64
        if k < first || (!closed && k - first >= 64 && k % (k / 64) != 0) {
            continue;
        }
        let h = acc.estimate();
        if h.bound <= tolerance * h.log_h.abs().max(1.0) && acc.far_hit_bound() <= 0.5 {
            return Ok(h);
        }
        if !closed && h.bound.is_infinite() {
            // tails too heavy for the omitted sites to be bounded
            break;
        }
    }
    Err(Error::NonconvergentProduct { tolerance, cutoff: cap })
}

/// `ln h(r)` from shells `0..=cutoff`, with the matching truncation bound.
pub fn hole_probability_at_cutoff(law: &PerturbationLaw, r: f64, cutoff: i64) -> Result<HoleExact> {
    check_radius(r)?;
    if let Some(h) = point_mass_hole(law, r) {
        return Ok(h);
    }
    let mut acc = ShellSum::new(law, r);
    for k in 0..=cutoff.max(0) {
        acc.add_shell(k);
    }
    Ok(acc.estimate())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

/// A site lands in `B_r` iff every coordinate interval
/// `[-r - o_j, r - o_j]` contains an integer.
fn point_mass_hole(law: &PerturbationLaw, r: f64) -> Option<HoleExact> {
    let LawKind::PointMass { offset } = law.kind() else {
        return None;
    };
    let hit = offset.iter().all(|o| (-r - o).ceil() <= (r - o).floor());
    Some(HoleExact { r, log_h: if hit { f64::NEG_INFINITY } else { 0.0 }, bound: 0.0, cutoff: 0 })
}

struct ShellSum<'a> {
    law: &'a PerturbationLaw,
    r: f64,
    d: usize,
    /// `ln P(ξ_j ∈ [-r - c, r - c])` for `c = 0, 1, ...` (product laws).
    ln_in: Vec<f64>,
    radial: Option<(f64, GaussLegendre)>,
    near: f64,
    hits: f64,
    sites: f64,
    done: i64,
}

impl<'a> ShellSum<'a> {
    fn new(law: &'a PerturbationLaw, r: f64) -> Self {
        let radial = if law.is_product() {
            None
        } else {
            let gl = GaussLegendre::new(NonZeroUsize::new(16).unwrap());
            Some((law.alpha().expect("radial law"), gl))
        };
        ShellSum { law, r, d: law.dim(), ln_in: Vec::new(), radial, near: 0.0, hits: 0.0, sites: 0.0, done: -1 }
    }

    fn ln_in(&mut self, c: i64) -> f64 {
        while self.ln_in.len() <= c as usize {
            let c = self.ln_in.len() as f64;
            let (_, out) = self.law.coord_interval(0, -self.r - c, self.r - c);
            self.ln_in.push((-out).ln_1p());
        }
        self.ln_in[c as usize]
    }

    /// `(ln P(v + ξ ∉ B_r), P(v + ξ ∈ B_r))` for a site with nonnegative
    /// coordinates.
    fn site(&mut self, v: &[i64]) -> (f64, f64) {
        let r = self.r;
        if let Some((alpha, gl)) = &self.radial {
            let k = v[0].max(v[1]) as f64;
            let (lo, hi) = ([v[0] as f64 - r, v[1] as f64 - r], [v[0] as f64 + r, v[1] as f64 + r]);
            if k < 2.0 * r + 2.0 {
                let (hit, miss) = self.law.box_probabilities(&lo, &hi);
                return (miss.ln(), hit);
            }
            // the box lies outside the unit disk, where the density is
            // α/(2π) |x|^{-α-2}
            let e = -(alpha + 2.0) / 2.0;
            let hit = alpha / std::f64::consts::TAU
                * gl.integrate(lo[0], hi[0], |x| gl.integrate(lo[1], hi[1], |y| (x * x + y * y).powf(e)));
            return ((-hit).ln_1p(), hit);
        }
        let s: f64 = v.iter().map(|&c| self.ln_in(c)).sum();
        let miss = -s.exp_m1();
        let ln_miss = if miss > 1e-290 {
            miss.ln()
        } else {
            let vf: Vec<f64> = v.iter().map(|&c| c as f64).collect();
            self.law.ln_box_avoidance(&vf, r)
        };
        (ln_miss, s.exp())
    }

    /// Add every site with `‖v‖∞ = k`, visiting one representative per
    /// orbit of the coordinate sign flips and permutations.
    fn add_shell(&mut self, k: i64) {
        assert_eq!(k, self.done + 1, "shells must be added in order");
        let d = self.d;
        let mut v = [0i64; MAX_DIM];
        v[0] = k;
        let mut terms = Vec::new();
        nonincreasing(&mut v, 1, d, &mut |v| terms.push((v[..d].to_vec(), orbit_size(&v[..d]))));
        for (v, m) in terms {
            let (ln_miss, hit) = self.site(&v);
            self.near += m * ln_miss;
            self.hits += m * hit;
            self.sites += m;
        }
        self.done = k;
    }

    fn has_closed_form(&self) -> bool {
        (2.0 * self.r).fract() == 0.0
    }

    /// Largest hit probability of an omitted site.
    fn far_hit_bound(&self) -> f64 {
        self.law.tail_probability(self.done as f64 + 1.0 - self.r)
    }

    fn estimate(&self) -> HoleExact {
        let r = self.r;
        let x_max = self.far_hit_bound();
        let (log_h, bound) = if self.has_closed_form() {
            let total = (2.0 * r).powi(self.d as i32);
            let rem = (total - self.hits).max(0.0);
            let rounding = 4.0 * f64::EPSILON * total * self.sites.sqrt();
            let second_order = if x_max < 1.0 { x_max / (1.0 - x_max) * rem } else { f64::INFINITY };
            (self.near - rem, second_order + rounding)
        } else {
            // no closed form for the omitted mass: bound it by the tails and
            // centre the estimate in [near - 2 ub, near]
            let ub = self.law.outside_reach_bound(self.done, r, f64::INFINITY);
            (self.near - ub, ub)
        };
        HoleExact { r, log_h, bound, cutoff: self.done }
    }
}

/// Sequences `k = v_0 ≥ v_1 ≥ … ≥ v_{d-1} ≥ 0`.
fn nonincreasing(v: &mut [i64; MAX_DIM], j: usize, d: usize, f: &mut impl FnMut(&[i64; MAX_DIM])) {
    if j == d {
        f(v);
        return;
    }
    for c in (0..=v[j - 1]).rev() {
        v[j] = c;
        nonincreasing(v, j + 1, d, f);
    }
}

/// Number of sites obtained from a nonincreasing nonnegative `v` by sign
/// flips and coordinate permutations.
fn orbit_size(v: &[i64]) -> f64 {
    let d = v.len();
    let signs = v.iter().filter(|&&c| c != 0).count();
    let mut perms = (1..=d).product::<usize>() as f64;
    let mut run = 1;
    for j in 1..=d {
        if j < d && v[j] == v[j - 1] {
            run += 1;
        } else {
            perms /= (1..=run).product::<usize>() as f64;
            run = 1;
        }
    }
    perms * (1u64 << signs) as f64
}

/// Monte Carlo estimate of `h(r)` with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleEstimate {
    pub r: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub holes: u64,
    pub trials: u64,
    /// Sites with `‖v‖∞ ≤ reach` are sampled.
    pub reach: i64,
}

pub const MC_SITE_TAIL: f64 = 1e-12;
pub const MC_SITE_CAP: usize = 10_000_000;

/// Fraction of independent realizations with no point in `B_r`. Sites are
/// sampled out to the smallest reach whose next shell hits `B_r` with
/// probability at most `1e-12` per site.
pub fn hole_probability_mc(law: &PerturbationLaw, r: f64, trials: u64, seed: u64) -> Result<HoleEstimate> {
    check_radius(r)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    if let Some(h) = point_mass_hole(law, r) {
        let estimate = h.log_h.exp();
        return Ok(HoleEstimate { r, estimate, stderr: 0.0, holes: estimate as u64 * trials, trials, reach: 0 });
    }
    let d = law.dim();
    let mut reach = r.floor() as i64;
    while law.tail_probability(reach as f64 + 1.0 - r) > MC_SITE_TAIL {
        reach += 1 + reach / 8;
        if reach > 1 << 40 {
            break;
        }
    }
    let side = 2 * reach + 1;
    let count = (side as f64).powi(d as i32);
    if count > MC_SITE_CAP as f64 {
        return Err(Error::RegionTooLarge { sites: count.min(usize::MAX as f64) as usize, cap: MC_SITE_CAP });
    }
    let sites = sites_by_distance(d, reach);
    let holes: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(trial_seed(seed, t));
            let mut xi = [0.0; MAX_DIM];
            for v in &sites {
                law.sample(&mut rng, &mut xi);
                if (0..d).all(|j| (v[j] as f64 + xi[j]).abs() <= r) {
                    return 0;
                }
            }
            1
        })
        .sum();
    if holes == 0 {
        return Err(Error::AllMisses { trials });
    }
    let n = trials as f64;
    let p = holes as f64 / n;
    Ok(HoleEstimate { r, estimate: p, stderr: (p * (1.0 - p) / n).sqrt(), holes, trials, reach })
}

/// Sites of `[-k, k]^d` ordered by `ℓ∞` norm, then lexicographically.
fn sites_by_distance(d: usize, k: i64) -> Vec<[i64; MAX_DIM]> {
    let cube = crate::geometry::Cube::centered(d, k);
    let mut sites: Vec<[i64; MAX_DIM]> = cube.sites().collect();
    sites.sort_by_key(|v| (v[..d].iter().map(|c| c.abs()).max().unwrap_or(0), *v));
    sites
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPoint {
    pub r: f64,
    pub log_h: f64,
    pub log_p: f64,
    /// `ln h(r) / (r^d ln p(r))`.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleBoundsReport {
    pub law: String,
    pub d: usize,
    pub points: Vec<RhoPoint>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

pub const RHO_RATIO_LIMIT: f64 = 10.0;

/// Evaluate `ρ(r) = ln h(r) / (r^d ln p(r))` on the grid; the sandwich
/// `p^{C r^d} ≤ h ≤ p^{c r^d}` holds with finite constants on the grid iff
/// `0 < ρ_min ≤ ρ_max < ∞`, and the spread is required to stay within
/// `max_ratio`.
pub fn hole_bounds_check(law: &PerturbationLaw, r_grid: &[f64], max_ratio: f64) -> Result<HoleBoundsReport> {
    if matches!(law.kind(), LawKind::PointMass { .. }) {
        return Err(Error::InvalidParameter("hole bounds are undefined for a point mass".into()));
    }
    let d = law.dim() as i32;
    let mut points = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let h = hole_probability_exact(law, r, DEFAULT_TOLERANCE)?;
        let log_p = law.ln_tail_probability(r);
        points.push(RhoPoint { r, log_h: h.log_h, log_p, rho: h.log_h / (r.powi(d) * log_p) });
    }
    let rho_min = points.iter().map(|p| p.rho).fold(f64::INFINITY, f64::min);
    let rho_max = points.iter().map(|p| p.rho).fold(f64::NEG_INFINITY, f64::max);
    let ratio = rho_max / rho_min;
    let pass = !points.is_empty() && rho_min > 0.0 && rho_max.is_finite() && ratio <= max_ratio;
    Ok(HoleBoundsReport { law: law.to_string(), d: law.dim(), points, rho_min, rho_max, ratio, max_ratio, pass })
}
