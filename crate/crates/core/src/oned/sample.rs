//! One-dimensional samples: the window sites `[-W, W]`, `W = L + M`, and
//! every process point in `J = [-W - ½, W + ½]`.
//!
//! For the polynomial laws, points of sites beyond the window reach `J` with
//! non-negligible total probability, so they are sampled exactly: sites are
//! grouped in dyadic blocks, a binomial number of candidates is drawn at the
//! block's largest hit probability and thinned to each site's own, and the
//! landing position is drawn from the conditional law.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{pareto_gap, PerturbationLaw};
use crate::rng::{rng_from, stream_seed, SiteRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinePoint {
    pub x: f64,
    /// Lattice site the point belongs to.
    pub label: i64,
}

/// Offsets below `2^EXACT_LEVELS` are drawn site by site; farther dyadic
/// blocks use a Poisson count with continuous offsets. Sites beyond
/// `W + 2^FAR_LEVELS` are not sampled and their expected number of arrivals
/// in `J` is reported instead.
const EXACT_LEVELS: u32 = 62;
const FAR_LEVELS: i32 = 1000;

#[derive(Debug, Clone)]
pub struct LineSample {
    law: PerturbationLaw,
    core_half_width: i64,
    margin: i64,
    seed: u64,
    /// Points in `J`, sorted by position then label.
    points: Vec<LinePoint>,
    far_field: bool,
    far_arrivals: usize,
    unsampled_mass: f64,
}

/// Sample the window `[-(L + M), L + M]` of a one-dimensional law.
pub fn sample_line(law: &PerturbationLaw, l: i64, m: i64, seed: u64) -> Result<LineSample> {
    check_window(law, l, m)?;
    let w = l + m;
    let (a, b) = (-(w as f64) - 0.5, w as f64 + 0.5);
    let mut rng = rng_from(seed);
    let mut points = Vec::with_capacity(2 * w as usize + 1);
    let mut xi = [0.0];
    for v in -w..=w {
        law.sample(&mut rng, &mut xi);
        let x = v as f64 + xi[0];
        if (a..=b).contains(&x) {
            points.push(LinePoint { x, label: v });
        }
    }
    let (far_field, far_arrivals, unsampled_mass) = match law.alpha() {
        Some(alpha) => {
            let mut far_rng = rng_from(stream_seed(seed, "far-field"));
            let before = points.len();
            let mass = sample_far_field(alpha, w, &mut far_rng, &mut points);
            (true, points.len() - before, mass)
        }
        None => (false, 0, 0.0),
    };
    points.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.label.cmp(&q.label)));
    Ok(LineSample { law: law.clone(), core_half_width: l, margin: m, seed, points, far_field, far_arrivals, unsampled_mass })
}

fn check_window(law: &PerturbationLaw, l: i64, m: i64) -> Result<()> {
    if law.dim() != 1 {
        return Err(Error::InvalidParameter(format!("one-dimensional law required, got d = {}", law.dim())));
    }
    if l < 0 || m < 0 || l.checked_add(m).is_none_or(|w| w > 1 << 40) {
        return Err(Error::InvalidParameter(format!("bad window L = {l}, M = {m}")));
    }
    Ok(())
}

/// Add the points of sites `|u| > w` that land in `J`; returns the expected
/// number of arrivals from sites too far to be sampled.
fn sample_far_field(alpha: f64, w: i64, rng: &mut SiteRng, out: &mut Vec<LinePoint>) -> f64 {
    let (a, b) = (-(w as f64) - 0.5, w as f64 + 0.5);
    // P(u + ξ ∈ J) for u > w: ξ negative with |ξ| ∈ [u - b, u - a]
    let hit = |u: f64| 0.5 * pareto_gap(alpha, (u - b).max(1.0), u - a);
    let land = |rng: &mut SiteRng, u: f64, label: i64, side: f64, out: &mut Vec<LinePoint>| {
        // R given R ∈ [x0, x1] is x0 (1 - U g)^{-1/α}, g = 1 - (x0/x1)^α;
        // the point lands at u - R, measured from the near end of J
        let (x0, near) = if u - b >= 1.0 { (u - b, b) } else { (1.0, u - 1.0) };
        let width = b - a - (x0 - (u - b));
        let g = -(-alpha * (width / x0).ln_1p()).exp_m1();
        let uu: f64 = rng.random();
        let excess = x0 * (-(1.0 / alpha) * (-uu * g).ln_1p()).exp_m1();
        let x = (near - excess).clamp(a, b);
        out.push(LinePoint { x: side * x, label });
    };
    for level in 0..FAR_LEVELS {
        // offsets o ∈ [2^level, 2^{level+1}) with u = w + o
        let first = 2f64.powi(level);
        let q0 = hit(w as f64 + first);
        if q0 <= 0.0 {
            continue;
        }
        for side in [1i64, -1] {
            if level < EXACT_LEVELS as i32 {
                let n = 1u64 << level;
                let k = Binomial::new(n, q0).expect("valid binomial").sample(rng);
                if k == 0 {
                    continue;
                }
                let picks = index::sample(rng, n as usize, k as usize);
                let mut offsets: Vec<u64> = picks.iter().map(|i| n + i as u64).collect();
                offsets.sort_unstable();
                for o in offsets {
                    let u = w as f64 + o as f64;
                    if rng.random::<f64>() * q0 < hit(u) {
                        land(rng, u, (w + o as i64) * side, side as f64, out);
                    }
                }
            } else {
                // labels are no longer representable; such points carry the
                // extreme label on their side
                let k = Poisson::new(first * q0).expect("valid poisson").sample(rng) as u64;
                for _ in 0..k {
                    let u = w as f64 + first + (rng.random::<f64>() * first).floor();
                    if rng.random::<f64>() * q0 < hit(u) {
                        land(rng, u, i64::MAX * side, side as f64, out);
                    }
                }
            }
        }
    }
    // Σ_{o ≥ 2^top} 2 hit(w + o) ≤ (2w + 2) (2^top - ½)^{-α} over both sides
    (2.0 * w as f64 + 2.0) * 2f64.powi(FAR_LEVELS).powf(-alpha)
}

impl LineSample {
    /// A sample with explicitly given points; positions outside `J` are
    /// kept as given.
    pub fn from_points(law: &PerturbationLaw, l: i64, m: i64, mut points: Vec<LinePoint>) -> Result<Self> {
        check_window(law, l, m)?;
        points.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.label.cmp(&q.label)));
        Ok(LineSample {
            law: law.clone(),
            core_half_width: l,
            margin: m,
            seed: 0,
            points,
            far_field: law.alpha().is_some(),
            far_arrivals: 0,
            unsampled_mass: 0.0,
        })
    }

    pub fn law(&self) -> &PerturbationLaw {
        &self.law
    }

    pub fn core_half_width(&self) -> i64 {
        self.core_half_width
    }

    pub fn margin(&self) -> i64 {
        self.margin
    }

    pub fn half_width(&self) -> i64 {
        self.core_half_width + self.margin
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &[LinePoint] {
        &self.points
    }

    /// Window sites `-W..=W`.
    pub fn sites(&self) -> Vec<i64> {
        (-self.half_width()..=self.half_width()).collect()
    }

    /// Whether points of sites beyond the window were sampled.
    pub fn has_far_field(&self) -> bool {
        self.far_field
    }

    pub fn far_arrivals(&self) -> usize {
        self.far_arrivals
    }

    /// Expected number of arrivals in `J` from sites too far to sample.
    pub fn unsampled_mass(&self) -> f64 {
        self.unsampled_mass
    }

    /// Number of points in `[lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let i = self.points.partition_point(|p| p.x < lo);
        let j = self.points.partition_point(|p| p.x < hi);
        j.saturating_sub(i)
    }

    /// Whether points outside the window could enter `[lo, hi]` beyond the
    /// per-site tolerance.
    pub(crate) fn audit_interval(&self, lo: f64, hi: f64, threshold: f64) -> Result<()> {
        let w = self.half_width() as f64;
        if self.far_field {
            if self.unsampled_mass > threshold {
                return Err(Error::MarginExceeded(format!(
                    "expected {:.3e} arrivals from unsampled far sites",
                    self.unsampled_mass
                )));
            }
            return Ok(());
        }
        let gap = w + 1.0 - hi.abs().max(lo.abs());
        let p = self.law.tail_probability(gap);
        if p > threshold {
            return Err(Error::MarginExceeded(format!(
                "nearest outside site reaches [{lo}, {hi}] with probability {p:.3e} > {threshold:e}"
            )));
        }
        Ok(())
    }
}
