use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::radial;
use crate::error::{Error, Result};
use crate::geometry::MAX_DIM;
use crate::special::{integrate, ln_normal_outside, ln_norm_sf, norm_sf, normal_interval};

/// The perturbation families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LawKind {
    /// i.i.d. centered normal coordinates with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// `ξ = R u` with `P(R ≥ r) = r^{-α}` on `[1, ∞)` and `u` uniform on the
    /// Euclidean unit sphere.
    PolynomialRadial { alpha: f64 },
    /// i.i.d. coordinates `s R` with a uniform sign `s` and the same `R`.
    PolynomialPerCoordinate { alpha: f64 },
    /// Deterministic displacement. A one-element offset is broadcast.
    PointMass { offset: Vec<f64> },
}

/// A perturbation distribution on ℝ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationLaw {
    kind: LawKind,
    dim: usize,
}

impl PerturbationLaw {
    pub fn new(kind: LawKind, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..={MAX_DIM}")));
        }
        let kind = match kind {
            LawKind::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")))
            }
            LawKind::PolynomialRadial { alpha } | LawKind::PolynomialPerCoordinate { alpha }
                if !(alpha > 0.0 && alpha.is_finite()) =>
            {
                return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")))
            }
            LawKind::PolynomialRadial { .. } if dim > 2 => {
                return Err(Error::Unsupported(
                    "radial polynomial law is implemented for d <= 2".into(),
                ))
            }
            LawKind::PointMass { offset } => {
                let offset = match offset.len() {
                    1 => vec![offset[0]; dim],
                    n if n == dim => offset,
                    n => {
                        return Err(Error::InvalidParameter(format!(
                            "point mass offset has {n} coordinates, dimension is {dim}"
                        )))
                    }
                };
                if offset.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("point mass offset must be finite".into()));
                }
                LawKind::PointMass { offset }
            }
            k => k,
        };
        Ok(PerturbationLaw { kind, dim })
    }

    pub fn gaussian(sigma: f64, dim: usize) -> Result<Self> {
        Self::new(LawKind::Gaussian { sigma }, dim)
    }

    pub fn poly_radial(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(LawKind::PolynomialRadial { alpha }, dim)
    }

    pub fn poly_coord(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(LawKind::PolynomialPerCoordinate { alpha }, dim)
    }

    pub fn point_mass(offset: &[f64], dim: usize) -> Result<Self> {
        Self::new(LawKind::PointMass { offset: offset.to_vec() }, dim)
    }

    pub fn zero(dim: usize) -> Self {
        Self::point_mass(&[0.0], dim).expect("valid point mass")
    }

    /// Parse the `family:params` grammar (see [`LawSpec`]) for dimension `dim`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let spec: LawSpec = spec.parse()?;
        Self::new(spec.0, dim)
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Tail exponent of the polynomial families.
    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            LawKind::PolynomialRadial { alpha } | LawKind::PolynomialPerCoordinate { alpha } => {
                Some(alpha)
            }
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            LawKind::PointMass { offset } => offset.iter().all(|&x| x == 0.0),
            _ => true,
        }
    }

    /// In d = 1 both polynomial families coincide.
    pub(crate) fn is_product(&self) -> bool {
        !matches!(self.kind, LawKind::PolynomialRadial { .. }) || self.dim == 1
    }

    pub fn spec(&self) -> LawSpec {
        LawSpec(self.kind.clone())
    }

    /// Draw one perturbation vector into `out`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            LawKind::Gaussian { sigma } => {
                for x in out.iter_mut().take(self.dim) {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = sigma * z;
                }
            }
            LawKind::PolynomialPerCoordinate { alpha } => {
                for x in out.iter_mut().take(self.dim) {
                    *x = signed_pareto(rng, *alpha);
                }
            }
            LawKind::PolynomialRadial { alpha } => {
                if self.dim == 1 {
                    out[0] = signed_pareto(rng, *alpha);
                } else {
                    let r = pareto_radius(rng, *alpha);
                    let theta = rng.random::<f64>() * std::f64::consts::TAU;
                    out[0] = r * theta.cos();
                    out[1] = r * theta.sin();
                }
            }
            LawKind::PointMass { offset } => out[..self.dim].copy_from_slice(offset),
        }
    }

    /// Exact `P(‖ξ‖∞ ≥ r)`.
    pub fn tail_probability(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        match &self.kind {
            LawKind::PointMass { offset } => {
                if offset.iter().any(|x| x.abs() >= r) {
                    1.0
                } else {
                    0.0
                }
            }
            LawKind::PolynomialRadial { alpha } if self.dim == 2 => radial::tail(*alpha, r),
            _ => {
                let p1 = self.coord_abs_tail(r);
                -(self.dim as f64 * (-p1).ln_1p()).exp_m1()
            }
        }
    }

    /// `ln P(‖ξ‖∞ ≥ r)`, accurate where the tail itself underflows.
    pub fn ln_tail_probability(&self, r: f64) -> f64 {
        match &self.kind {
            LawKind::Gaussian { sigma } if r > 0.0 => {
                // P(|ξ_j| ≥ r) = 2 Q(r/σ); union over coordinates
                let ln_p1 = std::f64::consts::LN_2 + ln_norm_sf(r / sigma);
                let p1 = ln_p1.exp();
                if p1 > 1e-8 {
                    (-(self.dim as f64 * (-p1).ln_1p()).exp_m1()).ln()
                } else {
                    // 1 - (1 - p)^d = d p (1 - (d-1) p / 2 + ...)
                    ln_p1 + (self.dim as f64).ln() + (-(self.dim as f64 - 1.0) * p1 / 2.0).ln_1p()
                }
            }
            _ => self.tail_probability(r).ln(),
        }
    }

    /// `P(|ξ_j| ≥ r)` for product laws.
    fn coord_abs_tail(&self, r: f64) -> f64 {
        match &self.kind {
            LawKind::Gaussian { sigma } => 2.0 * norm_sf(r / sigma),
            LawKind::PolynomialRadial { alpha } | LawKind::PolynomialPerCoordinate { alpha } => {
                if r <= 1.0 {
                    1.0
                } else {
                    r.powf(-alpha)
                }
            }
            LawKind::PointMass { .. } => unreachable!("point mass handled by caller"),
        }
    }

    /// `(P(ξ_j ∈ [lo, hi]), P(ξ_j ∉ [lo, hi]))` for coordinate `axis` of a
    /// product law.
    pub(crate) fn coord_interval(&self, axis: usize, lo: f64, hi: f64) -> (f64, f64) {
        match &self.kind {
            LawKind::Gaussian { sigma } => normal_interval(lo, hi, *sigma),
            LawKind::PolynomialRadial { alpha } | LawKind::PolynomialPerCoordinate { alpha } => {
                signed_pareto_interval(*alpha, lo, hi)
            }
            LawKind::PointMass { offset } => {
                if offset[axis] >= lo && offset[axis] <= hi {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
        }
    }

    /// `(P(ξ ∈ A), P(ξ ∉ A))` for the closed box `A = ∏ [lo_j, hi_j]`.
    pub fn box_probabilities(&self, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        if self.is_product() {
            let mut ln_inside = 0.0;
            let mut inside = 1.0;
            for j in 0..self.dim {
                let (p_in, p_out) = self.coord_interval(j, lo[j], hi[j]);
                inside *= p_in;
                ln_inside += (-p_out).ln_1p();
            }
            (inside, -ln_inside.exp_m1())
        } else {
            let alpha = self.alpha().expect("radial law");
            radial::box_probabilities(alpha, [lo[0], lo[1]], [hi[0], hi[1]])
        }
    }

    /// `ln P(ξ ∉ A)`; stays finite when the miss probability underflows.
    pub fn ln_box_miss(&self, lo: &[f64], hi: &[f64]) -> f64 {
        if let LawKind::Gaussian { sigma } = self.kind {
            // ln(1 - ∏(1 - e_j)) with e_j the per-coordinate exclusion
            let ln_e: Vec<f64> = (0..self.dim).map(|j| ln_normal_outside(lo[j], hi[j], sigma)).collect();
            let max_e = ln_e.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
            if max_e > 1e-8 {
                let s: f64 = ln_e.iter().map(|l| (-l.exp()).ln_1p()).sum();
                return (-s.exp_m1()).ln();
            }
            // all exclusions tiny: 1 - ∏(1 - e_j) = Σ e_j - Σ_{i<j} e_i e_j + ...
            let m = ln_e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = ln_e.iter().map(|l| (l - m).exp()).sum();
            return m + sum.ln() + (-0.5 * (self.dim as f64 - 1.0) * max_e).ln_1p();
        }
        self.box_probabilities(lo, hi).1.ln()
    }

    /// `P(v + ξ ∉ B_r)` with `B_r = [-r, r]^d`.
    pub fn box_avoidance_probability(&self, v: &[f64], r: f64) -> f64 {
        let (lo, hi) = shifted_ball(v, r);
        self.box_probabilities(&lo[..self.dim], &hi[..self.dim]).1
    }

    /// `P(v + ξ ∈ B_r)`.
    pub fn box_hit_probability(&self, v: &[f64], r: f64) -> f64 {
        let (lo, hi) = shifted_ball(v, r);
        self.box_probabilities(&lo[..self.dim], &hi[..self.dim]).0
    }

    pub fn ln_box_avoidance(&self, v: &[f64], r: f64) -> f64 {
        let (lo, hi) = shifted_ball(v, r);
        self.ln_box_miss(&lo[..self.dim], &hi[..self.dim])
    }

    /// `∫_r^∞ P(‖ξ‖∞ ≥ t) dt`, or `DivergentMean` when it is infinite.
    pub fn integrated_tail(&self, r: f64) -> Result<f64> {
        let r = r.max(0.0);
        match &self.kind {
            LawKind::PointMass { offset } => {
                let m = offset.iter().map(|x| x.abs()).fold(0.0, f64::max);
                Ok((m - r).max(0.0))
            }
            LawKind::Gaussian { sigma } => {
                let top = r.max(0.0) + 40.0 * sigma;
                let f = |t: f64| self.tail_probability(t);
                let (v, _) = integrate(&f, r, top, 1e-14);
                Ok(v)
            }
            LawKind::PolynomialPerCoordinate { alpha } | LawKind::PolynomialRadial { alpha }
                if *alpha <= 1.0 =>
            {
                Err(Error::DivergentMean { alpha: *alpha })
            }
            LawKind::PolynomialRadial { alpha } if self.dim == 2 => {
                // p(t) = c t^{-α} for t ≥ 1; quadrature below 1
                let c = radial::linf_moment(*alpha);
                let upper = c * r.max(1.0).powf(1.0 - alpha) / (alpha - 1.0);
                let below = if r < 1.0 {
                    let f = |t: f64| radial::tail(*alpha, t);
                    let split = std::f64::consts::FRAC_1_SQRT_2.max(r);
                    (split - r) + integrate(&f, split, 1.0, 1e-15).0
                } else {
                    0.0
                };
                Ok(below + upper)
            }
            LawKind::PolynomialPerCoordinate { alpha } | LawKind::PolynomialRadial { alpha } => {
                // 1 - (1 - t^{-α})^d = Σ_{j=1}^d C(d,j) (-1)^{j+1} t^{-αj}
                let d = self.dim as i32;
                let start = r.max(1.0);
                let mut total = (1.0 - r).max(0.0);
                let mut binom = 1.0;
                for j in 1..=d {
                    binom = binom * (d - j + 1) as f64 / j as f64;
                    let aj = alpha * j as f64;
                    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                    total += sign * binom * start.powf(1.0 - aj) / (aj - 1.0);
                }
                Ok(total)
            }
        }
    }

    /// `E[‖ξ‖∞ 1{‖ξ‖∞ ≥ r}] = r p(r) + ∫_r^∞ p(t) dt`.
    pub fn truncated_mean(&self, r: f64) -> Result<f64> {
        let tail = self.integrated_tail(r)?;
        if let LawKind::PointMass { offset } = &self.kind {
            let m = offset.iter().map(|x| x.abs()).fold(0.0, f64::max);
            return Ok(if m >= r && m > 0.0 { m } else { 0.0 });
        }
        Ok(r.max(0.0) * self.tail_probability(r) + tail)
    }

    /// Upper bound on the expected number of sites outside `[-w, w]^d` whose
    /// displacement is large enough to reach `[-a, a]^d`, i.e.
    /// `Σ_{k > w} |{‖u‖∞ = k}| p(k - a)`. Summation stops once the bound
    /// exceeds `stop`.
    pub fn outside_reach_bound(&self, w: i64, a: f64, stop: f64) -> f64 {
        let d = self.dim as i32;
        let shell = |k: f64| (2.0 * k + 1.0).powi(d) - (2.0 * k - 1.0).powi(d);
        let mut sum = 0.0;
        let mut k = w + 1;
        while k <= w + 4096 {
            let term = shell(k as f64) * self.tail_probability(k as f64 - a);
            sum += term;
            if sum > stop || term < 1e-300 {
                return sum;
            }
            k += 1;
        }
        // dyadic blocks [k0, 2 k0) bounded by their largest shell and nearest
        // tail; polynomial blocks shrink geometrically, so the remainder is
        // closed off with a geometric series
        let mut k0 = k as f64;
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let block = ((4.0 * k0 + 1.0).powi(d) - (2.0 * k0 - 1.0).powi(d)) * self.tail_probability(k0 - a);
            sum += block;
            if sum > stop || block < 1e-300 {
                return sum;
            }
            let ratio = block / prev;
            if ratio < 0.9 && block * ratio / (1.0 - ratio) < 1e-6 * sum {
                return sum + block * ratio / (1.0 - ratio);
            }
            prev = block;
            k0 *= 2.0;
        }
        f64::INFINITY
    }

    /// Radius `x` at which `n` independent perturbations are expected to
    /// produce about one exceedance, `n p(x) ≈ 1`.
    pub fn expected_max_perturbation(&self, n: usize) -> f64 {
        if let LawKind::PointMass { offset } = &self.kind {
            return offset.iter().map(|x| x.abs()).fold(0.0, f64::max);
        }
        let target = -(n.max(1) as f64).ln();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while self.ln_tail_probability(hi) > target && hi < 1e300 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.ln_tail_probability(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

fn shifted_ball(v: &[f64], r: f64) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    for (j, &c) in v.iter().enumerate() {
        lo[j] = -r - c;
        hi[j] = r - c;
    }
    (lo, hi)
}

/// `R = U^{-1/α}` with `U` uniform on `(0, 1]`.
pub(crate) fn pareto_radius<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    u.powf(-1.0 / alpha)
}

fn signed_pareto<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let r = pareto_radius(rng, alpha);
    if rng.random::<bool>() {
        r
    } else {
        -r
    }
}

/// `a^{-α} - b^{-α}` for `1 ≤ a ≤ b`, accurate when `a ≈ b`.
pub(crate) fn pareto_gap(alpha: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    a.powf(-alpha) * -(-alpha * ((b - a) / a).ln_1p()).exp_m1()
}

/// Interval probabilities of `s R` (uniform sign, Pareto radius on `[1, ∞)`).
fn signed_pareto_interval(alpha: f64, lo: f64, hi: f64) -> (f64, f64) {
    if hi < lo {
        return (0.0, 1.0);
    }
    // mass of R in [a, b] on one side
    let side = |a: f64, b: f64| -> f64 {
        let a = a.max(1.0);
        if b < a {
            0.0
        } else if b.is_infinite() {
            a.powf(-alpha)
        } else {
            pareto_gap(alpha, a, b)
        }
    };
    let right = if hi >= 1.0 { 0.5 * side(lo.max(1.0), hi) } else { 0.0 };
    let left = if lo <= -1.0 { 0.5 * side((-hi).max(1.0), -lo) } else { 0.0 };
    let inside = right + left;
    // outside mass: below lo and above hi
    let below = if lo > -1.0 {
        if lo >= 1.0 {
            0.5 + 0.5 * side(1.0, lo) * if lo > 1.0 { 1.0 } else { 0.0 }
        } else {
            0.5
        }
    } else {
        0.5 * (-lo).powf(-alpha)
    };
    let above = if hi < 1.0 {
        if hi <= -1.0 {
            0.5 + 0.5 * side(1.0, -hi) * if hi < -1.0 { 1.0 } else { 0.0 }
        } else {
            0.5
        }
    } else {
        0.5 * hi.powf(-alpha)
    };
    let outside = below + above;
    if inside < 0.5 {
        (inside, (1.0 - inside).min(outside.max(1.0 - inside)))
    } else {
        (1.0 - outside, outside)
    }
}

/// Textual law specification: `gaussian:sigma=1.0`, `poly-radial:alpha=2.0`,
/// `poly-coord:alpha=0.5`, `pointmass:0,0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LawSpec(pub LawKind);

impl FromStr for LawSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::LawSpec { spec: s.to_string(), reason: reason.to_string() };
        let (family, params) = s.trim().split_once(':').ok_or_else(|| bad("expected `family:params`"))?;
        let named = |key: &str| -> Result<f64> {
            let (k, v) = params.split_once('=').ok_or_else(|| bad("expected `key=value`"))?;
            if k.trim() != key {
                return Err(bad(&format!("expected parameter `{key}`")));
            }
            v.trim().parse::<f64>().map_err(|_| bad("parameter is not a number"))
        };
        let kind = match family.trim() {
            "gaussian" => LawKind::Gaussian { sigma: named("sigma")? },
            "poly-radial" => LawKind::PolynomialRadial { alpha: named("alpha")? },
            "poly-coord" => LawKind::PolynomialPerCoordinate { alpha: named("alpha")? },
            "pointmass" => {
                let offset = params
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("offset coordinates must be numbers"))?;
                LawKind::PointMass { offset }
            }
            other => return Err(bad(&format!("unknown family `{other}`"))),
        };
        Ok(LawSpec(kind))
    }
}

impl fmt::Display for LawSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            LawKind::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            LawKind::PolynomialRadial { alpha } => write!(f, "poly-radial:alpha={alpha}"),
            LawKind::PolynomialPerCoordinate { alpha } => write!(f, "poly-coord:alpha={alpha}"),
            LawKind::PointMass { offset } => {
                let parts: Vec<String> = offset.iter().map(|x| x.to_string()).collect();
                write!(f, "pointmass:{}", parts.join(","))
            }
        }
    }
}

impl fmt::Display for PerturbationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.spec().fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn grammar_round_trip() {
        for s in ["gaussian:sigma=1.5", "poly-radial:alpha=2", "poly-coord:alpha=0.5", "pointmass:0,-1.5"] {
            let spec: LawSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("gauss:sigma=1".parse::<LawSpec>().is_err());
        assert!("gaussian:alpha=1".parse::<LawSpec>().is_err());
        assert!("gaussian".parse::<LawSpec>().is_err());
        assert!(PerturbationLaw::parse("gaussian:sigma=-1", 1).is_err());
        assert!(PerturbationLaw::parse("pointmass:0,0,0", 2).is_err());
        assert!(PerturbationLaw::parse("poly-radial:alpha=2", 3).is_err());
        let pm = PerturbationLaw::parse("pointmass:0", 2).unwrap();
        assert_eq!(pm.kind(), &LawKind::PointMass { offset: vec![0.0, 0.0] });
    }

    #[test]
    fn tail_examples() {
        for law in [
            PerturbationLaw::gaussian(1.0, 2).unwrap(),
            PerturbationLaw::poly_coord(0.5, 1).unwrap(),
            PerturbationLaw::poly_radial(2.0, 2).unwrap(),
            PerturbationLaw::zero(1),
        ] {
            assert_eq!(law.tail_probability(0.0), 1.0);
        }
        let p = PerturbationLaw::poly_coord(0.5, 1).unwrap();
        assert!((p.tail_probability(4.0) - 0.5).abs() < 1e-15);
        let g = PerturbationLaw::gaussian(1.0, 2).unwrap();
        let inner = 0.682_689_492_137_085_9f64;
        assert!((g.tail_probability(1.0) - (1.0 - inner * inner)).abs() < 1e-15);
        assert!((g.tail_probability(1.0) - 0.5339).abs() < 5e-5);
    }

    #[test]
    fn box_avoidance_examples() {
        assert_eq!(PerturbationLaw::zero(1).box_avoidance_probability(&[0.0], 1.0), 0.0);
        let g = PerturbationLaw::gaussian(1.0, 1).unwrap();
        assert!((g.box_avoidance_probability(&[0.0], 1.0) - 0.317_310_507_862_914_1).abs() < 1e-15);
        let p = PerturbationLaw::poly_coord(1.0, 1).unwrap();
        let expected = 1.0 - 0.5 * (1.0 / 9.0 - 1.0 / 11.0);
        assert!((p.box_avoidance_probability(&[10.0], 1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn truncated_mean_examples() {
        assert_eq!(PerturbationLaw::zero(1).truncated_mean(1.0).unwrap(), 0.0);
        let p = PerturbationLaw::poly_coord(2.0, 1).unwrap();
        assert!((p.truncated_mean(2.0).unwrap() - 1.0).abs() < 1e-12);
        // E|ξ| = α/(α-1) = 2 below the support
        assert!((p.truncated_mean(0.5).unwrap() - 2.0).abs() < 1e-12);
        let heavy = PerturbationLaw::poly_coord(0.5, 1).unwrap();
        assert_eq!(heavy.truncated_mean(1.0), Err(Error::DivergentMean { alpha: 0.5 }));
    }

    #[test]
    fn truncated_mean_matches_quadrature_of_the_tail() {
        // d = 2 per-coordinate: closed form against direct quadrature of p
        let p = PerturbationLaw::poly_coord(2.5, 2).unwrap();
        let f = |t: f64| p.tail_probability(t);
        let direct = 3.0 * p.tail_probability(3.0)
            + integrate(&|s: f64| f(3.0 / s) * 3.0 / (s * s), 0.0, 1.0, 1e-14).0;
        assert!((p.truncated_mean(3.0).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn gaussian_ln_tail_agrees_where_both_are_finite() {
        let g = PerturbationLaw::gaussian(1.0, 2).unwrap();
        for r in [0.5, 2.0, 6.0, 12.0] {
            let direct = g.tail_probability(r).ln();
            assert!((g.ln_tail_probability(r) - direct).abs() < 1e-10 * direct.abs().max(1.0));
        }
        assert!(g.ln_tail_probability(40.0).is_finite());
    }

    #[test]
    fn interval_probabilities_sum_to_one() {
        let cases = [(-3.0, 2.0), (1.5, 2.0), (-0.5, 0.5), (-10.0, -2.0), (0.5, 7.0), (-7.0, -0.2), (1.0, 1.0)];
        for (lo, hi) in cases {
            let (i, o) = signed_pareto_interval(0.7, lo, hi);
            assert!((i + o - 1.0).abs() < 1e-14, "{lo} {hi}: {i} + {o}");
            assert!(i >= 0.0 && o >= 0.0);
        }
    }

    #[test]
    fn point_mass_sampling_is_the_offset() {
        let law = PerturbationLaw::point_mass(&[1.0, -2.0], 2).unwrap();
        let mut out = [0.0; 2];
        law.sample(&mut rng_from(3), &mut out);
        assert_eq!(out, [1.0, -2.0]);
    }
}
