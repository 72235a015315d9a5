//! Exact probabilities for the planar radial law `ξ = R (cos θ, sin θ)`,
//! `P(R ≥ t) = min(1, t^{-α})`, by integrating over the direction.
//!
//! For a fixed direction the ray `t ↦ t u` crosses a box in a parameter
//! interval `[t_in, t_out]`, so `P(ξ ∈ A | θ) = S(t_in) - S(t_out)` with
//! `S(t) = min(1, t^{-α})`. The integrand is smooth between the corner
//! directions and the directions where the unit circle meets an edge, so the
//! angular integral is split there.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use crate::special::integrate_panels;

fn survival(alpha: f64, t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else {
        t.powf(-alpha)
    }
}

/// `E[max(|cos θ|, |sin θ|)^α]`, so that `P(‖ξ‖∞ ≥ r) = c r^{-α}` for `r ≥ 1`.
pub(crate) fn linf_moment(alpha: f64) -> f64 {
    thread_local! {
        static LAST: Cell<(u64, f64)> = const { Cell::new((u64::MAX, 0.0)) };
    }
    let (key, value) = LAST.with(Cell::get);
    if key == alpha.to_bits() {
        return value;
    }
    let f = |th: f64| th.cos().powf(alpha);
    let (v, _) = integrate_panels(&f, &[0.0, FRAC_PI_4], 1e-16);
    let c = v / FRAC_PI_4;
    LAST.with(|l| l.set((alpha.to_bits(), c)));
    c
}

/// `P(‖ξ‖∞ ≥ r)`.
pub(crate) fn tail(alpha: f64, r: f64) -> f64 {
    if r <= std::f64::consts::FRAC_1_SQRT_2 {
        return 1.0;
    }
    if r >= 1.0 {
        return linf_moment(alpha) * r.powf(-alpha);
    }
    // on [0, acos r] the threshold r / cos θ is below the support
    let split = r.acos();
    let f = |th: f64| (th.cos() / r).powf(alpha);
    let (v, _) = integrate_panels(&f, &[split, FRAC_PI_4], 1e-16);
    (split + v) / FRAC_PI_4
}

/// Entry and exit parameters of the ray `t u`, `t ≥ 0`, through a box.
fn ray_clip(u: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for j in 0..2 {
        if u[j] == 0.0 {
            if lo[j] > 0.0 || hi[j] < 0.0 {
                return None;
            }
            continue;
        }
        let (mut a, mut b) = (lo[j] / u[j], hi[j] / u[j]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
    }
    (t0 <= t1).then_some((t0, t1))
}

fn angle(y: f64, x: f64) -> f64 {
    let a = y.atan2(x);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

fn breakpoints(lo: [f64; 2], hi: [f64; 2]) -> Vec<f64> {
    let mut br = vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2, TAU];
    for x in [lo[0], hi[0]] {
        for y in [lo[1], hi[1]] {
            if x != 0.0 || y != 0.0 {
                br.push(angle(y, x));
            }
        }
    }
    // unit circle meeting the edge lines inside the edges
    for (c, (a, b), vertical) in [
        (lo[0], (lo[1], hi[1]), true),
        (hi[0], (lo[1], hi[1]), true),
        (lo[1], (lo[0], hi[0]), false),
        (hi[1], (lo[0], hi[0]), false),
    ] {
        if c.abs() > 1.0 {
            continue;
        }
        let s = (1.0 - c * c).sqrt();
        for w in [s, -s] {
            if w >= a && w <= b {
                br.push(if vertical { angle(w, c) } else { angle(c, w) });
            }
        }
    }
    br.sort_by(|a, b| a.partial_cmp(b).unwrap());
    br.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    br
}

/// `(P(ξ ∈ A), P(ξ ∉ A))` for the closed box `A = [lo, hi]`.
pub(crate) fn box_probabilities(alpha: f64, lo: [f64; 2], hi: [f64; 2]) -> (f64, f64) {
    if lo[0] > hi[0] || lo[1] > hi[1] {
        return (0.0, 1.0);
    }
    let hit_given = |th: f64| -> f64 {
        match ray_clip([th.cos(), th.sin()], lo, hi) {
            Some((a, b)) => survival(alpha, a) - survival(alpha, b),
            None => 0.0,
        }
    };
    let br = breakpoints(lo, hi);
    let hit = relative_integral(&hit_given, &br) / TAU;
    if hit < 0.5 {
        return (hit, 1.0 - hit);
    }
    let miss_given = |th: f64| -> f64 {
        match ray_clip([th.cos(), th.sin()], lo, hi) {
            Some((a, b)) => (1.0 - survival(alpha, a)) + survival(alpha, b),
            None => 1.0,
        }
    };
    let miss = relative_integral(&miss_given, &br) / TAU;
    (1.0 - miss, miss)
}

/// Integral of a nonnegative integrand to about 1e-11 relative accuracy.
fn relative_integral<F: Fn(f64) -> f64>(f: &F, br: &[f64]) -> f64 {
    let (coarse, _) = integrate_panels(f, br, 1e-8);
    if coarse <= 0.0 {
        return 0.0;
    }
    if coarse > 1.0 {
        return integrate_panels(f, br, 1e-11).0;
    }
    integrate_panels(f, br, (1e-11 * coarse).max(1e-300)).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::law::pareto_radius;
    use crate::rng::rng_from;

    #[test]
    fn tail_is_continuous_and_matches_whole_plane() {
        let a = 2.0;
        assert_eq!(tail(a, 0.5), 1.0);
        assert!((tail(a, 1.0 - 1e-9) - tail(a, 1.0)).abs() < 1e-8);
        assert!((tail(a, 0.7072) - 1.0).abs() < 1e-3);
        // α = 2: (4/π) ∫_0^{π/4} cos² = (4/π)(π/8 + 1/4) = 1/2 + 1/π
        assert!((linf_moment(2.0) - (0.5 + 1.0 / PI)).abs() < 1e-14);
    }

    #[test]
    fn box_probabilities_against_monte_carlo() {
        let alpha = 1.5;
        let boxes = [([-3.0, -3.0], [3.0, 3.0]), ([2.0, -1.0], [5.0, 4.0]), ([-0.5, 0.3], [1.2, 2.7]), ([10.0, 10.0], [11.0, 11.0])];
        let n = 400_000;
        let mut rng = rng_from(11);
        let mut counts = [0u32; 4];
        for _ in 0..n {
            let r = pareto_radius(&mut rng, alpha);
            let th = rand::Rng::random::<f64>(&mut rng) * TAU;
            let (x, y) = (r * th.cos(), r * th.sin());
            for (k, (lo, hi)) in boxes.iter().enumerate() {
                if x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] {
                    counts[k] += 1;
                }
            }
        }
        for (k, (lo, hi)) in boxes.iter().enumerate() {
            let (hit, miss) = box_probabilities(alpha, *lo, *hi);
            assert!((hit + miss - 1.0).abs() < 1e-12);
            let p_hat = counts[k] as f64 / n as f64;
            let se = (hit * (1.0 - hit) / n as f64).sqrt().max(1e-6);
            assert!((p_hat - hit).abs() < 4.0 * se, "box {k}: {p_hat} vs {hit}");
        }
    }

    #[test]
    fn centered_ball_complements_tail() {
        for r in [0.8, 1.0, 3.0, 17.0] {
            let (_, miss) = box_probabilities(2.0, [-r, -r], [r, r]);
            // closed box vs P(‖ξ‖ ≥ r): the boundary has probability zero
            assert!((miss - tail(2.0, r)).abs() < 1e-11, "{r}: {miss} vs {}", tail(2.0, r));
        }
    }
}
