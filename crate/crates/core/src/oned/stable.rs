//! Greedy stable matching of lattice sites to points on the line.
//!
//! Repeatedly matching mutually closest free pairs is the same as scanning
//! all (site, point) pairs in increasing order of
//! `(distance, site, point position)` and keeping a pair when both ends are
//! still free. On the line the first such pair is always adjacent among the
//! free items in position order, so a linked list of free items and a heap
//! of adjacent site–point pairs suffice: each match removes two items and
//! creates at most one new adjacency.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::sample::{LinePoint, LineSample};

pub const UNMATCHED: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct StableMatch {
    sites: Vec<i64>,
    points: Vec<LinePoint>,
    site_to_point: Vec<u32>,
    point_to_site: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockingPair {
    pub site: i64,
    pub point: usize,
}

/// Greedy stable matching of the window sites to the sample's points.
pub fn greedy_stable_match(sample: &LineSample) -> StableMatch {
    stable_match_on(&sample.sites(), sample.points())
}

const NIL: u32 = u32::MAX;

/// Greedy stable matching for explicit sites (sorted, distinct) and points
/// (sorted by position, then label).
pub fn stable_match_on(sites: &[i64], points: &[LinePoint]) -> StableMatch {
    debug_assert!(sites.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(points.windows(2).all(|w| w[0].x <= w[1].x));
    let (ns, np) = (sites.len(), points.len());
    // merged order; a point sorts before a site at the same position.
    // Items below `np` are points, the rest sites.
    let mut order: Vec<u32> = Vec::with_capacity(ns + np);
    let (mut i, mut j) = (0, 0);
    while i < np || j < ns {
        if j == ns || (i < np && points[i].x <= sites[j] as f64) {
            order.push(i as u32);
            i += 1;
        } else {
            order.push((np + j) as u32);
            j += 1;
        }
    }
    let len = order.len();
    let mut prev: Vec<u32> = (0..len as u32).map(|k| k.wrapping_sub(1)).collect();
    let mut next: Vec<u32> = (1..=len as u32).map(|k| if k as usize == len { NIL } else { k }).collect();
    if len > 0 {
        prev[0] = NIL;
    }
    // heap entries order by (distance, site, point); distances are
    // nonnegative, so their bit patterns sort like the values
    let pair = |a: u32, b: u32| -> Option<Reverse<(u64, u32, u32, u32, u32)>> {
        let (x, y) = (order[a as usize] as usize, order[b as usize] as usize);
        let (pi, si) = match (x < np, y < np) {
            (true, false) => (x, y - np),
            (false, true) => (y, x - np),
            _ => return None,
        };
        let dist = (points[pi].x - sites[si] as f64).abs();
        Some(Reverse((dist.to_bits(), si as u32, pi as u32, a, b)))
    };
    let mut heap: BinaryHeap<_> = (1..len as u32).filter_map(|k| pair(k - 1, k)).collect();
    let mut alive = vec![true; len];
    let mut site_to_point = vec![UNMATCHED; ns];
    let mut point_to_site = vec![UNMATCHED; np];
    while let Some(Reverse((_, si, pi, a, b))) = heap.pop() {
        if !alive[a as usize] || !alive[b as usize] {
            continue;
        }
        site_to_point[si as usize] = pi;
        point_to_site[pi as usize] = si;
        alive[a as usize] = false;
        alive[b as usize] = false;
        let (l, r) = (prev[a as usize], next[b as usize]);
        if l != NIL {
            next[l as usize] = r;
        }
        if r != NIL {
            prev[r as usize] = l;
        }
        if l != NIL && r != NIL {
            if let Some(c) = pair(l, r) {
                heap.push(c);
            }
        }
    }
    StableMatch { sites: sites.to_vec(), points: points.to_vec(), site_to_point, point_to_site }
}

impl StableMatch {
    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn points(&self) -> &[LinePoint] {
        &self.points
    }

    fn site_index(&self, v: i64) -> Option<usize> {
        self.sites.binary_search(&v).ok()
    }

    /// Position of `M(v)`.
    pub fn partner(&self, v: i64) -> Option<f64> {
        let si = self.site_index(v)?;
        let pi = self.site_to_point[si];
        (pi != UNMATCHED).then(|| self.points[pi as usize].x)
    }

    /// `|M(v) - v|`.
    pub fn distance(&self, v: i64) -> Option<f64> {
        self.partner(v).map(|x| (x - v as f64).abs())
    }

    pub fn matched_count(&self) -> usize {
        self.site_to_point.iter().filter(|&&p| p != UNMATCHED).count()
    }

    fn site_dist(&self, si: usize) -> f64 {
        match self.site_to_point[si] {
            UNMATCHED => f64::INFINITY,
            pi => (self.points[pi as usize].x - self.sites[si] as f64).abs(),
        }
    }

    fn point_dist(&self, pi: usize) -> f64 {
        match self.point_to_site[pi] {
            UNMATCHED => f64::INFINITY,
            si => (self.points[pi].x - self.sites[si as usize] as f64).abs(),
        }
    }

    /// Pairs `(v, x)` with `|v - x|` strictly below both `|v - M(v)|` and
    /// `|M⁻¹(x) - x|` (free ends count as infinitely far). Only points
    /// closer to `v` than its partner can block, so each site scans just
    /// that range.
    pub fn blocking_pairs(&self) -> Vec<BlockingPair> {
        let mut out = Vec::new();
        for (si, &v) in self.sites.iter().enumerate() {
            let dv = self.site_dist(si);
            let vf = v as f64;
            let (lo, hi) = if dv.is_finite() {
                (self.points.partition_point(|p| p.x <= vf - dv), self.points.partition_point(|p| p.x < vf + dv))
            } else {
                (0, self.points.len())
            };
            for pi in lo..hi {
                let d = (self.points[pi].x - vf).abs();
                if d < dv && d < self.point_dist(pi) {
                    out.push(BlockingPair { site: v, point: pi });
                }
            }
        }
        out
    }

    /// Every site against every point.
    pub fn blocking_pairs_bruteforce(&self) -> Vec<BlockingPair> {
        let mut out = Vec::new();
        for (si, &v) in self.sites.iter().enumerate() {
            for pi in 0..self.points.len() {
                let d = (self.points[pi].x - v as f64).abs();
                if d < self.site_dist(si) && d < self.point_dist(pi) {
                    out.push(BlockingPair { site: v, point: pi });
                }
            }
        }
        out
    }

    /// Sites in `[0, t)` matched at distance greater than `t`.
    pub fn long_matches(&self, t: i64) -> usize {
        (0..t).filter(|&v| self.distance(v).is_none_or(|d| d > t as f64)).count()
    }
}
