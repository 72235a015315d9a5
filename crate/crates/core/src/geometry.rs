//! ℓ∞ geometry on ℝ^d: lattice cubes, shifted dyadic boxes and closed
//! segment–box intersection.

use serde::{Deserialize, Serialize};

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

/// Relative slack used when comparing slab parameters; boundary ties count
/// as intersections.
const TIE_EPS: f64 = 1e-12;

/// ℓ∞ distance between two points.
pub fn linf_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

pub fn linf_norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a.abs()).fold(0.0, f64::max)
}

/// The lattice cube `[lo, hi]^d ∩ ℤ^d` with row-major indexing; the first
/// coordinate is the slowest, so index order is lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cube {
    pub dim: usize,
    pub lo: i64,
    pub hi: i64,
}

impl Cube {
    pub fn new(dim: usize, lo: i64, hi: i64) -> Self {
        debug_assert!(dim >= 1 && dim <= MAX_DIM && lo <= hi);
        Cube { dim, lo, hi }
    }

    /// The cube `[-half, half]^d`.
    pub fn centered(dim: usize, half: i64) -> Self {
        Cube::new(dim, -half, half)
    }

    pub fn side(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.iter().all(|&c| c >= self.lo && c <= self.hi)
    }

    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let side = self.side();
        Some(site.iter().fold(0usize, |acc, &c| acc * side + (c - self.lo) as usize))
    }

    pub fn site(&self, mut index: usize) -> [i64; MAX_DIM] {
        let side = self.side();
        let mut out = [0i64; MAX_DIM];
        for j in (0..self.dim).rev() {
            out[j] = self.lo + (index % side) as i64;
            index /= side;
        }
        out
    }

    /// Grow (or shrink, for negative `by`) symmetrically.
    pub fn expand(&self, by: i64) -> Cube {
        Cube::new(self.dim, self.lo - by, self.hi + by)
    }

    /// Iterate all sites in lexicographic order.
    pub fn sites(&self) -> impl Iterator<Item = [i64; MAX_DIM]> + '_ {
        (0..self.len()).map(move |i| self.site(i))
    }

    /// Indices of all sites whose coordinates lie in `[lo_j, hi_j]` per axis
    /// (clipped to the cube), in lexicographic order.
    pub fn sub_box_indices(&self, lo: &[i64], hi: &[i64]) -> Vec<usize> {
        let mut l = [0i64; MAX_DIM];
        let mut h = [0i64; MAX_DIM];
        for j in 0..self.dim {
            l[j] = lo[j].max(self.lo);
            h[j] = hi[j].min(self.hi);
            if l[j] > h[j] {
                return Vec::new();
            }
        }
        let mut out = Vec::new();
        let mut cur = l;
        loop {
            out.push(self.index_of(&cur[..self.dim]).expect("clipped to cube"));
            let mut j = self.dim;
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                if cur[j] < h[j] {
                    cur[j] += 1;
                    break;
                }
                cur[j] = l[j];
            }
        }
    }
}

/// A shifted dyadic box `k + [-1/2, 2^i - 1/2]^d` with `k ∈ 2^i ℤ^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicBox {
    dim: u8,
    scale: u8,
    corner: [i64; MAX_DIM],
}

impl DyadicBox {
    /// Build a box from its scale and corner; the corner must lie in `2^i ℤ^d`.
    pub fn new(scale: u32, corner: &[i64]) -> Option<Self> {
        if corner.is_empty() || corner.len() > MAX_DIM || scale > 62 {
            return None;
        }
        let side = 1i64 << scale;
        if corner.iter().any(|c| c.rem_euclid(side) != 0) {
            return None;
        }
        let mut k = [0i64; MAX_DIM];
        k[..corner.len()].copy_from_slice(corner);
        Some(DyadicBox { dim: corner.len() as u8, scale: scale as u8, corner: k })
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn scale(&self) -> u32 {
        self.scale as u32
    }

    pub fn corner(&self) -> &[i64] {
        &self.corner[..self.dim()]
    }

    /// Side length `2^i`, which is also the ℓ∞ diameter.
    pub fn side(&self) -> i64 {
        1i64 << self.scale
    }

    pub fn diam(&self) -> f64 {
        self.side() as f64
    }

    /// Number of lattice points, `2^{id}`.
    pub fn lattice_count(&self) -> u64 {
        1u64 << (self.scale as u32 * self.dim as u32)
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.corner[axis] as f64 - 0.5
    }

    pub fn hi(&self, axis: usize) -> f64 {
        (self.corner[axis] + self.side()) as f64 - 0.5
    }

    /// Last lattice coordinate along `axis`.
    pub fn last_site(&self, axis: usize) -> i64 {
        self.corner[axis] + self.side() - 1
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|j| x[j] >= self.lo(j) && x[j] <= self.hi(j))
    }

    pub fn contains_site(&self, v: &[i64]) -> bool {
        (0..self.dim()).all(|j| v[j] >= self.corner[j] && v[j] <= self.last_site(j))
    }

    /// Closed boxes intersect, touching included.
    pub fn intersects(&self, other: &DyadicBox) -> bool {
        (0..self.dim()).all(|j| self.lo(j) <= other.hi(j) && other.lo(j) <= self.hi(j))
    }

    /// Whether `other` is contained in `self`.
    pub fn contains_box(&self, other: &DyadicBox) -> bool {
        (0..self.dim()).all(|j| self.lo(j) <= other.lo(j) && other.hi(j) <= self.hi(j))
    }

    /// The scale-`i+1` box containing this one.
    pub fn parent(&self) -> DyadicBox {
        enclosing_box(self.corner(), self.scale() + 1)
    }
}

/// The unique scale-`i` dyadic box containing the lattice site `v`.
pub fn enclosing_box(v: &[i64], scale: u32) -> DyadicBox {
    let side = 1i64 << scale;
    let mut k = [0i64; MAX_DIM];
    for (j, &c) in v.iter().enumerate() {
        k[j] = c.div_euclid(side) * side;
    }
    DyadicBox { dim: v.len() as u8, scale: scale as u8, corner: k }
}

/// Call `f` on every integer vector in `∏ [lo_j, hi_j]`, lexicographically.
pub fn for_each_index<F: FnMut(&[i64])>(lo: &[i64], hi: &[i64], mut f: F) {
    let d = lo.len();
    if (0..d).any(|j| lo[j] > hi[j]) {
        return;
    }
    let mut cur = [0i64; MAX_DIM];
    cur[..d].copy_from_slice(lo);
    loop {
        f(&cur[..d]);
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if cur[j] < hi[j] {
                cur[j] += 1;
                break;
            }
            cur[j] = lo[j];
        }
    }
}

/// Parametric clip of the segment `a + t (b - a)`, `t ∈ [0, 1]`, against the
/// closed axis-aligned box `[lo, hi]`. Returns the surviving parameter range.
pub fn clip_segment(a: &[f64], b: &[f64], lo: &[f64], hi: &[f64]) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for j in 0..a.len() {
        let dir = b[j] - a[j];
        if dir == 0.0 {
            if a[j] < lo[j] || a[j] > hi[j] {
                return None;
            }
            continue;
        }
        let (mut e, mut x) = ((lo[j] - a[j]) / dir, (hi[j] - a[j]) / dir);
        if e > x {
            std::mem::swap(&mut e, &mut x);
        }
        t0 = t0.max(e);
        t1 = t1.min(x);
        if t0 > t1 + TIE_EPS {
            return None;
        }
    }
    Some((t0, t1.max(t0)))
}

/// Whether the closed segment `[a, b]` meets the closed box.
pub fn segment_intersects_box(a: &[f64], b: &[f64], bx: &DyadicBox) -> bool {
    let d = bx.dim();
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    for j in 0..d {
        lo[j] = bx.lo(j);
        hi[j] = bx.hi(j);
    }
    clip_segment(&a[..d], &b[..d], &lo[..d], &hi[..d]).is_some()
}

/// Range of scale-`i` box indices `m` (box `[m 2^i - 1/2, (m+1) 2^i - 1/2]`)
/// whose closed extent meets `[x_min, x_max]`.
pub fn box_index_range(x_min: f64, x_max: f64, scale: u32) -> (i64, i64) {
    let side = (1i64 << scale) as f64;
    let lo = ((x_min + 0.5) / side).ceil() as i64 - 1;
    let hi = ((x_max + 0.5) / side).floor() as i64;
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linf_examples() {
        assert_eq!(linf_distance(&[1.5, -2.0], &[1.5, -2.0]), 0.0);
        assert_eq!(linf_distance(&[0.0, 0.0], &[3.0, -4.0]), 4.0);
        assert_eq!(linf_distance(&[1.0, 2.0, 3.0], &[4.0, 0.0, 3.0]), 3.0);
    }

    #[test]
    fn enclosing_box_examples() {
        let b = enclosing_box(&[0, 0], 0);
        assert_eq!((b.lo(0), b.hi(0), b.lo(1), b.hi(1)), (-0.5, 0.5, -0.5, 0.5));

        let b = enclosing_box(&[3], 2);
        assert_eq!(b.corner(), &[0]);
        assert_eq!((b.lo(0), b.hi(0)), (-0.5, 3.5));
        assert!(b.contains_point(&[3.0]));

        let b = enclosing_box(&[5, -3], 1);
        assert_eq!(b.corner(), &[4, -4]);
        assert_eq!((b.lo(0), b.hi(0)), (3.5, 5.5));
        assert_eq!((b.lo(1), b.hi(1)), (-4.5, -2.5));
    }

    #[test]
    fn segment_examples() {
        let bx = enclosing_box(&[2, 2], 0); // [1.5, 2.5]^2
        assert!(segment_intersects_box(&[0.0, 0.0], &[5.0, 5.0], &bx));
        assert!(!segment_intersects_box(&[0.0, 0.0], &[5.0, 0.0], &bx));
        assert!(segment_intersects_box(&[2.0, 2.0], &[2.0, 2.0], &bx));
        assert!(!segment_intersects_box(&[0.0, 0.0], &[0.0, 0.0], &bx));
        // touching a corner counts
        assert!(segment_intersects_box(&[0.5, 3.5], &[2.5, 1.5], &bx));
        assert!(!segment_intersects_box(&[0.5, 2.5], &[1.5, 3.5], &bx));
    }

    #[test]
    fn index_range_includes_both_boxes_on_shared_face() {
        // x = 1.5 is the face between scale-0 boxes of sites 1 and 2
        assert_eq!(box_index_range(1.5, 1.5, 0), (1, 2));
        assert_eq!(box_index_range(1.2, 1.3, 0), (1, 1));
        // scale 2 boxes: [-0.5, 3.5], [3.5, 7.5]
        assert_eq!(box_index_range(0.0, 3.5, 2), (0, 1));
    }

    #[test]
    fn cube_indexing_is_lexicographic() {
        let c = Cube::centered(2, 1);
        let sites: Vec<_> = c.sites().map(|s| (s[0], s[1])).collect();
        assert_eq!(sites[0], (-1, -1));
        assert_eq!(sites[1], (-1, 0));
        assert_eq!(sites[3], (0, -1));
        for (i, s) in c.sites().enumerate() {
            assert_eq!(c.index_of(&s[..2]), Some(i));
        }
        assert_eq!(c.sub_box_indices(&[0, 0], &[5, 5]).len(), 4);
    }
}
