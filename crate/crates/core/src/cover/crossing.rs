use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{box_index_range, for_each_index, segment_intersects_box, DyadicBox, MAX_DIM};
use crate::process::WindowRealization;

/// Whether site `u` (with point `p`) crosses `bx`: the segment `[u, Π_u]`
/// meets the box and `Π_u` lies outside it.
pub fn crosses(u: &[i64], p: &[f64], bx: &DyadicBox) -> bool {
    let d = bx.dim();
    let mut a = [0.0; MAX_DIM];
    for j in 0..d {
        a[j] = u[j] as f64;
    }
    !bx.contains_point(p) && segment_intersects_box(&a[..d], p, bx)
}

/// Segment index over a realization for repeated crossing queries.
///
/// Most segments are short and are found by scanning the sites within
/// `short_reach` of the box; the `⌈√n⌉` longest are kept in a list and
/// tested one by one.
pub struct CrossingIndex<'a> {
    real: &'a WindowRealization,
    short_reach: f64,
    long: Vec<usize>,
}

impl<'a> CrossingIndex<'a> {
    pub fn new(real: &'a WindowRealization) -> Self {
        let n = real.len();
        let mut disp: Vec<(f64, usize)> = (0..n).map(|i| (real.displacement(i), i)).collect();
        let k = ((n as f64).sqrt().ceil() as usize).min(n);
        // partition so the k largest displacements come last
        let split = n - k;
        if split < n {
            disp.select_nth_unstable_by(split, |a, b| a.0.total_cmp(&b.0));
        }
        let short_reach = disp[..split].iter().map(|x| x.0).fold(0.0, f64::max);
        let mut long: Vec<usize> = disp[split..].iter().filter(|x| x.0 > short_reach).map(|x| x.1).collect();
        long.sort_unstable();
        CrossingIndex { real, short_reach, long }
    }

    pub fn realization(&self) -> &WindowRealization {
        self.real
    }

    /// Sites crossing `bx`, in lexicographic order.
    pub fn crossing_set(&self, bx: &DyadicBox) -> Result<Vec<[i64; MAX_DIM]>> {
        let real = self.real;
        let d = real.dim();
        let window = real.window();
        if bx.dim() != d {
            return Err(Error::InvalidParameter("box dimension differs from the realization".into()));
        }
        if (0..d).any(|j| bx.corner()[j] < window.lo || bx.last_site(j) > window.hi) {
            return Err(Error::MarginExceeded(format!(
                "box at {:?} (scale {}) is not inside the sampled window",
                bx.corner(),
                bx.scale()
            )));
        }
        let reach = self.short_reach.ceil() as i64 + 1;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for j in 0..d {
            lo[j] = bx.corner()[j] - reach;
            hi[j] = bx.last_site(j) + reach;
        }
        let mut out: Vec<usize> = Vec::new();
        for i in window.sub_box_indices(&lo[..d], &hi[..d]) {
            let u = real.site(i);
            if crosses(&u[..d], real.point(i), bx) {
                out.push(i);
            }
        }
        for &i in &self.long {
            let u = real.site(i);
            let near = (0..d).all(|j| u[j] >= lo[j] && u[j] <= hi[j]);
            if !near && crosses(&u[..d], real.point(i), bx) {
                out.push(i);
            }
        }
        out.sort_unstable();
        Ok(out.into_iter().map(|i| real.site(i)).collect())
    }

    /// `I⁰_v = min { i ≤ i_max : |𝒞(Q_i(v))| ≤ 2^{id} }`, with the saturation
    /// flag set (and `I⁰_v = i_max`) when no scale qualifies.
    pub fn i0(&self, v: &[i64], i_max: u32) -> Result<(u32, bool)> {
        let d = v.len() as u32;
        for i in 0..=i_max {
            let bx = crate::geometry::enclosing_box(v, i);
            if self.crossing_set(&bx)?.len() as u64 <= 1u64 << (i * d) {
                return Ok((i, false));
            }
        }
        Ok((i_max, true))
    }
}

/// `𝒞(box)`: sites of the realization whose segment crosses the box.
pub fn crossing_set(real: &WindowRealization, bx: &DyadicBox) -> Result<Vec<[i64; MAX_DIM]>> {
    CrossingIndex::new(real).crossing_set(bx)
}

/// `(I⁰_v, saturated)` by direct crossing enumeration.
pub fn compute_i0(real: &WindowRealization, v: &[i64], i_max: u32) -> Result<(u32, bool)> {
    CrossingIndex::new(real).i0(v, i_max)
}

/// Crossing counts of every dyadic box `Q_i(v)`, `v ∈ [-h, h]^d`, for scales
/// `0..=max_scale`, computed in one pass over the segments.
#[derive(Debug, Clone)]
pub struct CrossingCounts {
    dim: usize,
    grids: Vec<ScaleGrid>,
}

#[derive(Debug, Clone)]
struct ScaleGrid {
    lo: i64,
    side: usize,
    counts: Vec<u32>,
}

impl ScaleGrid {
    fn index(&self, m: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &c in m {
            let off = c - self.lo;
            if off < 0 || off as usize >= self.side {
                return None;
            }
            idx = idx * self.side + off as usize;
        }
        Some(idx)
    }
}

impl CrossingCounts {
    pub fn compute(real: &WindowRealization, h: i64, max_scale: u32) -> Self {
        let d = real.dim();
        let shapes: Vec<(i64, usize)> = (0..=max_scale)
            .map(|i| {
                let side = 1i64 << i;
                let lo = (-h).div_euclid(side);
                let hi = h.div_euclid(side);
                (lo, (hi - lo + 1) as usize)
            })
            .collect();
        let empty = || -> Vec<Vec<u32>> { shapes.iter().map(|&(_, s)| vec![0u32; s.pow(d as u32)]).collect() };
        let counts = (0..real.len())
            .into_par_iter()
            .with_min_len(4096)
            .fold(empty, |mut acc, i| {
                let u = real.site(i);
                let p = real.point(i);
                if (0..d).all(|j| p[j] == u[j] as f64) {
                    return acc;
                }
                let mut lo = [0i64; MAX_DIM];
                let mut hi = [0i64; MAX_DIM];
                for (i_scale, &(glo, side)) in shapes.iter().enumerate() {
                    let scale = i_scale as u32;
                    let ghi = glo + side as i64 - 1;
                    let mut empty_range = false;
                    for j in 0..d {
                        let (a, b) = (p[j].min(u[j] as f64), p[j].max(u[j] as f64));
                        let (l, r) = box_index_range(a, b, scale);
                        lo[j] = l.max(glo);
                        hi[j] = r.min(ghi);
                        empty_range |= lo[j] > hi[j];
                    }
                    if empty_range {
                        continue;
                    }
                    let grid = &mut acc[i_scale];
                    for_each_index(&lo[..d], &hi[..d], |m| {
                        let mut corner = [0i64; MAX_DIM];
                        for j in 0..d {
                            corner[j] = m[j] << scale;
                        }
                        let bx = DyadicBox::new(scale, &corner[..d]).expect("aligned corner");
                        if crosses(&u[..d], p, &bx) {
                            let mut idx = 0usize;
                            for &c in m {
                                idx = idx * side + (c - glo) as usize;
                            }
                            grid[idx] += 1;
                        }
                    });
                }
                acc
            })
            .reduce(empty, |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    for (s, t) in x.iter_mut().zip(y) {
                        *s += t;
                    }
                }
                a
            });
        let grids = shapes
            .into_iter()
            .zip(counts)
            .map(|((lo, side), counts)| ScaleGrid { lo, side, counts })
            .collect();
        CrossingCounts { dim: d, grids }
    }

    pub fn max_scale(&self) -> u32 {
        self.grids.len() as u32 - 1
    }

    /// `|𝒞(bx)|` if the box is within the tabulated range.
    pub fn get(&self, bx: &DyadicBox) -> Option<u32> {
        let grid = self.grids.get(bx.scale() as usize)?;
        let mut m = [0i64; MAX_DIM];
        for j in 0..self.dim {
            m[j] = bx.corner()[j] >> bx.scale();
        }
        grid.index(&m[..self.dim]).map(|i| grid.counts[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::enclosing_box;
    use crate::process::{sample_realization, PerturbationLaw};

    fn fixture_1d() -> WindowRealization {
        let law = PerturbationLaw::zero(1);
        let mut w = WindowRealization::identity(&law, 8, 0).unwrap();
        w.set_point(&[-3], &[3.0]).unwrap();
        w.set_point(&[-2], &[1.0]).unwrap();
        w.set_point(&[5], &[5.1]).unwrap();
        w
    }

    #[test]
    fn crossing_examples() {
        let w = fixture_1d();
        let bx = DyadicBox::new(1, &[0]).unwrap(); // [-0.5, 1.5]
        let c = crossing_set(&w, &bx).unwrap();
        assert_eq!(c.iter().map(|s| s[0]).collect::<Vec<_>>(), vec![-3]);

        let zero = WindowRealization::identity(&PerturbationLaw::zero(2), 4, 0).unwrap();
        assert!(crossing_set(&zero, &DyadicBox::new(1, &[0, 0]).unwrap()).unwrap().is_empty());

        let mut w2 = WindowRealization::identity(&PerturbationLaw::zero(2), 8, 4).unwrap();
        w2.set_point(&[-5, 0], &[5.0, 0.0]).unwrap();
        let c = crossing_set(&w2, &DyadicBox::new(1, &[0, 0]).unwrap()).unwrap();
        assert!(c.iter().any(|s| s[..2] == [-5, 0]));
    }

    #[test]
    fn i0_example() {
        // two sites crossing the unit cell of 0, one crossing Q_1(0) = [-0.5, 1.5]
        let law = PerturbationLaw::zero(1);
        let mut w = WindowRealization::identity(&law, 8, 0).unwrap();
        w.set_point(&[-3], &[1.2]).unwrap();
        w.set_point(&[3], &[-2.0]).unwrap();
        let idx = CrossingIndex::new(&w);
        assert_eq!(idx.crossing_set(&enclosing_box(&[0], 0)).unwrap().len(), 2);
        assert_eq!(idx.crossing_set(&enclosing_box(&[0], 1)).unwrap().len(), 1);
        assert_eq!(compute_i0(&w, &[0], 3).unwrap(), (1, false));
        assert_eq!(compute_i0(&WindowRealization::identity(&law, 4, 0).unwrap(), &[2], 1).unwrap(), (0, false));
    }

    #[test]
    fn saturation_when_points_flee() {
        let law = PerturbationLaw::zero(1);
        // every site jumps 100 to the right, so every small box is crossed many times
        let w = WindowRealization::from_fn(&law, 4, 120, |v| vec![v[0] as f64 + 100.0]).unwrap();
        assert_eq!(compute_i0(&w, &[0], 1).unwrap(), (1, true));
    }

    #[test]
    fn bulk_counts_match_direct_enumeration() {
        for (law, l) in [
            (PerturbationLaw::gaussian(1.5, 2).unwrap(), 6),
            (PerturbationLaw::poly_coord(1.2, 1).unwrap(), 40),
        ] {
            let w = sample_realization(&law, l, 24, 5).unwrap();
            let counts = CrossingCounts::compute(&w, l, 2);
            let idx = CrossingIndex::new(&w);
            for v in w.core().sites() {
                for i in 0..=2 {
                    let bx = enclosing_box(&v[..law.dim()], i);
                    assert_eq!(counts.get(&bx).unwrap() as usize, idx.crossing_set(&bx).unwrap().len());
                }
            }
        }
    }
}
