use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{enclosing_box, linf_distance, Cube, DyadicBox, MAX_DIM};

/// A value per lattice site of a cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteField<T> {
    pub cube: Cube,
    pub values: Vec<T>,
}

impl<T: Copy> SiteField<T> {
    pub fn filled(cube: Cube, value: T) -> Self {
        SiteField { cube, values: vec![value; cube.len()] }
    }

    pub fn from_fn<F: FnMut(&[i64]) -> T>(cube: Cube, mut f: F) -> Self {
        let values = cube.sites().map(|s| f(&s[..cube.dim])).collect();
        SiteField { cube, values }
    }

    pub fn get(&self, site: &[i64]) -> Option<T> {
        self.cube.index_of(site).map(|i| self.values[i])
    }

    pub fn set(&mut self, site: &[i64], value: T) -> bool {
        match self.cube.index_of(site) {
            Some(i) => {
                self.values[i] = value;
                true
            }
            None => false,
        }
    }
}

/// Smallest `i` with `2^i ≥ q/4`, i.e. `⌈log₂ R⌉` for `R = q/4`.
fn scale_of_quarters(q: u64) -> u32 {
    let mut i = 0;
    while 4u64 << i < q {
        i += 1;
    }
    i
}

/// `R¹_v = max_u (R⁰_u - ¼‖u - v‖∞)` and `I¹_v = ⌈log₂ R¹_v⌉` for `v` in
/// `target`, maximizing over the sites of the `r0` field.
///
/// Since `R⁰ ≥ 1`, only sites with `R⁰_u ≥ 2` can beat the `u = v` term, and
/// only within distance `4R⁰_u - 5`; the maximum is accumulated in exact
/// quarter units by scattering from those sites.
pub fn smooth_field(r0: &SiteField<u64>, target: Cube) -> (SiteField<f64>, SiteField<u32>) {
    let d = target.dim;
    let mut q: SiteField<u64> = SiteField::from_fn(target, |v| 4 * r0.get(v).unwrap_or(1));
    for (idx, &r) in r0.values.iter().enumerate() {
        if r < 2 {
            continue;
        }
        let u = r0.cube.site(idx);
        let reach = 4 * r as i64 - 5;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for j in 0..d {
            lo[j] = u[j] - reach;
            hi[j] = u[j] + reach;
        }
        for t in target.sub_box_indices(&lo[..d], &hi[..d]) {
            let v = target.site(t);
            let dist = (0..d).map(|j| (u[j] - v[j]).abs()).max().unwrap_or(0) as u64;
            let cand = (4 * r).saturating_sub(dist);
            if cand > q.values[t] {
                q.values[t] = cand;
            }
        }
    }
    let r1 = SiteField { cube: target, values: q.values.iter().map(|&x| x as f64 / 4.0).collect() };
    let i1 = SiteField { cube: target, values: q.values.iter().map(|&x| scale_of_quarters(x)).collect() };
    (r1, i1)
}

/// A family of dyadic boxes with, for every site of `region`, the list of
/// boxes containing it. Built either by [`assemble_cover`] or from an
/// arbitrary family (e.g. negative-control fixtures).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    region: Cube,
    boxes: Vec<DyadicBox>,
    offsets: Vec<u32>,
    members: Vec<u32>,
}

impl Cover {
    pub fn from_boxes(region: Cube, boxes: Vec<DyadicBox>) -> Self {
        let d = region.dim;
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); region.len()];
        for (b, bx) in boxes.iter().enumerate() {
            let mut lo = [0i64; MAX_DIM];
            let mut hi = [0i64; MAX_DIM];
            for j in 0..d {
                lo[j] = bx.corner()[j];
                hi[j] = bx.last_site(j);
            }
            for idx in region.sub_box_indices(&lo[..d], &hi[..d]) {
                lists[idx].push(b as u32);
            }
        }
        let mut offsets = Vec::with_capacity(region.len() + 1);
        let mut members = Vec::new();
        offsets.push(0);
        for l in lists {
            members.extend(l);
            offsets.push(members.len() as u32);
        }
        Cover { region, boxes, offsets, members }
    }

    pub fn region(&self) -> Cube {
        self.region
    }

    pub fn boxes(&self) -> &[DyadicBox] {
        &self.boxes
    }

    /// Indices of the boxes containing `site`.
    pub fn boxes_at(&self, site: &[i64]) -> &[u32] {
        match self.region.index_of(site) {
            Some(i) => &self.members[self.offsets[i] as usize..self.offsets[i + 1] as usize],
            None => &[],
        }
    }

    /// `D_v`, the box containing `site` (the first one if several do).
    pub fn box_of(&self, site: &[i64]) -> Option<&DyadicBox> {
        self.boxes_at(site).first().map(|&b| &self.boxes[b as usize])
    }

    /// Boxes of the family that meet `bx` (closed boxes, touching counts),
    /// found through the sites in `bx ⊕ 1`.
    pub fn touching(&self, bx: &DyadicBox) -> Vec<u32> {
        let d = self.region.dim;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for j in 0..d {
            lo[j] = bx.corner()[j] - 1;
            hi[j] = bx.last_site(j) + 1;
        }
        let mut out = BTreeSet::new();
        for idx in self.region.sub_box_indices(&lo[..d], &hi[..d]) {
            for &b in &self.members[self.offsets[idx] as usize..self.offsets[idx + 1] as usize] {
                if self.boxes[b as usize].intersects(bx) {
                    out.insert(b);
                }
            }
        }
        out.into_iter().collect()
    }
}

/// `I_v = max { I¹_u : v ∈ Q_{I¹_u}(u) }` over `target` by scattering the
/// distinct boxes `Q_{I¹_u}(u)`, and the cover `{ Q_{I_v}(v) }`.
pub fn assemble_cover(i1: &SiteField<u32>, target: Cube) -> (SiteField<u32>, Cover) {
    let d = target.dim;
    let mut sources = BTreeSet::new();
    for (idx, &i) in i1.values.iter().enumerate() {
        let u = i1.cube.site(idx);
        sources.insert(enclosing_box(&u[..d], i));
    }
    let mut field = SiteField::filled(target, 0u32);
    for bx in &sources {
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for j in 0..d {
            lo[j] = bx.corner()[j];
            hi[j] = bx.last_site(j);
        }
        for t in target.sub_box_indices(&lo[..d], &hi[..d]) {
            field.values[t] = field.values[t].max(bx.scale());
        }
    }
    let mut boxes = BTreeSet::new();
    for (idx, &i) in field.values.iter().enumerate() {
        let v = target.site(idx);
        boxes.insert(enclosing_box(&v[..d], i));
    }
    let cover = Cover::from_boxes(target, boxes.into_iter().collect());
    (field, cover)
}

/// `max |R_u - R_v| / ‖u - v‖∞` over a field; used to check the ¼-Lipschitz
/// property of the smoothed radius.
pub fn lipschitz_constant(field: &SiteField<f64>) -> f64 {
    let d = field.cube.dim;
    let mut worst = 0.0f64;
    let n = field.values.len();
    for a in 0..n {
        let u = field.cube.site(a);
        for b in (a + 1)..n {
            let v = field.cube.site(b);
            let uf: Vec<f64> = u[..d].iter().map(|&c| c as f64).collect();
            let vf: Vec<f64> = v[..d].iter().map(|&c| c as f64).collect();
            let dist = linf_distance(&uf, &vf);
            worst = worst.max((field.values[a] - field.values[b]).abs() / dist);
        }
    }
    worst
}
