//! Matchings of lattice sites to process points inside cover neighborhoods
//! `N_v` (the union of the cover boxes meeting `D_v`), computed as maximum
//! bipartite matchings on a finite window.

mod bipartite;

pub use bipartite::Bipartite;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::TailCurve;
use crate::cover::{cover_trial, Cover, CoverFields, CoverOptions};
use crate::error::{Error, Result};
use crate::geometry::{linf_distance, Cube, DyadicBox, MAX_DIM};
use crate::oned::tail_curve_from_samples;
use crate::process::{PerturbationLaw, WindowRealization};
use crate::rng::trial_seed;

/// Largest region accepted by [`hall_check_bruteforce`].
pub const HALL_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMethod {
    CoverNeighborhood,
    StableOneD,
}

/// A matching `v ↦ Π_u`, stored by the label `u` of the matched point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub dim: usize,
    pub method: MatchMethod,
    pub sites: Vec<[i64; MAX_DIM]>,
    pub labels: Vec<Option<[i64; MAX_DIM]>>,
    /// `‖M(v) - v‖∞`, NaN for unmatched sites.
    pub distances: Vec<f64>,
}

impl MatchResult {
    pub fn matched_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn unmatched(&self) -> Vec<[i64; MAX_DIM]> {
        self.sites.iter().zip(&self.labels).filter(|(_, l)| l.is_none()).map(|(s, _)| *s).collect()
    }

    pub fn position(&self, site: &[i64]) -> Option<usize> {
        self.sites.iter().position(|s| &s[..self.dim] == site)
    }

    pub fn label_of(&self, site: &[i64]) -> Option<[i64; MAX_DIM]> {
        self.position(site).and_then(|i| self.labels[i])
    }

    pub fn distance_of(&self, site: &[i64]) -> Option<f64> {
        self.position(site).filter(|&i| self.labels[i].is_some()).map(|i| self.distances[i])
    }

    /// No label is used twice.
    pub fn is_injective(&self) -> bool {
        let mut seen: Vec<[i64; MAX_DIM]> = self.labels.iter().flatten().copied().collect();
        let n = seen.len();
        seen.sort_unstable();
        seen.dedup();
        seen.len() == n
    }

    /// Rows `v_coords..., matched_label_coords..., distance` with a header.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("v{j}")).collect();
        header.extend((0..self.dim).map(|j| format!("label{j}")));
        header.push("distance".into());
        w.write_record(&header)?;
        for ((s, l), dist) in self.sites.iter().zip(&self.labels).zip(&self.distances) {
            let mut row: Vec<String> = s[..self.dim].iter().map(|c| c.to_string()).collect();
            match l {
                Some(l) => row.extend(l[..self.dim].iter().map(|c| c.to_string())),
                None => row.extend((0..self.dim).map(|_| String::new())),
            }
            row.push(if dist.is_nan() { String::new() } else { format!("{dist:.17e}") });
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// `N_v`: `D_v` together with every cover box meeting it.
pub fn neighborhood(cover: &Cover, v: &[i64]) -> Vec<DyadicBox> {
    match cover.box_of(v) {
        Some(dv) => cover.touching(dv).into_iter().map(|b| cover.boxes()[b as usize]).collect(),
        None => Vec::new(),
    }
}

/// Points of the realization bucketed by nearest lattice cell.
struct PointGrid {
    cells: Cube,
    offsets: Vec<u32>,
    labels: Vec<u32>,
}

impl PointGrid {
    fn new(real: &WindowRealization) -> Self {
        let d = real.dim();
        let cells = real.window();
        let cell_of = |p: &[f64]| -> Option<usize> {
            let mut c = [0i64; MAX_DIM];
            for j in 0..d {
                let r = p[j].round();
                if r < cells.lo as f64 || r > cells.hi as f64 {
                    return None;
                }
                c[j] = r as i64;
            }
            cells.index_of(&c[..d])
        };
        let mut counts = vec![0u32; cells.len() + 1];
        let owners: Vec<Option<usize>> = (0..real.len()).map(|i| cell_of(real.point(i))).collect();
        for c in owners.iter().flatten() {
            counts[c + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut labels = vec![0u32; counts[cells.len()] as usize];
        for (i, c) in owners.iter().enumerate() {
            if let Some(c) = c {
                labels[fill[*c] as usize] = i as u32;
                fill[*c] += 1;
            }
        }
        PointGrid { cells, offsets: counts, labels }
    }

    /// Labels whose point lies in the closed box.
    fn in_box(&self, real: &WindowRealization, bx: &DyadicBox, out: &mut Vec<u32>) {
        let d = bx.dim();
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for j in 0..d {
            lo[j] = bx.corner()[j] - 1;
            hi[j] = bx.last_site(j) + 1;
        }
        for c in self.cells.sub_box_indices(&lo[..d], &hi[..d]) {
            for &l in &self.labels[self.offsets[c] as usize..self.offsets[c + 1] as usize] {
                if bx.contains_point(real.point(l as usize)) {
                    out.push(l);
                }
            }
        }
    }
}

/// Candidate labels of each site: points in `N_v`, ordered by distance to
/// `v` and then by label.
fn candidate_lists(real: &WindowRealization, cover: &Cover, sites: &[[i64; MAX_DIM]]) -> Vec<Vec<u32>> {
    let d = real.dim();
    let grid = PointGrid::new(real);
    sites
        .iter()
        .map(|v| {
            let vf: Vec<f64> = v[..d].iter().map(|&c| c as f64).collect();
            let mut labels = Vec::new();
            for bx in neighborhood(cover, &v[..d]) {
                grid.in_box(real, &bx, &mut labels);
            }
            labels.sort_unstable();
            labels.dedup();
            let mut keyed: Vec<(f64, u32)> =
                labels.into_iter().map(|l| (linf_distance(&vf, real.point(l as usize)), l)).collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            keyed.into_iter().map(|(_, l)| l).collect()
        })
        .collect()
}

/// Maximum matching of the given sites (in the given order) to points in
/// their cover neighborhoods.
pub fn match_sites(real: &WindowRealization, cover: &Cover, sites: &[[i64; MAX_DIM]]) -> MatchResult {
    let d = real.dim();
    let cands = candidate_lists(real, cover, sites);
    let mut solver = Bipartite::new(&cands, real.len());
    solver.solve();
    let mut labels = Vec::with_capacity(sites.len());
    let mut distances = Vec::with_capacity(sites.len());
    for (v, &p) in sites.iter().zip(solver.assignment()) {
        if p == bipartite::NONE {
            labels.push(None);
            distances.push(f64::NAN);
        } else {
            let vf: Vec<f64> = v[..d].iter().map(|&c| c as f64).collect();
            labels.push(Some(real.site(p as usize)));
            distances.push(linf_distance(&vf, real.point(p as usize)));
        }
    }
    MatchResult { dim: d, method: MatchMethod::CoverNeighborhood, sites: sites.to_vec(), labels, distances }
}

/// A core matching together with its postcondition checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowMatch {
    pub result: MatchResult,
    /// Largest `3R_v` over the core; sites deeper than this must be matched.
    pub interior_depth: u64,
    /// Matched sites with `‖M(v) - v‖∞ > 3R_v`.
    pub distance_violations: Vec<[i64; MAX_DIM]>,
}

/// Match every site of `core` (lexicographic order) and check the distance
/// bound `‖M(v) - v‖∞ ≤ 3R_v` and deep-interior saturation.
pub fn match_window(real: &WindowRealization, fields: &CoverFields, core: Cube) -> Result<WindowMatch> {
    let d = core.dim;
    let sites: Vec<[i64; MAX_DIM]> = core.sites().collect();
    let result = match_sites(real, &fields.cover, &sites);
    let interior_depth = 3 * fields.max_radius_on(core);
    let mut distance_violations = Vec::new();
    for (i, v) in sites.iter().enumerate() {
        let depth = core.hi - v[..d].iter().map(|c| c.abs()).max().unwrap_or(0);
        match result.labels[i] {
            None if depth as u64 > interior_depth => {
                return Err(Error::InteriorUnsaturated { site: v[..d].to_vec() })
            }
            None => {}
            Some(_) => {
                let r = fields.radius(&v[..d]).unwrap_or(1);
                if result.distances[i] > 3.0 * r as f64 {
                    distance_violations.push(*v);
                }
            }
        }
    }
    Ok(WindowMatch { result, interior_depth, distance_violations })
}

/// Exhaustive Hall check: every nonempty subset `A` of the region's sites has
/// at least `|A|` labeled points in the union of its neighborhoods.
pub fn hall_check_bruteforce(real: &WindowRealization, cover: &Cover, region: Cube) -> Result<bool> {
    let n = region.len();
    if n > HALL_CAP {
        return Err(Error::RegionTooLarge { sites: n, cap: HALL_CAP });
    }
    let sites: Vec<[i64; MAX_DIM]> = region.sites().collect();
    let cands = candidate_lists(real, cover, &sites);
    let mut universe: Vec<u32> = cands.iter().flatten().copied().collect();
    universe.sort_unstable();
    universe.dedup();
    let words = universe.len().div_ceil(64).max(1);
    let sets: Vec<Vec<u64>> = cands
        .iter()
        .map(|c| {
            let mut bits = vec![0u64; words];
            for l in c {
                let k = universe.binary_search(l).expect("in universe");
                bits[k / 64] |= 1 << (k % 64);
            }
            bits
        })
        .collect();
    Ok(hall_dfs(&sets, 0, &vec![0u64; words], 0))
}

fn hall_dfs(sets: &[Vec<u64>], next: usize, union: &[u64], chosen: usize) -> bool {
    if next == sets.len() {
        let size: u32 = union.iter().map(|w| w.count_ones()).sum();
        return size as usize >= chosen;
    }
    if !hall_dfs(sets, next + 1, union, chosen) {
        return false;
    }
    let with: Vec<u64> = union.iter().zip(&sets[next]).map(|(a, b)| a | b).collect();
    hall_dfs(sets, next + 1, &with, chosen + 1)
}

/// Empirical tail of `‖M(0) - 0‖∞` over independent cover matchings of
/// `[-L, L]^d`, with the distance-bound violations seen along the way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterTail {
    pub curve: TailCurve,
    /// `‖M(0)‖∞` per trial, `∞` when the center was left unmatched.
    pub samples: Vec<f64>,
    pub distance_violations: u64,
    pub retried_trials: u64,
}

pub fn center_match_tail(
    law: &PerturbationLaw,
    l: i64,
    trials: u64,
    r_grid: &[f64],
    seed: u64,
    opts: &CoverOptions,
) -> Result<CenterTail> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let center = vec![0i64; law.dim()];
    let per_trial: Vec<(f64, u64, u32)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial = cover_trial(law, l, trial_seed(seed, t), opts)?;
            let m = match_window(&trial.realization, &trial.fields, trial.realization.core())?;
            let dist = m.result.distance_of(&center).unwrap_or(f64::INFINITY);
            Ok((dist, m.distance_violations.len() as u64, trial.attempts))
        })
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = per_trial.iter().map(|s| s.0).collect();
    let curve = tail_curve_from_samples(&samples, r_grid, law, seed)?;
    Ok(CenterTail {
        curve,
        samples,
        distance_violations: per_trial.iter().map(|s| s.1).sum(),
        retried_trials: per_trial.iter().filter(|s| s.2 > 1).count() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{assemble_cover, SiteField};
    use crate::process::PerturbationLaw;

    fn unit_cells(region: Cube) -> Cover {
        assemble_cover(&SiteField::filled(region, 0u32), region).1
    }

    #[test]
    fn neighborhood_examples() {
        let region = Cube::centered(1, 8);
        let n = neighborhood(&unit_cells(region), &[0]);
        let lo = n.iter().map(|b| b.lo(0)).fold(f64::INFINITY, f64::min);
        let hi = n.iter().map(|b| b.hi(0)).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (-1.5, 1.5));

        let mut i1 = SiteField::filled(region, 0u32);
        i1.set(&[0], 2);
        let (_, cover) = assemble_cover(&i1, region);
        let n = neighborhood(&cover, &[1]);
        let lo = n.iter().map(|b| b.lo(0)).fold(f64::INFINITY, f64::min);
        let hi = n.iter().map(|b| b.hi(0)).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (-1.5, 4.5));
    }

    #[test]
    fn identity_matching_for_point_mass() {
        let law = PerturbationLaw::zero(2);
        let real = WindowRealization::identity(&law, 4, 2).unwrap();
        let core = real.core();
        let cover = unit_cells(Cube::centered(2, 5));
        let m = match_sites(&real, &cover, &core.sites().collect::<Vec<_>>());
        for (s, l) in m.sites.iter().zip(&m.labels) {
            assert_eq!(Some(*s), *l);
        }
        assert!(m.distances.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_by_two_instance() {
        let law = PerturbationLaw::zero(1);
        let mut real = WindowRealization::identity(&law, 3, 0).unwrap();
        real.set_point(&[0], &[0.2]).unwrap();
        real.set_point(&[1], &[0.9]).unwrap();
        let cover = unit_cells(real.window());
        let m = match_sites(&real, &cover, &[[0, 0, 0, 0], [1, 0, 0, 0]]);
        let a = m.labels[0].unwrap()[0];
        let b = m.labels[1].unwrap()[0];
        assert!(a != b && [0, 1].contains(&a) && [0, 1].contains(&b));
        assert!(m.is_injective());
    }

    #[test]
    fn coincident_points_both_match() {
        let law = PerturbationLaw::zero(1);
        let mut real = WindowRealization::identity(&law, 3, 0).unwrap();
        real.set_point(&[1], &[0.0]).unwrap();
        let cover = unit_cells(real.window());
        let m = match_sites(&real, &cover, &[[0, 0, 0, 0], [1, 0, 0, 0]]);
        assert_eq!(m.matched_count(), 2);
        assert!(m.is_injective());
    }

    #[test]
    fn hall_examples() {
        let law = PerturbationLaw::zero(1);
        let real = WindowRealization::identity(&law, 6, 0).unwrap();
        let cover = unit_cells(real.window());
        assert!(hall_check_bruteforce(&real, &cover, Cube::centered(1, 3)).unwrap());
        // expel every point far from the region [-2, 2]
        let fled = WindowRealization::from_fn(&law, 6, 0, |v| vec![v[0] as f64 * 100.0 + 0.5]).unwrap();
        assert!(!hall_check_bruteforce(&fled, &cover, Cube::centered(1, 2)).unwrap());
        assert_eq!(
            hall_check_bruteforce(&real, &cover, Cube::centered(1, 6)),
            Ok(true)
        );
        assert!(matches!(
            hall_check_bruteforce(&real, &cover, Cube::centered(2, 3)),
            Err(Error::RegionTooLarge { sites: 49, cap: 20 })
        ));
    }
}
