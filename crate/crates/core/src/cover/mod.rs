//! Crossing sets, the scale fields `I⁰ → I¹ → I`, the regular cover they
//! induce, and checks of its defining properties.
//!
//! On a finite window the fields are computed on nested regions around the
//! core `C = [-L, L]^d`, with `s = 2^{i_max}`:
//!
//! * `I⁰` on `C ⊕ 6s` (its boxes stay inside `C ⊕ 7s`),
//! * `R¹, I¹` on `C ⊕ 2s`, exact because a site beyond `4s` cannot beat the
//!   `u = v` term when every `R⁰ ≤ s`,
//! * `I` and the cover on `C ⊕ s`, exact because boxes have side `≤ s`.
//!
//! The sampled margin is `7s + reach`; sites outside the window are audited
//! by the expected number of them whose displacement could reach `C ⊕ 7s`.

mod crossing;
mod fields;
mod verify;

pub use crossing::{compute_i0, crosses, crossing_set, CrossingCounts, CrossingIndex};
pub use fields::{assemble_cover, lipschitz_constant, smooth_field, Cover, SiteField};
pub use verify::{verify_cover, verify_cover_properties, CoverReport, Violation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cube;
use crate::process::{sample_realization, PerturbationLaw, WindowRealization};

/// The computed fields and cover of one realization.
#[derive(Debug, Clone)]
pub struct CoverFields {
    pub core_half_width: i64,
    pub i_max: u32,
    /// `I⁰` on `C ⊕ 6s`.
    pub i0: SiteField<u32>,
    /// Scale search hit `i_max` without meeting the crossing bound.
    pub saturated: SiteField<bool>,
    /// `R¹` and `I¹` on `C ⊕ 2s`.
    pub r1: SiteField<f64>,
    pub i1: SiteField<u32>,
    /// `I` on `C ⊕ s`.
    pub i: SiteField<u32>,
    pub cover: Cover,
    pub(crate) counts: CrossingCounts,
}

impl CoverFields {
    /// `R_v = 2^{I_v}`.
    pub fn radius(&self, v: &[i64]) -> Option<u64> {
        self.i.get(v).map(|i| 1u64 << i)
    }

    pub fn max_radius_on(&self, region: Cube) -> u64 {
        region.sites().filter_map(|v| self.radius(&v[..region.dim])).max().unwrap_or(1)
    }
}

/// `⌊log₂ L⌋ - 1`, floored at 0.
pub fn default_i_max(l: i64) -> u32 {
    (63 - l.max(1).leading_zeros() as i64 - 1).max(0) as u32
}

/// Compute all fields on a realization whose margin is at least `7·2^{i_max}`.
pub fn build_cover_fields(real: &WindowRealization, i_max: u32, audit_threshold: f64) -> Result<CoverFields> {
    let l = real.core_half_width();
    let d = real.dim();
    let s = 1i64 << i_max;
    if real.margin() < 7 * s {
        return Err(Error::MarginInsufficient(format!(
            "margin {} is below 7 * 2^{i_max} = {}",
            real.margin(),
            7 * s
        )));
    }
    let examined = (l + 7 * s) as f64 + 0.5;
    let w = l + real.margin();
    let mass = real.law().outside_reach_bound(w, examined, audit_threshold);
    if mass > audit_threshold {
        return Err(Error::MarginExceeded(format!(
            "expected number of sites outside the window reaching the examined boxes is {mass:.3e} > {audit_threshold:e}"
        )));
    }
    let a0 = Cube::centered(d, l + 6 * s);
    let counts = CrossingCounts::compute(real, l + 6 * s, i_max);
    let mut i0 = SiteField::filled(a0, 0u32);
    let mut saturated = SiteField::filled(a0, false);
    for (idx, v) in a0.sites().enumerate() {
        let v = &v[..d];
        let found = (0..=i_max).find(|&i| {
            let bx = crate::geometry::enclosing_box(v, i);
            counts.get(&bx).expect("tabulated") as u64 <= 1u64 << (i * d as u32)
        });
        match found {
            Some(i) => i0.values[idx] = i,
            None => {
                i0.values[idx] = i_max;
                saturated.values[idx] = true;
            }
        }
    }
    if let Some(idx) = saturated.values.iter().position(|&x| x) {
        let site = a0.site(idx);
        return Err(Error::MarginInsufficient(format!(
            "crossing bound not met up to scale {i_max} at site {:?}",
            &site[..d]
        )));
    }
    let r0 = SiteField { cube: a0, values: i0.values.iter().map(|&i| 1u64 << i).collect() };
    let (r1, i1) = smooth_field(&r0, Cube::centered(d, l + 2 * s));
    let (i, cover) = assemble_cover(&i1, Cube::centered(d, l + s));
    Ok(CoverFields { core_half_width: l, i_max, i0, saturated, r1, i1, i, cover, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverOptions {
    /// Scale cap; `⌊log₂ L⌋ - 1` when absent.
    pub i_max: Option<u32>,
    /// Extra margin beyond `7·2^{i_max}`; `max(8, 2⌈typical max |ξ|⌉)` when absent.
    pub reach: Option<i64>,
    /// Bound on the expected number of unseen sites reaching the examined boxes.
    pub audit_threshold: f64,
    pub max_retries: u32,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { i_max: None, reach: None, audit_threshold: 1e-9, max_retries: 3 }
    }
}

/// A sampled realization with its cover, and how many attempts it took.
#[derive(Debug, Clone)]
pub struct CoverTrial {
    pub realization: WindowRealization,
    pub fields: CoverFields,
    pub attempts: u32,
}

/// Sample and build a cover, retrying with a larger scale cap after
/// `MarginInsufficient` and a doubled reach after `MarginExceeded`.
pub fn cover_trial(law: &PerturbationLaw, l: i64, seed: u64, opts: &CoverOptions) -> Result<CoverTrial> {
    let mut i_max = opts.i_max.unwrap_or_else(|| default_i_max(l));
    let mut reach = match opts.reach {
        Some(r) => r,
        None => {
            let s = 1i64 << i_max;
            let n = (2 * (l + 7 * s) + 1).pow(law.dim() as u32) as usize;
            let typical = law.expected_max_perturbation(n);
            8.max(2 * typical.ceil().min(1e12) as i64)
        }
    };
    let mut attempt = 0;
    loop {
        let margin = 7 * (1i64 << i_max) + reach;
        let real = sample_realization(law, l, margin, seed)?;
        match build_cover_fields(&real, i_max, opts.audit_threshold) {
            Ok(fields) => return Ok(CoverTrial { realization: real, fields, attempts: attempt + 1 }),
            Err(Error::MarginInsufficient(_)) if attempt < opts.max_retries && i_max < 40 => i_max += 1,
            Err(Error::MarginExceeded(_)) if attempt < opts.max_retries => reach *= 2,
            Err(e) => return Err(e),
        }
        attempt += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DyadicBox;

    #[test]
    fn i_max_rule() {
        assert_eq!(default_i_max(1), 0);
        assert_eq!(default_i_max(32), 4);
        assert_eq!(default_i_max(256), 7);
        assert_eq!(default_i_max(100), 5);
    }

    #[test]
    fn point_mass_gives_unit_cells() {
        let law = PerturbationLaw::zero(1);
        let t = cover_trial(&law, 16, 1, &CoverOptions::default()).unwrap();
        assert!(t.fields.cover.boxes().iter().all(|b| b.scale() == 0));
        let report = verify_cover_properties(&t.realization, &t.fields).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn gaussian_cover_passes_and_scales_are_monotone() {
        let law = PerturbationLaw::gaussian(1.0, 2).unwrap();
        for seed in 0..3 {
            let t = cover_trial(&law, 16, seed, &CoverOptions::default()).unwrap();
            let report = verify_cover_properties(&t.realization, &t.fields).unwrap();
            assert!(report.passed(), "{report:?}");
            let f = &t.fields;
            for v in f.i.cube.sites() {
                let v = &v[..2];
                assert!(f.i0.get(v).unwrap() <= f.i1.get(v).unwrap());
                assert!(f.i1.get(v).unwrap() <= f.i.get(v).unwrap());
            }
        }
    }

    #[test]
    fn diameter_violation_is_flagged() {
        // unit cells everywhere except one scale-2 box at 0..3: its neighbors -1 and 4 are scale 0
        let law = PerturbationLaw::zero(1);
        let real = WindowRealization::identity(&law, 8, 2).unwrap();
        let region = Cube::centered(1, 9);
        let mut boxes = vec![DyadicBox::new(2, &[0]).unwrap()];
        boxes.extend((-9..=9).filter(|v| !(0..=3).contains(v)).map(|v| DyadicBox::new(0, &[v]).unwrap()));
        let report = verify_cover(&real, &Cover::from_boxes(region, boxes), real.core()).unwrap();
        assert!(report.partition && report.crossing_bound);
        assert!(!report.diameter_ratio);
        assert_eq!(report.violations.len(), 2);
    }
}
