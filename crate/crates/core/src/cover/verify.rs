use std::collections::BTreeSet;

use serde::Serialize;

use super::crossing::CrossingIndex;
use super::fields::Cover;
use super::CoverFields;
use crate::error::Result;
use crate::geometry::{Cube, DyadicBox};
use crate::process::WindowRealization;

const MAX_LISTED: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Uncovered { site: Vec<i64> },
    Overlap { site: Vec<i64>, boxes: usize },
    CrossingBound { scale: u32, corner: Vec<i64>, crossings: usize, capacity: u64 },
    DiameterRatio { first: (u32, Vec<i64>), second: (u32, Vec<i64>) },
    CountMismatch { scale: u32, corner: Vec<i64>, bulk: u32, direct: usize },
}

/// Outcome of checking the regular-cover properties on the core window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    /// Every core site lies in exactly one box.
    pub partition: bool,
    /// `|𝒞(D)| ≤ |D ∩ ℤ^d|` for every box meeting the core.
    pub crossing_bound: bool,
    /// `diam D ≤ 2 diam D'` for intersecting boxes, one of them meeting the core.
    pub diameter_ratio: bool,
    /// Bulk crossing counts agree with direct enumeration.
    pub counts_consistent: bool,
    pub boxes_checked: usize,
    pub violations: Vec<Violation>,
}

impl CoverReport {
    pub fn passed(&self) -> bool {
        self.partition && self.crossing_bound && self.diameter_ratio && self.counts_consistent
    }

    fn push(&mut self, v: Violation) {
        if self.violations.len() < MAX_LISTED {
            self.violations.push(v);
        }
    }
}

fn describe(bx: &DyadicBox) -> (u32, Vec<i64>) {
    (bx.scale(), bx.corner().to_vec())
}

/// Check partition, crossing bound and diameter ratio of an arbitrary box
/// family over `core`.
pub fn verify_cover(real: &WindowRealization, cover: &Cover, core: Cube) -> Result<CoverReport> {
    let d = core.dim;
    let mut report = CoverReport {
        partition: true,
        crossing_bound: true,
        diameter_ratio: true,
        counts_consistent: true,
        boxes_checked: 0,
        violations: Vec::new(),
    };
    let mut meeting = BTreeSet::new();
    for v in core.sites() {
        let here = cover.boxes_at(&v[..d]);
        match here.len() {
            1 => {}
            0 => {
                report.partition = false;
                report.push(Violation::Uncovered { site: v[..d].to_vec() });
            }
            n => {
                report.partition = false;
                report.push(Violation::Overlap { site: v[..d].to_vec(), boxes: n });
            }
        }
        meeting.extend(here.iter().copied());
    }
    let index = CrossingIndex::new(real);
    let mut pairs = BTreeSet::new();
    for &b in &meeting {
        let bx = &cover.boxes()[b as usize];
        let crossings = index.crossing_set(bx)?.len();
        if crossings as u64 > bx.lattice_count() {
            report.crossing_bound = false;
            report.push(Violation::CrossingBound {
                scale: bx.scale(),
                corner: bx.corner().to_vec(),
                crossings,
                capacity: bx.lattice_count(),
            });
        }
        for t in cover.touching(bx) {
            let other = &cover.boxes()[t as usize];
            if bx.scale().abs_diff(other.scale()) > 1 && pairs.insert((b.min(t), b.max(t))) {
                report.diameter_ratio = false;
                report.push(Violation::DiameterRatio { first: describe(bx), second: describe(other) });
            }
        }
    }
    report.boxes_checked = meeting.len();
    Ok(report)
}

/// [`verify_cover`] on the core window plus a cross-check of the bulk
/// crossing counts used to build the fields.
pub fn verify_cover_properties(real: &WindowRealization, fields: &CoverFields) -> Result<CoverReport> {
    let mut report = verify_cover(real, &fields.cover, real.core())?;
    let index = CrossingIndex::new(real);
    let d = real.dim();
    let mut seen = BTreeSet::new();
    for v in real.core().sites() {
        if let Some(bx) = fields.cover.box_of(&v[..d]) {
            if !seen.insert(*bx) {
                continue;
            }
            if let Some(bulk) = fields.counts.get(bx) {
                let direct = index.crossing_set(bx)?.len();
                if bulk as usize != direct {
                    report.counts_consistent = false;
                    report.push(Violation::CountMismatch {
                        scale: bx.scale(),
                        corner: bx.corner().to_vec(),
                        bulk,
                        direct,
                    });
                }
            }
        }
    }
    Ok(report)
}
