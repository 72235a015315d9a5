//! Hole probabilities, assumption validators, the cover-radius tail and
//! curve export and fitting.

mod assumptions;
mod curve;
mod hole;
mod radius;

pub use assumptions::{
    assumption_int_check, assumption_reg_check, default_r_grid, IntReport, RatioPoint, RegReport, RegScale, Verdict,
    GROWTH_SLACK,
};
pub use curve::{fit_loglog, ols, CurvePoint, Estimator, Fit, TailCurve, Transform, CSV_HEADER};
pub use hole::{
    hole_bounds_check, hole_probability_at_cutoff, hole_probability_exact, hole_probability_mc, HoleBoundsReport,
    HoleEstimate, HoleExact, RhoPoint, DEFAULT_TOLERANCE, MC_SITE_CAP, MC_SITE_TAIL, RHO_RATIO_LIMIT,
};
pub use radius::{radius_tail_vs_hole, RadiusPoint, RadiusTailReport};
