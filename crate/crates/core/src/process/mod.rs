//! Perturbation laws and finite perturbed-lattice realizations.

mod law;
mod radial;
mod realization;

pub use law::{LawKind, LawSpec, PerturbationLaw};
#[allow(unused_imports)]
pub(crate) use law::{pareto_gap, pareto_radius};
pub use realization::{sample_realization, WindowRealization};
