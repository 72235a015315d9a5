use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::law::PerturbationLaw;
use crate::error::{Error, Result};
use crate::geometry::{Cube, MAX_DIM};
use crate::rng::site_rng;

/// One labeled point `Π_v = v + ξ_v` per site of `[-L-M, L+M]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRealization {
    law: PerturbationLaw,
    core_half_width: i64,
    margin: i64,
    seed: u64,
    window: Cube,
    points: Vec<f64>,
}

/// Sample a realization; site `v` draws from its own stream keyed by
/// `(seed, v)`, so windows of different sizes agree on shared sites.
pub fn sample_realization(law: &PerturbationLaw, l: i64, m: i64, seed: u64) -> Result<WindowRealization> {
    check_window(l, m)?;
    let d = law.dim();
    let window = Cube::centered(d, l + m);
    let mut points = vec![0.0; window.len() * d];
    points.par_chunks_mut(d).enumerate().with_min_len(1024).for_each(|(i, out)| {
        let site = window.site(i);
        law.sample(&mut site_rng(seed, &site[..d]), out);
        for j in 0..d {
            out[j] += site[j] as f64;
        }
    });
    Ok(WindowRealization { law: law.clone(), core_half_width: l, margin: m, seed, window, points })
}

fn check_window(l: i64, m: i64) -> Result<()> {
    if l < 1 {
        return Err(Error::InvalidParameter(format!("core half-width must be >= 1, got {l}")));
    }
    if m < 0 {
        return Err(Error::InvalidParameter(format!("margin must be >= 0, got {m}")));
    }
    Ok(())
}

impl WindowRealization {
    /// Hand-built realization: `f(v)` gives the point of site `v`. The law
    /// is only consulted by margin audits.
    pub fn from_fn<F: FnMut(&[i64]) -> Vec<f64>>(law: &PerturbationLaw, l: i64, m: i64, mut f: F) -> Result<Self> {
        check_window(l, m)?;
        let d = law.dim();
        let window = Cube::centered(d, l + m);
        let mut points = Vec::with_capacity(window.len() * d);
        for site in window.sites() {
            let p = f(&site[..d]);
            if p.len() != d {
                return Err(Error::InvalidParameter("point has the wrong dimension".into()));
            }
            points.extend_from_slice(&p);
        }
        Ok(WindowRealization { law: law.clone(), core_half_width: l, margin: m, seed: 0, window, points })
    }

    /// Unperturbed lattice, `Π_v = v`.
    pub fn identity(law: &PerturbationLaw, l: i64, m: i64) -> Result<Self> {
        Self::from_fn(law, l, m, |v| v.iter().map(|&c| c as f64).collect())
    }

    /// Move the point of `site`.
    pub fn set_point(&mut self, site: &[i64], x: &[f64]) -> Result<()> {
        let d = self.dim();
        let i = self
            .window
            .index_of(site)
            .ok_or_else(|| Error::InvalidParameter(format!("site {site:?} outside the window")))?;
        self.points[i * d..(i + 1) * d].copy_from_slice(&x[..d]);
        Ok(())
    }

    pub fn law(&self) -> &PerturbationLaw {
        &self.law
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    pub fn core_half_width(&self) -> i64 {
        self.core_half_width
    }

    pub fn margin(&self) -> i64 {
        self.margin
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The extended window `[-L-M, L+M]^d`.
    pub fn window(&self) -> Cube {
        self.window
    }

    pub fn core(&self) -> Cube {
        Cube::centered(self.dim(), self.core_half_width)
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Flat coordinates, `d` per site in window order.
    pub fn coords(&self) -> &[f64] {
        &self.points
    }

    /// Point of the site with window index `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points[i * d..(i + 1) * d]
    }

    pub fn point_of(&self, site: &[i64]) -> Option<&[f64]> {
        self.window.index_of(site).map(|i| self.point(i))
    }

    pub fn site(&self, i: usize) -> [i64; MAX_DIM] {
        self.window.site(i)
    }

    /// ℓ∞ norm of the displacement of site `i`.
    pub fn displacement(&self, i: usize) -> f64 {
        let s = self.site(i);
        self.point(i).iter().zip(&s).map(|(x, &c)| (x - c as f64).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_gives_lattice() {
        let law = PerturbationLaw::zero(2);
        let w = sample_realization(&law, 4, 0, 99).unwrap();
        for i in 0..w.len() {
            let s = w.site(i);
            assert_eq!(w.point(i), &[s[0] as f64, s[1] as f64]);
        }
    }

    #[test]
    fn deterministic_and_window_consistent() {
        let law = PerturbationLaw::gaussian(1.0, 2).unwrap();
        let a = sample_realization(&law, 4, 2, 7).unwrap();
        let b = sample_realization(&law, 4, 2, 7).unwrap();
        assert_eq!(a, b);
        let big = sample_realization(&law, 9, 0, 7).unwrap();
        for i in 0..a.len() {
            let s = a.site(i);
            assert_eq!(Some(a.point(i)), big.point_of(&s[..2]));
        }
        let other = sample_realization(&law, 4, 2, 8).unwrap();
        assert_ne!(a.coords(), other.coords());
    }

    #[test]
    fn rejects_bad_window() {
        let law = PerturbationLaw::zero(1);
        assert!(sample_realization(&law, 0, 0, 1).is_err());
        assert!(sample_realization(&law, 1, -1, 1).is_err());
    }
}
