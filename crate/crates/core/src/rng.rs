//! Deterministic RNG streams keyed by (master seed, lattice site) or
//! (master seed, trial index).

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SiteRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fold(h: u64, word: u64) -> u64 {
    mix(h.wrapping_add(GOLDEN) ^ mix(word.wrapping_add(GOLDEN)))
}

/// Seed of the stream that perturbs lattice site `site`.
pub fn site_seed(master: u64, site: &[i64]) -> u64 {
    site.iter()
        .fold(fold(mix(master), site.len() as u64), |h, &c| fold(h, c as u64))
}

/// Seed of independent trial `trial` in an experiment seeded with `master`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    fold(fold(mix(master), 0x7472_6961_6c00_0000), trial)
}

/// Seed for a named auxiliary stream (bootstrap, far field, ...).
pub fn stream_seed(master: u64, tag: &str) -> u64 {
    tag.bytes().fold(fold(mix(master), 0x7374_7265_616d_0000), |h, b| fold(h, b as u64))
}

pub fn site_rng(master: u64, site: &[i64]) -> SiteRng {
    SiteRng::seed_from_u64(site_seed(master, site))
}

pub fn rng_from(seed: u64) -> SiteRng {
    SiteRng::seed_from_u64(seed)
}
