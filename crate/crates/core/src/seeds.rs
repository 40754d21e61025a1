//! Deterministic seed derivation.
//!
//! Every derived seed is a SplitMix64 chain over the base seed and a list of
//! integer coordinates: `s = mix(s ^ coord)` applied in order. The scheme is
//! fixed so that sweeps stay reproducible across releases.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `coords` into `base` with SplitMix64.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(base), |s, &c| mix(s ^ c))
}

/// Domain tags keep graph seeds and run seeds from colliding.
pub const GRAPH_DOMAIN: u64 = 0x6772_6170_6800_0000;
pub const RUN_DOMAIN: u64 = 0x7275_6e00_0000_0000;
