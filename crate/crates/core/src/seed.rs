//! Seed derivation. Every random stream in a run is derived from one root seed.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent and a list of discriminators.
pub fn derive(parent: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(parent), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Stable 64-bit FNV-1a hash of a label, for use as a derivation part.
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

pub mod streams {
    pub const WORKLOAD: u64 = 1;
    pub const ARRIVALS: u64 = 2;
    pub const NETWORK: u64 = 3;
    pub const PROTOCOL: u64 = 4;
    pub const PLACEMENT: u64 = 5;
    pub const ORIGINS: u64 = 6;
    pub const MIX: u64 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen: changing these values changes every published point seed.
        assert_eq!(label("access_patterns"), label("access_patterns"));
        assert_ne!(derive(1, &[2, 3]), derive(1, &[3, 2]));
        assert_eq!(mix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
