//! Shared serialization primitives: the 9-significant-digit float format
//! used by every CSV artifact, and the FNV-1a hash used to fingerprint
//! wavelength grids.

/// Format a float with 9 significant digits (scientific notation).
pub fn sig9(x: f64) -> String {
    format!("{:.8e}", x)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte string.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_has_nine_significant_digits() {
        assert_eq!(sig9(0.1), "1.00000000e-1");
        assert_eq!(sig9(0.0), "0.00000000e0");
        assert_eq!(sig9(1234.56789), "1.23456789e3");
    }

    #[test]
    fn fnv1a64_known_vectors() {
        // Reference values from the FNV specification.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
