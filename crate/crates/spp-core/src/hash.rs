//! Stable 64-bit FNV-1a, used for path and formula digests. Not a hasher
//! trait impl: digests land in files and logs, so they must not depend on
//! the standard library's hash seeding.

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub(crate) fn digest_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}
