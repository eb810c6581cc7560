//! Arbitrary-precision counts.
//!
//! Every rate in this crate lands in the naturals but overflows u64 even at
//! the smallest inputs, so all rate codomains are exact big integers.

use num_bigint::BigUint;

pub type BigCount = BigUint;

/// Shorthand constructor.
pub fn bc(n: u64) -> BigCount {
    BigUint::from(n)
}

/// k + 1 without u64 overflow concerns.
pub fn succ(k: u64) -> BigCount {
    bc(k) + 1u32
}
