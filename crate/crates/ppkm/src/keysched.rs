//! Per-round mask keys derived from a hash chain.
//!
//! Compute servers mask the cluster sums they send to the aggregator with a
//! round key pair `(x, y)`: coordinate sums are multiplied by `x`, counts by
//! `y`. The aggregator only ever sees the masked ratio, so it learns the
//! centroids up to the factor `x / y`, which the servers (who know the keys)
//! divide back out. Reusing one pair across rounds would let the aggregator
//! difference consecutive rounds, so every round gets a fresh pair.
//!
//! Fresh pairs come from a deterministic chain all key holders can advance
//! in lockstep without extra traffic: each round's broadcast itself is the
//! chain input. Byte layout, with `H` = SHA-256 and all integers big-endian:
//!
//! ```text
//! digest_1       = H("ppkm-round-keys-v1" || bits(x_1) || bits(y_1))
//! digest_rho     = H(digest_{rho-1} || payload_rho || rho as u64)
//! (x_rho, y_rho) = map(digest_rho[0..16]), map(digest_rho[16..32])
//! ```
//!
//! where `bits` is the IEEE-754 bit pattern as 8 bytes, `payload_rho` is the
//! serialized broadcast that opened round `rho`, and `map` treats 16 bytes
//! as an integer `u` and returns `1 + (u + 1/2) / 2^128 * (2^ell1 - 1)`, a
//! key strictly inside `(1, 2^ell1)`. If the two halves ever mapped to the
//! same key, the digest is rehashed with a fixed suffix until they differ.

use sha2::{Digest, Sha256};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const CHAIN_TAG: &[u8] = b"ppkm-round-keys-v1";
const COLLISION_TAG: &[u8] = b"ppkm-key-collision";

/// The mask pair for one round. `x` multiplies coordinate sums, `y` counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundKeys {
    pub round: u64,
    pub x: f64,
    pub y: f64,
}

impl RoundKeys {
    /// The factor the aggregator's output is off by; multiply a masked
    /// centroid by `y / x` to unmask it.
    pub fn unmask_factor(&self) -> f64 {
        self.y / self.x
    }
}

/// Draws the round-1 key pair uniformly from `(1, 2^ell1)`, distinct.
pub fn initial_keys(ell1: u32, seed: u64) -> Result<RoundKeys> {
    if ell1 == 0 || ell1 > 1000 {
        return Err(Error::InvalidParameter(format!("ell1 must be in [1, 1000], got {ell1}")));
    }
    let hi = (ell1 as f64).exp2();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = rng.gen_range(1.0..hi);
    let mut y = rng.gen_range(1.0..hi);
    while y == x {
        y = rng.gen_range(1.0..hi);
    }
    Ok(RoundKeys { round: 1, x, y })
}

/// One party's view of the key chain. Owner and compute servers each hold
/// one and advance them in lockstep; the aggregator never holds one.
#[derive(Clone, Debug)]
pub struct KeyChain {
    digest: [u8; 32],
    current: RoundKeys,
    ell1: u32,
}

impl KeyChain {
    pub fn new(initial: RoundKeys, ell1: u32) -> Self {
        let mut h = Sha256::new();
        h.update(CHAIN_TAG);
        h.update(initial.x.to_bits().to_be_bytes());
        h.update(initial.y.to_bits().to_be_bytes());
        KeyChain { digest: h.finalize().into(), current: initial, ell1 }
    }

    pub fn current(&self) -> RoundKeys {
        self.current
    }

    /// Folds the round's broadcast into the chain and returns the next
    /// round's keys.
    pub fn advance(&mut self, payload: &[u8]) -> RoundKeys {
        let round = self.current.round + 1;
        let mut h = Sha256::new();
        h.update(self.digest);
        h.update(payload);
        h.update(round.to_be_bytes());
        self.digest = h.finalize().into();
        loop {
            let x = map_to_key(&self.digest[0..16], self.ell1);
            let y = map_to_key(&self.digest[16..32], self.ell1);
            if x != y {
                self.current = RoundKeys { round, x, y };
                return self.current;
            }
            let mut h = Sha256::new();
            h.update(self.digest);
            h.update(COLLISION_TAG);
            self.digest = h.finalize().into();
        }
    }
}

fn map_to_key(bytes: &[u8], ell1: u32) -> f64 {
    let mut raw = [0u8; 16];
    raw.copy_from_slice(bytes);
    let u = u128::from_be_bytes(raw);
    let unit = (u as f64 + 0.5) / 128f64.exp2();
    1.0 + unit * ((ell1 as f64).exp2() - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_keys_are_deterministic_distinct_and_in_range() {
        let a = initial_keys(34, 9).unwrap();
        let b = initial_keys(34, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.round, 1);
        assert!(a.x != a.y);
        let hi = 34f64.exp2();
        assert!(a.x >= 1.0 && a.x < hi);
        assert!(a.y >= 1.0 && a.y < hi);
        let c = initial_keys(34, 10).unwrap();
        assert!(a.x != c.x);
    }

    #[test]
    fn initial_keys_rejects_zero_length() {
        assert!(initial_keys(0, 1).is_err());
    }

    #[test]
    fn chains_advance_in_lockstep() {
        let init = initial_keys(34, 5).unwrap();
        let mut a = KeyChain::new(init, 34);
        let mut b = KeyChain::new(init, 34);
        for round in 0u8..10 {
            let payload = [round; 7];
            assert_eq!(a.advance(&payload), b.advance(&payload));
        }
    }

    #[test]
    fn payload_changes_the_next_keys() {
        let init = initial_keys(34, 5).unwrap();
        let mut a = KeyChain::new(init, 34);
        let mut b = KeyChain::new(init, 34);
        let ka = a.advance(b"one broadcast");
        let kb = b.advance(b"another broadcast");
        assert_eq!(ka.round, kb.round);
        assert!(ka.x != kb.x);
    }

    #[test]
    fn keys_stay_in_range_and_distinct_over_many_rounds() {
        let init = initial_keys(20, 77).unwrap();
        let mut chain = KeyChain::new(init, 20);
        let hi = 20f64.exp2();
        let mut prev = init;
        for i in 0u64..1000 {
            let keys = chain.advance(&i.to_be_bytes());
            assert_eq!(keys.round, i + 2);
            assert!(keys.x > 1.0 && keys.x < hi);
            assert!(keys.y > 1.0 && keys.y < hi);
            assert!(keys.x != keys.y, "mask pair collided at round {}", keys.round);
            assert!(keys.x != prev.x, "key reused across rounds");
            prev = keys;
        }
    }

    #[test]
    fn unmask_factor_inverts_the_mask() {
        let keys = RoundKeys { round: 3, x: 8.0, y: 2.0 };
        let centroid = 5.25;
        let masked = centroid * keys.x / keys.y;
        assert!((masked * keys.unmask_factor() - centroid).abs() < 1e-12);
    }
}
