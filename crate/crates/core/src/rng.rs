//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `u64` seed. Work that may run in
//! parallel draws from its own ChaCha8 stream, selected by mixing a list of
//! labels (repeat index, depth, batch, ...) into the 64-bit stream id, so the
//! result never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for the root stream of `seed`.
pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream of `seed` identified by `labels`.
pub fn substream(seed: u64, labels: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut id = 0x243f_6a88_85a3_08d3_u64;
    for &label in labels {
        id = splitmix64(id ^ splitmix64(label));
    }
    rng.set_stream(id);
    rng
}

/// Derive a child seed, for APIs that take a plain seed rather than a generator.
pub fn child_seed(seed: u64, labels: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &label in labels {
        h = splitmix64(h ^ splitmix64(label.wrapping_add(0x9e37_79b9)));
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Multinomial draw of `trials` over `probs` by sequential conditional binomials.
///
/// `probs` need not be exactly normalized; the last category absorbs the remainder.
pub(crate) fn multinomial(probs: &[f64], trials: u64, rng: &mut Rng) -> Vec<u64> {
    use rand_distr::{Binomial, Distribution};
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = trials;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining;
            break;
        }
        let p = p.max(0.0);
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    counts
}
