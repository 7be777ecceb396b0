//! Seeded hash binning.
//!
//! A bin map is a keyed 128-bit SipHash of `(domain, sensor, c, block, x)`
//! reduced modulo the bin count. Sequences are hashed as one byte per
//! symbol in time order.

use std::hash::Hasher;

use serde::{Deserialize, Serialize};
use siphasher::sip128::{Hasher128, SipHasher13};

use crate::error::{Error, Result};

/// Largest per-block exponent `n * rate` accepted, in bits.
pub const MAX_BLOCK_BITS: f64 = 62.0;

/// `⌈2^bits⌉` with exact powers of two kept exact.
pub fn bin_count_for_bits(bits: f64) -> Result<u64> {
    if !(bits >= 0.0) {
        return Err(Error::Precondition(format!("negative bin exponent {bits}")));
    }
    if bits > MAX_BLOCK_BITS {
        return Err(Error::Guard { what: "bin exponent", bits, limit: MAX_BLOCK_BITS as u32 });
    }
    Ok(bits.exp2().ceil().max(1.0) as u64)
}

fn keyed_index(seed: u64, domain: &[u8], sensor: usize, c: usize, block: usize, x: &[u8], count: u64) -> u64 {
    let mut h = SipHasher13::new_with_keys(seed, 0x9e37_79b9_7f4a_7c15);
    h.write(domain);
    h.write(&(sensor as u32).to_le_bytes());
    h.write(&(c as u32).to_le_bytes());
    h.write(&(block as u32).to_le_bytes());
    h.write(&(x.len() as u32).to_le_bytes());
    h.write(x);
    (h.finish128().as_u128() % count as u128) as u64
}

/// Composite bin of one sequence: block indices `f_{i,c,1}, .., f_{i,c,j}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinIndexChain {
    pub c: usize,
    pub indices: Vec<u64>,
}

/// The `C × J` family of incremental bin maps for one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningCodebook {
    sensor_id: usize,
    n: usize,
    alphabet: usize,
    eps: f64,
    nu: f64,
    c_count: usize,
    j_count: usize,
    master_seed: u64,
    counts: Vec<u64>,
}

impl BinningCodebook {
    pub fn new(sensor_id: usize, n: usize, alphabet: usize, eps: f64, nu: f64, c_count: usize, master_seed: u64) -> Result<Self> {
        if n == 0 || alphabet == 0 || c_count == 0 {
            return Err(Error::Precondition("codebook needs n, alphabet and C positive".into()));
        }
        if !(eps > 0.0) || !(nu >= 0.0) {
            return Err(Error::Precondition("codebook needs eps > 0 and nu >= 0".into()));
        }
        let j_count = ((alphabet as f64).log2() / eps).ceil().max(1.0) as usize;
        let first = bin_count_for_bits(n as f64 * (eps + nu))?;
        let later = bin_count_for_bits(n as f64 * eps)?;
        let counts = (0..j_count).map(|j| if j == 0 { first } else { later }).collect();
        Ok(BinningCodebook { sensor_id, n, alphabet, eps, nu, c_count, j_count, master_seed, counts })
    }

    pub fn sensor_id(&self) -> usize {
        self.sensor_id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Number of subcodebooks `C`.
    pub fn subcodebooks(&self) -> usize {
        self.c_count
    }

    /// Number of blocks `J`.
    pub fn blocks(&self) -> usize {
        self.j_count
    }

    /// Bin count of block `block` (0-based).
    pub fn bin_count(&self, block: usize) -> u64 {
        self.counts[block]
    }

    /// Effective bits carried by block `block`.
    pub fn block_bits(&self, block: usize) -> f64 {
        (self.counts[block] as f64).log2()
    }

    /// Effective bits of the first `j` blocks together.
    pub fn chain_bits(&self, j: usize) -> f64 {
        (0..j).map(|b| self.block_bits(b)).sum()
    }

    fn check(&self, x: &[u8], c: usize, block: usize) -> Result<()> {
        if c >= self.c_count {
            return Err(Error::Precondition(format!("subcodebook {c} out of range (C={})", self.c_count)));
        }
        if block >= self.j_count {
            return Err(Error::Precondition(format!("block {block} out of range (J={})", self.j_count)));
        }
        if x.len() != self.n {
            return Err(Error::Precondition(format!("sequence length {} differs from n={}", x.len(), self.n)));
        }
        Ok(())
    }

    /// `f_{i,c,block}(x)`; `c` and `block` are 0-based.
    pub fn encode_block(&self, x: &[u8], c: usize, block: usize) -> Result<u64> {
        self.check(x, c, block)?;
        Ok(self.raw(x, c, block))
    }

    fn raw(&self, x: &[u8], c: usize, block: usize) -> u64 {
        keyed_index(self.master_seed, b"vr", self.sensor_id, c, block, x, self.counts[block])
    }

    /// Composite index of the first `j` blocks (`1 ≤ j ≤ J`).
    pub fn composite_encode(&self, x: &[u8], c: usize, j: usize) -> Result<BinIndexChain> {
        if j == 0 || j > self.j_count {
            return Err(Error::Precondition(format!("chain length {j} outside 1..={}", self.j_count)));
        }
        self.check(x, c, 0)?;
        Ok(BinIndexChain { c, indices: (0..j).map(|b| self.raw(x, c, b)).collect() })
    }

    /// Whether `x` lies in the composite bin `chain`.
    pub fn matches(&self, x: &[u8], chain: &BinIndexChain) -> bool {
        chain.c < self.c_count
            && x.len() == self.n
            && chain.indices.len() <= self.j_count
            && chain.indices.iter().enumerate().all(|(b, &idx)| self.raw(x, chain.c, b) == idx)
    }

    /// Candidates lying in `chain`, lexicographically sorted.
    pub fn search_bin(&self, chain: &BinIndexChain, candidates: &[Vec<u8>]) -> Vec<Vec<u8>> {
        let mut out: Vec<Vec<u8>> = candidates.iter().filter(|x| self.matches(x, chain)).cloned().collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Bin count of a fixed-rate encoder at `rate` bits/symbol.
pub fn fixed_rate_bin_count(n: usize, rate: f64) -> Result<u64> {
    if !(rate >= 0.0) {
        return Err(Error::Precondition("rate must be nonnegative".into()));
    }
    bin_count_for_bits(n as f64 * rate)
}

/// Fixed-rate bin of `x`. `c` selects one of the identically built
/// subcodebooks; `None` is the deterministic code and equals `Some(0)`.
/// When the bin count reaches `|X|^n` the index is the sequence's own
/// lexicographic rank, so such codes are lossless.
pub fn fixed_rate_encode(
    seed: u64,
    sensor_id: usize,
    x: &[u8],
    alphabet: usize,
    rate: f64,
    c: Option<usize>,
) -> Result<u64> {
    let count = fixed_rate_bin_count(x.len(), rate)?;
    Ok(fixed_rate_index(seed, sensor_id, x, alphabet, count, c.unwrap_or(0)))
}

pub(crate) fn fixed_rate_index(seed: u64, sensor_id: usize, x: &[u8], alphabet: usize, count: u64, c: usize) -> u64 {
    match sequence_space(alphabet, x.len()) {
        Some(space) if count >= space => rank(x, alphabet),
        _ => keyed_index(seed, b"fr", sensor_id, c, 0, x, count),
    }
}

/// `|X|^n`, if it fits in a u64.
pub fn sequence_space(alphabet: usize, n: usize) -> Option<u64> {
    (alphabet as u64).checked_pow(n as u32)
}

/// Lexicographic rank of `x` among sequences of its length.
pub fn rank(x: &[u8], alphabet: usize) -> u64 {
    x.iter().fold(0u64, |acc, &s| acc * alphabet as u64 + s as u64)
}

/// All sequences of length `n` over `0..alphabet`, lexicographic order.
pub fn enumerate_sequences(alphabet: usize, n: usize, guard_bits: f64) -> Result<Vec<Vec<u8>>> {
    let bits = n as f64 * (alphabet as f64).log2();
    if bits > guard_bits {
        return Err(Error::Guard { what: "sequence enumeration", bits, limit: guard_bits as u32 });
    }
    let total = alphabet.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0u8; n];
    for _ in 0..total {
        out.push(cur.clone());
        for pos in (0..n).rev() {
            if (cur[pos] as usize) + 1 < alphabet {
                cur[pos] += 1;
                break;
            }
            cur[pos] = 0;
        }
    }
    Ok(out)
}
