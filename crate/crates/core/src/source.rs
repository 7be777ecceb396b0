//! Seeded i.i.d. source blocks and traitor side information.

use std::hash::Hasher;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use siphasher::sip::SipHasher13;

use crate::error::{Error, Result};
use crate::prob::{ConditionalPmf, JointPmf};

/// Independent RNG stream for `(seed, label, index)`.
pub fn derive_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut h = SipHasher13::new_with_keys(seed, 0x6279_7a73_775f_7267);
    h.write(label.as_bytes());
    h.write_u8(0xff);
    h.write_u64(index);
    let a = h.finish();
    h.write_u8(1);
    let b = h.finish();
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..24].copy_from_slice(&seed.to_le_bytes());
    key[24..].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Inverse-CDF draw over a probability vector in index order.
pub fn draw_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = k;
            acc += p;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}

/// `m × n` symbol table; row `i` is sensor `i`'s sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBlock {
    pub n: usize,
    pub symbols: Vec<Vec<u8>>,
}

impl SourceBlock {
    pub fn new(symbols: Vec<Vec<u8>>, sizes: &[usize]) -> Result<Self> {
        if symbols.len() != sizes.len() {
            return Err(Error::AlphabetMismatch("row count differs from m".into()));
        }
        let n = symbols.first().map_or(0, Vec::len);
        if n == 0 || symbols.iter().any(|r| r.len() != n) {
            return Err(Error::Precondition("rows must share a positive length".into()));
        }
        for (row, &k) in symbols.iter().zip(sizes) {
            if row.iter().any(|&x| x as usize >= k) {
                return Err(Error::AlphabetMismatch(format!("symbol outside alphabet of size {k}")));
            }
        }
        Ok(SourceBlock { n, symbols })
    }

    pub fn m(&self) -> usize {
        self.symbols.len()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.symbols[i]
    }

    pub fn rows(&self) -> Vec<&[u8]> {
        self.symbols.iter().map(Vec::as_slice).collect()
    }

    /// Joint cell index of slot `t` under `sizes`.
    pub fn cell_at(&self, t: usize, sizes: &[usize]) -> usize {
        self.symbols.iter().zip(sizes).fold(0, |acc, (row, &k)| acc * k + row[t] as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideInfoBlock {
    pub w_symbols: Vec<u32>,
}

/// `n` i.i.d. draws from `p`.
pub fn sample_block(p: &JointPmf, n: usize, seed: u64) -> Result<SourceBlock> {
    sample_block_with(p, n, &mut derive_rng(seed, "source", 0))
}

pub fn sample_block_with<R: Rng>(p: &JointPmf, n: usize, rng: &mut R) -> Result<SourceBlock> {
    if n == 0 {
        return Err(Error::Precondition("block length must be positive".into()));
    }
    let mut symbols = vec![vec![0u8; n]; p.m()];
    for t in 0..n {
        let cell = draw_index(rng, p.mass());
        for (i, x) in p.symbols_of(cell).into_iter().enumerate() {
            symbols[i][t] = x as u8;
        }
    }
    Ok(SourceBlock { n, symbols })
}

/// Per-slot draw of `W` from `r(·|x_t)`.
pub fn sample_side_info(r: &ConditionalPmf, block: &SourceBlock, seed: u64) -> Result<SideInfoBlock> {
    sample_side_info_with(r, block, &mut derive_rng(seed, "side-info", 0))
}

pub fn sample_side_info_with<R: Rng>(
    r: &ConditionalPmf,
    block: &SourceBlock,
    rng: &mut R,
) -> Result<SideInfoBlock> {
    if r.input_sizes().len() != block.m() {
        return Err(Error::AlphabetMismatch("channel arity differs from block".into()));
    }
    let sizes = r.input_sizes();
    let w_symbols = (0..block.n)
        .map(|t| draw_index(rng, r.row(block.cell_at(t, sizes))) as u32)
        .collect();
    Ok(SideInfoBlock { w_symbols })
}
