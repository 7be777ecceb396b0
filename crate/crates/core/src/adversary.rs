//! Traitor strategies.
//!
//! Traitors see their own sources, the side information `W^n`, the codebooks
//! and (in the interactive protocol) the polling history. They never see the
//! honest sensors' private randomness or messages; [`TraitorContext`] is the
//! whole of what a strategy can read.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::binning::BinningCodebook;
use crate::error::{Error, Result};
use crate::prob::{strides, ConditionalPmf, SubsetView};
use crate::scenario::Scenario;
use crate::source::{derive_rng, draw_index, SideInfoBlock};

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    HonestPassthrough,
    BlackHole,
    /// `q̄(x_T | w)`: input is the `W` alphabet, output the joint traitor alphabet.
    FakeDistribution(ConditionalPmf),
    /// Confuse the decoder of `target` (chosen automatically when `None`).
    FixedRateAmbiguity { target: Option<SubsetView> },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::HonestPassthrough => "honest",
            Strategy::BlackHole => "black_hole",
            Strategy::FakeDistribution(_) => "fake_distribution",
            Strategy::FixedRateAmbiguity { .. } => "fixed_rate_ambiguity",
        }
    }

    pub(crate) fn validate(&self, s: &Scenario) -> Result<()> {
        if let Strategy::FakeDistribution(qbar) = self {
            let t = s.traitors();
            let out: usize = t.indices().iter().map(|&i| s.p.sizes()[i]).product();
            let w = s.true_channel().output_size();
            if qbar.input_sizes() != [w] || qbar.output_size() != out.max(1) {
                return Err(Error::Scenario(format!(
                    "q̄ must map {w} side-information symbols to {out} traitor symbols"
                )));
            }
        }
        if let Strategy::FixedRateAmbiguity { target: Some(t) } = self {
            if s.h.position(t).is_none() {
                return Err(Error::Scenario(format!("ambiguity target {t} is not a candidate")));
            }
        }
        Ok(())
    }
}

/// One polling request seen by the traitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Poll {
    pub sensor: usize,
    pub block: usize,
}

/// Everything a strategy may read.
pub struct TraitorContext<'a> {
    pub traitors: &'a SubsetView,
    pub alphabet_sizes: &'a [usize],
    /// True blocks of the traitor sensors, in the order of `traitors`.
    pub own_blocks: Vec<&'a [u8]>,
    pub side_info: &'a SideInfoBlock,
    pub seed: u64,
    pub round: usize,
    pub history: &'a [Poll],
}

/// Draws `x_T,t ~ q̄(·|w_t)` independently per slot; rows follow `traitors`.
pub fn fabricate_block(ctx: &TraitorContext<'_>, qbar: &ConditionalPmf, seed: u64) -> Result<Vec<Vec<u8>>> {
    let sizes: Vec<usize> = ctx.traitors.indices().iter().map(|&i| ctx.alphabet_sizes[i]).collect();
    let out: usize = sizes.iter().product();
    if qbar.output_size() != out.max(1) {
        return Err(Error::AlphabetMismatch("q̄ output alphabet differs from the traitors'".into()));
    }
    let st = strides(&sizes);
    let mut rng = derive_rng(seed, "fabricate", ctx.round as u64);
    let n = ctx.side_info.w_symbols.len();
    let mut rows = vec![vec![0u8; n]; sizes.len()];
    for (t, &w) in ctx.side_info.w_symbols.iter().enumerate() {
        let w = w as usize;
        if w >= qbar.input_cells() {
            return Err(Error::AlphabetMismatch(format!("side information symbol {w} outside q̄ inputs")));
        }
        let cell = draw_index(&mut rng, qbar.row(w));
        for (k, row) in rows.iter_mut().enumerate() {
            row[t] = (cell / st[k] % sizes[k]) as u8;
        }
    }
    Ok(rows)
}

/// What a traitor sensor will do for the rest of a round.
#[derive(Debug, Clone)]
pub enum RoundPlan {
    /// Behave honestly with respect to these blocks (true or fabricated).
    Blocks(Vec<Vec<u8>>),
    Garbage,
}

/// Per-round traitor state for the interactive protocol.
pub struct VrTraitors {
    traitors: SubsetView,
    plan: RoundPlan,
    rng: ChaCha8Rng,
}

impl VrTraitors {
    pub fn plan(strategy: &Strategy, ctx: &TraitorContext<'_>) -> Result<Self> {
        let plan = match strategy {
            Strategy::HonestPassthrough => RoundPlan::Blocks(ctx.own_blocks.iter().map(|b| b.to_vec()).collect()),
            Strategy::BlackHole => RoundPlan::Garbage,
            Strategy::FakeDistribution(qbar) => RoundPlan::Blocks(fabricate_block(ctx, qbar, ctx.seed)?),
            Strategy::FixedRateAmbiguity { .. } => {
                return Err(Error::Scenario("the ambiguity attack only applies to fixed-rate codes".into()))
            }
        };
        Ok(VrTraitors { traitors: ctx.traitors.clone(), plan, rng: derive_rng(ctx.seed, "traitor", ctx.round as u64) })
    }

    /// Subcodebook announced when a phase for `sensor` opens.
    pub fn choose_c(&mut self, book: &BinningCodebook) -> usize {
        self.rng.gen_range(0..book.subcodebooks())
    }

    /// The sequence the traitor pretends to hold, if any.
    pub fn claimed(&self, sensor: usize) -> Option<&[u8]> {
        let k = self.traitors.indices().iter().position(|&i| i == sensor)?;
        match &self.plan {
            RoundPlan::Blocks(rows) => Some(&rows[k]),
            RoundPlan::Garbage => None,
        }
    }

    /// Reply to a poll for block `block` under subcodebook `c`.
    pub fn respond(&mut self, book: &BinningCodebook, c: usize, block: usize) -> Result<u64> {
        match self.claimed(book.sensor_id()) {
            Some(x) => book.encode_block(x, c, block),
            None => Ok(self.rng.gen_range(0..book.bin_count(block))),
        }
    }
}
