//! The interactive variable-rate protocol.
//!
//! A session is `N` rounds. In each round the decoder opens one phase per
//! sensor of `U(V)` in ascending order. The polled sensor announces a
//! subcodebook `c` with the first block; the decoder asks for further blocks
//! until the candidates of low enough empirical conditional entropy meet the
//! received composite bin. After the last phase the candidate honest sets
//! inconsistent with the decoded type are dropped.

use std::sync::Once;

use log::{debug, warn};
use rand::Rng;
use serde::Serialize;

use crate::adversary::{Poll, TraitorContext, VrTraitors};
use crate::binning::{enumerate_sequences, BinningCodebook};
use crate::error::{Error, Result};
use crate::prob::{cell_count, JointPmf, SubsetView};
use crate::region::{ball_feasible, HonestCollection, InfoModel};
use crate::scenario::Scenario;
use crate::source::{derive_rng, sample_block_with, sample_side_info_with};

/// Largest `C` used before a warning is logged and the value capped.
pub const C_CAP: usize = 1 << 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub rounds: usize,
    pub eps: f64,
    pub nu: f64,
    pub eta: f64,
    /// Subcodebook count; `None` derives it from `alpha`.
    pub c: Option<usize>,
    pub alpha: f64,
    /// Limit on `n log2 |X_i|` for the exhaustive candidate search.
    pub search_guard_bits: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        let eps = 0.35;
        ProtocolParams { n: 12, rounds: 50, eps, nu: 5.5 * eps, eta: 2.0 * eps, c: None, alpha: 0.05, search_guard_bits: 22.0 }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.rounds == 0 {
            return Err(Error::Precondition("n and N must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Precondition("eps must be positive".into()));
        }
        if !(self.nu > self.eps) {
            return Err(Error::Precondition(format!("nu ({}) must exceed eps ({})", self.nu, self.eps)));
        }
        if !(self.eta >= self.eps) {
            return Err(Error::Precondition(format!("eta ({}) must be at least eps ({})", self.eta, self.eps)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Precondition("alpha must lie in (0, 1)".into()));
        }
        if self.c == Some(0) {
            return Err(Error::Precondition("C must be positive".into()));
        }
        Ok(())
    }

    /// `B = ⌊log2|X_M| / (ν - ε)⌋ + 1`.
    pub fn b_constant(&self, sizes: &[usize]) -> usize {
        let bits: f64 = sizes.iter().map(|&k| (k as f64).log2()).sum();
        (bits / (self.nu - self.eps)).floor() as usize + 1
    }

    /// `C`, either explicit or `max(8, ⌈3NmB/α⌉)` capped at [`C_CAP`].
    pub fn resolved_c(&self, sizes: &[usize]) -> usize {
        if let Some(c) = self.c {
            return c;
        }
        let want = (3.0 * self.rounds as f64 * sizes.len() as f64 * self.b_constant(sizes) as f64 / self.alpha).ceil();
        let want = want.max(8.0) as usize;
        if want > C_CAP {
            static ONCE: Once = Once::new();
            ONCE.call_once(|| warn!("subcodebook count {want} capped at {C_CAP}"));
            C_CAP
        } else {
            want
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptRecord {
    pub round: usize,
    pub phase: usize,
    pub sensor: usize,
    pub c: usize,
    pub j: usize,
    pub bin_index: u64,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub honest_error: bool,
    /// Bin bits of the round (excludes the subcodebook announcements).
    pub bits: f64,
    pub c_bits: f64,
    /// Transactions per sensor; zero for sensors not polled.
    pub transactions: Vec<usize>,
    pub null_sensors: Vec<usize>,
    /// Candidate positions in `V` after the update.
    pub v_after: Vec<usize>,
    pub v_failure: bool,
}

impl RoundRecord {
    pub fn rate(&self, n: usize) -> f64 {
        self.bits / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    pub n: usize,
    pub rounds: Vec<RoundRecord>,
    /// Average bin bits per source symbol.
    pub sum_rate: f64,
    /// Average subcodebook-announcement bits per source symbol.
    pub overhead_rate: f64,
    /// `log2(C J_max)` over the smallest forward transaction, in bits.
    pub feedback_ratio: f64,
    pub transcript: Vec<TranscriptRecord>,
}

impl SessionReport {
    pub fn honest_errors(&self) -> usize {
        self.rounds.iter().filter(|r| r.honest_error).count()
    }

    pub fn any_honest_error(&self) -> bool {
        self.rounds.iter().any(|r| r.honest_error)
    }

    pub fn final_v(&self) -> &[usize] {
        &self.rounds.last().expect("sessions have at least one round").v_after
    }

    /// Rounds whose rate exceeds `bound + m(2ε + ν)`.
    pub fn over_budget_rounds(&self, bound: f64, m: usize, eps: f64, nu: f64) -> usize {
        let limit = bound + m as f64 * (2.0 * eps + nu);
        self.rounds.iter().filter(|r| r.rate(self.n) > limit + 1e-12).count()
    }
}

/// Empirical conditional entropies `H_t(X_i | X_prior)` for every candidate.
struct EntropyTable {
    nlogn: Vec<f64>,
}

impl EntropyTable {
    fn new(n: usize) -> Self {
        EntropyTable { nlogn: (0..=n).map(|c| if c == 0 { 0.0 } else { c as f64 * (c as f64).log2() }).collect() }
    }

    fn conditional(&self, prior: &[usize], prior_cells: usize, x: &[u8], alphabet: usize, scratch: &mut Vec<usize>) -> f64 {
        let n = x.len();
        scratch.clear();
        scratch.resize(prior_cells * alphabet, 0);
        for t in 0..n {
            scratch[prior[t] * alphabet + x[t] as usize] += 1;
        }
        let mut joint = 0.0;
        let mut marg = 0.0;
        for z in 0..prior_cells {
            let row = &scratch[z * alphabet..(z + 1) * alphabet];
            let total: usize = row.iter().sum();
            marg += self.nlogn[total];
            joint += row.iter().map(|&c| self.nlogn[c]).sum::<f64>();
        }
        ((marg - joint) / n as f64).max(0.0)
    }
}

/// Outcome of one phase at the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub estimate: Option<Vec<u8>>,
    pub transactions: usize,
    pub chain: Vec<u64>,
}

/// Runs one phase. `reply(block)` returns the polled sensor's bin index for
/// `block`; `prior` holds the already decoded sequences used as side
/// information, `candidates` the whole of `X_i^n` in lexicographic order.
pub fn decode_phase(
    book: &BinningCodebook,
    c: usize,
    prior: &[(&[u8], usize)],
    candidates: &[Vec<u8>],
    mut reply: impl FnMut(usize) -> Result<u64>,
) -> Result<PhaseOutcome> {
    let n = book.n();
    let jmax = book.blocks();
    let mut prior_seq = vec![0usize; n];
    let mut prior_cells = 1;
    for &(seq, k) in prior {
        for t in 0..n {
            prior_seq[t] = prior_seq[t] * k + seq[t] as usize;
        }
        prior_cells *= k;
    }
    let table = EntropyTable::new(n);
    let mut scratch = Vec::new();
    let mut levels: Vec<Vec<usize>> = vec![Vec::new(); jmax];
    for (idx, x) in candidates.iter().enumerate() {
        let h = table.conditional(&prior_seq, prior_cells, x, book.alphabet(), &mut scratch);
        let level = ((h / book.eps()) - 1e-9).ceil().max(1.0) as usize;
        levels[level.min(jmax) - 1].push(idx);
    }

    let mut chain = Vec::with_capacity(jmax);
    for j in 1..=jmax {
        chain.push(reply(j - 1)?);
        let chain_ref = crate::binning::BinIndexChain { c, indices: chain.clone() };
        if let Some(&hit) = levels[j - 1].iter().find(|&&idx| book.matches(&candidates[idx], &chain_ref)) {
            return Ok(PhaseOutcome { estimate: Some(candidates[hit].clone()), transactions: j, chain });
        }
    }
    Ok(PhaseOutcome { estimate: None, transactions: jmax, chain })
}

/// Result of the candidate-set update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VUpdate {
    pub kept: Vec<usize>,
    pub failure: bool,
}

/// Keeps the sets of `v` whose simulable laws come within `η` of the type
/// of the decoded sequences. `estimates[i]` is `None` for null sensors; a
/// set containing a null sensor is dropped.
pub fn update_v(
    v: &[usize],
    estimates: &[Option<Vec<u8>>],
    p: &JointPmf,
    h: &HonestCollection,
    info: &InfoModel,
    eta: f64,
) -> Result<VUpdate> {
    let u = SubsetView::from_unsorted(
        (0..estimates.len()).filter(|&i| estimates[i].is_some()).collect(),
        p.m(),
    )?;
    let mut kept = Vec::new();
    if !u.is_empty() {
        let rows: Vec<&[u8]> = u.indices().iter().map(|&i| estimates[i].as_deref().unwrap()).collect();
        let t = crate::prob::type_of(&rows, &p.sub_sizes(&u))?;
        let freq: Vec<f64> = (0..cell_count(&p.sub_sizes(&u))).map(|c| t.freq(c)).collect();
        for &k in v {
            let s = &h.candidates()[k];
            if !s.is_subset_of(&u) {
                continue;
            }
            let mut keep = false;
            for r in info.channels(k) {
                if ball_feasible(&freq, &u, s, r, p, eta)?.status.is_plausible() {
                    keep = true;
                    break;
                }
            }
            if keep {
                kept.push(k);
            }
        }
    }
    if kept.is_empty() {
        debug!("candidate set update would empty V; keeping the previous V");
        return Ok(VUpdate { kept: v.to_vec(), failure: true });
    }
    Ok(VUpdate { kept, failure: false })
}

/// Union of the selected candidate sets.
pub fn union_positions(h: &HonestCollection, v: &[usize]) -> SubsetView {
    SubsetView::from_mask(v.iter().fold(0, |acc, &k| acc | h.candidates()[k].mask()))
}

/// One full session.
pub fn run_session(scenario: &Scenario, params: &ProtocolParams, seed: u64) -> Result<SessionReport> {
    params.validate()?;
    let p = &scenario.p;
    let m = p.m();
    let sizes = p.sizes();
    for &k in sizes {
        let bits = params.n as f64 * (k as f64).log2();
        if bits > params.search_guard_bits {
            return Err(Error::Guard { what: "candidate search", bits, limit: params.search_guard_bits as u32 });
        }
    }
    let c_count = params.resolved_c(sizes);
    let master: u64 = derive_rng(seed, "codebook", 0).gen();
    let books: Vec<BinningCodebook> = (0..m)
        .map(|i| BinningCodebook::new(i, params.n, sizes[i], params.eps, params.nu, c_count, master))
        .collect::<Result<_>>()?;
    let spaces: Vec<Vec<Vec<u8>>> = (0..m)
        .map(|i| enumerate_sequences(sizes[i], params.n, params.search_guard_bits))
        .collect::<Result<_>>()?;
    let traitors = scenario.traitors();
    let r_true = scenario.true_channel();

    let mut v: Vec<usize> = (0..scenario.h.len()).collect();
    let mut rounds = Vec::with_capacity(params.rounds);
    let mut transcript = Vec::new();
    let mut total_bits = 0.0;
    let mut total_c_bits = 0.0;
    let c_bits = (c_count as f64).log2();

    for round in 0..params.rounds {
        let block = sample_block_with(p, params.n, &mut derive_rng(seed, "source", round as u64))?;
        let w = sample_side_info_with(r_true, &block, &mut derive_rng(seed, "side-info", round as u64))?;
        let mut history: Vec<Poll> = Vec::new();
        let ctx = TraitorContext {
            traitors: &traitors,
            alphabet_sizes: sizes,
            own_blocks: traitors.indices().iter().map(|&i| block.row(i)).collect(),
            side_info: &w,
            seed,
            round,
            history: &history,
        };
        let mut adversary = VrTraitors::plan(&scenario.strategy, &ctx)?;

        let u = union_positions(&scenario.h, &v);
        let mut estimates: Vec<Option<Vec<u8>>> = vec![None; m];
        let mut transactions = vec![0usize; m];
        let mut round_bits = 0.0;
        let mut round_c_bits = 0.0;
        for (phase, &i) in u.indices().iter().enumerate() {
            let book = &books[i];
            let honest = !scenario.is_traitor(i);
            let c = if honest {
                derive_rng(seed, "sensor-c", (round * m + i) as u64).gen_range(0..c_count)
            } else {
                adversary.choose_c(book)
            };
            let prior: Vec<(&[u8], usize)> = u
                .indices()
                .iter()
                .take_while(|&&k| k < i)
                .filter_map(|&k| estimates[k].as_deref().map(|s| (s, sizes[k])))
                .collect();
            let out = decode_phase(book, c, &prior, &spaces[i], |b| {
                history.push(Poll { sensor: i, block: b });
                if honest {
                    book.encode_block(block.row(i), c, b)
                } else {
                    adversary.respond(book, c, b)
                }
            })?;
            for (b, &idx) in out.chain.iter().enumerate() {
                transcript.push(TranscriptRecord {
                    round,
                    phase,
                    sensor: i,
                    c,
                    j: b + 1,
                    bin_index: idx,
                    bits: book.block_bits(b),
                });
            }
            transactions[i] = out.transactions;
            round_bits += book.chain_bits(out.transactions);
            round_c_bits += c_bits;
            estimates[i] = out.estimate;
        }

        let honest_error = scenario
            .h_true
            .indices()
            .iter()
            .any(|&i| estimates[i].as_deref() != Some(block.row(i)));
        let null_sensors = u.indices().iter().copied().filter(|&i| estimates[i].is_none()).collect();
        let upd = update_v(&v, &estimates, p, &scenario.h, &scenario.info, params.eta)?;
        v = upd.kept;
        total_bits += round_bits;
        total_c_bits += round_c_bits;
        rounds.push(RoundRecord {
            round,
            honest_error,
            bits: round_bits,
            c_bits: round_c_bits,
            transactions,
            null_sensors,
            v_after: v.clone(),
            v_failure: upd.failure,
        });
    }

    let denom = (params.n * params.rounds) as f64;
    let j_max = books.iter().map(BinningCodebook::blocks).max().unwrap_or(1);
    let min_forward = books
        .iter()
        .flat_map(|b| (0..b.blocks()).map(move |k| b.block_bits(k)))
        .fold(f64::INFINITY, f64::min);
    Ok(SessionReport {
        n: params.n,
        rounds,
        sum_rate: total_bits / denom,
        overhead_rate: total_c_bits / denom,
        feedback_ratio: ((c_count * j_max) as f64).log2() / min_forward,
        transcript,
    })
}
