//! One-shot fixed-rate coding: per-candidate-set Slepian–Wolf decoding and
//! reconciliation of the resulting estimates.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::ops::ControlFlow;

use rand::Rng;
use serde::Serialize;

use crate::adversary::{fabricate_block, Strategy, TraitorContext};
use crate::binning::{enumerate_sequences, fixed_rate_bin_count, fixed_rate_index};
use crate::error::{Error, Result};
use crate::prob::{cell_count, entropy_given_side_info, projection_map, ConditionalPmf, JointPmf, SubsetView};
use crate::region::{sw_region_contains, FixedKind, HonestCollection};
use crate::scenario::Scenario;
use crate::source::{derive_rng, sample_block_with, sample_side_info_with, SideInfoBlock, SourceBlock};

/// Work limit on one typical-set search.
pub const SEARCH_LIMIT: u64 = 1 << 22;

/// Decoder simulations the ambiguity attack tries before giving up.
pub const ATTACK_TRIES: usize = 256;

const KNOWN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedRateCode {
    pub rates: Vec<f64>,
    pub n: usize,
    pub kind: FixedKind,
    /// Subcodebooks per sensor (1 for deterministic codes).
    pub c_count: usize,
    pub seed: u64,
    /// Typicality parameter of the decoder.
    pub eps: f64,
    pub plurality: bool,
    pub guard_bits: f64,
}

impl FixedRateCode {
    pub fn validate(&self, sizes: &[usize]) -> Result<()> {
        if self.rates.len() != sizes.len() {
            return Err(Error::Precondition("one rate per sensor required".into()));
        }
        if self.rates.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::Precondition("rates must be nonnegative".into()));
        }
        if self.n == 0 {
            return Err(Error::Precondition("n must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Precondition("typicality parameter must be positive".into()));
        }
        match self.kind {
            FixedKind::Deterministic if self.c_count != 1 => {
                Err(Error::Precondition("deterministic codes have a single codebook".into()))
            }
            _ if self.c_count == 0 => Err(Error::Precondition("C must be positive".into())),
            _ => Ok(()),
        }
    }

    pub fn bin_count(&self, i: usize) -> Result<u64> {
        fixed_rate_bin_count(self.n, self.rates[i])
    }

    /// Bits per symbol actually carried by sensor `i`'s bin index.
    pub fn effective_rate(&self, i: usize) -> Result<f64> {
        Ok((self.bin_count(i)? as f64).log2() / self.n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Message {
    pub c: usize,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateTable {
    /// Per candidate position: the decoded tuple (rows in set order) or null.
    pub per_set: Vec<Option<Vec<Vec<u8>>>>,
    /// Final estimate per sensor.
    pub final_est: Vec<Option<Vec<u8>>>,
    /// Sensors whose non-null estimates disagreed.
    pub disagreements: Vec<usize>,
}

impl EstimateTable {
    /// Estimate of sensor `i` from candidate position `k`, if any.
    pub fn estimate(&self, h: &HonestCollection, k: usize, i: usize) -> Option<&[u8]> {
        let pos = h.candidates()[k].indices().iter().position(|&j| j == i)?;
        self.per_set[k].as_ref().map(|rows| rows[pos].as_slice())
    }
}

/// Candidate positions in arbitration order: larger sets first, then lexicographic.
pub fn arbitration_order(h: &HonestCollection) -> Vec<usize> {
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by_key(|&k| (Reverse(h.candidates()[k].len()), h.candidates()[k].clone()));
    order
}

fn within_ball(cells: &[usize], q: &[f64], eps: f64) -> bool {
    let mut counts = vec![0u32; q.len()];
    for &c in cells {
        counts[c] += 1;
    }
    let n = cells.len() as f64;
    let radius = eps / q.len() as f64 + 1e-12;
    counts.iter().zip(q).all(|(&c, &qc)| (c as f64 / n - qc).abs() <= radius)
}

/// Decoder with the per-sensor typical sequences bucketed by bin.
pub struct FixedDecoder {
    code: FixedRateCode,
    p: JointPmf,
    h: HonestCollection,
    order: Vec<usize>,
    spaces: Vec<Vec<Vec<u8>>>,
    typical: Vec<Vec<u32>>,
    counts: Vec<u64>,
    buckets: Vec<HashMap<(usize, u64), Vec<u32>>>,
}

impl FixedDecoder {
    pub fn new(code: &FixedRateCode, p: &JointPmf, h: &HonestCollection) -> Result<Self> {
        code.validate(p.sizes())?;
        if h.m() != p.m() {
            return Err(Error::Precondition("collection arity differs from the source".into()));
        }
        let sizes = p.sizes();
        let mut spaces = Vec::with_capacity(p.m());
        let mut typical = Vec::with_capacity(p.m());
        let mut counts = Vec::with_capacity(p.m());
        let mut buckets = Vec::with_capacity(p.m());
        for i in 0..p.m() {
            let space = enumerate_sequences(sizes[i], code.n, code.guard_bits)?;
            let count = code.bin_count(i)?;
            let marg = p.marginal_vec(&SubsetView::singleton(i));
            let mut map: HashMap<(usize, u64), Vec<u32>> = HashMap::new();
            let mut typ = Vec::new();
            for (idx, x) in space.iter().enumerate() {
                let cells: Vec<usize> = x.iter().map(|&s| s as usize).collect();
                if !within_ball(&cells, &marg, code.eps) {
                    continue;
                }
                typ.push(idx as u32);
                for c in 0..code.c_count {
                    let b = fixed_rate_index(code.seed, i, x, sizes[i], count, c);
                    map.entry((c, b)).or_default().push(idx as u32);
                }
            }
            spaces.push(space);
            typical.push(typ);
            counts.push(count);
            buckets.push(map);
        }
        Ok(FixedDecoder {
            code: code.clone(),
            p: p.clone(),
            h: h.clone(),
            order: arbitration_order(h),
            spaces,
            typical,
            counts,
            buckets,
        })
    }

    pub fn code(&self) -> &FixedRateCode {
        &self.code
    }

    pub fn collection(&self) -> &HonestCollection {
        &self.h
    }

    pub fn sequence(&self, i: usize, idx: u32) -> &[u8] {
        &self.spaces[i][idx as usize]
    }

    pub fn bin_count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    /// Marginally typical sequences of sensor `i` in the bin of `msg`, lexicographic.
    pub fn members(&self, i: usize, msg: Message) -> &[u32] {
        self.buckets[i].get(&(msg.c, msg.index)).map_or(&[], Vec::as_slice)
    }

    /// Honest encoding of `x` by sensor `i` with subcodebook `c`.
    pub fn encode(&self, i: usize, x: &[u8], c: usize) -> Message {
        Message { c, index: fixed_rate_index(self.code.seed, i, x, self.p.sizes()[i], self.counts[i], c) }
    }

    /// Visits the jointly typical tuples of `s` drawn from `lists` in
    /// lexicographic order (rows in set order).
    fn for_each_typical<F>(&self, s: &SubsetView, lists: &[&[u32]], mut visit: F) -> Result<()>
    where
        F: FnMut(&[u32]) -> ControlFlow<()>,
    {
        let idx = s.indices();
        if lists.iter().any(|l| l.is_empty()) {
            return Ok(());
        }
        let margs: Vec<Vec<f64>> = (1..=idx.len())
            .map(|k| self.p.marginal_vec(&SubsetView::new(idx[..k].to_vec(), self.p.m()).expect("prefix")))
            .collect();
        let mut st = Search {
            dec: self,
            idx,
            lists,
            margs: &margs,
            choice: vec![0; idx.len()],
            cells: vec![vec![0; self.code.n]; idx.len() + 1],
            work: 0,
        };
        st.run(0, &mut visit).map(|_| ())
    }

    /// Least jointly typical tuple of `s` matching the messages, if any.
    pub fn decode_set(&self, s: &SubsetView, messages: &[Message]) -> Result<Option<Vec<Vec<u8>>>> {
        let lists: Vec<&[u32]> = s.indices().iter().map(|&i| self.members(i, messages[i])).collect();
        let mut found = None;
        self.for_each_typical(s, &lists, |choice| {
            found = Some(choice.to_vec());
            ControlFlow::Break(())
        })?;
        Ok(found.map(|c| s.indices().iter().zip(c).map(|(&i, k)| self.spaces[i][k as usize].clone()).collect()))
    }

    pub fn decode_all(&self, messages: &[Message]) -> Result<EstimateTable> {
        if messages.len() != self.p.m() {
            return Err(Error::Precondition("one message per sensor required".into()));
        }
        let per_set: Vec<Option<Vec<Vec<u8>>>> =
            self.h.candidates().iter().map(|s| self.decode_set(s, messages)).collect::<Result<_>>()?;
        for (s, est) in self.h.candidates().iter().zip(&per_set) {
            if let Some(rows) = est {
                for (&i, x) in s.indices().iter().zip(rows) {
                    debug_assert_eq!(self.encode(i, x, messages[i].c), messages[i]);
                }
            }
        }
        let mut final_est = vec![None; self.p.m()];
        let mut disagreements = Vec::new();
        for i in 0..self.p.m() {
            let votes: Vec<&[u8]> = self
                .order
                .iter()
                .filter_map(|&k| {
                    let pos = self.h.candidates()[k].indices().iter().position(|&j| j == i)?;
                    per_set[k].as_ref().map(|rows| rows[pos].as_slice())
                })
                .collect();
            if votes.iter().any(|v| *v != votes[0]) {
                disagreements.push(i);
            }
            final_est[i] = self.arbitrate(&votes).map(<[u8]>::to_vec);
        }
        Ok(EstimateTable { per_set, final_est, disagreements })
    }

    /// `votes` are in arbitration order; plurality, when enabled, wins over it.
    fn arbitrate<'v>(&self, votes: &[&'v [u8]]) -> Option<&'v [u8]> {
        if !self.code.plurality {
            return votes.first().copied();
        }
        let mut best: Option<(&[u8], usize)> = None;
        for v in votes {
            let n = votes.iter().filter(|w| *w == v).count();
            if best.map_or(true, |(_, b)| n > b) {
                best = Some((v, n));
            }
        }
        best.map(|(v, _)| v)
    }
}

struct Search<'a> {
    dec: &'a FixedDecoder,
    idx: &'a [usize],
    lists: &'a [&'a [u32]],
    margs: &'a [Vec<f64>],
    choice: Vec<u32>,
    cells: Vec<Vec<usize>>,
    work: u64,
}

impl Search<'_> {
    fn run<F>(&mut self, depth: usize, visit: &mut F) -> Result<ControlFlow<()>>
    where
        F: FnMut(&[u32]) -> ControlFlow<()>,
    {
        if depth == self.idx.len() {
            return Ok(visit(&self.choice));
        }
        let i = self.idx[depth];
        let k = self.dec.p.sizes()[i];
        for &member in self.lists[depth] {
            self.work += 1;
            if self.work > SEARCH_LIMIT {
                return Err(Error::Guard { what: "typical-set search", bits: 22.0, limit: 22 });
            }
            let seq = &self.dec.spaces[i][member as usize];
            let (lower, upper) = self.cells.split_at_mut(depth + 1);
            for (t, cell) in upper[0].iter_mut().enumerate() {
                *cell = lower[depth][t] * k + seq[t] as usize;
            }
            if depth > 0 && !within_ball(&upper[0], &self.margs[depth], self.dec.code.eps) {
                continue;
            }
            self.choice[depth] = member;
            if self.run(depth + 1, visit)?.is_break() {
                return Ok(ControlFlow::Break(()));
            }
        }
        Ok(ControlFlow::Continue(()))
    }
}

/// Rows of `x_a` when `W` determines them, else `None`.
pub fn known_from_side_info(
    p: &JointPmf,
    r: &ConditionalPmf,
    a: &SubsetView,
    w: &SideInfoBlock,
) -> Option<Vec<Vec<u8>>> {
    if a.is_empty() || entropy_given_side_info(p, r, a) >= KNOWN_TOL {
        return None;
    }
    let amap = projection_map(p.sizes(), a);
    let aa = p.alphabet_size(a);
    let wa = r.output_size();
    let mut joint = vec![0.0; aa * wa];
    for cell in 0..p.cells() {
        for (ws, &rw) in r.row(cell).iter().enumerate() {
            joint[amap[cell] * wa + ws] += p.prob(cell) * rw;
        }
    }
    let best: Vec<usize> = (0..wa)
        .map(|ws| (0..aa).max_by(|&x, &y| joint[x * wa + ws].total_cmp(&joint[y * wa + ws])).unwrap_or(0))
        .collect();
    let sub = p.sub_sizes(a);
    let mut rows = vec![vec![0u8; w.w_symbols.len()]; a.len()];
    for (t, &ws) in w.w_symbols.iter().enumerate() {
        let mut cell = best[ws as usize];
        for k in (0..sub.len()).rev() {
            rows[k][t] = (cell % sub[k]) as u8;
            cell /= sub[k];
        }
    }
    Some(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AmbiguityOutcome {
    /// Traitor messages indexed like the traitor set, and the set they confuse.
    Found { target: SubsetView, messages: Vec<Message> },
    NotFound { reason: String },
}

/// Picks the set to confuse: the first candidate in arbitration order that
/// shares a known, under-described part with the true honest set.
pub fn ambiguity_target(
    dec: &FixedDecoder,
    scenario: &Scenario,
    w: &SideInfoBlock,
) -> Result<Option<SubsetView>> {
    for &k in &dec.order {
        let s1 = &dec.h.candidates()[k];
        if *s1 == scenario.h_true {
            continue;
        }
        let shared = s1.intersection(&scenario.h_true);
        if shared.is_empty() || shared == *s1 {
            continue;
        }
        if sw_region_contains(&dec.code.rates, &scenario.p, &shared)? {
            continue;
        }
        if known_from_side_info(&scenario.p, scenario.true_channel(), &shared, w).is_some() {
            return Ok(Some(s1.clone()));
        }
    }
    Ok(None)
}

/// Searches for traitor messages that make the decoder of the target set
/// settle on a wrong but typical account of the shared honest sensors.
/// The attacker simulates the public decoder on its view of the honest
/// messages (`guessed_c` stands in for the honest subcodebooks).
pub fn fixed_rate_ambiguity_attack(
    dec: &FixedDecoder,
    scenario: &Scenario,
    block: &SourceBlock,
    w: &SideInfoBlock,
    target: Option<&SubsetView>,
    guessed_c: &[usize],
) -> Result<AmbiguityOutcome> {
    let p = &scenario.p;
    let m = p.m();
    let h = &scenario.h_true;
    let traitors = scenario.traitors();
    let s1 = match target {
        Some(t) => t.clone(),
        None => match ambiguity_target(dec, scenario, w)? {
            Some(t) => t,
            None => return Ok(AmbiguityOutcome::NotFound { reason: "no confusable candidate set".into() }),
        },
    };
    let shared = s1.intersection(h);
    let r = scenario.true_channel();
    let Some(known) = known_from_side_info(p, r, &shared, w) else {
        return Ok(AmbiguityOutcome::NotFound { reason: format!("traitors cannot see {shared}") });
    };
    let honest_known = known_from_side_info(p, r, h, w);

    // The attacker's view of every honest message it can reconstruct.
    let mut assumed: Vec<Option<Message>> = vec![None; m];
    let view: Vec<(usize, Vec<u8>)> = match &honest_known {
        Some(rows) => h.indices().iter().copied().zip(rows.iter().cloned()).collect(),
        None => shared.indices().iter().copied().zip(known.iter().cloned()).collect(),
    };
    for (i, x) in &view {
        assumed[*i] = Some(dec.encode(*i, x, guessed_c[*i]));
    }
    let own: Vec<Message> = traitors.indices().iter().map(|&i| dec.encode(i, block.row(i), 0)).collect();

    let lists: Vec<&[u32]> = s1
        .indices()
        .iter()
        .map(|&i| match assumed[i] {
            Some(msg) if shared.contains(i) => dec.members(i, msg),
            _ => dec.typical[i].as_slice(),
        })
        .collect();
    let shared_pos: Vec<usize> = (0..s1.len()).filter(|&k| shared.contains(s1.indices()[k])).collect();
    let truth: Vec<&[u8]> = shared.indices().iter().map(|&i| block.row(i)).collect();

    let mut tries = 0usize;
    let mut outcome = None;
    let mut failure = None;
    dec.for_each_typical(&s1, &lists, |choice| {
        let fake_shared: Vec<&[u8]> = shared_pos.iter().map(|&k| dec.sequence(s1.indices()[k], choice[k])).collect();
        if fake_shared == truth {
            return ControlFlow::Continue(());
        }
        tries += 1;
        let mut traitor_msgs = own.clone();
        for (k, &i) in s1.indices().iter().enumerate() {
            if let Some(pos) = traitors.indices().iter().position(|&j| j == i) {
                traitor_msgs[pos] = dec.encode(i, dec.sequence(i, choice[k]), 0);
            }
        }
        match simulate(dec, &s1, &shared, &view, &assumed, &traitors, &traitor_msgs) {
            Ok(true) => {
                outcome = Some(traitor_msgs);
                return ControlFlow::Break(());
            }
            Ok(false) => {}
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        }
        if tries >= ATTACK_TRIES {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(match outcome {
        Some(messages) => AmbiguityOutcome::Found { target: s1, messages },
        None => AmbiguityOutcome::NotFound { reason: format!("no confusable tuple for {s1} after {tries} tries") },
    })
}

/// Does the attacker's simulated decode end with a wrong honest estimate?
fn simulate(
    dec: &FixedDecoder,
    s1: &SubsetView,
    shared: &SubsetView,
    view: &[(usize, Vec<u8>)],
    assumed: &[Option<Message>],
    traitors: &SubsetView,
    traitor_msgs: &[Message],
) -> Result<bool> {
    let mut msgs: Vec<Message> = assumed.iter().map(|m| m.unwrap_or(Message { c: 0, index: 0 })).collect();
    for (&i, &msg) in traitors.indices().iter().zip(traitor_msgs) {
        msgs[i] = msg;
    }
    let fully_seen = view.len() + traitors.len() == dec.p.m();
    if fully_seen {
        let table = dec.decode_all(&msgs)?;
        return Ok(view.iter().any(|(i, x)| table.final_est[*i].as_deref() != Some(x.as_slice())));
    }
    let Some(rows) = dec.decode_set(s1, &msgs)? else {
        return Ok(false);
    };
    Ok(s1.indices().iter().zip(&rows).any(|(i, x)| {
        shared.contains(*i) && view.iter().any(|(j, y)| j == i && y != x)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrTrialOutcome {
    pub trial: usize,
    pub honest_error: bool,
    pub disagreements: usize,
    /// `Some(found)` when the ambiguity attack ran.
    pub attack_found: Option<bool>,
    pub bits: f64,
}

/// One block through encoders, traitors and decoder.
pub fn run_fixed_trial(dec: &FixedDecoder, scenario: &Scenario, seed: u64, trial: usize) -> Result<FrTrialOutcome> {
    let p = &scenario.p;
    let m = p.m();
    let code = dec.code();
    if scenario.h != dec.h || p != &dec.p {
        return Err(Error::Scenario("decoder was built for another scenario".into()));
    }
    let block = sample_block_with(p, code.n, &mut derive_rng(seed, "source", trial as u64))?;
    let w = sample_side_info_with(scenario.true_channel(), &block, &mut derive_rng(seed, "side-info", trial as u64))?;
    let traitors = scenario.traitors();
    let mut rng = derive_rng(seed, "traitor", trial as u64);

    let mut messages: Vec<Message> = (0..m)
        .map(|i| {
            let c = derive_rng(seed, "sensor-c", (trial * m + i) as u64).gen_range(0..code.c_count);
            dec.encode(i, block.row(i), c)
        })
        .collect();

    let mut attack_found = None;
    let fake: Option<Vec<Message>> = match &scenario.strategy {
        Strategy::HonestPassthrough => None,
        Strategy::BlackHole => Some(
            traitors
                .indices()
                .iter()
                .map(|&i| Message { c: rng.gen_range(0..code.c_count), index: rng.gen_range(0..dec.bin_count(i)) })
                .collect(),
        ),
        Strategy::FakeDistribution(qbar) => {
            let ctx = TraitorContext {
                traitors: &traitors,
                alphabet_sizes: p.sizes(),
                own_blocks: traitors.indices().iter().map(|&i| block.row(i)).collect(),
                side_info: &w,
                seed,
                round: trial,
                history: &[],
            };
            let rows = fabricate_block(&ctx, qbar, seed)?;
            Some(
                traitors
                    .indices()
                    .iter()
                    .zip(&rows)
                    .map(|(&i, x)| dec.encode(i, x, rng.gen_range(0..code.c_count)))
                    .collect(),
            )
        }
        Strategy::FixedRateAmbiguity { target } => {
            let guessed: Vec<usize> = (0..m).map(|_| rng.gen_range(0..code.c_count)).collect();
            match fixed_rate_ambiguity_attack(dec, scenario, &block, &w, target.as_ref(), &guessed)? {
                AmbiguityOutcome::Found { messages, .. } => {
                    attack_found = Some(true);
                    Some(messages)
                }
                AmbiguityOutcome::NotFound { .. } => {
                    attack_found = Some(false);
                    None
                }
            }
        }
    };
    if let Some(fake) = fake {
        for (&i, msg) in traitors.indices().iter().zip(fake) {
            messages[i] = msg;
        }
    }

    let table = dec.decode_all(&messages)?;
    let honest_error = scenario.h_true.indices().iter().any(|&i| table.final_est[i].as_deref() != Some(block.row(i)));
    let c_bits = (code.c_count as f64).log2();
    let bits = (0..m).map(|i| (dec.bin_count(i) as f64).log2() + c_bits).sum();
    Ok(FrTrialOutcome { trial, honest_error, disagreements: table.disagreements.len(), attack_found, bits })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseReport {
    pub trials: usize,
    pub attacks_found: usize,
    pub honest_errors: usize,
}

impl ConverseReport {
    pub fn error_rate(&self) -> f64 {
        self.honest_errors as f64 / self.trials.max(1) as f64
    }
}

/// Runs the ambiguity attack against `trials` blocks.
pub fn demonstrate_converse(
    dec: &FixedDecoder,
    scenario: &Scenario,
    seed: u64,
    trials: usize,
) -> Result<ConverseReport> {
    if !matches!(scenario.strategy, Strategy::FixedRateAmbiguity { .. }) {
        return Err(Error::Scenario("the converse needs the ambiguity strategy".into()));
    }
    if dec.code.kind != FixedKind::Deterministic {
        return Err(Error::Precondition("the converse applies to deterministic codes".into()));
    }
    let mut report = ConverseReport { trials, attacks_found: 0, honest_errors: 0 };
    for t in 0..trials {
        let out = run_fixed_trial(dec, scenario, seed, t)?;
        report.attacks_found += usize::from(out.attack_found == Some(true));
        report.honest_errors += usize::from(out.honest_error);
    }
    Ok(report)
}

/// `n log2 |X_S|`, the size of an exhaustive search over `s`.
pub fn set_space_bits(p: &JointPmf, s: &SubsetView, n: usize) -> f64 {
    n as f64 * (cell_count(&p.sub_sizes(s)) as f64).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::InfoModel;

    fn three() -> JointPmf {
        // B ~ Bern(1/2); X1 = B, X2 = B ^ Bern(.3), X3 = B ^ Bern(.05).
        let mut w = vec![0.0; 8];
        for b in 0..2usize {
            for e2 in 0..2usize {
                for e3 in 0..2usize {
                    let pr = 0.5 * [0.7, 0.3][e2] * [0.95, 0.05][e3];
                    w[b * 4 + (b ^ e2) * 2 + (b ^ e3)] += pr;
                }
            }
        }
        JointPmf::new(vec![2, 2, 2], w).unwrap()
    }

    fn code(rates: Vec<f64>, kind: FixedKind, c: usize) -> FixedRateCode {
        FixedRateCode { rates, n: 10, kind, c_count: c, seed: 7, eps: 1.2, plurality: false, guard_bits: 22.0 }
    }

    #[test]
    fn lossless_rates_decode_exactly() {
        let p = three();
        let h = HonestCollection::no_traitors(3);
        let dec = FixedDecoder::new(&code(vec![1.0; 3], FixedKind::Deterministic, 1), &p, &h).unwrap();
        let s = Scenario::new(p.clone(), h.clone(), InfoModel::perfect(&h, p.sizes()), SubsetView::full(3), 0, Strategy::HonestPassthrough).unwrap();
        for t in 0..20 {
            let out = run_fixed_trial(&dec, &s, 3, t).unwrap();
            // A sequence outside the typical set is the only way to fail here.
            let block = sample_block_with(&p, 10, &mut derive_rng(3, "source", t as u64)).unwrap();
            let typical = crate::prob::strongly_typical(&block.rows(), &p, 1.2).unwrap();
            assert_eq!(out.honest_error, !typical);
        }
    }

    #[test]
    fn estimates_lie_in_received_bins() {
        let p = three();
        let h = HonestCollection::threshold(3, 1).unwrap();
        let dec = FixedDecoder::new(&code(vec![0.9, 0.9, 0.6], FixedKind::Randomized, 4), &p, &h).unwrap();
        let mut rng = derive_rng(1, "test", 0);
        for _ in 0..30 {
            let msgs: Vec<Message> = (0..3)
                .map(|i| Message { c: rng.gen_range(0..4), index: rng.gen_range(0..dec.bin_count(i)) })
                .collect();
            let table = dec.decode_all(&msgs).unwrap();
            for (k, s) in h.candidates().iter().enumerate() {
                if let Some(rows) = &table.per_set[k] {
                    for (&i, x) in s.indices().iter().zip(rows) {
                        assert_eq!(dec.encode(i, x, msgs[i].c), msgs[i]);
                    }
                    let seqs: Vec<&[u8]> = rows.iter().map(Vec::as_slice).collect();
                    let marg = p.marginal(s).unwrap();
                    assert!(crate::prob::strongly_typical(&seqs, &marg, 1.2).unwrap());
                }
            }
        }
    }

    #[test]
    fn arbitration_prefers_larger_then_lexicographic() {
        let h = HonestCollection::new(
            3,
            vec![SubsetView::from_mask(0b110), SubsetView::from_mask(0b011), SubsetView::full(3)],
        )
        .unwrap();
        let order: Vec<SubsetView> = arbitration_order(&h).into_iter().map(|k| h.candidates()[k].clone()).collect();
        assert_eq!(order, vec![SubsetView::full(3), SubsetView::from_mask(0b011), SubsetView::from_mask(0b110)]);
    }

    #[test]
    fn plurality_outvotes_order() {
        let p = three();
        let h = HonestCollection::no_traitors(3);
        let mut c = code(vec![1.0; 3], FixedKind::Deterministic, 1);
        c.plurality = true;
        let dec = FixedDecoder::new(&c, &p, &h).unwrap();
        let a: &[u8] = &[0, 1];
        let b: &[u8] = &[1, 1];
        assert_eq!(dec.arbitrate(&[a, b, b]), Some(b));
        assert_eq!(dec.arbitrate(&[a, b]), Some(a));
        assert_eq!(dec.arbitrate(&[]), None);
    }

    #[test]
    fn side_info_knowledge() {
        let p = three();
        let id = ConditionalPmf::identity(vec![2, 2, 2]);
        let block = sample_block_with(&p, 30, &mut derive_rng(2, "source", 0)).unwrap();
        let w = sample_side_info_with(&id, &block, &mut derive_rng(2, "side-info", 0)).unwrap();
        let rows = known_from_side_info(&p, &id, &SubsetView::from_mask(0b101), &w).unwrap();
        assert_eq!(rows[0], block.row(0));
        assert_eq!(rows[1], block.row(2));
        let blind = ConditionalPmf::constant(vec![2, 2, 2], &[1.0]).unwrap();
        assert!(known_from_side_info(&p, &blind, &SubsetView::singleton(0), &w).is_none());
    }
}
