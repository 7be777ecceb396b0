//! Achievable-rate characterizations: the variable-rate optimum `R*` and
//! the fixed-rate regions.

mod feasibility;
mod fixed;
mod general;
mod ipf;

pub use feasibility::{
    ball_feasible, perfect_ball_feasible, q_set_feasible, Feasibility, FEASIBLE_TOL,
    INDETERMINATE_TOL,
};
pub use fixed::{fixed_rate_region_contains, known_intersections, sw_region_contains, FixedKind, SW_SLACK};
pub use general::{r_star_general, GeneralOptions, GeneralReport};
pub use ipf::{max_entropy_with_marginals, union_of, MaxEntropy};

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::prob::{ConditionalPmf, JointPmf, SubsetView};

/// Largest collection `r_star_perfect` will enumerate subsets of.
pub const MAX_COLLECTION: usize = 20;

/// The list of sets the code must tolerate as the honest set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HonestCollection {
    m: usize,
    candidates: Vec<SubsetView>,
    threshold: Option<usize>,
}

impl HonestCollection {
    pub fn new(m: usize, candidates: Vec<SubsetView>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Precondition("honest collection is empty".into()));
        }
        for (k, s) in candidates.iter().enumerate() {
            if s.is_empty() || s.indices().iter().any(|&i| i >= m) {
                return Err(Error::Precondition(format!("bad candidate set {s}")));
            }
            if candidates[..k].contains(s) {
                return Err(Error::Precondition(format!("duplicate candidate set {s}")));
            }
        }
        Ok(HonestCollection { m, candidates, threshold: None })
    }

    /// All sets of size at least `m - t`, largest first, then lexicographic.
    pub fn threshold(m: usize, t: usize) -> Result<Self> {
        if m == 0 || m > 20 || t >= m {
            return Err(Error::Precondition(format!("threshold collection needs t < m (m={m}, t={t})")));
        }
        let mut candidates: Vec<SubsetView> = (1u64..1 << m)
            .filter(|mask| mask.count_ones() as usize >= m - t)
            .map(SubsetView::from_mask)
            .collect();
        candidates.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Ok(HonestCollection { m, candidates, threshold: Some(t) })
    }

    /// The no-traitor collection `{M}`.
    pub fn no_traitors(m: usize) -> Self {
        HonestCollection { m, candidates: vec![SubsetView::full(m)], threshold: Some(0) }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn candidates(&self) -> &[SubsetView] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn threshold_t(&self) -> Option<usize> {
        self.threshold
    }

    pub fn position(&self, s: &SubsetView) -> Option<usize> {
        self.candidates.iter().position(|c| c == s)
    }

    /// Candidate sets selected by a bit mask over candidate positions.
    pub fn select(&self, mask: u64) -> Vec<SubsetView> {
        (0..self.len()).filter(|k| mask >> k & 1 == 1).map(|k| self.candidates[k].clone()).collect()
    }
}

/// `ℛ`: for each candidate set, the channels `r(w|x)` the traitors may have.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoModel {
    channels: Vec<Vec<ConditionalPmf>>,
    perfect: bool,
}

impl InfoModel {
    /// Every candidate gets the identity channel `W = (X_1, .., X_m)`.
    pub fn perfect(h: &HonestCollection, sizes: &[usize]) -> Self {
        let id = ConditionalPmf::identity(sizes.to_vec());
        InfoModel { channels: vec![vec![id]; h.len()], perfect: true }
    }

    pub fn new(h: &HonestCollection, sizes: &[usize], channels: Vec<Vec<ConditionalPmf>>) -> Result<Self> {
        if channels.len() != h.len() {
            return Err(Error::Precondition("one channel list per candidate set required".into()));
        }
        for (k, list) in channels.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Precondition(format!("no channel for {}", h.candidates()[k])));
            }
            if list.iter().any(|r| r.input_sizes() != sizes) {
                return Err(Error::AlphabetMismatch("channel inputs differ from source alphabets".into()));
            }
        }
        let perfect = channels.iter().flatten().all(ConditionalPmf::is_identity);
        Ok(InfoModel { channels, perfect })
    }

    pub fn is_perfect(&self) -> bool {
        self.perfect
    }

    pub fn channels(&self, candidate: usize) -> &[ConditionalPmf] {
        &self.channels[candidate]
    }

    pub fn all(&self) -> &[Vec<ConditionalPmf>] {
        &self.channels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairValue {
    pub honest: SubsetView,
    pub channel: usize,
    pub value: f64,
    pub maximizer_v: Vec<SubsetView>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub r_star: f64,
    pub per_pair: Vec<PairValue>,
    pub maximizer_v: Vec<SubsetView>,
    pub maximizer_q: JointPmf,
}

impl RegionReport {
    pub fn pair(&self, honest: &SubsetView) -> Option<&PairValue> {
        self.per_pair.iter().find(|p| &p.honest == honest)
    }
}

/// Candidates in `mask` whose removal leaves the union unchanged.
fn removable(sets: &[u64], mask: u64) -> u64 {
    let mut out = 0;
    for k in 0..sets.len() {
        if mask >> k & 1 == 0 {
            continue;
        }
        let rest = (0..sets.len())
            .filter(|&j| j != k && mask >> j & 1 == 1)
            .fold(0, |acc, j| acc | sets[j]);
        if rest & sets[k] == sets[k] {
            out |= 1 << k;
        }
    }
    out
}

fn union_mask(sets: &[u64], mask: u64) -> u64 {
    (0..sets.len()).filter(|k| mask >> k & 1 == 1).fold(0, |acc, k| acc | sets[k])
}

/// `R*` under perfect traitor information.
pub fn r_star_perfect(p: &JointPmf, h: &HonestCollection) -> Result<RegionReport> {
    r_star_perfect_with(p, h, Execution::default())
}

pub fn r_star_perfect_with(p: &JointPmf, h: &HonestCollection, exec: Execution) -> Result<RegionReport> {
    if h.len() > MAX_COLLECTION {
        return Err(Error::Guard { what: "collection subsets", bits: h.len() as f64, limit: MAX_COLLECTION as u32 });
    }
    if h.m() != p.m() {
        return Err(Error::AlphabetMismatch("collection arity differs from source".into()));
    }
    let sets: Vec<u64> = h.candidates().iter().map(SubsetView::mask).collect();

    // A family with two or more redundant members is dominated for every
    // honest set it contains; with exactly one it only matters for that one.
    let mut masks: Vec<u64> = (1u64..1 << h.len())
        .filter(|&mask| removable(&sets, mask).count_ones() <= 1)
        .collect();
    let order_key = |mask: &u64| {
        let members: Vec<usize> = (0..h.len()).filter(|k| mask >> k & 1 == 1).collect();
        (std::cmp::Reverse(union_mask(&sets, *mask).count_ones()), members)
    };
    masks.sort_by_key(order_key);

    let results = par::map_indexed(exec, masks.len(), |k| max_entropy_with_marginals(p, &h.select(masks[k])));
    let results: Vec<MaxEntropy> = results.into_iter().collect::<Result<_>>()?;

    let mut best: Option<(f64, usize)> = None;
    let mut per: HashMap<usize, (f64, usize)> = HashMap::new();
    for (k, (&mask, res)) in masks.iter().zip(&results).enumerate() {
        if best.map_or(true, |(b, _)| res.value > b + 1e-12) {
            best = Some((res.value, k));
        }
        let red = removable(&sets, mask);
        for c in 0..h.len() {
            if mask >> c & 1 == 1 && (red == 0 || red == 1 << c) {
                let e = per.entry(c).or_insert((f64::NEG_INFINITY, k));
                if res.value > e.0 + 1e-12 {
                    *e = (res.value, k);
                }
            }
        }
    }
    let (r_star, bk) = best.expect("collection is nonempty");
    let per_pair = (0..h.len())
        .map(|c| {
            let (value, k) = per[&c];
            PairValue { honest: h.candidates()[c].clone(), channel: 0, value, maximizer_v: h.select(masks[k]) }
        })
        .collect();
    Ok(RegionReport {
        r_star,
        per_pair,
        maximizer_v: h.select(masks[bk]),
        maximizer_q: results[bk].q.clone(),
    })
}

/// Closed-form `R*` for threshold collections with `t ∈ {1, 2, m-1}`.
pub fn closed_form_t(p: &JointPmf, t: usize) -> Result<f64> {
    let m = p.m();
    let h = p.joint_entropy();
    let rest = |used: u64| SubsetView::from_mask(((1u64 << m) - 1) & !used);
    if t == 0 {
        return Ok(h);
    }
    if t + 1 == m {
        return Ok((0..m).map(|i| p.entropy(&SubsetView::singleton(i))).sum());
    }
    match t {
        1 => {
            let mut best: f64 = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    let (a, b) = (SubsetView::singleton(i), SubsetView::singleton(j));
                    let c = rest(a.mask() | b.mask());
                    best = best.max(p.conditional_mutual_information(&a, &b, &c)?);
                }
            }
            Ok(h + best)
        }
        2 => {
            let pairs: Vec<u64> = (0u64..1 << m).filter(|x| x.count_ones() == 2).collect();
            let mut best: f64 = 0.0;
            for &a in &pairs {
                for &b in &pairs {
                    if a < b && a & b == 0 {
                        let v = p.conditional_mutual_information(
                            &SubsetView::from_mask(a),
                            &SubsetView::from_mask(b),
                            &rest(a | b),
                        )?;
                        best = best.max(v);
                    }
                }
            }
            for i in 0..m {
                for j in i + 1..m {
                    for k in j + 1..m {
                        let used = (1 << i) | (1 << j) | (1 << k);
                        let v = p.three_way_information(
                            &SubsetView::singleton(i),
                            &SubsetView::singleton(j),
                            &SubsetView::singleton(k),
                            &rest(used),
                        )?;
                        best = best.max(v);
                    }
                }
            }
            Ok(h + best)
        }
        _ => Err(Error::Precondition(format!("no closed form for t={t} at m={m}"))),
    }
}
