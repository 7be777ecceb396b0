use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy_given_side_info, JointPmf, SubsetView};

use super::{HonestCollection, InfoModel};

/// Slack allowed on every Slepian–Wolf inequality.
pub const SW_SLACK: f64 = 1e-9;

/// Side-information entropy below which the traitors are taken to know a block.
pub const KNOWN_BLOCK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedKind {
    Deterministic,
    Randomized,
}

/// `rates|_S ∈ SW(X_S)`: every nonempty `S' ⊆ S` carries at least
/// `H(X_{S'} | X_{S \ S'})`.
pub fn sw_region_contains(rates: &[f64], p: &JointPmf, s: &SubsetView) -> Result<bool> {
    if rates.len() != p.m() {
        return Err(Error::Precondition("one rate per sensor required".into()));
    }
    if rates.iter().any(|&r| r < 0.0) {
        return Err(Error::Precondition("rates must be nonnegative".into()));
    }
    let sm = s.mask();
    let mut sub = sm;
    while sub != 0 {
        let part = SubsetView::from_mask(sub);
        let rest = SubsetView::from_mask(sm & !sub);
        let need = p.conditional_entropy(&part, &rest)?;
        let have: f64 = part.indices().iter().map(|&i| rates[i]).sum();
        if have < need - SW_SLACK {
            return Ok(false);
        }
        sub = (sub - 1) & sm;
    }
    Ok(true)
}

/// Pairs `(S1, S2)` whose intersection the traitors of some `r ∈ R(S2)`
/// know exactly; the deterministic region needs `R_{S1∩S2} ∈ SW`.
pub fn known_intersections(p: &JointPmf, h: &HonestCollection, info: &InfoModel) -> Vec<SubsetView> {
    let mut out: Vec<SubsetView> = Vec::new();
    for s1 in h.candidates() {
        for (k2, s2) in h.candidates().iter().enumerate() {
            let both = s1.intersection(s2);
            if both.is_empty() || out.contains(&both) {
                continue;
            }
            if info.channels(k2).iter().any(|r| entropy_given_side_info(p, r, &both) < KNOWN_BLOCK_TOL) {
                out.push(both);
            }
        }
    }
    out
}

/// Membership in the fixed-rate achievable region of the given kind.
pub fn fixed_rate_region_contains(
    rates: &[f64],
    p: &JointPmf,
    h: &HonestCollection,
    info: &InfoModel,
    kind: FixedKind,
) -> Result<bool> {
    for s in h.candidates() {
        if !sw_region_contains(rates, p, s)? {
            return Ok(false);
        }
    }
    if kind == FixedKind::Deterministic {
        for both in known_intersections(p, h, info) {
            if !sw_region_contains(rates, p, &both)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
