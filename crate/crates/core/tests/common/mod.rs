//! Property checkers shared by the property tests and the acceptance run.

use std::collections::HashMap;

use byzsw::adversary::Strategy as Attack;
use byzsw::binning::{enumerate_sequences, BinningCodebook};
use byzsw::fr::{FixedDecoder, FixedRateCode, Message};
use byzsw::harness::three_sensor_law;
use byzsw::prob::{eta_ball_contains, EmpiricalType, JointPmf, SubsetView};
use byzsw::region::{
    fixed_rate_region_contains, max_entropy_with_marginals, r_star_perfect, FixedKind, HonestCollection, InfoModel,
};
use byzsw::scenario::Scenario;
use byzsw::source::{derive_rng, sample_block};
use byzsw::vr::{decode_phase, run_session, update_v, ProtocolParams};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;

pub const CASES: u32 = 1000;

fn runner() -> TestRunner {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S, F>(strategy: S, test: F) -> Result<(), String>
where
    S: Strategy,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

fn law(m: usize) -> impl Strategy<Value = JointPmf> {
    prop::collection::vec(0.02f64..1.0, 1 << m)
        .prop_map(move |w| JointPmf::from_weights(vec![2; m], w).expect("positive weights"))
}

fn law_any_m() -> impl Strategy<Value = JointPmf> {
    (2usize..=4).prop_flat_map(law)
}

/// `H(X_S)` by direct summation over the cells of `p`.
pub fn entropy_oracle(p: &JointPmf, mask: u64) -> f64 {
    let mut marg: HashMap<Vec<usize>, f64> = HashMap::new();
    for cell in 0..p.cells() {
        let key: Vec<usize> =
            p.symbols_of(cell).into_iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x).collect();
        *marg.entry(key).or_insert(0.0) += p.prob(cell);
    }
    marg.values().filter(|&&q| q > 0.0).map(|&q| -q * q.log2()).sum()
}

/// `H(X_B | X_A)` as `-Σ p(a, b) log p(a, b) / p(a)`.
fn conditional_oracle(p: &JointPmf, a: u64, b: u64) -> f64 {
    let key = |cell: usize, mask: u64| -> Vec<usize> {
        p.symbols_of(cell).into_iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x).collect()
    };
    let mut pa: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut pab: HashMap<(Vec<usize>, Vec<usize>), f64> = HashMap::new();
    for cell in 0..p.cells() {
        *pa.entry(key(cell, a)).or_insert(0.0) += p.prob(cell);
        *pab.entry((key(cell, a), key(cell, b))).or_insert(0.0) += p.prob(cell);
    }
    pab.iter().filter(|(_, &q)| q > 0.0).map(|((ka, _), &q)| -q * (q / pa[ka]).log2()).sum()
}

pub fn entropy_chain_rule() -> Result<(), String> {
    let cases = law_any_m().prop_flat_map(|p| {
        let full = (1u64 << p.m()) - 1;
        (Just(p), 1..=full, 1..=full)
    });
    check(cases, |(p, a, b)| {
        let sa = SubsetView::from_mask(a);
        let rest = SubsetView::from_mask(b & !a);
        let joint = p.entropy(&sa.union(&rest));
        prop_assert!((joint - entropy_oracle(&p, a | b)).abs() <= 1e-9);
        let cond = if rest.is_empty() {
            0.0
        } else {
            p.conditional_entropy(&rest, &sa).map_err(|e| TestCaseError::fail(e.to_string()))?
        };
        prop_assert!((joint - (p.entropy(&sa) + cond)).abs() <= 1e-9);
        prop_assert!((cond - conditional_oracle(&p, a, b)).abs() <= 1e-9);
        if !rest.is_empty() {
            let cmi = p
                .conditional_mutual_information(&sa, &rest, &SubsetView::empty())
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(cmi >= -1e-9);
        }
        Ok(())
    })
}

pub fn eta_ball_monotone() -> Result<(), String> {
    let cases = law_any_m().prop_flat_map(|q| {
        let cells = q.cells();
        (Just(q), prop::collection::vec(0u64..6, cells), 0.0f64..3.0, 0.0f64..3.0)
    });
    check(cases, |(q, mut counts, eta, extra)| {
        if counts.iter().all(|&c| c == 0) {
            counts[0] = 1;
        }
        let t = EmpiricalType::from_counts(q.sizes().to_vec(), counts).expect("counts");
        if eta_ball_contains(&q, &t, eta) {
            prop_assert!(eta_ball_contains(&q, &t, eta + extra));
        }
        Ok(())
    })
}

pub fn v_monotone() -> Result<(), String> {
    let p = three_sensor_law();
    let h = HonestCollection::threshold(3, 1).expect("collection");
    let info = InfoModel::perfect(&h, p.sizes());
    let cases = (any::<u64>(), 1u64..16, prop::collection::vec(0u8..10, 3), 0.35f64..4.0, 0.0f64..3.0);
    check(cases, |(seed, vmask, noise, eta, extra)| {
        let block = sample_block(&p, 12, seed).expect("block");
        let mut rng = derive_rng(seed, "noise", 0);
        let estimates: Vec<Option<Vec<u8>>> = (0..3)
            .map(|i| match noise[i] {
                0 => None,
                k => Some(block.row(i).iter().map(|&x| if rng.gen_range(0..12) < k / 3 { 1 - x } else { x }).collect()),
            })
            .collect();
        let v: Vec<usize> = (0..4).filter(|k| vmask >> k & 1 == 1).collect();
        let small = update_v(&v, &estimates, &p, &h, &info, eta).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let large =
            update_v(&v, &estimates, &p, &h, &info, eta + extra).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(small.kept.iter().all(|k| v.contains(k)));
        prop_assert!(large.kept.iter().all(|k| v.contains(k)));
        if !small.failure {
            prop_assert!(small.kept.iter().all(|k| large.kept.contains(k)));
        }
        Ok(())
    })
}

pub fn phase_termination() -> Result<(), String> {
    let cases = (2usize..=3, 4usize..=8, 0.2f64..1.2, any::<u64>(), any::<u64>());
    check(cases, |(alphabet, n, eps, seed, xseed)| {
        let book = BinningCodebook::new(0, n, alphabet, eps, eps + 0.5, 4, seed).expect("codebook");
        prop_assert!(book.blocks() as f64 * eps >= (alphabet as f64).log2() - 1e-12);
        let space = enumerate_sequences(alphabet, n, 22.0).expect("space");
        let x = space[(xseed % space.len() as u64) as usize].clone();
        let c = (xseed % 4) as usize;
        let out = decode_phase(&book, c, &[], &space, |b| book.encode_block(&x, c, b))
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(out.transactions >= 1 && out.transactions <= book.blocks());
        prop_assert!(out.estimate.is_some());
        prop_assert_eq!(out.chain.len(), out.transactions);
        Ok(())
    })
}

fn pair_scenario(attacked: bool) -> Scenario {
    let p = JointPmf::new(vec![2, 2], vec![0.45, 0.05, 0.05, 0.45]).expect("law");
    let (h, h_true, strategy) = if attacked {
        (HonestCollection::threshold(2, 1).expect("collection"), SubsetView::singleton(0), Attack::BlackHole)
    } else {
        (HonestCollection::no_traitors(2), SubsetView::full(2), Attack::HonestPassthrough)
    };
    let info = InfoModel::perfect(&h, p.sizes());
    Scenario::new(p, h, info, h_true, 0, strategy).expect("scenario")
}

pub fn rate_accounting() -> Result<(), String> {
    let scenarios = [pair_scenario(false), pair_scenario(true)];
    let cases = (any::<u64>(), any::<bool>(), 4usize..=8, 1usize..=4);
    check(cases, |(seed, attacked, n, rounds)| {
        let s = &scenarios[usize::from(attacked)];
        let params = ProtocolParams { n, rounds, c: Some(8), ..ProtocolParams::default() };
        let rep = run_session(s, &params, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let book = BinningCodebook::new(0, n, 2, params.eps, params.nu, 8, 0).expect("codebook");
        let mut total = 0.0;
        for rec in &rep.transcript {
            prop_assert_eq!(rec.bits, (book.bin_count(rec.j - 1) as f64).log2());
            total += rec.bits;
        }
        let per_round: f64 = rep.rounds.iter().map(|r| r.bits).sum();
        prop_assert!((rep.sum_rate * (n * rounds) as f64 - total).abs() <= 1e-9);
        prop_assert!((per_round - total).abs() <= 1e-9);
        Ok(())
    })
}

pub fn randomized_c1_matches_deterministic() -> Result<(), String> {
    let p = three_sensor_law();
    let h = HonestCollection::threshold(3, 1).expect("collection");
    let cases = (prop::collection::vec(0.3f64..1.0, 3), any::<u64>(), any::<u64>());
    check(cases, |(rates, seed, bseed)| {
        let code = |kind| FixedRateCode {
            rates: rates.clone(),
            n: 8,
            kind,
            c_count: 1,
            seed,
            eps: 1.5,
            plurality: false,
            guard_bits: 22.0,
        };
        let det = FixedDecoder::new(&code(FixedKind::Deterministic), &p, &h).expect("decoder");
        let ran = FixedDecoder::new(&code(FixedKind::Randomized), &p, &h).expect("decoder");
        let block = sample_block(&p, 8, bseed).expect("block");
        let m_det: Vec<Message> = (0..3).map(|i| det.encode(i, block.row(i), 0)).collect();
        let m_ran: Vec<Message> = (0..3).map(|i| ran.encode(i, block.row(i), 0)).collect();
        prop_assert_eq!(&m_det, &m_ran);
        let a = det.decode_all(&m_det).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = ran.decode_all(&m_ran).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn ipf_marginals() -> Result<(), String> {
    let cases = law_any_m().prop_flat_map(|p| {
        let full = (1u64 << p.m()) - 1;
        (Just(p), prop::collection::vec(1..=full, 1..=3))
    });
    check(cases, |(p, masks)| {
        let v: Vec<SubsetView> = masks.iter().map(|&k| SubsetView::from_mask(k)).collect();
        let fit = max_entropy_with_marginals(&p, &v).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for s in &v {
            for (a, b) in fit.q.marginal_vec(s).iter().zip(p.marginal_vec(s)) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
        }
        let u = masks.iter().fold(0, |acc, k| acc | k);
        prop_assert!(fit.value >= entropy_oracle(&p, u) - 1e-9);
        Ok(())
    })
}

pub fn r_star_monotone() -> Result<(), String> {
    let cases = (law(3), prop::collection::btree_set(1u64..8, 1..=4), prop::collection::btree_set(1u64..8, 1..=3));
    check(cases, |(p, base, more)| {
        let small: Vec<SubsetView> = base.iter().map(|&k| SubsetView::from_mask(k)).collect();
        let mut big = small.clone();
        big.extend(more.difference(&base).map(|&k| SubsetView::from_mask(k)));
        let a = r_star_perfect(&p, &HonestCollection::new(3, small).expect("collection")).expect("region");
        let b = r_star_perfect(&p, &HonestCollection::new(3, big).expect("collection")).expect("region");
        prop_assert!(a.r_star <= b.r_star + 1e-9);
        Ok(())
    })
}

pub fn deterministic_inside_randomized() -> Result<(), String> {
    let h = HonestCollection::threshold(3, 1).expect("collection");
    let cases = (law(3), prop::collection::vec(0.0f64..1.2, 3));
    check(cases, |(p, rates)| {
        let info = InfoModel::perfect(&h, p.sizes());
        let det = fixed_rate_region_contains(&rates, &p, &h, &info, FixedKind::Deterministic).expect("region");
        let ran = fixed_rate_region_contains(&rates, &p, &h, &info, FixedKind::Randomized).expect("region");
        prop_assert!(!det || ran);
        Ok(())
    })
}

/// Every checker with its name.
#[allow(dead_code)]
pub fn all() -> Vec<(&'static str, fn() -> Result<(), String>)> {
    vec![
        ("entropy chain rule", entropy_chain_rule),
        ("eta-ball monotonicity", eta_ball_monotone),
        ("V monotonicity", v_monotone),
        ("phase termination", phase_termination),
        ("rate accounting", rate_accounting),
        ("randomized C=1 equals deterministic", randomized_c1_matches_deterministic),
        ("IPF marginals", ipf_marginals),
        ("R* monotone in the collection", r_star_monotone),
        ("deterministic region inside randomized", deterministic_inside_randomized),
    ]
}
