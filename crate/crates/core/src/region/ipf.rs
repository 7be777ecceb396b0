//! Max-entropy fitting under marginal constraints.

use crate::error::{Error, Result};
use crate::prob::{projection_map, JointPmf, SubsetView};

pub const IPF_TOL: f64 = 1e-10;
pub const IPF_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntropy {
    pub q: JointPmf,
    /// `H_q(X_U)` where `U` is the union of the constraint sets.
    pub value: f64,
    pub sweeps: usize,
    pub residual: f64,
}

/// Union of the sets in `v`.
pub fn union_of(v: &[SubsetView]) -> SubsetView {
    SubsetView::from_mask(v.iter().fold(0, |acc, s| acc | s.mask()))
}

/// Maximizes `H_q(X_U)` subject to `q(x_S) = p(x_S)` for every `S ∈ v`.
///
/// Iterative proportional fitting from the uniform law; every update is a
/// product of marginal ratios, so the result has the product form of the
/// max-entropy solution and stays uniform outside `U`.
pub fn max_entropy_with_marginals(p: &JointPmf, v: &[SubsetView]) -> Result<MaxEntropy> {
    if v.is_empty() || v.iter().any(SubsetView::is_empty) {
        return Err(Error::Precondition("constraint family must hold nonempty sets".into()));
    }
    if v.iter().any(|s| s.indices().last().is_some_and(|&i| i >= p.m())) {
        return Err(Error::Precondition("constraint set out of range".into()));
    }
    let sizes = p.sizes().to_vec();
    let targets: Vec<(Vec<usize>, Vec<f64>)> =
        v.iter().map(|s| (projection_map(&sizes, s), p.marginal_vec(s))).collect();
    let mut q = vec![1.0 / p.cells() as f64; p.cells()];

    let marg = |q: &[f64], map: &[usize], len: usize| {
        let mut out = vec![0.0; len];
        for (cell, &x) in q.iter().enumerate() {
            out[map[cell]] += x;
        }
        out
    };
    let residual = |q: &[f64]| {
        targets
            .iter()
            .map(|(map, t)| {
                marg(q, map, t.len())
                    .iter()
                    .zip(t)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };

    let mut res = residual(&q);
    let mut sweeps = 0;
    while res > IPF_TOL {
        if sweeps >= IPF_MAX_SWEEPS {
            return Err(Error::NonConvergence { iterations: sweeps, residual: res });
        }
        for (map, t) in &targets {
            let cur = marg(&q, map, t.len());
            for (cell, x) in q.iter_mut().enumerate() {
                let k = map[cell];
                *x = if cur[k] > 0.0 { *x * t[k] / cur[k] } else { 0.0 };
            }
        }
        sweeps += 1;
        res = residual(&q);
    }
    let q = JointPmf::from_raw(sizes, q);
    let value = q.entropy(&union_of(v));
    Ok(MaxEntropy { q, value, sweeps, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(ix: &[usize]) -> SubsetView {
        SubsetView::new(ix.to_vec(), 8).unwrap()
    }

    fn law3() -> JointPmf {
        JointPmf::from_weights(vec![2, 2, 2], vec![0.2, 0.05, 0.1, 0.15, 0.04, 0.16, 0.07, 0.23])
            .unwrap()
    }

    #[test]
    fn chain_family_factorizes() {
        let p = law3();
        let out = max_entropy_with_marginals(&p, &[s(&[0, 1]), s(&[1, 2])]).unwrap();
        let p12 = p.marginal_vec(&s(&[0, 1]));
        let p23 = p.marginal_vec(&s(&[1, 2]));
        let p2 = p.marginal_vec(&s(&[1]));
        for cell in 0..8 {
            let (x1, x2, x3) = (cell >> 2, (cell >> 1) & 1, cell & 1);
            let want = p12[x1 * 2 + x2] * p23[x2 * 2 + x3] / p2[x2];
            assert!((out.q.prob(cell) - want).abs() < 1e-9);
        }
        let h = p.joint_entropy()
            + p.conditional_mutual_information(&s(&[0]), &s(&[2]), &s(&[1])).unwrap();
        assert!((out.value - h).abs() < 1e-9);
    }

    #[test]
    fn full_constraint_returns_p() {
        let p = law3();
        let out = max_entropy_with_marginals(&p, &[SubsetView::full(3)]).unwrap();
        for cell in 0..8 {
            assert!((out.q.prob(cell) - p.prob(cell)).abs() < 1e-12);
        }
        assert!((out.value - p.joint_entropy()).abs() < 1e-12);
    }

    #[test]
    fn uniform_outside_union() {
        let p = law3();
        let out = max_entropy_with_marginals(&p, &[s(&[0])]).unwrap();
        let rows = out.q.conditional_rows(&s(&[1, 2]), &s(&[0]));
        for row in rows {
            assert!(row.iter().all(|&v| (v - 0.25).abs() < 1e-12));
        }
        assert!((out.value - p.entropy(&s(&[0]))).abs() < 1e-12);
    }

    #[test]
    fn zero_cells_stay_zero() {
        let p = JointPmf::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let out = max_entropy_with_marginals(&p, &[s(&[0, 1])]).unwrap();
        assert_eq!(out.q.prob(1), 0.0);
        assert_eq!(out.q.prob(2), 0.0);
    }

    #[test]
    fn rejects_empty_family() {
        assert!(max_entropy_with_marginals(&law3(), &[]).is_err());
    }
}
