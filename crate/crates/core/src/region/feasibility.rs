//! Membership in the traitor-simulable sets `Q_{S,r'}` and their η-balls.
//!
//! A law `q` is simulable by traitors outside `S` holding side information
//! through `r'` when `q(x) = p(x_S) Σ_w r̃'(w|x_S) q̄(x_{S^c}|w)` for some
//! stochastic matrix `q̄`. We stack `v = vec(q̄)` and a linear image
//! `z = A v` (either the full joint or a marginal of it) and look for a point
//! with `q̄` row-stochastic and `z` inside a box, by alternating projections
//! between `{z = A v}` and `{rows of q̄ on the simplex} × box`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{cell_count, marginalize_info_channel, projection_map, ConditionalPmf, JointPmf, SubsetView};

pub const FEASIBLE_TOL: f64 = 1e-7;
pub const INDETERMINATE_TOL: f64 = 1e-5;
const MAX_ITERS: usize = 20_000;
const STALL_WINDOW: usize = 500;
const MAX_VARIABLES: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    Indeterminate,
    Infeasible,
}

impl Feasibility {
    fn classify(residual: f64) -> Self {
        if residual < FEASIBLE_TOL {
            Feasibility::Feasible
        } else if residual <= INDETERMINATE_TOL {
            Feasibility::Indeterminate
        } else {
            Feasibility::Infeasible
        }
    }

    /// Feasible or undecided; used where a wrong rejection is the costly error.
    pub fn is_plausible(self) -> bool {
        self != Feasibility::Infeasible
    }
}

/// The linear map `q̄ ↦ z` for one `(S, r')` and one target marginal.
pub(crate) struct Lifted {
    pub w: usize,
    pub y: usize,
    pub a: DMatrix<f64>,
    /// `(I + A Aᵀ)^{-1}`.
    k: DMatrix<f64>,
    /// `q̄` rows built from the true conditional, used as the start point.
    pub honest: DVector<f64>,
    /// For each full cell: (`x_S` index, `y` index).
    pub cell_parts: Vec<(usize, usize)>,
    /// `M[x_S, w] = p(x_S) r̃'(w|x_S)`, row-major.
    pub mix: Vec<f64>,
}

impl Lifted {
    pub fn new(p: &JointPmf, s: &SubsetView, r: &ConditionalPmf, target: &SubsetView) -> Result<Self> {
        if r.input_sizes() != p.sizes() {
            return Err(Error::AlphabetMismatch("channel inputs differ from source alphabets".into()));
        }
        let sizes = p.sizes();
        let sc = s.complement(p.m());
        let xs_n = p.alphabet_size(s);
        let y = if sc.is_empty() { 1 } else { p.alphabet_size(&sc) };
        let w = r.output_size();
        if w * y > MAX_VARIABLES {
            return Err(Error::Guard { what: "feasibility variables", bits: ((w * y) as f64).log2(), limit: 14 });
        }
        let rt = marginalize_info_channel(r, p, s)?.channel;
        let ps = p.marginal_vec(s);
        let mut mix = Vec::with_capacity(xs_n * w);
        for (xs, &pv) in ps.iter().enumerate() {
            mix.extend(rt.row(xs).iter().map(|&v| v * pv));
        }

        let smap = projection_map(sizes, s);
        let ymap = if sc.is_empty() { vec![0; p.cells()] } else { projection_map(sizes, &sc) };
        let tmap = projection_map(sizes, target);
        let rows = cell_count(&p.sub_sizes(target));
        let cell_parts: Vec<(usize, usize)> = (0..p.cells()).map(|c| (smap[c], ymap[c])).collect();

        let mut a = DMatrix::<f64>::zeros(rows, w * y);
        for (c, &(xs, yi)) in cell_parts.iter().enumerate() {
            for wi in 0..w {
                a[(tmap[c], wi * y + yi)] += mix[xs * w + wi];
            }
        }
        let gram = DMatrix::<f64>::identity(rows, rows) + &a * a.transpose();
        let k = gram
            .try_inverse()
            .ok_or_else(|| Error::Precondition("singular projection system".into()))?;

        // honest q̄(y|w) = Σ_x p(x) r(w|x) [y(x)=y] / Σ_x p(x) r(w|x)
        let mut honest = DVector::<f64>::zeros(w * y);
        let mut wm = vec![0.0; w];
        for (c, &(_, yi)) in cell_parts.iter().enumerate() {
            let px = p.prob(c);
            for (wi, &rv) in r.row(c).iter().enumerate() {
                honest[wi * y + yi] += px * rv;
                wm[wi] += px * rv;
            }
        }
        for wi in 0..w {
            for yi in 0..y {
                honest[wi * y + yi] = if wm[wi] > 0.0 { honest[wi * y + yi] / wm[wi] } else { 1.0 / y as f64 };
            }
        }
        Ok(Lifted { w, y, a, k, honest, cell_parts, mix })
    }

    fn project_affine(&self, v0: &DVector<f64>, z0: &DVector<f64>) -> DVector<f64> {
        let b = v0 + self.a.transpose() * z0;
        let inner = &self.k * (&self.a * &b);
        b - self.a.transpose() * inner
    }

    pub fn project_rows(&self, v: &mut DVector<f64>) {
        for wi in 0..self.w {
            let row = &mut v.as_mut_slice()[wi * self.y..(wi + 1) * self.y];
            project_simplex(row);
        }
    }

    /// Full joint `q` induced by `q̄`.
    pub fn joint(&self, v: &DVector<f64>) -> Vec<f64> {
        self.cell_parts
            .iter()
            .map(|&(xs, yi)| (0..self.w).map(|wi| self.mix[xs * self.w + wi] * v[wi * self.y + yi]).sum())
            .collect()
    }

    /// Searches for row-stochastic `q̄` with `lo ≤ A vec(q̄) ≤ hi`.
    pub fn solve(&self, lo: &DVector<f64>, hi: &DVector<f64>) -> (Feasibility, f64, DVector<f64>) {
        let box_gap = |z: &DVector<f64>| {
            (0..z.len()).map(|k| (lo[k] - z[k]).max(z[k] - hi[k]).max(0.0)).fold(0.0, f64::max)
        };
        let mut v = self.honest.clone();
        self.project_rows(&mut v);
        let mut z = &self.a * &v;
        let mut residual = box_gap(&z);
        let mut best = (residual, v.clone());
        let mut window_start = residual;
        for it in 0..MAX_ITERS {
            if residual < FEASIBLE_TOL {
                break;
            }
            let zc = z.zip_zip_map(lo, hi, |x, l, h| x.clamp(l, h));
            let mut v1 = self.project_affine(&v, &zc);
            self.project_rows(&mut v1);
            v = v1;
            z = &self.a * &v;
            residual = box_gap(&z);
            if residual < best.0 {
                best = (residual, v.clone());
            }
            if (it + 1) % STALL_WINDOW == 0 {
                if best.0 > INDETERMINATE_TOL && window_start - best.0 < 1e-4 * window_start {
                    break;
                }
                window_start = best.0;
            }
        }
        (Feasibility::classify(best.0), best.0, best.1)
    }
}

/// Euclidean projection of `row` onto the probability simplex.
pub(crate) fn project_simplex(row: &mut [f64]) {
    let mut sorted: Vec<f64> = row.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    row.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityCheck {
    pub status: Feasibility,
    pub residual: f64,
}

/// Is `q ∈ Q_{S,r'}`?
pub fn q_set_feasible(q: &JointPmf, s: &SubsetView, r: &ConditionalPmf, p: &JointPmf) -> Result<FeasibilityCheck> {
    if q.sizes() != p.sizes() {
        return Err(Error::AlphabetMismatch("q and p alphabets differ".into()));
    }
    if r.is_identity() {
        // full information: only the marginal on S is pinned
        let gap = q
            .marginal_vec(s)
            .iter()
            .zip(p.marginal_vec(s))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        return Ok(FeasibilityCheck { status: Feasibility::classify(gap), residual: gap });
    }
    q_set_feasible_numeric(q, s, r, p)
}

/// The alternating-projection path, without the full-information shortcut.
pub fn q_set_feasible_numeric(
    q: &JointPmf,
    s: &SubsetView,
    r: &ConditionalPmf,
    p: &JointPmf,
) -> Result<FeasibilityCheck> {
    let lifted = Lifted::new(p, s, r, &SubsetView::full(p.m()))?;
    let t = DVector::from_column_slice(q.mass());
    let (status, residual, _) = lifted.solve(&t, &t);
    Ok(FeasibilityCheck { status, residual })
}

/// Is the type `t` (over `X_U`, coordinates of `u` in order) within the
/// η-ball of the `U`-marginal of some member of `Q_{S,r'}`?
///
/// The ball lives on the observed alphabet `X_U`, radius `η/|X_U|` per cell.
pub fn ball_feasible(
    t: &[f64],
    u: &SubsetView,
    s: &SubsetView,
    r: &ConditionalPmf,
    p: &JointPmf,
    eta: f64,
) -> Result<FeasibilityCheck> {
    if !s.is_subset_of(u) {
        return Err(Error::Precondition(format!("{s} is not inside {u}")));
    }
    if t.len() != p.alphabet_size(u) {
        return Err(Error::AlphabetMismatch("type size differs from X_U".into()));
    }
    if r.is_identity() {
        let ok = perfect_ball_feasible(t, u, s, p, eta);
        let status = if ok { Feasibility::Feasible } else { Feasibility::Infeasible };
        return Ok(FeasibilityCheck { status, residual: if ok { 0.0 } else { f64::INFINITY } });
    }
    let lifted = Lifted::new(p, s, r, u)?;
    let delta = eta / t.len() as f64;
    let lo = DVector::from_iterator(t.len(), t.iter().map(|&x| x - delta));
    let hi = DVector::from_iterator(t.len(), t.iter().map(|&x| x + delta));
    let (status, residual, _) = lifted.solve(&lo, &hi);
    Ok(FeasibilityCheck { status, residual })
}

/// Full-information case of [`ball_feasible`] in closed form: the only
/// restriction is `q(x_S) = p(x_S)`, and each `x_S` slice of the box can be
/// filled independently, so membership is an interval test per `x_S`.
pub fn perfect_ball_feasible(t: &[f64], u: &SubsetView, s: &SubsetView, p: &JointPmf, eta: f64) -> bool {
    let delta = eta / t.len() as f64 + 1e-12;
    let u_sizes = p.sub_sizes(u);
    let pos: Vec<usize> = s.indices().iter().map(|i| u.indices().iter().position(|j| j == i).unwrap()).collect();
    let pos = SubsetView::new(pos, u.len()).expect("positions of a sorted subset are sorted");
    let map = projection_map(&u_sizes, &pos);
    let ps = p.marginal_vec(s);
    let mut lo = vec![0.0; ps.len()];
    let mut hi = vec![0.0; ps.len()];
    for (cell, &x) in t.iter().enumerate() {
        lo[map[cell]] += (x - delta).max(0.0);
        hi[map[cell]] += x + delta;
    }
    ps.iter().zip(lo.iter().zip(&hi)).all(|(&v, (&l, &h))| l <= v + 1e-12 && v <= h + 1e-12)
}
