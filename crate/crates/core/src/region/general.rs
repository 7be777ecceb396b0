//! `R*(H, r)` for imperfect traitor information.
//!
//! For every irreducible family `V` and every choice of `r' ∈ R(S)` per
//! member, the feasible laws are parameterized by stacked stochastic
//! matrices `(q̄_H, q̄_S, ..)` tied together by `q = A_H q̄_H = A_S q̄_S`.
//! That is a polytope; `H_q(X_U)` is concave in `q̄_H`, so projected
//! gradient ascent (projection by Dykstra's method) from several starts
//! finds the maximum. The winner is re-checked with [`q_set_feasible`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::prob::{entropy_of, projection_map, ConditionalPmf, JointPmf, SubsetView};
use crate::source::derive_rng;

use super::feasibility::{Feasibility, Lifted};
use super::{q_set_feasible, r_star_perfect_with, union_of, HonestCollection, InfoModel, MAX_COLLECTION};

/// Largest joint source alphabet accepted by the numerical path.
pub const MAX_JOINT_ALPHABET: usize = 256;
const MAX_CHANNEL_CHOICES: usize = 64;
const MAX_STACKED: usize = 2048;

#[derive(Debug, Clone, Copy)]
pub struct GeneralOptions {
    pub starts: usize,
    pub seed: u64,
    pub exec: Execution,
    /// Run the numerical path even under full information.
    pub force_numeric: bool,
    pub max_steps: usize,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions { starts: 16, seed: 0, exec: Execution::default(), force_numeric: false, max_steps: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralReport {
    pub value: f64,
    pub maximizer_v: Vec<SubsetView>,
    pub maximizer_q: JointPmf,
    /// `q̄_H(x_{H^c} | w)` achieving the value, row-major over `w`.
    pub qbar: Vec<f64>,
    /// Worst certification residual of the winning point.
    pub residual: f64,
    /// True when the value came from the exact full-information path.
    pub exact: bool,
}

/// Projected-gradient solver for one `(V, r')` instance.
struct Instance {
    lifted: Vec<Lifted>,
    offsets: Vec<usize>,
    dim: usize,
    g_pinv: DMatrix<f64>,
    g: DMatrix<f64>,
    b: DVector<f64>,
    umap: Vec<usize>,
    ucells: usize,
}

impl Instance {
    fn new(p: &JointPmf, sets: &[(SubsetView, ConditionalPmf)], u: &SubsetView) -> Result<Self> {
        let full = SubsetView::full(p.m());
        let lifted: Vec<Lifted> = sets.iter().map(|(s, r)| Lifted::new(p, s, r, &full)).collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(lifted.len());
        let mut dim = 0;
        for l in &lifted {
            offsets.push(dim);
            dim += l.w * l.y;
        }
        if dim > MAX_STACKED {
            return Err(Error::Guard { what: "stacked q̄ variables", bits: (dim as f64).log2(), limit: 11 });
        }
        let cells = p.cells();
        let rows = cells * (lifted.len() - 1) + lifted.iter().map(|l| l.w).sum::<usize>();
        let mut g = DMatrix::<f64>::zeros(rows, dim);
        let mut b = DVector::<f64>::zeros(rows);
        let mut row = 0;
        for k in 1..lifted.len() {
            for c in 0..cells {
                for j in 0..lifted[0].a.ncols() {
                    g[(row, j)] = lifted[0].a[(c, j)];
                }
                for j in 0..lifted[k].a.ncols() {
                    g[(row, offsets[k] + j)] = -lifted[k].a[(c, j)];
                }
                row += 1;
            }
        }
        for (k, l) in lifted.iter().enumerate() {
            for wi in 0..l.w {
                for yi in 0..l.y {
                    g[(row, offsets[k] + wi * l.y + yi)] = 1.0;
                }
                b[row] = 1.0;
                row += 1;
            }
        }
        let g_pinv = g
            .clone()
            .pseudo_inverse(1e-10)
            .map_err(|e| Error::Precondition(format!("pseudo-inverse failed: {e}")))?;
        let umap = projection_map(p.sizes(), u);
        let ucells = p.alphabet_size(u);
        Ok(Instance { lifted, offsets, dim, g_pinv, g, b, umap, ucells })
    }

    fn honest(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim);
        for (k, l) in self.lifted.iter().enumerate() {
            x.rows_mut(self.offsets[k], l.w * l.y).copy_from(&l.honest);
        }
        x
    }

    fn head(&self, x: &DVector<f64>) -> DVector<f64> {
        let l = &self.lifted[0];
        x.rows(0, l.w * l.y).into_owned()
    }

    fn q_u(&self, x: &DVector<f64>) -> Vec<f64> {
        let q = self.lifted[0].joint(&self.head(x));
        let mut out = vec![0.0; self.ucells];
        for (c, v) in q.into_iter().enumerate() {
            out[self.umap[c]] += v;
        }
        out
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        entropy_of(&self.q_u(x))
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let qu = self.q_u(x);
        let dq: Vec<f64> = qu.iter().map(|&v| -(v.max(1e-300).log2() + std::f64::consts::LOG2_E)).collect();
        let l = &self.lifted[0];
        let mut grad = DVector::zeros(self.dim);
        for (c, &(xs, yi)) in l.cell_parts.iter().enumerate() {
            let d = dq[self.umap[c]];
            for wi in 0..l.w {
                grad[wi * l.y + yi] += l.mix[xs * l.w + wi] * d;
            }
        }
        grad
    }

    fn project_affine(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.g_pinv * (&self.g * x - &self.b)
    }

    /// Dykstra projection onto `{G x = b, x ≥ 0}`; returns the nonnegative iterate.
    fn project(&self, x0: &DVector<f64>) -> DVector<f64> {
        let mut y = x0.clone();
        let mut inc = DVector::zeros(self.dim);
        for _ in 0..5000 {
            let a = self.project_affine(&y);
            let shifted = &a + &inc;
            let nb = shifted.map(|v| v.max(0.0));
            inc = shifted - &nb;
            let gap = (&a - &nb).amax();
            y = nb;
            if gap < 1e-12 {
                break;
            }
        }
        y
    }

    fn violation(&self, x: &DVector<f64>) -> f64 {
        (&self.g * x - &self.b).amax()
    }

    fn ascend(&self, start: DVector<f64>, max_steps: usize) -> DVector<f64> {
        let mut x = self.project(&start);
        let mut f = self.value(&x);
        let mut step = 1.0;
        for _ in 0..max_steps {
            let grad = self.gradient(&x);
            let mut moved = false;
            while step > 1e-12 {
                let cand = self.project(&(&x + &grad * step));
                let fc = self.value(&cand);
                let lin = grad.dot(&(&cand - &x));
                if fc >= f + 1e-4 * lin && fc > f - 1e-15 {
                    moved = fc > f + 1e-13;
                    x = cand;
                    f = fc;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x
    }
}

fn irreducible_masks(h: &HonestCollection) -> Vec<u64> {
    let sets: Vec<u64> = h.candidates().iter().map(SubsetView::mask).collect();
    let union = |mask: u64| (0..sets.len()).filter(|k| mask >> k & 1 == 1).fold(0u64, |a, k| a | sets[k]);
    let mut masks: Vec<u64> = (1u64..1 << sets.len())
        .filter(|&mask| {
            (0..sets.len()).all(|k| mask >> k & 1 == 0 || union(mask & !(1 << k)) != union(mask))
        })
        .collect();
    masks.sort_by_key(|&mask| {
        let members: Vec<usize> = (0..sets.len()).filter(|k| mask >> k & 1 == 1).collect();
        (std::cmp::Reverse(union(mask).count_ones()), members)
    });
    masks
}

/// All ways to pick one channel index per member of `members`.
fn channel_choices(info: &InfoModel, members: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &k in members {
        let n = info.channels(k).len();
        out = out.into_iter().flat_map(|pre| (0..n).map(move |c| [pre.clone(), vec![c]].concat())).collect();
    }
    out
}

/// `R*(H_true, r)` over families in `h` with channel sets `info`.
pub fn r_star_general(
    p: &JointPmf,
    h: &HonestCollection,
    info: &InfoModel,
    h_true: &SubsetView,
    r: &ConditionalPmf,
    opts: GeneralOptions,
) -> Result<GeneralReport> {
    let pos = h
        .position(h_true)
        .ok_or_else(|| Error::Precondition(format!("{h_true} is not a candidate honest set")))?;
    if !info.channels(pos).contains(r) {
        return Err(Error::Precondition("r is not in the info model of the true honest set".into()));
    }
    if p.cells() > MAX_JOINT_ALPHABET {
        return Err(Error::Guard { what: "joint alphabet", bits: (p.cells() as f64).log2(), limit: 8 });
    }
    if h.len() > MAX_COLLECTION {
        return Err(Error::Guard { what: "collection subsets", bits: h.len() as f64, limit: MAX_COLLECTION as u32 });
    }

    if info.is_perfect() && !opts.force_numeric {
        let rep = r_star_perfect_with(p, h, opts.exec)?;
        let pair = &rep.per_pair[pos];
        let fit = super::max_entropy_with_marginals(p, &[pair.maximizer_v.clone(), vec![h_true.clone()]].concat())?;
        let qbar = full_information_qbar(&fit.q, h_true);
        return Ok(GeneralReport {
            value: pair.value,
            maximizer_v: pair.maximizer_v.clone(),
            maximizer_q: fit.q,
            qbar,
            residual: fit.residual,
            exact: true,
        });
    }

    let mut jobs: Vec<(Vec<SubsetView>, Vec<(SubsetView, ConditionalPmf)>)> = Vec::new();
    for mask in irreducible_masks(h) {
        let members: Vec<usize> = (0..h.len()).filter(|k| mask >> k & 1 == 1).collect();
        let choices = channel_choices(info, &members);
        if choices.len() > MAX_CHANNEL_CHOICES {
            return Err(Error::Guard { what: "channel choices", bits: (choices.len() as f64).log2(), limit: 6 });
        }
        for choice in choices {
            let mut sets = vec![(h_true.clone(), r.clone())];
            for (&k, &c) in members.iter().zip(&choice) {
                sets.push((h.candidates()[k].clone(), info.channels(k)[c].clone()));
            }
            jobs.push((h.select(mask), sets));
        }
    }

    let outcomes = par::map_indexed(opts.exec, jobs.len(), |j| solve_job(p, &jobs[j].0, &jobs[j].1, opts, j as u64));
    let mut best: Option<GeneralReport> = None;
    for out in outcomes {
        if let Some(rep) = out? {
            if best.as_ref().map_or(true, |b| rep.value > b.value + 1e-12) {
                best = Some(rep);
            }
        }
    }
    best.ok_or_else(|| Error::NonConvergence { iterations: 0, residual: f64::INFINITY })
}

fn solve_job(
    p: &JointPmf,
    v: &[SubsetView],
    sets: &[(SubsetView, ConditionalPmf)],
    opts: GeneralOptions,
    job: u64,
) -> Result<Option<GeneralReport>> {
    let u = union_of(v);
    let inst = Instance::new(p, sets, &u)?;
    let mut rng = derive_rng(opts.seed, "r-star-general", job);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for k in 0..opts.starts.max(1) {
        let start = if k == 0 {
            inst.honest()
        } else {
            DVector::from_iterator(inst.dim, (0..inst.dim).map(|_| rng.gen::<f64>()))
        };
        let x = inst.ascend(start, opts.max_steps);
        if inst.violation(&x) > 1e-6 {
            continue;
        }
        let f = inst.value(&x);
        if best.as_ref().map_or(true, |(b, _)| f > b + 1e-12) {
            best = Some((f, x));
        }
    }
    let Some((_, x)) = best else { return Ok(None) };

    // certify: q from the honest-side parameterization, then each member
    let head = inst.lifted[0].w * inst.lifted[0].y;
    let mut qbar: Vec<f64> = x.rows(0, head).iter().copied().collect();
    let y = inst.lifted[0].y;
    for row in qbar.chunks_mut(y) {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    let q = JointPmf::from_raw(p.sizes().to_vec(), inst.lifted[0].joint(&DVector::from_column_slice(&qbar)));
    let mut residual: f64 = 0.0;
    for (s, r) in &sets[1..] {
        let check = q_set_feasible(&q, s, r, p)?;
        if check.status != Feasibility::Feasible {
            return Ok(None);
        }
        residual = residual.max(check.residual);
    }
    Ok(Some(GeneralReport {
        value: q.entropy(&u),
        maximizer_v: v.to_vec(),
        maximizer_q: q,
        qbar,
        residual,
        exact: false,
    }))
}

/// Under full information `W` is the whole source tuple, so the traitors'
/// best law is `q(x_T | x_H)` regardless of the rest of `w`.
pub fn full_information_qbar(q: &JointPmf, h: &SubsetView) -> Vec<f64> {
    let t = h.complement(q.m());
    if t.is_empty() {
        return vec![1.0; q.cells()];
    }
    let rows = q.conditional_rows(&t, h);
    let hmap = projection_map(q.sizes(), h);
    (0..q.cells()).flat_map(|c| rows[hmap[c]].clone()).collect()
}
