//! Finite-alphabet probability tables and method-of-types utilities.
//!
//! Joint symbols are stored row-major: for alphabet sizes `[k0, k1, .., k(m-1)]`
//! the cell of `(x0, .., x(m-1))` is `((x0 * k1 + x1) * k2 + x2) ..`. The last
//! coordinate varies fastest, so enumerating cells in index order is the same
//! as enumerating symbol tuples lexicographically.
//!
//! All entropies are in bits and use `0 log 0 = 0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum == 1` for user supplied tables.
pub const SUM_TOL: f64 = 1e-12;

/// `x log2 x` with the continuous extension at zero.
#[inline]
pub fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Entropy in bits of an (unnormalized-safe) probability vector.
pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| xlog2x(p)).sum::<f64>()
}

/// Binary entropy function.
pub fn h2(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

/// A sorted set of sensor indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetView(Vec<usize>);

impl SubsetView {
    /// Builds a subset of `{0, .., m-1}`. Indices must be strictly increasing.
    pub fn new(indices: Vec<usize>, m: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition(format!(
                "subset indices must be strictly increasing: {indices:?}"
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= m {
                return Err(Error::Precondition(format!("index {last} out of range for m={m}")));
            }
        }
        Ok(SubsetView(indices))
    }

    /// Sorts and dedups before validating.
    pub fn from_unsorted(mut indices: Vec<usize>, m: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, m)
    }

    pub fn full(m: usize) -> Self {
        SubsetView((0..m).collect())
    }

    pub fn empty() -> Self {
        SubsetView(Vec::new())
    }

    pub fn singleton(i: usize) -> Self {
        SubsetView(vec![i])
    }

    pub fn from_mask(mask: u64) -> Self {
        SubsetView((0..64).filter(|i| mask >> i & 1 == 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |acc, &i| acc | 1 << i)
    }

    pub fn union(&self, other: &SubsetView) -> SubsetView {
        SubsetView::from_mask(self.mask() | other.mask())
    }

    pub fn intersection(&self, other: &SubsetView) -> SubsetView {
        SubsetView::from_mask(self.mask() & other.mask())
    }

    pub fn difference(&self, other: &SubsetView) -> SubsetView {
        SubsetView::from_mask(self.mask() & !other.mask())
    }

    pub fn complement(&self, m: usize) -> SubsetView {
        SubsetView::full(m).difference(self)
    }

    pub fn is_disjoint(&self, other: &SubsetView) -> bool {
        self.mask() & other.mask() == 0
    }

    pub fn is_subset_of(&self, other: &SubsetView) -> bool {
        self.mask() & !other.mask() == 0
    }
}

impl fmt::Display for SubsetView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Number of joint cells for the given alphabet sizes.
pub fn cell_count(sizes: &[usize]) -> usize {
    sizes.iter().product()
}

/// Row-major strides (last coordinate has stride 1).
pub fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![1; sizes.len()];
    for k in (0..sizes.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * sizes[k + 1];
    }
    out
}

/// For every full cell, the index of its projection onto `subset`.
pub fn projection_map(sizes: &[usize], subset: &SubsetView) -> Vec<usize> {
    let full = strides(sizes);
    let sub_sizes: Vec<usize> = subset.indices().iter().map(|&i| sizes[i]).collect();
    let sub = strides(&sub_sizes);
    (0..cell_count(sizes))
        .map(|cell| {
            subset
                .indices()
                .iter()
                .zip(&sub)
                .map(|(&i, &st)| (cell / full[i] % sizes[i]) * st)
                .sum()
        })
        .collect()
}

/// Exact joint probability table over an m-fold product alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    sizes: Vec<usize>,
    mass: Vec<f64>,
}

impl JointPmf {
    pub fn new(sizes: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() || sizes.iter().any(|&k| k == 0) {
            return Err(Error::InvalidDistribution(format!("bad alphabet sizes {sizes:?}")));
        }
        if mass.len() != cell_count(&sizes) {
            return Err(Error::InvalidDistribution(format!(
                "table has {} cells, alphabet needs {}",
                mass.len(),
                cell_count(&sizes)
            )));
        }
        if let Some(bad) = mass.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("negative or non-finite entry {bad}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(JointPmf { sizes, mass })
    }

    /// Normalizes a nonnegative weight table.
    pub fn from_weights(sizes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        let mass = weights.iter().map(|w| w / total).collect();
        Self::new(sizes, mass)
    }

    pub(crate) fn from_raw(sizes: Vec<usize>, mass: Vec<f64>) -> Self {
        debug_assert_eq!(mass.len(), cell_count(&sizes));
        JointPmf { sizes, mass }
    }

    pub fn uniform(sizes: Vec<usize>) -> Self {
        let cells = cell_count(&sizes);
        JointPmf { sizes, mass: vec![1.0 / cells as f64; cells] }
    }

    pub fn point_mass(sizes: Vec<usize>, cell: usize) -> Self {
        let mut mass = vec![0.0; cell_count(&sizes)];
        mass[cell] = 1.0;
        JointPmf { sizes, mass }
    }

    /// Product of independent one-dimensional marginals.
    pub fn product(marginals: &[Vec<f64>]) -> Result<Self> {
        let sizes: Vec<usize> = marginals.iter().map(Vec::len).collect();
        let st = strides(&sizes);
        let mass = (0..cell_count(&sizes))
            .map(|cell| {
                marginals
                    .iter()
                    .enumerate()
                    .map(|(i, row)| row[cell / st[i] % sizes[i]])
                    .product()
            })
            .collect();
        Self::new(sizes, mass)
    }

    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn cells(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, cell: usize) -> f64 {
        self.mass[cell]
    }

    pub fn index_of(&self, symbols: &[usize]) -> usize {
        symbols.iter().zip(&self.sizes).fold(0, |acc, (&x, &k)| acc * k + x)
    }

    pub fn symbols_of(&self, cell: usize) -> Vec<usize> {
        let st = strides(&self.sizes);
        st.iter().zip(&self.sizes).map(|(&s, &k)| cell / s % k).collect()
    }

    /// Alphabet size of the coordinates in `s`.
    pub fn alphabet_size(&self, s: &SubsetView) -> usize {
        s.indices().iter().map(|&i| self.sizes[i]).product()
    }

    pub fn sub_sizes(&self, s: &SubsetView) -> Vec<usize> {
        s.indices().iter().map(|&i| self.sizes[i]).collect()
    }

    fn check_subset(&self, s: &SubsetView) -> Result<()> {
        match s.indices().last() {
            Some(&i) if i >= self.m() => Err(Error::Precondition(format!(
                "subset {s} out of range for m={}",
                self.m()
            ))),
            _ => Ok(()),
        }
    }

    /// Marginal probability vector on `s` (row-major over `s`'s coordinates).
    pub fn marginal_vec(&self, s: &SubsetView) -> Vec<f64> {
        let map = projection_map(&self.sizes, s);
        let mut out = vec![0.0; self.alphabet_size(s)];
        for (cell, &p) in self.mass.iter().enumerate() {
            out[map[cell]] += p;
        }
        out
    }

    /// Exact marginal on a nonempty subset.
    pub fn marginal(&self, s: &SubsetView) -> Result<JointPmf> {
        if s.is_empty() {
            return Err(Error::Precondition("marginal over the empty subset".into()));
        }
        self.check_subset(s)?;
        Ok(JointPmf::from_raw(self.sub_sizes(s), self.marginal_vec(s)))
    }

    /// `H(X_s)`; zero for the empty subset.
    pub fn entropy(&self, s: &SubsetView) -> f64 {
        if s.is_empty() {
            return 0.0;
        }
        entropy_of(&self.marginal_vec(s))
    }

    /// `H(X_M)`.
    pub fn joint_entropy(&self) -> f64 {
        entropy_of(&self.mass)
    }

    /// `H(X_target | X_given)`; the two subsets must be disjoint.
    pub fn conditional_entropy(&self, target: &SubsetView, given: &SubsetView) -> Result<f64> {
        if !target.is_disjoint(given) {
            return Err(Error::Precondition(format!("{target} and {given} overlap")));
        }
        self.check_subset(target)?;
        self.check_subset(given)?;
        Ok(clamp_tiny(self.entropy(&target.union(given)) - self.entropy(given)))
    }

    /// `I(X_a ; X_b | X_c)` for pairwise disjoint subsets.
    pub fn conditional_mutual_information(
        &self,
        a: &SubsetView,
        b: &SubsetView,
        c: &SubsetView,
    ) -> Result<f64> {
        pairwise_disjoint(&[a, b, c])?;
        let ha = self.conditional_entropy(a, c)?;
        let hb = self.conditional_entropy(b, c)?;
        let hab = self.conditional_entropy(&a.union(b), c)?;
        Ok(clamp_tiny(ha + hb - hab))
    }

    /// Three-way form `I(X;Y;Z|W) = H(X|W)+H(Y|W)+H(Z|W)-H(XYZ|W)`.
    pub fn three_way_information(
        &self,
        a: &SubsetView,
        b: &SubsetView,
        c: &SubsetView,
        w: &SubsetView,
    ) -> Result<f64> {
        pairwise_disjoint(&[a, b, c, w])?;
        let abc = a.union(b).union(c);
        Ok(self.conditional_entropy(a, w)? + self.conditional_entropy(b, w)?
            + self.conditional_entropy(c, w)?
            - self.conditional_entropy(&abc, w)?)
    }

    /// Conditional distribution `p(x_rest | x_given)` laid out as rows over
    /// the given coordinates; rows with zero probability are uniform.
    pub fn conditional_rows(&self, target: &SubsetView, given: &SubsetView) -> Vec<Vec<f64>> {
        let ga = self.alphabet_size(given);
        let ta = self.alphabet_size(target);
        let gmap = projection_map(&self.sizes, given);
        let tmap = projection_map(&self.sizes, target);
        let mut rows = vec![vec![0.0; ta]; ga];
        for (cell, &p) in self.mass.iter().enumerate() {
            rows[gmap[cell]][tmap[cell]] += p;
        }
        for row in &mut rows {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / ta as f64);
            }
        }
        rows
    }
}

fn clamp_tiny(v: f64) -> f64 {
    if v < 0.0 && v > -1e-12 {
        0.0
    } else {
        v
    }
}

fn pairwise_disjoint(sets: &[&SubsetView]) -> Result<()> {
    for (k, a) in sets.iter().enumerate() {
        for b in &sets[k + 1..] {
            if !a.is_disjoint(b) {
                return Err(Error::Precondition(format!("{a} and {b} overlap")));
            }
        }
    }
    Ok(())
}

/// Integer count table with denominator `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalType {
    sizes: Vec<usize>,
    counts: Vec<u64>,
    n: u64,
}

impl EmpiricalType {
    pub fn from_counts(sizes: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != cell_count(&sizes) {
            return Err(Error::AlphabetMismatch("count table size".into()));
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::Precondition("type with zero denominator".into()));
        }
        Ok(EmpiricalType { sizes, counts, n })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn freq(&self, cell: usize) -> f64 {
        self.counts[cell] as f64 / self.n as f64
    }

    pub fn to_pmf(&self) -> JointPmf {
        let n = self.n as f64;
        JointPmf::from_raw(self.sizes.clone(), self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

/// Joint type of the given per-sensor sequences.
pub fn type_of(sequences: &[&[u8]], sizes: &[usize]) -> Result<EmpiricalType> {
    if sequences.len() != sizes.len() || sequences.is_empty() {
        return Err(Error::AlphabetMismatch(format!(
            "{} sequences for {} alphabets",
            sequences.len(),
            sizes.len()
        )));
    }
    let n = sequences[0].len();
    if n == 0 || sequences.iter().any(|s| s.len() != n) {
        return Err(Error::Precondition("sequences must share a positive length".into()));
    }
    let mut counts = vec![0u64; cell_count(sizes)];
    for t in 0..n {
        let mut cell = 0usize;
        for (seq, &k) in sequences.iter().zip(sizes) {
            let x = seq[t] as usize;
            if x >= k {
                return Err(Error::AlphabetMismatch(format!("symbol {x} >= alphabet size {k}")));
            }
            cell = cell * k + x;
        }
        counts[cell] += 1;
    }
    EmpiricalType::from_counts(sizes.to_vec(), counts)
}

/// `t/n ∈ B_η(q)`: every cell within `η / |alphabet|` of `q`.
pub fn eta_ball_contains(q: &JointPmf, t: &EmpiricalType, eta: f64) -> bool {
    if q.sizes() != t.sizes() {
        return false;
    }
    let radius = eta / q.cells() as f64 + 1e-12;
    (0..q.cells()).all(|cell| (q.prob(cell) - t.freq(cell)).abs() <= radius)
}

/// Strong typicality `x^n ∈ T_ε^n`, i.e. `t(x^n) ∈ B_ε(p)`.
pub fn strongly_typical(sequences: &[&[u8]], p: &JointPmf, eps: f64) -> Result<bool> {
    let t = type_of(sequences, p.sizes())?;
    Ok(eta_ball_contains(p, &t, eps))
}

/// A channel `r(w | x)` with one probability row per joint input symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPmf {
    input_sizes: Vec<usize>,
    output_size: usize,
    rows: Vec<f64>,
}

impl ConditionalPmf {
    pub fn new(input_sizes: Vec<usize>, output_size: usize, rows: Vec<f64>) -> Result<Self> {
        if output_size == 0 || rows.len() != cell_count(&input_sizes) * output_size {
            return Err(Error::InvalidDistribution("channel table has the wrong shape".into()));
        }
        for (k, row) in rows.chunks(output_size).enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidDistribution(format!("row {k} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidDistribution(format!("row {k} sums to {total}")));
            }
        }
        Ok(ConditionalPmf { input_sizes, output_size, rows })
    }

    /// Perfect information: `W` is the joint input symbol itself.
    pub fn identity(input_sizes: Vec<usize>) -> Self {
        let cells = cell_count(&input_sizes);
        let mut rows = vec![0.0; cells * cells];
        for c in 0..cells {
            rows[c * cells + c] = 1.0;
        }
        ConditionalPmf { input_sizes, output_size: cells, rows }
    }

    /// `W` independent of the input.
    pub fn constant(input_sizes: Vec<usize>, dist: &[f64]) -> Result<Self> {
        let cells = cell_count(&input_sizes);
        let rows = (0..cells).flat_map(|_| dist.iter().copied()).collect();
        Self::new(input_sizes, dist.len(), rows)
    }

    /// `W = X_s` (a deterministic copy of some coordinates).
    pub fn copy_of(input_sizes: Vec<usize>, s: &SubsetView) -> Self {
        let map = projection_map(&input_sizes, s);
        let out: usize = s.indices().iter().map(|&i| input_sizes[i]).product();
        let cells = cell_count(&input_sizes);
        let mut rows = vec![0.0; cells * out];
        for c in 0..cells {
            rows[c * out + map[c]] = 1.0;
        }
        ConditionalPmf { input_sizes, output_size: out, rows }
    }

    pub fn input_sizes(&self) -> &[usize] {
        &self.input_sizes
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn input_cells(&self) -> usize {
        cell_count(&self.input_sizes)
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.rows[input * self.output_size..(input + 1) * self.output_size]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// True when every row is a point mass at its own input index.
    pub fn is_identity(&self) -> bool {
        let cells = self.input_cells();
        self.output_size == cells
            && (0..cells).all(|c| (0..cells).all(|w| self.row(c)[w] == if w == c { 1.0 } else { 0.0 }))
    }
}

/// `r̃(w|x_h)` together with the rows that were conditioned on a
/// zero-probability event (those are set to uniform).
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalChannel {
    pub channel: ConditionalPmf,
    pub degenerate_rows: Vec<usize>,
}

/// `r̃(w|x_h) = Σ_{x_{h^c}} p(x_{h^c}|x_h) r(w|x_h x_{h^c})`.
pub fn marginalize_info_channel(
    r: &ConditionalPmf,
    p: &JointPmf,
    h: &SubsetView,
) -> Result<MarginalChannel> {
    if h.is_empty() {
        return Err(Error::Precondition("honest set must be nonempty".into()));
    }
    if r.input_sizes() != p.sizes() {
        return Err(Error::AlphabetMismatch("channel inputs differ from source alphabets".into()));
    }
    let hmap = projection_map(p.sizes(), h);
    let ha = p.alphabet_size(h);
    let wa = r.output_size();
    let mut rows = vec![0.0; ha * wa];
    let mut weight = vec![0.0; ha];
    for cell in 0..p.cells() {
        let px = p.prob(cell);
        if px == 0.0 {
            continue;
        }
        let xh = hmap[cell];
        weight[xh] += px;
        for (w, &rw) in r.row(cell).iter().enumerate() {
            rows[xh * wa + w] += px * rw;
        }
    }
    let mut degenerate_rows = Vec::new();
    for xh in 0..ha {
        let row = &mut rows[xh * wa..(xh + 1) * wa];
        if weight[xh] > 0.0 {
            row.iter_mut().for_each(|v| *v /= weight[xh]);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / wa as f64);
            degenerate_rows.push(xh);
        }
    }
    Ok(MarginalChannel {
        channel: ConditionalPmf { input_sizes: p.sub_sizes(h), output_size: wa, rows },
        degenerate_rows,
    })
}

/// `H(X_a | W)` under `p(x) r(w|x)`.
pub fn entropy_given_side_info(p: &JointPmf, r: &ConditionalPmf, a: &SubsetView) -> f64 {
    let amap = projection_map(p.sizes(), a);
    let aa = p.alphabet_size(a);
    let wa = r.output_size();
    let mut joint = vec![0.0; aa * wa];
    let mut wm = vec![0.0; wa];
    for cell in 0..p.cells() {
        let px = p.prob(cell);
        if px == 0.0 {
            continue;
        }
        for (w, &rw) in r.row(cell).iter().enumerate() {
            joint[amap[cell] * wa + w] += px * rw;
            wm[w] += px * rw;
        }
    }
    clamp_tiny(entropy_of(&joint) - entropy_of(&wm))
}
