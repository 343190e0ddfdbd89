//! Probability measures on subsets of `[n]`, stored as dense tables over the
//! `2^n` bitmasks.
//!
//! Besides validation and the generating polynomial this module decides the
//! covering order between measures (a transportation problem solved by
//! max-flow), checks the stochastic covering property by brute force, and
//! builds the strong Rayleigh families used as fixtures: uniform `k`-subsets,
//! projection DPPs and uniform spanning trees.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::flow;
use crate::matrix::SymMatrix;
use crate::{Error, Mask, Result};

/// Largest ground set a dense table may index.
pub const MAX_N: usize = 20;
/// Default ground-set limit for [`scp_check`].
pub const SCP_LIMIT: usize = 14;
/// Tolerance on total mass.
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance on coupling marginals and max-flow feasibility.
pub const COUPLING_TOL: f64 = 1e-10;
/// Tolerance for `K² = K` in [`make_projection_dpp`].
pub const PROJECTION_TOL: f64 = 1e-8;

/// A probability distribution on `{0,1}^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetMeasure {
    n: usize,
    probs: Vec<f64>,
}

impl SubsetMeasure {
    /// Wraps a table of length `2^n` and validates it.
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::StateSpaceTooLarge { n, limit: MAX_N });
        }
        if probs.len() != 1usize << n {
            return Err(Error::DimMismatch { left: 1usize << n, right: probs.len() });
        }
        let m = Self { n, probs };
        m.validate()?;
        Ok(m)
    }

    /// Builds a measure from sparse `(mask, p)` entries; missing masks are zero
    /// and repeated masks accumulate.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (Mask, f64)>) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::StateSpaceTooLarge { n, limit: MAX_N });
        }
        let mut probs = vec![0.0; 1usize << n];
        for (mask, p) in entries {
            if mask >> n != 0 {
                return Err(Error::NotOnCube { n });
            }
            probs[mask as usize] += p;
        }
        Self::new(n, probs)
    }

    /// Normalizes nonnegative weights to a probability table.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !total.is_finite() {
            return Err(Error::NonFinite);
        }
        if total <= 0.0 {
            return Err(Error::EmptySupport);
        }
        Self::new(n, weights.into_iter().map(|w| w / total).collect())
    }

    /// Checks nonnegativity, normalization and a nonempty support.
    pub fn validate(&self) -> Result<()> {
        if let Some((mask, &value)) = self.probs.iter().enumerate().find(|(_, p)| **p < 0.0 || !p.is_finite()) {
            if !value.is_finite() {
                return Err(Error::NonFinite);
            }
            return Err(Error::NegativeMass { mask: mask as Mask, value });
        }
        let total: f64 = self.probs.iter().sum();
        if total == 0.0 {
            return Err(Error::EmptySupport);
        }
        let deviation = total - 1.0;
        if deviation.abs() > MASS_TOL {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: Mask) -> f64 {
        self.probs.get(mask as usize).copied().unwrap_or(0.0)
    }

    /// Masks with positive mass, ascending.
    pub fn support(&self) -> Vec<Mask> {
        self.weighted_support().into_iter().map(|(m, _)| m).collect()
    }

    /// `(mask, mass)` over the support, ascending by mask.
    pub fn weighted_support(&self) -> Vec<(Mask, f64)> {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(m, &p)| (m as Mask, p)).collect()
    }

    /// `g(z) = Σ_S μ(S) Π_{i∈S} z_i`.
    pub fn generating_polynomial(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.n {
            return Err(Error::DimMismatch { left: self.n, right: z.len() });
        }
        Ok(self.weighted_support().into_iter().map(|(mask, p)| p * bits(mask).map(|i| z[i]).product::<f64>()).sum())
    }

    /// `Some(k)` when every support set has exactly `k` elements.
    pub fn homogeneity_degree(&self) -> Option<usize> {
        let mut sizes = self.support().into_iter().map(|m| m.count_ones() as usize);
        let k = sizes.next()?;
        sizes.all(|s| s == k).then_some(k)
    }

    /// `E[X_i]`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.weighted_support().into_iter().filter(|(m, _)| m >> i & 1 == 1).map(|(_, p)| p).sum()
    }

    /// Conditions on `X_S = assignment` and returns the law of the remaining
    /// coordinates, relabelled to `0..n−|S|` in increasing order.
    pub fn condition(&self, coords: Mask, assignment: Mask) -> Result<SubsetMeasure> {
        let full = full_mask(self.n);
        if coords & !full != 0 || assignment & !coords != 0 {
            return Err(Error::NotOnCube { n: self.n });
        }
        let rest = full & !coords;
        let m = rest.count_ones() as usize;
        let mut table = vec![0.0; 1usize << m];
        for (mask, p) in self.weighted_support() {
            if mask & coords == assignment {
                table[compress(mask, rest) as usize] += p;
            }
        }
        let total: f64 = table.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMassEvent);
        }
        table.iter_mut().for_each(|p| *p /= total);
        Ok(SubsetMeasure { n: m, probs: table })
    }
}

/// Validates `m`; see [`SubsetMeasure::validate`].
pub fn validate(m: &SubsetMeasure) -> Result<()> {
    m.validate()
}

pub(crate) fn full_mask(n: usize) -> Mask {
    if n >= 64 {
        Mask::MAX
    } else {
        (1 << n) - 1
    }
}

/// Indices of set bits, ascending.
pub fn bits(mut mask: Mask) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            return None;
        }
        let i = mask.trailing_zeros() as usize;
        mask &= mask - 1;
        Some(i)
    })
}

/// Packs the bits of `mask` selected by `keep` into the low bits.
pub fn compress(mask: Mask, keep: Mask) -> Mask {
    bits(keep).enumerate().fold(0, |acc, (j, i)| acc | ((mask >> i & 1) << j))
}

/// Inverse of [`compress`]: spreads low bits onto the positions of `keep`.
pub fn expand(packed: Mask, keep: Mask) -> Mask {
    bits(keep).enumerate().fold(0, |acc, (j, i)| acc | ((packed >> j & 1) << i))
}

/// The covering relation `x ▷ y`: `x = y` or `x = y + e_i`.
pub fn covers(x: Mask, y: Mask) -> bool {
    x == y || (y & !x == 0 && (x ^ y).count_ones() == 1)
}

/// An ordered pair `(x, y)` with `x ▷ y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CoveringPair {
    x: Mask,
    y: Mask,
}

impl CoveringPair {
    pub fn new(x: Mask, y: Mask) -> Option<Self> {
        covers(x, y).then_some(Self { x, y })
    }

    pub fn x(&self) -> Mask {
        self.x
    }

    pub fn y(&self) -> Mask {
        self.y
    }

    /// The raised coordinate, if the pair is not the diagonal.
    pub fn raised(&self) -> Option<usize> {
        (self.x != self.y).then(|| (self.x ^ self.y).trailing_zeros() as usize)
    }
}

/// A joint law on `rows × cols` with prescribed marginals, stored sparsely as
/// `(row index, col index, mass)` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTable {
    pub rows: Vec<Mask>,
    pub cols: Vec<Mask>,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CouplingTable {
    /// Mass at `(x, y)`, zero outside the stored support.
    pub fn mass(&self, x: Mask, y: Mask) -> f64 {
        self.entries.iter().filter(|&&(r, c, _)| self.rows[r] == x && self.cols[c] == y).map(|e| e.2).sum()
    }

    /// `(x, y, mass)` triples with positive mass.
    pub fn iter(&self) -> impl Iterator<Item = (Mask, Mask, f64)> + '_ {
        self.entries.iter().map(|&(r, c, m)| (self.rows[r], self.cols[c], m))
    }

    /// Largest deviation of a row or column sum from its marginal.
    pub fn marginal_deviation(&self) -> f64 {
        let mut rs = vec![0.0; self.rows.len()];
        let mut cs = vec![0.0; self.cols.len()];
        for &(r, c, m) in &self.entries {
            rs[r] += m;
            cs[c] += m;
        }
        let dr = rs.iter().zip(&self.row_marginal).map(|(a, b)| (a - b).abs());
        let dc = cs.iter().zip(&self.col_marginal).map(|(a, b)| (a - b).abs());
        dr.chain(dc).fold(0.0, f64::max)
    }

    /// Checks the marginal and support invariants.
    pub fn check(&self, support: impl Fn(Mask, Mask) -> bool) -> Result<()> {
        if let Some((x, y, m)) = self.iter().find(|&(x, y, m)| m < 0.0 || !support(x, y)) {
            return Err(Error::PreconditionViolated(format!(
                "coupling puts mass {m:e} on ({x:#x}, {y:#x}) outside its support"
            )));
        }
        let dev = self.marginal_deviation();
        if dev > COUPLING_TOL {
            return Err(Error::PreconditionViolated(format!("coupling marginals off by {dev:e}")));
        }
        Ok(())
    }

    /// The same coupling seen from the column side.
    pub fn transpose(&self) -> CouplingTable {
        CouplingTable {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
            entries: self.entries.iter().map(|&(r, c, m)| (c, r, m)).collect(),
        }
    }

    /// Product coupling of the two marginals.
    pub fn independent(rows: &[(Mask, f64)], cols: &[(Mask, f64)]) -> CouplingTable {
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(r, &(_, p))| cols.iter().enumerate().map(move |(c, &(_, q))| (r, c, p * q)))
            .filter(|e| e.2 > 0.0)
            .collect();
        CouplingTable {
            rows: rows.iter().map(|e| e.0).collect(),
            cols: cols.iter().map(|e| e.0).collect(),
            row_marginal: rows.iter().map(|e| e.1).collect(),
            col_marginal: cols.iter().map(|e| e.1).collect(),
            entries,
        }
    }
}

/// Solves for a coupling of `rows` and `cols` that only uses the admissible
/// edges produced by `candidates(x) -> [(y, capacity)]`. On failure returns
/// the unrouted mass.
pub(crate) fn solve_coupling(
    rows: &[(Mask, f64)],
    cols: &[(Mask, f64)],
    candidates: impl Fn(Mask) -> Vec<(Mask, f64)>,
) -> std::result::Result<CouplingTable, f64> {
    let col_index: HashMap<Mask, usize> = cols.iter().enumerate().map(|(i, c)| (c.0, i)).collect();
    let mut edges = Vec::new();
    for (r, &(x, _)) in rows.iter().enumerate() {
        for (y, cap) in candidates(x) {
            if let Some(&c) = col_index.get(&y) {
                if cap > 0.0 {
                    edges.push((r, c, cap));
                }
            }
        }
    }
    let supply: Vec<f64> = rows.iter().map(|e| e.1).collect();
    let demand: Vec<f64> = cols.iter().map(|e| e.1).collect();
    let total: f64 = supply.iter().sum();
    let solved = flow::transport(&supply, &demand, &edges);
    let deficit = total - solved.routed;
    if deficit > COUPLING_TOL {
        return Err(deficit);
    }
    let entries = edges.iter().zip(&solved.flows).filter(|(_, &f)| f > 0.0).map(|(&(r, c, _), &f)| (r, c, f)).collect();
    Ok(CouplingTable {
        rows: rows.iter().map(|e| e.0).collect(),
        cols: cols.iter().map(|e| e.0).collect(),
        row_marginal: supply,
        col_marginal: demand,
        entries,
    })
}

fn covered_by(x: Mask) -> Vec<(Mask, f64)> {
    std::iter::once(x).chain(bits(x).map(|i| x & !(1 << i))).map(|y| (y, f64::INFINITY)).collect()
}

/// A coupling of `p` and `q` supported on covering pairs `x ▷ y`, if any.
pub fn measure_covers(p: &SubsetMeasure, q: &SubsetMeasure) -> Option<CouplingTable> {
    if p.n() != q.n() {
        return None;
    }
    solve_coupling(&p.weighted_support(), &q.weighted_support(), covered_by).ok()
}

/// A failing instance of the stochastic covering property:
/// `x ▷ y` on the coordinates `coords`, yet `π(·|X_S = y)` does not cover
/// `π(·|X_S = x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScpWitness {
    pub coords: Mask,
    pub x: Mask,
    pub y: Mask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScpOutcome {
    pub holds: bool,
    pub witness: Option<ScpWitness>,
}

/// Brute-force check of the stochastic covering property with the default
/// size limit.
pub fn scp_check(m: &SubsetMeasure) -> Result<ScpOutcome> {
    scp_check_with_limit(m, SCP_LIMIT)
}

pub fn scp_check_with_limit(m: &SubsetMeasure, limit: usize) -> Result<ScpOutcome> {
    let n = m.n();
    if n > limit {
        return Err(Error::StateSpaceTooLarge { n, limit });
    }
    let full = full_mask(n);
    let support = m.weighted_support();
    for coords in 0..=full {
        // Conditional laws for every assignment on `coords`, over the free bits.
        let mut groups: HashMap<Mask, Vec<(Mask, f64)>> = HashMap::new();
        for &(mask, p) in &support {
            groups.entry(mask & coords).or_default().push((mask & !coords, p));
        }
        for v in groups.values_mut() {
            let total: f64 = v.iter().map(|e| e.1).sum();
            v.iter_mut().for_each(|e| e.1 /= total);
        }
        let mut assignments: Vec<Mask> = groups.keys().copied().collect();
        assignments.sort_unstable();
        for &y in &assignments {
            for i in bits(coords & !y) {
                let x = y | (1 << i);
                let Some(cond_x) = groups.get(&x) else { continue };
                if solve_coupling(&groups[&y], cond_x, covered_by).is_err() {
                    return Ok(ScpOutcome { holds: false, witness: Some(ScpWitness { coords, x, y }) });
                }
            }
        }
    }
    Ok(ScpOutcome { holds: true, witness: None })
}

/// Uniform measure on the `k`-subsets of `[n]`.
pub fn make_uniform_k_subsets(n: usize, k: usize) -> Result<SubsetMeasure> {
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds n = {n}")));
    }
    if n > MAX_N {
        return Err(Error::StateSpaceTooLarge { n, limit: MAX_N });
    }
    let weights = (0..=full_mask(n)).map(|m| if m.count_ones() as usize == k { 1.0 } else { 0.0 }).collect();
    SubsetMeasure::from_weights(n, weights)
}

/// Product of independent Bernoulli(`p_i`) coordinates.
pub fn make_bernoulli_product(ps: &[f64]) -> Result<SubsetMeasure> {
    let n = ps.len();
    if n > MAX_N {
        return Err(Error::StateSpaceTooLarge { n, limit: MAX_N });
    }
    if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("Bernoulli parameter outside [0, 1]".into()));
    }
    let probs = (0..=full_mask(n))
        .map(|m| (0..n).map(|i| if m >> i & 1 == 1 { ps[i] } else { 1.0 - ps[i] }).product())
        .collect();
    SubsetMeasure::from_weights(n, probs)
}

/// Determinantal measure of a symmetric projection kernel:
/// `μ(S) = det(K_S)` for `|S| = rank K`.
pub fn make_projection_dpp(kernel: &SymMatrix) -> Result<SubsetMeasure> {
    let n = kernel.dim();
    if n > MAX_N {
        return Err(Error::StateSpaceTooLarge { n, limit: MAX_N });
    }
    let k = kernel.as_matrix();
    let residual = (k * k - k).amax();
    if residual > PROJECTION_TOL {
        return Err(Error::NotAProjection { residual });
    }
    let rank = kernel.trace().round() as usize;
    let weights = (0..=full_mask(n))
        .map(|m| {
            if m.count_ones() as usize != rank {
                return 0.0;
            }
            let idx: Vec<usize> = bits(m).collect();
            let minor = DMatrix::from_fn(rank, rank, |a, b| k[(idx[a], idx[b])]);
            minor.determinant().max(0.0)
        })
        .collect();
    SubsetMeasure::from_weights(n, weights)
}

/// A simple undirected multigraph on `0..vertices`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= vertices || v >= vertices) {
            return Err(Error::InvalidArgument(format!("edge ({u}, {v}) leaves the vertex set")));
        }
        Ok(Self { vertices, edges })
    }

    pub fn complete(vertices: usize) -> Self {
        let edges = (0..vertices).flat_map(|u| (u + 1..vertices).map(move |v| (u, v))).collect();
        Self { vertices, edges }
    }

    pub fn cycle(vertices: usize) -> Self {
        let edges = (0..vertices).map(|u| (u, (u + 1) % vertices)).collect();
        Self { vertices, edges }
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices == 0 {
            return false;
        }
        let mut uf = UnionFind::new(self.vertices);
        self.edges.iter().for_each(|&(u, v)| {
            uf.union(u, v);
        });
        uf.components() == 1
    }

    /// Whether the edge subset `mask` is a spanning tree.
    pub fn is_spanning_tree(&self, mask: Mask) -> bool {
        if mask.count_ones() as usize + 1 != self.vertices {
            return false;
        }
        let mut uf = UnionFind::new(self.vertices);
        bits(mask).all(|e| {
            let (u, v) = self.edges[e];
            uf.union(u, v)
        })
    }
}

/// Disjoint sets with path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    sets: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), sets: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        self.sets -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.sets
    }
}

/// Uniform measure on spanning trees, ground set = edge indices.
pub fn make_spanning_tree_measure(graph: &Graph) -> Result<SubsetMeasure> {
    let n = graph.edges.len();
    if n > MAX_N {
        return Err(Error::StateSpaceTooLarge { n, limit: MAX_N });
    }
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let weights = (0..=full_mask(n)).map(|m| if graph.is_spanning_tree(m) { 1.0 } else { 0.0 }).collect();
    SubsetMeasure::from_weights(n, weights)
}

/// Uniform measure on every subset of `[n]`.
pub fn make_uniform_cube(n: usize) -> Result<SubsetMeasure> {
    make_bernoulli_product(&vec![0.5; n])
}
