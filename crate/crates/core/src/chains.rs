//! Reversible Markov generators on subsets of the cube, projection and
//! restriction chains, coupling quality, and the recursive flip-swap walk
//! for measures with the stochastic covering property.
//!
//! Dirichlet forms everywhere use `E(F, F) = ½ Σ_{x,y} π(x) Q(x,y) (F(x) − F(y))²`.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use nalgebra::DMatrix;

use crate::measures::{bits, full_mask, solve_coupling, CouplingTable, SubsetMeasure};
use crate::{Error, Mask, Result};

/// Tolerance on row sums and detailed balance.
pub const GENERATOR_TOL: f64 = 1e-10;
/// Largest ground set accepted by [`hermon_salez`].
pub const WALK_LIMIT: usize = 12;

/// States with their probabilities.
type Weighted = Vec<(Mask, f64)>;

/// A reversible generator `Q` on the states `Ω` with stationary law `π`.
#[derive(Clone, Debug)]
pub struct Generator {
    n: usize,
    states: Vec<Mask>,
    index: HashMap<Mask, usize>,
    pi: Vec<f64>,
    rates: DMatrix<f64>,
}

/// Worst deviations found by [`validate_generator`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorDiagnostics {
    pub max_row_sum: f64,
    pub max_balance_deviation: f64,
}

impl Generator {
    /// Builds and validates a generator.
    pub fn new(n: usize, states: Vec<Mask>, pi: Vec<f64>, rates: DMatrix<f64>) -> Result<Self> {
        let g = Self::assemble(n, states, pi, rates)?;
        g.validate()?;
        Ok(g)
    }

    fn assemble(n: usize, states: Vec<Mask>, pi: Vec<f64>, rates: DMatrix<f64>) -> Result<Self> {
        let len = states.len();
        if pi.len() != len {
            return Err(Error::DimMismatch { left: len, right: pi.len() });
        }
        if rates.nrows() != len || rates.ncols() != len {
            return Err(Error::DimMismatch { left: len, right: rates.nrows() });
        }
        if states.iter().any(|&s| s & !full_mask(n) != 0) {
            return Err(Error::NotOnCube { n });
        }
        let index: HashMap<Mask, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        if index.len() != len {
            return Err(Error::InvalidArgument("duplicate state".into()));
        }
        Ok(Self { n, states, index, pi, rates })
    }

    /// Builds a generator from off-diagonal rates keyed by state masks; the
    /// diagonal is set so that rows sum to zero. Not validated.
    pub fn from_off_diagonal(
        n: usize,
        states: Vec<Mask>,
        pi: Vec<f64>,
        off: impl IntoIterator<Item = (Mask, Mask, f64)>,
    ) -> Result<Self> {
        let len = states.len();
        let mut g = Self::assemble(n, states, pi, DMatrix::zeros(len, len))?;
        for (x, y, r) in off {
            let (i, j) = (g.require(x)?, g.require(y)?);
            if i != j {
                g.rates[(i, j)] += r;
            }
        }
        g.fix_diagonal();
        Ok(g)
    }

    /// Two-state chain `0 → 1` at rate `a`, `1 → 0` at rate `b`, with
    /// `π = (b, a)/(a + b)`.
    pub fn two_state(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument("two-state rates must be positive".into()));
        }
        let rates = DMatrix::from_row_slice(2, 2, &[-a, a, b, -b]);
        Self::new(1, vec![0, 1], vec![b / (a + b), a / (a + b)], rates)
    }

    fn require(&self, x: Mask) -> Result<usize> {
        self.index.get(&x).copied().ok_or(Error::DomainMismatch)
    }

    fn fix_diagonal(&mut self) {
        for i in 0..self.len() {
            self.rates[(i, i)] = 0.0;
            let s: f64 = self.rates.row(i).sum();
            self.rates[(i, i)] = -s;
        }
    }

    /// Cube dimension of the state labels.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Mask] {
        &self.states
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn index_of(&self, x: Mask) -> Option<usize> {
        self.index.get(&x).copied()
    }

    /// `Q(x, y)` by state label, zero for unknown states.
    pub fn rate(&self, x: Mask, y: Mask) -> f64 {
        match (self.index_of(x), self.index_of(y)) {
            (Some(i), Some(j)) => self.rates[(i, j)],
            _ => 0.0,
        }
    }

    /// Off-diagonal `(i, j, Q(i,j))` with positive rate, by state index.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let len = self.len();
        (0..len)
            .flat_map(move |i| (0..len).map(move |j| (i, j)))
            .filter(move |&(i, j)| i != j && self.rates[(i, j)] > 0.0)
            .map(move |(i, j)| (i, j, self.rates[(i, j)]))
    }

    /// Checks nonnegative off-diagonals, zero row sums and detailed balance.
    pub fn validate(&self) -> Result<GeneratorDiagnostics> {
        let len = self.len();
        let scale = delta(self).max(1.0);
        let mut max_row_sum = 0.0_f64;
        let mut max_balance_deviation = 0.0_f64;
        for i in 0..len {
            for j in 0..len {
                let r = self.rates[(i, j)];
                if i != j && r < 0.0 {
                    return Err(Error::NegativeRate { x: self.states[i], y: self.states[j], rate: r });
                }
            }
            let s = self.rates.row(i).sum();
            max_row_sum = max_row_sum.max(s.abs());
            if s.abs() > GENERATOR_TOL * scale {
                return Err(Error::RowSumViolation { state: self.states[i], sum: s });
            }
        }
        for i in 0..len {
            for j in i + 1..len {
                let a = self.pi[i] * self.rates[(i, j)];
                let b = self.pi[j] * self.rates[(j, i)];
                let m = a.abs().max(b.abs());
                if m > 0.0 {
                    let dev = (a - b).abs() / m;
                    max_balance_deviation = max_balance_deviation.max(dev);
                    if dev > GENERATOR_TOL {
                        return Err(Error::DetailedBalanceViolation {
                            x: self.states[i],
                            y: self.states[j],
                            deviation: dev,
                        });
                    }
                }
            }
        }
        Ok(GeneratorDiagnostics { max_row_sum, max_balance_deviation })
    }

    /// `c · Q`.
    pub fn scaled(&self, c: f64) -> Generator {
        let mut g = self.clone();
        g.rates *= c;
        g
    }

    /// `Q / Δ(Q)`; the zero generator is returned unchanged.
    pub fn normalized(&self) -> Generator {
        let d = delta(self);
        if d > 0.0 {
            self.scaled(1.0 / d)
        } else {
            self.clone()
        }
    }

    /// `Σ w_ℓ Q^{(ℓ)}` over generators sharing states and stationary law.
    pub fn average(gens: &[Generator], weights: &[f64]) -> Result<Generator> {
        let first = gens.first().ok_or_else(|| Error::InvalidArgument("nothing to average".into()))?;
        if gens.len() != weights.len() {
            return Err(Error::DimMismatch { left: gens.len(), right: weights.len() });
        }
        let mut rates = DMatrix::zeros(first.len(), first.len());
        for (g, &w) in gens.iter().zip(weights) {
            if g.states != first.states {
                return Err(Error::DomainMismatch);
            }
            rates += &g.rates * w;
        }
        let mut out = first.clone();
        out.rates = rates;
        Ok(out)
    }
}

/// See [`Generator::validate`].
pub fn validate_generator(q: &Generator) -> Result<GeneratorDiagnostics> {
    q.validate()
}

/// `Δ(Q) = max_x −Q(x,x)`.
pub fn delta(q: &Generator) -> f64 {
    (0..q.len()).map(|i| -q.rates[(i, i)]).fold(0.0, f64::max)
}

/// `x ∼ y`: a flip (`x = y ± e_i`) or a swap (`y = x + e_j − e_k`, `j ≠ k`).
pub fn flip_swap_adjacent(x: Mask, y: Mask) -> bool {
    let diff = x ^ y;
    match diff.count_ones() {
        1 => true,
        2 => (x & diff).count_ones() == 1,
        _ => false,
    }
}

/// A partition of `Ω` with its projection chain, restriction chains and
/// couplings `κ_{ij}` between the restricted laws.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// Coordinate used for the split, when the partition came from one.
    pub coordinate: Option<usize>,
    pub parts: Vec<Vec<Mask>>,
    /// Generator on the part indices; its states are `0..parts.len()`.
    pub projection: Generator,
    pub restrictions: Vec<Generator>,
    pub couplings: BTreeMap<(usize, usize), CouplingTable>,
}

impl Decomposition {
    /// `π̂(i)`.
    pub fn part_mass(&self, i: usize) -> f64 {
        self.projection.pi[i]
    }

    /// `Q̂(i, j)`.
    pub fn projection_rate(&self, i: usize, j: usize) -> f64 {
        self.projection.rates[(i, j)]
    }
}

/// Projection and restriction chains of an arbitrary partition (no couplings).
pub fn decompose_partition(q: &Generator, parts: Vec<Vec<Mask>>) -> Result<Decomposition> {
    let mut owner = vec![usize::MAX; q.len()];
    for (p, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::EmptyPart { coordinate: p });
        }
        for &x in part {
            let i = q.require(x)?;
            if owner[i] != usize::MAX {
                return Err(Error::InvalidArgument("parts overlap".into()));
            }
            owner[i] = p;
        }
    }
    if owner.contains(&usize::MAX) {
        return Err(Error::InvalidArgument("parts do not cover the state space".into()));
    }
    let k = parts.len();
    let mut hat_pi = vec![0.0; k];
    for i in 0..q.len() {
        hat_pi[owner[i]] += q.pi[i];
    }
    let mut flux = DMatrix::<f64>::zeros(k, k);
    for (i, j, r) in q.edges() {
        flux[(owner[i], owner[j])] += q.pi[i] * r;
    }
    let mut hat_rates = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            if a != b {
                hat_rates[(a, b)] = flux[(a, b)] / hat_pi[a];
            }
        }
    }
    let label_bits = (usize::BITS - (k.max(2) - 1).leading_zeros()) as usize;
    let mut projection = Generator::assemble(label_bits, (0..k as Mask).collect(), hat_pi.clone(), hat_rates)?;
    projection.fix_diagonal();

    let restrictions = parts
        .iter()
        .zip(&hat_pi)
        .map(|(part, &mass)| {
            let idx: Vec<usize> = part.iter().map(|&x| q.index[&x]).collect();
            let pi = idx.iter().map(|&i| q.pi[i] / mass).collect();
            let off = idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j)));
            let off: Vec<(Mask, Mask, f64)> =
                off.filter(|(i, j)| i != j).map(|(i, j)| (q.states[i], q.states[j], q.rates[(i, j)])).collect();
            Generator::from_off_diagonal(q.n, part.clone(), pi, off)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Decomposition { coordinate: None, parts, projection, restrictions, couplings: BTreeMap::new() })
}

fn coordinate_parts(q: &Generator, coordinate: usize) -> Result<Vec<Vec<Mask>>> {
    if coordinate >= q.n {
        return Err(Error::InvalidArgument(format!("coordinate {coordinate} outside the cube")));
    }
    let (zero, one): (Vec<Mask>, Vec<Mask>) = q.states.iter().partition(|&&x| x >> coordinate & 1 == 0);
    if zero.is_empty() || one.is_empty() {
        return Err(Error::EmptyPart { coordinate });
    }
    Ok(vec![zero, one])
}

/// Splits `Ω` by the value of `coordinate` and attaches, for each ordered
/// pair of parts with positive projection rate, a coupling chosen to make χ
/// as large as possible.
pub fn decompose(q: &Generator, coordinate: usize) -> Result<Decomposition> {
    let mut dec = decompose_partition(q, coordinate_parts(q, coordinate)?)?;
    dec.coordinate = Some(coordinate);
    attach_best_couplings(q, &mut dec)?;
    Ok(dec)
}

/// Like [`decompose`] but uses the given coupling `κ` for `(0, 1)` and its
/// transpose for `(1, 0)`.
pub fn decompose_with_coupling(q: &Generator, coordinate: usize, kappa: CouplingTable) -> Result<Decomposition> {
    let mut dec = decompose_partition(q, coordinate_parts(q, coordinate)?)?;
    dec.coordinate = Some(coordinate);
    dec.couplings.insert((1, 0), kappa.transpose());
    dec.couplings.insert((0, 1), kappa);
    Ok(dec)
}

fn part_law(q: &Generator, dec: &Decomposition, part: usize) -> Vec<(Mask, f64)> {
    let mass = dec.part_mass(part);
    dec.parts[part].iter().map(|&x| (x, q.pi[q.index[&x]] / mass)).collect()
}

fn attach_best_couplings(q: &Generator, dec: &mut Decomposition) -> Result<()> {
    let k = dec.parts.len();
    for a in 0..k {
        for b in a + 1..k {
            let (ab, ba) = (dec.projection_rate(a, b), dec.projection_rate(b, a));
            if ab <= 0.0 && ba <= 0.0 {
                continue;
            }
            let kappa = best_coupling(q, dec, a, b);
            dec.couplings.insert((b, a), kappa.transpose());
            dec.couplings.insert((a, b), kappa);
        }
    }
    Ok(())
}

/// Coupling of `π_a` and `π_b` maximizing χ on the pair.
///
/// The flux coupling `π(x)Q(x,y) / (π̂(a)Q̂(a,b))` attains χ = 1 whenever it
/// has the right marginals. Otherwise χ is maximized by bisection on the
/// capacity-constrained transportation problem `κ ≤ π(x)Q(x,y)/(c π̂ Q̂)`,
/// falling back to the product coupling when the rate support admits none.
fn best_coupling(q: &Generator, dec: &Decomposition, a: usize, b: usize) -> CouplingTable {
    let rows = part_law(q, dec, a);
    let cols = part_law(q, dec, b);
    let denom = dec.part_mass(a) * dec.projection_rate(a, b);
    let flux = |x: Mask, c: f64| -> Vec<(Mask, f64)> {
        let i = q.index[&x];
        let pix = q.pi[i];
        dec.parts[b]
            .iter()
            .filter_map(|&y| {
                let r = q.rates[(i, q.index[&y])];
                (r > 0.0).then(|| (y, pix * r / (c * denom)))
            })
            .collect()
    };

    let flux_table = {
        let col_index: HashMap<Mask, usize> = cols.iter().enumerate().map(|(i, c)| (c.0, i)).collect();
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(r, &(x, _))| flux(x, 1.0).into_iter().map(move |(y, m)| (r, y, m)))
            .map(|(r, y, m)| (r, col_index[&y], m))
            .collect();
        CouplingTable {
            rows: rows.iter().map(|e| e.0).collect(),
            cols: cols.iter().map(|e| e.0).collect(),
            row_marginal: rows.iter().map(|e| e.1).collect(),
            col_marginal: cols.iter().map(|e| e.1).collect(),
            entries,
        }
    };
    if flux_table.marginal_deviation() <= crate::measures::COUPLING_TOL {
        return flux_table;
    }

    let support_only = |x: Mask| flux(x, 1.0).into_iter().map(|(y, _)| (y, f64::INFINITY)).collect();
    let Ok(mut best) = solve_coupling(&rows, &cols, support_only) else {
        return CouplingTable::independent(&rows, &cols);
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match solve_coupling(&rows, &cols, |x| flux(x, mid)) {
            Ok(t) => {
                lo = mid;
                best = t;
            }
            Err(_) => hi = mid,
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    best
}

/// `χ = min π(x)Q(x,y) / (π̂(i) Q̂(i,j) κ_{ij}(x,y))` over tuples with a
/// positive denominator; `+∞` if there are none.
pub fn chi(q: &Generator, dec: &Decomposition) -> Result<f64> {
    let mut best = f64::INFINITY;
    for_each_coupled_tuple(q, dec, |x, y, i, j, mass| {
        let denom = dec.part_mass(i) * dec.projection_rate(i, j) * mass;
        let num = q.pi[q.index[&x]] * q.rate(x, y);
        best = best.min(num / denom);
    })?;
    Ok(best)
}

/// Coupling-independent lower bound on each term of χ:
/// `min max{Q(x,y)/Q̂(i,j), Q(y,x)/Q̂(j,i)}` over the coupled tuples.
pub fn crude_chi_bound(q: &Generator, dec: &Decomposition) -> Result<f64> {
    let mut best = f64::INFINITY;
    for_each_coupled_tuple(q, dec, |x, y, i, j, _| {
        let forward = q.rate(x, y) / dec.projection_rate(i, j);
        let back_rate = dec.projection_rate(j, i);
        let backward = if back_rate > 0.0 { q.rate(y, x) / back_rate } else { 0.0 };
        best = best.min(forward.max(backward));
    })?;
    Ok(best)
}

fn for_each_coupled_tuple(
    q: &Generator,
    dec: &Decomposition,
    mut visit: impl FnMut(Mask, Mask, usize, usize, f64),
) -> Result<()> {
    let k = dec.parts.len();
    for i in 0..k {
        for j in 0..k {
            if i == j || dec.projection_rate(i, j) <= 0.0 {
                continue;
            }
            let table = dec.couplings.get(&(i, j)).ok_or(Error::MissingCoupling { from: i, to: j })?;
            for (x, y, mass) in table.iter() {
                if mass > 0.0 && q.index_of(x).is_some() && q.index_of(y).is_some() {
                    visit(x, y, i, j, mass);
                }
            }
        }
    }
    Ok(())
}

/// Candidate partners `y ∈ Ω_1` of `x ∈ Ω_0` under flip-swap adjacency when
/// splitting on `bit`: the flip `x + e_ℓ` and the swaps `x + e_ℓ − e_i`.
fn cross_partners(x: Mask, bit: Mask) -> Vec<(Mask, f64)> {
    let up = x | bit;
    std::iter::once(up).chain(bits(x).map(|i| up & !(1 << i))).map(|y| (y, f64::INFINITY)).collect()
}

/// A coupling of `π(·|x_ℓ = 0)` and `π(·|x_ℓ = 1)` supported on flip-swap
/// adjacent pairs. Rows and columns are full masks.
pub fn scp_coupling(m: &SubsetMeasure, coordinate: usize) -> Result<CouplingTable> {
    if coordinate >= m.n() {
        return Err(Error::InvalidArgument(format!("coordinate {coordinate} outside the cube")));
    }
    let bit = 1 << coordinate;
    let (zero, one): (Weighted, Weighted) = m.weighted_support().into_iter().partition(|(x, _)| x & bit == 0);
    split_coupling(&zero, &one, bit, coordinate)
}

fn split_coupling(zero: &[(Mask, f64)], one: &[(Mask, f64)], bit: Mask, coordinate: usize) -> Result<CouplingTable> {
    if zero.is_empty() || one.is_empty() {
        return Err(Error::EmptyPart { coordinate });
    }
    let normalize = |v: &[(Mask, f64)]| {
        let t: f64 = v.iter().map(|e| e.1).sum();
        v.iter().map(|&(x, p)| (x, p / t)).collect::<Vec<_>>()
    };
    solve_coupling(&normalize(zero), &normalize(one), |x| cross_partners(x, bit))
        .map_err(|deficit| Error::InfeasibleCoupling { deficit })
}

type Rates = HashMap<(Mask, Mask), f64>;

/// Memoized recursive construction over conditional laws, keyed by the
/// pinned coordinates and their values.
struct WalkBuilder {
    n: usize,
    support: Vec<(Mask, f64)>,
    memo: HashMap<(Mask, Mask), Rc<Rates>>,
}

struct Split {
    rates: Rates,
    coupling: Option<CouplingTable>,
}

impl WalkBuilder {
    fn new(m: &SubsetMeasure) -> Self {
        Self { n: m.n(), support: m.weighted_support(), memo: HashMap::new() }
    }

    fn conditional(&self, pinned: Mask, values: Mask) -> Vec<(Mask, f64)> {
        let states: Vec<(Mask, f64)> = self.support.iter().copied().filter(|(x, _)| x & pinned == values).collect();
        let total: f64 = states.iter().map(|e| e.1).sum();
        states.into_iter().map(|(x, p)| (x, p / total)).collect()
    }

    /// Averaged walk `Q* = (1/m) Σ_ℓ Q^{(ℓ)}` over the free coordinates.
    fn averaged(&mut self, pinned: Mask, values: Mask) -> Result<Rc<Rates>> {
        if let Some(r) = self.memo.get(&(pinned, values)) {
            return Ok(Rc::clone(r));
        }
        let states = self.conditional(pinned, values);
        let free = full_mask(self.n) & !pinned;
        let mut acc = Rates::new();
        if states.len() > 1 {
            let m = f64::from(free.count_ones());
            for l in bits(free) {
                let split = self.split(pinned, values, &states, l)?;
                for (k, v) in split.rates {
                    *acc.entry(k).or_insert(0.0) += v / m;
                }
            }
        }
        let acc = Rc::new(acc);
        self.memo.insert((pinned, values), Rc::clone(&acc));
        Ok(acc)
    }

    /// `Q^{(ℓ)}`: recursive walks inside each half plus coupled cross rates
    /// `π̂(0)π̂(1)κ(x,y)/π(x)`. A coordinate that is constant on the support
    /// contributes the walk of the single nonempty half.
    fn split(&mut self, pinned: Mask, values: Mask, states: &[(Mask, f64)], l: usize) -> Result<Split> {
        let bit: Mask = 1 << l;
        let (zero, one): (Weighted, Weighted) = states.iter().partition(|(x, _)| x & bit == 0);
        if one.is_empty() {
            let r = self.averaged(pinned | bit, values)?;
            return Ok(Split { rates: (*r).clone(), coupling: None });
        }
        if zero.is_empty() {
            let r = self.averaged(pinned | bit, values | bit)?;
            return Ok(Split { rates: (*r).clone(), coupling: None });
        }
        let p0: f64 = zero.iter().map(|e| e.1).sum();
        let p1 = 1.0 - p0;
        let mut rates = (*self.averaged(pinned | bit, values)?).clone();
        for (k, v) in self.averaged(pinned | bit, values | bit)?.iter() {
            *rates.entry(*k).or_insert(0.0) += v;
        }
        let kappa = split_coupling(&zero, &one, bit, l)?;
        let pi: HashMap<Mask, f64> = states.iter().copied().collect();
        for (x, y, k) in kappa.iter() {
            let w = p0 * p1 * k;
            *rates.entry((x, y)).or_insert(0.0) += w / pi[&x];
            *rates.entry((y, x)).or_insert(0.0) += w / pi[&y];
        }
        Ok(Split { rates, coupling: Some(kappa) })
    }

    fn generator(&self, rates: &Rates) -> Result<Generator> {
        let states = self.support.iter().map(|e| e.0).collect();
        let pi = self.support.iter().map(|e| e.1).collect();
        Generator::from_off_diagonal(self.n, states, pi, rates.iter().map(|(&(x, y), &r)| (x, y, r)))
    }
}

fn check_walk_size(m: &SubsetMeasure) -> Result<()> {
    if m.n() > WALK_LIMIT {
        return Err(Error::StateSpaceTooLarge { n: m.n(), limit: WALK_LIMIT });
    }
    Ok(())
}

/// The averaged flip-swap walk before normalization: spectral gap at least
/// 1, `Δ ≤ n`, and `Δ ≤ 2k` for `k`-homogeneous measures.
pub fn hermon_salez_unnormalized(m: &SubsetMeasure) -> Result<Generator> {
    check_walk_size(m)?;
    let mut builder = WalkBuilder::new(m);
    let rates = builder.averaged(0, 0)?;
    builder.generator(&rates)
}

/// Normalized flip-swap walk `Q*/Δ(Q*)` for a measure with the stochastic
/// covering property.
pub fn hermon_salez(m: &SubsetMeasure) -> Result<Generator> {
    Ok(hermon_salez_unnormalized(m)?.normalized())
}

/// The single-coordinate walk `Q^{(ℓ)}` (before averaging over `ℓ`) with the
/// coupling used for its cross rates; `None` when `ℓ` is constant on the
/// support.
pub fn hermon_salez_split(m: &SubsetMeasure, coordinate: usize) -> Result<(Generator, Option<CouplingTable>)> {
    check_walk_size(m)?;
    if coordinate >= m.n() {
        return Err(Error::InvalidArgument(format!("coordinate {coordinate} outside the cube")));
    }
    let mut builder = WalkBuilder::new(m);
    let states = builder.conditional(0, 0);
    let split = if states.len() > 1 {
        builder.split(0, 0, &states, coordinate)?
    } else {
        Split { rates: Rates::new(), coupling: None }
    };
    Ok((builder.generator(&split.rates)?, split.coupling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_bernoulli_product, make_uniform_k_subsets};

    #[test]
    fn adjacency_examples() {
        assert!(flip_swap_adjacent(0b01, 0b11));
        assert!(flip_swap_adjacent(0b01, 0b10));
        assert!(!flip_swap_adjacent(0b00, 0b11));
        assert!(!flip_swap_adjacent(0b101, 0b101));
        assert!(!flip_swap_adjacent(0b0011, 0b1100));
    }

    #[test]
    fn delta_examples() {
        let zero = Generator::from_off_diagonal(1, vec![0, 1], vec![0.5, 0.5], []).unwrap();
        assert_eq!(delta(&zero), 0.0);
        let g = Generator::two_state(0.3, 1.7).unwrap();
        assert!((delta(&g) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn validate_generator_examples() {
        let (a, b) = (0.4, 2.5);
        let g = Generator::two_state(a, b).unwrap();
        assert!((g.pi()[1] - a / (a + b)).abs() < 1e-15);
        validate_generator(&g).unwrap();

        let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        let err = Generator::new(1, vec![0, 1], vec![0.5, 0.5], rates).unwrap_err();
        assert!(matches!(err, Error::DetailedBalanceViolation { .. }));

        let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.1, 1.0, -1.0]);
        let err = Generator::new(1, vec![0, 1], vec![0.5, 0.5], rates).unwrap_err();
        assert!(matches!(err, Error::RowSumViolation { .. }));

        let rates = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let err = Generator::new(1, vec![0, 1], vec![0.5, 0.5], rates).unwrap_err();
        assert!(matches!(err, Error::NegativeRate { .. }));
    }

    #[test]
    fn decompose_two_state() {
        let g = Generator::two_state(0.7, 0.2).unwrap();
        let dec = decompose(&g, 0).unwrap();
        assert!((dec.projection_rate(0, 1) - 0.7).abs() < 1e-15);
        assert!((dec.projection_rate(1, 0) - 0.2).abs() < 1e-15);
        assert!(dec.restrictions.iter().all(|r| r.len() == 1));
        // Singleton parts: the crude bound and χ both equal 1.
        assert!((crude_chi_bound(&g, &dec).unwrap() - 1.0).abs() < 1e-12);
        assert!((chi(&g, &dec).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_uniform_singletons() {
        let m = make_uniform_k_subsets(3, 1).unwrap();
        let q = hermon_salez(&m).unwrap();
        let dec = decompose(&q, 0).unwrap();
        assert!((dec.part_mass(0) - 2.0 / 3.0).abs() < 1e-14);
        assert!((dec.part_mass(1) - 1.0 / 3.0).abs() < 1e-14);
        let lhs = dec.part_mass(0) * dec.projection_rate(0, 1);
        let rhs = dec.part_mass(1) * dec.projection_rate(1, 0);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn decompose_rejects_constant_coordinate() {
        let m = make_uniform_k_subsets(3, 1).unwrap();
        let q = hermon_salez(&m).unwrap();
        let point = SubsetMeasure::from_entries(2, [(0b01, 1.0)]).unwrap();
        let single = hermon_salez(&point).unwrap();
        assert!(matches!(decompose(&single, 0), Err(Error::EmptyPart { coordinate: 0 })));
        assert!(decompose(&q, 5).is_err());
    }

    #[test]
    fn chi_zero_when_coupling_misses_rates() {
        // Coupling mass on a pair with no transition gives χ = 0.
        let m = make_uniform_k_subsets(3, 1).unwrap();
        let (q, _) = hermon_salez_split(&m, 0).unwrap();
        let zero: Vec<(Mask, f64)> = vec![(0b010, 0.5), (0b100, 0.5)];
        let one: Vec<(Mask, f64)> = vec![(0b001, 1.0)];
        let kappa = CouplingTable::independent(&zero, &one);
        let mut dec = decompose_with_coupling(&q, 0, kappa).unwrap();
        assert!(chi(&q, &dec).unwrap() > 0.0);
        // Reroute the mass through a state pair outside Q's support.
        let bogus = CouplingTable {
            rows: vec![0b010, 0b100],
            cols: vec![0b001],
            row_marginal: vec![0.5, 0.5],
            col_marginal: vec![1.0],
            entries: vec![(0, 0, 0.5), (1, 0, 0.5)],
        };
        let mut zeroed = q.clone();
        let (i, j) = (q.index_of(0b010).unwrap(), q.index_of(0b001).unwrap());
        zeroed.rates[(i, i)] += zeroed.rates[(i, j)];
        zeroed.rates[(i, j)] = 0.0;
        zeroed.rates[(j, j)] += zeroed.rates[(j, i)];
        zeroed.rates[(j, i)] = 0.0;
        dec = decompose_with_coupling(&zeroed, 0, bogus).unwrap();
        assert_eq!(chi(&zeroed, &dec).unwrap(), 0.0);
    }

    #[test]
    fn missing_coupling_is_reported() {
        let g = Generator::two_state(1.0, 1.0).unwrap();
        let mut dec = decompose(&g, 0).unwrap();
        dec.couplings.clear();
        assert!(matches!(chi(&g, &dec), Err(Error::MissingCoupling { .. })));
        assert!(matches!(crude_chi_bound(&g, &dec), Err(Error::MissingCoupling { .. })));
    }

    #[test]
    fn scp_coupling_examples() {
        let m = make_uniform_k_subsets(2, 1).unwrap();
        let k = scp_coupling(&m, 0).unwrap();
        assert_eq!(k.iter().collect::<Vec<_>>(), vec![(0b10, 0b01, 1.0)]);

        let b = make_bernoulli_product(&[0.5, 0.5]).unwrap();
        let k = scp_coupling(&b, 0).unwrap();
        assert!(k.marginal_deviation() < 1e-15);
        for (x, y, _) in k.iter() {
            assert!(flip_swap_adjacent(x, y));
            assert_eq!(x >> 1, y >> 1, "identical remaining coordinate");
        }

        let point = SubsetMeasure::from_entries(2, [(0b10, 1.0)]).unwrap();
        assert!(matches!(scp_coupling(&point, 0), Err(Error::EmptyPart { .. })));
        let far = SubsetMeasure::from_entries(3, [(0b110, 0.5), (0b001, 0.5)]).unwrap();
        assert!(matches!(scp_coupling(&far, 0), Err(Error::InfeasibleCoupling { .. })));
    }

    #[test]
    fn walk_on_single_coordinate() {
        let q = 0.3;
        let m = make_bernoulli_product(&[q]).unwrap();
        let g = hermon_salez_unnormalized(&m).unwrap();
        assert!((g.pi()[1] - q).abs() < 1e-15);
        assert!((g.rate(0, 1) - q).abs() < 1e-15);
        assert!((g.rate(1, 0) - (1.0 - q)).abs() < 1e-15);
        let n = hermon_salez(&m).unwrap();
        assert!((delta(&n) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn walk_support_is_flip_swap() {
        let m = make_uniform_k_subsets(4, 2).unwrap();
        let g = hermon_salez(&m).unwrap();
        g.validate().unwrap();
        for (i, j, _) in g.edges() {
            assert!(flip_swap_adjacent(g.states()[i], g.states()[j]));
        }
        assert!(delta(&g) <= 1.0 + 1e-12);
        let raw = hermon_salez_unnormalized(&m).unwrap();
        assert!(delta(&raw) <= 4.0 + 1e-10);
    }

    #[test]
    fn split_walk_has_unit_chi() {
        let m = make_uniform_k_subsets(4, 2).unwrap();
        for l in 0..4 {
            let (q, kappa) = hermon_salez_split(&m, l).unwrap();
            let dec = decompose_with_coupling(&q, l, kappa.unwrap()).unwrap();
            let formula = dec.part_mass(0) / dec.projection_rate(1, 0);
            let other = dec.part_mass(1) / dec.projection_rate(0, 1);
            let c = chi(&q, &dec).unwrap();
            assert!((c - formula).abs() < 1e-12 && (c - other).abs() < 1e-12);
            assert!((c - 1.0).abs() < 1e-12);
            assert!(crude_chi_bound(&q, &dec).unwrap() <= c + 1e-10);
        }
    }

    #[test]
    fn walk_limit() {
        let m = make_uniform_k_subsets(13, 1).unwrap();
        assert!(matches!(hermon_salez(&m), Err(Error::StateSpaceTooLarge { .. })));
    }
}
