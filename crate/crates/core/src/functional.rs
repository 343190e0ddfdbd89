//! Matrix-valued variance and Dirichlet forms, their decomposition along a
//! partition, spectral gaps and matrix Poincaré checks.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chains::{chi, Decomposition, Generator};
use crate::matrix::{SymMatrix, CHECK_TOL};
use crate::{Error, Mask, Result};

/// A function `Ω → S_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFn {
    states: Vec<Mask>,
    dim: usize,
    values: Vec<SymMatrix>,
    index: HashMap<Mask, usize>,
}

impl MatrixFn {
    pub fn new(states: Vec<Mask>, values: Vec<SymMatrix>) -> Result<Self> {
        if states.len() != values.len() {
            return Err(Error::DimMismatch { left: states.len(), right: values.len() });
        }
        let dim = values.first().map_or(0, SymMatrix::dim);
        if let Some(v) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimMismatch { left: dim, right: v.dim() });
        }
        let index: HashMap<Mask, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        if index.len() != states.len() {
            return Err(Error::InvalidArgument("duplicate state".into()));
        }
        Ok(Self { states, dim, values, index })
    }

    /// Builds `F` by evaluating `f` on every state.
    pub fn from_fn(states: &[Mask], f: impl FnMut(Mask) -> SymMatrix) -> Result<Self> {
        Self::new(states.to_vec(), states.iter().copied().map(f).collect())
    }

    /// Embeds a scalar function as `f(x)·I_d`.
    pub fn scalar(states: &[Mask], f: &[f64], d: usize) -> Result<Self> {
        if states.len() != f.len() {
            return Err(Error::DimMismatch { left: states.len(), right: f.len() });
        }
        Self::new(states.to_vec(), f.iter().map(|&v| SymMatrix::identity(d) * v).collect())
    }

    pub fn constant(states: &[Mask], value: SymMatrix) -> Self {
        Self::new(states.to_vec(), vec![value; states.len()]).expect("uniform dimension")
    }

    pub fn states(&self) -> &[Mask] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[SymMatrix] {
        &self.values
    }

    pub fn get(&self, x: Mask) -> Option<&SymMatrix> {
        self.index.get(&x).map(|&i| &self.values[i])
    }

    fn at(&self, x: Mask) -> Result<&SymMatrix> {
        self.get(x).ok_or(Error::DomainMismatch)
    }

    /// Pointwise `g(F(x))`.
    pub fn map(&self, g: impl Fn(&SymMatrix) -> SymMatrix) -> MatrixFn {
        let values = self.values.iter().map(g).collect();
        Self { values, ..self.clone() }
    }

    /// `c·F`.
    pub fn scaled(&self, c: f64) -> MatrixFn {
        self.map(|v| v * c)
    }

    /// `KᵀF(x)K` for every state.
    pub fn congruence(&self, k: &DMatrix<f64>) -> MatrixFn {
        let dim = k.ncols();
        let values = self.values.iter().map(|v| v.congruence(k)).collect();
        Self { values, dim, ..self.clone() }
    }
}

fn check_law(states: &[Mask], pi: &[f64]) -> Result<()> {
    if states.len() != pi.len() {
        return Err(Error::DimMismatch { left: states.len(), right: pi.len() });
    }
    Ok(())
}

/// `E_π[F]`.
pub fn mean(states: &[Mask], pi: &[f64], f: &MatrixFn) -> Result<SymMatrix> {
    check_law(states, pi)?;
    let mut acc = DMatrix::zeros(f.dim, f.dim);
    for (&x, &p) in states.iter().zip(pi) {
        acc += f.at(x)?.as_matrix() * p;
    }
    Ok(SymMatrix::symmetrize(acc))
}

/// `Var_π[F] = E[F²] − (E F)²`, computed as `E[(F − EF)²]`.
pub fn matrix_variance(states: &[Mask], pi: &[f64], f: &MatrixFn) -> Result<SymMatrix> {
    let m = mean(states, pi, f)?;
    let mut acc = DMatrix::zeros(f.dim, f.dim);
    for (&x, &p) in states.iter().zip(pi) {
        let c = f.at(x)?.as_matrix() - m.as_matrix();
        acc += &c * &c * p;
    }
    Ok(SymMatrix::symmetrize(acc))
}

/// `E(F, F) = ½ Σ π(x) Q(x,y) (F(x) − F(y))²`.
pub fn dirichlet_form(q: &Generator, f: &MatrixFn) -> Result<SymMatrix> {
    let vals: Vec<&SymMatrix> = q.states().iter().map(|&x| f.at(x)).collect::<Result<_>>()?;
    let mut acc = DMatrix::zeros(f.dim, f.dim);
    for (i, j, r) in q.edges() {
        let diff = vals[i].as_matrix() - vals[j].as_matrix();
        acc += &diff * &diff * (0.5 * q.pi()[i] * r);
    }
    Ok(SymMatrix::symmetrize(acc))
}

/// `F̂(i) = E_{π_i}[F]` on part indices `0..parts.len()`.
pub fn project_fn(dec: &Decomposition, f: &MatrixFn) -> Result<MatrixFn> {
    let values = dec.restrictions.iter().map(|r| mean(r.states(), r.pi(), f)).collect::<Result<Vec<_>>>()?;
    MatrixFn::new((0..dec.parts.len() as Mask).collect(), values)
}

/// Max-norm residuals of the variance and Dirichlet decompositions, each
/// divided by `max(1, ‖lhs‖)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionResiduals {
    pub variance: f64,
    pub dirichlet: f64,
}

/// Checks `Var_π[F] = Σ π̂(i) Var_{π_i}[F] + Var_{π̂}[F̂]` and
/// `E(F,F) = Σ π̂(i) E_i(F,F) + ½ Σ_{i≠j} Σ_{x∈Ω_i, y∈Ω_j} π(x)Q(x,y)(F(x) − F(y))²`.
pub fn check_decompositions(q: &Generator, dec: &Decomposition, f: &MatrixFn) -> Result<DecompositionResiduals> {
    let total_var = matrix_variance(q.states(), q.pi(), f)?;
    let hat = project_fn(dec, f)?;
    let mut var_sum = matrix_variance(dec.projection.states(), dec.projection.pi(), &hat)?;
    let mut dir_sum = SymMatrix::zeros(f.dim);
    for (i, r) in dec.restrictions.iter().enumerate() {
        let w = dec.part_mass(i);
        var_sum = var_sum + matrix_variance(r.states(), r.pi(), f)? * w;
        dir_sum = dir_sum + dirichlet_form(r, f)? * w;
    }
    let owner: HashMap<Mask, usize> =
        dec.parts.iter().enumerate().flat_map(|(i, p)| p.iter().map(move |&x| (x, i))).collect();
    let mut cross = DMatrix::zeros(f.dim, f.dim);
    for (i, j, r) in q.edges() {
        let (x, y) = (q.states()[i], q.states()[j]);
        if owner[&x] != owner[&y] {
            let diff = f.at(x)?.as_matrix() - f.at(y)?.as_matrix();
            cross += &diff * &diff * (0.5 * q.pi()[i] * r);
        }
    }
    let dir_sum = dir_sum + SymMatrix::symmetrize(cross);
    let total_dir = dirichlet_form(q, f)?;
    let residual = |a: &SymMatrix, b: &SymMatrix| (a.as_matrix() - b.as_matrix()).amax() / a.spectral_norm().max(1.0);
    Ok(DecompositionResiduals { variance: residual(&total_var, &var_sum), dirichlet: residual(&total_dir, &dir_sum) })
}

/// Number of connected components of the support graph of `Q`.
pub fn support_components(q: &Generator) -> usize {
    let n = q.len();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in q.edges() {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut components = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        components += 1;
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    components
}

/// `D^{1/2}(−Q)D^{−1/2}`, symmetrized against rounding.
fn symmetrized_operator(q: &Generator) -> SymMatrix {
    let s: Vec<f64> = q.pi().iter().map(|p| p.sqrt()).collect();
    let n = q.len();
    let m = DMatrix::from_fn(n, n, |i, j| -q.rates()[(i, j)] * s[i] / s[j]);
    SymMatrix::symmetrize(m)
}

/// Smallest nonzero eigenvalue of `−Q` in `L²(π)`; `+∞` on a single state.
pub fn scalar_spectral_gap(q: &Generator) -> Result<f64> {
    Ok(gap_with_eigenfunction(q)?.0)
}

/// Spectral gap with a unit-variance eigenfunction attaining it.
pub fn gap_with_eigenfunction(q: &Generator) -> Result<(f64, Vec<f64>)> {
    if q.len() <= 1 {
        return Ok((f64::INFINITY, vec![0.0; q.len()]));
    }
    let components = support_components(q);
    if components > 1 {
        return Err(Error::Reducible { components });
    }
    let (vals, vecs) = symmetrized_operator(q).eigen();
    let f = (0..q.len()).map(|i| vecs[(i, 1)] / q.pi()[i].sqrt()).collect();
    Ok((vals[1], f))
}

/// Outcome of [`check_matrix_poincare`].
#[derive(Clone, Debug)]
pub struct PoincareReport {
    pub lambda_claimed: f64,
    /// `λ_min(E(F,F) − λ Var[F])`.
    pub min_eig_slack: f64,
    pub tol: f64,
    pub witness: Option<MatrixFn>,
}

impl PoincareReport {
    pub fn passed(&self) -> bool {
        self.min_eig_slack >= -self.tol
    }
}

/// Checks `λ Var[F] ⪯ E(F,F)` with tolerance `tol·max(1, ‖E‖, λ‖Var‖)`.
pub fn check_matrix_poincare(q: &Generator, f: &MatrixFn, lambda: f64, tol: f64) -> Result<PoincareReport> {
    let e = dirichlet_form(q, f)?;
    let v = matrix_variance(q.states(), q.pi(), f)? * lambda;
    let scale = 1.0_f64.max(e.spectral_norm()).max(v.spectral_norm());
    let min_eig_slack = (&e - &v).min_eigenvalue();
    let tol = tol * scale;
    let witness = (min_eig_slack < -tol).then(|| f.clone());
    Ok(PoincareReport { lambda_claimed: lambda, min_eig_slack, tol, witness })
}

/// Relative eigenvalue cutoff below which a direction of `Var` counts as null.
pub const RANGE_TOL: f64 = 1e-8;

/// `min_v vᵀE v / vᵀ Var v` over `v` with `Var v ≠ 0`; `+∞` if `Var = 0`.
///
/// `ker Var ⊆ ker E`, so the minimum is the smallest eigenvalue of `E`
/// compressed to the range of `Var` in the `Var`-weighted metric.
pub fn rayleigh_quotient(q: &Generator, f: &MatrixFn) -> Result<f64> {
    let e = dirichlet_form(q, f)?;
    let var = matrix_variance(q.states(), q.pi(), f)?;
    let (vals, vecs) = var.eigen();
    let top = vals.last().copied().unwrap_or(0.0);
    let cutoff = RANGE_TOL * top.max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cutoff).collect();
    if keep.is_empty() || top <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let w = DMatrix::from_fn(f.dim, keep.len(), |r, c| vecs[(r, keep[c])] / vals[keep[c]].sqrt());
    Ok(e.congruence(&w).min_eigenvalue())
}

fn random_values(states: &[Mask], d: usize, rng: &mut ChaCha8Rng) -> MatrixFn {
    MatrixFn::from_fn(states, |_| crate::random::random_symmetric(d, rng)).expect("uniform dimension")
}

fn descend(q: &Generator, mut f: MatrixFn, sweeps: usize) -> f64 {
    let mut best = rayleigh_quotient(q, &f).unwrap_or(f64::INFINITY);
    let d = f.dim;
    let mut step = 0.5;
    for _ in 0..sweeps {
        let mut improved = false;
        for s in 0..f.values.len() {
            for a in 0..d {
                for b in a..d {
                    for sign in [1.0, -1.0] {
                        let mut m = f.values[s].as_matrix().clone();
                        m[(a, b)] += sign * step;
                        if a != b {
                            m[(b, a)] += sign * step;
                        }
                        let old = std::mem::replace(&mut f.values[s], SymMatrix::symmetrize(m));
                        let val = rayleigh_quotient(q, &f).unwrap_or(f64::INFINITY);
                        if val < best {
                            best = val;
                            improved = true;
                            break;
                        }
                        f.values[s] = old;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Empirical upper bound on the matrix Poincaré constant of `Q` in
/// dimension `d`: the smallest generalized Rayleigh quotient found over the
/// scalar eigenfunction witness and `budget` random restarts refined by
/// coordinate descent. Deterministic in `seed`.
pub fn adversarial_lambda_search(q: &Generator, d: usize, budget: usize, seed: u64) -> Result<f64> {
    if budget == 0 || d == 0 {
        return Err(Error::InvalidArgument("budget and dimension must be positive".into()));
    }
    let (gap, eigenfunction) = gap_with_eigenfunction(q)?;
    if !gap.is_finite() {
        return Ok(gap);
    }
    let witness = MatrixFn::from_fn(q.states(), |x| {
        let mut m = SymMatrix::zeros(d).into_matrix();
        m[(0, 0)] = eigenfunction[q.index_of(x).expect("own state")];
        SymMatrix::symmetrize(m)
    })?;
    let scalar = rayleigh_quotient(q, &witness)?;
    let sweeps = 3;
    let searched = (0..budget as u64)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart);
            let f = random_values(q.states(), d, &mut rng);
            descend(q, f, sweeps)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(scalar.min(searched))
}

/// Both sides of `λ(Q) ≥ min{χ λ(Q̂), min_i λ(Q_i)}` with scalar gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursiveBound {
    pub gap: f64,
    pub chi: f64,
    pub projection_gap: f64,
    pub restriction_gaps: Vec<f64>,
    pub bound: f64,
}

impl RecursiveBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.gap >= self.bound - tol
    }
}

fn gap_or_zero(q: &Generator) -> Result<f64> {
    match scalar_spectral_gap(q) {
        Err(Error::Reducible { .. }) => Ok(0.0),
        other => other,
    }
}

/// Evaluates the recursive gap bound for a decomposition; a reducible
/// restriction counts as gap zero.
pub fn check_recursive_bound(q: &Generator, dec: &Decomposition) -> Result<RecursiveBound> {
    let gap = scalar_spectral_gap(q)?;
    let chi = chi(q, dec)?;
    let projection_gap = gap_or_zero(&dec.projection)?;
    let restriction_gaps = dec.restrictions.iter().map(gap_or_zero).collect::<Result<Vec<_>>>()?;
    let inner = restriction_gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let outer = if chi.is_finite() { chi * projection_gap } else { f64::INFINITY };
    Ok(RecursiveBound { gap, chi, projection_gap, restriction_gaps, bound: outer.min(inner) })
}

/// Default tolerance for Poincaré checks.
pub const POINCARE_TOL: f64 = CHECK_TOL;
