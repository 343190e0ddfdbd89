//! Exact samplers and empirical tail estimates.
//!
//! Draw `i` of a batch uses its own ChaCha stream `(seed, i)`, so batches are
//! identical regardless of how many threads generate them.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::functional::MatrixFn;
use crate::matrix::SymMatrix;
use crate::measures::{Graph, SubsetMeasure, PROJECTION_TOL};
use crate::random::trial_rng;
use crate::{Error, Mask, Result};

/// Confidence level of [`clopper_pearson_upper`] as used by [`empirical_tail`].
pub const CONFIDENCE: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub seed: u64,
    pub count: usize,
    pub draws: Vec<Mask>,
}

fn batch(seed: u64, count: usize, draw: impl Fn(&mut rand_chacha::ChaCha8Rng) -> Mask + Sync) -> SampleBatch {
    let draws = (0..count as u64).into_par_iter().map(|i| draw(&mut trial_rng(seed, i))).collect();
    SampleBatch { seed, count, draws }
}

/// I.i.d. draws from a tabulated measure via an alias table.
pub fn sample_table(m: &SubsetMeasure, seed: u64, count: usize) -> Result<SampleBatch> {
    let support = m.weighted_support();
    let weights: Vec<f64> = support.iter().map(|e| e.1).collect();
    let alias = WeightedAliasIndex::new(weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(batch(seed, count, |rng| support[alias.sample(rng)].0))
}

/// Uniform spanning trees by loop-erased random walks; draws are edge masks.
pub fn wilson_spanning_tree(graph: &Graph, seed: u64, count: usize) -> Result<SampleBatch> {
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    if graph.edges.len() > Mask::BITS as usize {
        return Err(Error::StateSpaceTooLarge { n: graph.edges.len(), limit: Mask::BITS as usize });
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph.vertices];
    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        if u != v {
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
    }
    Ok(batch(seed, count, |rng| wilson_draw(&adj, rng)))
}

fn wilson_draw(adj: &[Vec<(usize, usize)>], rng: &mut impl Rng) -> Mask {
    let n = adj.len();
    let mut in_tree = vec![false; n];
    let mut next: Vec<(usize, usize)> = vec![(0, 0); n];
    in_tree[0] = true;
    let mut tree: Mask = 0;
    for start in 1..n {
        let mut u = start;
        while !in_tree[u] {
            let step = adj[u][rng.random_range(0..adj[u].len())];
            next[u] = step;
            u = step.0;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            let (v, e) = next[u];
            tree |= 1 << e;
            u = v;
        }
    }
    tree
}

/// Draws from the projection DPP with kernel `K` by sequential sampling and
/// projection onto the orthogonal complement of the chosen row.
pub fn sample_kdpp(kernel: &SymMatrix, seed: u64, count: usize) -> Result<SampleBatch> {
    let k = kernel.as_matrix();
    let residual = (k * k - k).amax();
    if residual > PROJECTION_TOL {
        return Err(Error::NotAProjection { residual });
    }
    let n = kernel.dim();
    if n > Mask::BITS as usize {
        return Err(Error::StateSpaceTooLarge { n, limit: Mask::BITS as usize });
    }
    let (vals, vecs) = kernel.eigen();
    let cols: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    let basis = DMatrix::from_fn(n, cols.len(), |r, c| vecs[(r, cols[c])]);
    Ok(batch(seed, count, |rng| dpp_draw(basis.clone(), rng)))
}

fn dpp_draw(mut v: DMatrix<f64>, rng: &mut impl Rng) -> Mask {
    let mut chosen: Mask = 0;
    while v.ncols() > 0 {
        let weights: Vec<f64> =
            (0..v.nrows()).map(|i| if chosen >> i & 1 == 1 { 0.0 } else { v.row(i).norm_squared() }).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        chosen |= 1 << pick;
        // Zero out row `pick` using its largest entry as pivot, drop the pivot
        // column and re-orthonormalize.
        let pivot =
            (0..v.ncols()).max_by(|&a, &b| v[(pick, a)].abs().total_cmp(&v[(pick, b)].abs())).expect("nonempty basis");
        let pivot_col = v.column(pivot).clone_owned();
        let pivot_val = v[(pick, pivot)];
        for c in 0..v.ncols() {
            let factor = v[(pick, c)] / pivot_val;
            let col = v.column(c) - &pivot_col * factor;
            v.set_column(c, &col);
        }
        let v_rest = v.clone().remove_column(pivot);
        v = if v_rest.ncols() == 0 { v_rest } else { v_rest.qr().q() };
    }
    chosen
}

/// One-sided upper confidence limit for a binomial proportion with
/// `successes` out of `trials`.
pub fn clopper_pearson_upper(successes: usize, trials: usize, confidence: f64) -> f64 {
    if trials == 0 || successes >= trials {
        return 1.0;
    }
    let beta = Beta::new(successes as f64 + 1.0, (trials - successes) as f64).expect("positive shape parameters");
    beta.inverse_cdf(confidence)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTailRow {
    pub t: f64,
    pub estimate: f64,
    pub ci_upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTail {
    pub rows: Vec<EmpiricalTailRow>,
    /// True when the centre is the batch mean rather than the exact mean.
    pub mean_from_batch: bool,
}

/// Fraction of draws with `‖F(x) − centre‖ ≥ t` for each threshold, with
/// one-sided 99% Clopper–Pearson upper limits. Without an exact mean the
/// batch mean is used and flagged.
pub fn empirical_tail(
    f: &MatrixFn,
    batch: &SampleBatch,
    ts: &[f64],
    exact_mean: Option<&SymMatrix>,
) -> Result<EmpiricalTail> {
    let values: Vec<&SymMatrix> =
        batch.draws.iter().map(|&x| f.get(x).ok_or(Error::DomainMismatch)).collect::<Result<_>>()?;
    let centre = match exact_mean {
        Some(m) => m.clone(),
        None => {
            let mut acc = DMatrix::zeros(f.dim(), f.dim());
            for v in &values {
                acc += v.as_matrix();
            }
            SymMatrix::symmetrize(acc / values.len().max(1) as f64)
        }
    };
    let norms: Vec<f64> = values.iter().map(|v| (*v - &centre).spectral_norm()).collect();
    let n = norms.len();
    let rows = ts
        .iter()
        .map(|&t| {
            let hits = norms.iter().filter(|&&x| x >= t).count();
            let estimate = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
            EmpiricalTailRow { t, estimate, ci_upper: clopper_pearson_upper(hits, n, CONFIDENCE) }
        })
        .collect();
    Ok(EmpiricalTail { rows, mean_from_batch: exact_mean.is_none() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::make_uniform_k_subsets;

    #[test]
    fn point_mass_and_empty() {
        let m = SubsetMeasure::from_entries(3, [(0b101, 1.0)]).unwrap();
        let b = sample_table(&m, 1, 50).unwrap();
        assert!(b.draws.iter().all(|&x| x == 0b101));
        assert!(sample_table(&m, 1, 0).unwrap().draws.is_empty());
    }

    #[test]
    fn tree_input_returns_itself() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (1, 3)]).unwrap();
        let b = wilson_spanning_tree(&g, 3, 20).unwrap();
        assert!(b.draws.iter().all(|&x| x == 0b111));
        let disconnected = Graph::new(3, vec![(0, 1)]).unwrap();
        assert!(matches!(wilson_spanning_tree(&disconnected, 1, 1), Err(Error::DisconnectedGraph)));
    }

    #[test]
    fn dpp_trivial_kernels() {
        let k = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(sample_kdpp(&k, 1, 20).unwrap().draws.iter().all(|&x| x == 0b01));
        let bad = SymMatrix::from_diagonal(&[0.5, 0.0]);
        assert!(matches!(sample_kdpp(&bad, 1, 1), Err(Error::NotAProjection { .. })));
    }

    #[test]
    fn batches_are_deterministic() {
        let m = make_uniform_k_subsets(5, 2).unwrap();
        assert_eq!(sample_table(&m, 9, 300).unwrap(), sample_table(&m, 9, 300).unwrap());
        assert_ne!(sample_table(&m, 9, 300).unwrap(), sample_table(&m, 10, 300).unwrap());
    }

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson_upper(5, 5, 0.99), 1.0);
        // Zero successes: 1 − (1 − c)^{1/N}.
        let u = clopper_pearson_upper(0, 100, 0.99);
        assert!((u - (1.0 - 0.01_f64.powf(0.01))).abs() < 1e-10);
    }

    #[test]
    fn constant_function_has_no_tail() {
        let m = make_uniform_k_subsets(3, 1).unwrap();
        let b = sample_table(&m, 2, 100).unwrap();
        let f = MatrixFn::constant(&m.support(), SymMatrix::identity(2));
        let tail = empirical_tail(&f, &b, &[0.1, 1.0], None).unwrap();
        assert!(tail.mean_from_batch);
        assert!(tail.rows.iter().all(|r| r.estimate == 0.0));
    }
}
