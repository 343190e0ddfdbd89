//! Named strong Rayleigh test measures.

use crate::matrix::SymMatrix;
use crate::measures::{
    make_bernoulli_product, make_projection_dpp, make_spanning_tree_measure, make_uniform_cube, make_uniform_k_subsets,
    Graph, SubsetMeasure,
};
use crate::random::{random_orthogonal, trial_rng};
use crate::Result;

/// Seed used for the random projection kernels.
pub const KERNEL_SEED: u64 = 20;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub measure: SubsetMeasure,
    /// Homogeneity degree, or `n/2` for non-homogeneous measures.
    pub degree: f64,
}

impl Fixture {
    fn new(name: impl Into<String>, measure: SubsetMeasure) -> Self {
        let degree = measure.homogeneity_degree().map_or(measure.n() as f64 / 2.0, |k| k as f64);
        Self { name: name.into(), measure, degree }
    }

    /// The gap lower bound `1/(2k)` for the normalized walk.
    pub fn gap_bound(&self) -> f64 {
        1.0 / (2.0 * self.degree)
    }
}

/// Rank-`rank` projection onto random orthonormal columns.
pub fn random_projection_kernel(n: usize, rank: usize, seed: u64) -> SymMatrix {
    let u = random_orthogonal(n, &mut trial_rng(seed, n as u64));
    let v = u.columns(0, rank);
    SymMatrix::symmetrize(v * v.transpose())
}

pub fn uniform_subsets() -> Result<Vec<Fixture>> {
    let mut out = Vec::new();
    for n in 2..=6 {
        for k in 1..=3.min(n - 1) {
            out.push(Fixture::new(format!("uniform-{k}-of-{n}"), make_uniform_k_subsets(n, k)?));
        }
    }
    Ok(out)
}

pub fn spanning_trees() -> Result<Vec<Fixture>> {
    Ok(vec![
        Fixture::new("trees-K3", make_spanning_tree_measure(&Graph::complete(3))?),
        Fixture::new("trees-K4", make_spanning_tree_measure(&Graph::complete(4))?),
        Fixture::new("trees-C5", make_spanning_tree_measure(&Graph::cycle(5))?),
    ])
}

pub fn projection_dpps() -> Result<Vec<Fixture>> {
    (4..=6)
        .map(|n| {
            let k = random_projection_kernel(n, 2, KERNEL_SEED);
            Ok(Fixture::new(format!("dpp-rank2-on-{n}"), make_projection_dpp(&k)?))
        })
        .collect()
}

pub fn cube_measures() -> Result<Vec<Fixture>> {
    Ok(vec![
        Fixture::new("bernoulli-3", make_bernoulli_product(&[0.2, 0.5, 0.7])?),
        Fixture::new("bernoulli-4", make_bernoulli_product(&[0.1, 0.4, 0.6, 0.9])?),
        Fixture::new("cube-4", make_uniform_cube(4)?),
    ])
}

/// Every fixture.
pub fn all() -> Result<Vec<Fixture>> {
    let mut out = uniform_subsets()?;
    out.extend(spanning_trees()?);
    out.extend(projection_dpps()?);
    out.extend(cube_measures()?);
    Ok(out)
}

/// Looks a fixture up by name.
pub fn by_name(name: &str) -> Result<Option<Fixture>> {
    Ok(all()?.into_iter().find(|f| f.name == name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_degrees() {
        let all = all().unwrap();
        assert_eq!(all.len(), 12 + 3 + 3 + 3);
        let k4 = all.iter().find(|f| f.name == "trees-K4").unwrap();
        assert_eq!(k4.degree, 3.0);
        assert_eq!(k4.measure.support().len(), 16);
        let cube = all.iter().find(|f| f.name == "cube-4").unwrap();
        assert_eq!(cube.degree, 2.0);
        for f in all.iter().filter(|f| f.name.starts_with("dpp")) {
            assert_eq!(f.degree, 2.0);
        }
    }
}
