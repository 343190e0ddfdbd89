//! Experiment configuration: a single JSON document whose fields can be
//! overridden from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use rayleigh_core::concentration::AdjacencyMode;
use rayleigh_core::fixtures::{self, random_projection_kernel, KERNEL_SEED};
use rayleigh_core::functional::MatrixFn;
use rayleigh_core::io::{read_matrix_fn, read_measure, GraphJson, MatrixFnJson, MatrixJson, MeasureJson};
use rayleigh_core::matrix::SymMatrix;
use rayleigh_core::measures::{
    make_bernoulli_product, make_projection_dpp, make_spanning_tree_measure, make_uniform_cube, make_uniform_k_subsets,
    Graph, SubsetMeasure,
};
use rayleigh_core::random::{random_lipschitz_fn, random_matrix_fn, trial_rng};
use rayleigh_core::{Error, Result};
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MEASURE: &str = "uniform-2-of-4";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measure: Option<MeasureSource>,
    pub function: Option<FunctionSource>,
    pub thresholds: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    /// Poincaré constant to test instead of the scalar gap.
    pub lambda: Option<f64>,
    /// Number of exact draws for empirical tails and `sample`.
    pub draws: Option<usize>,
    pub k_values: Option<Vec<usize>>,
    pub eps: Option<f64>,
    pub ks_constant: Option<f64>,
    pub adjacency: Option<AdjacencyMode>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSource {
    Inline(MeasureJson),
    File(PathBuf),
    /// A named fixture or a pattern such as `uniform-2-of-5`, `cube-3`,
    /// `trees-K4`, `trees-C6`.
    Fixture(String),
    UniformKSubsets {
        n: usize,
        k: usize,
    },
    Bernoulli {
        p: Vec<f64>,
    },
    UniformCube {
        n: usize,
    },
    ProjectionDpp {
        kernel: MatrixJson,
    },
    SpanningTrees {
        graph: GraphJson,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSource {
    Inline(MatrixFnJson),
    File(PathBuf),
    /// Random values; with `lipschitz`, `F(x) = Σ_{i∈x} A_i` with `‖A_i‖ = L`.
    Random {
        d: usize,
        lipschitz: Option<f64>,
    },
}

/// A resolved measure plus the structure its exact sampler needs.
pub struct LoadedMeasure {
    pub measure: SubsetMeasure,
    pub graph: Option<Graph>,
    pub kernel: Option<SymMatrix>,
}

impl LoadedMeasure {
    fn plain(measure: SubsetMeasure) -> Self {
        Self { measure, graph: None, kernel: None }
    }

    fn trees(graph: Graph) -> Result<Self> {
        Ok(Self { measure: make_spanning_tree_measure(&graph)?, graph: Some(graph), kernel: None })
    }

    fn dpp(kernel: SymMatrix) -> Result<Self> {
        Ok(Self { measure: make_projection_dpp(&kernel)?, graph: None, kernel: Some(kernel) })
    }
}

pub struct LoadedFunction {
    pub f: MatrixFn,
    /// Lipschitz constant when known by construction.
    pub lipschitz: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Makes file references relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(MeasureSource::File(p)) = &mut self.measure {
            *p = base.join(&*p);
        }
        if let Some(FunctionSource::File(p)) = &mut self.function {
            *p = base.join(&*p);
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn load_measure(&self) -> Result<LoadedMeasure> {
        match &self.measure {
            None => named(DEFAULT_MEASURE),
            Some(src) => load_source(src),
        }
    }

    pub fn load_function(&self, m: &SubsetMeasure) -> Result<LoadedFunction> {
        let states = m.support();
        match self.function.clone().unwrap_or(FunctionSource::Random { d: 2, lipschitz: Some(1.0) }) {
            FunctionSource::Inline(j) => check_domain(MatrixFn::try_from(j)?, &states),
            FunctionSource::File(p) => check_domain(read_matrix_fn(&fs::read_to_string(p)?)?, &states),
            FunctionSource::Random { d, lipschitz } => {
                if d == 0 {
                    return Err(Error::InvalidArgument("function dimension must be positive".into()));
                }
                let mut rng = trial_rng(self.seed(), 0);
                let f = match lipschitz {
                    Some(l) => random_lipschitz_fn(&states, m.n(), d, l, &mut rng),
                    None => random_matrix_fn(&states, d, &mut rng),
                };
                Ok(LoadedFunction { f, lipschitz })
            }
        }
    }
}

fn check_domain(f: MatrixFn, states: &[u64]) -> Result<LoadedFunction> {
    if states.iter().any(|&x| f.get(x).is_none()) {
        return Err(Error::DomainMismatch);
    }
    Ok(LoadedFunction { f, lipschitz: None })
}

fn load_source(src: &MeasureSource) -> Result<LoadedMeasure> {
    match src {
        MeasureSource::Inline(j) => Ok(LoadedMeasure::plain(SubsetMeasure::try_from(j.clone())?)),
        MeasureSource::File(p) => Ok(LoadedMeasure::plain(read_measure(&fs::read_to_string(p)?)?)),
        MeasureSource::Fixture(name) => named(name),
        MeasureSource::UniformKSubsets { n, k } => Ok(LoadedMeasure::plain(make_uniform_k_subsets(*n, *k)?)),
        MeasureSource::Bernoulli { p } => Ok(LoadedMeasure::plain(make_bernoulli_product(p)?)),
        MeasureSource::UniformCube { n } => Ok(LoadedMeasure::plain(make_uniform_cube(*n)?)),
        MeasureSource::ProjectionDpp { kernel } => LoadedMeasure::dpp(SymMatrix::try_from(kernel.clone())?),
        MeasureSource::SpanningTrees { graph } => LoadedMeasure::trees(Graph::try_from(graph.clone())?),
    }
}

fn parse_num(s: &str) -> Option<usize> {
    s.parse().ok()
}

/// Resolves a fixture name or family pattern.
pub fn named(name: &str) -> Result<LoadedMeasure> {
    if let Some((k, n)) = name.strip_prefix("uniform-").and_then(|r| r.split_once("-of-")) {
        if let (Some(k), Some(n)) = (parse_num(k), parse_num(n)) {
            return Ok(LoadedMeasure::plain(make_uniform_k_subsets(n, k)?));
        }
    }
    if let Some(n) = name.strip_prefix("cube-").and_then(parse_num) {
        return Ok(LoadedMeasure::plain(make_uniform_cube(n)?));
    }
    if let Some(n) = name.strip_prefix("trees-K").and_then(parse_num) {
        return LoadedMeasure::trees(Graph::complete(n));
    }
    if let Some(n) = name.strip_prefix("trees-C").and_then(parse_num) {
        return LoadedMeasure::trees(Graph::cycle(n));
    }
    if let Some(n) = name.strip_prefix("dpp-rank2-on-").and_then(parse_num) {
        return LoadedMeasure::dpp(random_projection_kernel(n, 2, KERNEL_SEED));
    }
    match fixtures::by_name(name)? {
        Some(f) => Ok(LoadedMeasure::plain(f.measure)),
        None => Err(Error::InvalidArgument(format!("unknown measure {name:?}"))),
    }
}

/// Interprets `--measure`: an existing file path, otherwise a fixture name.
pub fn measure_flag(value: &str) -> MeasureSource {
    if Path::new(value).is_file() {
        MeasureSource::File(PathBuf::from(value))
    } else {
        MeasureSource::Fixture(value.to_string())
    }
}
