//! JSON and CSV formats.
//!
//! | Object | JSON |
//! |--------|------|
//! | measure | `{"n": 3, "entries": [{"mask": 5, "p": 0.5}, ...]}` |
//! | graph | `{"vertices": 4, "edges": [[0, 1], ...]}` |
//! | symmetric matrix | `{"d": 2, "rows": [[1, 0], [0, 1]]}` |
//! | generator | `{"n": 2, "states": [...], "pi": [...], "Q": [[...], ...]}` |
//! | matrix function | `{"d": 2, "values": [{"mask": 1, "rows": [[...]]}, ...]}` |
//!
//! Sample batches are dumped as one `0x`-prefixed hex mask per line.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chains::Generator;
use crate::concentration::TailRow;
use crate::functional::MatrixFn;
use crate::matrix::SymMatrix;
use crate::measures::{Graph, SubsetMeasure};
use crate::samplers::SampleBatch;
use crate::{Error, Mask, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassEntry {
    pub mask: Mask,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub n: usize,
    pub entries: Vec<MassEntry>,
}

impl From<&SubsetMeasure> for MeasureJson {
    fn from(m: &SubsetMeasure) -> Self {
        let entries = m.weighted_support().into_iter().map(|(mask, p)| MassEntry { mask, p }).collect();
        Self { n: m.n(), entries }
    }
}

impl TryFrom<MeasureJson> for SubsetMeasure {
    type Error = Error;
    fn try_from(j: MeasureJson) -> Result<Self> {
        SubsetMeasure::from_entries(j.n, j.entries.into_iter().map(|e| (e.mask, e.p)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        Self { vertices: g.vertices, edges: g.edges.clone() }
    }
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;
    fn try_from(j: GraphJson) -> Result<Self> {
        Graph::new(j.vertices, j.edges)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub d: usize,
    pub rows: Vec<Vec<f64>>,
}

impl From<&SymMatrix> for MatrixJson {
    fn from(m: &SymMatrix) -> Self {
        Self { d: m.dim(), rows: m.rows() }
    }
}

impl TryFrom<MatrixJson> for SymMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        let m = SymMatrix::from_rows(&j.rows)?;
        if m.dim() != j.d {
            return Err(Error::DimMismatch { left: j.d, right: m.dim() });
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorJson {
    pub n: usize,
    pub states: Vec<Mask>,
    pub pi: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
}

impl From<&Generator> for GeneratorJson {
    fn from(g: &Generator) -> Self {
        let r = g.rates();
        let q = (0..r.nrows()).map(|i| r.row(i).iter().copied().collect()).collect();
        Self { n: g.n(), states: g.states().to_vec(), pi: g.pi().to_vec(), q }
    }
}

impl TryFrom<GeneratorJson> for Generator {
    type Error = Error;
    fn try_from(j: GeneratorJson) -> Result<Self> {
        let len = j.states.len();
        if j.q.len() != len || j.q.iter().any(|r| r.len() != len) {
            return Err(Error::DimMismatch { left: len, right: j.q.len() });
        }
        let rates = DMatrix::from_fn(len, len, |a, b| j.q[a][b]);
        Generator::new(j.n, j.states, j.pi, rates)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueEntry {
    pub mask: Mask,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFnJson {
    pub d: usize,
    pub values: Vec<ValueEntry>,
}

impl From<&MatrixFn> for MatrixFnJson {
    fn from(f: &MatrixFn) -> Self {
        let values = f.states().iter().zip(f.values()).map(|(&mask, v)| ValueEntry { mask, rows: v.rows() }).collect();
        Self { d: f.dim(), values }
    }
}

impl TryFrom<MatrixFnJson> for MatrixFn {
    type Error = Error;
    fn try_from(j: MatrixFnJson) -> Result<Self> {
        let states = j.values.iter().map(|v| v.mask).collect();
        let values = j
            .values
            .iter()
            .map(|v| {
                let m = SymMatrix::from_rows(&v.rows)?;
                if m.dim() != j.d {
                    return Err(Error::DimMismatch { left: j.d, right: m.dim() });
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixFn::new(states, values)
    }
}

/// Parses `T` from JSON and converts it.
pub fn from_json_str<J, T>(s: &str) -> Result<T>
where
    J: for<'de> Deserialize<'de>,
    T: TryFrom<J, Error = Error>,
{
    T::try_from(serde_json::from_str::<J>(s)?)
}

pub fn read_measure(s: &str) -> Result<SubsetMeasure> {
    from_json_str::<MeasureJson, _>(s)
}

pub fn read_graph(s: &str) -> Result<Graph> {
    from_json_str::<GraphJson, _>(s)
}

pub fn read_matrix(s: &str) -> Result<SymMatrix> {
    from_json_str::<MatrixJson, _>(s)
}

pub fn read_generator(s: &str) -> Result<Generator> {
    from_json_str::<GeneratorJson, _>(s)
}

pub fn read_matrix_fn(s: &str) -> Result<MatrixFn> {
    from_json_str::<MatrixFnJson, _>(s)
}

#[derive(Serialize)]
struct TailCsvRow<'a> {
    t: f64,
    exact_or_empirical: f64,
    ci_upper: Option<f64>,
    bound_poincare: f64,
    bound_sr: f64,
    bound_ks: f64,
    dominator: &'a str,
}

/// Writes tail rows with header
/// `t,exact_or_empirical,ci_upper,bound_poincare,bound_sr,bound_ks,dominator`;
/// `ci_upper` is empty for exact values.
pub fn write_tail_csv(out: impl Write, rows: &[TailRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(TailCsvRow {
            t: r.t,
            exact_or_empirical: r.exact_or_empirical,
            ci_upper: r.ci_upper,
            bound_poincare: r.bound_poincare,
            bound_sr: r.bound_sr,
            bound_ks: r.bound_ks,
            dominator: &r.dominator,
        })?;
    }
    if rows.is_empty() {
        w.write_record(["t", "exact_or_empirical", "ci_upper", "bound_poincare", "bound_sr", "bound_ks", "dominator"])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes any serializable rows as CSV with a header.
pub fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_batch(mut out: impl Write, batch: &SampleBatch) -> Result<()> {
    for &x in &batch.draws {
        writeln!(out, "{x:#x}")?;
    }
    Ok(())
}

pub fn read_batch(input: impl BufRead) -> Result<Vec<Mask>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| {
            let l = l?;
            let digits = l.trim().trim_start_matches("0x");
            Mask::from_str_radix(digits, 16).map_err(|e| Error::InvalidArgument(format!("bad mask {l:?}: {e}")))
        })
        .collect()
}
