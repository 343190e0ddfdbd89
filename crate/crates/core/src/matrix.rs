//! Real symmetric matrices, spectral matrix functions, the PSD order, and
//! numerical checkers for the trace and operator inequalities used by the
//! concentration argument.
//!
//! All matrix functions go through a full symmetric eigendecomposition, which
//! gives fractional powers of PSD matrices directly and is exact enough at
//! the dimensions used here (d ≤ 16).

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance for the symmetry invariant.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Default relative tolerance of the inequality checkers.
pub const CHECK_TOL: f64 = 1e-8;
/// Default number of Gauss–Legendre nodes for integrals over `[0, 1]`.
pub const DEFAULT_QUAD_POINTS: usize = 64;

/// A real symmetric `d × d` matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates symmetry (relative to the largest entry) and finiteness,
    /// then stores the exactly symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimMismatch { left: m.nrows(), right: m.ncols() });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::PreconditionViolated(format!("matrix is not symmetric (deviation {asym:e})")));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes `m` as `(m + mᵀ)/2` without validation.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimMismatch { left: d, right: bad.len() });
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.0.row(i).iter().copied().collect()).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.0.clone());
        let d = self.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    /// Spectral norm `max |λ_i|`.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `f(A) = U f(Λ) Uᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let eig = SymmetricEigen::new(self.0.clone());
        let mapped = eig.eigenvalues.map(f);
        let u = &eig.eigenvectors;
        Self::symmetrize(u * DMatrix::from_diagonal(&mapped) * u.transpose())
    }

    /// `A²`, computed by multiplication.
    pub fn square(&self) -> SymMatrix {
        Self::symmetrize(&self.0 * &self.0)
    }

    /// `Kᵀ A K` for a (possibly non-square) `K`.
    pub fn congruence(&self, k: &DMatrix<f64>) -> SymMatrix {
        Self::symmetrize(k.transpose() * &self.0 * k)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix(&self.0 * rhs)
    }
}

impl Add for SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: SymMatrix) -> SymMatrix {
        SymMatrix(self.0 + rhs.0)
    }
}

impl Sub for SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: SymMatrix) -> SymMatrix {
        SymMatrix(self.0 - rhs.0)
    }
}

impl Mul<f64> for SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix(self.0 * rhs)
    }
}

fn same_dim(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(())
}

/// Matrix exponential through the eigendecomposition.
pub fn sym_expm(a: &SymMatrix) -> Result<SymMatrix> {
    let e = a.map_spectrum(f64::exp);
    if !e.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(e)
}

/// `A ⪯ B` up to `tol · max(1, ‖A‖, ‖B‖)`.
pub fn psd_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    same_dim(a, b)?;
    let scale = 1.0_f64.max(a.spectral_norm()).max(b.spectral_norm());
    Ok((b - a).min_eigenvalue() >= -tol * scale)
}

/// Order of a Schatten norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schatten {
    P(u32),
    Inf,
}

fn schatten_of(values: impl Iterator<Item = f64>, p: Schatten) -> f64 {
    match p {
        Schatten::Inf => values.fold(0.0_f64, |m, v| m.max(v.abs())),
        Schatten::P(p) => {
            let p = f64::from(p);
            values.map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

/// Schatten `p`-norm of a symmetric matrix, from its eigenvalues.
pub fn schatten_norm(a: &SymMatrix, p: Schatten) -> f64 {
    schatten_of(a.eigenvalues().into_iter(), p)
}

/// Schatten `p`-norm of an arbitrary square matrix, from its singular values.
pub fn schatten_norm_general(a: &DMatrix<f64>, p: Schatten) -> f64 {
    schatten_of(a.singular_values().iter().copied(), p)
}

/// `Tr[A^p] = Σ λ_i^p`.
pub fn trace_power(a: &SymMatrix, p: u32) -> f64 {
    a.eigenvalues().iter().map(|v| v.powi(p as i32)).sum()
}

/// Outcome of a numerical inequality check: the inequality holds iff
/// `slack ≥ −tol`. For scalar inequalities `slack = rhs − lhs`; for PSD
/// inequalities it is the smallest eigenvalue of `rhs − lhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub slack: f64,
    pub tol: f64,
}

impl Verdict {
    pub fn scalar(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self { slack: rhs - lhs, tol }
    }

    pub fn psd(lhs: &SymMatrix, rhs: &SymMatrix, rel_tol: f64) -> Self {
        let scale = 1.0_f64.max(lhs.spectral_norm()).max(rhs.spectral_norm());
        Self { slack: (rhs - lhs).min_eigenvalue(), tol: rel_tol * scale }
    }

    pub fn holds(&self) -> bool {
        self.slack >= -self.tol
    }
}

/// `Tr f(A) ≤ Tr f(H)` for monotone `f`, given `A ⪯ H`.
pub fn check_trace_monotone(f: impl Fn(f64) -> f64, a: &SymMatrix, h: &SymMatrix) -> Result<Verdict> {
    if !psd_leq(a, h, 1e-9)? {
        return Err(Error::PreconditionViolated("A ⪯ H does not hold".into()));
    }
    let lhs: f64 = a.eigenvalues().into_iter().map(&f).sum();
    let rhs: f64 = h.eigenvalues().into_iter().map(&f).sum();
    Ok(Verdict::scalar(lhs, rhs, CHECK_TOL * 1.0_f64.max(lhs.abs()).max(rhs.abs())))
}

/// Factors `K_i` with `Σ K_iᵀ K_i = I`.
#[derive(Clone, Debug)]
pub struct IdentityDecomposition {
    factors: Vec<DMatrix<f64>>,
}

impl IdentityDecomposition {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let d = factors.first().map(|k| k.ncols()).ok_or(Error::BadDecomposition { residual: f64::INFINITY })?;
        let mut sum = DMatrix::<f64>::zeros(d, d);
        for k in &factors {
            if k.ncols() != d {
                return Err(Error::DimMismatch { left: d, right: k.ncols() });
            }
            sum += k.transpose() * k;
        }
        let residual = (sum - DMatrix::<f64>::identity(d, d)).amax();
        if residual > 1e-10 {
            return Err(Error::BadDecomposition { residual });
        }
        Ok(Self { factors })
    }

    /// `K_i = √w_i · I` for a probability vector `w`.
    pub fn from_weights(weights: &[f64], d: usize) -> Result<Self> {
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("negative weight".into()));
        }
        Self::new(weights.iter().map(|w| DMatrix::identity(d, d) * w.sqrt()).collect())
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors[0].ncols()
    }

    fn combine(&self, mats: &[SymMatrix]) -> Result<SymMatrix> {
        if mats.len() != self.factors.len() {
            return Err(Error::DimMismatch { left: self.factors.len(), right: mats.len() });
        }
        let d = self.dim();
        let mut acc = SymMatrix::zeros(d);
        for (k, a) in self.factors.iter().zip(mats) {
            if k.nrows() != a.dim() {
                return Err(Error::DimMismatch { left: k.nrows(), right: a.dim() });
            }
            acc = acc + a.congruence(k);
        }
        Ok(acc)
    }
}

/// Operator Jensen: `f(Σ Kᵀ A K) ⪯ Σ Kᵀ f(A) K` for operator-convex `f`.
pub fn check_operator_jensen(
    f: impl Fn(f64) -> f64,
    decomp: &IdentityDecomposition,
    mats: &[SymMatrix],
) -> Result<Verdict> {
    let (lhs, rhs) = jensen_sides(&f, decomp, mats)?;
    Ok(Verdict::psd(&lhs, &rhs, CHECK_TOL))
}

/// Trace Jensen: `Tr f(Σ Kᵀ A K) ≤ Tr Σ Kᵀ f(A) K` for convex `f`.
pub fn check_trace_jensen(
    f: impl Fn(f64) -> f64,
    decomp: &IdentityDecomposition,
    mats: &[SymMatrix],
) -> Result<Verdict> {
    let (lhs, rhs) = jensen_sides(&f, decomp, mats)?;
    let (l, r) = (lhs.trace(), rhs.trace());
    Ok(Verdict::scalar(l, r, CHECK_TOL * 1.0_f64.max(l.abs()).max(r.abs())))
}

fn jensen_sides(
    f: &impl Fn(f64) -> f64,
    decomp: &IdentityDecomposition,
    mats: &[SymMatrix],
) -> Result<(SymMatrix, SymMatrix)> {
    let lhs = decomp.combine(mats)?.map_spectrum(f);
    let mapped: Vec<SymMatrix> = mats.iter().map(|a| a.map_spectrum(f)).collect();
    let rhs = decomp.combine(&mapped)?;
    Ok((lhs, rhs))
}

/// Joint operator convexity of `(X, Y) ↦ (X − Y)²` at weight `t`.
pub fn check_diff_square_convex(
    x1: &SymMatrix,
    x2: &SymMatrix,
    y1: &SymMatrix,
    y2: &SymMatrix,
    t: f64,
) -> Result<Verdict> {
    same_dim(x1, x2)?;
    same_dim(x1, y1)?;
    same_dim(x1, y2)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    let mixed = &(&(x1 * t) + &(x2 * (1.0 - t))) - &(&(y1 * t) + &(y2 * (1.0 - t)));
    let lhs = mixed.square();
    let rhs = &((x1 - y1).square() * t) + &((x2 - y2).square() * (1.0 - t));
    Ok(Verdict::psd(&lhs, &rhs, CHECK_TOL))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `‖e^X − e^Y − ∫₀¹ e^{tX}(X − Y)e^{(1−t)Y} dt‖` (spectral norm) with the
/// integral evaluated by Gauss–Legendre quadrature.
pub fn duhamel_residual(x: &SymMatrix, y: &SymMatrix, quad_points: usize) -> Result<f64> {
    same_dim(x, y)?;
    if quad_points < 2 {
        return Err(Error::InvalidArgument("need at least two quadrature points".into()));
    }
    let (ex, ux) = x.eigen();
    let (ey, uy) = y.eigen();
    let diff = (x - y).into_matrix();
    let (nodes, weights) = gauss_legendre(quad_points);
    let d = x.dim();
    let mut integral = DMatrix::<f64>::zeros(d, d);
    for (&t, &w) in nodes.iter().zip(&weights) {
        let left = spectral_apply(&ex, &ux, |v| (t * v).exp());
        let right = spectral_apply(&ey, &uy, |v| ((1.0 - t) * v).exp());
        integral += (left * &diff * right) * w;
    }
    let lhs = sym_expm(x)?.into_matrix() - sym_expm(y)?.into_matrix();
    Ok(schatten_norm_general(&(lhs - integral), Schatten::Inf))
}

fn spectral_apply(values: &[f64], vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let diag = DVector::from_iterator(values.len(), values.iter().map(|&v| f(v)));
    vectors * DMatrix::from_diagonal(&diag) * vectors.transpose()
}

fn psd_power(values: &[f64], vectors: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    spectral_apply(values, vectors, |v| {
        let v = v.max(0.0);
        if t == 0.0 {
            1.0
        } else {
            v.powf(t)
        }
    })
}

fn require_psd(a: &SymMatrix) -> Result<()> {
    let min_eig = a.min_eigenvalue();
    if min_eig < -1e-12 * a.spectral_norm().max(1.0) {
        return Err(Error::NotPsd { min_eig });
    }
    Ok(())
}

/// Mean inequality `‖∫₀¹ Aᵗ X B^{1−t} dt‖_p ≤ ½‖AX + XB‖_p` for PSD `A`, `B`.
pub fn check_int_norm_bound(a: &SymMatrix, b: &SymMatrix, x: &SymMatrix, p: Schatten) -> Result<Verdict> {
    same_dim(a, b)?;
    same_dim(a, x)?;
    require_psd(a)?;
    require_psd(b)?;
    let (ea, ua) = a.eigen();
    let (eb, ub) = b.eigen();
    let xm = x.as_matrix();
    let (nodes, weights) = gauss_legendre(DEFAULT_QUAD_POINTS);
    let d = a.dim();
    let mut integral = DMatrix::<f64>::zeros(d, d);
    for (&t, &w) in nodes.iter().zip(&weights) {
        integral += (psd_power(&ea, &ua, t) * xm * psd_power(&eb, &ub, 1.0 - t)) * w;
    }
    let lhs = schatten_norm_general(&integral, p);
    let rhs = 0.5 * schatten_norm_general(&(a.as_matrix() * xm + xm * b.as_matrix()), p);
    Ok(Verdict::scalar(lhs, rhs, CHECK_TOL * 1.0_f64.max(rhs)))
}

/// `Tr[(E[(e^X − e^Y)²])^p] ≤ ½ E[‖X − Y‖^{2p} Tr(e^{2pX} + e^{2pY})]` for a
/// finitely supported joint law given as `(weight, X, Y)` triples.
pub fn check_lemma_var(pairs: &[(f64, SymMatrix, SymMatrix)], p: u32) -> Result<Verdict> {
    let d = pairs.first().map(|(_, x, _)| x.dim()).ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let total: f64 = pairs.iter().map(|(w, _, _)| w).sum();
    if pairs.iter().any(|(w, _, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("weights must form a distribution".into()));
    }
    let mut second = SymMatrix::zeros(d);
    let mut rhs = 0.0;
    let pf = f64::from(p);
    for (w, x, y) in pairs {
        same_dim(x, y)?;
        if x.dim() != d {
            return Err(Error::DimMismatch { left: d, right: x.dim() });
        }
        let diff = &sym_expm(x)? - &sym_expm(y)?;
        second = &second + &(diff.square() * *w);
        let gap = (x - y).spectral_norm();
        let traces = sym_expm(&(x * (2.0 * pf)))?.trace() + sym_expm(&(y * (2.0 * pf)))?.trace();
        rhs += 0.5 * w * gap.powi(2 * p as i32) * traces;
    }
    let lhs = trace_power(&second, p);
    Ok(Verdict::scalar(lhs, rhs, CHECK_TOL * 1.0_f64.max(rhs.abs())))
}
