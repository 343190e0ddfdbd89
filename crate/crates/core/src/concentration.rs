//! Oscillation, trace moment generating functions, the doubling induction
//! behind the matrix Bernstein bound, closed-form and numerical tail bounds,
//! and the comparison with the martingale (multiplicative) bound.
//!
//! `λ` is always the Poincaré constant (`λ Var ⪯ E`) and `α = 1/λ`.

use serde::{Deserialize, Serialize};

use crate::chains::{delta, flip_swap_adjacent, Generator};
use crate::functional::{dirichlet_form, mean, MatrixFn};
use crate::matrix::{sym_expm, trace_power, SymMatrix, Verdict, CHECK_TOL};
use crate::{Error, Mask, Result};

/// Pairs over which the oscillation is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// Pairs with `Q(x, y) > 0`.
    #[default]
    QSupport,
    /// Flip or swap neighbours among the states of `Q`.
    FlipSwap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationStats {
    pub v: f64,
    pub adjacency_mode: AdjacencyMode,
}

/// Parameters shared by the closed-form tail bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Poincaré constant.
    pub lambda: f64,
    /// Oscillation.
    pub v: f64,
    pub d: usize,
    /// Homogeneity degree.
    pub k: usize,
    /// Lipschitz constant.
    pub lipschitz: f64,
    /// Constant in the exponent of the martingale bound.
    pub ks_constant: f64,
    /// Norm of the mean, the multiplicative scale of the martingale bound.
    pub ks_scale: f64,
}

/// `v(F) = max ‖F(x) − F(y)‖` over adjacent pairs.
pub fn oscillation(q: &Generator, f: &MatrixFn, mode: AdjacencyMode) -> Result<OscillationStats> {
    let values: Vec<&SymMatrix> =
        q.states().iter().map(|&x| f.get(x).ok_or(Error::DomainMismatch)).collect::<Result<_>>()?;
    let jump = |i: usize, j: usize| (values[i] - values[j]).spectral_norm();
    let v = match mode {
        AdjacencyMode::QSupport => q.edges().map(|(i, j, _)| jump(i, j)).fold(0.0, f64::max),
        AdjacencyMode::FlipSwap => {
            let s = q.states();
            let mut best = 0.0_f64;
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    if flip_swap_adjacent(s[i], s[j]) {
                        best = best.max(jump(i, j));
                    }
                }
            }
            best
        }
    };
    Ok(OscillationStats { v, adjacency_mode: mode })
}

/// `E_π[e^{F}]`.
pub fn mean_exp(states: &[Mask], pi: &[f64], f: &MatrixFn) -> Result<SymMatrix> {
    mean(states, pi, &exp_fn(f)?)
}

fn exp_fn(f: &MatrixFn) -> Result<MatrixFn> {
    let values = f.values().iter().map(sym_expm).collect::<Result<Vec<_>>>()?;
    MatrixFn::new(f.states().to_vec(), values)
}

/// `m(θ) = Tr E_π[e^{θ(F − E F)}]`.
pub fn trace_mgf(states: &[Mask], pi: &[f64], f: &MatrixFn, theta: f64) -> Result<f64> {
    let centre = mean(states, pi, f)?;
    let centred = f.map(|v| (v - &centre) * theta);
    Ok(mean_exp(states, pi, &centred)?.trace())
}

/// `max(m(θ), m(−θ))`, which controls both tails of the spectrum.
pub fn two_sided_mgf(states: &[Mask], pi: &[f64], f: &MatrixFn, theta: f64) -> Result<f64> {
    Ok(trace_mgf(states, pi, f, theta)?.max(trace_mgf(states, pi, f, -theta)?))
}

fn require_normalized(q: &Generator) -> Result<()> {
    let d = delta(q);
    if d > 1.0 + 1e-12 {
        return Err(Error::PreconditionViolated(format!("generator is not normalized: Δ = {d}")));
    }
    Ok(())
}

fn relative(lhs: f64, rhs: f64, tol: f64) -> Verdict {
    Verdict::scalar(lhs, rhs, tol * 1.0_f64.max(lhs.abs()).max(rhs.abs()))
}

/// `Tr[E(e^F, e^F)^p] ≤ v(F)^{2p} Tr E_π[e^{2pF}]` for a normalized `Q`.
pub fn check_dirichlet_trace_bound(q: &Generator, f: &MatrixFn, p: u32, mode: AdjacencyMode) -> Result<Verdict> {
    require_normalized(q)?;
    if p == 0 {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    let v = oscillation(q, f, mode)?.v;
    let lhs = trace_power(&dirichlet_form(q, &exp_fn(f)?)?, p);
    let rhs = v.powi(2 * p as i32) * mean_exp(q.states(), q.pi(), &f.scaled(2.0 * f64::from(p)))?.trace();
    Ok(relative(lhs, rhs, CHECK_TOL))
}

/// `Tr[(E e^{F/2^k})^{2^k}]`, by repeated squaring.
pub fn power_mean_trace(states: &[Mask], pi: &[f64], f: &MatrixFn, k: u32) -> Result<f64> {
    let mut m = mean_exp(states, pi, &f.scaled(0.5_f64.powi(k as i32)))?;
    for _ in 0..k {
        m = m.square();
    }
    Ok(m.trace())
}

/// `Tr e^{E F}`, the `k → ∞` limit of [`power_mean_trace`].
pub fn limit_trace(states: &[Mask], pi: &[f64], f: &MatrixFn) -> Result<f64> {
    Ok(sym_expm(&mean(states, pi, f)?)?.trace())
}

/// Slacks of the doubling induction, one per `k = 1..=k_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionReport {
    /// `α v(F)²`.
    pub alpha_v2: f64,
    /// `Tr[(E e^{F/2^k})^{2^k}] − (1 − α v² S_k) Tr E[e^F]`.
    pub slacks: Vec<f64>,
    /// Absolute tolerance, `1e−8·max(1, Tr E[e^F])`.
    pub tol: f64,
}

impl InductionReport {
    pub fn holds(&self) -> bool {
        self.slacks.iter().all(|&s| s >= -self.tol)
    }
}

/// Evaluates `(1 − α v(F)² S_k) Tr E[e^F] ≤ Tr[(E e^{F/2^k})^{2^k}]` with
/// `S_k = Σ_{i=1}^k 2^{−i}` and `α = 1/λ`, for a normalized `Q`.
pub fn check_induction_statement(q: &Generator, f: &MatrixFn, lambda: f64, k_max: u32) -> Result<InductionReport> {
    require_normalized(q)?;
    let alpha = 1.0 / lambda;
    let v = oscillation(q, f, AdjacencyMode::QSupport)?.v;
    let alpha_v2 = alpha * v * v;
    if alpha_v2 > 1.0 {
        return Err(Error::ScaleViolation { value: alpha_v2 });
    }
    let full = mean_exp(q.states(), q.pi(), f)?.trace();
    let slacks = (1..=k_max)
        .map(|k| {
            let s_k = 1.0 - 0.5_f64.powi(k as i32);
            Ok(power_mean_trace(q.states(), q.pi(), f, k)? - (1.0 - alpha_v2 * s_k) * full)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InductionReport { alpha_v2, slacks, tol: CHECK_TOL * full.max(1.0) })
}

/// `d / (1 − θ² α v²)`.
pub fn mgf_bound(theta: f64, lambda: f64, v: f64, d: usize) -> Result<f64> {
    let x = theta * theta * v * v / lambda;
    if x >= 1.0 {
        return Err(Error::OutOfRadius { value: x });
    }
    Ok(d as f64 / (1.0 - x))
}

/// `m(θ) ≤ d / (1 − θ² α v(F)²)` for a normalized `Q` with Poincaré constant `λ`.
pub fn check_mgf_bound(q: &Generator, f: &MatrixFn, lambda: f64, theta: f64) -> Result<Verdict> {
    require_normalized(q)?;
    let v = oscillation(q, f, AdjacencyMode::QSupport)?.v;
    let bound = mgf_bound(theta, lambda, v, f.dim())?;
    let m = trace_mgf(q.states(), q.pi(), f, theta)?;
    Ok(relative(m, bound, CHECK_TOL))
}

/// A tail bound as computed and clipped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub raw: f64,
    pub capped: f64,
}

impl TailBound {
    fn new(raw: f64) -> Self {
        Self { raw, capped: raw.min(1.0) }
    }
}

/// `2d exp(−t² / (4(v²/λ + t v/√λ)))`.
pub fn tail_bound_poincare(t: f64, lambda: f64, v: f64, d: usize) -> TailBound {
    let denom = 4.0 * (v * v / lambda + t * v / lambda.sqrt());
    let exponent = if denom > 0.0 {
        t * t / denom
    } else if t > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    TailBound::new(2.0 * d as f64 * (-exponent).exp())
}

/// `2d exp(−t² / (32(kL² + t√k L)))`, the bound as stated for
/// `k`-homogeneous strong Rayleigh measures.
pub fn tail_bound_sr(t: f64, k: usize, lipschitz: f64, d: usize) -> TailBound {
    let k = k as f64;
    let denom = 32.0 * (k * lipschitz * lipschitz + t * k.sqrt() * lipschitz);
    let exponent = if denom > 0.0 {
        t * t / denom
    } else if t > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    TailBound::new(2.0 * d as f64 * (-exponent).exp())
}

/// The same bound obtained by composing [`tail_bound_poincare`] with
/// `λ = 1/(2k)` and `v = 2L`; never larger than [`tail_bound_sr`].
pub fn tail_bound_sr_composed(t: f64, k: usize, lipschitz: f64, d: usize) -> TailBound {
    tail_bound_poincare(t, 1.0 / (2.0 * k as f64), 2.0 * lipschitz, d)
}

const GOLDEN_ITERS: usize = 100;

fn golden_min(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..GOLDEN_ITERS {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    if gc < gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// `2 inf_θ exp(−θt) max(m(θ), m(−θ))` over the grid, refined by
/// golden-section search around the best grid point. Evaluations where
/// `m` is not finite or not positive are skipped.
pub fn laplace_tail(m: impl Fn(f64) -> f64, thetas: &[f64], t: f64) -> Result<f64> {
    let objective = |theta: f64| {
        let v = m(theta).max(m(-theta));
        if v.is_finite() && v > 0.0 {
            v.ln() - theta * t
        } else {
            f64::INFINITY
        }
    };
    let mut grid: Vec<f64> = thetas.iter().copied().filter(|&th| th > 0.0 && th.is_finite()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let values: Vec<f64> = grid.iter().map(|&th| objective(th)).collect();
    let best = (0..grid.len()).min_by(|&i, &j| values[i].total_cmp(&values[j])).expect("nonempty");
    let mut min = values[best];
    if !min.is_finite() {
        return Ok(f64::INFINITY);
    }
    let lo = if best > 0 { grid[best - 1] } else { 0.0 };
    let hi = if best + 1 < grid.len() { grid[best + 1] } else { grid[best] };
    if hi > lo {
        let (_, refined) = golden_min(objective, lo.max(f64::MIN_POSITIVE), hi);
        min = min.min(refined);
    }
    Ok(2.0 * min.exp())
}

/// `2 min exp(−θt + ln m(θ))` over precomputed `(θ, m(θ))` pairs. The values
/// must already bound both tails (for example a two-sided mgf).
pub fn laplace_tail_from_values(values: &[(f64, f64)], t: f64) -> Result<f64> {
    values
        .iter()
        .filter(|(th, m)| *th > 0.0 && *m > 0.0)
        .map(|&(th, m)| 2.0 * (m.ln() - th * t).exp())
        .reduce(f64::min)
        .ok_or(Error::EmptyGrid)
}

/// `d exp(−c ε² μ / (ln k + ε))`.
pub fn ks_bound(eps: f64, mu: f64, k: usize, d: usize, c: f64) -> f64 {
    d as f64 * (-c * eps * eps * mu / ((k as f64).ln() + eps)).exp()
}

/// Constant-free comparison of the two exponents at `t = εμ`, `L = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsComparison {
    pub k: usize,
    pub mu: f64,
    pub eps: f64,
    /// `ε²μ² / (k + εμ√k)`.
    pub sr_exponent: f64,
    /// `ε²μ / (ln k + ε)`.
    pub ks_exponent: f64,
    /// `k + εμ√k`.
    pub lhs: f64,
    /// `μ ln k + εμ`.
    pub rhs: f64,
    /// `k + εμ√k ≤ μ ln k + εμ`: the additive bound is the better one.
    pub inequality_holds: bool,
    /// `"sr"` when the additive bound wins, `"ks"` otherwise.
    pub dominator: String,
}

pub fn ks_crossover(k: usize, mu: f64, eps: f64) -> KsComparison {
    let kf = k as f64;
    let lhs = kf + eps * mu * kf.sqrt();
    let rhs = mu * kf.ln() + eps * mu;
    let inequality_holds = lhs <= rhs;
    KsComparison {
        k,
        mu,
        eps,
        sr_exponent: eps * eps * mu * mu / lhs,
        ks_exponent: eps * eps * mu / (kf.ln() + eps),
        lhs,
        rhs,
        inequality_holds,
        dominator: if inequality_holds { "sr" } else { "ks" }.to_string(),
    }
}

/// Smallest `μ ∈ (0, k]` at which the additive bound starts to win, by
/// bisection on the comparison; `None` if it never wins on `(0, k]`.
pub fn crossover_mu(k: usize, eps: f64) -> Option<f64> {
    let wins = |mu: f64| ks_crossover(k, mu, eps).inequality_holds;
    let mut hi = k as f64;
    if !wins(hi) {
        return None;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if wins(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Some(hi)
}

/// `(‖F(x) − E F‖, π(x))` for every state.
pub fn deviation_norms(states: &[Mask], pi: &[f64], f: &MatrixFn) -> Result<Vec<(f64, f64)>> {
    let centre = mean(states, pi, f)?;
    states
        .iter()
        .zip(pi)
        .map(|(&x, &p)| {
            let v = f.get(x).ok_or(Error::DomainMismatch)?;
            Ok(((v - &centre).spectral_norm(), p))
        })
        .collect()
}

/// `Pr_{x∼π}[‖F(x) − E F‖ ≥ t]` by enumeration.
pub fn exact_tail(states: &[Mask], pi: &[f64], f: &MatrixFn, t: f64) -> Result<f64> {
    Ok(tail_from_norms(&deviation_norms(states, pi, f)?, t))
}

pub fn tail_from_norms(norms: &[(f64, f64)], t: f64) -> f64 {
    norms.iter().filter(|(n, _)| *n >= t).map(|e| e.1).sum()
}

/// One row of a tail report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub exact_or_empirical: f64,
    /// One-sided 99% upper confidence limit; absent for exact values.
    pub ci_upper: Option<f64>,
    pub bound_poincare: f64,
    pub bound_sr: f64,
    pub bound_ks: f64,
    /// Column name of the smallest bound.
    pub dominator: String,
}

impl TailRow {
    /// Evaluates all three bounds at `t`; the martingale bound uses
    /// `ε = t / ks_scale`.
    pub fn new(t: f64, observed: f64, ci_upper: Option<f64>, params: &BoundParams) -> Self {
        let bound_poincare = tail_bound_poincare(t, params.lambda, params.v, params.d).raw;
        let bound_sr = tail_bound_sr(t, params.k, params.lipschitz, params.d).raw;
        let bound_ks = if params.ks_scale > 0.0 {
            ks_bound(t / params.ks_scale, params.ks_scale, params.k.max(2), params.d, params.ks_constant)
        } else {
            f64::INFINITY
        };
        let named = [("bound_poincare", bound_poincare), ("bound_sr", bound_sr), ("bound_ks", bound_ks)];
        let dominator = named.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("three bounds").0.to_string();
        Self { t, exact_or_empirical: observed, ci_upper, bound_poincare, bound_sr, bound_ks, dominator }
    }

    /// Whether the observation (or its upper limit) respects every bound.
    pub fn bounds_hold(&self) -> bool {
        let obs = self.exact_or_empirical;
        obs <= self.bound_poincare && obs <= self.bound_sr
    }
}
