//! Seeded trials of every trace and operator inequality checker.

use rand::Rng;
use rayleigh_core::chains::Generator;
use rayleigh_core::concentration::{check_dirichlet_trace_bound, AdjacencyMode};
use rayleigh_core::matrix::{
    check_diff_square_convex, check_int_norm_bound, check_lemma_var, check_operator_jensen, check_trace_jensen,
    check_trace_monotone, duhamel_residual, Schatten, SymMatrix, Verdict, CHECK_TOL, DEFAULT_QUAD_POINTS,
};
use rayleigh_core::random::{
    random_identity_decomposition, random_matrix_fn, random_psd, random_symmetric, random_symmetric_with_norm,
    trial_rng,
};
use rayleigh_core::Result;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Smallest slack divided by the checker's scale.
    pub min_relative_slack: f64,
}

struct Tally {
    name: String,
    trials: usize,
    violations: usize,
    min: f64,
    tol: f64,
}

impl Tally {
    fn new(name: impl Into<String>, tol: f64) -> Self {
        Self { name: name.into(), trials: 0, violations: 0, min: f64::INFINITY, tol }
    }

    fn add(&mut self, v: Verdict) {
        let scale = v.tol / CHECK_TOL;
        let rel = v.slack / scale;
        self.trials += 1;
        self.min = self.min.min(rel);
        self.violations += usize::from(rel < -self.tol);
    }

    fn finish(self) -> CheckSummary {
        CheckSummary { name: self.name, trials: self.trials, violations: self.violations, min_relative_slack: self.min }
    }
}

/// Stream index of each checker, so that adding a checker leaves the
/// others' draws unchanged.
const STREAMS: u64 = 32;

fn rng(seed: u64, checker: u64, trial: usize) -> rand_chacha::ChaCha8Rng {
    trial_rng(seed, checker + STREAMS * trial as u64)
}

/// Runs `trials` seeded instances of each checker; the dissipation bound
/// uses random functions on `q`, which must be normalized.
pub fn run(q: &Generator, seed: u64, trials: usize, tol: f64) -> Result<Vec<CheckSummary>> {
    let mut out = Vec::new();
    let dim = |i: usize| 2 + i % 4;

    let mut t = Tally::new("joint_convexity_of_difference_square", tol);
    for i in 0..trials {
        let mut r = rng(seed, 0, i);
        let d = dim(i);
        let m: Vec<SymMatrix> = (0..4).map(|_| random_symmetric(d, &mut r)).collect();
        let w: f64 = r.random();
        t.add(check_diff_square_convex(&m[0], &m[1], &m[2], &m[3], w)?);
    }
    out.push(t.finish());

    let mut t = Tally::new("trace_monotone_exp", tol);
    for i in 0..trials {
        let mut r = rng(seed, 1, i);
        let a = random_symmetric(dim(i), &mut r);
        let h = &a + &random_psd(dim(i), &mut r);
        t.add(check_trace_monotone(f64::exp, &a, &h)?);
    }
    out.push(t.finish());

    let mut op = Tally::new("operator_jensen_square", tol);
    let mut tr = Tally::new("trace_jensen_exp", tol);
    for i in 0..trials {
        let mut r = rng(seed, 2, i);
        let parts = 2 + i % 3;
        let dec = random_identity_decomposition(dim(i), parts, &mut r)?;
        let mats: Vec<SymMatrix> = (0..parts).map(|_| random_symmetric(dim(i), &mut r)).collect();
        op.add(check_operator_jensen(|x| x * x, &dec, &mats)?);
        tr.add(check_trace_jensen(f64::exp, &dec, &mats)?);
    }
    out.push(op.finish());
    out.push(tr.finish());

    for (k, (label, p)) in
        [("2", Schatten::P(2)), ("4", Schatten::P(4)), ("inf", Schatten::Inf)].into_iter().enumerate()
    {
        let mut t = Tally::new(format!("integral_norm_bound_p{label}"), tol);
        for i in 0..trials {
            let mut r = rng(seed, 3 + k as u64, i);
            let (a, b, x) = (random_psd(dim(i), &mut r), random_psd(dim(i), &mut r), random_symmetric(dim(i), &mut r));
            t.add(check_int_norm_bound(&a, &b, &x, p)?);
        }
        out.push(t.finish());
    }

    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for i in 0..trials {
        let mut r = rng(seed, 6, i);
        let (nx, ny): (f64, f64) = (r.random_range(0.0..2.0), r.random_range(0.0..2.0));
        let x = random_symmetric_with_norm(dim(i), nx, &mut r);
        let y = random_symmetric_with_norm(dim(i), ny, &mut r);
        let res = duhamel_residual(&x, &y, DEFAULT_QUAD_POINTS)?;
        worst = worst.max(res);
        bad += usize::from(res >= tol);
    }
    out.push(CheckSummary {
        name: "duhamel_residual".into(),
        trials,
        violations: bad,
        min_relative_slack: tol - worst,
    });

    for (k, p) in [1u32, 2, 4].into_iter().enumerate() {
        let mut t = Tally::new(format!("variance_lemma_p{p}"), tol);
        for i in 0..trials {
            let mut r = rng(seed, 7 + k as u64, i);
            let d = 2 + i % 3;
            let m = 1 + i % 4;
            let mut w: Vec<f64> = (0..m).map(|_| r.random::<f64>() + 0.05).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let pairs: Vec<(f64, SymMatrix, SymMatrix)> = w
                .into_iter()
                .map(|wi| (wi, random_symmetric(d, &mut r) * 0.5, random_symmetric(d, &mut r) * 0.5))
                .collect();
            t.add(check_lemma_var(&pairs, p)?);
        }
        out.push(t.finish());
    }

    for (k, p) in [1u32, 2, 4].into_iter().enumerate() {
        let mut t = Tally::new(format!("dirichlet_trace_bound_p{p}"), tol);
        for i in 0..trials {
            let mut r = rng(seed, 10 + k as u64, i);
            let f = random_matrix_fn(q.states(), 3, &mut r).scaled(0.5);
            t.add(check_dirichlet_trace_bound(q, &f, p, AdjacencyMode::QSupport)?);
        }
        out.push(t.finish());
    }

    Ok(out)
}
