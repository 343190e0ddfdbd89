//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rayleigh_core::chains::{decompose, delta, hermon_salez, Generator};
use rayleigh_core::concentration::{
    check_dirichlet_trace_bound, check_induction_statement, check_mgf_bound, crossover_mu, deviation_norms,
    ks_crossover, laplace_tail, limit_trace, oscillation, power_mean_trace, tail_bound_poincare, tail_bound_sr,
    tail_from_norms, trace_mgf, AdjacencyMode,
};
use rayleigh_core::fixtures::{self, random_projection_kernel, Fixture};
use rayleigh_core::functional::{
    check_decompositions, check_matrix_poincare, check_recursive_bound, matrix_variance, mean, scalar_spectral_gap,
    MatrixFn,
};
use rayleigh_core::matrix::{
    check_diff_square_convex, check_int_norm_bound, check_lemma_var, check_operator_jensen, check_trace_jensen,
    check_trace_monotone, duhamel_residual, Schatten, SymMatrix, DEFAULT_QUAD_POINTS,
};
use rayleigh_core::measures::{make_spanning_tree_measure, Graph};
use rayleigh_core::random::{
    random_identity_decomposition, random_lipschitz_fn, random_matrix_fn, random_psd, random_symmetric,
    random_symmetric_with_norm, trial_rng,
};
use rayleigh_core::samplers::{empirical_tail, sample_kdpp, sample_table, wilson_spanning_tree};

const GAP_TOL: f64 = 1e-9;
const GAP_RUNTIME_SECS: f64 = 60.0;
const TWO_STATE_TOL: f64 = 1e-12;
const PSD_REL_TOL: f64 = 1e-8;
const DECOMPOSITION_TOL: f64 = 1e-10;
const RECURSIVE_TOL: f64 = 1e-9;
const SUITE_TRIALS: u64 = 1000;
const DUHAMEL_TOL: f64 = 1e-8;
const INDUCTION_TARGETS: [f64; 3] = [0.25, 0.5, 0.9];
const LIMIT_REL_TOL: f64 = 1e-6;
const MGF_GRID: usize = 20;
const MGF_RADIUS: f64 = 0.9;
const TAIL_FUNCTIONS: u64 = 50;
const TAIL_GRID: usize = 50;
const SAMPLER_DRAWS: usize = 100_000;
const SIGMAS: f64 = 4.0;
const COVERAGE_REPS: u64 = 1000;
const COVERAGE_MIN: f64 = 0.97;
const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Walk {
    fixture: Fixture,
    q: Generator,
    gap: f64,
}

fn walks() -> Vec<Walk> {
    fixtures::all()
        .expect("fixtures build")
        .into_iter()
        .map(|fixture| {
            let q = hermon_salez(&fixture.measure).expect("walk builds");
            let gap = scalar_spectral_gap(&q).expect("irreducible walk");
            Walk { fixture, q, gap }
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut failed = Vec::new();
    for w in walks() {
        let slack = w.gap - w.fixture.gap_bound();
        worst = worst.min(slack);
        if slack < -GAP_TOL || delta(&w.q) > 1.0 + 1e-12 {
            failed.push(w.fixture.name.clone());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failed.is_empty() && secs < GAP_RUNTIME_SECS,
        format!("min(gap − 1/(2k)) = {worst:.3e}, {secs:.2}s, failures {failed:?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = trial_rng(SEED, 2);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let a: f64 = rng.random_range(0.01..2.0);
        let b: f64 = rng.random_range(0.01..2.0);
        let g = Generator::two_state(a, b).expect("positive rates");
        worst = worst.max((scalar_spectral_gap(&g).expect("irreducible") - (a + b)).abs());
    }
    outcome(worst <= TWO_STATE_TOL, format!("max |gap − (a+b)| = {worst:.2e} over 100 pairs"))
}

fn criterion_3(walks: &[Walk]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for (wi, w) in walks.iter().enumerate() {
        for trial in 0..500u64 {
            let d = [2, 3, 5][trial as usize % 3];
            let mut rng = trial_rng(SEED + wi as u64, trial);
            let f = random_matrix_fn(w.q.states(), d, &mut rng);
            let r = check_matrix_poincare(&w.q, &f, w.gap, PSD_REL_TOL).expect("check runs");
            worst = worst.min(r.min_eig_slack / r.tol);
            violations += usize::from(!r.passed());
        }
    }
    outcome(violations == 0, format!("{violations} violations; min slack/tol = {worst:.3e}"))
}

fn criterion_4(walks: &[Walk]) -> Outcome {
    let (mut var_res, mut dir_res) = (0.0_f64, 0.0_f64);
    let mut recursive_worst = f64::INFINITY;
    let mut splits = 0;
    for (wi, w) in walks.iter().enumerate() {
        for l in 0..w.fixture.measure.n() {
            let Ok(dec) = decompose(&w.q, l) else { continue };
            splits += 1;
            for trial in 0..10u64 {
                let mut rng = trial_rng(SEED + 100 + wi as u64, l as u64 * 1000 + trial);
                let f = random_matrix_fn(w.q.states(), 1 + trial as usize % 4, &mut rng);
                let r = check_decompositions(&w.q, &dec, &f).expect("decomposition runs");
                var_res = var_res.max(r.variance);
                dir_res = dir_res.max(r.dirichlet);
            }
            let rb = check_recursive_bound(&w.q, &dec).expect("gaps compute");
            recursive_worst = recursive_worst.min(rb.gap - rb.bound);
        }
    }
    outcome(
        var_res < DECOMPOSITION_TOL && dir_res < DECOMPOSITION_TOL && recursive_worst >= -RECURSIVE_TOL,
        format!(
            "{splits} splits; residuals var {var_res:.2e}, dirichlet {dir_res:.2e}; min(λ − bound) = {recursive_worst:.3e}"
        ),
    )
}

fn criterion_5(walks: &[Walk]) -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    fn tally(failures: &mut Vec<String>, name: &str, bad: usize) {
        if bad > 0 {
            failures.push(format!("{name}: {bad}"));
        }
    }
    let base = 500;

    let mut bad = 0;
    for i in 0..SUITE_TRIALS {
        let mut rng = trial_rng(base, i);
        let d = 2 + i as usize % 4;
        let (x1, x2, y1, y2) = (
            random_symmetric(d, &mut rng),
            random_symmetric(d, &mut rng),
            random_symmetric(d, &mut rng),
            random_symmetric(d, &mut rng),
        );
        let t: f64 = rng.random();
        bad += usize::from(!check_diff_square_convex(&x1, &x2, &y1, &y2, t).unwrap().holds());
    }
    tally(&mut failures, "joint convexity", bad);

    let mut bad = 0;
    for i in 0..SUITE_TRIALS {
        let mut rng = trial_rng(base + 1, i);
        let d = 2 + i as usize % 4;
        let a = random_symmetric(d, &mut rng);
        let h = &a + &random_psd(d, &mut rng);
        bad += usize::from(!check_trace_monotone(f64::exp, &a, &h).unwrap().holds());
    }
    tally(&mut failures, "trace monotone", bad);

    let mut bad = 0;
    for i in 0..SUITE_TRIALS {
        let mut rng = trial_rng(base + 2, i);
        let d = 2 + i as usize % 4;
        let parts = 2 + i as usize % 3;
        let dec = random_identity_decomposition(d, parts, &mut rng).unwrap();
        let mats: Vec<SymMatrix> = (0..parts).map(|_| random_symmetric(d, &mut rng)).collect();
        bad += usize::from(!check_operator_jensen(|x| x * x, &dec, &mats).unwrap().holds());
        bad += usize::from(!check_trace_jensen(f64::exp, &dec, &mats).unwrap().holds());
    }
    tally(&mut failures, "jensen", bad);

    let mut bad = 0;
    let mut duhamel_worst = 0.0_f64;
    let norms = [Schatten::P(1), Schatten::P(2), Schatten::P(4), Schatten::Inf];
    for i in 0..SUITE_TRIALS {
        let mut rng = trial_rng(base + 3, i);
        let d = 2 + i as usize % 4;
        let (a, b, x) = (random_psd(d, &mut rng), random_psd(d, &mut rng), random_symmetric(d, &mut rng));
        bad += usize::from(!check_int_norm_bound(&a, &b, &x, norms[i as usize % 4]).unwrap().holds());
        let nx: f64 = rng.random_range(0.0..2.0);
        let ny: f64 = rng.random_range(0.0..2.0);
        let (x, y) = (random_symmetric_with_norm(d, nx, &mut rng), random_symmetric_with_norm(d, ny, &mut rng));
        duhamel_worst = duhamel_worst.max(duhamel_residual(&x, &y, DEFAULT_QUAD_POINTS).unwrap());
    }
    tally(&mut failures, "integral norm", bad);
    if duhamel_worst >= DUHAMEL_TOL {
        failures.push(format!("duhamel residual {duhamel_worst:.2e}"));
    }

    let mut bad = 0;
    for p in [1, 2, 4] {
        for i in 0..SUITE_TRIALS {
            let mut rng = trial_rng(base + 4 + u64::from(p), i);
            let d = 2 + i as usize % 3;
            let m = 1 + i as usize % 4;
            let mut w: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let pairs: Vec<(f64, SymMatrix, SymMatrix)> = w
                .into_iter()
                .map(|wi| (wi, random_symmetric(d, &mut rng) * 0.5, random_symmetric(d, &mut rng) * 0.5))
                .collect();
            bad += usize::from(!check_lemma_var(&pairs, p).unwrap().holds());
        }
    }
    tally(&mut failures, "variance lemma", bad);

    let mut bad = 0;
    for p in [1, 2, 4] {
        for i in 0..SUITE_TRIALS {
            let w = &walks[i as usize % walks.len()];
            let mut rng = trial_rng(base + 10 + u64::from(p), i);
            let f = random_matrix_fn(w.q.states(), 3, &mut rng).scaled(0.5);
            bad += usize::from(!check_dirichlet_trace_bound(&w.q, &f, p, AdjacencyMode::QSupport).unwrap().holds());
        }
    }
    tally(&mut failures, "dirichlet trace bound", bad);

    outcome(
        failures.is_empty(),
        format!("{SUITE_TRIALS} trials per checker, duhamel max {duhamel_worst:.2e}; violations {failures:?}"),
    )
}

fn scaled_to(w: &Walk, f: &MatrixFn, target: f64) -> MatrixFn {
    let v = oscillation(&w.q, f, AdjacencyMode::QSupport).unwrap().v;
    f.scaled((target * w.gap).sqrt() / v)
}

fn criterion_6(walks: &[Walk]) -> Outcome {
    let mut worst_slack = f64::INFINITY;
    let mut worst_limit = 0.0_f64;
    let mut limit_note = String::new();
    let mut failures = 0;
    for (wi, w) in walks.iter().enumerate() {
        for (ti, &target) in INDUCTION_TARGETS.iter().enumerate() {
            for trial in 0..3u64 {
                let mut rng = trial_rng(600 + wi as u64, ti as u64 * 10 + trial);
                let f = scaled_to(w, &random_matrix_fn(w.q.states(), 3, &mut rng), target);
                let r = check_induction_statement(&w.q, &f, w.gap, 6).unwrap();
                worst_slack = worst_slack.min(r.slacks.iter().fold(f64::INFINITY, |a, &s| a.min(s / r.tol)));
                failures += usize::from(!r.holds());
                let at_12 = power_mean_trace(w.q.states(), w.q.pi(), &f, 12).unwrap();
                let limit = limit_trace(w.q.states(), w.q.pi(), &f).unwrap();
                let rel = (at_12 - limit).abs() / limit;
                if rel > worst_limit {
                    worst_limit = rel;
                    let var = matrix_variance(w.q.states(), w.q.pi(), &f).unwrap().spectral_norm();
                    let at_20 = power_mean_trace(w.q.states(), w.q.pi(), &f, 20).unwrap();
                    limit_note = format!(
                        "{} at αv² = {target}: ‖Var‖/2^13 = {:.2e}, k=20 gap {:.2e}",
                        w.fixture.name,
                        var / 8192.0,
                        (at_20 - limit).abs() / limit
                    );
                }
            }
        }
    }
    outcome(
        failures == 0 && worst_limit <= LIMIT_REL_TOL,
        format!(
            "{failures} induction failures, min slack/tol = {worst_slack:.3e}; k=12 max relative gap to Tr e^(EF) = {worst_limit:.3e} (limit {LIMIT_REL_TOL:e}; worst {limit_note})"
        ),
    )
}

fn criterion_7(walks: &[Walk]) -> Outcome {
    let mut failures = 0;
    let mut checks = 0;
    for (wi, w) in walks.iter().enumerate() {
        for trial in 0..5u64 {
            let mut rng = trial_rng(700 + wi as u64, trial);
            let f = random_matrix_fn(w.q.states(), 1 + trial as usize % 4, &mut rng);
            let v = oscillation(&w.q, &f, AdjacencyMode::QSupport).unwrap().v;
            let theta_max = (MGF_RADIUS * w.gap).sqrt() / v;
            for j in 0..MGF_GRID {
                let theta = theta_max * j as f64 / (MGF_GRID - 1) as f64;
                checks += 1;
                failures += usize::from(!check_mgf_bound(&w.q, &f, w.gap, theta).unwrap().holds());
            }
        }
    }
    outcome(failures == 0, format!("{failures} violations in {checks} grid evaluations"))
}

fn criterion_8() -> Outcome {
    let m = make_spanning_tree_measure(&Graph::complete(4)).unwrap();
    let k = m.homogeneity_degree().unwrap();
    let q = hermon_salez(&m).unwrap();
    let gap = scalar_spectral_gap(&q).unwrap();
    let (mut tail_fail, mut laplace_fail) = (0, 0);
    let mut worst_ratio = 0.0_f64;
    let mut redraws = 0;
    for trial in 0..TAIL_FUNCTIONS {
        let mut rng = trial_rng(800, trial);
        let d = 1 + trial as usize % 4;
        // Scalar atoms of one sign give a function that is constant on the
        // trees up to rounding; such draws carry no tail and are replaced.
        let (f, v, lipschitz) = loop {
            let lipschitz: f64 = rng.random_range(0.25..2.0);
            let f = random_lipschitz_fn(q.states(), m.n(), d, lipschitz, &mut rng);
            let v = oscillation(&q, &f, AdjacencyMode::QSupport).unwrap().v;
            if v > 1e-9 * lipschitz {
                break (f, v, lipschitz);
            }
            redraws += 1;
        };
        let norms = deviation_norms(q.states(), q.pi(), &f).unwrap();
        let t_max = 1.2 * norms.iter().map(|e| e.0).fold(0.0, f64::max);
        let radius = gap.sqrt() / v;
        let thetas: Vec<f64> = (0..80).map(|i| radius * 1e-3 * (2e3_f64).powf(i as f64 / 79.0)).collect();
        let mgf = |th: f64| trace_mgf(q.states(), q.pi(), &f, th).unwrap();
        for i in 1..=TAIL_GRID {
            let t = t_max * i as f64 / TAIL_GRID as f64;
            let exact = tail_from_norms(&norms, t);
            let poincare = tail_bound_poincare(t, gap, v, d).raw;
            let sr = tail_bound_sr(t, k, lipschitz, d).raw;
            tail_fail += usize::from(exact > poincare || exact > sr);
            let numeric = laplace_tail(mgf, &thetas, t).unwrap();
            laplace_fail += usize::from(numeric > poincare || exact > numeric);
            worst_ratio = worst_ratio.max(numeric / poincare);
        }
    }
    outcome(
        tail_fail == 0 && laplace_fail == 0,
        format!(
            "{tail_fail} closed-form and {laplace_fail} numeric-bound violations over {TAIL_FUNCTIONS}×{TAIL_GRID}; max numeric/closed = {worst_ratio:.3}; {redraws} constant draws replaced"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let n = SAMPLER_DRAWS as f64;

    let k4 = Graph::complete(4);
    let batch = wilson_spanning_tree(&k4, SEED, SAMPLER_DRAWS).unwrap();
    let trees: Vec<u64> = (0u64..64).filter(|&m| k4.is_spanning_tree(m)).collect();
    let sigma = (1.0 / 16.0 * 15.0 / 16.0 / n).sqrt();
    let worst = trees
        .iter()
        .map(|&t| ((batch.draws.iter().filter(|&&x| x == t).count() as f64 / n - 1.0 / 16.0) / sigma).abs())
        .fold(0.0, f64::max);
    pass &= trees.len() == 16 && worst <= SIGMAS && batch.draws.iter().all(|&x| k4.is_spanning_tree(x));
    notes.push(format!("wilson max |z| = {worst:.2}"));

    let kernel = random_projection_kernel(5, 2, fixtures::KERNEL_SEED);
    let batch = sample_kdpp(&kernel, SEED, SAMPLER_DRAWS).unwrap();
    let mut worst = 0.0_f64;
    for i in 0..5 {
        let p = kernel.as_matrix()[(i, i)];
        let freq = batch.draws.iter().filter(|&&x| x >> i & 1 == 1).count() as f64 / n;
        worst = worst.max(((freq - p) / (p * (1.0 - p) / n).sqrt()).abs());
    }
    pass &= worst <= SIGMAS && batch.draws.iter().all(|x| x.count_ones() == 2);
    notes.push(format!("dpp marginal max |z| = {worst:.2}"));

    let m = make_spanning_tree_measure(&k4).unwrap();
    let states = m.support();
    let pi: Vec<f64> = states.iter().map(|&x| m.prob(x)).collect();
    let f = random_lipschitz_fn(&states, m.n(), 2, 1.0, &mut trial_rng(900, 0));
    let centre = mean(&states, &pi, &f).unwrap();
    let mut sorted: Vec<f64> = deviation_norms(&states, &pi, &f).unwrap().iter().map(|e| e.0).collect();
    sorted.sort_by(f64::total_cmp);
    let ts = [sorted[4], sorted[8], sorted[12]];
    let exact: Vec<f64> =
        ts.iter().map(|&t| rayleigh_core::concentration::exact_tail(&states, &pi, &f, t).unwrap()).collect();
    let mut covered = [0usize; 3];
    for rep in 0..COVERAGE_REPS {
        let batch = sample_table(&m, 10_000 + rep, 200).unwrap();
        let tail = empirical_tail(&f, &batch, &ts, Some(&centre)).unwrap();
        for (c, (row, &e)) in covered.iter_mut().zip(tail.rows.iter().zip(&exact)) {
            *c += usize::from(row.ci_upper >= e);
        }
    }
    let coverage: Vec<f64> = covered.iter().map(|&c| c as f64 / COVERAGE_REPS as f64).collect();
    pass &= coverage.iter().all(|&c| c >= COVERAGE_MIN);
    notes.push(format!("CI coverage {coverage:?} at exact tails {exact:.3?}"));
    outcome(pass, notes.join("; "))
}

fn criterion_10() -> Outcome {
    let mut mismatches = 0;
    for k in [2usize, 3, 8, 50, 256, 1000] {
        for mu in [0.5, 1.0, 7.0, 32.0, 64.0, 100.0, 256.0, 999.0] {
            for eps in [1e-3, 1.0 / 16.0, 0.2, 1.0, 3.0] {
                let kf = k as f64;
                let direct = kf + eps * mu * kf.sqrt() <= mu * kf.ln() + eps * mu;
                mismatches += usize::from(ks_crossover(k, mu, eps).inequality_holds != direct);
            }
        }
    }
    let spot =
        !ks_crossover(256, 32.0, 1.0 / 16.0).inequality_holds && ks_crossover(256, 256.0, 1.0 / 16.0).inequality_holds;
    let mut outside = Vec::new();
    let mut k = 8usize;
    while k <= 1024 {
        let ln = (k as f64).ln();
        let mu = crossover_mu(k, 1.0 / (k as f64).sqrt());
        if !mu.is_some_and(|m| m >= k as f64 / (2.0 * ln) && m <= 2.0 * k as f64 / ln) {
            outside.push((k, mu));
        }
        k *= 2;
    }
    outcome(
        mismatches == 0 && spot && outside.is_empty(),
        format!("{mismatches} comparator mismatches, spot checks {spot}, crossovers outside band {outside:?}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let walks = walks();
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "walk spectral gap ≥ 1/(2k)", criterion_1()),
        (2, "two-state Poincaré constant = a + b", criterion_2()),
        (3, "matrix Poincaré with the scalar gap", criterion_3(&walks)),
        (4, "decomposition identities and recursive gap bound", criterion_4(&walks)),
        (5, "trace and operator inequality suite", criterion_5(&walks)),
        (6, "doubling induction and its limit", criterion_6(&walks)),
        (7, "trace mgf bound", criterion_7(&walks)),
        (8, "tail bounds dominate exact tails", criterion_8()),
        (9, "sampler correctness and CI coverage", criterion_9()),
        (10, "crossover against the martingale bound", criterion_10()),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
