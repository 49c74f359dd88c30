//! Acceptance suite: one line per criterion, tolerances pinned below.
//!
//! Runs as a plain binary (`harness = false`) so the report order is fixed.
//! Criteria listed in `EXPECTED_FAILURES` are still executed and reported as
//! FAIL; the process exits non-zero if any other criterion fails or if an
//! expected failure starts passing.

use std::time::{Duration, Instant};

use multirate::landscape::{
    default_expansion_epsilons, expansion_order_check, first_layer_row_hessian, hessian_covariance_rank_correlation,
    layer_perturbation_bound_check, logistic_gradient_scaling, mlp_gradient_scaling, relative_frobenius, Activation,
    HessianMode, MlpModel,
};
use multirate::optim::{baseline_solve, error_operator_norm, mrgd, Baseline, BaselineOptions, MrgdOptions, QuadraticProblem};
use multirate::problems::{
    build_separable_convex, generate_multiscale_dataset, least_squares_quadratic, MultiscaleDataSpec, TargetKind,
};
use multirate::schedule::{contraction_bound, coupling_factor, coupling_upper_bounds, group_bounds, learning_rates};
use multirate::{Schedule, SpectrumGroups};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// Pinned tolerances.
const BOUND_SLACK: f64 = 1e-12;
const ORDER_RTOL: f64 = 1e-12;
const LIMIT_ATOL: f64 = 1e-2;
const SAMPLE_SPREAD_SLACK: f64 = 1.05;
const TWO_SCALE_MIN_SPEEDUP: f64 = 10.0;
const THREE_SCALE_MIN_SPEEDUP: f64 = 3.0;
const REGRESSION_TOL: f64 = 1e-8;
const INVARIANCE_RTOL: f64 = 1e-10;
const SLOPE_WINDOW: (f64, f64) = (0.8, 1.2);
const FLAT_SLOPE_MAX: f64 = 0.3;
const HESSIAN_RTOL: f64 = 1e-4;
const RANK_CORRELATION_MIN: f64 = 0.9;
const EXPANSION_WINDOW: (f64, f64) = (0.85, 1.15);
const NONLINEAR_SLACK: f64 = 1e-6;
const CG_TOL: f64 = 1e-10;
const GD_RATE_RTOL: f64 = 0.05;

/// The limit check of criterion 3 is not reachable at the prescribed
/// parameters: the coupling factors approach their limits only
/// logarithmically in `1 / (eta - 1)`.
const EXPECTED_FAILURES: &[u32] = &[3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Groups with principal eigenvalues `1, r_0, r_0 r_1, …`, spread `κ_i`, both
/// endpoints present and interior points uniform.
fn random_grouped(rng: &mut ChaCha8Rng, m: usize, decay: (f64, f64), kappa: (f64, f64)) -> SpectrumGroups {
    let mut eigs = Vec::new();
    let mut sizes = Vec::new();
    let mut top = 1.0;
    for g in 0..m {
        let k = rng.random_range(kappa.0..=kappa.1);
        let size = rng.random_range(1..=4usize);
        let bot = top / k;
        let mut grp = vec![top];
        for _ in 1..size.saturating_sub(1) {
            grp.push(rng.random_range(bot..=top));
        }
        if size > 1 {
            grp.push(bot);
        }
        grp.sort_by(|a, b| b.total_cmp(a));
        eigs.extend(grp);
        sizes.push(size);
        if g + 1 < m {
            top *= log_uniform(rng, decay.0, decay.1);
        }
    }
    SpectrumGroups::from_sizes(&eigs, &sizes).expect("well separated by construction")
}

fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng)).qr().q()
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut bound_ok, mut order_ok, mut worst) = (0, 0, f64::NEG_INFINITY);
    for _ in 0..200 {
        let m = rng.random_range(2..=4);
        let spectrum = random_grouped(&mut rng, m, (1e-4, 1e-1), (1.0, 3.0));
        let eta = 3.0 - rng.random_range(0.0..2.0);
        let schedule = Schedule::synthesize(&spectrum, eta, 1).expect("auto schedule");
        let norm = error_operator_norm(spectrum.eigenvalues(), &schedule);
        let bound = contraction_bound(&spectrum, &schedule).expect("bound");
        worst = worst.max(norm - bound);
        bound_ok += usize::from(norm <= bound + BOUND_SLACK);
        let c = group_bounds(&spectrum, &schedule).expect("group bounds");
        order_ok += usize::from(c.windows(2).all(|w| w[0] <= w[1] * (1.0 + ORDER_RTOL)));
    }
    let elapsed = start.elapsed();
    outcome(
        bound_ok == 200 && order_ok == 200 && elapsed < Duration::from_secs(10),
        format!(
            "norm <= bound in {bound_ok}/200, ordered group bounds in {order_ok}/200, max(norm - bound) = {worst:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut ok = 0;
    let mut worst_margin = f64::INFINITY;
    for _ in 0..50 {
        let m = rng.random_range(2..=4);
        let sizes: Vec<usize> = (0..m).map(|_| rng.random_range(2..=4)).collect();
        let r = log_uniform(&mut rng, 1e-4, 1e-1);
        let kappa = rng.random_range(1.0..3.0);
        let eta = 3.0 - rng.random_range(0.0..2.0);
        let spectrum = SpectrumGroups::hierarchical(&sizes, r, kappa).expect("hierarchical");
        let schedule = Schedule::synthesize(&spectrum, eta, 1).expect("auto schedule");
        let bound = contraction_bound(&spectrum, &schedule).expect("bound");
        let cap = 1.0 - 1.0 / (eta * kappa);
        worst_margin = worst_margin.min(cap - bound);
        ok += usize::from(bound <= cap + BOUND_SLACK);
    }
    outcome(ok == 50, format!("bound <= 1 - 1/(eta kappa) in {ok}/50, min margin {worst_margin:.3e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut ok = 0;
    for _ in 0..100 {
        let r = log_uniform(&mut rng, 1e-4, 0.05);
        let eta = 2.0 - rng.random_range(0.0..1.0);
        let kappa = rng.random_range(1.0..=1.5);
        let gap = rng.random_range(1..=3usize);
        let spectrum = SpectrumGroups::hierarchical(&vec![2; gap + 2], r, kappa).expect("hierarchical");
        let etas = learning_rates(&spectrum, eta).expect("rates");
        let adjacent = coupling_factor(&spectrum, &etas, 0, 1).expect("F adjacent");
        let far = coupling_factor(&spectrum, &etas, 0, gap + 1).expect("F far");
        let caps = coupling_upper_bounds(r, eta, kappa, gap).expect("caps");
        let good = adjacent >= 0.0 && far >= 0.0 && adjacent <= caps.adjacent && far <= caps.far.expect("far cap");
        ok += usize::from(good);
    }

    // Limits as eta, kappa_c -> 1+.
    let near = 1.0 + 1e-4;
    let mut limit_ok = true;
    let mut limits = Vec::new();
    for r in [0.05, 0.01, 1e-3] {
        let spectrum = SpectrumGroups::hierarchical(&[2, 2, 2], r, near).expect("hierarchical");
        let etas = learning_rates(&spectrum, near).expect("rates");
        let adjacent = coupling_factor(&spectrum, &etas, 0, 1).expect("F adjacent");
        let far = coupling_factor(&spectrum, &etas, 0, 2).expect("F far");
        limit_ok &= (adjacent - 1.0).abs() <= LIMIT_ATOL && far.abs() <= LIMIT_ATOL;
        limits.push(format!("r={r}: F(i,i+1)={adjacent:.4}, F(i,i+2)={far:.4}"));
    }
    outcome(
        ok == 100 && limit_ok,
        format!(
            "0 <= F <= closed-form caps in {ok}/100; limit at eta = kappa_c = 1+1e-4 within {LIMIT_ATOL}: {} [{}]",
            if limit_ok { "yes" } else { "no" },
            limits.join("; ")
        ),
    )
}

struct Reproduction {
    worst_ratio: f64,
    bound: f64,
    mrgd_evals: Option<usize>,
    gd_evals: Option<usize>,
    elapsed: Duration,
}

fn reproduce(spec: &MultiscaleDataSpec, etas: Vec<f64>, counts: Vec<usize>) -> Reproduction {
    let start = Instant::now();
    let data = generate_multiscale_dataset(spec, TargetKind::LinearRegression).expect("data");
    let problem = least_squares_quadratic(&data).expect("quadratic");
    let spectrum = SpectrumGroups::from_sizes(problem.eigenvalues(), &spec.group_dims).expect("groups");
    let schedule = Schedule::new(etas, counts, 2000).expect("schedule");
    let bound = contraction_bound(&spectrum, &schedule).expect("bound");
    let theta0 = DVector::zeros(problem.dim());
    let fast = mrgd(&problem, &schedule, &theta0, &MrgdOptions::with_tol(REGRESSION_TOL)).expect("mrgd");
    let slow = baseline_solve(
        Baseline::Gd { lr: 0.5 },
        &problem,
        &theta0,
        &BaselineOptions { max_steps: 500_000, tol: REGRESSION_TOL, allow_unsafe_rate: false },
    )
    .expect("gd");
    Reproduction {
        worst_ratio: fast.trajectory.cycle_contractions().into_iter().fold(0.0, f64::max),
        bound,
        mrgd_evals: fast.trajectory.evals_to(REGRESSION_TOL),
        gd_evals: slow.trajectory.evals_to(REGRESSION_TOL),
        elapsed: start.elapsed(),
    }
}

fn judge_reproduction(rep: Reproduction, min_speedup: f64) -> Outcome {
    let speedup = match (rep.mrgd_evals, rep.gd_evals) {
        (Some(f), Some(s)) => s as f64 / f as f64,
        _ => 0.0,
    };
    outcome(
        rep.worst_ratio <= rep.bound * SAMPLE_SPREAD_SLACK && speedup >= min_speedup && rep.elapsed < Duration::from_secs(60),
        format!(
            "worst cycle contraction {:.4} vs bound {:.4}; evaluations to {REGRESSION_TOL:e}: mrgd {:?}, gd {:?} ({speedup:.1}x); {:.1}s",
            rep.worst_ratio,
            rep.bound,
            rep.mrgd_evals,
            rep.gd_evals,
            rep.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let spec = MultiscaleDataSpec::two_scale_regression(4);
    judge_reproduction(reproduce(&spec, vec![0.5, 1.0 / (2.0 * 0.001)], vec![15, 1]), TWO_SCALE_MIN_SPEEDUP)
}

fn criterion_5() -> Outcome {
    let spec = MultiscaleDataSpec::three_scale_regression(5);
    judge_reproduction(reproduce(&spec, vec![0.5, 5.0, 50.0], vec![15, 3, 1]), THREE_SCALE_MIN_SPEEDUP)
}

fn relative_gap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut worst_perm, mut worst_fold) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let m = rng.random_range(2..=3);
        // Folding runs K n steps at each slow rate back to back, amplifying the
        // fast components by prod |1 - eta_j lambda|^(K n_j) before they are
        // damped; moderate decay keeps that transient far from the rounding
        // limit so the exact-arithmetic identity is observable.
        let spectrum = random_grouped(&mut rng, m, (0.2, 0.3), (1.0, 2.0));
        let basis = random_orthogonal(&mut rng, spectrum.dim());
        let problem =
            QuadraticProblem::from_eigen(spectrum.eigenvalues(), &basis, gaussian(&mut rng, spectrum.dim())).expect("spd");
        let theta0 = gaussian(&mut rng, spectrum.dim());
        let outer = rng.random_range(2..=3);
        let schedule = Schedule::synthesize(&spectrum, 2.0, outer).expect("schedule");
        let base = mrgd(&problem, &schedule, &theta0, &MrgdOptions::default()).expect("mrgd").theta;

        let mut order: Vec<usize> = (0..m).collect();
        order.rotate_left(rng.random_range(1..m));
        let options = MrgdOptions { tol: 0.0, sweep: Some(order) };
        let permuted = mrgd(&problem, &schedule, &theta0, &options).expect("permuted").theta;
        worst_perm = worst_perm.max(relative_gap(&base, &permuted));

        let folded_counts = schedule.counts.iter().map(|n| n * outer).collect();
        let folded = Schedule::new(schedule.etas.clone(), folded_counts, 1).expect("folded");
        let once = mrgd(&problem, &folded, &theta0, &MrgdOptions::default()).expect("folded run").theta;
        worst_fold = worst_fold.max(relative_gap(&base, &once));
    }
    outcome(
        worst_perm <= INVARIANCE_RTOL && worst_fold <= INVARIANCE_RTOL,
        format!("max relative gap: permuted blocks {worst_perm:.2e}, folded cycles {worst_fold:.2e}"),
    )
}

fn in_window(s: Option<f64>, w: (f64, f64)) -> bool {
    s.is_some_and(|s| s >= w.0 && s <= w.1)
}

fn criterion_7() -> Outcome {
    let epsilons = [1e-1, 1e-2, 1e-3, 1e-4];
    let base = MultiscaleDataSpec::new(vec![6, 4], vec![1.0, 0.1], 1000, 3).expect("spec");
    let model = MlpModel::init(10, &[8, 8], Activation::Tanh, 5).expect("model");
    let (first, second) = mlp_gradient_scaling(&model, &base, &epsilons).expect("mlp sweep");
    let softmax = logistic_gradient_scaling(&base, 3, 1, &epsilons).expect("softmax sweep");
    let flat = second.slopes.iter().map(|s| s.map_or(f64::INFINITY, f64::abs)).fold(0.0, f64::max);
    outcome(
        in_window(first.slopes[1], SLOPE_WINDOW) && in_window(softmax.slopes[1], SLOPE_WINDOW) && flat < FLAT_SLOPE_MAX,
        format!(
            "small-group slope: softmax {:.3}, first layer {:.3}; second layer max |slope| {flat:.3}",
            softmax.slopes[1].unwrap_or(f64::NAN),
            first.slopes[1].unwrap_or(f64::NAN)
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let spec = MultiscaleDataSpec::power_cascade(vec![1; 10], 0.5, 200, 8).expect("spec");
    let data = generate_multiscale_dataset(&spec, TargetKind::LinearRegression).expect("data");
    let model = MlpModel::init(10, &[6, 4], Activation::Tanh, 2).expect("model");
    let (mut worst_gap, mut worst_corr) = (0.0f64, 1.0f64);
    for row in 0..6 {
        let formula = first_layer_row_hessian(&model, &data, row, HessianMode::Formula).expect("formula");
        let fd = first_layer_row_hessian(&model, &data, row, HessianMode::FiniteDifference).expect("fd");
        worst_gap = worst_gap.max(relative_frobenius(&formula, &fd));
        worst_corr = worst_corr.min(hessian_covariance_rank_correlation(&formula, &data.features));
    }
    let elapsed = start.elapsed();
    outcome(
        worst_gap <= HESSIAN_RTOL && worst_corr >= RANK_CORRELATION_MIN && elapsed < Duration::from_secs(30),
        format!(
            "max relative Frobenius gap {worst_gap:.2e}, min rank correlation {worst_corr:.3}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let model = MlpModel::init(10, &[8, 8], Activation::Tanh, 5).expect("model");
    let spec = MultiscaleDataSpec::new(vec![6, 2, 2], vec![1.0, 0.1, 0.01], 1000, 4).expect("spec");
    let eps = default_expansion_epsilons();
    let slopes: Vec<Option<f64>> =
        (1..=2).map(|l| expansion_order_check(&model, &spec, l, &eps).expect("expansion").slope).collect();
    outcome(
        slopes.iter().all(|s| in_window(*s, EXPANSION_WINDOW)),
        format!("slopes layer 1 {:.3}, layer 2 {:.3}", slopes[0].unwrap_or(f64::NAN), slopes[1].unwrap_or(f64::NAN)),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for _ in 0..100 {
        let (lead, small) = (rng.random_range(2..=6), rng.random_range(1..=4));
        let d = lead + small;
        let depth = rng.random_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=8)).collect();
        let act = if rng.random_bool(0.5) { Activation::Tanh } else { Activation::Sigmoid };
        let model = MlpModel::init(d, &hidden, act, rng.random()).expect("model");
        let x0 = gaussian(&mut rng, d);
        let x1 = DVector::from_fn(d, |k, _| if k < lead { 0.0 } else { StandardNormal.sample(&mut rng) });
        let eps = log_uniform(&mut rng, 1e-4, 1e-1);
        let layer = rng.random_range(1..=depth);
        let b = layer_perturbation_bound_check(&model, &x0, &x1, eps, layer).expect("bound");
        violations += usize::from(!b.holds());
        tightest = tightest.max(b.lhs / b.rhs);
    }
    outcome(violations == 0, format!("{violations} violations in 100 draws, max lhs/rhs {tightest:.3}"))
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut ok = 0;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(2..=3);
        let sizes: Vec<usize> = (0..m).map(|_| rng.random_range(2..=4)).collect();
        let spectrum =
            SpectrumGroups::hierarchical(&sizes, rng.random_range(0.05..0.2), rng.random_range(1.0..2.0)).expect("template");
        let problem = build_separable_convex(&spectrum, rng.random()).expect("convex");
        let schedule = Schedule::synthesize(&spectrum, 2.0, 10).expect("schedule");
        let bound = contraction_bound(&spectrum, &schedule).expect("bound");
        let theta0 = gaussian(&mut rng, spectrum.dim()) * 3.0;
        let run = mrgd(&problem, &schedule, &theta0, &MrgdOptions::default()).expect("mrgd");
        let ratios = run.trajectory.cycle_contractions();
        let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
        worst = worst.max(max_ratio / bound);
        ok += usize::from(ratios.len() == 10 && max_ratio <= bound * (1.0 + NONLINEAR_SLACK));
    }
    outcome(ok == 20, format!("{ok}/20 instances within bound, max contraction/bound {worst:.6}"))
}

fn criterion_12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let d = 100;
    let mut worst_iters = 0;
    let mut cg_ok = true;
    for _ in 0..5 {
        let eigs: Vec<f64> = (0..d).map(|_| log_uniform(&mut rng, 1e-2, 1.0)).collect();
        let basis = random_orthogonal(&mut rng, d);
        let mut g = gaussian(&mut rng, d);
        g /= g.norm();
        let problem = QuadraticProblem::from_eigen(&eigs, &basis, g).expect("spd");
        let res = baseline_solve(
            Baseline::Cg,
            &problem,
            &DVector::zeros(d),
            &BaselineOptions { max_steps: d, tol: CG_TOL, allow_unsafe_rate: false },
        )
        .expect("cg");
        let iters = res.trajectory.last().map_or(usize::MAX, |r| r.step);
        cg_ok &= res.converged && iters <= d;
        worst_iters = worst_iters.max(iters);
    }

    let eigs = [1.0, 0.6, 0.3, 0.05];
    let problem = QuadraticProblem::diagonal(&eigs, DVector::from_element(4, 1.0)).expect("diagonal");
    let lr = 1.0;
    let res = baseline_solve(
        Baseline::Gd { lr },
        &problem,
        &DVector::zeros(4),
        &BaselineOptions { max_steps: 300, tol: 0.0, allow_unsafe_rate: false },
    )
    .expect("gd");
    let errors: Vec<f64> = res.trajectory.rows.iter().filter_map(|r| r.error).collect();
    let (a, b) = (errors[errors.len() - 101], errors[errors.len() - 1]);
    let empirical = (b / a).powf(0.01);
    let predicted = 1.0 - lr * eigs[3];
    let rate_ok = (empirical - predicted).abs() <= GD_RATE_RTOL * predicted;
    outcome(
        cg_ok && rate_ok,
        format!("cg worst {worst_iters} iterations to {CG_TOL:e} (d = {d}); gd rate {empirical:.5} vs {predicted:.5}"),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (id, check) in criteria {
        let out = check();
        let expected_fail = EXPECTED_FAILURES.contains(&id);
        let tag = match (out.pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
            (true, true) => "PASS (expected failure now passes)",
        };
        println!("criterion {id:>2}: {tag:<16} {}", out.detail);
        if out.pass == expected_fail {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance results for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
