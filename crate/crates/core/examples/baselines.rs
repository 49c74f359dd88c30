//! Gradient evaluations to reach residual 1e-8 on a diagonal two-scale
//! quadratic for every solver in the crate.
//!
//! cargo run --release --example baselines

use multirate::optim::{baseline_solve, mrgd, Baseline, BaselineOptions, MrgdOptions, QuadraticProblem};
use multirate::{Schedule, SpectrumGroups};
use nalgebra::DVector;

fn main() -> multirate::Result<()> {
    let spectrum = SpectrumGroups::hierarchical(&[30, 20], 1e-3, 1.5)?;
    let g = DVector::from_fn(spectrum.dim(), |i, _| 1.0 + (i as f64).cos());
    let problem = QuadraticProblem::diagonal(spectrum.eigenvalues(), g)?;
    let theta0 = DVector::zeros(problem.dim());
    let tol = 1e-8;
    let (lo, hi) = (problem.sigma_min(), problem.sigma_max());

    let schedule = Schedule::synthesize(&spectrum, 2.0, 10_000)?;
    let res = mrgd(&problem, &schedule, &theta0, &MrgdOptions::with_tol(tol))?;
    println!("{:>10}: {}", "mrgd", res.grad_evals());

    let options = BaselineOptions { max_steps: 500_000, tol, allow_unsafe_rate: false };
    for method in [
        Baseline::Gd { lr: 1.0 / hi },
        Baseline::heavy_ball_tuned(lo, hi),
        Baseline::nesterov_tuned(lo, hi),
        Baseline::Chebyshev { sigma_min: lo, sigma_max: hi },
        Baseline::Cg,
    ] {
        let res = baseline_solve(method, &problem, &theta0, &options)?;
        println!("{:>10}: {}", method.name(), res.grad_evals());
    }
    Ok(())
}
