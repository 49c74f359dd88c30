//! Three data scales (60 + 20 + 20 features, scale factor 0.1): rates
//! (0.5, 5, 50) with 15, 3 and 1 steps per cycle.
//!
//! cargo run --release --example three_scale_regression

use multirate::optim::{baseline_solve, error_operator_norm, mrgd, Baseline, BaselineOptions, MrgdOptions};
use multirate::problems::{generate_multiscale_dataset, least_squares_quadratic, MultiscaleDataSpec, TargetKind};
use multirate::schedule::{contraction_bound, group_bounds};
use multirate::{Schedule, SpectrumGroups};
use nalgebra::DVector;

fn main() -> multirate::Result<()> {
    let spec = MultiscaleDataSpec::three_scale_regression(2024);
    let data = generate_multiscale_dataset(&spec, TargetKind::LinearRegression)?;
    let problem = least_squares_quadratic(&data)?;
    let spectrum = SpectrumGroups::from_sizes(problem.eigenvalues(), &spec.group_dims)?;

    let schedule = Schedule::new(vec![0.5, 5.0, 50.0], vec![15, 3, 1], 400)?;
    println!("per-cycle bound {:.4}", contraction_bound(&spectrum, &schedule)?);
    println!("group bounds {:?}", group_bounds(&spectrum, &schedule)?);
    println!("exact operator norm {:.4}", error_operator_norm(problem.eigenvalues(), &schedule));

    let theta0 = DVector::zeros(problem.dim());
    let tol = 1e-8;
    let fast = mrgd(&problem, &schedule, &theta0, &MrgdOptions::with_tol(tol))?;
    let slow = baseline_solve(
        Baseline::Gd { lr: 0.5 },
        &problem,
        &theta0,
        &BaselineOptions { max_steps: 200_000, tol, allow_unsafe_rate: false },
    )?;
    println!("mrgd {} vs gd {} gradient evaluations", fast.grad_evals(), slow.grad_evals());
    Ok(())
}
