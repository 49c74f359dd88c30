//! 100-dimensional linear regression with two data scales (80 + 20 features,
//! covariance ratio 0.001), multirate descent against plain GD at rate 0.5.
//!
//! cargo run --release --example two_scale_regression

use multirate::optim::{baseline_solve, mrgd, Baseline, BaselineOptions, MrgdOptions};
use multirate::problems::{generate_multiscale_dataset, least_squares_quadratic, MultiscaleDataSpec, TargetKind};
use multirate::schedule::{contraction_bound, group_bounds};
use multirate::{Schedule, SpectrumGroups};
use nalgebra::DVector;

fn main() -> multirate::Result<()> {
    let spec = MultiscaleDataSpec::two_scale_regression(2024);
    let data = generate_multiscale_dataset(&spec, TargetKind::LinearRegression)?;
    let problem = least_squares_quadratic(&data)?;
    let spectrum = SpectrumGroups::from_sizes(problem.eigenvalues(), &spec.group_dims)?;
    println!("sample spectrum: top {:?} bottom {:?}", spectrum.sigma_top(), spectrum.sigma_bot());

    // Slow scale at 1/(2r) with the nominal ratio r = 0.001.
    let schedule = Schedule::new(vec![0.5, 500.0], vec![15, 1], 400)?;
    let bound = contraction_bound(&spectrum, &schedule)?;
    println!("per-cycle bound {bound:.4}, group bounds {:?}", group_bounds(&spectrum, &schedule)?);

    let theta0 = DVector::zeros(problem.dim());
    let tol = 1e-8;
    let fast = mrgd(&problem, &schedule, &theta0, &MrgdOptions::with_tol(tol))?;
    let worst = fast.trajectory.cycle_contractions().into_iter().fold(0.0, f64::max);
    println!("mrgd: {} gradient evaluations, worst cycle contraction {worst:.4}", fast.grad_evals());

    let options = BaselineOptions { max_steps: 200_000, tol, allow_unsafe_rate: false };
    let slow = baseline_solve(Baseline::Gd { lr: 0.5 }, &problem, &theta0, &options)?;
    println!("gd:   {} gradient evaluations", slow.grad_evals());
    println!("speedup {:.1}x", slow.grad_evals() as f64 / fast.grad_evals() as f64);
    Ok(())
}
