//! Rates, inner counts, coupling factors and the per-cycle contraction bound
//! for a three-group hierarchical spectrum.
//!
//! cargo run --example schedule_synthesis

use multirate::optim::error_operator_norm;
use multirate::schedule::{
    complexity_estimates, contraction_bound, coupling_upper_bounds, group_bounds, CouplingFactors, DEFAULT_ETA,
};
use multirate::{Schedule, SpectrumGroups};

fn main() -> multirate::Result<()> {
    let (decay, kappa) = (0.01, 1.2);
    let spectrum = SpectrumGroups::hierarchical(&[4, 4, 4], decay, kappa)?;
    let schedule = Schedule::synthesize(&spectrum, DEFAULT_ETA, 1)?;
    println!("rates  {:?}", schedule.etas);
    println!("counts {:?}", schedule.counts);

    let factors = CouplingFactors::compute(&spectrum, &schedule.etas)?;
    for i in 0..spectrum.num_groups() {
        for j in i + 1..spectrum.num_groups() {
            let upper = coupling_upper_bounds(decay, DEFAULT_ETA, kappa, j - i - 1)?;
            let cap = if j == i + 1 { upper.adjacent } else { upper.far.unwrap_or(f64::NAN) };
            println!("F({i},{j}) = {:.4}  (closed-form cap {cap:.4})", factors.get(i, j));
        }
    }

    println!("group bounds {:?}", group_bounds(&spectrum, &schedule)?);
    println!(
        "contraction bound {:.6}, exact operator norm {:.6}",
        contraction_bound(&spectrum, &schedule)?,
        error_operator_norm(spectrum.eigenvalues(), &schedule)
    );
    let est = complexity_estimates(&spectrum, &schedule, 1e-8)?;
    println!("estimated evaluations to 1e-8: gd {:.0}, accelerated {:.0}, multirate {:.0}", est.gd, est.gd_plus, est.mrgd);
    Ok(())
}
