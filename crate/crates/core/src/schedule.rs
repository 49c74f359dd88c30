//! Learning-rate and iteration-count synthesis for multirate gradient descent.
//!
//! Scale indices are zero-based: scale `0` is the stiffest group (largest
//! eigenvalues, smallest learning rate) and scale `m - 1` the softest. One
//! outer cycle applies `counts[m-1]` steps at `etas[m-1]`, then walks down to
//! `counts[0]` steps at `etas[0]`.
//!
//! With `R[l][j] = etas[j] * sigma_top[l]`, the count for scale `i` must
//! dominate the coupling sum `Σ_{j>i} counts[j] * F(i, j)`; this keeps the
//! per-group error bounds ordered so that the softest group's bound governs
//! the whole cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumGroups;

/// Default margin `η` in `η_i = 1 / (η σ_i)`.
pub const DEFAULT_ETA: f64 = 2.0;

/// Per-scale learning rates and inner counts for one outer cycle, plus the
/// number of outer cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub etas: Vec<f64>,
    pub counts: Vec<usize>,
    pub outer: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_scalar: Option<f64>,
}

impl Schedule {
    /// Build a schedule from explicit rates and counts (structural checks only).
    pub fn new(etas: Vec<f64>, counts: Vec<usize>, outer: usize) -> Result<Self> {
        if etas.is_empty() || etas.len() != counts.len() {
            return Err(Error::Validation(format!(
                "schedule needs one count per rate (got {} rates, {} counts)",
                etas.len(),
                counts.len()
            )));
        }
        if etas.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::Validation("learning rates must be positive and finite".into()));
        }
        if counts.contains(&0) {
            return Err(Error::Validation("inner counts must be at least 1".into()));
        }
        if outer == 0 {
            return Err(Error::Validation("outer cycle count must be at least 1".into()));
        }
        Ok(Self { etas, counts, outer, eta_scalar: None })
    }

    /// Rates `1 / (eta σ_i)` and the smallest counts satisfying the coupling condition.
    pub fn synthesize(spectrum: &SpectrumGroups, eta: f64, outer: usize) -> Result<Self> {
        let etas = learning_rates(spectrum, eta)?;
        let counts = iteration_counts(spectrum, &etas)?;
        let mut schedule = Self::new(etas, counts, outer)?;
        schedule.eta_scalar = Some(eta);
        Ok(schedule)
    }

    pub fn num_scales(&self) -> usize {
        self.etas.len()
    }

    /// Gradient evaluations in one outer cycle.
    pub fn steps_per_cycle(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn with_outer(mut self, outer: usize) -> Self {
        self.outer = outer;
        self
    }

    /// Check this schedule against the invariants for `spectrum`.
    pub fn check(&self, spectrum: &SpectrumGroups) -> Result<ScheduleCheck> {
        ensure_matching(spectrum, &self.etas)?;
        let rates_admissible = self
            .etas
            .iter()
            .zip(spectrum.sigma_top())
            .all(|(eta, sigma)| eta * sigma <= 1.0);
        let last_count_is_one = self.counts.last() == Some(&1);
        let m = self.num_scales();
        let mut coupling_satisfied = Vec::with_capacity(m.saturating_sub(1));
        for i in 0..m.saturating_sub(1) {
            let mut sum = 0.0;
            for j in i + 1..m {
                sum += self.counts[j] as f64 * coupling_factor(spectrum, &self.etas, i, j)?;
            }
            coupling_satisfied.push(self.counts[i] as f64 >= sum.ceil());
        }
        Ok(ScheduleCheck { rates_admissible, last_count_is_one, coupling_satisfied })
    }
}

/// Outcome of [`Schedule::check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCheck {
    /// `η_j σ_j ≤ 1` for every scale.
    pub rates_admissible: bool,
    pub last_count_is_one: bool,
    /// Entry `i` is true when `counts[i]` dominates its coupling sum.
    pub coupling_satisfied: Vec<bool>,
}

impl ScheduleCheck {
    pub fn all_hold(&self) -> bool {
        self.rates_admissible && self.last_count_is_one && self.coupling_satisfied.iter().all(|&b| b)
    }
}

fn ensure_matching(spectrum: &SpectrumGroups, etas: &[f64]) -> Result<()> {
    if etas.len() != spectrum.num_groups() {
        return Err(Error::Validation(format!(
            "{} learning rates for a spectrum with {} groups",
            etas.len(),
            spectrum.num_groups()
        )));
    }
    Ok(())
}

/// `η_i = 1 / (eta σ_i)` for each group.
pub fn learning_rates(spectrum: &SpectrumGroups, eta: f64) -> Result<Vec<f64>> {
    if !(eta.is_finite() && eta > 1.0) {
        return Err(Error::Domain(format!("eta must exceed 1, got {eta}")));
    }
    Ok(spectrum.sigma_top().iter().map(|s| 1.0 / (eta * s)).collect())
}

/// The matrix `R[l][j] = η_j σ_l`.
pub fn rate_products(spectrum: &SpectrumGroups, etas: &[f64]) -> Vec<Vec<f64>> {
    spectrum
        .sigma_top()
        .iter()
        .map(|s| etas.iter().map(|e| e * s).collect())
        .collect()
}

/// Coupling factor `F(i, j)` for `i < j`.
pub fn coupling_factor(spectrum: &SpectrumGroups, etas: &[f64], i: usize, j: usize) -> Result<f64> {
    ensure_matching(spectrum, etas)?;
    let m = spectrum.num_groups();
    if !(i < j && j < m) {
        return Err(Error::Validation(format!(
            "coupling factor needs i < j < m, got i={i}, j={j}, m={m}"
        )));
    }
    let infeasible = |reason: String| Error::ScheduleInfeasible { i, j, reason };
    let top = spectrum.sigma_top();
    let bot = spectrum.sigma_bot();
    let r_i = spectrum.decay()[i];

    let slow = 1.0 - etas[i] * bot[i + 1];
    let fast = 1.0 - etas[i] * bot[i];
    if !(slow > 0.0 && fast > 0.0) {
        return Err(infeasible(format!(
            "rate {:e} overshoots group {} (1 - η σ_bot = {fast:e})",
            etas[i], i
        )));
    }
    let denom = (slow / fast).ln();
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(infeasible(format!("denominator log ratio {denom:e} is not positive")));
    }

    let r_next = etas[j] * top[i + 1];
    let gap = (r_i - r_next).abs();
    if gap == 0.0 {
        return Err(Error::DegenerateSpectrum { i, j });
    }
    let tail = if j == i + 1 {
        let contraction = 1.0 - etas[j] * bot[j];
        if !(contraction > 0.0) {
            return Err(infeasible(format!(
                "rate {:e} overshoots group {j} (1 - η σ_bot = {contraction:e})",
                etas[j]
            )));
        }
        contraction
    } else {
        let growth = (1.0 - r_next).abs();
        if growth == 0.0 {
            return Err(Error::DegenerateSpectrum { i, j });
        }
        growth
    };
    let numer = -r_i.ln() + (gap / tail).ln();
    Ok(numer / denom)
}

/// All coupling factors and rate products for a set of rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingFactors {
    /// `f[i][j - i - 1]` holds `F(i, j)`.
    pub f: Vec<Vec<f64>>,
    /// `r[l][j] = η_j σ_l`.
    pub r: Vec<Vec<f64>>,
}

impl CouplingFactors {
    pub fn compute(spectrum: &SpectrumGroups, etas: &[f64]) -> Result<Self> {
        ensure_matching(spectrum, etas)?;
        let m = spectrum.num_groups();
        let mut f = Vec::with_capacity(m);
        for i in 0..m {
            let row = (i + 1..m)
                .map(|j| coupling_factor(spectrum, etas, i, j))
                .collect::<Result<Vec<_>>>()?;
            f.push(row);
        }
        Ok(Self { f, r: rate_products(spectrum, etas) })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.f[i][j - i - 1]
    }
}

/// Smallest counts with `n_{m-1} = 1` and `n_i = max(1, ⌈Σ_{j>i} n_j F(i,j)⌉)`.
pub fn iteration_counts(spectrum: &SpectrumGroups, etas: &[f64]) -> Result<Vec<usize>> {
    let factors = CouplingFactors::compute(spectrum, etas)?;
    let m = spectrum.num_groups();
    let mut counts = vec![1usize; m];
    for i in (0..m.saturating_sub(1)).rev() {
        let sum: f64 = (i + 1..m).map(|j| counts[j] as f64 * factors.get(i, j)).sum();
        let need = sum.ceil();
        if !need.is_finite() || need >= u32::MAX as f64 {
            return Err(Error::ScheduleInfeasible {
                i,
                j: m - 1,
                reason: format!("required inner count {sum:e} is not representable"),
            });
        }
        counts[i] = (need as usize).max(1);
    }
    Ok(counts)
}

/// `ln c_i` for every group, where `c_i` bounds the cycle's action on group `i`:
/// `c_i = Π_{j≤i} (1 - η_j σ_{i,d_i})^{n_j} · Π_{j>i} |1 - η_j σ_{i,1}|^{n_j}`.
///
/// Logs avoid the overflow of the growth factors on stiff groups.
pub fn group_bound_logs(spectrum: &SpectrumGroups, schedule: &Schedule) -> Result<Vec<f64>> {
    ensure_matching(spectrum, &schedule.etas)?;
    let m = spectrum.num_groups();
    let top = spectrum.sigma_top();
    let bot = spectrum.sigma_bot();
    Ok((0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let factor = if j <= i {
                        1.0 - schedule.etas[j] * bot[i]
                    } else {
                        (1.0 - schedule.etas[j] * top[i]).abs()
                    };
                    schedule.counts[j] as f64 * factor.ln()
                })
                .sum()
        })
        .collect())
}

/// The per-group bounds `c_i` (may overflow to infinity for stiff groups).
pub fn group_bounds(spectrum: &SpectrumGroups, schedule: &Schedule) -> Result<Vec<f64>> {
    Ok(group_bound_logs(spectrum, schedule)?.into_iter().map(f64::exp).collect())
}

/// `Π_j (1 - η_j σ_{m,d_m})^{n_j}`, the guaranteed per-cycle error contraction.
pub fn contraction_bound(spectrum: &SpectrumGroups, schedule: &Schedule) -> Result<f64> {
    ensure_matching(spectrum, &schedule.etas)?;
    let smallest = *spectrum.sigma_bot().last().unwrap();
    let mut log_bound = 0.0;
    for (group, (eta, &n)) in schedule.etas.iter().zip(&schedule.counts).enumerate() {
        let factor = 1.0 - eta * smallest;
        if !(0.0..1.0).contains(&factor) {
            return Err(Error::BoundInvalid { group, factor });
        }
        log_bound += n as f64 * factor.ln();
    }
    Ok(log_bound.exp())
}

/// Closed-form upper bounds on the coupling factors for a hierarchical
/// spectrum with equal decay and equal local condition numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingUpperBounds {
    /// Bound on `F(i, i+1)`.
    pub adjacent: f64,
    /// Bound on `F(i, j)` with `j - (i + 1) = gap`; absent when `gap == 0`.
    pub far: Option<f64>,
    /// The constant `C` with `ln((1 - η r^{k+1}) / (1 - η r^k)) ≤ C r^k`.
    pub far_constant: Option<f64>,
}

/// Upper bounds on `F(i, i+1)` and `F(i, i+1+gap)` in terms of `r`, `eta`, `kappa_c`.
///
/// `C = -η r + η / (1 - η r^k)` is taken from the log inequality
/// `ln(1 - η r^{k+1}) - ln(1 - η r^k) ≤ -η r^{k+1} + η r^k / (1 - η r^k)`.
pub fn coupling_upper_bounds(r: f64, eta: f64, kappa_c: f64, gap: usize) -> Result<CouplingUpperBounds> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("decay must lie in (0, 1), got {r}")));
    }
    let ek = eta * kappa_c;
    if !(eta > 0.0 && kappa_c >= 1.0 && ek >= 1.0) {
        return Err(Error::Domain(format!("need eta * kappa_c >= 1, got {ek}")));
    }
    let denom = ek * (1.0 - r) - r;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!("eta*kappa_c*(1-r) - r = {denom} is not positive")));
    }
    let prefactor = ek * (ek - r) / denom;
    let adjacent = prefactor * (-(r * (ek - 1.0)).ln() + kappa_c - eta * r - 1.0);

    let (far, far_constant) = if gap == 0 {
        (None, None)
    } else {
        let rk = r.powi(gap as i32);
        if eta * rk >= 1.0 {
            return Err(Error::Domain(format!("eta * r^{gap} = {} must be < 1", eta * rk)));
        }
        let c = -eta * r + eta / (1.0 - eta * rk);
        (Some(prefactor * (-r.ln() + c * rk)), Some(c))
    };
    Ok(CouplingUpperBounds { adjacent, far, far_constant })
}

/// Estimated gradient evaluations to reach relative error `target_eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimates {
    /// Plain gradient descent: `κ |ln ε|` with `κ` the global condition number.
    pub gd: f64,
    /// Square-root accelerated class: `√κ |ln ε|`.
    pub gd_plus: f64,
    /// Multirate: `(Σ n_i) |ln ε| / |ln c_m|`.
    pub mrgd: f64,
}

/// Iteration-count estimates for plain, accelerated and multirate descent.
///
/// `κ = σ_{1,1} / σ_{m,d_m}` reduces to `κ_c r^{1-m}` for hierarchical spectra.
pub fn complexity_estimates(spectrum: &SpectrumGroups, schedule: &Schedule, target_eps: f64) -> Result<ComplexityEstimates> {
    if !(target_eps > 0.0 && target_eps < 1.0) {
        return Err(Error::Domain(format!("target accuracy must lie in (0, 1), got {target_eps}")));
    }
    let log_eps = target_eps.ln().abs();
    let kappa = spectrum.condition_number();
    let bound = contraction_bound(spectrum, schedule)?;
    let mrgd = if bound == 0.0 {
        schedule.steps_per_cycle() as f64
    } else {
        schedule.steps_per_cycle() as f64 * log_eps / bound.ln().abs()
    };
    Ok(ComplexityEstimates { gd: kappa * log_eps, gd_plus: kappa.sqrt() * log_eps, mrgd })
}
