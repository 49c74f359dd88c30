//! Symmetric eigendecomposition and clustering of eigenvalues into scale groups.
//!
//! Groups are indexed from zero here: group `0` holds the largest eigenvalues,
//! group `m - 1` the smallest. Within each group `sigma_top` is the principal
//! eigenvalue and `sigma_bot` the smallest one.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Computed eigenvalues this close to zero (relative to the largest) are rejected.
pub const ZERO_EIGEN_RTOL: f64 = 1e-12;

/// Default ratio below which consecutive eigenvalues start a new group.
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.1;

const SYMMETRY_RTOL: f64 = 1e-10;

/// Eigenpairs of a symmetric positive-definite matrix, sorted non-increasing.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub basis: DMatrix<f64>,
}

/// Eigendecomposition `A = V diag(λ) Vᵀ` with `λ` sorted non-increasing.
pub fn eigendecompose_symmetric(a: &DMatrix<f64>) -> Result<Eigen> {
    if !a.is_square() {
        return Err(Error::Validation(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::Validation("empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    let asym = (a - a.transpose()).norm();
    if asym > SYMMETRY_RTOL * a.norm() {
        return Err(Error::Validation(format!(
            "matrix is not symmetric: |A - A^T|_F = {asym:e}"
        )));
    }

    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let basis = DMatrix::from_fn(a.nrows(), a.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    check_positive(&values)?;
    Ok(Eigen { values, basis })
}

/// Eigenvalues of the second-moment matrix `XᵀX / N`, computed from the
/// singular values of `X` so the product is never formed.
///
/// Returns all `d` values sorted non-increasing; values beyond the rank of
/// `X` are zero.
pub fn covariance_spectrum(features: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (n, d) = features.shape();
    if n == 0 || d == 0 {
        return Err(Error::Validation("empty data matrix".into()));
    }
    let scaled = features / (n as f64).sqrt();
    let svd = SVD::new(scaled, false, false);
    let mut values: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    values.resize(d, 0.0);
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

fn check_positive(values: &[f64]) -> Result<()> {
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() || value <= ZERO_EIGEN_RTOL * top.max(0.0) || value <= 0.0 {
            return Err(Error::IndefiniteMatrix { index, value });
        }
    }
    Ok(())
}

fn check_spectrum(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Validation("empty spectrum".into()));
    }
    // Given spectra only need to be positive; the relative zero test applies to
    // computed eigenvalues, where tiny values are rounding noise.
    for (k, &v) in values.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Domain(format!(
                "eigenvalue {v:e} at index {k} is not strictly positive"
            )));
        }
    }
    if let Some(k) = values.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::Validation(format!(
            "eigenvalues must be non-increasing (index {} > index {k})",
            k + 1
        )));
    }
    Ok(())
}

/// A positive spectrum partitioned into contiguous clusters of comparable magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SpectrumReport", try_from = "SpectrumReport")]
pub struct SpectrumGroups {
    eigenvalues: Vec<f64>,
    group_sizes: Vec<usize>,
    sigma_top: Vec<f64>,
    sigma_bot: Vec<f64>,
    kappa: Vec<f64>,
    decay: Vec<f64>,
}

impl SpectrumGroups {
    /// Start a new group wherever `λ[k+1] / λ[k] < gap_threshold`.
    pub fn detect(eigenvalues: &[f64], gap_threshold: f64) -> Result<Self> {
        if !(gap_threshold > 0.0 && gap_threshold < 1.0) {
            return Err(Error::Domain(format!(
                "gap threshold must lie in (0, 1), got {gap_threshold}"
            )));
        }
        check_spectrum(eigenvalues)?;
        let mut sizes = vec![1usize];
        for w in eigenvalues.windows(2) {
            if w[1] / w[0] < gap_threshold {
                sizes.push(1);
            } else {
                *sizes.last_mut().unwrap() += 1;
            }
        }
        let groups = Self::from_sizes(eigenvalues, &sizes)?;
        debug_assert!(groups.decay.iter().all(|&r| r < 1.0));
        Ok(groups)
    }

    /// Group with caller-declared sizes; every declared boundary must be a
    /// strict drop `σ_{i,d_i} > σ_{i+1,1}`.
    pub fn from_sizes(eigenvalues: &[f64], group_sizes: &[usize]) -> Result<Self> {
        check_spectrum(eigenvalues)?;
        if group_sizes.is_empty() || group_sizes.contains(&0) {
            return Err(Error::Validation("group sizes must be positive".into()));
        }
        let total: usize = group_sizes.iter().sum();
        if total != eigenvalues.len() {
            return Err(Error::Validation(format!(
                "group sizes sum to {total} but the spectrum has {} values",
                eigenvalues.len()
            )));
        }

        let mut sigma_top = Vec::with_capacity(group_sizes.len());
        let mut sigma_bot = Vec::with_capacity(group_sizes.len());
        let mut start = 0;
        for &size in group_sizes {
            sigma_top.push(eigenvalues[start]);
            sigma_bot.push(eigenvalues[start + size - 1]);
            start += size;
        }
        for g in 0..group_sizes.len().saturating_sub(1) {
            let ratio = sigma_top[g + 1] / sigma_bot[g];
            if ratio >= 1.0 {
                return Err(Error::InvalidGrouping { group: g, ratio });
            }
        }
        let kappa = sigma_top.iter().zip(&sigma_bot).map(|(t, b)| t / b).collect();
        let decay = sigma_top.windows(2).map(|w| w[1] / w[0]).collect();
        Ok(Self {
            eigenvalues: eigenvalues.to_vec(),
            group_sizes: group_sizes.to_vec(),
            sigma_top,
            sigma_bot,
            kappa,
            decay,
        })
    }

    /// Hierarchical spectrum with equal decay `r` between group tops and equal
    /// local condition number `kappa` inside every group.
    ///
    /// Group `i` has top `r^i`; its eigenvalues are spaced geometrically down
    /// to `r^i / kappa`. Single-member groups require `kappa == 1`.
    pub fn hierarchical(group_sizes: &[usize], decay: f64, kappa: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::Domain(format!("decay must lie in (0, 1), got {decay}")));
        }
        if !(kappa >= 1.0 && kappa * decay < 1.0) {
            return Err(Error::Domain(format!(
                "kappa must lie in [1, 1/decay), got {kappa} with decay {decay}"
            )));
        }
        let mut eigenvalues = Vec::new();
        for (g, &size) in group_sizes.iter().enumerate() {
            let top = decay.powi(g as i32);
            match size {
                0 => return Err(Error::Validation("group sizes must be positive".into())),
                1 if kappa != 1.0 => {
                    return Err(Error::Validation(format!(
                        "group {g} has one member but kappa = {kappa}"
                    )))
                }
                1 => eigenvalues.push(top),
                _ => eigenvalues.extend(
                    (0..size).map(|k| top * kappa.powf(-(k as f64) / (size - 1) as f64)),
                ),
            }
        }
        Self::from_sizes(&eigenvalues, group_sizes)
    }

    /// Number of groups `m`.
    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn sigma_top(&self) -> &[f64] {
        &self.sigma_top
    }

    pub fn sigma_bot(&self) -> &[f64] {
        &self.sigma_bot
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    /// Eigenvalues belonging to group `g`.
    pub fn group(&self, g: usize) -> &[f64] {
        let start: usize = self.group_sizes[..g].iter().sum();
        &self.eigenvalues[start..start + self.group_sizes[g]]
    }

    /// Index range of group `g` within the sorted spectrum.
    pub fn group_range(&self, g: usize) -> std::ops::Range<usize> {
        let start: usize = self.group_sizes[..g].iter().sum();
        start..start + self.group_sizes[g]
    }

    /// Global condition number `σ_{1,1} / σ_{m,d_m}`.
    pub fn condition_number(&self) -> f64 {
        self.eigenvalues[0] / self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn report(&self) -> SpectrumReport {
        self.clone().into()
    }
}

/// JSON form: `{eigenvalues, groups: [{size, sigma_top, sigma_bot, kappa}], decay}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub groups: Vec<GroupReport>,
    pub decay: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub size: usize,
    pub sigma_top: f64,
    pub sigma_bot: f64,
    pub kappa: f64,
}

impl From<SpectrumGroups> for SpectrumReport {
    fn from(s: SpectrumGroups) -> Self {
        let groups = (0..s.num_groups())
            .map(|g| GroupReport {
                size: s.group_sizes[g],
                sigma_top: s.sigma_top[g],
                sigma_bot: s.sigma_bot[g],
                kappa: s.kappa[g],
            })
            .collect();
        SpectrumReport { eigenvalues: s.eigenvalues, groups, decay: s.decay }
    }
}

impl TryFrom<SpectrumReport> for SpectrumGroups {
    type Error = Error;

    fn try_from(r: SpectrumReport) -> Result<Self> {
        let sizes: Vec<usize> = r.groups.iter().map(|g| g.size).collect();
        SpectrumGroups::from_sizes(&r.eigenvalues, &sizes)
    }
}
