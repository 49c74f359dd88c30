//! Eigenvalue groups of a hand-written spectrum and of a random operator with
//! the same eigenvalues.
//!
//! cargo run --example spectrum_groups

use multirate::spectrum::{eigendecompose_symmetric, SpectrumGroups, DEFAULT_GAP_THRESHOLD};
use nalgebra::{DMatrix, DVector};

fn main() -> multirate::Result<()> {
    let eigs = [1.0, 0.8, 0.5, 0.004, 0.003, 2e-5];
    let groups = SpectrumGroups::detect(&eigs, DEFAULT_GAP_THRESHOLD)?;
    println!("{}", serde_json::to_string_pretty(&groups.report())?);

    // Same spectrum in a rotated basis.
    let q = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) as f64).sin()).qr().q();
    let a = &q * DMatrix::from_diagonal(&DVector::from_row_slice(&eigs)) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = eigendecompose_symmetric(&a)?;
    let again = SpectrumGroups::detect(&eig.values, DEFAULT_GAP_THRESHOLD)?;
    println!("recovered sizes {:?}, kappa {:?}", again.group_sizes(), again.kappa());

    // Looser threshold merges the two lower groups' neighbours differently.
    let coarse = SpectrumGroups::detect(&eigs, 0.5)?;
    println!("threshold 0.5: sizes {:?}", coarse.group_sizes());
    Ok(())
}
