//! Multiscale data hidden by a random rotation, recovered by PCA alignment.
//!
//! cargo run --release --example pca_alignment

use multirate::problems::{generate_multiscale_dataset, pca_align, MultiscaleDataSpec, TargetKind};
use multirate::SpectrumGroups;
use nalgebra::DMatrix;

fn main() -> multirate::Result<()> {
    let spec = MultiscaleDataSpec::power_cascade(vec![4, 3, 3], 0.1, 5000, 11)?;
    let data = generate_multiscale_dataset(&spec, TargetKind::LinearRegression)?;
    let q = DMatrix::from_fn(10, 10, |i, j| ((3 * i + 5 * j) as f64).cos()).qr().q();
    let mixed = data.rotated(&q);
    let aligned = pca_align(&mixed)?;

    let groups = SpectrumGroups::detect(&aligned.second_moment_spectrum()?, 0.1)?;
    println!("groups {:?}, tops {:?}", groups.group_sizes(), groups.sigma_top());
    let n = aligned.len() as f64;
    let variances: Vec<String> =
        (0..aligned.dim()).map(|j| format!("{:.1e}", aligned.features.column(j).norm_squared() / n)).collect();
    println!("per-axis variance after alignment: {}", variances.join(" "));
    Ok(())
}
