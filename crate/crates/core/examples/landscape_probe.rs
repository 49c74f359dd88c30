//! Gradient scaling, row-Hessian identity and expansion order on a small tanh MLP.
//!
//! cargo run --release --example landscape_probe

use multirate::landscape::{
    default_expansion_epsilons, expansion_order_check, first_layer_row_hessian, hessian_covariance_rank_correlation,
    logistic_gradient_scaling, mlp_gradient_scaling, relative_frobenius, Activation, HessianMode, MlpModel,
};
use multirate::problems::{generate_multiscale_dataset, MultiscaleDataSpec, TargetKind};

fn main() -> multirate::Result<()> {
    let epsilons = [1e-1, 1e-2, 1e-3, 1e-4];
    let base = MultiscaleDataSpec::new(vec![6, 4], vec![1.0, 0.1], 1000, 3)?;
    let model = MlpModel::init(10, &[8, 8], Activation::Tanh, 5)?;
    let (first, second) = mlp_gradient_scaling(&model, &base, &epsilons)?;
    println!("first layer slopes  {:?}", first.slopes);
    println!("second layer slopes {:?}  spread {:.2}", second.slopes, second.max_spread());
    let logit = logistic_gradient_scaling(&base, 3, 1, &epsilons)?;
    println!("softmax slopes      {:?}", logit.slopes);

    let cascade = MultiscaleDataSpec::power_cascade(vec![1; 10], 0.5, 200, 8)?;
    let ds = generate_multiscale_dataset(&cascade, TargetKind::LinearRegression)?;
    let small = MlpModel::init(10, &[6, 4], Activation::Tanh, 2)?;
    for row in 0..6 {
        let formula = first_layer_row_hessian(&small, &ds, row, HessianMode::Formula)?;
        let fd = first_layer_row_hessian(&small, &ds, row, HessianMode::FiniteDifference)?;
        println!(
            "row {row}: relative Frobenius gap {:.2e}, rank correlation {:.3}",
            relative_frobenius(&formula, &fd),
            hessian_covariance_rank_correlation(&formula, &ds.features)
        );
    }

    let sweep = MultiscaleDataSpec::new(vec![6, 2, 2], vec![1.0, 0.1, 0.01], 1000, 4)?;
    for layer in 1..=3 {
        let rep = expansion_order_check(&model, &sweep, layer, &default_expansion_epsilons())?;
        println!("layer {layer}: expansion slope {:?}", rep.slope);
    }
    Ok(())
}
