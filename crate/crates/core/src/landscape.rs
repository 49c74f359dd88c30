//! Probes of the multiscale structure of small fully-connected networks.
//!
//! The model is `f(x) = W^{L+1} f^L(x)` with `f^ℓ = σ(W^ℓ f^{ℓ-1} + b^ℓ)` and
//! `f^0 = x`, trained on `L(W) = (1/2N) Σ (f(x_i) − g_i)²`. Layers are indexed
//! from 1 in the public API (`layer = 1` is the input layer).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{
    column_group_norms, generate_multiscale_dataset, logistic_loss_grad, Dataset, MultiscaleDataSpec, TargetKind,
};

/// Smooth activations with bounded first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Sigmoid => {
                let s = self.value(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.25,
            _ => 1.0,
        }
    }
}

/// Scalar-output MLP. `weights[ℓ-1]` is `W^ℓ`; the last weight is a row and
/// the output layer carries no bias or activation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub activation: Activation,
}

/// Gradients of the least-squares loss, laid out like the model.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub loss: f64,
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

struct Forward {
    /// `acts[0] = X`, `acts[ℓ] = f^ℓ` row-wise.
    acts: Vec<DMatrix<f64>>,
    /// Pre-activations `z^ℓ`, `pre[ℓ-1]` for `ℓ = 1..=L`.
    pre: Vec<DMatrix<f64>>,
    out: DVector<f64>,
}

fn add_bias(mut z: DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    for mut row in z.row_iter_mut() {
        row += b.transpose();
    }
    z
}

impl MlpModel {
    pub fn new(weights: Vec<DMatrix<f64>>, biases: Vec<DVector<f64>>, activation: Activation) -> Result<Self> {
        let model = Self { weights, biases, activation };
        model.validate()?;
        Ok(model)
    }

    /// Gaussian weights with standard deviation `1/√fan_in`, zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = input_dim;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for &width in hidden.iter().chain(std::iter::once(&1)) {
            let scale = 1.0 / (fan_in.max(1) as f64).sqrt();
            weights.push(DMatrix::from_fn(width, fan_in, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            }));
            fan_in = width;
        }
        for &width in hidden {
            biases.push(DVector::zeros(width));
        }
        Self::new(weights, biases, activation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.biases.len() + 1 != self.weights.len() {
            return Err(Error::Validation(format!(
                "{} weight matrices need {} biases, got {}",
                self.weights.len(),
                self.weights.len().saturating_sub(1),
                self.biases.len()
            )));
        }
        for l in 1..self.weights.len() {
            if self.weights[l].ncols() != self.weights[l - 1].nrows() {
                return Err(Error::Validation(format!("layer {} input width does not match layer {l}", l + 1)));
            }
        }
        for (l, b) in self.biases.iter().enumerate() {
            if b.len() != self.weights[l].nrows() {
                return Err(Error::Validation(format!("bias {} has length {}", l + 1, b.len())));
            }
        }
        if self.weights.last().unwrap().nrows() != 1 {
            return Err(Error::Validation("output layer must be scalar".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.biases.len()
    }

    fn forward(&self, x: &DMatrix<f64>) -> Forward {
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.depth());
        for l in 0..self.depth() {
            let z = add_bias(&acts[l] * self.weights[l].transpose(), &self.biases[l]);
            acts.push(z.map(|v| self.activation.value(v)));
            pre.push(z);
        }
        let out = (acts.last().unwrap() * self.weights.last().unwrap().transpose()).column(0).into_owned();
        Forward { acts, pre, out }
    }

    /// Scalar outputs for every row of `x`.
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.forward(x).out
    }

    /// Hidden representation `f^ℓ(x)` for a single input (`f^0 = x`).
    pub fn layer_output(&self, x: &DVector<f64>, layer: usize) -> DVector<f64> {
        let mut a = x.clone();
        for l in 0..layer.min(self.depth()) {
            a = (&self.weights[l] * a + &self.biases[l]).map(|v| self.activation.value(v));
        }
        a
    }

    /// Outputs and `∂f/∂z¹` when the first pre-activation is replaced by `z1`.
    fn from_first_preact(&self, z1: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let depth = self.depth();
        let mut pre = vec![z1.clone()];
        let mut acts = vec![z1.map(|v| self.activation.value(v))];
        for l in 1..depth {
            let z = add_bias(&acts[l - 1] * self.weights[l].transpose(), &self.biases[l]);
            acts.push(z.map(|v| self.activation.value(v)));
            pre.push(z);
        }
        let out = (acts.last().unwrap() * self.weights[depth].transpose()).column(0).into_owned();
        let n = z1.nrows();
        let mut delta = DMatrix::from_element(n, 1, 1.0) * &self.weights[depth];
        for l in (0..depth).rev() {
            delta.zip_apply(&pre[l], |d, z| *d *= self.activation.derivative(z));
            if l > 0 {
                delta = delta * &self.weights[l];
            }
        }
        (out, delta)
    }
}

fn check_regression(model: &MlpModel, dataset: &Dataset) -> Result<()> {
    if dataset.targets.ncols() != 1 {
        return Err(Error::Validation("MLP probes need scalar targets".into()));
    }
    if dataset.dim() != model.input_dim() {
        return Err(Error::Validation(format!(
            "model expects {} inputs, dataset has {}",
            model.input_dim(),
            dataset.dim()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Validation("empty dataset".into()));
    }
    Ok(())
}

/// Loss `(1/2N) Σ (f − g)²` and its exact gradients by reverse mode.
pub fn mlp_loss_and_grads(model: &MlpModel, dataset: &Dataset) -> Result<MlpGrads> {
    check_regression(model, dataset)?;
    let n = dataset.len() as f64;
    let fw = model.forward(&dataset.features);
    let resid = &fw.out - dataset.targets.column(0);
    let loss = resid.norm_squared() / (2.0 * n);
    let r = resid / n;

    let depth = model.depth();
    let mut weights = vec![DMatrix::zeros(0, 0); depth + 1];
    let mut biases = vec![DVector::zeros(0); depth];
    weights[depth] = DMatrix::from_row_slice(1, fw.acts[depth].ncols(), (r.transpose() * &fw.acts[depth]).as_slice());
    let mut delta = &r * &model.weights[depth];
    for l in (0..depth).rev() {
        delta.zip_apply(&fw.pre[l], |d, z| *d *= model.activation.derivative(z));
        weights[l] = delta.transpose() * &fw.acts[l];
        biases[l] = delta.row_sum().transpose();
        if l > 0 {
            delta = delta * &model.weights[l];
        }
    }
    Ok(MlpGrads { loss, weights, biases })
}

/// Column-group norms of a layer gradient, per row and over the whole matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNorms {
    /// `per_row[i][k]`: norm of row `i` restricted to column group `k`.
    pub per_row: Vec<Vec<f64>>,
    pub aggregate: Vec<f64>,
}

fn group_norms(grad: &DMatrix<f64>, group_dims: &[usize]) -> Result<GroupNorms> {
    if group_dims.iter().sum::<usize>() != grad.ncols() {
        return Err(Error::Validation(format!(
            "column groups {group_dims:?} do not cover {} columns",
            grad.ncols()
        )));
    }
    let per_row = grad.row_iter().map(|row| column_group_norms(&DMatrix::from_row_slice(1, row.len(), row.clone_owned().as_slice()), group_dims)).collect();
    Ok(GroupNorms { per_row, aggregate: column_group_norms(grad, group_dims) })
}

/// Group norms of `∂L/∂W¹` with columns split by the data groups.
pub fn first_layer_group_norms(model: &MlpModel, dataset: &Dataset, group_dims: &[usize]) -> Result<GroupNorms> {
    let grads = mlp_loss_and_grads(model, dataset)?;
    group_norms(&grads.weights[0], group_dims)
}

/// `n` nearly equal contiguous widths summing to `total`.
pub fn even_split(total: usize, n: usize) -> Vec<usize> {
    (0..n).map(|k| total / n + usize::from(k < total % n)).collect()
}

/// Group norms of `∂L/∂W²` with its columns split into `groups` contiguous blocks.
pub fn second_layer_group_norms(model: &MlpModel, dataset: &Dataset, groups: usize) -> Result<GroupNorms> {
    if model.weights.len() < 2 {
        return Err(Error::Validation("model has no second layer".into()));
    }
    let grads = mlp_loss_and_grads(model, dataset)?;
    group_norms(&grads.weights[1], &even_split(grads.weights[1].ncols(), groups))
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Gradient norms over an `ε` sweep with their fitted slopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub epsilons: Vec<f64>,
    /// `norms[e][k]` for sweep point `e` and group `k`.
    pub norms: Vec<Vec<f64>>,
    /// Fitted `d ln‖·‖ / d ln ε` per group.
    pub slopes: Vec<Option<f64>>,
}

impl ScalingReport {
    fn from_norms(epsilons: &[f64], norms: Vec<Vec<f64>>) -> Self {
        let groups = norms.first().map_or(0, Vec::len);
        let slopes = (0..groups)
            .map(|k| loglog_slope(epsilons, &norms.iter().map(|row| row[k]).collect::<Vec<_>>()))
            .collect();
        Self { epsilons: epsilons.to_vec(), norms, slopes }
    }

    /// Largest over smallest group norm, worst case over the sweep.
    pub fn max_spread(&self) -> f64 {
        self.norms
            .iter()
            .map(|row| {
                let hi = row.iter().cloned().fold(0.0, f64::max);
                let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
                hi / lo
            })
            .fold(1.0, f64::max)
    }

    /// Rows `epsilon,group,norm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,group,norm\n");
        for (eps, row) in self.epsilons.iter().zip(&self.norms) {
            for (k, v) in row.iter().enumerate() {
                s.push_str(&format!("{eps},{k},{v}\n"));
            }
        }
        s
    }
}

/// The sweep data: `base` with scales `ε^k`, same samples at every `ε`.
fn sweep_dataset(base: &MultiscaleDataSpec, eps: f64, target: TargetKind) -> Result<Dataset> {
    let spec = MultiscaleDataSpec::power_cascade(base.group_dims.clone(), eps, base.samples, base.seed)?
        .with_sampler(base.sampler);
    generate_multiscale_dataset(&spec, target)
}

/// First- and second-layer gradient group norms of a fixed model across `epsilons`.
pub fn mlp_gradient_scaling(
    model: &MlpModel,
    base: &MultiscaleDataSpec,
    epsilons: &[f64],
) -> Result<(ScalingReport, ScalingReport)> {
    let groups = base.group_dims.len();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for &eps in epsilons {
        let ds = sweep_dataset(base, eps, TargetKind::LinearRegression)?;
        first.push(first_layer_group_norms(model, &ds, &base.group_dims)?.aggregate);
        second.push(second_layer_group_norms(model, &ds, groups)?.aggregate);
    }
    Ok((ScalingReport::from_norms(epsilons, first), ScalingReport::from_norms(epsilons, second)))
}

/// Group norms of the softmax-regression weight gradient across `epsilons`,
/// evaluated at seeded Gaussian weights.
pub fn logistic_gradient_scaling(
    base: &MultiscaleDataSpec,
    classes: usize,
    weight_seed: u64,
    epsilons: &[f64],
) -> Result<ScalingReport> {
    let d = base.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(weight_seed);
    let w = DMatrix::from_fn(classes, d, |_, _| StandardNormal.sample(&mut rng));
    let b = DVector::from_fn(classes, |_, _| StandardNormal.sample(&mut rng));
    let mut norms = Vec::new();
    for &eps in epsilons {
        let ds = sweep_dataset(base, eps, TargetKind::Classification { classes, one_hot: false })?;
        let ev = logistic_loss_grad(&ds, &w, &b)?;
        norms.push(column_group_norms(&ev.grad_w, &base.group_dims));
    }
    Ok(ScalingReport::from_norms(epsilons, norms))
}

/// How [`first_layer_row_hessian`] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// `(1/N) Σ s(x_i) x_i x_iᵀ` with `s = c² + (f − g) ∂²f/∂z²`.
    Formula,
    /// Central differences of the exact row gradient.
    FiniteDifference,
}

/// Per-sample weights `s(x_i)` of the row Hessian of first-layer row `row`.
pub fn row_hessian_weights(model: &MlpModel, dataset: &Dataset, row: usize) -> Result<DVector<f64>> {
    check_regression(model, dataset)?;
    if row >= model.weights[0].nrows() {
        return Err(Error::Validation(format!("row {row} out of range")));
    }
    let z1 = add_bias(&dataset.features * model.weights[0].transpose(), &model.biases[0]);
    let (out, sens) = model.from_first_preact(&z1);
    let step = f64::EPSILON.cbrt();
    let h = z1.column(row).map(|z| step * z.abs().max(1.0));
    let shifted = |sign: f64| {
        let mut z = z1.clone();
        z.column_mut(row).axpy(sign, &h, 1.0);
        model.from_first_preact(&z).1.column(row).into_owned()
    };
    let (plus, minus) = (shifted(1.0), shifted(-1.0));
    let g = dataset.targets.column(0);
    Ok(DVector::from_fn(dataset.len(), |i, _| {
        let c = sens[(i, row)];
        let curvature = (plus[i] - minus[i]) / (2.0 * h[i]);
        c * c + (out[i] - g[i]) * curvature
    }))
}

/// Hessian of the loss with respect to row `row` of `W¹`.
pub fn first_layer_row_hessian(
    model: &MlpModel,
    dataset: &Dataset,
    row: usize,
    mode: HessianMode,
) -> Result<DMatrix<f64>> {
    match mode {
        HessianMode::Formula => {
            let s = row_hessian_weights(model, dataset, row)?;
            let x = &dataset.features;
            let mut weighted = x.clone();
            for (i, mut r) in weighted.row_iter_mut().enumerate() {
                r *= s[i];
            }
            Ok(x.transpose() * weighted / dataset.len() as f64)
        }
        HessianMode::FiniteDifference => {
            check_regression(model, dataset)?;
            if row >= model.weights[0].nrows() {
                return Err(Error::Validation(format!("row {row} out of range")));
            }
            let d = model.input_dim();
            let step = f64::EPSILON.cbrt();
            let mut hess = DMatrix::zeros(d, d);
            for k in 0..d {
                let h = step * model.weights[0][(row, k)].abs().max(1.0);
                let grad_at = |delta: f64| -> Result<DVector<f64>> {
                    let mut m = model.clone();
                    m.weights[0][(row, k)] += delta;
                    Ok(mlp_loss_and_grads(&m, dataset)?.weights[0].row(row).transpose())
                };
                let col = (grad_at(h)? - grad_at(-h)?) / (2.0 * h);
                hess.set_column(k, &col);
            }
            Ok((&hess + hess.transpose()) * 0.5)
        }
    }
}

/// `‖A − B‖_F / ‖B‖_F`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Spearman correlation between the row-Hessian curvature magnitude `|vᵀHv|`
/// along each eigenvector `v` of `XᵀX/N` and the corresponding covariance
/// eigenvalue. The weights `s(x_i)` may be negative, so only magnitudes are
/// compared.
pub fn hessian_covariance_rank_correlation(hessian: &DMatrix<f64>, features: &DMatrix<f64>) -> f64 {
    let cov = features.transpose() * features / features.nrows() as f64;
    let eig = nalgebra::SymmetricEigen::new((&cov + cov.transpose()) * 0.5);
    let curv: Vec<f64> = eig.eigenvectors.column_iter().map(|v| v.dot(&(hessian * v)).abs()).collect();
    spearman(&curv, eig.eigenvalues.as_slice())
}

/// Outcome of [`expansion_order_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub layer: usize,
    pub epsilons: Vec<f64>,
    /// `‖G(ε) − G(0)‖_F` per sweep point.
    pub deviations: Vec<f64>,
    pub slope: Option<f64>,
    /// Fewer than three points rose above the rounding floor.
    pub inconclusive: bool,
}

/// Default sweep `ε ∈ {10⁻¹, 10⁻¹·⁵, 10⁻², 10⁻²·⁵}`.
pub fn default_expansion_epsilons() -> Vec<f64> {
    [-1.0, -1.5, -2.0, -2.5].iter().map(|p: &f64| 10f64.powf(*p)).collect()
}

/// Zero every column outside the leading data group.
pub fn truncate_to_leading_group(dataset: &Dataset, leading_dim: usize) -> Dataset {
    let mut ds = dataset.clone();
    let d = ds.dim();
    ds.features.columns_mut(leading_dim, d - leading_dim).fill(0.0);
    ds
}

/// Fit the order of `G(ε) − G(0)` for the gradient of layer `layer` (1-based,
/// `depth + 1` is the output layer) under power-cascade data built from `base`.
pub fn expansion_order_check(
    model: &MlpModel,
    base: &MultiscaleDataSpec,
    layer: usize,
    epsilons: &[f64],
) -> Result<ExpansionReport> {
    if layer == 0 || layer > model.weights.len() {
        return Err(Error::Validation(format!("layer {layer} outside 1..={}", model.weights.len())));
    }
    let mut deviations = Vec::with_capacity(epsilons.len());
    let mut floor = 0.0f64;
    for &eps in epsilons {
        let ds = sweep_dataset(base, eps, TargetKind::LinearRegression)?;
        let full = mlp_loss_and_grads(model, &ds)?.weights.swap_remove(layer - 1);
        let lead = mlp_loss_and_grads(model, &truncate_to_leading_group(&ds, base.group_dims[0]))?
            .weights
            .swap_remove(layer - 1);
        floor = floor.max(1e3 * f64::EPSILON * lead.norm());
        deviations.push((full - lead).norm());
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        epsilons.iter().zip(&deviations).filter(|(_, d)| **d > floor).map(|(e, d)| (*e, *d)).unzip();
    let inconclusive = xs.len() < 3;
    let slope = if inconclusive { None } else { loglog_slope(&xs, &ys) };
    Ok(ExpansionReport { layer, epsilons: epsilons.to_vec(), deviations, slope, inconclusive })
}

/// Both sides of the hidden-layer perturbation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl PerturbationBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-8)
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// `lhs = ‖f^ℓ(x⁰ + εx¹) − f^ℓ(x⁰)‖`,
/// `rhs = ε Lip(σ)^ℓ ‖W¹x¹‖ Π_{k=2..ℓ} ‖W^k‖₂` for hidden layer `layer`.
pub fn layer_perturbation_bound_check(
    model: &MlpModel,
    x0: &DVector<f64>,
    direction: &DVector<f64>,
    epsilon: f64,
    layer: usize,
) -> Result<PerturbationBound> {
    if layer == 0 || layer > model.depth() {
        return Err(Error::Validation(format!("layer {layer} outside 1..={}", model.depth())));
    }
    if x0.len() != model.input_dim() || direction.len() != model.input_dim() {
        return Err(Error::Validation("input length does not match the model".into()));
    }
    let lhs = (model.layer_output(&(x0 + direction * epsilon), layer) - model.layer_output(x0, layer)).norm();
    let mut rhs = epsilon * model.activation.lipschitz().powi(layer as i32) * (&model.weights[0] * direction).norm();
    for w in &model.weights[1..layer] {
        rhs *= spectral_norm(w);
    }
    Ok(PerturbationBound { lhs, rhs })
}
