//! Experimental targets: multiscale synthetic data, PCA alignment, the
//! least-squares quadratic built from data, a separable non-quadratic convex
//! family with exactly block-diagonal Hessian, and softmax regression.
//!
//! Scales are standard deviations in data space; covariance eigenvalues of a
//! group scale as the square of its factor. The regression reproductions use
//! `√ε` data scales so that the eigenvalue ratio is `ε`.
//!
//! Random draws use `ChaCha8Rng` seeded from a `u64`. Features are drawn
//! row-major at unit scale and multiplied by the group scale afterwards, so two
//! specs differing only in `scales` share the same underlying samples.

use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{Objective, QuadraticProblem};
use crate::spectrum::{covariance_spectrum, SpectrumGroups};

/// Per-group sampling distribution (both have unit variance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    Gaussian,
    /// Uniform on `[-√3, √3]`.
    Uniform,
}

/// Group dimensions and scale factors of a synthetic multiscale distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleDataSpec {
    pub group_dims: Vec<usize>,
    /// `(1, ε_1, …, ε_m)`, strictly decreasing.
    pub scales: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Scales follow `ε^k` exactly.
    #[serde(default)]
    pub power_cascade: bool,
    #[serde(default)]
    pub sampler: Sampler,
}

impl MultiscaleDataSpec {
    pub fn new(group_dims: Vec<usize>, scales: Vec<f64>, samples: usize, seed: u64) -> Result<Self> {
        let spec = Self { group_dims, scales, samples, seed, power_cascade: false, sampler: Sampler::Gaussian };
        spec.validate()?;
        Ok(spec)
    }

    /// Scales `ε^k` for `k = 0..group_dims.len()`.
    pub fn power_cascade(group_dims: Vec<usize>, epsilon: f64, samples: usize, seed: u64) -> Result<Self> {
        let scales = (0..group_dims.len()).map(|k| epsilon.powi(k as i32)).collect();
        let spec = Self { group_dims, scales, samples, seed, power_cascade: true, sampler: Sampler::Gaussian };
        spec.validate()?;
        Ok(spec)
    }

    /// 80 + 20 dimensions, data scales `(1, √0.001)`, 10⁴ samples.
    pub fn two_scale_regression(seed: u64) -> Self {
        Self::new(vec![80, 20], vec![1.0, 0.001f64.sqrt()], 10_000, seed).expect("valid preset")
    }

    /// 60 + 20 + 20 dimensions, data scales `(1, √0.1, 0.1)`, 10⁴ samples.
    pub fn three_scale_regression(seed: u64) -> Self {
        Self::new(vec![60, 20, 20], vec![1.0, 0.1f64.sqrt(), 0.1], 10_000, seed).expect("valid preset")
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_scales(&self, scales: Vec<f64>) -> Result<Self> {
        let spec = Self { scales, power_cascade: false, ..self.clone() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_dims.is_empty() || self.group_dims.contains(&0) {
            return Err(Error::Validation("group dimensions must be positive".into()));
        }
        if self.scales.len() != self.group_dims.len() {
            return Err(Error::Validation(format!(
                "{} scales for {} groups",
                self.scales.len(),
                self.group_dims.len()
            )));
        }
        if self.scales[0] != 1.0 {
            return Err(Error::Validation(format!("first scale must be 1, got {}", self.scales[0])));
        }
        if self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Validation("scales must be positive".into()));
        }
        if self.scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Validation(format!("scales must be strictly decreasing: {:?}", self.scales)));
        }
        if self.power_cascade {
            let eps = self.scales.get(1).copied().unwrap_or(1.0);
            for (k, s) in self.scales.iter().enumerate() {
                let want = eps.powi(k as i32);
                if (s - want).abs() > 1e-12 * want {
                    return Err(Error::Validation(format!("scale {k} is {s}, power cascade needs {want}")));
                }
            }
        }
        if self.samples == 0 {
            return Err(Error::Validation("sample count must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.group_dims.iter().sum()
    }

    /// Column range of group `k`.
    pub fn group_range(&self, k: usize) -> Range<usize> {
        let start: usize = self.group_dims[..k].iter().sum();
        start..start + self.group_dims[k]
    }

    pub fn column_scales(&self) -> Vec<f64> {
        self.group_dims.iter().zip(&self.scales).flat_map(|(&d, &s)| std::iter::repeat_n(s, d)).collect()
    }
}

/// What the generated targets are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    /// Independent `g_i ~ N(0, 1)` labels.
    #[default]
    LinearRegression,
    /// `g = wᵀx + 0.1 ξ` for a seeded Gaussian teacher `w`.
    GaussianLabel,
    /// Softmax of a seeded linear teacher's logits; one-hot argmax when `one_hot`.
    Classification { classes: usize, one_hot: bool },
}

impl TargetKind {
    pub fn width(&self) -> usize {
        match self {
            TargetKind::Classification { classes, .. } => *classes,
            _ => 1,
        }
    }
}

/// Orthonormal rotation and mean used to align a dataset: `x̃ = Uᵀ(x − mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rotation: DMatrix<f64>,
    pub mean: DVector<f64>,
}

/// Features (`N × d`), targets (`N × c`) and optional alignment metadata.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub target_kind: TargetKind,
    pub alignment: Option<Alignment>,
    pub spec: Option<MultiscaleDataSpec>,
    /// Fewer samples than dimensions: the covariance is singular.
    pub rank_deficient: bool,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, targets: DMatrix<f64>, target_kind: TargetKind) -> Result<Self> {
        let ds = Self {
            rank_deficient: features.nrows() < features.ncols(),
            features,
            targets,
            target_kind,
            alignment: None,
            spec: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Targets as a vector (single-output datasets).
    pub fn scalar_targets(&self) -> DVector<f64> {
        self.targets.column(0).into_owned()
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.nrows() != self.features.nrows() {
            return Err(Error::Validation(format!(
                "{} feature rows but {} target rows",
                self.features.nrows(),
                self.targets.nrows()
            )));
        }
        if self.targets.ncols() != self.target_kind.width() {
            return Err(Error::Validation(format!(
                "{} target columns for {:?}",
                self.targets.ncols(),
                self.target_kind
            )));
        }
        if self.features.iter().chain(self.targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("dataset has non-finite entries".into()));
        }
        if matches!(self.target_kind, TargetKind::Classification { .. }) {
            for (i, row) in self.targets.row_iter().enumerate() {
                if row.iter().any(|&p| p < 0.0) || (row.sum() - 1.0).abs() > 1e-12 {
                    return Err(Error::Validation(format!("target row {i} is not a probability vector")));
                }
            }
        }
        if let Some(al) = &self.alignment {
            let d = self.features.ncols();
            if al.rotation.shape() != (d, d) || al.mean.len() != d {
                return Err(Error::Validation("alignment has the wrong shape".into()));
            }
            let gram = al.rotation.transpose() * &al.rotation;
            if (gram - DMatrix::identity(d, d)).amax() > 1e-8 {
                return Err(Error::Validation("alignment rotation is not orthonormal".into()));
            }
        }
        Ok(())
    }

    /// Apply `x ↦ Q x` to every sample.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Dataset {
        Dataset { features: &self.features * q.transpose(), alignment: None, ..self.clone() }
    }

    /// Eigenvalues of `XᵀX / N` via the singular values of `X`.
    pub fn second_moment_spectrum(&self) -> Result<Vec<f64>> {
        covariance_spectrum(&self.features)
    }

    /// Write the CSV (`x0..x{d-1},y0..y{c-1}`) and the JSON sidecar next to it.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        let header: Vec<String> = (0..self.dim())
            .map(|j| format!("x{j}"))
            .chain((0..self.targets.ncols()).map(|j| format!("y{j}")))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .features
                .row(i)
                .iter()
                .chain(self.targets.row(i).iter())
                .map(|v| v.to_string())
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        let sidecar = DatasetSidecar {
            spec: self.spec.clone(),
            seed: self.spec.as_ref().map(|s| s.seed),
            target_kind: self.target_kind,
            samples: self.len(),
            dim: self.dim(),
            rank_deficient: self.rank_deficient,
            alignment: self.alignment.as_ref().map(|a| AlignmentRecord {
                rotation: a.rotation.row_iter().map(|r| r.iter().copied().collect()).collect(),
                mean: a.mean.iter().copied().collect(),
            }),
        };
        std::fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Load a dataset written by [`Dataset::write`], validating its invariants.
    pub fn read(csv_path: &Path) -> Result<Dataset> {
        let sidecar: DatasetSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(csv_path))?)?;
        let mut r = csv::Reader::from_path(csv_path)?;
        let header = r.headers()?.clone();
        let c = sidecar.target_kind.width();
        let d = sidecar.dim;
        let expected: Vec<String> =
            (0..d).map(|j| format!("x{j}")).chain((0..c).map(|j| format!("y{j}"))).collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Validation(format!("unexpected CSV header in {}", csv_path.display())));
        }
        let mut values = Vec::with_capacity(sidecar.samples * (d + c));
        for rec in r.records() {
            let rec = rec?;
            for field in rec.iter() {
                values.push(field.parse::<f64>().map_err(|e| {
                    Error::Validation(format!("bad number {field:?} in {}: {e}", csv_path.display()))
                })?);
            }
        }
        let n = values.len() / (d + c);
        if n != sidecar.samples {
            return Err(Error::Validation(format!("sidecar says {} rows, CSV has {n}", sidecar.samples)));
        }
        let all = DMatrix::from_row_slice(n, d + c, &values);
        let alignment = sidecar.alignment.map(|a| Alignment {
            rotation: DMatrix::from_row_iterator(d, d, a.rotation.into_iter().flatten()),
            mean: DVector::from_vec(a.mean),
        });
        let ds = Dataset {
            features: all.columns(0, d).into_owned(),
            targets: all.columns(d, c).into_owned(),
            target_kind: sidecar.target_kind,
            alignment,
            spec: sidecar.spec,
            rank_deficient: sidecar.rank_deficient,
        };
        ds.validate()?;
        Ok(ds)
    }
}

/// `data.csv` → `data.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

#[derive(Debug, Serialize, Deserialize)]
struct AlignmentRecord {
    rotation: Vec<Vec<f64>>,
    mean: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetSidecar {
    spec: Option<MultiscaleDataSpec>,
    seed: Option<u64>,
    target_kind: TargetKind,
    samples: usize,
    dim: usize,
    rank_deficient: bool,
    alignment: Option<AlignmentRecord>,
}

fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Draw a dataset from `spec`.
pub fn generate_multiscale_dataset(spec: &MultiscaleDataSpec, target: TargetKind) -> Result<Dataset> {
    spec.validate()?;
    let (n, d) = (spec.samples, spec.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let col_scales = spec.column_scales();
    let mut features = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let unit: f64 = match spec.sampler {
                Sampler::Gaussian => StandardNormal.sample(&mut rng),
                Sampler::Uniform => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
            };
            features[(i, j)] = unit * col_scales[j];
        }
    }

    let targets = match target {
        TargetKind::LinearRegression => DMatrix::from_fn(n, 1, |_, _| StandardNormal.sample(&mut rng)),
        TargetKind::GaussianLabel => {
            let w = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let noise = DVector::from_fn(n, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.1 * z
            });
            DMatrix::from_column_slice(n, 1, (&features * w + noise).as_slice())
        }
        TargetKind::Classification { classes, one_hot } => {
            if classes < 2 {
                return Err(Error::Validation("classification needs at least 2 classes".into()));
            }
            let teacher = DMatrix::from_fn(classes, d, |_, _| StandardNormal.sample(&mut rng));
            let logits = &features * teacher.transpose();
            let mut t = DMatrix::zeros(n, classes);
            for i in 0..n {
                let row: Vec<f64> = logits.row(i).iter().copied().collect();
                if one_hot {
                    let best = (0..classes).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                    t[(i, best)] = 1.0;
                } else {
                    let p = softmax_row(&row);
                    // Put rounding residue on the largest entry so rows sum to 1.
                    let best = (0..classes).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
                    let rest: f64 = p.iter().enumerate().filter(|(k, _)| *k != best).map(|(_, v)| v).sum();
                    for (k, v) in p.iter().enumerate() {
                        t[(i, k)] = if k == best { 1.0 - rest } else { *v };
                    }
                }
            }
            t
        }
    };

    let mut ds = Dataset::new(features, targets, target)?;
    ds.spec = Some(spec.clone());
    Ok(ds)
}

/// Center the features and rotate them onto their principal axes, variances
/// non-increasing.
pub fn pca_align(dataset: &Dataset) -> Result<Dataset> {
    let (n, d) = dataset.features.shape();
    if n < 2 {
        return Err(Error::Validation("PCA needs at least two samples".into()));
    }
    let mean = DVector::from_fn(d, |j, _| dataset.features.column(j).mean());
    let mut centered = dataset.features.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let scale = centered.amax();
    if scale == 0.0 || scale <= 1e-14 * dataset.features.amax() {
        return Err(Error::DegenerateData("all samples coincide; variance is zero".into()));
    }

    let (variances, axes): (Vec<f64>, DMatrix<f64>) = if n >= d {
        let svd = SVD::new(centered.clone(), false, true);
        let v_t = svd.v_t.expect("requested V");
        (svd.singular_values.iter().map(|s| s * s / n as f64).collect(), v_t.transpose())
    } else {
        let cov = centered.transpose() * &centered / n as f64;
        let eig = SymmetricEigen::new(cov);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]));
    let mut rotation = DMatrix::from_fn(d, d, |r, c| axes[(r, order[c])]);
    for mut col in rotation.column_iter_mut() {
        let pivot = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        if pivot < 0.0 {
            col.neg_mut();
        }
    }

    let features = centered * &rotation;
    let ds = Dataset {
        features,
        targets: dataset.targets.clone(),
        target_kind: dataset.target_kind,
        alignment: Some(Alignment { rotation, mean }),
        spec: dataset.spec.clone(),
        rank_deficient: dataset.rank_deficient,
    };
    ds.validate()?;
    Ok(ds)
}

/// `A = (1/N) Σ x xᵀ`, `b = (2/N) Σ g x`; the quadratic `½θᵀAθ − bᵀθ`.
pub fn least_squares_quadratic(dataset: &Dataset) -> Result<QuadraticProblem> {
    if dataset.targets.ncols() != 1 {
        return Err(Error::Validation("least squares needs scalar regression targets".into()));
    }
    let n = dataset.len() as f64;
    let x = &dataset.features;
    let a = x.transpose() * x / n;
    let a = (&a + a.transpose()) * 0.5;
    let b = x.transpose() * dataset.targets.column(0) * (2.0 / n);
    QuadraticProblem::new(a, b).map_err(|e| match e {
        Error::IndefiniteMatrix { value, .. } => {
            Error::RankDeficient(format!("second-moment matrix is singular (eigenvalue {value:e})"))
        }
        other => other,
    })
}

/// Frobenius norms of the column blocks of `m` with widths `group_dims`.
pub fn column_group_norms(m: &DMatrix<f64>, group_dims: &[usize]) -> Vec<f64> {
    let mut start = 0;
    group_dims
        .iter()
        .map(|&w| {
            let norm = m.columns(start, w).norm();
            start += w;
            norm
        })
        .collect()
}

fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `L(θ) = ½θᵀAθ − gᵀθ + Σ_i f_i(Π_i θ)` with
/// `f_i(u) = Σ_k a_i u_k²/2 + b_i softplus(u_k)`.
///
/// `A = Πᵀ diag(½λ) Π` for the template eigenvalues `λ`, `a_i = ½σ_{i,d_i}` and
/// `b_i = 2(σ_{i,1} − σ_{i,d_i})`, so that `½σ_{i,d_i} ⪯ ∇²f_i ⪯ ½σ_{i,1}` and the
/// Hessian restricted to group `i` has spectrum inside `[σ_{i,d_i}, σ_{i,1}]`.
/// The Hessian is block-diagonal in the rows of `Π`: the cross-spectrum is 0.
#[derive(Debug, Clone)]
pub struct SeparableConvex {
    template: SpectrumGroups,
    /// Rows are the eigenvectors of `A`, grouped by scale.
    projections: DMatrix<f64>,
    a: DMatrix<f64>,
    g: DVector<f64>,
    quad_coef: Vec<f64>,
    soft_coef: Vec<f64>,
    optimum: DVector<f64>,
}

/// Build a [`SeparableConvex`] instance from a spectrum template.
pub fn build_separable_convex(template: &SpectrumGroups, seed: u64) -> Result<SeparableConvex> {
    SeparableConvex::build(template, seed, true)
}

impl SeparableConvex {
    /// With `nonlinear = false` every `b_i` is zero and the loss is quadratic.
    pub fn build(template: &SpectrumGroups, seed: u64, nonlinear: bool) -> Result<Self> {
        let d = template.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gauss = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let projections = gauss.qr().q().transpose();
        let g = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut rng));

        let half = DVector::from_iterator(d, template.eigenvalues().iter().map(|l| 0.5 * l));
        let a = projections.transpose() * DMatrix::from_diagonal(&half) * &projections;
        let a = (&a + a.transpose()) * 0.5;

        let mut quad_coef = Vec::with_capacity(d);
        let mut soft_coef = Vec::with_capacity(d);
        for grp in 0..template.num_groups() {
            let (top, bot) = (template.sigma_top()[grp], template.sigma_bot()[grp]);
            let b = if nonlinear { 2.0 * (top - bot) } else { 0.0 };
            for _ in template.group_range(grp) {
                quad_coef.push(0.5 * bot);
                soft_coef.push(b);
            }
        }

        let mut problem = Self {
            template: template.clone(),
            projections,
            a,
            g,
            quad_coef,
            soft_coef,
            optimum: DVector::zeros(d),
        };
        problem.optimum = problem.solve_optimum()?;
        Ok(problem)
    }

    /// Per coordinate `u_k = (Πθ)_k` the stationarity condition is the scalar
    /// monotone equation `(½λ_k + a) u + b σ(u) = (Πg)_k`, solved by safeguarded Newton.
    fn solve_optimum(&self) -> Result<DVector<f64>> {
        let rhs = &self.projections * &self.g;
        let lambdas = self.template.eigenvalues();
        let mut u = DVector::zeros(rhs.len());
        for k in 0..rhs.len() {
            let lin = 0.5 * lambdas[k] + self.quad_coef[k];
            let b = self.soft_coef[k];
            let h = |x: f64| lin * x + b * logistic(x) - rhs[k];
            // h is increasing with slope ≥ lin, so the root lies in this bracket.
            let reach = (rhs[k].abs() + b) / lin;
            let (mut lo, mut hi) = (-reach - 1.0, reach + 1.0);
            let mut x = rhs[k] / lin;
            for _ in 0..200 {
                let fx = h(x);
                if fx > 0.0 {
                    hi = x;
                } else {
                    lo = x;
                }
                if fx.abs() <= 1e-15 * (rhs[k].abs() + 1.0) {
                    break;
                }
                let s = logistic(x);
                let mut next = x - fx / (lin + b * s * (1.0 - s));
                if !(next > lo && next < hi) {
                    next = 0.5 * (lo + hi);
                }
                x = next;
            }
            u[k] = x;
        }
        let theta = self.projections.transpose() * u;
        let resid = self.gradient(&theta).norm();
        if resid > 1e-12 * self.g.norm().max(1.0) {
            return Err(Error::NumericalBreakdown {
                step: 0,
                reason: format!("optimum solve stalled at gradient norm {resid:e}"),
            });
        }
        Ok(theta)
    }

    pub fn template(&self) -> &SpectrumGroups {
        &self.template
    }

    /// Stacked `Π`; rows of group `i` are `Π_i`.
    pub fn projections(&self) -> &DMatrix<f64> {
        &self.projections
    }

    pub fn projection(&self, group: usize) -> DMatrix<f64> {
        let r = self.template.group_range(group);
        self.projections.rows(r.start, r.len()).into_owned()
    }

    /// Cross-spectrum bound; zero by construction.
    pub fn delta(&self) -> f64 {
        0.0
    }

    pub fn group_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.template.sigma_top().to_vec(), self.template.sigma_bot().to_vec())
    }

    pub fn loss(&self, theta: &DVector<f64>) -> f64 {
        let u = &self.projections * theta;
        let sep: f64 = u
            .iter()
            .enumerate()
            .map(|(k, &x)| 0.5 * self.quad_coef[k] * x * x + self.soft_coef[k] * softplus(x))
            .sum();
        0.5 * theta.dot(&(&self.a * theta)) - self.g.dot(theta) + sep
    }

    /// Analytic Hessian `A + Πᵀ diag(a + b σ'(u)) Π`.
    pub fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let u = &self.projections * theta;
        let diag = DVector::from_fn(u.len(), |k, _| {
            let s = logistic(u[k]);
            self.quad_coef[k] + self.soft_coef[k] * s * (1.0 - s)
        });
        &self.a + self.projections.transpose() * DMatrix::from_diagonal(&diag) * &self.projections
    }

    /// The equivalent quadratic when the nonlinearity is switched off.
    pub fn as_quadratic(&self) -> Option<Result<QuadraticProblem>> {
        if self.soft_coef.iter().any(|&b| b != 0.0) {
            return None;
        }
        let h = self.hessian(&DVector::zeros(self.g.len()));
        let h = (&h + h.transpose()) * 0.5;
        Some(QuadraticProblem::new(h, self.g.clone()))
    }
}

impl Objective for SeparableConvex {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn gradient_into(&self, theta: &DVector<f64>, out: &mut DVector<f64>) {
        let u = &self.projections * theta;
        let inner = DVector::from_fn(u.len(), |k, _| self.quad_coef[k] * u[k] + self.soft_coef[k] * logistic(u[k]));
        out.gemv(1.0, &self.a, theta, 0.0);
        *out -= &self.g;
        out.gemv_tr(1.0, &self.projections, &inner, 1.0);
    }

    fn optimum(&self) -> Option<&DVector<f64>> {
        Some(&self.optimum)
    }
}

/// Cross-entropy loss and gradients of softmax regression.
#[derive(Debug, Clone)]
pub struct LogisticEval {
    pub loss: f64,
    /// `(1/N) Σ (f(x) − g(x)) xᵀ`, shape `c × d`.
    pub grad_w: DMatrix<f64>,
    pub grad_b: DVector<f64>,
}

/// Loss `−(1/N) Σ g·log f` of `f = softmax(Wx + b)` and its gradients.
pub fn logistic_loss_grad(dataset: &Dataset, w: &DMatrix<f64>, b: &DVector<f64>) -> Result<LogisticEval> {
    let (n, d) = dataset.features.shape();
    let c = dataset.targets.ncols();
    if w.shape() != (c, d) || b.len() != c {
        return Err(Error::Validation(format!(
            "weights {}x{} / bias {} do not match {c} classes and {d} features",
            w.nrows(),
            w.ncols(),
            b.len()
        )));
    }
    let mut loss = 0.0;
    let mut grad_w = DMatrix::zeros(c, d);
    let mut grad_b = DVector::zeros(c);
    let logits = &dataset.features * w.transpose();
    for i in 0..n {
        let z: Vec<f64> = (0..c).map(|j| logits[(i, j)] + b[j]).collect();
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let x = dataset.features.row(i);
        for j in 0..c {
            let p = dataset.targets[(i, j)];
            let log_f = z[j] - log_sum;
            if p != 0.0 {
                loss -= p * log_f;
            }
            let delta = log_f.exp() - p;
            grad_b[j] += delta;
            for (k, xv) in x.iter().enumerate() {
                grad_w[(j, k)] += delta * xv;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    Ok(LogisticEval { loss: loss * inv_n, grad_w: grad_w * inv_n, grad_b: grad_b * inv_n })
}
