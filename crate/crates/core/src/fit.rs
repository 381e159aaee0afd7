//! Least-squares estimation, forecasting and forecast scoring.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GnarError, Result};
use crate::graph::NetworkStructure;
use crate::model::{conditional_mean, Alpha, AlphaMode, GnarCoefficients, GnarOrder, NetworkTimeSeries};

/// The stacked regression `y = R θ + u`.
///
/// Rows are grouped by time: the block for time `t` holds one row per node.
/// Columns run lag by lag as `[X_{t-k}, Z^1_{t-k}, ..., Z^{s_k}_{t-k}]`; in
/// local-α mode the single `X_{t-k}` column is replaced by one indicator
/// column per node.
#[derive(Debug, Clone)]
pub struct DesignSystem {
    pub y: DVector<f64>,
    pub r: DMatrix<f64>,
    pub columns: Vec<String>,
    /// Number of usable time steps, `T - p`.
    pub n: usize,
    pub d: usize,
}

impl DesignSystem {
    pub fn q(&self) -> usize {
        self.r.ncols()
    }
}

pub fn build_design(
    series: &NetworkTimeSeries,
    structure: &NetworkStructure,
    order: &GnarOrder,
    mode: AlphaMode,
) -> Result<DesignSystem> {
    series.check_against(structure)?;
    order.check_against(structure)?;
    let (t_len, d, p) = (series.len(), series.d(), order.p);
    if t_len <= p {
        return Err(GnarError::InsufficientData { needed: p, available: t_len });
    }
    let n = t_len - p;
    let x = series.values();
    // Z^r for every time step, T × d.
    let z: Vec<DMatrix<f64>> = (1..=order.r_star())
        .map(|r| x * structure.stage_weights(r).transpose())
        .collect();

    let labels = series.labels();
    let mut columns = Vec::with_capacity(order.param_count(mode, d));
    for k in 1..=p {
        match mode {
            AlphaMode::Global => columns.push(format!("alpha_{k}")),
            AlphaMode::Local => columns.extend(labels.iter().map(|l| format!("alpha_{k}[{l}]"))),
        }
        columns.extend((1..=order.s[k - 1]).map(|r| format!("beta_{k}_{r}")));
    }

    let mut r_mat = DMatrix::zeros(n * d, columns.len());
    let mut y = DVector::zeros(n * d);
    for t in p..t_len {
        for i in 0..d {
            let row = (t - p) * d + i;
            y[row] = x[(t, i)];
            let mut col = 0;
            for k in 1..=p {
                match mode {
                    AlphaMode::Global => {
                        r_mat[(row, col)] = x[(t - k, i)];
                        col += 1;
                    }
                    AlphaMode::Local => {
                        r_mat[(row, col + i)] = x[(t - k, i)];
                        col += d;
                    }
                }
                for zr in &z[..order.s[k - 1]] {
                    r_mat[(row, col)] = zr[(t - k, i)];
                    col += 1;
                }
            }
        }
    }
    Ok(DesignSystem { y, r: r_mat, columns, n, d })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
}

/// Gaussian AIC/BIC for `nd` observations and `q` parameters.
pub fn information_criteria_from(sigma2_hat: f64, nd: usize, q: usize) -> InformationCriteria {
    let nd_f = nd as f64;
    let fit_term = nd_f * sigma2_hat.ln();
    InformationCriteria {
        aic: fit_term + 2.0 * q as f64,
        bic: fit_term + q as f64 * nd_f.ln(),
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub order: GnarOrder,
    pub mode: AlphaMode,
    pub coefficients: GnarCoefficients,
    /// `θ̂` in design-column order.
    pub theta: Vec<f64>,
    pub columns: Vec<String>,
    pub std_errors: Vec<f64>,
    /// `(T - p) × d` residuals `û_t`.
    pub residuals: DMatrix<f64>,
    /// `||y - Rθ̂||² / (nd - q)`.
    pub sigma2_hat: f64,
    pub n: usize,
    pub d: usize,
}

impl FitResult {
    pub fn q(&self) -> usize {
        self.theta.len()
    }
}

pub fn information_criteria(fit: &FitResult) -> InformationCriteria {
    information_criteria_from(fit.sigma2_hat, fit.n * fit.d, fit.q())
}

/// Columns whose QR pivot is negligible relative to the largest pivot.
fn collinear_columns(r: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let diag: Vec<f64> = (0..r.ncols().min(r.nrows())).map(|j| r[(j, j)].abs()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    let tol = f64::EPSILON * r.nrows().max(r.ncols()) as f64 * largest.max(f64::MIN_POSITIVE);
    diag.iter()
        .enumerate()
        .filter(|(_, &v)| v <= tol || largest == 0.0)
        .map(|(j, _)| names[j].clone())
        .collect()
}

/// Orthogonal-factorisation least squares. Returns `θ̂` and `(RᵀR)^{-1}`'s diagonal.
fn qr_least_squares(a: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<(DVector<f64>, DVector<f64>)> {
    let q = a.ncols();
    let qr = a.clone().qr();
    let upper = qr.r();
    let singular = collinear_columns(&upper, names);
    if !singular.is_empty() {
        return Err(GnarError::SingularDesign { columns: singular });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, q).into_owned();
    let theta = upper
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| GnarError::SingularDesign { columns: names.to_vec() })?;
    let upper_inv = upper
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or_else(|| GnarError::SingularDesign { columns: names.to_vec() })?;
    let xtx_inv_diag = DVector::from_fn(q, |j, _| upper_inv.row(j).norm_squared());
    Ok((theta, xtx_inv_diag))
}

/// Fits a GNAR model by least squares on the full series.
pub fn fit_least_squares(
    series: &NetworkTimeSeries,
    structure: &NetworkStructure,
    order: &GnarOrder,
    mode: AlphaMode,
) -> Result<FitResult> {
    let design = build_design(series, structure, order, mode)?;
    let (nd, q) = (design.y.len(), design.q());
    if nd <= q {
        return Err(GnarError::InsufficientData { needed: q, available: nd });
    }
    let (theta, xtx_inv_diag) = qr_least_squares(&design.r, &design.y, &design.columns)?;
    let fitted = &design.r * &theta;
    let resid = &design.y - fitted;
    let sigma2_hat = resid.norm_squared() / (nd - q) as f64;
    let residuals = DMatrix::from_fn(design.n, design.d, |t, i| resid[t * design.d + i]);
    let std_errors = xtx_inv_diag.iter().map(|v| (sigma2_hat * v).sqrt()).collect();

    let d = design.d;
    let mut alpha_global = Vec::new();
    let mut alpha_local = Vec::new();
    let mut beta = Vec::with_capacity(order.p);
    let mut col = 0;
    for k in 0..order.p {
        match mode {
            AlphaMode::Global => {
                alpha_global.push(theta[col]);
                col += 1;
            }
            AlphaMode::Local => {
                alpha_local.push(theta.rows(col, d).iter().copied().collect());
                col += d;
            }
        }
        beta.push(theta.rows(col, order.s[k]).iter().copied().collect());
        col += order.s[k];
    }
    let alpha = match mode {
        AlphaMode::Global => Alpha::Global(alpha_global),
        AlphaMode::Local => Alpha::Local(alpha_local),
    };

    Ok(FitResult {
        order: order.clone(),
        mode,
        coefficients: GnarCoefficients::estimated(alpha, beta, sigma2_hat),
        theta: theta.iter().copied().collect(),
        columns: design.columns,
        std_errors,
        residuals,
        sigma2_hat,
        n: design.n,
        d,
    })
}

/// Multi-step forecast; each prediction is appended as a pseudo-observation
/// before the next step. Returns a `steps × d` matrix.
pub fn forecast(
    coeffs: &GnarCoefficients,
    series: &NetworkTimeSeries,
    structure: &NetworkStructure,
    steps: usize,
) -> Result<DMatrix<f64>> {
    series.check_against(structure)?;
    coeffs.check_against(structure)?;
    if steps == 0 {
        return Err(GnarError::InvalidArgument("forecast needs at least one step".into()));
    }
    let p = coeffs.p();
    let t_len = series.len();
    if t_len < p {
        return Err(GnarError::InsufficientData { needed: p - 1, available: t_len });
    }
    let mut work = series.values().clone().resize_vertically(t_len + steps, 0.0);
    for t in t_len..t_len + steps {
        let mean = conditional_mean(coeffs, structure, &work, t);
        work.set_row(t, &mean.transpose());
    }
    Ok(work.rows(t_len, steps).into_owned())
}

/// Squared prediction error `||predicted - actual||²`.
pub fn mspe(predicted: &DVector<f64>, actual: &DVector<f64>) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(GnarError::DimensionMismatch { expected: actual.len(), found: predicted.len() });
    }
    Ok((predicted - actual).norm_squared())
}

/// A model entered into a rolling one-step comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateModel {
    Gnar { order: GnarOrder, mode: AlphaMode },
    /// Independent AR(p) per node, i.e. local-α GNAR with no neighbour terms.
    NodeAr { p: usize },
    /// Always predicts zero.
    Zero,
}

impl CandidateModel {
    pub fn name(&self) -> String {
        match self {
            CandidateModel::Gnar { order, mode: AlphaMode::Global } => order.to_string(),
            CandidateModel::Gnar { order, mode: AlphaMode::Local } => format!("{order} local-alpha"),
            CandidateModel::NodeAr { p } => format!("AR({p})"),
            CandidateModel::Zero => "zero".into(),
        }
    }

    pub fn active_parameters(&self, d: usize) -> usize {
        match self {
            CandidateModel::Gnar { order, mode } => order.param_count(*mode, d),
            CandidateModel::NodeAr { p } => p * d,
            CandidateModel::Zero => 0,
        }
    }

    fn as_gnar(&self) -> Option<(GnarOrder, AlphaMode)> {
        match self {
            CandidateModel::Gnar { order, mode } => Some((order.clone(), *mode)),
            CandidateModel::NodeAr { p } => Some((GnarOrder { p: *p, s: vec![0; *p] }, AlphaMode::Local)),
            CandidateModel::Zero => None,
        }
    }

    /// Fits on `train` and predicts the next observation.
    pub fn one_step(&self, train: &NetworkTimeSeries, structure: &NetworkStructure) -> Result<DVector<f64>> {
        match self.as_gnar() {
            None => Ok(DVector::zeros(train.d())),
            Some((order, mode)) => {
                let fit = fit_least_squares(train, structure, &order, mode)?;
                Ok(forecast(&fit.coefficients, train, structure, 1)?.row(0).transpose())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub model: String,
    pub active_parameters: usize,
    /// One squared prediction error per cut point.
    pub spe: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (divisor `m - 1`); zero for a single window.
    pub sd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    /// One-based time indices `t` that were predicted.
    pub cut_points: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// For each one-based cut point `t`, fits every model on `X_1..X_{t-1}`,
/// predicts `X_t` and records the squared prediction error.
pub fn rolling_comparison(
    series: &NetworkTimeSeries,
    structure: &NetworkStructure,
    models: &[CandidateModel],
    cut_points: &[usize],
) -> Result<ComparisonTable> {
    series.check_against(structure)?;
    if let Some(&bad) = cut_points.iter().find(|&&t| t < 2 || t > series.len()) {
        return Err(GnarError::InvalidArgument(format!(
            "cut point {bad} outside 2..={}",
            series.len()
        )));
    }
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..cut_points.len()).map(move |w| (m, w)))
        .collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(m, w)| {
            let t = cut_points[w];
            let train = series.slice(0..t - 1)?;
            let predicted = models[m].one_step(&train, structure)?;
            mspe(&predicted, &series.row(t - 1))
        })
        .collect::<Result<_>>()?;

    let rows = models
        .iter()
        .enumerate()
        .map(|(m, model)| {
            let spe = errors[m * cut_points.len()..(m + 1) * cut_points.len()].to_vec();
            let (mean, sd) = mean_sd(&spe);
            ComparisonRow {
                model: model.name(),
                active_parameters: model.active_parameters(series.d()),
                spe,
                mean,
                sd,
            }
        })
        .collect();
    Ok(ComparisonTable { cut_points: cut_points.to_vec(), rows })
}

/// Shrinks a sparse-VAR coefficient onto the normalised-weight scale:
/// `γ = φ / (1 + v / σ_ij)` with `v` the summed relevance of the other
/// members of the same r-stage neighbourhood.
pub fn shrink_coefficients(phi: f64, sigma_ij: f64, sigma_others: &[f64]) -> Result<f64> {
    if !(sigma_ij > 0.0) || sigma_others.iter().any(|s| !(*s > 0.0)) {
        return Err(GnarError::InvalidArgument("relevance weights must be positive".into()));
    }
    let v: f64 = sigma_others.iter().sum();
    Ok(phi / (1.0 + v / sigma_ij))
}

#[derive(Debug, Clone)]
pub struct RidgeFactors {
    /// Unpenalised least-squares solution.
    pub phi_hat: DVector<f64>,
    /// Ridge solution via per-singular-direction shrinkage of `φ̂`.
    pub gamma_hat: DVector<f64>,
    /// Ridge solution via the penalised normal equations `(AᵀA + vI)γ = Aᵀy`.
    pub gamma_direct: DVector<f64>,
}

impl RidgeFactors {
    pub fn discrepancy(&self) -> f64 {
        (&self.gamma_hat - &self.gamma_direct).amax()
    }
}

/// Least squares and ridge (multiplier `v`) computed two ways.
pub fn ridge_svd_factors(a: &DMatrix<f64>, y: &DVector<f64>, v: f64) -> Result<RidgeFactors> {
    if a.nrows() != y.len() {
        return Err(GnarError::DimensionMismatch { expected: a.nrows(), found: y.len() });
    }
    if !(v >= 0.0 && v.is_finite()) {
        return Err(GnarError::InvalidArgument(format!("ridge multiplier must be non-negative, got {v}")));
    }
    let m = a.ncols();
    if a.nrows() < m {
        return Err(GnarError::InsufficientData { needed: m - 1, available: a.nrows() });
    }
    let names: Vec<String> = (1..=m).map(|j| format!("column {j}")).collect();
    let singular = collinear_columns(&a.clone().qr().r(), &names);
    if !singular.is_empty() {
        return Err(GnarError::SingularDesign { columns: singular });
    }

    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let sv = &svd.singular_values;
    // Coordinates of φ̂ in the right-singular basis: Σ^{-1} Uᵀ y.
    let coords = DVector::from_fn(m, |j, _| u.column(j).dot(y) / sv[j]);
    let shrunk = DVector::from_fn(m, |j, _| coords[j] / (1.0 + v / (sv[j] * sv[j])));
    let phi_hat = v_t.transpose() * coords;
    let gamma_hat = v_t.transpose() * shrunk;

    let gram = a.transpose() * a + DMatrix::identity(m, m) * v;
    let gamma_direct = gram
        .cholesky()
        .ok_or_else(|| GnarError::SingularDesign { columns: names })?
        .solve(&(a.transpose() * y));
    Ok(RidgeFactors { phi_hat, gamma_hat, gamma_direct })
}
