//! GNAR process specification, simulation and the constrained-VAR view.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{GnarError, Result};
use crate::graph::{Network, NetworkStructure, WeightMatrix};
use crate::rng::stream_rng;

/// Lag order `p` and the stage depth `s_k` used at each lag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnarOrder {
    pub p: usize,
    pub s: Vec<usize>,
}

impl GnarOrder {
    pub fn new(s: Vec<usize>) -> Result<Self> {
        if s.is_empty() {
            return Err(GnarError::InvalidArgument("lag order p must be at least 1".into()));
        }
        Ok(Self { p: s.len(), s })
    }

    /// `GNAR(p, [s, ..., s])`.
    pub fn uniform(p: usize, s: usize) -> Result<Self> {
        Self::new(vec![s; p])
    }

    /// Largest active stage `r* = max s_k`.
    pub fn r_star(&self) -> usize {
        self.s.iter().copied().max().unwrap_or(0)
    }

    pub fn beta_count(&self) -> usize {
        self.s.iter().sum()
    }

    /// Number of regression columns for a network of `d` nodes.
    pub fn param_count(&self, mode: AlphaMode, d: usize) -> usize {
        match mode {
            AlphaMode::Global => self.p + self.beta_count(),
            AlphaMode::Local => self.p * d + self.beta_count(),
        }
    }

    pub fn check_against(&self, structure: &NetworkStructure) -> Result<()> {
        if self.p != self.s.len() {
            return Err(GnarError::InvalidArgument(format!(
                "order has p = {} but {} stage depths",
                self.p,
                self.s.len()
            )));
        }
        if self.r_star() > structure.r_max() {
            return Err(GnarError::InvalidArgument(format!(
                "stage depth {} exceeds the network's r_max = {}",
                self.r_star(),
                structure.r_max()
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for GnarOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.s.iter().map(|s| s.to_string()).collect();
        write!(f, "GNAR({}, [{}])", self.p, s.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Global,
    Local,
}

/// Self-lag coefficients: one per lag, or one per lag and node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Global(Vec<f64>),
    /// Indexed `[lag][node]`.
    Local(Vec<Vec<f64>>),
}

impl Alpha {
    pub fn mode(&self) -> AlphaMode {
        match self {
            Alpha::Global(_) => AlphaMode::Global,
            Alpha::Local(_) => AlphaMode::Local,
        }
    }

    fn lags(&self) -> usize {
        match self {
            Alpha::Global(a) => a.len(),
            Alpha::Local(a) => a.len(),
        }
    }

    /// `α_{ik}` with `k` zero-based.
    pub fn at(&self, k: usize, node: usize) -> f64 {
        match self {
            Alpha::Global(a) => a[k],
            Alpha::Local(a) => a[k][node],
        }
    }

    /// Largest `|α_{ik}|` over nodes at lag `k`.
    fn max_abs(&self, k: usize) -> f64 {
        match self {
            Alpha::Global(a) => a[k].abs(),
            Alpha::Local(a) => a[k].iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// Coefficients of a GNAR process. `beta[k][r - 1]` is `β_{k+1, r}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnarCoefficients {
    alpha: Alpha,
    beta: Vec<Vec<f64>>,
    sigma2: f64,
}

impl GnarCoefficients {
    pub fn new(alpha: Alpha, beta: Vec<Vec<f64>>, sigma2: f64) -> Result<Self> {
        Self::checked(alpha, beta, sigma2, false)
    }

    /// Validates shapes and finiteness; `allow_zero_noise` admits `σ² = 0` from exact fits.
    pub(crate) fn checked(alpha: Alpha, beta: Vec<Vec<f64>>, sigma2: f64, allow_zero_noise: bool) -> Result<Self> {
        if beta.is_empty() {
            return Err(GnarError::InvalidArgument("at least one lag is required".into()));
        }
        if alpha.lags() != beta.len() {
            return Err(GnarError::InvalidArgument(format!(
                "alpha has {} lags but beta has {}",
                alpha.lags(),
                beta.len()
            )));
        }
        if let Alpha::Local(rows) = &alpha {
            let d = rows[0].len();
            if rows.iter().any(|row| row.len() != d) {
                return Err(GnarError::InvalidArgument(
                    "local alpha rows must all have one entry per node".into(),
                ));
            }
        }
        if !(sigma2.is_finite() && (sigma2 > 0.0 || allow_zero_noise && sigma2 == 0.0)) {
            return Err(GnarError::InvalidArgument(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        let all_finite = beta.iter().flatten().all(|b| b.is_finite())
            && match &alpha {
                Alpha::Global(a) => a.iter().all(|x| x.is_finite()),
                Alpha::Local(a) => a.iter().flatten().all(|x| x.is_finite()),
            };
        if !all_finite {
            return Err(GnarError::InvalidArgument("coefficients must be finite".into()));
        }
        Ok(Self { alpha, beta, sigma2 })
    }

    pub fn global(alpha: Vec<f64>, beta: Vec<Vec<f64>>, sigma2: f64) -> Result<Self> {
        Self::new(Alpha::Global(alpha), beta, sigma2)
    }

    /// Used by estimation, where a perfect fit legitimately yields `σ̂² = 0`.
    pub(crate) fn estimated(alpha: Alpha, beta: Vec<Vec<f64>>, sigma2: f64) -> Self {
        Self { alpha, beta, sigma2 }
    }

    pub fn alpha(&self) -> &Alpha {
        &self.alpha
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    /// `β_{kr}` with one-based `k` and `r`; zero when `r > s_k`.
    pub fn beta_at(&self, k: usize, r: usize) -> f64 {
        self.beta[k - 1].get(r - 1).copied().unwrap_or(0.0)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn mode(&self) -> AlphaMode {
        self.alpha.mode()
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn order(&self) -> GnarOrder {
        GnarOrder {
            p: self.beta.len(),
            s: self.beta.iter().map(Vec::len).collect(),
        }
    }

    /// Same coefficients with a different noise variance.
    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.alpha.clone(), self.beta.clone(), sigma2)
    }

    pub(crate) fn check_against(&self, structure: &NetworkStructure) -> Result<()> {
        self.order().check_against(structure)?;
        if let Alpha::Local(rows) = &self.alpha {
            if rows[0].len() != structure.d() {
                return Err(GnarError::DimensionMismatch {
                    expected: structure.d(),
                    found: rows[0].len(),
                });
            }
        }
        Ok(())
    }
}

/// A `T × d` series whose columns follow the network's node order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTimeSeries {
    values: DMatrix<f64>,
    labels: Vec<String>,
}

impl NetworkTimeSeries {
    pub fn new(values: DMatrix<f64>, network: &Network) -> Result<Self> {
        Self::from_parts(values, network.labels().to_vec())
    }

    pub fn from_parts(values: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(GnarError::InsufficientData { needed: 0, available: 0 });
        }
        if values.ncols() != labels.len() {
            return Err(GnarError::DimensionMismatch {
                expected: labels.len(),
                found: values.ncols(),
            });
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(GnarError::InvalidArgument(format!(
                "non-finite value at time {} node {:?}",
                row + 1,
                labels[col]
            )));
        }
        Ok(Self { values, labels })
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `X_t` for zero-based `t`.
    pub fn row(&self, t: usize) -> DVector<f64> {
        self.values.row(t).transpose()
    }

    /// Rows `range` (zero-based, half-open) as a standalone series.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(GnarError::InvalidSlice(format!(
                "rows {}..{} out of 0..{}",
                range.start,
                range.end,
                self.len()
            )));
        }
        let rows = range.end - range.start;
        Self::from_parts(self.values.rows(range.start, rows).into_owned(), self.labels.clone())
    }

    /// Replaces the values, keeping labels.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        Self::from_parts(values, self.labels.clone())
    }

    /// Appends one observation.
    pub fn extended(&self, row: &DVector<f64>) -> Result<Self> {
        if row.len() != self.d() {
            return Err(GnarError::DimensionMismatch { expected: self.d(), found: row.len() });
        }
        let t = self.len();
        let mut values = self.values.clone().insert_row(t, 0.0);
        values.set_row(t, &row.transpose());
        self.with_values(values)
    }

    pub(crate) fn check_against(&self, structure: &NetworkStructure) -> Result<()> {
        if self.labels.as_slice() != structure.network().labels() {
            if self.d() != structure.d() {
                return Err(GnarError::DimensionMismatch { expected: structure.d(), found: self.d() });
            }
            return Err(GnarError::Alignment(
                "series column labels differ from the network node labels".into(),
            ));
        }
        Ok(())
    }
}

/// `Z^r = (W ⊙ S_r) x`.
pub fn neighbourhood_regression(x: &DVector<f64>, w: &WeightMatrix, s_r: &DMatrix<f64>) -> DVector<f64> {
    w.as_matrix().component_mul(s_r) * x
}

/// The autoregressive matrices `Φ_k = diag(α_k) + Σ_r β_{kr} (W ⊙ S_r)`.
pub fn var_matrices(coeffs: &GnarCoefficients, structure: &NetworkStructure) -> Result<Vec<DMatrix<f64>>> {
    coeffs.check_against(structure)?;
    let d = structure.d();
    Ok((0..coeffs.p())
        .map(|k| {
            let mut phi = DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| coeffs.alpha.at(k, i)));
            for (r, &b) in coeffs.beta[k].iter().enumerate() {
                phi += structure.stage_weights(r + 1) * b;
            }
            phi
        })
        .collect())
}

/// The `pd × pd` companion matrix of `Φ_1, ..., Φ_p`.
pub fn companion_matrix(phis: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = phis.len();
    let d = phis.first().map_or(0, |m| m.nrows());
    let mut c = DMatrix::zeros(p * d, p * d);
    for (k, phi) in phis.iter().enumerate() {
        c.view_mut((0, k * d), (d, d)).copy_from(phi);
    }
    for k in 1..p {
        c.view_mut((k * d, (k - 1) * d), (d, d)).fill_with_identity();
    }
    c
}

/// Largest eigenvalue modulus. The real Schur iteration can stall on
/// nilpotent blocks, so it is capped and retried on shifted copies
/// `M + sI`, whose eigenvalues are `λ + s`.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let n = m.nrows();
    for shift in [0.0, 0.5, -0.5, 0.25, -0.75] {
        let shifted = m + DMatrix::identity(n, n) * shift;
        if let Some(schur) = shifted.try_schur(f64::EPSILON, 10_000) {
            return schur
                .complex_eigenvalues()
                .iter()
                .map(|z| (z - shift).norm())
                .fold(0.0, f64::max);
        }
    }
    // Gelfand's formula on a high power as a last resort.
    let mut power = m.clone();
    let mut log_scale = 0.0;
    let squarings = 8;
    for _ in 0..squarings {
        power = &power * &power;
        let norm = power.norm();
        if norm == 0.0 {
            return 0.0;
        }
        power /= norm;
        log_scale = 2.0 * log_scale + norm.ln();
    }
    (log_scale / f64::from(1u32 << squarings)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stationarity {
    /// `Σ_k (max_i |α_{ik}| + Σ_r |β_{kr}|) < 1`.
    pub sufficient_condition: bool,
    /// Largest eigenvalue modulus of the companion matrix.
    pub spectral_radius: f64,
}

impl Stationarity {
    pub fn is_stationary(&self) -> bool {
        self.sufficient_condition || self.spectral_radius < 1.0
    }
}

pub fn check_stationarity(coeffs: &GnarCoefficients, structure: &NetworkStructure) -> Result<Stationarity> {
    let total: f64 = (0..coeffs.p())
        .map(|k| coeffs.alpha.max_abs(k) + coeffs.beta[k].iter().map(|b| b.abs()).sum::<f64>())
        .sum();
    let companion = companion_matrix(&var_matrices(coeffs, structure)?);
    let spectral_radius = spectral_radius(&companion);
    Ok(Stationarity {
        sufficient_condition: total < 1.0,
        spectral_radius,
    })
}

/// Conditional mean of row `t` given rows `t - p .. t` of `values`:
/// `Σ_k (α_k X_{t-k} + Σ_r β_{kr} Z^r_{t-k})`.
pub(crate) fn conditional_mean(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    values: &DMatrix<f64>,
    t: usize,
) -> DVector<f64> {
    let d = structure.d();
    let mut mean = DVector::zeros(d);
    for k in 1..=coeffs.p() {
        let lagged = values.row(t - k).transpose();
        for i in 0..d {
            mean[i] += coeffs.alpha.at(k - 1, i) * lagged[i];
        }
        for (r, &b) in coeffs.beta[k - 1].iter().enumerate() {
            mean += (structure.stage_weights(r + 1) * &lagged) * b;
        }
    }
    mean
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub t: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub allow_nonstationary: bool,
}

impl SimulationConfig {
    pub const DEFAULT_BURN_IN: usize = 500;

    pub fn new(t: usize, seed: u64) -> Self {
        Self {
            t,
            burn_in: Self::DEFAULT_BURN_IN,
            seed,
            allow_nonstationary: false,
        }
    }
}

/// IID `N(0, σ²)` noise, `rows × d`, filled row by row.
pub fn gaussian_noise<R: Rng + ?Sized>(rows: usize, d: usize, sigma2: f64, rng: &mut R) -> DMatrix<f64> {
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("variance is positive");
    let mut noise = DMatrix::zeros(rows, d);
    for t in 0..rows {
        for i in 0..d {
            noise[(t, i)] = normal.sample(rng);
        }
    }
    noise
}

/// Runs the vector-wise recursion from a zero initial state on the given
/// innovations and drops the first `burn_in` rows.
pub fn simulate_with_noise(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    noise: &DMatrix<f64>,
    burn_in: usize,
) -> Result<DMatrix<f64>> {
    coeffs.check_against(structure)?;
    if noise.ncols() != structure.d() {
        return Err(GnarError::DimensionMismatch { expected: structure.d(), found: noise.ncols() });
    }
    if noise.nrows() <= burn_in {
        return Err(GnarError::InsufficientData { needed: burn_in, available: noise.nrows() });
    }
    let p = coeffs.p();
    let d = structure.d();
    // p leading zero rows hold the initial state.
    let mut x = DMatrix::zeros(noise.nrows() + p, d);
    for t in p..x.nrows() {
        let mean = conditional_mean(coeffs, structure, &x, t);
        for i in 0..d {
            x[(t, i)] = mean[i] + noise[(t - p, i)];
        }
    }
    Ok(x.rows(p + burn_in, noise.nrows() - burn_in).into_owned())
}

/// Simulates `config.t` observations with Gaussian innovations.
pub fn simulate(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    config: SimulationConfig,
) -> Result<NetworkTimeSeries> {
    if config.t == 0 {
        return Err(GnarError::InvalidArgument("series length must be at least 1".into()));
    }
    let stationarity = check_stationarity(coeffs, structure)?;
    if !stationarity.is_stationary() && !config.allow_nonstationary {
        return Err(GnarError::Nonstationary {
            spectral_radius: stationarity.spectral_radius,
        });
    }
    let mut rng = stream_rng(config.seed, 0);
    let noise = gaussian_noise(config.t + config.burn_in, structure.d(), coeffs.sigma2, &mut rng);
    let values = simulate_with_noise(coeffs, structure, &noise, config.burn_in)?;
    NetworkTimeSeries::new(values, structure.network())
}
