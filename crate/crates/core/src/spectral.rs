//! Inverse spectral matrices of GNAR processes and the distance-based
//! conditional-correlation structure they encode.
//!
//! For a stationary process with characteristic polynomial
//! `Φ(z) = I - Σ_k Φ_k z^k` the inverse spectral matrix is
//! `S(ω) = (2π/σ²) Φ(e^{iω})ᵀ Φ(e^{-iω})`. Off-diagonal zeros of `S(ω)` at
//! every frequency mean the two nodes are uncorrelated given all others;
//! for GNAR this happens exactly when `d(i, j) >= 2r* + 1`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GnarError, Result};
use crate::graph::NetworkStructure;
use crate::model::{var_matrices, GnarCoefficients};

pub type Complex64 = Complex<f64>;

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

fn polynomial_from(phis: &[DMatrix<f64>], z: Complex64) -> DMatrix<Complex64> {
    let d = phis.first().map_or(0, |m| m.nrows());
    let mut out = DMatrix::<Complex64>::identity(d, d);
    let mut power = Complex64::new(1.0, 0.0);
    for phi in phis {
        power *= z;
        out -= to_complex(phi) * power;
    }
    out
}

/// `Φ(z) = I - Σ_k Φ_k z^k`.
pub fn char_polynomial(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    z: Complex64,
) -> Result<DMatrix<Complex64>> {
    Ok(polynomial_from(&var_matrices(coeffs, structure)?, z))
}

fn inverse_spectrum_from(phis: &[DMatrix<f64>], omega: f64, sigma2: f64) -> DMatrix<Complex64> {
    let forward = polynomial_from(phis, Complex64::from_polar(1.0, omega));
    let backward = polynomial_from(phis, Complex64::from_polar(1.0, -omega));
    forward.transpose() * backward * Complex64::new(2.0 * PI / sigma2, 0.0)
}

/// `S(ω) = (2π/σ²) Φ(e^{iω})ᵀ Φ(e^{-iω})`.
pub fn inverse_spectrum(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    omega: f64,
    sigma2: f64,
) -> Result<DMatrix<Complex64>> {
    check_sigma2(sigma2)?;
    Ok(inverse_spectrum_from(&var_matrices(coeffs, structure)?, omega, sigma2))
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(GnarError::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
    }
    Ok(())
}

/// `points` equispaced frequencies in `(-π, π]`.
pub fn omega_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|k| -PI + 2.0 * PI * k as f64 / points as f64).collect()
}

pub const DEFAULT_OMEGA_POINTS: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralEvaluation {
    pub omega_grid: Vec<f64>,
    pub inverse_spectra: Vec<DMatrix<Complex64>>,
    pub sigma2: f64,
}

pub fn evaluate(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    omega_grid: &[f64],
    sigma2: f64,
) -> Result<SpectralEvaluation> {
    check_sigma2(sigma2)?;
    let phis = var_matrices(coeffs, structure)?;
    let inverse_spectra = omega_grid
        .par_iter()
        .map(|&omega| inverse_spectrum_from(&phis, omega, sigma2))
        .collect();
    Ok(SpectralEvaluation {
        omega_grid: omega_grid.to_vec(),
        inverse_spectra,
        sigma2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairBand {
    SelfPair,
    /// `d(i, j) <= r*`: the nodes regress on each other.
    Active,
    /// `r* < d(i, j) <= 2r*`: conditionally correlated through shared neighbours.
    Colliding,
    /// `d(i, j) >= 2r* + 1`, including disconnected pairs.
    ConditionallyUncorrelated,
}

fn classify(distance: Option<usize>, r_star: usize) -> PairBand {
    match distance {
        Some(0) => PairBand::SelfPair,
        Some(dist) if dist <= r_star => PairBand::Active,
        Some(dist) if dist <= 2 * r_star => PairBand::Colliding,
        _ => PairBand::ConditionallyUncorrelated,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceBands {
    pub r_star: usize,
    d: usize,
    labels: Vec<PairBand>,
}

impl DistanceBands {
    pub fn get(&self, i: usize, j: usize) -> PairBand {
        self.labels[i * self.d + j]
    }
}

pub fn distance_bands(structure: &NetworkStructure, r_star: usize) -> Result<DistanceBands> {
    if r_star == 0 {
        return Err(GnarError::InvalidArgument("r* must be at least 1".into()));
    }
    let d = structure.d();
    let dist = structure.distances();
    let labels = (0..d * d).map(|k| classify(dist.get(k / d, k % d), r_star)).collect();
    Ok(DistanceBands { r_star, d, labels })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MagnitudeBand {
    /// Inclusive `[lo, hi]`; `hi = None` means unbounded (including disconnected pairs).
    pub distance_range: (usize, Option<usize>),
    pub pairs: usize,
    pub min_mag: Option<f64>,
    pub max_mag: Option<f64>,
}

/// Extremes of `|[S(ω)]_ij|` over the grid for each distance band
/// `{2r - 1, 2r}`, `r = 1..=r*`, and for `d >= 2r* + 1`.
pub fn magnitude_bands(eval: &SpectralEvaluation, structure: &NetworkStructure, r_star: usize) -> Vec<MagnitudeBand> {
    let d = structure.d();
    let dist = structure.distances();
    let mut bands: Vec<MagnitudeBand> = (1..=r_star)
        .map(|r| (2 * r - 1, Some(2 * r)))
        .chain(std::iter::once((2 * r_star + 1, None)))
        .map(|distance_range| MagnitudeBand { distance_range, pairs: 0, min_mag: None, max_mag: None })
        .collect();
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let band = match dist.get(i, j) {
                Some(dij) if dij <= 2 * r_star => (dij - 1) / 2,
                _ => r_star,
            };
            let entry = &mut bands[band];
            entry.pairs += 1;
            for s in &eval.inverse_spectra {
                let mag = s[(i, j)].norm();
                entry.min_mag = Some(entry.min_mag.map_or(mag, |m| m.min(mag)));
                entry.max_mag = Some(entry.max_mag.map_or(mag, |m| m.max(mag)));
            }
        }
    }
    bands
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub omega: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub r_star: usize,
    pub tol: f64,
    /// Largest `|[S(ω)]_ij|` over pairs with `d(i, j) >= 2r* + 1`.
    pub max_offsupport: f64,
    /// Smallest, over pairs with `0 < d(i, j) <= 2r*`, of the pair's peak magnitude.
    pub min_onsupport: Option<f64>,
    /// Largest magnitude over those same pairs.
    pub max_onsupport: Option<f64>,
    pub bands: Vec<MagnitudeBand>,
    /// Off-support entries above `tol` times the largest entry of `S(ω)`.
    pub violations: Vec<Violation>,
}

/// Checks that `[S(ω)]_ij` vanishes for every pair at distance at least
/// `2r* + 1` and every grid frequency. Report-only: never fails on violations.
pub fn verify_conditional_support(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    omega_grid: &[f64],
    tol: f64,
) -> Result<SupportReport> {
    let r_star = coeffs.order().r_star();
    let eval = evaluate(coeffs, structure, omega_grid, coeffs.sigma2())?;
    let d = structure.d();
    let dist = structure.distances();

    let mut max_offsupport = 0.0f64;
    let mut violations = Vec::new();
    let mut on_peaks = Vec::new();
    for i in 0..d {
        for j in 0..d {
            match classify(dist.get(i, j), r_star) {
                PairBand::SelfPair => {}
                PairBand::ConditionallyUncorrelated => {
                    for (s, &omega) in eval.inverse_spectra.iter().zip(&eval.omega_grid) {
                        let magnitude = s[(i, j)].norm();
                        max_offsupport = max_offsupport.max(magnitude);
                        let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
                        if magnitude > tol * scale {
                            violations.push(Violation { i, j, omega, magnitude });
                        }
                    }
                }
                PairBand::Active | PairBand::Colliding => {
                    let peak = eval.inverse_spectra.iter().map(|s| s[(i, j)].norm()).fold(0.0, f64::max);
                    on_peaks.push(peak);
                }
            }
        }
    }
    Ok(SupportReport {
        r_star,
        tol,
        max_offsupport,
        min_onsupport: on_peaks.iter().copied().reduce(f64::min),
        max_onsupport: on_peaks.iter().copied().reduce(f64::max),
        bands: magnitude_bands(&eval, structure, r_star),
        violations,
    })
}
