//! Network autocorrelation (NACF), partial network autocorrelation (PNACF)
//! and the polar Corbit / Wagner layouts built from them.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GnarError, Result};
use crate::fit::fit_least_squares;
use crate::graph::NetworkStructure;
use crate::model::{AlphaMode, GnarOrder, NetworkTimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelogramKind {
    Nacf,
    Pnacf,
}

impl std::str::FromStr for CorrelogramKind {
    type Err = GnarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nacf" => Ok(Self::Nacf),
            "pnacf" => Ok(Self::Pnacf),
            other => Err(GnarError::InvalidArgument(format!("unknown correlogram kind {other:?}"))),
        }
    }
}

fn is_constant(values: &DMatrix<f64>) -> bool {
    values.column_iter().all(|col| {
        let first = col[0];
        col.iter().all(|&x| x == first)
    })
}

/// The NACF ratio applied to an arbitrary `T × d` matrix, centred at its
/// per-node mean.
fn network_autocorrelation(values: &DMatrix<f64>, structure: &NetworkStructure, h: usize, r: usize) -> Result<f64> {
    if is_constant(values) {
        return Err(GnarError::DegenerateSeries);
    }
    let t_len = values.nrows();
    let mean = values.row_mean();
    let mut centred = values.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let denominator = (1.0 + structure.lambda()) * centred.norm_squared();
    if denominator == 0.0 {
        return Err(GnarError::DegenerateSeries);
    }
    // Row t of `projected` is ((W ⊙ S_r + I)(X_t - X̄))ᵀ.
    let operator = structure.stage_weights(r) + DMatrix::identity(structure.d(), structure.d());
    let projected = &centred * operator.transpose();
    let numerator: f64 = (0..t_len - h)
        .map(|t| centred.row(t + h).dot(&projected.row(t)))
        .sum();
    Ok(numerator / denominator)
}

fn check_stage(structure: &NetworkStructure, r: usize) -> Result<()> {
    if r == 0 || r > structure.r_max() {
        return Err(GnarError::InvalidArgument(format!(
            "stage {r} outside 1..={}",
            structure.r_max()
        )));
    }
    Ok(())
}

/// Sample network autocorrelation at lag `h` and stage `r`.
pub fn nacf(series: &NetworkTimeSeries, structure: &NetworkStructure, h: usize, r: usize) -> Result<f64> {
    series.check_against(structure)?;
    check_stage(structure, r)?;
    if h == 0 || h >= series.len() {
        return Err(GnarError::InvalidArgument(format!("lag {h} outside 1..{}", series.len())));
    }
    network_autocorrelation(series.values(), structure, h, r)
}

/// Sample partial network autocorrelation at lag `h` and stage `r`.
///
/// Residuals come from a least-squares `GNAR(h - 1, [r - 1, ..., r - 1])`
/// fit; when `h = 1` the reduced model is empty and the series itself is
/// used, so `pnacf(1, r) = nacf(1, r)`.
pub fn pnacf(series: &NetworkTimeSeries, structure: &NetworkStructure, h: usize, r: usize) -> Result<f64> {
    series.check_against(structure)?;
    check_stage(structure, r)?;
    if h == 0 {
        return Err(GnarError::InvalidArgument("lag must be at least 1".into()));
    }
    if h == 1 {
        return nacf(series, structure, h, r);
    }
    let reduced = GnarOrder::uniform(h - 1, r - 1)?;
    let fit = fit_least_squares(series, structure, &reduced, AlphaMode::Global)?;
    if fit.residuals.nrows() <= h {
        return Err(GnarError::InsufficientData {
            needed: 2 * h - 1,
            available: series.len(),
        });
    }
    network_autocorrelation(&fit.residuals, structure, h, r)
}

/// `(h, r)` table of NACF or PNACF values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NacfGrid {
    pub kind: CorrelogramKind,
    pub max_h: usize,
    pub max_r: usize,
    /// `values[h - 1][r - 1]`.
    pub values: Vec<Vec<f64>>,
    /// Heuristic `2 / sqrt(T d)` band for reading cut-offs.
    pub null_band: f64,
}

impl NacfGrid {
    pub fn get(&self, h: usize, r: usize) -> f64 {
        self.values[h - 1][r - 1]
    }
}

pub fn grid(
    series: &NetworkTimeSeries,
    structure: &NetworkStructure,
    max_h: usize,
    max_r: usize,
    kind: CorrelogramKind,
) -> Result<NacfGrid> {
    if max_h == 0 || max_r == 0 {
        return Err(GnarError::InvalidArgument("max_h and max_r must be at least 1".into()));
    }
    check_stage(structure, max_r)?;
    let cells: Vec<(usize, usize)> = (1..=max_h).flat_map(|h| (1..=max_r).map(move |r| (h, r))).collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(h, r)| match kind {
            CorrelogramKind::Nacf => nacf(series, structure, h, r),
            CorrelogramKind::Pnacf => pnacf(series, structure, h, r),
        })
        .collect::<Result<_>>()?;
    Ok(NacfGrid {
        kind,
        max_h,
        max_r,
        values: flat.chunks(max_r).map(<[f64]>::to_vec).collect(),
        null_band: 2.0 / ((series.len() * series.d()) as f64).sqrt(),
    })
}

/// Smallest and largest point size in layout units.
pub const SIZE_MIN: f64 = 1.0;
pub const SIZE_MAX: f64 = 6.0;

/// Position on a colour scale whose domain `[-1, 1]` maps onto `[0, 1]`.
pub fn color_scalar(value: f64) -> f64 {
    (value.clamp(-1.0, 1.0) + 1.0) / 2.0
}

pub fn size_scalar(value: f64) -> f64 {
    SIZE_MIN + value.abs().min(1.0) * (SIZE_MAX - SIZE_MIN)
}

fn lag_angle(h: usize, max_h: usize) -> f64 {
    2.0 * PI * (h - 1) as f64 / max_h as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutPoint {
    pub h: usize,
    pub r: usize,
    /// Ring index counted from the inside; equals `r`. Zero is the centre.
    pub ring: usize,
    /// Radians, proportional to `h - 1`.
    pub angle: f64,
    pub value: f64,
    pub color: f64,
    pub size: f64,
}

impl LayoutPoint {
    fn at(h: usize, r: usize, max_h: usize, value: f64) -> Self {
        Self {
            h,
            r,
            ring: r,
            angle: lag_angle(h, max_h),
            value,
            color: color_scalar(value),
            size: size_scalar(value),
        }
    }

    fn origin() -> Self {
        Self {
            h: 0,
            r: 0,
            ring: 0,
            angle: 0.0,
            value: 0.0,
            color: color_scalar(0.0),
            size: SIZE_MIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorbitLayout {
    pub kind: CorrelogramKind,
    pub max_h: usize,
    pub max_r: usize,
    pub points: Vec<LayoutPoint>,
    /// Reference point with value zero and the smallest size.
    pub center: LayoutPoint,
    pub slices: Vec<String>,
}

impl CorbitLayout {
    /// Grid points plus the centre.
    pub fn point_count(&self) -> usize {
        self.points.len() + 1
    }
}

pub fn corbit_layout(grid: &NacfGrid) -> CorbitLayout {
    let points = (1..=grid.max_h)
        .flat_map(|h| (1..=grid.max_r).map(move |r| (h, r)))
        .map(|(h, r)| LayoutPoint::at(h, r, grid.max_h, grid.get(h, r)))
        .collect();
    CorbitLayout {
        kind: grid.kind,
        max_h: grid.max_h,
        max_r: grid.max_r,
        points,
        center: LayoutPoint::origin(),
        slices: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WagnerPoint {
    pub h: usize,
    pub r: usize,
    pub ring: usize,
    pub angle: f64,
    /// Index into `slices`; sub-points of one cell sit on a small circle around its mean.
    pub slice: usize,
    pub value: f64,
    pub color: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WagnerLayout {
    pub kind: CorrelogramKind,
    pub max_h: usize,
    pub max_r: usize,
    pub points: Vec<WagnerPoint>,
    /// Per-`(h, r)` mean over slices, drawn at the middle of each point-set.
    pub center: Vec<LayoutPoint>,
    pub slices: Vec<String>,
    #[serde(skip)]
    pub grids: Vec<NacfGrid>,
}

impl WagnerLayout {
    /// Slice sub-points plus one mean point per cell.
    pub fn point_count(&self) -> usize {
        self.points.len() + self.center.len()
    }
}

/// Cuts a series into labelled zero-based, half-open row ranges.
pub fn time_slices(
    series: &NetworkTimeSeries,
    ranges: &[(String, Range<usize>)],
) -> Result<Vec<(String, NetworkTimeSeries)>> {
    ranges
        .iter()
        .map(|(label, range)| Ok((label.clone(), series.slice(range.clone())?)))
        .collect()
}

/// One grid per slice (each slice is a standalone series over the same
/// network) plus their arithmetic mean.
pub fn wagner_layout(
    slices: &[(String, NetworkTimeSeries)],
    structure: &NetworkStructure,
    max_h: usize,
    max_r: usize,
    kind: CorrelogramKind,
) -> Result<WagnerLayout> {
    if slices.len() < 2 {
        return Err(GnarError::InvalidSlice(format!(
            "a Wagner layout compares at least two slices, got {}",
            slices.len()
        )));
    }
    for (label, part) in slices {
        if part.len() < max_h + 1 {
            return Err(GnarError::InvalidSlice(format!(
                "slice {label:?} has {} time steps, lag {max_h} needs at least {}",
                part.len(),
                max_h + 1
            )));
        }
    }
    let grids: Vec<NacfGrid> = slices
        .iter()
        .map(|(_, part)| grid(part, structure, max_h, max_r, kind))
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(max_h * max_r * slices.len());
    let mut center = Vec::with_capacity(max_h * max_r);
    for h in 1..=max_h {
        for r in 1..=max_r {
            let values = DVector::from_iterator(grids.len(), grids.iter().map(|g| g.get(h, r)));
            for (slice, &value) in values.iter().enumerate() {
                points.push(WagnerPoint {
                    h,
                    r,
                    ring: r,
                    angle: lag_angle(h, max_h),
                    slice,
                    value,
                    color: color_scalar(value),
                    size: size_scalar(value),
                });
            }
            center.push(LayoutPoint::at(h, r, max_h, values.mean()));
        }
    }
    Ok(WagnerLayout {
        kind,
        max_h,
        max_r,
        points,
        center,
        slices: slices.iter().map(|(label, _)| label.clone()).collect(),
        grids,
    })
}
