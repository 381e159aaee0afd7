//! File formats, series transforms and dataset provenance.
//!
//! Edge lists are UTF-8 text with one edge per line, `a<TAB>b[<TAB>weight]`.
//! Lines without a tab are split on whitespace instead, `#` starts a comment
//! line, and a line holding a single label declares a node without edges.
//! Nodes are ordered by first appearance.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GnarError, Result};
use crate::fit::{information_criteria, FitResult};
use crate::graph::Network;
use crate::model::{Alpha, AlphaMode, GnarCoefficients, GnarOrder, NetworkTimeSeries};

pub fn parse_network(text: &str) -> Result<Network> {
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize, Option<f64>)> = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();

    let mut intern = |label: &str, labels: &mut Vec<String>| -> usize {
        *index.entry(label.to_string()).or_insert_with(|| {
            labels.push(label.to_string());
            labels.len() - 1
        })
    };

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if raw.contains('\t') {
            trimmed.split('\t').map(str::trim).collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        if fields.iter().any(|f| f.is_empty()) {
            return Err(GnarError::Malformed { line, message: "empty field".into() });
        }
        match fields.as_slice() {
            [label] => {
                intern(label, &mut labels);
            }
            [a, b] | [a, b, _] => {
                let weight = match fields.get(2) {
                    None => None,
                    Some(w) => Some(w.parse::<f64>().ok().filter(|w| w.is_finite() && *w > 0.0).ok_or_else(|| {
                        GnarError::Malformed { line, message: format!("weight {w:?} is not a positive number") }
                    })?),
                };
                if a == b {
                    return Err(GnarError::SelfLoop { line, label: a.to_string() });
                }
                let i = intern(a, &mut labels);
                let j = intern(b, &mut labels);
                if seen.insert((i.min(j), i.max(j)), line).is_some() {
                    return Err(GnarError::DuplicateEdge { line, a: a.to_string(), b: b.to_string() });
                }
                if let Some(&(_, _, first)) = edges.first() {
                    if first.is_some() != weight.is_some() {
                        return Err(GnarError::Malformed {
                            line,
                            message: "either every edge carries a weight or none does".into(),
                        });
                    }
                }
                edges.push((i, j, weight));
            }
            _ => {
                return Err(GnarError::Malformed {
                    line,
                    message: format!("expected 1 to 3 fields, found {}", fields.len()),
                })
            }
        }
    }

    if edges.first().is_some_and(|e| e.2.is_some()) {
        Network::weighted(labels, edges.into_iter().map(|(i, j, w)| (i, j, w.unwrap_or(1.0))))
    } else {
        Network::new(labels, edges.into_iter().map(|(i, j, _)| (i, j)))
    }
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    parse_network(&std::fs::read_to_string(path)?)
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.starts_with('#') || label.chars().any(char::is_whitespace) {
        return Err(GnarError::InvalidArgument(format!(
            "label {label:?} cannot be written to an edge list"
        )));
    }
    Ok(())
}

/// Edge-list text that parses back to the same network. Each edge is written
/// when its later endpoint is reached, so first appearance follows node order.
pub fn format_network(net: &Network) -> Result<String> {
    let labels = net.labels();
    labels.iter().try_for_each(|l| check_label(l))?;
    let mut out = String::new();
    for j in 0..net.d() {
        let earlier: Vec<usize> = net.neighbours(j).iter().copied().filter(|&i| i < j).collect();
        let introduced_by_next = j + 1 < net.d() && net.neighbours(j + 1).first() == Some(&j);
        if earlier.is_empty() && !introduced_by_next {
            writeln!(out, "{}", labels[j]).unwrap();
        }
        for i in earlier {
            match net.edge_weight(i, j) {
                Some(w) if net.is_weighted() => writeln!(out, "{}\t{}\t{}", labels[i], labels[j], w).unwrap(),
                _ => writeln!(out, "{}\t{}", labels[i], labels[j]).unwrap(),
            }
        }
    }
    Ok(out)
}

pub fn write_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, format_network(net)?.as_bytes())
}

/// Parses a series CSV whose header names every network node exactly once,
/// reordering columns to the network's node order.
pub fn parse_series(text: &str, net: &Network) -> Result<NetworkTimeSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let mut column_of = vec![None; net.d()];
    for (c, label) in header.iter().enumerate() {
        let node = net
            .index_of(label)
            .ok_or_else(|| GnarError::Alignment(format!("column {label:?} is not a network node")))?;
        if column_of[node].replace(c).is_some() {
            return Err(GnarError::Alignment(format!("column {label:?} appears twice")));
        }
    }
    if let Some(node) = column_of.iter().position(Option::is_none) {
        return Err(GnarError::Alignment(format!("missing column for node {:?}", net.labels()[node])));
    }

    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        rows += 1;
        for c in column_of.iter().flatten() {
            let cell = &record[*c];
            let value = cell.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| GnarError::Cell {
                row: rows,
                column: header[*c].clone(),
                value: cell.to_string(),
            })?;
            data.push(value);
        }
    }
    if rows == 0 {
        return Err(GnarError::InsufficientData { needed: 0, available: 0 });
    }
    NetworkTimeSeries::new(DMatrix::from_row_slice(rows, net.d(), &data), net)
}

pub fn load_series(path: impl AsRef<Path>, net: &Network) -> Result<NetworkTimeSeries> {
    parse_series(&std::fs::read_to_string(path)?, net)
}

/// CSV with a label header; values use the shortest round-trip representation.
pub fn format_series(series: &NetworkTimeSeries) -> Result<String> {
    matrix_csv(series.labels(), series.values())
}

pub fn matrix_csv(header: &[String], values: &DMatrix<f64>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in values.row_iter() {
        writer.write_record(row.iter().map(|x| x.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| GnarError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_series(series: &NetworkTimeSeries, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, format_series(series)?.as_bytes())
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| GnarError::Io(e.error))?;
    Ok(())
}

/// `log(1 + y)` elementwise; counts must be non-negative.
pub fn transform_log1p(series: &NetworkTimeSeries) -> Result<NetworkTimeSeries> {
    if let Some(pos) = series.values().iter().position(|&y| y < 0.0) {
        let t = series.len();
        return Err(GnarError::InvalidArgument(format!(
            "log1p needs non-negative values; time {} node {:?} is {}",
            pos % t + 1,
            series.labels()[pos / t],
            series.values()[pos]
        )));
    }
    series.with_values(series.values().map(f64::ln_1p))
}

/// `X_t - X_{t-lag}`, dropping the first `lag` rows.
pub fn transform_difference(series: &NetworkTimeSeries, lag: usize) -> Result<NetworkTimeSeries> {
    if lag == 0 {
        return Err(GnarError::InvalidArgument("difference lag must be at least 1".into()));
    }
    let t = series.len();
    if t <= lag {
        return Err(GnarError::InsufficientData { needed: lag, available: t });
    }
    let x = series.values();
    series.with_values(x.rows(lag, t - lag) - x.rows(0, t - lag))
}

/// Subtracts each node's sample mean.
pub fn transform_center(series: &NetworkTimeSeries) -> Result<NetworkTimeSeries> {
    let mut values = series.values().clone();
    for mut col in values.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    series.with_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "transform", rename_all = "snake_case")]
pub enum Transform {
    Log1p,
    Difference { lag: usize },
    Center,
}

impl Transform {
    pub fn apply(self, series: &NetworkTimeSeries) -> Result<NetworkTimeSeries> {
        match self {
            Transform::Log1p => transform_log1p(series),
            Transform::Difference { lag } => transform_difference(series, lag),
            Transform::Center => transform_center(series),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub network_source: Option<PathBuf>,
    pub series_source: Option<PathBuf>,
    pub transforms: Vec<Transform>,
}

/// A series paired with its network and a record of how it was produced.
#[derive(Debug, Clone)]
pub struct Dataset {
    series: NetworkTimeSeries,
    network: Network,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(series: NetworkTimeSeries, network: Network) -> Result<Self> {
        if series.labels() != network.labels() {
            return Err(GnarError::Alignment("series column labels differ from the network node labels".into()));
        }
        Ok(Self {
            series,
            network,
            provenance: Provenance { network_source: None, series_source: None, transforms: Vec::new() },
        })
    }

    pub fn load(network_path: impl AsRef<Path>, series_path: impl AsRef<Path>) -> Result<Self> {
        let network = load_network(&network_path)?;
        let series = load_series(&series_path, &network)?;
        let mut dataset = Self::new(series, network)?;
        dataset.provenance.network_source = Some(network_path.as_ref().to_path_buf());
        dataset.provenance.series_source = Some(series_path.as_ref().to_path_buf());
        Ok(dataset)
    }

    pub fn apply(mut self, transform: Transform) -> Result<Self> {
        self.series = transform.apply(&self.series)?;
        self.provenance.transforms.push(transform);
        Ok(self)
    }

    pub fn series(&self) -> &NetworkTimeSeries {
        &self.series
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// On-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub order: GnarOrder,
    pub mode: AlphaMode,
    pub alpha: Alpha,
    pub beta: Vec<Vec<f64>>,
    pub sigma2: f64,
    pub stderr: Vec<f64>,
    pub aic: f64,
    pub bic: f64,
    /// Names of the entries of `stderr`.
    pub columns: Vec<String>,
}

impl FitRecord {
    pub fn from_fit(fit: &FitResult) -> Self {
        let ic = information_criteria(fit);
        Self {
            order: fit.order.clone(),
            mode: fit.mode,
            alpha: fit.coefficients.alpha().clone(),
            beta: fit.coefficients.beta().to_vec(),
            sigma2: fit.sigma2_hat,
            stderr: fit.std_errors.clone(),
            aic: ic.aic,
            bic: ic.bic,
            columns: fit.columns.clone(),
        }
    }
}

/// Coefficient file: `{"alpha": [...], "beta": [[...]], "sigma2": x}`.
/// Fit records are accepted too; extra fields are ignored.
#[derive(Debug, Clone, Deserialize)]
struct CoefficientsRecord {
    alpha: Alpha,
    beta: Vec<Vec<f64>>,
    #[serde(default = "unit_variance")]
    sigma2: f64,
}

fn unit_variance() -> f64 {
    1.0
}

pub fn coefficients_from_json(text: &str) -> Result<GnarCoefficients> {
    let record: CoefficientsRecord = serde_json::from_str(text)
        .map_err(|e| GnarError::Malformed { line: e.line(), message: e.to_string() })?;
    GnarCoefficients::checked(record.alpha, record.beta, record.sigma2, true)
}

pub fn load_coefficients(path: impl AsRef<Path>) -> Result<GnarCoefficients> {
    coefficients_from_json(&std::fs::read_to_string(path)?)
}
