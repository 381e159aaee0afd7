//! Node-influence indices derived from the network structure and a fitted model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GnarError, Result};
use crate::graph::NetworkStructure;
use crate::model::GnarCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelevanceVariant {
    /// Column sums of `Σ_{r<=r*} W ⊙ S_r`.
    #[default]
    Cumulative,
    /// Column sums of `W ⊙ S_{r*}` only.
    SingleStage,
}

impl std::str::FromStr for RelevanceVariant {
    type Err = GnarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative" => Ok(Self::Cumulative),
            "single-stage" => Ok(Self::SingleStage),
            other => Err(GnarError::InvalidArgument(format!(
                "unknown relevance variant {other:?} (expected cumulative or single-stage)"
            ))),
        }
    }
}

fn check_r_star(structure: &NetworkStructure, r_star: usize) -> Result<()> {
    if r_star == 0 || r_star > structure.r_max() {
        return Err(GnarError::InvalidArgument(format!(
            "r* must lie in 1..={}, got {r_star}",
            structure.r_max()
        )));
    }
    Ok(())
}

/// Column sums of the active weight structure, scaled so the largest is 1.
pub fn global_relevance(structure: &NetworkStructure, r_star: usize, variant: RelevanceVariant) -> Result<Vec<f64>> {
    check_r_star(structure, r_star)?;
    let d = structure.d();
    let stages = match variant {
        RelevanceVariant::Cumulative => 1..r_star + 1,
        RelevanceVariant::SingleStage => r_star..r_star + 1,
    };
    let mut active = DMatrix::<f64>::zeros(d, d);
    for r in stages {
        active += structure.stage_weights(r);
    }
    let sums: Vec<f64> = active.column_iter().map(|c| c.sum()).collect();
    let max = sums.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(GnarError::DegenerateNetwork(format!("no active pairs up to stage {r_star}")));
    }
    Ok(sums.into_iter().map(|s| s / max).collect())
}

fn stage_strength(coeffs: &GnarCoefficients, r: usize) -> f64 {
    (1..=coeffs.p()).map(|k| coeffs.beta_at(k, r).abs()).sum()
}

fn stage_of(structure: &NetworkStructure, i: usize, j: usize, r_star: usize) -> Option<usize> {
    structure.distances().get(i, j).filter(|&r| r >= 1 && r <= r_star)
}

/// Influence row of node `i`: for each borough member `j`,
/// `w_ij Σ_k |β_{k,r(i,j)}|` divided by the same quantity summed over the borough.
/// Returns `None` when the borough is empty or all its weight is zero.
fn influence_row(coeffs: &GnarCoefficients, structure: &NetworkStructure, r_star: usize, i: usize) -> Option<Vec<f64>> {
    let d = structure.d();
    let w = structure.weights();
    let strengths: Vec<f64> = (1..=r_star).map(|r| stage_strength(coeffs, r)).collect();
    let numerators: Vec<f64> = (0..d)
        .map(|j| match stage_of(structure, i, j, r_star) {
            Some(r) => w.get(i, j) * strengths[r - 1],
            None => 0.0,
        })
        .collect();
    let total: f64 = numerators.iter().sum();
    (total > 0.0).then(|| numerators.into_iter().map(|x| x / total).collect())
}

pub fn local_influence(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    r_star: usize,
    i: usize,
    j: usize,
) -> Result<f64> {
    check_r_star(structure, r_star)?;
    check_node(structure, i)?;
    check_node(structure, j)?;
    Ok(influence_row(coeffs, structure, r_star, i).map_or(0.0, |row| row[j]))
}

fn check_node(structure: &NetworkStructure, i: usize) -> Result<()> {
    if i >= structure.d() {
        return Err(GnarError::InvalidArgument(format!("node index {i} out of range for {} nodes", structure.d())));
    }
    Ok(())
}

/// `1/d` for active pairs, `1/(2d)` for colliding pairs, zero beyond `2r*`.
pub fn rscc(structure: &NetworkStructure, r_star: usize, i: usize, j: usize) -> Result<f64> {
    if r_star == 0 {
        return Err(GnarError::InvalidArgument("r* must be at least 1".into()));
    }
    check_node(structure, i)?;
    check_node(structure, j)?;
    Ok(match structure.distances().get(i, j) {
        Some(0) => 1.0,
        Some(dist) if dist <= r_star => 1.0 / dist as f64,
        Some(dist) if dist <= 2 * r_star => 1.0 / (2 * dist) as f64,
        _ => 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceReport {
    pub labels: Vec<String>,
    pub r_star: usize,
    pub variant: RelevanceVariant,
    pub global_relevance: Vec<f64>,
    /// Row `i` holds the influence of every node on node `i`.
    pub local_influence: Vec<Vec<f64>>,
    pub rscc: Vec<Vec<f64>>,
    /// Nodes whose influence row is all zero because nothing in their borough carries weight.
    pub empty_boroughs: Vec<String>,
}

pub fn influence_report(
    coeffs: &GnarCoefficients,
    structure: &NetworkStructure,
    r_star: usize,
    variant: RelevanceVariant,
) -> Result<InfluenceReport> {
    let global_relevance = global_relevance(structure, r_star, variant)?;
    let d = structure.d();
    let labels = structure.network().labels().to_vec();
    let mut local = Vec::with_capacity(d);
    let mut empty_boroughs = Vec::new();
    for i in 0..d {
        match influence_row(coeffs, structure, r_star, i) {
            Some(row) => local.push(row),
            None => {
                empty_boroughs.push(labels[i].clone());
                local.push(vec![0.0; d]);
            }
        }
    }
    let rscc = (0..d)
        .map(|i| (0..d).map(|j| rscc(structure, r_star, i, j)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(InfluenceReport {
        labels,
        r_star,
        variant,
        global_relevance,
        local_influence: local,
        rscc,
        empty_boroughs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Network;
    use crate::testutil::assert_close;

    fn coeffs(beta: Vec<Vec<f64>>) -> GnarCoefficients {
        let alpha = vec![0.1; beta.len()];
        GnarCoefficients::global(alpha, beta, 1.0).unwrap()
    }

    #[test]
    fn cycle_relevance_is_uniform() {
        let structure = NetworkStructure::new(&Network::cycle(6));
        for r in 1..=3 {
            let g = global_relevance(&structure, r, RelevanceVariant::Cumulative).unwrap();
            g.iter().for_each(|&x| assert_close(x, 1.0, 1e-15));
        }
    }

    #[test]
    fn star_relevance() {
        let structure = NetworkStructure::new(&Network::star(3));
        let g = global_relevance(&structure, 1, RelevanceVariant::Cumulative).unwrap();
        assert_eq!(g[0], 1.0);
        g[1..].iter().for_each(|&x| assert_close(x, 1.0 / 9.0, 1e-15));
    }

    #[test]
    fn single_edge_relevance() {
        let structure = NetworkStructure::new(&Network::path(2));
        assert_eq!(global_relevance(&structure, 1, RelevanceVariant::Cumulative).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn single_stage_variant_differs_on_path() {
        let structure = NetworkStructure::new(&Network::path(4));
        let single = global_relevance(&structure, 2, RelevanceVariant::SingleStage).unwrap();
        // Stage-2 weights: node 0 and 3 each see one node, nodes 1 and 2 see one node.
        assert_eq!(single, vec![1.0, 1.0, 1.0, 1.0]);
        let cumulative = global_relevance(&structure, 2, RelevanceVariant::Cumulative).unwrap();
        assert!(cumulative.iter().any(|&x| x < 1.0));
    }

    #[test]
    fn edgeless_relevance_is_degenerate() {
        let structure = NetworkStructure::new(&Network::isolated(3));
        assert!(matches!(
            global_relevance(&structure, 1, RelevanceVariant::Cumulative),
            Err(GnarError::DegenerateNetwork(_))
        ));
        assert!(global_relevance(&structure, 0, RelevanceVariant::Cumulative).is_err());
    }

    #[test]
    fn local_single_stage_recovers_weight() {
        let structure = NetworkStructure::new(&Network::star(4));
        let c = coeffs(vec![vec![0.3], vec![-0.1]]);
        for j in 1..5 {
            assert_close(local_influence(&c, &structure, 1, 0, j).unwrap(), structure.weights().get(0, j), 1e-15);
        }
        assert_eq!(local_influence(&c, &structure, 1, 1, 2).unwrap(), 0.0);
    }

    #[test]
    fn local_identical_betas_reduce_to_weight_share() {
        let structure = NetworkStructure::new(&Network::path(5));
        let c = coeffs(vec![vec![0.2, 0.2]]);
        let w = structure.weights();
        for i in 0..5 {
            let borough: Vec<usize> = (0..5)
                .filter(|&j| matches!(structure.distances().get(i, j), Some(1 | 2)))
                .collect();
            let total: f64 = borough.iter().map(|&l| w.get(i, l)).sum();
            for &j in &borough {
                assert_close(local_influence(&c, &structure, 2, i, j).unwrap(), w.get(i, j) / total, 1e-14);
            }
        }
    }

    #[test]
    fn local_rows_sum_to_one() {
        let structure = NetworkStructure::new(&Network::path(6));
        let c = coeffs(vec![vec![0.3, -0.05], vec![0.1, 0.02]]);
        let report = influence_report(&c, &structure, 2, RelevanceVariant::Cumulative).unwrap();
        assert!(report.empty_boroughs.is_empty());
        for row in &report.local_influence {
            assert_close(row.iter().sum(), 1.0, 1e-12);
        }
    }

    #[test]
    fn isolated_node_flagged() {
        let net = Network::new(
            ["a", "b", "c"].map(String::from).to_vec(),
            [(0, 1)],
        )
        .unwrap();
        let structure = NetworkStructure::new(&net);
        let c = coeffs(vec![vec![0.3]]);
        let report = influence_report(&c, &structure, 1, RelevanceVariant::Cumulative).unwrap();
        assert_eq!(report.empty_boroughs, vec!["c".to_string()]);
        assert!(report.local_influence[2].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_betas_flag_every_node() {
        let structure = NetworkStructure::new(&Network::path(3));
        let c = coeffs(vec![vec![0.0]]);
        let report = influence_report(&c, &structure, 1, RelevanceVariant::Cumulative).unwrap();
        assert_eq!(report.empty_boroughs.len(), 3);
    }

    #[test]
    fn rscc_piecewise() {
        let structure = NetworkStructure::new(&Network::path(6));
        assert_eq!(rscc(&structure, 1, 0, 1).unwrap(), 1.0);
        assert_eq!(rscc(&structure, 1, 0, 2).unwrap(), 0.25);
        assert_eq!(rscc(&structure, 1, 0, 3).unwrap(), 0.0);
        assert_eq!(rscc(&structure, 2, 0, 2).unwrap(), 0.5);
        assert_close(rscc(&structure, 2, 0, 3).unwrap(), 1.0 / 6.0, 1e-15);
        assert_eq!(rscc(&structure, 2, 0, 5).unwrap(), 0.0);
        assert!(rscc(&structure, 0, 0, 1).is_err());
    }

    #[test]
    fn relevance_ignores_beta_scale() {
        let structure = NetworkStructure::new(&Network::star(5));
        let a = influence_report(&coeffs(vec![vec![0.2]]), &structure, 1, RelevanceVariant::Cumulative).unwrap();
        let b = influence_report(&coeffs(vec![vec![0.6]]), &structure, 1, RelevanceVariant::Cumulative).unwrap();
        assert_eq!(a.global_relevance, b.global_relevance);
        assert_eq!(a.local_influence, b.local_influence);
    }
}
