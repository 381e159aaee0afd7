//! Graph-derived regression structure.
//!
//! Everything here is computed once per network: hop distances, the
//! r-stage adjacency matrices `S_r`, the normalised weights matrix `W`
//! and the autocovariance bound `λ`. [`NetworkStructure`] bundles them so
//! the estimation and diagnostic code can share one precomputed view.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{GnarError, Result};

/// Undirected, optionally weighted, simple graph with labelled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    labels: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
    weights: Option<BTreeMap<(usize, usize), f64>>,
    adjacency: Vec<Vec<usize>>,
}

fn canonical(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Network {
    /// Builds an unweighted network. Edges are unordered pairs of node indices.
    pub fn new<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::build(labels, edges.into_iter().map(|(i, j)| (i, j, None)))
    }

    /// Builds a network where every edge carries a positive weight.
    pub fn weighted<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Self::build(labels, edges.into_iter().map(|(i, j, w)| (i, j, Some(w))))
    }

    fn build<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Option<f64>)>,
    {
        let d = labels.len();
        let mut seen = HashSet::with_capacity(d);
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(GnarError::InvalidNetwork(format!("duplicate node label {label:?}")));
            }
        }

        let mut edge_set = BTreeSet::new();
        let mut weights = BTreeMap::new();
        let mut weighted: Option<bool> = None;
        for (i, j, w) in edges {
            if i >= d || j >= d {
                return Err(GnarError::InvalidNetwork(format!(
                    "edge ({i}, {j}) references a node outside 0..{d}"
                )));
            }
            if i == j {
                return Err(GnarError::InvalidNetwork(format!(
                    "self-loop on node {:?}",
                    labels[i]
                )));
            }
            match (weighted, w.is_some()) {
                (None, has) => weighted = Some(has),
                (Some(a), b) if a != b => {
                    return Err(GnarError::InvalidNetwork(
                        "either every edge carries a weight or none does".into(),
                    ))
                }
                _ => {}
            }
            let key = canonical(i, j);
            if !edge_set.insert(key) {
                return Err(GnarError::InvalidNetwork(format!(
                    "duplicate edge {:?} -- {:?}",
                    labels[key.0], labels[key.1]
                )));
            }
            if let Some(w) = w {
                if !(w.is_finite() && w > 0.0) {
                    return Err(GnarError::InvalidNetwork(format!(
                        "edge {:?} -- {:?} has non-positive weight {w}",
                        labels[key.0], labels[key.1]
                    )));
                }
                weights.insert(key, w);
            }
        }

        let mut adjacency = vec![Vec::new(); d];
        for &(i, j) in &edge_set {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(Self {
            labels,
            edges: edge_set,
            weights: weighted.unwrap_or(false).then_some(weights),
            adjacency,
        })
    }

    pub fn d(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Canonical `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&canonical(i, j))
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Edge weight; `None` when the graph is unweighted or the pair is not an edge.
    pub fn edge_weight(&self, i: usize, j: usize) -> Option<f64> {
        self.weights.as_ref()?.get(&canonical(i, j)).copied()
    }

    /// Sorted neighbour indices of node `i`.
    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    fn numbered(d: usize) -> Vec<String> {
        (1..=d).map(|i| i.to_string()).collect()
    }

    /// Nodes labelled `1..=d` with no edges.
    pub fn isolated(d: usize) -> Self {
        Self::new(Self::numbered(d), std::iter::empty()).expect("valid by construction")
    }

    /// Path `1 - 2 - ... - d`.
    pub fn path(d: usize) -> Self {
        Self::new(Self::numbered(d), (1..d).map(|i| (i - 1, i))).expect("valid by construction")
    }

    /// Cycle on `d >= 3` nodes.
    pub fn cycle(d: usize) -> Self {
        assert!(d >= 3, "a cycle needs at least three nodes");
        Self::new(Self::numbered(d), (0..d).map(|i| (i, (i + 1) % d))).expect("valid by construction")
    }

    /// Star `K_{1,leaves}`; node 0 is the centre.
    pub fn star(leaves: usize) -> Self {
        Self::new(Self::numbered(leaves + 1), (1..=leaves).map(|l| (0, l))).expect("valid by construction")
    }

    pub fn complete(d: usize) -> Self {
        let edges = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j)));
        Self::new(Self::numbered(d), edges).expect("valid by construction")
    }

    /// Erdős–Rényi `G(d, prob)`.
    pub fn random<R: Rng + ?Sized>(d: usize, prob: f64, rng: &mut R) -> Self {
        let mut edges = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if rng.random::<f64>() < prob {
                    edges.push((i, j));
                }
            }
        }
        Self::new(Self::numbered(d), edges).expect("valid by construction")
    }
}

/// All-pairs hop distances; `None` marks nodes in different components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    d: usize,
    dist: Vec<Option<usize>>,
}

impl DistanceMatrix {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> Option<usize> {
        self.dist[i * self.d + j]
    }

    /// Largest finite distance, zero when there are no edges.
    pub fn max_finite(&self) -> usize {
        self.dist.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// Unweighted BFS from every node.
pub fn shortest_distances(net: &Network) -> DistanceMatrix {
    let d = net.d();
    let mut dist = vec![None; d * d];
    let mut queue = VecDeque::new();
    for source in 0..d {
        let row = &mut dist[source * d..(source + 1) * d];
        row[source] = Some(0);
        queue.clear();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = row[u].expect("queued nodes are labelled");
            for &v in net.neighbours(u) {
                if row[v].is_none() {
                    row[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    DistanceMatrix { d, dist }
}

/// The r-stage adjacency matrices `S_1, ..., S_{r_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageAdjacency {
    r_max: usize,
    matrices: Vec<DMatrix<f64>>,
}

impl StageAdjacency {
    pub fn r_max(&self) -> usize {
        self.r_max
    }

    /// `S_r` for `1 <= r <= r_max`.
    pub fn stage(&self, r: usize) -> &DMatrix<f64> {
        assert!(r >= 1 && r <= self.r_max, "stage {r} outside 1..={}", self.r_max);
        &self.matrices[r - 1]
    }

    /// The r-stage neighbourhood of node `i`, in index order.
    pub fn neighbourhood(&self, i: usize, r: usize) -> Vec<usize> {
        let s = self.stage(r);
        (0..s.ncols()).filter(|&j| s[(i, j)] != 0.0).collect()
    }
}

/// Builds `S_r` from hop distances. When `r_max` is omitted the largest
/// finite distance is used, floored at one so edgeless graphs still expose
/// an (empty) first stage.
pub fn stage_adjacency(dist: &DistanceMatrix, r_max: Option<usize>) -> Result<StageAdjacency> {
    let r_max = match r_max {
        Some(0) => return Err(GnarError::InvalidArgument("r_max must be at least 1".into())),
        Some(r) => r,
        None => dist.max_finite().max(1),
    };
    let d = dist.d();
    let mut matrices = vec![DMatrix::zeros(d, d); r_max];
    for i in 0..d {
        for j in 0..d {
            if let Some(r) = dist.get(i, j) {
                if r >= 1 && r <= r_max {
                    matrices[r - 1][(i, j)] = 1.0;
                }
            }
        }
    }
    Ok(StageAdjacency { r_max, matrices })
}

/// Row-stage normalised weights `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }
}

/// Weighted length of the lexicographically smallest hop-shortest path.
fn multi_hop_length(net: &Network, dist: &DistanceMatrix, from: usize, to: usize) -> f64 {
    let mut length = 0.0;
    let mut cur = from;
    while cur != to {
        let remaining = dist.get(cur, to).expect("pair is connected");
        let next = net
            .neighbours(cur)
            .iter()
            .copied()
            .find(|&v| dist.get(v, to) == Some(remaining - 1))
            .expect("a shortest path always has a next hop");
        length += net.edge_weight(cur, next).expect("weighted network");
        cur = next;
    }
    length
}

/// Normalises raw pair weights within every r-stage neighbourhood.
///
/// Unweighted graphs give each member of `N_r(i)` weight `1/|N_r(i)|`.
/// Weighted graphs use the edge weight for stage one and, for deeper
/// stages, the reciprocal of the weighted length of the lexicographically
/// smallest hop-shortest path; the raw values are then normalised to sum to
/// one over each `N_r(i)`.
pub fn weight_matrix(net: &Network, stages: &StageAdjacency) -> WeightMatrix {
    let d = net.d();
    let dist = net.is_weighted().then(|| shortest_distances(net));
    let mut w = DMatrix::zeros(d, d);
    for r in 1..=stages.r_max() {
        for i in 0..d {
            let hood = stages.neighbourhood(i, r);
            if hood.is_empty() {
                continue;
            }
            let raw: Vec<f64> = match &dist {
                None => vec![1.0; hood.len()],
                Some(dist) => hood
                    .iter()
                    .map(|&j| {
                        if r == 1 {
                            net.edge_weight(i, j).expect("stage-one pairs are edges")
                        } else {
                            1.0 / multi_hop_length(net, dist, i, j)
                        }
                    })
                    .collect(),
            };
            let total: f64 = raw.iter().sum();
            for (&j, value) in hood.iter().zip(raw) {
                w[(i, j)] = value / total;
            }
        }
    }
    WeightMatrix(w)
}

/// `λ = sqrt(max_j Σ_i W_ij²)`.
pub fn autocovariance_bound(w: &WeightMatrix) -> f64 {
    let m = w.as_matrix();
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// Precomputed graph view shared by estimation and diagnostics.
#[derive(Debug, Clone)]
pub struct NetworkStructure {
    network: Network,
    distances: DistanceMatrix,
    stages: StageAdjacency,
    weights: WeightMatrix,
    lambda: f64,
    stage_weights: Vec<DMatrix<f64>>,
}

impl NetworkStructure {
    pub fn new(network: &Network) -> Self {
        Self::with_r_max(network, None).expect("default r_max is valid")
    }

    pub fn with_r_max(network: &Network, r_max: Option<usize>) -> Result<Self> {
        let distances = shortest_distances(network);
        let stages = stage_adjacency(&distances, r_max)?;
        let weights = weight_matrix(network, &stages);
        let lambda = autocovariance_bound(&weights);
        let stage_weights = (1..=stages.r_max())
            .map(|r| weights.as_matrix().component_mul(stages.stage(r)))
            .collect();
        Ok(Self {
            network: network.clone(),
            distances,
            stages,
            weights,
            lambda,
            stage_weights,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn d(&self) -> usize {
        self.network.d()
    }

    pub fn r_max(&self) -> usize {
        self.stages.r_max()
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn stages(&self) -> &StageAdjacency {
        &self.stages
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `W ⊙ S_r`.
    pub fn stage_weights(&self, r: usize) -> &DMatrix<f64> {
        assert!(r >= 1 && r <= self.r_max(), "stage {r} outside 1..={}", self.r_max());
        &self.stage_weights[r - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::assert_close;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("n{i}")).collect()
    }

    #[test]
    fn path_distances() {
        let dist = shortest_distances(&Network::path(3));
        assert_eq!(dist.get(0, 2), Some(2));
        assert_eq!(dist.get(2, 0), Some(2));
        assert_eq!(dist.get(1, 1), Some(0));
    }

    #[test]
    fn single_node_and_isolated_pairs() {
        let dist = shortest_distances(&Network::isolated(1));
        assert_eq!(dist.get(0, 0), Some(0));
        let dist = shortest_distances(&Network::isolated(2));
        assert_eq!(dist.get(0, 1), None);
        assert_eq!(dist.max_finite(), 0);
        let stages = stage_adjacency(&dist, None).unwrap();
        assert_eq!(stages.r_max(), 1);
        assert_eq!(stages.stage(1).sum(), 0.0);
    }

    #[test]
    fn path_second_stage() {
        let stages = stage_adjacency(&shortest_distances(&Network::path(3)), None).unwrap();
        assert_eq!(stages.r_max(), 2);
        let s2 = stages.stage(2);
        assert_eq!(s2.sum(), 2.0);
        assert_eq!(s2[(0, 2)], 1.0);
        assert_eq!(s2[(2, 0)], 1.0);
    }

    #[test]
    fn star_second_stage_is_all_leaf_pairs() {
        let stages = stage_adjacency(&shortest_distances(&Network::star(3)), None).unwrap();
        let s2 = stages.stage(2);
        for i in 1..4 {
            for j in 1..4 {
                assert_eq!(s2[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
            assert_eq!(s2[(0, i)], 0.0);
        }
    }

    #[test]
    fn five_cycle_second_stage_has_ten_entries() {
        let stages = stage_adjacency(&shortest_distances(&Network::cycle(5)), None).unwrap();
        assert_eq!(stages.r_max(), 2);
        assert_eq!(stages.stage(2).sum(), 10.0);
        assert_eq!(stages.stage(1).sum(), 10.0);
    }

    #[test]
    fn zero_r_max_is_rejected() {
        let dist = shortest_distances(&Network::path(3));
        assert!(matches!(stage_adjacency(&dist, Some(0)), Err(GnarError::InvalidArgument(_))));
        // Explicit values beyond the diameter just add empty stages.
        let stages = stage_adjacency(&dist, Some(4)).unwrap();
        assert_eq!(stages.stage(4).sum(), 0.0);
    }

    #[test]
    fn star_weights() {
        let net = Network::star(3);
        let stages = stage_adjacency(&shortest_distances(&net), None).unwrap();
        let w = weight_matrix(&net, &stages);
        for leaf in 1..4 {
            assert_close(w.get(0, leaf), 1.0 / 3.0, 1e-15);
            assert_close(w.get(leaf, 0), 1.0, 1e-15);
            for other in 1..4 {
                if other != leaf {
                    assert_close(w.get(leaf, other), 0.5, 1e-15);
                }
            }
        }
    }

    #[test]
    fn weighted_stage_one_normalisation() {
        let net = Network::weighted(labels(3), [(0, 1, 2.0), (0, 2, 3.0)]).unwrap();
        let stages = stage_adjacency(&shortest_distances(&net), None).unwrap();
        let w = weight_matrix(&net, &stages);
        assert_close(w.get(0, 1), 0.4, 1e-15);
        assert_close(w.get(0, 2), 0.6, 1e-15);
        // Leaves see each other only at stage two, alone in that neighbourhood.
        assert_close(w.get(1, 2), 1.0, 1e-15);
    }

    #[test]
    fn weighted_multi_hop_uses_inverse_path_length() {
        // 0 -(1)- 1 -(1)- 3 and 0 -(5)- 2 -(1)- 3; node 4 hangs off 0 at weight 2.
        // From 4: node 1 at hop 2 via 0 (length 3), node 2 at hop 2 via 0 (length 7).
        let net = Network::weighted(
            labels(5),
            [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 5.0), (2, 3, 1.0), (0, 4, 2.0)],
        )
        .unwrap();
        let stages = stage_adjacency(&shortest_distances(&net), None).unwrap();
        let w = weight_matrix(&net, &stages);
        let (a, b) = (1.0 / 3.0, 1.0 / 7.0);
        assert_close(w.get(4, 1), a / (a + b), 1e-15);
        assert_close(w.get(4, 2), b / (a + b), 1e-15);
        // 0 reaches 3 in two hops via 1 (lexicographically first): length 2.
        assert_eq!(stages.neighbourhood(0, 2), vec![3]);
        assert_close(w.get(0, 3), 1.0, 1e-15);
        // Node 4 reaches 3 in three hops; ties 4-0-1-3 (len 4) and 4-0-2-3 (len 8)
        // resolve to the former, but it is alone in N_3(4).
        assert_close(w.get(4, 3), 1.0, 1e-15);
    }

    #[test]
    fn lexicographic_tie_break() {
        // Two hop-shortest paths 0-1-3 (weights 1,1) and 0-2-3 (weights 10,10);
        // the multi-hop raw weight of (0,3) is 1/2 from the first path.
        let net = Network::weighted(
            labels(5),
            [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 10.0), (2, 3, 10.0), (1, 4, 4.0)],
        )
        .unwrap();
        let dist = shortest_distances(&net);
        assert_close(multi_hop_length(&net, &dist, 0, 3), 2.0, 0.0);
        assert_close(multi_hop_length(&net, &dist, 3, 0), 2.0, 0.0);
        assert_close(multi_hop_length(&net, &dist, 0, 4), 5.0, 0.0);
        let stages = stage_adjacency(&dist, None).unwrap();
        let w = weight_matrix(&net, &stages);
        // N_2(0) = {3, 4} with raw weights 1/2 and 1/5.
        assert_close(w.get(0, 3), 0.5 / 0.7, 1e-15);
        assert_close(w.get(0, 4), 0.2 / 0.7, 1e-15);
    }

    #[test]
    fn autocovariance_bound_examples() {
        let lambda = |net: &Network, r_max| {
            let stages = stage_adjacency(&shortest_distances(net), r_max).unwrap();
            autocovariance_bound(&weight_matrix(net, &stages))
        };
        assert_eq!(lambda(&Network::isolated(1), None), 0.0);
        assert_close(lambda(&Network::path(2), None), 1.0, 1e-15);
        assert_close(lambda(&Network::star(3), Some(1)), 3f64.sqrt(), 1e-15);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(Network::new(labels(2), [(0, 0)]).is_err());
        assert!(Network::new(labels(2), [(0, 1), (1, 0)]).is_err());
        assert!(Network::new(labels(2), [(0, 2)]).is_err());
        assert!(Network::new(vec!["a".into(), "a".into()], []).is_err());
        assert!(Network::weighted(labels(2), [(0, 1, 0.0)]).is_err());
        assert!(Network::weighted(labels(2), [(0, 1, f64::NAN)]).is_err());
    }

    #[test]
    fn disconnected_components_get_no_weight() {
        let net = Network::new(labels(4), [(0, 1), (2, 3)]).unwrap();
        let structure = NetworkStructure::new(&net);
        assert_eq!(structure.r_max(), 1);
        assert_eq!(structure.weights().get(0, 2), 0.0);
        assert_eq!(structure.weights().get(0, 1), 1.0);
    }
}
