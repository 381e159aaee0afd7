#![allow(dead_code)]

use gnar::graph::Network;
use gnar::model::GnarCoefficients;
use proptest::prelude::*;

/// Undirected graph on `1..=max_d` nodes with each pair present independently.
pub fn network(max_d: usize) -> impl Strategy<Value = Network> {
    (1..=max_d).prop_flat_map(|d| {
        let pairs = d * (d - 1) / 2;
        proptest::collection::vec(any::<bool>(), pairs).prop_map(move |mask| {
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..d {
                for j in i + 1..d {
                    if mask[k] {
                        edges.push((i, j));
                    }
                    k += 1;
                }
            }
            let labels = (1..=d).map(|i| format!("v{i}")).collect();
            Network::new(labels, edges).unwrap()
        })
    })
}

pub fn weighted_network(max_d: usize) -> impl Strategy<Value = Network> {
    network(max_d).prop_flat_map(|net| {
        let m = net.edge_count();
        proptest::collection::vec(0.1f64..5.0, m).prop_map(move |w| {
            let edges: Vec<_> = net.edges().zip(w).map(|((i, j), w)| (i, j, w)).collect();
            Network::weighted(net.labels().to_vec(), edges).unwrap()
        })
    })
}

/// Global-α coefficients whose absolute values sum to `budget`.
pub fn scaled_coefficients(raw: &[f64], p: usize, s: &[usize], budget: f64) -> GnarCoefficients {
    let total: f64 = raw.iter().map(|x| x.abs()).sum::<f64>().max(1e-12);
    let scale = budget / total;
    let mut it = raw.iter().map(|x| x * scale);
    let alpha: Vec<f64> = (0..p).map(|_| it.next().unwrap()).collect();
    let beta: Vec<Vec<f64>> = s.iter().map(|&sk| (0..sk).map(|_| it.next().unwrap()).collect()).collect();
    GnarCoefficients::global(alpha, beta, 1.0).unwrap()
}

/// All-pairs hop distances by Floyd–Warshall, `None` when unreachable.
pub fn floyd_warshall(net: &Network) -> Vec<Vec<Option<usize>>> {
    let d = net.d();
    let mut dist = vec![vec![None; d]; d];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for (i, j) in net.edges() {
        dist[i][j] = Some(1);
        dist[j][i] = Some(1);
    }
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                if let (Some(a), Some(b)) = (dist[i][k], dist[k][j]) {
                    if dist[i][j].is_none_or(|c| a + b < c) {
                        dist[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    dist
}

/// Random graph on `min_d..=max_d` nodes that always contains the path `1 - 2 - ... - d`.
pub fn connected_network(min_d: usize, max_d: usize) -> impl Strategy<Value = Network> {
    (min_d..=max_d).prop_flat_map(|d| {
        proptest::collection::vec(0.0f64..1.0, d * d).prop_map(move |u| {
            let mut edges = Vec::new();
            for i in 0..d {
                for j in i + 1..d {
                    if j == i + 1 || u[i * d + j] < 0.25 {
                        edges.push((i, j));
                    }
                }
            }
            let labels = (1..=d).map(|i| format!("v{i}")).collect();
            Network::new(labels, edges).unwrap()
        })
    })
}

/// Runs `X_t = Σ_k Φ_k X_{t-k} + e_t` directly on the VAR matrices, with
/// the first `p` rows of `init` as the starting state.
pub fn var_recursion(phis: &[nalgebra::DMatrix<f64>], init: &nalgebra::DMatrix<f64>, noise: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let p = phis.len();
    let d = init.ncols();
    let t_len = p + noise.nrows();
    let mut x = nalgebra::DMatrix::zeros(t_len, d);
    x.rows_mut(0, p).copy_from(&init.rows(0, p));
    for t in p..t_len {
        let mut next = noise.row(t - p).transpose();
        for (k, phi) in phis.iter().enumerate() {
            next += phi * x.row(t - k - 1).transpose();
        }
        x.set_row(t, &next.transpose());
    }
    x
}
