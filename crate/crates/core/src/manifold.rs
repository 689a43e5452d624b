//! Laplacian-regularized least squares over a kNN graph built on one
//! designated descriptor group.

use std::io::Write;

use crate::data::DescriptorView;
use crate::error::{Error, Result};
use crate::kernels::{chi2_unchecked, GramMatrix, KernelKind};
use crate::linear::check_classes;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    /// Sample ids of the graph nodes, in node order.
    pub node_ids: Vec<usize>,
    /// Symmetric, zero-diagonal edge weights.
    pub weights: Matrix,
    pub k_nn: usize,
    /// Directed nearest-neighbour lists (node indices) before symmetrization.
    pub neighbors: Vec<Vec<usize>>,
    pub bandwidth: f64,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    /// Edge list `i,j,weight` over sample ids, one row per undirected edge.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["i", "j", "weight"])?;
        for a in 0..self.len() {
            for b in (a + 1)..self.len() {
                let v = self.weights.get(a, b);
                if v > 0.0 {
                    w.write_record([
                        self.node_ids[a].to_string(),
                        self.node_ids[b].to_string(),
                        format!("{v}"),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Connects every node to its `k_nn` nearest neighbours under the χ²
/// distance of group `reg_group` (ties to the lower index), weights edges by
/// `exp(−d/σ)` with `σ` the mean kNN edge distance, then symmetrizes with
/// `W ← max(W, Wᵀ)`.
pub fn build_knn_graph(data: &DescriptorView<'_>, reg_group: usize, k_nn: usize) -> Result<NeighborGraph> {
    let n = data.len();
    if reg_group >= data.group_count() {
        return Err(Error::Parameter(format!(
            "regularization group {reg_group} does not exist ({} groups)",
            data.group_count()
        )));
    }
    if k_nn == 0 || k_nn >= n {
        return Err(Error::Parameter(format!(
            "k_nn must lie in [1, {n}) for {n} nodes, got {k_nn}"
        )));
    }
    let rows: Vec<&[f64]> = (0..n).map(|i| data.group_row(i, reg_group)).collect();
    let mut dist = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = chi2_unchecked(rows[i], rows[j]);
            dist.set(i, j, d);
            dist.set(j, i, d);
        }
    }

    let mut neighbors = Vec::with_capacity(n);
    let mut edge_total = 0.0;
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist.get(i, a).total_cmp(&dist.get(i, b)).then(a.cmp(&b)));
        others.truncate(k_nn);
        edge_total += others.iter().map(|&j| dist.get(i, j)).sum::<f64>();
        neighbors.push(others);
    }
    let mean = edge_total / (n * k_nn) as f64;
    let bandwidth = if mean > 0.0 { mean } else { 1.0 };

    let mut weights = Matrix::zeros(n, n);
    for (i, list) in neighbors.iter().enumerate() {
        for &j in list {
            let w = (-dist.get(i, j) / bandwidth).exp();
            if w > weights.get(i, j) {
                weights.set(i, j, w);
                weights.set(j, i, w);
            }
        }
    }
    Ok(NeighborGraph {
        node_ids: data.ids().to_vec(),
        weights,
        k_nn,
        neighbors,
        bandwidth,
    })
}

/// `L = D − W`.
pub fn graph_laplacian(graph: &NeighborGraph) -> Matrix {
    let n = graph.len();
    let mut lap = Matrix::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            let w = graph.weights.get(i, j);
            degree += w;
            if i != j {
                lap.set(i, j, -w);
            }
        }
        lap.set(i, i, degree);
    }
    lap
}

/// `I − D^{-1/2} W D^{-1/2}`; isolated nodes get a zero row.
pub fn normalized_laplacian(graph: &NeighborGraph) -> Matrix {
    let n = graph.len();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = graph.weights.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut lap = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = -inv_sqrt[i] * graph.weights.get(i, j) * inv_sqrt[j];
            lap.set(i, j, if i == j && inv_sqrt[i] > 0.0 { 1.0 + v } else { v });
        }
    }
    lap
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldParams {
    /// Ambient (RKHS norm) regularization.
    pub gamma_a: f64,
    /// Intrinsic (graph) regularization.
    pub gamma_i: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldModel {
    /// Per class, one coefficient per labeled-then-unlabeled training node.
    pub coefficients: Vec<Vec<f64>>,
    /// Per class; the closed form has no offset so these stay zero.
    pub bias: Vec<f64>,
    pub params: ManifoldParams,
    pub n_labeled: usize,
    pub kernel: KernelKind,
    pub bandwidth: f64,
}

impl ManifoldModel {
    /// Class scores for each row of a (query × training-node) Gram block.
    pub fn scores(&self, k: &GramMatrix) -> Result<Vec<Vec<f64>>> {
        let n = self.coefficients.first().map_or(0, Vec::len);
        if k.cols() != n {
            return Err(Error::Dimension(format!(
                "kernel block has {} columns for {n} training nodes",
                k.cols()
            )));
        }
        Ok(self
            .coefficients
            .iter()
            .zip(&self.bias)
            .map(|(a, b)| {
                (0..k.rows())
                    .map(|i| k.values.row(i).iter().zip(a).map(|(x, y)| x * y).sum::<f64>() + b)
                    .collect()
            })
            .collect())
    }
}

/// Squared-loss manifold-regularized classifier in closed form:
/// `a = (J K + γ_A l I + γ_I l/(l+u)² L K)⁻¹ J y±` per one-vs-rest class,
/// with `J` selecting the first `l = labels.len()` nodes.
pub fn train_manifold(
    k: &GramMatrix,
    laplacian: &Matrix,
    labels: &[usize],
    class_count: usize,
    params: ManifoldParams,
) -> Result<ManifoldModel> {
    let n = k.rows();
    let l = labels.len();
    if k.cols() != n || laplacian.rows() != n || laplacian.cols() != n {
        return Err(Error::Dimension(format!(
            "Gram {}x{} and Laplacian {}x{} must be square and equal",
            k.rows(),
            k.cols(),
            laplacian.rows(),
            laplacian.cols()
        )));
    }
    if l == 0 || l > n {
        return Err(Error::Dimension(format!("{l} labels for {n} training nodes")));
    }
    if !(params.gamma_a > 0.0) || !(params.gamma_i >= 0.0) {
        return Err(Error::Parameter(format!(
            "need gamma_a > 0 and gamma_i >= 0, got {:?}",
            params
        )));
    }
    check_classes(labels, class_count)?;

    let kn = k.values.to_nalgebra();
    let mut system = kn.clone();
    for i in l..n {
        system.row_mut(i).fill(0.0);
    }
    let scale = params.gamma_i * l as f64 / (n * n) as f64;
    if scale != 0.0 {
        system += (laplacian.to_nalgebra() * &kn) * scale;
    }
    for i in 0..n {
        system[(i, i)] += params.gamma_a * l as f64;
    }

    let mut rhs = nalgebra::DMatrix::<f64>::zeros(n, class_count);
    for (i, &y) in labels.iter().enumerate() {
        for c in 0..class_count {
            rhs[(i, c)] = if y == c { 1.0 } else { -1.0 };
        }
    }

    let lu = system.lu();
    let condition = {
        let u = lu.u();
        let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };
    let solution = lu.solve(&rhs).filter(|s| s.iter().all(|v| v.is_finite()));
    let Some(solution) = solution.filter(|_| condition < 1e15) else {
        return Err(Error::Numerical {
            context: "manifold-regularized system".into(),
            condition,
        });
    };
    let coefficients = (0..class_count)
        .map(|c| solution.column(c).iter().copied().collect())
        .collect();
    Ok(ManifoldModel {
        coefficients,
        bias: vec![0.0; class_count],
        params,
        n_labeled: l,
        kernel: k.kernel,
        bandwidth: k.bandwidth,
    })
}
