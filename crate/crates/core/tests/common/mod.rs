//! Independent reference solvers used by the integration tests. Nothing here
//! calls into the solvers under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssl_lab::data::DescriptorSet;
use ssl_lab::kernels::{build_gram, GramMatrix, KernelKind};
use ssl_lab::Matrix;

/// Gaussian elimination with partial pivoting. `None` when a pivot is below
/// `1e-12` times the largest entry.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Primal `½(‖w‖² + b²) + C Σ max(0, 1 − y_i(w·x_i + b))²`.
pub fn squared_hinge_objective(x: &[Vec<f64>], y: &[f64], c: f64, w: &[f64], b: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let f: f64 = xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            (1.0 - yi * f).max(0.0).powi(2)
        })
        .sum();
    reg + c * loss
}

/// Exact minimizer of the squared-hinge primal by enumerating which points
/// have an active loss. For a fixed active set the objective is a strictly
/// convex quadratic; the optimum is the unique consistent candidate.
/// Returns `(w, b, objective)`.
pub fn brute_force_squared_hinge(x: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64, f64) {
    let n = x.len();
    assert!(n <= 14, "enumeration is exponential");
    let d = x[0].len() + 1;
    let aug: Vec<Vec<f64>> = x.iter().map(|r| r.iter().copied().chain([1.0]).collect()).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1 << n) {
        // (I + 2C Σ_S z zᵀ) θ = 2C Σ_S y z
        let mut a = vec![vec![0.0; d]; d];
        let mut rhs = vec![0.0; d];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for i in (0..n).filter(|i| mask & (1 << i) != 0) {
            for p in 0..d {
                rhs[p] += 2.0 * c * y[i] * aug[i][p];
                for q in 0..d {
                    a[p][q] += 2.0 * c * aug[i][p] * aug[i][q];
                }
            }
        }
        let theta = solve(a, rhs).expect("identity-dominated system");
        let consistent = (0..n).all(|i| {
            let margin = y[i] * aug[i].iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>();
            let active = mask & (1 << i) != 0;
            if active {
                margin <= 1.0 + 1e-12
            } else {
                margin >= 1.0 - 1e-12
            }
        });
        if consistent {
            let obj = squared_hinge_objective(x, y, c, &theta[..d - 1], theta[d - 1]);
            if best.as_ref().is_none_or(|(_, o)| obj < *o) {
                best = Some((theta, obj));
            }
        }
    }
    let (mut theta, obj) = best.expect("some active set is consistent");
    let b = theta.pop().unwrap();
    (theta, b, obj)
}

/// Dual objective `Σα − ½ Σ α_i α_j y_i y_j K_ij`.
pub fn svm_dual_value(k: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Maximum of the C-SVM dual over `0 ≤ α ≤ C`, `yᵀα = 0`, by enumerating
/// every assignment of each `α_i` to {0, C, free}. For each assignment the
/// free block solves the equality-constrained stationarity system; box
/// feasible candidates are scored and the best is returned with its `α`.
pub fn brute_force_svm_dual(k: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    assert!(n <= 10, "enumeration is exponential");
    let mut best: Option<(Vec<f64>, f64)> = None;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let fixed_sum: f64 = (0..n).filter(|&i| state[i] == 1).map(|i| y[i] * c).sum();
        if free.is_empty() {
            if fixed_sum.abs() > 1e-12 {
                continue;
            }
        } else {
            // [Q_FF  y_F] [α_F]   [1 − Q_FB α_B]
            // [y_Fᵀ   0 ] [ ν ] = [  −y_Bᵀ α_B ]
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (p, &i) in free.iter().enumerate() {
                for (q, &j) in free.iter().enumerate() {
                    a[p][q] = y[i] * y[j] * k[i][j];
                }
                a[p][m] = y[i];
                a[m][p] = y[i];
                rhs[p] = 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| y[i] * y[j] * k[i][j] * c).sum::<f64>();
            }
            rhs[m] = -fixed_sum;
            let Some(sol) = solve(a, rhs) else { continue };
            if sol[..m].iter().any(|&v| v < -1e-10 || v > c + 1e-10) {
                continue;
            }
            for (p, &i) in free.iter().enumerate() {
                alpha[i] = sol[p].clamp(0.0, c);
            }
        }
        let value = svm_dual_value(k, y, &alpha);
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((alpha, value));
        }
    }
    best.expect("α = 0 is always feasible")
}

/// Kernel ridge regression on the labeled block:
/// `α = (K_ll + γ l I)⁻¹ y`, predictions `K_ql α`.
pub fn kernel_ridge_predict(k_ll: &[Vec<f64>], y: &[f64], gamma: f64, k_ql: &[Vec<f64>]) -> Vec<f64> {
    let l = y.len();
    let mut a = k_ll.to_vec();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += gamma * l as f64;
    }
    let alpha = solve(a, y.to_vec()).expect("ridge system is positive definite");
    k_ql.iter().map(|row| row.iter().zip(&alpha).map(|(k, a)| k * a).sum()).collect()
}

/// Average precision from its definition: rank by repeated selection of the
/// highest remaining score (lowest index on ties), then average
/// precision@k over relevant ranks, counting hits in the top `k` afresh.
pub fn ap_by_enumeration(scores: &[f64], relevance: &[bool]) -> f64 {
    let n = scores.len();
    let mut used = vec![false; n];
    let mut ranking = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if used[i] {
                continue;
            }
            pick = match pick {
                None => Some(i),
                Some(p) if scores[i] > scores[p] => Some(i),
                keep => keep,
            };
        }
        let p = pick.unwrap();
        used[p] = true;
        ranking.push(p);
    }
    let relevant = relevance.iter().filter(|&&r| r).count();
    let mut total = 0.0;
    for k in 1..=n {
        if relevance[ranking[k - 1]] {
            let hits = ranking[..k].iter().filter(|&&i| relevance[i]).count();
            total += hits as f64 / k as f64;
        }
    }
    total / relevant as f64
}

pub fn rows(m: &GramMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect()
}

/// Small linear-solver fixtures: `(x, y, C)` with 3 to 10 points.
pub fn linear_fixtures() -> Vec<(Vec<Vec<f64>>, Vec<f64>, f64)> {
    let mut out = vec![
        (vec![vec![-1.0], vec![1.0]], vec![-1.0, 1.0], 10.0),
        (
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0, -1.0, -1.0],
            1.0,
        ),
        (
            vec![vec![0.2, 0.1], vec![0.2, 0.1], vec![0.9, 0.8], vec![0.5, 0.5], vec![0.1, 0.7]],
            vec![-1.0, -1.0, 1.0, 1.0, -1.0],
            3.0,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 3..=10 {
        for &c in &[0.1, 1.0, 5.0] {
            let d = rng.gen_range(1..4);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let mut y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            out.push((x, y, c));
        }
    }
    out
}

/// Random histogram dataset with `n` samples in two groups.
pub fn histogram_set(n: usize, classes: usize, seed: u64) -> DescriptorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut group = |d: usize| {
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut m = Matrix::from_vec(n, d, data).unwrap();
        for i in 0..n {
            let row = m.row_mut(i);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        m
    };
    let groups = vec![group(3), group(5)];
    let labels = (0..n).map(|i| i % classes).collect();
    DescriptorSet::new(groups, labels, classes).unwrap()
}

/// Kernel-SVM fixtures: χ² Gram matrices of 3 to 10 random histograms.
pub fn kernel_fixtures() -> Vec<(GramMatrix, Vec<f64>, f64)> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 3..=10 {
        for &c in &[0.5, 5.0] {
            let ds = histogram_set(n, 2, rng.gen());
            let v = ds.all();
            let k = build_gram(&v, &v, KernelKind::Chi2Exp, rng.gen_range(0.2..1.0)).unwrap();
            let y = ds.labels().iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
            out.push((k, y, c));
        }
    }
    out
}

/// Per fixture, `|objective(dual CD) − exact minimum|`.
pub fn linear_objective_gaps() -> Vec<f64> {
    use ssl_lab::linear::{train_binary, Loss};
    linear_fixtures()
        .into_iter()
        .enumerate()
        .map(|(idx, (x, y, c))| {
            let m = train_binary(&Matrix::from_rows(&x).unwrap(), &y, Loss::HingeSquared, c, idx as u64).unwrap();
            let (_, _, best) = brute_force_squared_hinge(&x, &y, c);
            (squared_hinge_objective(&x, &y, c, &m.weights, m.bias) - best).abs()
        })
        .collect()
}

/// Per fixture, `|dual(SMO) − exact maximum|`.
pub fn smo_objective_gaps() -> Vec<f64> {
    use ssl_lab::kernel_svm::{train_kernel_binary, DEFAULT_TOLERANCE};
    kernel_fixtures()
        .into_iter()
        .map(|(k, y, c)| {
            let model = train_kernel_binary(&k, &y, c, DEFAULT_TOLERANCE).unwrap();
            let kr = rows(&k);
            let alpha: Vec<f64> = model.support_coefficients.iter().zip(&y).map(|(a, y)| a * y).collect();
            (svm_dual_value(&kr, &y, &alpha) - brute_force_svm_dual(&kr, &y, c).1).abs()
        })
        .collect()
}

/// Largest deviation between the graph-free manifold solve and kernel ridge
/// on the labeled block, over three values of `γ_A`.
pub fn manifold_ridge_deviation() -> f64 {
    use ssl_lab::manifold::{build_knn_graph, graph_laplacian, train_manifold, ManifoldParams};
    let ds = histogram_set(14, 2, 3);
    let labeled = [0usize, 1, 2, 3, 4, 5];
    let nodes: Vec<usize> = (0..10).collect();
    let query = [10usize, 11, 12, 13];
    let view = ds.select(&nodes).unwrap();
    let q = ds.select(&query).unwrap();
    let lab = ds.select(&labeled).unwrap();
    let bw = 0.4;
    let k = build_gram(&view, &view, KernelKind::Chi2Exp, bw).unwrap();
    let kq = build_gram(&q, &view, KernelKind::Chi2Exp, bw).unwrap();
    let lap = graph_laplacian(&build_knn_graph(&view, 0, 3).unwrap());
    let labels: Vec<usize> = labeled.iter().map(|&i| ds.labels()[i]).collect();
    let k_ll = rows(&build_gram(&lab, &lab, KernelKind::Chi2Exp, bw).unwrap());
    let k_ql = rows(&build_gram(&q, &lab, KernelKind::Chi2Exp, bw).unwrap());
    let mut worst = 0.0f64;
    for gamma_a in [1e-3, 0.1, 2.0] {
        let model = train_manifold(&k, &lap, &labels, 2, ManifoldParams { gamma_a, gamma_i: 0.0 }).unwrap();
        for (class, got) in model.scores(&kq).unwrap().iter().enumerate() {
            let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            for (a, b) in got.iter().zip(kernel_ridge_predict(&k_ll, &y, gamma_a, &k_ql)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}
