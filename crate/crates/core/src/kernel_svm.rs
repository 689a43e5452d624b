//! C-SVM over precomputed Gram matrices, solved by sequential minimal
//! optimization with maximal-violating-pair selection.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{GramMatrix, KernelKind};
use crate::linear::check_classes;

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 100_000;
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    /// `α_i y_i` per training sample.
    pub support_coefficients: Vec<f64>,
    pub bias: f64,
    pub training_ids: Vec<usize>,
    pub kernel: KernelKind,
    pub bandwidth: f64,
    /// Upper bound `C` on every `α_i`.
    pub c: f64,
    /// Dual objective `Σα − ½αᵀQα` at termination.
    pub dual_objective: f64,
    pub iterations: usize,
}

/// Dual objective `Σ α_i − ½ Σ α_i α_j y_i y_j K_ij`.
pub fn dual_objective(k: &GramMatrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k.get(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn validate(k: &GramMatrix, y: &[f64], c: f64, tol: f64) -> Result<()> {
    let n = y.len();
    if k.rows() != k.cols() {
        return Err(Error::Input(format!(
            "training Gram must be square, got {}x{}",
            k.rows(),
            k.cols()
        )));
    }
    if k.rows() != n {
        return Err(Error::Dimension(format!("Gram of size {} for {n} labels", k.rows())));
    }
    if !k.values.is_symmetric(1e-10) {
        return Err(Error::Input("training Gram is not symmetric".into()));
    }
    if !(c > 0.0 && c.is_finite()) || !(tol > 0.0) {
        return Err(Error::Parameter(format!("need C > 0 and tol > 0, got C={c}, tol={tol}")));
    }
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Input(format!("binary labels must be ±1, got {v}")));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == n {
        return Err(Error::DegenerateLabels("both classes must be present".into()));
    }
    Ok(())
}

/// Solves `max Σα − ½αᵀQα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0`, stopping when the
/// maximal KKT violation drops below `tol` or after [`MAX_ITERATIONS`].
/// Pair selection is deterministic, ties going to the lowest index.
pub fn train_kernel_binary(k: &GramMatrix, y: &[f64], c: f64, tol: f64) -> Result<KernelModel> {
    validate(k, y, c, tol)?;
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);
    #[cfg(debug_assertions)]
    let mut last_objective: f64 = 0.0;

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let curvature = (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j)).max(MIN_CURVATURE);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / curvature;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / curvature;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }

        #[cfg(debug_assertions)]
        {
            // Σα − ½αᵀQα = −½ Σ α_t (G_t − 1)
            let obj: f64 = -0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
            debug_assert!(
                obj >= last_objective - 1e-9 * (1.0 + last_objective.abs()),
                "SMO dual objective decreased: {last_objective} -> {obj}"
            );
            last_objective = obj;
        }
    }

    let bias = -offset(&alpha, &grad, y, c);
    let coefficients: Vec<f64> = alpha.iter().zip(y).map(|(a, yi)| a * yi).collect();
    Ok(KernelModel {
        support_coefficients: coefficients,
        bias,
        training_ids: (0..n).collect(),
        kernel: k.kernel,
        bandwidth: k.bandwidth,
        c,
        dual_objective: dual_objective(k, y, &alpha),
        iterations,
    })
}

/// Decision offset: mean `y_t G_t` over free coefficients, or the midpoint
/// of the feasible interval when none is free.
fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (upper + lower) / 2.0
    }
}

/// `Σ_i coef_i k_row[i] + bias`.
pub fn kernel_decision(model: &KernelModel, k_row: &[f64]) -> Result<f64> {
    if k_row.len() != model.support_coefficients.len() {
        return Err(Error::Dimension(format!(
            "kernel row of length {} for {} training samples",
            k_row.len(),
            model.support_coefficients.len()
        )));
    }
    Ok(model
        .support_coefficients
        .iter()
        .zip(k_row)
        .map(|(a, k)| a * k)
        .sum::<f64>()
        + model.bias)
}

/// Decision values of every row of a test-by-train Gram block.
pub fn kernel_decisions(model: &KernelModel, k: &GramMatrix) -> Result<Vec<f64>> {
    (0..k.rows()).map(|i| kernel_decision(model, k.values.row(i))).collect()
}

/// One binary kernel SVM per class, class `k` as `+1`.
pub fn train_kernel_ovr(
    k: &GramMatrix,
    labels: &[usize],
    class_count: usize,
    c: f64,
    tol: f64,
) -> Result<Vec<KernelModel>> {
    check_classes(labels, class_count)?;
    (0..class_count)
        .into_par_iter()
        .map(|cls| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == cls { 1.0 } else { -1.0 }).collect();
            train_kernel_binary(k, &y, c, tol)
        })
        .collect()
}
