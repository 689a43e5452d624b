//! Regularized linear binary classifiers with raw and sigmoid outputs, plus
//! a one-vs-rest wrapper.
//!
//! The bias is folded into the weight vector as a constant unit feature, so
//! every trainer minimizes `½(‖w‖² + b²) + C Σ loss(y_i, w·x_i + b)`.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::seed;

pub const MAX_EPOCHS: usize = 1000;
pub const STOP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `max(0, 1 − y f)²`, solved by dual coordinate descent.
    HingeSquared,
    /// `log(1 + exp(−y f))`, solved by Newton iterations.
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub loss: Loss,
    pub regularization_c: f64,
}

impl LinearModel {
    pub fn zero(dim: usize, loss: Loss, regularization_c: f64) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            loss,
            regularization_c,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// The model with `w` and `b` negated.
    pub fn negated(&self) -> Self {
        LinearModel {
            weights: self.weights.iter().map(|w| -w).collect(),
            bias: -self.bias,
            ..self.clone()
        }
    }

    /// Primal objective `½(‖w‖² + b²) + C Σ loss`.
    pub fn objective(&self, x: &Matrix, y: &[f64]) -> f64 {
        let reg = 0.5 * (dot(&self.weights, &self.weights) + self.bias * self.bias);
        let c = self.regularization_c;
        let data: f64 = (0..x.rows())
            .map(|i| {
                let margin = y[i] * (dot(&self.weights, x.row(i)) + self.bias);
                match self.loss {
                    Loss::HingeSquared => (1.0 - margin).max(0.0).powi(2),
                    Loss::Logistic => softplus(-margin),
                }
            })
            .sum();
        reg + c * data
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["dim", "weight"])?;
        for (d, v) in self.weights.iter().enumerate() {
            w.write_record([d.to_string(), format!("{v}")])?;
        }
        w.write_record(["bias".to_string(), format!("{}", self.bias)])?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R, loss: Loss, regularization_c: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut weights = Vec::new();
        let mut bias = None;
        for rec in r.records() {
            let rec = rec?;
            let value: f64 = rec[1]
                .parse()
                .map_err(|_| Error::Input(format!("bad weight `{}`", &rec[1])))?;
            if &rec[0] == "bias" {
                bias = Some(value);
            } else {
                weights.push(value);
            }
        }
        Ok(LinearModel {
            weights,
            bias: bias.ok_or_else(|| Error::Input("model file has no bias row".into()))?,
            loss,
            regularization_c,
        })
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn validate(x: &Matrix, y: &[f64], c: f64) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("C must be positive, got {c}")));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("features must be finite".into()));
    }
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Input(format!("binary labels must be ±1, got {v}")));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels(
            "binary training needs at least one example of each sign".into(),
        ));
    }
    Ok(())
}

/// Trains a binary model on labels in `{−1, +1}`. `seed` fixes the
/// coordinate visiting order of the dual solver.
pub fn train_binary(x: &Matrix, y: &[f64], loss: Loss, c: f64, seed: u64) -> Result<LinearModel> {
    train_binary_to(x, y, loss, c, seed, STOP_TOLERANCE)
}

/// [`train_binary`] with an explicit stopping tolerance on the projected
/// gradient (dual solver) or gradient (Newton solver).
pub(crate) fn train_binary_to(x: &Matrix, y: &[f64], loss: Loss, c: f64, seed: u64, tol: f64) -> Result<LinearModel> {
    validate(x, y, c)?;
    Ok(match loss {
        Loss::HingeSquared => dual_cd_squared_hinge(x, y, c, seed, tol),
        Loss::Logistic => newton_logistic(x, y, c, tol)?,
    })
}

fn dual_cd_squared_hinge(x: &Matrix, y: &[f64], c: f64, seed: u64, tol: f64) -> LinearModel {
    let n = x.rows();
    let diag = 0.5 / c;
    let qd: Vec<f64> = (0..n).map(|i| dot(x.row(i), x.row(i)) + 1.0 + diag).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed);

    for _ in 0..MAX_EPOCHS {
        order.shuffle(&mut rng);
        let mut max_violation: f64 = 0.0;
        for &i in &order {
            let xi = x.row(i);
            let g = y[i] * (dot(&w, xi) + b) - 1.0 + diag * alpha[i];
            let pg = if alpha[i] == 0.0 { g.min(0.0) } else { g };
            max_violation = max_violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).max(0.0);
                let d = (alpha[i] - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += d * xj;
                }
                b += d;
            }
        }
        if max_violation < tol {
            break;
        }
    }
    LinearModel {
        weights: w,
        bias: b,
        loss: Loss::HingeSquared,
        regularization_c: c,
    }
}

fn newton_logistic(x: &Matrix, y: &[f64], c: f64, tol: f64) -> Result<LinearModel> {
    let n = x.rows();
    let dim = x.cols() + 1;
    let aug = |i: usize, j: usize| if j + 1 == dim { 1.0 } else { x.get(i, j) };
    let objective = |z: &[f64]| {
        let reg = 0.5 * dot(z, z);
        let loss: f64 = (0..n)
            .map(|i| softplus(-y[i] * (dot(&z[..dim - 1], x.row(i)) + z[dim - 1])))
            .sum();
        reg + c * loss
    };

    let mut z = vec![0.0; dim];
    let mut f = objective(&z);
    for _ in 0..MAX_EPOCHS {
        let mut grad = nalgebra::DVector::from_column_slice(&z);
        let mut hess = nalgebra::DMatrix::<f64>::identity(dim, dim);
        for i in 0..n {
            let m = y[i] * (dot(&z[..dim - 1], x.row(i)) + z[dim - 1]);
            let s = sigmoid(m);
            let gi = c * (s - 1.0) * y[i];
            let hi = c * s * (1.0 - s);
            for a in 0..dim {
                let xa = aug(i, a);
                grad[a] += gi * xa;
                if hi > 0.0 {
                    for b in 0..=a {
                        hess[(a, b)] += hi * xa * aug(i, b);
                    }
                }
            }
        }
        if grad.amax() < tol {
            break;
        }
        for a in 0..dim {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        let chol = nalgebra::Cholesky::new(hess).ok_or_else(|| Error::Numerical {
            context: "logistic Newton Hessian is not positive definite".into(),
            condition: f64::INFINITY,
        })?;
        let step = chol.solve(&(-&grad));
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = z.iter().zip(step.iter()).map(|(zi, si)| zi + t * si).collect();
            let fc = objective(&cand);
            if fc <= f + 1e-4 * t * slope || t < 1e-12 {
                z = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    let bias = z.pop().unwrap_or(0.0);
    Ok(LinearModel {
        weights: z,
        bias,
        loss: Loss::Logistic,
        regularization_c: c,
    })
}

/// `w·x + b`.
pub fn decision_value(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::Dimension(format!(
            "model expects {} features, got {}",
            model.dim(),
            x.len()
        )));
    }
    Ok(dot(&model.weights, x) + model.bias)
}

/// Sigmoid of the decision value.
pub fn probability_value(model: &LinearModel, x: &[f64]) -> Result<f64> {
    decision_value(model, x).map(sigmoid)
}

/// One binary model per class, class `k` as `+1` against the rest. Every
/// class problem uses the same `seed`, so relabelling classes permutes the
/// returned list and nothing else.
pub fn train_one_vs_rest(
    x: &Matrix,
    labels: &[usize],
    class_count: usize,
    loss: Loss,
    c: f64,
    seed: u64,
) -> Result<Vec<LinearModel>> {
    check_classes(labels, class_count)?;
    (0..class_count)
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            train_binary(x, &y, loss, c, seed)
        })
        .collect()
}

pub(crate) fn check_classes(labels: &[usize], class_count: usize) -> Result<()> {
    if class_count < 2 {
        return Err(Error::DegenerateLabels(format!(
            "one-vs-rest needs at least 2 classes, got {class_count}"
        )));
    }
    let mut seen = vec![false; class_count];
    for &l in labels {
        if l >= class_count {
            return Err(Error::Input(format!("label {l} outside [0, {class_count})")));
        }
        seen[l] = true;
    }
    match seen.iter().position(|s| !s) {
        Some(k) => Err(Error::DegenerateLabels(format!("class {k} has no training examples"))),
        None => Ok(()),
    }
}
