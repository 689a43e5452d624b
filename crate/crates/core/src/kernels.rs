//! χ² distances, the exponentiated χ² kernel, the linear kernel and Gram
//! matrix construction.

use std::io::Write;

use rayon::prelude::*;

use crate::data::DescriptorView;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// Dot product of the concatenated descriptor groups.
    Linear,
    /// `exp(-d / bandwidth)` with `d` the group-averaged χ² distance.
    Chi2Exp,
}

/// Pairwise kernel values between two sample sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: Matrix,
    pub kernel: KernelKind,
    /// Only meaningful for [`KernelKind::Chi2Exp`].
    pub bandwidth: f64,
}

impl GramMatrix {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// Debug dump as `i,j,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["i", "j", "value"])?;
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                w.write_record([i.to_string(), j.to_string(), format!("{}", self.get(i, j))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `½ Σ (h_j − g_j)² / (h_j + g_j)`, with `0/0` terms dropped.
pub fn chi2_distance(h: &[f64], g: &[f64]) -> Result<f64> {
    if h.len() != g.len() {
        return Err(Error::Dimension(format!(
            "histograms of length {} and {}",
            h.len(),
            g.len()
        )));
    }
    if let Some(v) = h.iter().chain(g).find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("histogram entry {v} is negative")));
    }
    Ok(chi2_unchecked(h, g))
}

#[inline]
pub(crate) fn chi2_unchecked(h: &[f64], g: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in h.iter().zip(g) {
        let s = a + b;
        if s > 0.0 {
            let d = a - b;
            acc += d * d / s;
        }
    }
    0.5 * acc
}

/// Mean over descriptor groups of the per-group χ² distance.
pub fn averaged_chi2_distance(x: &[&[f64]], y: &[&[f64]]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Dimension(format!(
            "samples with {} and {} descriptor groups",
            x.len(),
            y.len()
        )));
    }
    let mut total = 0.0;
    for (g, (a, b)) in x.iter().zip(y).enumerate() {
        total += chi2_distance(a, b).map_err(|e| match e {
            Error::Dimension(m) => Error::Dimension(format!("group {g}: {m}")),
            other => other,
        })?;
    }
    Ok(total / x.len() as f64)
}

#[inline]
pub(crate) fn averaged_chi2_unchecked(x: &[&[f64]], y: &[&[f64]]) -> f64 {
    x.iter().zip(y).map(|(a, b)| chi2_unchecked(a, b)).sum::<f64>() / x.len() as f64
}

fn check_layout(a: &DescriptorView<'_>, b: &DescriptorView<'_>) -> Result<()> {
    if a.group_dims() != b.group_dims() {
        return Err(Error::Dimension(format!(
            "descriptor layouts {:?} and {:?} differ",
            a.group_dims(),
            b.group_dims()
        )));
    }
    Ok(())
}

/// `values[i][j] = k(a_i, b_j)`. Rows are computed in parallel; each entry
/// is a pure function of its pair so the result matches a sequential build.
pub fn build_gram(
    a: &DescriptorView<'_>,
    b: &DescriptorView<'_>,
    kernel: KernelKind,
    bandwidth: f64,
) -> Result<GramMatrix> {
    check_layout(a, b)?;
    match kernel {
        KernelKind::Linear => {
            let mut g = linear_gram(&a.concatenated(), &b.concatenated())?;
            g.bandwidth = bandwidth;
            Ok(g)
        }
        KernelKind::Chi2Exp => {
            if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(Error::Parameter(format!(
                    "chi2_exp bandwidth must be positive, got {bandwidth}"
                )));
            }
            let xs = a.samples();
            let ys = b.samples();
            let mut values = Matrix::zeros(xs.len(), ys.len());
            if !ys.is_empty() {
                values
                    .as_mut_slice()
                    .par_chunks_mut(ys.len())
                    .zip(xs.par_iter())
                    .for_each(|(row, x)| {
                        for (slot, y) in row.iter_mut().zip(&ys) {
                            *slot = (-averaged_chi2_unchecked(x, y) / bandwidth).exp();
                        }
                    });
            }
            Ok(GramMatrix {
                values,
                kernel,
                bandwidth,
            })
        }
    }
}

/// Dot products between the rows of two feature matrices.
pub fn linear_gram(a: &Matrix, b: &Matrix) -> Result<GramMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::Dimension(format!(
            "feature widths {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    let mut values = Matrix::zeros(a.rows(), b.rows());
    if b.rows() > 0 {
        values
            .as_mut_slice()
            .par_chunks_mut(b.rows())
            .enumerate()
            .for_each(|(i, row)| {
                let x = a.row(i);
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = dot(x, b.row(j));
                }
            });
    }
    Ok(GramMatrix {
        values,
        kernel: KernelKind::Linear,
        bandwidth: 1.0,
    })
}

/// Bandwidth for the exponentiated χ² kernel: the mean group-averaged χ²
/// distance over all unordered pairs of `train`, or 1 when that mean is 0.
pub fn median_heuristic_bandwidth(train: &DescriptorView<'_>) -> Result<f64> {
    let n = train.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "bandwidth heuristic needs at least 2 samples, got {n}"
        )));
    }
    let xs = train.samples();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| averaged_chi2_unchecked(&xs[i], &xs[j]))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let mean = total / (n * (n - 1) / 2) as f64;
    Ok(if mean > 0.0 { mean } else { 1.0 })
}
