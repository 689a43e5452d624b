//! Ensemble Projections: pseudo-label hypotheses sampled without ground
//! truth, one bank of linear classifiers per hypothesis, and the feature map
//! formed by concatenating every classifier's output.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DescriptorView, Sample};
use crate::error::{Error, Result};
use crate::kernels::averaged_chi2_unchecked;
use crate::linear::{decision_value, sigmoid, train_one_vs_rest, LinearModel, Loss};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Farthest-first seeds expanded by their nearest neighbours.
    Exotic,
    /// Uniform draw without replacement.
    Uniform,
}

/// One pseudo-labelling of a subset of the training pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoHypothesis {
    pub pseudo_class_count: usize,
    /// `(sample id, pseudo-class)` pairs.
    pub assignments: Vec<(usize, usize)>,
    pub sampler: Sampler,
}

impl PseudoHypothesis {
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.pseudo_class_count];
        for &(_, c) in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Picks `c` mutually distant seeds by farthest-first traversal (first seed
/// drawn from `seed`, ties to the lowest index), then gives each seed, in
/// seed order, its `m` nearest still-unassigned samples.
pub fn sample_exotic_hypothesis(
    data: &DescriptorView<'_>,
    c: usize,
    m: usize,
    seed: u64,
) -> Result<PseudoHypothesis> {
    let n = data.len();
    check_pool(n, c, m + 1)?;
    let samples = data.samples();
    let first = seed::rng(seed).gen_range(0..n);
    let seeds = farthest_first(&samples, first, c);

    let mut assigned = vec![false; n];
    for &s in &seeds {
        assigned[s] = true;
    }
    let mut assignments = Vec::with_capacity(c * (m + 1));
    for (class, &s) in seeds.iter().enumerate() {
        assignments.push((data.ids()[s], class));
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| !assigned[j])
            .map(|j| (averaged_chi2_unchecked(&samples[s], &samples[j]), j))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in cand.iter().take(m) {
            assigned[j] = true;
            assignments.push((data.ids()[j], class));
        }
    }
    Ok(PseudoHypothesis {
        pseudo_class_count: c,
        assignments,
        sampler: Sampler::Exotic,
    })
}

/// Farthest-first traversal from `first`; returns `count` local indices.
pub fn farthest_first(samples: &[Sample<'_>], first: usize, count: usize) -> Vec<usize> {
    let n = samples.len();
    let mut chosen = vec![first];
    let mut is_chosen = vec![false; n];
    is_chosen[first] = true;
    let mut nearest: Vec<f64> = samples
        .iter()
        .map(|x| averaged_chi2_unchecked(&samples[first], x))
        .collect();
    while chosen.len() < count.min(n) {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for j in 0..n {
            if !is_chosen[j] && nearest[j] > best_d {
                best_d = nearest[j];
                best = j;
            }
        }
        chosen.push(best);
        is_chosen[best] = true;
        for j in 0..n {
            let d = averaged_chi2_unchecked(&samples[best], &samples[j]);
            if d < nearest[j] {
                nearest[j] = d;
            }
        }
    }
    chosen
}

/// Draws `c × samples_per_class` distinct samples uniformly and deals them
/// into `c` pseudo-classes in draw order.
pub fn sample_uniform_hypothesis(
    data: &DescriptorView<'_>,
    c: usize,
    samples_per_class: usize,
    seed: u64,
) -> Result<PseudoHypothesis> {
    let n = data.len();
    check_pool(n, c, samples_per_class)?;
    let mut rng = seed::rng(seed);
    let picks = index::sample(&mut rng, n, c * samples_per_class);
    let assignments = picks
        .iter()
        .enumerate()
        .map(|(k, local)| (data.ids()[local], k / samples_per_class))
        .collect();
    Ok(PseudoHypothesis {
        pseudo_class_count: c,
        assignments,
        sampler: Sampler::Uniform,
    })
}

fn check_pool(n: usize, c: usize, per_class: usize) -> Result<()> {
    if c < 2 {
        return Err(Error::Parameter(format!("need at least 2 pseudo-classes, got {c}")));
    }
    if per_class == 0 {
        return Err(Error::Parameter("pseudo-classes must have at least one sample".into()));
    }
    if c * per_class > n {
        return Err(Error::Parameter(format!(
            "{c} pseudo-classes of {per_class} samples need {} training samples, pool has {n}",
            c * per_class
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    /// Number of hypotheses `T`.
    pub hypotheses: usize,
    /// Pseudo-classes per hypothesis `c`.
    pub pseudo_classes: usize,
    /// Neighbours per seed `m`; the uniform sampler draws `m + 1` per class.
    pub neighbors: usize,
    pub sampler: Sampler,
    pub use_sigmoid: bool,
    /// Regularization `C` of the base learners.
    pub base_c: f64,
    pub base_loss: Loss,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            hypotheses: 100,
            pseudo_classes: 3,
            neighbors: 5,
            sampler: Sampler::Exotic,
            use_sigmoid: true,
            base_c: 1.0,
            base_loss: Loss::HingeSquared,
        }
    }
}

/// A pseudo-hypothesis and the one-vs-rest classifiers trained on it.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisBank {
    pub hypothesis: PseudoHypothesis,
    pub models: Vec<LinearModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEnsemble {
    pub banks: Vec<HypothesisBank>,
    pub use_sigmoid: bool,
    pub params: EnsembleParams,
    pub seed: u64,
    /// Descriptor group widths the models were trained on.
    pub layout: Vec<usize>,
}

impl ProjectionEnsemble {
    /// Output dimension `K`.
    pub fn dim(&self) -> usize {
        self.banks.iter().map(|b| b.hypothesis.pseudo_class_count).sum()
    }

    /// Every sample id used by any hypothesis, ascending and deduplicated.
    pub fn assigned_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .banks
            .iter()
            .flat_map(|b| b.hypothesis.assignments.iter().map(|a| a.0))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Same ensemble with the sigmoid switched on or off.
    pub fn with_sigmoid(&self, use_sigmoid: bool) -> Self {
        ProjectionEnsemble {
            use_sigmoid,
            params: EnsembleParams {
                use_sigmoid,
                ..self.params
            },
            ..self.clone()
        }
    }
}

/// Draws `T` hypotheses from `data` with per-hypothesis seeds derived from
/// `(seed, t)` and trains `c` one-vs-rest models on each hypothesis's
/// assigned samples.
pub fn fit_ensemble(data: &DescriptorView<'_>, params: EnsembleParams, seed: u64) -> Result<ProjectionEnsemble> {
    if params.hypotheses == 0 {
        return Err(Error::Parameter("ensemble needs at least one hypothesis".into()));
    }
    let features = data.concatenated();
    let local: std::collections::HashMap<usize, usize> =
        data.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let banks = (0..params.hypotheses)
        .into_par_iter()
        .map(|t| {
            let hseed = seed::derive(seed, t as u64);
            fit_bank(data, &features, &local, &params, hseed)
                .map_err(|e| Error::Hypothesis { index: t, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectionEnsemble {
        banks,
        use_sigmoid: params.use_sigmoid,
        params,
        seed,
        layout: data.group_dims(),
    })
}

fn fit_bank(
    data: &DescriptorView<'_>,
    features: &Matrix,
    local: &std::collections::HashMap<usize, usize>,
    params: &EnsembleParams,
    hseed: u64,
) -> Result<HypothesisBank> {
    let sample_seed = seed::derive(hseed, 0);
    let hypothesis = match params.sampler {
        Sampler::Exotic => {
            sample_exotic_hypothesis(data, params.pseudo_classes, params.neighbors, sample_seed)?
        }
        Sampler::Uniform => {
            sample_uniform_hypothesis(data, params.pseudo_classes, params.neighbors + 1, sample_seed)?
        }
    };
    let rows: Vec<usize> = hypothesis.assignments.iter().map(|(id, _)| local[id]).collect();
    let labels: Vec<usize> = hypothesis.assignments.iter().map(|a| a.1).collect();
    let x = features.select_rows(&rows);
    let models = train_one_vs_rest(
        &x,
        &labels,
        hypothesis.pseudo_class_count,
        params.base_loss,
        params.base_c,
        seed::derive(hseed, 1),
    )?;
    Ok(HypothesisBank { hypothesis, models })
}

/// `φ(x)`: per hypothesis and pseudo-class, the sigmoid output or the raw
/// decision value.
pub fn project(ensemble: &ProjectionEnsemble, x: &[&[f64]]) -> Result<Vec<f64>> {
    let dims: Vec<usize> = x.iter().map(|g| g.len()).collect();
    if dims != ensemble.layout {
        return Err(Error::Dimension(format!(
            "sample layout {dims:?} does not match ensemble layout {:?}",
            ensemble.layout
        )));
    }
    let flat: Vec<f64> = x.iter().flat_map(|g| g.iter().copied()).collect();
    project_flat(ensemble, &flat)
}

fn project_flat(ensemble: &ProjectionEnsemble, flat: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ensemble.dim());
    for bank in &ensemble.banks {
        for model in &bank.models {
            let f = decision_value(model, flat)?;
            out.push(if ensemble.use_sigmoid { sigmoid(f) } else { f });
        }
    }
    Ok(out)
}

/// Projects every sample of a view; row `i` is `φ` of the view's `i`-th sample.
pub fn project_view(ensemble: &ProjectionEnsemble, data: &DescriptorView<'_>) -> Result<Matrix> {
    if data.group_dims() != ensemble.layout {
        return Err(Error::Dimension(format!(
            "view layout {:?} does not match ensemble layout {:?}",
            data.group_dims(),
            ensemble.layout
        )));
    }
    let x = data.concatenated();
    let rows = (0..x.rows())
        .into_par_iter()
        .map(|i| project_flat(ensemble, x.row(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Matrix::zeros(rows.len(), ensemble.dim());
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).copy_from_slice(r);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    hypotheses: usize,
    pseudo_classes: usize,
    neighbors: usize,
    sampler: Sampler,
    use_sigmoid: bool,
    seed: u64,
    base_c: f64,
    base_loss: String,
    layout: Vec<usize>,
    assignments: Vec<Vec<(usize, usize)>>,
}

fn loss_name(loss: Loss) -> &'static str {
    match loss {
        Loss::HingeSquared => "hinge_squared",
        Loss::Logistic => "logistic",
    }
}

/// Writes `manifest.json` plus `h<t>_c<k>.csv` per base model.
pub fn write_ensemble(ensemble: &ProjectionEnsemble, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let p = &ensemble.params;
    let manifest = Manifest {
        hypotheses: ensemble.banks.len(),
        pseudo_classes: p.pseudo_classes,
        neighbors: p.neighbors,
        sampler: p.sampler,
        use_sigmoid: ensemble.use_sigmoid,
        seed: ensemble.seed,
        base_c: p.base_c,
        base_loss: loss_name(p.base_loss).into(),
        layout: ensemble.layout.clone(),
        assignments: ensemble.banks.iter().map(|b| b.hypothesis.assignments.clone()).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Input(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    for (t, bank) in ensemble.banks.iter().enumerate() {
        for (k, model) in bank.models.iter().enumerate() {
            model.write_csv(fs::File::create(dir.join(format!("h{t}_c{k}.csv")))?)?;
        }
    }
    Ok(())
}

pub fn read_ensemble(dir: &Path) -> Result<ProjectionEnsemble> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Input(format!("manifest: {e}")))?;
    let loss = match m.base_loss.as_str() {
        "hinge_squared" => Loss::HingeSquared,
        "logistic" => Loss::Logistic,
        other => return Err(Error::Input(format!("unknown loss `{other}`"))),
    };
    let mut banks = Vec::with_capacity(m.hypotheses);
    for (t, assignments) in m.assignments.into_iter().enumerate() {
        let models = (0..m.pseudo_classes)
            .map(|k| LinearModel::read_csv(fs::File::open(dir.join(format!("h{t}_c{k}.csv")))?, loss, m.base_c))
            .collect::<Result<Vec<_>>>()?;
        banks.push(HypothesisBank {
            hypothesis: PseudoHypothesis {
                pseudo_class_count: m.pseudo_classes,
                assignments,
                sampler: m.sampler,
            },
            models,
        });
    }
    Ok(ProjectionEnsemble {
        banks,
        use_sigmoid: m.use_sigmoid,
        params: EnsembleParams {
            hypotheses: m.hypotheses,
            pseudo_classes: m.pseudo_classes,
            neighbors: m.neighbors,
            sampler: m.sampler,
            use_sigmoid: m.use_sigmoid,
            base_c: m.base_c,
            base_loss: loss,
        },
        seed: m.seed,
        layout: m.layout,
    })
}
