//! Seeded multi-descriptor histogram datasets with class-specific curved
//! structure.
//!
//! Each class owns, per descriptor group, a prototype histogram `p` and a
//! one-dimensional curve in log-bin space. A sample draws a latent position
//! `t` shared by all its groups and sets bin `j` to
//! `p_j · exp(spread · (s·curve_j(t) + (1 − s)·blob_j)) + noise_j`, where `s`
//! is the manifold strength and `blob` an isotropic offset with the same
//! root-mean-square size as the curve. Negative bins are clamped to zero and
//! each group is renormalized to unit mass.

use rand::Rng;
use rand_distr::{Dirichlet, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DescriptorSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub dim: usize,
    /// Standard deviation of per-bin isotropic noise, relative to the mean
    /// bin mass `1/dim`.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub class_count: usize,
    pub samples_per_class: usize,
    pub groups: Vec<GroupSpec>,
    /// 0 gives isotropic clusters, 1 puts every sample on its class curve.
    pub manifold_strength: f64,
    /// Dirichlet concentration of the class prototypes; larger values pull
    /// prototypes towards the uniform histogram and make classes overlap.
    pub concentration: f64,
    /// Root-mean-square log-scale extent of the class curves.
    pub spread: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Spec with the generator's default shape parameters.
    pub fn new(class_count: usize, samples_per_class: usize, groups: Vec<GroupSpec>, manifold_strength: f64, seed: u64) -> Self {
        SynthSpec {
            class_count,
            samples_per_class,
            groups,
            manifold_strength,
            concentration: DEFAULT_CONCENTRATION,
            spread: DEFAULT_SPREAD,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.class_count < 2 {
            return bad(format!("need at least 2 classes, got {}", self.class_count));
        }
        if self.samples_per_class < 4 {
            return bad(format!("need at least 4 samples per class, got {}", self.samples_per_class));
        }
        if self.groups.is_empty() {
            return bad("need at least one descriptor group".into());
        }
        for (g, spec) in self.groups.iter().enumerate() {
            if spec.dim < 2 {
                return bad(format!("group {g} has dimension {}, need at least 2", spec.dim));
            }
            if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
                return bad(format!("group {g} noise must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.manifold_strength) {
            return bad(format!("manifold strength {} outside [0,1]", self.manifold_strength));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return bad("concentration must be positive".into());
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return bad("spread must be finite and non-negative".into());
        }
        Ok(())
    }
}

pub const DEFAULT_CONCENTRATION: f64 = 4.0;
pub const DEFAULT_SPREAD: f64 = 0.4;

struct ClassShape {
    prototype: Vec<f64>,
    along: Vec<f64>,
    bend: Vec<f64>,
}

/// Centered Gaussian direction with unit root-mean-square entry.
fn direction<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mean = v.iter().sum::<f64>() / dim as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / dim as f64).sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x /= rms);
    v
}

/// Root-mean-square of `t·along + (t² − 1/3)·bend` for `t ~ U(−1, 1)`.
const CURVE_RMS: f64 = 0.649_786_289_6;

/// Generates `class_count × samples_per_class` samples, class-major.
pub fn generate(spec: &SynthSpec) -> Result<DescriptorSet> {
    spec.validate()?;
    let n = spec.class_count * spec.samples_per_class;
    let mut groups: Vec<Matrix> = spec.groups.iter().map(|g| Matrix::zeros(n, g.dim)).collect();
    let mut labels = Vec::with_capacity(n);
    let s = spec.manifold_strength;

    for class in 0..spec.class_count {
        let mut rng = seed::rng(seed::derive(spec.seed, class as u64));
        let shapes: Vec<ClassShape> = spec
            .groups
            .iter()
            .map(|g| {
                let alpha = vec![spec.concentration; g.dim];
                let dirichlet = Dirichlet::new(&alpha).map_err(|e| Error::Parameter(e.to_string()))?;
                Ok(ClassShape {
                    prototype: dirichlet.sample(&mut rng),
                    along: direction(&mut rng, g.dim),
                    bend: direction(&mut rng, g.dim),
                })
            })
            .collect::<Result<_>>()?;

        for k in 0..spec.samples_per_class {
            let row = class * spec.samples_per_class + k;
            labels.push(class);
            let t: f64 = rng.gen_range(-1.0..1.0);
            for (g, (gspec, shape)) in spec.groups.iter().zip(&shapes).enumerate() {
                let unit = 1.0 / gspec.dim as f64;
                let out = groups[g].row_mut(row);
                for (j, v) in out.iter_mut().enumerate() {
                    let curve = t * shape.along[j] + (t * t - 1.0 / 3.0) * shape.bend[j];
                    let blob = CURVE_RMS * rng.sample::<f64, _>(StandardNormal);
                    let noise = gspec.noise * unit * rng.sample::<f64, _>(StandardNormal);
                    let offset = spec.spread * (s * curve + (1.0 - s) * blob);
                    *v = (shape.prototype[j] * offset.exp() + noise).max(0.0);
                }
                let mass: f64 = out.iter().sum();
                if mass > 0.0 {
                    out.iter_mut().for_each(|v| *v /= mass);
                } else {
                    out.iter_mut().for_each(|v| *v = unit);
                }
            }
        }
    }
    DescriptorSet::new(groups, labels, spec.class_count)
}
