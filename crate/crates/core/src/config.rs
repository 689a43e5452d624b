//! Run configuration files.
//!
//! A config is a small TOML document restricted to section headers and
//! `key = value` lines:
//!
//! ```toml
//! [dataset]
//! classes = 6
//! per_class = 100
//! groups = [16, 32]
//! noise = 0.5
//! manifold_strength = 0.8
//! seed = 7
//!
//! [experiment]
//! kind = "grid"             # grid | leakage | sweep
//! methods = ["svm_chi2", "enpro"]
//! n_labeled = [5, 10]
//! fractions = [1.0]
//! leak = [false]
//! seeds = [0, 1, 2, 3, 4]
//! holdout = 0.5
//!
//! [defaults]                # applied to every method
//! svm_c = 1.0
//!
//! [method.enpro]            # applied to one method, after [defaults]
//! hypotheses = 50
//! ```
//!
//! `[dataset]` holds either `path = "file.csv"` or the synthetic keys above.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data::DescriptorSet;
use crate::ensemble::Sampler;
use crate::error::{Error, Result};
use crate::experiments::methods::{BandwidthMode, MethodConfig, MethodId};
use crate::linear::Loss;
use crate::synth::{generate, GroupSpec, SynthSpec, DEFAULT_CONCENTRATION, DEFAULT_SPREAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Every cell of the grid, as declared.
    Grid,
    /// Leak-free arms at each fraction plus one leaky full-pool arm per seed.
    Leakage,
    /// Leak-free arms only.
    Sweep,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Path(PathBuf),
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    path: Option<PathBuf>,
    classes: Option<usize>,
    per_class: Option<usize>,
    groups: Option<Vec<usize>>,
    noise: Option<Noise>,
    manifold_strength: Option<f64>,
    concentration: Option<f64>,
    spread: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum Noise {
    Shared(f64),
    PerGroup(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: ExperimentKind,
    methods: Vec<String>,
    n_labeled: Vec<usize>,
    fractions: Vec<f64>,
    #[serde(default = "default_leak")]
    leak: Vec<bool>,
    seeds: Vec<u64>,
    holdout: Option<f64>,
}

fn default_leak() -> Vec<bool> {
    vec![false]
}

/// Optional per-method settings; unset keys keep the method defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodOverrides {
    pub svm_c: Option<f64>,
    pub smo_tolerance: Option<f64>,
    /// Fixed χ² bandwidth; unset uses the mean pairwise distance.
    pub bandwidth: Option<f64>,
    pub hypotheses: Option<usize>,
    pub pseudo_classes: Option<usize>,
    pub neighbors: Option<usize>,
    pub sampler: Option<Sampler>,
    pub use_sigmoid: Option<bool>,
    pub base_c: Option<f64>,
    /// `hinge_squared` or `logistic`.
    pub base_loss: Option<Loss>,
    pub k_nn: Option<usize>,
    pub gamma_a: Option<f64>,
    pub gamma_i: Option<f64>,
    pub reg_group: Option<usize>,
    pub normalized_laplacian: Option<bool>,
}

impl MethodOverrides {
    pub fn apply(&self, c: &mut MethodConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            svm_c => c.svm_c,
            smo_tolerance => c.smo_tolerance,
            hypotheses => c.ensemble.hypotheses,
            pseudo_classes => c.ensemble.pseudo_classes,
            neighbors => c.ensemble.neighbors,
            sampler => c.ensemble.sampler,
            use_sigmoid => c.ensemble.use_sigmoid,
            base_c => c.ensemble.base_c,
            base_loss => c.ensemble.base_loss,
            k_nn => c.k_nn,
            gamma_a => c.gamma_a,
            gamma_i => c.gamma_i,
            reg_group => c.reg_group,
            normalized_laplacian => c.normalized_laplacian,
        }
        if let Some(b) = self.bandwidth {
            c.bandwidth = BandwidthMode::Fixed(b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: RawDataset,
    experiment: RawExperiment,
    #[serde(default)]
    defaults: MethodOverrides,
    #[serde(default)]
    method: BTreeMap<String, MethodOverrides>,
    output: Option<RawOutput>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub methods: Vec<MethodConfig>,
    pub kind: ExperimentKind,
    pub n_labeled: Vec<usize>,
    pub fractions: Vec<f64>,
    pub leak: Vec<bool>,
    pub seeds: Vec<u64>,
    pub holdout: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

/// Holdout share used when a leakage experiment does not set one.
pub const DEFAULT_LEAKAGE_HOLDOUT: f64 = 0.5;

impl RunConfig {
    /// Parses and validates a config. Relative dataset paths are resolved
    /// against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(located(text, &e)))?;
        let dataset = dataset_source(raw.dataset, base_dir)?;

        let e = raw.experiment;
        let mut methods = Vec::with_capacity(e.methods.len());
        for name in &e.methods {
            let id: MethodId = name.parse()?;
            if methods.iter().any(|m: &MethodConfig| m.method == id) {
                return Err(Error::Config(format!("method `{id}` listed twice")));
            }
            let mut config = MethodConfig::new(id);
            raw.defaults.apply(&mut config);
            if let Some(o) = raw.method.get(name) {
                o.apply(&mut config);
            }
            config.validate()?;
            methods.push(config);
        }
        if let Some(name) = raw.method.keys().find(|k| !e.methods.contains(k)) {
            name.parse::<MethodId>()?;
            return Err(Error::Config(format!("[method.{name}] given but `{name}` is not in experiment.methods")));
        }

        let config = RunConfig {
            dataset,
            methods,
            kind: e.kind,
            n_labeled: e.n_labeled,
            fractions: e.fractions,
            leak: e.leak,
            seeds: e.seeds,
            holdout: match (e.kind, e.holdout) {
                (ExperimentKind::Leakage, None) => Some(DEFAULT_LEAKAGE_HOLDOUT),
                (_, h) => h,
            },
            output_dir: raw.output.map(|o| o.dir),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.methods.is_empty() {
            return bad("experiment.methods must name at least one method");
        }
        if self.seeds.is_empty() {
            return bad("experiment.seeds must hold at least one seed");
        }
        if self.n_labeled.is_empty() || self.n_labeled.contains(&0) {
            return bad("experiment.n_labeled must be non-empty and positive");
        }
        if self.fractions.is_empty() || self.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return bad("experiment.fractions must be non-empty and within (0, 1]");
        }
        if self.leak.is_empty() {
            return bad("experiment.leak must be non-empty");
        }
        if let Some(h) = self.holdout {
            if !(h > 0.0 && h < 1.0) {
                return bad("experiment.holdout must lie in (0, 1)");
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<DescriptorSet> {
        match &self.dataset {
            DatasetSource::Path(p) => DescriptorSet::read_csv(std::fs::File::open(p)?),
            DatasetSource::Synth(spec) => generate(spec),
        }
    }
}

fn dataset_source(d: RawDataset, base_dir: &Path) -> Result<DatasetSource> {
    if let Some(path) = d.path {
        if d.classes.is_some() || d.per_class.is_some() || d.groups.is_some() {
            return Err(Error::Config("[dataset] takes either `path` or synthetic keys, not both".into()));
        }
        return Ok(DatasetSource::Path(base_dir.join(path)));
    }
    let missing = |k: &str| Error::Config(format!("[dataset] is missing `{k}`"));
    let dims = d.groups.ok_or_else(|| missing("groups"))?;
    let noise = match d.noise.unwrap_or(Noise::Shared(0.5)) {
        Noise::Shared(v) => vec![v; dims.len()],
        Noise::PerGroup(v) if v.len() == dims.len() => v,
        Noise::PerGroup(v) => {
            return Err(Error::Config(format!("[dataset] has {} groups but {} noise values", dims.len(), v.len())))
        }
    };
    let spec = SynthSpec {
        class_count: d.classes.ok_or_else(|| missing("classes"))?,
        samples_per_class: d.per_class.ok_or_else(|| missing("per_class"))?,
        groups: dims.into_iter().zip(noise).map(|(dim, noise)| GroupSpec { dim, noise }).collect(),
        manifold_strength: d.manifold_strength.ok_or_else(|| missing("manifold_strength"))?,
        concentration: d.concentration.unwrap_or(DEFAULT_CONCENTRATION),
        spread: d.spread.unwrap_or(DEFAULT_SPREAD),
        seed: d.seed.unwrap_or(0),
    };
    spec.validate().map_err(|e| Error::Config(format!("[dataset]: {e}")))?;
    Ok(DatasetSource::Synth(spec))
}

fn located(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[dataset]
classes = 3
per_class = 10
groups = [4, 6]
noise = [0.1, 0.2]
manifold_strength = 0.5
seed = 2

[experiment]
kind = "sweep"
methods = ["svm_chi2", "enpro"]
n_labeled = [2]
fractions = [0.5, 1.0]
seeds = [0, 1]
holdout = 0.5

[defaults]
svm_c = 4.0

[method.enpro]
hypotheses = 7
sampler = "uniform"
base_loss = "logistic"
"#;

    #[test]
    fn parses_and_applies_overrides() {
        let c = RunConfig::parse(BASIC, Path::new("/tmp")).unwrap();
        assert_eq!(c.kind, ExperimentKind::Sweep);
        assert_eq!(c.methods.len(), 2);
        assert_eq!(c.methods[0].svm_c, 4.0);
        assert_eq!(c.methods[1].svm_c, 4.0);
        assert_eq!(c.methods[1].ensemble.hypotheses, 7);
        assert_eq!(c.methods[1].ensemble.sampler, Sampler::Uniform);
        assert_eq!(c.methods[1].ensemble.base_loss, Loss::Logistic);
        assert_eq!(c.methods[0].ensemble.hypotheses, 100);
        assert_eq!(c.leak, vec![false]);
        match &c.dataset {
            DatasetSource::Synth(s) => {
                assert_eq!(s.groups[1], GroupSpec { dim: 6, noise: 0.2 });
                assert_eq!(s.seed, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(c.load_dataset().unwrap().n_samples(), 30);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = BASIC.replace("seeds = [0, 1]", "seeds = [0, 1");
        let err = RunConfig::parse(&text, Path::new(".")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn unknown_method_lists_valid_ids() {
        let text = BASIC.replace("\"svm_chi2\", \"enpro\"", "\"svm_rbf\"");
        let msg = RunConfig::parse(&text, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("svm_rbf") && msg.contains("lapsvm_chi2"), "{msg}");
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("seeds = [0, 1]", "seeds = []"),
            ("per_class = 10", "per_class = 2"),
            ("hypotheses = 7", "hypotheses = 0"),
            ("fractions = [0.5, 1.0]", "fractions = [0.0]"),
            ("svm_c = 4.0", "svm_c = 4.0\nbogus = 1"),
        ] {
            let text = BASIC.replace(from, to);
            assert!(matches!(RunConfig::parse(&text, Path::new(".")), Err(Error::Config(_))), "{to}");
        }
    }

    #[test]
    fn path_dataset_is_relative_to_config() {
        let text = "[dataset]\npath = \"d.csv\"\n[experiment]\nkind = \"grid\"\nmethods = [\"svm_linear\"]\nn_labeled = [1]\nfractions = [1.0]\nseeds = [3]\n";
        let c = RunConfig::parse(text, Path::new("/data")).unwrap();
        assert_eq!(c.dataset, DatasetSource::Path(PathBuf::from("/data/d.csv")));
        assert_eq!(c.holdout, None);
    }
}
