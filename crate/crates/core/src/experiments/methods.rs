use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{assert_no_leak, DescriptorSet, SplitPlan};
use crate::ensemble::{fit_ensemble, project_view, EnsembleParams, Sampler};
use crate::error::{Error, Result};
use crate::experiments::metrics::mean_average_precision;
use crate::kernel_svm::{kernel_decisions, train_kernel_ovr, DEFAULT_TOLERANCE};
use crate::kernels::{build_gram, linear_gram, median_heuristic_bandwidth, KernelKind};
use crate::linear::{decision_value, train_one_vs_rest, Loss};
use crate::manifold::{build_knn_graph, graph_laplacian, normalized_laplacian, train_manifold, ManifoldParams};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    SvmLinear,
    SvmChi2,
    LapsvmChi2,
    Enpro,
    EnproUniform,
    EnproNosigmoid,
}

impl MethodId {
    pub const ALL: [MethodId; 6] = [
        MethodId::SvmLinear,
        MethodId::SvmChi2,
        MethodId::LapsvmChi2,
        MethodId::Enpro,
        MethodId::EnproUniform,
        MethodId::EnproNosigmoid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::SvmLinear => "svm_linear",
            MethodId::SvmChi2 => "svm_chi2",
            MethodId::LapsvmChi2 => "lapsvm_chi2",
            MethodId::Enpro => "enpro",
            MethodId::EnproUniform => "enpro_uniform",
            MethodId::EnproNosigmoid => "enpro_nosigmoid",
        }
    }

    pub fn valid_ids() -> String {
        MethodId::ALL.map(MethodId::as_str).join(", ")
    }

    /// Whether the method reads unlabeled-train samples.
    pub fn uses_unlabeled(self) -> bool {
        !matches!(self, MethodId::SvmLinear)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`; valid ids: {}", MethodId::valid_ids())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandwidthMode {
    /// Mean pairwise χ² distance over labeled ∪ unlabeled-train.
    MeanDistance,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub method: MethodId,
    /// `C` of the baseline SVMs and of the final classifier on `φ`.
    pub svm_c: f64,
    pub smo_tolerance: f64,
    pub bandwidth: BandwidthMode,
    pub ensemble: EnsembleParams,
    pub k_nn: usize,
    pub gamma_a: f64,
    pub gamma_i: f64,
    /// Descriptor group carrying the neighbour graph.
    pub reg_group: usize,
    pub normalized_laplacian: bool,
}

pub const DEFAULT_SVM_C: f64 = 1.0;
pub const DEFAULT_K_NN: usize = 6;
pub const DEFAULT_GAMMA_A: f64 = 1e-3;
/// The graph term is scaled by `l / (l + u)^2`, so small values leave it inert.
pub const DEFAULT_GAMMA_I: f64 = 100.0;

impl MethodConfig {
    pub fn new(method: MethodId) -> Self {
        let mut ensemble = EnsembleParams::default();
        match method {
            MethodId::EnproUniform => ensemble.sampler = Sampler::Uniform,
            MethodId::EnproNosigmoid => ensemble.use_sigmoid = false,
            _ => {}
        }
        MethodConfig {
            method,
            svm_c: DEFAULT_SVM_C,
            smo_tolerance: DEFAULT_TOLERANCE,
            bandwidth: BandwidthMode::MeanDistance,
            ensemble,
            k_nn: DEFAULT_K_NN,
            gamma_a: DEFAULT_GAMMA_A,
            gamma_i: DEFAULT_GAMMA_I,
            reg_group: 0,
            normalized_laplacian: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{}: {m}", self.method)));
        if !(self.svm_c > 0.0) || !(self.smo_tolerance > 0.0) {
            return bad("svm_c and smo_tolerance must be positive".into());
        }
        if let BandwidthMode::Fixed(b) = self.bandwidth {
            if !(b > 0.0) {
                return bad(format!("fixed bandwidth must be positive, got {b}"));
            }
        }
        match self.method {
            MethodId::Enpro | MethodId::EnproUniform | MethodId::EnproNosigmoid => {
                let e = &self.ensemble;
                if e.hypotheses == 0 {
                    return bad("hypotheses = 0 gives an empty feature map".into());
                }
                if e.pseudo_classes < 2 || !(e.base_c > 0.0) {
                    return bad("need pseudo_classes >= 2 and base_c > 0".into());
                }
            }
            MethodId::LapsvmChi2 => {
                if self.k_nn == 0 || !(self.gamma_a > 0.0) || !(self.gamma_i >= 0.0) {
                    return bad("need k_nn >= 1, gamma_a > 0, gamma_i >= 0".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// One evaluated (method, split) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: MethodId,
    pub n_labeled: usize,
    pub unlabeled_fraction: f64,
    pub leak: bool,
    pub seed: u64,
    pub map: f64,
}

/// Trains `config.method` on the plan's training roles and returns the MAP
/// of its one-vs-rest scores on the test role.
pub fn run_method(config: &MethodConfig, data: &DescriptorSet, plan: &SplitPlan) -> Result<ExperimentRecord> {
    run_inner(config, data, plan).map_err(|e| e.in_method(config.method.as_str()))
}

fn run_inner(config: &MethodConfig, data: &DescriptorSet, plan: &SplitPlan) -> Result<ExperimentRecord> {
    config.validate()?;
    if !plan.leak_test_into_train && !assert_no_leak(plan) {
        return Err(Error::Invariant("plan marked leak-free shares ids between test and training".into()));
    }
    let labeled = data.restrict(&plan.labeled_ids)?;
    let test = data.restrict(&plan.test_ids)?;
    let labels = labeled.labels();
    let classes = data.class_count();

    let scores: Vec<Vec<f64>> = match config.method {
        MethodId::SvmLinear => {
            let x = labeled.concatenated();
            let models = train_one_vs_rest(&x, &labels, classes, Loss::HingeSquared, config.svm_c, plan.seed)?;
            let xt = test.concatenated();
            models
                .iter()
                .map(|m| (0..xt.rows()).map(|i| decision_value(m, xt.row(i))).collect())
                .collect::<Result<_>>()?
        }
        MethodId::SvmChi2 => {
            let bw = bandwidth(config, data, plan)?;
            let k = build_gram(&labeled, &labeled, KernelKind::Chi2Exp, bw)?;
            let models = train_kernel_ovr(&k, &labels, classes, config.svm_c, config.smo_tolerance)?;
            let kt = build_gram(&test, &labeled, KernelKind::Chi2Exp, bw)?;
            models.iter().map(|m| kernel_decisions(m, &kt)).collect::<Result<_>>()?
        }
        MethodId::LapsvmChi2 => {
            let bw = bandwidth(config, data, plan)?;
            let nodes = data.select(&plan.training_ids())?;
            let graph = build_knn_graph(&nodes, config.reg_group, config.k_nn)?;
            let lap = if config.normalized_laplacian {
                normalized_laplacian(&graph)
            } else {
                graph_laplacian(&graph)
            };
            let k = build_gram(&nodes, &nodes, KernelKind::Chi2Exp, bw)?;
            let params = ManifoldParams {
                gamma_a: config.gamma_a,
                gamma_i: config.gamma_i,
            };
            let model = train_manifold(&k, &lap, &labels, classes, params)?;
            let kt = build_gram(&test, &nodes, KernelKind::Chi2Exp, bw)?;
            model.scores(&kt)?
        }
        MethodId::Enpro | MethodId::EnproUniform | MethodId::EnproNosigmoid => {
            let pool = data.restrict(&plan.training_ids())?;
            let ensemble = fit_ensemble(&pool, config.ensemble, seed::derive(plan.seed, 0x5eed))?;
            if !plan.leak_test_into_train {
                let assigned = ensemble.assigned_ids();
                if let Some(id) = plan.test_ids.iter().find(|id| assigned.binary_search(id).is_ok()) {
                    return Err(Error::Invariant(format!("test sample {id} used by a pseudo-hypothesis")));
                }
            }
            let phi_lab = project_view(&ensemble, &labeled)?;
            let phi_test = project_view(&ensemble, &test)?;
            let k = linear_gram(&phi_lab, &phi_lab)?;
            let models = train_kernel_ovr(&k, &labels, classes, config.svm_c, config.smo_tolerance)?;
            let kt = linear_gram(&phi_test, &phi_lab)?;
            models.iter().map(|m| kernel_decisions(m, &kt)).collect::<Result<_>>()?
        }
    };

    let map = mean_average_precision(&scores, &test.labels())?;
    Ok(ExperimentRecord {
        method: config.method,
        n_labeled: plan.n_labeled_per_class,
        unlabeled_fraction: plan.unlabeled_fraction,
        leak: plan.leak_test_into_train,
        seed: plan.seed,
        map,
    })
}

fn bandwidth(config: &MethodConfig, data: &DescriptorSet, plan: &SplitPlan) -> Result<f64> {
    match config.bandwidth {
        BandwidthMode::Fixed(b) => Ok(b),
        BandwidthMode::MeanDistance => median_heuristic_bandwidth(&data.restrict(&plan.training_ids())?),
    }
}
