//! Experiment configuration files.
//!
//! One TOML file describes one experiment: its kind, the target, the run
//! settings handed to the orchestrator, and an optional section specific to
//! the kind.

use std::path::{Path, PathBuf};

use ksd_mcmc::orchestrator::{RegionStrategy, RunConfig};
use ksd_mcmc::rng::stream;
use ksd_mcmc::samplers::SamplerKind;
use ksd_mcmc::targets::{
    make_sensor_posterior, simulate_sensor_world, standard_normal, BoxRegion, GaussianMixture,
    GaussianMixtureSpec, MixtureComponent, SensorModel, Target,
};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BlockAgreement,
    Unimodal,
    MultimodalOracle,
    MultimodalGeneral,
    WeightComparison,
    ParallelBaselines,
    SamplerCount,
    Sensor,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BlockAgreement => "block-agreement",
            Self::Unimodal => "unimodal",
            Self::MultimodalOracle => "multimodal-oracle",
            Self::MultimodalGeneral => "multimodal-general",
            Self::WeightComparison => "weight-comparison",
            Self::ParallelBaselines => "parallel-baselines",
            Self::SamplerCount => "sampler-count",
            Self::Sensor => "sensor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Replicates at desk scale.
    pub repeats: usize,
    /// Replicates with `--paper-scale`.
    #[serde(default = "default_paper_repeats")]
    pub paper_repeats: usize,
    /// Master seed; replicate seeds are derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Sample counts at which the metric is recorded; the last one sets the budget.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    /// CSV file name inside the output directory.
    #[serde(default)]
    pub output: Option<String>,
    /// Restricts the methods run. `single` selects every single-chain method.
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    pub target: TargetSpec,
    #[serde(default)]
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub block: Option<BlockSection>,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
    #[serde(default)]
    pub weights: Option<WeightSection>,
    #[serde(default)]
    pub baselines: Option<BaselineSection>,
    #[serde(default)]
    pub counts: Option<CountSection>,
}

fn default_paper_repeats() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    StandardNormal {
        dim: usize,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
    /// The three-mode mixture of the known-region experiments.
    ThreeMode,
    RandomMixture {
        modes: usize,
        dim: usize,
        half_width: f64,
        variance: (f64, f64),
        seed: u64,
    },
    Sensor {
        #[serde(default)]
        file: Option<PathBuf>,
        #[serde(default)]
        world: Option<SensorWorld>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorWorld {
    pub n_sensors: usize,
    pub anchors: Vec<[f64; 2]>,
    pub side: f64,
    pub range: f64,
    pub sigma: f64,
    pub seed: u64,
}

/// A built target plus what the metrics need.
#[derive(Debug, Clone)]
pub struct BuiltTarget {
    pub target: Target,
    pub mixture: Option<GaussianMixtureSpec>,
    /// True sensor positions, flattened.
    pub positions: Option<Vec<f64>>,
}

impl TargetSpec {
    pub fn build(&self) -> Result<BuiltTarget> {
        let mixture = |spec: GaussianMixtureSpec| -> Result<BuiltTarget> {
            let target = GaussianMixture::new(spec.clone())?.into_target();
            Ok(BuiltTarget {
                target,
                mixture: Some(spec),
                positions: None,
            })
        };
        match self {
            Self::StandardNormal { dim } => Ok(BuiltTarget {
                target: standard_normal(*dim),
                mixture: None,
                positions: None,
            }),
            Self::Mixture { components } => mixture(GaussianMixtureSpec {
                components: components.clone(),
            }),
            Self::ThreeMode => mixture(GaussianMixtureSpec::three_mode()),
            Self::RandomMixture {
                modes,
                dim,
                half_width,
                variance,
                seed,
            } => mixture(GaussianMixtureSpec::random(
                *modes,
                *dim,
                *half_width,
                *variance,
                &mut stream(*seed, "mixture", 0),
            )),
            Self::Sensor { file, world } => {
                let model = match (file, world) {
                    (Some(path), None) => {
                        let text =
                            std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
                        SensorModel::from_json(&text)?
                    }
                    (None, Some(w)) => simulate_sensor_world(
                        w.n_sensors,
                        w.anchors.clone(),
                        w.side,
                        w.range,
                        w.sigma,
                        &mut stream(w.seed, "sensor-world", 0),
                    )?,
                    _ => {
                        return Err(BenchError::Config(
                            "sensor target needs exactly one of `file` or `world`".into(),
                        ))
                    }
                };
                let positions = model.truth_vector();
                Ok(BuiltTarget {
                    target: make_sensor_posterior(model)?,
                    mixture: None,
                    positions,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    /// Draws per sampler.
    pub draws: usize,
    pub block_sizes: Vec<usize>,
    /// Block size whose ranking counts as ground truth.
    pub reference_block: usize,
    /// Kernel bandwidths `h`.
    pub widths: Vec<f64>,
    pub sampler: SamplerKind,
    pub init_box: BoxRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Region of each chain in the pool.
    pub regions: Vec<usize>,
    pub strategies: Vec<RegionStrategy>,
    #[serde(default = "yes")]
    pub known_weights: bool,
    #[serde(default = "yes")]
    pub estimated_weights: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    /// Rényi orders to compare.
    pub alphas: Vec<f64>,
    /// Proposal draws for the importance estimator.
    #[serde(default = "default_importance_draws")]
    pub importance_draws: usize,
}

fn default_importance_draws() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    /// MALA step sizes; drawn from `[0.1, 5]` with `params_seed` when absent.
    #[serde(default)]
    pub steps: Option<Vec<f64>>,
    #[serde(default = "default_baseline_count")]
    pub count: usize,
    #[serde(default)]
    pub params_seed: u64,
    #[serde(default = "default_steps_per_swap")]
    pub steps_per_swap: usize,
    /// Inverse temperatures; the exponential ladder when absent.
    #[serde(default)]
    pub ladder: Option<Vec<f64>>,
    pub init_box: BoxRegion,
    #[serde(default = "yes")]
    pub smc: bool,
    #[serde(default = "yes")]
    pub pt: bool,
}

fn default_baseline_count() -> usize {
    10
}

fn default_steps_per_swap() -> usize {
    ksd_mcmc::baselines::DEFAULT_STEPS_PER_SWAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountSection {
    pub pool_sizes: Vec<usize>,
}

/// Command-line overrides applied on top of a loaded file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paper_scale: bool,
    pub repeats: Option<usize>,
    pub kernel_h: Option<f64>,
    pub kernel_gamma: Option<f64>,
    pub population_steps: Option<Vec<f64>>,
    pub steps_per_swap: Option<usize>,
    pub ladder: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// Parses a file; relative sensor file paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let TargetSpec::Sensor { file: Some(f), .. } = &mut cfg.target {
            if f.is_relative() {
                *f = path.parent().unwrap_or(Path::new(".")).join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.paper_scale {
            self.repeats = self.paper_repeats;
        }
        if let Some(r) = o.repeats {
            self.repeats = r;
        }
        if let Some(run) = &mut self.run {
            if let Some(h) = o.kernel_h {
                run.kernel.h = h;
            }
            if let Some(g) = o.kernel_gamma {
                run.kernel.gamma_exp = g;
            }
        }
        if let Some(b) = &mut self.baselines {
            if let Some(steps) = &o.population_steps {
                b.count = steps.len();
                b.steps = Some(steps.clone());
            }
            if let Some(s) = o.steps_per_swap {
                b.steps_per_swap = s;
            }
            if let Some(l) = &o.ladder {
                b.ladder = Some(l.clone());
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.repeats == 0 || self.paper_repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("checkpoints must be strictly increasing");
        }
        let need = |present: bool, section: &str| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(BenchError::Config(format!(
                    "experiment `{}` needs a [{section}] section",
                    self.experiment.name()
                )))
            }
        };
        use ExperimentKind::*;
        match self.experiment {
            BlockAgreement => need(self.block.is_some(), "block")?,
            MultimodalOracle => {
                need(self.run.is_some(), "run")?;
                need(self.oracle.is_some(), "oracle")?;
            }
            WeightComparison => {
                need(self.run.is_some(), "run")?;
                need(self.weights.is_some(), "weights")?;
            }
            ParallelBaselines => {
                need(self.run.is_some(), "run")?;
                need(self.baselines.is_some(), "baselines")?;
            }
            SamplerCount => {
                need(self.run.is_some(), "run")?;
                need(self.counts.is_some(), "counts")?;
            }
            Unimodal | MultimodalGeneral | Sensor => need(self.run.is_some(), "run")?,
        }
        if self.experiment != BlockAgreement {
            let run = self.run.as_ref().expect("checked above");
            if self.checkpoints.is_empty() && run.rounds == 0 {
                return bad("give either checkpoints or run.rounds");
            }
            if let Some(&last) = self.checkpoints.last() {
                if last % run.batch_size.max(1) != 0 {
                    return bad("the last checkpoint must be a multiple of the batch size");
                }
            }
        }
        Ok(())
    }

    /// Run settings with the budget taken from the checkpoints.
    pub fn run_config(&self, seed: u64) -> Result<RunConfig> {
        let mut run = self
            .run
            .clone()
            .ok_or_else(|| BenchError::Config("missing [run] section".into()))?;
        if let Some(&last) = self.checkpoints.last() {
            run.rounds = last / run.batch_size;
        }
        run.checkpoints = self.checkpoint_list(run.rounds * run.batch_size);
        run.seed = seed;
        Ok(run)
    }

    /// Configured checkpoints, or just the final budget.
    pub fn checkpoint_list(&self, total: usize) -> Vec<usize> {
        if self.checkpoints.is_empty() {
            vec![total]
        } else {
            self.checkpoints.clone()
        }
    }

    pub fn wants(&self, method: &str) -> bool {
        match &self.methods {
            None => true,
            Some(list) => list
                .iter()
                .any(|m| m == method || (m == "single" && method.starts_with("single-"))),
        }
    }

    pub fn output_name(&self) -> String {
        self.output
            .clone()
            .unwrap_or_else(|| format!("{}.csv", self.experiment.name()))
    }
}
