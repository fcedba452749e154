use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{SmcConfig, Tolerance};
use crate::channels::{ChannelPrior, ProtocolSettings};
use crate::counts::{CountModelSpec, DifficultyHyper, Scenario};
use crate::error::{Error, Result};
use crate::mdn::TrainConfig;
use crate::oracle::GridConfig;
use crate::validation::{default_levels, KlMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CountsEasy,
    CountsDifficult,
    Channels,
}

impl ExperimentKind {
    pub fn is_counts(self) -> bool {
        self != ExperimentKind::Channels
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CountsEasy => "counts_easy",
            ExperimentKind::CountsDifficult => "counts_difficult",
            ExperimentKind::Channels => "channels",
        }
    }

    /// Parameter dimension of each model.
    pub fn param_dims(self) -> [usize; 2] {
        if self.is_counts() {
            [1, 2]
        } else {
            [ChannelPrior::n_params(0), ChannelPrior::n_params(1)]
        }
    }

    pub fn model_names(self) -> [&'static str; 2] {
        if self.is_counts() {
            ["poisson", "nb"]
        } else {
            crate::channels::MODEL_NAMES
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub train_data: u64,
    pub test_data: u64,
    pub pca: u64,
    /// Network initialization and minibatch order.
    pub init: u64,
    pub baseline: u64,
    pub validation: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { train_data: 1, test_data: 2, pca: 3, init: 4, baseline: 5, validation: 6 }
    }
}

/// Architecture and optimizer settings of one network. Unset fields take the
/// experiment's defaults when the configuration is resolved.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub hidden: Option<Vec<usize>>,
    pub components: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub average_epochs: Option<usize>,
}

/// A fully resolved network recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub hidden: Vec<usize>,
    pub components: usize,
    pub train: TrainConfig,
}

impl NetworkConfig {
    /// `average_divisor` sets the default iterate averaging to that fraction of
    /// the epochs; zero disables it.
    fn fill(&mut self, hidden: &[usize], epochs: usize, average_divisor: usize, seed: u64) {
        self.hidden.get_or_insert_with(|| hidden.to_vec());
        self.components.get_or_insert(3);
        let epochs = *self.epochs.get_or_insert(epochs);
        self.average_epochs.get_or_insert(epochs.checked_div(average_divisor).unwrap_or(0));
        self.learning_rate.get_or_insert(0.01);
        self.seed.get_or_insert(seed);
    }

    fn spec(&self) -> NetworkSpec {
        NetworkSpec {
            hidden: self.hidden.clone().unwrap_or_default(),
            components: self.components.unwrap_or(3),
            train: TrainConfig {
                learning_rate: self.learning_rate.unwrap_or(0.01),
                batch_size: self.batch_size,
                epochs: self.epochs.unwrap_or(100),
                seed: self.seed.unwrap_or(0),
                average_epochs: self.average_epochs.unwrap_or(0),
                ..TrainConfig::default()
            },
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let s = self.spec();
        if s.hidden.is_empty() || s.hidden.contains(&0) {
            return Err(Error::Config(format!("{what}: hidden layer sizes must be positive")));
        }
        if s.components == 0 {
            return Err(Error::Config(format!("{what}: at least one mixture component is required")));
        }
        s.train.validate().map_err(|e| Error::Config(format!("{what}: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CountsConfig {
    pub counts_per_sample: usize,
    pub hyper: DifficultyHyper,
    pub grid: GridConfig,
}

impl Default for CountsConfig {
    fn default() -> Self {
        CountsConfig { counts_per_sample: 100, hyper: DifficultyHyper::default(), grid: GridConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelsConfig {
    /// Prior draws per model in the PCA corpus.
    pub pca_per_model: usize,
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub protocols: ProtocolSettings,
}

impl Default for ChannelsConfig {
    fn default() -> Self {
        let p = ChannelPrior::default();
        ChannelsConfig { pca_per_model: 1000, lo_factor: p.lo_factor, hi_factor: p.hi_factor, protocols: ProtocolSettings::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub rejection_tolerance: Tolerance,
    /// Simulations available to rejection; defaults to the training-set size.
    pub rejection_budget: Option<usize>,
    /// Test points on which SMC is run.
    pub smc_points: usize,
    pub smc: SmcConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { rejection_tolerance: Tolerance::Quantile(0.01), rejection_budget: None, smc_points: 20, smc: SmcConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    pub levels: Vec<f64>,
    pub kl: KlMode,
    /// Test points of the two-parameter count model used for the eigen check.
    pub eigen_cases: usize,
    pub eigen_draws: usize,
    /// Model-0 prior probabilities at which the classifier is retrained.
    pub prior_grid: Vec<f64>,
    pub prior_n_train: Option<usize>,
    pub prior_n_test: Option<usize>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            levels: default_levels(),
            kl: KlMode::Quadrature { n: 1001 },
            eigen_cases: 100,
            eigen_draws: 10_000,
            prior_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            prior_n_train: None,
            prior_n_test: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_model_prior")]
    pub model_prior: [f64; 2],
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub counts: CountsConfig,
    #[serde(default)]
    pub channels: ChannelsConfig,
    #[serde(default)]
    pub classifier: NetworkConfig,
    #[serde(default)]
    pub posterior: [NetworkConfig; 2],
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_n_train() -> usize {
    100_000
}

fn default_n_test() -> usize {
    1000
}

fn default_model_prior() -> [f64; 2] {
    [0.5, 0.5]
}

impl ExperimentConfig {
    /// Defaults for `kind`, already resolved.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            kind,
            out_dir: default_out(),
            n_train: default_n_train(),
            n_test: default_n_test(),
            model_prior: default_model_prior(),
            seeds: Seeds::default(),
            counts: CountsConfig::default(),
            channels: ChannelsConfig::default(),
            classifier: NetworkConfig::default(),
            posterior: Default::default(),
            baselines: BaselineConfig::default(),
            validation: ValidationConfig::default(),
        };
        c.resolve();
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        c.resolve();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Fills every unset network field with the experiment's default.
    pub fn resolve(&mut self) {
        let init = self.seeds.init;
        let (cls_hidden, cls_epochs, post_hidden): (&[usize], usize, [&[usize]; 2]) = if self.kind.is_counts() {
            (&[10], 100, [&[10], &[10, 10]])
        } else {
            (&[10], 10, [&[30, 30], &[30, 30]])
        };
        self.classifier.fill(cls_hidden, cls_epochs, 0, init);
        for (m, p) in self.posterior.iter_mut().enumerate() {
            p.fill(post_hidden[m], 100, 5, init.wrapping_add(1 + m as u64));
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("n_train and n_test must be at least 1".into()));
        }
        let [a, b] = self.model_prior;
        if !(a >= 0.0 && b >= 0.0) || ((a + b) - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("model_prior must be a probability vector, got {:?}", self.model_prior)));
        }
        self.classifier.validate("classifier")?;
        for (m, p) in self.posterior.iter().enumerate() {
            p.validate(&format!("posterior {m}"))?;
        }
        if self.kind.is_counts() {
            if self.counts.counts_per_sample < 2 {
                return Err(Error::Config("counts_per_sample must be at least 2".into()));
            }
            self.counts.grid.validate().map_err(|e| Error::Config(e.to_string()))?;
        } else if self.channels.pca_per_model == 0 {
            return Err(Error::Config("pca_per_model must be at least 1".into()));
        }
        if self.validation.levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Config("credible levels must lie in [0, 1]".into()));
        }
        if self.validation.prior_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("prior grid values must lie in [0, 1]".into()));
        }
        if self.baselines.rejection_budget == Some(0) {
            return Err(Error::Config("rejection budget must be positive".into()));
        }
        self.baselines.smc.validate()
    }

    pub fn network(&self, target: Target) -> NetworkSpec {
        match target {
            Target::Classifier => self.classifier.spec(),
            Target::Posterior(m) => self.posterior[m].spec(),
        }
    }

    pub fn count_spec(&self, model_prior: [f64; 2]) -> Result<CountModelSpec> {
        let k2 = match self.kind {
            ExperimentKind::CountsEasy => Scenario::Easy.k2(),
            ExperimentKind::CountsDifficult => Scenario::Difficult.k2(),
            ExperimentKind::Channels => return Err(Error::Config("channel experiments have no count model".into())),
        };
        CountModelSpec::for_k2(k2, self.counts.hyper, model_prior, self.counts.counts_per_sample)
    }

    pub fn channel_prior(&self) -> ChannelPrior {
        ChannelPrior {
            model_prior: self.model_prior,
            lo_factor: self.channels.lo_factor,
            hi_factor: self.channels.hi_factor,
            ..ChannelPrior::default()
        }
    }
}

/// Which network a training run produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Classifier,
    Posterior(usize),
}

impl Target {
    /// Parses `classifier` or `posterior:<model>`, where the model is an index
    /// or one of the experiment's model names.
    pub fn parse(s: &str, kind: ExperimentKind) -> Result<Self> {
        if s == "classifier" {
            return Ok(Target::Classifier);
        }
        let m = s
            .strip_prefix("posterior:")
            .ok_or_else(|| Error::Config(format!("unknown training target `{s}`")))?;
        let idx = match m.parse::<usize>() {
            Ok(i) => i,
            Err(_) => kind
                .model_names()
                .iter()
                .position(|n| *n == m)
                .ok_or_else(|| Error::Config(format!("unknown model `{m}`")))?,
        };
        if idx >= 2 {
            return Err(Error::Config(format!("model index {idx} out of range")));
        }
        Ok(Target::Posterior(idx))
    }

    pub fn file_stem(self) -> String {
        match self {
            Target::Classifier => "classifier".into(),
            Target::Posterior(m) => format!("posterior_{m}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_experiment_kind() {
        let c = ExperimentConfig::from_toml("kind = \"channels\"").unwrap();
        assert_eq!(c.network(Target::Classifier).train.epochs, 10);
        assert_eq!(c.network(Target::Posterior(0)).hidden, vec![30, 30]);
        let c = ExperimentConfig::from_toml("kind = \"counts_easy\"").unwrap();
        assert_eq!(c.network(Target::Classifier).train.epochs, 100);
        assert_eq!(c.network(Target::Posterior(1)).hidden, vec![10, 10]);
        assert_eq!((c.n_train, c.n_test), (100_000, 1000));
        assert_eq!(c.count_spec(c.model_prior).unwrap().nb_shape_prior.shape, 20.0);
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::from_toml("kind = \"counts_difficult\"\nn_train = 50\n[classifier]\nepochs = 3\n").unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
        assert_eq!(back.network(Target::Classifier).train.epochs, 3);
    }

    #[test]
    fn posterior_averaging_follows_epochs() {
        let c = ExperimentConfig::from_toml("kind = \"counts_easy\"\n[[posterior]]\nepochs = 5\n[[posterior]]\n").unwrap();
        assert_eq!(c.network(Target::Posterior(0)).train.average_epochs, 1);
        assert_eq!(c.network(Target::Posterior(1)).train.average_epochs, 20);
        assert_eq!(c.network(Target::Classifier).train.average_epochs, 0);
        let bad = "kind = \"counts_easy\"\n[[posterior]]\nepochs = 5\naverage_epochs = 6\n[[posterior]]\n";
        assert_eq!(ExperimentConfig::from_toml(bad).unwrap_err().class(), "config");
    }

    #[test]
    fn rejects_empty_datasets() {
        let e = ExperimentConfig::from_toml("kind = \"counts_easy\"\nn_train = 0").unwrap_err();
        assert_eq!(e.class(), "config");
        assert_eq!(ExperimentConfig::from_toml("kind = \"bogus\"").unwrap_err().class(), "config");
    }

    #[test]
    fn parses_targets() {
        let k = ExperimentKind::CountsEasy;
        assert_eq!(Target::parse("classifier", k).unwrap(), Target::Classifier);
        assert_eq!(Target::parse("posterior:nb", k).unwrap(), Target::Posterior(1));
        assert_eq!(Target::parse("posterior:0", k).unwrap(), Target::Posterior(0));
        assert_eq!(Target::parse("posterior:ks", ExperimentKind::Channels).unwrap(), Target::Posterior(1));
        assert!(Target::parse("posterior:7", k).is_err());
        assert!(Target::parse("mog", k).is_err());
    }
}
