//! Experiment recipes: dataset generation, training, prediction, validation
//! and baseline comparison driven by one [`ExperimentConfig`]. Every command
//! writes its resolved configuration to `<out>/logs/<command>.toml`.

mod config;

pub use config::{
    BaselineConfig, ChannelsConfig, CountsConfig, ExperimentConfig, ExperimentKind, NetworkConfig, NetworkSpec, Seeds, Target,
    ValidationConfig,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;

use crate::baselines::{smc_models, write_results_csv, ChannelProblem, ReferenceTable, ResultRow, SimulationModel, SmcConfig};
use crate::channels::{build_protocols_with, generate_channel_dataset, simulate_corpus, write_protocols};
use crate::counts::generate_count_dataset_with;
use crate::dataset::{classifier_view, posterior_view, read_dataset, write_dataset, DatasetMeta, LabeledSample};
use crate::error::{Error, Result};
use crate::features::{build_pca_basis, PcaBasis, ZScaler, N_COMPONENTS};
use crate::mdn::{train_with, FeedforwardNet, Head, Targets, TrainedNetwork, NETWORK_FORMAT_VERSION};
use crate::oracle::{model_posterior_exact, nb_grid_posterior, poisson_posterior};
use crate::par::{stream, Exec};
use crate::validation::{
    compare_methods, credible_coverage, eigen_check, normalized_kl, prior_consistency, quantile_check, CalibrationReport,
    MethodScore, MogMarginal, Reference,
};

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const PCA_FILE: &str = "pca.bin";
pub const PROTOCOL_FILE: &str = "protocols.txt";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const VALIDATION_DIR: &str = "validation";
pub const COMPARE_DIR: &str = "compare";
pub const REPORT_FILE: &str = "report.md";

/// Fits input (and, for mixture heads, parameter) scalers on `samples` and
/// trains the requested network.
pub fn train_network(samples: &[LabeledSample], target: Target, spec: &NetworkSpec, exec: Exec) -> Result<TrainedNetwork> {
    let (inputs, labels, params) = match target {
        Target::Classifier => {
            let (x, y) = classifier_view(samples);
            (x, y, Vec::new())
        }
        Target::Posterior(m) => {
            let (x, p) = posterior_view(samples, m);
            (x, Vec::new(), p)
        }
    };
    if inputs.is_empty() {
        return Err(Error::Input(format!("no training samples for {}", target.file_stem())));
    }
    let input_scaler = ZScaler::fit(&inputs)?;
    let xz = input_scaler.apply_rows(&inputs);
    let mut layers = vec![input_scaler.dim()];
    layers.extend(&spec.hidden);
    let mut rng = stream(spec.train.seed, 0);
    let (net, param_scaler, report) = match target {
        Target::Classifier => {
            let mut net = FeedforwardNet::init(&layers, Head::Classifier { n_models: 2 }, &mut rng)?;
            let r = train_with(&mut net, &xz, Targets::Labels(&labels), &spec.train, exec)?;
            (net, None, r)
        }
        Target::Posterior(_) => {
            let ps = ZScaler::fit(&params)?;
            let pz = ps.apply_rows(&params);
            let head = Head::Mog { components: spec.components, dim: ps.dim() };
            let mut net = FeedforwardNet::init(&layers, head, &mut rng)?;
            let r = train_with(&mut net, &xz, Targets::Params(&pz), &spec.train, exec)?;
            (net, Some(ps), r)
        }
    };
    Ok(TrainedNetwork {
        format_version: NETWORK_FORMAT_VERSION,
        net,
        input_scaler,
        param_scaler,
        train_config: spec.train.clone(),
        loss_trace: report.loss_trace,
    })
}

/// Exact posterior model probabilities of count samples.
pub fn exact_model_posteriors(cfg: &ExperimentConfig, samples: &[LabeledSample], exec: Exec) -> Result<Vec<Vec<f64>>> {
    let spec = cfg.count_spec(cfg.model_prior)?;
    exec.try_map(samples.len(), |i| model_posterior_exact(&samples[i].counts, &spec, &cfg.counts.grid))
}

fn prob_of_truth(probs: &[Vec<f64>], samples: &[LabeledSample]) -> Vec<f64> {
    probs.iter().zip(samples).map(|(p, s)| p[s.model_index]).collect()
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub exec: Exec,
}

impl Experiment {
    pub fn new(mut config: ExperimentConfig) -> Result<Self> {
        config.resolve();
        config.validate()?;
        Ok(Experiment { config, exec: Exec::default() })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn out(&self) -> &Path {
        &self.config.out_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn ensure_dir(&self, p: &Path) -> Result<()> {
        std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
    }

    fn log_config(&self, command: &str, extra: &str) -> Result<()> {
        let dir = self.path("logs");
        self.ensure_dir(&dir)?;
        let mut text = format!("# command: {command}\n");
        if !extra.is_empty() {
            writeln!(text, "# {extra}").unwrap();
        }
        text.push_str(&self.config.to_toml()?);
        let p = dir.join(format!("{command}.toml"));
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn require(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.exists() {
            return Err(Error::Input(format!("expected file {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn load_dataset(&self, name: &str) -> Result<Vec<LabeledSample>> {
        Ok(read_dataset(&self.require(name)?)?.0)
    }

    pub fn load_network(&self, target: Target) -> Result<TrainedNetwork> {
        TrainedNetwork::load(&self.require(&format!("{}.json", target.file_stem()))?)
    }

    fn channel_problem(&self) -> Result<ChannelProblem> {
        Ok(ChannelProblem {
            prior: self.config.channel_prior(),
            protocols: build_protocols_with(&self.config.channels.protocols),
            basis: PcaBasis::load(&self.require(PCA_FILE)?)?,
        })
    }

    /// Builds the PCA basis of a channel experiment from prior simulations.
    pub fn build_pca(&self) -> Result<PcaBasis> {
        let c = &self.config;
        if c.kind.is_counts() {
            return Err(Error::Config("build-pca applies to channel experiments only".into()));
        }
        self.ensure_dir(self.out())?;
        self.log_config("build-pca", "")?;
        let protocols = build_protocols_with(&c.channels.protocols);
        info!("simulating PCA corpus: {} draws per model", c.channels.pca_per_model);
        let corpus = simulate_corpus(&c.channel_prior(), &protocols, c.channels.pca_per_model, c.seeds.pca, self.exec)?;
        let basis = build_pca_basis(&corpus, N_COMPONENTS)?;
        basis.save(&self.path(PCA_FILE))?;
        let p = self.path(PROTOCOL_FILE);
        std::fs::write(&p, write_protocols(&protocols)).map_err(|e| Error::io(&p, e))?;
        Ok(basis)
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Vec<LabeledSample>> {
        let c = &self.config;
        if c.kind.is_counts() {
            generate_count_dataset_with(&c.count_spec(c.model_prior)?, n, seed, self.exec)
        } else {
            let problem = self.channel_problem()?;
            generate_channel_dataset(&problem.prior, &problem.protocols, &problem.basis, n, seed, self.exec)
        }
    }

    fn hyper_json(&self) -> serde_json::Value {
        let c = &self.config;
        if c.kind.is_counts() {
            serde_json::to_value(c.count_spec(c.model_prior).ok()).unwrap_or_default()
        } else {
            serde_json::to_value(c.channel_prior()).unwrap_or_default()
        }
    }

    /// Writes the training and test sets. Channel experiments build the PCA
    /// basis first when none exists.
    pub fn gen_data(&self) -> Result<()> {
        let c = &self.config;
        self.ensure_dir(self.out())?;
        self.log_config("gen-data", "")?;
        if !c.kind.is_counts() && !self.path(PCA_FILE).exists() {
            self.build_pca()?;
        }
        for (name, n, seed) in [(TRAIN_FILE, c.n_train, c.seeds.train_data), (TEST_FILE, c.n_test, c.seeds.test_data)] {
            info!("generating {name}: {n} samples, seed {seed}");
            let samples = self.generate(n, seed)?;
            let meta = DatasetMeta::describe(c.kind.name(), c.kind.name(), seed, &samples, self.hyper_json());
            write_dataset(&self.path(name), &samples, &meta)?;
        }
        Ok(())
    }

    /// Trains one network on the training set and writes it together with its
    /// per-epoch loss.
    pub fn train(&self, target: Target) -> Result<TrainedNetwork> {
        self.log_config(&format!("train-{}", target.file_stem()), "")?;
        let samples = self.load_dataset(TRAIN_FILE)?;
        let spec = self.config.network(target);
        info!("training {} for {} epochs", target.file_stem(), spec.train.epochs);
        let net = train_network(&samples, target, &spec, self.exec)?;
        let stem = target.file_stem();
        net.save(&self.path(&format!("{stem}.json")))?;
        let mut loss = String::from("epoch,loss\n");
        net.loss_trace.iter().enumerate().for_each(|(i, l)| writeln!(loss, "{},{l}", i + 1).unwrap());
        let p = self.path(&format!("{stem}.loss.csv"));
        std::fs::write(&p, loss).map_err(|e| Error::io(&p, e))?;
        Ok(net)
    }

    /// Model probabilities and, where posterior networks exist, per-model
    /// posterior means for every test point.
    pub fn predict(&self) -> Result<()> {
        self.log_config("predict", "")?;
        let test = self.load_dataset(TEST_FILE)?;
        let cls = self.load_network(Target::Classifier)?;
        let posts: Vec<(usize, TrainedNetwork)> = (0..2)
            .filter(|m| self.path(&format!("{}.json", Target::Posterior(*m).file_stem())).exists())
            .map(|m| Ok((m, self.load_network(Target::Posterior(m))?)))
            .collect::<Result<_>>()?;
        let dims = self.config.kind.param_dims();
        let mut out = String::from("test_point,true_model,p_model0,p_model1");
        for (m, _) in &posts {
            (0..dims[*m]).for_each(|i| write!(out, ",mean_{m}_{i}").unwrap());
        }
        out.push('\n');
        let rows = self.exec.try_map(test.len(), |i| {
            let s = &test[i];
            let p = cls.predict_models(&s.summary)?;
            let mut line = format!("{i},{},{},{}", s.model_index, p[0], p[1]);
            for (_, net) in &posts {
                net.predict_posterior(&s.summary)?.mean().iter().for_each(|v| write!(line, ",{v}").unwrap());
            }
            Ok::<_, Error>(line)
        })?;
        rows.iter().for_each(|r| writeln!(out, "{r}").unwrap());
        let p = self.path(PREDICTIONS_FILE);
        std::fs::write(&p, out).map_err(|e| Error::io(&p, e))
    }

    /// Runs the diagnostic suite on the test set and writes the report.
    pub fn validate(&self) -> Result<CalibrationReport> {
        self.log_config("validate", "")?;
        let c = &self.config;
        let test = self.load_dataset(TEST_FILE)?;
        let cls = self.load_network(Target::Classifier)?;
        let probs = self.exec.try_map(test.len(), |i| cls.predict_models(&test[i].summary))?;
        let labels: Vec<usize> = test.iter().map(|s| s.model_index).collect();
        let mut report = CalibrationReport { levels: c.validation.levels.clone(), ..Default::default() };
        let methods = vec![("mdn".to_string(), probs.iter().cloned().map(Some).collect::<Vec<_>>())];
        let mut scores = compare_methods(&methods, Reference::Labels(&labels))?;
        report.metrics.insert("classifier_cross_entropy".into(), scores[0].cross_entropy.unwrap_or(f64::NAN));
        let truth_p = prob_of_truth(&probs, &test);
        let confident = truth_p.iter().filter(|&&p| p > 0.9).count() as f64 / test.len() as f64;
        report.metrics.insert("fraction_true_model_above_0.9".into(), confident);
        if c.kind.is_counts() {
            let exact = exact_model_posteriors(c, &test, self.exec)?;
            let mae = compare_methods(&methods, Reference::Exact(&exact))?;
            scores[0].mae = mae[0].mae;
            report.metrics.insert("classifier_mae".into(), mae[0].mae.unwrap_or(f64::NAN));
            self.validate_counts(&test, &mut report)?;
        } else {
            self.validate_channels(&test, &mut report)?;
        }
        report.methods = scores;
        if let Some(v) = report.ks_statistic {
            report.metrics.insert("ks_statistic".into(), v);
        }
        if let Some(v) = report.ks_critical_1pct {
            report.metrics.insert("ks_critical_1pct".into(), v);
        }
        if let Some(v) = report.median_normalized_kl() {
            report.metrics.insert("median_normalized_kl".into(), v);
        }
        if let Some(v) = report.median_eigen_angle() {
            report.metrics.insert("median_eigen_angle_deg".into(), v);
        }
        report.write(&self.path(VALIDATION_DIR))?;
        Ok(report)
    }

    fn validate_counts(&self, test: &[LabeledSample], report: &mut CalibrationReport) -> Result<()> {
        let c = &self.config;
        let spec = c.count_spec(c.model_prior)?;
        let v = &c.validation;
        if self.path("posterior_0.json").exists() {
            let net = self.load_network(Target::Posterior(0))?;
            let pts: Vec<&LabeledSample> = test.iter().filter(|s| s.model_index == 0).collect();
            let rows = self.exec.try_map(pts.len(), |i| {
                let s = pts[i];
                let exact = poisson_posterior(&s.counts, &spec.poisson_rate_prior)?;
                let est = MogMarginal::new(&net.predict_posterior(&s.summary)?, 0);
                let nkl = normalized_kl(&exact, &est, &spec.poisson_rate_prior, v.kl)?;
                Ok::<_, Error>((est, nkl))
            })?;
            let truths: Vec<f64> = pts.iter().map(|s| s.params[0]).collect();
            let margs: Vec<&MogMarginal> = rows.iter().map(|r| &r.0).collect();
            if !margs.is_empty() {
                report.add_quantiles(quantile_check(&margs, &truths)?);
                report.coverage = credible_coverage(&margs, &truths, &v.levels)?;
            }
            report.normalized_kl = rows.iter().map(|r| r.1).collect();
        }
        if self.path("posterior_1.json").exists() && v.eigen_cases > 0 {
            let net = self.load_network(Target::Posterior(1))?;
            let pts: Vec<&LabeledSample> = test.iter().filter(|s| s.model_index == 1).take(v.eigen_cases).collect();
            report.eigen_angles = self.exec.try_map(pts.len(), |i| {
                let s = pts[i];
                let grid = nb_grid_posterior(&s.counts, &spec.nb_shape_prior, &spec.nb_scale_prior, &c.counts.grid)?;
                let mut rng = stream(c.seeds.validation, i as u64);
                let exact: Vec<[f64; 2]> = grid.sample(v.eigen_draws, &mut rng).into_iter().map(|(k, t)| [k, t]).collect();
                let q = net.predict_posterior(&s.summary)?;
                Ok::<_, Error>(eigen_check(&exact, &q, v.eigen_draws, &mut rng)?.angle_deg)
            })?;
        }
        if !v.prior_grid.is_empty() {
            let n_train = v.prior_n_train.unwrap_or(c.n_train);
            let n_test = v.prior_n_test.unwrap_or(c.n_test);
            let mut idx = 0u64;
            report.prior_consistency = prior_consistency(&v.prior_grid, |prior| {
                idx += 1;
                let spec = c.count_spec([prior, 1.0 - prior])?;
                let train = generate_count_dataset_with(&spec, n_train, c.seeds.train_data.wrapping_add(1000 * idx), self.exec)?;
                let test = generate_count_dataset_with(&spec, n_test, c.seeds.test_data.wrapping_add(1000 * idx), self.exec)?;
                let net = train_network(&train, Target::Classifier, &c.network(Target::Classifier), self.exec)?;
                self.exec.try_map(test.len(), |i| Ok(net.predict_models(&test[i].summary)?[0]))
            })?;
        }
        Ok(())
    }

    fn validate_channels(&self, test: &[LabeledSample], report: &mut CalibrationReport) -> Result<()> {
        let v = &self.config.validation;
        let mut quantiles = Vec::new();
        let mut coverage_hits: Vec<f64> = vec![0.0; v.levels.len()];
        let mut n = 0usize;
        for m in 0..2 {
            if !self.path(&format!("posterior_{m}.json")).exists() {
                continue;
            }
            let net = self.load_network(Target::Posterior(m))?;
            let pts: Vec<&LabeledSample> = test.iter().filter(|s| s.model_index == m).collect();
            let qs = self.exec.try_map(pts.len(), |i| net.predict_posterior(&pts[i].summary))?;
            for dim in 0..self.config.kind.param_dims()[m] {
                let margs: Vec<MogMarginal> = qs.iter().map(|q| MogMarginal::new(q, dim)).collect();
                let refs: Vec<&MogMarginal> = margs.iter().collect();
                let truths: Vec<f64> = pts.iter().map(|s| s.params[dim]).collect();
                if truths.is_empty() {
                    continue;
                }
                quantiles.extend(quantile_check(&refs, &truths)?.quantiles);
                for (h, c) in coverage_hits.iter_mut().zip(credible_coverage(&refs, &truths, &v.levels)?) {
                    *h += c * truths.len() as f64;
                }
                n += truths.len();
            }
        }
        if n > 0 {
            let q = crate::validation::QuantileCheck {
                ks_statistic: crate::validation::ks_uniform(&quantiles),
                ks_critical_1pct: crate::validation::ks_critical(quantiles.len(), 0.01),
                quantiles,
            };
            report.add_quantiles(q);
            report.coverage = coverage_hits.iter().map(|h| h / n as f64).collect();
        }
        Ok(())
    }

    /// MDN, rejection and SMC model probabilities on the test set.
    pub fn compare(&self) -> Result<Vec<MethodScore>> {
        self.log_config("compare", "")?;
        let c = &self.config;
        let train = self.load_dataset(TRAIN_FILE)?;
        let test = self.load_dataset(TEST_FILE)?;
        let cls = self.load_network(Target::Classifier)?;
        let dir = self.path(COMPARE_DIR);
        self.ensure_dir(&dir)?;

        let mdn = self.exec.try_map(test.len(), |i| cls.predict_models(&test[i].summary))?;
        let budget = c.baselines.rejection_budget.unwrap_or(c.n_train);
        let reference = if budget <= train.len() {
            train[..budget].to_vec()
        } else {
            self.generate(budget, c.seeds.baseline)?
        };
        let scaler = ZScaler::fit(&reference.iter().map(|s| s.summary.clone()).collect::<Vec<_>>())?;
        let table = ReferenceTable::from_samples(&reference, scaler.clone(), 2);
        let tol = c.baselines.rejection_tolerance;
        let rej: Vec<Option<Vec<f64>>> = self.exec.map(test.len(), |i| table.model_estimate(&test[i].summary, tol).estimate);

        let smc_n = c.baselines.smc_points.min(test.len());
        let smc_cfg = SmcConfig { max_simulations: c.baselines.smc.max_simulations.min(budget), ..c.baselines.smc.clone() };
        let sim: Box<dyn SimulationModel> =
            if c.kind.is_counts() { Box::new(c.count_spec(c.model_prior)?) } else { Box::new(self.channel_problem()?) };
        let mut smc = Vec::with_capacity(smc_n);
        let mut smc_budget = Vec::with_capacity(smc_n);
        for (i, s) in test.iter().take(smc_n).enumerate() {
            let cfg = SmcConfig { seed: c.baselines.smc.seed.wrapping_add(c.seeds.baseline).wrapping_add(i as u64), ..smc_cfg.clone() };
            let r = smc_models(sim.as_ref(), &s.summary, &scaler, &cfg, self.exec)?;
            smc_budget.push(r.simulations);
            smc.push(r.estimate().map(<[f64]>::to_vec));
        }

        let mut rows = Vec::new();
        for (i, p) in mdn.iter().enumerate() {
            rows.push(ResultRow { method: "mdn".into(), test_point: i, estimate: Some(p.clone()), budget: c.n_train, seed: c.seeds.init });
        }
        for (i, p) in rej.iter().enumerate() {
            rows.push(ResultRow { method: "rejection".into(), test_point: i, estimate: p.clone(), budget, seed: c.seeds.train_data });
        }
        for (i, p) in smc.iter().enumerate() {
            rows.push(ResultRow { method: "smc".into(), test_point: i, estimate: p.clone(), budget: smc_budget[i], seed: smc_cfg.seed });
        }
        write_results_csv(&dir.join("results.csv"), &rows, 2)?;

        let labels: Vec<usize> = test.iter().map(|s| s.model_index).collect();
        let exact = if c.kind.is_counts() { Some(exact_model_posteriors(c, &test, self.exec)?) } else { None };
        let wrap = |v: &[Vec<f64>]| v.iter().cloned().map(Some).collect::<Vec<_>>();
        let full = vec![("mdn".to_string(), wrap(&mdn)), ("rejection".to_string(), rej.clone())];
        let subset = vec![("mdn_smc_points".to_string(), wrap(&mdn[..smc_n])), ("smc".to_string(), smc)];
        let mut scores = score(&full, &labels, exact.as_deref())?;
        if smc_n > 0 {
            scores.extend(score(&subset, &labels[..smc_n], exact.as_ref().map(|e| &e[..smc_n]))?);
        }
        let p = dir.join("methods.json");
        let json = serde_json::to_string_pretty(&scores).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
        let mut csv = String::from("method,mae,cross_entropy,n_undefined\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        scores
            .iter()
            .for_each(|s| writeln!(csv, "{},{},{},{}", s.method, opt(s.mae), opt(s.cross_entropy), s.n_undefined).unwrap());
        let p = dir.join("methods.csv");
        std::fs::write(&p, csv).map_err(|e| Error::io(&p, e))?;
        Ok(scores)
    }

    /// Summarizes validation and comparison outputs as Markdown.
    pub fn report(&self) -> Result<String> {
        self.log_config("report", "")?;
        let rp = self.require(&format!("{VALIDATION_DIR}/report.json"))?;
        let text = std::fs::read_to_string(&rp).map_err(|e| Error::io(&rp, e))?;
        let report: CalibrationReport = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", rp.display())))?;
        let mut out = format!("# {} experiment\n\n## Metrics\n\n| metric | value |\n|---|---|\n", self.config.kind.name());
        for (k, v) in &report.metrics {
            writeln!(out, "| {k} | {v:.6} |").unwrap();
        }
        if !report.coverage.is_empty() {
            out.push_str("\n## Credible coverage\n\n| level | coverage |\n|---|---|\n");
            for (l, c) in report.levels.iter().zip(&report.coverage) {
                writeln!(out, "| {l} | {c:.4} |").unwrap();
            }
        }
        if !report.prior_consistency.is_empty() {
            out.push_str("\n## Prior consistency\n\n| prior | mean posterior |\n|---|---|\n");
            for p in &report.prior_consistency {
                writeln!(out, "| {} | {:.4} |", p.prior, p.mean_posterior).unwrap();
            }
        }
        let mp = self.path(&format!("{COMPARE_DIR}/methods.json"));
        if mp.exists() {
            let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
            let scores: Vec<MethodScore> = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", mp.display())))?;
            out.push_str("\n## Methods\n\n| method | MAE | cross-entropy | undefined |\n|---|---|---|---|\n");
            let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
            for s in scores {
                writeln!(out, "| {} | {} | {} | {} |", s.method, f(s.mae), f(s.cross_entropy), s.n_undefined).unwrap();
            }
        }
        let p = self.path(REPORT_FILE);
        std::fs::write(&p, &out).map_err(|e| Error::io(&p, e))?;
        Ok(out)
    }
}

/// Cross-entropy against labels plus, when available, MAE against exact
/// posteriors.
fn score(methods: &[(String, Vec<Option<Vec<f64>>>)], labels: &[usize], exact: Option<&[Vec<f64>]>) -> Result<Vec<MethodScore>> {
    let mut s = compare_methods(methods, Reference::Labels(labels))?;
    if let Some(e) = exact {
        for (a, b) in s.iter_mut().zip(compare_methods(methods, Reference::Exact(e))?) {
            a.mae = b.mae;
        }
    }
    Ok(s)
}
