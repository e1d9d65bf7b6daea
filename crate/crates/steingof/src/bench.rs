//! Benchmark harness: experiment configs, trial generation, and error-rate
//! aggregation, plus the score diagnostic behind the `score-check` CLI.
//!
//! Each trial flips a fair coin between the null (the hypothesized model is
//! the data model) and the alternative (the hypothesized model is a noised
//! copy). Data always comes from the data model, every configured method
//! judges the same sample, and correctness lands in separate type-I and
//! type-II tallies. All randomness derives from the master seed through
//! counter substreams keyed on (cell, trial, method), so trials run in a
//! work pool without changing a single output byte.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{gibbs_sampler, ks_test_model, lr_oracle_test, mmd_bootstrap_test};
use crate::error::{Error, Result};
use crate::htest::{ksd_bootstrap_test, ksd_linear_test, ksd_spectral_test, LinearScaling};
use crate::kernel::Bandwidth;
use crate::model::{
    perturb, GbRbmSpec, GmmSpec, Model, ModelSpec, PerturbTarget, PerturbationSpec, ScoreModel,
    EXACT_ENUMERATION_MAX_HIDDEN,
};
use crate::numeric::central_fd_gradient;
use crate::report::{Decision, TestReport};
use crate::rng::{derive_seed, substream};
use crate::sample::SampleSet;

const DOMAIN_MODEL: u64 = 10;
const DOMAIN_COIN: u64 = 11;
const DOMAIN_PERTURB: u64 = 12;
const DOMAIN_DATA: u64 = 13;
const DOMAIN_METHOD: u64 = 14;
const DOMAIN_MODEL_DRAW: u64 = 15;
const DOMAIN_SCORE_CHECK: u64 = 16;

pub const SCORE_CHECK_TOLERANCE: f64 = 1e-4;
const SCORE_CHECK_FD_STEP: f64 = 1e-5;

const CSV_HEADER: &str = "family,method,sigma_per,n,trials,error_rate,type1_rate,type2_rate,errors\n";

/// Experiment family: which generator produces the data model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gmm,
    Gbrbm,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Gmm => "gmm",
            Family::Gbrbm => "gbrbm",
        }
    }
}

/// A test method as named in configs and reports. The MMD variants carry
/// the model-sample size n'.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodSpec {
    KsdBootstrap,
    KsdLinear,
    KsdSpectral,
    MmdMc(usize),
    MmdMcmc(usize),
    LrOracle,
    Ks,
}

impl MethodSpec {
    fn supports(&self, family: Family) -> bool {
        match self {
            MethodSpec::Ks => family == Family::Gmm,
            MethodSpec::MmdMcmc(_) => family == Family::Gbrbm,
            _ => true,
        }
    }

    fn uses_bootstrap(&self) -> bool {
        matches!(self, MethodSpec::KsdBootstrap | MethodSpec::MmdMc(_) | MethodSpec::MmdMcmc(_))
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::KsdBootstrap => write!(f, "ksd-bootstrap"),
            MethodSpec::KsdLinear => write!(f, "ksd-linear"),
            MethodSpec::KsdSpectral => write!(f, "ksd-spectral"),
            MethodSpec::MmdMc(n) => write!(f, "mmd-mc({n})"),
            MethodSpec::MmdMcmc(n) => write!(f, "mmd-mcmc({n})"),
            MethodSpec::LrOracle => write!(f, "lr-oracle"),
            MethodSpec::Ks => write!(f, "ks"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_count = |inner: &str| -> Result<usize> {
            let n: usize = inner
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad MMD sample count {inner:?} in {s:?}")))?;
            if n < 2 {
                return Err(Error::InvalidInput(format!(
                    "MMD needs at least 2 model draws, got {n} in {s:?}"
                )));
            }
            Ok(n)
        };
        match s {
            "ksd-bootstrap" => Ok(MethodSpec::KsdBootstrap),
            "ksd-linear" => Ok(MethodSpec::KsdLinear),
            "ksd-spectral" => Ok(MethodSpec::KsdSpectral),
            "lr-oracle" => Ok(MethodSpec::LrOracle),
            "ks" => Ok(MethodSpec::Ks),
            other => {
                if let Some(inner) = other.strip_prefix("mmd-mcmc(").and_then(|r| r.strip_suffix(')')) {
                    Ok(MethodSpec::MmdMcmc(parse_count(inner)?))
                } else if let Some(inner) = other.strip_prefix("mmd-mc(").and_then(|r| r.strip_suffix(')')) {
                    Ok(MethodSpec::MmdMc(parse_count(inner)?))
                } else {
                    Err(Error::InvalidInput(format!("unknown method {other:?}")))
                }
            }
        }
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

/// One perturbation target swept over a list of noise scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSweep {
    pub target: PerturbTarget,
    pub sigma_per: Vec<f64>,
}

fn default_n_sweep() -> Vec<usize> {
    vec![100]
}

fn default_trials() -> usize {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_bootstrap_m() -> usize {
    1000
}

fn default_spectral_draws() -> usize {
    100_000
}

fn default_gmm_components() -> usize {
    5
}

fn default_gmm_variance() -> f64 {
    1.0
}

fn default_rbm_visible() -> usize {
    50
}

fn default_rbm_hidden() -> usize {
    10
}

fn default_gibbs_burn_in() -> usize {
    1000
}

fn default_gibbs_thinning() -> usize {
    1
}

/// Declarative benchmark description. Every omitted field takes the
/// standard study value, so a config file documents exactly its deviations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub perturbation: PerturbationSweep,
    #[serde(default = "default_n_sweep")]
    pub n_sweep: Vec<usize>,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_bootstrap_m")]
    pub bootstrap_m: usize,
    pub master_seed: u64,
    /// Fixed kernel bandwidth; omitted means the median heuristic.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_spectral_draws")]
    pub spectral_draws: usize,
    /// Draw a fresh data model every trial instead of one per experiment.
    #[serde(default)]
    pub redraw_model_per_trial: bool,
    #[serde(default = "default_gmm_components")]
    pub gmm_components: usize,
    #[serde(default = "default_gmm_variance")]
    pub gmm_variance: f64,
    #[serde(default = "default_rbm_visible")]
    pub rbm_visible: usize,
    #[serde(default = "default_rbm_hidden")]
    pub rbm_hidden: usize,
    #[serde(default = "default_gibbs_burn_in")]
    pub gibbs_burn_in: usize,
    #[serde(default = "default_gibbs_thinning")]
    pub gibbs_thinning: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn bandwidth_policy(&self) -> Bandwidth {
        self.bandwidth.map_or(Bandwidth::Median, Bandwidth::Fixed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("methods must be nonempty".into()));
        }
        if self.perturbation.sigma_per.is_empty() {
            return Err(Error::InvalidInput("sigma_per sweep must be nonempty".into()));
        }
        for &s in &self.perturbation.sigma_per {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "perturbation scales must be nonnegative and finite, got {s}"
                )));
            }
        }
        if self.n_sweep.is_empty() {
            return Err(Error::InvalidInput("n_sweep must be nonempty".into()));
        }
        let min_n = if self.methods.contains(&MethodSpec::KsdLinear) { 4 } else { 2 };
        for &n in &self.n_sweep {
            if n < min_n {
                return Err(Error::InvalidInput(format!(
                    "sample size {n} is below the minimum {min_n} for the configured methods"
                )));
            }
        }
        let target_ok = matches!(
            (self.family, self.perturbation.target),
            (
                Family::Gmm,
                PerturbTarget::GmmMean | PerturbTarget::GmmLogWeight | PerturbTarget::GmmLogVariance
            ) | (Family::Gbrbm, PerturbTarget::RbmCoupling)
        );
        if !target_ok {
            return Err(Error::InvalidInput(format!(
                "perturbation target {} does not apply to family {}",
                self.perturbation.target.as_str(),
                self.family.as_str()
            )));
        }
        for method in &self.methods {
            if !method.supports(self.family) {
                return Err(Error::InvalidInput(format!(
                    "method {method} does not support family {}",
                    self.family.as_str()
                )));
            }
        }
        if self.methods.iter().any(MethodSpec::uses_bootstrap) && self.bootstrap_m < 100 {
            return Err(Error::InvalidInput(format!(
                "bootstrap_m must be at least 100, got {}",
                self.bootstrap_m
            )));
        }
        if self.methods.contains(&MethodSpec::KsdSpectral) && self.spectral_draws < 100 {
            return Err(Error::InvalidInput(format!(
                "spectral_draws must be at least 100, got {}",
                self.spectral_draws
            )));
        }
        if let Some(h) = self.bandwidth {
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "bandwidth must be positive and finite, got {h}"
                )));
            }
        }
        match self.family {
            Family::Gmm => {
                if self.gmm_components == 0 {
                    return Err(Error::InvalidInput("gmm_components must be at least 1".into()));
                }
                if !self.gmm_variance.is_finite() || self.gmm_variance <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "gmm_variance must be positive and finite, got {}",
                        self.gmm_variance
                    )));
                }
            }
            Family::Gbrbm => {
                if self.rbm_visible == 0 || self.rbm_hidden == 0 {
                    return Err(Error::InvalidInput("RBM dimensions must be at least 1".into()));
                }
                // Exact data sampling and the oracle both enumerate hidden
                // states, so the benchmark caps the hidden width.
                if self.rbm_hidden > EXACT_ENUMERATION_MAX_HIDDEN {
                    return Err(Error::Capacity(format!(
                        "rbm_hidden {} exceeds the exact enumeration cap of {}",
                        self.rbm_hidden, EXACT_ENUMERATION_MAX_HIDDEN
                    )));
                }
            }
        }
        if self.gibbs_thinning == 0 {
            return Err(Error::InvalidInput("gibbs_thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which hypothesis a trial's coin selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Null,
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeStatus {
    Ok,
    Error,
}

/// One method's result inside a trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    pub seed: u64,
    pub status: OutcomeStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// One benchmark trial, complete enough to replay offline: the realized
/// hypothesized spec, the data seed, and every method seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: usize,
    pub sigma_per: f64,
    pub hypothesis: Hypothesis,
    pub q_spec: ModelSpec,
    /// Data model, recorded only when it is redrawn per trial; otherwise
    /// the manifest's base model applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_spec: Option<ModelSpec>,
    pub data_seed: u64,
    pub methods: Vec<MethodOutcome>,
}

/// One aggregated sweep cell for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub family: String,
    pub method: String,
    pub sigma_per: f64,
    pub n: usize,
    /// Trials that produced a decision; errored trials are excluded.
    pub trials: usize,
    pub error_rate: f64,
    pub type1_rate: f64,
    pub type2_rate: f64,
    /// Trials excluded because the method returned an error.
    pub errors: usize,
}

impl RateRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}\n",
            self.family,
            self.method,
            self.sigma_per,
            self.n,
            self.trials,
            self.error_rate,
            self.type1_rate,
            self.type2_rate,
            self.errors
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    config: ExperimentConfig,
    model_mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_model: Option<ModelSpec>,
}

/// In-process view of a finished benchmark.
#[derive(Debug, Clone)]
pub struct BenchmarkSummary {
    pub rows: Vec<RateRow>,
    pub base_spec: Option<ModelSpec>,
}

impl BenchmarkSummary {
    /// Looks up the cell for (method, sigma_per, n); sweep values compare
    /// exactly because they come from the same config.
    pub fn row(&self, method: &MethodSpec, sigma_per: f64, n: usize) -> Option<&RateRow> {
        let name = method.to_string();
        self.rows
            .iter()
            .find(|r| r.method == name && r.sigma_per == sigma_per && r.n == n)
    }
}

fn draw_base_spec(config: &ExperimentConfig, rng: &mut rand_chacha::ChaCha8Rng) -> Result<ModelSpec> {
    match config.family {
        Family::Gmm => {
            let k = config.gmm_components;
            let means: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();
            Ok(ModelSpec::Gmm(GmmSpec::univariate(
                vec![1.0 / k as f64; k],
                means,
                config.gmm_variance,
            )))
        }
        Family::Gbrbm => {
            let d = config.rbm_visible;
            let dp = config.rbm_hidden;
            let coupling: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..dp).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
                .collect();
            let b: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let c: Vec<f64> = (0..dp).map(|_| rng.sample(StandardNormal)).collect();
            Ok(ModelSpec::Gbrbm(GbRbmSpec { coupling, b, c }))
        }
    }
}

fn run_method(
    method: &MethodSpec,
    config: &ExperimentConfig,
    model_p: &Model,
    model_q: &Model,
    sample: &SampleSet,
    seed: u64,
) -> Result<TestReport> {
    let bandwidth = config.bandwidth_policy();
    match method {
        MethodSpec::KsdBootstrap => {
            ksd_bootstrap_test(model_q, bandwidth, sample, config.alpha, config.bootstrap_m, seed)
        }
        MethodSpec::KsdLinear => {
            ksd_linear_test(model_q, bandwidth, sample, config.alpha, LinearScaling::default())
        }
        MethodSpec::KsdSpectral => {
            ksd_spectral_test(model_q, bandwidth, sample, config.alpha, config.spectral_draws, seed)
        }
        MethodSpec::MmdMc(m) => {
            let y = model_q.sample(*m, &mut substream(seed, &[DOMAIN_MODEL_DRAW]))?;
            mmd_bootstrap_test(bandwidth, sample, &y, config.alpha, config.bootstrap_m, seed)
        }
        MethodSpec::MmdMcmc(m) => {
            let rbm = model_q.as_gbrbm().ok_or_else(|| {
                Error::Unsupported(format!("mmd-mcmc needs a gbrbm model, got {}", model_q.label()))
            })?;
            let thin = config.gibbs_thinning;
            let chain = gibbs_sampler(
                rbm,
                m * thin,
                config.gibbs_burn_in,
                &mut substream(seed, &[DOMAIN_MODEL_DRAW]),
            )?;
            let rows: Vec<Vec<f64>> =
                (0..*m).map(|i| chain.row(i * thin + thin - 1).to_vec()).collect();
            let y = SampleSet::from_rows(&rows)?;
            mmd_bootstrap_test(bandwidth, sample, &y, config.alpha, config.bootstrap_m, seed)
        }
        MethodSpec::LrOracle => lr_oracle_test(model_p, model_q, sample, config.alpha),
        MethodSpec::Ks => ks_test_model(model_q, sample, config.alpha),
    }
}

fn run_trial(
    config: &ExperimentConfig,
    base: Option<&(ModelSpec, Model)>,
    sigma: f64,
    n: usize,
    cell: u64,
    trial: u64,
) -> Result<TrialRecord> {
    let master = config.master_seed;
    let owned;
    let (p_spec, p_model): (&ModelSpec, &Model) = match base {
        Some((spec, model)) => (spec, model),
        None => {
            let spec =
                draw_base_spec(config, &mut substream(master, &[DOMAIN_MODEL, cell, trial]))?;
            let model = spec.build()?;
            owned = (spec, model);
            (&owned.0, &owned.1)
        }
    };
    let alternative = substream(master, &[DOMAIN_COIN, cell, trial]).random::<bool>();
    let (q_spec, q_model) = if alternative {
        let pseed = derive_seed(master, &[DOMAIN_PERTURB, cell, trial]);
        let pert = PerturbationSpec {
            target: config.perturbation.target,
            magnitude: sigma,
            rng_seed: pseed,
        };
        let spec = perturb(p_spec, &pert, &mut substream(pseed, &[0]))?;
        let model = spec.build()?;
        (spec, model)
    } else {
        (p_spec.clone(), p_model.clone())
    };
    let data_seed = derive_seed(master, &[DOMAIN_DATA, cell, trial]);
    let sample = p_model.sample(n, &mut substream(data_seed, &[0]))?;
    let hypothesis = if alternative { Hypothesis::Alternative } else { Hypothesis::Null };
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(mi, method)| {
            let seed = derive_seed(master, &[DOMAIN_METHOD, cell, trial, mi as u64]);
            match run_method(method, config, p_model, &q_model, &sample, seed) {
                Ok(report) => {
                    let correct = match hypothesis {
                        Hypothesis::Null => report.decision == Decision::Retain,
                        Hypothesis::Alternative => report.decision == Decision::Reject,
                    };
                    MethodOutcome {
                        method: method.to_string(),
                        seed,
                        status: OutcomeStatus::Ok,
                        decision: Some(report.decision),
                        statistic: Some(report.statistic),
                        p_value: report.p_value,
                        correct: Some(correct),
                        message: None,
                    }
                }
                Err(e) => MethodOutcome {
                    method: method.to_string(),
                    seed,
                    status: OutcomeStatus::Error,
                    decision: None,
                    statistic: None,
                    p_value: None,
                    correct: None,
                    message: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(TrialRecord {
        trial: trial as usize,
        n,
        sigma_per: sigma,
        hypothesis,
        q_spec,
        p_spec: base.is_none().then(|| p_spec.clone()),
        data_seed,
        methods,
    })
}

fn aggregate(
    config: &ExperimentConfig,
    method: &MethodSpec,
    mi: usize,
    sigma: f64,
    n: usize,
    records: &[TrialRecord],
) -> RateRow {
    let mut valid = 0usize;
    let mut errors = 0usize;
    let mut wrong = 0usize;
    let mut null_valid = 0usize;
    let mut type1 = 0usize;
    let mut alt_valid = 0usize;
    let mut type2 = 0usize;
    for record in records {
        let outcome = &record.methods[mi];
        match outcome.status {
            OutcomeStatus::Error => errors += 1,
            OutcomeStatus::Ok => {
                valid += 1;
                let correct = outcome.correct.unwrap_or(false);
                if !correct {
                    wrong += 1;
                }
                match record.hypothesis {
                    Hypothesis::Null => {
                        null_valid += 1;
                        if !correct {
                            type1 += 1;
                        }
                    }
                    Hypothesis::Alternative => {
                        alt_valid += 1;
                        if !correct {
                            type2 += 1;
                        }
                    }
                }
            }
        }
    }
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    RateRow {
        family: config.family.as_str().to_string(),
        method: method.to_string(),
        sigma_per: sigma,
        n,
        trials: valid,
        error_rate: rate(wrong, valid),
        type1_rate: rate(type1, null_valid),
        type2_rate: rate(type2, alt_valid),
        errors,
    }
}

/// Runs the configured sweep and writes `results.csv`, `trials.ndjson`, and
/// `manifest.json` into `out_dir`. Reruns with the same config are
/// byte-identical.
pub fn run_benchmark(config: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<BenchmarkSummary> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let base = if config.redraw_model_per_trial {
        None
    } else {
        let spec = draw_base_spec(config, &mut substream(config.master_seed, &[DOMAIN_MODEL]))?;
        let model = spec.build()?;
        Some((spec, model))
    };
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (si, &sigma) in config.perturbation.sigma_per.iter().enumerate() {
        for (ni, &n) in config.n_sweep.iter().enumerate() {
            let cell = (si * config.n_sweep.len() + ni) as u64;
            let records = (0..config.trials as u64)
                .into_par_iter()
                .map(|t| run_trial(config, base.as_ref(), sigma, n, cell, t))
                .collect::<Result<Vec<TrialRecord>>>()?;
            for record in &records {
                lines.push(serde_json::to_string(record)?);
            }
            for (mi, method) in config.methods.iter().enumerate() {
                rows.push(aggregate(config, method, mi, sigma, n, &records));
            }
        }
    }
    let mut csv = String::from(CSV_HEADER);
    for row in &rows {
        csv.push_str(&row.csv_line());
    }
    fs::write(out_dir.join("results.csv"), csv)?;
    fs::write(out_dir.join("trials.ndjson"), lines.join("\n") + "\n")?;
    let manifest = Manifest {
        config: config.clone(),
        model_mode: if config.redraw_model_per_trial {
            "redraw-per-trial"
        } else {
            "fixed-per-experiment"
        }
        .to_string(),
        base_model: base.as_ref().map(|(spec, _)| spec.clone()),
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(BenchmarkSummary { rows, base_spec: base.map(|(spec, _)| spec) })
}

/// Finite-difference audit of a model's score against its own density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreCheckReport {
    pub model_label: String,
    pub points: usize,
    pub max_rel_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
}

/// Compares the analytic score with central finite differences of the
/// unnormalized log density at random points. Points come from the model's
/// own sampler when it has one, otherwise from a standard normal.
pub fn score_check(model: &dyn ScoreModel, points: usize, seed: u64) -> Result<ScoreCheckReport> {
    if points == 0 {
        return Err(Error::InvalidInput("score check needs at least one point".into()));
    }
    let mut rng = substream(seed, &[DOMAIN_SCORE_CHECK]);
    let d = model.dim();
    let sample = match model.sample(points, &mut rng) {
        Ok(s) => s,
        Err(Error::Unsupported(_)) | Err(Error::Capacity(_)) => {
            let rows: Vec<Vec<f64>> = (0..points)
                .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            SampleSet::from_rows(&rows)?
        }
        Err(e) => return Err(e),
    };
    let mut worst = 0.0f64;
    for i in 0..sample.n() {
        let x = sample.row(i);
        let analytic = model.score(x)?;
        let fd = central_fd_gradient(|y| model.log_density_unnorm(y), x, SCORE_CHECK_FD_STEP)?;
        let scale = analytic.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let diff = analytic
            .iter()
            .zip(&fd)
            .fold(0.0f64, |acc, (s, g)| acc.max((s - g).abs()));
        worst = worst.max(diff / scale);
    }
    Ok(ScoreCheckReport {
        model_label: model.label().to_string(),
        points,
        max_rel_discrepancy: worst,
        tolerance: SCORE_CHECK_TOLERANCE,
        pass: worst < SCORE_CHECK_TOLERANCE,
        seed,
    })
}
