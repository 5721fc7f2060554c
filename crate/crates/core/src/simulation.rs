//! Negative binomial populations and Monte Carlo studies of the estimators.
//!
//! Replicate `i` of a study seeded with `s` draws from stream `i` of a
//! ChaCha8 generator seeded with `s`, so results do not depend on thread
//! scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{default_cutoff, estimate, Method};
use crate::freq::FrequencyTable;
use crate::nb::NbParams;
use crate::scalar::Scalar;
use crate::wls::WeightScheme;

/// Generator for replicate `index` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One draw from NB(k, p) as a gamma-mixed Poisson.
pub fn sample_nb<R: Rng + ?Sized>(nb: &NbParams<f64>, rng: &mut R) -> u32 {
    let gamma = Gamma::new(nb.k, (1.0 - nb.p) / nb.p).expect("valid gamma parameters");
    draw_mixed(&gamma, rng)
}

fn draw_mixed<R: Rng + ?Sized>(gamma: &Gamma<f64>, rng: &mut R) -> u32 {
    let lambda = gamma.sample(rng);
    if lambda.is_nan() || lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(p) => p.sample(rng) as u32,
        Err(_) => u32::MAX,
    }
}

/// A simulated population with the unobservable zero count kept aside.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// Nonzero counts; `None` when every unit drew zero.
    pub table: Option<FrequencyTable<f64>>,
    pub zeros: u64,
}

/// Draws `n` units from NB(k, p) and tabulates the nonzero counts.
pub fn sample_nb_population<R: Rng + ?Sized>(nb: &NbParams<f64>, n: u64, rng: &mut R) -> Population {
    let gamma = Gamma::new(nb.k, (1.0 - nb.p) / nb.p).expect("valid gamma parameters");
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    let mut zeros = 0;
    for _ in 0..n {
        match draw_mixed(&gamma, rng) {
            0 => zeros += 1,
            x => *counts.entry(x).or_default() += 1,
        }
    }
    let table = FrequencyTable::new(counts.into_iter().map(|(x, f)| (x, f as f64))).ok();
    Population { table, zeros }
}

/// How an estimator picks its truncation point on each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "MRuleRepr", into = "MRuleRepr")]
pub enum MRule {
    /// Regression methods: [`default_cutoff`]; Chao: 2; Chao–Bunge and ML:
    /// the largest observed count.
    #[default]
    Auto,
    /// The largest observed count.
    Max,
    Fixed(u32),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MRuleRepr {
    Int(u32),
    Str(String),
}

impl TryFrom<MRuleRepr> for MRule {
    type Error = String;

    fn try_from(r: MRuleRepr) -> Result<Self, Self::Error> {
        match r {
            MRuleRepr::Int(m) => Ok(MRule::Fixed(m)),
            MRuleRepr::Str(s) => s.parse(),
        }
    }
}

impl From<MRule> for MRuleRepr {
    fn from(r: MRule) -> Self {
        match r {
            MRule::Fixed(m) => MRuleRepr::Int(m),
            other => MRuleRepr::Str(other.to_string()),
        }
    }
}

impl fmt::Display for MRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MRule::Auto => f.write_str("auto"),
            MRule::Max => f.write_str("max"),
            MRule::Fixed(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for MRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(MRule::Auto),
            "max" => Ok(MRule::Max),
            other => other
                .parse()
                .map(MRule::Fixed)
                .map_err(|_| format!("invalid m `{s}` (expected auto, max or an integer)")),
        }
    }
}

impl MRule {
    pub fn resolve<T: Scalar>(self, method: Method, table: &FrequencyTable<T>) -> u32 {
        match self {
            MRule::Fixed(m) => m,
            MRule::Max => table.max_count(),
            MRule::Auto => match method {
                Method::Wlrm | Method::Hm => default_cutoff(table),
                Method::Chao => 2,
                Method::ChaoBunge | Method::ZtnbMl => table.max_count(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    #[serde(default)]
    pub m: MRule,
    #[serde(default)]
    pub weights: WeightScheme,
    /// Row name in the report; derived from the settings when absent.
    #[serde(default)]
    pub label: Option<String>,
}

impl EstimatorConfig {
    pub fn new(method: Method, m: MRule, weights: WeightScheme) -> Self {
        Self {
            method,
            m,
            weights,
            label: None,
        }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        if self.method.uses_weights() {
            format!("{} {} m={}", self.method, self.weights, self.m)
        } else {
            format!("{} m={}", self.method, self.m)
        }
    }

    /// Valid `(n_hat, se)` on one sample, or `None`.
    pub fn apply(&self, table: &FrequencyTable<f64>) -> Option<(f64, Option<f64>)> {
        let m = self.m.resolve(self.method, table);
        let est = estimate(table, self.method, m, self.weights).ok()?;
        est.valid_n_hat().map(|n| (n, est.se))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    #[default]
    Bias,
    Se,
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyKind::Bias => "bias",
            StudyKind::Se => "se",
        })
    }
}

/// A single simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub name: String,
    pub kind: StudyKind,
    pub n_true: u64,
    pub nb: NbParams<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorConfig>,
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidStudy("replicates must be at least 1".into()));
        }
        if self.n_true == 0 {
            return Err(Error::InvalidStudy("n_true must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidStudy("no estimators configured".into()));
        }
        NbParams::new(self.nb.k, self.nb.p)
            .map_err(|e| Error::InvalidStudy(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NbConfig {
    k: OneOrMany<f64>,
    p: Option<f64>,
    mu: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyConfig {
    name: String,
    #[serde(default)]
    kind: StudyKind,
    n_true: OneOrMany<u64>,
    replicates: usize,
    seed: u64,
    nb: NbConfig,
    estimators: Vec<EstimatorConfig>,
}

/// Parses a study file.
///
/// ```toml
/// name = "example"
/// kind = "bias"          # or "se"
/// n_true = [100, 1000]   # one value or a list
/// replicates = 1000
/// seed = 1
///
/// [nb]
/// mu = 1.0               # or p = 0.8
/// k = [1, 2]             # one value or a list
///
/// [[estimators]]
/// method = "WLRM"
/// weights = "diag"       # full | diag | identity
/// m = "auto"             # auto | max | integer
/// ```
///
/// Lists expand to one [`StudySpec`] per `(n_true, k)` pair, `n_true` outer.
pub fn parse_study_specs(text: &str) -> Result<Vec<StudySpec>> {
    let cfg: StudyConfig =
        toml::from_str(text).map_err(|e| Error::InvalidStudy(e.message().to_string()))?;
    let ks = cfg.nb.k.to_vec();
    let ns = cfg.n_true.to_vec();
    if ks.is_empty() || ns.is_empty() {
        return Err(Error::InvalidStudy("empty n_true or k list".into()));
    }
    let expand = ks.len() > 1 || ns.len() > 1;
    let mut specs = Vec::new();
    for &n_true in &ns {
        for &k in &ks {
            let nb = match (cfg.nb.p, cfg.nb.mu) {
                (Some(p), None) => NbParams::new(k, p),
                (None, Some(mu)) => NbParams::from_mean(mu, k),
                _ => {
                    return Err(Error::InvalidStudy(
                        "[nb] needs exactly one of `p` or `mu`".into(),
                    ))
                }
            }
            .map_err(|e| Error::InvalidStudy(e.to_string()))?;
            let name = if expand {
                format!("{}/N={n_true}/k={k}", cfg.name)
            } else {
                cfg.name.clone()
            };
            let spec = StudySpec {
                name,
                kind: cfg.kind,
                n_true,
                nb,
                replicates: cfg.replicates,
                seed: cfg.seed,
                estimators: cfg.estimators.clone(),
            };
            spec.validate()?;
            specs.push(spec);
        }
    }
    Ok(specs)
}

/// Per-estimator summary over the valid replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub method: Method,
    pub weights: WeightScheme,
    pub m_rule: MRule,
    pub valid: usize,
    pub failures: usize,
    pub mean_n_hat: Option<f64>,
    /// `mean(N̂) - N`.
    pub bias: Option<f64>,
    /// `mean((N̂ - mean N̂)²)`, so that `rmse² = bias² + variance`.
    pub variance: Option<f64>,
    pub rmse: Option<f64>,
    /// Sample standard deviation of N̂ (`R - 1` denominator).
    pub empirical_se: Option<f64>,
    /// `sqrt(mean(Var̂(N̂)))` over valid replicates reporting a standard error.
    pub mean_estimated_se: Option<f64>,
    pub mean_abs_rel_error: Option<f64>,
    /// Sample standard deviation of `|N̂/N - 1|`.
    pub sd_abs_rel_error: Option<f64>,
}

impl EstimatorSummary {
    /// `mean_estimated_se / empirical_se`.
    pub fn se_ratio(&self) -> Option<f64> {
        Some(self.mean_estimated_se? / self.empirical_se?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub name: String,
    pub kind: StudyKind,
    pub n_true: u64,
    pub nb: NbParams<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Replicates where no unit was observed.
    pub empty_samples: usize,
    pub estimators: Vec<EstimatorSummary>,
}

pub const REPORT_CSV_HEADER: [&str; 23] = [
    "study",
    "kind",
    "n_true",
    "k",
    "p",
    "mu",
    "replicates",
    "seed",
    "estimator",
    "method",
    "weights",
    "m",
    "valid",
    "failures",
    "mean_n_hat",
    "bias",
    "variance",
    "rmse",
    "empirical_se",
    "mean_estimated_se",
    "se_ratio",
    "mean_abs_rel_error",
    "sd_abs_rel_error",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

impl StudyReport {
    pub fn get(&self, label: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.label == label)
    }

    /// CSV records (without header), one per estimator.
    pub fn csv_records(&self) -> Vec<Vec<String>> {
        self.estimators
            .iter()
            .map(|e| {
                vec![
                    self.name.clone(),
                    self.kind.to_string(),
                    self.n_true.to_string(),
                    format!("{}", self.nb.k),
                    format!("{}", self.nb.p),
                    format!("{}", self.nb.mean()),
                    self.replicates.to_string(),
                    self.seed.to_string(),
                    e.label.clone(),
                    e.method.to_string(),
                    e.weights.to_string(),
                    e.m_rule.to_string(),
                    e.valid.to_string(),
                    e.failures.to_string(),
                    opt(e.mean_n_hat),
                    opt(e.bias),
                    opt(e.variance),
                    opt(e.rmse),
                    opt(e.empirical_se),
                    opt(e.mean_estimated_se),
                    opt(e.se_ratio()),
                    opt(e.mean_abs_rel_error),
                    opt(e.sd_abs_rel_error),
                ]
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        reports_to_csv(std::slice::from_ref(self))
    }
}

/// All reports in one CSV table with a header row.
pub fn reports_to_csv(reports: &[StudyReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_HEADER).expect("in-memory write");
    for r in reports {
        for rec in r.csv_records() {
            w.write_record(&rec).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

type ReplicateOutcome = Vec<Option<(f64, Option<f64>)>>;

fn simulate(spec: &StudySpec) -> Result<(Vec<ReplicateOutcome>, usize)> {
    spec.validate()?;
    let outcomes: Vec<Option<ReplicateOutcome>> = (0..spec.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(spec.seed, i);
            let pop = sample_nb_population(&spec.nb, spec.n_true, &mut rng);
            let table = pop.table?;
            Some(spec.estimators.iter().map(|e| e.apply(&table)).collect())
        })
        .collect();
    let empty = outcomes.iter().filter(|o| o.is_none()).count();
    let filled = outcomes
        .into_iter()
        .map(|o| o.unwrap_or_else(|| vec![None; spec.estimators.len()]))
        .collect();
    Ok((filled, empty))
}

fn summarise(config: &EstimatorConfig, n_true: f64, values: &[(f64, Option<f64>)], total: usize) -> EstimatorSummary {
    let r = values.len();
    let mut s = EstimatorSummary {
        label: config.label(),
        method: config.method,
        weights: config.weights,
        m_rule: config.m,
        valid: r,
        failures: total - r,
        mean_n_hat: None,
        bias: None,
        variance: None,
        rmse: None,
        empirical_se: None,
        mean_estimated_se: None,
        mean_abs_rel_error: None,
        sd_abs_rel_error: None,
    };
    if r == 0 {
        return s;
    }
    let rf = r as f64;
    let mean = values.iter().map(|v| v.0).sum::<f64>() / rf;
    let ss: f64 = values.iter().map(|v| (v.0 - mean).powi(2)).sum();
    let sq_err: f64 = values.iter().map(|v| (v.0 - n_true).powi(2)).sum();
    s.mean_n_hat = Some(mean);
    s.bias = Some(mean - n_true);
    s.variance = Some(ss / rf);
    s.rmse = Some((sq_err / rf).sqrt());
    if r >= 2 {
        s.empirical_se = Some((ss / (rf - 1.0)).sqrt());
    }
    let ses: Vec<f64> = values.iter().filter_map(|v| v.1).collect();
    if !ses.is_empty() {
        s.mean_estimated_se = Some((ses.iter().map(|v| v * v).sum::<f64>() / ses.len() as f64).sqrt());
    }
    let rel: Vec<f64> = values.iter().map(|v| (v.0 / n_true - 1.0).abs()).collect();
    let rel_mean = rel.iter().sum::<f64>() / rf;
    s.mean_abs_rel_error = Some(rel_mean);
    if r >= 2 {
        let v = rel.iter().map(|x| (x - rel_mean).powi(2)).sum::<f64>() / (rf - 1.0);
        s.sd_abs_rel_error = Some(v.sqrt());
    }
    s
}

fn run(spec: &StudySpec, kind: StudyKind) -> Result<StudyReport> {
    let (outcomes, empty_samples) = simulate(spec)?;
    let n_true = spec.n_true as f64;
    let estimators = spec
        .estimators
        .iter()
        .enumerate()
        .map(|(j, cfg)| {
            let values: Vec<(f64, Option<f64>)> = outcomes.iter().filter_map(|o| o[j]).collect();
            summarise(cfg, n_true, &values, spec.replicates)
        })
        .collect();
    Ok(StudyReport {
        name: spec.name.clone(),
        kind,
        n_true: spec.n_true,
        nb: spec.nb,
        replicates: spec.replicates,
        seed: spec.seed,
        empty_samples,
        estimators,
    })
}

/// Bias, variance and RMSE of each estimator over repeated NB samples.
pub fn run_bias_study(spec: &StudySpec) -> Result<StudyReport> {
    run(spec, StudyKind::Bias)
}

/// Mean estimated standard error against the empirical spread of N̂.
pub fn run_se_study(spec: &StudySpec) -> Result<StudyReport> {
    run(spec, StudyKind::Se)
}

/// Runs `spec` as its own kind.
pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    run(spec, spec.kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SweepRow<T> {
    pub m: u32,
    pub method: Method,
    /// Raw estimate, present also for some invalid results.
    pub n_hat: Option<T>,
    pub valid: bool,
    pub reason: Option<crate::estimators::InvalidReason>,
}

/// Estimates for every `(m, method)` pair, `m` outer.
pub fn truncation_sweep<T: Scalar>(
    table: &FrequencyTable<T>,
    methods: &[Method],
    m_values: &[u32],
    scheme: WeightScheme,
) -> Result<Vec<SweepRow<T>>> {
    if let Some(&m) = m_values.iter().find(|&&m| m < 3) {
        return Err(Error::InvalidTruncation { m, min: 3 });
    }
    let mut rows = Vec::with_capacity(methods.len() * m_values.len());
    for &m in m_values {
        for &method in methods {
            let est = estimate(table, method, m, scheme)?;
            rows.push(SweepRow {
                m,
                method,
                n_hat: est.n_hat,
                valid: est.is_valid(),
                reason: est.invalid,
            });
        }
    }
    Ok(rows)
}
