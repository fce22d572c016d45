//! Seeded Monte Carlo studies of the estimators: synthetic meta-analytic
//! populations, outlier injection, S-replicate runs, and the
//! accuracy/precision/coverage performance measures.

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Bernoulli, Beta, Binomial, LogNormal, Poisson, Uniform};
use rayon::prelude::*;

use crate::dataset::{Dataset, StudyRecord};
use crate::error::{Error, Result};
use crate::estimators::{
    generalised_chao, generalised_zelterman, horvitz_thompson, CiOptions, EstimatorKind,
    PopulationEstimate,
};
use crate::glm::{fit_trunc_binomial, fit_zt_negbin, fit_zt_poisson, PredictorSpec};

/// Configuration for one Monte Carlo study.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// True population size N.
    pub n_total: u64,
    /// Number of replicates S.
    pub replicates: u64,
    /// Poisson mean of the per-study participant count.
    pub mean_participants: f64,
    /// Log-normal log-mean of the observation period.
    pub log_mean_period: f64,
    /// Log-normal log-standard-deviation of the observation period.
    pub log_sd_period: f64,
    /// Common event rate for regular studies.
    pub event_rate: f64,
    /// Lower end of the uniform outlier-rate range.
    pub outlier_rate_lower: f64,
    /// Upper end of the uniform outlier-rate range.
    pub outlier_rate_upper: f64,
    /// Beta shape a for the prop_women covariate.
    pub beta_a: f64,
    /// Beta shape b for the prop_women covariate.
    pub beta_b: f64,
    /// Bernoulli probability for the origin covariate.
    pub bernoulli_p: f64,
    /// Fraction of studies replaced by outliers.
    #[serde(default)]
    pub outlier_proportion: f64,
    pub seed: u64,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    /// Predictor spec index (1..=5) used by the fitted models.
    #[serde(default = "default_predictor")]
    pub predictor: usize,
}

fn default_ci_level() -> f64 {
    0.95
}

fn default_predictor() -> usize {
    1
}

impl SimConfig {
    pub fn from_toml_str(raw: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(raw).map_err(|e| Error::Config(format!("{}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_total == 0 {
            return bad("n_total must be positive".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if !(self.mean_participants > 0.0) {
            return bad("mean_participants must be positive".into());
        }
        if !(self.log_sd_period > 0.0) {
            return bad("log_sd_period must be positive".into());
        }
        if !(0.0 < self.event_rate && self.event_rate < 1.0) {
            return bad(format!("event_rate must lie in (0,1), got {}", self.event_rate));
        }
        if !(self.outlier_rate_lower > 0.0) || self.outlier_rate_upper < self.outlier_rate_lower {
            return bad("need 0 < outlier_rate_lower <= outlier_rate_upper".into());
        }
        if !(self.beta_a > 0.0 && self.beta_b > 0.0) {
            return bad("beta_a and beta_b must be positive".into());
        }
        if !(0.0 < self.bernoulli_p && self.bernoulli_p < 1.0) {
            return bad("bernoulli_p must lie in (0,1)".into());
        }
        if !(0.0..1.0).contains(&self.outlier_proportion) {
            return bad("outlier_proportion must lie in [0,1)".into());
        }
        if !proportion_is_integral(self.outlier_proportion, self.n_total) {
            return bad(format!(
                "outlier_proportion {} times n_total {} is not an integer",
                self.outlier_proportion, self.n_total
            ));
        }
        if !(0.0 < self.ci_level && self.ci_level < 1.0) {
            return bad("ci_level must lie in (0,1)".into());
        }
        PredictorSpec::from_index(self.predictor)?;
        Ok(())
    }

    pub fn spec(&self) -> PredictorSpec {
        PredictorSpec::from_index(self.predictor).expect("validated")
    }

    pub fn outlier_count(&self) -> u64 {
        (self.outlier_proportion * self.n_total as f64).round() as u64
    }

    /// Independent, reproducible random stream for replicate `s`: one base
    /// seed, with the ChaCha stream counter carrying the replicate index.
    pub fn stream(&self, s: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(s);
        rng
    }
}

fn proportion_is_integral(p: f64, n: u64) -> bool {
    let k = p * n as f64;
    (k - k.round()).abs() < 1e-9
}

/// Draws the shared study characteristics: (participants t, period O).
fn draw_exposure(cfg: &SimConfig, rng: &mut ChaCha12Rng) -> f64 {
    let pois = Poisson::new(cfg.mean_participants).expect("validated");
    let lognorm = LogNormal::new(cfg.log_mean_period, cfg.log_sd_period).expect("validated");
    // A study with zero participants has no exposure; resample.
    let mut t = pois.sample(rng);
    while t < 1.0 {
        t = pois.sample(rng);
    }
    let o: f64 = lognorm.sample(rng);
    t * o
}

fn draw_covariates(cfg: &SimConfig, rng: &mut ChaCha12Rng) -> (f64, u8) {
    let beta = Beta::new(cfg.beta_a, cfg.beta_b).expect("validated");
    let bern = Bernoulli::new(cfg.bernoulli_p).expect("validated");
    (beta.sample(rng), bern.sample(rng) as u8)
}

/// Generates `count` regular studies. Counts may be zero; zero-truncation is
/// a separate step.
pub fn generate_population(cfg: &SimConfig, count: u64, rng: &mut ChaCha12Rng) -> Vec<StudyRecord> {
    (0..count)
        .map(|i| {
            let tau = draw_exposure(cfg, rng);
            let trials = tau.round().max(1.0) as u64;
            let y = Binomial::new(trials, cfg.event_rate)
                .expect("validated")
                .sample(rng);
            let (x1, x2) = draw_covariates(cfg, rng);
            StudyRecord {
                id: format!("s{i}"),
                count: y,
                exposure: tau,
                prop_women: Some(x1),
                origin_flag: x2,
            }
        })
        .collect()
}

/// Generates `count` outlier studies whose event rate is drawn uniformly
/// from [outlier_rate_lower, outlier_rate_upper]. Counts are floored at one
/// so the outliers always survive truncation.
pub fn generate_outliers(cfg: &SimConfig, count: u64, rng: &mut ChaCha12Rng) -> Vec<StudyRecord> {
    let unif = Uniform::new_inclusive(cfg.outlier_rate_lower, cfg.outlier_rate_upper);
    (0..count)
        .map(|i| {
            let tau = draw_exposure(cfg, rng);
            let rate = unif.sample(rng);
            let y = ((tau * rate).round() as u64).max(1);
            let (x1, x2) = draw_covariates(cfg, rng);
            StudyRecord {
                id: format!("o{i}"),
                count: y,
                exposure: tau,
                prop_women: Some(x1),
                origin_flag: x2,
            }
        })
        .collect()
}

/// One estimator's outcome within a replicate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimateRecord {
    pub estimator: EstimatorKind,
    pub n_hat: Option<f64>,
    pub variance: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub converged: bool,
}

impl EstimateRecord {
    fn from_result(kind: EstimatorKind, r: Result<PopulationEstimate>) -> Self {
        match r {
            Ok(e) => EstimateRecord {
                estimator: kind,
                n_hat: Some(e.n_hat),
                variance: e.variance,
                ci_lower: e.ci_lower,
                ci_upper: e.ci_upper,
                converged: true,
            },
            Err(_) => EstimateRecord {
                estimator: kind,
                n_hat: None,
                variance: None,
                ci_lower: None,
                ci_upper: None,
                converged: false,
            },
        }
    }
}

/// Everything recorded for one replicate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReplicateResult {
    pub replicate: u64,
    pub n_observed: usize,
    pub estimates: Vec<EstimateRecord>,
}

pub const STUDY_ESTIMATORS: [EstimatorKind; 3] = [
    EstimatorKind::HorvitzThompson,
    EstimatorKind::GeneralisedChao,
    EstimatorKind::GeneralisedZelterman,
];

/// Runs one replicate: generate, truncate, fit, estimate. Fit failures are
/// recorded per estimator, never propagated.
pub fn run_replicate(cfg: &SimConfig, s: u64) -> ReplicateResult {
    let mut rng = cfg.stream(s);
    let k = cfg.outlier_count();
    let mut records = generate_population(cfg, cfg.n_total - k, &mut rng);
    records.extend(generate_outliers(cfg, k, &mut rng));
    let full = Dataset::new(records, false).expect("generated records are valid");
    let data = full.zero_truncate();
    let n_observed = data.len();
    let spec = cfg.spec();
    let ci = CiOptions {
        level: cfg.ci_level,
        floor_at_observed: true,
    };

    // Count family chosen by BIC between the zero-truncated Poisson and
    // negative binomial at the configured predictor.
    let ht = fit_zt_poisson(&data, spec)
        .and_then(|pois| match fit_zt_negbin(&data, spec) {
            Ok(nb) if nb.bic < pois.bic => Ok(nb),
            _ => Ok(pois),
        })
        .and_then(|m| horvitz_thompson(&data, &m, ci));

    let tb = fit_trunc_binomial(&data, spec);
    let (gc, gz) = match &tb {
        Ok(m) => (
            generalised_chao(&data, m, ci),
            generalised_zelterman(&data, m, ci),
        ),
        Err(e) => (
            Err(Error::Selection(e.to_string())),
            Err(Error::Selection(e.to_string())),
        ),
    };

    ReplicateResult {
        replicate: s,
        n_observed,
        estimates: vec![
            EstimateRecord::from_result(EstimatorKind::HorvitzThompson, ht),
            EstimateRecord::from_result(EstimatorKind::GeneralisedChao, gc),
            EstimateRecord::from_result(EstimatorKind::GeneralisedZelterman, gz),
        ],
    }
}

/// Performance of one estimator over a study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimatorPerformance {
    pub estimator: EstimatorKind,
    /// Median |N-hat - N| over converged replicates.
    pub accuracy: Option<f64>,
    /// Median CI width over replicates with intervals.
    pub precision: Option<f64>,
    /// Percentage of intervals containing the true N.
    pub coverage: Option<f64>,
    pub failures: usize,
    pub used: usize,
    /// Set when more than 10% of replicates failed for this estimator.
    pub unreliable: bool,
}

/// Aggregated study output.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PerformanceReport {
    pub n_total: u64,
    pub replicates: u64,
    pub outlier_proportion: f64,
    pub seed: u64,
    pub estimators: Vec<EstimatorPerformance>,
}

/// A full study: the aggregate report plus the raw per-replicate results.
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub report: PerformanceReport,
    pub replicates: Vec<ReplicateResult>,
}

/// Median with the even-length convention (mean of the two central order
/// statistics). Returns None on empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Aggregates replicate results into the performance measures.
pub fn aggregate(cfg: &SimConfig, replicates: &[ReplicateResult]) -> PerformanceReport {
    let n_true = cfg.n_total as f64;
    let estimators = STUDY_ESTIMATORS
        .iter()
        .map(|&kind| {
            let mut abs_err = Vec::new();
            let mut widths = Vec::new();
            let mut covered = 0usize;
            let mut with_ci = 0usize;
            let mut failures = 0usize;
            for rep in replicates {
                let rec = rep
                    .estimates
                    .iter()
                    .find(|e| e.estimator == kind)
                    .expect("every replicate records every estimator");
                if !rec.converged || rec.n_hat.is_none() {
                    failures += 1;
                    continue;
                }
                abs_err.push((rec.n_hat.unwrap() - n_true).abs());
                if let (Some(lo), Some(hi)) = (rec.ci_lower, rec.ci_upper) {
                    widths.push(hi - lo);
                    with_ci += 1;
                    if lo <= n_true && n_true <= hi {
                        covered += 1;
                    }
                } else {
                    // No interval counts as a failure for the CI measures.
                    failures += 1;
                }
            }
            let total = replicates.len();
            EstimatorPerformance {
                estimator: kind,
                accuracy: median(&abs_err),
                precision: median(&widths),
                coverage: (with_ci > 0).then(|| 100.0 * covered as f64 / with_ci as f64),
                failures,
                used: abs_err.len(),
                unreliable: total > 0 && failures * 10 > total,
            }
        })
        .collect();
    PerformanceReport {
        n_total: cfg.n_total,
        replicates: cfg.replicates,
        outlier_proportion: cfg.outlier_proportion,
        seed: cfg.seed,
        estimators,
    }
}

/// Runs S replicates (in parallel; output independent of scheduling) and
/// aggregates the performance measures.
pub fn run_study(cfg: &SimConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let replicates: Vec<ReplicateResult> = (0..cfg.replicates)
        .into_par_iter()
        .map(|s| run_replicate(cfg, s))
        .collect();
    let report = aggregate(cfg, &replicates);
    Ok(StudyResult { report, replicates })
}

/// One column of a robustness sweep.
#[derive(Debug, Clone)]
pub struct SweepColumn {
    pub proportion: f64,
    /// None when proportion x N is not an integer; `note` explains.
    pub study: Option<StudyResult>,
    pub note: Option<String>,
}

/// Runs a study per outlier proportion with the shared base seed, skipping
/// proportions that do not yield an integral outlier count.
pub fn robustness_sweep(base: &SimConfig, proportions: &[f64]) -> Result<Vec<SweepColumn>> {
    base.validate()?;
    proportions
        .iter()
        .map(|&p| {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "outlier proportion must lie in [0,1), got {p}"
                )));
            }
            if !proportion_is_integral(p, base.n_total) {
                return Ok(SweepColumn {
                    proportion: p,
                    study: None,
                    note: Some(format!(
                        "skipped: {p} x {} is not an integer number of outliers",
                        base.n_total
                    )),
                });
            }
            let mut cfg = base.clone();
            cfg.outlier_proportion = p;
            Ok(SweepColumn {
                proportion: p,
                study: Some(run_study(&cfg)?),
                note: None,
            })
        })
        .collect()
}
