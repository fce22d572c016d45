//! Acceptance suite: ten numbered criteria with pinned targets and tolerances.
//!
//! Each test asserts one criterion. Deterministic criteria (1-3, 7-9) pin
//! values frozen from the reference analysis of the bundled meta-analysis
//! dataset; Monte Carlo criteria (4-6) pin the seed-fixed simulation
//! configurations bundled under `data/`. Criterion 10 checks byte-identical
//! CLI artifacts across thread counts.

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use common::{data_path, prepared, rel_err};
use nalgebra::DMatrix;
use truncount::dataset::Dataset;
use truncount::estimators::{
    self, CiOptions, EstimatorKind, PopulationEstimate,
};
use truncount::glm::{self, Family, FittedModel, PredictorSpec};
use truncount::simulation::{
    run_study, EstimatorPerformance, PerformanceReport, SimConfig,
};

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

fn perf(report: &PerformanceReport, kind: EstimatorKind) -> &EstimatorPerformance {
    report
        .estimators
        .iter()
        .find(|e| e.estimator == kind)
        .expect("estimator present in report")
}

fn sim_config(file: &str, proportion: f64) -> SimConfig {
    let mut cfg = SimConfig::load(data_path(file)).expect("bundled config loads");
    cfg.outlier_proportion = proportion;
    cfg
}

fn cached_report(
    cell: &'static OnceLock<PerformanceReport>,
    file: &str,
    proportion: f64,
) -> &'static PerformanceReport {
    cell.get_or_init(|| {
        run_study(&sim_config(file, proportion))
            .expect("study runs")
            .report
    })
}

static N1000_P0: OnceLock<PerformanceReport> = OnceLock::new();
static N1000_P05: OnceLock<PerformanceReport> = OnceLock::new();
static N1000_P2: OnceLock<PerformanceReport> = OnceLock::new();
static N500_P0: OnceLock<PerformanceReport> = OnceLock::new();
static N500_P1: OnceLock<PerformanceReport> = OnceLock::new();

const HT: EstimatorKind = EstimatorKind::HorvitzThompson;
const GC: EstimatorKind = EstimatorKind::GeneralisedChao;
const GZ: EstimatorKind = EstimatorKind::GeneralisedZelterman;

/// Criterion 1: the 5x3 model-selection table (loglik/BIC for the Poisson,
/// negative-binomial and truncated-binomial blocks), each cell within +-0.05
/// of its frozen one-decimal value, in under a second.
#[test]
fn criterion_1_selection_table() {
    let ds = prepared("case_study.csv");
    let start = Instant::now();
    let pois = glm::fit_all_specs(&ds, Family::ZtPoisson);
    let negbin = glm::fit_all_specs(&ds, Family::ZtNegBinomial);
    let binom = glm::fit_all_specs(&ds, Family::TruncBinomial);
    let elapsed = start.elapsed();

    let pois_ll = [-23.7, -23.4, -23.0, -23.0, -22.7];
    let pois_bic = [50.7, 53.4, 52.6, 55.9, 58.6];
    let nb_bic = [54.0, 56.7, 55.9, 59.2, 61.9];
    let bin_ll = [-7.8, -7.0, -7.8, -7.0, -5.7];
    let bin_bic = [18.6, 20.2, 21.6, 23.2, 23.5];

    for i in 0..5 {
        let p = pois[i].1.as_ref().expect("poisson fit");
        assert!(
            (p.loglik - pois_ll[i]).abs() <= 0.05,
            "poisson loglik spec {}: got {:.4}, want {}",
            i + 1,
            p.loglik,
            pois_ll[i]
        );
        assert!(
            (p.bic - pois_bic[i]).abs() <= 0.05,
            "poisson BIC spec {}: got {:.4}, want {}",
            i + 1,
            p.bic,
            pois_bic[i]
        );

        let nb = negbin[i].1.as_ref().expect("negbin fit");
        assert!(
            (nb.bic - nb_bic[i]).abs() <= 0.05,
            "negbin BIC spec {}: got {:.4}, want {}",
            i + 1,
            nb.bic,
            nb_bic[i]
        );
        // The dispersion hits the Poisson limit here, so each negbin BIC is
        // the matching Poisson log-likelihood plus one extra parameter of
        // penalty at n = 27.
        let spec = PredictorSpec::from_index(i + 1).unwrap();
        let implied = -2.0 * p.loglik + (spec.dim() + 1) as f64 * 27f64.ln();
        assert!(
            (nb.bic - implied).abs() <= 0.05,
            "negbin BIC spec {}: got {:.4}, implied by poisson loglik {:.4}",
            i + 1,
            nb.bic,
            implied
        );

        let b = binom[i].1.as_ref().expect("binomial fit");
        assert!(
            (b.loglik - bin_ll[i]).abs() <= 0.05,
            "binomial loglik spec {}: got {:.4}, want {}",
            i + 1,
            b.loglik,
            bin_ll[i]
        );
        assert!(
            (b.bic - bin_bic[i]).abs() <= 0.05,
            "binomial BIC spec {}: got {:.4}, want {}",
            i + 1,
            b.bic,
            bin_bic[i]
        );
    }
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "selection table took {elapsed:?}, budget is 1 s"
    );
}

struct CaseTarget {
    label: &'static str,
    n_hat: i64,
    variance: f64,
    ci: (f64, f64),
}

fn check_case_estimate(est: &PopulationEstimate, t: &CaseTarget, failures: &mut Vec<String>) {
    let rounded = round_half_up(est.n_hat);
    if (rounded - t.n_hat).abs() > 1 {
        failures.push(format!(
            "{}: estimate {} (raw {:.3}), want {} +- 1",
            t.label, rounded, est.n_hat, t.n_hat
        ));
    }
    let var = est.variance.expect("variance present");
    if (var - t.variance).abs() > 0.05 * t.variance {
        failures.push(format!(
            "{}: variance {:.1}, want {} +- 5%",
            t.label, var, t.variance
        ));
    }
    let (lo, hi) = (est.ci_lower.unwrap(), est.ci_upper.unwrap());
    if (lo - t.ci.0).abs() > 3.0 || (hi - t.ci.1).abs() > 3.0 {
        failures.push(format!(
            "{}: CI ({:.2}, {:.2}), want ({}, {}) endpoints +- 3",
            t.label, lo, hi, t.ci.0, t.ci.1
        ));
    }
}

/// Criterion 2: point estimates, variances and 95% CIs for the three
/// estimators on the bundled case study, in under a second.
#[test]
fn criterion_2_case_study_estimates() {
    let ds = prepared("case_study.csv");
    let start = Instant::now();
    let count = glm::select_count_family(&ds).expect("count model selected");
    let tb = glm::select_spec(&ds, Family::TruncBinomial).expect("binomial model selected");
    let ci = CiOptions::default();
    let ht = estimators::horvitz_thompson(&ds, &count, ci).expect("HT");
    let gc = estimators::generalised_chao(&ds, &tb, ci).expect("GC");
    let gz = estimators::generalised_zelterman(&ds, &tb, ci).expect("GZ");
    let elapsed = start.elapsed();

    let targets = [
        (
            &ht,
            CaseTarget { label: "horvitz-thompson", n_hat: 134, variance: 1677.0, ci: (51.0, 214.0) },
        ),
        (
            &gc,
            CaseTarget { label: "generalised-chao", n_hat: 173, variance: 12707.0, ci: (27.0, 394.0) },
        ),
        (
            &gz,
            CaseTarget { label: "generalised-zelterman", n_hat: 175, variance: 13425.0, ci: (27.0, 402.0) },
        ),
    ];
    let mut failures = Vec::new();
    for (est, t) in &targets {
        check_case_estimate(est, t, &mut failures);
    }
    assert!(failures.is_empty(), "case-study estimates off target:\n{}", failures.join("\n"));
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "case-study estimation took {elapsed:?}, budget is 1 s"
    );
}

/// Criterion 3: on the case study augmented with the three bundled
/// high-rate records, GC = 176 +- 2 and GZ = 180 +- 2 stay stable while the
/// Horvitz-Thompson estimate blows up into [1e5, 5e6] with an upper CI limit
/// of at least 1e7.
#[test]
fn criterion_3_outlier_augmented_case_study() {
    let ds = prepared("case_study_augmented.csv");
    let count = glm::select_count_family(&ds).expect("count model selected");
    let tb = glm::select_spec(&ds, Family::TruncBinomial).expect("binomial model selected");
    let ci = CiOptions::default();
    let ht = estimators::horvitz_thompson(&ds, &count, ci).expect("HT");
    let gc = estimators::generalised_chao(&ds, &tb, ci).expect("GC");
    let gz = estimators::generalised_zelterman(&ds, &tb, ci).expect("GZ");

    let mut failures = Vec::new();
    if (round_half_up(gc.n_hat) - 176).abs() > 2 {
        failures.push(format!(
            "generalised Chao on augmented data: {:.2}, want 176 +- 2",
            gc.n_hat
        ));
    }
    if (round_half_up(gz.n_hat) - 180).abs() > 2 {
        failures.push(format!(
            "generalised Zelterman on augmented data: {:.2}, want 180 +- 2",
            gz.n_hat
        ));
    }
    if !(1e5..=5e6).contains(&ht.n_hat) {
        failures.push(format!(
            "Horvitz-Thompson on augmented data: {:.1}, want within [1e5, 5e6]",
            ht.n_hat
        ));
    }
    let ciu = ht.ci_upper.unwrap_or(f64::NAN);
    if !(ciu >= 1e7) {
        failures.push(format!(
            "Horvitz-Thompson upper CI limit on augmented data: {ciu:.1}, want >= 1e7"
        ));
    }
    assert!(
        failures.is_empty(),
        "outlier-augmented pattern off target:\n{}",
        failures.join("\n")
    );
}

fn check_performance(
    report: &PerformanceReport,
    kind: EstimatorKind,
    accuracy: (f64, f64),
    precision: (f64, f64),
    coverage: (f64, f64),
    failures: &mut Vec<String>,
) {
    let p = perf(report, kind);
    let acc = p.accuracy.expect("accuracy");
    let prec = p.precision.expect("precision");
    let cov = p.coverage.expect("coverage");
    if (acc - accuracy.0).abs() > accuracy.1 {
        failures.push(format!(
            "{} accuracy {:.2}, want {} +- {}",
            kind.label(),
            acc,
            accuracy.0,
            accuracy.1
        ));
    }
    if (prec - precision.0).abs() > precision.1 {
        failures.push(format!(
            "{} precision {:.2}, want {} +- {}",
            kind.label(),
            prec,
            precision.0,
            precision.1
        ));
    }
    if (cov - coverage.0).abs() > coverage.1 {
        failures.push(format!(
            "{} coverage {:.2}%, want {}% +- {}pp",
            kind.label(),
            cov,
            coverage.0,
            coverage.1
        ));
    }
}

/// Criterion 4: the uncontaminated N = 1000 simulation column (S = 1000,
/// seed-fixed) reproduces accuracy / precision / coverage for all three
/// estimators within the stated tolerances.
#[test]
fn criterion_4_simulation_baseline_n1000() {
    let report = cached_report(&N1000_P0, "sim_n1000.toml", 0.0);
    let mut failures = Vec::new();
    check_performance(report, HT, (16.0, 5.0), (95.0, 10.0), (95.5, 2.0), &mut failures);
    check_performance(report, GC, (25.0, 6.0), (162.0, 15.0), (96.4, 2.0), &mut failures);
    check_performance(report, GZ, (29.0, 7.0), (181.0, 15.0), (95.7, 2.0), &mut failures);
    assert!(
        failures.is_empty(),
        "baseline simulation column off target:\n{}",
        failures.join("\n")
    );
}

/// Criterion 5: robustness pattern under contamination. At 0.5% outliers the
/// Horvitz-Thompson coverage collapses below 20% while GC and GZ hold at or
/// above 93%; at 2% outliers the Horvitz-Thompson accuracy degrades to at
/// least 1e4 while the GC accuracy stays within +-6 of its clean value.
#[test]
fn criterion_5_simulation_robustness_pattern() {
    let clean = cached_report(&N1000_P0, "sim_n1000.toml", 0.0);
    let half = cached_report(&N1000_P05, "sim_n1000.toml", 0.005);
    let two = cached_report(&N1000_P2, "sim_n1000.toml", 0.02);

    let mut failures = Vec::new();
    let ht_cov = perf(half, HT).coverage.expect("coverage");
    if !(ht_cov < 20.0) {
        failures.push(format!(
            "horvitz-thompson coverage at 0.5% contamination: {ht_cov:.1}%, want < 20%"
        ));
    }
    for kind in [GC, GZ] {
        let cov = perf(half, kind).coverage.expect("coverage");
        if !(cov >= 93.0) {
            failures.push(format!(
                "{} coverage at 0.5% contamination: {cov:.1}%, want >= 93%",
                kind.label()
            ));
        }
    }
    let ht_acc = perf(two, HT).accuracy.expect("accuracy");
    if !(ht_acc >= 1e4) {
        failures.push(format!(
            "horvitz-thompson accuracy at 2% contamination: {ht_acc:.1}, want >= 1e4 \
             (the target magnitude assumes the dispersion collapses to its lower \
             boundary, but the boundary is not the likelihood optimum there: a \
             global profile search finds an interior dispersion ~15 nats better, \
             and the degradation, while large, stays near 1e3)"
        ));
    }
    let gc_clean = perf(clean, GC).accuracy.expect("accuracy");
    let gc_two = perf(two, GC).accuracy.expect("accuracy");
    if (gc_two - gc_clean).abs() > 6.0 {
        failures.push(format!(
            "generalised-chao accuracy moved from {gc_clean:.2} to {gc_two:.2} \
             under 2% contamination, want within +-6"
        ));
    }
    assert!(
        failures.is_empty(),
        "robustness pattern off target:\n{}",
        failures.join("\n")
    );
}

/// Criterion 6: the N = 500 spot check. Clean column reproduces the
/// Horvitz-Thompson row within tolerance; at 1% contamination its coverage
/// drops below 30%.
#[test]
fn criterion_6_simulation_spot_check_n500() {
    let clean = cached_report(&N500_P0, "sim_n500.toml", 0.0);
    let one = cached_report(&N500_P1, "sim_n500.toml", 0.01);

    let mut failures = Vec::new();
    check_performance(clean, HT, (11.0, 4.0), (67.0, 8.0), (94.8, 2.0), &mut failures);
    let cov = perf(one, HT).coverage.expect("coverage");
    if !(cov < 30.0) {
        failures.push(format!(
            "horvitz-thompson coverage at 1% contamination: {cov:.1}%, want < 30%"
        ));
    }
    assert!(
        failures.is_empty(),
        "N = 500 spot check off target:\n{}",
        failures.join("\n")
    );
}

/// Criterion 7: with an intercept-only predictor and unit exposures the
/// generalised estimators reduce exactly to their frequency-based forms:
/// GC = n + f1^2/(2 f2) and GZ = n / (1 - exp(-2 f2 / f1)), to 1e-9 relative,
/// across 100 random small datasets.
#[test]
fn criterion_7_analytic_reductions() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let ci = CiOptions { level: 0.95, floor_at_observed: false };
    for case in 0..100 {
        let n = rng.gen_range(6..=30);
        let mut records: Vec<_> = (0..n)
            .map(|i| {
                truncount::dataset::StudyRecord::new(
                    format!("r{i}"),
                    rng.gen_range(1..=5),
                    1.0,
                    Some(rng.gen_range(0.0..1.0)),
                    rng.gen_range(0..=1),
                )
                .unwrap()
            })
            .collect();
        // Guarantee both frequency classes are occupied.
        records[0].count = 1;
        records[1].count = 2;
        let ds = Dataset::new(records, true).unwrap();
        let ft = ds.frequency_table();
        let (f1, f2) = (ft.get(1) as f64, ft.get(2) as f64);
        let n = ds.len() as f64;

        let tb = glm::fit_trunc_binomial(&ds, PredictorSpec::InterceptOnly)
            .expect("intercept-only binomial fit");
        let gc = estimators::generalised_chao(&ds, &tb, ci).unwrap().n_hat;
        let gz = estimators::generalised_zelterman(&ds, &tb, ci).unwrap().n_hat;

        let gc_exact = n + f1 * f1 / (2.0 * f2);
        let gz_exact = n / -(-2.0 * f2 / f1).exp_m1();
        assert!(
            rel_err(gc, gc_exact) <= 1e-9,
            "case {case}: generalised Chao {gc:.12} vs closed form {gc_exact:.12} \
             (f1 = {f1}, f2 = {f2}, n = {n})"
        );
        assert!(
            rel_err(gz, gz_exact) <= 1e-9,
            "case {case}: generalised Zelterman {gz:.12} vs closed form {gz_exact:.12} \
             (f1 = {f1}, f2 = {f2}, n = {n})"
        );
    }
}

/// Recomputes an estimator's point estimate at a perturbed coefficient
/// vector (covariance zeroed so only the point estimate matters).
fn n_hat_at(
    ds: &Dataset,
    model: &FittedModel,
    beta: nalgebra::DVector<f64>,
    kind: EstimatorKind,
) -> f64 {
    let mut m = model.clone();
    m.beta = beta;
    let ci = CiOptions { level: 0.95, floor_at_observed: false };
    match kind {
        EstimatorKind::HorvitzThompson => estimators::horvitz_thompson(ds, &m, ci),
        EstimatorKind::GeneralisedChao => estimators::generalised_chao(ds, &m, ci),
        EstimatorKind::GeneralisedZelterman => estimators::generalised_zelterman(ds, &m, ci),
        _ => unreachable!(),
    }
    .expect("estimate at perturbed beta")
    .n_hat
}

/// Criterion 8a: for each estimator the delta-method variance term (total
/// variance minus the binomial term) matches the quadratic form built from a
/// finite-difference gradient of the point estimate, at relative error
/// <= 1e-4 on the case-study fits.
#[test]
fn criterion_8_gradients_match_finite_differences() {
    let ds = prepared("case_study.csv");
    let pois = glm::fit_zt_poisson(&ds, PredictorSpec::InterceptOnly).expect("poisson fit");
    let tb = glm::fit_trunc_binomial(&ds, PredictorSpec::InterceptOnly).expect("binomial fit");
    let ci = CiOptions { level: 0.95, floor_at_observed: false };

    for (model, kind) in [
        (&pois, EstimatorKind::HorvitzThompson),
        (&tb, EstimatorKind::GeneralisedChao),
        (&tb, EstimatorKind::GeneralisedZelterman),
    ] {
        let p = model.beta.len();
        let est = match kind {
            EstimatorKind::HorvitzThompson => estimators::horvitz_thompson(&ds, model, ci),
            EstimatorKind::GeneralisedChao => estimators::generalised_chao(&ds, model, ci),
            EstimatorKind::GeneralisedZelterman => estimators::generalised_zelterman(&ds, model, ci),
            _ => unreachable!(),
        }
        .unwrap();
        // The binomial variance term is what remains when Cov(beta) = 0.
        let mut zeroed = model.clone();
        zeroed.cov_beta = DMatrix::zeros(p, p);
        let binom = match kind {
            EstimatorKind::HorvitzThompson => estimators::horvitz_thompson(&ds, &zeroed, ci),
            EstimatorKind::GeneralisedChao => estimators::generalised_chao(&ds, &zeroed, ci),
            EstimatorKind::GeneralisedZelterman => {
                estimators::generalised_zelterman(&ds, &zeroed, ci)
            }
            _ => unreachable!(),
        }
        .unwrap()
        .variance
        .unwrap();
        let delta_analytic = est.variance.unwrap() - binom;

        let h = 1e-5;
        let mut grad = nalgebra::DVector::zeros(p);
        for a in 0..p {
            let mut bp = model.beta.clone();
            let mut bm = model.beta.clone();
            bp[a] += h;
            bm[a] -= h;
            grad[a] = (n_hat_at(&ds, model, bp, kind) - n_hat_at(&ds, model, bm, kind))
                / (2.0 * h);
        }
        let delta_fd = (&grad.transpose() * &model.cov_beta * &grad)[(0, 0)];
        assert!(
            rel_err(delta_analytic, delta_fd) <= 1e-4,
            "{}: analytic delta-method term {delta_analytic:.8} vs finite-difference \
             {delta_fd:.8}",
            kind.label()
        );
    }

    // Criterion 8b: analytic likelihood scores match finite differences of
    // the log-likelihood, evaluated away from the optimum where the score is
    // not trivially zero.
    // The fitted dispersion sits at the Poisson limit (alpha ~ 1e8), where
    // the gamma-function terms dwarf the mu-dependent part and finite
    // differences of the log-likelihood lose their precision, so the negbin
    // score identity is probed at a moderate dispersion; the limit itself is
    // checked against the Poisson score below.
    let nb = glm::fit_zt_negbin(&ds, PredictorSpec::InterceptOnly).expect("negbin fit");
    let cases = [
        (Family::ZtPoisson, pois.beta.clone(), None),
        (Family::ZtNegBinomial, nb.beta.clone(), Some(2.0)),
        (Family::TruncBinomial, tb.beta.clone(), None),
    ];
    for (family, beta_hat, alpha) in cases {
        let beta = beta_hat.map(|b| b + 0.2);
        let score = glm::score_at(&ds, family, PredictorSpec::InterceptOnly, &beta, alpha)
            .expect("analytic score");
        let h = 1e-6;
        let mut fd = nalgebra::DVector::zeros(beta.len());
        for a in 0..beta.len() {
            let mut bp = beta.clone();
            let mut bm = beta.clone();
            bp[a] += h;
            bm[a] -= h;
            let lp = glm::loglik_at(&ds, family, PredictorSpec::InterceptOnly, &bp, alpha)
                .unwrap();
            let lm = glm::loglik_at(&ds, family, PredictorSpec::InterceptOnly, &bm, alpha)
                .unwrap();
            fd[a] = (lp - lm) / (2.0 * h);
        }
        let scale = fd.amax().max(1.0);
        for a in 0..beta.len() {
            assert!(
                (score[a] - fd[a]).abs() / scale <= 1e-4,
                "{family:?} score component {a}: analytic {:.8} vs finite-difference {:.8}",
                score[a],
                fd[a]
            );
        }
    }

    // Poisson-limit consistency: at very large dispersion the negbin score
    // must coincide with the Poisson score.
    let beta = nb.beta.map(|b| b + 0.2);
    let s_nb = glm::score_at(&ds, Family::ZtNegBinomial, PredictorSpec::InterceptOnly, &beta, Some(1e8))
        .unwrap();
    let s_p = glm::score_at(&ds, Family::ZtPoisson, PredictorSpec::InterceptOnly, &beta, None)
        .unwrap();
    for a in 0..beta.len() {
        assert!(
            (s_nb[a] - s_p[a]).abs() / s_p[a].abs().max(1.0) <= 1e-5,
            "negbin score at the Poisson limit: {:.8} vs Poisson score {:.8}",
            s_nb[a],
            s_p[a]
        );
    }
}

/// Criterion 9: regression imputation fills the one missing covariate value
/// at 0.823 +- 0.001.
#[test]
fn criterion_9_imputation() {
    let ds = prepared("case_study.csv");
    let rec = ds
        .records()
        .iter()
        .find(|r| r.id == "Smith 2004")
        .expect("record present");
    let v = rec.prop_women.expect("imputed value present");
    assert!(
        (v - 0.823).abs() <= 0.001,
        "imputed proportion for Smith 2004: {v:.6}, want 0.823 +- 0.001"
    );
}

/// Criterion 10: the simulation CLI writes byte-identical artifacts for the
/// same seed regardless of thread count.
#[test]
fn criterion_10_determinism_across_thread_counts() {
    use std::process::Command;
    let run = |threads: &str, dir: &std::path::Path| {
        let out = Command::new(env!("CARGO_BIN_EXE_truncount"))
            .args(["simulate", "--config"])
            .arg(data_path("sim_n1000.toml"))
            .args(["--replicates", "200", "--out"])
            .arg(dir)
            .env("TRUNCOUNT_THREADS", threads)
            .output()
            .expect("simulate runs");
        assert!(
            out.status.success(),
            "simulate exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run("1", d1.path());
    run("2", d2.path());
    for name in ["performance.csv", "replicates_0.csv", "report.json"] {
        let a = std::fs::read(d1.path().join(name)).expect("artifact written");
        let b = std::fs::read(d2.path().join(name)).expect("artifact written");
        assert!(
            a == b,
            "{name} differs between single-threaded and two-threaded runs"
        );
    }
}
