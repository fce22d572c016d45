//! Command-line front end: estimation, model-selection tables, imputation,
//! outlier bounds, simulation sweeps, and boxplot SVG emission.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{
    chao_conventional, generalised_chao, generalised_zelterman, horvitz_thompson,
    zelterman_conventional, CiOptions, PopulationEstimate,
};
use crate::glm::{self, Family, FittedModel, PredictorSpec};
use crate::report::{
    sweep_to_json, write_performance_csv, write_replicates_csv, ReportDocument,
};
use crate::simulation::{robustness_sweep, SimConfig, SweepColumn};
use crate::svg::{render_boxplot, BoxStats};

#[derive(Parser, Debug)]
#[command(
    name = "truncount",
    version,
    about = "Population size estimation from zero-truncated count data"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the total population size from a dataset.
    Estimate(EstimateArgs),
    /// Print the log-likelihood/BIC model selection table for one family.
    Select(SelectArgs),
    /// Fill missing prop_women values by regression imputation.
    Impute(ImputeArgs),
    /// Print the empirical outlier rate bounds.
    OutlierBounds(OutlierBoundsArgs),
    /// Run a Monte Carlo robustness sweep from a config file.
    Simulate(SimulateArgs),
    /// Render boxplot SVGs from per-replicate CSV output.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Input CSV (id,count,exposure,prop_women,origin_flag).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimatorArg::All)]
    estimator: EstimatorArg,
    /// Count-model family backing the Horvitz-Thompson estimator.
    #[arg(long, value_enum, default_value_t = FamilyArg::Auto)]
    family: FamilyArg,
    /// Predictor spec 1..=5; omit to select by BIC.
    #[arg(long)]
    predictor: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    /// Do not floor the lower CI limit at the observed sample size.
    #[arg(long)]
    no_floor: bool,
    /// Print the JSON report to stdout instead of the table.
    #[arg(long)]
    json: bool,
    /// Directory to write report.json into.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum EstimatorArg {
    All,
    Ht,
    Gc,
    Gz,
    Chao,
    Zelterman,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum FamilyArg {
    Auto,
    Poisson,
    Negbin,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = SelectFamilyArg::Poisson)]
    family: SelectFamilyArg,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SelectFamilyArg {
    Poisson,
    Negbin,
    Binomial,
}

impl SelectFamilyArg {
    fn family(self) -> Family {
        match self {
            SelectFamilyArg::Poisson => Family::ZtPoisson,
            SelectFamilyArg::Negbin => Family::ZtNegBinomial,
            SelectFamilyArg::Binomial => Family::TruncBinomial,
        }
    }
}

#[derive(Args, Debug)]
struct ImputeArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output CSV path (defaults to <data stem>_imputed.csv next to input).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct OutlierBoundsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML simulation config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for performance.csv, report.json and replicate CSVs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replicate count.
    #[arg(long)]
    replicates: Option<u64>,
    /// Comma-separated outlier proportions (default: the config's value).
    #[arg(long, value_delimiter = ',')]
    proportions: Option<Vec<f64>>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// One or more per-replicate CSV files; each file becomes one group.
    #[arg(required = true)]
    replicates: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// True population size for the dashed reference line.
    #[arg(long)]
    true_n: Option<f64>,
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // Help/version requests are successes; usage errors are input errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    init_thread_pool();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Honours TRUNCOUNT_THREADS (0 or unset = automatic).
fn init_thread_pool() {
    if let Ok(v) = std::env::var("TRUNCOUNT_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Select(a) => cmd_select(a),
        Command::Impute(a) => cmd_impute(a),
        Command::OutlierBounds(a) => cmd_outlier_bounds(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn load_prepared(path: &Path) -> Result<(Dataset, Vec<u8>, bool)> {
    let raw = std::fs::read(path)?;
    let data = Dataset::parse_csv(std::str::from_utf8(&raw).map_err(|e| {
        Error::Validation(format!("{}: not valid UTF-8: {e}", path.display()))
    })?)?;
    let truncated = data.zero_truncate();
    let imputed = !truncated.covariates_complete();
    let prepared = if imputed {
        truncated.impute_missing_proportion()?
    } else {
        truncated
    };
    Ok((prepared, raw, imputed))
}

/// Round half-up for display; internal values stay real-valued.
fn round_display(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn fmt_ci(e: &PopulationEstimate) -> String {
    match (e.ci_lower, e.ci_upper) {
        (Some(lo), Some(hi)) => format!("({}, {})", round_display(lo), round_display(hi)),
        _ => "n/a".to_string(),
    }
}

fn count_model(data: &Dataset, family: FamilyArg, predictor: Option<usize>) -> Result<FittedModel> {
    match (family, predictor) {
        (FamilyArg::Poisson, Some(p)) => {
            glm::fit_zt_poisson(data, PredictorSpec::from_index(p)?)
        }
        (FamilyArg::Negbin, Some(p)) => glm::fit_zt_negbin(data, PredictorSpec::from_index(p)?),
        (FamilyArg::Poisson, None) => glm::select_spec(data, Family::ZtPoisson),
        (FamilyArg::Negbin, None) => glm::select_spec(data, Family::ZtNegBinomial),
        (FamilyArg::Auto, None) => glm::select_count_family(data),
        (FamilyArg::Auto, Some(p)) => {
            let spec = PredictorSpec::from_index(p)?;
            let pois = glm::fit_zt_poisson(data, spec);
            let nb = glm::fit_zt_negbin(data, spec);
            match (pois, nb) {
                (Ok(a), Ok(b)) => Ok(if b.bic < a.bic { b } else { a }),
                (Ok(a), Err(_)) => Ok(a),
                (Err(_), Ok(b)) => Ok(b),
                (Err(e), Err(_)) => Err(e),
            }
        }
    }
}

fn tb_model(data: &Dataset, predictor: Option<usize>) -> Result<FittedModel> {
    match predictor {
        Some(p) => glm::fit_trunc_binomial(data, PredictorSpec::from_index(p)?),
        None => glm::select_spec(data, Family::TruncBinomial),
    }
}

fn model_json(m: &FittedModel) -> serde_json::Value {
    serde_json::json!({
        "family": m.family.label(),
        "predictor": m.spec.index(),
        "predictor_label": m.spec.label(),
        "loglik": m.loglik,
        "bic": m.bic,
        "alpha": m.alpha,
        "boundary": m.boundary,
        "n_used": m.n_used,
    })
}

fn estimate_json(e: &PopulationEstimate, model: Option<&FittedModel>) -> serde_json::Value {
    serde_json::json!({
        "estimator": e.estimator.label(),
        "n_hat": e.n_hat,
        "n_hat_rounded": round_display(e.n_hat),
        "variance": e.variance,
        "ci_lower": e.ci_lower,
        "ci_upper": e.ci_upper,
        "ci_level": e.ci_level,
        "n_observed": e.n_observed,
        "model": model.map(model_json),
    })
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let (data, raw, imputed) = load_prepared(&a.data)?;
    let ci = CiOptions {
        level: a.ci_level,
        floor_at_observed: !a.no_floor,
    };

    let mut rows: Vec<(PopulationEstimate, Option<FittedModel>, String)> = Vec::new();
    let want = |k: EstimatorArg| a.estimator == EstimatorArg::All || a.estimator == k;
    if want(EstimatorArg::Ht) {
        let m = count_model(&data, a.family, a.predictor)?;
        let e = horvitz_thompson(&data, &m, ci)?;
        let var_note = if e.variance.is_none() {
            "n/a (negbin)".to_string()
        } else {
            String::new()
        };
        rows.push((e, Some(m), var_note));
    }
    if want(EstimatorArg::Gc) || want(EstimatorArg::Gz) {
        let m = tb_model(&data, a.predictor)?;
        if want(EstimatorArg::Gc) {
            rows.push((generalised_chao(&data, &m, ci)?, Some(m.clone()), String::new()));
        }
        if want(EstimatorArg::Gz) {
            rows.push((generalised_zelterman(&data, &m, ci)?, Some(m), String::new()));
        }
    }
    if a.estimator == EstimatorArg::Chao {
        rows.push((chao_conventional(&data)?, None, String::new()));
    }
    if a.estimator == EstimatorArg::Zelterman {
        rows.push((zelterman_conventional(&data)?, None, String::new()));
    }

    let results = serde_json::json!({
        "n_observed": data.len(),
        "imputed": imputed,
        "ci_level": a.ci_level,
        "floor_at_observed": !a.no_floor,
        "estimates": rows
            .iter()
            .map(|(e, m, _)| estimate_json(e, m.as_ref()))
            .collect::<Vec<_>>(),
    });
    let doc = ReportDocument::new("estimate", results).with_input(&raw);

    if a.json {
        print!("{}", doc.to_json());
    } else {
        if imputed {
            println!("note: missing prop_women values were imputed");
        }
        println!(
            "{:<24} {:>8} {:>12} {:>18}  model",
            "estimator", "N-hat", "variance", "CI"
        );
        for (e, m, var_note) in &rows {
            let var = match (e.variance, var_note.is_empty()) {
                (Some(v), _) => format!("{}", round_display(v)),
                (None, false) => var_note.clone(),
                (None, true) => "n/a".to_string(),
            };
            let model_desc = m
                .as_ref()
                .map(|m| format!("{} [{}]", m.family, m.spec))
                .unwrap_or_else(|| "-".to_string());
            println!(
                "{:<24} {:>8} {:>12} {:>18}  {}",
                e.estimator.label(),
                round_display(e.n_hat),
                var,
                fmt_ci(e),
                model_desc
            );
        }
    }
    write_report(a.out.as_deref(), &doc)
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let (data, raw, _) = load_prepared(&a.data)?;
    let family = a.family.family();
    let fits = glm::fit_all_specs(&data, family);
    let fitted: Vec<&FittedModel> = fits.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    if fitted.is_empty() {
        let reasons: Vec<String> = fits
            .iter()
            .filter_map(|(s, r)| r.as_ref().err().map(|e| format!("{s}: {e}")))
            .collect();
        return Err(Error::Selection(format!(
            "no candidate model could be fitted: {}",
            reasons.join("; ")
        )));
    }
    let best_bic = fitted
        .iter()
        .map(|m| m.bic)
        .fold(f64::INFINITY, f64::min);

    let rows: Vec<serde_json::Value> = fits
        .iter()
        .map(|(s, r)| match r {
            Ok(m) => serde_json::json!({
                "predictor": s.index(),
                "predictor_label": s.label(),
                "loglik": m.loglik,
                "bic": m.bic,
                "selected": m.bic == best_bic,
                "alpha": m.alpha,
            }),
            Err(e) => serde_json::json!({
                "predictor": s.index(),
                "predictor_label": s.label(),
                "error": e.to_string(),
            }),
        })
        .collect();
    let results = serde_json::json!({
        "family": family.label(),
        "n_used": fitted[0].n_used,
        "rows": rows,
    });
    let doc = ReportDocument::new("select", results).with_input(&raw);

    if a.json {
        print!("{}", doc.to_json());
    } else {
        println!("family: {} (n = {})", family, fitted[0].n_used);
        println!("{:<22} {:>10} {:>8}", "predictor", "loglik", "BIC");
        for (s, r) in &fits {
            match r {
                Ok(m) => println!(
                    "{:<22} {:>10.1} {:>8.1}{}",
                    s.label(),
                    m.loglik,
                    m.bic,
                    if m.bic == best_bic { "  *" } else { "" }
                ),
                Err(e) => println!("{:<22} failed: {e}", s.label()),
            }
        }
    }
    write_report(a.out.as_deref(), &doc)
}

fn cmd_impute(a: ImputeArgs) -> Result<()> {
    let raw = std::fs::read(&a.data)?;
    let data = Dataset::parse_csv(std::str::from_utf8(&raw).map_err(|e| {
        Error::Validation(format!("{}: not valid UTF-8: {e}", a.data.display()))
    })?)?;
    if data.covariates_complete() {
        println!("no missing prop_women values; nothing to impute");
        return Ok(());
    }
    let imputed = data.impute_missing_proportion()?;
    let filled: Vec<serde_json::Value> = data
        .records()
        .iter()
        .zip(imputed.records())
        .filter(|(before, _)| before.prop_women.is_none())
        .map(|(_, after)| {
            serde_json::json!({"id": after.id, "prop_women": after.prop_women.unwrap()})
        })
        .collect();
    let out = a.out.unwrap_or_else(|| {
        let stem = a.data.file_stem().unwrap_or_default().to_string_lossy();
        a.data.with_file_name(format!("{stem}_imputed.csv"))
    });
    let mut buf = Vec::new();
    imputed.write_csv(&mut buf)?;
    std::fs::write(&out, &buf)?;

    let doc = ReportDocument::new(
        "impute",
        serde_json::json!({"filled": filled, "output": out.display().to_string()}),
    )
    .with_input(&raw);
    if a.json {
        print!("{}", doc.to_json());
    } else {
        for f in &filled {
            println!(
                "imputed {}: prop_women = {:.3}",
                f["id"].as_str().unwrap(),
                f["prop_women"].as_f64().unwrap()
            );
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_outlier_bounds(a: OutlierBoundsArgs) -> Result<()> {
    let raw = std::fs::read(&a.data)?;
    let data = Dataset::parse_csv(std::str::from_utf8(&raw).map_err(|e| {
        Error::Validation(format!("{}: not valid UTF-8: {e}", a.data.display()))
    })?)?;
    let b = data.outlier_bounds()?;
    if a.json {
        let doc = ReportDocument::new(
            "outlier-bounds",
            serde_json::json!({"lower": b.lower, "upper": b.upper}),
        )
        .with_input(&raw);
        print!("{}", doc.to_json());
    } else {
        println!("outlier rate lower bound: {:.10}", b.lower);
        println!("outlier rate upper bound: {:.10}", b.upper);
    }
    Ok(())
}

fn proportion_label(p: f64) -> String {
    format!("{}%", 100.0 * p)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let raw = std::fs::read(&a.config)?;
    let mut cfg = SimConfig::from_toml_str(std::str::from_utf8(&raw).map_err(|e| {
        Error::Config(format!("{}: not valid UTF-8: {e}", a.config.display()))
    })?)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    let proportions = a.proportions.unwrap_or_else(|| vec![cfg.outlier_proportion]);

    let columns = robustness_sweep(&cfg, &proportions)?;

    std::fs::create_dir_all(&a.out)?;
    let mut perf = Vec::new();
    write_performance_csv(&mut perf, &columns)?;
    std::fs::write(a.out.join("performance.csv"), &perf)?;
    for col in &columns {
        if let Some(study) = &col.study {
            let mut buf = Vec::new();
            write_replicates_csv(&mut buf, &study.replicates)?;
            std::fs::write(
                a.out.join(format!("replicates_{}.csv", col.proportion)),
                &buf,
            )?;
        }
    }
    let doc = ReportDocument::new("simulate", sweep_to_json(&columns))
        .with_seed(cfg.seed)
        .with_input(&raw);
    std::fs::write(a.out.join("report.json"), doc.to_json())?;

    if a.json {
        print!("{}", doc.to_json());
    } else {
        print_performance_table(&columns);
        println!("wrote artifacts to {}", a.out.display());
    }
    Ok(())
}

fn print_performance_table(columns: &[SweepColumn]) {
    let mut header = format!("{:<12} {:<24}", "measure", "estimator");
    for c in columns {
        header.push_str(&format!(" {:>12}", proportion_label(c.proportion)));
    }
    println!("{header}");
    type Get = fn(&crate::simulation::EstimatorPerformance) -> Option<f64>;
    let measures: [(&str, Get, usize); 3] = [
        ("accuracy", |e| e.accuracy, 0),
        ("precision", |e| e.precision, 0),
        ("coverage", |e| e.coverage, 1),
    ];
    for (name, get, dp) in measures {
        for kind in crate::simulation::STUDY_ESTIMATORS {
            let mut line = format!("{:<12} {:<24}", name, kind.label());
            for c in columns {
                let cell = c
                    .study
                    .as_ref()
                    .and_then(|s| {
                        s.report
                            .estimators
                            .iter()
                            .find(|e| e.estimator == kind)
                            .and_then(get)
                    })
                    .map(|v| format!("{v:.dp$}"))
                    .unwrap_or_else(|| "-".to_string());
                line.push_str(&format!(" {cell:>12}"));
            }
            println!("{line}");
        }
    }
}

#[derive(Debug, Clone)]
struct PlotRow {
    group: String,
    estimator: String,
    n_hat: Option<f64>,
    width: Option<f64>,
}

fn read_plot_rows(path: &Path) -> Result<Vec<PlotRow>> {
    let raw = std::fs::read_to_string(path)?;
    let group = path
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(raw.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("{}: missing column `{name}`", path.display())))
    };
    let (ic_est, ic_nhat, ic_lo, ic_hi) = (
        col("estimator")?,
        col("n_hat")?,
        col("ci_lower")?,
        col("ci_upper")?,
    );
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 2,
            column: "<row>".into(),
            message: e.to_string(),
        })?;
        let parse_opt = |idx: usize| -> Option<f64> {
            rec.get(idx).and_then(|s| s.parse::<f64>().ok())
        };
        let n_hat = parse_opt(ic_nhat);
        let width = match (parse_opt(ic_lo), parse_opt(ic_hi)) {
            (Some(lo), Some(hi)) => Some(hi - lo),
            _ => None,
        };
        rows.push(PlotRow {
            group: group.clone(),
            estimator: rec.get(ic_est).unwrap_or("").to_string(),
            n_hat,
            width,
        });
    }
    if rows.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no replicate rows to plot",
            path.display()
        )));
    }
    Ok(rows)
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.replicates {
        rows.extend(read_plot_rows(p)?);
    }
    // Boxes keyed by (group, estimator) in first-seen order.
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in &rows {
        let key = (r.group.clone(), r.estimator.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let collect = |f: fn(&PlotRow) -> Option<f64>| -> Vec<BoxStats> {
        keys.iter()
            .filter_map(|(g, est)| {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| &r.group == g && &r.estimator == est)
                    .filter_map(f)
                    .collect();
                BoxStats::from_values(est.clone(), g.clone(), &vals)
            })
            .collect()
    };

    let nhat_boxes = collect(|r| r.n_hat);
    let log_boxes: Vec<BoxStats> = keys
        .iter()
        .filter_map(|(g, est)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| &r.group == g && &r.estimator == est)
                .filter_map(|r| r.n_hat)
                .filter(|&v| v > 0.0)
                .map(f64::log10)
                .collect();
            BoxStats::from_values(est.clone(), g.clone(), &vals)
        })
        .collect();
    let width_boxes = collect(|r| r.width);
    if nhat_boxes.is_empty() {
        return Err(Error::Validation("no plottable estimates".into()));
    }

    std::fs::create_dir_all(&a.out)?;
    let outputs = [
        (
            "estimates_boxplot.svg",
            render_boxplot("Population size estimates", "N-hat", &nhat_boxes, a.true_n),
        ),
        (
            "estimates_log_boxplot.svg",
            render_boxplot(
                "Population size estimates (log10)",
                "log10 N-hat",
                &log_boxes,
                a.true_n.filter(|&n| n > 0.0).map(f64::log10),
            ),
        ),
        (
            "ci_width_boxplot.svg",
            render_boxplot("Confidence interval widths", "CI width", &width_boxes, None),
        ),
    ];
    for (name, svg) in &outputs {
        std::fs::write(a.out.join(name), svg)?;
    }
    println!("wrote {} SVG files to {}", outputs.len(), a.out.display());
    Ok(())
}

fn write_report(out: Option<&Path>, doc: &ReportDocument) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), doc.to_json())?;
    }
    Ok(())
}
