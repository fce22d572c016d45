//! Regression models for zero-truncated count data: zero-truncated Poisson,
//! zero-truncated negative binomial, and the truncated binomial (logistic)
//! model on counts of one and two. All models take log-exposure offsets.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-8;
/// Bounds for the negative-binomial dispersion parameter alpha. At the upper
/// bound the model is numerically Poisson; at the lower bound the likelihood
/// is driven by extreme overdispersion.
pub const ALPHA_MIN: f64 = 1e-5;
pub const ALPHA_MAX: f64 = 1e8;

/// The five candidate linear predictors h(x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum PredictorSpec {
    /// 1
    InterceptOnly,
    /// 1 + x1
    Women,
    /// 1 + x2
    Origin,
    /// 1 + x1 + x2
    Additive,
    /// 1 + x1 + x2 + x1*x2
    Interaction,
}

impl PredictorSpec {
    pub const ALL: [PredictorSpec; 5] = [
        PredictorSpec::InterceptOnly,
        PredictorSpec::Women,
        PredictorSpec::Origin,
        PredictorSpec::Additive,
        PredictorSpec::Interaction,
    ];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::Config(format!("predictor spec must be 1..=5, got {i}")))
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).unwrap() + 1
    }

    /// Number of regression coefficients, including the intercept.
    pub fn dim(self) -> usize {
        match self {
            PredictorSpec::InterceptOnly => 1,
            PredictorSpec::Women | PredictorSpec::Origin => 2,
            PredictorSpec::Additive => 3,
            PredictorSpec::Interaction => 4,
        }
    }

    /// Whether the spec uses the prop_women covariate.
    pub fn uses_prop_women(self) -> bool {
        !matches!(self, PredictorSpec::InterceptOnly | PredictorSpec::Origin)
    }

    /// h(x) for one record.
    pub fn row(self, x1: f64, x2: f64) -> Vec<f64> {
        match self {
            PredictorSpec::InterceptOnly => vec![1.0],
            PredictorSpec::Women => vec![1.0, x1],
            PredictorSpec::Origin => vec![1.0, x2],
            PredictorSpec::Additive => vec![1.0, x1, x2],
            PredictorSpec::Interaction => vec![1.0, x1, x2, x1 * x2],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PredictorSpec::InterceptOnly => "1",
            PredictorSpec::Women => "1 + x1",
            PredictorSpec::Origin => "1 + x2",
            PredictorSpec::Additive => "1 + x1 + x2",
            PredictorSpec::Interaction => "1 + x1 + x2 + x1:x2",
        }
    }
}

impl std::fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A design matrix with per-row log-exposure offsets.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub spec: PredictorSpec,
}

impl DesignMatrix {
    /// Builds the design for a dataset. Fails if the spec needs prop_women
    /// and any record lacks it.
    pub fn build(data: &Dataset, spec: PredictorSpec) -> Result<Self> {
        let n = data.len();
        let p = spec.dim();
        let mut x = DMatrix::zeros(n, p);
        let mut offset = DVector::zeros(n);
        for (i, r) in data.records().iter().enumerate() {
            let x1 = match r.prop_women {
                Some(v) => v,
                None if spec.uses_prop_women() => {
                    return Err(Error::Validation(format!(
                        "record `{}` lacks prop_women, required by predictor `{}`",
                        r.id, spec
                    )))
                }
                None => 0.0,
            };
            for (j, v) in spec.row(x1, r.origin_flag as f64).into_iter().enumerate() {
                x[(i, j)] = v;
            }
            offset[i] = r.exposure.ln();
        }
        Ok(DesignMatrix { x, offset, spec })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }
}

/// Model family for the count response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    ZtPoisson,
    ZtNegBinomial,
    /// Truncated binomial logistic model fitted on counts of one and two.
    TruncBinomial,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::ZtPoisson => "zt-poisson",
            Family::ZtNegBinomial => "zt-negbin",
            Family::TruncBinomial => "trunc-binomial",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Dispersion-boundary status of a negative-binomial fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Interior,
    /// alpha at ALPHA_MIN: extreme overdispersion.
    Lower,
    /// alpha at ALPHA_MAX: the Poisson limit.
    Upper,
}

/// A fitted truncated regression model.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub family: Family,
    pub spec: PredictorSpec,
    pub beta: DVector<f64>,
    /// Covariance of beta-hat (observed-information inverse).
    pub cov_beta: DMatrix<f64>,
    /// For the negative binomial: covariance of (beta, ln alpha); otherwise
    /// identical to `cov_beta`.
    pub cov_full: DMatrix<f64>,
    /// Negative-binomial dispersion alpha (None for other families).
    pub alpha: Option<f64>,
    pub boundary: Boundary,
    pub loglik: f64,
    pub bic: f64,
    pub n_used: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl FittedModel {
    /// Linear predictors eta = X beta + offset.
    pub fn eta(&self, design: &DesignMatrix) -> DVector<f64> {
        &design.x * &self.beta + &design.offset
    }

    /// Fitted means mu = exp(eta) (count families) on a design.
    pub fn mu(&self, design: &DesignMatrix) -> DVector<f64> {
        self.eta(design).map(f64::exp)
    }
}

/// log(1 - p0) for the zero-truncated Poisson, computed stably.
fn ztp_log_one_minus_p0(mu: f64) -> f64 {
    // 1 - e^{-mu}
    (-(-mu).exp_m1()).ln()
}

/// Per-observation zero-truncated Poisson log-likelihood.
fn ztp_loglik_i(y: f64, mu: f64) -> f64 {
    y * mu.ln() - mu - ln_gamma(y + 1.0) - ztp_log_one_minus_p0(mu)
}

/// Fits the zero-truncated Poisson by Newton-Raphson with step-halving.
pub fn fit_zt_poisson(data: &Dataset, spec: PredictorSpec) -> Result<FittedModel> {
    let design = DesignMatrix::build(data, spec)?;
    let y: Vec<f64> = data.counts().iter().map(|&c| c as f64).collect();
    let n = data.len();
    let p = spec.dim();
    if n < p + 1 {
        return Err(Error::InsufficientData(format!(
            "zt-poisson with {p} coefficients needs at least {} records, have {n}",
            p + 1
        )));
    }
    if y.iter().any(|&v| v < 1.0) {
        return Err(Error::Validation(
            "zero-truncated fit requires all counts >= 1".into(),
        ));
    }

    let total_e: f64 = data.exposures().iter().sum();
    let mut beta = DVector::zeros(p);
    beta[0] = (y.iter().sum::<f64>() / total_e).ln();

    let loglik = |b: &DVector<f64>| -> f64 {
        let eta = &design.x * b + &design.offset;
        eta.iter()
            .zip(&y)
            .map(|(&e, &yi)| ztp_loglik_i(yi, e.exp()))
            .sum()
    };

    let mut ll = loglik(&beta);
    let mut converged = false;
    let mut iter = 0;
    while iter < MAX_ITER {
        iter += 1;
        let eta = &design.x * &beta + &design.offset;
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let mu: f64 = eta[i].exp();
            let omp0 = -(-mu).exp_m1(); // 1 - e^{-mu}
            let s = y[i] - mu / omp0;
            let w = (mu * (omp0 - mu * (-mu).exp()) / (omp0 * omp0)).max(1e-12);
            let xi = design.x.row(i);
            for a in 0..p {
                score[a] += s * xi[a];
                for b in 0..p {
                    info[(a, b)] += w * xi[a] * xi[b];
                }
            }
        }
        let chol = info
            .clone()
            .cholesky()
            .ok_or(Error::Singular(iter))?;
        let step = chol.solve(&score);
        // Step-halving keeps the likelihood monotone.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + t * &step;
            let cand_ll = loglik(&cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 {
                let delta = (cand_ll - ll).abs();
                beta = cand;
                ll = cand_ll;
                accepted = true;
                // A likelihood plateau counts as convergence: near-separated
                // fits approach their supremum with steps that stay large.
                if delta < TOL {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No direction improves the likelihood: we are at the optimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(iter));
    }

    // Observed information at the optimum.
    let eta = &design.x * &beta + &design.offset;
    let mut info = DMatrix::zeros(p, p);
    for i in 0..n {
        let mu: f64 = eta[i].exp();
        let omp0 = -(-mu).exp_m1();
        let w = mu * (omp0 - mu * (-mu).exp()) / (omp0 * omp0);
        let xi = design.x.row(i);
        for a in 0..p {
            for b in 0..p {
                info[(a, b)] += w * xi[a] * xi[b];
            }
        }
    }
    let cov = invert_spd(&info, iter)?;
    let bic = -2.0 * ll + p as f64 * (n as f64).ln();
    Ok(FittedModel {
        family: Family::ZtPoisson,
        spec,
        beta,
        cov_beta: cov.clone(),
        cov_full: cov,
        alpha: None,
        boundary: Boundary::Interior,
        loglik: ll,
        bic,
        n_used: n,
        converged: true,
        iterations: iter,
    })
}

/// log(1 - p0) for the zero-truncated negative binomial with p0 =
/// (alpha/(mu+alpha))^alpha, computed via expm1 to survive p0 -> 1.
fn ztnb_log_one_minus_p0(mu: f64, alpha: f64) -> f64 {
    (-(alpha * (alpha.ln() - (mu + alpha).ln())).exp_m1()).ln()
}

fn ztnb_loglik_i(y: f64, mu: f64, alpha: f64) -> f64 {
    ln_gamma(y + alpha) - ln_gamma(alpha) - ln_gamma(y + 1.0) + alpha * alpha.ln()
        + y * mu.ln()
        - (y + alpha) * (mu + alpha).ln()
        - ztnb_log_one_minus_p0(mu, alpha)
}

/// Fits beta for fixed alpha by Newton with a numerically differentiated
/// per-observation Hessian weight. Returns (beta, profile loglik, iterations).
fn ztnb_fit_beta(
    design: &DesignMatrix,
    y: &[f64],
    alpha: f64,
    init: &DVector<f64>,
) -> Result<(DVector<f64>, f64, usize)> {
    let n = design.nrows();
    let p = design.x.ncols();

    let score_eta = |eta: f64, yi: f64| -> f64 {
        let eta = eta.clamp(-300.0, 300.0);
        let mu: f64 = eta.exp();
        let log_p0 = alpha * (alpha.ln() - (mu + alpha).ln());
        let omp0 = -log_p0.exp_m1();
        yi - mu * (yi + alpha) / (mu + alpha) - alpha * mu * log_p0.exp() / ((mu + alpha) * omp0)
    };
    let loglik = |b: &DVector<f64>| -> f64 {
        let eta = &design.x * b + &design.offset;
        eta.iter()
            .zip(y)
            .map(|(&e, &yi)| ztnb_loglik_i(yi, e.clamp(-300.0, 300.0).exp(), alpha))
            .sum()
    };

    let mut beta = init.clone();
    let mut ll = loglik(&beta);
    if !ll.is_finite() {
        beta = DVector::zeros(p);
        let total_e: f64 = design.offset.iter().map(|&o| o.exp()).sum();
        beta[0] = (y.iter().sum::<f64>() / total_e).ln();
        ll = loglik(&beta);
    }
    let mut iter = 0;
    loop {
        iter += 1;
        if iter > MAX_ITER {
            return Err(Error::NonConvergence(MAX_ITER));
        }
        let eta = &design.x * &beta + &design.offset;
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        let h = 1e-6;
        for i in 0..n {
            let s = score_eta(eta[i], y[i]);
            // w = -ds/deta by central difference; floored for stability.
            let w = (-(score_eta(eta[i] + h, y[i]) - score_eta(eta[i] - h, y[i])) / (2.0 * h))
                .max(1e-10);
            let xi = design.x.row(i);
            for a in 0..p {
                score[a] += s * xi[a];
                for b in 0..p {
                    info[(a, b)] += w * xi[a] * xi[b];
                }
            }
        }
        let step = match info.clone().cholesky() {
            Some(c) => c.solve(&score),
            None => return Err(Error::Singular(iter)),
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let cand = &beta + t * &step;
            let cand_ll = loglik(&cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 {
                let delta = cand_ll - ll;
                beta = cand;
                ll = cand_ll;
                improved = true;
                if delta.abs() < TOL {
                    return Ok((beta, ll, iter));
                }
                break;
            }
            t *= 0.5;
        }
        if !improved {
            return Ok((beta, ll, iter));
        }
    }
}

/// Full negative-binomial log-likelihood at (beta, ln alpha).
fn ztnb_loglik_full(design: &DesignMatrix, y: &[f64], theta: &DVector<f64>) -> f64 {
    let p = design.x.ncols();
    let beta = theta.rows(0, p).into_owned();
    let alpha = theta[p].exp();
    let eta = &design.x * &beta + &design.offset;
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| ztnb_loglik_i(yi, e.clamp(-300.0, 300.0).exp(), alpha))
        .sum()
}

/// Fits the zero-truncated negative binomial by profiling the likelihood
/// over ln alpha (grid scan plus golden-section refinement; the profile can
/// be flat and multimodal, so a pure descent method is not reliable).
pub fn fit_zt_negbin(data: &Dataset, spec: PredictorSpec) -> Result<FittedModel> {
    let design = DesignMatrix::build(data, spec)?;
    let y: Vec<f64> = data.counts().iter().map(|&c| c as f64).collect();
    let n = data.len();
    let p = spec.dim();
    if n < p + 2 {
        return Err(Error::InsufficientData(format!(
            "zt-negbin with {p} coefficients needs at least {} records, have {n}",
            p + 2
        )));
    }
    if y.iter().any(|&v| v < 1.0) {
        return Err(Error::Validation(
            "zero-truncated fit requires all counts >= 1".into(),
        ));
    }

    let total_e: f64 = data.exposures().iter().sum();
    let mut warm = DVector::zeros(p);
    warm[0] = (y.iter().sum::<f64>() / total_e).ln();

    let lo = ALPHA_MIN.ln();
    let hi = ALPHA_MAX.ln();
    let grid_n = 60;
    let mut profile: Vec<(f64, f64, DVector<f64>)> = Vec::with_capacity(grid_n);
    let mut total_iters = 0usize;
    for k in 0..grid_n {
        let la = lo + (hi - lo) * k as f64 / (grid_n - 1) as f64;
        match ztnb_fit_beta(&design, &y, la.exp(), &warm) {
            Ok((b, ll, it)) => {
                total_iters += it;
                warm = b.clone();
                profile.push((la, ll, b));
            }
            Err(_) => profile.push((la, f64::NEG_INFINITY, warm.clone())),
        }
    }
    let best_idx = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .map(|(i, _)| i)
        .ok_or(Error::NonConvergence(0))?;
    if !profile[best_idx].1.is_finite() {
        return Err(Error::NonConvergence(total_iters));
    }

    // Golden-section refinement inside the bracketing grid interval. The
    // running best (ln alpha, loglik, beta) is tracked through every
    // evaluation so no final refit (which could drift to a different local
    // optimum in this multimodal profile) is needed.
    let (mut a, mut b) = (
        profile[best_idx.saturating_sub(1)].0,
        profile[(best_idx + 1).min(grid_n - 1)].0,
    );
    let mut warm = profile[best_idx].2.clone();
    let mut best = profile[best_idx].clone();
    // Exact boundary optima take precedence over interior grid points of
    // equal likelihood.
    for &end in &[grid_n - 1, 0usize] {
        if profile[end].1 >= best.1 {
            best = profile[end].clone();
        }
    }
    let eval = |la: f64, warm: &mut DVector<f64>, best: &mut (f64, f64, DVector<f64>)| -> f64 {
        match ztnb_fit_beta(&design, &y, la.exp(), warm) {
            Ok((bb, ll, _)) => {
                *warm = bb.clone();
                if ll > best.1 {
                    *best = (la, ll, bb);
                }
                ll
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (
        eval(c, &mut warm, &mut best),
        eval(d, &mut warm, &mut best),
    );
    for _ in 0..40 {
        if b - a < 1e-7 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c, &mut warm, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d, &mut warm, &mut best);
        }
    }
    let (la_best, ll, beta) = best;
    let iters = 0;
    let alpha = la_best.exp();
    let boundary = if (la_best - lo).abs() < 1e-6 {
        Boundary::Lower
    } else if (la_best - hi).abs() < 1e-6 {
        Boundary::Upper
    } else {
        Boundary::Interior
    };

    // Observed information over (beta, ln alpha) by central differences.
    let mut theta = DVector::zeros(p + 1);
    theta.rows_mut(0, p).copy_from(&beta);
    theta[p] = la_best;
    let hess = numeric_hessian(|t| ztnb_loglik_full(&design, &y, t), &theta, 1e-4);
    let neg_hess = -hess;
    let cov_full = invert_spd_or_pinv(&neg_hess);
    let cov_beta = cov_full.view((0, 0), (p, p)).into_owned();

    // One extra parameter (the dispersion) enters the BIC penalty.
    let bic = -2.0 * ll + (p as f64 + 1.0) * (n as f64).ln();
    Ok(FittedModel {
        family: Family::ZtNegBinomial,
        spec,
        beta,
        cov_beta,
        cov_full,
        alpha: Some(alpha),
        boundary,
        loglik: ll,
        bic,
        n_used: n,
        converged: true,
        iterations: total_iters + iters,
    })
}

/// Fits the truncated binomial logistic model: among records with counts of
/// one or two, z = [count == 2] ~ Bernoulli(q), logit(q) = h(x)'beta + log e.
pub fn fit_trunc_binomial(data: &Dataset, spec: PredictorSpec) -> Result<FittedModel> {
    let sub = data.ones_and_twos();
    let m = sub.len();
    let p = spec.dim();
    if m < p + 1 {
        return Err(Error::InsufficientData(format!(
            "truncated binomial with {p} coefficients needs at least {} records \
             with counts of 1 or 2, have {m}",
            p + 1
        )));
    }
    let z: Vec<f64> = sub
        .counts()
        .iter()
        .map(|&c| if c == 2 { 1.0 } else { 0.0 })
        .collect();
    let ones: f64 = z.iter().filter(|&&v| v == 0.0).count() as f64;
    let twos: f64 = z.iter().filter(|&&v| v == 1.0).count() as f64;
    if ones == 0.0 || twos == 0.0 {
        return Err(Error::InsufficientData(
            "truncated binomial needs both one-counts and two-counts".into(),
        ));
    }
    let design = DesignMatrix::build(&sub, spec)?;

    // With zero coefficients the large offsets push q to 1 and the weights
    // to 0, so start from the marginal log-odds net of the mean offset.
    let mut beta = DVector::zeros(p);
    beta[0] = (twos / ones).ln() - design.offset.mean();

    let loglik = |b: &DVector<f64>| -> f64 {
        let eta = &design.x * b + &design.offset;
        eta.iter()
            .zip(&z)
            .map(|(&e, &zi)| {
                // z*eta - log(1+e^eta), stable in both tails
                zi * e - if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() }
            })
            .sum()
    };

    let mut ll = loglik(&beta);
    let mut converged = false;
    let mut iter = 0;
    while iter < MAX_ITER {
        iter += 1;
        let eta = &design.x * &beta + &design.offset;
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..m {
            let q = 1.0 / (1.0 + (-eta[i]).exp());
            let w = (q * (1.0 - q)).max(1e-12);
            let xi = design.x.row(i);
            for a in 0..p {
                score[a] += (z[i] - q) * xi[a];
                for b in 0..p {
                    info[(a, b)] += w * xi[a] * xi[b];
                }
            }
        }
        let chol = info.clone().cholesky().ok_or(Error::Singular(iter))?;
        let step = chol.solve(&score);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + t * &step;
            let cand_ll = loglik(&cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 {
                let delta = (cand_ll - ll).abs();
                beta = cand;
                ll = cand_ll;
                accepted = true;
                // A likelihood plateau counts as convergence: near-separated
                // fits approach their supremum with steps that stay large.
                if delta < TOL {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No direction improves the likelihood: we are at the optimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(iter));
    }

    let eta = &design.x * &beta + &design.offset;
    let mut info = DMatrix::zeros(p, p);
    for i in 0..m {
        let q = 1.0 / (1.0 + (-eta[i]).exp());
        let w = q * (1.0 - q);
        let xi = design.x.row(i);
        for a in 0..p {
            for b in 0..p {
                info[(a, b)] += w * xi[a] * xi[b];
            }
        }
    }
    let cov = invert_spd(&info, iter)?;
    let bic = -2.0 * ll + p as f64 * (m as f64).ln();
    Ok(FittedModel {
        family: Family::TruncBinomial,
        spec,
        beta,
        cov_beta: cov.clone(),
        cov_full: cov,
        alpha: None,
        boundary: Boundary::Interior,
        loglik: ll,
        bic,
        n_used: m,
        converged: true,
        iterations: iter,
    })
}

/// Fits one family for a given spec.
pub fn fit(data: &Dataset, family: Family, spec: PredictorSpec) -> Result<FittedModel> {
    match family {
        Family::ZtPoisson => fit_zt_poisson(data, spec),
        Family::ZtNegBinomial => fit_zt_negbin(data, spec),
        Family::TruncBinomial => fit_trunc_binomial(data, spec),
    }
}

/// Evaluates a family's log-likelihood at an arbitrary coefficient vector.
/// `alpha` is required for the negative binomial and ignored otherwise.
/// The truncated binomial restricts to records with counts of one or two.
/// Intended for diagnostics, e.g. checking scores against finite differences.
pub fn loglik_at(
    data: &Dataset,
    family: Family,
    spec: PredictorSpec,
    beta: &DVector<f64>,
    alpha: Option<f64>,
) -> Result<f64> {
    match family {
        Family::ZtPoisson => {
            let design = DesignMatrix::build(data, spec)?;
            let y: Vec<f64> = data.counts().iter().map(|&c| c as f64).collect();
            let eta = &design.x * beta + &design.offset;
            Ok(eta
                .iter()
                .zip(&y)
                .map(|(&e, &yi)| ztp_loglik_i(yi, e.exp()))
                .sum())
        }
        Family::ZtNegBinomial => {
            let a = alpha.ok_or_else(|| {
                Error::Config("negative binomial log-likelihood needs alpha".into())
            })?;
            let design = DesignMatrix::build(data, spec)?;
            let y: Vec<f64> = data.counts().iter().map(|&c| c as f64).collect();
            let eta = &design.x * beta + &design.offset;
            Ok(eta
                .iter()
                .zip(&y)
                .map(|(&e, &yi)| ztnb_loglik_i(yi, e.clamp(-300.0, 300.0).exp(), a))
                .sum())
        }
        Family::TruncBinomial => {
            let sub = data.ones_and_twos();
            let design = DesignMatrix::build(&sub, spec)?;
            let z: Vec<f64> = sub
                .counts()
                .iter()
                .map(|&c| if c == 2 { 1.0 } else { 0.0 })
                .collect();
            let eta = &design.x * beta + &design.offset;
            Ok(eta
                .iter()
                .zip(&z)
                .map(|(&e, &zi)| {
                    zi * e - if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() }
                })
                .sum())
        }
    }
}

/// Analytic score (gradient of the log-likelihood in beta) at an arbitrary
/// coefficient vector. Companion to [`loglik_at`].
pub fn score_at(
    data: &Dataset,
    family: Family,
    spec: PredictorSpec,
    beta: &DVector<f64>,
    alpha: Option<f64>,
) -> Result<DVector<f64>> {
    let p = spec.dim();
    let mut score = DVector::zeros(p);
    match family {
        Family::ZtPoisson => {
            let design = DesignMatrix::build(data, spec)?;
            let y: Vec<f64> = data.counts().iter().map(|&c| c as f64).collect();
            let eta = &design.x * beta + &design.offset;
            for i in 0..design.nrows() {
                let mu: f64 = eta[i].exp();
                let omp0 = -(-mu).exp_m1();
                let s = y[i] - mu / omp0;
                for a in 0..p {
                    score[a] += s * design.x[(i, a)];
                }
            }
        }
        Family::ZtNegBinomial => {
            let alpha = alpha.ok_or_else(|| {
                Error::Config("negative binomial score needs alpha".into())
            })?;
            let design = DesignMatrix::build(data, spec)?;
            let y: Vec<f64> = data.counts().iter().map(|&c| c as f64).collect();
            let eta = &design.x * beta + &design.offset;
            for i in 0..design.nrows() {
                let e = eta[i].clamp(-300.0, 300.0);
                let mu: f64 = e.exp();
                let log_p0 = alpha * (alpha.ln() - (mu + alpha).ln());
                let omp0 = -log_p0.exp_m1();
                let s = y[i] - mu * (y[i] + alpha) / (mu + alpha)
                    - alpha * mu * log_p0.exp() / ((mu + alpha) * omp0);
                for a in 0..p {
                    score[a] += s * design.x[(i, a)];
                }
            }
        }
        Family::TruncBinomial => {
            let sub = data.ones_and_twos();
            let design = DesignMatrix::build(&sub, spec)?;
            let z: Vec<f64> = sub
                .counts()
                .iter()
                .map(|&c| if c == 2 { 1.0 } else { 0.0 })
                .collect();
            let eta = &design.x * beta + &design.offset;
            for i in 0..design.nrows() {
                let q = 1.0 / (1.0 + (-eta[i]).exp());
                for a in 0..p {
                    score[a] += (z[i] - q) * design.x[(i, a)];
                }
            }
        }
    }
    Ok(score)
}

/// Fits all five predictor specs for a family. Specs that cannot be fitted
/// (e.g. insufficient data) are recorded as errors, not fatal.
pub fn fit_all_specs(data: &Dataset, family: Family) -> Vec<(PredictorSpec, Result<FittedModel>)> {
    PredictorSpec::ALL
        .iter()
        .map(|&s| (s, fit(data, family, s)))
        .collect()
}

/// Selects the spec with minimal BIC within one family. Ties break toward
/// the simpler (earlier) spec.
pub fn select_spec(data: &Dataset, family: Family) -> Result<FittedModel> {
    let mut best: Option<FittedModel> = None;
    let mut errs = Vec::new();
    for (s, r) in fit_all_specs(data, family) {
        match r {
            Ok(m) => {
                if best.as_ref().map_or(true, |b| m.bic < b.bic) {
                    best = Some(m);
                }
            }
            Err(e) => errs.push(format!("{s}: {e}")),
        }
    }
    best.ok_or_else(|| Error::Selection(format!("no candidate model could be fitted: {}", errs.join("; "))))
}

/// Selects between the zero-truncated Poisson and negative binomial by BIC,
/// each at its own best spec.
pub fn select_count_family(data: &Dataset) -> Result<FittedModel> {
    let pois = select_spec(data, Family::ZtPoisson);
    let nb = select_spec(data, Family::ZtNegBinomial);
    match (pois, nb) {
        (Ok(p), Ok(n)) => Ok(if n.bic < p.bic { n } else { p }),
        (Ok(p), Err(_)) => Ok(p),
        (Err(_), Ok(n)) => Ok(n),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Central-difference Hessian of a scalar function.
pub fn numeric_hessian<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    theta: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let k = theta.len();
    let mut hess = DMatrix::zeros(k, k);
    let f0 = f(theta);
    for a in 0..k {
        for b in a..k {
            let v = if a == b {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[a] += h;
                tm[a] -= h;
                (f(&tp) - 2.0 * f0 + f(&tm)) / (h * h)
            } else {
                let mut tpp = theta.clone();
                let mut tpm = theta.clone();
                let mut tmp = theta.clone();
                let mut tmm = theta.clone();
                tpp[a] += h;
                tpp[b] += h;
                tpm[a] += h;
                tpm[b] -= h;
                tmp[a] -= h;
                tmp[b] += h;
                tmm[a] -= h;
                tmm[b] -= h;
                (f(&tpp) - f(&tpm) - f(&tmp) + f(&tmm)) / (4.0 * h * h)
            };
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    hess
}

fn invert_spd(m: &DMatrix<f64>, iter: usize) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::Singular(iter))
}

/// Plain inverse with an SVD pseudo-inverse fallback. Boundary fits can have
/// an indefinite observed information; downstream variance formulas guard
/// against the resulting negative quadratic forms.
fn invert_spd_or_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(inv) = m.clone().try_inverse() {
        return inv;
    }
    m.clone()
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .unwrap_or_else(|_| DMatrix::from_element(m.nrows(), m.ncols(), f64::NAN))
}
