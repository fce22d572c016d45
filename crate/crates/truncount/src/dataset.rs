//! Study-level count datasets: loading, validation, truncation bookkeeping,
//! missing-covariate imputation and empirical outlier bounds.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One study: an event count with its exposure (person-years) and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub id: String,
    /// Completed event count, `y_i`.
    pub count: u64,
    /// Person-years of observation, `e_i`. Strictly positive.
    pub exposure: f64,
    /// Proportion of women, `x_1`, in `[0, 1]` when present.
    pub prop_women: Option<f64>,
    /// Country-of-origin indicator, `x_2` (1 = reference country).
    pub origin_flag: u8,
}

impl StudyRecord {
    pub fn new(
        id: impl Into<String>,
        count: u64,
        exposure: f64,
        prop_women: Option<f64>,
        origin_flag: u8,
    ) -> Result<Self> {
        let rec = StudyRecord {
            id: id.into(),
            count,
            exposure,
            prop_women,
            origin_flag,
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.exposure > 0.0) || !self.exposure.is_finite() {
            return Err(Error::Validation(format!(
                "record `{}`: exposure must be a positive real, got {}",
                self.id, self.exposure
            )));
        }
        if let Some(p) = self.prop_women {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!(
                    "record `{}`: prop_women must lie in [0,1], got {p}",
                    self.id
                )));
            }
        }
        if self.origin_flag > 1 {
            return Err(Error::Validation(format!(
                "record `{}`: origin_flag must be 0 or 1, got {}",
                self.id, self.origin_flag
            )));
        }
        Ok(())
    }

    /// Observed event rate `y_i / e_i`.
    pub fn rate(&self) -> f64 {
        self.count as f64 / self.exposure
    }
}

/// An ordered collection of study records with a truncation flag.
///
/// `truncated` records that zero-count studies are structurally absent (they
/// never entered the data), as opposed to merely not having occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<StudyRecord>,
    truncated: bool,
}

impl Dataset {
    pub fn new(records: Vec<StudyRecord>, truncated: bool) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate record id `{}`", r.id)));
            }
            if truncated && r.count == 0 {
                return Err(Error::Validation(format!(
                    "record `{}` has count 0 in a dataset flagged as truncated",
                    r.id
                )));
            }
        }
        Ok(Dataset { records, truncated })
    }

    pub fn records(&self) -> &[StudyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn counts(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.count).collect()
    }

    pub fn exposures(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.exposure).collect()
    }

    /// True when every record carries a prop_women value.
    pub fn covariates_complete(&self) -> bool {
        self.records.iter().all(|r| r.prop_women.is_some())
    }

    /// Loads a dataset from a CSV file with header
    /// `id,count,exposure,prop_women,origin_flag`. Lines starting with `#`
    /// are comments. Empty `prop_women` cells become absent values. The
    /// dataset is flagged truncated when no zero counts are present.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut raw = String::new();
        std::fs::File::open(path.as_ref())?.read_to_string(&mut raw)?;
        Self::parse_csv(&raw)
    }

    pub fn parse_csv(raw: &str) -> Result<Self> {
        let body: String = raw
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n");
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Validation(format!("missing header row: {e}")))?
            .clone();
        let expected = ["id", "count", "exposure", "prop_women", "origin_flag"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::Validation(format!(
                "header mismatch: expected {expected:?}, got {got:?}"
            )));
        }

        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row_no = i + 2; // 1-based, after header
            let row = row.map_err(|e| Error::Parse {
                row: row_no,
                column: "<row>".into(),
                message: e.to_string(),
            })?;
            let field = |idx: usize, name: &str| -> Result<String> {
                row.get(idx).map(|s| s.to_string()).ok_or(Error::Parse {
                    row: row_no,
                    column: name.into(),
                    message: "missing field".into(),
                })
            };
            let id = field(0, "id")?;
            let count: u64 = field(1, "count")?.parse().map_err(|e| Error::Parse {
                row: row_no,
                column: "count".into(),
                message: format!("{e}"),
            })?;
            let exposure: f64 = field(2, "exposure")?.parse().map_err(|e| Error::Parse {
                row: row_no,
                column: "exposure".into(),
                message: format!("{e}"),
            })?;
            let pw_raw = field(3, "prop_women")?;
            let prop_women = if pw_raw.is_empty() {
                None
            } else {
                Some(pw_raw.parse::<f64>().map_err(|e| Error::Parse {
                    row: row_no,
                    column: "prop_women".into(),
                    message: format!("{e}"),
                })?)
            };
            let origin_flag: u8 = field(4, "origin_flag")?.parse().map_err(|e| Error::Parse {
                row: row_no,
                column: "origin_flag".into(),
                message: format!("{e}"),
            })?;
            records.push(StudyRecord::new(id, count, exposure, prop_women, origin_flag)?);
        }
        if records.is_empty() {
            return Err(Error::Validation("no records".into()));
        }
        let truncated = records.iter().all(|r| r.count > 0);
        Dataset::new(records, truncated)
    }

    /// Writes the dataset back out in the `load_csv` schema. Numeric fields
    /// use shortest round-trip formatting, so load → write → load is exact.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,count,exposure,prop_women,origin_flag")?;
        for r in &self.records {
            let pw = r.prop_women.map(|p| p.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.id, r.count, r.exposure, pw, r.origin_flag
            )?;
        }
        Ok(())
    }

    /// Removes all zero-count records. Idempotent; survivor order preserved.
    pub fn zero_truncate(&self) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .filter(|r| r.count > 0)
                .cloned()
                .collect(),
            truncated: true,
        }
    }

    /// Exact multiset census of the counts.
    pub fn frequency_table(&self) -> FrequencyTable {
        let mut map = BTreeMap::new();
        for r in &self.records {
            *map.entry(r.count).or_insert(0u64) += 1;
        }
        FrequencyTable { freqs: map }
    }

    /// Restricts the data to records with counts of one or two, the subset
    /// the truncated binomial model is fitted on (M = f_1 + f_2 records).
    pub fn ones_and_twos(&self) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .filter(|r| r.count == 1 || r.count == 2)
                .cloned()
                .collect(),
            truncated: true,
        }
    }

    /// Appends outlier records after the existing ones, order preserved.
    pub fn append_outlier_records(&self, outliers: &[StudyRecord]) -> Result<Dataset> {
        let mut records = self.records.clone();
        records.extend_from_slice(outliers);
        Dataset::new(records, self.truncated && outliers.iter().all(|r| r.count > 0))
    }

    /// Fills absent prop_women values by ordinary-least-squares regression on
    /// {exposure, origin_flag, exposure x origin_flag}, the model chosen by
    /// backwards stepwise BIC (interaction removable before main effects).
    /// Predictions are clamped to [0, 1]. Records with prop_women present are
    /// never altered.
    pub fn impute_missing_proportion(&self) -> Result<Dataset> {
        let missing: Vec<usize> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.prop_women.is_none())
            .map(|(i, _)| i)
            .collect();
        if missing.is_empty() {
            return Ok(self.clone());
        }
        let complete: Vec<&StudyRecord> = self
            .records
            .iter()
            .filter(|r| r.prop_women.is_some())
            .collect();
        // 3 candidate terms plus intercept, and one spare observation.
        if complete.len() < 5 {
            return Err(Error::InsufficientData(format!(
                "imputation needs at least 5 complete records, have {}",
                complete.len()
            )));
        }
        let y: Vec<f64> = complete.iter().map(|r| r.prop_women.unwrap()).collect();
        let model = StepwiseOls::fit(&complete, &y)?;
        let mut records = self.records.clone();
        for i in missing {
            let pred = model.predict(&records[i]);
            records[i].prop_women = Some(pred.clamp(0.0, 1.0));
        }
        Ok(Dataset {
            records,
            truncated: self.truncated,
        })
    }

    /// Empirical bound above which observed rates are classed as outliers:
    /// lower = Q3 + 3*IQR of the rates, upper = 1.2 * lower. Quantiles use
    /// linear interpolation between order statistics (the "type 7" rule).
    pub fn outlier_bounds(&self) -> Result<OutlierBounds> {
        if self.len() < 4 {
            return Err(Error::InsufficientData(format!(
                "outlier bounds need at least 4 records, have {}",
                self.len()
            )));
        }
        let mut rates: Vec<f64> = self.records.iter().map(|r| r.rate()).collect();
        rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile_type7(&rates, 0.25);
        let q3 = quantile_type7(&rates, 0.75);
        let lower = q3 + 3.0 * (q3 - q1);
        Ok(OutlierBounds {
            lower,
            upper: 1.2 * lower,
        })
    }
}

/// Linear-interpolation quantile at position `1 + (n-1)p` (sorted input).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0 && (0.0..=1.0).contains(&p));
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Frequency table f_y of the observed counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    freqs: BTreeMap<u64, u64>,
}

impl FrequencyTable {
    /// Frequency of exactly `y` counts (0 when unobserved).
    pub fn get(&self, y: u64) -> u64 {
        self.freqs.get(&y).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.freqs.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.freqs.iter().map(|(&y, &f)| (y, f))
    }
}

/// Rate bounds for outlier classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Backwards-stepwise OLS used by the imputation step.
struct StepwiseOls {
    /// Retained terms, subset of {Exposure, Origin, Interaction}.
    terms: Vec<Term>,
    beta: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    Exposure,
    Origin,
    Interaction,
}

impl Term {
    fn value(self, r: &StudyRecord) -> f64 {
        match self {
            Term::Exposure => r.exposure,
            Term::Origin => r.origin_flag as f64,
            Term::Interaction => r.exposure * r.origin_flag as f64,
        }
    }
}

impl StepwiseOls {
    fn fit(records: &[&StudyRecord], y: &[f64]) -> Result<Self> {
        let mut terms = vec![Term::Exposure, Term::Origin, Term::Interaction];
        let (mut beta, mut bic) = Self::ols_bic(records, y, &terms)?;
        loop {
            let mut best: Option<(Vec<Term>, DVector<f64>, f64)> = None;
            for &t in &terms {
                // Marginality: main effects stay while the interaction is in.
                if t != Term::Interaction && terms.contains(&Term::Interaction) {
                    continue;
                }
                let trial: Vec<Term> = terms.iter().copied().filter(|&u| u != t).collect();
                let (b, candidate) = Self::ols_bic(records, y, &trial)?;
                if candidate < bic && best.as_ref().map_or(true, |(_, _, bb)| candidate < *bb) {
                    best = Some((trial, b, candidate));
                }
            }
            match best {
                Some((t, b, c)) => {
                    terms = t;
                    beta = b;
                    bic = c;
                }
                None => break,
            }
        }
        Ok(StepwiseOls { terms, beta })
    }

    fn ols_bic(records: &[&StudyRecord], y: &[f64], terms: &[Term]) -> Result<(DVector<f64>, f64)> {
        let n = records.len();
        let p = terms.len() + 1;
        let mut x = DMatrix::zeros(n, p);
        for (i, r) in records.iter().enumerate() {
            x[(i, 0)] = 1.0;
            for (j, &t) in terms.iter().enumerate() {
                x[(i, j + 1)] = t.value(r);
            }
        }
        let yv = DVector::from_column_slice(y);
        let svd = x.clone().svd(true, true);
        let beta = svd
            .solve(&yv, 1e-12)
            .map_err(|e| Error::Validation(format!("imputation OLS failed: {e}")))?;
        let resid = &yv - &x * &beta;
        let rss = resid.norm_squared();
        // Gaussian BIC with sigma^2 profiled out; RSS floored so degenerate
        // zero-residual fits still compare by parameter count.
        let nf = n as f64;
        let bic = nf * (rss.max(1e-24) / nf).ln() + (p as f64 + 1.0) * nf.ln();
        Ok((beta, bic))
    }

    fn predict(&self, r: &StudyRecord) -> f64 {
        let mut v = self.beta[0];
        for (j, &t) in self.terms.iter().enumerate() {
            v += self.beta[j + 1] * t.value(r);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(id: &str, count: u64, exposure: f64, pw: Option<f64>, of: u8) -> StudyRecord {
        StudyRecord::new(id, count, exposure, pw, of).unwrap()
    }

    #[test]
    fn zero_truncate_removes_zeros_and_is_idempotent() {
        let d = Dataset::new(
            vec![
                rec("a", 0, 1.0, Some(0.5), 0),
                rec("b", 1, 1.0, Some(0.5), 0),
                rec("c", 0, 1.0, Some(0.5), 0),
                rec("d", 2, 1.0, Some(0.5), 0),
            ],
            false,
        )
        .unwrap();
        let t = d.zero_truncate();
        assert_eq!(t.counts(), vec![1, 2]);
        assert!(t.truncated());
        assert_eq!(t.zero_truncate(), t);
    }

    #[test]
    fn frequency_table_census() {
        let d = Dataset::new(
            vec![
                rec("a", 1, 1.0, None, 0),
                rec("b", 1, 1.0, None, 0),
                rec("c", 2, 1.0, None, 0),
            ],
            true,
        )
        .unwrap();
        let ft = d.frequency_table();
        assert_eq!(ft.get(1), 2);
        assert_eq!(ft.get(2), 1);
        assert_eq!(ft.get(3), 0);
        assert_eq!(ft.total(), 3);
    }

    #[test]
    fn empty_dataset_frequency_table_is_zero() {
        let d = Dataset::new(vec![], true).unwrap();
        assert_eq!(d.frequency_table().total(), 0);
    }

    #[test]
    fn parse_rejects_empty_data_section() {
        let err = Dataset::parse_csv("id,count,exposure,prop_women,origin_flag\n").unwrap_err();
        assert!(err.to_string().contains("no records"));
    }

    #[test]
    fn parse_single_record() {
        let d =
            Dataset::parse_csv("id,count,exposure,prop_women,origin_flag\nx,1,100,0.5,0").unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.truncated());
    }

    #[test]
    fn parse_rejects_nonpositive_exposure() {
        let err = Dataset::parse_csv("id,count,exposure,prop_women,origin_flag\nx,1,0,0.5,0")
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn parse_names_bad_row_and_column() {
        let err = Dataset::parse_csv("id,count,exposure,prop_women,origin_flag\nx,one,5,0.5,0")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("count"), "{msg}");
    }

    #[test]
    fn append_outliers_checks_duplicate_ids() {
        let d = Dataset::new(vec![rec("a", 1, 1.0, None, 0)], true).unwrap();
        assert!(d.append_outlier_records(&[rec("a", 2, 1.0, None, 0)]).is_err());
        let d2 = d.append_outlier_records(&[rec("b", 2, 1.0, None, 0)]).unwrap();
        assert_eq!(d2.len(), 2);
        assert_eq!(d2.records()[1].id, "b");
        assert_eq!(d.append_outlier_records(&[]).unwrap(), d);
    }

    #[test]
    fn outlier_bounds_degenerate_spread() {
        let d = Dataset::new(
            (0..5).map(|i| rec(&format!("r{i}"), 2, 4.0, None, 0)).collect(),
            true,
        )
        .unwrap();
        let b = d.outlier_bounds().unwrap();
        assert_abs_diff_eq!(b.lower, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.upper, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn outlier_bounds_need_four_records() {
        let d = Dataset::new(vec![rec("a", 1, 1.0, None, 0)], true).unwrap();
        assert!(d.outlier_bounds().is_err());
    }

    #[test]
    fn impute_constant_response_gives_constant() {
        let mut records: Vec<StudyRecord> = (0..6)
            .map(|i| rec(&format!("r{i}"), 1, 100.0 + i as f64 * 13.0, Some(0.7), (i % 2) as u8))
            .collect();
        records.push(rec("miss", 1, 250.0, None, 1));
        let d = Dataset::new(records, true).unwrap();
        let imputed = d.impute_missing_proportion().unwrap();
        assert_abs_diff_eq!(
            imputed.records().last().unwrap().prop_women.unwrap(),
            0.7,
            epsilon = 1e-9
        );
    }

    #[test]
    fn impute_recovers_exact_linear_relation() {
        let mut records: Vec<StudyRecord> = (0..8)
            .map(|i| {
                let e = 100.0 + 450.0 * i as f64;
                rec(&format!("r{i}"), 1, e, Some(0.5 + 0.0001 * e), (i % 2) as u8)
            })
            .collect();
        records.push(rec("miss", 1, 1234.0, None, 0));
        let d = Dataset::new(records, true).unwrap();
        let imputed = d.impute_missing_proportion().unwrap();
        assert_abs_diff_eq!(
            imputed.records().last().unwrap().prop_women.unwrap(),
            0.5 + 0.0001 * 1234.0,
            epsilon = 1e-8
        );
    }

    #[test]
    fn impute_never_touches_present_values() {
        let records = vec![
            rec("a", 1, 10.0, Some(0.11), 0),
            rec("b", 1, 20.0, Some(0.92), 1),
            rec("c", 1, 30.0, Some(0.33), 0),
            rec("d", 1, 40.0, Some(0.74), 1),
            rec("e", 1, 50.0, Some(0.55), 0),
            rec("f", 1, 60.0, None, 1),
        ];
        let d = Dataset::new(records, true).unwrap();
        let imputed = d.impute_missing_proportion().unwrap();
        for (orig, new) in d.records().iter().zip(imputed.records()) {
            if orig.prop_women.is_some() {
                assert_eq!(orig, new);
            } else {
                assert!(new.prop_women.is_some());
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = Dataset::new(
            vec![
                rec("a b", 3, 77602.0, Some(0.86), 1),
                rec("c", 1, 0.125, None, 0),
            ],
            true,
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let d2 = Dataset::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(d, d2);
    }
}
