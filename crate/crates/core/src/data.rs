//! Subjects, datasets and CSV ingestion.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Failure indicator of one subject, including the "not ascertained" state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Event,
    Censored,
    Missing,
}

impl Status {
    pub fn from_event(event: bool) -> Self {
        if event {
            Status::Event
        } else {
            Status::Censored
        }
    }

    pub fn is_event(self) -> bool {
        self == Status::Event
    }

    pub fn is_missing(self) -> bool {
        self == Status::Missing
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub follow_time: f64,
    pub status: Status,
    pub screener_positive: bool,
    /// Covariates measured at enrollment; these enter the outcome model.
    pub baseline: Vec<f64>,
    /// Covariates measured on the final screener; used only for imputation.
    pub screen: Vec<f64>,
    /// Case weight in (0, 1]. Only split records carry weights below one.
    pub weight: f64,
}

impl Subject {
    pub fn new(
        follow_time: f64,
        status: Status,
        screener_positive: bool,
        baseline: Vec<f64>,
        screen: Vec<f64>,
    ) -> Self {
        Self { follow_time, status, screener_positive, baseline, screen, weight: 1.0 }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// An ordered collection of subjects sharing covariate dimensions.
///
/// Construction checks dimensions only; use [`validate`] (or
/// [`Dataset::validated`]) to check the per-subject invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    subjects: Vec<Subject>,
    baseline_names: Vec<String>,
    screen_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        subjects: Vec<Subject>,
        baseline_names: Vec<String>,
        screen_names: Vec<String>,
    ) -> Result<Self> {
        let (p, q) = (baseline_names.len(), screen_names.len());
        for (row, s) in subjects.iter().enumerate() {
            if s.baseline.len() != p || s.screen.len() != q {
                return Err(Error::DimensionMismatch(format!(
                    "row {row} has {} baseline and {} screen covariates, expected {p} and {q}",
                    s.baseline.len(),
                    s.screen.len()
                )));
            }
        }
        Ok(Self { subjects, baseline_names, screen_names })
    }

    /// Builds a dataset with generated covariate names `z1..zp`, `x1..xq`
    /// taken from the first subject.
    pub fn from_subjects(subjects: Vec<Subject>) -> Result<Self> {
        let (p, q) = subjects.first().map_or((0, 0), |s| (s.baseline.len(), s.screen.len()));
        let baseline_names = (1..=p).map(|j| format!("z{j}")).collect();
        let screen_names = (1..=q).map(|j| format!("x{j}")).collect();
        Self::new(subjects, baseline_names, screen_names)
    }

    /// Like [`Dataset::new`] but also rejects any subject-level violation.
    pub fn validated(
        subjects: Vec<Subject>,
        baseline_names: Vec<String>,
        screen_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self::new(subjects, baseline_names, screen_names)?;
        let violations = validate(&ds);
        match violations.first() {
            None => Ok(ds),
            Some(first) => Err(Error::InvalidDataset {
                count: violations.len(),
                first: first.to_string(),
            }),
        }
    }

    /// A dataset with the same covariate names and different subjects.
    pub fn with_subjects(&self, subjects: Vec<Subject>) -> Result<Self> {
        Self::new(subjects, self.baseline_names.clone(), self.screen_names.clone())
    }

    /// Subjects at `indices`, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
            baseline_names: self.baseline_names.clone(),
            screen_names: self.screen_names.clone(),
        }
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn into_subjects(self) -> Vec<Subject> {
        self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn n_baseline(&self) -> usize {
        self.baseline_names.len()
    }

    pub fn n_screen(&self) -> usize {
        self.screen_names.len()
    }

    pub fn baseline_names(&self) -> &[String] {
        &self.baseline_names
    }

    pub fn screen_names(&self) -> &[String] {
        &self.screen_names
    }

    pub fn count(&self, status: Status) -> usize {
        self.subjects.iter().filter(|s| s.status == status).count()
    }

    pub fn has_missing(&self) -> bool {
        self.subjects.iter().any(|s| s.status.is_missing())
    }

    pub fn missing_indices(&self) -> Vec<usize> {
        self.subjects
            .iter()
            .enumerate()
            .filter(|(_, s)| s.status.is_missing())
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NonPositiveTime,
    NonFiniteCovariate,
    /// Indicators can only be missing after a positive screen.
    MissingWithNegativeScreen,
    WeightOutOfRange,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::NonPositiveTime => "follow-up time must be positive and finite",
            Rule::NonFiniteCovariate => "covariates must be finite",
            Rule::MissingWithNegativeScreen => {
                "missing failure indicator requires a positive screener (MAR design)"
            }
            Rule::WeightOutOfRange => "weight must lie in (0, 1]",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub row: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.rule)
    }
}

/// Reports every subject-level invariant violation, in row order.
pub fn validate(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for (row, s) in dataset.subjects.iter().enumerate() {
        if !(s.follow_time.is_finite() && s.follow_time > 0.0) {
            out.push(Violation { row, rule: Rule::NonPositiveTime });
        }
        if s.baseline.iter().chain(&s.screen).any(|v| !v.is_finite()) {
            out.push(Violation { row, rule: Rule::NonFiniteCovariate });
        }
        if s.status.is_missing() && !s.screener_positive {
            out.push(Violation { row, rule: Rule::MissingWithNegativeScreen });
        }
        if !(s.weight > 0.0 && s.weight <= 1.0) {
            out.push(Violation { row, rule: Rule::WeightOutOfRange });
        }
    }
    out
}

/// Column-name mapping between a CSV file and the dataset fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub time: String,
    pub status: String,
    pub screen: String,
    #[serde(default)]
    pub baseline: Vec<String>,
    #[serde(default)]
    pub screen_covariates: Vec<String>,
    #[serde(default)]
    pub weight: Option<String>,
}

impl CsvSchema {
    pub fn new(time: &str, status: &str, screen: &str) -> Self {
        Self {
            time: time.into(),
            status: status.into(),
            screen: screen.into(),
            baseline: Vec::new(),
            screen_covariates: Vec::new(),
            weight: None,
        }
    }

    pub fn baseline<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.baseline = names.into_iter().map(Into::into).collect();
        self
    }

    pub fn screen_covariates<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.screen_covariates = names.into_iter().map(Into::into).collect();
        self
    }
}

pub const MISSING_MARKER: &str = "NA";

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

/// Parses CSV content. Row indices in errors count data rows from zero.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let time_col = column(&schema.time)?;
    let status_col = column(&schema.status)?;
    let screen_col = column(&schema.screen)?;
    let baseline_cols = schema.baseline.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;
    let screen_cols = schema.screen_covariates.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;
    let weight_col = schema.weight.as_deref().map(column).transpose()?;

    let mut subjects = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let number = |col: usize| -> Result<f64> {
            let raw = field(col);
            raw.parse::<f64>().map_err(|_| Error::MalformedRow {
                row,
                message: format!("`{}` is not a number in column `{}`", raw, &headers[col]),
            })
        };
        let flag = |col: usize| -> Result<bool> {
            match number(col)? {
                1.0 => Ok(true),
                0.0 => Ok(false),
                v => Err(Error::MalformedRow {
                    row,
                    message: format!("`{v}` in column `{}` must be 0 or 1", &headers[col]),
                }),
            }
        };

        let follow_time = number(time_col)?;
        if !(follow_time.is_finite() && follow_time > 0.0) {
            return Err(Error::MalformedRow {
                row,
                message: format!("follow-up time {follow_time} must be positive"),
            });
        }
        let raw_status = field(status_col);
        let status = if raw_status.is_empty() || raw_status == MISSING_MARKER {
            Status::Missing
        } else {
            Status::from_event(flag(status_col)?)
        };
        let screener_positive = flag(screen_col)?;
        if status.is_missing() && !screener_positive {
            return Err(Error::MissingWithNegativeScreen { row });
        }
        let baseline = baseline_cols.iter().map(|&c| number(c)).collect::<Result<Vec<_>>>()?;
        let screen = screen_cols.iter().map(|&c| number(c)).collect::<Result<Vec<_>>>()?;
        let weight = match weight_col {
            Some(c) => number(c)?,
            None => 1.0,
        };
        let subject = Subject { follow_time, status, screener_positive, baseline, screen, weight };
        if let Some(v) = validate_one(row, &subject) {
            return Err(Error::MalformedRow { row, message: v.rule.to_string() });
        }
        subjects.push(subject);
    }
    Dataset::new(subjects, schema.baseline.clone(), schema.screen_covariates.clone())
}

fn validate_one(row: usize, s: &Subject) -> Option<Violation> {
    let tmp = Dataset { subjects: vec![s.clone()], baseline_names: vec![], screen_names: vec![] };
    validate(&tmp).into_iter().next().map(|v| Violation { row, ..v })
}

/// Writes the dataset with the schema's column names. Missing indicators
/// are written as `NA`; numbers use the shortest exact representation.
pub fn write_csv<W: Write>(dataset: &Dataset, schema: &CsvSchema, writer: W) -> Result<()> {
    if schema.baseline.len() != dataset.n_baseline() || schema.screen_covariates.len() != dataset.n_screen() {
        return Err(Error::Schema("schema covariate columns do not match the dataset".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![schema.time.clone(), schema.status.clone(), schema.screen.clone()];
    header.extend(schema.baseline.iter().cloned());
    header.extend(schema.screen_covariates.iter().cloned());
    header.extend(schema.weight.iter().cloned());
    w.write_record(&header)?;
    for s in dataset.subjects() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(s.follow_time.to_string());
        rec.push(
            match s.status {
                Status::Event => "1",
                Status::Censored => "0",
                Status::Missing => MISSING_MARKER,
            }
            .to_string(),
        );
        rec.push(if s.screener_positive { "1" } else { "0" }.to_string());
        rec.extend(s.baseline.iter().map(f64::to_string));
        rec.extend(s.screen.iter().map(f64::to_string));
        if schema.weight.is_some() {
            rec.push(s.weight.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> CsvSchema {
        CsvSchema::new("time", "status", "screen").baseline(["z1"]).screen_covariates(["x1"])
    }

    fn parse(body: &str) -> Result<Dataset> {
        read_csv(format!("time,status,screen,z1,x1\n{body}").as_bytes(), &schema())
    }

    #[test]
    fn parses_observed_row() {
        let ds = parse("3.2,1,1,0.4,1.1\n").unwrap();
        assert_eq!(ds.subjects()[0], Subject::new(3.2, Status::Event, true, vec![0.4], vec![1.1]));
    }

    #[test]
    fn na_and_empty_are_missing() {
        let ds = parse("3.2,NA,1,0.4,1.1\n2.0,,1,0.1,0.2\n").unwrap();
        assert!(ds.subjects().iter().all(|s| s.status == Status::Missing));
    }

    #[test]
    fn missing_with_negative_screen_rejected() {
        assert!(matches!(parse("3.2,NA,0,0.4,1.1\n"), Err(Error::MissingWithNegativeScreen { row: 0 })));
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(parse("3.2,1,1,abc,1.1\n"), Err(Error::MalformedRow { row: 0, .. })));
        assert!(matches!(parse("1,0,0,0,0\n0,1,1,0.4,1.1\n"), Err(Error::MalformedRow { row: 1, .. })));
        assert!(matches!(parse("-1,1,1,0.4,1.1\n"), Err(Error::MalformedRow { .. })));
        assert!(matches!(parse("1,2,1,0.4,1.1\n"), Err(Error::MalformedRow { .. })));
    }

    #[test]
    fn absent_column_is_schema_error() {
        let s = CsvSchema::new("time", "status", "screen").baseline(["age"]);
        let r = read_csv("time,status,screen\n1,1,1\n".as_bytes(), &s);
        assert!(matches!(r, Err(Error::Schema(_))));
    }

    #[test]
    fn columns_may_appear_in_any_order() {
        let ds = read_csv("x1,z1,screen,status,time,extra\n1.1,0.4,1,0,3.2,foo\n".as_bytes(), &schema()).unwrap();
        assert_eq!(ds.subjects()[0], Subject::new(3.2, Status::Censored, true, vec![0.4], vec![1.1]));
    }

    #[test]
    fn validate_reports_rows_and_rules() {
        let ok = |t| Subject::new(t, Status::Event, true, vec![], vec![]);
        let ds = Dataset::from_subjects(vec![ok(1.0), ok(2.0), ok(3.0)]).unwrap();
        assert!(validate(&ds).is_empty());

        let ds = Dataset::from_subjects(vec![ok(0.0), ok(1.0)]).unwrap();
        assert_eq!(validate(&ds), vec![Violation { row: 0, rule: Rule::NonPositiveTime }]);

        let bad = Subject::new(1.0, Status::Missing, false, vec![], vec![]);
        let ds = Dataset::from_subjects(vec![ok(1.0), bad]).unwrap();
        let v = validate(&ds);
        assert_eq!(v, vec![Violation { row: 1, rule: Rule::MissingWithNegativeScreen }]);
        assert!(v[0].to_string().contains("MAR"));

        let heavy = ok(1.0).with_weight(1.5);
        let ds = Dataset::from_subjects(vec![heavy]).unwrap();
        assert_eq!(validate(&ds)[0].rule, Rule::WeightOutOfRange);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Subject::new(1.0, Status::Event, true, vec![1.0], vec![]);
        let b = Subject::new(1.0, Status::Event, true, vec![1.0, 2.0], vec![]);
        assert!(matches!(Dataset::from_subjects(vec![a, b]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn writes_na_marker() {
        let ds = parse("3.2,NA,1,0.4,1.1\n1,0,0,0.25,-2\n").unwrap();
        let mut out = Vec::new();
        write_csv(&ds, &schema(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "time,status,screen,z1,x1\n3.2,NA,1,0.4,1.1\n1,0,0,0.25,-2\n");
    }
}
