//! Attribute schemas, CSV ingestion and the preprocessing pipeline that turns
//! raw questionnaire exports into all-nominal datasets.
//!
//! A [`Dataset`] stores every cell as an index into its attribute's domain.
//! Labels only matter at the edges (CSV in, CSV/JSON out, interview prompts).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DatasetError;

/// Literal used in CSV exports for a missing value.
pub const MISSING_LITERAL: &str = "NA";

/// Default number of equal-width bins for numeric columns.
pub const DEFAULT_BINS: usize = 5;

/// One questionnaire attribute and its finite value domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    pub domain: Vec<String>,
    pub index: usize,
}

impl AttributeSchema {
    pub fn new(index: usize, name: impl Into<String>, domain: Vec<String>) -> Self {
        Self {
            name: name.into(),
            domain,
            index,
        }
    }

    /// Domain size `N_j`.
    pub fn size(&self) -> usize {
        self.domain.len()
    }

    pub fn label(&self, value: usize) -> Option<&str> {
        self.domain.get(value).map(String::as_str)
    }

    pub fn value_of(&self, label: &str) -> Option<usize> {
        self.domain.iter().position(|l| l == label)
    }
}

/// Checks the schema-level invariants: non-empty duplicate-free domains and
/// indices matching positions.
pub fn validate_schema(schema: &[AttributeSchema]) -> Result<(), DatasetError> {
    let mut names = HashMap::new();
    for (pos, attr) in schema.iter().enumerate() {
        if attr.index != pos {
            return Err(DatasetError::InvalidSchema(format!(
                "attribute `{}` has index {} at position {pos}",
                attr.name, attr.index
            )));
        }
        if names.insert(attr.name.as_str(), pos).is_some() {
            return Err(DatasetError::InvalidSchema(format!(
                "duplicate attribute name `{}`",
                attr.name
            )));
        }
        if attr.domain.is_empty() {
            return Err(DatasetError::InvalidSchema(format!(
                "attribute `{}` has an empty domain",
                attr.name
            )));
        }
        let mut seen = HashMap::new();
        for label in &attr.domain {
            if seen.insert(label.as_str(), ()).is_some() {
                return Err(DatasetError::InvalidSchema(format!(
                    "attribute `{}` repeats domain label `{label}`",
                    attr.name
                )));
            }
        }
    }
    Ok(())
}

/// Deterministic digest of attribute names, order and domains.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaDigest(pub String);

impl fmt::Display for SchemaDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn hash_str(hasher: &mut Sha256, s: &str) {
    hasher.update((s.len() as u64).to_le_bytes());
    hasher.update(s.as_bytes());
}

fn hash_schema(hasher: &mut Sha256, schema: &[AttributeSchema]) {
    hasher.update(b"fpqm-schema-v1");
    hasher.update((schema.len() as u64).to_le_bytes());
    for attr in schema {
        hash_str(hasher, &attr.name);
        hasher.update((attr.domain.len() as u64).to_le_bytes());
        for label in &attr.domain {
            hash_str(hasher, label);
        }
    }
}

pub fn schema_digest(schema: &[AttributeSchema]) -> SchemaDigest {
    let mut hasher = Sha256::new();
    hash_schema(&mut hasher, schema);
    SchemaDigest(hex::encode(hasher.finalize()))
}

/// Digest of a dataset's schema, as stored in model files.
pub fn schema_fingerprint(ds: &Dataset) -> SchemaDigest {
    schema_digest(&ds.schema)
}

/// All-nominal data matrix: `rows × n` domain indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    schema: Vec<AttributeSchema>,
    cells: Vec<usize>,
    n_rows: usize,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    schema: Vec<AttributeSchema>,
    rows: Vec<Vec<usize>>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = DatasetError;

    fn try_from(repr: DatasetRepr) -> Result<Self, Self::Error> {
        Dataset::new(repr.schema, repr.rows)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(ds: Dataset) -> Self {
        let rows = ds.rows().map(<[usize]>::to_vec).collect();
        DatasetRepr {
            schema: ds.schema,
            rows,
        }
    }
}

impl Dataset {
    pub fn new(schema: Vec<AttributeSchema>, rows: Vec<Vec<usize>>) -> Result<Self, DatasetError> {
        validate_schema(&schema)?;
        let n = schema.len();
        let mut cells = Vec::with_capacity(rows.len() * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(DatasetError::RowWidth {
                    row: r,
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v >= schema[j].size() {
                    return Err(DatasetError::CellOutOfDomain {
                        row: r,
                        column: schema[j].name.clone(),
                        value: v,
                    });
                }
            }
            cells.extend_from_slice(row);
        }
        Ok(Self {
            schema,
            cells,
            n_rows: rows.len(),
        })
    }

    /// Builds a dataset whose domains are the labels `"0".."N_j-1"`.
    pub fn from_indices(
        names: &[&str],
        domain_sizes: &[usize],
        rows: Vec<Vec<usize>>,
    ) -> Result<Self, DatasetError> {
        if names.len() != domain_sizes.len() {
            return Err(DatasetError::InvalidSchema(format!(
                "{} names but {} domain sizes",
                names.len(),
                domain_sizes.len()
            )));
        }
        let schema = names
            .iter()
            .zip(domain_sizes)
            .enumerate()
            .map(|(j, (name, &size))| {
                AttributeSchema::new(j, *name, (0..size).map(|v| v.to_string()).collect())
            })
            .collect();
        Self::new(schema, rows)
    }

    pub fn schema(&self) -> &[AttributeSchema] {
        &self.schema
    }

    pub fn n_attributes(&self) -> usize {
        self.schema.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn domain_size(&self, attribute: usize) -> usize {
        self.schema[attribute].size()
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.schema.iter().map(AttributeSchema::size).collect()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        let n = self.n_attributes();
        &self.cells[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        // `chunks_exact(0)` panics, and a zero-width dataset has no cells anyway.
        let n = self.n_attributes().max(1);
        (0..self.n_rows).map(move |i| &self.cells[i * n..(i + 1) * n])
    }

    pub fn value(&self, row: usize, attribute: usize) -> usize {
        self.cells[row * self.n_attributes() + attribute]
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|a| a.name == name)
    }

    pub fn fingerprint(&self) -> SchemaDigest {
        schema_fingerprint(self)
    }

    /// Digest over schema and every cell, row order included.
    pub fn content_digest(&self) -> String {
        let mut hasher = Sha256::new();
        hash_schema(&mut hasher, &self.schema);
        hasher.update((self.n_rows as u64).to_le_bytes());
        for &c in &self.cells {
            hasher.update((c as u64).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Same schema, a subset of rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut cells = Vec::with_capacity(rows.len() * self.n_attributes());
        for &r in rows {
            cells.extend_from_slice(self.row(r));
        }
        Dataset {
            schema: self.schema.clone(),
            cells,
            n_rows: rows.len(),
        }
    }

    /// Labels back out as a raw table (no missing cells).
    pub fn to_raw_table(&self) -> RawTable {
        RawTable {
            headers: self.schema.iter().map(|a| a.name.clone()).collect(),
            cells: self
                .rows()
                .map(|row| {
                    row.iter()
                        .zip(&self.schema)
                        .map(|(&v, a)| Some(a.domain[v].clone()))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        self.to_raw_table().write_csv(writer)
    }
}

/// Pre-preprocessing staging table: text cells, `None` for missing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub cells: Vec<Vec<Option<String>>>,
}

impl RawTable {
    pub fn new(headers: Vec<String>, cells: Vec<Vec<Option<String>>>) -> Result<Self, DatasetError> {
        for (r, row) in cells.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(DatasetError::RaggedRow {
                    line: r + 2,
                    expected: headers.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Self { headers, cells })
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(&self.headers)?;
        for row in &self.cells {
            out.write_record(row.iter().map(|c| c.as_deref().unwrap_or(MISSING_LITERAL)))?;
        }
        out.flush().map_err(|e| DatasetError::Csv(e.into()))?;
        Ok(())
    }
}

fn is_missing(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t == MISSING_LITERAL
}

/// Parses comma-separated text. Empty fields and `NA` become missing cells.
/// Without a header the columns are named `col0`, `col1`, ...
pub fn parse_csv<R: Read>(reader: R, has_header: bool) -> Result<RawTable, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut headers: Option<Vec<String>> = None;
    let mut cells = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if headers.is_none() && has_header {
            headers = Some(record.iter().map(|h| h.trim().to_string()).collect());
            continue;
        }
        let width = headers
            .get_or_insert_with(|| (0..record.len()).map(|j| format!("col{j}")).collect())
            .len();
        if record.len() != width {
            return Err(DatasetError::RaggedRow {
                line,
                expected: width,
                found: record.len(),
            });
        }
        cells.push(
            record
                .iter()
                .map(|f| (!is_missing(f)).then(|| f.trim().to_string()))
                .collect(),
        );
    }
    Ok(RawTable {
        headers: headers.unwrap_or_default(),
        cells,
    })
}

pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<RawTable, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(std::io::BufReader::new(file), has_header)
}

/// How a raw column is turned into a nominal attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Nominal,
    Ordinal,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub kind: ColumnKind,
    /// Inclusive `[lo, hi]`; numeric values outside it are noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Explicit label order for nominal/ordinal columns. Labels listed here
    /// stay in the domain even if no row uses them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn nominal() -> Self {
        Self {
            kind: ColumnKind::Nominal,
            valid_range: None,
            bins: None,
            domain: None,
        }
    }

    pub fn ordinal() -> Self {
        Self {
            kind: ColumnKind::Ordinal,
            ..Self::nominal()
        }
    }

    pub fn numeric(valid_range: Option<(f64, f64)>, bins: Option<usize>) -> Self {
        Self {
            kind: ColumnKind::Numeric,
            valid_range,
            bins,
            domain: None,
        }
    }

    pub fn with_domain(mut self, domain: Vec<String>) -> Self {
        self.domain = Some(domain);
        self
    }
}

/// Column name → [`ColumnSpec`], read from a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreprocessSpec {
    pub columns: BTreeMap<String, ColumnSpec>,
}

impl PreprocessSpec {
    pub fn all_nominal<S: AsRef<str>>(headers: &[S]) -> Self {
        Self {
            columns: headers
                .iter()
                .map(|h| (h.as_ref().to_string(), ColumnSpec::nominal()))
                .collect(),
        }
    }

    /// Re-declares every attribute of `ds` as nominal with its frozen domain.
    pub fn from_schema(schema: &[AttributeSchema]) -> Self {
        Self {
            columns: schema
                .iter()
                .map(|a| (a.name.clone(), ColumnSpec::nominal().with_domain(a.domain.clone())))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::InvalidSpec(e.to_string()))
    }

    pub fn insert(&mut self, column: impl Into<String>, spec: ColumnSpec) {
        self.columns.insert(column.into(), spec);
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FittedColumn {
    Nominal {
        fill: String,
        domain: Vec<String>,
    },
    Numeric {
        fill: f64,
        valid_range: Option<(f64, f64)>,
        min: f64,
        width: f64,
        bins: usize,
        domain: Vec<String>,
    },
}

impl FittedColumn {
    fn domain(&self) -> &[String] {
        match self {
            FittedColumn::Nominal { domain, .. } | FittedColumn::Numeric { domain, .. } => domain,
        }
    }
}

/// Imputation values and bin edges learned from a training table, reusable
/// on test tables so both share one frozen schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    names: Vec<String>,
    columns: Vec<FittedColumn>,
}

fn parse_number(text: &str, line: usize, column: &str) -> Result<f64, DatasetError> {
    text.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| DatasetError::NotNumeric {
            line,
            column: column.to_string(),
            value: text.to_string(),
        })
}

fn in_range(x: f64, range: Option<(f64, f64)>) -> bool {
    range.is_none_or(|(lo, hi)| x >= lo && x <= hi)
}

/// Label order for undeclared domains: numeric order when every label is a
/// number, byte order otherwise.
fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.parse::<f64>().ok()).collect();
    match numeric {
        Some(_) => labels.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
        }),
        None => labels.sort(),
    }
}

fn bin_label(lo: f64, hi: f64, last: bool) -> String {
    if last {
        format!("[{lo}, {hi}]")
    } else {
        format!("[{lo}, {hi})")
    }
}

fn bin_index(x: f64, min: f64, width: f64, bins: usize) -> usize {
    if bins <= 1 || width <= 0.0 {
        return 0;
    }
    let idx = ((x - min) / width).floor();
    if idx < 0.0 {
        0
    } else {
        (idx as usize).min(bins - 1)
    }
}

impl Preprocessor {
    /// Learns per-column imputation and discretization from `raw` and
    /// returns the preprocessed training dataset alongside.
    pub fn fit(
        raw: &RawTable,
        spec: &PreprocessSpec,
        default_bins: usize,
    ) -> Result<(Self, Dataset), DatasetError> {
        for name in spec.columns.keys() {
            if raw.column_index(name).is_none() {
                return Err(DatasetError::UnknownColumn(name.clone()));
            }
        }
        let mut columns = Vec::with_capacity(raw.headers.len());
        for (j, name) in raw.headers.iter().enumerate() {
            let col = spec
                .columns
                .get(name)
                .ok_or_else(|| DatasetError::MissingColumnSpec(name.clone()))?;
            let fitted = match col.kind {
                ColumnKind::Nominal | ColumnKind::Ordinal => fit_nominal(raw, j, col)?,
                ColumnKind::Numeric => fit_numeric(raw, j, col, default_bins)?,
            };
            columns.push(fitted);
        }
        let pre = Self {
            names: raw.headers.clone(),
            columns,
        };
        let ds = pre.transform(raw)?;
        Ok((pre, ds))
    }

    pub fn schema(&self) -> Vec<AttributeSchema> {
        self.names
            .iter()
            .zip(&self.columns)
            .enumerate()
            .map(|(j, (name, col))| AttributeSchema::new(j, name.clone(), col.domain().to_vec()))
            .collect()
    }

    /// Applies the fitted imputation and bins. Labels outside a frozen
    /// nominal domain are rejected with their coordinates.
    pub fn transform(&self, raw: &RawTable) -> Result<Dataset, DatasetError> {
        let positions = self
            .names
            .iter()
            .map(|name| {
                raw.column_index(name)
                    .ok_or_else(|| DatasetError::MissingColumn(name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::with_capacity(raw.n_rows());
        for (r, raw_row) in raw.cells.iter().enumerate() {
            let line = r + 2;
            let mut row = Vec::with_capacity(self.columns.len());
            for ((col, &pos), name) in self.columns.iter().zip(&positions).zip(&self.names) {
                let cell = raw_row[pos].as_deref();
                let value = match col {
                    FittedColumn::Nominal { fill, domain } => {
                        let label = cell.unwrap_or(fill);
                        domain.iter().position(|l| l == label).ok_or_else(|| {
                            DatasetError::UnseenLabel {
                                line,
                                column: name.clone(),
                                label: label.to_string(),
                            }
                        })?
                    }
                    FittedColumn::Numeric {
                        fill,
                        valid_range,
                        min,
                        width,
                        bins,
                        ..
                    } => {
                        let x = match cell {
                            Some(text) => {
                                let x = parse_number(text, line, name)?;
                                if in_range(x, *valid_range) {
                                    x
                                } else {
                                    *fill
                                }
                            }
                            None => *fill,
                        };
                        bin_index(x, *min, *width, *bins)
                    }
                };
                row.push(value);
            }
            rows.push(row);
        }
        Dataset::new(self.schema(), rows)
    }
}

fn fit_nominal(raw: &RawTable, j: usize, col: &ColumnSpec) -> Result<FittedColumn, DatasetError> {
    let name = &raw.headers[j];
    // counts keyed by label, remembering first-seen position for tie-breaks
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut first_seen = Vec::new();
    for row in &raw.cells {
        if let Some(label) = row[j].as_deref() {
            let next = first_seen.len();
            let entry = counts.entry(label).or_insert_with(|| (0, next));
            if entry.0 == 0 {
                first_seen.push(label.to_string());
            }
            entry.0 += 1;
        }
    }
    let fill = counts
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(label, _)| label.to_string())
        .ok_or_else(|| DatasetError::ColumnAllMissing(name.clone()))?;
    let domain = match &col.domain {
        Some(declared) => {
            validate_schema(&[AttributeSchema::new(0, name.clone(), declared.clone())])?;
            declared.clone()
        }
        None => {
            let mut labels = first_seen;
            sort_labels(&mut labels);
            labels
        }
    };
    Ok(FittedColumn::Nominal { fill, domain })
}

fn fit_numeric(
    raw: &RawTable,
    j: usize,
    col: &ColumnSpec,
    default_bins: usize,
) -> Result<FittedColumn, DatasetError> {
    let name = &raw.headers[j];
    let bins = col.bins.unwrap_or(default_bins);
    if bins < 2 {
        return Err(DatasetError::InvalidBins {
            column: name.clone(),
            bins,
        });
    }
    let mut values: Vec<Option<f64>> = Vec::with_capacity(raw.n_rows());
    for (r, row) in raw.cells.iter().enumerate() {
        let v = match row[j].as_deref() {
            Some(text) => Some(parse_number(text, r + 2, name)?).filter(|&x| in_range(x, col.valid_range)),
            None => None,
        };
        values.push(v);
    }
    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(DatasetError::ColumnAllMissing(name.clone()));
    }
    let fill = kept.iter().sum::<f64>() / kept.len() as f64;
    let filled = values.iter().map(|v| v.unwrap_or(fill));
    let (min, max) = filled.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if max <= min {
        return Ok(FittedColumn::Numeric {
            fill,
            valid_range: col.valid_range,
            min,
            width: 0.0,
            bins: 1,
            domain: vec![bin_label(min, max, true)],
        });
    }
    let width = (max - min) / bins as f64;
    let domain = (0..bins)
        .map(|b| {
            let lo = min + width * b as f64;
            let hi = if b + 1 == bins { max } else { min + width * (b + 1) as f64 };
            bin_label(lo, hi, b + 1 == bins)
        })
        .collect();
    Ok(FittedColumn::Numeric {
        fill,
        valid_range: col.valid_range,
        min,
        width,
        bins,
        domain,
    })
}

/// Noise/missing imputation plus discretization; the result is all-nominal.
pub fn preprocess(raw: &RawTable, spec: &PreprocessSpec, bins: usize) -> Result<Dataset, DatasetError> {
    Preprocessor::fit(raw, spec, bins).map(|(_, ds)| ds)
}

/// Encodes a raw table against a frozen schema (column lookup by name).
/// Missing cells and labels outside the domain are rejected.
pub fn encode_with_schema(raw: &RawTable, schema: &[AttributeSchema]) -> Result<Dataset, DatasetError> {
    let positions = schema
        .iter()
        .map(|a| {
            raw.column_index(&a.name)
                .ok_or_else(|| DatasetError::MissingColumn(a.name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(raw.n_rows());
    for (r, raw_row) in raw.cells.iter().enumerate() {
        let line = r + 2;
        let row = schema
            .iter()
            .zip(&positions)
            .map(|(attr, &pos)| {
                let label = raw_row[pos].as_deref().ok_or_else(|| DatasetError::MissingValue {
                    line,
                    column: attr.name.clone(),
                })?;
                attr.value_of(label).ok_or_else(|| DatasetError::UnseenLabel {
                    line,
                    column: attr.name.clone(),
                    label: label.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Dataset::new(schema.to_vec(), rows)
}
