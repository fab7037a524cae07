//! Tabular data: schemas, CSV loading, encoding, splits and sensitive groups.
//!
//! Non-sensitive features are encoded into a dense matrix with every entry in
//! `[0, 1]`: numeric columns are min-max scaled with the range stored in the
//! schema, categorical columns are one-hot encoded in the schema's category
//! order. Sensitive columns never reach the matrix. They are kept as strings
//! in a separate [`SensitiveTable`] that only evaluation code and the
//! post-processing baseline read.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Cell values treated as missing. Rows containing one in a used column are dropped.
pub const MISSING_MARKERS: &[&str] = &["", "?", "NA", "NaN"];

fn is_missing(cell: &str) -> bool {
    MISSING_MARKERS.contains(&cell)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric { min: f64, max: f64 },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default = "default_true")]
    pub mutable: bool,
    #[serde(default)]
    pub sensitive: bool,
    /// Sensitive numeric attributes can be binned into `<=t` / `>t` before
    /// they are stored in the sensitive table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binarize_at: Option<f64>,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric { min, max },
            mutable: true,
            sensitive: false,
            binarize_at: None,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
            mutable: true,
            sensitive: false,
            binarize_at: None,
        }
    }

    pub fn immutable(mut self) -> Self {
        self.mutable = false;
        self
    }

    pub fn sensitive(mut self) -> Self {
        self.sensitive = true;
        self
    }

    /// Number of encoded columns this feature occupies (0 for sensitive features).
    pub fn width(&self) -> usize {
        if self.sensitive {
            return 0;
        }
        match &self.kind {
            FeatureKind::Numeric { .. } => 1,
            FeatureKind::Categorical { categories } => categories.len(),
        }
    }

    /// Inverse of min-max scaling for numeric features.
    pub fn decode_numeric(&self, encoded: f64) -> Option<f64> {
        match self.kind {
            FeatureKind::Numeric { min, max } => Some(min + encoded * (max - min)),
            FeatureKind::Categorical { .. } => None,
        }
    }

    fn sensitive_value(&self, cell: &str, row: usize) -> Result<String> {
        match self.binarize_at {
            Some(threshold) => {
                let v: f64 = cell.parse().map_err(|_| Error::Row {
                    row,
                    message: format!("cannot parse {cell:?} as number for {:?}", self.name),
                })?;
                Ok(if v <= threshold {
                    format!("<={threshold}")
                } else {
                    format!(">{threshold}")
                })
            }
            None => Ok(cell.to_string()),
        }
    }
}

/// Column layout and preprocessing metadata for one tabular dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub label: String,
    pub features: Vec<FeatureSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ignored: Vec<String>,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        seen.insert(self.label.as_str());
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {:?}", f.name)));
            }
            match &f.kind {
                FeatureKind::Numeric { min, max } => {
                    if !f.sensitive && !(min < max) {
                        return Err(Error::Schema(format!(
                            "numeric feature {:?} needs min < max (got {min}, {max})",
                            f.name
                        )));
                    }
                }
                FeatureKind::Categorical { categories } => {
                    if categories.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical feature {:?} has no categories",
                            f.name
                        )));
                    }
                    let uniq: BTreeSet<_> = categories.iter().collect();
                    if uniq.len() != categories.len() {
                        return Err(Error::Schema(format!(
                            "categorical feature {:?} lists a category twice",
                            f.name
                        )));
                    }
                    if f.binarize_at.is_some() {
                        return Err(Error::Schema(format!(
                            "binarize_at only applies to numeric features ({:?})",
                            f.name
                        )));
                    }
                }
            }
        }
        if self.features.iter().all(|f| f.sensitive) {
            return Err(Error::Schema("schema has no non-sensitive features".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: Self = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn encoded_width(&self) -> usize {
        self.features.iter().map(FeatureSpec::width).sum()
    }

    pub fn encoded_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.encoded_width());
        for f in self.features.iter().filter(|f| !f.sensitive) {
            match &f.kind {
                FeatureKind::Numeric { .. } => names.push(f.name.clone()),
                FeatureKind::Categorical { categories } => {
                    names.extend(categories.iter().map(|c| format!("{}={c}", f.name)))
                }
            }
        }
        names
    }

    /// `true` for every encoded column a recourse method may change.
    pub fn mutability_mask(&self) -> Vec<bool> {
        self.features
            .iter()
            .flat_map(|f| std::iter::repeat_n(f.mutable, f.width()))
            .collect()
    }

    pub fn sensitive_names(&self) -> Vec<String> {
        self.features
            .iter()
            .filter(|f| f.sensitive)
            .map(|f| f.name.clone())
            .collect()
    }

    /// Re-estimate numeric (min, max) ranges from a subset of raw rows,
    /// e.g. the training split. Categories are left untouched.
    pub fn refit_ranges(&mut self, raw: &RawTable, rows: &[usize]) -> Result<()> {
        let usable = raw.complete_rows(self, rows)?;
        for f in self.features.iter_mut().filter(|f| !f.sensitive) {
            if let FeatureKind::Numeric { min, max } = &mut f.kind {
                let col = raw.column_index(&f.name)?;
                let (lo, hi) = numeric_range(raw, col, &usable, &f.name)?;
                if !(lo < hi) {
                    return Err(Error::Schema(format!(
                        "numeric feature {:?} is constant on the fitted rows",
                        f.name
                    )));
                }
                *min = lo;
                *max = hi;
            }
        }
        Ok(())
    }
}

fn numeric_range(raw: &RawTable, col: usize, rows: &[usize], name: &str) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in rows {
        let v = parse_number(&raw.rows[r][col], r, name)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

fn parse_number(cell: &str, row: usize, name: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Row {
            row: row + 1,
            message: format!("cannot parse {cell:?} as a number in column {name:?}"),
        }),
    }
}

fn parse_label(cell: &str, row: usize) -> Result<u8> {
    match cell {
        "0" | "0.0" => Ok(0),
        "1" | "1.0" => Ok(1),
        other => Err(Error::Row {
            row: row + 1,
            message: format!("label must be 0 or 1, got {other:?}"),
        }),
    }
}

/// A parsed CSV file: trimmed string cells, header row separated out.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("expected {} cells, found {}", header.len(), rec.len()),
                });
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    }

    /// Stable fingerprint over header and cells.
    pub fn fingerprint(&self) -> u64 {
        let mut h = rng::FNV_OFFSET;
        for cell in self.header.iter().chain(self.rows.iter().flatten()) {
            h = rng::fnv1a(cell.bytes().chain(std::iter::once(0x1f)), h);
        }
        h
    }

    /// Rows (from `rows`) with no missing cell in any column the schema uses.
    pub fn complete_rows(&self, schema: &FeatureSchema, rows: &[usize]) -> Result<Vec<usize>> {
        let mut used = vec![self.column_index(&schema.label)?];
        for f in &schema.features {
            used.push(self.column_index(&f.name)?);
        }
        Ok(rows
            .iter()
            .copied()
            .filter(|&r| used.iter().all(|&c| !is_missing(&self.rows[r][c])))
            .collect())
    }
}

/// Role of a raw column during schema inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Label,
    Sensitive,
    Numeric,
    Categorical,
    Ignore,
}

/// Scan a CSV once and build a schema from per-column roles.
///
/// Sensitive columns are typed numeric when every non-missing value parses as a
/// number and categorical otherwise. Columns missing from `mutability` are mutable.
pub fn infer_schema(
    path: impl AsRef<Path>,
    roles: &BTreeMap<String, ColumnRole>,
    mutability: &BTreeMap<String, bool>,
) -> Result<FeatureSchema> {
    let raw = RawTable::read(path)?;
    infer_schema_from_table(&raw, roles, mutability)
}

pub fn infer_schema_from_table(
    raw: &RawTable,
    roles: &BTreeMap<String, ColumnRole>,
    mutability: &BTreeMap<String, bool>,
) -> Result<FeatureSchema> {
    if raw.is_empty() {
        return Err(Error::Schema("file has no data rows".into()));
    }
    for col in &raw.header {
        if !roles.contains_key(col) {
            return Err(Error::Schema(format!("no role given for column {col:?}")));
        }
    }
    for name in roles.keys() {
        raw.column_index(name)?;
    }

    let mut label = None;
    let mut features = Vec::new();
    let mut ignored = Vec::new();
    for (col, name) in raw.header.iter().enumerate() {
        let role = roles[name];
        let cells = raw
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !is_missing(&r[col]))
            .map(|(i, r)| (i, r[col].as_str()));
        match role {
            ColumnRole::Ignore => ignored.push(name.clone()),
            ColumnRole::Label => {
                if label.replace(name.clone()).is_some() {
                    return Err(Error::Schema("more than one label column".into()));
                }
                for (i, c) in cells {
                    parse_label(c, i)?;
                }
            }
            ColumnRole::Numeric => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (i, c) in cells {
                    let v = parse_number(c, i, name)?;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if !(lo < hi) {
                    return Err(Error::Schema(format!(
                        "numeric column {name:?} is constant"
                    )));
                }
                features.push(FeatureSpec::numeric(name.clone(), lo, hi));
            }
            ColumnRole::Categorical | ColumnRole::Sensitive => {
                let values: Vec<&str> = cells.map(|(_, c)| c).collect();
                let numeric = role == ColumnRole::Sensitive
                    && !values.is_empty()
                    && values.iter().all(|v| v.parse::<f64>().is_ok());
                let mut spec = if numeric {
                    let nums = values.iter().map(|v| v.parse::<f64>().unwrap());
                    let (lo, hi) = nums.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                        (a.min(v), b.max(v))
                    });
                    FeatureSpec::numeric(name.clone(), lo, hi)
                } else {
                    let cats: BTreeSet<&str> = values.into_iter().collect();
                    FeatureSpec::categorical(name.clone(), cats)
                };
                spec.sensitive = role == ColumnRole::Sensitive;
                features.push(spec);
            }
        }
    }
    for f in &mut features {
        if let Some(&m) = mutability.get(&f.name) {
            f.mutable = m;
        }
    }
    let schema = FeatureSchema {
        label: label.ok_or_else(|| Error::Schema("no label column".into()))?,
        features,
        ignored,
    };
    schema.validate()?;
    Ok(schema)
}

/// Raw sensitive attribute values, one row per instance.
///
/// Every access through [`Dataset::sensitive`] is counted so tests can prove
/// that a code path never looked at group membership.
#[derive(Debug, Clone)]
pub struct SensitiveTable {
    names: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl SensitiveTable {
    pub fn new(names: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        if let Some(bad) = rows.iter().position(|r| r.len() != names.len()) {
            return Err(Error::Row {
                row: bad + 1,
                message: format!("expected {} sensitive values", names.len()),
            });
        }
        Ok(Self { names, rows })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, row: usize, col: usize) -> &str {
        &self.rows[row][col]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn select(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            rows: rows.iter().map(|&r| self.rows[r].clone()).collect(),
        }
    }
}

/// Encoded features and labels without group membership. This is all that
/// training code ever receives.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [u8],
}

impl<'a> Samples<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &'a [u8]) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'a, f64> {
        self.x.index_axis_move(ndarray::Axis(0), i)
    }
}

/// An encoded dataset. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    x: Array2<f64>,
    y: Vec<u8>,
    sensitive: SensitiveTable,
    schema: Arc<FeatureSchema>,
    sensitive_reads: Arc<AtomicUsize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        x: Array2<f64>,
        y: Vec<u8>,
        sensitive: SensitiveTable,
        schema: Arc<FeatureSchema>,
    ) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n || sensitive.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: if y.len() != n {
                    y.len()
                } else {
                    sensitive.len()
                },
            });
        }
        if x.ncols() != schema.encoded_width() {
            return Err(Error::Dimension {
                expected: schema.encoded_width(),
                got: x.ncols(),
            });
        }
        if let Some(bad) = y.iter().position(|&v| v > 1) {
            return Err(Error::Row {
                row: bad + 1,
                message: "label must be 0 or 1".into(),
            });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invariant(
                "encoded features must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            x,
            y,
            sensitive,
            schema,
            sensitive_reads: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn samples(&self) -> Samples<'_> {
        Samples {
            x: self.x.view(),
            y: &self.y,
        }
    }

    /// Group-membership table. Counted; see [`Dataset::sensitive_reads`].
    pub fn sensitive(&self) -> &SensitiveTable {
        self.sensitive_reads.fetch_add(1, Ordering::Relaxed);
        &self.sensitive
    }

    /// Number of times [`Dataset::sensitive`] has been called on this dataset
    /// (or a clone of it).
    pub fn sensitive_reads(&self) -> usize {
        self.sensitive_reads.load(Ordering::Relaxed)
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v == 1).count();
        (self.len() - pos, pos)
    }

    /// New dataset with the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            x: self.x.select(ndarray::Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            sensitive: self.sensitive.select(rows),
            schema: Arc::clone(&self.schema),
            sensitive_reads: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Fingerprint of the encoded content (row count and FNV hash).
    pub fn fingerprint(&self) -> (usize, u64) {
        let bytes = self
            .x
            .iter()
            .flat_map(|v| v.to_bits().to_le_bytes())
            .chain(self.y.iter().copied());
        (self.len(), rng::fnv1a(bytes, rng::FNV_OFFSET))
    }
}

/// Encode the given raw rows (all rows when `rows` is `None`). Rows with
/// missing cells are dropped and counted in the log.
pub fn encode(
    raw: &RawTable,
    schema: &FeatureSchema,
    rows: Option<&[usize]>,
    name: &str,
) -> Result<Dataset> {
    schema.validate()?;
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..raw.len()).collect();
            &all
        }
    };
    let kept = raw.complete_rows(schema, rows)?;
    if kept.len() < rows.len() {
        log::info!(
            "{name}: dropped {} of {} rows with missing values",
            rows.len() - kept.len(),
            rows.len()
        );
    }

    let label_col = raw.column_index(&schema.label)?;
    let cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| raw.column_index(&f.name))
        .collect::<Result<_>>()?;
    let category_index: Vec<Option<HashMap<&str, usize>>> = schema
        .features
        .iter()
        .map(|f| match &f.kind {
            FeatureKind::Categorical { categories } if !f.sensitive => Some(
                categories
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.as_str(), i))
                    .collect(),
            ),
            _ => None,
        })
        .collect();

    let width = schema.encoded_width();
    let mut x = Array2::<f64>::zeros((kept.len(), width));
    let mut y = Vec::with_capacity(kept.len());
    let mut sens_rows = Vec::with_capacity(kept.len());
    for (out, &r) in kept.iter().enumerate() {
        let cells = &raw.rows[r];
        y.push(parse_label(&cells[label_col], r)?);
        let mut offset = 0;
        let mut sens = Vec::new();
        for ((f, &col), cats) in schema.features.iter().zip(&cols).zip(&category_index) {
            let cell = cells[col].as_str();
            if f.sensitive {
                sens.push(f.sensitive_value(cell, r + 1)?);
                continue;
            }
            match &f.kind {
                FeatureKind::Numeric { min, max } => {
                    let v = parse_number(cell, r, &f.name)?;
                    x[[out, offset]] = ((v - min) / (max - min)).clamp(0.0, 1.0);
                    offset += 1;
                }
                FeatureKind::Categorical { categories } => {
                    let idx = cats.as_ref().and_then(|m| m.get(cell)).ok_or_else(|| {
                        Error::UnknownCategory {
                            feature: f.name.clone(),
                            value: cell.to_string(),
                        }
                    })?;
                    x[[out, offset + idx]] = 1.0;
                    offset += categories.len();
                }
            }
        }
        sens_rows.push(sens);
    }
    let sensitive = SensitiveTable::new(schema.sensitive_names(), sens_rows)?;
    Dataset::new(name, x, y, sensitive, Arc::new(schema.clone()))
}

/// Load a CSV file and encode it with the given schema.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = RawTable::read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = encode(&raw, schema, None, &name)?;
    let (n, hash) = ds.fingerprint();
    log::info!(
        "loaded {name}: {n} rows, raw fingerprint {:016x}, encoded fingerprint {hash:016x}",
        raw.fingerprint()
    );
    Ok(ds)
}

/// Deterministic (train, test) index partition. Both index lists are sorted.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Config(format!(
            "need at least 2 rows to split, got {n}"
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, 0x5b17));
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), test_fraction, seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}

/// A (possibly intersectional) sensitive group: ordered attribute/value pairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey(pub Vec<(String, String)>);

impl GroupKey {
    pub fn single(attr: impl Into<String>, value: impl Into<String>) -> Self {
        Self(vec![(attr.into(), value.into())])
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("&")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub key: GroupKey,
    pub rows: Vec<usize>,
}

/// One group per observed combination of values of `attrs`, sorted by key.
pub fn enumerate_groups(ds: &Dataset, attrs: &[String]) -> Result<Vec<Group>> {
    groups_from_table(ds.sensitive(), attrs)
}

pub fn groups_from_table(table: &SensitiveTable, attrs: &[String]) -> Result<Vec<Group>> {
    if attrs.is_empty() {
        return Err(Error::Group("no sensitive attributes given".into()));
    }
    let mut cols = Vec::with_capacity(attrs.len());
    for a in attrs {
        let c = table
            .column(a)
            .ok_or_else(|| Error::Group(format!("unknown sensitive attribute {a:?}")))?;
        if cols.contains(&c) {
            return Err(Error::Group(format!("attribute {a:?} listed twice")));
        }
        cols.push(c);
    }
    let mut map: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for row in 0..table.len() {
        let key = GroupKey(
            attrs
                .iter()
                .zip(&cols)
                .map(|(a, &c)| (a.clone(), table.value(row, c).to_string()))
                .collect(),
        );
        map.entry(key).or_default().push(row);
    }
    Ok(map
        .into_iter()
        .map(|(key, rows)| Group { key, rows })
        .collect())
}

/// Downsample the majority class to the minority count. Minority rows are all
/// kept; row order is preserved.
pub fn balance_downsample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let (neg, pos) = ds.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::Config(
            "cannot balance a single-class dataset".into(),
        ));
    }
    if neg == pos {
        return Ok(ds.clone());
    }
    let majority = u8::from(pos > neg);
    let minority_count = neg.min(pos);
    let mut major: Vec<usize> = (0..ds.len()).filter(|&i| ds.y[i] == majority).collect();
    major.shuffle(&mut rng::stream(seed, 0xba1));
    major.truncate(minority_count);
    let mut keep: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.y[i] != majority)
        .chain(major)
        .collect();
    keep.sort_unstable();
    Ok(ds.select(&keep))
}

/// `y -> 1 - y`.
pub fn flip_labels(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    out.sensitive_reads = Arc::new(AtomicUsize::new(0));
    out.y.iter_mut().for_each(|v| *v = 1 - *v);
    out
}
