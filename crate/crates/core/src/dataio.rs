//! Tabular data: CSV loading, z-score standardization, one-class splits and
//! per-dataset manifests.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{invalid, mismatch, Result, RgpError};
use crate::fmt::{f64_exact, parse_f64, parse_kv};
use crate::{rng_from_seed, Label};

/// A column picked by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// Digits are read as a position, anything else as a name.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }

    fn resolve(&self, headers: &[String]) -> Result<usize> {
        match self {
            ColumnRef::Index(i) if *i < headers.len() => Ok(*i),
            ColumnRef::Index(i) => Err(invalid(format!("column index {i} out of range ({} columns)", headers.len()))),
            ColumnRef::Name(n) => headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| invalid(format!("no column named {n:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub label_column: Option<ColumnRef>,
    /// Raw label values meaning abnormal. `*` means every value not listed
    /// in `normal_values`.
    pub abnormal_values: Vec<String>,
    /// Raw label values meaning normal. Empty: every non-abnormal value.
    pub normal_values: Vec<String>,
    pub delimiter: u8,
    pub has_header: bool,
    pub drop_columns: Vec<ColumnRef>,
    /// One-hot encoded, categories in sorted order.
    pub categorical_columns: Vec<ColumnRef>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            label_column: None,
            abnormal_values: vec!["abnormal".into(), "1".into()],
            normal_values: Vec::new(),
            delimiter: b',',
            has_header: true,
            drop_columns: Vec::new(),
            categorical_columns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub features: Array2<f64>,
    pub labels: Option<Vec<Label>>,
    pub feature_names: Vec<String>,
    /// Standardization statistics, set by [`standardize`].
    pub feature_means: Option<Array1<f64>>,
    pub feature_stds: Option<Array1<f64>>,
    /// Rows skipped while loading (unparseable cell, unknown label, ragged).
    pub rejected_rows: usize,
    /// Columns removed for zero variance.
    pub dropped_columns: Vec<String>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, features: Array2<f64>, labels: Option<Vec<Label>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != features.nrows() {
                return Err(mismatch(format!("{} labels for {} rows", l.len(), features.nrows())));
            }
        }
        let feature_names = (0..features.ncols()).map(|i| format!("x{i}")).collect();
        Ok(Self {
            name: name.into(),
            features,
            labels,
            feature_names,
            feature_means: None,
            feature_stds: None,
            rejected_rows: 0,
            dropped_columns: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().filter(|&&x| x == label).count())
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            features: self.features.select(Axis(0), idx),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            feature_names: self.feature_names.clone(),
            feature_means: self.feature_means.clone(),
            feature_stds: self.feature_stds.clone(),
            rejected_rows: self.rejected_rows,
            dropped_columns: self.dropped_columns.clone(),
        }
    }

    /// Features with 17 significant digits, plus a `label` column when
    /// labels are present.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.feature_names.clone();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for (i, row) in self.features.rows().into_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|&v| f64_exact(v)).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| RgpError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    load_csv_reader(file, &name, schema)
}

pub fn load_csv_reader<R: Read>(reader: R, name: &str, schema: &CsvSchema) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }
    let width = if schema.has_header {
        rdr.headers()?.len()
    } else {
        records.first().map_or(0, csv::StringRecord::len)
    };
    let headers: Vec<String> = if schema.has_header {
        rdr.headers()?.iter().map(str::to_string).collect()
    } else {
        (0..width).map(|i| format!("x{i}")).collect()
    };

    let label_col = schema.label_column.as_ref().map(|c| c.resolve(&headers)).transpose()?;
    let dropped: BTreeSet<usize> = schema.drop_columns.iter().map(|c| c.resolve(&headers)).collect::<Result<_>>()?;
    let categorical: BTreeSet<usize> = schema.categorical_columns.iter().map(|c| c.resolve(&headers)).collect::<Result<_>>()?;
    let feature_cols: Vec<usize> = (0..width).filter(|c| Some(*c) != label_col && !dropped.contains(c)).collect();

    // Category levels come from rows that are otherwise well formed.
    let mut levels: Vec<BTreeSet<String>> = vec![BTreeSet::new(); width];
    let mut rejected = 0;
    let mut kept = Vec::with_capacity(records.len());
    'rows: for rec in &records {
        if rec.len() != width {
            rejected += 1;
            continue;
        }
        for &c in &feature_cols {
            let cell = &rec[c];
            let ok = if categorical.contains(&c) { !cell.is_empty() } else { parse_f64(cell).is_some_and(f64::is_finite) };
            if !ok {
                rejected += 1;
                continue 'rows;
            }
        }
        let label = match label_col {
            None => None,
            Some(lc) => match map_label(&rec[lc], schema) {
                Some(l) => Some(l),
                None => {
                    rejected += 1;
                    continue 'rows;
                }
            },
        };
        for &c in &categorical {
            if feature_cols.contains(&c) {
                levels[c].insert(rec[c].to_string());
            }
        }
        kept.push((rec, label));
    }
    if kept.is_empty() {
        return Err(RgpError::DegenerateData(format!("{name}: no usable rows ({rejected} rejected)")));
    }

    let mut feature_names = Vec::new();
    for &c in &feature_cols {
        if categorical.contains(&c) {
            feature_names.extend(levels[c].iter().map(|v| format!("{}={v}", headers[c])));
        } else {
            feature_names.push(headers[c].clone());
        }
    }
    let mut features = Array2::<f64>::zeros((kept.len(), feature_names.len()));
    let mut labels = label_col.map(|_| Vec::with_capacity(kept.len()));
    for (r, (rec, label)) in kept.iter().enumerate() {
        let mut j = 0;
        for &c in &feature_cols {
            if categorical.contains(&c) {
                for level in &levels[c] {
                    features[[r, j]] = if &rec[c] == level { 1.0 } else { 0.0 };
                    j += 1;
                }
            } else {
                features[[r, j]] = parse_f64(&rec[c]).expect("validated above");
                j += 1;
            }
        }
        if let (Some(ls), Some(l)) = (labels.as_mut(), label) {
            ls.push(*l);
        }
    }
    Ok(LabeledDataset {
        name: name.to_string(),
        features,
        labels,
        feature_names,
        feature_means: None,
        feature_stds: None,
        rejected_rows: rejected,
        dropped_columns: Vec::new(),
    })
}

fn map_label(raw: &str, schema: &CsvSchema) -> Option<Label> {
    let raw = raw.trim();
    let listed_normal = schema.normal_values.iter().any(|v| v == raw);
    if schema.abnormal_values.iter().any(|v| v == "*") {
        return Some(if listed_normal { Label::Normal } else { Label::Abnormal });
    }
    if schema.abnormal_values.iter().any(|v| v == raw) {
        Some(Label::Abnormal)
    } else if schema.normal_values.is_empty() || listed_normal {
        Some(Label::Normal)
    } else {
        None
    }
}

/// Per-column z-score fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Array1<f64>,
    /// Population standard deviations of the kept columns.
    pub stds: Array1<f64>,
    /// Original indices of the columns that survive.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Columns with a standard deviation at or below this are treated as
/// constant.
pub const ZERO_VARIANCE_TOL: f64 = 1e-12;

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>, rows: &[usize]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(invalid(format!("standardization needs at least 2 rows, got {}", rows.len())));
        }
        let sub = x.select(Axis(0), rows);
        let n = rows.len() as f64;
        let means_all = sub.sum_axis(Axis(0)) / n;
        let vars = sub.axis_iter(Axis(1)).zip(means_all.iter()).map(|(col, &m)| col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n);
        let (mut kept, mut dropped, mut means, mut stds) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (j, var) in vars.enumerate() {
            let sd = var.sqrt();
            if sd > ZERO_VARIANCE_TOL {
                kept.push(j);
                means.push(means_all[j]);
                stds.push(sd);
            } else {
                dropped.push(j);
            }
        }
        if kept.is_empty() {
            return Err(RgpError::DegenerateData("every column is constant on the fitting rows".into()));
        }
        Ok(Self { means: Array1::from(means), stds: Array1::from(stds), kept, dropped })
    }

    pub fn input_dim(&self) -> usize {
        self.kept.len() + self.dropped.len()
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(mismatch(format!("standardizer expects {} columns, got {}", self.input_dim(), x.ncols())));
        }
        let mut out = x.select(Axis(1), &self.kept).as_standard_layout().into_owned();
        out -= &self.means;
        out /= &self.stds;
        Ok(out)
    }
}

/// Z-scores `ds` with statistics from the rows where `fit_on` is true.
/// Constant columns are dropped and listed in `dropped_columns`.
pub fn standardize(ds: &LabeledDataset, fit_on: &[bool]) -> Result<(LabeledDataset, Standardizer)> {
    if fit_on.len() != ds.len() {
        return Err(mismatch(format!("row mask has {} entries for {} rows", fit_on.len(), ds.len())));
    }
    let rows: Vec<usize> = fit_on.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    let st = Standardizer::fit(ds.features.view(), &rows)?;
    Ok((apply_standardizer(ds, &st)?, st))
}

fn apply_standardizer(ds: &LabeledDataset, st: &Standardizer) -> Result<LabeledDataset> {
    let mut out = ds.clone();
    out.features = st.transform(ds.features.view())?;
    out.feature_names = st.kept.iter().map(|&j| ds.feature_names[j].clone()).collect();
    out.dropped_columns = st.dropped.iter().map(|&j| ds.feature_names[j].clone()).collect();
    out.feature_means = Some(st.means.clone());
    out.feature_stds = Some(st.stds.clone());
    Ok(out)
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct OneClassSplit {
    /// Normal rows only, standardized.
    pub train: LabeledDataset,
    /// Remaining normals and every abnormal row, standardized with the
    /// training statistics.
    pub test: LabeledDataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub standardizer: Standardizer,
}

/// Puts `round(train_fraction * normals)` shuffled normal rows in the
/// training split and everything else in the test split.
pub fn one_class_split(ds: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<OneClassSplit> {
    let labels = ds.labels.as_ref().ok_or_else(|| invalid("one-class split needs labels"))?;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!("train fraction must be in (0, 1), got {train_fraction}")));
    }
    let mut normals: Vec<usize> = (0..ds.len()).filter(|&i| !labels[i].is_abnormal()).collect();
    let n_abnormal = ds.len() - normals.len();
    if n_abnormal == 0 {
        return Err(RgpError::DegenerateData("no abnormal rows to test against".into()));
    }
    let n_train = (train_fraction * normals.len() as f64).round() as usize;
    if n_train < 2 || n_train >= normals.len() {
        return Err(RgpError::DegenerateData(format!(
            "{} normal rows cannot give {n_train} training rows and a non-empty normal test set",
            normals.len()
        )));
    }
    normals.shuffle(&mut rng_from_seed(seed));
    let mut train_indices = normals[..n_train].to_vec();
    train_indices.sort_unstable();
    let in_train: BTreeSet<usize> = train_indices.iter().copied().collect();
    let test_indices: Vec<usize> = (0..ds.len()).filter(|i| !in_train.contains(i)).collect();

    let standardizer = Standardizer::fit(ds.features.view(), &train_indices)?;
    let train = apply_standardizer(&ds.select(&train_indices), &standardizer)?;
    let test = apply_standardizer(&ds.select(&test_indices), &standardizer)?;
    Ok(OneClassSplit { train, test, train_indices, test_indices, standardizer })
}

/// Per-dataset `key=value` description: where the CSV lives, how to read
/// it, and default hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub data_path: PathBuf,
    pub schema: CsvSchema,
    pub train_fraction: f64,
    pub latent_dim: usize,
    pub k: usize,
    pub lambda: f64,
    pub lr: f64,
    pub target: String,
    pub threshold_quantile: f64,
    /// Remaining keys, passed through to training configuration.
    pub extra: Vec<(String, String)>,
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

impl DatasetManifest {
    /// `base_dir` anchors a relative `data` path.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m = Self {
            name: String::new(),
            data_path: PathBuf::new(),
            schema: CsvSchema { label_column: Some(ColumnRef::Name("label".into())), ..CsvSchema::default() },
            train_fraction: DEFAULT_TRAIN_FRACTION,
            latent_dim: 0,
            k: 3,
            lambda: 1.0,
            lr: 1e-3,
            target: "gihs".into(),
            threshold_quantile: crate::scoring::DEFAULT_THRESHOLD_QUANTILE,
            extra: Vec::new(),
        };
        let num = |k: &str, v: &str| parse_f64(v).ok_or_else(|| RgpError::Parse(format!("manifest {k}: bad number {v:?}")));
        let int = |k: &str, v: &str| v.parse::<usize>().map_err(|_| RgpError::Parse(format!("manifest {k}: bad integer {v:?}")));
        for (k, v) in parse_kv(text)? {
            match k.as_str() {
                "name" => m.name = v,
                "data" => m.data_path = base_dir.join(v),
                "label_column" => m.schema.label_column = if v.is_empty() || v == "none" { None } else { Some(ColumnRef::parse(&v)) },
                "abnormal_values" => m.schema.abnormal_values = list(&v),
                "normal_values" => m.schema.normal_values = list(&v),
                "delimiter" => {
                    m.schema.delimiter = match v.as_str() {
                        "tab" | "\\t" => b'\t',
                        "space" => b' ',
                        s if s.len() == 1 => s.as_bytes()[0],
                        _ => return Err(RgpError::Parse(format!("manifest delimiter: {v:?}"))),
                    }
                }
                "has_header" => m.schema.has_header = v.parse().map_err(|_| RgpError::Parse(format!("manifest has_header: {v:?}")))?,
                "drop_columns" => m.schema.drop_columns = list(&v).iter().map(|s| ColumnRef::parse(s)).collect(),
                "categorical_columns" => m.schema.categorical_columns = list(&v).iter().map(|s| ColumnRef::parse(s)).collect(),
                "train_fraction" => m.train_fraction = num(&k, &v)?,
                "latent_dim" => m.latent_dim = int(&k, &v)?,
                "k" => m.k = int(&k, &v)?,
                "lambda" => m.lambda = num(&k, &v)?,
                "lr" => m.lr = num(&k, &v)?,
                "target" => m.target = v,
                "threshold_quantile" => m.threshold_quantile = num(&k, &v)?,
                _ => m.extra.push((k, v)),
            }
        }
        if m.data_path.as_os_str().is_empty() {
            return Err(RgpError::Parse("manifest is missing data=".into()));
        }
        if m.latent_dim == 0 {
            return Err(RgpError::Parse("manifest is missing latent_dim=".into()));
        }
        if m.name.is_empty() {
            m.name = m.data_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RgpError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// The data file, falling back to the same file name inside
    /// `$RGP_DATA_DIR` when the manifest path does not exist.
    pub fn resolve_data_path(&self) -> Option<PathBuf> {
        if self.data_path.is_file() {
            return Some(self.data_path.clone());
        }
        let dir = std::env::var_os("RGP_DATA_DIR")?;
        let alt = Path::new(&dir).join(self.data_path.file_name()?);
        alt.is_file().then_some(alt)
    }

    pub fn load_dataset(&self) -> Result<LabeledDataset> {
        let path = self.resolve_data_path().ok_or_else(|| {
            RgpError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("dataset file {} not found (set RGP_DATA_DIR to a directory holding it)", self.data_path.display()),
            ))
        })?;
        let mut ds = load_csv(path, &self.schema)?;
        ds.name = self.name.clone();
        Ok(ds)
    }
}
