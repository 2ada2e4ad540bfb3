//! Tabular dataset loading and preparation: delimited-text parsing,
//! missing-value imputation, min-max scaling, 1-of-m targets and k-fold
//! splitting.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::kv;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Char(char),
    /// Any run of spaces or tabs.
    Whitespace,
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Char(c) => line.split(*c).map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
        }
    }
}

impl std::str::FromStr for Delimiter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "comma" | "," => Ok(Delimiter::Char(',')),
            "whitespace" | "space" | "ws" => Ok(Delimiter::Whitespace),
            "tab" | "\\t" => Ok(Delimiter::Char('\t')),
            "semicolon" | ";" => Ok(Delimiter::Char(';')),
            other => {
                let mut chars = other.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(Delimiter::Char(c)),
                    _ => Err(format!("unrecognized delimiter {other:?}")),
                }
            }
        }
    }
}

/// Which column holds the class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassColumn {
    Index(usize),
    Last,
}

impl std::str::FromStr for ClassColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" | "-1" => Ok(ClassColumn::Last),
            other => other
                .parse()
                .map(ClassColumn::Index)
                .map_err(|_| format!("class column must be an index or `last`, got {other:?}")),
        }
    }
}

/// Column roles and text conventions of a delimited data file.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub class_col: ClassColumn,
    pub delimiter: Delimiter,
    pub missing: String,
    pub header: bool,
    /// Columns dropped before parsing (identifiers and the like).
    pub skip_cols: Vec<usize>,
    /// Declared class values in index order. When absent, classes are
    /// numbered in first-seen order.
    pub classes: Option<Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            class_col: ClassColumn::Last,
            delimiter: Delimiter::Char(','),
            missing: "?".to_string(),
            header: false,
            skip_cols: Vec::new(),
            classes: None,
        }
    }
}

impl Schema {
    /// Reads a schema from a `key = value` file. Recognized keys:
    /// `class-col`, `delimiter`, `missing`, `header`, `skip-cols`, `classes`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut schema = Schema::default();
        for entry in kv::read(path)? {
            schema.apply(&entry.key, &entry.value).map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line: entry.line,
                message,
            })?;
        }
        Ok(schema)
    }

    pub(crate) fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "class-col" => self.class_col = value.parse()?,
            "delimiter" => self.delimiter = value.parse()?,
            "missing" => self.missing = value.to_string(),
            "header" => {
                self.header = value
                    .parse()
                    .map_err(|_| format!("header must be true or false, got {value:?}"))?
            }
            "skip-cols" => {
                self.skip_cols = split_list(value)
                    .map(|v| v.parse().map_err(|_| format!("bad column index {v:?}")))
                    .collect::<Result<_, _>>()?
            }
            "classes" => self.classes = Some(split_list(value).map(str::to_string).collect()),
            other => return Err(format!("unknown schema key {other:?}")),
        }
        Ok(())
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// A parsed table before imputation and scaling. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rows: Vec<Vec<Option<f64>>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// For categorical columns, the original values in code order.
    pub categories: Vec<Option<Vec<String>>>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.categories.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn subset(&self, indices: &[usize]) -> RawTable {
        RawTable {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            categories: self.categories.clone(),
        }
    }

    pub fn missing_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_none()).count()
    }
}

/// Parses a delimited text file according to `schema`.
///
/// Columns whose non-missing values all parse as numbers are numeric; any
/// other column is categorical and its values are coded `0, 1, ...` in
/// first-seen order.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_table(&text, path, schema)
}

pub fn parse_table(text: &str, path: &Path, schema: &Schema) -> Result<RawTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut records: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut width = None;
    let mut header_pending = schema.header;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            width = Some(schema.delimiter.split(line).len());
            continue;
        }
        let fields = schema.delimiter.split(line);
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(parse_err(
                idx + 1,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        records.push((idx + 1, fields));
    }
    let Some(width) = width else {
        return Err(Error::EmptyDataset);
    };
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let class_idx = match schema.class_col {
        ClassColumn::Last => width - 1,
        ClassColumn::Index(i) if i < width => i,
        ClassColumn::Index(i) => {
            return Err(parse_err(
                records[0].0,
                format!("class column {i} out of range for {width} fields"),
            ))
        }
    };
    let feature_cols: Vec<usize> = (0..width)
        .filter(|c| *c != class_idx && !schema.skip_cols.contains(c))
        .collect();

    let numeric: Vec<bool> = feature_cols
        .iter()
        .map(|&c| {
            records
                .iter()
                .map(|(_, f)| f[c])
                .filter(|v| *v != schema.missing)
                .all(|v| v.parse::<f64>().is_ok())
        })
        .collect();

    let mut class_names: Vec<String> = schema.classes.clone().unwrap_or_default();
    let mut class_lookup: HashMap<String, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let mut codes: Vec<HashMap<String, usize>> = vec![HashMap::new(); feature_cols.len()];
    let mut categories: Vec<Option<Vec<String>>> = numeric
        .iter()
        .map(|&is_num| if is_num { None } else { Some(Vec::new()) })
        .collect();

    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (line, fields) in &records {
        let class_value = fields[class_idx];
        let label = match class_lookup.get(class_value) {
            Some(&l) => l,
            None if schema.classes.is_some() => {
                return Err(parse_err(*line, format!("unknown class value {class_value:?}")))
            }
            None if class_value == schema.missing => {
                return Err(parse_err(*line, "class value is missing".to_string()))
            }
            None => {
                class_names.push(class_value.to_string());
                class_lookup.insert(class_value.to_string(), class_names.len() - 1);
                class_names.len() - 1
            }
        };
        labels.push(label);

        let row = feature_cols
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let v = fields[c];
                if v == schema.missing {
                    None
                } else if numeric[j] {
                    v.parse().ok()
                } else {
                    let seen = categories[j].as_mut().expect("categorical column");
                    let next = codes[j].len();
                    let code = *codes[j].entry(v.to_string()).or_insert_with(|| {
                        seen.push(v.to_string());
                        next
                    });
                    Some(code as f64)
                }
            })
            .collect();
        rows.push(row);
    }

    Ok(RawTable {
        rows,
        labels,
        class_names,
        categories,
    })
}

/// Per-column mean over observed (non-missing) cells.
pub fn column_means(table: &RawTable) -> Result<Vec<f64>> {
    (0..table.n_features())
        .map(|c| {
            let (sum, count) = table
                .rows
                .iter()
                .filter_map(|r| r[c])
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if count == 0 {
                Err(Error::ColumnAllMissing(c))
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect()
}

/// Fills missing cells with the given per-column values.
pub fn impute_with(table: &RawTable, fill: &[f64]) -> Result<RawTable> {
    check_len(table.n_features(), fill.len())?;
    let mut out = table.clone();
    for row in &mut out.rows {
        for (cell, &v) in row.iter_mut().zip(fill) {
            cell.get_or_insert(v);
        }
    }
    Ok(out)
}

/// Replaces each missing cell with its column's mean over observed cells.
pub fn impute_missing(table: &RawTable) -> Result<RawTable> {
    let means = column_means(table)?;
    impute_with(table, &means)
}

/// Observed range of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
}

/// Computes per-column min/max over `rows`.
pub fn fit_stats(rows: &[Vec<f64>]) -> Vec<ColumnStats> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut stats: Vec<ColumnStats> = first.iter().map(|&v| ColumnStats { min: v, max: v }).collect();
    for row in &rows[1..] {
        for (s, &v) in stats.iter_mut().zip(row) {
            s.min = s.min.min(v);
            s.max = s.max.max(v);
        }
    }
    stats
}

/// Linear scaling to `[0, 1]`. With `stats` absent they are fitted on `rows`;
/// supplied stats (e.g. from a training fold) are applied as-is and the
/// result is clamped. Constant columns map to 0.
pub fn normalize(rows: &[Vec<f64>], stats: Option<&[ColumnStats]>) -> (Vec<Vec<f64>>, Vec<ColumnStats>) {
    let stats = match stats {
        Some(s) => s.to_vec(),
        None => fit_stats(rows),
    };
    let scaled = rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(&stats)
                .map(|(&v, s)| {
                    let span = s.max - s.min;
                    if span > 0.0 {
                        ((v - s.min) / span).clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    (scaled, stats)
}

/// 1-of-m target vectors.
pub fn encode_labels(labels: &[usize], classes: usize) -> Result<Vec<Vec<f64>>> {
    labels
        .iter()
        .map(|&label| {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
            let mut row = vec![0.0; classes];
            row[label] = 1.0;
            Ok(row)
        })
        .collect()
}

/// Assignment of examples to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    assignments: Vec<usize>,
    folds: usize,
}

impl FoldPlan {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn fold_of(&self, example: usize) -> usize {
        self.assignments[example]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Held-out examples of `fold`, in ascending index order.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Shuffles `0..p` and deals the examples round-robin into `folds` folds.
pub fn kfold_split(p: usize, folds: usize, rng: &mut impl Rng) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    if folds > p {
        return Err(Error::InvalidConfig(format!(
            "{folds} folds requested for {p} examples"
        )));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut assignments = vec![0; p];
    for (slot, &example) in order.iter().enumerate() {
        assignments[example] = slot % folds;
    }
    Ok(FoldPlan { assignments, folds })
}

/// Model-ready examples: scaled inputs, target vectors and class labels,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_inputs: usize,
    n_outputs: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    labels: Vec<usize>,
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from explicit target vectors. Labels are the argmax
    /// of each target row.
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        check_len(features.len(), targets.len())?;
        let Some(first) = features.first() else {
            return Err(Error::EmptyDataset);
        };
        let n_inputs = first.len();
        let n_outputs = targets[0].len();
        let mut flat_x = Vec::with_capacity(features.len() * n_inputs);
        let mut flat_t = Vec::with_capacity(targets.len() * n_outputs);
        let mut labels = Vec::with_capacity(features.len());
        for (x, t) in features.iter().zip(&targets) {
            check_len(n_inputs, x.len())?;
            check_len(n_outputs, t.len())?;
            flat_x.extend_from_slice(x);
            flat_t.extend_from_slice(t);
            labels.push(argmax(t));
        }
        Ok(Self {
            n_inputs,
            n_outputs,
            features: flat_x,
            targets: flat_t,
            labels,
            row_ids: (0..features.len()).collect(),
        })
    }

    /// Builds a classification dataset with 1-of-m targets.
    pub fn from_labels(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let targets = encode_labels(&labels, classes)?;
        let mut data = Self::new(features, targets)?;
        data.labels = labels;
        Ok(data)
    }

    /// Tags each example with its row index in the source table.
    pub fn with_row_ids(mut self, row_ids: Vec<usize>) -> Result<Self> {
        check_len(self.len(), row_ids.len())?;
        self.row_ids = row_ids;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn input(&self, l: usize) -> &[f64] {
        &self.features[l * self.n_inputs..(l + 1) * self.n_inputs]
    }

    pub fn target(&self, l: usize) -> &[f64] {
        &self.targets[l * self.n_outputs..(l + 1) * self.n_outputs]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A data file plus the schema describing it.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSource {
    pub path: PathBuf,
    pub schema: Schema,
}

impl DataSource {
    pub fn load(&self) -> Result<RawTable> {
        load_csv(&self.path, &self.schema)
    }
}
