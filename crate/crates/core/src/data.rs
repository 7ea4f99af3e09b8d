//! Dataset ingestion (LIBSVM, CSV), label remapping and reproducible
//! stratified splits.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Labeled sample with labels remapped to `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    /// Original label spelling for each remapped class index.
    pub label_names: Vec<String>,
}

impl Dataset {
    /// Checks the dataset invariants and builds it.
    pub fn new(features: FeatureMatrix, labels: Vec<usize>, label_names: Vec<String>) -> Result<Self> {
        let n_classes = label_names.len();
        if features.rows() == 0 {
            return Err(Error::EmptyInput);
        }
        if features.cols() == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "no feature columns".into(),
            });
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if n_classes < 2 {
            return Err(Error::TooFewClasses(n_classes));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::LabelOutOfRange { label: bad, n_classes });
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn is_binary(&self) -> bool {
        self.n_classes == 2
    }

    /// Rows at `indices`, keeping the full class map.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            label_names: self.label_names.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// SHA-256 over shape, class names, feature bits and labels.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update((self.feature_count() as u64).to_le_bytes());
        hasher.update((self.n_classes as u64).to_le_bytes());
        for name in &self.label_names {
            hasher.update((name.len() as u64).to_le_bytes());
            hasher.update(name.as_bytes());
        }
        for v in self.features.as_slice() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        for &y in &self.labels {
            hasher.update((y as u64).to_le_bytes());
        }
        hex_digest(&hasher.finalize())
    }

    /// Writes the dataset in LIBSVM format. The highest feature index is
    /// always written on the first line so the column count survives a
    /// round trip even when the last column is all zeros.
    pub fn to_libsvm(&self) -> String {
        let d = self.feature_count();
        let mut out = String::new();
        for i in 0..self.len() {
            out.push_str(&self.label_names[self.labels[i]]);
            for (j, v) in self.features.row(i).iter().enumerate() {
                if v.to_bits() != 0 || (i == 0 && j + 1 == d) {
                    let _ = write!(out, " {}:{}", j + 1, v);
                }
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Sort key for original labels: numeric labels first (by value), then
/// everything else lexicographically.
#[derive(Debug, Clone, PartialEq)]
enum LabelKey {
    Numeric(f64),
    Text(String),
}

impl Eq for LabelKey {}

impl PartialOrd for LabelKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LabelKey {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (LabelKey::Numeric(a), LabelKey::Numeric(b)) => a.total_cmp(b),
            (LabelKey::Numeric(_), LabelKey::Text(_)) => Ordering::Less,
            (LabelKey::Text(_), LabelKey::Numeric(_)) => Ordering::Greater,
            (LabelKey::Text(a), LabelKey::Text(b)) => a.cmp(b),
        }
    }
}

fn label_key(raw: &str) -> LabelKey {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => LabelKey::Numeric(if v == 0.0 { 0.0 } else { v }),
        _ => LabelKey::Text(raw.to_string()),
    }
}

/// Maps raw label strings to contiguous class indices in sorted key order.
fn remap_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: BTreeMap<LabelKey, String> = BTreeMap::new();
    for r in raw {
        names.entry(label_key(r)).or_insert_with(|| r.clone());
    }
    let index: BTreeMap<&LabelKey, usize> = names.keys().enumerate().map(|(i, k)| (k, i)).collect();
    let labels = raw.iter().map(|r| index[&label_key(r)]).collect();
    (labels, names.into_values().collect())
}

/// Parses LIBSVM sparse text: `label idx:val ...` with 1-based, strictly
/// increasing indices. Absent entries are 0.0.
pub fn parse_libsvm(text: &[u8]) -> Result<Dataset> {
    let text = std::str::from_utf8(text).map_err(|e| Error::Parse {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut dim = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = tokens.next().expect("nonempty line has a token");
        if label.contains(':') {
            return Err(Error::Parse {
                line: line_no,
                message: format!("missing label before `{label}`"),
            });
        }
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `index:value`, found `{tok}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid feature index `{idx}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "feature indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-increasing feature index {idx} after {last}"),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric value `{val}`"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value `{val}`"),
                });
            }
            last = idx;
            entries.push((idx - 1, val));
        }
        dim = dim.max(last);
        raw_labels.push(label.to_string());
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = dim.max(1);
    let mut data = vec![0.0; rows.len() * dim];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            data[i * dim + j] = v;
        }
    }
    let (labels, names) = remap_labels(&raw_labels);
    Dataset::new(FeatureMatrix::new(rows.len(), dim, data)?, labels, names)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "NaN" | "nan")
}

/// Parses a rectangular CSV table. `label_column` defaults to the last
/// column. A first row whose feature cells are not all numeric is treated
/// as a header. Rows with missing entries are dropped.
pub fn parse_csv(text: &[u8], label_column: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text);

    let mut records: Vec<(usize, csv::StringRecord)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        records.push((i + 1, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(Error::EmptyInput);
    };
    let width = first.len();
    if let Some((line, rec)) = records.iter().find(|(_, r)| r.len() != width) {
        return Err(Error::RaggedRows {
            line: *line,
            expected: width,
            found: rec.len(),
        });
    }
    if width < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need at least one feature column and a label column".into(),
        });
    }
    let label_col = label_column.unwrap_or(width - 1);
    if label_col >= width {
        return Err(Error::Parse {
            line: 1,
            message: format!("label column {label_col} out of range for {width} columns"),
        });
    }

    let numeric = |s: &str| s.parse::<f64>().map(|v| v.is_finite()).unwrap_or(false);
    let header = first
        .iter()
        .enumerate()
        .any(|(j, cell)| j != label_col && !is_missing(cell) && !numeric(cell));
    let body = if header { &records[1..] } else { &records[..] };

    let d = width - 1;
    let mut data = Vec::with_capacity(body.len() * d);
    let mut raw_labels = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.iter().any(is_missing) {
            continue;
        }
        for (j, cell) in rec.iter().enumerate() {
            if j == label_col {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: *line,
                message: format!("non-numeric value `{cell}`"),
            })?;
            data.push(v);
        }
        raw_labels.push(rec[label_col].to_string());
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (labels, names) = remap_labels(&raw_labels);
    Dataset::new(FeatureMatrix::new(raw_labels.len(), d, data)?, labels, names)
}

/// Parameters of a train/test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Fraction of the training part kept labeled; the rest becomes the
    /// unlabeled pool.
    pub labeled_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, labeled_fraction: f64, seed: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "test fraction must lie in (0,1), got {test_fraction}"
            )));
        }
        if !(labeled_fraction > 0.0 && labeled_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "labeled fraction must lie in (0,1], got {labeled_fraction}"
            )));
        }
        Ok(Self {
            test_fraction,
            labeled_fraction,
            seed,
        })
    }
}

/// Per-class counts summing to `round(total * fraction)`: floors first,
/// then the remainder goes to classes with the largest fractional parts
/// (ties to the lower class index).
pub fn apportion(counts: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let target = ((total as f64) * fraction).round() as usize;
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * fraction).collect();
    let mut take: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = take.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = target.saturating_sub(assigned);
    for &k in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if take[k] < counts[k] {
            take[k] += 1;
            remaining -= 1;
        }
    }
    take
}

/// Stratified selection: returns (selected, rest) index lists, each sorted.
fn stratified_indices(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let take = apportion(&counts, fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    let mut rest = Vec::new();
    for (members, k) in by_class.iter_mut().zip(take) {
        members.shuffle(&mut rng);
        selected.extend_from_slice(&members[..k]);
        rest.extend_from_slice(&members[k..]);
    }
    selected.sort_unstable();
    rest.sort_unstable();
    (selected, rest)
}

/// Splits `data` into (train, test) with per-class test counts given by
/// [`apportion`].
pub fn stratified_split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    SplitSpec::new(spec.test_fraction, spec.labeled_fraction, spec.seed)?;
    if let Some(class) = data.class_counts().iter().position(|&c| c == 1) {
        return Err(Error::SingletonClass(class));
    }
    let (test, train) = stratified_indices(&data.labels, data.n_classes, spec.test_fraction, spec.seed);
    Ok((data.subset(&train), data.subset(&test)))
}

/// Keeps a stratified `round(r·N)` labeled points and returns the remainder
/// as an unlabeled feature matrix.
pub fn split_unlabeled(data: &Dataset, r: f64, seed: u64) -> Result<(Dataset, FeatureMatrix)> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "labeled fraction r must lie in (0,1], got {r}"
        )));
    }
    if r == 1.0 {
        return Ok((data.clone(), FeatureMatrix::empty(data.feature_count())));
    }
    let (labeled, unlabeled) = stratified_indices(&data.labels, data.n_classes, r, seed);
    if labeled.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "labeled fraction {r} leaves no labeled points out of {}",
            data.len()
        )));
    }
    Ok((data.subset(&labeled), data.features.select_rows(&unlabeled)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(per_class: &[usize]) -> Dataset {
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (k, &c) in per_class.iter().enumerate() {
            for i in 0..c {
                labels.push(k);
                data.push(i as f64);
            }
        }
        let names = (0..per_class.len()).map(|k| k.to_string()).collect();
        Dataset::new(FeatureMatrix::new(labels.len(), 1, data).unwrap(), labels, names).unwrap()
    }

    #[test]
    fn libsvm_two_lines() {
        let ds = parse_libsvm(b"+1 1:0.5\n-1 2:1.0").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.feature_count(), 2);
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(ds.label_names, vec!["-1", "+1"]);
        assert_eq!(ds.features.row(0), &[0.5, 0.0]);
        assert_eq!(ds.features.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn libsvm_single_class_rejected() {
        assert!(matches!(parse_libsvm(b"3 1:1"), Err(Error::TooFewClasses(1))));
    }

    #[test]
    fn libsvm_non_increasing_indices() {
        let err = parse_libsvm(b"1 2:4.0 1:1.0").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn libsvm_reports_line_numbers() {
        let err = parse_libsvm(b"1 1:1\n\n0 1:x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(parse_libsvm(b"\n \n"), Err(Error::EmptyInput)));
        assert!(matches!(
            parse_libsvm(b"1 0:1\n0 1:1"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn label_order_numeric_then_text() {
        let ds = parse_libsvm(b"b 1:1\n10 1:1\n2 1:1\na 1:1").unwrap();
        assert_eq!(ds.label_names, vec!["2", "10", "a", "b"]);
        assert_eq!(ds.labels, vec![3, 1, 0, 2]);
    }

    #[test]
    fn csv_basic_and_header() {
        let ds = parse_csv(b"1,2,0\n3,4,1", Some(2)).unwrap();
        assert_eq!((ds.len(), ds.feature_count()), (2, 2));
        assert_eq!(ds.labels, vec![0, 1]);

        // A single row has one class only, so check the header logic on
        // a two-row body.
        let ds = parse_csv(b"a,b,y\n1,2,0\n5,6,1", None).unwrap();
        assert_eq!(ds.len(), 2);
        let err = parse_csv(b"a,b,y\n1,2,0", None).unwrap_err();
        assert!(matches!(err, Error::TooFewClasses(1)));
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            parse_csv(b"1,2\n3", None),
            Err(Error::RaggedRows { line: 2, .. })
        ));
        assert!(matches!(parse_csv(b"", None), Err(Error::EmptyInput)));
    }

    #[test]
    fn csv_drops_missing_rows() {
        let ds = parse_csv(b"1,?,0\n1,2,0\n3,4,1", None).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn libsvm_round_trip_keeps_trailing_zero_column() {
        let ds = parse_libsvm(b"1 1:0.25 3:0\n0 2:-1e-300\n1 1:-0").unwrap();
        assert_eq!(ds.feature_count(), 3);
        let again = parse_libsvm(ds.to_libsvm().as_bytes()).unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn split_exact_proportions() {
        let ds = toy(&[10, 10]);
        let spec = SplitSpec::new(0.2, 1.0, 7).unwrap();
        let (train, test) = stratified_split(&ds, &spec).unwrap();
        assert_eq!(test.class_counts(), vec![2, 2]);
        assert_eq!(train.class_counts(), vec![8, 8]);
        let (train2, test2) = stratified_split(&ds, &spec).unwrap();
        assert_eq!((train, test), (train2, test2));
    }

    #[test]
    fn split_rejects_singleton_class() {
        let ds = toy(&[100, 1]);
        let spec = SplitSpec::new(0.2, 1.0, 0).unwrap();
        assert!(matches!(stratified_split(&ds, &spec), Err(Error::SingletonClass(1))));
    }

    #[test]
    fn single_class_dataset_is_rejected_at_construction() {
        let fm = FeatureMatrix::new(100, 1, vec![0.0; 100]).unwrap();
        assert!(Dataset::new(fm, vec![0; 100], vec!["0".into()]).is_err());
    }

    #[test]
    fn apportion_uses_largest_remainder() {
        // 0.3 * [5, 5, 5] = 1.5 each; total round(4.5) = 5 (half away from zero).
        assert_eq!(apportion(&[5, 5, 5], 0.3), vec![2, 2, 1]);
        assert_eq!(apportion(&[7, 3], 0.5), vec![4, 1]);
        assert_eq!(apportion(&[7, 3], 0.5).iter().sum::<usize>(), 5);
    }

    #[test]
    fn unlabeled_split_counts() {
        let ds = toy(&[50, 50]);
        let (lab, unl) = split_unlabeled(&ds, 1.0, 3).unwrap();
        assert_eq!((lab.len(), unl.rows()), (100, 0));
        let (lab, unl) = split_unlabeled(&ds, 0.5, 3).unwrap();
        assert_eq!((lab.len(), unl.rows()), (50, 50));
        assert_eq!(lab.class_counts(), vec![25, 25]);
        assert!(split_unlabeled(&ds, 0.0, 3).is_err());
        assert!(split_unlabeled(&ds, 1.5, 3).is_err());
    }

    #[test]
    fn unlabeled_fraction_of_training_part() {
        // 20% test, then r = 0.05 of the rest is labeled.
        let ds = toy(&[1000, 1000]);
        let (train, _) = stratified_split(&ds, &SplitSpec::new(0.2, 1.0, 1).unwrap()).unwrap();
        let (lab, unl) = split_unlabeled(&train, 0.05, 1).unwrap();
        assert_eq!(lab.len(), 80);
        assert_eq!(unl.rows(), 1520);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_partitions_and_stratifies(
                counts in proptest::collection::vec(2usize..40, 2..5),
                frac in 0.05f64..0.95,
                seed in any::<u64>(),
            ) {
                let ds = toy(&counts);
                let (train, test) = stratified_split(&ds, &SplitSpec::new(frac, 1.0, seed).unwrap()).unwrap();
                prop_assert_eq!(train.len() + test.len(), ds.len());
                let total = ((ds.len() as f64) * frac).round() as usize;
                prop_assert_eq!(test.len(), total);
                for (k, (&c, &t)) in counts.iter().zip(test.class_counts().iter()).enumerate() {
                    let ideal = c as f64 * frac;
                    prop_assert!((t as f64 - ideal).abs() <= 1.0 + 1e-9, "class {k}: {t} vs {ideal}");
                }
                // Features are the within-class index, so (label, value)
                // pairs identify rows uniquely.
                let mut all: Vec<(usize, u64)> = train.labels.iter().zip(train.features.as_slice())
                    .chain(test.labels.iter().zip(test.features.as_slice()))
                    .map(|(&y, v)| (y, v.to_bits())).collect();
                all.sort_unstable();
                all.dedup();
                prop_assert_eq!(all.len(), ds.len());
            }

            #[test]
            fn libsvm_round_trip(
                rows in proptest::collection::vec(
                    (0usize..3, proptest::collection::vec(prop_oneof![Just(0.0), -1e6f64..1e6], 4)),
                    2..20),
            ) {
                let mut labels: Vec<usize> = rows.iter().map(|r| r.0).collect();
                labels[0] = 0;
                labels[1] = 1;
                let n_classes = labels.iter().max().unwrap() + 1;
                if (0..n_classes).any(|k| !labels.contains(&k)) {
                    return Ok(());
                }
                let data: Vec<f64> = rows.iter().flat_map(|r| r.1.clone()).collect();
                let names = (0..n_classes).map(|k| k.to_string()).collect();
                let ds = Dataset::new(FeatureMatrix::new(rows.len(), 4, data).unwrap(), labels, names).unwrap();
                let back = parse_libsvm(ds.to_libsvm().as_bytes()).unwrap();
                prop_assert_eq!(back, ds);
            }
        }
    }
}
