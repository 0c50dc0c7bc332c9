//! Labeled histogram collections and their file formats.
//!
//! JSON: `{"d": 3, "histograms": [[...], ...], "labels": [0, 1, ...],
//! "split": ["train", "test", ...]}` with `split` optional.
//! CSV: one histogram per row followed by its integer label and an optional
//! `train`/`test` token. Lines starting with `#` are ignored. A missing
//! split puts every point in the training set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::criterion::{normalize_weights, TrainingSet};
use crate::error::{Error, Result};
use crate::transport::Histogram;

/// Row sums within this of one are rescaled; others are rejected.
pub const FILE_MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    histograms: Vec<Histogram>,
    labels: Vec<i64>,
    split: Vec<Split>,
}

#[derive(Serialize, Deserialize)]
struct JsonDataset {
    d: usize,
    histograms: Vec<Vec<f64>>,
    labels: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Vec<Split>>,
}

impl LabeledDataset {
    pub fn new(histograms: Vec<Histogram>, labels: Vec<i64>, split: Vec<Split>) -> Result<Self> {
        let n = histograms.len();
        if n == 0 {
            return Err(Error::Dataset("no histograms".into()));
        }
        if labels.len() != n || split.len() != n {
            return Err(Error::Dataset(format!(
                "{n} histograms but {} labels and {} split entries",
                labels.len(),
                split.len()
            )));
        }
        let d = histograms[0].dim();
        if let Some(i) = histograms.iter().position(|h| h.dim() != d) {
            return Err(Error::Dataset(format!("histogram {i} has dimension {}, expected {d}", histograms[i].dim())));
        }
        for (i, (&l, &s)) in labels.iter().zip(&split).enumerate() {
            let seen = labels.iter().zip(&split).any(|(&m, &t)| m == l && t == Split::Train);
            if s == Split::Test && !seen {
                return Err(Error::Dataset(format!("test point {i} has label {l} absent from training")));
            }
        }
        Ok(LabeledDataset { histograms, labels, split })
    }

    pub fn dim(&self) -> usize {
        self.histograms[0].dim()
    }

    pub fn len(&self) -> usize {
        self.histograms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histograms.is_empty()
    }

    pub fn histograms(&self) -> &[Histogram] {
        &self.histograms
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn split(&self) -> &[Split] {
        &self.split
    }

    fn part(&self, which: Split) -> (Vec<Histogram>, Vec<i64>) {
        self.histograms
            .iter()
            .zip(&self.labels)
            .zip(&self.split)
            .filter(|(_, &s)| s == which)
            .map(|((h, &l), _)| (h.clone(), l))
            .unzip()
    }

    pub fn train(&self) -> (Vec<Histogram>, Vec<i64>) {
        self.part(Split::Train)
    }

    pub fn test(&self) -> (Vec<Histogram>, Vec<i64>) {
        self.part(Split::Test)
    }

    /// The training part with class weights normalized to total `+1` and `-1`.
    pub fn training_set(&self) -> Result<TrainingSet> {
        let (h, l) = self.train();
        normalize_weights(&TrainingSet::from_labels(h, &l)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: JsonDataset =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("dataset JSON: {e}")))?;
        let histograms = raw
            .histograms
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                if v.len() != raw.d {
                    return Err(Error::Dataset(format!("row {i} has {} bins, expected {}", v.len(), raw.d)));
                }
                Histogram::with_tolerance(v, FILE_MASS_TOLERANCE)
                    .map_err(|e| Error::Dataset(format!("row {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = histograms.len();
        let split = raw.split.unwrap_or_else(|| vec![Split::Train; n]);
        LabeledDataset::new(histograms, raw.labels, split)
    }

    pub fn to_json_string(&self) -> String {
        let raw = JsonDataset {
            d: self.dim(),
            histograms: self.histograms.iter().map(|h| h.values().to_vec()).collect(),
            labels: self.labels.clone(),
            split: Some(self.split.clone()),
        };
        serde_json::to_string(&raw).expect("dataset serializes")
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut histograms = Vec::new();
        let mut labels = Vec::new();
        let mut split = Vec::new();
        for (lineno, line) in text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let s = match fields.last().map(|f| f.to_ascii_lowercase()) {
                Some(f) if f == "train" => Some(Split::Train),
                Some(f) if f == "test" => Some(Split::Test),
                _ => None,
            };
            if s.is_some() {
                fields.pop();
            }
            let label_field = fields
                .pop()
                .ok_or_else(|| Error::Parse(format!("line {lineno}: missing label")))?;
            let label: i64 = label_field
                .parse()
                .map_err(|_| Error::Parse(format!("line {lineno}: label {label_field:?} is not an integer")))?;
            let values = fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("line {lineno}: cannot parse {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let h = Histogram::with_tolerance(values, FILE_MASS_TOLERANCE)
                .map_err(|e| Error::Dataset(format!("line {lineno}: {e}")))?;
            histograms.push(h);
            labels.push(label);
            split.push(s.unwrap_or(Split::Train));
        }
        LabeledDataset::new(histograms, labels, split)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for ((h, l), s) in self.histograms.iter().zip(&self.labels).zip(&self.split) {
            // Shortest round-trip formatting keeps files lossless.
            for v in h.values() {
                out.push_str(&v.to_string());
                out.push(',');
            }
            let tag = match s {
                Split::Train => "train",
                Split::Test => "test",
            };
            out.push_str(&format!("{l},{tag}\n"));
        }
        out
    }

    /// Reads JSON when the extension is `.json`, CSV otherwise.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if is_json(path) {
            LabeledDataset::from_json_str(&text)
        } else {
            LabeledDataset::from_csv_str(&text)
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = if is_json(path) { self.to_json_string() } else { self.to_csv_string() };
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
