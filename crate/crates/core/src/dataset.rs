//! Labeled joint samples `(m, θ, x, s(x))` and their on-disk table format.
//!
//! A dataset is stored as a comma-separated table with one record per sample:
//! `model, arity, theta_0..theta_{P-1}, count_0..count_{C-1}, summary_0..`.
//! Parameter columns beyond a sample's arity are left empty. A JSON side-car
//! (`<table>.meta.json`) carries the seed, scenario and hyperparameters.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub model_index: usize,
    pub params: Vec<f64>,
    /// Raw count data. Empty when the raw data is not retained (channel traces).
    pub counts: Vec<u32>,
    pub summary: Vec<f64>,
}

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub kind: String,
    pub scenario: String,
    pub seed: u64,
    pub n_samples: usize,
    pub max_arity: usize,
    pub counts_per_sample: usize,
    pub summary_len: usize,
    pub hyperparameters: serde_json::Value,
}

impl DatasetMeta {
    pub fn describe(kind: &str, scenario: &str, seed: u64, samples: &[LabeledSample], hyper: serde_json::Value) -> Self {
        DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            kind: kind.to_string(),
            scenario: scenario.to_string(),
            seed,
            n_samples: samples.len(),
            max_arity: samples.iter().map(|s| s.params.len()).max().unwrap_or(0),
            counts_per_sample: samples.first().map_or(0, |s| s.counts.len()),
            summary_len: samples.first().map_or(0, |s| s.summary.len()),
            hyperparameters: hyper,
        }
    }
}

pub fn meta_path(table: &Path) -> PathBuf {
    let mut name = table.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    table.with_file_name(name)
}

pub fn write_dataset(path: &Path, samples: &[LabeledSample], meta: &DatasetMeta) -> Result<()> {
    let mut out = String::new();
    let mut header = vec!["model".to_string(), "arity".to_string()];
    header.extend((0..meta.max_arity).map(|i| format!("theta_{i}")));
    header.extend((0..meta.counts_per_sample).map(|i| format!("count_{i}")));
    header.extend((0..meta.summary_len).map(|i| format!("summary_{i}")));
    out.push_str(&header.join(","));
    out.push('\n');

    for s in samples {
        if s.counts.len() != meta.counts_per_sample || s.summary.len() != meta.summary_len || s.params.len() > meta.max_arity {
            return Err(Error::Input("sample shape does not match dataset metadata".into()));
        }
        write!(out, "{},{}", s.model_index, s.params.len()).unwrap();
        for i in 0..meta.max_arity {
            out.push(',');
            if let Some(v) = s.params.get(i) {
                write!(out, "{v}").unwrap();
            }
        }
        for c in &s.counts {
            write!(out, ",{c}").unwrap();
        }
        for v in &s.summary {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    let meta_json = serde_json::to_string_pretty(meta).map_err(|e| Error::Format(e.to_string()))?;
    let mp = meta_path(path);
    fs::write(&mp, meta_json + "\n").map_err(|e| Error::io(mp, e))
}

fn parse<T: std::str::FromStr>(field: &str, line: usize) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse `{field}`")))
}

pub fn read_dataset(path: &Path) -> Result<(Vec<LabeledSample>, DatasetMeta)> {
    let mp = meta_path(path);
    let meta_text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Format(format!("{}: {e}", mp.display())))?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {}", meta.format_version)));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let width = 2 + meta.max_arity + meta.counts_per_sample + meta.summary_len;
    let mut samples = Vec::with_capacity(meta.n_samples);
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Format(format!("line {}: expected {width} fields, found {}", lineno + 1, fields.len())));
        }
        let model_index: usize = parse(fields[0], lineno + 1)?;
        let arity: usize = parse(fields[1], lineno + 1)?;
        if arity > meta.max_arity {
            return Err(Error::Format(format!("line {}: arity {arity} exceeds {}", lineno + 1, meta.max_arity)));
        }
        let params = fields[2..2 + arity]
            .iter()
            .map(|f| parse(f, lineno + 1))
            .collect::<Result<Vec<f64>>>()?;
        let c0 = 2 + meta.max_arity;
        let counts = fields[c0..c0 + meta.counts_per_sample]
            .iter()
            .map(|f| parse(f, lineno + 1))
            .collect::<Result<Vec<u32>>>()?;
        let summary = fields[c0 + meta.counts_per_sample..]
            .iter()
            .map(|f| parse(f, lineno + 1))
            .collect::<Result<Vec<f64>>>()?;
        samples.push(LabeledSample {
            model_index,
            params,
            counts,
            summary,
        });
    }
    if samples.len() != meta.n_samples {
        return Err(Error::Format(format!("expected {} samples, found {}", meta.n_samples, samples.len())));
    }
    Ok((samples, meta))
}

/// Splits samples into `(summaries, model labels)` for classifier training.
pub fn classifier_view(samples: &[LabeledSample]) -> (Vec<Vec<f64>>, Vec<usize>) {
    samples.iter().map(|s| (s.summary.clone(), s.model_index)).unzip()
}

/// `(summaries, parameters)` of the samples generated by `model`.
pub fn posterior_view(samples: &[LabeledSample], model: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    samples
        .iter()
        .filter(|s| s.model_index == model)
        .map(|s| (s.summary.clone(), s.params.clone()))
        .unzip()
}
