//! Experiment runner: synthetic (or file) datasets, every configured
//! distance, kNN curves, and deterministic CSV/JSON output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use super::distance::{Baseline, EmdDistance, HistogramDistance};
use super::knn::{knn_eval, KnnCurves};
use super::synth::{synth_generate, SynthConfig};
use crate::criterion::{eval_criterion, NeighborCount};
use crate::error::{Error, Result};
use crate::io::fmt_num;
use crate::metric::{uniform_metric, MetricMatrix};
use crate::optimizer::{gml_descent, initial_point, DescentResult, GmlParams, InitKind, InitParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceSpec {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "hellinger")]
    Hellinger,
    #[serde(rename = "emd-uniform")]
    EmdUniform,
    #[serde(rename = "emd-independence")]
    EmdIndependence,
    #[serde(rename = "emd-typical")]
    EmdTypical,
    #[serde(rename = "gml")]
    Gml,
}

impl DistanceSpec {
    pub const ALL: [DistanceSpec; 7] = [
        DistanceSpec::L1,
        DistanceSpec::L2,
        DistanceSpec::Hellinger,
        DistanceSpec::EmdUniform,
        DistanceSpec::EmdIndependence,
        DistanceSpec::EmdTypical,
        DistanceSpec::Gml,
    ];

    fn label(self) -> &'static str {
        match self {
            DistanceSpec::L1 => "l1",
            DistanceSpec::L2 => "l2",
            DistanceSpec::Hellinger => "hellinger",
            DistanceSpec::EmdUniform => "emd-uniform",
            DistanceSpec::EmdIndependence => "emd-independence",
            DistanceSpec::EmdTypical => "emd-typical",
            DistanceSpec::Gml => "gml",
        }
    }
}

impl std::str::FromStr for DistanceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        DistanceSpec::ALL
            .into_iter()
            .find(|d| d.label() == key)
            .ok_or_else(|| Error::Config(format!("unknown distance {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One task per seed; each seed regenerates the synthetic data.
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    pub kappas: Vec<usize>,
    pub distances: Vec<DistanceSpec>,
    /// A dataset file replacing the synthetic generator.
    pub dataset: Option<PathBuf>,
    /// Neighborhood sizes to train for; empty means `gml.k` only.
    pub gml_k: Vec<NeighborCount>,
    pub synth: SynthConfig,
    pub gml: GmlParams,
    pub init: InitParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0],
            workers: 1,
            kappas: (1..=15).step_by(2).collect(),
            distances: DistanceSpec::ALL.to_vec(),
            dataset: None,
            gml_k: Vec::new(),
            synth: SynthConfig::default(),
            gml: GmlParams::default(),
            init: InitParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if self.kappas.is_empty() || self.kappas.contains(&0) {
            return Err(Error::Config("kappas must be a nonempty list of positive integers".into()));
        }
        if self.distances.is_empty() {
            return Err(Error::Config("no distances".into()));
        }
        self.synth.validate()?;
        self.gml.validate()
    }

    fn ks(&self) -> Vec<NeighborCount> {
        if self.gml_k.is_empty() {
            vec![self.gml.k]
        } else {
            self.gml_k.clone()
        }
    }
}

/// A learned metric and how it was obtained.
#[derive(Debug, Clone)]
pub struct TrainedMetric {
    pub k: NeighborCount,
    pub start_value: f64,
    pub result: DescentResult,
}

/// Everything computed for one seed.
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub seed: u64,
    /// `(distance name, curves)` in configuration order.
    pub curves: Vec<(String, KnnCurves)>,
    /// `C_{gml.k}` at each table-based initial point that was built.
    pub init_values: Vec<(InitKind, f64)>,
    pub trained: Vec<TrainedMetric>,
}

fn dataset_for(cfg: &ExperimentConfig, seed: u64) -> Result<LabeledDataset> {
    match &cfg.dataset {
        Some(path) => LabeledDataset::read(path),
        None => synth_generate(&SynthConfig { seed, ..cfg.synth.clone() }),
    }
}

/// Runs every configured distance for one seed.
pub fn run_task(cfg: &ExperimentConfig, seed: u64) -> Result<TaskOutput> {
    let data = dataset_for(cfg, seed)?;
    let train = data.training_set()?;
    let kappa_max = *cfg.kappas.iter().max().expect("validated nonempty");
    let d = data.dim();

    let mut inits: BTreeMap<&'static str, MetricMatrix> = BTreeMap::new();
    let mut init_point = |kind: InitKind| -> Result<MetricMatrix> {
        let key = match kind {
            InitKind::Uniform => "uniform",
            InitKind::Independence => "independence",
            InitKind::Typical => "typical",
        };
        if let Some(m) = inits.get(key) {
            return Ok(m.clone());
        }
        let m = initial_point(&train, &InitParams { kind, ..cfg.init.clone() })?;
        inits.insert(key, m.clone());
        Ok(m)
    };

    let mut out = TaskOutput { seed, curves: Vec::new(), init_values: Vec::new(), trained: Vec::new() };
    for &spec in &cfg.distances {
        match spec {
            DistanceSpec::L1 | DistanceSpec::L2 | DistanceSpec::Hellinger => {
                let b = match spec {
                    DistanceSpec::L1 => Baseline::L1,
                    DistanceSpec::L2 => Baseline::L2,
                    _ => Baseline::Hellinger,
                };
                out.curves.push((spec.label().into(), knn_eval(&b, &data, kappa_max)?));
            }
            DistanceSpec::EmdUniform => {
                let dist = EmdDistance(uniform_metric(d)?);
                out.curves.push((spec.label().into(), knn_eval(&dist, &data, kappa_max)?));
            }
            DistanceSpec::EmdIndependence | DistanceSpec::EmdTypical => {
                let kind = if spec == DistanceSpec::EmdTypical { InitKind::Typical } else { InitKind::Independence };
                let m = init_point(kind)?;
                out.init_values.push((kind, eval_criterion(&train, &m, cfg.gml.k)?));
                let dist: &dyn HistogramDistance = &EmdDistance(m);
                out.curves.push((spec.label().into(), knn_eval(dist, &data, kappa_max)?));
            }
            DistanceSpec::Gml => {
                let m0 = init_point(cfg.init.kind)?;
                for k in cfg.ks() {
                    let params = GmlParams { k, ..cfg.gml.clone() };
                    let start_value = eval_criterion(&train, &m0, k)?;
                    let result = gml_descent(&train, &m0, &params)?;
                    let dist = EmdDistance(result.metric.clone());
                    out.curves.push((format!("gml-k{k}"), knn_eval(&dist, &data, kappa_max)?));
                    out.trained.push(TrainedMetric { k, start_value, result });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskStatus {
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub tasks: Vec<Result<TaskOutput>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    tasks: Vec<TaskStatus>,
}

impl ExperimentReport {
    fn ok_tasks(&self) -> impl Iterator<Item = &TaskOutput> {
        self.tasks.iter().filter_map(|t| t.as_ref().ok())
    }

    /// `task,distance,kappa,recall,error`, per seed and then averaged over
    /// successful seeds (task `mean`).
    pub fn report_csv(&self) -> String {
        let mut s = String::from("task,distance,kappa,recall,error\n");
        let mut sums: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
        let mut count = 0usize;
        for task in self.ok_tasks() {
            count += 1;
            for (name, c) in &task.curves {
                let pos = match sums.iter().position(|(n, _, _)| n == name) {
                    Some(p) => p,
                    None => {
                        sums.push((name.clone(), vec![0.0; self.config.kappas.len()], vec![0.0; self.config.kappas.len()]));
                        sums.len() - 1
                    }
                };
                for (i, &kappa) in self.config.kappas.iter().enumerate() {
                    let (r, e) = (c.recall_at(kappa), c.error_at(kappa));
                    s.push_str(&format!("{},{name},{kappa},{},{}\n", task.seed, fmt_num(r), fmt_num(e)));
                    sums[pos].1[i] += r;
                    sums[pos].2[i] += e;
                }
            }
        }
        if count > 0 {
            let n = count as f64;
            for (name, r, e) in &sums {
                for (i, &kappa) in self.config.kappas.iter().enumerate() {
                    s.push_str(&format!("mean,{name},{kappa},{},{}\n", fmt_num(r[i] / n), fmt_num(e[i] / n)));
                }
            }
        }
        s
    }

    /// `task,method,k,value_start,value_best,rounds,steps` with `C_k` values
    /// at initial points and for each descent.
    pub fn objectives_csv(&self) -> String {
        let mut s = String::from("task,method,k,value_start,value_best,rounds,steps\n");
        for task in self.ok_tasks() {
            for (kind, v) in &task.init_values {
                s.push_str(&format!("{},init-{kind},{},{},{},0,0\n", task.seed, self.config.gml.k, fmt_num(*v), fmt_num(*v)));
            }
            for t in &task.trained {
                s.push_str(&format!(
                    "{},gml,{},{},{},{},{}\n",
                    task.seed,
                    t.k,
                    fmt_num(t.start_value),
                    fmt_num(t.result.value),
                    t.result.trace.outer.len(),
                    t.result.trace.steps.len()
                ));
            }
        }
        s
    }

    pub fn statuses(&self) -> Vec<TaskStatus> {
        self.config
            .seeds
            .iter()
            .zip(&self.tasks)
            .map(|(&seed, t)| match t {
                Ok(_) => TaskStatus { seed, status: "ok".into(), error: None },
                Err(e) => TaskStatus { seed, status: "error".into(), error: Some(e.to_string()) },
            })
            .collect()
    }

    pub fn manifest_json(&self) -> String {
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: &self.config,
            tasks: self.statuses(),
        };
        let mut s = serde_json::to_string_pretty(&m).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Writes `report.csv`, `objectives.csv`, and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.report_csv())?;
        std::fs::write(dir.join("objectives.csv"), self.objectives_csv())?;
        std::fs::write(dir.join("manifest.json"), self.manifest_json())?;
        Ok(())
    }
}

/// Runs all seeds on a pool of `cfg.workers` threads. A failing seed is
/// recorded in the manifest and the others continue.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let tasks: Vec<Result<TaskOutput>> =
        pool.install(|| cfg.seeds.par_iter().map(|&seed| run_task(cfg, seed)).collect());
    for (seed, t) in cfg.seeds.iter().zip(&tasks) {
        if let Err(e) = t {
            log::warn!("task {seed} failed: {e}");
        }
    }
    Ok(ExperimentReport { config: cfg.clone(), tasks })
}
