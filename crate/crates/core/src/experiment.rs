//! Batch experiments over seeded random graphs.
//!
//! An experiment is described by a TOML key-value file:
//!
//! ```toml
//! algo = ["algo1", "baseline"]   # algo1 | algo2 | baseline, one or many
//! beta = 0.5                     # algo1 step size: scalar or per-node list
//! # alpha = 0.5                  # algo2 parameter: scalar or per-node list
//! # sweep = [0.1, 0.5, 0.9]      # uniform beta/alpha values, one cell each
//! # mode = "standard"            # algo2: standard | prop3 (constant beta)
//! # m = 50                       # algo2 prop3 initialization scale, >= n
//! # beta_rule = "capped"         # algo2: capped | uncapped
//! # permissive = false           # algo1: allow all beta = 1
//! reps = 100
//! out_dir = "results"
//!
//! [graph]
//! n = 50
//! p = 0.2
//! seed = 7          # master seed; per-repetition seeds are derived from it
//! # seeds = [1, 2]  # or an explicit list (length >= reps)
//! # file = "g.edges"
//!
//! [stop]
//! tol = 1e-10
//! max_rounds = 100000
//! ```
//!
//! Every (repetition, algorithm cell) pair is one run. Runs execute in
//! parallel and are merged by index, so identical configs produce identical
//! summaries. Per-run failures are recorded, not fatal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::balancer::{run_algo1, BalancerParams, BetaPolicy};
use crate::baseline::run_imbalance_correcting;
use crate::bistochastic::{run_algo2, Algo2Mode, BetaRule, BistochasticParams};
use crate::error::{Error, Result};
use crate::graph::{parse_edge_list, random_strongly_connected, Digraph};
use crate::trace::{save_trace, RunTrace, StopRule, DEFAULT_MAX_ROUNDS, DEFAULT_TOL};

/// Per-repetition generator seed: output of the ChaCha stream `index` keyed
/// by `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[serde(alias = "balance")]
    Algo1,
    #[serde(alias = "bistochastic")]
    Algo2,
    Baseline,
}

impl Algorithm {
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Algo1 => crate::balancer::ALGORITHM_ID,
            Algorithm::Algo2 => crate::bistochastic::ALGORITHM_ID,
            Algorithm::Baseline => crate::baseline::ALGORITHM_ID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// A scalar applied to every node, or one value per node.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl ParamValue {
    pub fn expand(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            ParamValue::Uniform(x) => Ok(vec![*x; n]),
            ParamValue::PerNode(v) if v.len() == n => Ok(v.clone()),
            ParamValue::PerNode(v) => Err(Error::Config(format!(
                "per-node list has {} values for a {n}-node graph",
                v.len()
            ))),
        }
    }

    fn label(&self) -> String {
        match self {
            ParamValue::Uniform(x) => format!("{x}"),
            ParamValue::PerNode(_) => "-pernode".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    #[default]
    Standard,
    #[serde(alias = "prop3")]
    ConstantBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    #[default]
    Capped,
    Uncapped,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSource {
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

impl Default for StopConfig {
    fn default() -> Self {
        StopConfig {
            tol: DEFAULT_TOL,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub graph: GraphSource,
    pub algo: OneOrMany<Algorithm>,
    pub beta: Option<ParamValue>,
    pub alpha: Option<ParamValue>,
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub mode: ModeName,
    pub m: Option<usize>,
    #[serde(default)]
    pub beta_rule: RuleName,
    #[serde(default)]
    pub permissive: bool,
    #[serde(default)]
    pub stop: StopConfig,
    pub reps: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses a config; relative `graph.file` and `out_dir` paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(file) = &config.graph.file {
            config.graph.file = Some(base_dir.join(file));
        }
        if let Some(dir) = &config.out_dir {
            config.out_dir = Some(base_dir.join(dir));
        }
        config.check()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    fn check(&self) -> Result<()> {
        let reps = self.repetitions();
        match (&self.graph.file, self.graph.n) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "graph.file and graph.n are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("either graph.file or graph.n is required".into()))
            }
            (Some(_), None) if reps > 1 => {
                return Err(Error::Config(
                    "reps > 1 needs a generated graph (graph.n)".into(),
                ))
            }
            _ => {}
        }
        if let Some(seeds) = &self.graph.seeds {
            if seeds.len() < reps {
                return Err(Error::Config(format!(
                    "graph.seeds has {} entries, fewer than reps = {reps}",
                    seeds.len()
                )));
            }
        }
        if let Some(p) = self.graph.p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("graph.p = {p} is outside [0, 1]")));
            }
        }
        if self.stop.tol.is_nan() || self.stop.tol < 0.0 {
            return Err(Error::Config(format!("stop.tol = {} is negative", self.stop.tol)));
        }
        let algos = self.algo.to_vec();
        if algos.is_empty() {
            return Err(Error::Config("algo lists no algorithms".into()));
        }
        if self.sweep.is_empty() {
            if algos.contains(&Algorithm::Algo1) && self.beta.is_none() {
                return Err(Error::Config("algo1 needs beta (or sweep)".into()));
            }
            if algos.contains(&Algorithm::Algo2) && self.alpha.is_none() {
                return Err(Error::Config("algo2 needs alpha (or sweep)".into()));
            }
        }
        Ok(())
    }

    pub fn repetitions(&self) -> usize {
        self.reps.unwrap_or(1)
    }

    pub fn stop_rule(&self) -> StopRule<f64> {
        StopRule::new(self.stop.tol, self.stop.max_rounds)
    }

    /// Algorithm cells: every algorithm, crossed with `sweep` when given
    /// (the baseline has no parameter and appears once).
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for algo in self.algo.to_vec() {
            let param = match algo {
                Algorithm::Algo1 => self.beta.clone(),
                Algorithm::Algo2 => self.alpha.clone(),
                Algorithm::Baseline => None,
            };
            if algo == Algorithm::Baseline || self.sweep.is_empty() {
                cells.push(Cell::new(algo, param, self));
            } else {
                for &s in &self.sweep {
                    cells.push(Cell::new(algo, Some(ParamValue::Uniform(s)), self));
                }
            }
        }
        cells
    }

    /// Graph instances with the seed that generated each (none for files).
    pub fn graphs(&self) -> Result<Vec<(Option<u64>, Digraph)>> {
        if let Some(file) = &self.graph.file {
            let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
            return Ok(vec![(None, parse_edge_list(&text)?)]);
        }
        let n = self.graph.n.unwrap_or_default();
        let p = self.graph.p.unwrap_or(0.0);
        let reps = self.repetitions();
        let seeds: Vec<u64> = match &self.graph.seeds {
            Some(seeds) => seeds[..reps].to_vec(),
            None => {
                let master = self.graph.seed.unwrap_or(0);
                (0..reps as u64).map(|r| derive_seed(master, r)).collect()
            }
        };
        seeds
            .into_par_iter()
            .map(|seed| Ok((Some(seed), random_strongly_connected(n, p, seed)?)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub param: Option<ParamValue>,
    pub label: String,
    mode: ModeName,
    m: Option<usize>,
    rule: RuleName,
    permissive: bool,
}

impl Cell {
    fn new(algorithm: Algorithm, param: Option<ParamValue>, config: &ExperimentConfig) -> Self {
        let mut label = algorithm.id().to_string();
        match (algorithm, &param) {
            (Algorithm::Algo1, Some(p)) => write!(label, "-beta{}", p.label()).unwrap(),
            (Algorithm::Algo2, Some(p)) => write!(label, "-alpha{}", p.label()).unwrap(),
            _ => {}
        }
        if algorithm == Algorithm::Algo2 {
            if config.mode == ModeName::ConstantBeta {
                label.push_str("-prop3");
            }
            if config.beta_rule == RuleName::Uncapped {
                label.push_str("-uncapped");
            }
        }
        Cell {
            algorithm,
            param,
            label,
            mode: config.mode,
            m: config.m,
            rule: config.beta_rule,
            permissive: config.permissive,
        }
    }

    pub fn run(&self, g: &Digraph, stop: &StopRule<f64>) -> Result<RunTrace<f64>> {
        let n = g.node_count();
        let values = |p: &Option<ParamValue>| -> Result<Vec<f64>> {
            p.as_ref()
                .ok_or_else(|| Error::Config(format!("{} has no parameter", self.label)))?
                .expand(n)
        };
        match self.algorithm {
            Algorithm::Algo1 => {
                let policy = if self.permissive {
                    BetaPolicy::Permissive
                } else {
                    BetaPolicy::Primitive
                };
                let mut params = BalancerParams::new(values(&self.param)?, policy);
                params.allow_disconnected = self.permissive;
                run_algo1(g, &params, stop).map(|(_, t)| t)
            }
            Algorithm::Algo2 => {
                let params = BistochasticParams {
                    alpha: values(&self.param)?,
                    mode: match self.mode {
                        ModeName::Standard => Algo2Mode::Standard,
                        ModeName::ConstantBeta => Algo2Mode::ConstantBeta,
                    },
                    m: self.m.unwrap_or(n),
                    beta_rule: match self.rule {
                        RuleName::Capped => BetaRule::Capped,
                        RuleName::Uncapped => BetaRule::Uncapped,
                    },
                };
                run_algo2(g, &params, stop).map(|(_, t)| t)
            }
            Algorithm::Baseline => run_imbalance_correcting(g, stop).map(|(_, t)| t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub rep: usize,
    pub seed: Option<u64>,
    pub result: std::result::Result<RunTrace<f64>, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub labels: Vec<String>,
    /// Per label, the mean stop metric per round across successful runs.
    pub mean: Vec<Vec<f64>>,
    pub median: Vec<Vec<f64>>,
    pub runs: Vec<RunOutcome>,
}

impl ExperimentSummary {
    pub fn failures(&self) -> impl Iterator<Item = &RunOutcome> {
        self.runs.iter().filter(|r| r.result.is_err())
    }

    pub fn mean_csv(&self) -> String {
        render_summary_csv(&self.labels, &self.mean)
    }

    pub fn median_csv(&self) -> String {
        render_summary_csv(&self.labels, &self.median)
    }

    /// One line per run: label, repetition, seed, rounds, stop reason, final
    /// metric, error.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("label,rep,seed,rounds,stop_reason,final_metric,error\n");
        for r in &self.runs {
            let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
            match &r.result {
                Ok(t) => {
                    let last = t.stop_metric().last().copied().unwrap_or(f64::NAN);
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{:.16e},",
                        r.label,
                        r.rep,
                        seed,
                        t.rounds,
                        t.stop_reason.as_str(),
                        last
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},,,,\"{}\"",
                        r.label,
                        r.rep,
                        seed,
                        e.replace('"', "'")
                    );
                }
            }
        }
        out
    }
}

/// `round,<label>,...` with one row per round; empty cells where a label
/// has no data.
pub fn render_summary_csv(labels: &[String], columns: &[Vec<f64>]) -> String {
    let mut out = String::from("round");
    for label in labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    let len = columns.iter().map(Vec::len).max().unwrap_or(0);
    for k in 0..len {
        let _ = write!(out, "{k}");
        for col in columns {
            out.push(',');
            if let Some(v) = col.get(k) {
                let _ = write!(out, "{v:.16e}");
            }
        }
        out.push('\n');
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Mean and median per round; finished runs are padded with their final
/// value up to the longest run.
pub fn aggregate(series: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    let mut means = Vec::with_capacity(len);
    let mut medians = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(series.len());
    for k in 0..len {
        column.clear();
        column.extend(
            series
                .iter()
                .filter_map(|s| s.get(k).or_else(|| s.last()).copied()),
        );
        means.push(column.iter().sum::<f64>() / column.len() as f64);
        medians.push(median(&mut column));
    }
    (means, medians)
}

/// Runs every cell on every graph and, when `out_dir` is set, writes one
/// trace CSV per run plus `summary.csv` (means), `summary_median.csv` and
/// `runs.csv`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let graphs = config.graphs()?;
    let cells = config.cells();
    let stop = config.stop_rule();

    let jobs: Vec<(usize, usize)> = (0..graphs.len())
        .flat_map(|rep| (0..cells.len()).map(move |c| (rep, c)))
        .collect();
    let runs: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(rep, c)| {
            let (seed, g) = &graphs[rep];
            RunOutcome {
                label: cells[c].label.clone(),
                rep,
                seed: *seed,
                result: cells[c].run(g, &stop).map_err(|e| e.to_string()),
            }
        })
        .collect();

    let labels: Vec<String> = cells.iter().map(|c| c.label.clone()).collect();
    let mut mean = Vec::with_capacity(labels.len());
    let mut median = Vec::with_capacity(labels.len());
    for label in &labels {
        let series: Vec<Vec<f64>> = runs
            .iter()
            .filter(|r| &r.label == label)
            .filter_map(|r| r.result.as_ref().ok())
            .map(RunTrace::stop_metric)
            .collect();
        let (m, med) = aggregate(&series);
        mean.push(m);
        median.push(med);
    }
    let summary = ExperimentSummary {
        labels,
        mean,
        median,
        runs,
    };

    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for run in &summary.runs {
            if let Ok(trace) = &run.result {
                save_trace(trace, dir.join(format!("{}_rep{:04}.csv", run.label, run.rep)))?;
            }
        }
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(path, e))
        };
        write("summary.csv", summary.mean_csv())?;
        write("summary_median.csv", summary.median_csv())?;
        write("runs.csv", summary.runs_csv())?;
    }
    Ok(summary)
}
