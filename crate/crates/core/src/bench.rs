//! Benchmark harness: generated instances × algorithms → CSV.
//!
//! Columns (format `v1`, in order):
//!
//! | column | meaning |
//! |---|---|
//! | `schema` | always `v1` |
//! | `kind` | `row` or `summary` |
//! | `shape`, `n`, `capacity`, `demand`, `instance_seed` | generator input |
//! | `eps` | accuracy parameter |
//! | `algorithm` | `exact`, `itp`, `bicriteria` or `qptas` |
//! | `status` | `ok`, `invalid` or `error` |
//! | `cost` | recomputed cost of the returned solution |
//! | `reference`, `reference_kind` | exact optimum (`opt`) or flow lower bound (`lb`) |
//! | `ratio` | `cost / reference`, six decimals |
//! | `max_load`, `load_bound`, `tours` | solution shape |
//! | `dp_states` | DP table entries, DP solvers only |
//! | `wall_ms` | solve time, blank unless timing is on |
//! | `error` | solver error or first violation |
//! | `count`, `errors`, `mean_ratio`, `max_ratio` | summary rows only |
//!
//! Summary rows carry the algorithm and aggregate its `ok` rows.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eps::Eps;
use crate::generate::{generate, DemandModel, GenSpec, Shape};
use crate::instance::TreeInstance;
use crate::io::{save_instance, save_solution};
use crate::pipeline::{solve, Algorithm, SolveOptions};
use crate::seed::derive_seed;
use crate::verify::{check_feasible, Violation};
use crate::baselines::flow_lower_bound;

pub const CSV_VERSION: &str = "v1";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Master seed; every instance seed is derived from it.
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps: Vec<Eps>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub reduce_height: bool,
    /// Fill `wall_ms`; off by default so reruns are byte-identical.
    #[serde(default)]
    pub timing: bool,
    pub families: Vec<FamilyConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub shape: Shape,
    pub n: Vec<usize>,
    pub capacity: u64,
    pub demand: DemandModel,
    /// Instances per value of `n`.
    #[serde(default = "one")]
    pub count: usize,
}

fn default_eps() -> Vec<Eps> {
    vec![Eps::new(1, 2).expect("valid")]
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BenchRow {
    pub schema: &'static str,
    pub kind: &'static str,
    pub shape: Option<Shape>,
    pub n: Option<usize>,
    pub capacity: Option<u64>,
    pub demand: Option<DemandModel>,
    pub instance_seed: Option<u64>,
    pub eps: Option<String>,
    pub algorithm: String,
    pub status: Option<&'static str>,
    pub cost: Option<u64>,
    pub reference: Option<u64>,
    pub reference_kind: Option<&'static str>,
    pub ratio: Option<String>,
    pub max_load: Option<u64>,
    pub load_bound: Option<u64>,
    pub tours: Option<usize>,
    pub dp_states: Option<usize>,
    pub wall_ms: Option<String>,
    pub error: Option<String>,
    pub count: Option<usize>,
    pub errors: Option<usize>,
    pub mean_ratio: Option<String>,
    pub max_ratio: Option<String>,
}

/// One generated instance of the suite.
#[derive(Clone, Debug)]
pub struct BenchInstance {
    /// `(family, n, k)`; also the file stem when solutions are written.
    pub key: (usize, usize, usize),
    pub spec: GenSpec,
}

impl BenchInstance {
    pub fn stem(&self) -> String {
        format!("f{}-n{}-k{}", self.key.0, self.key.1, self.key.2)
    }
}

pub fn suite_instances(cfg: &BenchConfig) -> Vec<BenchInstance> {
    let mut out = Vec::new();
    for (fi, fam) in cfg.families.iter().enumerate() {
        for &n in &fam.n {
            for k in 0..fam.count {
                out.push(BenchInstance {
                    key: (fi, n, k),
                    spec: GenSpec {
                        shape: fam.shape,
                        n,
                        capacity: fam.capacity,
                        demand: fam.demand,
                        seed: derive_seed(cfg.seed, &[fi as u64, n as u64, k as u64]),
                    },
                });
            }
        }
    }
    out
}

fn fmt_ratio(cost: u64, reference: u64) -> Option<String> {
    match (cost, reference) {
        (0, 0) => Some(format!("{:.6}", 1.0)),
        (_, 0) => None,
        _ => Some(format!("{:.6}", cost as f64 / reference as f64)),
    }
}

fn describe(v: &Violation) -> String {
    serde_json::to_string(v).unwrap_or_else(|_| format!("{v:?}"))
}

fn reference_for(inst: &TreeInstance, opts: &SolveOptions) -> (u64, &'static str) {
    match solve(inst, Algorithm::Exact, &SolveOptions { reduce_height: false, ..opts.clone() }) {
        Ok(r) => (r.solution.total_cost, "opt"),
        Err(_) => (flow_lower_bound(inst), "lb"),
    }
}

fn run_instance(cfg: &BenchConfig, bi: &BenchInstance, out_dir: Option<&Path>) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    let base = BenchRow {
        schema: CSV_VERSION,
        kind: "row",
        shape: Some(bi.spec.shape),
        n: Some(bi.spec.n),
        capacity: Some(bi.spec.capacity),
        demand: Some(bi.spec.demand),
        instance_seed: Some(bi.spec.seed),
        ..BenchRow::default()
    };
    let inst = match generate(&bi.spec) {
        Ok(i) => i,
        Err(e) => {
            for &eps in &cfg.eps {
                for &algo in &cfg.algorithms {
                    rows.push(BenchRow {
                        eps: Some(eps.to_string()),
                        algorithm: algo.to_string(),
                        status: Some("error"),
                        error: Some(e.to_string()),
                        ..base.clone()
                    });
                }
            }
            return rows;
        }
    };
    if let Some(dir) = out_dir {
        let _ = std::fs::write(dir.join(format!("{}.tree", bi.stem())), save_instance(&inst));
    }
    let mut reference = None;
    for (ei, &eps) in cfg.eps.iter().enumerate() {
        let opts = SolveOptions {
            reduce_height: cfg.reduce_height,
            ..SolveOptions::new(eps)
        };
        let (ref_cost, ref_kind) = *reference.get_or_insert_with(|| reference_for(&inst, &opts));
        for &algo in &cfg.algorithms {
            let start = Instant::now();
            let result = solve(&inst, algo, &opts);
            let elapsed = start.elapsed();
            let mut row = BenchRow {
                eps: Some(eps.to_string()),
                algorithm: algo.to_string(),
                reference: Some(ref_cost),
                reference_kind: Some(ref_kind),
                wall_ms: cfg.timing.then(|| format!("{:.3}", elapsed.as_secs_f64() * 1e3)),
                ..base.clone()
            };
            match result {
                Err(e) => {
                    row.status = Some("error");
                    row.error = Some(e.to_string());
                }
                Ok(r) => {
                    let report = check_feasible(&inst, &r.solution);
                    let over = r.solution.tours.iter().any(|t| t.load() > r.load_bound);
                    // bicriteria tours may exceed Q up to their stated bound
                    let violation = report.violations.iter().find(|v| {
                        !(algo == Algorithm::Bicriteria && matches!(v, Violation::Capacity { .. }))
                    });
                    row.status = Some(if violation.is_some() || over { "invalid" } else { "ok" });
                    row.error = violation.map(describe);
                    row.cost = Some(report.recomputed_cost);
                    row.ratio = fmt_ratio(report.recomputed_cost, ref_cost);
                    row.max_load = Some(r.solution.max_load());
                    row.load_bound = Some(r.load_bound);
                    row.tours = Some(r.solution.tours.len());
                    row.dp_states = r.dp_states;
                    if let Some(dir) = out_dir {
                        let name = format!("{}-e{}-{}.sol", bi.stem(), ei, algo);
                        let _ = std::fs::write(dir.join(name), save_solution(&r.solution));
                    }
                }
            }
            rows.push(row);
        }
    }
    rows
}

/// Runs every row (in parallel) and appends one summary row per algorithm.
/// Rows come out in suite order whatever the scheduling.
pub fn run_bench(cfg: &BenchConfig, out_dir: Option<&Path>) -> Vec<BenchRow> {
    let instances = suite_instances(cfg);
    let mut rows: Vec<BenchRow> = instances
        .par_iter()
        .map(|bi| run_instance(cfg, bi, out_dir))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let summaries: Vec<BenchRow> = cfg
        .algorithms
        .iter()
        .map(|algo| summarize(algo.name(), &rows))
        .collect();
    rows.extend(summaries);
    rows
}

fn summarize(algo: &str, rows: &[BenchRow]) -> BenchRow {
    let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.algorithm == algo).collect();
    let ratios: Vec<f64> = mine
        .iter()
        .filter(|r| r.status == Some("ok"))
        .filter_map(|r| r.ratio.as_ref()?.parse().ok())
        .collect();
    let count = mine.iter().filter(|r| r.status == Some("ok")).count();
    BenchRow {
        schema: CSV_VERSION,
        kind: "summary",
        algorithm: algo.to_string(),
        count: Some(count),
        errors: Some(mine.len() - count),
        mean_ratio: (!ratios.is_empty())
            .then(|| format!("{:.6}", ratios.iter().sum::<f64>() / ratios.len() as f64)),
        max_ratio: ratios
            .iter()
            .copied()
            .reduce(f64::max)
            .map(|m| format!("{m:.6}")),
        ..BenchRow::default()
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> BenchConfig {
        BenchConfig {
            seed: 5,
            eps: default_eps(),
            algorithms: default_algorithms(),
            reduce_height: false,
            timing: false,
            families: vec![FamilyConfig {
                shape: Shape::Random,
                n: vec![5],
                capacity: 3,
                demand: DemandModel::Uniform,
                count: 3,
            }],
        }
    }

    #[test]
    fn rows_and_summaries() {
        let rows = run_bench(&config(), None);
        assert_eq!(rows.len(), 3 * 4 + 4);
        let exact = rows.iter().find(|r| r.kind == "summary" && r.algorithm == "exact").unwrap();
        assert_eq!(exact.mean_ratio.as_deref(), Some("1.000000"));
        let csv = to_csv(&rows);
        assert!(csv.starts_with("schema,kind,shape,n,capacity"));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }
}
