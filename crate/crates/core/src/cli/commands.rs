//! The runner's subcommands. Each takes a validated config, writes its files
//! into `cfg.out_dir` and returns a summary that is also written as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GraphSpec, TaskKind};
use crate::distances::{all_pairs, DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::estimator::estimate_range;
use crate::graphs::Graph;
use crate::linalg::Matrix;
use crate::models::gcn::{model_jacobian, ModelConfig, Parameters};
use crate::models::train::{make_dataset, train, TaskTarget, TrainOutcome};
use crate::range::{dataset_range, hessian_node_range, node_range, RangeReport};
use crate::rng::{seeded, stream};
use crate::tasks::{analytic_graph_range, k_power, pairwise_graph_task, pairwise_node_task};

/// JSON has no NaN or infinity, so diverged losses are written as the
/// strings `NaN`, `inf` and `-inf` and read back from either form.
mod nonfinite {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("NaN")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct F64Visitor;

    impl Visitor<'_> for F64Visitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or one of \"NaN\", \"inf\", \"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            v.parse()
                .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(F64Visitor)
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub metrics: Option<Vec<Metric>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(out) = &self.out_dir {
            cfg.out_dir = out.clone();
        }
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(metrics) = &self.metrics {
            cfg.metrics = metrics.clone();
        }
    }
}

/// Standard normal `n x d` features from the seed's feature stream.
pub fn gaussian_features(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed, stream::FEATURES);
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(n, d, data).expect("shape matches data")
}

/// Range of a task at input `x` (linear and pooled squared-difference tasks
/// do not depend on `x`).
pub fn task_range_report(
    target: &TaskTarget,
    x: &Matrix,
    d: &DistanceMatrix,
) -> Result<RangeReport> {
    match target {
        TaskTarget::Linear(t) => node_range(&t.jacobian(), d, true),
        TaskTarget::PairwiseNode(s) => node_range(&pairwise_node_task(s, x)?.1, d, true),
        TaskTarget::PairwiseGraph(s) => hessian_node_range(&pairwise_graph_task(s, x)?.1, d, true),
    }
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml())?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn distances(g: &Graph, metrics: &[Metric]) -> Result<Vec<DistanceMatrix>> {
    metrics.iter().map(|&m| all_pairs(g, m)).collect()
}

// ---------------------------------------------------------------- task-range

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRangeRow {
    pub family: TaskKind,
    pub k: usize,
    pub seed: u64,
    pub metric: Metric,
    pub graph_range: f64,
    pub degenerate_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRangeEntry {
    pub family: TaskKind,
    pub k: usize,
    pub metric: Metric,
    pub seeds: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub degenerate_total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRangeGraph {
    pub graph: GraphSpec,
    pub csv: String,
    pub entries: Vec<TaskRangeEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRangeSummary {
    pub config: ExperimentConfig,
    pub graphs: Vec<TaskRangeGraph>,
}

type RowKey = (TaskKind, usize, Metric);

/// Aggregates rows over seeds, keeping first-appearance order.
pub fn summarize_task_rows(rows: &[TaskRangeRow]) -> Vec<TaskRangeEntry> {
    let mut groups: Vec<(RowKey, Vec<&TaskRangeRow>)> = Vec::new();
    for row in rows {
        let key = (row.family, row.k, row.metric);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|((family, k, metric), members)| {
            let values: Vec<f64> = members.iter().map(|r| r.graph_range).collect();
            TaskRangeEntry {
                family,
                k,
                metric,
                seeds: members.len(),
                mean: values.iter().sum::<f64>() / values.len() as f64,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                degenerate_total: members.iter().map(|r| r.degenerate_count).sum(),
            }
        })
        .collect()
}

fn task_rows_for_seed(
    cfg: &ExperimentConfig,
    spec: &GraphSpec,
    seed: u64,
) -> Result<Vec<TaskRangeRow>> {
    let task = cfg.require_task()?;
    let custom = task.custom_matrix()?;
    let g = spec.build(seed)?;
    let dists = distances(&g, &cfg.metrics)?;
    let x = gaussian_features(g.node_count(), 1, seed);
    let jobs: Vec<(TaskKind, usize)> = task
        .families
        .iter()
        .flat_map(|&f| task.ks.iter().map(move |&k| (f, k)))
        .collect();
    let per_job: Vec<Vec<TaskRangeRow>> = jobs
        .par_iter()
        .map(|&(family, k)| {
            let target = family.build(&g, k, custom.as_ref())?;
            dists
                .iter()
                .map(|d| {
                    let report = task_range_report(&target, &x, d)?;
                    Ok(TaskRangeRow {
                        family,
                        k,
                        seed,
                        metric: d.metric(),
                        graph_range: report.graph_range,
                        degenerate_count: report.degenerate_count,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Graph ranges of every configured task over every graph and seed.
pub fn cmd_task_range(cfg: &ExperimentConfig) -> Result<TaskRangeSummary> {
    cfg.validate()?;
    cfg.require_task()?;
    prepare_out(cfg)?;
    let mut graphs = Vec::new();
    for spec in &cfg.graphs {
        let per_seed: Vec<Vec<TaskRangeRow>> = cfg
            .seeds
            .par_iter()
            .map(|&seed| task_rows_for_seed(cfg, spec, seed))
            .collect::<Result<_>>()?;
        let rows: Vec<TaskRangeRow> = per_seed.into_iter().flatten().collect();
        let csv = format!("task_range_{}.csv", spec.label());
        write_csv(&cfg.out_dir.join(&csv), &rows)?;
        log::info!("{}: {} rows", csv, rows.len());
        graphs.push(TaskRangeGraph {
            graph: spec.clone(),
            csv,
            entries: summarize_task_rows(&rows),
        });
    }
    let summary = TaskRangeSummary {
        config: cfg.clone(),
        graphs,
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

// --------------------------------------------------------------- train-range

#[derive(Serialize)]
struct NodeTraceRow {
    epoch: usize,
    seed: u64,
    depth: usize,
    mse_train: f64,
    mse_val: f64,
    range_spd: Option<f64>,
    range_res: Option<f64>,
}

#[derive(Serialize)]
struct GraphTraceRow {
    epoch: usize,
    seed: u64,
    depth: usize,
    mse_train: f64,
    mse_val: f64,
    range_spd: Option<f64>,
    range_res: Option<f64>,
    eta_res: Option<f64>,
}

/// One line of a trace file as read back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub seed: u64,
    pub depth: usize,
    #[serde(with = "nonfinite")]
    pub mse_train: f64,
    #[serde(with = "nonfinite")]
    pub mse_val: f64,
    pub range_spd: Option<f64>,
    pub range_res: Option<f64>,
    #[serde(default)]
    pub eta_res: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    #[serde(with = "nonfinite")]
    pub min: f64,
    #[serde(with = "nonfinite")]
    pub max: f64,
    #[serde(with = "nonfinite")]
    pub mean: f64,
}

impl Band {
    fn over(values: &[f64]) -> Option<Band> {
        if values.is_empty() {
            return None;
        }
        Some(Band {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub epoch: usize,
    pub seeds: usize,
    pub mse_train: Band,
    pub mse_val: Band,
    pub range_spd: Option<Band>,
    pub range_res: Option<Band>,
    pub eta_res: Option<Band>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthEnvelope {
    pub depth: usize,
    pub epochs: Vec<EnvelopePoint>,
}

/// Min/max/mean bands over seeds for every depth and epoch.
pub fn envelopes(rows: &[TraceRow]) -> Vec<DepthEnvelope> {
    let mut depths: Vec<usize> = rows.iter().map(|r| r.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    depths
        .into_iter()
        .map(|depth| {
            let mut epochs: Vec<usize> = rows
                .iter()
                .filter(|r| r.depth == depth)
                .map(|r| r.epoch)
                .collect();
            epochs.sort_unstable();
            epochs.dedup();
            let points = epochs
                .into_iter()
                .map(|epoch| {
                    let at: Vec<&TraceRow> = rows
                        .iter()
                        .filter(|r| r.depth == depth && r.epoch == epoch)
                        .collect();
                    let col = |f: fn(&TraceRow) -> Option<f64>| -> Vec<f64> {
                        at.iter().filter_map(|r| f(r)).collect()
                    };
                    EnvelopePoint {
                        epoch,
                        seeds: at.len(),
                        mse_train: Band::over(&col(|r| Some(r.mse_train))).expect("nonempty"),
                        mse_val: Band::over(&col(|r| Some(r.mse_val))).expect("nonempty"),
                        range_spd: Band::over(&col(|r| r.range_spd)),
                        range_res: Band::over(&col(|r| r.range_res)),
                        eta_res: Band::over(&col(|r| r.eta_res)),
                    }
                })
                .collect();
            DepthEnvelope {
                depth,
                epochs: points,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactTaskRange {
    /// `node` for Jacobian-based ranges, `graph` for Hessian-based ones.
    pub level: String,
    pub spd: f64,
    pub res: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantRange {
    pub self_loops: bool,
    pub range_spd: f64,
    pub range_res: f64,
    pub within_tolerance: bool,
}

/// Which self-loop variant of the k-Power task matches a reference range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub reference: f64,
    pub tolerance: f64,
    pub variants: Vec<VariantRange>,
    pub trained_self_loops: bool,
    pub trained_variant_matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub depth: usize,
    pub seed: u64,
    pub trace: String,
    pub checkpoint: String,
    pub diverged_at: Option<usize>,
    pub last: TraceRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRangeSummary {
    pub config: ExperimentConfig,
    pub graph: GraphSpec,
    pub task: TaskKind,
    pub k: usize,
    pub exact: ExactTaskRange,
    pub variant_report: Option<VariantReport>,
    pub runs: Vec<RunSummary>,
    pub envelopes: Vec<DepthEnvelope>,
}

fn trace_rows(outcome: &TrainOutcome, seed: u64, depth: usize) -> Vec<TraceRow> {
    outcome
        .trace
        .records
        .iter()
        .map(|r| TraceRow {
            epoch: r.epoch,
            seed,
            depth,
            mse_train: r.mse_train,
            mse_val: r.mse_val,
            range_spd: r.range_spd,
            range_res: r.range_res,
            eta_res: r.eta_res,
        })
        .collect()
}

fn write_trace(path: &Path, rows: &[TraceRow], graph_level: bool) -> Result<()> {
    if graph_level {
        let out: Vec<GraphTraceRow> = rows
            .iter()
            .map(|r| GraphTraceRow {
                epoch: r.epoch,
                seed: r.seed,
                depth: r.depth,
                mse_train: r.mse_train,
                mse_val: r.mse_val,
                range_spd: r.range_spd,
                range_res: r.range_res,
                eta_res: r.eta_res,
            })
            .collect();
        write_csv(path, &out)
    } else {
        let out: Vec<NodeTraceRow> = rows
            .iter()
            .map(|r| NodeTraceRow {
                epoch: r.epoch,
                seed: r.seed,
                depth: r.depth,
                mse_train: r.mse_train,
                mse_val: r.mse_val,
                range_spd: r.range_spd,
                range_res: r.range_res,
            })
            .collect();
        write_csv(path, &out)
    }
}

fn exact_task_range(target: &TaskTarget, g: &Graph, xs: &[Matrix]) -> Result<ExactTaskRange> {
    let mut values = Vec::new();
    for metric in [Metric::Spd, Metric::Resistance] {
        let d = all_pairs(g, metric)?;
        let reports: Vec<RangeReport> = xs
            .iter()
            .map(|x| task_range_report(target, x, &d))
            .collect::<Result<_>>()?;
        values.push(dataset_range(&reports)?);
    }
    Ok(ExactTaskRange {
        level: if target.is_graph_level() {
            "graph"
        } else {
            "node"
        }
        .into(),
        spd: values[0],
        res: values[1],
    })
}

fn variant_report(
    g: &Graph,
    family: TaskKind,
    k: usize,
    reference: f64,
    tolerance: f64,
) -> Result<Option<VariantReport>> {
    if !matches!(family, TaskKind::KPower | TaskKind::KPowerLoops) {
        return Ok(None);
    }
    let spd = all_pairs(g, Metric::Spd)?;
    let res = all_pairs(g, Metric::Resistance)?;
    let mut variants = Vec::new();
    for self_loops in [false, true] {
        let j = k_power(g, k, self_loops)?.jacobian();
        let range_res = node_range(&j, &res, true)?.graph_range;
        variants.push(VariantRange {
            self_loops,
            range_spd: node_range(&j, &spd, true)?.graph_range,
            range_res,
            within_tolerance: (range_res - reference).abs() <= tolerance,
        });
    }
    let trained_self_loops = family == TaskKind::KPowerLoops;
    let trained_variant_matches = variants
        .iter()
        .any(|v| v.self_loops == trained_self_loops && v.within_tolerance);
    Ok(Some(VariantReport {
        reference,
        tolerance,
        variants,
        trained_self_loops,
        trained_variant_matches,
    }))
}

/// Trains one model per (depth, seed) and records losses and ranges per epoch.
/// Runs that diverge are still written; the command then fails.
pub fn cmd_train_range(cfg: &ExperimentConfig) -> Result<TrainRangeSummary> {
    cfg.validate()?;
    let task = cfg.require_task()?;
    let model = cfg.require_model()?;
    let spec = cfg.require_train()?;
    if task.families.len() != 1 || task.ks.len() != 1 || cfg.graphs.len() != 1 {
        return Err(Error::Config(
            "train-range needs exactly one graph, one task family and one k".into(),
        ));
    }
    let (family, k, graph_spec) = (task.families[0], task.ks[0], &cfg.graphs[0]);
    if family.is_graph_level() != (model.head == crate::models::gcn::Head::MeanPoolMlp) {
        return Err(Error::Config(format!(
            "task {} does not match model head {:?}",
            family.tag(),
            model.head
        )));
    }
    let custom = task.custom_matrix()?;
    prepare_out(cfg)?;

    let depths = if spec.depths.is_empty() {
        vec![model.depth]
    } else {
        spec.depths.clone()
    };
    let jobs: Vec<(usize, u64)> = depths
        .iter()
        .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let runs: Vec<(RunSummary, Vec<TraceRow>)> = jobs
        .par_iter()
        .map(|&(depth, seed)| {
            let g = graph_spec.build(seed)?;
            let target = family.build(&g, k, custom.as_ref())?;
            let data = make_dataset(&g, &target, spec.num_samples, seed)?;
            let mc = ModelConfig {
                depth,
                ..model.clone()
            };
            let outcome = train(&mc, &g, &data, &spec.train_config(seed))?;
            let rows = trace_rows(&outcome, seed, depth);
            let trace = format!("trace_depth{depth}_seed{seed}.csv");
            let checkpoint = format!("checkpoint_depth{depth}_seed{seed}.json");
            write_trace(&cfg.out_dir.join(&trace), &rows, family.is_graph_level())?;
            fs::write(cfg.out_dir.join(&checkpoint), outcome.params.to_json())?;
            if let Some(epoch) = outcome.diverged {
                log::warn!("depth {depth} seed {seed} diverged at epoch {epoch}");
            }
            let summary = RunSummary {
                depth,
                seed,
                trace,
                checkpoint,
                diverged_at: outcome.diverged,
                last: rows
                    .last()
                    .cloned()
                    .ok_or_else(|| Error::Empty("empty trace".into()))?,
            };
            Ok((summary, rows))
        })
        .collect::<Result<_>>()?;

    let seed0 = cfg.seeds[0];
    let g = graph_spec.build(seed0)?;
    let target = family.build(&g, k, custom.as_ref())?;
    let val: Vec<Matrix> = make_dataset(&g, &target, spec.num_samples, seed0)?
        .val
        .into_iter()
        .map(|s| s.x)
        .collect();
    let exact = exact_task_range(&target, &g, &val)?;
    let variant_report = match task.reference_range {
        Some(r) => variant_report(&g, family, k, r, task.reference_tolerance)?,
        None => None,
    };

    let all_rows: Vec<TraceRow> = runs
        .iter()
        .flat_map(|(_, rows)| rows.iter().cloned())
        .collect();
    let summary = TrainRangeSummary {
        config: cfg.clone(),
        graph: graph_spec.clone(),
        task: family,
        k,
        exact,
        variant_report,
        envelopes: envelopes(&all_rows),
        runs: runs.into_iter().map(|(s, _)| s).collect(),
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    if let Some(epoch) = summary.runs.iter().find_map(|r| r.diverged_at) {
        return Err(Error::Diverged { epoch });
    }
    Ok(summary)
}

// --------------------------------------------------------------------- exact

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub values: Vec<f64>,
    pub max_abs_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactRecord {
    pub graph: GraphSpec,
    pub seed: u64,
    pub family: TaskKind,
    pub k: usize,
    pub report: RangeReport,
    pub oracle: Option<OracleComparison>,
}

/// Closed-form node values where the task family has one.
fn oracle_values(
    g: &Graph,
    family: TaskKind,
    k: usize,
    metric: Metric,
) -> Result<Option<Vec<f64>>> {
    if metric != Metric::Spd {
        return Ok(None);
    }
    let n = g.node_count();
    match family {
        TaskKind::SquaredDifferenceGraph => (0..n)
            .map(|u| match analytic_graph_range(g, u, k) {
                Ok(r) => Ok(r),
                Err(Error::Degenerate(_)) => Ok(0.0),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<f64>>>()
            .map(Some),
        TaskKind::KDirac => (0..n)
            .map(|u| {
                let shells = crate::graphs::khop_shells(g, u, k)?;
                Ok(if shells.last().is_some_and(|s| !s.is_empty()) {
                    k as f64
                } else {
                    0.0
                })
            })
            .collect::<Result<Vec<f64>>>()
            .map(Some),
        _ => Ok(None),
    }
}

/// Exact range reports for every graph, task, k and metric at the first seed.
pub fn cmd_exact(cfg: &ExperimentConfig) -> Result<Vec<ExactRecord>> {
    cfg.validate()?;
    let task = cfg.require_task()?;
    let custom = task.custom_matrix()?;
    prepare_out(cfg)?;
    let seed = cfg.seeds[0];
    let mut records = Vec::new();
    for spec in &cfg.graphs {
        let g = spec.build(seed)?;
        let dists = distances(&g, &cfg.metrics)?;
        let x = gaussian_features(g.node_count(), 1, seed);
        for &family in &task.families {
            for &k in &task.ks {
                let target = family.build(&g, k, custom.as_ref())?;
                for d in &dists {
                    let report = task_range_report(&target, &x, d)?;
                    let oracle = oracle_values(&g, family, k, d.metric())?.map(|values| {
                        let max_abs_delta = values
                            .iter()
                            .zip(&report.node_ranges)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        OracleComparison {
                            values,
                            max_abs_delta,
                        }
                    });
                    let record = ExactRecord {
                        graph: spec.clone(),
                        seed,
                        family,
                        k,
                        report,
                        oracle,
                    };
                    let file = format!(
                        "exact_{}_{}_k{}_{}.json",
                        spec.label(),
                        family.tag(),
                        k,
                        d.metric().tag()
                    );
                    write_json(&cfg.out_dir.join(file), &record)?;
                    records.push(record);
                }
            }
        }
    }
    Ok(records)
}

// ------------------------------------------------------------------ estimate

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub seed: u64,
    pub metric: Metric,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub selected_out_nodes: usize,
    pub selected_in_nodes: usize,
    pub selected_in_channels: usize,
    pub selected_out_channels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateMetricSummary {
    pub metric: Metric,
    pub mean_estimate: f64,
    pub mean_exact: f64,
    pub mean_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub config: ExperimentConfig,
    pub metrics: Vec<EstimateMetricSummary>,
}

pub fn summarize_estimates(rows: &[EstimateRow], metrics: &[Metric]) -> Vec<EstimateMetricSummary> {
    metrics
        .iter()
        .filter_map(|&metric| {
            let at: Vec<&EstimateRow> = rows.iter().filter(|r| r.metric == metric).collect();
            if at.is_empty() {
                return None;
            }
            let mean =
                |f: fn(&EstimateRow) -> f64| at.iter().map(|r| f(r)).sum::<f64>() / at.len() as f64;
            Some(EstimateMetricSummary {
                metric,
                mean_estimate: mean(|r| r.estimate),
                mean_exact: mean(|r| r.exact),
                mean_abs_error: mean(|r| r.abs_error),
            })
        })
        .collect()
}

/// Sampled versus exact model range, one mask draw per seed.
pub fn cmd_estimate(cfg: &ExperimentConfig) -> Result<EstimateSummary> {
    cfg.validate()?;
    let sampling = cfg.sampling.clone().unwrap_or_default();
    let params = match &cfg.checkpoint {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Parameters::from_json(&text)?
        }
        None => Parameters::init(cfg.require_model()?, cfg.seeds[0])?,
    };
    prepare_out(cfg)?;
    let g = cfg.graphs[0].build(cfg.seeds[0])?;
    let dists = distances(&g, &cfg.metrics)?;
    let per_seed: Vec<Vec<EstimateRow>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let x = gaussian_features(g.node_count(), params.config.in_dim, seed);
            let j = model_jacobian(&params, &g, &x, None)?;
            dists
                .iter()
                .map(|d| {
                    let est = estimate_range(&params, &g, &x, d, &sampling.with_seed(seed))?;
                    let exact = node_range(&j, d, true)?.graph_range;
                    let s = est
                        .sampling
                        .clone()
                        .expect("estimates carry sampling metadata");
                    Ok(EstimateRow {
                        seed,
                        metric: d.metric(),
                        estimate: est.graph_range,
                        exact,
                        abs_error: (est.graph_range - exact).abs(),
                        selected_out_nodes: s.selected_out_nodes,
                        selected_in_nodes: s.selected_in_nodes,
                        selected_in_channels: s.selected_in_channels,
                        selected_out_channels: s.selected_out_channels,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<EstimateRow> = per_seed.into_iter().flatten().collect();
    write_csv(&cfg.out_dir.join("estimate.csv"), &rows)?;
    let summary = EstimateSummary {
        config: cfg.clone(),
        metrics: summarize_estimates(&rows, &cfg.metrics),
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

// ----------------------------------------------------------------- gen-graph

/// Writes the edge list and distance matrices of every configured graph.
/// Deterministic families are written once; random ones once per seed.
pub fn cmd_gen_graph(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    prepare_out(cfg)?;
    let mut written = Vec::new();
    for spec in &cfg.graphs {
        let seeds: &[u64] = if spec.is_random() {
            &cfg.seeds
        } else {
            &cfg.seeds[..1]
        };
        for &seed in seeds {
            let g = spec.build(seed)?;
            let stem = if spec.is_random() {
                format!("{}_seed{seed}", spec.label())
            } else {
                spec.label()
            };
            let edges = cfg.out_dir.join(format!("{stem}.edges"));
            fs::write(&edges, g.to_edge_list())?;
            written.push(edges);
            for d in distances(&g, &cfg.metrics)? {
                let path = cfg.out_dir.join(format!("{stem}_{}.csv", d.metric().tag()));
                fs::write(&path, d.to_csv())?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
