//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distances::Metric;
use crate::error::{Error, Result};
use crate::estimator::SamplingConfig;
use crate::graphs::{
    build_cycle, build_erdos_renyi, build_grid2d, build_line, build_sbm, from_edge_list, Graph,
};
use crate::linalg::Matrix;
use crate::models::gcn::ModelConfig;
use crate::models::train::{Optimizer, TaskTarget, TrainConfig};
use crate::tasks::{k_dirac, k_power, k_rectangle, LinearTask, PairwiseTaskSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", try_from = "RawGraph")]
pub enum GraphSpec {
    Line {
        n: usize,
    },
    Cycle {
        n: usize,
    },
    Grid2d {
        h: usize,
        w: usize,
    },
    ErdosRenyi {
        n: usize,
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Sbm {
        block_sizes: Vec<usize>,
        p_intra: f64,
        p_inter: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    EdgeList {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Family {
    Line,
    Cycle,
    Grid2d,
    ErdosRenyi,
    Sbm,
    EdgeList,
}

/// Flat form of a `[[graphs]]` table. Deserializing it field by field keeps
/// the position of a bad value, which a tagged enum would lose.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    family: Family,
    n: Option<usize>,
    h: Option<usize>,
    w: Option<usize>,
    p: Option<f64>,
    seed: Option<u64>,
    block_sizes: Option<Vec<usize>>,
    p_intra: Option<f64>,
    p_inter: Option<f64>,
    path: Option<PathBuf>,
}

impl TryFrom<RawGraph> for GraphSpec {
    type Error = String;

    fn try_from(r: RawGraph) -> std::result::Result<Self, String> {
        let present = [
            ("n", r.n.is_some()),
            ("h", r.h.is_some()),
            ("w", r.w.is_some()),
            ("p", r.p.is_some()),
            ("seed", r.seed.is_some()),
            ("block_sizes", r.block_sizes.is_some()),
            ("p_intra", r.p_intra.is_some()),
            ("p_inter", r.p_inter.is_some()),
            ("path", r.path.is_some()),
        ];
        let allowed: &[&str] = match r.family {
            Family::Line | Family::Cycle => &["n"],
            Family::Grid2d => &["h", "w"],
            Family::ErdosRenyi => &["n", "p", "seed"],
            Family::Sbm => &["block_sizes", "p_intra", "p_inter", "seed"],
            Family::EdgeList => &["path"],
        };
        if let Some((key, _)) = present.iter().find(|(k, set)| *set && !allowed.contains(k)) {
            return Err(format!(
                "unknown field `{key}` for graph family {:?}",
                r.family
            ));
        }
        fn need<T>(v: Option<T>, key: &str) -> std::result::Result<T, String> {
            v.ok_or_else(|| format!("missing field `{key}`"))
        }
        Ok(match r.family {
            Family::Line => GraphSpec::Line { n: need(r.n, "n")? },
            Family::Cycle => GraphSpec::Cycle { n: need(r.n, "n")? },
            Family::Grid2d => GraphSpec::Grid2d {
                h: need(r.h, "h")?,
                w: need(r.w, "w")?,
            },
            Family::ErdosRenyi => GraphSpec::ErdosRenyi {
                n: need(r.n, "n")?,
                p: need(r.p, "p")?,
                seed: r.seed,
            },
            Family::Sbm => GraphSpec::Sbm {
                block_sizes: need(r.block_sizes, "block_sizes")?,
                p_intra: need(r.p_intra, "p_intra")?,
                p_inter: need(r.p_inter, "p_inter")?,
                seed: r.seed,
            },
            Family::EdgeList => GraphSpec::EdgeList {
                path: need(r.path, "path")?,
            },
        })
    }
}

impl GraphSpec {
    /// Builds the graph; random families use their own seed if given, else
    /// the run seed.
    pub fn build(&self, run_seed: u64) -> Result<Graph> {
        match self {
            GraphSpec::Line { n } => build_line(*n),
            GraphSpec::Cycle { n } => build_cycle(*n),
            GraphSpec::Grid2d { h, w } => build_grid2d(*h, *w),
            GraphSpec::ErdosRenyi { n, p, seed } => {
                build_erdos_renyi(*n, *p, seed.unwrap_or(run_seed))
            }
            GraphSpec::Sbm {
                block_sizes,
                p_intra,
                p_inter,
                seed,
            } => build_sbm(block_sizes, *p_intra, *p_inter, seed.unwrap_or(run_seed)),
            GraphSpec::EdgeList { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                Ok(from_edge_list(&text)?.graph)
            }
        }
    }

    /// Whether different run seeds give different graphs.
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            GraphSpec::ErdosRenyi { seed: None, .. } | GraphSpec::Sbm { seed: None, .. }
        )
    }

    /// Short file-name-safe label.
    pub fn label(&self) -> String {
        match self {
            GraphSpec::Line { n } => format!("line_n{n}"),
            GraphSpec::Cycle { n } => format!("cycle_n{n}"),
            GraphSpec::Grid2d { h, w } => format!("grid_{h}x{w}"),
            GraphSpec::ErdosRenyi { n, p, .. } => format!("er_n{n}_p{p}"),
            GraphSpec::Sbm {
                block_sizes,
                p_intra,
                p_inter,
                ..
            } => {
                let sizes: Vec<String> = block_sizes.iter().map(|b| b.to_string()).collect();
                format!("sbm_{}_pin{p_intra}_pout{p_inter}", sizes.join("-"))
            }
            GraphSpec::EdgeList { path } => format!(
                "edges_{}",
                path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph")
            ),
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let GraphSpec::EdgeList { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Every task the runner knows how to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    KPower,
    KPowerLoops,
    KRectangle,
    KDirac,
    /// Node-level squared difference averaged over `N̄_k(u)`.
    SquaredDifference,
    /// Pooled squared difference over `N̄_k(u)`.
    SquaredDifferenceGraph,
    /// Pooled squared difference weighted by `Â^k` without self-loops.
    PowerSquaredDifferenceGraph,
    /// Pooled squared difference weighted by `Â^k` with self-loops.
    PowerLoopsSquaredDifferenceGraph,
    /// Dense matrix read from `task.matrix_path`.
    Custom,
}

impl TaskKind {
    pub fn tag(self) -> &'static str {
        match self {
            TaskKind::KPower => "k_power",
            TaskKind::KPowerLoops => "k_power_loops",
            TaskKind::KRectangle => "k_rectangle",
            TaskKind::KDirac => "k_dirac",
            TaskKind::SquaredDifference => "squared_difference",
            TaskKind::SquaredDifferenceGraph => "squared_difference_graph",
            TaskKind::PowerSquaredDifferenceGraph => "power_squared_difference_graph",
            TaskKind::PowerLoopsSquaredDifferenceGraph => "power_loops_squared_difference_graph",
            TaskKind::Custom => "custom",
        }
    }

    pub fn is_graph_level(self) -> bool {
        matches!(
            self,
            TaskKind::SquaredDifferenceGraph
                | TaskKind::PowerSquaredDifferenceGraph
                | TaskKind::PowerLoopsSquaredDifferenceGraph
        )
    }

    pub fn build(self, g: &Graph, k: usize, custom: Option<&Matrix>) -> Result<TaskTarget> {
        Ok(match self {
            TaskKind::KPower => TaskTarget::Linear(k_power(g, k, false)?),
            TaskKind::KPowerLoops => TaskTarget::Linear(k_power(g, k, true)?),
            TaskKind::KRectangle => TaskTarget::Linear(k_rectangle(g, k)?),
            TaskKind::KDirac => TaskTarget::Linear(k_dirac(g, k)?),
            TaskKind::SquaredDifference => {
                TaskTarget::PairwiseNode(PairwiseTaskSpec::squared_difference_node(g, k)?)
            }
            TaskKind::SquaredDifferenceGraph => {
                TaskTarget::PairwiseGraph(PairwiseTaskSpec::squared_difference_graph(g, k)?)
            }
            TaskKind::PowerSquaredDifferenceGraph => {
                TaskTarget::PairwiseGraph(PairwiseTaskSpec::power_weighted_graph(g, k, false)?)
            }
            TaskKind::PowerLoopsSquaredDifferenceGraph => {
                TaskTarget::PairwiseGraph(PairwiseTaskSpec::power_weighted_graph(g, k, true)?)
            }
            TaskKind::Custom => {
                let m = custom
                    .ok_or_else(|| Error::Config("custom task needs task.matrix_path".into()))?;
                if m.rows() != g.node_count() {
                    return Err(Error::Config(format!(
                        "custom matrix is {}x{}, graph has {} nodes",
                        m.rows(),
                        m.cols(),
                        g.node_count()
                    )));
                }
                TaskTarget::Linear(LinearTask::custom(m.clone())?)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub families: Vec<TaskKind>,
    pub ks: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_path: Option<PathBuf>,
    /// Value the exact task range is compared with, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_range: Option<f64>,
    #[serde(default = "default_reference_tolerance")]
    pub reference_tolerance: f64,
}

fn default_reference_tolerance() -> f64 {
    0.1
}

impl TaskSpec {
    /// Reads the custom matrix (comma-separated rows) if one is configured.
    pub fn custom_matrix(&self) -> Result<Option<Matrix>> {
        let Some(path) = &self.matrix_path else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        message: format!("{}: {e}", path.display()),
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        Ok(Some(Matrix::from_rows(&rows)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    #[serde(default = "default_range_samples")]
    pub range_samples: usize,
    #[serde(default)]
    pub track_hessian: bool,
    pub num_samples: usize,
    /// One run per depth; empty means the model's own depth.
    #[serde(default)]
    pub depths: Vec<usize>,
}

fn default_lr() -> f64 {
    TrainConfig::default().lr
}
fn default_epochs() -> usize {
    TrainConfig::default().epochs
}
fn default_batch() -> usize {
    TrainConfig::default().batch_size
}
fn default_optimizer() -> Optimizer {
    TrainConfig::default().optimizer
}
fn default_range_samples() -> usize {
    TrainConfig::default().range_samples
}

impl TrainSpec {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            seed,
            range_samples: self.range_samples,
            track_hessian: self.track_hessian,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub graphs: Vec<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    /// Trained parameters for `estimate`; a fresh model is used otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Spd, Metric::Resistance]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    /// Loads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = ExperimentConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for g in &mut cfg.graphs {
            g.resolve_paths(base);
        }
        if let Some(task) = &mut cfg.task {
            if let Some(p) = &task.matrix_path {
                if p.is_relative() {
                    task.matrix_path = Some(base.join(p));
                }
            }
        }
        if let Some(p) = &cfg.checkpoint {
            if p.is_relative() {
                cfg.checkpoint = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn require_task(&self) -> Result<&TaskSpec> {
        self.task
            .as_ref()
            .ok_or_else(|| Error::Config("missing [task] section".into()))
    }

    pub fn require_model(&self) -> Result<&ModelConfig> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("missing [model] section".into()))
    }

    pub fn require_train(&self) -> Result<&TrainSpec> {
        self.train
            .as_ref()
            .ok_or_else(|| Error::Config("missing [train] section".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.graphs.is_empty() {
            return Err(Error::Config(
                "at least one [[graphs]] entry is required".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("metrics must not be empty".into()));
        }
        if let Some(task) = &self.task {
            if task.families.is_empty() || task.ks.is_empty() {
                return Err(Error::Config(
                    "task.families and task.ks must not be empty".into(),
                ));
            }
            if task.families.contains(&TaskKind::Custom) && task.matrix_path.is_none() {
                return Err(Error::Config("custom task needs task.matrix_path".into()));
            }
        }
        if let Some(model) = &self.model {
            model.validate()?;
        }
        if let Some(train) = &self.train {
            if train.num_samples < 2 {
                return Err(Error::Config("train.num_samples must be at least 2".into()));
            }
            if train.depths.contains(&0) {
                return Err(Error::Config("train.depths must be positive".into()));
            }
        }
        if let Some(s) = &self.sampling {
            s.validate()?;
        }
        Ok(())
    }
}
