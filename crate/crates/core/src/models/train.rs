//! Datasets of Gaussian node features and a minibatch training loop that
//! tracks model range while it learns.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gcn::{
    forward_batch, jacobian_from_pass, model_hessian_scalar, GraphOperator, Head, ModelConfig,
    Parameters,
};
use super::tape::Tape;
use crate::distances::{resistance_all_pairs, spd_all_pairs, DistanceMatrix};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::linalg::Matrix;
use crate::range::{dataset_range, hessian_node_range, node_range, RangeReport};
use crate::rng::{seeded, stream};
use crate::tasks::{LinearTask, PairwiseTaskSpec};

/// What a model is trained to predict.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskTarget {
    Linear(LinearTask),
    PairwiseNode(PairwiseTaskSpec),
    PairwiseGraph(PairwiseTaskSpec),
}

impl TaskTarget {
    pub fn n(&self) -> usize {
        match self {
            TaskTarget::Linear(t) => t.n(),
            TaskTarget::PairwiseNode(s) | TaskTarget::PairwiseGraph(s) => s.n(),
        }
    }

    pub fn is_graph_level(&self) -> bool {
        matches!(self, TaskTarget::PairwiseGraph(_))
    }

    pub fn evaluate(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            TaskTarget::Linear(t) => t.apply(x),
            TaskTarget::PairwiseNode(s) => s.evaluate_nodes(x),
            TaskTarget::PairwiseGraph(s) => {
                let y = s.evaluate_graph(x)?;
                Matrix::from_vec(1, y.len(), y)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Matrix,
    pub y: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

/// `num_samples` single-channel inputs with iid standard normal entries and
/// their task targets; the first 80% train, the rest validate.
pub fn make_dataset(
    g: &Graph,
    task: &TaskTarget,
    num_samples: usize,
    seed: u64,
) -> Result<Dataset> {
    let n = g.node_count();
    if task.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "task over {} nodes, graph has {n}",
            task.n()
        )));
    }
    if num_samples == 0 {
        return Err(Error::InvalidSize(
            "dataset needs at least one sample".into(),
        ));
    }
    let mut rng = seeded(seed, stream::FEATURES);
    let mut samples = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let data: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = Matrix::from_vec(n, 1, data)?;
        let y = task.evaluate(&x)?;
        samples.push(Sample { x, y });
    }
    let val = samples.split_off(num_samples * 4 / 5);
    Ok(Dataset {
        train: samples,
        val,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Validation samples used for per-epoch range tracking (0 disables it).
    pub range_samples: usize,
    /// Also track the Hessian-based range (graph-level models only).
    pub track_hessian: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            epochs: 20,
            batch_size: 16,
            optimizer: Optimizer::Adam,
            seed: 0,
            range_samples: 4,
            track_hessian: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mse_train: f64,
    pub mse_val: f64,
    pub range_spd: Option<f64>,
    pub range_res: Option<f64>,
    pub eta_res: Option<f64>,
    pub wall_time_s: f64,
}

/// Per-epoch history; epoch 0 is the untrained model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: Parameters,
    pub trace: TrainTrace,
    /// First epoch whose loss was not finite; training stopped there.
    pub diverged: Option<usize>,
}

struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(params: &Parameters) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors
            .iter()
            .map(|t| Matrix::zeros(t.value.rows(), t.value.cols()))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Parameters, grads: &[Option<Matrix>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let w = params.tensors[i].value.as_mut_slice();
            let m = self.m[i].as_mut_slice();
            let v = self.v[i].as_mut_slice();
            for (k, &gk) in g.as_slice().iter().enumerate() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * gk;
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * gk * gk;
                w[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

fn stack(rows: impl Iterator<Item = Matrix>) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut total = 0;
    let mut cols = None;
    for m in rows {
        total += m.rows();
        cols.get_or_insert(m.cols());
        data.extend_from_slice(m.as_slice());
    }
    Matrix::from_vec(total, cols.unwrap_or(0), data)
}

const EVAL_CHUNK: usize = 64;

/// Mean squared error over a set of samples.
pub fn evaluate_mse(params: &Parameters, gop: &GraphOperator, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut sse = 0.0;
    let mut count = 0usize;
    for chunk in samples.chunks(EVAL_CHUNK) {
        let x = stack(chunk.iter().map(|s| s.x.clone()))?;
        let y = stack(chunk.iter().map(|s| s.y.clone()))?;
        let pass = forward_batch(params, gop, x)?;
        let out = pass.output();
        if out.rows() != y.rows() || out.cols() != y.cols() {
            return Err(Error::DimensionMismatch(format!(
                "model emits {}x{}, targets are {}x{}",
                out.rows(),
                out.cols(),
                y.rows(),
                y.cols()
            )));
        }
        sse += out
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        count += y.as_slice().len();
    }
    Ok(sse / count as f64)
}

/// Distances used when tracking range during training.
#[derive(Clone, Debug)]
pub struct RangeProbe {
    pub spd: DistanceMatrix,
    pub res: DistanceMatrix,
}

impl RangeProbe {
    pub fn new(g: &Graph) -> Result<Self> {
        Ok(RangeProbe {
            spd: spd_all_pairs(g),
            res: resistance_all_pairs(g)?,
        })
    }
}

/// Node-level dataset ranges `(spd, res)` of the model over `samples`.
pub fn model_dataset_range(
    params: &Parameters,
    gop: &GraphOperator,
    probe: &RangeProbe,
    samples: &[Sample],
) -> Result<(f64, f64)> {
    let mut spd = Vec::with_capacity(samples.len());
    let mut res = Vec::with_capacity(samples.len());
    for s in samples {
        let pass = forward_batch(params, gop, s.x.clone())?;
        let (j, _) = jacobian_from_pass(&pass, params.config.head, None)?;
        spd.push(node_range(&j, &probe.spd, true)?);
        res.push(node_range(&j, &probe.res, true)?);
    }
    Ok((dataset_range(&spd)?, dataset_range(&res)?))
}

/// Hessian-based dataset range of a graph-level model under resistance.
pub fn model_dataset_eta(
    params: &Parameters,
    g: &Graph,
    probe: &RangeProbe,
    samples: &[Sample],
) -> Result<f64> {
    let reports: Vec<RangeReport> = samples
        .iter()
        .map(|s| hessian_node_range(&model_hessian_scalar(params, g, &s.x)?, &probe.res, true))
        .collect::<Result<_>>()?;
    dataset_range(&reports)
}

fn check_head(cfg: &ModelConfig, dataset: &Dataset, n: usize) -> Result<()> {
    let Some(sample) = dataset.train.first() else {
        return Err(Error::Empty("no training samples".into()));
    };
    let expected = match cfg.head {
        Head::NodeRegression => (n, cfg.out_dim),
        Head::MeanPoolMlp => (1, cfg.out_dim),
    };
    if (sample.y.rows(), sample.y.cols()) != expected || sample.x.cols() != cfg.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "samples map {}x{} to {}x{}, model maps {}x{} to {}x{}",
            sample.x.rows(),
            sample.x.cols(),
            sample.y.rows(),
            sample.y.cols(),
            n,
            cfg.in_dim,
            expected.0,
            expected.1
        )));
    }
    Ok(())
}

/// Minimizes the mean squared error with minibatches drawn from a seeded
/// shuffle, recording losses and ranges after every epoch.
pub fn train(
    cfg: &ModelConfig,
    g: &Graph,
    dataset: &Dataset,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    let params = Parameters::init(cfg, tc.seed)?;
    train_from(params, g, dataset, tc)
}

/// As [`train`], starting from the given parameters.
pub fn train_from(
    mut params: Parameters,
    g: &Graph,
    dataset: &Dataset,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    let cfg = params.config.clone();
    params.validate()?;
    check_head(&cfg, dataset, g.node_count())?;
    if tc.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    if !(tc.lr >= 0.0 && tc.lr.is_finite()) {
        return Err(Error::Config(format!("learning rate {} is invalid", tc.lr)));
    }
    if tc.track_hessian && cfg.head != Head::MeanPoolMlp {
        return Err(Error::Config(
            "hessian tracking needs the mean-pool head".into(),
        ));
    }
    let gop = GraphOperator::new(&cfg, g)?;
    let probe = if tc.range_samples > 0 {
        Some(RangeProbe::new(g)?)
    } else {
        None
    };
    let range_set = &dataset.val[..tc.range_samples.min(dataset.val.len())];
    let mut shuffle_rng = seeded(tc.seed, stream::SHUFFLE);
    let mut adam = Adam::new(&params);
    let mut trace = TrainTrace::default();
    let start = Instant::now();

    let record = |params: &Parameters, epoch: usize, trace: &mut TrainTrace| -> Result<bool> {
        let mse_train = evaluate_mse(params, &gop, &dataset.train)?;
        let mse_val = evaluate_mse(params, &gop, &dataset.val)?;
        let finite = mse_train.is_finite() && params.is_finite();
        let (mut range_spd, mut range_res, mut eta_res) = (None, None, None);
        if let (Some(probe), true, false) = (&probe, finite, range_set.is_empty()) {
            let (s, r) = model_dataset_range(params, &gop, probe, range_set)?;
            range_spd = Some(s);
            range_res = Some(r);
            if tc.track_hessian {
                eta_res = Some(model_dataset_eta(params, g, probe, range_set)?);
            }
        }
        trace.records.push(EpochRecord {
            epoch,
            mse_train,
            mse_val,
            range_spd,
            range_res,
            eta_res,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        Ok(finite)
    };

    if !record(&params, 0, &mut trace)? {
        return Ok(TrainOutcome {
            params,
            trace,
            diverged: Some(0),
        });
    }
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    for epoch in 1..=tc.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(tc.batch_size) {
            let x = stack(batch.iter().map(|&i| dataset.train[i].x.clone()))?;
            let y = stack(batch.iter().map(|&i| dataset.train[i].y.clone()))?;
            let grads = batch_gradients(&params, &gop, x, y)?;
            match tc.optimizer {
                Optimizer::Adam => adam.step(&mut params, &grads, tc.lr),
                Optimizer::Sgd => {
                    for (i, g) in grads.iter().enumerate() {
                        if let Some(g) = g {
                            params.tensors[i].value.add_assign(&g.scale(-tc.lr));
                        }
                    }
                }
            }
        }
        if !record(&params, epoch, &mut trace)? {
            log::warn!("training diverged at epoch {epoch}");
            return Ok(TrainOutcome {
                params,
                trace,
                diverged: Some(epoch),
            });
        }
        if let Some(r) = trace.last() {
            log::debug!(
                "epoch {epoch}: train {:.3e} val {:.3e}",
                r.mse_train,
                r.mse_val
            );
        }
    }
    Ok(TrainOutcome {
        params,
        trace,
        diverged: None,
    })
}

fn batch_gradients(
    params: &Parameters,
    gop: &GraphOperator,
    x: Matrix,
    y: Matrix,
) -> Result<Vec<Option<Matrix>>> {
    let pass = forward_batch(params, gop, x)?;
    let mut tape: Tape = pass.tape;
    let loss = tape.squared_error(pass.output, y)?;
    Ok(tape.param_gradients(loss, params.len()))
}
