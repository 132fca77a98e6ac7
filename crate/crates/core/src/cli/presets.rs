//! Built-in experiment configurations, selectable with `--preset`.

use std::path::PathBuf;

use super::config::{ExperimentConfig, GraphSpec, TaskKind, TaskSpec, TrainSpec};
use crate::distances::Metric;
use crate::error::{Error, Result};
use crate::models::gcn::{Activation, Head, ModelConfig};
use crate::models::train::Optimizer;

pub const PRESETS: &[&str] = &[
    "fig2_topology",
    "fig3_tasks",
    "fig4_node_level",
    "fig5_graph_level",
    "ablation_gelu",
    "ablation_vn",
];

fn base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        out_dir: PathBuf::from("out").join(name),
        seeds: vec![0],
        metrics: vec![Metric::Spd, Metric::Resistance],
        graphs: vec![GraphSpec::Line { n: 100 }],
        task: None,
        model: None,
        train: None,
        sampling: None,
        checkpoint: None,
    }
}

fn node_level(name: &str, activation: Activation, virtual_node: bool) -> ExperimentConfig {
    ExperimentConfig {
        seeds: vec![0, 1, 2, 3],
        task: Some(TaskSpec {
            families: vec![TaskKind::KPowerLoops],
            ks: vec![5],
            matrix_path: None,
            reference_range: Some(1.33),
            reference_tolerance: 0.1,
        }),
        model: Some(ModelConfig {
            depth: 5,
            hidden_dim: 64,
            activation,
            residual: true,
            virtual_node,
            head: Head::NodeRegression,
            self_loops: true,
            ..ModelConfig::default()
        }),
        train: Some(TrainSpec {
            lr: 1e-3,
            epochs: 20,
            batch_size: 16,
            optimizer: Optimizer::Adam,
            range_samples: 4,
            track_hessian: false,
            num_samples: 500,
            depths: vec![1, 3, 5, 7],
        }),
        ..base(name)
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let ks: Vec<usize> = (1..=10).collect();
    let cfg = match name {
        "fig2_topology" => ExperimentConfig {
            seeds: vec![0, 1, 2, 3, 4],
            graphs: vec![
                GraphSpec::Line { n: 100 },
                GraphSpec::ErdosRenyi {
                    n: 100,
                    p: 0.3,
                    seed: None,
                },
                GraphSpec::ErdosRenyi {
                    n: 100,
                    p: 0.05,
                    seed: None,
                },
                GraphSpec::Sbm {
                    block_sizes: vec![50, 50],
                    p_intra: 0.3,
                    p_inter: 0.01,
                    seed: None,
                },
            ],
            task: Some(TaskSpec {
                families: vec![
                    TaskKind::KPowerLoops,
                    TaskKind::PowerLoopsSquaredDifferenceGraph,
                ],
                ks,
                matrix_path: None,
                reference_range: None,
                reference_tolerance: 0.1,
            }),
            ..base(name)
        },
        "fig3_tasks" => ExperimentConfig {
            task: Some(TaskSpec {
                families: vec![
                    TaskKind::KDirac,
                    TaskKind::KRectangle,
                    TaskKind::KPowerLoops,
                ],
                ks,
                matrix_path: None,
                reference_range: None,
                reference_tolerance: 0.1,
            }),
            ..base(name)
        },
        "fig4_node_level" => node_level(name, Activation::Identity, false),
        "ablation_gelu" => node_level(name, Activation::Gelu, false),
        "ablation_vn" => node_level(name, Activation::Identity, true),
        "fig5_graph_level" => ExperimentConfig {
            seeds: vec![0, 1, 2, 3],
            task: Some(TaskSpec {
                families: vec![TaskKind::PowerLoopsSquaredDifferenceGraph],
                ks: vec![5],
                matrix_path: None,
                reference_range: None,
                reference_tolerance: 0.15,
            }),
            model: Some(ModelConfig {
                depth: 5,
                hidden_dim: 64,
                activation: Activation::Gelu,
                residual: true,
                virtual_node: false,
                head: Head::MeanPoolMlp,
                self_loops: true,
                ..ModelConfig::default()
            }),
            train: Some(TrainSpec {
                lr: 1e-3,
                epochs: 100,
                batch_size: 8,
                optimizer: Optimizer::Adam,
                range_samples: 1,
                track_hessian: true,
                num_samples: 500,
                depths: vec![5],
            }),
            ..base(name)
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}
