//! Experiment orchestration: poison, defend, evaluate per seed; aggregate;
//! persist.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::artifacts::{write_csv, CsvTable};
use super::config::{DefenseMethod, ExperimentConfig, Task};
use super::metrics::{compute_acc, compute_acc_node, compute_asr, compute_asr_node};
use crate::attack::{
    inject_node_trigger, make_trigger, poison_graph_dataset, DatasetStats, PoisonRecord,
    TriggerSpec,
};
use crate::baselines::{
    abl_defense, edge_dropout_train, finetune_defense, prune_graph, similarity_prune,
    train_vanilla, train_vanilla_node,
};
use crate::data::{split_dataset, split_node_dataset, Graph, GraphDataset, NodeDataset};
use crate::defense::{
    infer_made, infer_made_node, isolate_graph_dataset, train_made_graph, train_made_node,
    LossWeights,
};
use crate::error::{Error, Result};
use crate::gnn::{argmax, graph_logits, node_logits, GnnModel, MaskMode, ModelConfig};
use crate::isolation::{isolation_precision_recall, precision_recall_of};

/// Metrics of one seed's run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub asr: f64,
    pub acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isolation_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isolation_recall: Option<f64>,
}

/// Aggregated experiment report; `report.json` on disk. Wall-clock runtime
/// is kept out of the serialized form so reruns are byte-identical; it goes
/// to a `runtime.json` sidecar instead.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub per_seed: Vec<SeedMetrics>,
    pub mean_asr: f64,
    pub mean_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_isolation_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_isolation_recall: Option<f64>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn mean_opt(xs: &[SeedMetrics], f: impl Fn(&SeedMetrics) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = xs.iter().filter_map(&f).collect();
    if v.len() == xs.len() && !v.is_empty() {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    } else {
        None
    }
}

/// Model config for a dataset with the configured dims/knobs.
fn model_config(cfg: &ExperimentConfig, feature_dim: usize, num_classes: usize) -> ModelConfig {
    ModelConfig {
        arch: cfg.model.arch,
        feature_dim,
        hidden_dims: cfg.model.hidden_dims.clone(),
        num_classes,
        beta: cfg.model.beta,
        lambda: cfg.model.lambda,
    }
}

/// Everything one graph-task seed needs for training and evaluation.
pub(crate) struct GraphSeedSetup {
    pub poisoned: GraphDataset,
    pub ledger: PoisonRecord,
    pub spec: TriggerSpec,
    pub model_cfg: ModelConfig,
}

pub(crate) fn prepare_graph_seed(
    cfg: &ExperimentConfig,
    base: &GraphDataset,
    seed: u64,
) -> Result<GraphSeedSetup> {
    let mut ds = base.clone();
    split_dataset(&mut ds, cfg.train_fraction, seed)?;
    let stats = DatasetStats::from_graph_dataset(&ds)?;
    let spec = make_trigger(
        &stats,
        cfg.attack.trigger_size,
        cfg.attack.edge_density,
        cfg.attack.feature_mode,
        cfg.attack.attach_count,
        cfg.attack.target_label,
        seed,
    )?;
    let (poisoned, ledger) = poison_graph_dataset(&ds, &spec, cfg.attack.injection_rate, seed)?;
    let model_cfg = model_config(cfg, ds.feature_dim, ds.num_classes);
    Ok(GraphSeedSetup {
        poisoned,
        ledger,
        spec,
        model_cfg,
    })
}

fn plain_predictor(model: &GnnModel) -> impl FnMut(&Graph) -> Result<usize> + '_ {
    move |g| Ok(argmax(&graph_logits(model, g, MaskMode::Unmasked)?.0))
}

/// Trains the configured defense on one seed and evaluates it.
/// Returns metrics plus artifact files written under `out`.
fn run_graph_seed(
    cfg: &ExperimentConfig,
    base: &GraphDataset,
    seed: u64,
    out: &Path,
) -> Result<(SeedMetrics, Vec<String>)> {
    let setup = prepare_graph_seed(cfg, base, seed)?;
    let GraphSeedSetup {
        poisoned,
        ledger,
        spec,
        model_cfg,
    } = setup;
    let schedule = &cfg.schedule;
    let mut artifacts = Vec::new();

    let save_model = |model: &GnnModel, artifacts: &mut Vec<String>| -> Result<()> {
        let path = out.join(format!("ck_seed{seed}.json"));
        model.save(&path)?;
        artifacts.push(path.display().to_string());
        Ok(())
    };

    let (asr, acc, precision, recall) = match cfg.defense {
        DefenseMethod::Vanilla => {
            let model = train_vanilla(&poisoned, model_cfg, schedule, seed)?;
            save_model(&model, &mut artifacts)?;
            (
                compute_asr(plain_predictor(&model), &poisoned, &spec, seed)?,
                compute_acc(plain_predictor(&model), &poisoned)?,
                None,
                None,
            )
        }
        DefenseMethod::EdgeDropout => {
            let model =
                edge_dropout_train(&poisoned, model_cfg, schedule, cfg.baseline.dropout_p, seed)?;
            save_model(&model, &mut artifacts)?;
            (
                compute_asr(plain_predictor(&model), &poisoned, &spec, seed)?,
                compute_acc(plain_predictor(&model), &poisoned)?,
                None,
                None,
            )
        }
        DefenseMethod::Jaccard => {
            let pruned = similarity_prune(&poisoned, cfg.baseline.prune_tau)?;
            let model = train_vanilla(&pruned, model_cfg, schedule, seed)?;
            save_model(&model, &mut artifacts)?;
            let binary = poisoned.graphs.iter().all(|g| {
                g.features.iter().all(|&x| x == 0.0 || x == 1.0)
            });
            let tau = cfg.baseline.prune_tau;
            let mut predict = |g: &Graph| -> Result<usize> {
                let pg = prune_graph(g, tau, binary);
                Ok(argmax(&graph_logits(&model, &pg, MaskMode::Unmasked)?.0))
            };
            (
                compute_asr(&mut predict, &poisoned, &spec, seed)?,
                compute_acc(&mut predict, &poisoned)?,
                None,
                None,
            )
        }
        DefenseMethod::Finetune => {
            let iso = isolate_graph_dataset(
                &poisoned,
                model_cfg.clone(),
                schedule,
                cfg.isolation.alpha1,
                cfg.isolation.alpha2,
                seed,
            )?;
            let vanilla = train_vanilla(&poisoned, model_cfg, schedule, seed)?;
            let model = finetune_defense(
                vanilla,
                &poisoned,
                &iso.isolation.d_clean,
                cfg.baseline.finetune_epochs,
                schedule,
                seed,
            )?;
            save_model(&model, &mut artifacts)?;
            let iso_path = out.join(format!("isolation_seed{seed}.json"));
            std::fs::write(&iso_path, serde_json::to_string_pretty(&iso.isolation)?)?;
            artifacts.push(iso_path.display().to_string());
            let pr = isolation_precision_recall(&iso.isolation, &ledger);
            (
                compute_asr(plain_predictor(&model), &poisoned, &spec, seed)?,
                compute_acc(plain_predictor(&model), &poisoned)?,
                Some(pr.precision),
                Some(pr.recall),
            )
        }
        DefenseMethod::Abl => {
            let outb = abl_defense(
                &poisoned,
                model_cfg,
                schedule,
                cfg.baseline.abl_gamma,
                cfg.baseline.abl_isolation_rate,
                cfg.baseline.abl_unlearn_epochs,
                seed,
            )?;
            save_model(&outb.model, &mut artifacts)?;
            let pr = precision_recall_of(&outb.isolated, &ledger);
            (
                compute_asr(plain_predictor(&outb.model), &poisoned, &spec, seed)?,
                compute_acc(plain_predictor(&outb.model), &poisoned)?,
                Some(pr.precision),
                Some(pr.recall),
            )
        }
        DefenseMethod::Made => {
            let weights = LossWeights::from_config(&model_cfg);
            let outcome = train_made_graph(
                &poisoned,
                model_cfg,
                schedule,
                &weights,
                cfg.isolation.alpha1,
                cfg.isolation.alpha2,
                seed,
            )?;
            save_model(&outcome.model, &mut artifacts)?;
            let iso_path = out.join(format!("isolation_seed{seed}.json"));
            std::fs::write(&iso_path, serde_json::to_string_pretty(&outcome.isolation)?)?;
            artifacts.push(iso_path.display().to_string());
            let log_path = out.join(format!("log_seed{seed}.jsonl"));
            let mut log_text = String::new();
            for entry in &outcome.log {
                log_text.push_str(&serde_json::to_string(entry)?);
                log_text.push('\n');
            }
            std::fs::write(&log_path, log_text)?;
            artifacts.push(log_path.display().to_string());
            // mask summaries for the first few suspect graphs
            let mut mask_summaries = Vec::new();
            for &id in outcome.isolation.d_bad.iter().take(3) {
                let masks = crate::defense::compute_edge_masks(&outcome.model, &poisoned.graphs[id])?;
                mask_summaries.push((id, masks));
            }
            let mask_path = out.join(format!("masks_seed{seed}.json"));
            std::fs::write(&mask_path, serde_json::to_string_pretty(&mask_summaries)?)?;
            artifacts.push(mask_path.display().to_string());

            let pr = isolation_precision_recall(&outcome.isolation, &ledger);
            let model = &outcome.model;
            let mut predict = |g: &Graph| -> Result<usize> { Ok(infer_made(model, g)?.0) };
            (
                compute_asr(&mut predict, &poisoned, &spec, seed)?,
                compute_acc(&mut predict, &poisoned)?,
                Some(pr.precision),
                Some(pr.recall),
            )
        }
    };

    Ok((
        SeedMetrics {
            seed,
            asr,
            acc,
            isolation_precision: precision,
            isolation_recall: recall,
        },
        artifacts,
    ))
}

/// Node-task seed setup, shared with the CLI.
pub(crate) struct NodeSeedSetup {
    pub poisoned: NodeDataset,
    pub ledger: PoisonRecord,
    pub spec: TriggerSpec,
    pub model_cfg: ModelConfig,
}

pub(crate) fn prepare_node_seed(
    cfg: &ExperimentConfig,
    base: &NodeDataset,
    seed: u64,
) -> Result<NodeSeedSetup> {
    let mut ds = base.clone();
    split_node_dataset(&mut ds, cfg.train_fraction, cfg.val_fraction, seed)?;
    let stats = DatasetStats::from_node_dataset(&ds)?;
    let spec = make_trigger(
        &stats,
        cfg.attack.trigger_size,
        cfg.attack.edge_density,
        cfg.attack.feature_mode,
        cfg.attack.attach_count,
        cfg.attack.target_label,
        seed,
    )?;
    let (poisoned, ledger) = inject_node_trigger(&ds, &spec, cfg.attack.victim_count, seed)?;
    let model_cfg = model_config(cfg, ds.graph.feature_dim, ds.num_classes);
    Ok(NodeSeedSetup {
        poisoned,
        ledger,
        spec,
        model_cfg,
    })
}

fn run_node_seed(
    cfg: &ExperimentConfig,
    base: &NodeDataset,
    seed: u64,
    out: &Path,
) -> Result<(SeedMetrics, Vec<String>)> {
    let NodeSeedSetup {
        poisoned,
        ledger,
        spec,
        model_cfg,
    } = prepare_node_seed(cfg, base, seed)?;
    let schedule = &cfg.schedule;
    let mut artifacts = Vec::new();

    let (asr, acc, precision, recall) = match cfg.defense {
        DefenseMethod::Vanilla => {
            let model = train_vanilla_node(&poisoned, model_cfg, schedule, seed)?;
            let path = out.join(format!("ck_seed{seed}.json"));
            model.save(&path)?;
            artifacts.push(path.display().to_string());
            let classes = model.config.num_classes;
            let mut predict = |ds: &NodeDataset, v: usize| -> Result<usize> {
                let (logits, _) = node_logits(&model, &ds.graph, MaskMode::Unmasked)?;
                Ok(argmax(&logits[v * classes..(v + 1) * classes]))
            };
            (
                compute_asr_node(&mut predict, &poisoned, &spec, seed)?,
                compute_acc_node(&mut predict, &poisoned)?,
                None,
                None,
            )
        }
        DefenseMethod::Made => {
            let weights = LossWeights::from_config(&model_cfg);
            let outcome = train_made_node(
                &poisoned,
                model_cfg,
                schedule,
                &weights,
                cfg.isolation.alpha1,
                cfg.isolation.alpha2,
                seed,
            )?;
            let path = out.join(format!("ck_seed{seed}.json"));
            outcome.model.save(&path)?;
            artifacts.push(path.display().to_string());
            let state_path = out.join(format!("defense_state_seed{seed}.json"));
            std::fs::write(
                &state_path,
                serde_json::to_string(&outcome.clean_nodes)?,
            )?;
            artifacts.push(state_path.display().to_string());
            let iso_path = out.join(format!("isolation_seed{seed}.json"));
            std::fs::write(&iso_path, serde_json::to_string_pretty(&outcome.isolation)?)?;
            artifacts.push(iso_path.display().to_string());

            let pr = isolation_precision_recall(&outcome.isolation, &ledger);
            let model = &outcome.model;
            let clean = &outcome.clean_nodes;
            let mut predict = |ds: &NodeDataset, v: usize| -> Result<usize> {
                infer_made_node(model, &ds.graph, clean, v)
            };
            (
                compute_asr_node(&mut predict, &poisoned, &spec, seed)?,
                compute_acc_node(&mut predict, &poisoned)?,
                Some(pr.precision),
                Some(pr.recall),
            )
        }
        other => {
            return Err(Error::Config(format!(
                "defense {} is not available for the node task",
                other.tag()
            )))
        }
    };

    Ok((
        SeedMetrics {
            seed,
            asr,
            acc,
            isolation_precision: precision,
            isolation_recall: recall,
        },
        artifacts,
    ))
}

/// Runs the configured experiment over all seeds, writes `report.json`,
/// `metrics.csv`, `runtime.json` and per-seed artifacts under the output
/// directory, and returns the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.out_dir)?;

    let mut per_seed = Vec::new();
    let mut artifacts = Vec::new();
    match cfg.task {
        Task::Graph => {
            let base = cfg.build_graph_dataset()?;
            for &seed in &cfg.seeds {
                let (metrics, files) = run_graph_seed(cfg, &base, seed, &cfg.out_dir)?;
                per_seed.push(metrics);
                artifacts.extend(files);
            }
        }
        Task::Node => {
            let base = cfg.build_node_dataset()?;
            for &seed in &cfg.seeds {
                let (metrics, files) = run_node_seed(cfg, &base, seed, &cfg.out_dir)?;
                per_seed.push(metrics);
                artifacts.extend(files);
            }
        }
    }

    let report = ExperimentReport {
        config: cfg.clone(),
        mean_asr: mean(per_seed.iter().map(|m| m.asr)),
        mean_acc: mean(per_seed.iter().map(|m| m.acc)),
        mean_isolation_precision: mean_opt(&per_seed, |m| m.isolation_precision),
        mean_isolation_recall: mean_opt(&per_seed, |m| m.isolation_recall),
        per_seed,
        artifacts,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };

    let report_path = cfg.out_dir.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;

    let mut rows: Vec<Vec<String>> = report
        .per_seed
        .iter()
        .map(|m| {
            vec![
                m.seed.to_string(),
                m.asr.to_string(),
                m.acc.to_string(),
                m.isolation_precision.map_or(String::new(), |v| v.to_string()),
                m.isolation_recall.map_or(String::new(), |v| v.to_string()),
            ]
        })
        .collect();
    rows.push(vec![
        "mean".into(),
        report.mean_asr.to_string(),
        report.mean_acc.to_string(),
        report
            .mean_isolation_precision
            .map_or(String::new(), |v| v.to_string()),
        report
            .mean_isolation_recall
            .map_or(String::new(), |v| v.to_string()),
    ]);
    write_csv(
        cfg.out_dir.join("metrics.csv"),
        &CsvTable {
            header: vec![
                "seed".into(),
                "asr".into(),
                "acc".into(),
                "precision".into(),
                "recall".into(),
            ],
            rows,
        },
    )?;
    std::fs::write(
        cfg.out_dir.join("runtime.json"),
        format!("{{\"runtime_seconds\": {}}}\n", report.runtime_seconds),
    )?;
    Ok(report)
}

/// Re-evaluates a persisted checkpoint under the same config and seed,
/// reproducing the training-time metrics exactly.
pub fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    seed: u64,
) -> Result<SeedMetrics> {
    match cfg.task {
        Task::Graph => {
            let base = cfg.build_graph_dataset()?;
            let setup = prepare_graph_seed(cfg, &base, seed)?;
            let model = GnnModel::load(checkpoint)?;
            let (asr, acc) = match cfg.defense {
                DefenseMethod::Made => {
                    let mut predict =
                        |g: &Graph| -> Result<usize> { Ok(infer_made(&model, g)?.0) };
                    (
                        compute_asr(&mut predict, &setup.poisoned, &setup.spec, seed)?,
                        compute_acc(&mut predict, &setup.poisoned)?,
                    )
                }
                DefenseMethod::Jaccard => {
                    let binary = setup
                        .poisoned
                        .graphs
                        .iter()
                        .all(|g| g.features.iter().all(|&x| x == 0.0 || x == 1.0));
                    let tau = cfg.baseline.prune_tau;
                    let mut predict = |g: &Graph| -> Result<usize> {
                        let pg = prune_graph(g, tau, binary);
                        Ok(argmax(&graph_logits(&model, &pg, MaskMode::Unmasked)?.0))
                    };
                    (
                        compute_asr(&mut predict, &setup.poisoned, &setup.spec, seed)?,
                        compute_acc(&mut predict, &setup.poisoned)?,
                    )
                }
                _ => (
                    compute_asr(plain_predictor(&model), &setup.poisoned, &setup.spec, seed)?,
                    compute_acc(plain_predictor(&model), &setup.poisoned)?,
                ),
            };
            Ok(SeedMetrics {
                seed,
                asr,
                acc,
                isolation_precision: None,
                isolation_recall: None,
            })
        }
        Task::Node => {
            let base = cfg.build_node_dataset()?;
            let setup = prepare_node_seed(cfg, &base, seed)?;
            let model = GnnModel::load(checkpoint)?;
            let classes = model.config.num_classes;
            let (asr, acc) = match cfg.defense {
                DefenseMethod::Made => {
                    let state_path = checkpoint
                        .parent()
                        .unwrap_or(Path::new("."))
                        .join(format!("defense_state_seed{seed}.json"));
                    let clean: Vec<bool> =
                        serde_json::from_str(&std::fs::read_to_string(&state_path)?)?;
                    let mut predict = |ds: &NodeDataset, v: usize| -> Result<usize> {
                        infer_made_node(&model, &ds.graph, &clean, v)
                    };
                    (
                        compute_asr_node(&mut predict, &setup.poisoned, &setup.spec, seed)?,
                        compute_acc_node(&mut predict, &setup.poisoned)?,
                    )
                }
                _ => {
                    let mut predict = |ds: &NodeDataset, v: usize| -> Result<usize> {
                        let (logits, _) = node_logits(&model, &ds.graph, MaskMode::Unmasked)?;
                        Ok(argmax(&logits[v * classes..(v + 1) * classes]))
                    };
                    (
                        compute_asr_node(&mut predict, &setup.poisoned, &setup.spec, seed)?,
                        compute_acc_node(&mut predict, &setup.poisoned)?,
                    )
                }
            };
            Ok(SeedMetrics {
                seed,
                asr,
                acc,
                isolation_precision: None,
                isolation_recall: None,
            })
        }
    }
}
