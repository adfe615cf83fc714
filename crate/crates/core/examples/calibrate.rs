// Scratch calibration harness; not part of the deliverable.

use std::time::Instant;

use made_core::attack::{make_trigger, poison_graph_dataset, DatasetStats};
use made_core::baselines::train_vanilla;
use made_core::data::{generate_graph_corpus, split_dataset, GraphCorpusSpec};
use made_core::defense::{
    infer_made, isolate_graph_dataset, train_made_graph, LossWeights, TrainSchedule,
};
use made_core::experiment::{compute_acc, compute_asr};
use made_core::gnn::{argmax, graph_logits, MaskMode, ModelConfig};
use made_core::isolation::{graph_homophily, isolation_precision_recall, precision_recall_of};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(String::as_str).unwrap_or("homophily");
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let t0 = Instant::now();
    let spec = GraphCorpusSpec::aids_like();
    let mut ds = generate_graph_corpus(&spec, 0xDA7A).unwrap();
    split_dataset(&mut ds, 0.8, seed).unwrap();
    println!("corpus built in {:?}", t0.elapsed());

    let stats = DatasetStats::from_graph_dataset(&ds).unwrap();
    let trig = make_trigger(
        &stats,
        4,
        0.8,
        made_core::attack::FeatureMode::Random,
        1,
        0,
        seed,
    )
    .unwrap();
    let (poisoned, ledger) = poison_graph_dataset(&ds, &trig, 0.10, seed).unwrap();

    let cfg = ModelConfig {
        hidden_dims: vec![64, 64],
        ..ModelConfig::gcn_default(ds.feature_dim, ds.num_classes)
    };

    match what {
        "homophily" => {
            let mut clean = Vec::new();
            let mut bad = Vec::new();
            for &i in &poisoned.train_idx {
                let h = graph_homophily(&poisoned.graphs[i]);
                if ledger.is_poisoned(i) {
                    bad.push(h);
                } else {
                    clean.push(h);
                }
            }
            let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let sd = |v: &[f64], mu: f64| {
                (v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / v.len() as f64).sqrt()
            };
            let (mc, mb) = (m(&clean), m(&bad));
            println!(
                "clean {:.4} +- {:.4} | poisoned {:.4} +- {:.4} | sep {}",
                mc,
                sd(&clean, mc),
                mb,
                sd(&bad, mb),
                mb < mc - sd(&clean, mc)
            );
            let ones = clean.iter().filter(|&&h| h >= 0.9999).count();
            println!("clean graphs at homophily 1.0: {} / {}", ones, clean.len());
        }
        "vanilla" => {
            let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(15);
            let schedule = TrainSchedule {
                epoch_warm: 0,
                epoch_train: epochs,
                ..TrainSchedule::default()
            };
            let t = Instant::now();
            let model = train_vanilla(&poisoned, cfg, &schedule, seed).unwrap();
            let train_time = t.elapsed();
            let predict =
                |g: &made_core::data::Graph| Ok(argmax(&graph_logits(&model, g, MaskMode::Unmasked)?.0));
            let asr = compute_asr(predict, &poisoned, &trig, seed).unwrap();
            let acc = compute_acc(predict, &poisoned).unwrap();
            println!(
                "vanilla epochs={epochs} seed={seed}: ASR {asr:.4} ACC {acc:.4} (train {train_time:?}, total {:?})",
                t0.elapsed()
            );
        }
        "isolate" => {
            let warm: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
            let schedule = TrainSchedule {
                epoch_warm: warm,
                epoch_train: 0,
                ..TrainSchedule::default()
            };
            let t = Instant::now();
            let run = isolate_graph_dataset(&poisoned, cfg, &schedule, 0.10, 0.50, seed).unwrap();
            let pr = isolation_precision_recall(&run.isolation, &ledger);
            println!(
                "MADE isolation: precision {:.4} recall {:.4} (|D_h|={} |D_l|={}) in {:?}",
                pr.precision,
                pr.recall,
                run.isolation.d_h.len(),
                run.isolation.d_l.len(),
                t.elapsed()
            );
            // loss-only selection of the same size
            let mut by_loss = run.isolation.losses.clone();
            by_loss.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            let loss_only: Vec<usize> = by_loss[..run.isolation.d_bad.len()]
                .iter()
                .map(|&(id, _)| id)
                .collect();
            let pr2 = precision_recall_of(&loss_only, &ledger);
            println!("loss-only precision {:.4} recall {:.4}", pr2.precision, pr2.recall);
        }
        "made" => {
            let warm: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
            let train: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(30);
            let schedule = TrainSchedule {
                epoch_warm: warm,
                epoch_train: train,
                ..TrainSchedule::default()
            };
            let weights = LossWeights::from_config(&cfg);
            let t = Instant::now();
            let out =
                train_made_graph(&poisoned, cfg, &schedule, &weights, 0.10, 0.50, seed).unwrap();
            let train_time = t.elapsed();
            let pr = isolation_precision_recall(&out.isolation, &ledger);
            let predict = |g: &made_core::data::Graph| Ok(infer_made(&out.model, g)?.0);
            let asr = compute_asr(predict, &poisoned, &trig, seed).unwrap();
            let acc = compute_acc(predict, &poisoned).unwrap();
            println!(
                "MADE warm={warm} train={train} seed={seed}: ASR {asr:.4} ACC {acc:.4} prec {:.4} (train {train_time:?}) diverged={:?}",
                pr.precision, out.diverged_at
            );
        }
        "node" => {
            use made_core::attack::inject_node_trigger;
            use made_core::baselines::train_vanilla_node;
            use made_core::data::{generate_synthetic_node_graph, split_node_dataset};
            use made_core::defense::{infer_made_node, train_made_node};
            use made_core::experiment::{compute_acc_node, compute_asr_node};
            use made_core::gnn::node_logits;

            let mut nds = generate_synthetic_node_graph(500, 3, 0.10, 0.008, 8, 0.1, 0xDA7A).unwrap();
            split_node_dataset(&mut nds, 0.5, 0.0, seed).unwrap();
            let stats = DatasetStats::from_node_dataset(&nds).unwrap();
            let trig = make_trigger(
                &stats,
                5,
                0.8,
                made_core::attack::FeatureMode::Random,
                3,
                0,
                seed,
            )
            .unwrap();
            let (poisoned, ledger) = inject_node_trigger(&nds, &trig, 40, seed).unwrap();
            let ncfg = ModelConfig {
                hidden_dims: vec![64, 64],
                ..ModelConfig::gcn_default(poisoned.graph.feature_dim, poisoned.num_classes)
            };
            let schedule = TrainSchedule {
                epoch_warm: 30,
                epoch_train: 150,
                ..TrainSchedule::default()
            };
            let t = Instant::now();
            let vmodel = train_vanilla_node(&poisoned, ncfg.clone(), &schedule, seed).unwrap();
            let classes = poisoned.num_classes;
            let vp = |ds: &made_core::data::NodeDataset, v: usize| {
                let (l, _) = node_logits(&vmodel, &ds.graph, MaskMode::Unmasked)?;
                Ok(argmax(&l[v * classes..(v + 1) * classes]))
            };
            let vasr = compute_asr_node(vp, &poisoned, &trig, seed).unwrap();
            let vacc = compute_acc_node(vp, &poisoned).unwrap();
            println!("vanilla node: ASR {vasr:.4} ACC {vacc:.4} in {:?}", t.elapsed());

            let t = Instant::now();
            let mut weights = LossWeights::from_config(&ncfg);
            if let Some(clip) = args.get(3).and_then(|s| s.parse().ok()) {
                weights.adv_clip = clip;
            }
            if let Some(lam) = args.get(4).and_then(|s| s.parse().ok()) {
                weights.lambda = lam;
            }
            let out = train_made_node(&poisoned, ncfg, &schedule, &weights, 0.16, 0.5, seed).unwrap();
            let pr = isolation_precision_recall(&out.isolation, &ledger);
            let mp = |ds: &made_core::data::NodeDataset, v: usize| {
                infer_made_node(&out.model, &ds.graph, &out.clean_nodes, v)
            };
            let masr = compute_asr_node(mp, &poisoned, &trig, seed).unwrap();
            let macc = compute_acc_node(mp, &poisoned).unwrap();
            println!(
                "made node: ASR {masr:.4} ACC {macc:.4} prec {:.4} rec {:.4} in {:?} diverged={:?}",
                pr.precision,
                pr.recall,
                t.elapsed(),
                out.diverged_at
            );
        }
        "proteins" => {
            // warm-up loss direction + sweep calibration on the larger corpus
            let pspec = GraphCorpusSpec::proteins_like();
            let mut pds = generate_graph_corpus(&pspec, 0xDA7A).unwrap();
            split_dataset(&mut pds, 0.8, seed).unwrap();
            let pstats = DatasetStats::from_graph_dataset(&pds).unwrap();
            let ptrig = make_trigger(
                &pstats,
                4,
                0.8,
                made_core::attack::FeatureMode::Random,
                1,
                0,
                seed,
            )
            .unwrap();
            let (ppois, pledger) = poison_graph_dataset(&pds, &ptrig, 0.10, seed).unwrap();
            let pcfg = ModelConfig {
                hidden_dims: vec![64, 64],
                ..ModelConfig::gcn_default(pds.feature_dim, pds.num_classes)
            };
            let schedule = TrainSchedule {
                epoch_warm: 10,
                epoch_train: 0,
                ..TrainSchedule::default()
            };
            let run = isolate_graph_dataset(&ppois, pcfg.clone(), &schedule, 0.10, 0.50, seed).unwrap();
            let mut pl = vec![];
            let mut cl = vec![];
            for &(id, l) in &run.isolation.losses {
                if pledger.is_poisoned(id) {
                    pl.push(l);
                } else {
                    cl.push(l);
                }
            }
            let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            println!(
                "warmup losses: poisoned {:.4} clean {:.4} (direction ok: {})",
                m(&pl),
                m(&cl),
                m(&pl) < m(&cl)
            );

            let t = Instant::now();
            let rows = made_core::experiment::unlearn_rate_sweep(
                &ppois,
                &pledger,
                &ptrig,
                &[0.0, 0.1, 0.4, 0.5],
                &pcfg,
                &TrainSchedule {
                    epoch_warm: 10,
                    epoch_train: 15,
                    ..TrainSchedule::default()
                },
                0.10,
                0.50,
                2,
                seed,
            )
            .unwrap();
            for r in &rows {
                println!("{} rate {:.2}: ASR {:.4} ACC {:.4}", r.method, r.rate, r.asr, r.acc);
            }
            println!("sweep in {:?}", t.elapsed());
        }
        "diag" => {
            use made_core::experiment::{
                feature_spectrum, gradient_magnitude_histogram, ks_distance,
            };
            // KS check on the proteins-like corpus per the harder task
            let pspec = GraphCorpusSpec::proteins_like();
            let mut pds = generate_graph_corpus(&pspec, 0xDA7A).unwrap();
            split_dataset(&mut pds, 0.8, seed).unwrap();
            let pstats = DatasetStats::from_graph_dataset(&pds).unwrap();
            let pmode = if args.get(3).map(String::as_str) == Some("mean") {
                made_core::attack::FeatureMode::Mean
            } else {
                made_core::attack::FeatureMode::Random
            };
            let ptrig = make_trigger(&pstats, 4, 0.8, pmode, 1, 0, seed).unwrap();
            let (ppois, pledger) = poison_graph_dataset(&pds, &ptrig, 0.10, seed).unwrap();
            let pcfg = ModelConfig {
                hidden_dims: vec![64, 64],
                ..ModelConfig::gcn_default(pds.feature_dim, pds.num_classes)
            };
            let pepochs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(8);
            let schedule = TrainSchedule {
                epoch_warm: 0,
                epoch_train: pepochs,
                ..TrainSchedule::default()
            };
            let pmodel = train_vanilla(&ppois, pcfg, &schedule, seed).unwrap();
            let precs = gradient_magnitude_histogram(&pmodel, &ppois, &pledger).unwrap();
            let pmal: Vec<f64> = precs.iter().filter(|r| r.is_malicious).map(|r| r.grad_norm).collect();
            let pcln: Vec<f64> = precs.iter().filter(|r| !r.is_malicious).map(|r| r.grad_norm).collect();
            println!("proteins gradient KS: {:.4}", ks_distance(&pmal, &pcln));
            let summary = |v: &[f64]| {
                let mut v = v.to_vec();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (v[v.len() / 10], v[v.len() / 2], v[9 * v.len() / 10])
            };
            println!("  malicious p10/p50/p90: {:?}", summary(&pmal));
            println!("  clean     p10/p50/p90: {:?}", summary(&pcln));

            // spectrum with a mean-mode trigger (rows identical)
            let mtrig = make_trigger(&stats, 4, 0.8, made_core::attack::FeatureMode::Mean, 1, 0, seed).unwrap();
            let (mpois, mledger) = poison_graph_dataset(&ds, &mtrig, 0.10, seed).unwrap();
            let _ = (&mpois, &mledger);

            let model = train_vanilla(&poisoned, cfg, &schedule, seed).unwrap();
            let recs = gradient_magnitude_histogram(&model, &poisoned, &ledger).unwrap();
            let mal: Vec<f64> = recs.iter().filter(|r| r.is_malicious).map(|r| r.grad_norm).collect();
            let cln: Vec<f64> = recs.iter().filter(|r| !r.is_malicious).map(|r| r.grad_norm).collect();
            let ks = ks_distance(&mal, &cln);
            println!("gradient KS distance: {ks:.4} (< 0.5: {})", ks < 0.5);

            // stack features of clean vs backdoor nodes over poisoned train graphs
            let d = poisoned.feature_dim;
            let mut clean_rows = Vec::new();
            let mut bad_rows = Vec::new();
            for &i in &mpois.train_idx {
                let g = &mpois.graphs[i];
                let injected = mledger.injected_of(i);
                for v in 0..g.n {
                    let mal = injected.map(|inj| inj.contains(&v)).unwrap_or(false);
                    if mal {
                        bad_rows.extend_from_slice(g.feature_row(v));
                    } else if bad_rows.len() / d > clean_rows.len() / d {
                        clean_rows.extend_from_slice(g.feature_row(v));
                    }
                }
            }
            let sc = feature_spectrum(&clean_rows, clean_rows.len() / d, d).unwrap();
            let sb = feature_spectrum(&bad_rows, bad_rows.len() / d, d).unwrap();
            println!(
                "spectrum ratio sigma2/sigma1: clean {:.5} backdoor {:.5} (backdoor smaller: {})",
                sc[1] / sc[0],
                sb[1] / sb[0],
                sb[1] / sb[0] < sc[1] / sc[0]
            );
        }
        other => println!("unknown mode {other}"),
    }
}
