//! One PASS/FAIL line per acceptance criterion. The benchmark criteria train
//! the full synthetic ablation for five seeds, so this target takes a while.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{brute_force_ap, gradcheck, problem, project, random_tensor, rng, tiny_nets};
use isin::bench::{median, median_seg_acc_curve, run_seed, BenchConfig, SeedResult};
use isin::colormap::build_colormap;
use isin::commands::{read_state_scores, write_state_scores};
use isin::config::RunConfig;
use isin::data::netpbm::{read_pgm, read_ppm, write_pgm, write_ppm};
use isin::data::{default_schema, generate, read_dataset, write_dataset, Dataset, GenConfig, PartLabelMap, PartStateVector};
use isin::eval::{average_precision, part_state_map, recall_at_k, Detection, GroundTruth, ScoredSample};
use isin::networks::Checkpoint;
use isin::relationship::{
    fuse_scores, predict_relationships, read_relationships, train_predicate_model, write_relationships,
    LinearPredicateModel, PriorScores, RelateConfig, RelationshipSample,
};
use isin::trainer::{infer, joint_objective, Mode, Prediction, TrainConfig, TrainState, Trainer};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let mut worst_primitive = 0.0f64;
    let mut worst_composite = 0.0f64;
    for seed in 0..5u64 {
        let mut r = rng(7000 + seed);
        let c = 1 + seed as usize % 3;
        let x = random_tensor(&mut r, &[4, 6, c]);
        let other = random_tensor(&mut r, &[4, 6, 2]);
        let bias = random_tensor(&mut r, &[c]);
        let k = random_tensor(&mut r, &[3, 3, c, 2]);
        let kt = random_tensor(&mut r, &[2, 2, c, 3]);
        let fc_w = random_tensor(&mut r, &[c, 3]);
        let fc_b = random_tensor(&mut r, &[3]);
        let m = random_tensor(&mut r, &[c + 2, 3]);
        let logits = random_tensor(&mut r, &[5]);
        let bits: Vec<f64> = (0..5).map(|i| ((i + seed as usize) % 2) as f64).collect();
        let classes: Vec<usize> = (0..24).map(|i| (i * 5 + seed as usize) % c).collect();

        let errs = [
            gradcheck(&[x.clone(), k.clone()], |g, v| {
                let y = g.conv2d(v[0], v[1], 1, 1).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone(), k.clone()], |g, v| {
                let y = g.conv2d(v[0], v[1], 2, 0).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone(), kt.clone()], |g, v| {
                let y = g.conv2d_transpose(v[0], v[1], 2, 0).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone()], |g, v| {
                let y = g.relu(v[0]).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone()], |g, v| {
                let y = g.max_pool2x2(v[0]).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone(), bias.clone()], |g, v| {
                let y = g.bias_add(v[0], v[1]).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone(), fc_w.clone(), fc_b.clone()], |g, v| {
                let p = g.global_avg_pool(v[0]).unwrap();
                let y = g.fully_connected(p, v[1], v[2]).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone()], |g, v| {
                let y = g.softmax(v[0]).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone(), other.clone()], |g, v| {
                let u = g.concat_channels(v[0], v[1]).unwrap();
                let y = g.channel_map(u, m.clone()).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[x.clone()], |g, v| {
                let s = g.scale(v[0], 0.3).unwrap();
                let y = g.add(s, v[0]).unwrap();
                project(g, y, seed)
            }),
            gradcheck(&[logits.clone()], |g, v| g.binary_cross_entropy(v[0], &bits).unwrap()),
            gradcheck(&[x.clone()], |g, v| g.softmax_cross_entropy(v[0], &classes).unwrap()),
        ];
        worst_primitive = errs.iter().cloned().fold(worst_primitive, f64::max);

        let cmap = build_colormap(3).unwrap();
        for window in [1, 2] {
            let (part6, state) = tiny_nets(seed);
            let pr = problem(seed + 50);
            let np = part6.tensors.len();
            let inputs: Vec<_> = part6.tensors.iter().chain(&state.tensors).cloned().collect();
            let err = gradcheck(&inputs, |g, vars| {
                let u = g.input(pr.u.clone());
                let rgb = g.input(pr.rgb.clone());
                joint_objective(g, &vars[..np], &vars[np..], u, rgb, &pr.labels, &pr.targets, 0.7, window, &cmap)
                    .unwrap()
                    .0
            });
            worst_composite = worst_composite.max(err);
        }
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "primitives max rel err {worst_primitive:.1e}, objective {worst_composite:.1e}, {:.1}s",
        elapsed.as_secs_f64()
    );
    ensure(worst_primitive < 1e-6 && worst_composite < 1e-5 && elapsed < Duration::from_secs(60), || {
        detail.clone()
    })?;
    Ok(detail)
}

fn random_mask(r: &mut ChaCha8Rng, pixels: usize) -> Vec<bool> {
    loop {
        let m: Vec<bool> = (0..pixels).map(|_| r.gen_bool(0.5)).collect();
        if m.iter().any(|&b| b) {
            return m;
        }
    }
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(31);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let images = r.gen_range(1..=2);
        let gts: Vec<(usize, Vec<bool>)> =
            (0..r.gen_range(0..=3)).map(|_| (r.gen_range(0..images), random_mask(&mut r, 16))).collect();
        let dets: Vec<(usize, f64, Vec<bool>)> = (0..r.gen_range(0..=4))
            .map(|_| {
                let score = r.gen_range(0..4) as f64 / 4.0;
                if !gts.is_empty() && r.gen_bool(0.7) {
                    let (img, m) = &gts[r.gen_range(0..gts.len())];
                    let near = m.iter().map(|&b| b != r.gen_bool(0.2)).collect::<Vec<_>>();
                    (*img, score, if near.iter().any(|&b| b) { near } else { m.clone() })
                } else {
                    (r.gen_range(0..images), score, random_mask(&mut r, 16))
                }
            })
            .collect();
        let detections: Vec<Detection> =
            dets.iter().map(|(image, score, mask)| Detection { image: *image, score: *score, mask: mask.clone() }).collect();
        let ground_truths: Vec<GroundTruth> =
            gts.iter().map(|(image, mask)| GroundTruth { image: *image, mask: mask.clone() }).collect();
        let got = average_precision(&detections, &ground_truths, 0.5).map_err(|e| e.to_string())?.average_precision;
        worst = worst.max((got - brute_force_ap(&dets, &gts, 0.5)).abs());
    }

    let schema = default_schema();
    for _ in 0..200 {
        let label = |r: &mut ChaCha8Rng| PartLabelMap::new(3, 3, (0..9).map(|_| r.gen_range(0..=3)).collect()).unwrap();
        let n = r.gen_range(1..=3);
        let gt: Vec<(PartLabelMap, PartStateVector)> = (0..n)
            .map(|_| {
                let l = label(&mut r);
                let mut bits = vec![false; 6];
                for part in 1..=3 {
                    if l.count(part) > 0 {
                        bits[schema.bins_of_part(part).start + r.gen_range(0..2)] = true;
                    }
                }
                (l, PartStateVector::from_bits(bits))
            })
            .collect();
        let preds: Vec<ScoredSample> = (0..n)
            .map(|_| ScoredSample { labels: label(&mut r), state_scores: (0..6).map(|_| r.gen_range(0..4) as f64).collect() })
            .collect();
        let report = part_state_map(&preds, &gt, &schema).map_err(|e| e.to_string())?;
        let mut aps = Vec::new();
        for bin in 0..6 {
            let part = schema.part_of_bin(bin);
            let dets: Vec<(usize, f64, Vec<bool>)> = preds
                .iter()
                .enumerate()
                .filter(|(_, p)| p.state_scores[bin] > 0.0 && p.labels.count(part) > 0)
                .map(|(i, p)| (i, p.state_scores[bin], p.labels.mask(part)))
                .collect();
            let gts: Vec<(usize, Vec<bool>)> =
                gt.iter().enumerate().filter(|(_, (_, s))| s.get(bin)).map(|(i, (l, _))| (i, l.mask(part))).collect();
            match (report.per_bin[bin], gts.is_empty()) {
                (None, true) => {}
                (Some(ap), false) => {
                    let want = brute_force_ap(&dets, &gts, 0.5);
                    worst = worst.max((ap - want).abs());
                    aps.push(want);
                }
                _ => return Err(format!("bin {bin} presence disagrees with the ground truth")),
            }
        }
        if !aps.is_empty() {
            worst = worst.max((report.map - aps.iter().sum::<f64>() / aps.len() as f64).abs());
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("max deviation {worst:.1e} over 400 instances, {:.2}s", elapsed.as_secs_f64());
    ensure(worst < 1e-9 && elapsed < Duration::from_secs(10), || detail.clone())?;
    Ok(detail)
}

fn ablation_ordering(results: &[SeedResult]) -> Outcome {
    let col = |f: &dyn Fn(&SeedResult) -> f64| median(&results.iter().map(f).collect::<Vec<_>>());
    let s1 = col(&|r| r.setting1_map());
    let s2 = col(&|r| r.setting2_map());
    let b1 = col(&|r| r.baseline1_map);
    let slowest = results.iter().map(|r| r.elapsed).max().unwrap();
    let detail = format!(
        "median mAP s2 {:.1} s1 {:.1} b1 {:.1}, slowest seed {:.0}s",
        100.0 * s2,
        100.0 * s1,
        100.0 * b1,
        slowest.as_secs_f64()
    );
    ensure(s2 - s1 >= 0.02 && s1 - b1 >= 0.05 && slowest < Duration::from_secs(600), || detail.clone())?;
    Ok(detail)
}

fn gt_segmentation_bound(results: &[SeedResult]) -> Outcome {
    let pairs: Vec<String> = results
        .iter()
        .map(|r| format!("{:.1}/{:.1}", 100.0 * r.gt_seg_map, 100.0 * r.setting2_map()))
        .collect();
    let detail = format!("gt/predicted per seed {}", pairs.join(" "));
    ensure(results.iter().all(|r| r.gt_seg_map >= r.setting2_map()), || detail.clone())?;
    Ok(detail)
}

fn iteration_dynamics(results: &[SeedResult]) -> Outcome {
    let curve = median_seg_acc_curve(results);
    let text: Vec<String> = curve.iter().map(|v| format!("{:.1}", 100.0 * v)).collect();
    let detail = format!("median seg acc {}", text.join(" "));
    let gain = curve.last().unwrap() - curve[0];
    let steady = curve.windows(2).all(|w| w[1] >= w[0] - 0.01);
    ensure(gain >= 0.03 && steady, || detail.clone())?;
    Ok(detail)
}

fn unfolded_parity(results: &[SeedResult]) -> Outcome {
    let with_s3: Vec<&SeedResult> = results.iter().filter(|r| r.setting3_map.is_some()).collect();
    let s3 = median(&with_s3.iter().map(|r| r.setting3_map.unwrap()).collect::<Vec<_>>());
    let s2 = median(&with_s3.iter().map(|r| r.setting2_map()).collect::<Vec<_>>());
    let detail = format!("median mAP s3 {:.1} s2 {:.1} over {} seeds", 100.0 * s3, 100.0 * s2, with_s3.len());
    ensure(with_s3.len() >= 3 && (s3 - s2).abs() <= 0.02, || detail.clone())?;
    Ok(detail)
}

const INDICATOR: [usize; 4] = [2, 1, 4, 5];

fn separable_set(seed: u64, n: usize) -> Vec<RelationshipSample> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let predicate = i % 4;
            let mut s = vec![false; 6];
            s[INDICATOR[predicate]] = true;
            s[0] = r.gen_bool(0.5);
            s[3] = r.gen_bool(0.5);
            RelationshipSample {
                id: format!("{i:06}"),
                subject_category: "widget".into(),
                object_category: "widget".into(),
                subject_states: PartStateVector::from_bits(s),
                object_states: PartStateVector::from_bits((0..6).map(|_| r.gen_bool(0.5)).collect()),
                predicate,
            }
        })
        .collect()
}

fn relationship_pipeline() -> Outcome {
    let err = |e: isin::Error| e.to_string();
    let model = train_predicate_model(&separable_set(1, 200), 4, &RelateConfig::default()).map_err(err)?;
    let held_out = separable_set(2, 100);
    let ranked = predict_relationships(&model, &held_out, &PriorScores::default()).map_err(err)?;
    let ids: Vec<Vec<usize>> = ranked.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
    let gt: Vec<Vec<usize>> = held_out.iter().map(|s| vec![s.predicate]).collect();
    let r1 = recall_at_k(&ids, &gt, 1).map_err(err)?;
    ensure(r1 == 1.0, || format!("recall@1 {r1}"))?;

    ensure(fuse_scores(0.4, 0.6) == 0.5 && fuse_scores(0.3, 0.3) == 0.3 && fuse_scores(-1.0, 3.0) == 1.0, || {
        "fuse_scores unit cases".into()
    })?;

    let fixtures: [(Vec<Vec<usize>>, Vec<Vec<usize>>, usize, f64); 3] = [
        (vec![vec![0, 1, 2, 3], vec![2, 0, 1, 3], vec![1, 0, 2, 3]], vec![vec![0], vec![0, 3], vec![3]], 2, 0.5),
        (vec![vec![1, 2, 0]], vec![vec![0, 2]], 2, 0.5),
        (vec![vec![3, 1], vec![2, 0]], vec![vec![1], vec![2]], 1, 0.5),
    ];
    for (i, (ranked, gt, k, want)) in fixtures.iter().enumerate() {
        let got = recall_at_k(ranked, gt, *k).map_err(err)?;
        ensure(got == *want, || format!("fixture {i}: recall@{k} {got}, expected {want}"))?;
    }
    Ok(format!("held-out recall@1 {r1:.2}, fusion and 3 recall fixtures exact"))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn prediction_bits(p: &Prediction) -> (Vec<u8>, Vec<u32>, Vec<u32>, Vec<u32>) {
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    (p.labels.labels().to_vec(), bits(p.probs.data()), bits(p.s_image.data()), bits(&p.state_scores))
}

fn determinism_and_persistence() -> Outcome {
    let err = |e: isin::Error| e.to_string();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let schema = default_schema();
    let gen = GenConfig { seed: 11, num_samples: 30, image_size: 16, ..GenConfig::default() };

    let dataset = |seed_dir: &str| -> Result<Dataset, String> {
        let ds = Dataset { schema: schema.clone(), samples: generate(&gen, &schema).map_err(err)? };
        write_dataset(&root.join(seed_dir), &ds).map_err(err)?;
        Ok(ds)
    };
    let ds = dataset("a")?;
    dataset("b")?;
    ensure(dir_bytes(&root.join("a")) == dir_bytes(&root.join("b")), || "dataset bytes differ".into())?;
    ensure(read_dataset(&root.join("a")).map_err(err)? == ds, || "dataset round trip".into())?;

    let cfg = TrainConfig {
        mode: Mode::Setting2,
        seed: 4,
        max_iterations: 2,
        epochs_per_iteration: 1,
        bootstrap_epochs: 1,
        ..TrainConfig::default()
    };
    let fp = schema.fingerprint();
    let train = |path: &str| -> Result<TrainState, String> {
        let t = Trainer::train(&ds.samples, &schema, &cfg, |_| Ok(())).map_err(err)?;
        t.state().to_checkpoint(fp).save(&root.join(path)).map_err(err)?;
        Ok(t.state().clone())
    };
    let state = train("a.ckpt")?;
    train("b.ckpt")?;
    let bytes = fs::read(root.join("a.ckpt")).map_err(|e| e.to_string())?;
    ensure(bytes == fs::read(root.join("b.ckpt")).map_err(|e| e.to_string())?, || "checkpoint bytes differ".into())?;

    let loaded = Checkpoint::load(&root.join("a.ckpt")).map_err(err)?;
    ensure(loaded.to_bytes().map_err(err)? == bytes, || "checkpoint re-encoding differs".into())?;
    let restored = TrainState::from_checkpoint(&loaded).map_err(err)?;
    for s in &ds.samples {
        let a = infer(&state, &s.image).map_err(err)?;
        let b = infer(&restored, &s.image).map_err(err)?;
        ensure(prediction_bits(&a) == prediction_bits(&b), || format!("inference differs on {}", s.id))?;
    }

    let rgb: Vec<u8> = (0..4 * 3 * 3).map(|v| (v * 11) as u8).collect();
    write_ppm(&root.join("x.ppm"), 4, 3, &rgb).map_err(err)?;
    ensure(read_ppm(&root.join("x.ppm")).map_err(err)?.data == rgb, || "ppm round trip".into())?;
    let gray: Vec<u8> = (0..12).map(|v| v * 20).collect();
    write_pgm(&root.join("x.pgm"), 4, 3, &gray).map_err(err)?;
    ensure(read_pgm(&root.join("x.pgm")).map_err(err)?.data == gray, || "pgm round trip".into())?;

    let rows: Vec<(String, Vec<f64>)> =
        ds.samples.iter().map(|s| (s.id.clone(), infer(&state, &s.image).unwrap().state_scores.iter().map(|&v| v as f64).collect())).collect();
    write_state_scores(&root.join("states.csv"), Some(&schema), &rows).map_err(err)?;
    ensure(read_state_scores(&root.join("states.csv"), &schema).map_err(err)? == rows, || "states.csv round trip".into())?;

    let rels = separable_set(3, 20);
    write_relationships(&root.join("rel.tsv"), &rels).map_err(err)?;
    ensure(read_relationships(&root.join("rel.tsv")).map_err(err)? == rels, || "relationships round trip".into())?;
    let model = train_predicate_model(&rels, 4, &RelateConfig::default()).map_err(err)?;
    ensure(LinearPredicateModel::parse(&model.to_text(), Path::new("model.txt")).map_err(err)? == model, || {
        "predicate model round trip".into()
    })?;

    let mut run = RunConfig::default();
    run.set("train.lambda", "0.35").map_err(err)?;
    run.set("gen.num_samples", "77").map_err(err)?;
    let mut back = RunConfig::default();
    back.apply_text(&run.to_text(), Path::new("config.txt")).map_err(err)?;
    ensure(back == run, || "config round trip".into())?;

    Ok(format!(
        "{} dataset files, {}-byte checkpoints identical, inference bit-identical on {} images",
        dir_bytes(&root.join("a")).len(),
        bytes.len(),
        ds.samples.len()
    ))
}

fn benchmark(cfg: &BenchConfig) -> Vec<SeedResult> {
    (0..5u64)
        .map(|seed| {
            let cfg = BenchConfig { run_setting3: seed < 3, ..cfg.clone() };
            let r = run_seed(&cfg, seed).expect("benchmark seed");
            eprintln!(
                "  seed {seed}: s1 {:.3} s2 {:.3} b1 {:.3} gt {:.3} s3 {:?} [{:.0}s]",
                r.setting1_map(),
                r.setting2_map(),
                r.baseline1_map,
                r.gt_seg_map,
                r.setting3_map,
                r.elapsed.as_secs_f64()
            );
            r
        })
        .collect()
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        match &outcome {
            Ok(d) => println!("criterion {n} {name}: PASS ({d})"),
            Err(d) => {
                failures += 1;
                println!("criterion {n} {name}: FAIL ({d})")
            }
        }
    };

    report(1, "gradient integrity", gradient_integrity());
    report(2, "metric oracle equivalence", metric_oracle());

    let results = benchmark(&BenchConfig::default());
    report(3, "ablation ordering", ablation_ordering(&results));
    report(4, "gt segmentation bound", gt_segmentation_bound(&results));
    report(5, "iteration dynamics", iteration_dynamics(&results));
    report(6, "unfolded parity", unfolded_parity(&results));
    report(7, "relationship pipeline", relationship_pipeline());
    report(8, "determinism and persistence", determinism_and_persistence());

    if failures > 0 {
        std::process::exit(1);
    }
}
