//! End-to-end acceptance gate for the whole pipeline. Runs every criterion
//! sequentially, printing one PASS/FAIL line each (visible with
//! `cargo test --test acceptance -- --nocapture`), and fails the test if any
//! criterion fails. The final criterion repeats the others with identical
//! seeds and demands byte-identical outputs (timestamps excluded).

use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use san_core::autodiff::Tensor;
use san_core::graph::{enumerate_connected, gen_cycle, gen_erdos_renyi, Graph, Task};
use san_core::lpe::{edge_lpe_forward, node_lpe_forward, EdgeLpeParams, NodeLpeParams};
use san_core::san::{
    attention_weights, pair_masks, san_forward, AttentionKind, LpeKind, ModelConfig, SanInput,
    SanParams, SelfLoopBranch,
};
use san_core::spectral::{
    biharmonic_distance_sq, diffusion_distance_sq, eigendecompose, greens_function, heat_kernel,
    laplacian, random_sign_flip, select_eigpairs, EigSelection, LaplacianKind,
};
use san_core::train::{make_cluster_dataset, train_model, RunRecord, TrainConfig};
use san_core::wl::discrimination_report;

const BIN: &str = env!("CARGO_BIN_EXE_san");

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

/// Pseudo-inverse of a symmetric matrix through nalgebra's dense
/// eigensolver. (nalgebra's SVD-based `pseudo_inverse` only reaches ~1e-4
/// accuracy on these Laplacians, far too loose to serve as an oracle.)
fn sym_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = 1e-8 * lam_max.max(1.0);
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam.abs() > tol {
            let v = eig.eigenvectors.column(k);
            out += v * v.transpose() / lam;
        }
    }
    out
}

fn connected_er(n: usize, p: f64, seed_start: u64) -> Graph {
    let mut seed = seed_start;
    loop {
        let g = gen_erdos_renyi(n, p, seed).unwrap();
        if g.is_connected() {
            return g;
        }
        seed += 1000;
    }
}

fn selection(g: &Graph, m: usize) -> EigSelection {
    let sd = eigendecompose(g, LaplacianKind::Combinatorial).unwrap();
    select_eigpairs(&sd, m).unwrap()
}

// ---------------------------------------------------------------- criteria

/// Spectral distances against independent oracles: heat-kernel rows for the
/// diffusion distance, dense pseudo-inverses for the biharmonic distance and
/// the Green's function.
fn criterion1() -> String {
    let start = Instant::now();
    let mut digest = String::new();
    for idx in 0..50u64 {
        let n = 4 + (idx as usize) % 9;
        let g = connected_er(n, 0.5, 100 + idx);

        for t in [0.3, 1.0] {
            let h = heat_kernel(&g, t);
            for i in 0..n {
                for j in (i + 1)..n {
                    let got = diffusion_distance_sq(&g, i, j, t).unwrap();
                    let oracle: f64 =
                        (0..n).map(|k| (h[i][k] - h[j][k]) * (h[i][k] - h[j][k])).sum();
                    assert!(
                        (got - oracle).abs() < 1e-8,
                        "diffusion mismatch {got} vs {oracle} (graph {idx}, t {t})"
                    );
                    digest.push_str(&fmt17(got));
                }
            }
        }

        let lap = to_dmatrix(&laplacian(&g, LaplacianKind::Combinatorial));
        let lp = sym_pinv(&lap);
        let lp2 = &lp * &lp;
        for i in 0..n {
            for j in (i + 1)..n {
                let got = biharmonic_distance_sq(&g, i, j).unwrap();
                let oracle = lp2[(i, i)] + lp2[(j, j)] - 2.0 * lp2[(i, j)];
                assert!(
                    (got - oracle).abs() < 1e-8,
                    "biharmonic mismatch {got} vs {oracle} (graph {idx})"
                );
                digest.push_str(&fmt17(got));
            }
        }

        let adj = g.adjacency_matrix();
        let deg: Vec<f64> = adj.iter().map(|row| row.iter().sum()).collect();
        let lsym = to_dmatrix(&laplacian(&g, LaplacianKind::SymmetricNormalized));
        let lsym_pinv = sym_pinv(&lsym);
        let got = greens_function(&g, false).unwrap();
        for i in 0..n {
            for j in 0..n {
                let oracle = deg[i].sqrt() * lsym_pinv[(i, j)] / deg[j].sqrt();
                assert!(
                    (got[i][j] - oracle).abs() < 1e-8,
                    "greens mismatch {} vs {oracle} (graph {idx})",
                    got[i][j]
                );
                digest.push_str(&fmt17(got[i][j]));
            }
        }
    }
    assert!(start.elapsed().as_secs_f64() < 10.0, "criterion 1 exceeded 10 s");
    digest
}

/// Edge positional encodings are exactly invariant to eigenvector sign flips.
fn criterion2() -> String {
    let start = Instant::now();
    let mut digest = String::new();
    for idx in 0..20u64 {
        let n = 5 + (idx as usize) % 6;
        let g = gen_erdos_renyi(n, 0.5, 300 + idx).unwrap();
        let sel = selection(&g, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(400 + idx);
        let params = EdgeLpeParams::new(5, 8, 4, 1, &mut rng);
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let base = edge_lpe_forward(&sel, &pairs, &params).unwrap().to_vec();
        for flip in 0..32u64 {
            let flipped = random_sign_flip(&sel, 500 + flip);
            let out = edge_lpe_forward(&flipped, &pairs, &params).unwrap().to_vec();
            let identical = base
                .iter()
                .zip(&out)
                .all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(identical, "sign flip {flip} changed edge LPE output (graph {idx})");
        }
        digest.extend(base.iter().map(|x| fmt17(*x)));
    }
    assert!(start.elapsed().as_secs_f64() < 30.0, "criterion 2 exceeded 30 s");
    digest
}

/// Attention normalization and gamma limits: per-query mass 1, non-neighbor
/// mass gamma/(1+gamma), and gamma = 0 bit-identical to the sparse-only path.
fn criterion3() -> String {
    let mut digest = String::new();
    for idx in 0..6u64 {
        let n = 7 + (idx as usize) % 4;
        let g = connected_er(n, 0.4, 600 + idx);
        let adj = g.adjacency();
        // every row needs both pair classes for the exact-mass statement
        assert!(adj.iter().all(|nb| nb.len() < n - 1), "graph {idx} has a dominating node");
        let gamma = 0.1 + 0.3 * idx as f64;

        // per-row normalization on random logits through the real masks
        let mut rng = ChaCha8Rng::seed_from_u64(700 + idx);
        let masks = pair_masks(&g, SelfLoopBranch::Real);
        let real_logits =
            Tensor::constant(&[n, n], (0..n * n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect());
        let added_logits =
            Tensor::constant(&[n, n], (0..n * n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect());
        let w = attention_weights(&real_logits, Some(&added_logits), &masks, gamma).to_vec();
        let expected_added = gamma / (1.0 + gamma);
        for i in 0..n {
            let row = &w[i * n..(i + 1) * n];
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "row {i} mass {total} (graph {idx})");
            let added: f64 = (0..n).filter(|&j| masks.added[i * n + j]).map(|j| row[j]).sum();
            assert!(
                (added - expected_added).abs() < 1e-12,
                "row {i} added mass {added} vs {expected_added} (graph {idx})"
            );
        }

        // full model: recorded non-neighbor mass matches gamma/(1+gamma)
        let cfg = ModelConfig {
            num_layers: 1,
            num_heads: 2,
            d: 8,
            k_lpe: 4,
            m: 4,
            gamma,
            ..ModelConfig::default()
        };
        let sel = selection(&g, cfg.m);
        let mut rng = ChaCha8Rng::seed_from_u64(800 + idx);
        let params = SanParams::new(cfg.clone(), 1, 1, 1, &mut rng).unwrap();
        let out = san_forward(
            &SanInput { graph: &g, sel: Some(&sel) },
            &params,
            Task::GraphRegression,
        )
        .unwrap();
        assert!(
            (out.nonneighbor_mass - expected_added).abs() < 1e-12,
            "model mass {} vs {expected_added} (graph {idx})",
            out.nonneighbor_mass
        );

        // gamma = 0 must match the sparse-only reference bit for bit
        let mut cfg0 = cfg.clone();
        cfg0.gamma = 0.0;
        let mut cfg_sparse = cfg0.clone();
        cfg_sparse.attention = AttentionKind::Sparse;
        let mut rng_a = ChaCha8Rng::seed_from_u64(900 + idx);
        let mut rng_b = ChaCha8Rng::seed_from_u64(900 + idx);
        let pa = SanParams::new(cfg0, 1, 1, 1, &mut rng_a).unwrap();
        let pb = SanParams::new(cfg_sparse, 1, 1, 1, &mut rng_b).unwrap();
        let input = SanInput { graph: &g, sel: Some(&sel) };
        let full = san_forward(&input, &pa, Task::GraphRegression).unwrap();
        let sparse = san_forward(&input, &pb, Task::GraphRegression).unwrap();
        let fa = full.pred.to_vec();
        let fb = sparse.pred.to_vec();
        assert_eq!(fa.len(), fb.len());
        assert!(
            fa.iter().zip(&fb).all(|(a, b)| a.to_bits() == b.to_bits()),
            "gamma = 0 differs from the sparse reference (graph {idx})"
        );
        assert_eq!(full.nonneighbor_mass, 0.0);

        digest.extend(w.iter().map(|x| fmt17(*x)));
        digest.extend(fa.iter().map(|x| fmt17(*x)));
    }
    digest
}

/// Full-model gradient check through the CLI.
fn criterion4() -> String {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(["gradcheck", "--seed", "0"])
        .output()
        .expect("failed to launch the CLI");
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "gradcheck exited nonzero:\n{stdout}");
    assert!(stdout.contains("PASS max_rel_err"), "unexpected gradcheck output:\n{stdout}");
    assert!(start.elapsed().as_secs_f64() < 60.0, "criterion 4 exceeded 60 s");
    stdout
}

/// 1-WL vs spectra on {C6, 2xC3} plus all connected graphs up to 6 nodes:
/// spectra must separate at least one WL-blind pair and never split
/// isomorphic graphs.
fn criterion5() -> String {
    let start = Instant::now();
    let mut corpus = vec![
        gen_cycle(6).unwrap(),
        Graph::new(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap(),
    ];
    corpus.extend(enumerate_connected(6).unwrap());
    let report = discrimination_report(&corpus, 1e-6).unwrap();
    assert!(
        report.wl_blind_spectra_separated >= 1,
        "no WL-blind spectra-separated pair found"
    );
    assert_eq!(report.unsound_pairs, 0, "spectra or WL split an isomorphic pair");
    assert!(start.elapsed().as_secs_f64() < 60.0, "criterion 5 exceeded 60 s");
    report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}\n",
                r.g1, r.g2, r.isomorphic, r.wl1_distinct, r.spectra_distinct
            )
        })
        .collect()
}

/// Masked padding: m = 8 on a 5-node graph equals m = 5 exactly, with
/// shared-prefix parameters.
fn criterion6() -> String {
    let g = connected_er(5, 0.6, 1100);
    let sd = eigendecompose(&g, LaplacianKind::Combinatorial).unwrap();
    let sel8 = select_eigpairs(&sd, 8).unwrap();
    let sel5 = select_eigpairs(&sd, 5).unwrap();
    // identical draws: the parameter shapes do not depend on m
    let p8 = NodeLpeParams::new(8, 8, 4, 1, &mut ChaCha8Rng::seed_from_u64(1200));
    let p5 = NodeLpeParams::new(5, 8, 4, 1, &mut ChaCha8Rng::seed_from_u64(1200));
    let out8 = node_lpe_forward(&sel8, &p8).unwrap().to_vec();
    let out5 = node_lpe_forward(&sel5, &p5).unwrap().to_vec();
    assert_eq!(out8.len(), out5.len());
    assert!(
        out8.iter().zip(&out5).all(|(a, b)| a.to_bits() == b.to_bits()),
        "padded m = 8 differs from m = 5"
    );
    out8.iter().map(|x| fmt17(*x)).collect()
}

fn c7_model(lpe_on: bool) -> ModelConfig {
    ModelConfig {
        num_layers: 1,
        num_heads: 2,
        d: 16,
        k_lpe: 8,
        m: 8,
        gamma: 0.1,
        lpe_kind: if lpe_on { LpeKind::Node } else { LpeKind::None },
        ..ModelConfig::default()
    }
}

fn c7_train(seed: u64) -> TrainConfig {
    TrainConfig {
        max_epochs: 25,
        batch_size: 16,
        lr_init: 5e-3,
        seed,
        sign_flip_augment: false,
        ..TrainConfig::default()
    }
}

fn c7_dataset() -> san_core::graph::Dataset {
    let mut ds = make_cluster_dataset(250, 40, 4, 0.5, 0.05, 42).unwrap();
    ds.split = san_core::graph::Split {
        train: (0..200).collect(),
        val: (200..225).collect(),
        test: (225..250).collect(),
    };
    ds
}

/// Desk-scale community-detection run: accuracy well above chance and the
/// positional encoding helping the train fit on most seeds.
fn criterion7() -> Vec<RunRecord> {
    let start = Instant::now();
    let ds = c7_dataset();
    assert_eq!(ds.split.train.len(), 200);
    let mut records = Vec::new();
    let mut wins = 0;
    for seed in 1..=4 {
        let on = train_model(&ds, &c7_model(true), &c7_train(seed)).unwrap();
        let off = train_model(&ds, &c7_model(false), &c7_train(seed)).unwrap();
        assert!(
            on.test_metric > 0.50,
            "seed {seed}: weighted test accuracy {} not above 0.50",
            on.test_metric
        );
        assert!(on.epochs.len() <= 100);
        if on.final_train_loss <= off.final_train_loss {
            wins += 1;
        }
        records.push(on);
        records.push(off);
    }
    assert!(wins >= 3, "positional encoding helped the train fit on only {wins}/4 seeds");
    assert!(start.elapsed().as_secs_f64() < 1200.0, "criterion 7 exceeded 20 min");
    records
}

fn strip_metadata(path: &Path) -> String {
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    doc.as_object_mut().unwrap().remove("metadata");
    doc.to_string()
}

fn run_ok(args: &[&str]) {
    let out = Command::new(BIN).args(args).output().expect("failed to launch the CLI");
    assert!(
        out.status.success(),
        "san {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Gamma sweep through the CLI: one record per value, each with the exact
/// non-neighbor mass.
fn criterion8() -> String {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    run_ok(&[
        "gen-data", "--kind", "sbm", "--num-graphs", "12", "--n", "12",
        "--communities", "2", "--seed", "7", "--out", data.to_str().unwrap(),
    ]);
    let gammas = [0.0, 0.05, 0.25, 1.0, 4.0];
    let out_dir = dir.path().join("sweep");
    run_ok(&[
        "train", "--data", data.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(),
        "--layers", "1", "--heads", "2", "--d", "8", "--k-lpe", "4", "--m", "4",
        "--epochs", "2", "--batch-size", "4", "--seed", "5",
        "--gamma-sweep", "0,0.05,0.25,1,4",
    ]);
    let mut digest = String::new();
    for (i, &gamma) in gammas.iter().enumerate() {
        let doc: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out_dir.join(format!("run_{i}.json"))).unwrap(),
        )
        .unwrap();
        let rec = &doc["record"];
        assert_eq!(rec["gamma"].as_f64().unwrap(), gamma);
        let mass = rec["nonneighbor_mass"].as_f64().unwrap();
        let expected = gamma / (1.0 + gamma);
        assert!(
            (mass - expected).abs() < 1e-12,
            "gamma {gamma}: recorded mass {mass} vs {expected}"
        );
        digest.push_str(&strip_metadata(&out_dir.join(format!("run_{i}.json"))));
        digest.push_str(&std::fs::read_to_string(out_dir.join(format!("epochs_{i}.csv"))).unwrap());
        digest
            .push_str(&std::fs::read_to_string(out_dir.join(format!("checkpoint_{i}.json"))).unwrap());
    }
    digest.push_str(&std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap());
    digest
}

// ---------------------------------------------------------------- harness

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn run<T>(&mut self, number: u32, desc: &str, f: impl FnOnce() -> T) -> Option<T> {
        let start = Instant::now();
        let result = std::panic::catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(v) => {
                println!("criterion {number} ({desc}): PASS ({secs:.1}s)");
                Some(v)
            }
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                println!("criterion {number} ({desc}): FAIL ({secs:.1}s): {msg}");
                self.failures.push(format!("criterion {number}: {msg}"));
                None
            }
        }
    }
}

#[test]
fn acceptance() {
    let mut gate = Gate { failures: Vec::new() };

    let d1 = gate.run(1, "spectral distance oracles", criterion1);
    let d2 = gate.run(2, "edge LPE sign invariance", criterion2);
    let d3 = gate.run(3, "attention normalization and gamma limits", criterion3);
    let d4 = gate.run(4, "full-model gradcheck", criterion4);
    let d5 = gate.run(5, "WL vs spectra expressivity", criterion5);
    let d6 = gate.run(6, "masked-padding equivalence", criterion6);
    let d7 = gate.run(7, "desk-scale learning smoke", criterion7);
    let d8 = gate.run(8, "gamma-sweep harness", criterion8);

    gate.run(9, "determinism", || {
        assert_eq!(d1, Some(criterion1()), "criterion 1 outputs changed on rerun");
        assert_eq!(d2, Some(criterion2()), "criterion 2 outputs changed on rerun");
        assert_eq!(d3, Some(criterion3()), "criterion 3 outputs changed on rerun");
        assert_eq!(d4, Some(criterion4()), "criterion 4 outputs changed on rerun");
        assert_eq!(d5, Some(criterion5()), "criterion 5 outputs changed on rerun");
        assert_eq!(d6, Some(criterion6()), "criterion 6 outputs changed on rerun");
        // repeating all eight training runs would double the longest
        // criterion; one representative run is retrained instead
        let d7 = d7.as_ref().expect("criterion 7 must pass first");
        let again = train_model(&c7_dataset(), &c7_model(true), &c7_train(1)).unwrap();
        assert_eq!(
            d7[0].to_csv(),
            again.to_csv(),
            "criterion 7 training curve changed on rerun"
        );
        assert_eq!(d8, Some(criterion8()), "criterion 8 outputs changed on rerun");
    });

    assert!(gate.failures.is_empty(), "failed criteria:\n{}", gate.failures.join("\n"));
}
