//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any blocking criterion fails.
//!
//! Criteria 7 to 9 train on MovieLens-100k; fetch it first with
//! `python3 scripts/fetch_ml100k.py`.

mod common;

use std::collections::HashSet;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use gclrec_core::augment::{build_augmented_adjacency, draw_deltas, suggest_edges, EdgeCandidateSet, EdgeOperator};
use gclrec_core::encoder::propagate_backward_embeddings;
use gclrec_core::eval::{evaluate, ndcg_at_k, recall_at_k, EvalSplit};
use gclrec_core::losses::{batch_l2, bpr_loss, infonce_batch, infonce_rows, loss_f, loss_t, LossWeights};
use gclrec_core::param::{l2_penalty, max_relative_error, numeric_gradient, ParamTensor};
use gclrec_core::trainer::{final_embeddings, prepare_data, prepare_set, train, EpochLog, TrainOutcome};
use gclrec_core::{
    normalize, propagate, propagate_backward, BipartiteGraph, Checkpoint, DegreeMode, EmbeddingMatrix, ModelKind, Node,
    SplitData, TrainBatch, TrainConfig, TrainInputs, Triple,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

struct Line {
    id: u32,
    name: &'static str,
    blocking: bool,
    passed: bool,
}

fn report(lines: &mut Vec<Line>, id: u32, name: &'static str, blocking: bool, f: impl FnOnce() -> Verdict) {
    let start = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(msg)
    });
    let secs = start.elapsed().as_secs_f64();
    let (passed, detail) = match verdict {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    let tag = if passed { "PASS" } else { "FAIL" };
    let kind = if blocking { "" } else { " (informational)" };
    // Straight to the process stdout so the lines survive libtest's capture.
    let mut out = std::io::stdout().lock();
    writeln!(out, "{tag} criterion {id}{kind}: {name}: {detail} [{secs:.1} s]").unwrap();
    out.flush().unwrap();
    lines.push(Line {
        id,
        name,
        blocking,
        passed,
    });
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

fn propagation_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let weighted = k % 2 == 1;
        let g = Arc::new(common::random_graph(&mut rng, 32, 80, weighted));
        let layers = k % 5;
        let dim = rng.gen_range(1..=6);
        let z0 = common::random_embeddings(&mut rng, g.n_users(), g.n_items(), dim);
        let adj = normalize(g.clone(), 1e-8);
        let (z, _) = propagate(&adj, &z0, layers).map_err(|e| e.to_string())?;
        let oracle = common::dense_propagate(&g, 1e-8, layers, &z0);
        for (a, b) in z.as_slice().iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-10 && secs < 5.0,
        format!("50 graphs (binary and weighted, L in 0..=4), max entrywise error {worst:.2e}, {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- 2

const H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const INSTANCES: u64 = 20;

fn bpr_gradients(rng: &mut ChaCha8Rng) -> f64 {
    let g = common::random_graph(rng, 14, 40, false);
    let z = common::random_embeddings(rng, g.n_users(), g.n_items(), 4);
    let batch = common::random_batch(rng, &g, 8);
    let (_, analytic) = bpr_loss(&batch, &z);
    let numeric = numeric_gradient(
        |x| bpr_loss(&batch, &EmbeddingMatrix::from_vec(z.n_users(), z.n_items(), 4, x.to_vec()).unwrap()).0,
        z.as_slice(),
        H,
    );
    max_relative_error(analytic.as_slice(), &numeric)
}

fn infonce_gradients(rng: &mut ChaCha8Rng) -> f64 {
    let g = common::random_graph(rng, 16, 60, false);
    let (nu, ni, dim) = (g.n_users(), g.n_items(), 4);
    let z1 = common::random_embeddings(rng, nu, ni, dim);
    let z2 = common::random_embeddings(rng, nu, ni, dim);
    let batch = common::random_batch(rng, &g, 8);
    let tau = rng.gen_range(0.1..1.0);
    let r = infonce_batch(&batch, &z1, &z2, tau).unwrap();
    let value = |a: &[f64], b: &[f64]| {
        let a = EmbeddingMatrix::from_vec(nu, ni, dim, a.to_vec()).unwrap();
        let b = EmbeddingMatrix::from_vec(nu, ni, dim, b.to_vec()).unwrap();
        infonce_batch(&batch, &a, &b, tau).unwrap().total
    };
    let n1 = numeric_gradient(|x| value(x, z2.as_slice()), z1.as_slice(), H);
    let n2 = numeric_gradient(|x| value(z1.as_slice(), x), z2.as_slice(), H);
    max_relative_error(r.grad_view1.unwrap().as_slice(), &n1).max(max_relative_error(r.grad_view2.unwrap().as_slice(), &n2))
}

fn l2_gradients(rng: &mut ChaCha8Rng) -> f64 {
    let lambda = rng.gen_range(1e-3..1.0);
    let params: Vec<ParamTensor> = (0..2)
        .map(|k| {
            let n = 3 + k;
            ParamTensor::from_values(format!("p{k}"), &[n], (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
        })
        .collect();
    let (_, grads) = l2_penalty(&params, lambda);
    let flat: Vec<f64> = params.iter().flat_map(|p| p.values.clone()).collect();
    let numeric = numeric_gradient(
        |x| {
            let mut probe = params.clone();
            probe[0].values.copy_from_slice(&x[..3]);
            probe[1].values.copy_from_slice(&x[3..]);
            l2_penalty(&probe, lambda).0
        },
        &flat,
        H,
    );
    let e1 = max_relative_error(&grads.concat(), &numeric);

    let g = common::random_graph(rng, 14, 40, false);
    let z0 = common::random_embeddings(rng, g.n_users(), g.n_items(), 3);
    let batch = common::random_batch(rng, &g, 6);
    let (_, grad) = batch_l2(&batch, &z0, lambda);
    let numeric = numeric_gradient(
        |x| batch_l2(&batch, &EmbeddingMatrix::from_vec(z0.n_users(), z0.n_items(), 3, x.to_vec()).unwrap(), lambda).0,
        z0.as_slice(),
        H,
    );
    e1.max(max_relative_error(grad.as_slice(), &numeric))
}

/// `loss_f` from `Z^0` through both propagations, with the full-table L2 over `Z^0`.
fn loss_f_gradients(rng: &mut ChaCha8Rng) -> f64 {
    let g = Arc::new(common::random_graph(rng, 16, 60, false));
    let (nu, ni, dim, depth) = (g.n_users(), g.n_items(), 3, rng.gen_range(1..=3));
    let adj1 = normalize(g.clone(), 1e-8);
    let w: Vec<f64> = (0..g.n_edges()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let adj2 = normalize(Arc::new(g.binary().with_weights(w).unwrap()), 1e-8);
    let batch = common::random_batch(rng, &g, 8);
    let weights = LossWeights {
        lambda_ssl: 0.3,
        lambda_reg: 0.01,
        ..LossWeights::default()
    };
    let z0 = common::random_embeddings(rng, nu, ni, dim);
    let tables = |z: &EmbeddingMatrix| {
        vec![
            ParamTensor::from_values("f.user", &[nu, dim], z.user_block().to_vec()).unwrap(),
            ParamTensor::from_values("f.item", &[ni, dim], z.item_block().to_vec()).unwrap(),
        ]
    };
    let (z1, t1) = propagate(&adj1, &z0, depth).unwrap();
    let (z2, t2) = propagate(&adj2, &z0, depth).unwrap();
    let r = loss_f(&batch, &z1, Some(&z2), &weights, &tables(&z0)).unwrap();
    let mut analytic = propagate_backward_embeddings(&t1, r.grad_view1.as_ref().unwrap()).unwrap();
    analytic.add_assign(&propagate_backward_embeddings(&t2, r.grad_view2.as_ref().unwrap()).unwrap());
    let analytic: Vec<f64> = analytic.as_slice().iter().zip(r.grad_params.concat()).map(|(a, b)| a + b).collect();
    let numeric = numeric_gradient(
        |x| {
            let z = EmbeddingMatrix::from_vec(nu, ni, dim, x.to_vec()).unwrap();
            let (a, _) = propagate(&adj1, &z, depth).unwrap();
            let (b, _) = propagate(&adj2, &z, depth).unwrap();
            loss_f(&batch, &a, Some(&b), &weights, &tables(&z)).unwrap().total
        },
        z0.as_slice(),
        H,
    );
    max_relative_error(&analytic, &numeric)
}

/// `loss_t` w.r.t. every MLP weight: through the edge weights of the
/// augmented propagation, the Gumbel-sigmoid with frozen noise, and the MLP.
fn loss_t_gradients(rng: &mut ChaCha8Rng) -> f64 {
    let g = common::random_graph(rng, 12, 40, false);
    let (nu, ni, dim, depth) = (g.n_users(), g.n_items(), 3, rng.gen_range(1..=3));
    let mut flagged = Vec::new();
    for u in 0..nu as u32 {
        for i in 0..ni as u32 {
            if g.has_edge(u, i) {
                flagged.push((u, i, true));
            } else if rng.gen_bool(0.5) {
                flagged.push((u, i, false));
            }
        }
    }
    let cands = EdgeCandidateSet::from_flagged(nu, ni, &flagged).unwrap();
    let adj1 = normalize(Arc::new(g.clone()), 1e-8);
    let batch = common::random_batch(rng, &g, 6);
    let weights = LossWeights {
        lambda_t: rng.gen_range(0.1..1.0),
        lambda_ssl: 0.4,
        lambda_reg: 0.01,
        ..LossWeights::default()
    };
    let z0 = common::random_embeddings(rng, nu, ni, dim);
    let (z1, _) = propagate(&adj1, &z0, depth).unwrap();
    let mut op = EdgeOperator::new(dim, 4, rng).unwrap();
    let deltas = draw_deltas(cands.len(), rng);
    let tau_g = rng.gen_range(0.5..2.0);
    let mode = if rng.gen_bool(0.5) { DegreeMode::Weighted } else { DegreeMode::Binary };

    let loss_of = |op: &EdgeOperator| {
        let (p, tape) = op.forward(&z1, &cands, tau_g, deltas.clone()).unwrap();
        let adj2 = build_augmented_adjacency(&cands, &p, 1e-8, mode).unwrap();
        let (z2, ptape) = propagate(&adj2, &z0, depth).unwrap();
        (loss_t(&batch, &z1, &z2, &weights, op.params().tensors()).unwrap(), tape, ptape)
    };
    let (r, tape, ptape) = loss_of(&op);
    let (_, d_w) = propagate_backward(&ptape, r.grad_view2.as_ref().unwrap()).unwrap();
    op.params_mut().zero_grad();
    op.backward(&tape, &cands, &d_w).unwrap();
    op.params_mut().accumulate(&r.grad_params).unwrap();

    let flat: Vec<f64> = op.params().tensors().iter().flat_map(|t| t.values.clone()).collect();
    let analytic: Vec<f64> = op.params().tensors().iter().flat_map(|t| t.grad.clone()).collect();
    let numeric = numeric_gradient(
        |x| {
            let mut probe = op.clone();
            let mut k = 0;
            for t in probe.params_mut().tensors_mut() {
                let n = t.values.len();
                t.values.copy_from_slice(&x[k..k + n]);
                k += n;
            }
            loss_of(&probe).0.total
        },
        &flat,
        H,
    );
    max_relative_error(&analytic, &numeric)
}

type GradientCheck = fn(&mut ChaCha8Rng) -> f64;

fn gradient_suite() -> Verdict {
    let start = Instant::now();
    let families: [(&str, GradientCheck); 5] = [
        ("bpr", bpr_gradients),
        ("infonce", infonce_gradients),
        ("l2", l2_gradients),
        ("loss_f", loss_f_gradients),
        ("loss_t", loss_t_gradients),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (name, f)) in families.iter().enumerate() {
        let worst = (0..INSTANCES)
            .map(|s| f(&mut ChaCha8Rng::seed_from_u64(1000 * k as u64 + s)))
            .fold(0.0f64, f64::max);
        ok &= worst <= GRAD_TOL;
        parts.push(format!("{name} {worst:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        ok && secs < 60.0,
        format!("{INSTANCES} instances each, h = {H:e}, max rel. error: {}, {secs:.2} s", parts.join(", ")),
    )
}

// ---------------------------------------------------------------- 3

fn closed_form_losses() -> Verdict {
    let mut worst_nce = 0.0f64;
    for b in [2usize, 4, 8] {
        let dim = 5;
        let row: Vec<f64> = (0..dim).map(|k| 0.3 + k as f64).collect();
        let block: Vec<f64> = row.iter().cycle().take(b * dim).copied().collect();
        let nodes: Vec<Node> = (0..b as u32).map(Node::User).collect();
        let (loss, _, _) = infonce_rows(&block, &block, dim, 0.2, &nodes).map_err(|e| e.to_string())?;
        worst_nce = worst_nce.max((loss - ((b - 1) as f64).ln()).abs());

        // Same check through the batch estimator: b users and b items, all equal.
        let z = EmbeddingMatrix::from_vec(b, b, dim, row.iter().cycle().take(2 * b * dim).copied().collect()).unwrap();
        let batch = TrainBatch {
            triples: (0..b as u32).map(|k| Triple { user: k, pos: k, neg: (k + 1) % b as u32 }).collect(),
        };
        let r = infonce_batch(&batch, &z, &z, 0.2).map_err(|e| e.to_string())?;
        let want = ((b - 1) as f64).ln();
        worst_nce = worst_nce
            .max((r.components.infonce_user - want).abs())
            .max((r.components.infonce_item - want).abs());
    }
    let z = EmbeddingMatrix::from_vec(3, 4, 2, vec![1.0; 14]).unwrap();
    let batch = TrainBatch {
        triples: vec![
            Triple { user: 0, pos: 1, neg: 2 },
            Triple { user: 1, pos: 0, neg: 3 },
            Triple { user: 2, pos: 3, neg: 3 },
        ],
    };
    let (bpr, _) = bpr_loss(&batch, &z);
    let err_bpr = (bpr - std::f64::consts::LN_2).abs();
    check(
        worst_nce <= 1e-9 && err_bpr <= 1e-12,
        format!("InfoNCE vs log(B-1) for B in {{2,4,8}}: max error {worst_nce:.1e}; equal-score BPR vs ln 2: {err_bpr:.1e}"),
    )
}

// ---------------------------------------------------------------- 4

fn brute_recall(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> f64 {
    let mut hits = 0usize;
    for (pos, item) in ranked.iter().enumerate() {
        if pos < k && relevant.contains(item) {
            hits += 1;
        }
    }
    hits as f64 / relevant.len() as f64
}

fn brute_ndcg(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> f64 {
    let gain = |pos: usize| std::f64::consts::LN_2 / ((pos + 2) as f64).ln();
    let mut dcg = 0.0;
    for (pos, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += gain(pos);
        }
    }
    let mut ideal = 0.0;
    for pos in 0..k.min(relevant.len()) {
        ideal += gain(pos);
    }
    dcg / ideal
}

fn metric_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n_items = rng.gen_range(1..80u32);
        let mut items: Vec<u32> = (0..n_items).collect();
        items.shuffle(&mut rng);
        let ranked: Vec<u32> = items[..rng.gen_range(1..=items.len())].to_vec();
        let n_rel = rng.gen_range(1..=n_items as usize);
        let mut pool: Vec<u32> = (0..n_items).collect();
        pool.shuffle(&mut rng);
        let mut relevant: Vec<u32> = pool[..n_rel].to_vec();
        relevant.sort_unstable();
        let set: HashSet<u32> = relevant.iter().copied().collect();
        let k = *[1usize, 3, 10, 20, 50, rng.gen_range(1..100)].choose(&mut rng).unwrap();
        worst = worst
            .max((recall_at_k(&ranked, &relevant, k) - brute_recall(&ranked, &set, k)).abs())
            .max((ndcg_at_k(&ranked, &relevant, k) - brute_ndcg(&ranked, &set, k)).abs());
    }

    // Full-ranking protocol end to end against a sort-everything reference.
    let mut worst_eval = 0.0f64;
    for s in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + s);
        let raw = common::toy_interactions(&mut rng, 12, 30, 8);
        let config = TrainConfig {
            seed: s,
            ..TrainConfig::default()
        };
        let (_, data) = prepare_set(&config, &raw).map_err(|e| e.to_string())?;
        let z = common::random_embeddings(&mut rng, data.n_users(), data.n_items(), 4);
        let report = evaluate(&z, &data, EvalSplit::Test, &[5, 10]).map_err(|e| e.to_string())?;
        let (mut sums, mut n) = ([0.0f64; 4], 0usize);
        for u in 0..data.n_users() as u32 {
            let test = &data.test[u as usize];
            if test.is_empty() {
                continue;
            }
            let seen: HashSet<u32> = data.train.user_items(u).iter().chain(&data.valid[u as usize]).copied().collect();
            let mut ranked: Vec<u32> = (0..data.n_items() as u32).filter(|i| !seen.contains(i)).collect();
            let score = |i: u32| z.user(u).iter().zip(z.item(i)).map(|(a, b)| a * b).sum::<f64>();
            ranked.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
            let set: HashSet<u32> = test.iter().copied().collect();
            sums[0] += brute_recall(&ranked, &set, 5);
            sums[1] += brute_recall(&ranked, &set, 10);
            sums[2] += brute_ndcg(&ranked, &set, 5);
            sums[3] += brute_ndcg(&ranked, &set, 10);
            n += 1;
        }
        let got = [report.recall[0], report.recall[1], report.ndcg[0], report.ndcg[1]];
        for (g, s) in got.iter().zip(sums) {
            worst_eval = worst_eval.max((g - s / n as f64).abs());
        }
    }
    check(
        worst <= 1e-12 && worst_eval <= 1e-12,
        format!("1000 ranking instances: max error {worst:.1e}; 20 full-ranking evaluations: max error {worst_eval:.1e}"),
    )
}

// ---------------------------------------------------------------- 5, 6

fn toy_config(model: ModelKind, seed: u64) -> TrainConfig {
    TrainConfig {
        model,
        embedding_dim: 8,
        layers: 2,
        batch_size: 64,
        lr: 0.01,
        max_epochs: 6,
        patience: 10,
        seed,
        ..TrainConfig::default()
    }
}

fn toy_data(seed: u64) -> SplitData {
    let raw = common::toy_interactions(&mut ChaCha8Rng::seed_from_u64(seed), 30, 45, 10);
    prepare_set(&toy_config(ModelKind::Lightgcn, seed), &raw).unwrap().1
}

fn candidates_for(config: &TrainConfig, data: &SplitData) -> (Checkpoint, EdgeCandidateSet) {
    let pre = train(&TrainConfig { model: ModelKind::Lightgcn, ..config.clone() }, data, TrainInputs::default(), |_| {})
        .unwrap();
    let z = final_embeddings(&pre.checkpoint, &data.train, config.layers).unwrap();
    let cands = suggest_edges(&z, &data.train).unwrap();
    (pre.checkpoint, cands)
}

fn log_lines(outcome: &TrainOutcome) -> Vec<String> {
    outcome.log.iter().map(EpochLog::to_json_line).collect()
}

fn run_with(config: &TrainConfig, data: &SplitData, cands: &EdgeCandidateSet, pre: &Checkpoint) -> TrainOutcome {
    train(
        config,
        data,
        TrainInputs {
            candidates: Some(cands),
            pretrained: Some(pre),
        },
        |_| {},
    )
    .unwrap()
}

fn determinism() -> Verdict {
    let data = toy_data(5);
    let config = toy_config(ModelKind::LdaGcl, 5);
    let (pre, cands) = candidates_for(&config, &data);
    let a = run_with(&config, &data, &cands, &pre);
    // The second run uses a different thread count on purpose.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| run_with(&config, &data, &cands, &pre));
    let same_log = log_lines(&a) == log_lines(&b);
    let same_ck = a.checkpoint.to_bytes().unwrap() == b.checkpoint.to_bytes().unwrap();
    check(
        same_log && same_ck && a.log.len() == config.max_epochs,
        format!(
            "{} epochs, {} candidates: logs identical {same_log}, checkpoints identical {same_ck}",
            a.log.len(),
            cands.len()
        ),
    )
}

fn log_distance(a: &[EpochLog], b: &[EpochLog]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            [
                x.loss_total - y.loss_total,
                x.loss_bpr - y.loss_bpr,
                x.loss_nce - y.loss_nce,
                x.val_ndcg10 - y.val_ndcg10,
            ]
        })
        .map(f64::abs)
        .fold(0.0, f64::max)
}

fn reductions() -> Verdict {
    let data = toy_data(6);
    let base = toy_config(ModelKind::LdaGcl, 6);
    let (pre, cands) = candidates_for(&base, &data);
    let no_op = run_with(&TrainConfig { edge_operator: false, ..base.clone() }, &data, &cands, &pre);
    let da00 = TrainConfig {
        model: ModelKind::DaGcl,
        p_add: 0.0,
        p_drop: 0.0,
        ..base.clone()
    };
    let da = run_with(&da00, &data, &cands, &pre);
    let d1 = log_distance(&no_op.log, &da.log);

    let da_plain = run_with(&TrainConfig { lambda_ssl: 0.0, ..da00 }, &data, &cands, &pre);
    let lightgcn = train(&TrainConfig { model: ModelKind::Lightgcn, ..base }, &data, TrainInputs::default(), |_| {}).unwrap();
    let d2 = log_distance(&da_plain.log, &lightgcn.log);
    check(
        d1 <= 1e-10 && d2 <= 1e-10,
        format!(
            "LDA-GCL without operator vs DA-GCL(0,0): max log difference {d1:.1e}; \
             DA-GCL(0,0) with lambda_ssl = 0 vs LightGCN: {d2:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 7, 8, 9

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Desk-scale settings. The contrastive variants use a larger step because
/// from Xavier init they sit on the ln 2 plateau for many epochs at 1e-2.
fn desk_config(model: ModelKind, seed: u64) -> TrainConfig {
    let contrastive = matches!(model, ModelKind::DaGcl | ModelKind::LdaGcl);
    TrainConfig {
        model,
        embedding_dim: 32,
        layers: 3,
        lr: if contrastive { 0.05 } else { 0.01 },
        max_epochs: if contrastive { 50 } else { 300 },
        seed,
        ..TrainConfig::default()
    }
}

struct SeedRun {
    seed: u64,
    data: SplitData,
    pretrained: Checkpoint,
    candidates: EdgeCandidateSet,
    lightgcn_recall20: f64,
    bprmf_recall20: f64,
    lda_ndcg10: f64,
    da_ndcg10: f64,
}

fn test_recall20(config: &TrainConfig, data: &SplitData, outcome: &TrainOutcome) -> f64 {
    let z = final_embeddings(&outcome.checkpoint, &data.train, config.depth()).unwrap();
    evaluate(&z, data, EvalSplit::Test, &[20]).unwrap().recall[0]
}

fn best_val(config: &TrainConfig, run: &SeedRun) -> (f64, usize) {
    let o = run_with(config, &run.data, &run.candidates, &run.pretrained);
    (o.best_val_ndcg10, o.log.len())
}

fn desk_runs() -> Vec<SeedRun> {
    let path = common::ml100k_path();
    assert!(
        path.exists(),
        "{} is missing; fetch it with `python3 scripts/fetch_ml100k.py` (or point GCLREC_ML100K at a copy)",
        path.display()
    );
    SEEDS
        .iter()
        .map(|&seed| {
            let t0 = Instant::now();
            let lg_cfg = desk_config(ModelKind::Lightgcn, seed);
            let (_, data) = prepare_data(&lg_cfg, &path).unwrap();
            let lg = train(&lg_cfg, &data, TrainInputs::default(), |_| {}).unwrap();
            let mf_cfg = desk_config(ModelKind::Bprmf, seed);
            let mf = train(&mf_cfg, &data, TrainInputs::default(), |_| {}).unwrap();
            let z = final_embeddings(&lg.checkpoint, &data.train, lg_cfg.depth()).unwrap();
            let candidates = suggest_edges(&z, &data.train).unwrap();
            let mut run = SeedRun {
                seed,
                lightgcn_recall20: test_recall20(&lg_cfg, &data, &lg),
                bprmf_recall20: test_recall20(&mf_cfg, &data, &mf),
                data,
                pretrained: lg.checkpoint,
                candidates,
                lda_ndcg10: 0.0,
                da_ndcg10: 0.0,
            };
            let (lda, lda_epochs) = best_val(&desk_config(ModelKind::LdaGcl, seed), &run);
            let (da, da_epochs) = best_val(&desk_config(ModelKind::DaGcl, seed), &run);
            run.lda_ndcg10 = lda;
            run.da_ndcg10 = da;
            eprintln!(
                "seed {seed}: LightGCN R@20 {:.4}, BPRMF R@20 {:.4}, LDA-GCL val N@10 {lda:.4} ({lda_epochs} ep), \
                 DA-GCL(0,0) val N@10 {da:.4} ({da_epochs} ep), {:.0} s",
                run.lightgcn_recall20,
                run.bprmf_recall20,
                t0.elapsed().as_secs_f64()
            );
            run
        })
        .collect()
}

fn fmt_list(v: impl Iterator<Item = f64>) -> String {
    v.map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn desk_trend(runs: &[SeedRun], secs: f64) -> Verdict {
    let n = runs.len() as f64;
    let lg_mean = runs.iter().map(|r| r.lightgcn_recall20).sum::<f64>() / n;
    let mf_mean = runs.iter().map(|r| r.bprmf_recall20).sum::<f64>() / n;
    let lg_wins = runs.iter().filter(|r| r.lightgcn_recall20 > r.bprmf_recall20).count();
    let lda_wins = runs.iter().filter(|r| r.lda_ndcg10 >= r.da_ndcg10).count();
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    // The time budget is stated for eight cores; on fewer it is reported only.
    let in_budget = cores < 8 || secs < 45.0 * 60.0;
    let detail = format!(
        "(a) test R@20 LightGCN [{}] mean {lg_mean:.4} vs BPRMF [{}] mean {mf_mean:.4}, LightGCN ahead in {lg_wins}/5; \
         (b) val N@10 LDA-GCL [{}] vs DA-GCL(0,0) [{}], LDA-GCL >= in {lda_wins}/5; {:.1} min on {cores} core(s)",
        fmt_list(runs.iter().map(|r| r.lightgcn_recall20)),
        fmt_list(runs.iter().map(|r| r.bprmf_recall20)),
        fmt_list(runs.iter().map(|r| r.lda_ndcg10)),
        fmt_list(runs.iter().map(|r| r.da_ndcg10)),
        secs / 60.0
    );
    check(lg_mean > mf_mean && lg_wins >= 3 && lda_wins >= 3 && in_budget, detail)
}

fn lambda_t_direction(runs: &[SeedRun]) -> Verdict {
    let at = |lambda_t: f64| -> Vec<f64> {
        runs.iter()
            .map(|r| {
                let config = TrainConfig {
                    lambda_t,
                    ..desk_config(ModelKind::LdaGcl, r.seed)
                };
                let (v, epochs) = best_val(&config, r);
                eprintln!("seed {}: lambda_t {lambda_t}: val N@10 {v:.4} ({epochs} ep)", r.seed);
                v
            })
            .collect()
    };
    let zero = at(0.0);
    let tenth = at(0.1);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let wins = zero.iter().zip(&tenth).filter(|(a, b)| b > a).count();
    Ok(format!(
        "val N@10 lambda_t=0 [{}] mean {:.4}; lambda_t=0.1 [{}] mean {:.4}; 0.1 ahead in {wins}/5 seeds",
        fmt_list(zero.iter().copied()),
        mean(&zero),
        fmt_list(tenth.iter().copied()),
        mean(&tenth)
    ))
}

fn candidate_contract(runs: &[SeedRun]) -> Verdict {
    let mut sets: Vec<(String, EdgeCandidateSet)> = Vec::new();
    for seed in [5u64, 6] {
        let data = toy_data(seed);
        sets.push((format!("toy seed {seed}"), candidates_for(&toy_config(ModelKind::LdaGcl, seed), &data).1));
    }
    // A user who has seen most of the catalogue cannot get K_u suggestions.
    let mut pairs: Vec<(u32, u32)> = (0..9).map(|i| (0, i)).collect();
    pairs.extend([(1, 0), (1, 3), (2, 5)]);
    let dense = BipartiteGraph::from_pairs(&pairs, 3, 12).unwrap();
    let z = common::random_embeddings(&mut ChaCha8Rng::seed_from_u64(9), 3, 12, 4);
    sets.push(("shortfall toy".into(), suggest_edges(&z, &dense).unwrap()));
    for r in runs {
        sets.push((format!("ml-100k seed {}", r.seed), r.candidates.clone()));
    }

    let mut problems = Vec::new();
    let mut with_shortfall = 0;
    for (name, s) in &sets {
        let shortfall = s.total_shortfall();
        let balanced = if shortfall == 0 {
            s.n_suggested() == s.n_original()
        } else {
            with_shortfall += 1;
            s.n_suggested() + shortfall == s.n_original()
        };
        if !balanced || s.check_contract().is_err() {
            problems.push(format!(
                "{name}: |E0| {} |E1| {} shortfall {shortfall}",
                s.n_original(),
                s.n_suggested()
            ));
        }
    }
    let detail = format!(
        "{} candidate sets ({} with a shortfall) reconcile{}",
        sets.len(),
        with_shortfall,
        if problems.is_empty() { String::new() } else { format!(" except: {}", problems.join("; ")) }
    );
    check(problems.is_empty() && with_shortfall >= 1 && runs.len() == SEEDS.len(), detail)
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    report(&mut lines, 1, "propagation oracle", true, propagation_oracle);
    report(&mut lines, 2, "gradient suite", true, gradient_suite);
    report(&mut lines, 3, "closed-form loss values", true, closed_form_losses);
    report(&mut lines, 4, "metric oracle", true, metric_oracle);
    report(&mut lines, 5, "determinism", true, determinism);
    report(&mut lines, 6, "reduction tests", true, reductions);

    let start = Instant::now();
    let runs = catch_unwind(desk_runs);
    let desk_secs = start.elapsed().as_secs_f64();
    match &runs {
        Ok(runs) => {
            report(&mut lines, 7, "desk-scale trend on MovieLens-100k", true, || desk_trend(runs, desk_secs));
            report(&mut lines, 8, "lambda_t direction", false, || lambda_t_direction(runs));
            report(&mut lines, 9, "candidate-set contract", true, || candidate_contract(runs));
        }
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().unwrap_or_else(|| "desk runs panicked".into());
            report(&mut lines, 7, "desk-scale trend on MovieLens-100k", true, || Err(msg.clone()));
            report(&mut lines, 8, "lambda_t direction", false, || Err(msg.clone()));
            report(&mut lines, 9, "candidate-set contract", true, || candidate_contract(&[]));
        }
    }

    let failed: Vec<String> = lines
        .iter()
        .filter(|l| l.blocking && !l.passed)
        .map(|l| format!("{} ({})", l.id, l.name))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
