// Quick sweep harness: prints score distributions, ranking metrics, and the
// exact-match table for one (beta, lr, epochs, seed) setting.
//
//   cargo run --release --example tune -- 0.75 0.001 20 7

use std::collections::BTreeSet;

use digrank::dig::{self, CollectParams};
use digrank::eval::{evaluate_em, OrderingPolicy};
use digrank::lm::MockLm;
use digrank::losses::{sigmoid, LossConfig};
use digrank::pipeline::{self, PipelineConfig};
use digrank::trainer::evaluate_ranking;
use digrank::world::{self, doc_kind, WorldSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let beta: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.75);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(7);

    let mut cfg = PipelineConfig::default();
    cfg.train.loss = LossConfig { beta, ..LossConfig::default() };
    cfg.train.learning_rate = lr;
    cfg.train.epochs = epochs;
    cfg.train.seed = seed;
    cfg.dataset.seed = seed;

    let w = world::generate(&WorldSpec { seed, ..WorldSpec::default() }).unwrap();
    let lm = MockLm::new(world::mock_spec_for_world()).unwrap();
    let trained = pipeline::run_training(&w.queries, &w.corpus, &lm, &cfg).unwrap();
    println!(
        "beta={beta} lr={lr} epochs={epochs} seed={seed} steps={} final_loss={:.5}",
        trained.metrics.len(),
        trained.metrics.last().unwrap().total
    );

    // Score distribution per doc kind on the held-out queries.
    let mut sums: std::collections::BTreeMap<&str, (f64, f64, usize)> = Default::default();
    for q in &trained.held_queries {
        for hit in w.corpus.bm25_search(&q.question, 6).unwrap() {
            let doc = w.corpus.document(&hit.doc_id).unwrap();
            let (raw, _) = trained.model.score(&q.question, &doc.text).unwrap();
            let e = sums.entry(doc_kind(&hit.doc_id)).or_insert((0.0, 0.0, 0));
            e.0 += raw;
            e.1 += sigmoid(raw);
            e.2 += 1;
        }
    }
    for (kind, (raw, prob, n)) in &sums {
        println!("  {kind:<11} mean_raw={:+.3} mean_prob={:.3} n={n}", raw / *n as f64, prob / *n as f64);
    }

    // Ranking metrics on held-out dig groups.
    let held_out = dig::collect(&trained.held_queries, &w.corpus, &lm, &CollectParams::default(), &BTreeSet::new()).unwrap();
    let groups = pipeline::rank_groups(&held_out.triplets, &trained.held_queries, &w.corpus, &cfg.features).unwrap();
    let m = evaluate_ranking(&trained.model, &groups, 0.5, -0.2).unwrap();
    println!("  pairwise_acc={:.3} kendall_tau={:.3} auc={:.3}", m.pairwise_accuracy, m.kendall_tau, m.auc);

    let k = cfg.collect.top_k;
    let em = |policy, filter| {
        evaluate_em(&trained.held_queries, &w.corpus, &lm, Some(&trained.model), policy, filter, k, &cfg.infer, "mock")
            .unwrap()
            .exact_match
    };
    println!(
        "  EM: gain={:.3} nofilter={:.3} retrieval={:.3} random={:.3}",
        em(OrderingPolicy::Model, true),
        em(OrderingPolicy::Model, false),
        evaluate_em(&trained.held_queries, &w.corpus, &lm, None, OrderingPolicy::Retrieval, false, k, &cfg.infer, "mock").unwrap().exact_match,
        evaluate_em(&trained.held_queries, &w.corpus, &lm, None, OrderingPolicy::Random { seed }, false, k, &cfg.infer, "mock").unwrap().exact_match,
    );
}
