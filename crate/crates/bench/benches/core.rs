use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::rngs::StdRng;
use rand::SeedableRng;

use ncode_core::eval::{SyntheticEvaluator, SyntheticLandscape};
use ncode_core::rank::{KnnRanker, OracleRanker};
use ncode_core::rng::indexed;
use ncode_core::search::{run_regularized_evolution, CandidateMode, RegEvoConfig};
use ncode_core::trajectory::generate_sample;
use ncode_core::{prune_space, run_search, Direction, Evaluator, GenConfig, PruneConfig, SearchConfig, SearchSpace};

fn evaluator(space: &SearchSpace) -> Arc<dyn Evaluator> {
    let landscape = SyntheticLandscape::index().with_noise(0.5);
    Arc::new(SyntheticEvaluator::new(landscape, space, "score", Direction::Maximize, 0).unwrap())
}

fn codec(c: &mut Criterion) {
    let space = SearchSpace::nas_bench_201();
    let mut rng = StdRng::seed_from_u64(0);
    let codes: Vec<_> = (0..256).map(|_| space.sample(&mut rng)).collect();
    c.bench_function("decode_encode_256", |b| {
        b.iter(|| {
            for code in &codes {
                let a = space.decode(code).unwrap();
                black_box(space.encode(&a).unwrap());
            }
        })
    });
    c.bench_function("parse_render_256", |b| {
        b.iter(|| {
            for code in &codes {
                black_box(space.parse_ncode(&code.to_string()).unwrap());
            }
        })
    });
}

fn pruning(c: &mut Criterion) {
    let space = SearchSpace::uniform("wide", 12, 10).unwrap();
    let cfg = PruneConfig::default();
    let mut rng = StdRng::seed_from_u64(1);
    c.bench_function("prune_and_sample_12x10", |b| {
        b.iter(|| {
            let sub = prune_space(&space, &cfg, &mut rng).unwrap();
            black_box(sub.sample(&mut rng))
        })
    });
}

fn trajectories(c: &mut Criterion) {
    let space = SearchSpace::uniform("wide", 12, 10).unwrap();
    let eval = evaluator(&space);
    let cfg = GenConfig::default();
    let mut i = 0;
    c.bench_function("generate_sample_12x10", |b| {
        b.iter(|| {
            i += 1;
            black_box(generate_sample(&space, eval.as_ref(), &cfg, 0, &mut indexed(0, i)).unwrap())
        })
    });
}

fn search(c: &mut Criterion) {
    let space = SearchSpace::nas_bench_201();
    let eval = evaluator(&space);
    let cfg = SearchConfig {
        candidate_mode: CandidateMode::Mixed,
        ..SearchConfig::default()
    };
    let mut group = c.benchmark_group("search_200_iters");
    group.sample_size(20);
    group.bench_function("oracle_mixed", |b| {
        b.iter_batched(
            || OracleRanker::new(eval.clone()),
            |mut ranker| black_box(run_search(&space, eval.as_ref(), &mut ranker, &cfg).unwrap()),
            BatchSize::SmallInput,
        )
    });
    group.bench_function("knn_random", |b| {
        let cfg = SearchConfig::default();
        b.iter(|| black_box(run_search(&space, eval.as_ref(), &mut KnnRanker::default(), &cfg).unwrap()))
    });
    group.bench_function("regevo", |b| {
        b.iter(|| black_box(run_regularized_evolution(&space, eval.as_ref(), RegEvoConfig::default()).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, codec, pruning, trajectories, search);
criterion_main!(benches);
