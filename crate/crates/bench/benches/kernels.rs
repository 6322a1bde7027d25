use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mergedse::analysis::{fingerprint, rank_fingerprints};
use mergedse::corpus;
use mergedse::cost::{own_features, AreaModel};
use mergedse::dse::{prepare, PipelineConfig};
use mergedse::ir::random::{random_function, GenConfig};
use mergedse::ir::{Function, Inst};
use mergedse::merge::{align, linearize, AlignParams};
use mergedse::partition::{random_problem, solve, RandomShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn functions(n: usize, seed: u64) -> Vec<Function> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GenConfig { max_stmts: 8, ..GenConfig::default() };
    (0..n).map(|i| random_function(&format!("f{i}"), &cfg, &mut rng)).collect()
}

fn bench_align(c: &mut Criterion) {
    let fs = functions(2, 1);
    let seq = |f: &Function| -> Vec<Inst> { linearize(f, 0).iter().map(|&(b, i)| f.blocks[b].insts[i].clone()).collect() };
    let (a, b) = (seq(&fs[0]), seq(&fs[1]));
    let (ra, rb): (Vec<&Inst>, Vec<&Inst>) = (a.iter().collect(), b.iter().collect());
    let params = AlignParams::default();
    c.bench_function("align/random_pair", |bch| bch.iter(|| align(black_box(&ra), black_box(&rb), &params)));
}

fn bench_rank(c: &mut Criterion) {
    let mut g = c.benchmark_group("rank_and_predict");
    g.sample_size(10);
    let model = AreaModel::bundled();
    for n in [300, 1000, 3000] {
        let fs = functions(n, 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &fs, |bch, fs| {
            bch.iter(|| {
                let fps: Vec<_> = fs.iter().map(fingerprint).collect();
                let ranked = rank_fingerprints(&fps);
                let area: f64 = fs.iter().map(|f| model.predict(&own_features(f))).sum();
                (ranked.len(), area)
            })
        });
    }
    g.finish();
}

fn bench_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for roots in [9, 16, 24] {
        let shape = RandomShape { roots, merged: roots / 3, depth2: 1, ..RandomShape::default() };
        let p = random_problem(&shape, &mut ChaCha8Rng::seed_from_u64(3));
        g.bench_with_input(BenchmarkId::from_parameter(p.len()), &p, |bch, p| bch.iter(|| solve(p).unwrap()));
    }
    g.finish();
}

fn bench_pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("prepare");
    g.sample_size(10);
    let model = AreaModel::bundled();
    for name in ["sample", "decoder"] {
        let p = corpus::get(name).unwrap();
        let (m, inputs) = (p.module(), p.heap_images());
        let cfg = PipelineConfig::default();
        g.bench_function(name, |bch| bch.iter(|| prepare(&m, &inputs, &cfg, &model).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_align, bench_rank, bench_solve, bench_pipeline);
criterion_main!(benches);
