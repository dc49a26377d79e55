//! Forward and training-step cost of the desk-scale network.
//!
//! With the default `parallel` feature each benchmark runs on a one-thread
//! rayon pool and on the full pool; build with `--no-default-features` to
//! measure the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use edei_core::rng::{keyed, Stream};
use edei_net::train::loss_and_grads;
use edei_net::{EdeiNet, Lambdas, ModelConfig, ModelInput, Stage, Tensor};
use rand::Rng;

fn pools() -> Vec<(String, Option<rayon::ThreadPool>)> {
    if !edei_core::par::is_parallel() {
        return vec![("sequential".into(), None)];
    }
    let all = rayon::current_num_threads();
    let mut sizes = vec![1];
    if all > 1 {
        sizes.push(all);
    }
    sizes
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            (format!("rayon-{n}"), Some(pool))
        })
        .collect()
}

fn in_pool<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn tensor(shape: [usize; 4], seed: u64) -> Tensor<f32> {
    let mut r = keyed(seed, Stream::Test, 0, 0);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.random_range(0.0..1.0)).collect())
}

fn bench(c: &mut Criterion) {
    let size = 64;
    let mut net = EdeiNet::<f32>::new(&ModelConfig::desk(), 0).unwrap();
    net.params_mut().randomize(1, 0.05);
    let x = ModelInput {
        short: tensor([4, 3, size, size], 1),
        long: tensor([4, 3, size, size], 2),
        vox_deblur: tensor([4, 6, size, size], 3),
        vox_enhance: tensor([4, 6, size, size], 4),
    };
    let gt = tensor([4, 3, size, size], 5);

    let mut g = c.benchmark_group("network_desk_64px_batch4");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("predict", &name), |b| {
            b.iter(|| in_pool(&pool, || net.predict(&x).unwrap()))
        });
        g.bench_function(BenchmarkId::new("stage1_step", &name), |b| {
            b.iter(|| {
                in_pool(&pool, || {
                    loss_and_grads(&net, &x, &gt, Stage::Paths, Lambdas::STAGE1).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
