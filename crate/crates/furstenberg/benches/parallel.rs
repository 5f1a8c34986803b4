//! Rayon pool against a single worker on the heaviest kernels.
//!
//! `cargo bench` compares the default pool with a one-thread pool;
//! `cargo bench --no-default-features` times the sequential build.

use criterion::{criterion_group, criterion_main, Criterion};
use furstenberg::exact::rat;
use furstenberg::generators::{cantor_set, furstenberg_config, product};
use furstenberg::projections::{good_directions, riesz_energy, DiscreteMeasure};
use furstenberg::refine::induction_on_scales;
use furstenberg::tubes::Convention;
use furstenberg::Rat;

fn workloads(c: &mut Criterion, label: &str, run: &dyn Fn(&mut (dyn FnMut() + Send))) {
    let a = cantor_set(8, rat(1, 2), 0).unwrap();
    let p = product(&a, &a).unwrap();
    let mu = DiscreteMeasure::counting(&p).unwrap();
    let slopes: Vec<Rat> = (-16..16).map(|i| rat(i, 16)).collect();
    let (cfg, _) = furstenberg_config(8, rat(1, 2), rat(1, 1), 0).unwrap();
    let mut g = c.benchmark_group(label);
    g.sample_size(10);
    g.bench_function("riesz_energy", |b| {
        b.iter(|| run(&mut || drop(riesz_energy(&mu, rat(1, 2)).unwrap())))
    });
    g.bench_function("good_directions", |b| {
        b.iter(|| run(&mut || drop(good_directions(&p, &slopes, rat(1, 2), Convention::Appendix).unwrap())))
    });
    g.bench_function("induction_on_scales", |b| b.iter(|| run(&mut || drop(induction_on_scales(&cfg, 4).unwrap()))));
    g.finish();
}

#[cfg(feature = "parallel")]
fn bench(c: &mut Criterion) {
    workloads(c, "pool", &|f| f());
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    workloads(c, "one_thread", &|f| one.install(f));
}

#[cfg(not(feature = "parallel"))]
fn bench(c: &mut Criterion) {
    workloads(c, "sequential", &|f| f());
}

criterion_group!(benches, bench);
criterion_main!(benches);
