use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ncrest_core::sim::{self, LossModel, Mode, SimConfig};

fn runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_n1000");
    g.sample_size(10);
    for (p, alpha) in [(0.1, 0.3), (0.5, 0.5), (0.9, 0.3)] {
        let loss = LossModel::new(p, alpha, 1).unwrap();
        for mode in [Mode::Nc, Mode::Rest] {
            let id = BenchmarkId::new(mode.as_str(), format!("p{p}_a{alpha}"));
            g.bench_function(id, |b| {
                b.iter(|| sim::run_mode(mode, 1000, &loss, SimConfig::default()).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, runs);
criterion_main!(benches);
