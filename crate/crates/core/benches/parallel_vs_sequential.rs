use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use miclust::clustering::{ClustererSpec, KMeansConfig};
use miclust::datagen::{generate_mixture, MixtureSpec};
use miclust::exec::Execution;
use miclust::imputation::{ampute, Imputer, Mechanism};
use miclust::stability::{pooled_instability_datasets, BootstrapConfig};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn bench_imputation(c: &mut Criterion) {
    let data = generate_mixture(&MixtureSpec::new(200, 0.3), 1).unwrap().data;
    let inc = ampute(&data, Mechanism::Mar, 0.3, 2).unwrap();
    let mut group = c.benchmark_group("gaussian_imputation_m20");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| Imputer::gaussian().impute(&inc, 20, 3, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_instability(c: &mut Criterion) {
    let data = generate_mixture(&MixtureSpec::new(200, 0.3), 1).unwrap().data;
    let inc = ampute(&data, Mechanism::Mar, 0.3, 2).unwrap();
    let stack = Imputer::gaussian().impute(&inc, 10, 3, Execution::Sequential).unwrap();
    let km = ClustererSpec::Kmeans(KMeansConfig { k: 3, n_init: 10, max_iter: 100 });
    let mut group = c.benchmark_group("pooled_instability_m10_c10");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = BootstrapConfig::new(4).with_pairs(10).with_execution(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pooled_instability_datasets(stack.completed(), &km, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_imputation, bench_instability);
criterion_main!(benches);
