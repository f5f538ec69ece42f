use miclust::clustering::{ClustererSpec, KMeansConfig};
use miclust::datagen::{generate_mixture, MixtureSpec};
use miclust::stability::{bootstrap_instability, BootstrapConfig};

#[test]
fn moderate_pair_counts_agree() {
    let data = generate_mixture(&MixtureSpec::new(50, 0.3), 21).unwrap().data;
    let km = ClustererSpec::Kmeans(KMeansConfig { k: 2, n_init: 10, max_iter: 100 });
    let mean = |c: usize| {
        let total: f64 = (0..30)
            .map(|r| bootstrap_instability(&data, &km, &BootstrapConfig::new(1000 + r).with_pairs(c)).unwrap())
            .sum();
        total / 30.0
    };
    let (c20, c50) = (mean(20), mean(50));
    assert!((c20 - c50).abs() <= 0.03, "C=20: {c20}, C=50: {c50}");
    assert!((0.0..=2.0).contains(&c20) && c20 > 0.0);
}
