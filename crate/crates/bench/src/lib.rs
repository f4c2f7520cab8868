//! Shared fixtures for the criterion benches.

use hillsignal::pipeline::{self, LoadedData, PipelineConfig};
use hillsignal::syndata::GeneratorConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn generator(n_patients: usize) -> GeneratorConfig {
    GeneratorConfig {
        seed: 1,
        n_patients,
        ..Default::default()
    }
}

/// A generated cohort and the config that produced it.
pub fn cohort(n_patients: usize) -> (PipelineConfig, LoadedData) {
    let generator = generator(n_patients);
    let data = pipeline::generated_data(&generator).expect("valid generator config");
    (PipelineConfig::with_generator(generator), data)
}

/// Two correlated scorers over `n` examples with about one positive in five.
pub fn scored(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.random_bool(0.2);
        let signal = if label { 1.0 } else { 0.0 };
        let noise: f64 = rng.random();
        a.push(signal + noise);
        b.push(0.5 * signal + noise + 0.3 * rng.random::<f64>());
        labels.push(label);
    }
    (a, b, labels)
}

/// Splits scores into positives and negatives.
pub fn by_label(scores: &[f64], labels: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let pos = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    (pos, neg)
}
