//! Fixtures shared by the benchmarks.

use aro_fraud_core::dataset::generate_split;
use aro_fraud_core::{GeneratorConfig, SplitPair};

/// A generated split with `k` features and the given class sizes in both halves.
pub fn fixture(k: usize, legit: usize, fraud: usize, seed: u64) -> SplitPair {
    let cfg = GeneratorConfig {
        feature_count: k,
        train_legit: legit,
        train_fraud: fraud,
        test_legit: legit,
        test_fraud: fraud,
        seed,
        ..GeneratorConfig::default()
    };
    generate_split(&cfg, 1).expect("fixture config is valid")
}
