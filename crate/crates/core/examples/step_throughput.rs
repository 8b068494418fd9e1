//! Times training steps for a few batch sizes and regularizers.
//!
//! `cargo run --release -p diotm-core --example step_throughput`

use std::time::Instant;

use diotm_core::datasets::DatasetName;
use diotm_core::diotm::{train_step, Regularizer, TrainConfig, TrainState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    for reg in [Regularizer::Hjb, Regularizer::R1, Regularizer::None] {
        for batch in [128, 256, 400] {
            let mut cfg = TrainConfig::new(DatasetName::GToEightG);
            cfg.batch_size = batch;
            cfg.reg = reg;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut state = TrainState::init(&cfg, &mut rng).unwrap();
            let steps = 20;
            let start = Instant::now();
            for _ in 0..steps {
                train_step(&mut state, &cfg, &mut rng).unwrap();
            }
            let per = start.elapsed().as_secs_f64() / steps as f64;
            println!("{reg:>8} batch {batch:>4}: {:.2} ms/step, 20K steps ≈ {:.1} min", per * 1e3, per * 20_000.0 / 60.0);
        }
    }
}
