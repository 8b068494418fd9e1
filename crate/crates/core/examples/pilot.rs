//! Trains one configuration and prints periodic evaluations.
//!
//! `pilot <dataset> <time_dist> <reg> <lambda> <iterations> <batch> <seed> [eval_every]`

use std::env;

use diotm_core::datasets::dataset_pair;
use diotm_core::diotm::{train_with, StepOutcome, TrainConfig};
use diotm_core::ot::evaluate;

fn main() {
    let a: Vec<String> = env::args().collect();
    let mut cfg = TrainConfig::new(a[1].parse().unwrap());
    cfg.time_dist = a[2].parse().unwrap();
    cfg.reg = a[3].parse().unwrap();
    cfg.lambda = a[4].parse().unwrap();
    cfg.iterations = a[5].parse().unwrap();
    cfg.batch_size = a[6].parse().unwrap();
    cfg.seed = a[7].parse().unwrap();
    let every: u64 = a.get(8).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let pair = dataset_pair(cfg.dataset);
    let run = train_with(&cfg, |state, outcome| {
        if let StepOutcome::Aborted { reason, .. } = outcome {
            println!("step {} aborted: {reason}", state.step);
        }
        if state.step % every == 0 {
            let r = state.loss_log.last().unwrap();
            let ema = evaluate(&state.ema_forward_map(1), &pair, 500, 12345).unwrap();
            let raw = evaluate(&state.raw_forward_map(1), &pair, 500, 12345).unwrap();
            println!(
                "step {:>6} v {:>9.4} f {:>9.4} b {:>9.4} | ema w2 {:.3} l2 {:.3} | raw w2 {:.3} l2 {:.3}",
                state.step, r.value_loss, r.fwd_map_loss, r.bwd_map_loss, ema.w2, ema.l2_map, raw.w2, raw.l2_map
            );
        }
    })
    .unwrap();
    if let Some(e) = run.divergence {
        println!("diverged: {e}");
    }
}
