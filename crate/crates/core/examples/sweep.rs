//! Grid search over study learning rate and batch size, scoring each cell by
//! mean recognition accuracy across experiments.

mod common;

use memlab::protocol::{run_sweep, SelectionMetric, SweepGrid};
use memlab::stimuli::build_trial_sets;

fn main() -> memlab::error::Result<()> {
    let r = common::resources();
    let ck = common::model(&r);
    let sets = build_trial_sets(&[1, 5], &common::trial_resources(&r), 30, 2)?;
    let grid = SweepGrid {
        lrs: vec![3e-4, 1e-3, 3e-3],
        batch_sizes: vec![1, 4],
        metric: SelectionMetric::RecognitionAccuracy,
        reset_optimizer: true,
    };
    let result = run_sweep(&ck, &sets, &grid, 2, 4)?;
    for c in &result.cells {
        println!("lr {:>7.1e}  batch {:>2}  metric {:.3}  {:?}", c.lr, c.batch_size, c.metric.unwrap_or(f64::NAN), c.per_experiment);
    }
    if let Some(b) = result.best_cell() {
        println!("best: lr {:e}, batch {}", b.lr, b.batch_size);
    }
    Ok(())
}
