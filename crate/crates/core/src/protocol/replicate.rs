use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_REPLICATIONS: usize = 4;

/// Seed of replication `index` under `master`.
pub fn replication_seed(master: u64, index: usize) -> u64 {
    seed::derive(master, &[seed::tag("replication"), index as u64])
}

/// Run `f(index, seed)` for `n_reps` replications with derived seeds.
/// Results come back in replication order whatever the thread count.
pub fn replicate<T: Send>(
    n_reps: usize,
    master_seed: u64,
    f: impl Fn(usize, u64) -> Result<T> + Sync,
) -> Result<Vec<(u64, T)>> {
    if n_reps < 2 {
        return Err(Error::Config(format!("replications must be at least 2, got {n_reps}")));
    }
    (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let s = replication_seed(master_seed, i);
            f(i, s).map(|r| (s, r))
        })
        .collect()
}
