use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stratified, seeded fold assignment: `out[i]` is the fold of graph `i`.
///
/// Each class is shuffled and dealt round-robin, continuing the deal across
/// classes, so fold sizes differ by at most one and class ratios are kept.
pub fn split_folds(n_graphs: usize, labels: &[usize], n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds == 0 || n_graphs < n_folds {
        return Err(Error::contract(format!("{n_graphs} graphs cannot fill {n_folds} folds")));
    }
    if labels.len() != n_graphs {
        return Err(Error::contract(format!("{} labels for {n_graphs} graphs", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![0; n_graphs];
    let mut dealt = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..n_graphs).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            out[i] = dealt % n_folds;
            dealt += 1;
        }
    }
    Ok(out)
}
