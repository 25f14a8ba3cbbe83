use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Review;
use crate::{Error, Result};

/// Largest-remainder apportionment of `size` slots over strata of the given
/// sizes.
///
/// Each stratum gets `floor(size * count / total)`; the leftover slots go
/// first to non-empty strata that would otherwise get nothing, then by
/// largest fractional remainder, then by larger stratum, then by position.
pub fn allocate(counts: &[u64], size: u64) -> Vec<u64> {
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    if total == 0 || size == 0 {
        return vec![0; counts.len()];
    }
    let size = size as u128;
    let mut alloc: Vec<u64> = counts
        .iter()
        .map(|&c| (size * c as u128 / total) as u64)
        .collect();
    let assigned: u128 = alloc.iter().map(|&a| a as u128).sum();
    let leftover = (size - assigned) as usize;

    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&i, &j| {
        let starved = |k: usize| alloc[k] == 0 && counts[k] > 0;
        let rem = |k: usize| size * counts[k] as u128 % total;
        starved(j)
            .cmp(&starved(i))
            .then(rem(j).cmp(&rem(i)))
            .then(counts[j].cmp(&counts[i]))
            .then(i.cmp(&j))
    });
    for &i in order.iter().take(leftover) {
        alloc[i] += 1;
    }
    alloc
}

/// Sample `size` reviews keeping each app's share of the corpus.
///
/// Apps are strata in order of first appearance; within an app the chosen
/// reviews are drawn with a ChaCha8 generator seeded from `seed`. The output
/// preserves corpus order, so sampling the whole corpus returns it unchanged.
pub fn stratified_sample(reviews: &[Review], size: usize, seed: u64) -> Result<Vec<Review>> {
    if size > reviews.len() {
        return Err(Error::invalid(
            "sample size",
            format!("{size} exceeds corpus size {}", reviews.len()),
        ));
    }
    let mut strata: Vec<Vec<usize>> = Vec::new();
    let mut by_app: HashMap<&str, usize> = HashMap::new();
    for (i, r) in reviews.iter().enumerate() {
        let s = *by_app.entry(r.app_id.as_str()).or_insert_with(|| {
            strata.push(Vec::new());
            strata.len() - 1
        });
        strata[s].push(i);
    }
    let counts: Vec<u64> = strata.iter().map(|s| s.len() as u64).collect();
    let quotas = allocate(&counts, size as u64);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = Vec::with_capacity(size);
    for (members, &q) in strata.iter().zip(&quotas) {
        let chosen = rand::seq::index::sample(&mut rng, members.len(), q as usize);
        picked.extend(chosen.into_iter().map(|k| members[k]));
    }
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| reviews[i].clone()).collect())
}
