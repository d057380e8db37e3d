//! Token packing: how many `l_max`-token windows a training set occupies.

use crate::error::{Error, Result};

/// Largest instance [`pack_exact`] accepts.
pub const PACK_EXACT_LIMIT: usize = 12;

fn check_l_max(l_max: u64) -> Result<()> {
    if l_max == 0 {
        return Err(Error::invalid("l_max must be >= 1"));
    }
    Ok(())
}

fn check_lengths(lengths: &[u64], l_max: u64) -> Result<()> {
    check_l_max(l_max)?;
    if let Some(&len) = lengths.iter().find(|&&len| len > l_max) {
        return Err(Error::Infeasible(format!(
            "sequence of {len} tokens does not fit in a {l_max}-token window"
        )));
    }
    Ok(())
}

/// Free concatenation: `ceil(total_tokens / l_max)` windows.
pub fn pack_concat(total_tokens: u64, l_max: u64) -> Result<u64> {
    check_l_max(l_max)?;
    Ok(total_tokens.div_ceil(l_max))
}

/// First-fit-decreasing packing of whole sequences.
pub fn pack_ffd(lengths: &[u64], l_max: u64) -> Result<usize> {
    check_lengths(lengths, l_max)?;
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut remaining: Vec<u64> = Vec::new();
    for len in sorted {
        match remaining.iter_mut().find(|r| **r >= len) {
            Some(r) => *r -= len,
            None => remaining.push(l_max - len),
        }
    }
    Ok(remaining.len())
}

/// Minimum number of windows for whole sequences, by branch and bound.
/// Exponential; limited to [`PACK_EXACT_LIMIT`] sequences.
pub fn pack_exact(lengths: &[u64], l_max: u64) -> Result<usize> {
    if lengths.len() > PACK_EXACT_LIMIT {
        return Err(Error::InstanceTooLarge {
            len: lengths.len(),
            limit: PACK_EXACT_LIMIT,
        });
    }
    check_lengths(lengths, l_max)?;
    let mut items = lengths.to_vec();
    items.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = items.iter().sum();
    let lower = total.div_ceil(l_max) as usize;
    let mut best = items.len();
    let mut loads = Vec::with_capacity(items.len());
    search(&items, l_max, lower, &mut loads, &mut best);
    Ok(best)
}

fn search(items: &[u64], l_max: u64, lower: usize, loads: &mut Vec<u64>, best: &mut usize) {
    if *best == lower {
        return;
    }
    let Some((&item, rest)) = items.split_first() else {
        *best = (*best).min(loads.len());
        return;
    };
    // Bins with equal load are interchangeable; try each load once.
    let mut tried: Vec<u64> = Vec::new();
    for i in 0..loads.len() {
        let load = loads[i];
        if load + item <= l_max && !tried.contains(&load) {
            tried.push(load);
            loads[i] += item;
            search(rest, l_max, lower, loads, best);
            loads[i] -= item;
        }
    }
    if loads.len() + 1 < *best {
        loads.push(item);
        search(rest, l_max, lower, loads, best);
        loads.pop();
    }
}
