//! Twin hierarchies: the same aggregation structure with the bottom series
//! randomly reassigned.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::panel::Grouping;
use crate::rng::substream;

fn check_permutation(perm: &[usize], m: usize) -> Result<()> {
    if perm.len() != m {
        return Err(Error::Argument(format!(
            "permutation has {} entries, expected {m}",
            perm.len()
        )));
    }
    let mut seen = vec![false; m];
    for &p in perm {
        if p >= m || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Argument("permutation is not a bijection of 0..m".into()));
        }
    }
    Ok(())
}

/// `C'[:, j] = C[:, perm[j]]` (zero-based).
pub fn twin(grouping: &Grouping, perm: &[usize]) -> Result<Grouping> {
    let m = grouping.m();
    check_permutation(perm, m)?;
    let rows = grouping
        .rows()
        .iter()
        .map(|row| perm.iter().map(|&p| row[p]).collect())
        .collect();
    Grouping::new(m, rows, grouping.middle_ids().to_vec())
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    inv
}

/// `count` uniform permutations of `0..m` drawn by Fisher-Yates from the
/// `"twin"` substream of `seed`.
pub fn draw_permutations(m: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = substream(seed, "twin", 0);
    (0..count)
        .map(|_| {
            let mut p: Vec<usize> = (0..m).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect()
}

/// `count` twins of one grouping.
pub fn twin_batch(grouping: &Grouping, count: usize, seed: u64) -> Result<Vec<Grouping>> {
    Ok(twin_batch_shared(std::slice::from_ref(grouping), count, seed)?
        .into_iter()
        .map(|mut v| v.remove(0))
        .collect())
}

/// Twins of a set of groupings where each drawn permutation is applied to
/// every grouping in the set. Returns one set per permutation.
pub fn twin_batch_shared(groupings: &[Grouping], count: usize, seed: u64) -> Result<Vec<Vec<Grouping>>> {
    if count == 0 {
        return Err(Error::Argument("twin count must be at least 1".into()));
    }
    let Some(first) = groupings.first() else {
        return Err(Error::Argument("no groupings to twin".into()));
    };
    let m = first.m();
    if groupings.iter().any(|g| g.m() != m) {
        return Err(Error::Argument("groupings cover different bottom sets".into()));
    }
    draw_permutations(m, count, seed)
        .iter()
        .map(|perm| groupings.iter().map(|g| twin(g, perm)).collect())
        .collect()
}
