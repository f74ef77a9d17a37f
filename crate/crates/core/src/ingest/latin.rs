//! Balanced labelling schedules.

use crate::error::{Error, Result};

/// Assign batches to labellers as a sequence of cyclic Latin squares.
///
/// Batches are grouped into squares of `n_labellers`; within a square,
/// labeller `i` takes batch `(i + r) mod n` in round `r`. The result is indexed
/// `[labeller][round]` and has as many rounds as there are batches.
pub fn latin_square_assignment<T: Clone>(n_labellers: usize, batches: &[T]) -> Result<Vec<Vec<T>>> {
    if n_labellers < 2 {
        return Err(Error::Invalid(format!("need at least 2 labellers, got {n_labellers}")));
    }
    if batches.is_empty() || batches.len() % n_labellers != 0 {
        return Err(Error::Invalid(format!(
            "batch count not a multiple of labeller count ({} batches, {n_labellers} labellers)",
            batches.len()
        )));
    }
    let n = n_labellers;
    Ok((0..n)
        .map(|i| {
            batches
                .chunks(n)
                .flat_map(|square| (0..n).map(move |r| square[(i + r) % n].clone()))
                .collect()
        })
        .collect())
}

/// Check that within every square each row and each column holds each batch once.
pub fn verify_latin_square<T: PartialEq>(assignment: &[Vec<T>]) -> bool {
    let n = assignment.len();
    if n == 0 || assignment.iter().any(|r| r.len() != assignment[0].len() || r.len() % n != 0) {
        return false;
    }
    let rounds = assignment[0].len();
    (0..rounds / n).all(|s| {
        let cols = s * n..(s + 1) * n;
        let rows_ok = assignment.iter().all(|row| {
            let sq = &row[cols.clone()];
            sq.iter().enumerate().all(|(a, x)| sq[a + 1..].iter().all(|y| y != x))
        });
        let cols_ok = cols.clone().all(|c| {
            (0..n).all(|a| (a + 1..n).all(|b| assignment[a][c] != assignment[b][c]))
        });
        let same_set = assignment.iter().all(|row| {
            row[cols.clone()].iter().all(|x| assignment[0][cols.clone()].contains(x))
        });
        rows_ok && cols_ok && same_set
    })
}
