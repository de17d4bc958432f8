use super::GroundCost;
use crate::error::{Error, Result};

/// An optimal row-to-column assignment and its exact total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `assignment[i]` is the column matched to row `i`; always a permutation.
    pub assignment: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost perfect assignment by the Hungarian algorithm with dual
/// potentials and shortest augmenting paths, O(n^3).
///
/// When several permutations are optimal any one of them may be returned;
/// the cost is unique. Requires a square cost matrix with `n <= 64`: this is
/// the exact small-scale reference the entropic solver is checked against,
/// not a large-scale assignment engine.
pub fn exact_assignment(cost: &GroundCost) -> Result<Assignment> {
    let (n, m) = cost.shape();
    if n != m {
        return Err(Error::Shape(format!("assignment needs a square cost, got {n}x{m}")));
    }
    if n > 64 {
        return Err(Error::Contract(format!("assignment is limited to n <= 64, got {n}")));
    }
    let c = cost.matrix();

    // 1-indexed arrays; index 0 is the virtual start column of each
    // augmenting search. p[j] is the row currently matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = c[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Walk the augmenting path back, flipping matches.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
    Ok(Assignment { assignment, cost: total })
}
