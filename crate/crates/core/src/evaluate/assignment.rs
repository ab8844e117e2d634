//! Minimum-cost bipartite assignment (Hungarian / Munkres).

use crate::{Error, Result};

/// Row-to-column matching and its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, column)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Exact minimum-cost assignment for a rectangular matrix.
///
/// Every row is matched when `rows ≤ columns`, every column otherwise.
pub fn munkres(cost: &[Vec<f64>]) -> Result<Assignment> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("ragged cost matrix"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::invalid("cost matrix must be finite"));
    }
    if rows == 0 || cols == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            total: 0.0,
        });
    }
    let mut pairs = if rows <= cols {
        hungarian(rows, cols, |i, j| cost[i][j])
    } else {
        hungarian(cols, rows, |i, j| cost[j][i])
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Ok(Assignment { pairs, total })
}

/// Assignment that only keeps pairs with `cost ≤ gate`.
///
/// The matrix is padded to square with the sentinel `gate + 1`, inadmissible
/// entries are replaced by the same sentinel, and sentinel pairs are dropped
/// from the result.
pub fn gated_assignment(cost: &[Vec<f64>], gate: f64) -> Result<Vec<(usize, usize)>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("ragged cost matrix"));
    }
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let size = rows.max(cols);
    let sentinel = gate + 1.0;
    let admissible = |i: usize, j: usize| i < rows && j < cols && cost[i][j] <= gate;
    let square: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    if admissible(i, j) {
                        cost[i][j]
                    } else {
                        sentinel
                    }
                })
                .collect()
        })
        .collect();
    Ok(munkres(&square)?
        .pairs
        .into_iter()
        .filter(|&(i, j)| admissible(i, j))
        .collect())
}

/// O(n²m) shortest-augmenting-path solver for `n ≤ m`.
fn hungarian(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    // 1-based potentials; column 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
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
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect()
}
