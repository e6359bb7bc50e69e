//! Square linear assignment: `min Σ_a cost[a, π(a)]` over permutations `π`.
//!
//! Shortest-augmenting-path Hungarian method, O(m³), keeping dual potentials
//! `u`, `v` with `cost[a, b] - u[a] - v[b] >= 0` and equality on the matching.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Permutation;

#[derive(Debug, Clone)]
pub struct Assignment {
    /// `perm[a]` = column assigned to row `a`.
    pub perm: Permutation,
    pub cost: f64,
    row_potential: Vec<f64>,
    col_potential: Vec<f64>,
}

/// Optimal assignment; any optimal permutation may be returned.
pub fn solve(cost: &DMatrix<f64>) -> Result<Assignment> {
    let m = cost.nrows();
    if cost.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "assignment cost is {m}x{}, not square",
            cost.ncols()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite assignment cost".into()));
    }
    if m == 0 {
        return Ok(Assignment {
            perm: Permutation::identity(0),
            cost: 0.0,
            row_potential: vec![],
            col_potential: vec![],
        });
    }

    // 1-based arrays; column 0 is the virtual root of each augmentation.
    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; m];
    for j in 1..=m {
        perm[row_of[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(a, &b)| cost[(a, b)]).sum();
    Ok(Assignment {
        perm: Permutation::new(perm).expect("hungarian matching is a bijection"),
        cost: total,
        row_potential: u[1..].to_vec(),
        col_potential: v[1..].to_vec(),
    })
}

/// Optimal assignment, choosing the lexicographically smallest
/// `(π(0), π(1), ...)` among all optimal permutations.
///
/// Optimal permutations are exactly the perfect matchings of the equality
/// subgraph of the dual solution (reduced cost within `tol`).
pub fn solve_lexicographic(cost: &DMatrix<f64>) -> Result<Assignment> {
    let base = solve(cost)?;
    let m = cost.nrows();
    if m <= 1 {
        return Ok(base);
    }
    let scale = cost.iter().fold(1.0f64, |s, c| s.max(c.abs()));
    let tol = 1e-9 * scale;
    let tight: Vec<Vec<usize>> = (0..m)
        .map(|a| {
            (0..m)
                .filter(|&b| cost[(a, b)] - base.row_potential[a] - base.col_potential[b] <= tol)
                .collect()
        })
        .collect();

    let mut col_of: Vec<usize> = base.perm.as_slice().to_vec();
    let mut row_of = vec![0usize; m];
    for (a, &b) in col_of.iter().enumerate() {
        row_of[b] = a;
    }
    let mut col_fixed = vec![false; m];
    for i in 0..m {
        for &j in &tight[i] {
            if col_fixed[j] {
                continue;
            }
            if col_of[i] == j {
                break;
            }
            // Row r currently holds j; it must reach the column freed by i
            // through an alternating path over rows > i.
            let r = row_of[j];
            let target = col_of[i];
            if let Some(path) = alternating_path(&tight, &col_of, &row_of, &col_fixed, i, j, r, target) {
                // path: r -> c1, row_of[c1] -> c2, ..., -> target
                let mut row = r;
                for &c in &path {
                    let next = row_of[c];
                    col_of[row] = c;
                    row_of[c] = row;
                    row = next;
                }
                col_of[i] = j;
                row_of[j] = i;
                break;
            }
        }
        col_fixed[col_of[i]] = true;
    }
    let perm = Permutation::new(col_of)?;
    let total = perm.as_slice().iter().enumerate().map(|(a, &b)| cost[(a, b)]).sum();
    Ok(Assignment {
        perm,
        cost: total,
        row_potential: base.row_potential,
        col_potential: base.col_potential,
    })
}

/// BFS for an alternating path from row `start` to column `target` using
/// tight edges, avoiding fixed columns, the column `avoid` and row `skip_row`.
/// Returns the sequence of columns visited.
#[allow(clippy::too_many_arguments)]
fn alternating_path(
    tight: &[Vec<usize>],
    col_of: &[usize],
    row_of: &[usize],
    col_fixed: &[bool],
    skip_row: usize,
    avoid: usize,
    start: usize,
    target: usize,
) -> Option<Vec<usize>> {
    let m = col_of.len();
    let mut parent_col: Vec<Option<usize>> = vec![None; m];
    let mut seen = vec![false; m];
    let mut queue = std::collections::VecDeque::from([(start, usize::MAX)]);
    let mut reached = None;
    'bfs: while let Some((row, via)) = queue.pop_front() {
        for &c in &tight[row] {
            if seen[c] || col_fixed[c] || c == avoid || c == col_of[row] {
                continue;
            }
            seen[c] = true;
            parent_col[c] = if via == usize::MAX { None } else { Some(via) };
            if c == target {
                reached = Some(c);
                break 'bfs;
            }
            let next = row_of[c];
            if next != skip_row {
                queue.push_back((next, c));
            }
        }
    }
    let mut c = reached?;
    let mut path = vec![c];
    while let Some(p) = parent_col[c] {
        path.push(p);
        c = p;
    }
    path.reverse();
    Some(path)
}
