//! Euclidean projections used by the relaxed solvers: the Birkhoff polytope,
//! the PSD cone, and the alignment-consistency set of block matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{sym_eigen, sym_eigen_faer, symmetrize};

#[derive(Debug, Clone, Copy)]
pub struct BirkhoffOptions {
    pub max_iters: usize,
    /// Stop when the largest row/column-sum error and negative entry are below this.
    pub tol: f64,
}

impl Default for BirkhoffOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-11,
        }
    }
}

/// Projection onto the affine set `{X : X1 = 1, Xᵀ1 = 1}` (closed form).
pub fn project_unit_sums(x: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.nrows();
    let mf = m as f64;
    let r: Vec<f64> = (0..m).map(|i| 1.0 - x.row(i).sum()).collect();
    let c: Vec<f64> = (0..m).map(|j| 1.0 - x.column(j).sum()).collect();
    let s: f64 = r.iter().sum();
    DMatrix::from_fn(m, m, |i, j| x[(i, j)] + r[i] / mf + c[j] / mf - s / (mf * mf))
}

/// Row and column multipliers of a Birkhoff projection: the projection of
/// `Y` is `max(0, Y_ij + row_i + col_j)`. Reusing them for a nearby `Y`
/// shortens the next projection without changing its result.
#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffDuals {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

impl BirkhoffDuals {
    pub fn zeros(m: usize) -> Self {
        Self {
            row: vec![0.0; m],
            col: vec![0.0; m],
        }
    }
}

/// Shift `t` with `Σ_k max(0, z_k + t) = 1`.
fn simplex_shift(z: &mut [f64]) -> f64 {
    z.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 1.0 - z[0];
    for (k, &v) in z.iter().enumerate() {
        cum += v;
        let t = (1.0 - cum) / (k + 1) as f64;
        if v + t > 0.0 {
            shift = t;
        } else {
            break;
        }
    }
    shift
}

/// Projection onto the Birkhoff polytope by Dykstra's method between the
/// row-stochastic and column-stochastic sets (each a product of simplices),
/// carried out in its dual form: alternating exact row and column multiplier
/// updates.
pub fn project_birkhoff(x: &DMatrix<f64>, opts: BirkhoffOptions) -> DMatrix<f64> {
    project_birkhoff_warm(x, opts, &mut BirkhoffDuals::zeros(x.nrows()))
}

/// As [`project_birkhoff`], starting from (and updating) `duals`.
pub fn project_birkhoff_warm(x: &DMatrix<f64>, opts: BirkhoffOptions, duals: &mut BirkhoffDuals) -> DMatrix<f64> {
    let m = x.nrows();
    if duals.row.len() != m {
        *duals = BirkhoffDuals::zeros(m);
    }
    let mut buf = vec![0.0; m];
    for _ in 0..opts.max_iters {
        for i in 0..m {
            for j in 0..m {
                buf[j] = x[(i, j)] + duals.col[j];
            }
            duals.row[i] = simplex_shift(&mut buf);
        }
        for j in 0..m {
            for i in 0..m {
                buf[i] = x[(i, j)] + duals.row[i];
            }
            duals.col[j] = simplex_shift(&mut buf);
        }
        // columns are exact after the column sweep; rows measure convergence
        let worst = (0..m)
            .map(|i| {
                let s: f64 = (0..m).map(|j| (x[(i, j)] + duals.row[i] + duals.col[j]).max(0.0)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        if worst < opts.tol {
            break;
        }
    }
    DMatrix::from_fn(m, m, |i, j| (x[(i, j)] + duals.row[i] + duals.col[j]).max(0.0))
}

/// Largest absolute deviation of a row or column sum from 1.
pub fn sum_violation(x: &DMatrix<f64>) -> f64 {
    let m = x.nrows();
    (0..m)
        .map(|i| (x.row(i).sum() - 1.0).abs().max((x.column(i).sum() - 1.0).abs()))
        .fold(0.0, f64::max)
}

/// Projection of a symmetric matrix onto the PSD cone (negative eigenvalues clipped).
pub fn project_psd(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut sym = x.clone();
    symmetrize(&mut sym);
    let (w, v) = sym_eigen_faer(&sym)?;
    let n = sym.nrows();
    // eigenvalues ascending: keep the trailing nonnegative ones
    let first = w.iter().position(|&l| l > 0.0).unwrap_or(n);
    let k = n - first;
    let vk = v.subcols(first, k);
    let scaled = faer::Mat::<f64>::from_fn(n, k, |i, j| vk[(i, j)] * w[first + j]);
    let prod = &scaled * vk.transpose();
    let mut out = DMatrix::from_fn(n, n, |i, j| prod[(i, j)]);
    symmetrize(&mut out);
    Ok(out)
}

/// Projection of a symmetric `nm x nm` block matrix onto
/// `{diagonal blocks = I, off-diagonal blocks doubly stochastic, symmetric}`.
///
/// For a symmetric input the pair `(X_ij, X_ji)` projects jointly onto
/// `(Y, Yᵀ)` with `Y` the Birkhoff projection of `(X_ij + X_jiᵀ)/2`.
pub fn project_blocks(x: &DMatrix<f64>, n: usize, m: usize, opts: BirkhoffOptions) -> DMatrix<f64> {
    project_blocks_warm(x, n, m, opts, &mut BlockDuals::new(n, m))
}

/// Warm-start multipliers for every off-diagonal block pair `i < j`.
#[derive(Debug, Clone)]
pub struct BlockDuals {
    pairs: Vec<BirkhoffDuals>,
}

impl BlockDuals {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            pairs: vec![BirkhoffDuals::zeros(m); n * n.saturating_sub(1) / 2],
        }
    }
}

fn project_blocks_warm(x: &DMatrix<f64>, n: usize, m: usize, opts: BirkhoffOptions, duals: &mut BlockDuals) -> DMatrix<f64> {
    if duals.pairs.len() != n * n.saturating_sub(1) / 2 {
        *duals = BlockDuals::new(n, m);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let projected: Vec<DMatrix<f64>> = pairs
        .par_iter()
        .zip(duals.pairs.par_iter_mut())
        .map(|(&(i, j), d)| {
            let avg = DMatrix::from_fn(m, m, |a, b| {
                0.5 * (x[(i * m + a, j * m + b)] + x[(j * m + b, i * m + a)])
            });
            project_birkhoff_warm(&avg, opts, d)
        })
        .collect();
    let mut out = DMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for a in 0..m {
            out[(i * m + a, i * m + a)] = 1.0;
        }
    }
    for (&(i, j), y) in pairs.iter().zip(&projected) {
        out.view_mut((i * m, j * m), (m, m)).copy_from(y);
        out.view_mut((j * m, i * m), (m, m)).copy_from(&y.transpose());
    }
    out
}

/// Violation of the block constraints: max of sum errors, negative mass and
/// diagonal-block deviation from `I`.
pub fn block_violation(x: &DMatrix<f64>, n: usize, m: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let blk = x.view((i * m, j * m), (m, m)).into_owned();
            if i == j {
                let dev = (blk - DMatrix::<f64>::identity(m, m)).amax();
                worst = worst.max(dev);
            } else {
                worst = worst.max(sum_violation(&blk));
                worst = worst.max(blk.iter().fold(0.0f64, |s, v| s.max(-v)));
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub struct ConsistencyOptions {
    /// Outer Dykstra budget between the block set and the PSD cone.
    pub max_iters: usize,
    pub tol: f64,
    pub birkhoff: BirkhoffOptions,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-8,
            birkhoff: BirkhoffOptions::default(),
        }
    }
}

/// Dykstra projection onto the block constraints intersected with the PSD
/// cone. The result is always re-projected onto the block constraints so the
/// blocks are exactly feasible; PSD then holds up to the Dykstra tolerance.
pub fn project_consistent(
    x: &DMatrix<f64>,
    n: usize,
    m: usize,
    opts: ConsistencyOptions,
) -> Result<DMatrix<f64>> {
    project_consistent_warm(x, n, m, opts, &mut BlockDuals::new(n, m))
}

/// As [`project_consistent`], reusing Birkhoff multipliers across calls.
pub fn project_consistent_warm(
    x: &DMatrix<f64>,
    n: usize,
    m: usize,
    opts: ConsistencyOptions,
    duals: &mut BlockDuals,
) -> Result<DMatrix<f64>> {
    let dim = n * m;
    let mut cur = x.clone();
    symmetrize(&mut cur);
    let mut corr_blocks = DMatrix::<f64>::zeros(dim, dim);
    let mut corr_psd = DMatrix::<f64>::zeros(dim, dim);
    for _ in 0..opts.max_iters {
        let shifted = &cur + &corr_blocks;
        let y = project_blocks_warm(&shifted, n, m, opts.birkhoff, duals);
        corr_blocks = shifted - &y;
        let shifted = &y + &corr_psd;
        cur = project_psd(&shifted)?;
        corr_psd = shifted - &cur;
        if block_violation(&cur, n, m) < opts.tol {
            break;
        }
    }
    Ok(project_blocks_warm(&cur, n, m, opts.birkhoff, duals))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(x: &DMatrix<f64>) -> Result<f64> {
    let (w, _) = sym_eigen(x)?;
    Ok(w.iter().cloned().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DoublyStochastic;
    use proptest::prelude::*;

    #[test]
    fn unit_sums_projection_is_exact() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.3, 0.0, 0.0, 4.0]);
        let p = project_unit_sums(&x);
        assert!(sum_violation(&p) < 1e-12);
        // idempotent
        assert!((project_unit_sums(&p) - &p).norm() < 1e-12);
    }

    #[test]
    fn birkhoff_fixes_feasible_points() {
        let x = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.4, 0.6]);
        assert!((project_birkhoff(&x, BirkhoffOptions::default()) - &x).norm() < 1e-12);
    }

    #[test]
    fn birkhoff_projection_of_scaled_identity() {
        // 2I projects to I: the nearest DS matrix to a scaled permutation.
        let x = DMatrix::<f64>::identity(3, 3) * 2.0;
        let p = project_birkhoff(&x, BirkhoffOptions::default());
        assert!((p - DMatrix::<f64>::identity(3, 3)).norm() < 1e-9);
    }

    proptest! {
        #[test]
        fn birkhoff_output_is_feasible_and_optimal(vals in proptest::collection::vec(-2.0f64..2.0, 16)) {
            let x = DMatrix::from_row_slice(4, 4, &vals);
            let p = project_birkhoff(&x, BirkhoffOptions::default());
            prop_assert!(DoublyStochastic::check(&p, 1e-9, 1e-7).is_ok());
            // variational inequality: <x - p, q - p> <= 0 for vertices q
            for perm in [[0usize, 1, 2, 3], [1, 0, 3, 2], [3, 2, 1, 0], [2, 3, 0, 1], [1, 2, 3, 0]] {
                let q = DMatrix::from_fn(4, 4, |a, b| if perm[a] == b { 1.0 } else { 0.0 });
                let ip: f64 = (&x - &p).component_mul(&(q - &p)).sum();
                prop_assert!(ip <= 1e-6, "ip = {}", ip);
            }
        }
    }

    #[test]
    fn psd_projection_clips() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = project_psd(&x).unwrap();
        // eigenvalues 3 and -1 -> keep 3 on (1,1)/sqrt2
        let expect = DMatrix::from_element(2, 2, 1.5);
        assert!((p - expect).norm() < 1e-12);
    }

    #[test]
    fn consistent_projection_keeps_identity_blocks() {
        let n = 3;
        let m = 3;
        let x = DMatrix::from_fn(n * m, n * m, |r, c| if r % m == c % m { 1.0 } else { 0.0 });
        let p = project_consistent(&x, n, m, ConsistencyOptions::default()).unwrap();
        assert!((p - &x).norm() < 1e-9);
    }

    #[test]
    fn consistent_projection_is_feasible() {
        let n = 3;
        let m = 3;
        let x = DMatrix::from_fn(n * m, n * m, |r, c| ((r * 7 + c * 3) % 5) as f64 / 5.0);
        let p = project_consistent(&x, n, m, ConsistencyOptions::default()).unwrap();
        assert!(block_violation(&p, n, m) < 1e-7);
        assert!((p.transpose() - &p).norm() == 0.0);
        assert!(min_eigenvalue(&p).unwrap() > -1e-3);
    }
}
