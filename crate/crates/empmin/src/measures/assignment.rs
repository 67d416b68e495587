//! Exact W1 between uniform empirical measures via minimum-cost perfect
//! matching.
//!
//! For uniform weights the optimal transport plan between two n-point
//! measures is supported on a permutation, so W1 reduces to a linear
//! assignment problem with cost `|a_i - b_j|`. When the second measure has
//! k·n points, splitting every atom of the first into k equal parts gives
//! an equivalent equal-size problem whose cost matrix has k identical
//! virtual rows per atom; the solver reads those through a view instead of
//! materializing them. The algorithm is Jonker-Volgenant: column reduction
//! with reduction transfer, augmenting-row-reduction sweeps, then shortest
//! augmenting paths maintaining dual feasibility. Exact for real costs,
//! O(n^3) worst case, far faster in practice on geometric instances than
//! plain successive shortest paths.

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;

/// Default size cap; exact matchings beyond this are slow enough that asking
/// for them is usually a mistake.
pub const DEFAULT_ASSIGNMENT_CAP: usize = 4096;

/// Exact assignment W1 with the default size cap.
pub fn wasserstein1_assignment(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    wasserstein1_assignment_capped(a, b, DEFAULT_ASSIGNMENT_CAP)
}

/// Exact assignment W1: `(1/n) min_σ Σ |a_i - b_{σ(i)}|` over permutations.
///
/// The cap bounds the instance size accepted by the O(n^3) solver; raising
/// it is the caller's decision (memory grows as 8 n^2 bytes).
pub fn wasserstein1_assignment_capped(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    cap: usize,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SampleCountMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    wasserstein1_split_assignment(a, b, cap)
}

/// Exact W1 between the uniform measure on `a` and the uniform measure on
/// `b` when `b` has `k·len(a)` points: each atom of `a` splits into `k`
/// equal parts, which reduces the transport problem to an assignment of
/// size `len(b)`. The cost matrix stores one row per distinct atom of `a`,
/// so memory grows as `8·len(a)·len(b)` bytes.
pub fn wasserstein1_split_assignment(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    cap: usize,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if b.len() % a.len() != 0 {
        return Err(Error::SampleCountMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = b.len(); // virtual square size
    if n > cap {
        return Err(Error::AssignmentCapExceeded { n, cap });
    }
    if n == 1 {
        return Ok(euclid(a.point(0), b.point(0)));
    }

    let rows = a.len();
    let dup = n / rows;
    let mut cost = vec![0.0f64; rows * n];
    for (i, pa) in a.points().enumerate() {
        let row = &mut cost[i * n..(i + 1) * n];
        for (c, pb) in row.iter_mut().zip(b.points()) {
            *c = euclid(pa, pb);
        }
    }
    let view = CostView {
        data: &cost,
        cols: n,
        dup,
    };
    Ok(view.solve() / n as f64)
}

#[inline]
fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

const LARGE: f64 = f64::INFINITY;

/// Square cost matrix of virtual size `cols x cols` backed by
/// `cols/dup` distinct physical rows: virtual row i reads physical row
/// `i / dup`. `dup = 1` is the plain dense case.
struct CostView<'a> {
    data: &'a [f64],
    cols: usize,
    dup: usize,
}

impl CostView<'_> {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let p = i / self.dup;
        &self.data[p * self.cols..(p + 1) * self.cols]
    }

    /// Jonker-Volgenant over the virtual square matrix; returns the optimal
    /// total cost.
    fn solve(&self) -> f64 {
        let n = self.cols;
        debug_assert_eq!(self.data.len() * self.dup, n * n);
        let mut x = vec![usize::MAX; n]; // row -> col
        let mut y = vec![usize::MAX; n]; // col -> row
        let mut v = vec![0.0f64; n]; // column potentials

        let mut free_rows = column_reduction(self, &mut x, &mut y, &mut v);
        // Keep sweeping while a sweep still assigns a meaningful share of
        // rows: each sweep is O(free·n) while every row left over costs an
        // O(n^2) shortest-path augmentation.
        let mut sweeps = 0;
        while !free_rows.is_empty() && sweeps < 64 {
            let before = free_rows.len();
            free_rows = augmenting_row_reduction(self, free_rows, &mut x, &mut y, &mut v);
            sweeps += 1;
            if sweeps >= 2 && free_rows.len() * 50 > before * 49 {
                break; // < 2% progress
            }
        }
        augment(self, &free_rows, &mut x, &mut y, &mut v);

        (0..n).map(|i| self.row(i)[x[i]]).sum()
    }
}

/// Column reduction plus reduction transfer. Returns the still-free rows.
fn column_reduction(
    view: &CostView,
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
) -> Vec<usize> {
    let n = view.cols;
    v.fill(LARGE);
    let mut argmin = vec![0usize; n];
    // Streaming pass over the distinct physical rows keeps the row-major
    // matrix cache-friendly; strict `<` picks the lowest physical row on
    // ties, whose first virtual copy is also the lowest virtual index.
    for p in 0..n / view.dup {
        let row = &view.data[p * n..(p + 1) * n];
        let i = p * view.dup;
        for (j, &c) in row.iter().enumerate() {
            if c < v[j] {
                v[j] = c;
                argmin[j] = i;
            }
        }
    }

    let mut unique = vec![true; n];
    y.fill(usize::MAX);
    for j in (0..n).rev() {
        let i = argmin[j];
        if x[i] == usize::MAX {
            x[i] = j;
            y[j] = i;
        } else {
            unique[i] = false;
        }
    }

    let mut free_rows = Vec::new();
    for i in 0..n {
        if x[i] == usize::MAX {
            free_rows.push(i);
        } else if unique[i] {
            // Reduction transfer: lower v on the assigned column by the
            // slack to the second-best column of this row.
            let j1 = x[i];
            let row = view.row(i);
            let mut min_slack = LARGE;
            for (j, &c) in row.iter().enumerate() {
                if j != j1 {
                    let s = c - v[j];
                    if s < min_slack {
                        min_slack = s;
                    }
                }
            }
            if min_slack.is_finite() {
                v[j1] -= min_slack;
            }
        }
    }
    free_rows
}

/// One sweep of augmenting row reduction over the free rows.
fn augmenting_row_reduction(
    view: &CostView,
    mut free_rows: Vec<usize>,
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
) -> Vec<usize> {
    let n = view.cols;
    let num_free = free_rows.len();
    let mut current = 0usize;
    let mut new_free = 0usize;
    let mut rr_cnt = 0usize;
    while current < num_free {
        rr_cnt += 1;
        let free_i = free_rows[current];
        current += 1;

        // First and second minima of the reduced row.
        let row = view.row(free_i);
        let mut j1 = 0usize;
        let mut v1 = row[0] - v[0];
        let mut j2 = usize::MAX;
        let mut v2 = LARGE;
        for j in 1..n {
            let c = row[j] - v[j];
            if c < v2 {
                if c >= v1 {
                    v2 = c;
                    j2 = j;
                } else {
                    v2 = v1;
                    j2 = j1;
                    v1 = c;
                    j1 = j;
                }
            }
        }

        let mut i0 = y[j1];
        let v1_new = v[j1] - (v2 - v1);
        let v1_lowers = v1_new < v[j1];
        // The rr_cnt guard bounds re-examination of rows when reduced costs
        // tie, which otherwise can cycle with floating-point data.
        if rr_cnt < current * n {
            if v1_lowers {
                v[j1] = v1_new;
            } else if i0 != usize::MAX && j2 != usize::MAX {
                j1 = j2;
                i0 = y[j1];
            }
            if i0 != usize::MAX {
                if v1_lowers {
                    // Retry the displaced row immediately.
                    current -= 1;
                    free_rows[current] = i0;
                } else {
                    free_rows[new_free] = i0;
                    new_free += 1;
                }
            }
        } else if i0 != usize::MAX {
            free_rows[new_free] = i0;
            new_free += 1;
        }
        x[free_i] = j1;
        y[j1] = free_i;
    }
    free_rows.truncate(new_free);
    free_rows
}

/// Dijkstra-style shortest augmenting path for every remaining free row.
fn augment(view: &CostView, free_rows: &[usize], x: &mut [usize], y: &mut [usize], v: &mut [f64]) {
    let n = view.cols;
    let mut pred = vec![usize::MAX; n];
    let mut cols = vec![0usize; n];
    let mut d = vec![0.0f64; n];
    for &free_row in free_rows {
        let mut final_j = find_path(view, free_row, y, v, &mut pred, &mut cols, &mut d);
        // Walk the alternating path back to the free row, flipping edges.
        let mut i = usize::MAX;
        let mut guard = 0usize;
        while i != free_row {
            i = pred[final_j];
            y[final_j] = i;
            std::mem::swap(&mut x[i], &mut final_j);
            guard += 1;
            assert!(guard <= n, "augmenting path longer than n");
        }
    }
}

/// Single-source shortest path in the reduced-cost graph from `start_row`
/// to an unassigned column. Columns scanned before the final band keep dual
/// feasibility via `v[j] += d[j] - d[final_j]`; band columns share the final
/// distance, so their update is a no-op and they are skipped.
fn find_path(
    view: &CostView,
    start_row: usize,
    y: &[usize],
    v: &mut [f64],
    pred: &mut [usize],
    cols: &mut [usize],
    d: &mut [f64],
) -> usize {
    let n = view.cols;
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut n_ready = 0usize;

    let row = view.row(start_row);
    for j in 0..n {
        cols[j] = j;
        pred[j] = start_row;
        d[j] = row[j] - v[j];
    }

    let mut final_j = usize::MAX;
    while final_j == usize::MAX {
        if lo == hi {
            // Collect the next band: all todo columns at minimal distance.
            // Hot loop; `cols` is a permutation of 0..n and lo <= hi <= k < n,
            // so the unchecked accesses stay in bounds.
            n_ready = lo;
            hi = lo + 1;
            let mut mind = d[cols[lo]];
            for k in hi..n {
                unsafe {
                    let j = *cols.get_unchecked(k);
                    let dj = *d.get_unchecked(j);
                    if dj <= mind {
                        if dj < mind {
                            mind = dj;
                            hi = lo;
                        }
                        *cols.get_unchecked_mut(k) = *cols.get_unchecked(hi);
                        *cols.get_unchecked_mut(hi) = j;
                        hi += 1;
                    }
                }
            }
            for k in lo..hi {
                let j = cols[k];
                if y[j] == usize::MAX {
                    final_j = j;
                }
            }
        }
        if final_j == usize::MAX {
            final_j = scan_band(view, &mut lo, &mut hi, d, cols, pred, y, v);
        }
    }

    let mind = d[final_j];
    for k in 0..n_ready {
        let j = cols[k];
        v[j] += d[j] - mind;
    }
    final_j
}

/// Scans band columns, relaxing todo columns through the rows matched to
/// the band. Returns an unassigned column as soon as one is reachable at
/// the band distance, `usize::MAX` once the band is exhausted.
#[allow(clippy::too_many_arguments)]
fn scan_band(
    view: &CostView,
    lo: &mut usize,
    hi: &mut usize,
    d: &mut [f64],
    cols: &mut [usize],
    pred: &mut [usize],
    y: &[usize],
    v: &[f64],
) -> usize {
    let n = view.cols;
    while *lo != *hi {
        let j = cols[*lo];
        *lo += 1;
        let i = y[j];
        let mind = d[j];
        let irow = view.row(i);
        let h = irow[j] - v[j] - mind;
        // Hot loop over the todo columns; `cols` is a permutation of 0..n
        // and hi <= k < n, so the unchecked accesses stay in bounds.
        let mut k = *hi;
        while k < n {
            unsafe {
                let j2 = *cols.get_unchecked(k);
                let cred = *irow.get_unchecked(j2) - *v.get_unchecked(j2) - h;
                if cred < *d.get_unchecked(j2) {
                    *d.get_unchecked_mut(j2) = cred;
                    *pred.get_unchecked_mut(j2) = i;
                    if cred == mind {
                        if *y.get_unchecked(j2) == usize::MAX {
                            return j2;
                        }
                        *cols.get_unchecked_mut(k) = *cols.get_unchecked(*hi);
                        *cols.get_unchecked_mut(*hi) = j2;
                        *hi += 1;
                    }
                }
            }
            k += 1;
        }
    }
    usize::MAX
}
