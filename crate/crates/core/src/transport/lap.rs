//! Dense linear assignment by the Jonker-Volgenant shortest augmenting path method.

/// Optimal assignment of a square cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub row_to_col: Vec<usize>,
    /// Column dual variables; row duals are `c[i][row_to_col[i]] - v[row_to_col[i]]`.
    pub col_potentials: Vec<f64>,
}

const NONE: usize = usize::MAX;

/// Solves `min_sigma sum_i c[i][sigma(i)]` for a row-major `n x n` cost matrix.
pub fn solve(n: usize, c: &[f64]) -> Assignment {
    assert_eq!(c.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Assignment {
            row_to_col: vec![],
            col_potentials: vec![],
        };
    }
    let cost = |i: usize, j: usize| c[i * n + j];
    let mut rowsol = vec![NONE; n];
    let mut colsol = vec![NONE; n];
    let mut v = vec![0.0f64; n];
    let mut matches = vec![0usize; n];

    // Column reduction.
    for j in (0..n).rev() {
        let mut imin = 0;
        let mut min = cost(0, j);
        for i in 1..n {
            let h = cost(i, j);
            if h < min {
                min = h;
                imin = i;
            }
        }
        v[j] = min;
        matches[imin] += 1;
        if matches[imin] == 1 {
            rowsol[imin] = j;
            colsol[j] = imin;
        } else {
            colsol[j] = NONE;
        }
    }
    for i in 0..n {
        if matches[i] > 1 {
            // Keep only the last column reduction's claim consistent.
            let j = rowsol[i];
            if colsol[j] != i {
                rowsol[i] = NONE;
            }
        }
    }

    // Reduction transfer.
    let mut free = Vec::with_capacity(n);
    for i in 0..n {
        match matches[i] {
            0 => free.push(i),
            1 => {
                let j1 = rowsol[i];
                let mut min = f64::INFINITY;
                for j in 0..n {
                    if j != j1 {
                        let h = cost(i, j) - v[j];
                        if h < min {
                            min = h;
                        }
                    }
                }
                if min.is_finite() {
                    v[j1] -= min;
                }
            }
            _ => {
                if rowsol[i] == NONE {
                    free.push(i);
                }
            }
        }
    }

    // Augmenting row reduction, two passes with a work cap.
    let cap = 8 * n + 64;
    for _ in 0..2 {
        let mut work = 0usize;
        let mut k = 0;
        let prev = std::mem::take(&mut free);
        let mut queue = prev;
        while k < queue.len() && work < cap {
            work += 1;
            let i = queue[k];
            k += 1;
            let mut umin = cost(i, 0) - v[0];
            let mut j1 = 0;
            let mut usubmin = f64::INFINITY;
            let mut j2 = NONE;
            for j in 1..n {
                let h = cost(i, j) - v[j];
                if h < usubmin {
                    if h >= umin {
                        usubmin = h;
                        j2 = j;
                    } else {
                        usubmin = umin;
                        umin = h;
                        j2 = j1;
                        j1 = j;
                    }
                }
            }
            let mut i0 = colsol[j1];
            let strict = umin < usubmin;
            if strict {
                v[j1] -= usubmin - umin;
            } else if i0 != NONE && j2 != NONE {
                j1 = j2;
                i0 = colsol[j2];
            }
            if i0 != NONE {
                rowsol[i0] = NONE;
            }
            rowsol[i] = j1;
            colsol[j1] = i;
            if i0 != NONE {
                if strict {
                    k -= 1;
                    queue[k] = i0;
                } else {
                    free.push(i0);
                }
            }
        }
        // Rows left in the queue when the cap was hit stay free.
        free.extend_from_slice(&queue[k..]);
    }
    free.retain(|&i| rowsol[i] == NONE);
    free.sort_unstable();
    free.dedup();

    // Shortest augmenting paths for the remaining free rows.
    let mut d = vec![0.0f64; n];
    let mut pred = vec![0usize; n];
    let mut collist: Vec<usize> = (0..n).collect();
    for &freerow in &free {
        for j in 0..n {
            d[j] = cost(freerow, j) - v[j];
            pred[j] = freerow;
            collist[j] = j;
        }
        let mut low = 0;
        let mut up = 0;
        let mut last = 0;
        let mut min = 0.0;
        let endofpath;
        'search: loop {
            if up == low {
                last = low;
                min = d[collist[up]];
                up += 1;
                for k in up..n {
                    let j = collist[k];
                    let h = d[j];
                    if h <= min {
                        if h < min {
                            up = low;
                            min = h;
                        }
                        collist[k] = collist[up];
                        collist[up] = j;
                        up += 1;
                    }
                }
                for k in low..up {
                    if colsol[collist[k]] == NONE {
                        endofpath = collist[k];
                        break 'search;
                    }
                }
            }
            let j1 = collist[low];
            low += 1;
            let i = colsol[j1];
            let h = cost(i, j1) - v[j1] - min;
            let mut k = up;
            while k < n {
                let j = collist[k];
                let v2 = cost(i, j) - v[j] - h;
                if v2 < d[j] {
                    pred[j] = i;
                    if v2 == min {
                        if colsol[j] == NONE {
                            endofpath = j;
                            // Columns scanned so far get their prices updated below.
                            break 'search;
                        }
                        collist[k] = collist[up];
                        collist[up] = j;
                        up += 1;
                    }
                    d[j] = v2;
                }
                k += 1;
            }
        }
        // Price update for columns whose distance became final.
        for &j1 in &collist[..low.max(last)] {
            v[j1] += d[j1] - min;
        }
        let mut end = endofpath;
        loop {
            let i = pred[end];
            colsol[end] = i;
            let next = rowsol[i];
            rowsol[i] = end;
            if i == freerow {
                break;
            }
            end = next;
        }
    }
    Assignment {
        row_to_col: rowsol,
        col_potentials: v,
    }
}
