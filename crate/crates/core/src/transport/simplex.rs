//! Transportation simplex for uniform marginals of unequal sizes.
//!
//! Supplies `m/g` per row and demands `n/g` per column (`g = gcd(n, m)`) are
//! perturbed to `(m/g) K + 1` and `(n/g) K` (plus `n` on the last column),
//! which makes every basis non-degenerate; the optimal basis is then rounded
//! back to the original marginals.

/// Basic cells of an optimal plan: `(row, col, mass)` with masses summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub cells: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

struct Tree {
    parent: Vec<usize>,
    parent_edge: Vec<usize>,
    depth: Vec<usize>,
    pot: Vec<f64>,
}

const ROOT: usize = usize::MAX;

/// Solves the transport LP between `n` rows and `m` columns with uniform weights.
/// `order_rows` / `order_cols` give a good north-west-corner traversal order.
pub fn solve(
    n: usize,
    m: usize,
    cost: &dyn Fn(usize, usize) -> f64,
    order_rows: &[usize],
    order_cols: &[usize],
) -> TransportPlan {
    assert!(n > 0 && m > 0);
    let g = gcd(n, m);
    let k = 2 * n as i64 + 3;
    let mut supply: Vec<i64> = vec![(m / g) as i64 * k + 1; n];
    let mut demand: Vec<i64> = vec![(n / g) as i64 * k; m];
    demand[order_cols[m - 1]] += n as i64;

    // North-west corner start on the given orders.
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n + m - 1);
    let mut flow: Vec<i64> = Vec::with_capacity(n + m - 1);
    let (mut a, mut b) = (0, 0);
    loop {
        let (i, j) = (order_rows[a], order_cols[b]);
        let f = supply[i].min(demand[j]);
        edges.push((i, j));
        flow.push(f);
        supply[i] -= f;
        demand[j] -= f;
        if a == n - 1 && b == m - 1 {
            break;
        }
        if (supply[i] == 0 && a < n - 1) || b == m - 1 {
            a += 1;
        } else {
            b += 1;
        }
    }

    let nodes = n + m;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut tree = Tree {
        parent: vec![ROOT; nodes],
        parent_edge: vec![ROOT; nodes],
        depth: vec![0; nodes],
        pot: vec![0.0; nodes],
    };
    let scale = {
        let mut s = 0.0f64;
        for &(i, j) in &edges {
            s = s.max(cost(i, j).abs());
        }
        s.max(1e-300)
    };
    let tol = 1e-12 * scale;
    let total = n * m;
    let block = ((total as f64).sqrt() as usize).max(64).min(total);
    let mut cursor = 0usize;
    let mut pivots = 0usize;
    let mut queue = Vec::with_capacity(nodes);

    loop {
        // Rebuild the spanning tree and potentials (rows 0..n, columns n..n+m).
        for l in adj.iter_mut() {
            l.clear();
        }
        for (e, &(i, j)) in edges.iter().enumerate() {
            adj[i].push(e);
            adj[n + j].push(e);
        }
        tree.parent.iter_mut().for_each(|p| *p = ROOT);
        queue.clear();
        queue.push(0usize);
        tree.depth[0] = 0;
        tree.pot[0] = 0.0;
        let mut seen = vec![false; nodes];
        seen[0] = true;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &e in &adj[u] {
                let (i, j) = edges[e];
                let w = if u < n { n + j } else { i };
                if !seen[w] {
                    seen[w] = true;
                    tree.parent[w] = u;
                    tree.parent_edge[w] = e;
                    tree.depth[w] = tree.depth[u] + 1;
                    // u_i + v_j = c_ij
                    tree.pot[w] = cost(i, j) - tree.pot[u];
                    queue.push(w);
                }
            }
        }
        debug_assert_eq!(queue.len(), nodes, "basis must span all nodes");

        // Block-search pricing.
        let mut best = -tol;
        let mut enter = None;
        let mut scanned = 0usize;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let (i, j) = (cursor / m, cursor % m);
                let r = cost(i, j) - tree.pot[i] - tree.pot[n + j];
                if r < best {
                    best = r;
                    enter = Some((i, j));
                }
                cursor += 1;
                if cursor == total {
                    cursor = 0;
                }
            }
            scanned = end;
            if enter.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = enter else {
            break;
        };
        pivots += 1;

        // Cycle: path in the tree from row ei to column ej.
        let mut up_a = Vec::new();
        let mut up_b = Vec::new();
        let (mut x, mut y) = (ei, n + ej);
        while tree.depth[x] > tree.depth[y] {
            up_a.push(tree.parent_edge[x]);
            x = tree.parent[x];
        }
        while tree.depth[y] > tree.depth[x] {
            up_b.push(tree.parent_edge[y]);
            y = tree.parent[y];
        }
        while x != y {
            up_a.push(tree.parent_edge[x]);
            x = tree.parent[x];
            up_b.push(tree.parent_edge[y]);
            y = tree.parent[y];
        }
        let path: Vec<usize> = up_a.into_iter().chain(up_b.into_iter().rev()).collect();
        // Signs along the path from the row end: -, +, -, ...
        let mut theta = i64::MAX;
        let mut leave = ROOT;
        for (p, &e) in path.iter().enumerate() {
            if p % 2 == 0 && flow[e] < theta {
                theta = flow[e];
                leave = e;
            }
        }
        for (p, &e) in path.iter().enumerate() {
            if p % 2 == 0 {
                flow[e] -= theta;
            } else {
                flow[e] += theta;
            }
        }
        edges[leave] = (ei, ej);
        flow[leave] = theta;
    }

    let unit = (n * m / g) as f64;
    let cells = edges
        .iter()
        .zip(&flow)
        .filter_map(|(&(i, j), &f)| {
            let x0 = ((f as f64) / k as f64).round();
            (x0 > 0.0).then_some((i, j, x0 / unit))
        })
        .collect();
    TransportPlan { cells, pivots }
}
