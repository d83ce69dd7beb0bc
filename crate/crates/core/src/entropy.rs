//! Relative entropy between sample sets: k-nearest-neighbour estimator and a
//! Gaussian-fit mode for linear models.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{kl_gaussian, GaussianLaw};
use crate::model::Ensemble;
use crate::scalar::Real;
use crate::sde::EnsemblePath;

/// Radii below this are floored (and counted) to keep logarithms finite.
pub const RADIUS_FLOOR: f64 = 1e-12;
pub const DEFAULT_K: usize = 5;

const LEAF_SIZE: usize = 12;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over points in `R^dim`.
pub struct KdTree {
    dim: usize,
    pts: Vec<f64>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(dim: usize, data: &[f64]) -> Self {
        let n = data.len() / dim;
        let mut ids: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        build(dim, data, &mut ids, 0, n, &mut nodes);
        let mut pts = Vec::with_capacity(data.len());
        for &i in &ids {
            pts.extend_from_slice(&data[i * dim..(i + 1) * dim]);
        }
        Self {
            dim,
            pts,
            ids,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Squared distance from `q` to its k-th nearest point, skipping the point
    /// with original index `exclude`.
    pub fn kth_sq_distance(&self, q: &[f64], k: usize, exclude: Option<usize>) -> f64 {
        let mut best = vec![f64::INFINITY; k];
        self.search(0, q, exclude, &mut best);
        best[k - 1]
    }

    fn search(&self, node: usize, q: &[f64], exclude: Option<usize>, best: &mut [f64]) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for p in start..end {
                    if Some(self.ids[p]) == exclude {
                        continue;
                    }
                    let x = &self.pts[p * self.dim..(p + 1) * self.dim];
                    let d2: f64 = x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    let k = best.len();
                    if d2 < best[k - 1] {
                        let mut s = k - 1;
                        while s > 0 && best[s - 1] > d2 {
                            best[s] = best[s - 1];
                            s -= 1;
                        }
                        best[s] = d2;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, exclude, best);
                if diff * diff < best[best.len() - 1] {
                    self.search(far, q, exclude, best);
                }
            }
        }
    }
}

fn build(
    dim: usize,
    data: &[f64],
    ids: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let me = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return me;
    }
    let mut axis = 0;
    let mut spread = -1.0;
    for a in 0..dim {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in &ids[start..end] {
            let v = data[i * dim + a];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > spread {
            spread = hi - lo;
            axis = a;
        }
    }
    let mid = (end - start) / 2;
    ids[start..end].select_nth_unstable_by(mid, |&i, &j| {
        data[i * dim + axis].total_cmp(&data[j * dim + axis])
    });
    let value = data[ids[start + mid] * dim + axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build(dim, data, ids, start, start + mid, nodes);
    let right = build(dim, data, ids, start + mid, end, nodes);
    nodes[me] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    me
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum KlMethod {
    Knn {
        k: usize,
    },
    /// Exact for Gaussian snapshots; only meaningful for linear models.
    GaussianFit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlEstimate {
    /// Estimated `Ent(p | q)`; may be negative from estimator noise.
    pub value: f64,
    pub method: KlMethod,
    pub n: usize,
    pub m: usize,
    /// Number of neighbour radii raised to [`RADIUS_FLOOR`].
    pub floored_radii: usize,
}

fn flat<T: Real>(e: &Ensemble<T>) -> Vec<f64> {
    e.as_slice().iter().map(|v| v.as_f64()).collect()
}

/// Two-sample k-NN estimate of `Ent(p | q)`:
/// `(D/n) sum_i ln(nu_k(i) / rho_k(i)) + ln(m / (n - 1))` with `D = 2d`.
pub fn kl_knn<T: Real>(p: &Ensemble<T>, q: &Ensemble<T>, k: usize) -> Result<KlEstimate> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(
            "sample sets of different dimension".into(),
        ));
    }
    let (n, m) = (p.len(), q.len());
    if k == 0 || k >= n || k >= m {
        return Err(Error::InvalidParameter(format!(
            "neighbour order k = {k} must satisfy 1 <= k < min(n, m) = {}",
            n.min(m)
        )));
    }
    let dim = p.phase_dim();
    let pf = flat(p);
    let qf = flat(q);
    let tp = KdTree::new(dim, &pf);
    let tq = KdTree::new(dim, &qf);
    let terms: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = &pf[i * dim..(i + 1) * dim];
            let mut floored = 0;
            let mut rho = tp.kth_sq_distance(x, k, Some(i)).sqrt();
            let mut nu = tq.kth_sq_distance(x, k, None).sqrt();
            if rho < RADIUS_FLOOR {
                rho = RADIUS_FLOOR;
                floored += 1;
            }
            if nu < RADIUS_FLOOR {
                nu = RADIUS_FLOOR;
                floored += 1;
            }
            ((nu / rho).ln(), floored)
        })
        .collect();
    let sum: f64 = terms.iter().map(|t| t.0).sum();
    let floored_radii = terms.iter().map(|t| t.1).sum();
    let value = dim as f64 / n as f64 * sum + (m as f64 / (n as f64 - 1.0)).ln();
    Ok(KlEstimate {
        value,
        method: KlMethod::Knn { k },
        n,
        m,
        floored_radii,
    })
}

/// Entropy of a fitted Gaussian relative to a reference law.
pub fn kl_gaussian_fit<T: Real>(p: &Ensemble<T>, q: &GaussianLaw<T>) -> Result<KlEstimate> {
    let fit = GaussianLaw::fit(p)?;
    Ok(KlEstimate {
        value: kl_gaussian(&fit, q)?.as_f64(),
        method: KlMethod::GaussianFit,
        n: p.len(),
        m: 0,
        floored_radii: 0,
    })
}

/// Reference measure for a decay curve.
#[derive(Clone, Copy, Debug)]
pub enum KlReference<'a, T> {
    Samples(&'a Ensemble<T>),
    /// Snapshots are Gaussian-fitted and compared in closed form.
    Gaussian(&'a GaussianLaw<T>),
}

/// One estimate per snapshot of `path`.
pub fn kl_decay_curve<T: Real>(
    path: &EnsemblePath<T>,
    reference: KlReference<'_, T>,
    k: usize,
) -> Result<Vec<(f64, KlEstimate)>> {
    path.times
        .iter()
        .zip(&path.snapshots)
        .map(|(t, snap)| {
            let est = match reference {
                KlReference::Samples(r) => {
                    if r.len() < snap.len() {
                        return Err(Error::InvalidParameter(
                            "reference sample smaller than the snapshots".into(),
                        ));
                    }
                    kl_knn(snap, r, k)?
                }
                KlReference::Gaussian(g) => kl_gaussian_fit(snap, g)?,
            };
            Ok((t.as_f64(), est))
        })
        .collect()
}
