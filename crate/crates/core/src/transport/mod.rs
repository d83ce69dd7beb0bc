//! Exact Wasserstein-2 distances between empirical measures.

pub mod lap;
pub mod simplex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Ensemble;
use crate::rng::StreamKey;
use crate::scalar::Real;

/// Largest equal-size instance solved exactly; larger inputs are stride-subsampled.
pub const EXACT_CAP: usize = 4096;
/// Largest `n * m` accepted by [`w2_empirical_general`].
pub const GENERAL_CAP: usize = 10_000_000;

/// Squared Euclidean costs `c[i][j] = |a_i - b_j|^2` in double precision.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    pub n: usize,
    pub m: usize,
    pub entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new<T: Real>(a: &Ensemble<T>, b: &Ensemble<T>) -> Result<Self> {
        check_dims(a, b)?;
        let pa = to_f64(a);
        let pb = to_f64(b);
        let w = a.phase_dim();
        let (n, m) = (a.len(), b.len());
        let mut entries = vec![0.0; n * m];
        for i in 0..n {
            let ai = &pa[i * w..(i + 1) * w];
            for j in 0..m {
                entries[i * m + j] = sq(ai, &pb[j * w..(j + 1) * w]);
            }
        }
        Ok(Self { n, m, entries })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }
}

#[inline]
fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn to_f64<T: Real>(e: &Ensemble<T>) -> Vec<f64> {
    e.as_slice().iter().map(|v| v.as_f64()).collect()
}

fn check_dims<T: Real>(a: &Ensemble<T>, b: &Ensemble<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ensembles of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Order-independent sum (ascending) so that equal matchings give equal totals.
fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Optimal matching cost `min_sigma (1/n) sum c[i][sigma(i)]` and the matching.
pub fn optimal_matching<T: Real>(a: &Ensemble<T>, b: &Ensemble<T>) -> Result<(f64, Vec<usize>)> {
    check_dims(a, b)?;
    if a.len() != b.len() {
        return Err(Error::UnequalCounts {
            n: a.len(),
            m: b.len(),
        });
    }
    let c = CostMatrix::new(a, b)?;
    let sol = lap::solve(c.n, &c.entries);
    let matched: Vec<f64> = (0..c.n).map(|i| c.get(i, sol.row_to_col[i])).collect();
    Ok((sorted_sum(matched) / c.n as f64, sol.row_to_col))
}

/// W2 between equal-size empirical measures via an exact assignment solve.
///
/// Ensembles above [`EXACT_CAP`] points are stride-subsampled to the cap.
pub fn w2_empirical<T: Real>(a: &Ensemble<T>, b: &Ensemble<T>) -> Result<f64> {
    Ok(w2_sq_empirical(a, b)?.sqrt())
}

/// Squared W2 between equal-size empirical measures.
pub fn w2_sq_empirical<T: Real>(a: &Ensemble<T>, b: &Ensemble<T>) -> Result<f64> {
    check_dims(a, b)?;
    if a.len() != b.len() {
        return Err(Error::UnequalCounts {
            n: a.len(),
            m: b.len(),
        });
    }
    let (a, b) = (a.stride_subsample(EXACT_CAP), b.stride_subsample(EXACT_CAP));
    // Canonical orientation makes the result exactly symmetric.
    let swap = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(u, v)| u.as_f64().total_cmp(&v.as_f64()))
        .find(|o| o.is_ne())
        == Some(std::cmp::Ordering::Greater);
    let (x, y) = if swap { (&b, &a) } else { (&a, &b) };
    Ok(optimal_matching(x, y)?.0)
}

/// W2 between empirical measures of arbitrary sizes (transportation simplex).
pub fn w2_empirical_general<T: Real>(a: &Ensemble<T>, b: &Ensemble<T>) -> Result<f64> {
    check_dims(a, b)?;
    let (n, m) = (a.len(), b.len());
    if n.saturating_mul(m) > GENERAL_CAP {
        return Err(Error::TooLarge {
            n,
            m,
            cap: GENERAL_CAP,
        });
    }
    let pa = to_f64(a);
    let pb = to_f64(b);
    let w = a.phase_dim();
    let cost = |i: usize, j: usize| sq(&pa[i * w..(i + 1) * w], &pb[j * w..(j + 1) * w]);
    let order = |p: &[f64], len: usize| {
        let mut o: Vec<usize> = (0..len).collect();
        o.sort_by(|&i, &j| p[i * w].total_cmp(&p[j * w]).then(i.cmp(&j)));
        o
    };
    let plan = simplex::solve(n, m, &cost, &order(&pa, n), &order(&pb, m));
    let terms: Vec<f64> = plan
        .cells
        .iter()
        .map(|&(i, j, mass)| mass * cost(i, j))
        .collect();
    Ok(sorted_sum(terms).max(0.0).sqrt())
}

/// Exhaustive minimum over all `n!` matchings (tiny instances only).
pub fn w2_brute_force<T: Real>(a: &Ensemble<T>, b: &Ensemble<T>) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.len();
    if n != b.len() {
        return Err(Error::UnequalCounts { n, m: b.len() });
    }
    if n > 10 {
        return Err(Error::TooLarge { n, m: n, cap: 100 });
    }
    let c = CostMatrix::new(a, b)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_perm = perm.clone();
    let total = |p: &[usize]| (0..n).map(|i| c.get(i, p[i])).sum::<f64>();
    let mut best = total(&perm);
    // Heap's algorithm.
    let mut stack = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            let t = total(&perm);
            if t < best {
                best = t;
                best_perm.copy_from_slice(&perm);
            }
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    let matched: Vec<f64> = (0..n).map(|i| c.get(i, best_perm[i])).collect();
    Ok((sorted_sum(matched) / n as f64).sqrt())
}

/// Empirical-to-law distance estimated against fresh reference samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceDistance {
    /// Mean of W2 over replicates.
    pub mean: f64,
    pub std_err: f64,
    /// Mean of squared W2 over replicates.
    pub mean_sq: f64,
    pub std_err_sq: f64,
    pub replicates: usize,
}

/// Mean and standard error of a sample.
pub(crate) fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Averages W2 between `a` and `replicates` fresh draws of `n_ref` reference
/// points; replicate `r` uses stream `(seed, r)`.
pub fn w2_to_reference<T: Real>(
    a: &Ensemble<T>,
    ref_sampler: &(dyn Fn(usize, StreamKey) -> Result<Ensemble<T>> + Sync),
    n_ref: usize,
    replicates: usize,
    seed: u64,
) -> Result<ReferenceDistance> {
    if replicates == 0 || n_ref == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replicate and reference point".into(),
        ));
    }
    let sq: Vec<Result<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let reference = ref_sampler(n_ref, StreamKey::new(seed, r as u64))?;
            if n_ref == a.len() {
                w2_sq_empirical(a, &reference)
            } else {
                w2_empirical_general(a, &reference).map(|v| v * v)
            }
        })
        .collect();
    let sq = sq.into_iter().collect::<Result<Vec<f64>>>()?;
    let w: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
    let (mean, std_err) = mean_se(&w);
    let (mean_sq, std_err_sq) = mean_se(&sq);
    Ok(ReferenceDistance {
        mean,
        std_err,
        mean_sq,
        std_err_sq,
        replicates,
    })
}
