//! Closed-form audit of the Talagrand inequality and of the entropy-W2 bound
//! that follows from log-Harnack, on Gaussian probe laws of a linear model.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::gaussian::{
    invariant_law, kl_gaussian, poincare_constant, transition_law, w2_gaussian, GaussianLaw,
    LinearModel,
};
use crate::rng::StreamKey;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TalagrandRow {
    pub w2_sq: f64,
    pub kl: f64,
    /// `4 C KL`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    /// Constant `C` in `W2^2 <= 4 C Ent`: the largest invariant covariance eigenvalue.
    pub c_talagrand: f64,
    pub rows: Vec<TalagrandRow>,
    pub violations: usize,
    /// Largest `W2^2 / (4 C KL)` over the probes (at most 1 when the inequality holds).
    pub max_talagrand_ratio: f64,
    pub t_probe: f64,
    /// `Ent(P_t nu | mu) / W2(nu, mu)^2` per probe (skipped when `nu = mu`).
    pub harnack_ratios: Vec<f64>,
    /// Largest ratio on the probe set.
    pub harnack_c1: f64,
    /// `c_1` after maximizing the ratio by compass search from the best probes.
    pub harnack_c1_fitted: f64,
}

/// Random Gaussian probes around the invariant law: mean `N(0, mean_scale^2 I)`,
/// covariance `L L^T` with `L = Sigma^{1/2} (I + E)`, `E` a random matrix of scale 0.3.
pub fn random_probes(
    model: &LinearModel<f64>,
    n: usize,
    mean_scale: f64,
    seed: u64,
) -> Result<Vec<GaussianLaw<f64>>> {
    probe_params(model, n, mean_scale, seed)?
        .iter()
        .map(|p| probe_law(model, p))
        .collect()
}

/// Probe coordinates `(mean, E)` flattened; see [`random_probes`].
fn probe_params(
    model: &LinearModel<f64>,
    n: usize,
    mean_scale: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let w = 2 * model.dim();
    Ok((0..n)
        .map(|i| {
            let mut rng = StreamKey::new(seed, i as u64).rng();
            let mut p: Vec<f64> = (0..w).map(|_| mean_scale * rng.normal()).collect();
            p.extend((0..w * w).map(|_| 0.3 * rng.normal()));
            p
        })
        .collect())
}

fn probe_law(model: &LinearModel<f64>, p: &[f64]) -> Result<GaussianLaw<f64>> {
    let law = invariant_law(model)?;
    let w = law.dim();
    let root = crate::gaussian::sqrtm_psd(law.cov());
    let mean = DVector::from_column_slice(&p[..w]);
    let e = DMatrix::from_column_slice(w, w, &p[w..]);
    let l = &root * (DMatrix::identity(w, w) + e);
    let cov = &l * l.transpose();
    GaussianLaw::new(mean, (&cov + cov.transpose()) * 0.5)
}

/// `Ent(P_t nu | mu) / W2(nu, mu)^2`, or `None` when `nu` is (numerically) `mu`.
fn harnack_ratio(
    model: &LinearModel<f64>,
    mu: &GaussianLaw<f64>,
    nu: &GaussianLaw<f64>,
    t: f64,
) -> Result<Option<f64>> {
    let w = w2_gaussian(nu, mu)?;
    if w * w <= 1e-10 {
        return Ok(None);
    }
    Ok(Some(
        kl_gaussian(&transition_law(model, nu, t)?, mu)? / (w * w),
    ))
}

/// Largest entropy-W2 ratio over probe laws, found by compass search on the
/// probe coordinates started from the `starts` best of `n` random probes.
pub fn fit_harnack_constant(
    model: &LinearModel<f64>,
    t_probe: f64,
    n: usize,
    starts: usize,
    seed: u64,
) -> Result<f64> {
    let mu = invariant_law(model)?;
    let eval = |p: &[f64]| -> f64 {
        // Singular or degenerate probes simply lose the comparison.
        match probe_law(model, p).and_then(|nu| harnack_ratio(model, &mu, &nu, t_probe)) {
            Ok(Some(r)) if r.is_finite() => r,
            _ => f64::NEG_INFINITY,
        }
    };
    let mut scored: Vec<(f64, Vec<f64>)> = probe_params(model, n, 1.0, seed)?
        .into_iter()
        .map(|p| (eval(&p), p))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = f64::NEG_INFINITY;
    for (mut f, mut p) in scored.into_iter().take(starts.max(1)) {
        let mut h = 0.25;
        let mut iters = 0;
        while h > 1e-5 && iters < 5000 {
            iters += 1;
            let mut improved = false;
            for i in 0..p.len() {
                for sign in [1.0, -1.0] {
                    p[i] += sign * h;
                    let g = eval(&p);
                    if g > f {
                        f = g;
                        improved = true;
                    } else {
                        p[i] -= sign * h;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best = best.max(f);
    }
    Ok(best)
}

/// Evaluates both inequalities on every probe, all sides in closed form.
/// `harnack_c1_fitted` is searched from 100 probes drawn with `seed`.
pub fn talagrand_harnack_audit(
    model: &LinearModel<f64>,
    t_probe: f64,
    probes: &[GaussianLaw<f64>],
    seed: u64,
) -> Result<AuditReport> {
    let mu = invariant_law(model)?;
    let c = poincare_constant(&mu);
    let mut rows = Vec::with_capacity(probes.len());
    let mut ratios = Vec::with_capacity(probes.len());
    for nu in probes {
        let w = w2_gaussian(nu, &mu)?;
        let kl = kl_gaussian(nu, &mu)?;
        let bound = 4.0 * c * kl;
        let w2_sq = w * w;
        // Round-off allowance for the identity probe.
        rows.push(TalagrandRow {
            w2_sq,
            kl,
            bound,
            holds: w2_sq <= bound + 1e-12,
        });
        if let Some(r) = harnack_ratio(model, &mu, nu, t_probe)? {
            ratios.push(r);
        }
    }
    let violations = rows.iter().filter(|r| !r.holds).count();
    let max_talagrand_ratio = rows
        .iter()
        .filter(|r| r.bound > 0.0)
        .map(|r| r.w2_sq / r.bound)
        .fold(0.0, f64::max);
    let harnack_c1 = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(AuditReport {
        c_talagrand: c,
        rows,
        violations,
        max_talagrand_ratio,
        t_probe,
        harnack_ratios: ratios,
        harnack_c1,
        harnack_c1_fitted: fit_harnack_constant(model, t_probe, 100, 5, seed)?,
    })
}
