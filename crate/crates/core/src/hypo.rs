//! Hypocoercive L² decay: the constants `(M, eps)`, the time-dependent weight
//! `G_t`, the dissipation matrix `R_t`, and Monte Carlo estimates of the
//! modified functional `N_t = |f_t|^2 + mu(<G_t grad f_t, grad f_t>)`.
//!
//! Naming note: here `delta1` is the *smallest* eigenvalue of `sigma sigma^T`,
//! whereas [`DiffusionSpec::delta1`] is the largest.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DiffusionSpec, DriftSpec, Ensemble};
use crate::rng::StreamKey;
use crate::scalar::Real;
use crate::sde::{check_finite, record_steps, IntegratorConfig, Scheme, Stepper};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HypoConstants {
    pub k_b: f64,
    /// Smallest eigenvalue of `sigma sigma^T`.
    pub delta1: f64,
    pub m: f64,
    pub eps: f64,
    pub c_pi: f64,
}

/// `M = 2(2K_b+1)^2 + (2K_b+1)`, `eps = delta1 / (M + 1/2)`.
pub fn build_constants(k_b: f64, delta1: f64, c_pi: f64) -> Result<HypoConstants> {
    if !(k_b >= 0.0) || !(delta1 > 0.0) || !(c_pi > 0.0) {
        return Err(Error::InvalidParameter(
            "need K_b >= 0, delta1 > 0 and C_PI > 0".into(),
        ));
    }
    let k = 2.0 * k_b + 1.0;
    let m = 2.0 * k * k + k;
    Ok(HypoConstants {
        k_b,
        delta1,
        m,
        eps: delta1 / (m + 0.5),
        c_pi,
    })
}

impl HypoConstants {
    /// Coefficient of `|y|^2` in the `R_t` bound, `eps M - delta1 = -delta1 / (2M + 1)`.
    pub fn velocity_coefficient(&self) -> f64 {
        self.eps * self.m - self.delta1
    }

    /// `eps / (2 C_PI + 4 eps)`.
    pub fn decay_coefficient(&self) -> f64 {
        self.eps / (2.0 * self.c_pi + 4.0 * self.eps)
    }

    /// `exp(-eps / (2 C_PI + 4 eps) * int_0^t alpha^2)`.
    pub fn decay_bound(&self, t: f64) -> f64 {
        (-self.decay_coefficient() * alpha_sq_integral(t)).exp()
    }
}

/// `alpha(t) = 1 - e^{-t/3}`.
pub fn alpha(t: f64) -> f64 {
    -(-t / 3.0).exp_m1()
}

pub fn alpha_dot(t: f64) -> f64 {
    (-t / 3.0).exp() / 3.0
}

/// `int_0^t alpha(s)^2 ds = t - 6(1 - e^{-t/3}) + 3/2 (1 - e^{-2t/3})`.
pub fn alpha_sq_integral(t: f64) -> f64 {
    t + 6.0 * (-t / 3.0).exp_m1() - 1.5 * (-2.0 * t / 3.0).exp_m1()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypoWeight {
    pub t: f64,
    pub alpha: f64,
    pub alpha_dot: f64,
    /// `eps [[a^3 I, -a^2 I], [-a^2 I, a I]]`.
    pub g: DMatrix<f64>,
    /// `eps [[3a^2 a' I, -2a a' I], [-2a a' I, a' I]]`.
    pub g_dot: DMatrix<f64>,
}

fn block_matrix(d: usize, xx: f64, xy: f64, yy: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        m[(i, i)] = xx;
        m[(i, d + i)] = xy;
        m[(d + i, i)] = xy;
        m[(d + i, d + i)] = yy;
    }
    m
}

pub fn build_weight(consts: &HypoConstants, d: usize, t: f64) -> Result<HypoWeight> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter("time must be non-negative".into()));
    }
    let (a, ad, e) = (alpha(t), alpha_dot(t), consts.eps);
    Ok(HypoWeight {
        t,
        alpha: a,
        alpha_dot: ad,
        g: block_matrix(d, e * a * a * a, -e * a * a, e * a),
        g_dot: block_matrix(d, 3.0 * e * a * a * ad, -2.0 * e * a * ad, e * ad),
    })
}

/// `R_t = -diag(0, sigma sigma^T) + dG/dt + 2 G_t J` with
/// `J = [[0, (d_x b)^T], [I, (d_y b)^T]]`, i.e. the matrix acting on the
/// gradient in `d/dt grad f_t = L grad f_t + J grad f_t`.
pub fn dissipation_matrix(
    weight: &HypoWeight,
    sigma_sq: &DMatrix<f64>,
    jx: &DMatrix<f64>,
    jy: &DMatrix<f64>,
) -> DMatrix<f64> {
    let d = jx.nrows();
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for r in 0..d {
        j[(d + r, r)] = 1.0;
        for c in 0..d {
            j[(r, d + c)] = jx[(c, r)];
            j[(d + r, d + c)] = jy[(c, r)];
        }
    }
    let mut out = &weight.g_dot + &weight.g * &j * 2.0;
    for r in 0..d {
        for c in 0..d {
            out[(d + r, d + c)] -= sigma_sq[(r, c)];
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RtRow {
    pub t: f64,
    pub alpha: f64,
    /// Smallest `(bound - <R_t w, w>) / |w|^2` over sampled directions and states.
    pub worst_margin: f64,
    /// Same margin minimized exactly over directions (eigenvalue bound).
    pub eigen_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RtReport {
    pub constants: HypoConstants,
    pub jacobian_norms: (f64, f64),
    pub rows: Vec<RtRow>,
    pub holds: bool,
}

/// Checks `<R_t w, w> <= -(eps a^2 / 2)|w_x|^2 + (eps M - delta1)|w_y|^2` on
/// `z_trials` random directions per grid time, at a few sampled states.
/// Fails with `KbUnderdeclared` when probed Jacobian blocks exceed `consts.k_b`.
pub fn check_rt_negativity<T: Real>(
    spec: &DriftSpec<T>,
    consts: &HypoConstants,
    diff: &DiffusionSpec<T>,
    t_grid: &[f64],
    z_trials: usize,
    seed: u64,
) -> Result<RtReport> {
    let d = spec.dim();
    if diff.dim() != d {
        return Err(Error::DimensionMismatch(
            "diffusion and drift dimensions".into(),
        ));
    }
    let (wx, wy) = spec.probe_jacobian_norms(4096, 10.0, seed);
    let (wx, wy) = (wx.as_f64(), wy.as_f64());
    let observed = wx.max(wy);
    if observed > consts.k_b * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::KbUnderdeclared {
            declared: consts.k_b,
            observed,
        });
    }
    let sigma_sq = diff.sigma_sq().map(|v| v.as_f64());
    let mut rng = StreamKey::new(seed, 0x47).rng();
    let mut states: Vec<Vec<T>> = vec![vec![T::zero(); 2 * d]];
    for _ in 0..if spec.is_linear() && spec.interaction().is_none() {
        0
    } else {
        15
    } {
        states.push(rng.in_ball(2 * d, 10.0).into_iter().map(T::lit).collect());
    }
    let jacobians: Vec<(DMatrix<f64>, DMatrix<f64>)> = states
        .iter()
        .map(|z| {
            let field = spec.point_field(z);
            let mut jx = DMatrix::zeros(d, d);
            let mut jy = DMatrix::zeros(d, d);
            spec.jacobian_into(z, field.as_ref(), &mut jx, &mut jy);
            (jx.map(|v| v.as_f64()), jy.map(|v| v.as_f64()))
        })
        .collect();
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut holds = true;
    for &t in t_grid {
        let w = build_weight(consts, d, t)?;
        let bound = block_matrix(
            d,
            -consts.eps * w.alpha * w.alpha / 2.0,
            0.0,
            consts.velocity_coefficient(),
        );
        let mut worst = f64::INFINITY;
        let mut eigen = f64::INFINITY;
        for (jx, jy) in &jacobians {
            let r = dissipation_matrix(&w, &sigma_sq, jx, jy);
            let sym = (&r + r.transpose()) * 0.5;
            let gap = &bound - &sym;
            eigen = eigen.min(gap.clone().symmetric_eigenvalues().min());
            for _ in 0..z_trials {
                let u = nalgebra::DVector::from_vec(rng.unit_vector(2 * d));
                worst = worst.min(u.dot(&(&gap * &u)));
            }
        }
        // Round-off allowance relative to the entries involved.
        let tol = 1e-12 * (1.0 + consts.m * consts.eps + consts.delta1);
        holds &= worst >= -tol;
        rows.push(RtRow {
            t,
            alpha: w.alpha,
            worst_margin: worst,
            eigen_margin: eigen,
        });
    }
    Ok(RtReport {
        constants: *consts,
        jacobian_norms: (wx, wy),
        rows,
        holds,
    })
}

/// Smooth test functions with analytic gradients.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    /// `<v, z>`.
    Linear { v: Vec<f64> },
    /// `<z, Q z>` with symmetric `Q`.
    Quadratic { q: DMatrix<f64> },
    /// `tanh(<v, z>)`.
    BoundedSmooth { v: Vec<f64> },
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Linear { v } | TestFunction::BoundedSmooth { v } => v.len(),
            TestFunction::Quadratic { q } => q.nrows(),
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            TestFunction::Linear { v } => dot(v, z),
            TestFunction::BoundedSmooth { v } => dot(v, z).tanh(),
            TestFunction::Quadratic { q } => {
                let mut s = 0.0;
                for i in 0..z.len() {
                    for j in 0..z.len() {
                        s += z[i] * q[(i, j)] * z[j];
                    }
                }
                s
            }
        }
    }

    pub fn gradient(&self, z: &[f64], out: &mut [f64]) {
        match self {
            TestFunction::Linear { v } => out.copy_from_slice(v),
            TestFunction::BoundedSmooth { v } => {
                let th = dot(v, z).tanh();
                for (o, vi) in out.iter_mut().zip(v) {
                    *o = (1.0 - th * th) * vi;
                }
            }
            TestFunction::Quadratic { q } => {
                for i in 0..z.len() {
                    let mut s = 0.0;
                    for j in 0..z.len() {
                        s += (q[(i, j)] + q[(j, i)]) * z[j];
                    }
                    out[i] = s;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Monte Carlo budget: `outer` stationary points times `inner` replicas each.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypoMc {
    pub outer: usize,
    pub inner: usize,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

impl Default for HypoMc {
    fn default() -> Self {
        Self {
            outer: 256,
            inner: 1024,
            dt: 0.01,
            scheme: Scheme::KineticSplitting,
            seed: 0,
        }
    }
}

/// `(E f(Z_t^z), E D_t^T grad f(Z_t^z))` from each half of the inner replicas,
/// at each recorded step.
struct HalfMeans {
    f: [Vec<f64>; 2],
    grad: [Vec<Vec<f64>>; 2],
}

fn inner_means<T: Real>(
    stepper: &Stepper<'_, T>,
    f: &TestFunction,
    z0: &[T],
    ks: &[usize],
    inner: usize,
    key: StreamKey,
    dt: T,
) -> Result<HalfMeans> {
    let w = z0.len();
    let mut out = HalfMeans {
        f: [vec![0.0; ks.len()], vec![0.0; ks.len()]],
        grad: [vec![vec![0.0; w]; ks.len()], vec![vec![0.0; w]; ks.len()]],
    };
    let last = *ks.last().unwrap();
    let mut s = stepper.scratch();
    let mut zf = vec![0.0; w];
    let mut gf = vec![0.0; w];
    for k in 0..inner {
        let h = usize::from(k >= inner / 2);
        let key = key.child(k as u64);
        let mut z = z0.to_vec();
        let mut dm = DMatrix::<T>::identity(w, w);
        let mut next = 0;
        for step in 0..=last {
            while next < ks.len() && ks[next] == step {
                for (a, b) in zf.iter_mut().zip(&z) {
                    *a = b.as_f64();
                }
                out.f[h][next] += f.value(&zf);
                f.gradient(&zf, &mut gf);
                // grad (f o Z_t)(z0) = D_t^T grad f(Z_t).
                for c in 0..w {
                    let mut acc = 0.0;
                    for r in 0..w {
                        acc += dm[(r, c)].as_f64() * gf[r];
                    }
                    out.grad[h][next][c] += acc;
                }
                next += 1;
            }
            if step == last {
                break;
            }
            key.normals_at(step as u64, &mut s.xi);
            stepper.step_tangent(&mut z, &mut dm, None, &mut s);
            check_finite(&z, step + 1, dt)?;
        }
    }
    let halves = [(inner / 2) as f64, (inner - inner / 2) as f64];
    for h in 0..2 {
        for i in 0..ks.len() {
            out.f[h][i] /= halves[h];
            out.grad[h][i].iter_mut().for_each(|g| *g /= halves[h]);
        }
    }
    Ok(out)
}

/// Estimate of `N_t` and its parts, with standard errors over the outer sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypoFunctional {
    pub t: f64,
    /// `|f_t|^2_{L^2(mu)}`.
    pub l2: f64,
    pub l2_se: f64,
    /// `mu(<G_t grad f_t, grad f_t>)`.
    pub weighted: f64,
    pub weighted_se: f64,
    pub value: f64,
    pub value_se: f64,
    /// `mu(|grad f_t|^2)`.
    pub grad_sq: f64,
    pub grad_sq_se: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    crate::transport::mean_se(v)
}

/// Estimates `N_t` at each of `times` (non-decreasing) for the drift without
/// interaction. `f_t(z) = E f(Z_t^z) - mu(f)` and `grad f_t(z) = E D_t^T grad f(Z_t^z)`
/// use `inner` tangent-flow replicas per outer point. Squares are estimated
/// without bias as products of the two half-sample means.
pub fn eval_functional<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    consts: &HypoConstants,
    stationary: &Ensemble<T>,
    f: &TestFunction,
    times: &[f64],
    mc: &HypoMc,
) -> Result<Vec<HypoFunctional>> {
    let d = spec.dim();
    if stationary.dim() != d || f.dim() != 2 * d {
        return Err(Error::DimensionMismatch(
            "stationary ensemble or test function".into(),
        ));
    }
    if mc.inner < 2 || mc.outer == 0 || stationary.is_empty() {
        return Err(Error::InvalidParameter(
            "need inner >= 2 and a non-empty outer sample".into(),
        ));
    }
    if times.is_empty() {
        return Err(Error::InvalidParameter("no evaluation times".into()));
    }
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let cfg = IntegratorConfig::new(mc.scheme, T::lit(mc.dt), T::lit(t_end.max(mc.dt)), mc.seed)?;
    cfg.check_step(spec.k_b())?;
    let ks = record_steps(&cfg, &times.iter().map(|&t| T::lit(t)).collect::<Vec<_>>())?;
    let stepper = Stepper::new(spec, diff, mc.scheme, cfg.dt)?;
    spec.field(None)?;

    let mean_f = stationary
        .points()
        .map(|z| f.value(&z.iter().map(|v| v.as_f64()).collect::<Vec<_>>()))
        .sum::<f64>()
        / stationary.len() as f64;
    let outer = stationary.stride_subsample(mc.outer);
    let weights: Vec<HypoWeight> = times
        .iter()
        .map(|&t| build_weight(consts, d, t))
        .collect::<Result<_>>()?;

    let per_point: Vec<Result<Vec<[f64; 3]>>> = (0..outer.len())
        .into_par_iter()
        .map(|j| {
            let hm = inner_means(
                &stepper,
                f,
                outer.point(j),
                &ks,
                mc.inner,
                StreamKey::new(mc.seed, j as u64),
                cfg.dt,
            )?;
            Ok((0..times.len())
                .map(|i| {
                    let l2 = (hm.f[0][i] - mean_f) * (hm.f[1][i] - mean_f);
                    let (g0, g1) = (&hm.grad[0][i], &hm.grad[1][i]);
                    let gw = &weights[i].g;
                    let mut wsum = 0.0;
                    for r in 0..2 * d {
                        for c in 0..2 * d {
                            wsum += g0[r] * gw[(r, c)] * g1[c];
                        }
                    }
                    [l2, wsum, dot(g0, g1)]
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::with_capacity(per_point.len());
    for r in per_point {
        rows.push(r?);
    }
    Ok((0..times.len())
        .map(|i| {
            let col = |k: usize| rows.iter().map(|r| r[i][k]).collect::<Vec<_>>();
            let (l2, l2_se) = mean_se(&col(0));
            let (weighted, weighted_se) = mean_se(&col(1));
            let total: Vec<f64> = rows.iter().map(|r| r[i][0] + r[i][1]).collect();
            let (value, value_se) = mean_se(&total);
            let (grad_sq, grad_sq_se) = mean_se(&col(2));
            HypoFunctional {
                t: times[i],
                l2,
                l2_se,
                weighted,
                weighted_se,
                value,
                value_se,
                grad_sq,
                grad_sq_se,
            }
        })
        .collect())
}

/// `(f_t(z) + mu(f), grad f_t(z))` at one point with standard errors of the
/// value, from `inner` tangent-flow replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSemigroup {
    pub value: f64,
    pub value_se: f64,
    pub gradient: Vec<f64>,
    pub gradient_se: Vec<f64>,
}

fn point_samples<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    f: &TestFunction,
    z: &[f64],
    t: f64,
    mc: &HypoMc,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let cfg = IntegratorConfig::new(mc.scheme, T::lit(mc.dt), T::lit(t.max(mc.dt)), mc.seed)?;
    cfg.check_step(spec.k_b())?;
    let ks = record_steps(&cfg, &[T::lit(t)])?;
    let stepper = Stepper::new(spec, diff, mc.scheme, cfg.dt)?;
    let z0: Vec<T> = z.iter().map(|&v| T::lit(v)).collect();
    let key = StreamKey::new(mc.seed, u64::MAX);
    let res: Vec<Result<(f64, Vec<f64>)>> = (0..mc.inner)
        .into_par_iter()
        .map(|k| {
            let hm = inner_means(&stepper, f, &z0, &ks, 2, key.child(k as u64), cfg.dt)?;
            let v = 0.5 * (hm.f[0][0] + hm.f[1][0]);
            let g = hm.grad[0][0]
                .iter()
                .zip(&hm.grad[1][0])
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            Ok((v, g))
        })
        .collect();
    let mut vals = Vec::with_capacity(mc.inner);
    let mut grads = Vec::with_capacity(mc.inner);
    for r in res {
        let (v, g) = r?;
        vals.push(v);
        grads.push(g);
    }
    Ok((vals, grads))
}

/// Semigroup value and pathwise gradient at one point.
pub fn semigroup_at<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    f: &TestFunction,
    z: &[f64],
    t: f64,
    mc: &HypoMc,
) -> Result<PointSemigroup> {
    let (vals, grads) = point_samples(spec, diff, f, z, t, mc)?;
    let (value, value_se) = mean_se(&vals);
    let w = z.len();
    let mut gradient = Vec::with_capacity(w);
    let mut gradient_se = Vec::with_capacity(w);
    for c in 0..w {
        let (m, s) = mean_se(&grads.iter().map(|g| g[c]).collect::<Vec<_>>());
        gradient.push(m);
        gradient_se.push(s);
    }
    Ok(PointSemigroup {
        value,
        value_se,
        gradient,
        gradient_se,
    })
}

/// Central finite-difference gradient of `z -> E f(Z_t^z)` with common random
/// numbers; a validation fallback for the pathwise gradient.
pub fn semigroup_gradient_fd<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    f: &TestFunction,
    z: &[f64],
    t: f64,
    h: f64,
    mc: &HypoMc,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(z.len());
    for c in 0..z.len() {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[c] += h;
        zm[c] -= h;
        let (vp, _) = point_samples(spec, diff, f, &zp, t, mc)?;
        let (vm, _) = point_samples(spec, diff, f, &zm, t, mc)?;
        let diff_mean = vp.iter().zip(&vm).map(|(a, b)| a - b).sum::<f64>() / vp.len() as f64;
        out.push(diff_mean / (2.0 * h));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_match_plug_in_values() {
        let c = build_constants(0.0, 1.0, 1.0).unwrap();
        assert_eq!(c.m, 3.0);
        assert!((c.eps - 2.0 / 7.0).abs() < 1e-15);
        let c = build_constants(0.5, 1.0, 1.0).unwrap();
        assert_eq!(c.m, 10.0);
        assert!((c.eps - 1.0 / 10.5).abs() < 1e-15);
        assert!(build_constants(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn alpha_integral_matches_quadrature() {
        for t in [0.0, 0.3, 1.0, 4.0, 17.0] {
            let n = 200_000;
            let h = t / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                let a = alpha((i as f64 + 0.5) * h);
                s += a * a * h;
            }
            assert!(
                (alpha_sq_integral(t) - s).abs() < 1e-8 * (1.0 + s),
                "t = {t}"
            );
        }
    }

    #[test]
    fn weight_at_zero_vanishes() {
        let c = build_constants(1.0, 2.0, 1.0).unwrap();
        let w = build_weight(&c, 2, 0.0).unwrap();
        assert_eq!(w.g, DMatrix::zeros(4, 4));
        assert!((w.alpha_dot - 1.0 / 3.0).abs() < 1e-15);
        let w3 = build_weight(&c, 1, 3.0).unwrap();
        assert!((w3.alpha - 0.632_120_558_828_557_7).abs() < 1e-15);
    }

    #[test]
    fn dissipation_matrix_matches_expanded_blocks() {
        // Entries of -diag(0, s2) + dG/dt + 2 G J expanded by hand for d = 1.
        // The velocity block carries the factor 2 from 2 G J on both b terms.
        let c = build_constants(1.0, 1.5, 1.0).unwrap();
        let w = build_weight(&c, 1, 1.7).unwrap();
        let (bx, by, s2) = (-0.8, -1.3, 1.5);
        let r = dissipation_matrix(
            &w,
            &DMatrix::from_element(1, 1, s2),
            &DMatrix::from_element(1, 1, bx),
            &DMatrix::from_element(1, 1, by),
        );
        let (a, ad, e) = (w.alpha, w.alpha_dot, c.eps);
        let expect = [
            e * (3.0 * ad - 2.0) * a * a,
            e * (2.0 * a.powi(3) * bx - 2.0 * a * a * by - 2.0 * a * ad),
            e * 2.0 * a * (1.0 - ad),
            -s2 + e * ad - 2.0 * e * a * a * bx + 2.0 * e * a * by,
        ];
        let got = [r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]];
        for (g, x) in got.iter().zip(expect) {
            assert!((g - x).abs() < 1e-14, "{got:?} vs {expect:?}");
        }
    }
}
