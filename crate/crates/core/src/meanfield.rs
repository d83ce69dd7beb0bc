//! McKean-Vlasov equations through particles: the N-particle system, the
//! frozen-measure map `Phi`, its Picard fixed point and propagation-of-chaos scans.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::GaussianLaw;
use crate::model::{DiffusionSpec, DriftSpec, Ensemble, MeanField};
use crate::rng::{mix64, StreamKey};
use crate::scalar::Real;
use crate::sde::{
    check_finite, record_steps, simulate, EnsemblePath, IntegratorConfig, Scheme, Stepper,
};
use crate::transport::{mean_se, w2_empirical, w2_empirical_general, w2_sq_empirical};

/// Empirical-measure rate `R_d(N)`.
pub fn rd(d: usize, n: usize) -> f64 {
    let nf = n as f64;
    match d {
        0 | 1 => nf.powf(-0.5),
        2 => nf.powf(-0.5) * (1.0 + nf).ln(),
        _ => nf.powf(-2.0 / d as f64),
    }
}

/// Horizon `10 / theta` used for relaxation and burn-in.
pub fn relaxation_time(theta: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "relaxation needs a positive rate, got {theta}"
        )));
    }
    Ok(10.0 / theta)
}

/// Simulates the N-particle system: particle `i` draws from stream `(seed, i)`
/// and every drift evaluation sees the current empirical measure of all particles.
pub fn simulate_particles<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    init: &Ensemble<T>,
    cfg: &IntegratorConfig<T>,
    record: &[T],
) -> Result<EnsemblePath<T>> {
    let streams: Vec<u64> = (0..init.len() as u64).collect();
    simulate_particles_with_streams(spec, diff, init, cfg, record, &streams)
}

/// As [`simulate_particles`], with particle `i` drawing from stream `(seed, streams[i])`.
pub fn simulate_particles_with_streams<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    init: &Ensemble<T>,
    cfg: &IntegratorConfig<T>,
    record: &[T],
    streams: &[u64],
) -> Result<EnsemblePath<T>> {
    if init.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(
            "initial particle dimension".into(),
        ));
    }
    if streams.len() != init.len() {
        return Err(Error::InvalidParameter("one stream id per particle".into()));
    }
    let warning = cfg.check_step(spec.k_b())?;
    let stepper = Stepper::new(spec, diff, cfg.scheme, cfg.dt)?;
    let ks = record_steps(cfg, record)?;
    let last = *ks.last().unwrap();
    let w = init.phase_dim();
    let d = init.dim();
    let mut state = init.as_slice().to_vec();
    let mut snapshots = Vec::with_capacity(ks.len());
    let keys: Vec<StreamKey> = streams
        .iter()
        .map(|&s| StreamKey::new(cfg.seed, s))
        .collect();
    let field_of = |state: &[T]| -> Option<MeanField<T>> {
        spec.interaction()
            .map(|i| i.summarize(d, state.chunks_exact(w)))
    };

    let mut next = 0;
    for step in 0..=last {
        while next < ks.len() && ks[next] == step {
            snapshots.push(Ensemble::new(d, state.clone())?);
            next += 1;
        }
        if step == last {
            break;
        }
        let field = field_of(&state);
        state.par_chunks_mut(w).zip(keys.par_iter()).for_each_init(
            || stepper.scratch(),
            |s, (z, key)| {
                stepper.pre(z, field.as_ref(), s);
                key.normals_at(step as u64, &mut s.xi);
                stepper.mid(z, s);
            },
        );
        // The closing kick sees the measure after free flight and noise.
        let field = if cfg.scheme == Scheme::KineticSplitting {
            field_of(&state)
        } else {
            field
        };
        let bad: Vec<Result<()>> = state
            .par_chunks_mut(w)
            .with_min_len(256)
            .map_init(
                || stepper.scratch(),
                |s, z| {
                    stepper.post(z, field.as_ref(), s);
                    check_finite(z, step + 1, cfg.dt)
                },
            )
            .collect();
        for r in bad {
            r?;
        }
    }
    Ok(EnsemblePath {
        times: ks
            .iter()
            .map(|&k| T::from_usize(k).unwrap() * cfg.dt)
            .collect(),
        snapshots,
        warnings: warning.into_iter().collect(),
    })
}

/// `n` points taken cyclically from `mu`.
fn cycled<T: Real>(mu: &Ensemble<T>, n: usize) -> Result<Ensemble<T>> {
    if mu.is_empty() {
        return Err(Error::InvalidParameter("empty measure".into()));
    }
    let idx: Vec<usize> = (0..n).map(|i| i % mu.len()).collect();
    mu.select(&idx)
}

/// Approximates `Phi(mu)`, the invariant law of the SDE with measure frozen at
/// `mu`, by the terminal ensemble of `n_inner` copies started from the points of
/// `mu` (cycled) and run for `relax_t`.
///
/// Copy `i` uses stream `(cfg.seed, i)`, so repeated calls share their noise.
pub fn frozen_stationary<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    mu: &Ensemble<T>,
    relax_t: T,
    n_inner: usize,
    cfg: &IntegratorConfig<T>,
) -> Result<Ensemble<T>> {
    if n_inner == 0 {
        return Err(Error::InvalidParameter("n_inner must be positive".into()));
    }
    if !(relax_t >= cfg.dt) {
        return Err(Error::InvalidParameter(
            "relaxation time shorter than one step".into(),
        ));
    }
    let init = cycled(mu, n_inner)?;
    let cfg = cfg.clone().with_t_end(relax_t);
    let frozen = spec.interaction().map(|_| mu);
    let mut path = simulate(spec, diff, &init, &cfg, frozen, &[])?;
    Ok(path.snapshots.pop().unwrap())
}

fn w2_any<T: Real>(a: &Ensemble<T>, b: &Ensemble<T>) -> Result<f64> {
    if a.len() == b.len() {
        w2_empirical(a, b)
    } else {
        w2_empirical_general(a, b)
    }
}

/// Settings of one evaluation of `Phi`.
#[derive(Clone, Debug)]
pub struct PicardConfig<T> {
    pub relax_t: T,
    pub n_inner: usize,
    pub integrator: IntegratorConfig<T>,
}

#[derive(Clone, Debug)]
pub struct FixedPointState<T> {
    pub mu: Ensemble<T>,
    /// Number of applications of `Phi`.
    pub k: usize,
    /// `W2(mu_{k-1}, mu_k)`; infinite before the first iteration.
    pub w2_gap: f64,
    pub history: Vec<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl<T> FixedPointState<T> {
    /// Ratios of successive gaps.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.history.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Picard iteration `mu_{k+1} = Phi(mu_k)` until the W2 gap drops below `tol`.
///
/// Every evaluation of `Phi` reuses the same noise, so the gaps measure the map
/// itself rather than sampling noise.
pub fn picard_fixed_point<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    mu0: &Ensemble<T>,
    tol: f64,
    max_iter: usize,
    inner: &PicardConfig<T>,
) -> Result<FixedPointState<T>> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter(
            "need tol > 0 and max_iter >= 1".into(),
        ));
    }
    let mut state = FixedPointState {
        mu: mu0.clone(),
        k: 0,
        w2_gap: f64::INFINITY,
        history: Vec::new(),
        converged: false,
        warnings: Vec::new(),
    };
    let mut rises = 0;
    while state.k < max_iter {
        let next = frozen_stationary(
            spec,
            diff,
            &state.mu,
            inner.relax_t,
            inner.n_inner,
            &inner.integrator,
        )?;
        let gap = w2_any(&state.mu, &next)?;
        if let Some(&prev) = state.history.last() {
            if gap > prev {
                rises += 1;
                state.warnings.push(format!(
                    "gap rose from {prev:.3e} to {gap:.3e} at iteration {}",
                    state.k + 1
                ));
            } else {
                rises = 0;
            }
        }
        state.history.push(gap);
        state.mu = next;
        state.k += 1;
        state.w2_gap = gap;
        if rises >= 3 {
            return Err(Error::NonContraction {
                history: state.history,
            });
        }
        if gap < tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// Law the particle marginals are compared with.
#[derive(Clone, Debug)]
pub enum ChaosReference<T> {
    Gaussian(GaussianLaw<T>),
    /// Samples of the stationary law, e.g. a Picard fixed point.
    Samples(Ensemble<T>),
}

impl<T: Real> ChaosReference<T> {
    pub fn dim(&self) -> usize {
        match self {
            ChaosReference::Gaussian(g) => g.dim() / 2,
            ChaosReference::Samples(e) => e.dim(),
        }
    }

    /// `n` points drawn from the reference; sample references draw without replacement.
    pub fn draw(&self, n: usize, key: StreamKey) -> Result<Ensemble<T>> {
        match self {
            ChaosReference::Gaussian(g) => g.sample(n, key),
            ChaosReference::Samples(e) => {
                if n > e.len() {
                    return Err(Error::InvalidParameter(format!(
                        "reference has {} points, {n} requested",
                        e.len()
                    )));
                }
                let mut rng = key.rng();
                let mut idx: Vec<usize> = (0..e.len()).collect();
                for i in 0..n {
                    let j = i + rng.below(e.len() - i);
                    idx.swap(i, j);
                }
                idx.truncate(n);
                e.select(&idx)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChaosScanConfig<T> {
    pub n_values: Vec<usize>,
    /// Integrator; its horizon is the burn-in `T_stat`.
    pub integrator: IntegratorConfig<T>,
    pub replicates: usize,
    /// Snapshots taken over the second half of the burn-in for the stationarity test.
    pub stationarity_snapshots: usize,
    /// Relative moment drift accepted as stationary.
    pub stationarity_tol: f64,
}

impl<T: Real> ChaosScanConfig<T> {
    pub fn new(n_values: Vec<usize>, integrator: IntegratorConfig<T>, replicates: usize) -> Self {
        Self {
            n_values,
            integrator,
            replicates,
            stationarity_snapshots: 20,
            stationarity_tol: 0.02,
        }
    }
}

/// Outcome of the half-window moment comparison at one `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stationarity {
    /// `|m_1 - m_2| / |m_1|` for the pooled moment vectors of the two halves.
    pub rel_diff: f64,
    /// Replicate standard error of `rel_diff` (zero with one replicate).
    pub rel_noise: f64,
    pub stationary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosScanResult {
    pub dim: usize,
    pub n_values: Vec<usize>,
    pub mean_sq_w2: Vec<f64>,
    pub std_err: Vec<f64>,
    pub rd_pred: Vec<f64>,
    /// Least-squares slope of `ln mean_sq_w2` against `ln N` (needs two N values).
    pub slope: Option<f64>,
    pub stationarity: Vec<Stationarity>,
}

impl ChaosScanResult {
    /// CSV with columns `N, mean_sq_w2, stderr, rd_pred`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "N,mean_sq_w2,stderr,rd_pred")?;
        for i in 0..self.n_values.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.n_values[i], self.mean_sq_w2[i], self.std_err[i], self.rd_pred[i]
            )?;
        }
        Ok(())
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Means and second moments of an ensemble as one vector.
fn moment_vector<T: Real>(e: &Ensemble<T>) -> Vec<f64> {
    let w = e.phase_dim();
    let mut m = vec![0.0; w + w * (w + 1) / 2];
    for p in e.points() {
        let mut k = w;
        for i in 0..w {
            let pi = p[i].as_f64();
            m[i] += pi;
            for pj in &p[i..] {
                m[k] += pi * pj.as_f64();
                k += 1;
            }
        }
    }
    let n = e.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

struct Replicate {
    sq_w2: f64,
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Propagation-of-chaos scan: for each `N`, particles start from the reference
/// law, run for the burn-in, and the squared W2 between their empirical measure
/// and an independent `N`-point reference draw is averaged over replicates.
pub fn chaos_scan<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    reference: &ChaosReference<T>,
    cfg: &ChaosScanConfig<T>,
) -> Result<ChaosScanResult> {
    if cfg.n_values.is_empty() {
        return Err(Error::InvalidParameter("empty N list".into()));
    }
    if cfg.n_values[0] == 0 || cfg.n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "N values must be positive and strictly increasing".into(),
        ));
    }
    if cfg.replicates == 0 || cfg.stationarity_snapshots < 2 {
        return Err(Error::InvalidParameter(
            "need a replicate and at least two stationarity snapshots".into(),
        ));
    }
    if reference.dim() != spec.dim() {
        return Err(Error::DimensionMismatch("reference law dimension".into()));
    }
    let integ = &cfg.integrator;
    let t_end = integ.t_end.as_f64();
    let s = cfg.stationarity_snapshots;
    let record: Vec<T> = (0..s)
        .map(|j| T::lit(t_end * (0.5 + 0.5 * j as f64 / (s - 1) as f64)))
        .collect();
    let half = s / 2;
    let w = 2 * spec.dim();
    let moment_len = w + w * (w + 1) / 2;

    let mut out = ChaosScanResult {
        dim: spec.dim(),
        n_values: cfg.n_values.clone(),
        mean_sq_w2: Vec::new(),
        std_err: Vec::new(),
        rd_pred: Vec::new(),
        slope: None,
        stationarity: Vec::new(),
    };
    for &n in &cfg.n_values {
        let reps = (0..cfg.replicates)
            .map(|r| -> Result<Replicate> {
                let base = mix64(integ.seed ^ mix64(n as u64) ^ mix64(mix64(r as u64)));
                let init = reference.draw(n, StreamKey::new(base, 0))?;
                let run_cfg = integ.clone().with_seed(mix64(base ^ 1));
                let path = simulate_particles(spec, diff, &init, &run_cfg, &record)?;
                let pooled = |snaps: &[Ensemble<T>]| {
                    let mut acc = vec![0.0; moment_len];
                    for e in snaps {
                        let m = moment_vector(e);
                        acc.iter_mut()
                            .zip(&m)
                            .for_each(|(a, b)| *a += b / snaps.len() as f64);
                    }
                    acc
                };
                let first = pooled(&path.snapshots[..half]);
                let second = pooled(&path.snapshots[half..]);
                let last = path.snapshots.last().unwrap();
                let fresh = reference.draw(n, StreamKey::new(base, 1))?;
                Ok(Replicate {
                    sq_w2: w2_sq_empirical(last, &fresh)?,
                    first,
                    second,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sq: Vec<f64> = reps.iter().map(|r| r.sq_w2).collect();
        let (m, se) = mean_se(&sq);
        out.mean_sq_w2.push(m);
        out.std_err.push(se);
        out.rd_pred.push(rd(spec.dim(), n));
        out.stationarity
            .push(stationarity(&reps, cfg.stationarity_tol));
    }
    let lx: Vec<f64> = out.n_values.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = out.mean_sq_w2.iter().map(|v| v.ln()).collect();
    if lx.len() >= 2 {
        let slope = ols_slope(&lx, &ly);
        if !slope.is_finite() {
            return Err(Error::NonFinite("chaos-scan slope".into()));
        }
        out.slope = Some(slope);
    }
    Ok(out)
}

/// Stationary when the half-window drift is below `tol`, or within three
/// replicate standard errors of zero.
fn stationarity(reps: &[Replicate], tol: f64) -> Stationarity {
    let r = reps.len() as f64;
    let k = reps[0].first.len();
    let mut m1 = vec![0.0; k];
    let mut diff = vec![0.0; k];
    let mut var = vec![0.0; k];
    for rep in reps {
        for i in 0..k {
            m1[i] += rep.first[i] / r;
            diff[i] += (rep.first[i] - rep.second[i]) / r;
        }
    }
    if reps.len() > 1 {
        for rep in reps {
            for i in 0..k {
                let e = rep.first[i] - rep.second[i] - diff[i];
                var[i] += e * e / (r - 1.0);
            }
        }
    }
    let scale = norm(&m1).max(f64::MIN_POSITIVE);
    let rel_diff = norm(&diff) / scale;
    let rel_noise = (var.iter().sum::<f64>() / r).sqrt() / scale;
    Stationarity {
        rel_diff,
        rel_noise,
        stationary: rel_diff < tol || rel_diff < 3.0 * rel_noise,
    }
}
