//! Time stepping for `dX = Y dt, dY = b dt + sigma dW`: ensembles, synchronous
//! couplings and the tangent (variational) flow.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiffusionSpec, DriftSpec, Ensemble, MeanField, PhasePoint};
use crate::rng::StreamKey;
use crate::scalar::Real;

/// States with squared norm above this are treated as divergent.
const DIVERGENCE_CAP_SQ: f64 = 1e16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    KineticSplitting,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig<T> {
    pub scheme: Scheme,
    pub dt: T,
    pub t_end: T,
    pub seed: u64,
    /// Accept `dt > 0.1 / max(1, K_b)`; a warning is reported instead of an error.
    pub allow_large_step: bool,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn new(scheme: Scheme, dt: T, t_end: T, seed: u64) -> Result<Self> {
        if !(dt > T::zero()) || !(t_end > T::zero()) || dt > t_end {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt <= T, got dt = {}, T = {}",
                dt.as_f64(),
                t_end.as_f64()
            )));
        }
        Ok(Self {
            scheme,
            dt,
            t_end,
            seed,
            allow_large_step: false,
        })
    }

    pub fn with_large_step(mut self) -> Self {
        self.allow_large_step = true;
        self
    }

    pub fn with_t_end(mut self, t_end: T) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt)
            .round()
            .to_usize()
            .unwrap_or(0)
            .max(1)
    }

    /// Enforces the step-size cap; returns a warning when it is overridden.
    pub fn check_step(&self, k_b: T) -> Result<Option<String>> {
        let cap = T::lit(0.1) / k_b.max(T::one());
        if self.dt <= cap * (T::one() + T::lit(1e-12)) {
            return Ok(None);
        }
        let msg = format!(
            "dt = {} exceeds 0.1/max(1, K_b) = {}",
            self.dt.as_f64(),
            cap.as_f64()
        );
        if self.allow_large_step {
            Ok(Some(msg))
        } else {
            Err(Error::InvalidParameter(msg))
        }
    }

    /// Step index nearest to time `t`.
    pub fn step_of(&self, t: T) -> Result<usize> {
        if t < T::zero() {
            return Err(Error::InvalidParameter("negative record time".into()));
        }
        let k = (t / self.dt).round().to_usize().unwrap_or(usize::MAX);
        if k > self.steps() {
            return Err(Error::InvalidParameter(format!(
                "record time {} beyond horizon {}",
                t.as_f64(),
                self.t_end.as_f64()
            )));
        }
        Ok(k)
    }
}

/// One-step map of either scheme, split into the phases needed by particle systems.
pub(crate) struct Stepper<'a, T> {
    spec: &'a DriftSpec<T>,
    sigma: &'a DMatrix<T>,
    scheme: Scheme,
    pub(crate) d: usize,
    pub(crate) noise_dim: usize,
    h: T,
    half: T,
    decay: T,
    ou_scale: T,
    sqrt_h: T,
}

/// Scratch buffers for one trajectory.
pub(crate) struct Scratch<T> {
    pub(crate) xi: Vec<f64>,
    force: Vec<T>,
    jx: DMatrix<T>,
    jy: DMatrix<T>,
    tmp: DMatrix<T>,
}

impl<T: Real> Scratch<T> {
    pub(crate) fn new(d: usize, noise_dim: usize) -> Self {
        Self {
            xi: vec![0.0; noise_dim],
            force: vec![T::zero(); d],
            jx: DMatrix::zeros(d, d),
            jy: DMatrix::zeros(d, d),
            tmp: DMatrix::zeros(d, 2 * d),
        }
    }
}

impl<'a, T: Real> Stepper<'a, T> {
    pub(crate) fn new(
        spec: &'a DriftSpec<T>,
        diff: &'a DiffusionSpec<T>,
        scheme: Scheme,
        h: T,
    ) -> Result<Self> {
        let d = spec.dim();
        if diff.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "diffusion of dimension {} for drift of dimension {d}",
                diff.dim()
            )));
        }
        let g = spec.gamma();
        if !(g > T::zero()) {
            return Err(Error::InvalidParameter(
                "simulation needs positive friction".into(),
            ));
        }
        let decay = (-g * h).exp();
        let ou_scale = ((T::one() - (-T::lit(2.0) * g * h).exp()) / (T::lit(2.0) * g)).sqrt();
        Ok(Self {
            spec,
            sigma: diff.sigma(),
            scheme,
            d,
            noise_dim: diff.noise_dim(),
            h,
            half: h * T::lit(0.5),
            decay,
            ou_scale,
            sqrt_h: h.sqrt(),
        })
    }

    pub(crate) fn scratch(&self) -> Scratch<T> {
        Scratch::new(self.d, self.noise_dim)
    }

    #[inline]
    fn sigma_xi(&self, xi: &[f64], i: usize) -> T {
        let mut s = T::zero();
        for k in 0..self.noise_dim {
            s += self.sigma[(i, k)] * T::lit(xi[k]);
        }
        s
    }

    /// First phase: opening half-kick (splitting) or drift evaluation (Euler).
    #[inline]
    pub(crate) fn pre(&self, z: &mut [T], field: Option<&MeanField<T>>, s: &mut Scratch<T>) {
        let d = self.d;
        match self.scheme {
            Scheme::KineticSplitting => {
                self.spec.force_into(z, field, &mut s.force);
                for i in 0..d {
                    z[d + i] += self.half * s.force[i];
                }
            }
            Scheme::EulerMaruyama => self.spec.drift_into(z, field, &mut s.force),
        }
    }

    /// Second phase: free flight plus noise (uses `s.xi`).
    #[inline]
    pub(crate) fn mid(&self, z: &mut [T], s: &mut Scratch<T>) {
        let d = self.d;
        match self.scheme {
            Scheme::KineticSplitting => {
                for i in 0..d {
                    z[i] += self.h * z[d + i];
                }
                for i in 0..d {
                    let n = self.sigma_xi(&s.xi, i);
                    z[d + i] = self.decay * z[d + i] + self.ou_scale * n;
                }
            }
            Scheme::EulerMaruyama => {
                for i in 0..d {
                    z[i] += self.h * z[d + i];
                }
                for i in 0..d {
                    let n = self.sigma_xi(&s.xi, i);
                    z[d + i] += self.h * s.force[i] + self.sqrt_h * n;
                }
            }
        }
    }

    /// Final phase: closing half-kick (splitting only).
    #[inline]
    pub(crate) fn post(&self, z: &mut [T], field: Option<&MeanField<T>>, s: &mut Scratch<T>) {
        if self.scheme == Scheme::KineticSplitting {
            let d = self.d;
            self.spec.force_into(z, field, &mut s.force);
            for i in 0..d {
                z[d + i] += self.half * s.force[i];
            }
        }
    }

    /// Full step with a frozen field; noise must already be in `s.xi`.
    #[inline]
    pub(crate) fn step(&self, z: &mut [T], field: Option<&MeanField<T>>, s: &mut Scratch<T>) {
        self.pre(z, field, s);
        self.mid(z, s);
        self.post(z, field, s);
    }

    /// Left-multiplies `dm` by the Jacobian of the kick `y += c * force(z)`.
    fn kick_tangent(
        &self,
        z: &[T],
        field: Option<&MeanField<T>>,
        c: T,
        dm: &mut DMatrix<T>,
        s: &mut Scratch<T>,
    ) {
        let d = self.d;
        self.spec.jacobian_into(z, field, &mut s.jx, &mut s.jy);
        let g = self.spec.gamma();
        for i in 0..d {
            s.jy[(i, i)] += g;
        }
        self.add_jacobian_rows(dm, c, s);
    }

    /// `tmp = jx D_x + jy D_y` using the blocks in `s`.
    fn jacobian_rows(&self, dm: &DMatrix<T>, s: &mut Scratch<T>) {
        let d = self.d;
        for i in 0..d {
            for col in 0..2 * d {
                let mut acc = T::zero();
                for k in 0..d {
                    acc += s.jx[(i, k)] * dm[(k, col)] + s.jy[(i, k)] * dm[(d + k, col)];
                }
                s.tmp[(i, col)] = acc;
            }
        }
    }

    /// `D_y += c * (jx D_x + jy D_y)`.
    fn add_jacobian_rows(&self, dm: &mut DMatrix<T>, c: T, s: &mut Scratch<T>) {
        self.jacobian_rows(dm, s);
        let d = self.d;
        for i in 0..d {
            for col in 0..2 * d {
                dm[(d + i, col)] += c * s.tmp[(i, col)];
            }
        }
    }

    /// Full step of state and tangent matrix (exact derivative of the step map).
    pub(crate) fn step_tangent(
        &self,
        z: &mut [T],
        dm: &mut DMatrix<T>,
        field: Option<&MeanField<T>>,
        s: &mut Scratch<T>,
    ) {
        let d = self.d;
        let w = 2 * d;
        match self.scheme {
            Scheme::KineticSplitting => {
                self.kick_tangent(z, field, self.half, dm, s);
                self.pre(z, field, s);
                for i in 0..d {
                    for col in 0..w {
                        let v = dm[(d + i, col)];
                        dm[(i, col)] += self.h * v;
                    }
                }
                for i in 0..d {
                    for col in 0..w {
                        dm[(d + i, col)] *= self.decay;
                    }
                }
                self.mid(z, s);
                self.kick_tangent(z, field, self.half, dm, s);
                self.post(z, field, s);
            }
            Scheme::EulerMaruyama => {
                self.spec.jacobian_into(z, field, &mut s.jx, &mut s.jy);
                self.jacobian_rows(dm, s);
                for i in 0..d {
                    for col in 0..w {
                        let v = dm[(d + i, col)];
                        dm[(i, col)] += self.h * v;
                        dm[(d + i, col)] += self.h * s.tmp[(i, col)];
                    }
                }
                self.pre(z, field, s);
                self.mid(z, s);
            }
        }
    }
}

#[inline]
pub(crate) fn check_finite<T: Real>(z: &[T], step: usize, dt: T) -> Result<()> {
    let mut n2 = 0.0f64;
    for &v in z {
        let f = v.as_f64();
        n2 += f * f;
    }
    if !n2.is_finite() || n2 > DIVERGENCE_CAP_SQ {
        return Err(Error::Divergence {
            step,
            time: step as f64 * dt.as_f64(),
        });
    }
    Ok(())
}

/// Snapshots of an ensemble at recorded times.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsemblePath<T> {
    pub times: Vec<T>,
    pub snapshots: Vec<Ensemble<T>>,
    pub warnings: Vec<String>,
}

impl<T: Real> EnsemblePath<T> {
    /// CSV with columns `traj_id, t, x_1..x_d, y_1..y_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let Some(first) = self.snapshots.first() else {
            return Ok(());
        };
        let d = first.dim();
        let mut header = String::from("traj_id,t");
        for i in 1..=d {
            header.push_str(&format!(",x_{i}"));
        }
        for i in 1..=d {
            header.push_str(&format!(",y_{i}"));
        }
        writeln!(w, "{header}")?;
        for (t, snap) in self.times.iter().zip(&self.snapshots) {
            for (i, p) in snap.points().enumerate() {
                let mut line = format!("{i},{}", t.as_f64());
                for v in p {
                    line.push_str(&format!(",{}", v.as_f64()));
                }
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn record_steps<T: Real>(cfg: &IntegratorConfig<T>, record: &[T]) -> Result<Vec<usize>> {
    let mut ks = record
        .iter()
        .map(|&t| cfg.step_of(t))
        .collect::<Result<Vec<_>>>()?;
    if ks.is_empty() {
        ks.push(cfg.steps());
    }
    if ks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "record times must be non-decreasing".into(),
        ));
    }
    Ok(ks)
}

/// Simulates every point of `init` independently (trajectory `i` draws from
/// stream `(seed, i)`) and returns snapshots at the `record` times
/// (the horizon only, when `record` is empty).
pub fn simulate<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    init: &Ensemble<T>,
    cfg: &IntegratorConfig<T>,
    frozen_mu: Option<&Ensemble<T>>,
    record: &[T],
) -> Result<EnsemblePath<T>> {
    if init.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(
            "initial ensemble dimension".into(),
        ));
    }
    let warning = cfg.check_step(spec.k_b())?;
    let field = spec.field(frozen_mu)?;
    let stepper = Stepper::new(spec, diff, cfg.scheme, cfg.dt)?;
    let ks = record_steps(cfg, record)?;
    let last = *ks.last().unwrap();
    let w = init.phase_dim();

    let per_traj: Vec<Result<Vec<T>>> = (0..init.len())
        .into_par_iter()
        .map(|i| {
            let key = StreamKey::new(cfg.seed, i as u64);
            let mut z = init.point(i).to_vec();
            let mut s = stepper.scratch();
            let mut out = Vec::with_capacity(ks.len() * w);
            let mut next = 0;
            for step in 0..=last {
                while next < ks.len() && ks[next] == step {
                    out.extend_from_slice(&z);
                    next += 1;
                }
                if step == last {
                    break;
                }
                key.normals_at(step as u64, &mut s.xi);
                stepper.step(&mut z, field.as_ref(), &mut s);
                check_finite(&z, step + 1, cfg.dt)?;
            }
            Ok(out)
        })
        .collect();

    let mut rows = Vec::with_capacity(per_traj.len());
    for r in per_traj {
        rows.push(r?);
    }
    let mut snapshots = Vec::with_capacity(ks.len());
    for s in 0..ks.len() {
        let mut data = Vec::with_capacity(rows.len() * w);
        for r in &rows {
            data.extend_from_slice(&r[s * w..(s + 1) * w]);
        }
        snapshots.push(Ensemble::new(init.dim(), data)?);
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

/// Two copies driven by bit-identical Brownian increments.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledPath<T> {
    pub times: Vec<T>,
    pub z_path: Vec<Vec<T>>,
    pub zbar_path: Vec<Vec<T>>,
    /// `|z_t - zbar_t|^2` per step.
    pub gap: Vec<T>,
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&u, &v)| acc + (u - v) * (u - v))
}

/// Synchronous coupling of two copies, each with its own frozen measure;
/// `replica` selects the noise stream.
#[allow(clippy::too_many_arguments)]
pub fn simulate_coupled<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    z0: &PhasePoint<T>,
    zbar0: &PhasePoint<T>,
    cfg: &IntegratorConfig<T>,
    frozen_mu_pair: (Option<&Ensemble<T>>, Option<&Ensemble<T>>),
    replica: u64,
) -> Result<CoupledPath<T>> {
    let (fa, fb, stepper) = coupled_setup(spec, diff, z0, zbar0, cfg, frozen_mu_pair)?;
    let key = StreamKey::new(cfg.seed, replica);
    let mut z = z0.stacked();
    let mut zb = zbar0.stacked();
    let n = cfg.steps();
    let mut out = CoupledPath {
        times: Vec::with_capacity(n + 1),
        z_path: Vec::with_capacity(n + 1),
        zbar_path: Vec::with_capacity(n + 1),
        gap: Vec::with_capacity(n + 1),
    };
    let mut s = stepper.scratch();
    for step in 0..=n {
        out.times.push(T::from_usize(step).unwrap() * cfg.dt);
        out.gap.push(sq_dist(&z, &zb));
        out.z_path.push(z.clone());
        out.zbar_path.push(zb.clone());
        if step == n {
            break;
        }
        key.normals_at(step as u64, &mut s.xi);
        stepper.step(&mut z, fa.as_ref(), &mut s);
        stepper.step(&mut zb, fb.as_ref(), &mut s);
        check_finite(&z, step + 1, cfg.dt)?;
        check_finite(&zb, step + 1, cfg.dt)?;
    }
    Ok(out)
}

type CoupledSetup<'a, T> = (Option<MeanField<T>>, Option<MeanField<T>>, Stepper<'a, T>);

fn coupled_setup<'a, T: Real>(
    spec: &'a DriftSpec<T>,
    diff: &'a DiffusionSpec<T>,
    z0: &PhasePoint<T>,
    zbar0: &PhasePoint<T>,
    cfg: &IntegratorConfig<T>,
    frozen_mu_pair: (Option<&Ensemble<T>>, Option<&Ensemble<T>>),
) -> Result<CoupledSetup<'a, T>> {
    if z0.dim() != spec.dim() || zbar0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch("coupled start points".into()));
    }
    cfg.check_step(spec.k_b())?;
    let fa = spec.field(frozen_mu_pair.0)?;
    let fb = spec.field(frozen_mu_pair.1)?;
    Ok((fa, fb, Stepper::new(spec, diff, cfg.scheme, cfg.dt)?))
}

/// Mean and standard error of the coupled gap over `replicas` noise streams,
/// reported at every step.
#[derive(Clone, Debug, PartialEq)]
pub struct GapStatistics {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

pub fn coupled_gap_statistics<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    z0: &PhasePoint<T>,
    zbar0: &PhasePoint<T>,
    cfg: &IntegratorConfig<T>,
    frozen_mu_pair: (Option<&Ensemble<T>>, Option<&Ensemble<T>>),
    replicas: usize,
) -> Result<GapStatistics> {
    let (fa, fb, stepper) = coupled_setup(spec, diff, z0, zbar0, cfg, frozen_mu_pair)?;
    let n = cfg.steps();
    let gaps: Vec<Result<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let key = StreamKey::new(cfg.seed, r as u64);
            let mut z = z0.stacked();
            let mut zb = zbar0.stacked();
            let mut s = stepper.scratch();
            let mut g = Vec::with_capacity(n + 1);
            for step in 0..=n {
                g.push(sq_dist(&z, &zb).as_f64());
                if step == n {
                    break;
                }
                key.normals_at(step as u64, &mut s.xi);
                stepper.step(&mut z, fa.as_ref(), &mut s);
                stepper.step(&mut zb, fb.as_ref(), &mut s);
                check_finite(&z, step + 1, cfg.dt)?;
                check_finite(&zb, step + 1, cfg.dt)?;
            }
            Ok(g)
        })
        .collect();
    let mut rows = Vec::with_capacity(replicas);
    for g in gaps {
        rows.push(g?);
    }
    let r = replicas as f64;
    let mut mean = vec![0.0; n + 1];
    let mut std_err = vec![0.0; n + 1];
    for k in 0..=n {
        let m = rows.iter().map(|g| g[k]).sum::<f64>() / r;
        let v = if replicas > 1 {
            rows.iter().map(|g| (g[k] - m).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        mean[k] = m;
        std_err[k] = (v / r).sqrt();
    }
    Ok(GapStatistics {
        times: (0..=n).map(|k| k as f64 * cfg.dt.as_f64()).collect(),
        mean,
        std_err,
    })
}

/// Base path together with `D_t = ∂Z_t / ∂z_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFlow<T> {
    pub times: Vec<T>,
    pub path: Vec<Vec<T>>,
    pub d_t: Vec<DMatrix<T>>,
}

/// Integrates the variational equation along one realized path (stream `replica`).
pub fn tangent_flow<T: Real>(
    spec: &DriftSpec<T>,
    diff: &DiffusionSpec<T>,
    z0: &PhasePoint<T>,
    cfg: &IntegratorConfig<T>,
    frozen_mu: Option<&Ensemble<T>>,
    replica: u64,
) -> Result<TangentFlow<T>> {
    if z0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch("tangent start point".into()));
    }
    cfg.check_step(spec.k_b())?;
    let field = spec.field(frozen_mu)?;
    let stepper = Stepper::new(spec, diff, cfg.scheme, cfg.dt)?;
    let key = StreamKey::new(cfg.seed, replica);
    let w = 2 * spec.dim();
    let mut z = z0.stacked();
    let mut dm = DMatrix::identity(w, w);
    let n = cfg.steps();
    let mut out = TangentFlow {
        times: Vec::with_capacity(n + 1),
        path: Vec::with_capacity(n + 1),
        d_t: Vec::with_capacity(n + 1),
    };
    let mut s = stepper.scratch();
    for step in 0..=n {
        out.times.push(T::from_usize(step).unwrap() * cfg.dt);
        out.path.push(z.clone());
        out.d_t.push(dm.clone());
        if step == n {
            break;
        }
        key.normals_at(step as u64, &mut s.xi);
        stepper.step_tangent(&mut z, &mut dm, field.as_ref(), &mut s);
        check_finite(&z, step + 1, cfg.dt)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Perturbation;

    fn spec_d1() -> DriftSpec<f64> {
        DriftSpec::linear(DMatrix::identity(1, 1), 1.0).unwrap()
    }

    #[test]
    fn step_cap_enforced() {
        let cfg = IntegratorConfig::new(Scheme::KineticSplitting, 0.5, 1.0, 0).unwrap();
        assert!(cfg.check_step(1.0).is_err());
        assert!(cfg
            .clone()
            .with_large_step()
            .check_step(1.0)
            .unwrap()
            .is_some());
        assert!(IntegratorConfig::new(Scheme::EulerMaruyama, 2.0, 1.0, 0).is_err());
    }

    #[test]
    fn euler_tangent_matches_finite_difference() {
        let spec = spec_d1().with_perturbation(Perturbation::ScaledSine { amplitude: 0.4 });
        let spec = spec.with_k_b(2.0);
        let diff = DiffusionSpec::isotropic(1, 1.0).unwrap();
        let cfg = IntegratorConfig::new(Scheme::EulerMaruyama, 0.01, 0.5, 3).unwrap();
        let z0 = PhasePoint::new(vec![0.3], vec![-0.2]).unwrap();
        let tf = tangent_flow(&spec, &diff, &z0, &cfg, None, 0).unwrap();
        let dt = tf.d_t.last().unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut zp = z0.stacked();
            let mut zm = z0.stacked();
            zp[j] += h;
            zm[j] -= h;
            let ep = tangent_flow(
                &spec,
                &diff,
                &PhasePoint::from_stacked(&zp).unwrap(),
                &cfg,
                None,
                0,
            )
            .unwrap();
            let em = tangent_flow(
                &spec,
                &diff,
                &PhasePoint::from_stacked(&zm).unwrap(),
                &cfg,
                None,
                0,
            )
            .unwrap();
            for i in 0..2 {
                let fd = (ep.path.last().unwrap()[i] - em.path.last().unwrap()[i]) / (2.0 * h);
                assert!((fd - dt[(i, j)]).abs() < 1e-6, "{fd} vs {}", dt[(i, j)]);
            }
        }
    }

    #[test]
    fn divergence_reported() {
        let spec = DriftSpec::new(
            DMatrix::from_element(1, 1, -10.0),
            0.1,
            Perturbation::Zero,
            None,
            0.5,
        )
        .unwrap();
        let diff = DiffusionSpec::isotropic(1, 1.0).unwrap();
        let cfg = IntegratorConfig::new(Scheme::KineticSplitting, 0.1, 100.0, 0)
            .unwrap()
            .with_large_step();
        let init = Ensemble::new(1, vec![1.0, 0.0]).unwrap();
        let r = simulate(&spec, &diff, &init, &cfg, None, &[]);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }
}
