//! Sampling-based certification of partial dissipativity, its lift to the
//! N-particle system, and the smallness thresholds derived from it.
//!
//! The inequality checked for `|z - zbar| >= R` is
//!
//! ```text
//! <r^2 u + r r0 v, v> + <v + r r0 u, b(z, mu) - b(zbar, mu)> <= -theta (|u|^2 + |v|^2)
//! ```
//!
//! with `u = x - xbar`, `v = y - ybar`. Sampling can only falsify with
//! certainty; a passing check is a statistical verdict.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{lift_to_system, DriftSpec, Ensemble};
use crate::rng::{CounterRng, StreamKey};
use crate::scalar::Real;

const CHUNK: usize = 2048;
/// Ratio `rmax / R` used when no sampling radius is given.
pub const DEFAULT_RMAX_FACTOR: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertStatus {
    /// Supplied by hand (for example from a closed-form argument).
    Analytic,
    CertifiedBySampling,
    Falsified,
}

/// A violating pair `(z, zbar)` with the measure it was evaluated against.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub trial: usize,
    pub z: Vec<f64>,
    pub zbar: Vec<f64>,
    pub lhs: f64,
    /// `-theta |z - zbar|^2`.
    pub bound: f64,
    pub measure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipativityCert {
    pub theta: f64,
    pub r: f64,
    pub r0: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub status: CertStatus,
    pub witness: Option<Witness>,
}

impl DissipativityCert {
    pub fn new(theta: f64, r: f64, r0: f64, radius: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "theta must be positive, got {theta}"
            )));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "r must be positive, got {r}"
            )));
        }
        if !(r0 > -1.0 && r0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "r0 must lie in (-1, 1), got {r0}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "R must be positive, got {radius}"
            )));
        }
        Ok(Self {
            theta,
            r,
            r0,
            radius,
            status: CertStatus::Analytic,
            witness: None,
        })
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(theta, self.r, self.r0, self.radius)
    }

    /// `theta - K_I (1 + |r r0|)`.
    pub fn effective_rate(&self, k_i: f64) -> f64 {
        self.theta - k_i * (1.0 + (self.r * self.r0).abs())
    }

    /// Largest `K_I` the cert can absorb: `theta / (1 + |r r0|)`.
    pub fn interaction_budget(&self) -> f64 {
        self.theta / (1.0 + (self.r * self.r0).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    HoldsOnSample {
        trials: usize,
        /// Largest `(lhs + theta |dz|^2) / |dz|^2` seen (negative when the bound holds).
        worst_margin: f64,
    },
    Falsified(Witness),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::HoldsOnSample { .. })
    }
}

/// Cert updated with the outcome of a check.
pub fn apply_verdict(cert: &DissipativityCert, v: &Verdict) -> DissipativityCert {
    let mut c = cert.clone();
    match v {
        Verdict::HoldsOnSample { .. } => {
            if c.status != CertStatus::Analytic {
                c.status = CertStatus::CertifiedBySampling;
            }
            c.witness = None;
        }
        Verdict::Falsified(w) => {
            c.status = CertStatus::Falsified;
            c.witness = Some(w.clone());
        }
    }
    c
}

/// Left-hand side of the dissipativity inequality for `u = dx`, `v = dy`, `db = b - bbar`.
pub fn patdi_lhs(u: &[f64], v: &[f64], db: &[f64], r: f64, r0: f64) -> f64 {
    let rr0 = r * r0;
    let mut s = 0.0;
    for i in 0..u.len() {
        s += (r * r * u[i] + rr0 * v[i]) * v[i] + (v[i] + rr0 * u[i]) * db[i];
    }
    s
}

/// Sampling parameters shared by the checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingConfig {
    pub trials: usize,
    /// Base points lie in the ball of this radius; `|dz|` is log-spaced in `[R, rmax]`.
    pub rmax: f64,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn new(trials: usize, rmax: f64, seed: u64) -> Self {
        Self { trials, rmax, seed }
    }

    /// `rmax = 100 R`.
    pub fn for_cert(cert: &DissipativityCert, trials: usize, seed: u64) -> Self {
        Self::new(trials, DEFAULT_RMAX_FACTOR * cert.radius, seed)
    }
}

/// One sampled pair: `zbar` in the ball, `z = zbar + dz` with `|dz|` in `[R, rmax]`.
fn sample_pair(rng: &mut CounterRng, dim: usize, radius: f64, rmax: f64) -> (Vec<f64>, Vec<f64>) {
    let zbar = rng.in_ball(dim, rmax);
    let dir = rng.unit_vector(dim);
    let mag = radius * (rmax / radius).powf(rng.uniform());
    let z = zbar.iter().zip(&dir).map(|(a, b)| a + mag * b).collect();
    (z, zbar)
}

/// Frozen measures used when the drift depends on one but none is supplied.
pub fn probe_measures<T: Real>(d: usize, seed: u64) -> Vec<(String, Ensemble<T>)> {
    let n = 256;
    let w = 2 * d;
    let mut rng = StreamKey::new(seed, 0xd1).rng();
    let gauss: Vec<T> = (0..n * w).map(|_| T::lit(rng.normal())).collect();
    // Normal scale mixture with log-normal scales: much heavier tails than Gaussian.
    let mut heavy = Vec::with_capacity(n * w);
    for _ in 0..n {
        let s = (1.5 * rng.normal()).exp();
        for _ in 0..w {
            heavy.push(T::lit(s * rng.normal()));
        }
    }
    vec![
        (
            "point-mass-origin".into(),
            Ensemble::repeat(&vec![T::zero(); w], 1).unwrap(),
        ),
        ("standard-gaussian".into(), Ensemble::new(d, gauss).unwrap()),
        ("heavy-tailed".into(), Ensemble::new(d, heavy).unwrap()),
    ]
}

fn check_sampling(radius: f64, s: &SamplingConfig) -> Result<()> {
    if !(s.rmax > radius) {
        return Err(Error::DegenerateSampling {
            r: radius,
            rmax: s.rmax,
        });
    }
    if s.trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    Ok(())
}

/// Per-trial evaluation: returns `(lhs, |dz|^2, z, zbar)` for each measure.
struct PairEval<'a, T> {
    spec: &'a DriftSpec<T>,
    fields: Vec<(Option<String>, Option<crate::model::MeanField<T>>)>,
}

impl<'a, T: Real> PairEval<'a, T> {
    fn new(spec: &'a DriftSpec<T>, mu: Option<&Ensemble<T>>, seed: u64) -> Result<Self> {
        let fields = if spec.interaction().is_none() {
            vec![(None, None)]
        } else if let Some(m) = mu {
            vec![(Some("supplied".to_string()), spec.field(Some(m))?)]
        } else {
            probe_measures::<T>(spec.dim(), seed)
                .into_iter()
                .map(|(name, m)| Ok((Some(name), spec.field(Some(&m))?)))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self { spec, fields })
    }

    fn drift(&self, z: &[f64], k: usize) -> Vec<f64> {
        let zt: Vec<T> = z.iter().map(|&v| T::lit(v)).collect();
        let mut out = vec![T::zero(); self.spec.dim()];
        self.spec
            .drift_into(&zt, self.fields[k].1.as_ref(), &mut out);
        out.iter().map(|v| v.as_f64()).collect()
    }
}

/// Smallest observed `-lhs / |dz|^2` over the sample, i.e. the largest theta
/// the sample would accept for `(r, r0, R)`.
pub fn sampled_rate<T: Real>(
    spec: &DriftSpec<T>,
    r: f64,
    r0: f64,
    radius: f64,
    mu: Option<&Ensemble<T>>,
    sampling: &SamplingConfig,
) -> Result<f64> {
    check_sampling(radius, sampling)?;
    let eval = PairEval::new(spec, mu, sampling.seed)?;
    let d = spec.dim();
    let chunks = sampling.trials.div_ceil(CHUNK);
    let mins: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = StreamKey::new(sampling.seed, c as u64).rng();
            let mut best = f64::INFINITY;
            for _ in c * CHUNK..((c + 1) * CHUNK).min(sampling.trials) {
                let (z, zb) = sample_pair(&mut rng, 2 * d, radius, sampling.rmax);
                let dz: Vec<f64> = z.iter().zip(&zb).map(|(a, b)| a - b).collect();
                let n2: f64 = dz.iter().map(|v| v * v).sum();
                for k in 0..eval.fields.len() {
                    let b1 = eval.drift(&z, k);
                    let b2 = eval.drift(&zb, k);
                    let db: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| a - b).collect();
                    let lhs = patdi_lhs(&dz[..d], &dz[d..], &db, r, r0);
                    best = best.min(-lhs / n2);
                }
            }
            best
        })
        .collect();
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Checks the cert on sampled pairs. With an interaction and no `mu`, every
/// probe measure is tried. Returns the lowest-index violating trial, if any.
pub fn check_patdi<T: Real>(
    spec: &DriftSpec<T>,
    cert: &DissipativityCert,
    mu: Option<&Ensemble<T>>,
    sampling: &SamplingConfig,
) -> Result<Verdict> {
    check_sampling(cert.radius, sampling)?;
    let eval = PairEval::new(spec, mu, sampling.seed)?;
    let d = spec.dim();
    let chunks = sampling.trials.div_ceil(CHUNK);
    let results: Vec<std::result::Result<f64, Witness>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = StreamKey::new(sampling.seed, c as u64).rng();
            let mut worst = f64::NEG_INFINITY;
            for t in c * CHUNK..((c + 1) * CHUNK).min(sampling.trials) {
                let (z, zb) = sample_pair(&mut rng, 2 * d, cert.radius, sampling.rmax);
                let dz: Vec<f64> = z.iter().zip(&zb).map(|(a, b)| a - b).collect();
                let n2: f64 = dz.iter().map(|v| v * v).sum();
                for k in 0..eval.fields.len() {
                    let b1 = eval.drift(&z, k);
                    let b2 = eval.drift(&zb, k);
                    let db: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| a - b).collect();
                    let lhs = patdi_lhs(&dz[..d], &dz[d..], &db, cert.r, cert.r0);
                    let margin = (lhs + cert.theta * n2) / n2;
                    // Rounding slack for certs that are tight along some direction.
                    if margin > 1e-10 {
                        return Err(Witness {
                            trial: t,
                            z,
                            zbar: zb,
                            lhs,
                            bound: -cert.theta * n2,
                            measure: eval.fields[k].0.clone(),
                        });
                    }
                    worst = worst.max(margin);
                }
            }
            Ok(worst)
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for r in results {
        match r {
            Ok(w) => worst = worst.max(w),
            Err(w) => return Ok(Verdict::Falsified(w)),
        }
    }
    Ok(Verdict::HoldsOnSample {
        trials: sampling.trials,
        worst_margin: worst,
    })
}

/// Candidate values for the cert search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchGrid {
    pub r: Vec<f64>,
    pub r0: Vec<f64>,
    pub radius: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            r: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            r0: vec![-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75],
            radius: vec![0.5, 1.0, 2.0, 4.0],
        }
    }
}

/// Fraction of the sampled rate kept as the certified `theta`.
pub const SEARCH_SHRINK: f64 = 0.9;

/// Returns the cert with the largest `theta` over the grid, or `None` when no
/// grid point admits a positive rate. `theta` is `0.9` times the sampled rate,
/// and every candidate is re-checked on an independent sample.
pub fn search_cert<T: Real>(
    spec: &DriftSpec<T>,
    grid: &SearchGrid,
    mu: Option<&Ensemble<T>>,
    trials: usize,
    seed: u64,
) -> Result<Option<DissipativityCert>> {
    if grid.r.is_empty() || grid.r0.is_empty() || grid.radius.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for v in grid.r.iter().chain(&grid.r0).chain(&grid.radius) {
        if !v.is_finite() {
            return Err(Error::InvalidParameter("search grid must be finite".into()));
        }
    }
    let mut best: Option<DissipativityCert> = None;
    for &radius in &grid.radius {
        let sampling = SamplingConfig::new(trials, DEFAULT_RMAX_FACTOR * radius, seed);
        for &r in &grid.r {
            for &r0 in &grid.r0 {
                let Ok(mut cert) = DissipativityCert::new(1.0, r, r0, radius) else {
                    continue;
                };
                let rate = sampled_rate(spec, r, r0, radius, mu, &sampling)?;
                let theta = SEARCH_SHRINK * rate;
                if !(theta > 0.0) || best.as_ref().is_some_and(|b| b.theta >= theta) {
                    continue;
                }
                cert.theta = theta;
                let fresh = SamplingConfig {
                    seed: crate::rng::mix64(seed ^ 0x5eed),
                    ..sampling
                };
                if check_patdi(spec, &cert, mu, &fresh)?.holds() {
                    cert.status = CertStatus::CertifiedBySampling;
                    best = Some(cert);
                }
            }
        }
    }
    Ok(best)
}

/// Outcome of the N-particle check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemReport {
    pub particles: usize,
    pub theta_eff: f64,
    pub verdict: Verdict,
}

/// Checks the aggregated inequality for the N-particle system with rate
/// `theta_eff = theta - K_I (1 + |r r0|)`, each particle's own displacement
/// drawn with `|dz_i| >= R` (so `|dz| >= sqrt(N) R`).
pub fn check_patdi_system<T: Real>(
    spec: &DriftSpec<T>,
    cert: &DissipativityCert,
    n: usize,
    sampling: &SamplingConfig,
) -> Result<SystemReport> {
    check_sampling(cert.radius, sampling)?;
    let theta_eff = cert.effective_rate(spec.k_i().as_f64());
    // Relative slack so that K_I equal to the budget counts as exhausted.
    if theta_eff <= 1e-12 * cert.theta {
        return Err(Error::InteractionBudgetExhausted { theta_eff });
    }
    let sys = lift_to_system(spec, n)?;
    let d = spec.dim();
    let w = 2 * d;
    let chunk = (CHUNK / n).max(1);
    let chunks = sampling.trials.div_ceil(chunk);
    let results: Vec<Result<std::result::Result<f64, Witness>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = StreamKey::new(sampling.seed, c as u64).rng();
            let mut worst = f64::NEG_INFINITY;
            for t in c * chunk..((c + 1) * chunk).min(sampling.trials) {
                let mut z = Vec::with_capacity(n * w);
                let mut zb = Vec::with_capacity(n * w);
                for _ in 0..n {
                    let (a, b) = sample_pair(&mut rng, w, cert.radius, sampling.rmax);
                    z.extend(a);
                    zb.extend(b);
                }
                let zt: Vec<T> = z.iter().map(|&v| T::lit(v)).collect();
                let zbt: Vec<T> = zb.iter().map(|&v| T::lit(v)).collect();
                let b1 = sys.eval(&zt)?;
                let b2 = sys.eval(&zbt)?;
                let mut lhs = 0.0;
                let mut n2 = 0.0;
                for i in 0..n {
                    let dz: Vec<f64> = (0..w).map(|k| z[i * w + k] - zb[i * w + k]).collect();
                    let db: Vec<f64> = (0..d)
                        .map(|k| (b1[i * d + k] - b2[i * d + k]).as_f64())
                        .collect();
                    lhs += patdi_lhs(&dz[..d], &dz[d..], &db, cert.r, cert.r0);
                    n2 += dz.iter().map(|v| v * v).sum::<f64>();
                }
                let margin = (lhs + theta_eff * n2) / n2;
                if margin > 1e-10 {
                    return Ok(Err(Witness {
                        trial: t,
                        z,
                        zbar: zb,
                        lhs,
                        bound: -theta_eff * n2,
                        measure: Some("empirical".into()),
                    }));
                }
                worst = worst.max(margin);
            }
            Ok(Ok(worst))
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for r in results {
        match r? {
            Ok(m) => worst = worst.max(m),
            Err(wit) => {
                return Ok(SystemReport {
                    particles: n,
                    theta_eff,
                    verdict: Verdict::Falsified(wit),
                })
            }
        }
    }
    Ok(SystemReport {
        particles: n,
        theta_eff,
        verdict: Verdict::HoldsOnSample {
            trials: sampling.trials,
            worst_margin: worst,
        },
    })
}

/// `eta_1 = 1 / min_t e^{(1+K_b) t} sqrt(t) / (1 - c e^{-lambda t})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Eta1Threshold {
    pub value: f64,
    pub minimizer_t: f64,
    pub c_tilde: f64,
    pub lambda: f64,
    pub k_b: f64,
}

/// `ln g(t)`; finite only for `t > max(0, ln(c)/lambda)`.
pub fn eta1_log_objective(t: f64, c_tilde: f64, lambda: f64, k_b: f64) -> f64 {
    let den = 1.0 - c_tilde * (-lambda * t).exp();
    if t <= 0.0 || den <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 + k_b) * t + 0.5 * t.ln() - den.ln()
}

/// Log-spaced grid of `grid` points followed by golden-section refinement.
pub fn compute_eta1_with_grid(
    c_tilde: f64,
    lambda: f64,
    k_b: f64,
    grid: usize,
) -> Result<Eta1Threshold> {
    if !(lambda > 0.0) || !(c_tilde > 0.0) || !(k_b >= 0.0) {
        return Err(Error::InvalidParameter(
            "eta1 needs lambda > 0, c_tilde > 0 and K_b >= 0".into(),
        ));
    }
    let t0 = (c_tilde.ln() / lambda).max(0.0);
    let h = |s: f64| eta1_log_objective(t0 + s, c_tilde, lambda, k_b);
    // g grows like e^{(1+K_b) t}, so the minimizer sits well inside this span.
    let (lo, hi) = (1e-12f64, 60.0 / (1.0 + k_b) + 60.0 / lambda);
    let grid = grid.max(16);
    let step = (hi / lo).ln() / (grid - 1) as f64;
    let s_at = |i: usize| lo * (step * i as f64).exp();
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..grid {
        let v = h(s_at(i));
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    if !best_v.is_finite() {
        return Err(Error::NonFinite("eta1 objective minimum".into()));
    }
    let mut a = if best == 0 { 0.0 } else { s_at(best - 1) };
    let mut b = s_at((best + 1).min(grid - 1));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    for _ in 0..200 {
        if (b - a) <= 1e-15 * (t0 + b) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = h(d);
        }
    }
    let s = 0.5 * (a + b);
    let (s, v) = if h(s) <= best_v {
        (s, h(s))
    } else {
        (s_at(best), best_v)
    };
    if !v.is_finite() {
        return Err(Error::NonFinite("eta1 objective minimum".into()));
    }
    Ok(Eta1Threshold {
        value: (-v).exp(),
        minimizer_t: t0 + s,
        c_tilde,
        lambda,
        k_b,
    })
}

pub fn compute_eta1(c_tilde: f64, lambda: f64, k_b: f64) -> Result<Eta1Threshold> {
    compute_eta1_with_grid(c_tilde, lambda, k_b, 2048)
}

/// Computable stand-in for the interaction threshold: `min(eta_1, theta / (1 + |r r0|))`.
/// The true threshold is smaller than either formula alone.
pub fn k_star_surrogate(eta1: &Eta1Threshold, cert: &DissipativityCert) -> f64 {
    eta1.value.min(cert.interaction_budget())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn damped() -> DriftSpec<f64> {
        DriftSpec::linear(DMatrix::identity(1, 1), 1.0).unwrap()
    }

    #[test]
    fn lhs_matches_closed_form_for_damped_oscillator() {
        // b = -x - y, r = 1, r0 = 1/2: lhs = -(u^2 + v^2 + u v) / 2.
        for (u, v) in [(1.0, 0.0), (0.3, -2.0), (-1.5, 1.5)] {
            let lhs = patdi_lhs(&[u], &[v], &[-u - v], 1.0, 0.5);
            assert!((lhs + 0.5 * (u * u + v * v + u * v)).abs() < 1e-14);
        }
    }

    #[test]
    fn cert_rejects_boundary_inputs() {
        assert!(DissipativityCert::new(0.0, 1.0, 0.5, 1.0).is_err());
        assert!(DissipativityCert::new(0.1, 1.0, 1.0, 1.0).is_err());
        assert!(DissipativityCert::new(0.1, 0.0, 0.0, 1.0).is_err());
        assert!(DissipativityCert::new(0.1, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn degenerate_sampling_is_rejected() {
        let cert = DissipativityCert::new(0.25, 1.0, 0.5, 2.0).unwrap();
        let s = SamplingConfig::new(10, 2.0, 1);
        assert!(matches!(
            check_patdi(&damped(), &cert, None, &s),
            Err(Error::DegenerateSampling { .. })
        ));
    }

    #[test]
    fn witness_is_lowest_failing_trial() {
        let spec = DriftSpec::new_unrestricted(
            -DMatrix::identity(1, 1),
            0.0,
            crate::model::Perturbation::Zero,
            None,
            1.0,
        )
        .unwrap();
        let cert = DissipativityCert::new(0.1, 1.0, 0.5, 1.0).unwrap();
        let s = SamplingConfig::for_cert(&cert, 10_000, 3);
        let Verdict::Falsified(w) = check_patdi(&spec, &cert, None, &s).unwrap() else {
            panic!("anti-dissipative drift must be falsified");
        };
        // Re-running the earlier trials alone never fails.
        if w.trial > 0 {
            let s2 = SamplingConfig {
                trials: w.trial,
                ..s
            };
            assert!(check_patdi(&spec, &cert, None, &s2).unwrap().holds());
        }
        assert!(w.lhs > w.bound);
    }

    #[test]
    fn eta1_objective_is_infinite_before_threshold() {
        assert!(eta1_log_objective(0.5, 2.0, 1.0, 0.0).is_infinite());
        assert!(eta1_log_objective(1.0, 2.0, 1.0, 0.0).is_finite());
    }
}
