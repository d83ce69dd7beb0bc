//! Exponential rate fits on log-scale.

use serde::Serialize;

use crate::error::{Error, Result};

/// Points needed above the noise floor for any fit.
pub const MIN_POINTS: usize = 4;

/// Fit window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    Fixed {
        t_lo: f64,
        t_hi: f64,
    },
    /// Chosen from the data. `omega` is the oscillation frequency of the slowest
    /// mode (0 when it is real); see [`fit_rate`].
    Auto {
        omega: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FitMethod {
    LogLinear,
    /// Regression through the per-block maxima of blocks one modulation period long.
    Envelope {
        period: f64,
        blocks: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub lambda_hat: f64,
    pub intercept: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// RMS of the log-residuals of the regressed points.
    pub residual_rms: f64,
    /// Points above the floor inside the window.
    pub n_points: usize,
    pub noise_floor: f64,
    pub method: FitMethod,
    pub window_note: String,
}

fn ols(t: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(v).map(|(a, b)| (a - mt) * (b - mv)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mv - slope * mt;
    let rss: f64 = t
        .iter()
        .zip(v)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Fits `value ~ C e^{-lambda t}` by least squares on `ln value`.
///
/// Only points strictly above `noise_floor` are used. With
/// [`Window::Auto`] the window opens at the first time for a real slowest mode
/// and at `pi / omega` otherwise (the norm of a damped rotation is modulated with
/// that period). It closes before the first point that falls to the floor. If the
/// window spans at least two modulation periods, the regression runs through the
/// maximum of each complete period block. This fits the envelope instead of the
/// oscillation.
pub fn fit_rate(
    times: &[f64],
    values: &[f64],
    noise_floor: f64,
    window: Window,
) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch(
            "times and values differ in length".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "times must be strictly increasing".into(),
        ));
    }
    if !(noise_floor >= 0.0) {
        return Err(Error::InvalidParameter(
            "noise floor must be non-negative".into(),
        ));
    }
    let above = |v: f64| v.is_finite() && v > noise_floor && v > 0.0;
    let (idx, note, period) = match window {
        Window::Fixed { t_lo, t_hi } => {
            if !(t_lo < t_hi) {
                return Err(Error::InvalidParameter("window needs t_lo < t_hi".into()));
            }
            let idx: Vec<usize> = (0..times.len())
                .filter(|&i| times[i] >= t_lo && times[i] <= t_hi && above(values[i]))
                .collect();
            (idx, format!("fixed window [{t_lo}, {t_hi}]"), None)
        }
        Window::Auto { omega } => {
            let period = (omega > 0.0).then(|| std::f64::consts::PI / omega);
            let start = period.unwrap_or(f64::NEG_INFINITY);
            let mut idx = Vec::new();
            for i in (0..times.len()).filter(|&i| times[i] >= start) {
                if !above(values[i]) {
                    break;
                }
                idx.push(i);
            }
            let note = match period {
                Some(p) => format!(
                    "auto window: opens at pi/omega = {p:.4}, closes before the first value at or below the floor"
                ),
                None => "auto window: opens at the first point, closes before the first value at or below the floor"
                    .to_string(),
            };
            (idx, note, period)
        }
    };
    if idx.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints { found: idx.len() });
    }
    let t_lo = times[idx[0]];
    let t_hi = times[*idx.last().unwrap()];

    let mut method = FitMethod::LogLinear;
    let (mut ft, mut fv): (Vec<f64>, Vec<f64>) =
        idx.iter().map(|&i| (times[i], values[i].ln())).unzip();
    if let Some(p) = period {
        let blocks = ((t_hi - t_lo) / p).floor() as usize;
        if blocks >= 2 {
            let mut et = Vec::with_capacity(blocks);
            let mut ev = Vec::with_capacity(blocks);
            for b in 0..blocks {
                let (lo, hi) = (t_lo + b as f64 * p, t_lo + (b + 1) as f64 * p);
                let best = ft
                    .iter()
                    .zip(&fv)
                    .filter(|(t, _)| **t >= lo && **t < hi)
                    .max_by(|a, b| a.1.total_cmp(b.1));
                if let Some((t, v)) = best {
                    et.push(*t);
                    ev.push(*v);
                }
            }
            if et.len() >= 2 {
                method = FitMethod::Envelope {
                    period: p,
                    blocks: et.len(),
                };
                ft = et;
                fv = ev;
            }
        }
    }
    let (slope, intercept, residual_rms) = ols(&ft, &fv);
    Ok(RateFit {
        lambda_hat: -slope,
        intercept,
        t_lo,
        t_hi,
        residual_rms,
        n_points: idx.len(),
        noise_floor,
        method,
        window_note: note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let t: Vec<f64> = (0..=10).map(f64::from).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let f = fit_rate(&t, &v, 0.0, Window::Auto { omega: 0.0 }).unwrap();
        assert!((f.lambda_hat - 0.7).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual_rms < 1e-12);
        assert_eq!(f.method, FitMethod::LogLinear);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t: Vec<f64> = (0..8).map(f64::from).collect();
        let f = fit_rate(&t, &[2.0; 8], 0.1, Window::Auto { omega: 0.0 }).unwrap();
        assert_eq!(f.lambda_hat, 0.0);
    }

    #[test]
    fn floor_limits_points() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let v: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let f = fit_rate(&t, &v, 0.02, Window::Auto { omega: 0.0 }).unwrap();
        assert_eq!(f.n_points, 4);
        assert!(matches!(
            fit_rate(&t, &v, 0.1, Window::Auto { omega: 0.0 }),
            Err(Error::InsufficientPoints { found: 3 })
        ));
    }

    #[test]
    fn fixed_window_respected() {
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        let v: Vec<f64> = t
            .iter()
            .map(|&t| {
                if t < 5.0 {
                    (-2.0 * t).exp()
                } else {
                    (-10.0 - 0.5 * (t - 5.0)).exp()
                }
            })
            .collect();
        let f = fit_rate(
            &t,
            &v,
            0.0,
            Window::Fixed {
                t_lo: 5.0,
                t_hi: 19.0,
            },
        )
        .unwrap();
        assert!((f.lambda_hat - 0.5).abs() < 1e-12);
        assert_eq!((f.t_lo, f.t_hi), (5.0, 19.0));
    }
}
