//! Drift and diffusion specifications for kinetic equations
//! `dX = Y dt`, `dY = b(X, Y, mu) dt + sigma dW`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::scalar::Real;

/// A point `z = (x, y)` of phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "position has {} entries, velocity {}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    /// Splits a stacked vector `[x_1..x_d, y_1..y_d]`.
    pub fn from_stacked(z: &[T]) -> Result<Self> {
        if z.is_empty() || z.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "stacked phase vector has odd length {}",
                z.len()
            )));
        }
        let d = z.len() / 2;
        Ok(Self {
            x: z[..d].to_vec(),
            y: z[d..].to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn stacked(&self) -> Vec<T> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.y);
        z
    }
}

/// Empirical measure with uniform weights; each point is stored as `[x, y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Ensemble<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch(
                "dimension must be at least 1".into(),
            ));
        }
        if data.is_empty() || data.len() % (2 * dim) != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form whole points of phase dimension {}",
                data.len(),
                2 * dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_points(points: &[PhasePoint<T>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty ensemble".into()))?;
        let d = first.dim();
        let mut data = Vec::with_capacity(points.len() * 2 * d);
        for p in points {
            if p.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "point of dimension {} in ensemble of dimension {d}",
                    p.dim()
                )));
            }
            data.extend_from_slice(&p.x);
            data.extend_from_slice(&p.y);
        }
        Self::new(d, data)
    }

    /// `n` copies of the stacked point `z`.
    pub fn repeat(z: &[T], n: usize) -> Result<Self> {
        if z.len() % 2 != 0 || n == 0 {
            return Err(Error::DimensionMismatch("bad point or count".into()));
        }
        let mut data = Vec::with_capacity(n * z.len());
        for _ in 0..n {
            data.extend_from_slice(z);
        }
        Self::new(z.len() / 2, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phase_dim(&self) -> usize {
        2 * self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / (2 * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        let w = 2 * self.dim;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(2 * self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn phase_point(&self, i: usize) -> PhasePoint<T> {
        let p = self.point(i);
        PhasePoint {
            x: p[..self.dim].to_vec(),
            y: p[self.dim..].to_vec(),
        }
    }

    pub fn mean(&self) -> DVector<T> {
        let w = self.phase_dim();
        let mut m = DVector::zeros(w);
        for p in self.points() {
            for k in 0..w {
                m[k] += p[k];
            }
        }
        m / T::from_usize(self.len()).unwrap()
    }

    /// Covariance normalized by `n` (the covariance of the empirical measure).
    pub fn covariance(&self) -> DMatrix<T> {
        let w = self.phase_dim();
        let m = self.mean();
        let mut c = DMatrix::zeros(w, w);
        for p in self.points() {
            for i in 0..w {
                let di = p[i] - m[i];
                for j in i..w {
                    c[(i, j)] += di * (p[j] - m[j]);
                }
            }
        }
        let n = T::from_usize(self.len()).unwrap();
        for i in 0..w {
            for j in i..w {
                let v = c[(i, j)] / n;
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        c
    }

    pub fn second_moment(&self) -> T {
        let s = self.data.iter().fold(T::zero(), |acc, &v| acc + v * v);
        s / T::from_usize(self.len()).unwrap()
    }

    /// Sub-ensemble of the given point indices.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.phase_dim());
        for &i in idx {
            data.extend_from_slice(self.point(i));
        }
        Self::new(self.dim, data)
    }

    /// Deterministic stride subsample to at most `max` points.
    pub fn stride_subsample(&self, max: usize) -> Self {
        let n = self.len();
        if n <= max {
            return self.clone();
        }
        let idx: Vec<usize> = (0..max).map(|k| k * n / max).collect();
        self.select(&idx).expect("indices in range")
    }

    /// Applies `f` to every coordinate.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch("concatenating ensembles".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(self.dim, data)
    }

    pub fn cast<U: Real>(&self) -> Ensemble<U> {
        Ensemble {
            dim: self.dim,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Bounded-gradient perturbation `F: R^{2d} -> R^d` from the built-in catalogue.
#[derive(Clone, Debug, PartialEq)]
pub enum Perturbation<T> {
    Zero,
    /// `F_i = a sin(x_i)`.
    ScaledSine {
        amplitude: T,
    },
    /// `F_i = a x_i exp(-|z|^2 / (2 w^2))`.
    SmoothBump {
        amplitude: T,
        width: T,
    },
    /// `F_i = a tanh(c (x_i + y_i))`.
    TanhSaturation {
        amplitude: T,
        gain: T,
    },
}

impl<T: Real> Perturbation<T> {
    /// Adds `F(z)` to `out`.
    pub fn add_into(&self, z: &[T], out: &mut [T]) {
        let d = out.len();
        match *self {
            Perturbation::Zero => {}
            Perturbation::ScaledSine { amplitude } => {
                for i in 0..d {
                    out[i] += amplitude * z[i].sin();
                }
            }
            Perturbation::SmoothBump { amplitude, width } => {
                let phi = bump(z, width);
                for i in 0..d {
                    out[i] += amplitude * z[i] * phi;
                }
            }
            Perturbation::TanhSaturation { amplitude, gain } => {
                for i in 0..d {
                    out[i] += amplitude * (gain * (z[i] + z[d + i])).tanh();
                }
            }
        }
    }

    /// Adds the Jacobian blocks `(d_x F, d_y F)` (row-major `d x d`) to `jx`, `jy`.
    pub fn add_jacobian(&self, z: &[T], jx: &mut DMatrix<T>, jy: &mut DMatrix<T>) {
        let d = jx.nrows();
        match *self {
            Perturbation::Zero => {}
            Perturbation::ScaledSine { amplitude } => {
                for i in 0..d {
                    jx[(i, i)] += amplitude * z[i].cos();
                }
            }
            Perturbation::SmoothBump { amplitude, width } => {
                let phi = bump(z, width);
                let w2 = width * width;
                for i in 0..d {
                    jx[(i, i)] += amplitude * phi;
                    for j in 0..d {
                        jx[(i, j)] -= amplitude * phi * z[i] * z[j] / w2;
                        jy[(i, j)] -= amplitude * phi * z[i] * z[d + j] / w2;
                    }
                }
            }
            Perturbation::TanhSaturation { amplitude, gain } => {
                for i in 0..d {
                    let t = (gain * (z[i] + z[d + i])).tanh();
                    let s = amplitude * gain * (T::one() - t * t);
                    jx[(i, i)] += s;
                    jy[(i, i)] += s;
                }
            }
        }
    }

    /// Global Lipschitz bound `kappa_F` implied by the parameters.
    pub fn lipschitz_bound(&self) -> T {
        match *self {
            Perturbation::Zero => T::zero(),
            Perturbation::ScaledSine { amplitude } => amplitude.abs(),
            Perturbation::SmoothBump { amplitude, .. } => {
                amplitude.abs() * T::lit(2.0 * (-0.5f64).exp())
            }
            Perturbation::TanhSaturation { amplitude, gain } => {
                (amplitude * gain).abs() * T::lit(std::f64::consts::SQRT_2)
            }
        }
    }

    pub fn to_entry(&self) -> CatalogueEntry {
        let (name, params) = match *self {
            Perturbation::Zero => ("zero", vec![]),
            Perturbation::ScaledSine { amplitude } => ("scaled_sine", vec![amplitude.as_f64()]),
            Perturbation::SmoothBump { amplitude, width } => {
                ("smooth_bump", vec![amplitude.as_f64(), width.as_f64()])
            }
            Perturbation::TanhSaturation { amplitude, gain } => {
                ("tanh_saturation", vec![amplitude.as_f64(), gain.as_f64()])
            }
        };
        CatalogueEntry {
            name: name.into(),
            params,
        }
    }

    pub fn from_entry(e: &CatalogueEntry) -> Result<Self> {
        let p = |n: usize| -> Result<Vec<T>> {
            if e.params.len() != n {
                return Err(Error::Config(format!(
                    "perturbation `{}` takes {n} parameters, got {}",
                    e.name,
                    e.params.len()
                )));
            }
            if e.params.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "non-finite parameter in `{}`",
                    e.name
                )));
            }
            Ok(e.params.iter().map(|&v| T::lit(v)).collect())
        };
        match e.name.as_str() {
            "zero" => {
                p(0)?;
                Ok(Perturbation::Zero)
            }
            "scaled_sine" => {
                let v = p(1)?;
                Ok(Perturbation::ScaledSine { amplitude: v[0] })
            }
            "smooth_bump" => {
                let v = p(2)?;
                if v[1] <= T::zero() {
                    return Err(Error::Config("smooth_bump width must be positive".into()));
                }
                Ok(Perturbation::SmoothBump {
                    amplitude: v[0],
                    width: v[1],
                })
            }
            "tanh_saturation" => {
                let v = p(2)?;
                Ok(Perturbation::TanhSaturation {
                    amplitude: v[0],
                    gain: v[1],
                })
            }
            other => Err(Error::Config(format!("unknown perturbation `{other}`"))),
        }
    }
}

fn bump<T: Real>(z: &[T], width: T) -> T {
    let r2 = z.iter().fold(T::zero(), |a, &v| a + v * v);
    (-r2 / (T::lit(2.0) * width * width)).exp()
}

/// Convolution-type interaction kernel `F_2(z, zbar)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Interaction<T> {
    /// `F_2(z, zbar) = kappa (xbar - x)`.
    LinearAttraction { kappa: T },
    /// `F_2(z, zbar)_i = kappa sin(xbar_i - x_i)`.
    SineCoupling { kappa: T },
}

/// Finite summary of a measure sufficient to evaluate `∫ F_2(z, .) dmu`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanField<T> {
    pub moments: Vec<T>,
}

impl<T: Real> Interaction<T> {
    /// Lipschitz bound `K_I` in the measure argument (with respect to W2).
    pub fn k_i(&self) -> T {
        match *self {
            Interaction::LinearAttraction { kappa } | Interaction::SineCoupling { kappa } => {
                kappa.abs()
            }
        }
    }

    /// Summary of the empirical measure formed by `points` (each `[x, y]`).
    pub fn summarize<'a>(&self, d: usize, points: impl Iterator<Item = &'a [T]>) -> MeanField<T> {
        let mut n = 0usize;
        let moments = match self {
            Interaction::LinearAttraction { .. } => {
                let mut m = vec![T::zero(); d];
                for p in points {
                    n += 1;
                    for i in 0..d {
                        m[i] += p[i];
                    }
                }
                m
            }
            Interaction::SineCoupling { .. } => {
                let mut m = vec![T::zero(); 2 * d];
                for p in points {
                    n += 1;
                    for i in 0..d {
                        m[i] += p[i].sin();
                        m[d + i] += p[i].cos();
                    }
                }
                m
            }
        };
        let nf = T::from_usize(n.max(1)).unwrap();
        MeanField {
            moments: moments.into_iter().map(|v| v / nf).collect(),
        }
    }

    /// Adds `∫ F_2(z, zbar) mu(dzbar)` using the summary of `mu`.
    pub fn add_from_field(&self, z: &[T], field: &MeanField<T>, out: &mut [T]) {
        let d = out.len();
        match *self {
            Interaction::LinearAttraction { kappa } => {
                for i in 0..d {
                    out[i] += kappa * (field.moments[i] - z[i]);
                }
            }
            Interaction::SineCoupling { kappa } => {
                for i in 0..d {
                    let (s, c) = (field.moments[i], field.moments[d + i]);
                    out[i] += kappa * (s * z[i].cos() - c * z[i].sin());
                }
            }
        }
    }

    /// Adds `F_2(z, zbar)` for a single partner point.
    pub fn add_pair(&self, z: &[T], zbar: &[T], out: &mut [T]) {
        let d = out.len();
        match *self {
            Interaction::LinearAttraction { kappa } => {
                for i in 0..d {
                    out[i] += kappa * (zbar[i] - z[i]);
                }
            }
            Interaction::SineCoupling { kappa } => {
                for i in 0..d {
                    out[i] += kappa * (zbar[i] - z[i]).sin();
                }
            }
        }
    }

    /// Adds the Jacobian of `z -> ∫ F_2(z, .) dmu` (first argument).
    pub fn add_jacobian(&self, z: &[T], field: &MeanField<T>, jx: &mut DMatrix<T>) {
        let d = jx.nrows();
        match *self {
            Interaction::LinearAttraction { kappa } => {
                for i in 0..d {
                    jx[(i, i)] -= kappa;
                }
            }
            Interaction::SineCoupling { kappa } => {
                for i in 0..d {
                    let (s, c) = (field.moments[i], field.moments[d + i]);
                    jx[(i, i)] -= kappa * (s * z[i].sin() + c * z[i].cos());
                }
            }
        }
    }

    pub fn to_entry(&self) -> CatalogueEntry {
        let (name, kappa) = match *self {
            Interaction::LinearAttraction { kappa } => ("linear_attraction", kappa),
            Interaction::SineCoupling { kappa } => ("sine_coupling", kappa),
        };
        CatalogueEntry {
            name: name.into(),
            params: vec![kappa.as_f64()],
        }
    }

    pub fn from_entry(e: &CatalogueEntry) -> Result<Self> {
        if e.params.len() != 1 || !e.params[0].is_finite() {
            return Err(Error::Config(format!(
                "interaction `{}` takes one finite parameter",
                e.name
            )));
        }
        let kappa = T::lit(e.params[0]);
        match e.name.as_str() {
            "linear_attraction" => Ok(Interaction::LinearAttraction { kappa }),
            "sine_coupling" => Ok(Interaction::SineCoupling { kappa }),
            other => Err(Error::Config(format!("unknown interaction `{other}`"))),
        }
    }
}

/// Catalogue item selected by name in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogueEntry {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

/// Serialized form of a [`DriftSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    /// Rows of the `d x d` position matrix `A`.
    pub a: Vec<Vec<f64>>,
    pub gamma: f64,
    #[serde(default)]
    pub perturbation: Option<CatalogueEntry>,
    #[serde(default)]
    pub interaction: Option<CatalogueEntry>,
    pub k_b: f64,
}

/// Serialized form of a [`DiffusionSpec`]; give either `sigma` or `sigma_sq`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    #[serde(default)]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub sigma_sq: Option<Vec<Vec<f64>>>,
}

pub(crate) fn matrix_from_rows<T: Real>(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<T>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!(
            "`{what}` must be a non-empty rectangular matrix"
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("`{what}` has non-finite entries")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| T::lit(rows[i][j])))
}

pub(crate) fn matrix_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect())
        .collect()
}

/// Drift `b(z, mu) = -A x - gamma y + F(z) + ∫ F_2(z, zbar) mu(dzbar)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftSpec<T> {
    d: usize,
    a: DMatrix<T>,
    gamma: T,
    perturbation: Perturbation<T>,
    interaction: Option<Interaction<T>>,
    k_b: T,
}

impl<T: Real> DriftSpec<T> {
    pub fn new(
        a: DMatrix<T>,
        gamma: T,
        perturbation: Perturbation<T>,
        interaction: Option<Interaction<T>>,
        k_b: T,
    ) -> Result<Self> {
        if !(gamma > T::zero()) {
            return Err(Error::InvalidParameter("friction must be positive".into()));
        }
        Self::new_unrestricted(a, gamma, perturbation, interaction, k_b)
    }

    /// Like [`DriftSpec::new`] but admits `gamma = 0`, for drifts outside the
    /// simulated class (for example anti-dissipative inputs to the
    /// dissipativity checks). The integrators reject such specs.
    pub fn new_unrestricted(
        a: DMatrix<T>,
        gamma: T,
        perturbation: Perturbation<T>,
        interaction: Option<Interaction<T>>,
        k_b: T,
    ) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "position matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !(gamma >= T::zero()) {
            return Err(Error::InvalidParameter(
                "friction must be non-negative".into(),
            ));
        }
        if !(k_b >= T::zero()) {
            return Err(Error::InvalidParameter("K_b must be non-negative".into()));
        }
        Ok(Self {
            d,
            a,
            gamma,
            perturbation,
            interaction,
            k_b,
        })
    }

    /// `b = -A x - gamma y` with `K_b` taken as the operator norm of `[-A, -gamma I]`.
    pub fn linear(a: DMatrix<T>, gamma: T) -> Result<Self> {
        let d = a.nrows();
        let mut block = DMatrix::zeros(d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                block[(i, j)] = -a[(i, j)];
            }
            block[(i, d + i)] = -gamma;
        }
        let k_b = operator_norm(&block);
        Self::new(a, gamma, Perturbation::Zero, None, k_b)
    }

    pub fn with_perturbation(mut self, p: Perturbation<T>) -> Self {
        self.perturbation = p;
        self
    }

    pub fn with_interaction(mut self, i: Option<Interaction<T>>) -> Self {
        self.interaction = i;
        self
    }

    pub fn with_k_b(mut self, k_b: T) -> Self {
        self.k_b = k_b;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn linear_position(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn perturbation(&self) -> &Perturbation<T> {
        &self.perturbation
    }

    pub fn interaction(&self) -> Option<&Interaction<T>> {
        self.interaction.as_ref()
    }

    pub fn k_b(&self) -> T {
        self.k_b
    }

    /// `K_I`, zero without an interaction.
    pub fn k_i(&self) -> T {
        self.interaction.as_ref().map_or(T::zero(), |i| i.k_i())
    }

    pub fn is_linear(&self) -> bool {
        self.perturbation == Perturbation::Zero
    }

    /// Summarizes `mu` for repeated evaluation; `None` when there is no interaction.
    pub fn field(&self, mu: Option<&Ensemble<T>>) -> Result<Option<MeanField<T>>> {
        match (&self.interaction, mu) {
            (None, _) => Ok(None),
            (Some(_), None) => Err(Error::MissingMeasure),
            (Some(i), Some(m)) => {
                if m.dim() != self.d {
                    return Err(Error::DimensionMismatch(format!(
                        "measure of dimension {} for drift of dimension {}",
                        m.dim(),
                        self.d
                    )));
                }
                Ok(Some(i.summarize(self.d, m.points())))
            }
        }
    }

    /// Field of the point mass at `z`.
    pub fn point_field(&self, z: &[T]) -> Option<MeanField<T>> {
        self.interaction
            .as_ref()
            .map(|i| i.summarize(self.d, std::iter::once(z)))
    }

    /// Everything except friction: `-A x + F(z) + interaction`.
    #[inline]
    pub fn force_into(&self, z: &[T], field: Option<&MeanField<T>>, out: &mut [T]) {
        let d = self.d;
        for i in 0..d {
            let mut s = T::zero();
            for j in 0..d {
                s -= self.a[(i, j)] * z[j];
            }
            out[i] = s;
        }
        self.perturbation.add_into(z, out);
        if let (Some(inter), Some(f)) = (&self.interaction, field) {
            inter.add_from_field(z, f, out);
        }
    }

    /// Full drift at a stacked point `z` for a pre-summarized measure.
    #[inline]
    pub fn drift_into(&self, z: &[T], field: Option<&MeanField<T>>, out: &mut [T]) {
        self.force_into(z, field, out);
        for i in 0..self.d {
            out[i] -= self.gamma * z[self.d + i];
        }
    }

    /// Jacobian blocks `(d_x b, d_y b)` at a stacked point.
    pub fn jacobian_into(
        &self,
        z: &[T],
        field: Option<&MeanField<T>>,
        jx: &mut DMatrix<T>,
        jy: &mut DMatrix<T>,
    ) {
        let d = self.d;
        for i in 0..d {
            for j in 0..d {
                jx[(i, j)] = -self.a[(i, j)];
                jy[(i, j)] = T::zero();
            }
            jy[(i, i)] = -self.gamma;
        }
        self.perturbation.add_jacobian(z, jx, jy);
        if let (Some(inter), Some(f)) = (&self.interaction, field) {
            inter.add_jacobian(z, f, jx);
        }
    }

    fn check_point(&self, z: &PhasePoint<T>) -> Result<()> {
        if z.dim() != self.d || z.y.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "point of dimension {} for drift of dimension {}",
                z.dim(),
                self.d
            )));
        }
        Ok(())
    }

    /// `b(z, mu)`; `mu` is required exactly when an interaction is present.
    pub fn eval_drift(&self, z: &PhasePoint<T>, mu: Option<&Ensemble<T>>) -> Result<DVector<T>> {
        self.check_point(z)?;
        let field = self.field(mu)?;
        let mut out = vec![T::zero(); self.d];
        self.drift_into(&z.stacked(), field.as_ref(), &mut out);
        Ok(DVector::from_vec(out))
    }

    /// `(∇_x b, ∇_y b)` at `(z, mu)`, interaction differentiated in its first argument.
    pub fn eval_jacobian(
        &self,
        z: &PhasePoint<T>,
        mu: Option<&Ensemble<T>>,
    ) -> Result<(DMatrix<T>, DMatrix<T>)> {
        self.check_point(z)?;
        let field = self.field(mu)?;
        let mut jx = DMatrix::zeros(self.d, self.d);
        let mut jy = DMatrix::zeros(self.d, self.d);
        self.jacobian_into(&z.stacked(), field.as_ref(), &mut jx, &mut jy);
        Ok((jx, jy))
    }

    /// Largest observed ratio `|b(z) - b(zbar)| / |z - zbar|` on random pairs
    /// (measure frozen at the point mass at the origin).
    pub fn probe_lipschitz(&self, trials: usize, radius: f64, seed: u64) -> T {
        let d = self.d;
        let field = self.point_field(&vec![T::zero(); 2 * d]);
        let mut rng = StreamKey::new(seed, 0x11).rng();
        let mut worst = T::zero();
        let mut b1 = vec![T::zero(); d];
        let mut b2 = vec![T::zero(); d];
        for t in 0..trials {
            let z: Vec<T> = rng.in_ball(2 * d, radius).into_iter().map(T::lit).collect();
            let scale = if t % 2 == 0 { 1e-3 } else { radius };
            let dz = rng.in_ball(2 * d, scale);
            let zb: Vec<T> = z.iter().zip(&dz).map(|(&a, &b)| a + T::lit(b)).collect();
            self.drift_into(&z, field.as_ref(), &mut b1);
            self.drift_into(&zb, field.as_ref(), &mut b2);
            let num = b1
                .iter()
                .zip(&b2)
                .fold(T::zero(), |a, (&u, &v)| a + (u - v) * (u - v))
                .sqrt();
            let den = T::lit(dz.iter().map(|v| v * v).sum::<f64>().sqrt());
            if den > T::zero() && num / den > worst {
                worst = num / den;
            }
        }
        worst
    }

    /// Largest observed operator norms of `∇_x b` and `∇_y b` at random states.
    pub fn probe_jacobian_norms(&self, trials: usize, radius: f64, seed: u64) -> (T, T) {
        let d = self.d;
        let field = self.point_field(&vec![T::zero(); 2 * d]);
        let mut rng = StreamKey::new(seed, 0x12).rng();
        let mut jx = DMatrix::zeros(d, d);
        let mut jy = DMatrix::zeros(d, d);
        let (mut wx, mut wy) = (T::zero(), T::zero());
        for _ in 0..trials {
            let z: Vec<T> = rng.in_ball(2 * d, radius).into_iter().map(T::lit).collect();
            self.jacobian_into(&z, field.as_ref(), &mut jx, &mut jy);
            wx = wx.max(operator_norm(&jx));
            wy = wy.max(operator_norm(&jy));
        }
        (wx, wy)
    }

    /// Rejects a declared `K_b` below the probed Lipschitz ratio.
    pub fn validate_k_b(&self, trials: usize, seed: u64) -> Result<()> {
        let observed = self.probe_lipschitz(trials, 10.0, seed);
        if observed > self.k_b * (T::one() + T::lit(1e-9)) + T::lit(1e-12) {
            return Err(Error::KbUnderdeclared {
                declared: self.k_b.as_f64(),
                observed: observed.as_f64(),
            });
        }
        Ok(())
    }

    pub fn to_config(&self) -> DriftConfig {
        DriftConfig {
            a: matrix_rows(&self.a),
            gamma: self.gamma.as_f64(),
            perturbation: Some(self.perturbation.to_entry()),
            interaction: self.interaction.as_ref().map(|i| i.to_entry()),
            k_b: self.k_b.as_f64(),
        }
    }

    /// Builds and probe-checks a drift from its serialized form.
    pub fn from_config(cfg: &DriftConfig) -> Result<Self> {
        let a = matrix_from_rows::<T>(&cfg.a, "a")?;
        let perturbation = match &cfg.perturbation {
            Some(e) => Perturbation::from_entry(e)?,
            None => Perturbation::Zero,
        };
        let interaction = cfg
            .interaction
            .as_ref()
            .map(Interaction::from_entry)
            .transpose()?;
        if !cfg.gamma.is_finite() || !cfg.k_b.is_finite() {
            return Err(Error::Config("gamma and k_b must be finite".into()));
        }
        // Frictionless drifts are accepted here so that they can be checked;
        // simulation rejects them.
        let spec = Self::new_unrestricted(
            a,
            T::lit(cfg.gamma),
            perturbation,
            interaction,
            T::lit(cfg.k_b),
        )?;
        spec.validate_k_b(512, 0x5eed)?;
        Ok(spec)
    }
}

/// Spectral norm of a (possibly rectangular) matrix.
pub fn operator_norm<T: Real>(m: &DMatrix<T>) -> T {
    let g = m.transpose() * m;
    g.symmetric_eigenvalues()
        .iter()
        .fold(T::zero(), |a, &v| a.max(v))
        .sqrt()
}

/// Drift of the N-particle system on `(R^{2d})^N`.
#[derive(Clone, Debug)]
pub struct SystemDrift<T> {
    spec: DriftSpec<T>,
    n: usize,
}

/// Lifts `spec` to `N` particles interacting through their empirical measure.
pub fn lift_to_system<T: Real>(spec: &DriftSpec<T>, n: usize) -> Result<SystemDrift<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "particle count must be at least 1".into(),
        ));
    }
    Ok(SystemDrift {
        spec: spec.clone(),
        n,
    })
}

impl<T: Real> SystemDrift<T> {
    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &DriftSpec<T> {
        &self.spec
    }

    /// Evaluates the drift on a particle-major stacked state (`N * 2d` values);
    /// returns `N * d` velocity derivatives.
    pub fn eval(&self, state: &[T]) -> Result<Vec<T>> {
        let d = self.spec.d;
        if state.len() != self.n * 2 * d {
            return Err(Error::DimensionMismatch(format!(
                "stacked state has {} values, expected {}",
                state.len(),
                self.n * 2 * d
            )));
        }
        let field = self
            .spec
            .interaction
            .as_ref()
            .map(|i| i.summarize(d, state.chunks_exact(2 * d)));
        let mut out = vec![T::zero(); self.n * d];
        for (z, o) in state.chunks_exact(2 * d).zip(out.chunks_exact_mut(d)) {
            self.spec.drift_into(z, field.as_ref(), o);
        }
        Ok(out)
    }

    /// `sqrt(2 K_b^2 + 2 K_I^2)`.
    pub fn lipschitz_bound(&self) -> T {
        let kb = self.spec.k_b;
        let ki = self.spec.k_i();
        (T::lit(2.0) * kb * kb + T::lit(2.0) * ki * ki).sqrt()
    }
}

/// Constant diffusion matrix `sigma` (`d x n`) with ellipticity bounds
/// `delta2 <= eig(sigma sigma^T) <= delta1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSpec<T> {
    sigma: DMatrix<T>,
    sigma_sq: DMatrix<T>,
    delta1: T,
    delta2: T,
}

impl<T: Real> DiffusionSpec<T> {
    pub fn new(sigma: DMatrix<T>) -> Result<Self> {
        if sigma.nrows() == 0 || sigma.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty diffusion matrix".into()));
        }
        let sigma_sq = &sigma * sigma.transpose();
        let eig = sigma_sq.symmetric_eigenvalues();
        let delta1 = eig.iter().fold(T::min_value().unwrap(), |a, &v| a.max(v));
        let delta2 = eig.iter().fold(T::max_value().unwrap(), |a, &v| a.min(v));
        if !(delta2 > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "sigma sigma^T is not positive definite (smallest eigenvalue {})",
                delta2.as_f64()
            )));
        }
        Ok(Self {
            sigma,
            sigma_sq,
            delta1,
            delta2,
        })
    }

    /// `sigma = s I_d`.
    pub fn isotropic(d: usize, s: T) -> Result<Self> {
        Self::new(DMatrix::identity(d, d) * s)
    }

    /// Builds `sigma` as the Cholesky factor of a prescribed `sigma sigma^T`.
    pub fn from_sigma_sq(sigma_sq: DMatrix<T>) -> Result<Self> {
        let sym = (&sigma_sq + sigma_sq.transpose()) * T::lit(0.5);
        let chol = sym.cholesky().ok_or_else(|| {
            Error::InvalidParameter("sigma sigma^T must be positive definite".into())
        })?;
        Self::new(chol.l())
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.sigma.ncols()
    }

    pub fn sigma(&self) -> &DMatrix<T> {
        &self.sigma
    }

    pub fn sigma_sq(&self) -> &DMatrix<T> {
        &self.sigma_sq
    }

    /// Upper ellipticity bound (largest eigenvalue of `sigma sigma^T`).
    pub fn delta1(&self) -> T {
        self.delta1
    }

    /// Lower ellipticity bound (smallest eigenvalue of `sigma sigma^T`).
    pub fn delta2(&self) -> T {
        self.delta2
    }

    pub fn to_config(&self) -> DiffusionConfig {
        DiffusionConfig {
            sigma: Some(matrix_rows(&self.sigma)),
            sigma_sq: None,
        }
    }

    pub fn from_config(cfg: &DiffusionConfig) -> Result<Self> {
        match (&cfg.sigma, &cfg.sigma_sq) {
            (Some(s), None) => Self::new(matrix_from_rows(s, "sigma")?),
            (None, Some(q)) => Self::from_sigma_sq(matrix_from_rows(q, "sigma_sq")?),
            _ => Err(Error::Config(
                "diffusion needs exactly one of `sigma` or `sigma_sq`".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pp(x: f64, y: f64) -> PhasePoint<f64> {
        PhasePoint::new(vec![x], vec![y]).unwrap()
    }

    #[test]
    fn linear_drift_value() {
        let s = DriftSpec::linear(DMatrix::identity(1, 1), 1.0).unwrap();
        assert_eq!(s.eval_drift(&pp(1.0, 2.0), None).unwrap()[0], -3.0);
    }

    #[test]
    fn linear_interaction_value() {
        let s = DriftSpec::linear(DMatrix::identity(1, 1), 1.0)
            .unwrap()
            .with_interaction(Some(Interaction::LinearAttraction { kappa: 0.1 }));
        let mu = Ensemble::new(1, vec![1.0, 0.0, 3.0, 0.0]).unwrap();
        let b = s.eval_drift(&pp(0.0, 0.0), Some(&mu)).unwrap();
        assert_relative_eq!(b[0], 0.2, epsilon = 1e-15);
        assert!(matches!(
            s.eval_drift(&pp(0.0, 0.0), None),
            Err(Error::MissingMeasure)
        ));
    }

    #[test]
    fn sine_value_and_jacobian() {
        let s = DriftSpec::linear(DMatrix::identity(1, 1), 1.0)
            .unwrap()
            .with_perturbation(Perturbation::ScaledSine { amplitude: 0.5 });
        let half_pi = std::f64::consts::FRAC_PI_2;
        let b = s.eval_drift(&pp(half_pi, 0.0), None).unwrap();
        assert_relative_eq!(b[0], -half_pi + 0.5, epsilon = 1e-15);
        let (jx, jy) = s.eval_jacobian(&pp(0.0, 0.0), None).unwrap();
        assert_relative_eq!(jx[(0, 0)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(jy[(0, 0)], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let s = DriftSpec::linear(DMatrix::identity(2, 2), 1.0).unwrap();
        assert!(matches!(
            s.eval_drift(&pp(0.0, 0.0), None),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(PhasePoint::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(Ensemble::new(1, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn catalogue_roundtrip() {
        for p in [
            Perturbation::Zero,
            Perturbation::ScaledSine { amplitude: 0.3 },
            Perturbation::SmoothBump {
                amplitude: 0.2,
                width: 1.5,
            },
            Perturbation::TanhSaturation {
                amplitude: 0.1,
                gain: 2.0,
            },
        ] {
            assert_eq!(Perturbation::<f64>::from_entry(&p.to_entry()).unwrap(), p);
        }
        let bad = CatalogueEntry {
            name: "cubic".into(),
            params: vec![],
        };
        assert!(Perturbation::<f64>::from_entry(&bad).is_err());
    }

    #[test]
    fn config_rejects_underdeclared_k_b() {
        let cfg = DriftConfig {
            a: vec![vec![1.0]],
            gamma: 1.0,
            perturbation: None,
            interaction: None,
            k_b: 0.5,
        };
        assert!(matches!(
            DriftSpec::<f64>::from_config(&cfg),
            Err(Error::KbUnderdeclared { .. })
        ));
    }

    #[test]
    fn diffusion_bounds() {
        let s = DiffusionSpec::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(s.delta1(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(s.delta2(), 1.0, epsilon = 1e-12);
        assert!(DiffusionSpec::new(DMatrix::<f64>::zeros(1, 1)).is_err());
        let q = DiffusionSpec::from_sigma_sq(DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_relative_eq!(q.sigma_sq()[(0, 0)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn generic_over_f32() {
        let s = DriftSpec::<f32>::linear(DMatrix::identity(1, 1), 1.0).unwrap();
        let z = PhasePoint::new(vec![1.0f32], vec![2.0f32]).unwrap();
        assert_eq!(s.eval_drift(&z, None).unwrap()[0], -3.0f32);
    }
}
