//! Closed-form oracle for linear drifts `b = -A x - gamma y` with constant noise.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::model::{DiffusionSpec, DriftSpec, Ensemble, Interaction};
use crate::rng::StreamKey;
use crate::scalar::Real;

/// Gaussian law on `R^k` (usually `k = 2d`).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLaw<T> {
    mean: DVector<T>,
    cov: DMatrix<T>,
}

impl<T: Real> GaussianLaw<T> {
    /// Validates symmetry (1e-12) and PSD-ness (eigenvalues >= -1e-12, clamped).
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        let k = mean.len();
        if k == 0 || cov.nrows() != k || cov.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {k} with {}x{} covariance",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian parameters".into()));
        }
        let scale = cov.iter().fold(T::one(), |a, v| a.max(v.abs()));
        let tol = T::lit(1e-12) * scale;
        for i in 0..k {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > tol {
                    return Err(Error::InvalidParameter(
                        "covariance is not symmetric".into(),
                    ));
                }
            }
        }
        let sym = (&cov + cov.transpose()) * T::lit(0.5);
        let eig = sym.clone().symmetric_eigen();
        let min = eig
            .eigenvalues
            .iter()
            .fold(T::max_value().unwrap(), |a, &v| a.min(v));
        if min < -tol {
            return Err(Error::InvalidParameter(format!(
                "covariance has negative eigenvalue {}",
                min.as_f64()
            )));
        }
        let cov = if min < T::zero() {
            let clamped = eig.eigenvalues.map(|v| v.max(T::zero()));
            &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
        } else {
            sym
        };
        Ok(Self { mean, cov })
    }

    pub fn standard(k: usize) -> Self {
        Self {
            mean: DVector::zeros(k),
            cov: DMatrix::identity(k, k),
        }
    }

    pub fn point_mass(mean: DVector<T>) -> Self {
        let k = mean.len();
        Self {
            mean,
            cov: DMatrix::zeros(k, k),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<T> {
        &self.cov
    }

    /// Fits mean and (1/n-normalized) covariance of an ensemble.
    pub fn fit(ens: &Ensemble<T>) -> Result<Self> {
        Self::new(ens.mean(), ens.covariance())
    }

    /// `n` i.i.d. draws as a flat row-major array.
    pub fn sample_flat(&self, n: usize, key: StreamKey) -> Vec<T> {
        let k = self.dim();
        let factor = psd_factor(&self.cov);
        let mut rng = key.rng();
        let mut g = vec![0.0; k];
        let mut out = Vec::with_capacity(n * k);
        for _ in 0..n {
            rng.normals(&mut g);
            for i in 0..k {
                let mut v = self.mean[i];
                for j in 0..k {
                    v += factor[(i, j)] * T::lit(g[j]);
                }
                out.push(v);
            }
        }
        out
    }

    /// `n` i.i.d. draws as a phase-space ensemble (requires even dimension).
    pub fn sample(&self, n: usize, key: StreamKey) -> Result<Ensemble<T>> {
        if self.dim() % 2 != 0 {
            return Err(Error::DimensionMismatch(
                "phase-space sampling needs an even dimension".into(),
            ));
        }
        Ensemble::new(self.dim() / 2, self.sample_flat(n, key))
    }
}

/// Symmetric eigendecomposition with eigenvalues clamped at zero.
fn clamped_eigen<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.map(|v| v.max(T::zero())), eig.eigenvectors)
}

/// Principal square root of a PSD matrix.
pub fn sqrtm_psd<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let (vals, vecs) = clamped_eigen(m);
    &vecs * DMatrix::from_diagonal(&vals.map(|v| v.sqrt())) * vecs.transpose()
}

/// A factor `L` with `L L^T = m` for PSD `m`.
fn psd_factor<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let (vals, vecs) = clamped_eigen(m);
    &vecs * DMatrix::from_diagonal(&vals.map(|v| v.sqrt()))
}

/// Linear kinetic model `dz = B z dt + noise` with `B = [[0, I], [-A, -gamma I]]`,
/// `Q = diag(0, sigma sigma^T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel<T> {
    d: usize,
    b: DMatrix<T>,
    q: DMatrix<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn new(a: &DMatrix<T>, gamma: T, sigma_sq: &DMatrix<T>) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d || sigma_sq.nrows() != d || sigma_sq.ncols() != d {
            return Err(Error::DimensionMismatch("linear model blocks".into()));
        }
        let mut b = DMatrix::zeros(2 * d, 2 * d);
        let mut q = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            b[(i, d + i)] = T::one();
            b[(d + i, d + i)] = -gamma;
            for j in 0..d {
                b[(d + i, j)] = -a[(i, j)];
                q[(d + i, d + j)] = sigma_sq[(i, j)];
            }
        }
        let model = Self { d, b, q };
        let abscissa = model.spectral_abscissa();
        if !(abscissa < T::zero()) {
            return Err(Error::NotHurwitz(abscissa.as_f64()));
        }
        Ok(model)
    }

    /// Model of a linear drift without interaction.
    pub fn from_specs(drift: &DriftSpec<T>, diff: &DiffusionSpec<T>) -> Result<Self> {
        if !drift.is_linear() || drift.interaction().is_some() {
            return Err(Error::InvalidParameter(
                "the Gaussian oracle needs a linear, non-interacting drift".into(),
            ));
        }
        Self::new(drift.linear_position(), drift.gamma(), diff.sigma_sq())
    }

    /// Linear model whose invariant law is the stationary McKean-Vlasov law of a
    /// linear drift with `kappa (xbar - x)` attraction (centred case: `A + kappa I`).
    pub fn self_consistent(drift: &DriftSpec<T>, diff: &DiffusionSpec<T>) -> Result<Self> {
        if !drift.is_linear() {
            return Err(Error::InvalidParameter("drift must be linear".into()));
        }
        let d = drift.dim();
        let shift = match drift.interaction() {
            None => T::zero(),
            Some(Interaction::LinearAttraction { kappa }) => *kappa,
            Some(_) => {
                return Err(Error::InvalidParameter(
                    "only linear attraction has a Gaussian self-consistent law".into(),
                ))
            }
        };
        let a = drift.linear_position() + DMatrix::identity(d, d) * shift;
        Self::new(&a, drift.gamma(), diff.sigma_sq())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    /// Largest real part among the eigenvalues of `B`.
    pub fn spectral_abscissa(&self) -> T {
        self.b
            .complex_eigenvalues()
            .iter()
            .fold(T::min_value().unwrap(), |a, c| a.max(c.re))
    }

    /// Asymptotic exponential decay rate `-max Re eig(B)`.
    pub fn decay_rate(&self) -> T {
        -self.spectral_abscissa()
    }

    /// Largest imaginary part among the slowest eigenvalues (0 if they are real).
    pub fn oscillation_frequency(&self) -> T {
        let eig = self.b.complex_eigenvalues();
        let top = eig.iter().fold(T::min_value().unwrap(), |a, c| a.max(c.re));
        let tol = T::lit(1e-8) * (T::one() + top.abs());
        eig.iter()
            .filter(|c| (c.re - top).abs() <= tol)
            .fold(T::zero(), |a, c| a.max(c.im.abs()))
    }
}

/// Solves `B S + S B^T + Q = 0` by the Bartels-Stewart method on the real Schur form.
pub fn solve_lyapunov<T: Real>(b: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = b.nrows();
    if b.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch("Lyapunov operands".into()));
    }
    let schur = Schur::try_new(b.clone(), T::machine_eps(), 10_000)
        .ok_or_else(|| Error::NonFinite("real Schur decomposition did not converge".into()))?;
    let (u, t) = schur.unpack();
    // T Y + Y T^T = C in the Schur basis.
    let c = -(u.transpose() * q * &u);

    let norm = t.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let tol = T::machine_eps() * T::lit(100.0) * (T::one() + norm);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > tol {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }

    let mut y = DMatrix::<T>::zeros(n, n);
    for (bp, &(p0, sp)) in blocks.iter().enumerate().rev() {
        for &(q0, sq) in blocks.iter().rev() {
            let mut rhs = c.view((p0, q0), (sp, sq)).clone_owned();
            // Contributions from blocks already solved.
            let below = p0 + sp;
            if below < n {
                rhs -= t.view((p0, below), (sp, n - below)) * y.view((below, q0), (n - below, sq));
            }
            let right = q0 + sq;
            if right < n {
                rhs -= y.view((p0, right), (sp, n - right))
                    * t.view((q0, right), (sq, n - right)).transpose();
            }
            let tpp = t.view((p0, p0), (sp, sp)).clone_owned();
            let tqq = t.view((q0, q0), (sq, sq)).clone_owned();
            let k = small_sylvester_operator(&tpp, &tqq);
            let vec_rhs = DVector::from_iterator(sp * sq, rhs.iter().copied());
            let sol = k.lu().solve(&vec_rhs).ok_or_else(|| {
                Error::SingularCovariance(format!(
                    "Lyapunov operator singular at block {bp} (eigenvalues sum to zero)"
                ))
            })?;
            for jj in 0..sq {
                for ii in 0..sp {
                    y[(p0 + ii, q0 + jj)] = sol[jj * sp + ii];
                }
            }
        }
    }
    let s = &u * y * u.transpose();
    Ok((&s + s.transpose()) * T::lit(0.5))
}

/// Matrix of `Y -> Tpp Y + Y Tqq^T` acting on column-major `vec(Y)`.
fn small_sylvester_operator<T: Real>(tpp: &DMatrix<T>, tqq: &DMatrix<T>) -> DMatrix<T> {
    let (sp, sq) = (tpp.nrows(), tqq.nrows());
    let ip = DMatrix::<T>::identity(sp, sp);
    let iq = DMatrix::<T>::identity(sq, sq);
    iq.kronecker(tpp) + tqq.kronecker(&ip)
}

/// Frobenius norm of `B S + S B^T + Q`.
pub fn lyapunov_residual<T: Real>(b: &DMatrix<T>, s: &DMatrix<T>, q: &DMatrix<T>) -> T {
    (b * s + s * b.transpose() + q).norm()
}

/// The unique invariant law `N(0, S)` of a Hurwitz linear model.
pub fn invariant_law<T: Real>(model: &LinearModel<T>) -> Result<GaussianLaw<T>> {
    let s = solve_lyapunov(&model.b, &model.q)?;
    GaussianLaw::new(DVector::zeros(2 * model.d), s)
}

/// `(e^{tB}, ∫_0^t e^{sB} Q e^{sB^T} ds)` via the Van Loan block exponential,
/// evaluated on a short step and extended by repeated doubling.
pub fn van_loan<T: Real>(b: &DMatrix<T>, q: &DMatrix<T>, t: T) -> (DMatrix<T>, DMatrix<T>) {
    let n = b.nrows();
    let bnorm = b.iter().fold(T::zero(), |a, v| a + v.abs());
    let mut halvings = 0u32;
    let mut tau = t;
    while tau * bnorm > T::lit(0.5) && halvings < 200 {
        tau *= T::lit(0.5);
        halvings += 1;
    }
    let mut m = DMatrix::<T>::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-b * tau));
    m.view_mut((0, n), (n, n)).copy_from(&(q * tau));
    m.view_mut((n, n), (n, n)).copy_from(&(b.transpose() * tau));
    let f = m.exp();
    let f12 = f.view((0, n), (n, n)).clone_owned();
    let f22 = f.view((n, n), (n, n)).clone_owned();
    let mut phi = f22.transpose();
    let mut w = &phi * f12;
    w = (&w + w.transpose()) * T::lit(0.5);
    for _ in 0..halvings {
        w = &w + &phi * &w * phi.transpose();
        w = (&w + w.transpose()) * T::lit(0.5);
        phi = &phi * &phi;
    }
    (phi, w)
}

/// Exact law at time `t` of the linear model started from `mu0`.
pub fn transition_law<T: Real>(
    model: &LinearModel<T>,
    mu0: &GaussianLaw<T>,
    t: T,
) -> Result<GaussianLaw<T>> {
    if mu0.dim() != 2 * model.d {
        return Err(Error::DimensionMismatch("initial law dimension".into()));
    }
    if t < T::zero() {
        return Err(Error::InvalidParameter("time must be non-negative".into()));
    }
    if t == T::zero() {
        return Ok(mu0.clone());
    }
    let (phi, w) = van_loan(&model.b, &model.q, t);
    let mean = &phi * &mu0.mean;
    let cov = &phi * &mu0.cov * phi.transpose() + w;
    GaussianLaw::new(mean, (&cov + cov.transpose()) * T::lit(0.5))
}

/// `e^{tB}` for the model.
pub fn flow_matrix<T: Real>(model: &LinearModel<T>, t: T) -> DMatrix<T> {
    (&model.b * t).exp()
}

/// Closed-form W2 distance between Gaussian laws.
pub fn w2_gaussian<T: Real>(p: &GaussianLaw<T>, q: &GaussianLaw<T>) -> Result<T> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(
            "laws of different dimension".into(),
        ));
    }
    let dm = &p.mean - &q.mean;
    let rq = sqrtm_psd(&q.cov);
    let cross = sqrtm_psd(&(&rq * &p.cov * &rq));
    let w2 = dm.norm_squared() + p.cov.trace() + q.cov.trace() - T::lit(2.0) * cross.trace();
    Ok(w2.max(T::zero()).sqrt())
}

/// Relative entropy `Ent(p | q)`; infinite when `p` is degenerate.
pub fn kl_gaussian<T: Real>(p: &GaussianLaw<T>, q: &GaussianLaw<T>) -> Result<T> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(
            "laws of different dimension".into(),
        ));
    }
    let k = p.dim();
    let cq = q
        .cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularCovariance("reference covariance is singular".into()))?;
    let Some(cp) = p.cov.clone().cholesky() else {
        return Ok(T::lit(f64::INFINITY));
    };
    let logdet = |l: &DMatrix<T>| (0..k).fold(T::zero(), |a, i| a + l[(i, i)].ln()) * T::lit(2.0);
    let tr = cq.solve(&p.cov).trace();
    let dm = &q.mean - &p.mean;
    let maha = dm.dot(&cq.solve(&dm));
    let kl =
        T::lit(0.5) * (tr + maha - T::from_usize(k).unwrap() + logdet(&cq.l()) - logdet(&cp.l()));
    Ok(kl.max(T::zero()))
}

/// Gaussian Poincare constant: the largest covariance eigenvalue.
pub fn poincare_constant<T: Real>(law: &GaussianLaw<T>) -> T {
    clamped_eigen(&law.cov)
        .0
        .iter()
        .fold(T::zero(), |a, &v| a.max(v))
}
