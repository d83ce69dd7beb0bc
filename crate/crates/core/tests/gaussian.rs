use kinetic_ergo::gaussian::{
    flow_matrix, invariant_law, kl_gaussian, lyapunov_residual, poincare_constant, transition_law,
    w2_gaussian,
};
use kinetic_ergo::{GaussianLaw, LinearModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Stable model: `A = S + K` with `S >= 0.5 I` and `|K| < 0.6 gamma`, so every eigenvalue
/// `mu` of `A` has `Im(mu)^2 < gamma^2 Re(mu)`.
fn model_strategy() -> impl Strategy<Value = LinearModel<f64>> {
    (
        prop::collection::vec(-0.5..0.5f64, 4),
        0.3..2.0f64,
        -1.0..1.0f64,
        0.2..1.5f64,
        0.2..1.5f64,
    )
        .prop_map(|(p, gamma, skew, s1, s2)| {
            let m = DMatrix::from_row_slice(2, 2, &p);
            let a = &m * m.transpose()
                + DMatrix::identity(2, 2) * 0.5
                + DMatrix::from_row_slice(2, 2, &[0.0, skew, -skew, 0.0]) * (0.6 * gamma);
            let sigma_sq = DMatrix::from_diagonal(&DVector::from_vec(vec![s1, s2]));
            LinearModel::new(&a, gamma, &sigma_sq).unwrap()
        })
}

fn law_strategy() -> impl Strategy<Value = GaussianLaw<f64>> {
    (
        prop::collection::vec(-2.0..2.0f64, 4),
        prop::collection::vec(-0.6..0.6f64, 16),
    )
        .prop_map(|(m, l)| {
            let l = DMatrix::from_row_slice(4, 4, &l) + DMatrix::identity(4, 4);
            let cov = &l * l.transpose();
            GaussianLaw::new(DVector::from_vec(m), (&cov + cov.transpose()) * 0.5).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariant_covariance_solves_the_lyapunov_equation(model in model_strategy()) {
        let law = invariant_law(&model).unwrap();
        let scale = law.cov().amax().max(1.0);
        prop_assert!(lyapunov_residual(model.b(), law.cov(), model.q()) < 1e-10 * scale);
        prop_assert!(law.cov().symmetric_eigenvalues().min() > 0.0);
        prop_assert!(model.decay_rate() > 0.0);
    }

    #[test]
    fn transition_laws_compose(model in model_strategy(), mu in law_strategy(), s in 0.0..3.0f64, t in 0.0..3.0f64) {
        let direct = transition_law(&model, &mu, s + t).unwrap();
        let composed = transition_law(&model, &transition_law(&model, &mu, s).unwrap(), t).unwrap();
        prop_assert!((direct.mean() - composed.mean()).amax() < 1e-9);
        prop_assert!((direct.cov() - composed.cov()).amax() < 1e-9);
        let flow = flow_matrix(&model, s + t);
        prop_assert!((direct.mean() - &flow * mu.mean()).amax() < 1e-9);
    }

    #[test]
    fn invariant_law_is_fixed_by_the_semigroup(model in model_strategy(), t in 0.1..5.0f64) {
        let law = invariant_law(&model).unwrap();
        let moved = transition_law(&model, &law, t).unwrap();
        prop_assert!(w2_gaussian(&moved, &law).unwrap() < 1e-6);
        prop_assert!(kl_gaussian(&moved, &law).unwrap().abs() < 1e-9);
    }

    #[test]
    fn closed_form_divergences_are_consistent(p in law_strategy(), q in law_strategy()) {
        let (pq, qp) = (w2_gaussian(&p, &q).unwrap(), w2_gaussian(&q, &p).unwrap());
        prop_assert!((pq - qp).abs() < 1e-8 * (1.0 + pq));
        prop_assert!(w2_gaussian(&p, &p).unwrap() < 1e-6);
        prop_assert!(kl_gaussian(&p, &q).unwrap() >= -1e-12);
        prop_assert!(kl_gaussian(&p, &p).unwrap().abs() < 1e-10);
        // Gaussian Talagrand inequality against q.
        let c = poincare_constant(&q);
        prop_assert!(pq * pq <= 2.0 * c * kl_gaussian(&p, &q).unwrap() * (1.0 + 1e-9) + 1e-12);
    }
}

#[test]
fn damped_oscillator_closed_forms() {
    let model = LinearModel::<f64>::new(
        &DMatrix::from_element(1, 1, 1.0),
        1.0,
        &DMatrix::from_element(1, 1, 2.0),
    )
    .unwrap();
    assert!((model.decay_rate() - 0.5).abs() < 1e-12);
    assert!((model.oscillation_frequency() - 3f64.sqrt() / 2.0).abs() < 1e-12);
    // Shifted means: W2 is the mean distance, KL half its square under identity covariance.
    let p = GaussianLaw::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::identity(2, 2)).unwrap();
    let q = GaussianLaw::<f64>::standard(2);
    assert!((w2_gaussian(&p, &q).unwrap() - 5f64.sqrt()).abs() < 1e-12);
    assert!((kl_gaussian(&p, &q).unwrap() - 2.5).abs() < 1e-12);
}
