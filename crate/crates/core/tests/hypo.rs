use kinetic_ergo::gaussian::{flow_matrix, invariant_law, poincare_constant};
use kinetic_ergo::hypo::{
    alpha_sq_integral, build_constants, build_weight, check_rt_negativity, eval_functional,
    semigroup_at, semigroup_gradient_fd, HypoMc, TestFunction,
};
use kinetic_ergo::{DiffusionSpec, DriftSpec, Error, LinearModel, Perturbation, StreamKey};
use nalgebra::{DMatrix, DVector};

fn linear_d1() -> (DriftSpec<f64>, DiffusionSpec<f64>) {
    let drift = DriftSpec::linear(DMatrix::identity(1, 1), 1.0).unwrap();
    let diff = DiffusionSpec::isotropic(1, 2f64.sqrt()).unwrap();
    (drift, diff)
}

#[test]
fn velocity_coefficient_identity_on_random_inputs() {
    let mut rng = StreamKey::new(1, 0).rng();
    for _ in 0..100 {
        let k = rng.uniform_range(0.0, 5.0);
        let d1 = rng.uniform_range(0.01, 10.0);
        let c = build_constants(k, d1, 1.0).unwrap();
        let lhs = c.eps * c.m - c.delta1;
        assert!(lhs < 0.0);
        assert!((lhs + d1 / (2.0 * c.m + 1.0)).abs() <= 1e-14 * d1);
    }
}

#[test]
fn weight_quadratic_form_is_capped() {
    let c = build_constants(1.5, 2.0, 1.0).unwrap();
    let mut rng = StreamKey::new(2, 0).rng();
    for t in [0.0, 0.5, 3.0, 10.0, 100.0] {
        let w = build_weight(&c, 2, t).unwrap();
        assert_eq!(w.g, w.g.transpose());
        assert!(w.g.clone().symmetric_eigenvalues().min() >= -1e-15);
        for _ in 0..10_000 {
            let z = DVector::from_vec(rng.unit_vector(4));
            assert!(z.dot(&(&w.g * &z)) <= 2.0 * c.eps);
        }
    }
}

#[test]
fn rt_bound_holds_for_damped_oscillator() {
    let (drift, diff) = linear_d1();
    let drift = drift.with_k_b(1.5);
    let c = build_constants(1.5, diff.delta2(), 1.0).unwrap();
    assert!((c.delta1 - 2.0).abs() < 1e-14);
    let grid: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1).collect();
    let rep = check_rt_negativity(&drift, &c, &diff, &grid, 1000, 3).unwrap();
    assert!(
        rep.holds,
        "{:?}",
        rep.rows.iter().map(|r| r.eigen_margin).collect::<Vec<_>>()
    );
    assert!(rep.rows.iter().all(|r| r.eigen_margin >= 0.0));
    // Purity: identical inputs give identical reports.
    assert_eq!(
        rep,
        check_rt_negativity(&drift, &c, &diff, &grid, 1000, 3).unwrap()
    );
}

#[test]
fn rt_bound_at_time_zero_reduces_to_velocity_block() {
    let (drift, diff) = linear_d1();
    let c = build_constants(1.5, 2.0, 1.0).unwrap();
    let rep = check_rt_negativity(&drift.with_k_b(1.5), &c, &diff, &[0.0], 100, 4).unwrap();
    // gap = diag(0, eps M - delta1 + 2 - eps/3) = diag(0, eps (M - 1/3)).
    assert!(rep.holds);
    assert!(rep.rows[0].eigen_margin.abs() < 1e-15);
}

#[test]
fn rt_bound_holds_for_perturbed_drift() {
    let (drift, diff) = linear_d1();
    let drift = drift
        .with_perturbation(Perturbation::TanhSaturation {
            amplitude: 0.3,
            gain: 1.0,
        })
        .with_k_b(1.5);
    let c = build_constants(1.5, 2.0, 1.0).unwrap();
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
    assert!(
        check_rt_negativity(&drift, &c, &diff, &grid, 500, 5)
            .unwrap()
            .holds
    );
}

#[test]
fn underdeclared_k_b_is_rejected() {
    let (drift, diff) = linear_d1();
    let c = build_constants(0.5, 2.0, 1.0).unwrap();
    assert!(matches!(
        check_rt_negativity(&drift, &c, &diff, &[1.0], 10, 6),
        Err(Error::KbUnderdeclared { .. })
    ));
}

#[test]
fn alpha_integral_lower_bound() {
    let a1 = 1.0 - (-1f64 / 3.0).exp();
    for k in 0..=1000 {
        let t = 1.0 + k as f64 * 0.05;
        assert!(alpha_sq_integral(t) >= a1 * a1 * (t - 1.0));
    }
}

#[test]
fn functional_at_time_zero_is_the_variance() {
    let (drift, diff) = linear_d1();
    let c = build_constants(drift.k_b(), 2.0, 1.0).unwrap();
    let law = invariant_law(&LinearModel::from_specs(&drift, &diff).unwrap()).unwrap();
    let stat = law.sample(512, StreamKey::new(7, 0)).unwrap();
    let f = TestFunction::BoundedSmooth { v: vec![0.8, -0.4] };
    let mc = HypoMc {
        outer: 512,
        inner: 4,
        ..HypoMc::default()
    };
    let n0 = &eval_functional(&drift, &diff, &c, &stat, &f, &[0.0], &mc).unwrap()[0];
    let vals: Vec<f64> = stat.points().map(|z| f.value(z)).collect();
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
    assert!((n0.value - var).abs() < 1e-12);
    assert_eq!(n0.weighted, 0.0);
}

#[test]
fn linear_test_function_matches_matrix_exponential() {
    let (drift, diff) = linear_d1();
    let model = LinearModel::from_specs(&drift, &diff).unwrap();
    let v = vec![1.0, 0.5];
    let f = TestFunction::Linear { v: v.clone() };
    let z = [1.2, -0.7];
    let t = 1.5;
    let mc = HypoMc {
        inner: 4096,
        dt: 1e-3,
        seed: 8,
        ..HypoMc::default()
    };
    let got = semigroup_at(&drift, &diff, &f, &z, t, &mc).unwrap();
    let phi = flow_matrix(&model, t);
    let vt = phi.transpose() * DVector::from_vec(v);
    let exact = vt.dot(&DVector::from_column_slice(&z));
    assert!(
        (got.value - exact).abs() < 3.0 * got.value_se,
        "{} vs {exact}",
        got.value
    );
    // Gradient is deterministic for a linear model; only the O(dt) bias remains.
    for i in 0..2 {
        assert!(
            (got.gradient[i] - vt[i]).abs() < 5e-3,
            "{:?} vs {vt}",
            got.gradient
        );
        assert!(got.gradient_se[i] < 1e-12);
    }
}

#[test]
fn pathwise_gradient_agrees_with_finite_differences() {
    let (drift, diff) = linear_d1();
    let drift = drift
        .with_perturbation(Perturbation::ScaledSine { amplitude: 0.4 })
        .with_k_b(1.9);
    let f = TestFunction::BoundedSmooth { v: vec![0.7, 0.3] };
    let mc = HypoMc {
        inner: 512,
        dt: 0.01,
        seed: 9,
        ..HypoMc::default()
    };
    let z = [0.4, -0.3];
    let pw = semigroup_at(&drift, &diff, &f, &z, 1.0, &mc).unwrap();
    let fd = semigroup_gradient_fd(&drift, &diff, &f, &z, 1.0, 1e-5, &mc).unwrap();
    for i in 0..2 {
        assert!(
            (pw.gradient[i] - fd[i]).abs() < 1e-6,
            "{:?} vs {fd:?}",
            pw.gradient
        );
    }
}

#[test]
fn functional_decays_within_bound_and_chains_through_poincare() {
    let (drift, diff) = linear_d1();
    let model = LinearModel::from_specs(&drift, &diff).unwrap();
    let law = invariant_law(&model).unwrap();
    let c_pi = poincare_constant(&law);
    assert!((c_pi - 1.0).abs() < 1e-12);
    let c = build_constants(drift.k_b(), diff.delta2(), c_pi).unwrap();
    let stat = law.sample(4096, StreamKey::new(10, 0)).unwrap();
    let f = TestFunction::BoundedSmooth { v: vec![1.0, 0.5] };
    let mc = HypoMc {
        outer: 128,
        inner: 256,
        dt: 0.02,
        seed: 11,
        ..HypoMc::default()
    };
    let times = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0];
    let curve = eval_functional(&drift, &diff, &c, &stat, &f, &times, &mc).unwrap();
    let n0 = curve[0].value;
    for w in curve.windows(2) {
        let se = (w[0].value_se.powi(2) + w[1].value_se.powi(2)).sqrt();
        assert!(
            w[1].value <= w[0].value + 3.0 * se,
            "not non-increasing: {w:?}"
        );
    }
    for p in &curve {
        assert!(
            p.value <= c.decay_bound(p.t) * n0 + 3.0 * p.value_se,
            "{p:?}"
        );
        let se = (p.grad_sq_se.powi(2) + (p.value_se / (c_pi + 2.0 * c.eps)).powi(2)).sqrt();
        assert!(
            p.grad_sq >= p.value / (c_pi + 2.0 * c.eps) - 3.0 * se,
            "{p:?}"
        );
    }
}
