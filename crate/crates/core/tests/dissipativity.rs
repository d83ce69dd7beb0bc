use kinetic_ergo::dissipativity::{
    check_patdi, check_patdi_system, compute_eta1, compute_eta1_with_grid, eta1_log_objective,
    k_star_surrogate, search_cert, DissipativityCert, SamplingConfig, SearchGrid, Verdict,
};
use kinetic_ergo::{DriftSpec, Ensemble, Error, Interaction, Perturbation, StreamKey};
use nalgebra::DMatrix;

fn damped() -> DriftSpec<f64> {
    DriftSpec::linear(DMatrix::identity(1, 1), 1.0).unwrap()
}

fn repulsive() -> DriftSpec<f64> {
    DriftSpec::new_unrestricted(-DMatrix::identity(1, 1), 0.0, Perturbation::Zero, None, 1.0)
        .unwrap()
}

fn analytic() -> DissipativityCert {
    DissipativityCert::new(0.25, 1.0, 0.5, 1.0).unwrap()
}

#[test]
fn analytic_cert_holds_on_every_sample() {
    let s = SamplingConfig::for_cert(&analytic(), 100_000, 1);
    let v = check_patdi(&damped(), &analytic(), None, &s).unwrap();
    let Verdict::HoldsOnSample { worst_margin, .. } = v else {
        panic!("{v:?}");
    };
    // The quadratic form -(u + v)^2 / 4 attains 0 along u = -v.
    assert!(
        worst_margin <= 1e-10 && worst_margin > -0.01,
        "{worst_margin}"
    );
}

#[test]
fn anti_dissipative_drift_is_falsified_for_every_cert() {
    for (theta, r, r0) in [
        (0.25, 1.0, 0.5),
        (0.01, 1.0, 0.0),
        (0.01, 2.0, -0.9),
        (1e-6, 0.1, 0.9),
    ] {
        let cert = DissipativityCert::new(theta, r, r0, 1.0).unwrap();
        let s = SamplingConfig::for_cert(&cert, 100_000, 2);
        let Verdict::Falsified(w) = check_patdi(&repulsive(), &cert, None, &s).unwrap() else {
            panic!("cert {cert:?} not falsified");
        };
        // The witness is checkable by hand.
        let (u, v) = (w.z[0] - w.zbar[0], w.z[1] - w.zbar[1]);
        let lhs = (r * r * u + r * r0 * v) * v + (v + r * r0 * u) * u;
        assert!((lhs - w.lhs).abs() <= 1e-9 * lhs.abs().max(1.0));
        assert!(lhs > -theta * (u * u + v * v));
    }
}

#[test]
fn verdict_is_monotone_in_theta() {
    let spec = damped().with_perturbation(Perturbation::ScaledSine { amplitude: 0.3 });
    let spec = spec.with_k_b(1.75);
    let base = analytic();
    let mut held = false;
    for theta in [0.3, 0.25, 0.2, 0.1, 0.05, 0.01] {
        let s = SamplingConfig::for_cert(&base, 20_000, 9);
        let h = check_patdi(&spec, &base.with_theta(theta).unwrap(), None, &s)
            .unwrap()
            .holds();
        assert!(!held || h, "held at a larger theta but not at {theta}");
        held |= h;
    }
    assert!(held);
}

#[test]
fn measure_argument_is_ignored_without_interaction() {
    let mu = Ensemble::new(1, vec![5.0, -3.0, 1.0, 1.0]).unwrap();
    let s = SamplingConfig::for_cert(&analytic(), 5000, 4);
    let a = check_patdi(&damped(), &analytic(), None, &s).unwrap();
    let b = check_patdi(&damped(), &analytic(), Some(&mu), &s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn interaction_without_measure_uses_probe_measures() {
    let spec = damped().with_interaction(Some(Interaction::SineCoupling { kappa: 0.05 }));
    let cert = analytic().with_theta(0.1).unwrap();
    let s = SamplingConfig::for_cert(&cert, 5000, 5);
    assert!(check_patdi(&spec, &cert, None, &s).unwrap().holds());
}

#[test]
fn search_finds_rate_for_damped_oscillator() {
    let cert = search_cert(&damped(), &SearchGrid::default(), None, 100_000, 6)
        .unwrap()
        .expect("a cert exists");
    assert!(cert.theta >= 0.2, "{cert:?}");
    let fresh = SamplingConfig::for_cert(&cert, 100_000, 12345);
    assert!(check_patdi(&damped(), &cert, None, &fresh).unwrap().holds());
}

#[test]
fn search_finds_nothing_for_anti_dissipative_drift() {
    let found = search_cert(&repulsive(), &SearchGrid::default(), None, 20_000, 7).unwrap();
    assert!(found.is_none());
}

#[test]
fn zero_perturbation_matches_linear_search() {
    let grid = SearchGrid {
        r: vec![0.5, 1.0],
        r0: vec![0.0, 0.5],
        radius: vec![1.0],
    };
    let plain = search_cert(&damped(), &grid, None, 10_000, 8).unwrap();
    let zero = damped().with_perturbation(Perturbation::ScaledSine { amplitude: 0.0 });
    assert_eq!(plain, search_cert(&zero, &grid, None, 10_000, 8).unwrap());
}

#[test]
fn empty_grid_is_an_error() {
    let grid = SearchGrid {
        r: vec![],
        ..SearchGrid::default()
    };
    assert!(matches!(
        search_cert(&damped(), &grid, None, 10, 0),
        Err(Error::EmptyGrid)
    ));
}

#[test]
fn single_particle_system_agrees_with_pair_check() {
    for spec in [damped(), repulsive()] {
        let s = SamplingConfig::for_cert(&analytic(), 20_000, 10);
        let single = check_patdi(&spec, &analytic(), None, &s).unwrap();
        let sys = check_patdi_system(&spec, &analytic(), 1, &s).unwrap();
        assert_eq!(single.holds(), sys.verdict.holds());
        assert_eq!(sys.theta_eff, 0.25);
    }
}

#[test]
fn interaction_at_budget_exhausts_the_rate() {
    let k = analytic().interaction_budget();
    let spec = damped().with_interaction(Some(Interaction::LinearAttraction { kappa: k }));
    let s = SamplingConfig::for_cert(&analytic(), 100, 11);
    assert!(matches!(
        check_patdi_system(&spec, &analytic(), 4, &s),
        Err(Error::InteractionBudgetExhausted { .. })
    ));
}

#[test]
fn weak_attraction_keeps_system_rate() {
    let spec = damped().with_interaction(Some(Interaction::LinearAttraction { kappa: 0.01 }));
    let s = SamplingConfig::for_cert(&analytic(), 20_000, 12);
    let rep = check_patdi_system(&spec, &analytic(), 4, &s).unwrap();
    assert!((rep.theta_eff - 0.235).abs() < 1e-15);
    assert!(rep.verdict.holds(), "{:?}", rep.verdict);
}

fn eta1_oracle(c: f64, lambda: f64, k_b: f64) -> f64 {
    // Dense uniform grid on the admissible interval.
    let t0 = (c.ln() / lambda).max(0.0);
    let span = 10.0 / (1.0 + k_b);
    let n = 1_000_000;
    let mut best = f64::INFINITY;
    for i in 1..=n {
        let t = t0 + span * i as f64 / n as f64;
        best = best.min(eta1_log_objective(t, c, lambda, k_b));
    }
    (-best).exp()
}

#[test]
fn eta1_matches_dense_grid() {
    let e = compute_eta1(1.0, 1.0, 0.0).unwrap();
    let oracle = eta1_oracle(1.0, 1.0, 0.0);
    assert!(
        (e.value - oracle).abs() <= 1e-6 * oracle,
        "{} vs {oracle}",
        e.value
    );
    assert!(e.value >= oracle * (1.0 - 1e-12));
    let e2 = compute_eta1(3.0, 0.5, 1.0).unwrap();
    assert!(e2.minimizer_t > 3f64.ln() / 0.5);
    let oracle2 = eta1_oracle(3.0, 0.5, 1.0);
    assert!((e2.value - oracle2).abs() <= 1e-6 * oracle2);
}

#[test]
fn eta1_decreases_with_k_b_and_grows_with_lambda() {
    let mut rng = StreamKey::new(13, 0).rng();
    for _ in 0..10 {
        let c = rng.uniform_range(1.0, 5.0);
        let l = rng.uniform_range(0.1, 3.0);
        let k = rng.uniform_range(0.1, 2.0);
        assert!(compute_eta1(c, l, 2.0 * k).unwrap().value < compute_eta1(c, l, k).unwrap().value);
    }
    assert!(
        compute_eta1(2.0, 10.0, 0.5).unwrap().value > compute_eta1(2.0, 1.0, 0.5).unwrap().value
    );
}

#[test]
fn eta1_is_stable_under_grid_refinement() {
    for (c, l, k) in [(1.0, 1.0, 0.0), (4.0, 0.3, 2.0), (1.5, 7.0, 0.2)] {
        let a = compute_eta1_with_grid(c, l, k, 1024).unwrap().value;
        let b = compute_eta1_with_grid(c, l, k, 2048).unwrap().value;
        assert!((a - b).abs() <= 1e-6 * a);
    }
}

#[test]
fn k_star_surrogate_is_the_smaller_threshold() {
    let e = compute_eta1(1.0, 1.0, 0.0).unwrap();
    let c = analytic();
    assert_eq!(k_star_surrogate(&e, &c), e.value.min(0.25 / 1.5));
}
