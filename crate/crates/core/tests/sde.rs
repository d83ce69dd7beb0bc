use kinetic_ergo::gaussian::transition_law;
use kinetic_ergo::sde::coupled_gap_statistics;
use kinetic_ergo::{
    simulate, simulate_coupled, DiffusionSpec, DriftSpec, Ensemble, GaussianLaw, IntegratorConfig,
    LinearModel, PhasePoint, Scheme, StreamKey,
};
use nalgebra::{DMatrix, DVector};

fn oscillator() -> (DriftSpec<f64>, DiffusionSpec<f64>) {
    (
        DriftSpec::linear(DMatrix::from_element(1, 1, 1.0), 1.0).unwrap(),
        DiffusionSpec::from_sigma_sq(DMatrix::from_element(1, 1, 2.0)).unwrap(),
    )
}

#[test]
fn ensemble_moments_follow_the_exact_transition_law() {
    let (drift, diff) = oscillator();
    let model = LinearModel::from_specs(&drift, &diff).unwrap();
    let start = GaussianLaw::point_mass(DVector::from_vec(vec![3.0, -1.0]));
    let exact = transition_law(&model, &start, 2.0).unwrap();
    let n = 20_000;
    let init = Ensemble::repeat(&[3.0, -1.0], n).unwrap();
    for scheme in [Scheme::KineticSplitting, Scheme::EulerMaruyama] {
        let cfg = IntegratorConfig::new(scheme, 0.002, 2.0, 9).unwrap();
        let path = simulate(&drift, &diff, &init, &cfg, None, &[]).unwrap();
        let ens = path.snapshots.last().unwrap();
        let (m, c) = (ens.mean(), ens.covariance());
        for i in 0..2 {
            let se = (exact.cov()[(i, i)] / n as f64).sqrt();
            assert!(
                (m[i] - exact.mean()[i]).abs() < 5.0 * se,
                "{scheme:?} mean {m} vs {}",
                exact.mean()
            );
        }
        // Relative error of a sample variance is about sqrt(2 / n) = 1%.
        assert!(
            (c.clone() - exact.cov()).amax() < 0.05 * exact.cov().amax(),
            "{scheme:?} {c}"
        );
    }
}

#[test]
fn trajectories_depend_only_on_seed_and_index() {
    let (drift, diff) = oscillator();
    let cfg = IntegratorConfig::new(Scheme::KineticSplitting, 0.01, 1.0, 4).unwrap();
    let small = GaussianLaw::<f64>::standard(2)
        .sample(10, StreamKey::new(1, 0))
        .unwrap();
    let large = small
        .concat(&Ensemble::repeat(&[5.0, 5.0], 30).unwrap())
        .unwrap();
    let a = simulate(&drift, &diff, &small, &cfg, None, &[0.5, 1.0]).unwrap();
    let b = simulate(&drift, &diff, &large, &cfg, None, &[0.5, 1.0]).unwrap();
    let again = simulate(&drift, &diff, &small, &cfg, None, &[0.5, 1.0]).unwrap();
    assert_eq!(a.snapshots, again.snapshots);
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(sa.as_slice(), &sb.as_slice()[..sa.as_slice().len()]);
    }
    let other = simulate(&drift, &diff, &small, &cfg.clone().with_seed(5), None, &[]).unwrap();
    assert_ne!(a.snapshots.last(), other.snapshots.last());
}

#[test]
fn single_precision_tracks_double_precision() {
    let cfg64 = IntegratorConfig::new(Scheme::KineticSplitting, 0.01, 1.0, 3).unwrap();
    let cfg32 = IntegratorConfig::new(Scheme::KineticSplitting, 0.01f32, 1.0f32, 3).unwrap();
    let drift32 = DriftSpec::linear(DMatrix::from_element(1, 1, 1.0f32), 1.0f32).unwrap();
    let diff32 = DiffusionSpec::from_sigma_sq(DMatrix::from_element(1, 1, 2.0f32)).unwrap();
    let (drift, diff) = oscillator();
    let init = Ensemble::repeat(&[1.0, 0.0], 200).unwrap();
    let p64 = simulate(&drift, &diff, &init, &cfg64, None, &[]).unwrap();
    let p32 = simulate(&drift32, &diff32, &init.cast::<f32>(), &cfg32, None, &[]).unwrap();
    let (e64, e32) = (p64.snapshots.last().unwrap(), p32.snapshots.last().unwrap());
    let worst = e64
        .as_slice()
        .iter()
        .zip(e32.as_slice())
        .map(|(a, b)| (a - *b as f64).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn synchronous_coupling_contracts_for_the_damped_oscillator() {
    let (drift, diff) = oscillator();
    let cfg = IntegratorConfig::new(Scheme::KineticSplitting, 0.01, 10.0, 2).unwrap();
    let z = PhasePoint::new(vec![2.0], vec![0.0]).unwrap();
    let zbar = PhasePoint::new(vec![-1.0], vec![1.0]).unwrap();
    let same = simulate_coupled(&drift, &diff, &z, &z, &cfg, (None, None), 0).unwrap();
    assert!(same.gap.iter().all(|g| *g == 0.0));

    // Linear drift: the gap evolves deterministically, so every replica agrees.
    let stats = coupled_gap_statistics(&drift, &diff, &z, &zbar, &cfg, (None, None), 8).unwrap();
    let (first, last) = (stats.mean[0], *stats.mean.last().unwrap());
    assert!(last < 1e-3 * first, "{first} -> {last}");
    assert!(stats.std_err.iter().all(|s| *s < 1e-9));
}

#[test]
fn invalid_steps_are_rejected() {
    assert!(IntegratorConfig::new(Scheme::KineticSplitting, 0.0, 1.0, 0).is_err());
    assert!(IntegratorConfig::new(Scheme::KineticSplitting, 0.1, -1.0, 0).is_err());
    let (drift, diff) = oscillator();
    let cfg = IntegratorConfig::new(Scheme::KineticSplitting, 0.01, 1.0, 0).unwrap();
    let wrong_dim = Ensemble::repeat(&[0.0; 4], 3).unwrap();
    assert!(simulate(&drift, &diff, &wrong_dim, &cfg, None, &[]).is_err());
}
