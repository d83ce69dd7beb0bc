use kinetic_ergo::entropy::{kl_decay_curve, kl_gaussian_fit, kl_knn, KlReference, DEFAULT_K};
use kinetic_ergo::gaussian::{invariant_law, kl_gaussian, transition_law};
use kinetic_ergo::{
    simulate, DiffusionSpec, DriftSpec, Ensemble, GaussianLaw, IntegratorConfig, LinearModel,
    Scheme, StreamKey,
};
use nalgebra::{DMatrix, DVector};

fn gaussian(mean: &[f64], var: f64) -> GaussianLaw<f64> {
    let k = mean.len();
    GaussianLaw::new(
        DVector::from_column_slice(mean),
        DMatrix::identity(k, k) * var,
    )
    .unwrap()
}

#[test]
fn identical_laws_estimate_near_zero() {
    let g = gaussian(&[0.0, 0.0], 1.0);
    let p = g.sample(10_000, StreamKey::new(1, 0)).unwrap();
    let q = g.sample(10_000, StreamKey::new(1, 1)).unwrap();
    let est = kl_knn(&p, &q, DEFAULT_K).unwrap();
    assert!(est.value.abs() < 0.05, "{}", est.value);
    assert_eq!(est.floored_radii, 0);
}

#[test]
fn unit_mean_shift_gives_one_half() {
    let p = gaussian(&[1.0, 0.0], 1.0)
        .sample(10_000, StreamKey::new(2, 0))
        .unwrap();
    let q = gaussian(&[0.0, 0.0], 1.0)
        .sample(10_000, StreamKey::new(2, 1))
        .unwrap();
    let oracle = kl_gaussian(&gaussian(&[1.0, 0.0], 1.0), &gaussian(&[0.0, 0.0], 1.0)).unwrap();
    assert!((oracle - 0.5).abs() < 1e-14);
    let est = kl_knn(&p, &q, DEFAULT_K).unwrap();
    assert!((0.4..=0.6).contains(&est.value), "{}", est.value);
}

#[test]
fn zero_neighbour_order_is_rejected() {
    let p = gaussian(&[0.0, 0.0], 1.0)
        .sample(50, StreamKey::new(3, 0))
        .unwrap();
    assert!(kl_knn(&p, &p, 0).is_err());
}

#[test]
fn invariant_under_common_rigid_motion() {
    let p = gaussian(&[0.5, 0.0], 1.0)
        .sample(2000, StreamKey::new(4, 0))
        .unwrap();
    let q = gaussian(&[0.0, 0.0], 1.5)
        .sample(2000, StreamKey::new(4, 1))
        .unwrap();
    let (c, s) = (0.6f64, 0.8f64);
    let motion = |e: &Ensemble<f64>| {
        let data: Vec<f64> = e
            .points()
            .flat_map(|z| [c * z[0] - s * z[1] + 3.0, s * z[0] + c * z[1] - 1.0])
            .collect();
        Ensemble::new(1, data).unwrap()
    };
    let a = kl_knn(&p, &q, 5).unwrap().value;
    let b = kl_knn(&motion(&p), &motion(&q), 5).unwrap().value;
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn spread_shrinks_when_sample_size_doubles() {
    let g = gaussian(&[0.0, 0.0], 1.0);
    let spread = |n: usize| {
        let v: Vec<f64> = (0..20u64)
            .map(|s| {
                let p = g.sample(n, StreamKey::new(100 + s, 0)).unwrap();
                let q = g.sample(n, StreamKey::new(100 + s, 1)).unwrap();
                kl_knn(&p, &q, DEFAULT_K).unwrap().value
            })
            .collect();
        let m = v.iter().sum::<f64>() / 20.0;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 19.0).sqrt()
    };
    let (s1, s2) = (spread(500), spread(1000));
    assert!(s2 < s1, "{s1} -> {s2}");
}

fn linear_d1() -> (DriftSpec<f64>, DiffusionSpec<f64>, LinearModel<f64>) {
    let drift = DriftSpec::linear(DMatrix::identity(1, 1), 1.0).unwrap();
    let diff = DiffusionSpec::isotropic(1, 2f64.sqrt()).unwrap();
    let model = LinearModel::from_specs(&drift, &diff).unwrap();
    (drift, diff, model)
}

#[test]
fn gaussian_fit_curve_tracks_the_oracle() {
    let (drift, diff, model) = linear_d1();
    // The splitting is first order in dt; at dt = 1e-2 its bias alone is
    // about 20% of the late-time KL.
    let start = gaussian(&[3.0, 0.0], 0.25);
    let init = start.sample(10_000, StreamKey::new(5, 0)).unwrap();
    let cfg = IntegratorConfig::new(Scheme::KineticSplitting, 1e-3, 6.0, 11).unwrap();
    let record: Vec<f64> = (0..=12).map(|k| k as f64 * 0.5).collect();
    let path = simulate(&drift, &diff, &init, &cfg, None, &record).unwrap();
    let inv = invariant_law(&model).unwrap();
    let curve = kl_decay_curve(&path, KlReference::Gaussian(&inv), DEFAULT_K).unwrap();
    let mut checked = 0;
    for (t, est) in &curve {
        let oracle = kl_gaussian(&transition_law(&model, &start, *t).unwrap(), &inv).unwrap();
        if oracle > 0.01 {
            assert!(
                (est.value - oracle).abs() < 0.15 * oracle,
                "t = {t}: {} vs {oracle}",
                est.value
            );
            checked += 1;
        }
    }
    assert!(checked >= 6);
}

#[test]
fn stationary_start_stays_near_zero() {
    let (drift, diff, model) = linear_d1();
    let inv = invariant_law(&model).unwrap();
    let init = inv.sample(10_000, StreamKey::new(6, 0)).unwrap();
    let reference = inv.sample(10_000, StreamKey::new(6, 1)).unwrap();
    let cfg = IntegratorConfig::new(Scheme::KineticSplitting, 0.01, 2.0, 12).unwrap();
    let path = simulate(&drift, &diff, &init, &cfg, None, &[0.0, 1.0, 2.0]).unwrap();
    for (t, est) in kl_decay_curve(&path, KlReference::Samples(&reference), DEFAULT_K).unwrap() {
        assert!(est.value.abs() < 0.05, "t = {t}: {}", est.value);
    }
    for snap in &path.snapshots {
        assert!(kl_gaussian_fit(snap, &inv).unwrap().value < 0.01);
    }
}
