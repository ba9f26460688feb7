use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;

/// Small panel with AR(1) productivity and materials chosen after omega.
fn toy_sample(firms: usize, years: i32, seed: u64, noise: f64) -> IndustrySample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let (bl, bk, bm) = (0.25, 0.10, 0.65);
    let mut keys = Vec::new();
    let (mut y, mut l, mut k, mut m) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for f in 0..firms {
        let mut w = 0.1 * z.sample(&mut rng);
        let mut kk: f64 = 5.0 + 0.5 * z.sample(&mut rng);
        for t in 0..years {
            let lag = w;
            w = 0.8 * w + 0.1 * z.sample(&mut rng);
            kk = 0.8 * kk + 0.2 * (5.0 + 2.0 * lag) + 0.15 * z.sample(&mut rng);
            let ll: f64 = 3.0 + 0.5 * (kk - 5.0) + lag + 0.3 * z.sample(&mut rng);
            let log_mu = 1.3f64.ln() + 0.5 * (ll - 3.0).powi(2);
            let mm = ((bm / 1.0f64).ln() - log_mu + bl * ll + bk * kk + w) / (1.0 - bm);
            keys.push((format!("f{f:04}"), 2000 + t));
            l.push(ll);
            k.push(kk);
            m.push(mm);
            y.push(bl * ll + bk * kk + bm * mm + w + noise * z.sample(&mut rng));
        }
    }
    IndustrySample::from_arrays("10", keys, y, l, k, m)
}

#[test]
fn exact_cobb_douglas_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z = Normal::new(0.0, 1.0).unwrap();
    let n = 200;
    let keys: Vec<(String, i32)> = (0..n).map(|i| (format!("f{}", i / 4), 2000 + (i % 4) as i32)).collect();
    let l: Vec<f64> = (0..n).map(|_| z.sample(&mut rng)).collect();
    let k: Vec<f64> = (0..n).map(|_| z.sample(&mut rng)).collect();
    let m: Vec<f64> = (0..n).map(|_| z.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..n).map(|i| 0.3 * l[i] + 0.6 * m[i] + 0.1 * k[i]).collect();
    let s = IndustrySample::from_arrays("10", keys, y, l, k, m);
    let est = ols_on_sample(&s, &TranslogSpec::default()).unwrap();
    assert!((est.beta.get(Term::L) - 0.3).abs() < 1e-10);
    assert!((est.beta.get(Term::M) - 0.6).abs() < 1e-10);
    assert!((est.beta.get(Term::K) - 0.1).abs() < 1e-10);
    // Cobb-Douglas: constant elasticity equal to the coefficient.
    assert!(est.theta_m.iter().all(|t| (t - est.beta.get(Term::M)).abs() < 1e-15));
    for i in 0..s.len() {
        let f = est.beta.evaluate(s.l[i], s.k[i], s.m[i]);
        assert!((est.omega_hat[i] - (est.phi_hat[i] - f)).abs() < 1e-12);
    }
}

#[test]
fn collinear_inputs_are_named() {
    let n = 60;
    let keys: Vec<(String, i32)> = (0..n).map(|i| (format!("f{i}"), 2000)).collect();
    let l: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    let k: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
    let m: Vec<f64> = l.iter().map(|v| 2.0 * v).collect();
    let y = l.clone();
    let s = IndustrySample::from_arrays("10", keys, y, l, k, m);
    let err = ols_on_sample(&s, &TranslogSpec::default()).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Estimation(_)), "{msg}");
    assert!(msg.contains("rank-deficient") && (msg.contains(" m") || msg.contains(" l")), "{msg}");
}

#[test]
fn too_few_observations() {
    let s = toy_sample(5, 4, 1, 0.05);
    let err = ols_on_sample(&s, &TranslogSpec::default()).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
}

#[test]
fn single_year_panel_has_no_lags() {
    let s = toy_sample(100, 1, 2, 0.05);
    let err = acf_on_sample(&s, &TranslogSpec::default(), &AcfConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Precondition(ref m) if m.contains("lag")), "{err}");
}

#[test]
fn elasticity_examples() {
    let cd = Beta::cobb_douglas(0.2034, 0.1129, 0.6542);
    for (l, k, m) in [(0.0, 0.0, 0.0), (3.2, 5.1, 7.7), (-1.0, 2.0, 0.5)] {
        assert_eq!(output_elasticity(&cd, l, k, m).materials, 0.6542);
    }
    let mut tl = Beta::default();
    tl.set(Term::M, 0.5);
    tl.set(Term::MM, 0.05);
    assert!((output_elasticity(&tl, 0.7, -2.0, 1.0).materials - 0.6).abs() < 1e-15);
}

#[test]
fn stage_one_residuals_are_orthogonal() {
    let s = toy_sample(60, 6, 3, 0.05);
    let fs = first_stage(&s, 3, true).unwrap();
    let e = DVector::from_column_slice(&fs.epsilon_hat);
    let scores = fs.design.transpose() * e;
    for (j, v) in scores.iter().enumerate() {
        let scale = fs.design.column(j).norm() * fs.epsilon_hat.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(v.abs() <= 1e-10 * scale.max(1.0), "{} {}", fs.names[j], v);
    }
}

#[test]
fn acf_improves_on_ols_start_and_recovers_truth() {
    let s = toy_sample(200, 15, 4, 0.05);
    let spec = TranslogSpec::default();
    let cfg = AcfConfig::default();
    let est = acf_on_sample(&s, &spec, &cfg).unwrap();
    let d = &est.diagnostics;
    assert!(d.objective.unwrap() <= d.start_objective.unwrap());
    let at_beta = gmm_objective(&s, &spec, &cfg, &est.beta).unwrap();
    assert!((at_beta - d.objective.unwrap()).abs() < 1e-12 * at_beta.max(1.0));
    for (t, truth) in [(Term::L, 0.25), (Term::K, 0.10), (Term::M, 0.65)] {
        assert!((est.beta.get(t) - truth).abs() < 0.05, "{t}: {}", est.beta.get(t));
    }
}

#[test]
fn estimation_is_deterministic() {
    let s = toy_sample(80, 8, 5, 0.05);
    let cfg = AcfConfig::default();
    let a = acf_on_sample(&s, &TranslogSpec::default(), &cfg).unwrap();
    let b = acf_on_sample(&s, &TranslogSpec::default(), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bootstrap_errors_are_positive() {
    let s = toy_sample(60, 6, 6, 0.05);
    let se = bootstrap_std_errors(&s, Estimator::Ols, &TranslogSpec::default(), &AcfConfig::default(), 30, 9).unwrap();
    for t in [Term::L, Term::K, Term::M] {
        assert!(se.get(t) > 0.0 && se.get(t) < 1.0);
    }
    assert_eq!(se.get(Term::MM), 0.0);
}

#[test]
fn monomial_count() {
    // 3 inputs, degree 3: 3 + 6 + 10 monomials.
    assert_eq!(monomials(3, 3).len(), 19);
}

fn arb_beta() -> impl Strategy<Value = Beta> {
    prop::array::uniform9(-1.0f64..1.0).prop_map(Beta)
}

proptest! {
    #[test]
    fn elasticity_is_linear_in_beta(b1 in arb_beta(), b2 in arb_beta(), a in -3.0f64..3.0, c in -3.0f64..3.0,
                                    l in -5.0f64..5.0, k in -5.0f64..5.0, m in -5.0f64..5.0) {
        let mut mix = Beta::default();
        for t in Term::ALL {
            mix.set(t, a * b1.get(t) + c * b2.get(t));
        }
        let e = output_elasticity(&mix, l, k, m);
        let e1 = output_elasticity(&b1, l, k, m);
        let e2 = output_elasticity(&b2, l, k, m);
        prop_assert!((e.materials - (a * e1.materials + c * e2.materials)).abs() < 1e-9);
        prop_assert!((e.labor - (a * e1.labor + c * e2.labor)).abs() < 1e-9);
        prop_assert!((e.capital - (a * e1.capital + c * e2.capital)).abs() < 1e-9);
    }

    #[test]
    fn first_order_only_gives_constant_elasticity(b in prop::array::uniform3(-1.0f64..1.0),
                                                  x in prop::array::uniform3(-5.0f64..5.0)) {
        let beta = Beta::cobb_douglas(b[0], b[1], b[2]);
        let e = output_elasticity(&beta, x[0], x[1], x[2]);
        prop_assert_eq!(e.labor, b[0]);
        prop_assert_eq!(e.capital, b[1]);
        prop_assert_eq!(e.materials, b[2]);
    }
}

#[test]
fn elasticity_files_round_trip() {
    let sim = crate::simgen::generate(&crate::simgen::SimConfig {
        n_firms: 20,
        ..Default::default()
    })
    .unwrap();
    let sets = sim.truth.elasticity_sets();
    let dir = tempfile::tempdir().unwrap();
    let (c, o) = (dir.path().join("c.csv"), dir.path().join("o.csv"));
    write_elasticities_csv(&c, &sets, None).unwrap();
    write_observations_csv(&o, &sets, None).unwrap();
    let back = load_elasticity_sets(&c, &o).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].beta, sets[0].beta);
    assert_eq!(back[0].keys, sets[0].keys);
    assert_eq!(back[0].theta_m, sets[0].theta_m);
    assert_eq!(back[0].epsilon_hat, sets[0].epsilon_hat);
}
