//! Production-function estimators on simulated panels with known technology.

use markup_did::prodfn::{acf_estimate, ols_translog, AcfConfig, Beta, Term, TranslogSpec};
use markup_did::simgen::{generate, IndustryTech, MarkupRule, SimConfig};

const FIRST_ORDER: [Term; 3] = [Term::L, Term::K, Term::M];

fn config(seed: u64) -> SimConfig {
    SimConfig {
        markup: MarkupRule::SizeDependent { mu_bar: 1.3, curvature: 0.5 },
        cohorts: vec![],
        seed,
        ..SimConfig::default()
    }
}

fn max_error(beta: &Beta, truth: &Beta) -> f64 {
    FIRST_ORDER.iter().map(|&t| (beta.get(t) - truth.get(t)).abs()).fold(0.0, f64::max)
}

// Without productivity a firm-specific markup is the only source of
// materials variation beyond (l, k).
#[test]
fn ols_recovers_exogenous_technology_under_noise() {
    let truth = Beta::cobb_douglas(0.3, 0.1, 0.6);
    let cfg = SimConfig {
        n_firms: 667,
        industries: vec![IndustryTech { code: "10".into(), beta: truth }],
        productivity: false,
        sigma_eps: 0.1,
        markup: MarkupRule::Lognormal { median: 1.3, sigma: 0.2 },
        ..config(11)
    };
    let panel = generate(&cfg).unwrap().panel().unwrap();
    let set = ols_translog(&panel, "10", &TranslogSpec::default()).unwrap();
    assert!(set.keys.len() >= 10_000);
    let err = max_error(&set.beta, &truth);
    assert!(err <= 0.02, "OLS error {err} ({:?})", set.beta);
}

#[test]
fn acf_recovers_technology_on_a_fixed_seed() {
    let cfg = config(3);
    let panel = generate(&cfg).unwrap().panel().unwrap();
    let set = acf_estimate(&panel, "10", &TranslogSpec::default(), &AcfConfig::default()).unwrap();
    let err = max_error(&set.beta, &cfg.industries[0].beta);
    assert!(err <= 0.05, "ACF error {err} ({:?})", set.beta);
}

#[test]
fn without_productivity_acf_and_ols_agree() {
    let cfg = SimConfig {
        productivity: false,
        sigma_eps: 1e-6,
        markup: MarkupRule::Lognormal { median: 1.3, sigma: 0.2 },
        ..config(4)
    };
    let panel = generate(&cfg).unwrap().panel().unwrap();
    let spec = TranslogSpec::default();
    let ols = ols_translog(&panel, "10", &spec).unwrap().beta;
    let acf = acf_estimate(&panel, "10", &spec, &AcfConfig::default()).unwrap().beta;
    let gap = max_error(&acf, &ols);
    assert!(gap <= 1e-4, "ACF {acf:?} vs OLS {ols:?}");
}

#[test]
fn acf_error_shrinks_with_more_firms() {
    let mut smaller = 0;
    for seed in 0..10 {
        let err = |n_firms| {
            let cfg = SimConfig { n_firms, ..config(100 + seed) };
            let panel = generate(&cfg).unwrap().panel().unwrap();
            let acf = AcfConfig { seed, ..AcfConfig::default() };
            let beta = acf_estimate(&panel, "10", &TranslogSpec::default(), &acf).unwrap().beta;
            max_error(&beta, &cfg.industries[0].beta)
        };
        if err(2000) < err(200) {
            smaller += 1;
        }
    }
    assert!(smaller >= 9, "error smaller at 2000 firms in only {smaller}/10 seeds");
}
