//! Group-time estimator on simulated panels with known effects and selection.

use markup_did::did::{self, fit_pscore, CohortDesign, Covariate, DidData, DidOptions, DidResults, Outcome};
use markup_did::simgen::{generate, CohortSpec, Effect, EffectOutcome, EffectPath, SimConfig};
use markup_did::stats::{mean, variance};

fn covariates() -> Vec<Covariate> {
    vec![Covariate::Size, Covariate::CapitalIntensity, Covariate::Tfp]
}

fn sales(path: EffectPath) -> Effect {
    Effect { outcome: EffectOutcome::Sales, path }
}

fn data(cfg: &SimConfig) -> DidData {
    let panel = generate(cfg).unwrap().panel_with_true_tfp().unwrap();
    DidData::from_panel(&panel, &Outcome::LogSales).unwrap()
}

fn run(cfg: &SimConfig, opts: &DidOptions) -> DidResults {
    let data = data(cfg);
    let design = CohortDesign::for_data(&data).with_covariates(covariates());
    did::estimate(&data, &design, opts).unwrap()
}

/// Mean over replications must sit within `z` standard errors of `truth`.
fn within_band(draws: &[f64], truth: f64, z: f64) -> bool {
    let se = (variance(draws) / draws.len() as f64).sqrt();
    (mean(draws) - truth).abs() <= z * se
}

#[test]
fn pscore_slopes_match_the_selection_model() {
    let mut slopes = vec![Vec::new(); 3];
    let mut truth = [0.0; 3];
    for seed in 0..20 {
        let cfg = SimConfig {
            n_firms: 2000,
            cohorts: vec![CohortSpec { year: 2012, share: 0.2 }],
            seed,
            ..SimConfig::default()
        };
        let sim = generate(&cfg).unwrap();
        truth = sim.truth.pscore.slopes;
        let panel = sim.panel_with_true_tfp().unwrap();
        let data = DidData::from_panel(&panel, &Outcome::LogSales).unwrap();
        let design = CohortDesign::for_data(&data).with_covariates(covariates());
        let fit = fit_pscore(&data, &design, 2012, 2013).unwrap().unwrap().fit;
        for (j, c) in covariates().iter().enumerate() {
            let at = fit.names.iter().position(|n| n == c.label()).unwrap();
            slopes[j].push(fit.coef[at]);
        }
    }
    assert!(slopes[0].iter().all(|&b| b > 0.0), "size slopes {:?}", slopes[0]);
    for (draws, b) in slopes.iter().zip(truth) {
        assert!(within_band(draws, b, 3.0), "mean slope {} vs {b}", mean(draws));
    }
}

#[test]
fn constant_effect_lies_in_the_overall_band() {
    let cfg = SimConfig {
        n_firms: 1000,
        effect: sales(EffectPath::Constant(0.05)),
        seed: 21,
        ..SimConfig::default()
    };
    let o = run(&cfg, &DidOptions::default()).overall;
    assert!(o.ci_low <= 0.05 && 0.05 <= o.ci_high, "overall {} [{}, {}]", o.estimate, o.ci_low, o.ci_high);
}

#[test]
fn null_effect_band_covers_zero_at_nominal_rate() {
    let reps = 200;
    let mut covered = 0;
    for rep in 0..reps {
        let cfg = SimConfig {
            n_firms: 150,
            start_year: 2010,
            end_year: 2016,
            cohorts: vec![CohortSpec { year: 2013, share: 0.2 }],
            seed: 30_000 + rep,
            ..SimConfig::default()
        };
        let opts = DidOptions { bootstrap_reps: 299, seed: rep, ..DidOptions::default() };
        let o = run(&cfg, &opts).overall;
        covered += usize::from(o.ci_low <= 0.0 && 0.0 <= o.ci_high);
    }
    let rate = covered as f64 / reps as f64;
    assert!((rate - 0.95).abs() <= 0.05, "coverage {rate}");
}

#[test]
fn pre_treatment_coefficients_cover_zero() {
    let cfg = SimConfig {
        n_firms: 1000,
        effect: sales(EffectPath::Constant(0.05)),
        seed: 22,
        ..SimConfig::default()
    };
    let res = run(&cfg, &DidOptions::default());
    let pre: Vec<_> = res.event.pre().collect();
    assert!(!pre.is_empty());
    for (e, p) in pre {
        assert!(p.ci_low <= 0.0 && 0.0 <= p.ci_high, "e={e}: {} [{}, {}]", p.estimate, p.ci_low, p.ci_high);
    }
}

#[test]
fn growing_effect_slope_matches_truth() {
    let delta = 0.01;
    let mut slopes = Vec::new();
    for seed in 0..20 {
        let cfg = SimConfig {
            n_firms: 500,
            effect: sales(EffectPath::Linear(delta)),
            seed: 40 + seed,
            ..SimConfig::default()
        };
        let opts = DidOptions { bootstrap_reps: 99, ..DidOptions::default() };
        let res = run(&cfg, &opts);
        let post: Vec<(f64, f64)> = res.event.post().map(|(e, p)| (f64::from(*e), p.estimate)).collect();
        let (ex, ey) = (mean(&post.iter().map(|p| p.0).collect::<Vec<_>>()), mean(&post.iter().map(|p| p.1).collect::<Vec<_>>()));
        let sxy: f64 = post.iter().map(|(x, y)| (x - ex) * (y - ey)).sum();
        let sxx: f64 = post.iter().map(|(x, _)| (x - ex).powi(2)).sum();
        slopes.push(sxy / sxx);
    }
    assert!(within_band(&slopes, delta, 3.0), "mean slope {} vs {delta}", mean(&slopes));
}
