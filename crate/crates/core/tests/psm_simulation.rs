//! Matching balance and the matched-sample regression on simulated panels.

use markup_did::did::Outcome;
use markup_did::psm::{
    balance_diagnostics, fit_match_pscores, match_sample, matched_panel, twfe_did, MatchCovariate, MatchOptions,
    TwfeResult, TwfeSpec,
};
use markup_did::simgen::{generate, CohortSpec, Effect, EffectOutcome, EffectPath, SimConfig};

fn one_cohort(n_firms: usize, seed: u64) -> SimConfig {
    SimConfig {
        n_firms,
        cohorts: vec![CohortSpec { year: 2014, share: 0.2 }],
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn matching_removes_selection_imbalance() {
    let panel = generate(&one_cohort(3000, 70)).unwrap().panel_with_true_tfp().unwrap();
    let sample = fit_match_pscores(&panel, &MatchCovariate::ALL, Default::default()).unwrap();
    let matched = match_sample(&sample, &MatchOptions::default());
    let report = balance_diagnostics(&sample, &matched).unwrap();
    for line in &report.lines {
        let bias = line.after.bias.unwrap();
        assert!(bias.abs() < 5.0, "{}: {bias:.2}%\n{}", line.covariate, report.render());
    }
}

// Greedy matching does not guarantee lower bias on every covariate in every
// draw, so violations are printed rather than asserted.
#[test]
fn bias_after_matching_rarely_exceeds_bias_before() {
    let mut checked = 0;
    for seed in 0..10 {
        let panel = generate(&one_cohort(1000, 80 + seed)).unwrap().panel_with_true_tfp().unwrap();
        let sample = fit_match_pscores(&panel, &MatchCovariate::ALL, Default::default()).unwrap();
        let matched = match_sample(&sample, &MatchOptions::default());
        for line in balance_diagnostics(&sample, &matched).unwrap().lines {
            let (Some(before), Some(after)) = (line.before.bias, line.after.bias) else {
                continue;
            };
            checked += 1;
            if after.abs() > before.abs() {
                println!("seed {seed}, {}: bias {before:.2}% before, {after:.2}% after", line.covariate);
            }
        }
    }
    assert!(checked >= 30);
}

// The sales effect shifts revenue at unchanged inputs, so contemporaneous
// firm controls are not affected by treatment.
fn matched_regression(effect: f64, seed: u64) -> TwfeResult {
    let cfg = SimConfig {
        n_firms: 5000,
        sigma_xi: 0.03,
        sigma_labor: 0.1,
        sigma_eps: 0.02,
        effect: Effect { outcome: EffectOutcome::Sales, path: EffectPath::Constant(effect) },
        seed,
        ..SimConfig::default()
    };
    let panel = generate(&cfg).unwrap().panel_with_true_tfp().unwrap();
    let sample = fit_match_pscores(&panel, &MatchCovariate::ALL, Default::default()).unwrap();
    let matched = match_sample(&sample, &MatchOptions::default());
    let controls = [MatchCovariate::Size, MatchCovariate::CapitalIntensity, MatchCovariate::Tfp];
    let mut obs = matched_panel(&panel, &matched, &Outcome::LogSales, &controls, (3, 3)).unwrap();
    for o in &mut obs {
        o.y += 0.04 * f64::from(o.year - 2007) + if o.year % 3 == 0 { 0.1 } else { -0.05 };
    }
    let spec = TwfeSpec { controls: controls.iter().map(|c| c.label().to_string()).collect(), ..TwfeSpec::default() };
    twfe_did(&obs, &spec).unwrap()
}

#[test]
fn regression_recovers_effect_through_year_effects() {
    let r = matched_regression(-0.04, 90);
    assert!((r.coefficient + 0.04).abs() <= 0.01, "coefficient {} (se {})", r.coefficient, r.se);
}

#[test]
fn zero_effect_lies_in_the_interval() {
    let r = matched_regression(0.0, 91);
    let half = 1.96 * r.se;
    assert!(r.coefficient.abs() <= half, "coefficient {} (se {})", r.coefficient, r.se);
}

