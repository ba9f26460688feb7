use super::*;
use crate::did::{att_gt, CohortDesign, ControlRule, DidData, Outcome};

fn small(seed: u64) -> SimConfig {
    SimConfig {
        n_firms: 150,
        start_year: 2010,
        end_year: 2016,
        cohorts: vec![CohortSpec { year: 2013, share: 0.2 }, CohortSpec { year: 2015, share: 0.15 }],
        seed,
        ..SimConfig::default()
    }
}

fn translog() -> Beta {
    let mut b = Beta::cobb_douglas(0.25, 0.10, 0.65);
    b.set(Term::LL, -0.01);
    b.set(Term::KK, 0.005);
    b.set(Term::MM, -0.01);
    b.set(Term::LM, 0.005);
    b.set(Term::KM, 0.002);
    b
}

#[test]
fn same_seed_same_data() {
    let a = generate(&small(7)).unwrap();
    let b = generate(&small(7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 150 * 7);
    assert_ne!(a.rows, generate(&small(8)).unwrap().rows);
}

#[test]
fn identical_across_thread_counts() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = one.install(|| generate(&small(3)).unwrap());
    let b = generate(&small(3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_shares_leaving_no_controls() {
    let mut cfg = small(0);
    cfg.cohorts = vec![CohortSpec { year: 2013, share: 0.6 }, CohortSpec { year: 2015, share: 0.4 }];
    assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    cfg.cohorts = vec![CohortSpec { year: 2010, share: 0.1 }];
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}

#[test]
fn materials_share_equals_elasticity_over_markup() {
    for beta in [Beta::cobb_douglas(0.25, 0.10, 0.65), translog()] {
        let mut cfg = small(11);
        cfg.industries[0].beta = beta;
        cfg.markup = MarkupRule::SizeDependent { mu_bar: 1.3, curvature: 0.5 };
        cfg.effect = Effect { outcome: EffectOutcome::Markup, path: EffectPath::Linear(0.05) };
        let sim = generate(&cfg).unwrap();
        for o in &sim.truth.obs {
            let rel = (o.alpha - o.theta_m / o.mu) / o.alpha;
            assert!(rel.abs() < 1e-12, "{rel}");
        }
    }
}

#[test]
fn deflated_sales_carry_revenue_and_noise() {
    let sim = generate(&small(2)).unwrap();
    let panel = sim.panel().unwrap();
    let beta = sim.truth.betas[0].1;
    for (r, o) in panel.rows().iter().zip(&sim.truth.obs) {
        let f = beta.evaluate(r.employees.ln(), r.fixed_assets.ln(), r.materials_cost.ln());
        let expected = f + o.omega + o.delta + o.epsilon;
        assert!((r.sales.ln() - expected).abs() < 1e-9);
    }
}

#[test]
fn lognormal_markups_match_their_parameters() {
    let mut cfg = small(5);
    cfg.n_firms = 3000;
    cfg.markup = MarkupRule::Lognormal { median: 1.2, sigma: 0.2 };
    let sim = generate(&cfg).unwrap();
    let logs: Vec<f64> = sim.truth.obs.iter().filter(|o| o.year == 2010).map(|o| o.mu.ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let sd = (logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    // four standard errors
    assert!((mean - 1.2f64.ln()).abs() < 4.0 * 0.2 / n.sqrt());
    assert!((sd - 0.2).abs() < 4.0 * 0.2 / (2.0 * n).sqrt());
}

#[test]
fn cohort_shares_near_targets() {
    let mut cfg = small(9);
    cfg.n_firms = 4000;
    let sim = generate(&cfg).unwrap();
    let n = sim.treatments.len() as f64;
    for c in &cfg.cohorts {
        let share = sim.treatments.iter().filter(|t| t.cohort == Some(c.year)).count() as f64 / n;
        // centring makes the share exact only at the mean index; allow a wide band
        assert!((share - c.share).abs() < 0.05, "{} {share}", c.year);
    }
}

#[test]
fn oracle_matches_estimator() {
    let mut cfg = small(4);
    cfg.industries.push(IndustryTech { code: "25".into(), beta: Beta::cobb_douglas(0.3, 0.15, 0.55) });
    cfg.effect = Effect { outcome: EffectOutcome::Sales, path: EffectPath::Constant(0.1) };
    let sim = generate(&cfg).unwrap();
    let panel = sim.panel_with_true_tfp().unwrap();
    let data = DidData::from_panel(&panel, &Outcome::LogSales).unwrap();
    for rule in [ControlRule::NeverTreated, ControlRule::NotYetTreated] {
        let mut design = CohortDesign::for_data(&data);
        design.control_rule = rule;
        let spec = OracleSpec { not_yet_treated: rule == ControlRule::NotYetTreated, ..OracleSpec::default() };
        let mut compared = 0;
        for g in [2013, 2015] {
            for t in 2010..=2016 {
                if t == g - 1 {
                    continue;
                }
                let cell = att_gt(&data, &design, g, t).unwrap();
                let oracle = brute_force_att(&panel, &sim.truth, g, t, &spec);
                assert_eq!(cell.feasible, oracle.is_some(), "({g}, {t})");
                if let Some(v) = oracle {
                    assert!((cell.estimate - v).abs() < 1e-10, "({g}, {t}): {} vs {v}", cell.estimate);
                    compared += 1;
                }
            }
        }
        assert!(compared >= 10);
    }
}

#[test]
fn truth_elasticities_reproduce_true_markups() {
    let sim = generate(&small(6)).unwrap();
    let panel = sim.panel().unwrap();
    let sets = sim.truth.elasticity_sets();
    let m = crate::markup::compute_markups(&panel, &sets, FLEXIBLE_INPUT, true).unwrap();
    for (r, o) in m.records.iter().zip(&sim.truth.obs) {
        assert!(((r.mu - o.mu) / o.mu).abs() < 1e-9);
    }
}
