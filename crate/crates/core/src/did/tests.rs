use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn firm(id: &str, cohort: Option<i32>, outcomes: &[(i32, f64)], size: f64, industry: &str) -> DidFirm {
    let obs = outcomes
        .iter()
        .map(|&(y, v)| {
            (
                y,
                DidObs {
                    outcome: Some(v),
                    industry: industry.into(),
                    covariates: [Some(size), Some(1.0), Some(0.5 * size), Some(0.1 * size)],
                },
            )
        })
        .collect();
    DidFirm {
        id: id.into(),
        cohort,
        obs,
    }
}

fn intercept_only(cohorts: Vec<i32>) -> CohortDesign {
    CohortDesign::new(cohorts).with_covariates(vec![])
}

#[test]
fn two_by_two_collapses_to_difference_in_means() {
    let data = DidData::new(
        "y",
        vec![
            firm("a", Some(2011), &[(2010, 1.0), (2011, 1.4)], 1.0, "10"),
            firm("b", Some(2011), &[(2010, 2.0), (2011, 2.6)], 2.0, "10"),
            firm("c", None, &[(2010, 0.0), (2011, 0.1)], 3.0, "10"),
            firm("d", None, &[(2010, 5.0), (2011, 5.3)], 4.0, "10"),
        ],
    )
    .unwrap();
    let cell = att_gt(&data, &intercept_only(vec![2011]), 2011, 2011).unwrap();
    assert!(cell.feasible);
    assert!((cell.estimate - 0.3).abs() < 1e-12);
    let overall = aggregate_overall(&[cell], &data).unwrap();
    assert!((overall.params[0].estimate - 0.3).abs() < 1e-12);
}

#[test]
fn equal_cohorts_average_their_effects() {
    let mut firms = Vec::new();
    for i in 0..4 {
        let g = if i < 2 { 2011 } else { 2012 };
        let eff = if g == 2011 { 0.1 } else { 0.3 };
        let path: Vec<(i32, f64)> = (2009..=2012).map(|y| (y, if y >= g { eff } else { 0.0 })).collect();
        firms.push(firm(&format!("t{i}"), Some(g), &path, 1.0, "10"));
        let flat: Vec<(i32, f64)> = (2009..=2012).map(|y| (y, i as f64)).collect();
        firms.push(firm(&format!("c{i}"), None, &flat, 1.0, "10"));
    }
    let data = DidData::new("y", firms).unwrap();
    let design = intercept_only(vec![2011, 2012]);
    let cells = att_gt_all(&data, &design);
    let groups = aggregate_by_group(&cells, &data).unwrap();
    assert_eq!(groups.params.len(), 2);
    assert!((groups.params[0].estimate - 0.1).abs() < 1e-12);
    assert!((groups.params[1].estimate - 0.3).abs() < 1e-12);
    // Cohort 2011 averages over t = 2011, 2012 with uniform time weights.
    assert_eq!(groups.params[0].weights, vec![("t=2011".to_string(), 0.5), ("t=2012".to_string(), 0.5)]);
    let overall = aggregate_overall(&cells, &data).unwrap();
    assert!((overall.params[0].estimate - 0.2).abs() < 1e-12);
    let wsum: f64 = overall.params[0].weights.iter().map(|w| w.1).sum();
    assert!((wsum - 1.0).abs() < 1e-12);
}

#[test]
fn missing_controls_make_cell_infeasible() {
    let data = DidData::new(
        "y",
        vec![
            firm("a", Some(2011), &[(2010, 1.0), (2011, 1.4)], 1.0, "10"),
            firm("b", Some(2012), &[(2010, 1.0), (2011, 1.4), (2012, 1.5)], 1.0, "10"),
        ],
    )
    .unwrap();
    let cell = att_gt(&data, &intercept_only(vec![2011]), 2011, 2011).unwrap();
    assert!(!cell.feasible);
    assert_eq!(cell.reason.as_deref(), Some("no control firms"));
    let mut nyt = intercept_only(vec![2011]);
    nyt.control_rule = ControlRule::NotYetTreated;
    let cell = att_gt(&data, &nyt, 2011, 2011).unwrap();
    assert!(cell.feasible);
    assert_eq!(cell.n_control, 1);
    assert!(aggregate_overall(&[AttGt { feasible: false, ..cell }], &data).is_err());
}

/// Random panel with selection on size and a size-dependent trend.
fn random_data(n: usize, seed: u64, effect: f64) -> DidData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let firms = (0..n)
        .map(|i| {
            let size: f64 = rng.gen_range(0.0..2.0);
            let ind = if rng.gen_bool(0.5) { "10" } else { "20" };
            let p = 1.0 / (1.0 + (-(size - 1.5)).exp());
            let u: f64 = rng.gen();
            let cohort = if u < p * 0.5 {
                Some(2012)
            } else if u < p {
                Some(2013)
            } else {
                None
            };
            let mut obs = BTreeMap::new();
            let mut level = rng.gen_range(-1.0..1.0);
            for y in 2010..=2014 {
                level += 0.2 * size + rng.gen_range(-0.3..0.3);
                let treated = cohort.is_some_and(|g| y >= g);
                let cov = [Some(size + rng.gen_range(-0.05..0.05)), Some(rng.gen_range(0.0..1.0)), Some(size * 0.3), Some(rng.gen_range(-0.2..0.2))];
                obs.insert(
                    y,
                    DidObs {
                        outcome: Some(level + if treated { effect } else { 0.0 }),
                        industry: ind.into(),
                        covariates: cov,
                    },
                );
            }
            DidFirm {
                id: format!("f{i:03}"),
                cohort,
                obs,
            }
        })
        .collect();
    DidData::new("y", firms).unwrap()
}

fn size_design() -> CohortDesign {
    CohortDesign::new(vec![2012, 2013]).with_covariates(vec![Covariate::Size, Covariate::Industry])
}

#[test]
fn influence_function_matches_jackknife() {
    let data = random_data(300, 11, 0.1);
    let design = size_design();
    let full = att_gt(&data, &design, 2012, 2013).unwrap();
    let n = data.len() as f64;
    let mut checked = 0;
    for i in (0..data.len()).step_by(7) {
        let mut firms = data.firms.clone();
        firms.remove(i);
        let loo = DidData::new("y", firms).unwrap();
        let cell = att_gt(&loo, &design, 2012, 2013).unwrap();
        // theta_(-i) - theta ~ -IF_i / (n - 1)
        let jack = -(n - 1.0) * (cell.estimate - full.estimate);
        let inf = full.influence[i];
        assert!((jack - inf).abs() < 0.05 * inf.abs().max(0.2), "firm {i}: jackknife {jack}, influence {inf}");
        checked += 1;
    }
    assert!(checked > 40);
    let mean_inf: f64 = full.influence.iter().sum::<f64>() / n;
    assert!(mean_inf.abs() < 1e-10);
}

#[test]
fn overlap_ceiling_drops_controls() {
    let data = random_data(300, 12, 0.0);
    let mut design = size_design();
    design.overlap_ceiling = 0.25;
    let cell = att_gt(&data, &design, 2012, 2012).unwrap();
    assert!(cell.dropped_overlap > 0);
    let ps = fit_pscore(&data, &design, 2012, 2012).unwrap().unwrap();
    assert_eq!(ps.dropped_overlap, cell.dropped_overlap);
    for (p, treated) in ps.fit.prob.iter().zip(&ps.treated) {
        if !treated {
            assert!(*p < 0.25);
        }
    }
}

#[test]
fn pscore_without_signal_is_the_treated_share() {
    let firms: Vec<DidFirm> = (0..40)
        .map(|i| {
            let cohort = (i % 4 == 0).then_some(2011);
            firm(&format!("f{i:02}"), cohort, &[(2010, 0.0), (2011, 1.0)], (i / 4) as f64, "10")
        })
        .collect();
    let data = DidData::new("y", firms).unwrap();
    let design = CohortDesign::new(vec![2011]).with_covariates(vec![Covariate::Size]);
    let ps = fit_pscore(&data, &design, 2011, 2011).unwrap().unwrap();
    for p in &ps.fit.prob {
        assert!((p - 0.25).abs() < 1e-8);
    }
}

#[test]
fn bootstrap_is_deterministic_and_degenerate_case_is_zero() {
    let data = random_data(200, 13, 0.1);
    let opts = DidOptions {
        bootstrap_reps: 199,
        seed: 42,
        ..DidOptions::default()
    };
    let a = estimate(&data, &size_design(), &opts).unwrap();
    let b = estimate(&data, &size_design(), &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.overall.se > 0.0);
    assert!(a.pretrend.is_some());

    let flat: Vec<DidFirm> = (0..20)
        .map(|i| firm(&format!("f{i:02}"), (i < 8).then_some(2012), &[(2010, 1.0), (2011, 1.0), (2012, 1.0)], 1.0, "10"))
        .collect();
    let data = DidData::new("y", flat).unwrap();
    let res = estimate(&data, &intercept_only(vec![2012]), &opts).unwrap();
    assert_eq!(res.overall.estimate, 0.0);
    assert_eq!(res.overall.se, 0.0);
}

#[test]
fn few_replications_warn() {
    let data = random_data(100, 14, 0.1);
    let opts = DidOptions {
        bootstrap_reps: 50,
        ..DidOptions::default()
    };
    let res = estimate(&data, &size_design(), &opts).unwrap();
    assert!(res.warnings.iter().any(|w| w.contains("50 bootstrap")));
}

#[test]
fn event_window_must_straddle_treatment() {
    let data = random_data(100, 15, 0.1);
    let cells = att_gt_all(&data, &size_design());
    assert!(event_study(&cells, &data, (0, 2), 0).is_err());
    let es = event_study(&cells, &data, (-3, 2), 0).unwrap();
    assert!(es.coefficients.iter().all(|(e, _)| *e != -1));
    for (_, p) in &es.coefficients {
        let s: f64 = p.weights.iter().map(|w| w.1).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outcome_shift_leaves_effects(seed in 0u64..1000, shift in -50.0f64..50.0) {
        let data = random_data(120, seed, 0.1);
        let mut shifted = data.clone();
        for f in &mut shifted.firms {
            for o in f.obs.values_mut() {
                o.outcome = o.outcome.map(|v| v + shift);
            }
        }
        let design = size_design();
        for (a, b) in att_gt_all(&data, &design).iter().zip(att_gt_all(&shifted, &design)) {
            prop_assert_eq!(a.feasible, b.feasible);
            if a.feasible {
                prop_assert!((a.estimate - b.estimate).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn relabelling_firms_leaves_effects(seed in 0u64..1000) {
        let data = random_data(120, seed, 0.1);
        let mut relabelled = data.firms.clone();
        for (k, f) in relabelled.iter_mut().enumerate() {
            f.id = format!("z{:03}", (k * 37) % 1000);
        }
        let relabelled = DidData::new("y", relabelled).unwrap();
        let design = size_design();
        let a = att_gt_all(&data, &design);
        let b = att_gt_all(&relabelled, &design);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.feasible, y.feasible);
            if x.feasible {
                prop_assert!((x.estimate - y.estimate).abs() < 1e-10);
            }
        }
    }
}
