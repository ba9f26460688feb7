use super::*;
use crate::did::{att_gt, CohortDesign, DidData, DidFirm, DidObs};

fn cand(id: &str, p: f64) -> Candidate {
    Candidate {
        firm_id: id.into(),
        group: 2010,
        pscore: p,
    }
}

#[test]
fn nearest_control_is_taken() {
    let free = MatchOptions {
        common_support: false,
        ..MatchOptions::default()
    };
    let m = nn_match(&[cand("t", 0.5)], &[cand("a", 0.49), cand("b", 0.30)], &free);
    assert_eq!(m.pairs.len(), 1);
    assert_eq!(m.pairs[0].control, "a");
    assert!((m.pairs[0].distance - 0.01).abs() < 1e-12);
    // 0.5 lies above every control score, so the support rule removes it.
    let strict = nn_match(&[cand("t", 0.5)], &[cand("a", 0.49), cand("b", 0.30)], &MatchOptions::default());
    assert_eq!(strict.off_support.len(), 1);
}

#[test]
fn treated_above_support_is_dropped() {
    let m = nn_match(&[cand("t", 0.99)], &[cand("a", 0.60), cand("b", 0.2)], &MatchOptions::default());
    assert!(m.pairs.is_empty());
    assert_eq!(m.off_support, vec!["t".to_string()]);
    assert_eq!(m.common_support, (0.2, 0.6));
}

#[test]
fn ties_go_to_lowest_firm_id_and_controls_are_not_reused() {
    let treated = [cand("t1", 0.5), cand("t2", 0.5), cand("t3", 0.45)];
    let controls = [cand("c2", 0.4), cand("c1", 0.6), cand("c3", 0.45)];
    let m = nn_match(&treated, &controls, &MatchOptions::default());
    let got: Vec<(&str, &str)> = m.pairs.iter().map(|p| (p.treated.as_str(), p.control.as_str())).collect();
    // t1 and t2 tie on p; t1 goes first. c3 is nearest for t1, then c1 and c2
    // are equidistant for t2 (0.1 each) and c1 wins the tie.
    assert_eq!(got, vec![("t1", "c3"), ("t2", "c1"), ("t3", "c2")]);
}

#[test]
fn excess_treated_are_reported_unmatched() {
    let m = nn_match(&[cand("t1", 0.45), cand("t2", 0.45)], &[cand("c", 0.45)], &MatchOptions::default());
    assert_eq!(m.pairs.len(), 1);
    assert_eq!(m.unmatched, vec!["t2".to_string()]);
    let caliper = MatchOptions {
        caliper: Some(0.01),
        ..MatchOptions::default()
    };
    let m = nn_match(&[cand("t", 0.45)], &[cand("c", 0.40), cand("d", 0.5)], &caliper);
    assert_eq!(m.unmatched.len(), 1);
}

#[test]
fn identical_groups_are_balanced() {
    let v = [1.0, 2.0, 4.0, 7.0];
    let s = balance_stats(&v, &v);
    assert_eq!(s.bias, Some(0.0));
    assert_eq!(s.variance_ratio, Some(1.0));
    assert!(!s.flagged);
    let c = balance_stats(&[1.0, 1.0], &[1.0, 1.0]);
    assert_eq!(c.bias, None);
}

#[test]
fn standardised_bias_from_table_moments() {
    // means 10.544 and 10.570, variances 2.43 and 2.25
    let bias = 100.0 * (10.544 - 10.570) / ((2.43f64 + 2.25) / 2.0).sqrt();
    assert!((bias - -1.70).abs() < 0.005, "{bias}");
    assert!((2.43f64 / 2.25 - 1.08).abs() < 0.005);
    // A sample with these exact moments gives the same figures.
    let make = |m: f64, v: f64| {
        let d = v.sqrt();
        vec![m - d, m + d, m - d, m + d, m, m]
    };
    let rescale = |x: Vec<f64>, v: f64| {
        let mean = crate::stats::mean(&x);
        let s = (v / crate::stats::variance(&x)).sqrt();
        x.into_iter().map(|a| mean + (a - mean) * s).collect::<Vec<_>>()
    };
    let t = rescale(make(10.544, 2.43), 2.43);
    let c = rescale(make(10.570, 2.25), 2.25);
    let s = balance_stats(&t, &c);
    assert!((s.bias.unwrap() - bias).abs() < 1e-9);
    assert!((s.variance_ratio.unwrap() - 2.43 / 2.25).abs() < 1e-9);
    assert!(!s.flagged);
}

#[test]
fn variance_ratio_outside_band_is_flagged() {
    let t = [0.0, 0.76f64.sqrt() * 2.0];
    let c = [0.0, 2.0];
    let s = balance_stats(&t, &c);
    assert!((s.variance_ratio.unwrap() - 0.76).abs() < 1e-12);
    assert!(s.flagged);
}

fn obs(firm: &str, year: i32, treated: bool, post: bool, y: f64) -> TwfeObs {
    TwfeObs {
        firm_id: firm.into(),
        year,
        country: "DE".into(),
        industry: "10".into(),
        treated,
        post,
        y,
        x: Vec::new(),
    }
}

#[test]
fn two_by_two_regression_is_the_cell_arithmetic() {
    // two firms per group, two periods
    let data = vec![
        obs("a", 1, true, false, 1.0),
        obs("a", 2, true, true, 2.5),
        obs("b", 1, true, false, 1.4),
        obs("b", 2, true, true, 2.7),
        obs("c", 1, false, false, 0.5),
        obs("c", 2, false, true, 0.9),
        obs("d", 1, false, false, 0.7),
        obs("d", 2, false, true, 1.0),
    ];
    let did = ((2.5 + 2.7) / 2.0 - (1.0 + 1.4) / 2.0) - ((0.9 + 1.0) / 2.0 - (0.5 + 0.7) / 2.0);
    let plain = TwfeSpec {
        fixed_effects: Vec::new(),
        controls: Vec::new(),
    };
    let r = twfe_did(&data, &plain).unwrap();
    assert!((r.coefficient - did).abs() < 1e-12);
    // Year effects absorb post; the coefficient is unchanged.
    let fe = TwfeSpec::default();
    let r2 = twfe_did(&data, &fe).unwrap();
    assert!((r2.coefficient - did).abs() < 1e-10);
    assert!(r2.coefficients.iter().all(|(n, _)| n != "post"));
    assert_eq!(r2.clusters, 4);
}

#[test]
fn collinear_interaction_is_an_error() {
    let data = vec![obs("a", 1, true, false, 1.0), obs("a", 2, true, true, 2.0)];
    let plain = TwfeSpec {
        fixed_effects: Vec::new(),
        controls: Vec::new(),
    };
    assert!(matches!(twfe_did(&data, &plain), Err(Error::Estimation(_))));
}

#[test]
fn regression_matches_cell_estimator_without_covariates() {
    let ys = [
        ("a", Some(2011), 1.0, 1.9),
        ("b", Some(2011), 0.4, 1.6),
        ("c", Some(2011), 0.2, 0.8),
        ("d", None, 0.6, 0.9),
        ("e", None, 1.1, 1.3),
        ("f", None, 0.0, 0.1),
        ("g", None, 0.3, 0.9),
    ];
    let mut twfe = Vec::new();
    let mut firms = Vec::new();
    for (id, cohort, y0, y1) in ys {
        twfe.push(obs(id, 2010, cohort.is_some(), false, y0));
        twfe.push(obs(id, 2011, cohort.is_some(), true, y1));
        let o = |y| DidObs {
            outcome: Some(y),
            industry: "10".into(),
            covariates: [None; 4],
        };
        firms.push(DidFirm {
            id: id.into(),
            cohort,
            obs: [(2010, o(y0)), (2011, o(y1))].into_iter().collect(),
        });
    }
    let data = DidData::new("y", firms).unwrap();
    let design = CohortDesign::new(vec![2011]).with_covariates(Vec::new());
    let cell = att_gt(&data, &design, 2011, 2011).unwrap();
    let r = twfe_did(
        &twfe,
        &TwfeSpec {
            fixed_effects: Vec::new(),
            controls: Vec::new(),
        },
    )
    .unwrap();
    assert!((r.coefficient - cell.estimate).abs() < 1e-10);
}

#[test]
fn covariate_names_parse() {
    for c in MatchCovariate::ALL {
        assert_eq!(c.label().parse::<MatchCovariate>().unwrap(), c);
    }
    assert!("colour".parse::<MatchCovariate>().is_err());
}
