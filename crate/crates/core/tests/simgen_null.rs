//! Without selection or effect, treated and never-treated firms are draws from
//! the same process.

use std::collections::BTreeMap;

use markup_did::simgen::{generate, CohortSpec, Selection, SimConfig};

/// Two-sample Kolmogorov-Smirnov p-value, asymptotic distribution with the
/// usual small-sample correction.
fn ks_p_value(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = f64::from(k);
            2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn ks_helper_separates_shifted_samples() {
    let a: Vec<f64> = (0..200).map(|i| f64::from(i) / 200.0).collect();
    let same: Vec<f64> = (0..150).map(|i| (f64::from(i) + 0.5) / 150.0).collect();
    let shifted: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
    assert!(ks_p_value(&a, &same) > 0.9);
    assert!(ks_p_value(&a, &shifted) < 1e-6);
}

#[test]
fn null_design_gives_identically_distributed_paths() {
    let g = 2014;
    for seed in 0..10 {
        let cfg = SimConfig {
            n_firms: 600,
            cohorts: vec![CohortSpec { year: g, share: 0.3 }],
            selection: Selection { size: 0.0, capital_intensity: 0.0, tfp: 0.0 },
            seed: 500 + seed,
            ..SimConfig::default()
        };
        let sim = generate(&cfg).unwrap();
        let panel = sim.panel().unwrap();
        let cohort = sim.truth.cohorts();
        let mut sales: BTreeMap<(&str, i32), f64> = BTreeMap::new();
        for r in panel.rows() {
            sales.insert((r.firm_id.as_str(), r.year), r.sales.ln());
        }
        for t in [g, g + 2] {
            let (mut treated, mut control) = (Vec::new(), Vec::new());
            for (id, c) in &cohort {
                let (Some(pre), Some(post)) = (sales.get(&(id.as_str(), g - 1)), sales.get(&(id.as_str(), t))) else {
                    continue;
                };
                match c {
                    Some(_) => treated.push(post - pre),
                    None => control.push(post - pre),
                }
            }
            let p = ks_p_value(&treated, &control);
            assert!(p > 0.01, "seed {seed}, year {t}: KS p = {p}");
        }
    }
}
