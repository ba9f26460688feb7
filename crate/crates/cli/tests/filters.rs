use std::collections::BTreeMap;

use markup_did::panel::Panel;
use markup_did::simgen::{generate, SimConfig};
use markup_did::vertical::Classification;
use markup_did_cli::config::Filters;
use markup_did_cli::filters::{apply_filters, FilterContext};
use proptest::prelude::*;

fn panel() -> (Panel, BTreeMap<String, Classification>) {
    let cfg = SimConfig {
        n_firms: 300,
        countries: ["DE", "ES", "PL", "CZ", "GB", "SE"].iter().map(|s| s.to_string()).collect(),
        seed: 21,
        ..SimConfig::default()
    };
    let panel = generate(&cfg).unwrap().panel().unwrap();
    let types = panel
        .treatments()
        .iter()
        .filter(|(_, t)| t.cohort.is_some())
        .enumerate()
        .map(|(i, (id, _))| {
            let c = [Classification::Vertical, Classification::Horizontal, Classification::Other][i % 3];
            (id.clone(), c)
        })
        .collect();
    (panel, types)
}

fn one(kind: usize) -> Filters {
    let mut f = Filters::default();
    match kind {
        0 => f.countries = vec!["eu-15".into()],
        1 => f.deal_type = Some(Classification::Vertical),
        2 => f.perimeter_bin = Some(">100".into()),
        3 => f.foreign_only = true,
        _ => f.tech_class = Some("Low".into()),
    }
    f
}

fn combine(kinds: &[usize]) -> Filters {
    let mut f = Filters::default();
    for &k in kinds {
        let o = one(k);
        f.countries.extend(o.countries);
        f.deal_type = f.deal_type.or(o.deal_type);
        f.perimeter_bin = f.perimeter_bin.or(o.perimeter_bin);
        f.foreign_only |= o.foreign_only;
        f.tech_class = f.tech_class.or(o.tech_class);
    }
    f
}

fn run(panel: &Panel, types: &BTreeMap<String, Classification>, f: &Filters) -> Panel {
    let ctx = FilterContext::build(panel, None, None, Some(types)).unwrap();
    apply_filters(panel.clone(), f, &ctx).unwrap()
}

#[test]
fn eu15_vertical_large_acquirer_equals_any_sequence() {
    let (p, types) = panel();
    let joint = run(&p, &types, &combine(&[0, 1, 2]));
    assert!(joint.len() < p.len());
    assert!(joint.rows().iter().all(|r| ["DE", "ES", "GB", "SE"].contains(&r.country.as_str())));
    for order in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let mut q = p.clone();
        for k in order {
            q = run(&q, &types, &one(k));
        }
        assert_eq!(q.rows(), joint.rows(), "order {order:?}");
        assert_eq!(q.derived().unwrap(), joint.derived().unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filters_commute(kinds in proptest::sample::subsequence(vec![0usize, 1, 2, 3, 4], 1..=5).prop_shuffle()) {
        let (p, types) = panel();
        let joint = run(&p, &types, &combine(&kinds));
        let mut q = p.clone();
        for &k in &kinds {
            q = run(&q, &types, &one(k));
        }
        prop_assert_eq!(q.rows(), joint.rows());
    }
}
