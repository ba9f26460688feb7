use proptest::prelude::*;

use super::*;

fn deal(id: &str, target: &str, acquirer: &str) -> DealRecord {
    DealRecord {
        deal_id: id.into(),
        target_id: format!("T{id}"),
        target_industry: target.into(),
        target_country: "IT".into(),
        acquirer_id: Some(format!("A{id}")),
        acquirer_industry: acquirer.into(),
        acquirer_country: Some("IT".into()),
        year: 2012,
        perimeter: Some(3),
    }
}

fn toy() -> IOTable {
    // nine coefficients: median 0.2, 75th percentile 0.95, a(A, B) = 0.9
    let mut io = IOTable::new();
    let entries = [
        ("A", "B", 0.9),
        ("B", "A", 0.01),
        ("A", "C", 0.05),
        ("C", "A", 0.1),
        ("B", "C", 0.15),
        ("C", "B", 0.2),
        ("A", "A", 0.95),
        ("B", "B", 0.98),
        ("C", "C", 0.99),
    ];
    for (a, b, v) in entries {
        io.insert(a, b, v).unwrap();
    }
    io
}

#[test]
fn same_code_is_horizontal() {
    let io = toy();
    let th = Threshold { percentile: 50.0, value: 0.2 };
    let c = classify_deal(&deal("1", "25", "25"), &io, &IndustryBridge::default(), th).unwrap();
    assert_eq!(c.classification, Classification::Horizontal);
    assert!(is_horizontal("2511", "25"));
    assert!(!is_horizontal("26", "25"));
}

#[test]
fn toy_table_thresholds() {
    let io = toy();
    let bridge = IndustryBridge::default();
    let deals = [deal("1", "A", "B")];
    let t50 = threshold(&deals, &io, &bridge, 50.0, Reference::WholeTable).unwrap();
    assert!((t50.value - 0.2).abs() < 1e-12);
    assert_eq!(classify_deal(&deals[0], &io, &bridge, t50).unwrap().classification, Classification::Vertical);
    let t75 = threshold(&deals, &io, &bridge, 75.0, Reference::WholeTable).unwrap();
    assert!((t75.value - 0.95).abs() < 1e-12);
    assert_eq!(classify_deal(&deals[0], &io, &bridge, t75).unwrap().classification, Classification::Other);
}

#[test]
fn direction_is_the_larger_coefficient() {
    let io = toy();
    let th = Threshold { percentile: 50.0, value: 0.5 };
    let bridge = IndustryBridge::default();
    let fwd = classify_deal(&deal("1", "A", "B"), &io, &bridge, th).unwrap();
    let bwd = classify_deal(&deal("2", "B", "A"), &io, &bridge, th).unwrap();
    assert_eq!(fwd.classification, Classification::Vertical);
    assert_eq!(bwd.classification, Classification::Vertical);
    assert_eq!(fwd.forward, Some(0.9));
    assert_eq!(bwd.backward, Some(0.9));
}

#[test]
fn sample_reference_uses_deal_pairs() {
    let io = toy();
    let deals = [deal("1", "A", "B"), deal("2", "C", "A"), deal("3", "A", "A")];
    // pairs {A,B} and {A,C}: values 0.9, 0.01, 0.05, 0.1
    let t = threshold(&deals, &io, &IndustryBridge::default(), 50.0, Reference::SampleDeals).unwrap();
    assert!((t.value - 0.075).abs() < 1e-12);
}

#[test]
fn unmapped_industry_is_named() {
    let io = toy();
    let th = Threshold { percentile: 50.0, value: 0.2 };
    let err = classify_deal(&deal("1", "A", "Z"), &io, &IndustryBridge::default(), th).unwrap_err();
    assert!(matches!(err, Error::Classification(ref m) if m.contains("`Z`")));
    let mut bridge = IndustryBridge::default();
    bridge.insert("10", "A");
    bridge.insert("20", "B");
    let c = classify_deal(&deal("1", "10", "20"), &io, &bridge, th).unwrap();
    assert_eq!(c.classification, Classification::Vertical);
    assert!(classify_deal(&deal("1", "10", "30"), &io, &bridge, th).is_err());
}

#[test]
fn perimeter_boundaries() {
    assert_eq!(perimeter_bin(1), "1-5");
    assert_eq!(perimeter_bin(5), "1-5");
    assert_eq!(perimeter_bin(6), "6-30");
    assert_eq!(perimeter_bin(30), "6-30");
    assert_eq!(perimeter_bin(31), "31-100");
    assert_eq!(perimeter_bin(100), "31-100");
    assert_eq!(perimeter_bin(101), ">100");
    let mut d = deal("1", "A", "B");
    d.perimeter = None;
    let (bins, missing) = perimeter_bins(&[d, deal("2", "A", "B")]);
    assert_eq!(bins, vec![None, Some("1-5")]);
    assert_eq!(missing, 1);
}

#[test]
fn foreign_flag() {
    let mut d = deal("1", "A", "B");
    assert!(!d.foreign());
    d.acquirer_country = Some("FR".into());
    assert!(d.foreign());
}

proptest! {
    #[test]
    fn raising_threshold_never_adds_vertical_deals(
        coefs in proptest::collection::vec(0.0f64..1.0, 16),
        pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..20),
    ) {
        let codes = ["11", "22", "33", "44"];
        let mut io = IOTable::new();
        for (k, v) in coefs.iter().enumerate() {
            io.insert(codes[k / 4], codes[k % 4], *v).unwrap();
        }
        let deals: Vec<DealRecord> = pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| deal(&i.to_string(), codes[a], codes[b]))
            .collect();
        let bridge = IndustryBridge::default();
        let mut previous: Option<BTreeSet<String>> = None;
        for pct in [25.0, 50.0, 75.0] {
            let Ok(c) = classify_deals(&deals, &io, &bridge, pct, Reference::WholeTable) else { continue };
            let vertical: BTreeSet<String> = c
                .iter()
                .filter(|d| d.classification == Classification::Vertical)
                .map(|d| d.deal.deal_id.clone())
                .collect();
            if let Some(prev) = &previous {
                prop_assert!(vertical.is_subset(prev));
            }
            previous = Some(vertical);
        }
        for d in &deals {
            let swapped = deal("x", &d.acquirer_industry, &d.target_industry);
            prop_assert_eq!(
                is_horizontal(&d.target_industry, &d.acquirer_industry),
                is_horizontal(&swapped.target_industry, &swapped.acquirer_industry)
            );
        }
    }
}
