//! Simulated panels written to disk load back unchanged.

use markup_did::panel::{load_deflators, load_panel, load_treatments, ColumnMapping};
use markup_did::simgen::{generate, SimConfig};
use markup_did::table::Manifest;

#[test]
fn simulated_files_round_trip() {
    let sim = generate(&SimConfig { n_firms: 50, seed: 14, ..SimConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    sim.write(dir.path(), Some(&Manifest::default())).unwrap();

    let loaded = load_panel(&dir.path().join("firms.csv"), &ColumnMapping::default()).unwrap();
    assert_eq!(loaded.rows(), sim.rows.as_slice());
    assert_eq!(loaded.report().rows_dropped(), 0);

    let panel = loaded
        .with_treatments(load_treatments(&dir.path().join("treatments.csv")).unwrap())
        .unwrap()
        .apply_deflators(&load_deflators(&dir.path().join("deflators.csv")).unwrap())
        .unwrap()
        .derive_variables()
        .unwrap();
    let direct = sim.panel().unwrap();
    assert_eq!(panel.rows(), direct.rows());
    assert_eq!(panel.treatments(), direct.treatments());
    assert_eq!(panel.derived().unwrap(), direct.derived().unwrap());
}
