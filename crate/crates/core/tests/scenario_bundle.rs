use std::path::Path;

use arena_core::scenario::{
    generate_synthetic_scenario, load_scenario, save_scenario, validate_scenario, RegimeProfile,
    DEFAULT_PROFILE,
};
use arena_core::{Money, Scenario};
use proptest::prelude::*;

#[test]
fn checked_in_default_bundle_matches_generator() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default");
    let loaded = load_scenario(&dir).unwrap();
    assert_eq!(loaded, Scenario::default_scenario());
}

#[test]
fn save_load_round_trip_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("stress");
    let mut s = generate_synthetic_scenario(99, RegimeProfile::new(20, 60, 52)).unwrap();
    s.id = "stress".into();
    save_scenario(&s, &dir).unwrap();
    assert_eq!(load_scenario(&dir).unwrap(), s);
}

#[test]
fn missing_file_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("broken");
    save_scenario(&Scenario::default_scenario(), &dir).unwrap();
    std::fs::remove_file(dir.join("industry.csv")).unwrap();
    assert!(load_scenario(&dir).is_err());
}

#[test]
fn truncated_series_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("short");
    save_scenario(&Scenario::default_scenario(), &dir).unwrap();
    let text = std::fs::read_to_string(dir.join("macro.csv")).unwrap();
    let kept: Vec<&str> = text.lines().take(100).collect();
    std::fs::write(dir.join("macro.csv"), kept.join("\n")).unwrap();
    assert!(load_scenario(&dir).is_err());
}

#[test]
fn bad_profile_is_rejected() {
    assert!(generate_synthetic_scenario(1, RegimeProfile::new(10, 10, 10)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_scenarios_validate(seed in any::<u64>()) {
        let s = generate_synthetic_scenario(seed, DEFAULT_PROFILE).unwrap();
        prop_assert!(validate_scenario(&s).is_empty());
        prop_assert_eq!(s.macro_series.len(), 132);
        prop_assert_eq!(s.regime_labels.len(), 132);
    }

    #[test]
    fn money_survives_json(cents in -900_000_000_000_000i64..900_000_000_000_000) {
        let m = Money::from_cents(cents);
        let back: Money = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }
}
