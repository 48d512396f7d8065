use cdpr_core::canonical;
use cdpr_core::model::Variant;
use cdpr_core::scenario::Scenario;
use cdpr_core::Error;

fn bundled(name: &str) -> String {
    let path = format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

const FILES: [(Variant, &str); 4] = [
    (Variant::AScrew, "canonical"),
    (Variant::AWinder, "winder"),
    (Variant::BGripper, "gripper"),
    (Variant::CRotatableGripper, "rotatable-gripper"),
];

// The bundled files are regenerated from the builders; a drift here means
// one of them was edited by hand.
#[test]
fn bundled_files_match_builders() {
    for (variant, name) in FILES {
        let from_file = Scenario::from_json_str(&bundled(name)).unwrap();
        assert_eq!(from_file, canonical::scenario(variant), "{name}.json");
        assert_eq!(bundled(name), canonical::scenario(variant).to_json_string().unwrap() + "\n");
    }
}

#[test]
fn round_trip_is_lossless() {
    for (variant, _) in FILES {
        let sc = canonical::scenario(variant);
        let again = Scenario::from_json_str(&sc.to_json_string().unwrap()).unwrap();
        assert_eq!(again, sc);
        assert!(sc.validate().is_empty());
    }
}

#[test]
fn malformed_input_reports_the_json_path() {
    let mut v: serde_json::Value = serde_json::from_str(&bundled("canonical")).unwrap();
    v["simulation"]["dt"] = serde_json::json!("fast");
    match Scenario::from_json_str(&v.to_string()) {
        Err(Error::Parse { path, .. }) => assert_eq!(path, "simulation.dt"),
        other => panic!("{other:?}"),
    }

    match Scenario::from_json_str("{ not json") {
        Err(Error::Parse { .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn invariant_violations_are_listed() {
    let mut v: serde_json::Value = serde_json::from_str(&bundled("canonical")).unwrap();
    v["simulation"]["dt"] = serde_json::json!(-1.0);
    match Scenario::from_json_str(&v.to_string()) {
        Err(Error::InvalidScenario(list)) => assert!(list.iter().any(|m| m.contains("dt")), "{list:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn load_reads_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, bundled("winder")).unwrap();
    assert_eq!(Scenario::load(&path).unwrap(), canonical::scenario(Variant::AWinder));
    assert!(matches!(Scenario::load(dir.path().join("missing.json")), Err(Error::Io(_))));
}
