use linstate::axioms::{catalogue, check_catalogue};
use linstate::effects::builtin_model;
use linstate::gen::{GenConfig, TermGen};

#[test]
fn every_axiom_holds_on_small_instances() {
    let m = builtin_model("bit-store").unwrap();
    let mut g = TermGen::new(6, GenConfig::default());
    let reports = check_catalogue(&mut g, &m, 20);
    assert_eq!(reports.len(), catalogue().len());
    let mut bad = Vec::new();
    for r in &reports {
        if !r.passed() {
            bad.push(r.to_string());
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

