mod common;

#[test]
fn linearity_golden_suite() {
    let bad = common::run_golden("linearity");
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn suite_contains_both_outcomes() {
    let verdicts: Vec<String> = common::golden_cases("linearity").iter().map(|p| common::check_verdict(p)).collect();
    assert!(verdicts.iter().any(|v| v == "rejected LinearityViolation"));
    assert!(verdicts.iter().any(|v| v.starts_with("accepted")));
}
