use platoon_core::acceptance;

#[test]
fn all_criteria_pass() {
    let results = acceptance::run_all();
    assert_eq!(results.len(), 13);
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn stiff_gains_fail_the_equilibrium_checks() {
    let results = acceptance::run_all_with(&|s| {
        let g = &mut s.parameters.gains;
        g.kp *= 10.0;
        g.ki *= 10.0;
        g.kd *= 10.0;
        g.kv *= 10.0;
        g.ka *= 10.0;
    });
    for r in &results {
        println!("{r}");
    }
    // Steady starts at equilibrium, so the gains only show after the cut-out.
    let cut_in = results.iter().find(|r| r.id == 5).unwrap();
    assert!(!cut_in.passed);
    assert!(cut_in.detail.contains("of 13 m"), "{}", cut_in.detail);
    assert!(results.iter().any(|r| !r.passed));
}
