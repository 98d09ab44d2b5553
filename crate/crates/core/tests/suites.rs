use unipelt_core::verify::{run_suite, Suite};

fn assert_suite(suite: Suite) {
    let report = run_suite(suite, 7).unwrap();
    for c in &report.checks {
        println!("{:<40} {} {}", c.name, if c.passed { "ok" } else { "FAIL" }, c.detail);
    }
    assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
}

#[test]
fn census_suite_passes() {
    assert_suite(Suite::Census);
}

#[test]
fn identity_suite_passes() {
    assert_suite(Suite::Identity);
}

#[test]
fn grad_suite_passes() {
    assert_suite(Suite::Grad);
}

#[test]
fn freeze_suite_passes() {
    assert_suite(Suite::Freeze);
}
