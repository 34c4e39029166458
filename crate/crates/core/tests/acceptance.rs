//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the table is always printed.

use hypercube_cluster::acceptance::{run_all, run_criterion, AcceptanceConfig, KNOWN_FAILURES};
use hypercube_cluster::poly::q;
use hypercube_cluster::ursell::{ursell_fast, SmallGraph};
use hypercube_cluster::Result;

fn acceptance_suite() {
    let results = run_all(&AcceptanceConfig::default());
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let passed = results.len() - failed.len();
    println!("{passed}/{} criteria passed", results.len());
    let unexpected: Vec<_> = failed.iter().filter(|id| !KNOWN_FAILURES.contains(id)).collect();
    assert!(unexpected.is_empty(), "failed criteria: {unexpected:?}");

    // The known failure must stay exactly the analysed one: non-monotone at
    // λ = 1/2, decreasing at λ = 1.
    let r6 = &results[5];
    assert!(!r6.passed, "criterion 6 now passes; revisit KNOWN_FAILURES");
    let (half, one) = r6.detail.split_once("; ").expect("two fugacities");
    assert!(half.starts_with("λ = 1/2") && half.ends_with("(not decreasing)"));
    assert!(one.starts_with("λ = 1:") && !one.contains("not decreasing"));
}

fn wrong_edge(g: &SmallGraph) -> Result<hypercube_cluster::poly::Q> {
    if g.n() == 2 && g.edge_count() == 1 {
        return Ok(q(-1, 3));
    }
    ursell_fast(g)
}

fn injected_ursell_error_is_named() {
    let cfg = AcceptanceConfig {
        ursell: wrong_edge,
        ..AcceptanceConfig::default()
    };
    let r = run_criterion(3, &cfg);
    println!("injected wrong edge value -> {}", r.line());
    assert!(!r.passed);
    assert_eq!(r.name, "Ursell values");
    assert!(r.detail.contains("edge"));
}

fn main() {
    acceptance_suite();
    injected_ursell_error_is_named();
    println!("acceptance: ok");
}
