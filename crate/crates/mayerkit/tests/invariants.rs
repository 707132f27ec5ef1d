// Property suites on n ≤ 5 with 100 cases each.

mod common;

use common::CASES;

#[test]
fn ursell_symmetry() {
    common::ursell_symmetry(CASES).unwrap();
}

#[test]
fn tree_graph_inequality() {
    common::tree_graph_inequality(CASES).unwrap();
}

#[test]
fn keygraph_factorization() {
    common::keygraph_factorization(CASES).unwrap();
}

#[test]
fn psi_recursion() {
    common::psi_recursion(CASES).unwrap();
}

#[test]
fn nonneg_bound() {
    common::nonneg_bound(CASES).unwrap();
}

#[test]
fn picard_envelope() {
    common::picard_envelope(CASES).unwrap();
}

#[test]
fn janossy() {
    common::janossy(CASES).unwrap();
}
