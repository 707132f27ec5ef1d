// Acceptance criteria, one pass/fail line each.

mod common;

use std::time::Instant;

use mayerkit::verify::{self, Check, Criterion, VerifyOptions};

fn invariant_suites() -> Criterion {
    let t0 = Instant::now();
    let checks = common::SUITES
        .iter()
        .map(|(name, suite)| {
            let outcome = suite(common::CASES);
            Check {
                name: (*name).into(),
                passed: outcome.is_ok(),
                detail: outcome.err().unwrap_or_else(|| format!("{} cases, n ≤ {}", common::CASES, common::MAX_N)),
            }
        })
        .collect();
    Criterion {
        id: 9,
        title: "invariant suites".into(),
        checks,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn main() {
    let opts = VerifyOptions::default();
    let criteria = vec![
        verify::kpu_threshold(&opts),
        verify::fp_threshold(&opts),
        verify::tonks_partition(&opts),
        verify::ks_residual(&opts),
        verify::combinatorial_counts(),
        verify::cumulant_cross_forms(&opts),
        verify::borel_extinction(),
        verify::rcm_subcritical(&opts),
        invariant_suites(),
    ];
    for c in &criteria {
        println!("{}", c.summary_line());
    }
    if criteria.iter().any(|c| !c.passed()) {
        eprintln!("{}", verify::render_table(&criteria));
        std::process::exit(1);
    }
}
