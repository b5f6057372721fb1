mod common;

use common::{check_gradients, GRAD_REL_TOL};

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut failures = Vec::new();
    let (mut checked, mut skipped) = (0, 0);
    for seed in 0..100 {
        let r = check_gradients(seed);
        checked += r.checked;
        skipped += r.skipped_kinks;
        failures.extend(r.failures);
    }
    assert!(
        failures.is_empty(),
        "{} entries off by more than {GRAD_REL_TOL}:\n{}",
        failures.len(),
        failures.join("\n")
    );
    // Kinks should be rare; if most entries are skipped the check is vacuous.
    assert!(skipped * 20 < checked, "checked {checked}, skipped {skipped}");
}
