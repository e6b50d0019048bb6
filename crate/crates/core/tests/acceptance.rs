//! End-to-end acceptance gate. Prints one verdict line per criterion;
//! run with `--nocapture` to see them on success too.

use samurai_core::{run_acceptance, SimConfig};

#[test]
fn acceptance_criteria() {
    let cfg = SimConfig::default();
    let results = run_acceptance(&cfg);
    let mut all_ok = true;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("criterion {:2} {:32} {}", r.id, r.name, verdict);
        if !r.passed {
            all_ok = false;
            for c in &r.checks {
                if !c.passed {
                    println!("    {}: {}", c.label, c.detail);
                }
            }
        }
    }
    assert!(all_ok, "acceptance criteria failed; see lines above");
}
