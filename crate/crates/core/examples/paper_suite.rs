//! Reproduce both worked examples and print the comparison table.

use tv_consensus::scenarios::Suite;
use tv_consensus::suite::run_paper_suite;

fn main() {
    let rows = run_paper_suite(Suite::All);
    for r in &rows {
        let crit = if r.criterion == 0 { "chk".to_string() } else { r.criterion.to_string() };
        println!("{crit:>3} {:<18} {} {}", r.scenario, if r.pass { "PASS" } else { "FAIL" }, r.observed);
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    println!("{passed}/{} rows passed", rows.len());
}
