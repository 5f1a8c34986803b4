//! Acceptance battery: one PASS/FAIL line per criterion, all tolerances pinned.
//!
//! Run with `cargo test -p furstenberg-cli --release --test acceptance -- --nocapture`.

use std::process::Command;
use std::time::Duration;

use furstenberg_cli::suite::{run_battery, Battery, Outcome, TITLES};

/// Wall-clock pins: criterion 1, criteria 3 and 4 together, criterion 5.
const DUALITY_LIMIT: Duration = Duration::from_secs(10);
const INCIDENCE_LIMIT: Duration = Duration::from_secs(300);
const TARGET_LIMIT: Duration = Duration::from_secs(60);

fn quick_suite_bytes() -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_furstenberg")).args(["suite", "--quick"]).output().expect("binary runs");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

#[test]
fn acceptance() {
    let outcomes = run_battery(&Battery::full(), |o| println!("{}", o.line()));
    let by_id = |id: u8| -> &Outcome { outcomes.iter().find(|o| o.id == id).unwrap() };
    let mut verdicts: Vec<(u8, bool, String)> = outcomes.iter().map(|o| (o.id, o.pass(), o.line())).collect();

    let d = by_id(1).elapsed;
    let timing = [
        (1u8, d <= DUALITY_LIMIT, format!("{d:.2?} <= {DUALITY_LIMIT:?}")),
        (3, by_id(3).elapsed <= INCIDENCE_LIMIT, format!("{:.2?} <= {INCIDENCE_LIMIT:?}", by_id(3).elapsed)),
        (4, by_id(4).elapsed <= INCIDENCE_LIMIT, format!("{:.2?} <= {INCIDENCE_LIMIT:?}", by_id(4).elapsed)),
        (5, by_id(5).elapsed <= TARGET_LIMIT, format!("{:.2?} <= {TARGET_LIMIT:?}", by_id(5).elapsed)),
    ];
    for (id, ok, detail) in timing {
        println!("criterion {id:>2} {} time {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            verdicts.push((id, false, format!("time {detail}")));
        }
    }

    let (a, b) = (quick_suite_bytes(), quick_suite_bytes());
    let same = !a.is_empty() && a == b;
    let line = format!("criterion 13 {} {} ({} bytes)", if same { "PASS" } else { "FAIL" }, TITLES[12], a.len());
    println!("{line}");
    verdicts.push((13, same, line));

    let ids: Vec<u8> = outcomes.iter().map(|o| o.id).collect();
    assert_eq!(ids, (1..=12).collect::<Vec<u8>>());
    let failed: Vec<&String> = verdicts.iter().filter(|v| !v.1).map(|v| &v.2).collect();
    assert!(failed.is_empty(), "failed criteria:\n{failed:#?}");
}
