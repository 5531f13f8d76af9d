//! Replays the multi-turn session cases with both bundled providers and
//! prints per-turn results. Drift is the share of non-pinned returned
//! beliefs that belong to the topic the user already left.
//!
//! cargo run --example session_drift

use belief_store::bench::{build_seed_corpus, bundled_suite_dir, load_suite, provider_by_name, run_suite};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sessions: Vec<_> = load_suite(bundled_suite_dir())?.into_iter().filter(|c| c.is_session()).collect();
    let corpus = build_seed_corpus();
    for name in ["builtin", "return-all"] {
        let mut provider = provider_by_name(name).expect("bundled provider");
        let report = run_suite(&sessions, &corpus, provider.as_mut())?;
        println!("== {name}: {}/{} sessions pass", report.passed, report.case_count);
        for case in report.results.iter().filter(|r| r.turns.iter().any(|t| t.drift_label.is_some())) {
            println!("{}", case.case_id);
            for t in &case.turns {
                let drift = match (&t.drift_label, t.drift_score) {
                    (Some(l), Some(d)) => format!("{l:?} drift {d:.2}"),
                    _ => String::new(),
                };
                println!("  turn {:>2} {:<5} {:<48} {drift}", t.turn, if t.pass { "ok" } else { "FAIL" }, t.query);
            }
        }
    }
    Ok(())
}
