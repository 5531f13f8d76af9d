//! Runs the bundled precision suite against a provider and prints the report.
//!
//! cargo run --release --example run_benchmark -- [builtin|return-all] [suite-dir] [--json]

use belief_store::bench::{build_seed_corpus, bundled_suite_dir, load_suite, provider_by_name, run_suite};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let json = args.iter().any(|a| a == "--json");
    let mut positional = args.iter().filter(|a| !a.starts_with("--"));
    let provider_name = positional.next().map(String::as_str).unwrap_or("builtin");
    let dir = positional.next().map(Into::into).unwrap_or_else(bundled_suite_dir);

    let cases = load_suite(&dir).unwrap_or_else(|e| panic!("loading {}: {e}", dir.display()));
    let mut provider = provider_by_name(provider_name).unwrap_or_else(|| panic!("unknown provider {provider_name}"));
    let report = run_suite(&cases, &build_seed_corpus(), provider.as_mut()).expect("suite runs");
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.to_text());
    }
}
