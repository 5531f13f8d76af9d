fn main() {
    let c = belief_store::bench::build_seed_corpus();
    println!("{}", serde_json::to_string_pretty(&c).unwrap());
}
