//! Writes a synthetic labelled corpus as CSV (`text,generated`).
//! `cargo run --example synthetic_csv -- <essays-per-class> <seed> > corpus.csv`

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    print!("{}", detext::synthetic::to_csv(&detext::synthetic::generate(n, seed)));
}
