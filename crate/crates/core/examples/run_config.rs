//! Runs a JSON analysis file and prints the text report.
//!
//! `cargo run --example run_config -- crates/core/examples/configs/ex7_curve.json`
use stla::config::load_config;
use stla::report::{render_text, run};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/ex7_curve.json").to_string());
    let cfg = match load_config(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let report = run(&cfg);
    print!("{}", render_text(&report));
    std::process::exit(report.exit_code);
}
