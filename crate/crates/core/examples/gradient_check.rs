//! Compare backpropagated gradients with central finite differences on
//! random toy models, as `memlab selftest` does.

use memlab::cli::selftest;

fn main() -> memlab::error::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let report = selftest(seed)?;
    for line in report.lines() {
        println!("{line}");
    }
    std::process::exit(if report.passed() { 0 } else { 1 });
}
