//! Prints one line per acceptance criterion and fails unless each one
//! passes or fails only for its documented structural reason.

use plankton_lk::acceptance::run_all;

fn main() {
    let results = run_all();
    for r in &results {
        println!("{}", r.line());
    }
    let bad: Vec<u8> = results.iter().filter(|r| !r.acceptable()).map(|r| r.id).collect();
    if bad.is_empty() {
        println!("acceptance: {} criteria evaluated, all acceptable", results.len());
    } else {
        eprintln!("acceptance: unacceptable criteria {bad:?}");
        std::process::exit(1);
    }
}
