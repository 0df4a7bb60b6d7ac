//! Parses a representation program and evaluates it on a few maze states.
//!
//! ```text
//! cargo run --example dsl_playground -- "out: s[2] - s[0]; out: tanh(s[3] - s[1])"
//! ```
//!
//! With no argument a built-in program is used. Errors print with their
//! line and column.

use lesr::dsl::{parse_repr_program, GRAMMAR};

const DEFAULT: &str = "\
# relative offsets and the distance
out: s[2] - s[0]
out: s[3] - s[1]
out: sqrt((s[0] - s[2])^2 + (s[1] - s[3])^2)
";

fn main() {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| DEFAULT.to_string());
    let program = match parse_repr_program(&text, 4) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}\n\nGrammar:\n{GRAMMAR}");
            std::process::exit(2);
        }
    };
    println!("canonical form:\n{}", program.format());
    let states = [
        [1.0, 1.0, 9.0, 9.0],
        [5.0, 5.0, 9.0, 9.0],
        [8.8, 9.1, 9.0, 9.0],
    ];
    for s in states {
        match program.augment(&s) {
            Ok(sc) => println!("{s:?} -> {sc:?}"),
            Err(e) => println!("{s:?} -> {e}"),
        }
    }
}
