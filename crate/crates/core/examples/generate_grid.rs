//! Draw a fresh grid (optionally seeded) and check its frequency invariant.
//!
//! cargo run --example generate_grid -- [seed]

use std::sync::Arc;

use gridpass::admin::render_grid;
use gridpass::{default_charset, generate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cs = Arc::new(default_charset());
    let grid = match std::env::args().nth(1) {
        Some(s) => generate(&cs, &mut ChaCha8Rng::seed_from_u64(s.parse().expect("seed must be a number"))),
        None => generate(&cs, &mut rand::rng()),
    };
    print!("{}", render_grid(&grid));
    println!("\nper-digit counts: {:?}", grid.frequencies());
    assert!(grid.frequencies().iter().all(|&f| f == cs.per_digit()));
}
