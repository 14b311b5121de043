//! An observer who sees both grid and digits intersects candidate columns
//! across sessions. Prints one watched attack, then the Monte Carlo table
//! against the closed form.

use std::sync::Arc;

use gridpass::attack::{monte_carlo, rows_to_csv, sessions_to_recover, simulate, PasswordSource};
use gridpass::default_charset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cs = Arc::new(default_charset());
    let password = "Lagos(2006)";

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 1..=4 {
        let (_, summary) = simulate(password, &cs, k, &mut rng).unwrap();
        println!(
            "k={k} survivors {:?} residual {} recovered {}",
            summary.survivor_counts, summary.residual_space, summary.recovered
        );
    }

    let rows = monte_carlo(&cs, &PasswordSource::Fixed(password.into()), 6, 20_000, 7).unwrap();
    print!("\n{}", rows_to_csv(&rows));

    let needed = sessions_to_recover(&cs, 8, 20, 2_000, 3);
    let done: Vec<usize> = needed.iter().flatten().copied().collect();
    let mean = done.iter().sum::<usize>() as f64 / done.len() as f64;
    println!("\n8-char passwords fully recovered after {mean:.2} sessions on average");
}
