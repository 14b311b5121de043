//! Without the grid, the digits of two different passwords look alike.

use std::sync::Arc;

use gridpass::attack::weak_observer_report;
use gridpass::default_charset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cs = Arc::new(default_charset());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = weak_observer_report(&cs, "Lagos(2006)", "zzzzzzzzzzz", 5_000, &mut rng).unwrap();
    println!(
        "worst position: chi-square {:.1} on {} dof (critical {:.1}), max TV {:.4}, distinguishable: {}",
        r.chi_square,
        r.degrees_of_freedom,
        r.critical_value_001,
        r.max_total_variation,
        r.distinguishable()
    );
}
