//! Naive enumeration against the inverted check, including a case where two
//! stored passwords share a digit sequence.

use std::sync::Arc;
use std::time::Instant;

use gridpass::{
    combination_count, reference_grid, verify_inverted, verify_naive, CredentialRecord, CredentialStore, StoreMode,
};

fn main() {
    let grid = reference_grid();
    let mut store = CredentialStore::new(Arc::clone(grid.charset()), StoreMode::PasswordOnly);
    // All three encode to 27 under the reference grid.
    for p in ["zC", "uB", "e8", "Lagos(2006)"] {
        store.add(CredentialRecord::password_only(p)).unwrap();
    }

    for typed in ["uB", "Lagos(2006)"] {
        let digits = grid.encode(typed).unwrap();
        println!("{typed} -> {digits}, {} combinations", combination_count(&digits, &grid));

        let t = Instant::now();
        let inverted = verify_inverted(&digits, &grid, &store);
        println!("  inverted: {:?} {:?} in {:?}", inverted.outcome, inverted.matched_password, t.elapsed());

        let t = Instant::now();
        match verify_naive(&digits, &grid, &store, 1_000_000) {
            Ok(naive) => println!(
                "  naive:    {:?} {:?} after {} combinations in {:?}",
                naive.outcome,
                naive.matched_password,
                naive.combinations_examined,
                t.elapsed()
            ),
            Err(e) => println!("  naive:    {e}"),
        }
    }
}
