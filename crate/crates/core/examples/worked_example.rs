//! The fixed reference grid: encode a password, then list what an observer
//! of the digits alone would have to consider at each position.

use gridpass::admin::render_grid;
use gridpass::{combination_count, decode_sequence, reference_grid};

fn main() {
    let grid = reference_grid();
    print!("{}", render_grid(&grid));

    let password = "Lagos(2006)";
    let digits = grid.encode(password).expect("password is in the charset");
    println!("\n{password} -> {digits}\n");

    let columns = decode_sequence(&digits, &grid);
    for (i, col) in columns.iter().enumerate() {
        let chars: String = col.chars().iter().collect();
        println!("position {i:>2}  digit {}  {chars}", col.digit());
    }
    println!("\ncandidate passwords: {}", combination_count(&digits, &grid));
}
