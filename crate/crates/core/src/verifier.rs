//! Authenticating a typed digit sequence against the credential store.
//!
//! Two routes decide the same relation:
//!
//! * [`verify_naive`] enumerates every combination of candidate characters
//!   (an `n`-position odometer, position 0 outermost, candidates in charset
//!   order) and binary-searches each assembled string in the store. It
//!   costs `d^n` lookups and is kept as the reference oracle.
//! * [`verify_inverted`] encodes each stored password of length `n` under
//!   the grid and compares digit strings, `O(p * n)`.
//!
//! Odometer order over charset-ordered candidate lists is lexicographic
//! order by charset index, so the naive route's first hit is the
//! charset-smallest matching password. The store is kept in that same
//! order, so the inverted route's first hit is that password too.

use num_bigint::BigUint;
use thiserror::Error;

use crate::decoder::decode_sequence;
use crate::grid::{CodeGrid, DigitSequence};
use crate::store::CredentialStore;

/// Largest enumeration `verify_naive` runs by default.
pub const DEFAULT_NAIVE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthResult {
    pub outcome: Outcome,
    pub matched_password: Option<String>,
    /// Naive: combinations assembled. Inverted: stored passwords compared.
    pub combinations_examined: u64,
}

impl AuthResult {
    fn accepted(password: String, examined: u64) -> Self {
        Self {
            outcome: Outcome::Accepted,
            matched_password: Some(password),
            combinations_examined: examined,
        }
    }

    fn rejected(examined: u64) -> Self {
        Self {
            outcome: Outcome::Rejected,
            matched_password: None,
            combinations_examined: examined,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("naive enumeration needs {required} combinations, budget is {budget}")]
    BudgetExceeded { required: BigUint, budget: u64 },
}

/// Size of the candidate space: the product of candidate-set sizes, `d^n`.
pub fn combination_count(digits: &DigitSequence, grid: &CodeGrid) -> BigUint {
    let freq = grid.frequencies();
    digits
        .digits()
        .iter()
        .fold(BigUint::from(1u32), |acc, &d| acc * BigUint::from(freq[d as usize]))
}

/// Exhaustive enumeration of candidate combinations, stopping at the first
/// one found in the store.
pub fn verify_naive(
    digits: &DigitSequence,
    grid: &CodeGrid,
    store: &CredentialStore,
    budget: u64,
) -> Result<AuthResult, VerifyError> {
    let required = combination_count(digits, grid);
    if required > BigUint::from(budget) {
        return Err(VerifyError::BudgetExceeded { required, budget });
    }

    let columns = decode_sequence(digits, grid);
    let n = columns.len();
    let mut index = vec![0usize; n];
    let mut candidate = String::with_capacity(n);
    let mut examined = 0u64;
    loop {
        candidate.clear();
        candidate.extend(columns.iter().zip(&index).map(|(col, &i)| col.chars()[i]));
        examined += 1;
        if store.lookup(&candidate) {
            return Ok(AuthResult::accepted(candidate, examined));
        }

        // Advance the odometer; the last position turns fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(AuthResult::rejected(examined));
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < columns[pos].len() {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// Encodes each stored password of the right length and compares.
pub fn verify_inverted(digits: &DigitSequence, grid: &CodeGrid, store: &CredentialStore) -> AuthResult {
    let n = digits.len();
    let mut examined = 0u64;
    for record in store.records() {
        if record.password.chars().count() != n {
            continue;
        }
        examined += 1;
        if grid.encodes_to(&record.password, digits) {
            // Records are sorted, so the first hit is the smallest.
            return AuthResult::accepted(record.password.clone(), examined);
        }
    }
    AuthResult::rejected(examined)
}

/// Compares only against `username`'s password. Unknown users are rejected
/// the same way as wrong digits.
pub fn verify_for_user(
    digits: &DigitSequence,
    grid: &CodeGrid,
    store: &CredentialStore,
    username: &str,
) -> AuthResult {
    match store.find_user(username) {
        Some(r) if grid.encodes_to(&r.password, digits) => AuthResult::accepted(r.password.clone(), 1),
        Some(_) => AuthResult::rejected(1),
        None => AuthResult::rejected(0),
    }
}
