//! Coded-grid password entry.
//!
//! Every character of the password alphabet is labeled with a random digit
//! for each login attempt, each digit used equally often. The user types the
//! digits of their password's characters instead of the characters, and a
//! fresh grid is drawn after every attempt. This crate provides:
//!
//! * [`charset`]: the alphabet and its divisibility constraint
//! * [`grid`]: grid generation, encoding, and the worked-example fixture
//! * [`decoder`]: candidate sets for typed digits
//! * [`verifier`]: the exhaustive enumerator and the equivalent inverted check
//! * [`store`]: the sorted credential file
//! * [`attack`]: intersection-attack simulation
//! * [`service`]: the single-use challenge login service and its HTTP API
//! * [`admin`]: operator commands behind the `gridpass` binary

pub mod admin;
pub mod attack;
pub mod charset;
pub mod decoder;
pub mod grid;
pub mod service;
pub mod store;
pub mod verifier;

pub use charset::{default_charset, CharacterSet};
pub use decoder::{candidates, decode_sequence, CandidateSet};
pub use grid::{reference_grid, generate, CodeGrid, DigitSequence};
pub use store::{CredentialRecord, CredentialStore, StoreMode};
pub use verifier::{combination_count, verify_inverted, verify_naive, AuthResult};
