//! Candidate decoding: the characters a typed digit could stand for.

use crate::grid::{CodeGrid, DigitSequence};

/// The preimage of one digit under a grid, in charset order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    digit: u8,
    indices: Vec<u8>,
    chars: Vec<char>,
}

impl CandidateSet {
    pub fn digit(&self) -> u8 {
        self.digit
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Charset indices of the candidates, ascending.
    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn contains(&self, ch: char) -> bool {
        self.chars.contains(&ch)
    }

    /// Bit `i` set iff charset character `i` is a candidate.
    pub fn mask(&self) -> u128 {
        self.indices.iter().fold(0u128, |m, &i| m | (1u128 << i))
    }
}

/// All characters the grid labels with `digit`.
pub fn candidates(digit: u8, grid: &CodeGrid) -> CandidateSet {
    let charset = grid.charset();
    let mut indices = Vec::with_capacity(charset.per_digit());
    let mut chars = Vec::with_capacity(charset.per_digit());
    for (i, (&code, &ch)) in grid.codes().iter().zip(charset.chars()).enumerate() {
        if code == digit {
            indices.push(i as u8);
            chars.push(ch);
        }
    }
    CandidateSet { digit, indices, chars }
}

/// One candidate set per typed digit. Sets for repeated digits are
/// computed once and cloned.
pub fn decode_sequence(digits: &DigitSequence, grid: &CodeGrid) -> Vec<CandidateSet> {
    let table: Vec<CandidateSet> = (0..10).map(|d| candidates(d, grid)).collect();
    digits
        .digits()
        .iter()
        .map(|&d| table[d as usize].clone())
        .collect()
}
