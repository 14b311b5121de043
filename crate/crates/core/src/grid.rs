//! Code grids: one random digit label per alphabet character, each digit
//! used exactly `d` times.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charset::{CharacterSet, CODE_DIGITS};

/// Longest password (and therefore digit sequence) the scheme accepts.
pub const MAX_LEN: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("character {0:?} is not in the charset")]
    CharacterNotInCharset(char),
    #[error("password is empty")]
    EmptyPassword,
    #[error("length {0} exceeds the maximum of 255")]
    OverLength(usize),
    #[error("grid has {got} codes for a {expected}-character charset")]
    SizeMismatch { got: usize, expected: usize },
    #[error("code {0} is not a decimal digit")]
    InvalidCode(u8),
    #[error("digit {digit} labels {count} characters, expected {expected}")]
    FrequencyViolation { digit: u8, count: usize, expected: usize },
    #[error("character {0:?} appears more than once in the grid table")]
    DuplicateCell(char),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DigitError {
    #[error("digit sequence is empty")]
    Empty,
    #[error("digit sequence length {0} exceeds the maximum of 255")]
    OverLength(usize),
    #[error("non-digit {ch:?} at position {index}")]
    NonDigit { ch: char, index: usize },
}

/// What the user types: one code digit per password character.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DigitSequence(Vec<u8>);

impl DigitSequence {
    pub fn new(digits: Vec<u8>) -> Result<Self, DigitError> {
        if digits.is_empty() {
            return Err(DigitError::Empty);
        }
        if digits.len() > MAX_LEN {
            return Err(DigitError::OverLength(digits.len()));
        }
        if let Some((index, &d)) = digits.iter().enumerate().find(|(_, &d)| d > 9) {
            return Err(DigitError::NonDigit {
                ch: char::from_digit(u32::from(d), 36).unwrap_or('?'),
                index,
            });
        }
        Ok(Self(digits))
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenation; fails only when the result exceeds [`MAX_LEN`].
    pub fn concat(&self, other: &DigitSequence) -> Result<Self, DigitError> {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self::new(v)
    }
}

impl FromStr for DigitSequence {
    type Err = DigitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .chars()
            .enumerate()
            .map(|(index, ch)| match ch {
                '0'..='9' => Ok(ch as u8 - b'0'),
                _ => Err(DigitError::NonDigit { ch, index }),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Self::new(digits)
    }
}

impl TryFrom<String> for DigitSequence {
    type Error = DigitError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DigitSequence> for String {
    fn from(d: DigitSequence) -> String {
        d.to_string()
    }
}

impl fmt::Display for DigitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for DigitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DigitSequence({self})")
    }
}

/// One cell of a grid as sent to clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub ch: char,
    pub code: u8,
}

/// A labeling of every charset character with a digit, each digit used
/// exactly `charset.per_digit()` times.
#[derive(Clone, PartialEq, Eq)]
pub struct CodeGrid {
    charset: Arc<CharacterSet>,
    codes: Vec<u8>,
}

impl fmt::Debug for CodeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes: String = self.codes.iter().map(|c| char::from(b'0' + c)).collect();
        f.debug_struct("CodeGrid")
            .field("charset", &self.charset.id())
            .field("codes", &codes)
            .finish()
    }
}

/// Draws a fresh grid: a uniformly shuffled copy of the multiset
/// `{0 x d, 1 x d, ..., 9 x d}` laid over the charset positions.
pub fn generate<R: Rng + ?Sized>(charset: &Arc<CharacterSet>, rng: &mut R) -> CodeGrid {
    let d = charset.per_digit();
    let mut codes: Vec<u8> = (0..CODE_DIGITS as u8)
        .flat_map(|digit| std::iter::repeat_n(digit, d))
        .collect();
    codes.shuffle(rng);
    CodeGrid {
        charset: Arc::clone(charset),
        codes,
    }
}

impl CodeGrid {
    /// Builds a grid from explicit codes in charset order, checking the
    /// frequency constraint.
    pub fn from_codes(charset: Arc<CharacterSet>, codes: Vec<u8>) -> Result<Self, GridError> {
        if codes.len() != charset.len() {
            return Err(GridError::SizeMismatch {
                got: codes.len(),
                expected: charset.len(),
            });
        }
        let mut counts = [0usize; CODE_DIGITS];
        for &c in &codes {
            if c > 9 {
                return Err(GridError::InvalidCode(c));
            }
            counts[c as usize] += 1;
        }
        let expected = charset.per_digit();
        if let Some((digit, &count)) = counts.iter().enumerate().find(|(_, &n)| n != expected) {
            return Err(GridError::FrequencyViolation {
                digit: digit as u8,
                count,
                expected,
            });
        }
        Ok(Self { charset, codes })
    }

    /// Builds a grid from a character -> code table in any order.
    pub fn from_cells(charset: Arc<CharacterSet>, cells: &[GridCell]) -> Result<Self, GridError> {
        let mut codes = vec![u8::MAX; charset.len()];
        for cell in cells {
            let i = charset
                .index_of(cell.ch)
                .ok_or(GridError::CharacterNotInCharset(cell.ch))?;
            if codes[i] != u8::MAX {
                return Err(GridError::DuplicateCell(cell.ch));
            }
            codes[i] = cell.code;
        }
        if cells.len() != charset.len() {
            return Err(GridError::SizeMismatch {
                got: cells.len(),
                expected: charset.len(),
            });
        }
        Self::from_codes(charset, codes)
    }

    pub fn charset(&self) -> &Arc<CharacterSet> {
        &self.charset
    }

    /// Codes in charset order: `codes()[i]` labels `charset().chars()[i]`.
    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn cells(&self) -> Vec<GridCell> {
        self.charset
            .chars()
            .iter()
            .zip(&self.codes)
            .map(|(&ch, &code)| GridCell { ch, code })
            .collect()
    }

    pub fn code_of(&self, ch: char) -> Result<u8, GridError> {
        self.charset
            .index_of(ch)
            .map(|i| self.codes[i])
            .ok_or(GridError::CharacterNotInCharset(ch))
    }

    /// Returns the digits a user must type for `password` under this grid.
    pub fn encode(&self, password: &str) -> Result<DigitSequence, GridError> {
        if password.is_empty() {
            return Err(GridError::EmptyPassword);
        }
        let n = password.chars().count();
        if n > MAX_LEN {
            return Err(GridError::OverLength(n));
        }
        let digits = password
            .chars()
            .map(|ch| self.code_of(ch))
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(DigitSequence(digits))
    }

    /// Compares `encode(password)` to `digits` without allocating.
    /// Passwords with foreign characters never match.
    pub fn encodes_to(&self, password: &str, digits: &DigitSequence) -> bool {
        let mut expected = digits.0.iter();
        for ch in password.chars() {
            match (self.charset.index_of(ch), expected.next()) {
                (Some(i), Some(&d)) if self.codes[i] == d => {}
                _ => return false,
            }
        }
        expected.next().is_none()
    }

    /// Per-digit label counts.
    pub fn frequencies(&self) -> [usize; CODE_DIGITS] {
        let mut counts = [0usize; CODE_DIGITS];
        for &c in &self.codes {
            counts[c as usize] += 1;
        }
        counts
    }
}

/// The grid shown in the scheme's original form screenshot, used as the
/// worked-example fixture (`"Lagos(2006)"` encodes to `27318081174`).
///
/// The screenshot is partly illegible and disagrees with its companion
/// candidate table in a few cells; this transcription follows the
/// candidate table, and the characters it displaces (`j . , #`) take the
/// remaining slots that keep every digit at frequency 8.
pub fn reference_grid() -> CodeGrid {
    const TABLE: &[(&str, &[u8])] = &[
        ("ABCDEFGHIJKLM", &[8, 7, 7, 6, 7, 8, 9, 0, 4, 9, 9, 2, 0]),
        ("NOPQRSTUVWXYZ", &[0, 9, 4, 9, 5, 5, 1, 9, 3, 1, 9, 2, 4]),
        ("abcdefghijklm", &[7, 1, 3, 1, 0, 9, 3, 2, 3, 6, 5, 0, 6]),
        ("nopqrstuvwxyz", &[8, 1, 1, 6, 6, 8, 2, 0, 7, 3, 5, 8, 0]),
        ("0123456789", &[1, 1, 8, 8, 3, 5, 7, 3, 7, 3]),
        (".+*/(){}-_%=@!^$,#", &[5, 4, 5, 7, 0, 4, 2, 2, 2, 8, 4, 4, 6, 4, 2, 5, 6, 6]),
    ];
    let cells: Vec<GridCell> = TABLE
        .iter()
        .flat_map(|(chars, codes)| {
            assert_eq!(chars.len(), codes.len());
            chars.chars().zip(codes.iter()).map(|(ch, &code)| GridCell { ch, code })
        })
        .collect();
    CodeGrid::from_cells(Arc::new(crate::charset::default_charset()), &cells)
        .expect("reference fixture satisfies the frequency constraint")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charset::default_charset;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_arc() -> Arc<CharacterSet> {
        Arc::new(default_charset())
    }

    #[test]
    fn fixture_codes_from_screenshot() {
        let g = reference_grid();
        assert_eq!(g.code_of('L'), Ok(2));
        assert_eq!(g.code_of('a'), Ok(7));
        assert_eq!(g.code_of('A'), Ok(8));
        assert_eq!(g.frequencies(), [8; 10]);
    }

    #[test]
    fn fixture_encodes_worked_example() {
        let g = reference_grid();
        assert_eq!(g.encode("Lagos(2006)").unwrap().to_string(), "27318081174");
        assert_eq!(g.encode("A").unwrap().to_string(), "8");
    }

    #[test]
    fn encode_errors() {
        let g = reference_grid();
        assert_eq!(g.code_of('§'), Err(GridError::CharacterNotInCharset('§')));
        assert_eq!(g.encode(""), Err(GridError::EmptyPassword));
        assert_eq!(g.encode("a b"), Err(GridError::CharacterNotInCharset(' ')));
        assert_eq!(g.encode(&"a".repeat(256)), Err(GridError::OverLength(256)));
        assert_eq!(g.encode(&"a".repeat(255)).unwrap().len(), 255);
    }

    #[test]
    fn every_digit_labels_d_chars() {
        let cs = default_arc();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(generate(&cs, &mut rng).frequencies(), [8; 10]);
        }
    }

    #[test]
    fn ten_char_charset_is_a_permutation() {
        let cs = Arc::new(CharacterSet::builtin("digits10").unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let mut codes = generate(&cs, &mut rng).codes().to_vec();
            codes.sort_unstable();
            assert_eq!(codes, (0..10).collect::<Vec<u8>>());
        }
    }

    #[test]
    fn distinct_seeds_give_distinct_grids() {
        let cs = default_arc();
        let mut same = 0;
        for seed in 0..10_000u64 {
            let a = generate(&cs, &mut ChaCha8Rng::seed_from_u64(2 * seed));
            let b = generate(&cs, &mut ChaCha8Rng::seed_from_u64(2 * seed + 1));
            if a == b {
                same += 1;
            }
        }
        assert_eq!(same, 0);
    }

    #[test]
    fn from_codes_rejects_bad_frequency() {
        let cs = Arc::new(CharacterSet::builtin("digits10").unwrap());
        assert_eq!(
            CodeGrid::from_codes(Arc::clone(&cs), vec![0, 0, 2, 3, 4, 5, 6, 7, 8, 9]),
            Err(GridError::FrequencyViolation { digit: 0, count: 2, expected: 1 })
        );
        assert!(matches!(
            CodeGrid::from_codes(Arc::clone(&cs), vec![0; 3]),
            Err(GridError::SizeMismatch { .. })
        ));
        assert_eq!(
            CodeGrid::from_codes(cs, vec![10, 1, 2, 3, 4, 5, 6, 7, 8, 9]),
            Err(GridError::InvalidCode(10))
        );
    }

    #[test]
    fn digit_sequence_parsing() {
        assert_eq!("27318".parse::<DigitSequence>().unwrap().digits(), &[2, 7, 3, 1, 8]);
        assert_eq!(
            "2a318".parse::<DigitSequence>(),
            Err(DigitError::NonDigit { ch: 'a', index: 1 })
        );
        assert_eq!("".parse::<DigitSequence>(), Err(DigitError::Empty));
        assert_eq!(
            "1".repeat(256).parse::<DigitSequence>(),
            Err(DigitError::OverLength(256))
        );
        let json = serde_json::to_string(&"0123".parse::<DigitSequence>().unwrap()).unwrap();
        assert_eq!(json, "\"0123\"");
    }

    fn password_strategy() -> impl Strategy<Value = String> {
        let cs = default_charset();
        prop::collection::vec(prop::sample::select(cs.chars().to_vec()), 1..40)
            .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn encode_is_positionwise(p1 in password_strategy(), p2 in password_strategy(), seed in any::<u64>()) {
            let g = generate(&default_arc(), &mut ChaCha8Rng::seed_from_u64(seed));
            let joined = g.encode(&format!("{p1}{p2}")).unwrap();
            let e1 = g.encode(&p1).unwrap();
            let e2 = g.encode(&p2).unwrap();
            prop_assert_eq!(joined.len(), p1.len() + p2.len());
            prop_assert_eq!(joined, e1.concat(&e2).unwrap());
        }

        #[test]
        fn encodes_to_agrees_with_encode(p in password_strategy(), q in password_strategy(), seed in any::<u64>()) {
            let g = generate(&default_arc(), &mut ChaCha8Rng::seed_from_u64(seed));
            let dp = g.encode(&p).unwrap();
            prop_assert!(g.encodes_to(&p, &dp));
            prop_assert_eq!(g.encodes_to(&q, &dp), g.encode(&q).unwrap() == dp);
        }

        #[test]
        fn cells_roundtrip(seed in any::<u64>()) {
            let cs = default_arc();
            let g = generate(&cs, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(CodeGrid::from_cells(cs, &g.cells()).unwrap(), g);
        }
    }
}
