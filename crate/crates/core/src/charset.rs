//! The password alphabet and its digit-frequency constraint.
//!
//! A [`CharacterSet`] is an ordered list of distinct printable ASCII
//! characters whose length is a multiple of ten, so that every code digit
//! `0..=9` can label exactly `len / 10` characters of a grid.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Number of distinct code digits (`0..=9`).
pub const CODE_DIGITS: usize = 10;

/// Largest alphabet that fits in a printable-ASCII set.
pub const MAX_CHARSET_LEN: usize = 94;

/// The 18 special characters of the default alphabet, in canonical order.
pub const DEFAULT_SPECIALS: &str = ".+*/(){}-_%=@!^$,#";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CharsetError {
    #[error("duplicate character {ch:?} at index {index}")]
    DuplicateCharacter { ch: char, index: usize },
    #[error("charset length {len} is not divisible by 10")]
    LengthNotDivisibleBy10 { len: usize },
    #[error("forbidden character {ch:?} at index {index} (space or non-printable)")]
    ForbiddenCharacter { ch: char, index: usize },
    #[error("charset id must be a non-empty token without whitespace")]
    InvalidId,
    #[error("unknown builtin charset {0:?}")]
    UnknownBuiltin(String),
    #[error("character {0:?} is not in the charset")]
    CharacterNotInCharset(char),
}

/// An ordered, validated password alphabet.
#[derive(Clone, PartialEq, Eq)]
pub struct CharacterSet {
    id: String,
    chars: Vec<char>,
    // ASCII byte -> index into `chars`, or u8::MAX when absent.
    index: [u8; 128],
}

impl fmt::Debug for CharacterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharacterSet")
            .field("id", &self.id)
            .field("chars", &self.as_string())
            .finish()
    }
}

fn is_allowed(ch: char) -> bool {
    ch.is_ascii_graphic()
}

/// Checks every invariant and reports the first violated rule.
///
/// Rules are checked per character in order (forbidden, then duplicate),
/// and the length rule last.
pub fn validate(chars: &[char]) -> Result<(), CharsetError> {
    let mut seen = [false; 128];
    for (index, &ch) in chars.iter().enumerate() {
        if !is_allowed(ch) {
            return Err(CharsetError::ForbiddenCharacter { ch, index });
        }
        let b = ch as usize;
        if seen[b] {
            return Err(CharsetError::DuplicateCharacter { ch, index });
        }
        seen[b] = true;
    }
    if chars.is_empty() || !chars.len().is_multiple_of(CODE_DIGITS) {
        return Err(CharsetError::LengthNotDivisibleBy10 { len: chars.len() });
    }
    Ok(())
}

impl CharacterSet {
    pub fn new(id: impl Into<String>, chars: impl IntoIterator<Item = char>) -> Result<Self, CharsetError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(|c| !c.is_ascii_graphic()) {
            return Err(CharsetError::InvalidId);
        }
        let chars: Vec<char> = chars.into_iter().collect();
        validate(&chars)?;
        let mut index = [u8::MAX; 128];
        for (i, &ch) in chars.iter().enumerate() {
            index[ch as usize] = i as u8;
        }
        Ok(Self { id, chars, index })
    }

    /// Looks up one of the builtin alphabets by id.
    ///
    /// `default80` is the canonical alphabet; `digits10` is the ten decimal
    /// digits, the degenerate `d = 1` set that decodes uniquely.
    pub fn builtin(id: &str) -> Result<Self, CharsetError> {
        match id {
            "default80" => Ok(default_charset()),
            "digits10" => Self::new("digits10", '0'..='9'),
            other => Err(CharsetError::UnknownBuiltin(other.to_string())),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Characters per code digit: `len / 10`.
    pub fn per_digit(&self) -> usize {
        self.chars.len() / CODE_DIGITS
    }

    pub fn index_of(&self, ch: char) -> Option<usize> {
        if !ch.is_ascii() {
            return None;
        }
        match self.index[ch as usize] {
            u8::MAX => None,
            i => Some(i as usize),
        }
    }

    pub fn char_at(&self, index: usize) -> Option<char> {
        self.chars.get(index).copied()
    }

    pub fn contains(&self, ch: char) -> bool {
        self.index_of(ch).is_some()
    }

    /// Maps a string to charset indices, failing on the first foreign character.
    pub fn indices(&self, s: &str) -> Result<Vec<u8>, CharsetError> {
        s.chars()
            .map(|ch| {
                self.index_of(ch)
                    .map(|i| i as u8)
                    .ok_or(CharsetError::CharacterNotInCharset(ch))
            })
            .collect()
    }

    /// Lexicographic order by charset index, the canonical order for stored
    /// passwords and for candidate enumeration.
    ///
    /// Characters outside the set sort after every member, by code point.
    pub fn compare(&self, a: &str, b: &str) -> Ordering {
        let key = |ch: char| match self.index_of(ch) {
            Some(i) => (0u8, i as u32),
            None => (1u8, ch as u32),
        };
        a.chars().map(key).cmp(b.chars().map(key))
    }
}

/// The canonical 80-character alphabet: `A-Z`, `a-z`, `0-9` and
/// [`DEFAULT_SPECIALS`], giving `d = 8`.
pub fn default_charset() -> CharacterSet {
    let chars = ('A'..='Z')
        .chain('a'..='z')
        .chain('0'..='9')
        .chain(DEFAULT_SPECIALS.chars());
    CharacterSet::new("default80", chars).expect("default charset is valid")
}
