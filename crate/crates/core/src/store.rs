//! The sorted credential database and its on-disk format.
//!
//! Passwords are stored recoverably. The server must re-encode each stored
//! password under every fresh grid, so a one-way hash cannot work; the
//! store file is the secret and is written owner-only.
//!
//! File layout (UTF-8, `\n` line endings):
//!
//! ```text
//! format-version: 1
//! charset-id: default80
//! charset: ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789.+*/(){}-_%=@!^$,#
//! mode: password-only
//! ---
//! Lagos(2006)
//! ```
//!
//! In `username-scoped` mode every record line is `<username> <password>`.
//! Records must appear in canonical order (password by charset index, then
//! username); loading never re-sorts.

use std::cmp::Ordering;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use crate::charset::{CharacterSet, CharsetError};
use crate::grid::MAX_LEN;

pub const FORMAT_VERSION: u32 = 1;
pub const MAX_USERNAME_LEN: usize = 64;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("password is empty")]
    EmptyPassword,
    #[error("password length {0} exceeds the maximum of 255")]
    OverLength(usize),
    #[error("password contains a space")]
    ContainsSpace,
    #[error("password contains {0:?}, which is not in the charset")]
    InvalidCharacter(char),
    #[error("password already stored")]
    DuplicatePassword,
    #[error("username {0:?} already stored")]
    DuplicateUsername(String),
    #[error("username-scoped store requires a username")]
    MissingUsername,
    #[error("password-only store does not take usernames")]
    UnexpectedUsername,
    #[error("invalid username {0:?}")]
    InvalidUsername(String),
    #[error("no matching record")]
    NotFound,
    #[error("line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("charset mismatch: {0}")]
    CharsetMismatch(String),
    #[error("line {line}: record is out of order")]
    UnsortedFile { line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl StoreError {
    /// True for failures caused by the environment rather than the input.
    pub fn is_io(&self) -> bool {
        matches!(self, StoreError::Io(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoreMode {
    PasswordOnly,
    UsernameScoped,
}

impl StoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StoreMode::PasswordOnly => "password-only",
            StoreMode::UsernameScoped => "username-scoped",
        }
    }
}

impl std::str::FromStr for StoreMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "password-only" => Ok(StoreMode::PasswordOnly),
            "username-scoped" => Ok(StoreMode::UsernameScoped),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialRecord {
    pub username: Option<String>,
    pub password: String,
}

impl CredentialRecord {
    pub fn password_only(password: impl Into<String>) -> Self {
        Self {
            username: None,
            password: password.into(),
        }
    }

    pub fn scoped(username: impl Into<String>, password: impl Into<String>) -> Self {
        Self {
            username: Some(username.into()),
            password: password.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Password(String),
    Username(String),
}

/// Checks a password against the length, space and alphabet rules.
pub fn validate_password(charset: &CharacterSet, password: &str) -> Result<(), StoreError> {
    if password.is_empty() {
        return Err(StoreError::EmptyPassword);
    }
    let n = password.chars().count();
    if n > MAX_LEN {
        return Err(StoreError::OverLength(n));
    }
    if password.contains(' ') {
        return Err(StoreError::ContainsSpace);
    }
    match password.chars().find(|&c| !charset.contains(c)) {
        Some(c) => Err(StoreError::InvalidCharacter(c)),
        None => Ok(()),
    }
}

fn validate_username(name: &str) -> Result<(), StoreError> {
    if name.is_empty() || name.len() > MAX_USERNAME_LEN || !name.chars().all(|c| c.is_ascii_graphic()) {
        return Err(StoreError::InvalidUsername(name.to_string()));
    }
    Ok(())
}

/// The sorted password list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialStore {
    charset: Arc<CharacterSet>,
    mode: StoreMode,
    records: Vec<CredentialRecord>,
}

impl CredentialStore {
    pub fn new(charset: Arc<CharacterSet>, mode: StoreMode) -> Self {
        Self {
            charset,
            mode,
            records: Vec::new(),
        }
    }

    pub fn charset(&self) -> &Arc<CharacterSet> {
        &self.charset
    }

    pub fn mode(&self) -> StoreMode {
        self.mode
    }

    pub fn records(&self) -> &[CredentialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn order(&self, a: &CredentialRecord, b: &CredentialRecord) -> Ordering {
        self.charset
            .compare(&a.password, &b.password)
            .then_with(|| a.username.cmp(&b.username))
    }

    fn check_record(&self, record: &CredentialRecord) -> Result<(), StoreError> {
        match (self.mode, &record.username) {
            (StoreMode::PasswordOnly, Some(_)) => return Err(StoreError::UnexpectedUsername),
            (StoreMode::UsernameScoped, None) => return Err(StoreError::MissingUsername),
            (StoreMode::UsernameScoped, Some(u)) => validate_username(u)?,
            (StoreMode::PasswordOnly, None) => {}
        }
        validate_password(&self.charset, &record.password)
    }

    /// Inserts a record at its sorted position.
    pub fn add(&mut self, record: CredentialRecord) -> Result<(), StoreError> {
        self.check_record(&record)?;
        match self.mode {
            StoreMode::PasswordOnly => {
                if self.lookup(&record.password) {
                    return Err(StoreError::DuplicatePassword);
                }
            }
            StoreMode::UsernameScoped => {
                let name = record.username.as_deref();
                if self.records.iter().any(|r| r.username.as_deref() == name) {
                    return Err(StoreError::DuplicateUsername(name.unwrap_or_default().to_string()));
                }
            }
        }
        let at = self
            .records
            .binary_search_by(|probe| self.order(probe, &record))
            .unwrap_or_else(|i| i);
        self.records.insert(at, record);
        Ok(())
    }

    pub fn remove(&mut self, selector: &Selector) -> Result<CredentialRecord, StoreError> {
        let pos = match selector {
            Selector::Password(p) => self.position_of_password(p),
            Selector::Username(u) => self
                .records
                .iter()
                .position(|r| r.username.as_deref() == Some(u.as_str())),
        };
        pos.map(|i| self.records.remove(i)).ok_or(StoreError::NotFound)
    }

    fn position_of_password(&self, password: &str) -> Option<usize> {
        // First record carrying this password (several in username-scoped mode).
        let i = self
            .records
            .partition_point(|r| self.charset.compare(&r.password, password) == Ordering::Less);
        (i < self.records.len() && self.records[i].password == password).then_some(i)
    }

    /// Binary search for an exact password.
    pub fn lookup(&self, password: &str) -> bool {
        self.position_of_password(password).is_some()
    }

    pub fn find_user(&self, username: &str) -> Option<&CredentialRecord> {
        self.records
            .iter()
            .find(|r| r.username.as_deref() == Some(username))
    }

    pub fn is_sorted(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| self.order(&w[0], &w[1]) == Ordering::Less)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "format-version: {FORMAT_VERSION}\ncharset-id: {}\ncharset: {}\nmode: {}\n---\n",
            self.charset.id(),
            self.charset.as_string(),
            self.mode.as_str()
        );
        for r in &self.records {
            if let Some(u) = &r.username {
                out.push_str(u);
                out.push(' ');
            }
            out.push_str(&r.password);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, StoreError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header = |key: &'static str| -> Result<(usize, String), StoreError> {
            let (line, raw) = lines.next().ok_or(StoreError::Parse {
                line: 0,
                field: key,
                message: "missing header".into(),
            })?;
            let value = raw
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(": "))
                .ok_or_else(|| StoreError::Parse {
                    line,
                    field: key,
                    message: format!("expected `{key}: ...`"),
                })?;
            Ok((line, value.to_string()))
        };

        let (line, version) = header("format-version")?;
        if version != FORMAT_VERSION.to_string() {
            return Err(StoreError::Parse {
                line,
                field: "format-version",
                message: format!("unsupported version {version:?}"),
            });
        }
        let (_, charset_id) = header("charset-id")?;
        let (line, chars) = header("charset")?;
        let charset = CharacterSet::new(charset_id.clone(), chars.chars()).map_err(|e: CharsetError| {
            StoreError::Parse {
                line,
                field: "charset",
                message: e.to_string(),
            }
        })?;
        if let Ok(builtin) = CharacterSet::builtin(&charset_id) {
            if builtin != charset {
                return Err(StoreError::CharsetMismatch(format!(
                    "charset {charset_id:?} does not match the builtin of that name"
                )));
            }
        }
        let (line, mode) = header("mode")?;
        let mode: StoreMode = mode.parse().map_err(|message| StoreError::Parse {
            line,
            field: "mode",
            message,
        })?;
        match lines.next() {
            Some((_, "---")) => {}
            other => {
                return Err(StoreError::Parse {
                    line: other.map_or(5, |(line, _)| line),
                    field: "separator",
                    message: "expected `---`".into(),
                })
            }
        }

        let mut store = CredentialStore::new(Arc::new(charset), mode);
        for (line, raw) in lines {
            let record = match mode {
                StoreMode::PasswordOnly => CredentialRecord::password_only(raw),
                StoreMode::UsernameScoped => match raw.split_once(' ') {
                    Some((u, p)) => CredentialRecord::scoped(u, p),
                    None => {
                        return Err(StoreError::Parse {
                            line,
                            field: "record",
                            message: "expected `<username> <password>`".into(),
                        })
                    }
                },
            };
            store.check_record(&record).map_err(|e| StoreError::Parse {
                line,
                field: "record",
                message: e.to_string(),
            })?;
            if let Some(last) = store.records.last() {
                match store.order(last, &record) {
                    Ordering::Less => {}
                    Ordering::Equal => {
                        return Err(StoreError::Parse {
                            line,
                            field: "record",
                            message: "duplicate record".into(),
                        })
                    }
                    Ordering::Greater => return Err(StoreError::UnsortedFile { line }),
                }
            }
            if mode == StoreMode::PasswordOnly && store.lookup(&record.password) {
                return Err(StoreError::Parse {
                    line,
                    field: "record",
                    message: StoreError::DuplicatePassword.to_string(),
                });
            }
            if mode == StoreMode::UsernameScoped {
                let name = record.username.as_deref().unwrap_or_default();
                if store.find_user(name).is_some() {
                    return Err(StoreError::Parse {
                        line,
                        field: "record",
                        message: StoreError::DuplicateUsername(name.to_string()).to_string(),
                    });
                }
            }
            store.records.push(record);
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    /// Loads and additionally requires the embedded charset to equal `expected`.
    pub fn load_with_charset(path: impl AsRef<Path>, expected: &CharacterSet) -> Result<Self, StoreError> {
        let store = Self::load(path)?;
        if store.charset.as_ref() != expected {
            return Err(StoreError::CharsetMismatch(format!(
                "file uses {:?}, expected {:?}",
                store.charset.id(),
                expected.id()
            )));
        }
        Ok(store)
    }

    /// Writes to a temporary file beside `path`, then renames over it.
    /// The file is created owner-only on Unix.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(self.to_text().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }
}

/// A store shared between concurrent readers and one writer.
///
/// Readers take an `Arc` snapshot; the writer clones, mutates, persists and
/// then publishes the new snapshot.
#[derive(Debug)]
pub struct SharedStore {
    current: RwLock<Arc<CredentialStore>>,
    writer: Mutex<Option<PathBuf>>,
}

impl SharedStore {
    pub fn new(store: CredentialStore, path: Option<PathBuf>) -> Self {
        Self {
            current: RwLock::new(Arc::new(store)),
            writer: Mutex::new(path),
        }
    }

    pub fn snapshot(&self) -> Arc<CredentialStore> {
        Arc::clone(&self.current.read().expect("store lock poisoned"))
    }

    pub fn update<T>(
        &self,
        f: impl FnOnce(&mut CredentialStore) -> Result<T, StoreError>,
    ) -> Result<T, StoreError> {
        let path = self.writer.lock().expect("store writer poisoned");
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        if let Some(p) = path.as_ref() {
            next.save(p)?;
        }
        *self.current.write().expect("store lock poisoned") = Arc::new(next);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charset::default_charset;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn empty() -> CredentialStore {
        CredentialStore::new(Arc::new(default_charset()), StoreMode::PasswordOnly)
    }

    #[test]
    fn add_and_lookup() {
        let mut s = empty();
        s.add(CredentialRecord::password_only("Lagos(2006)")).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.lookup("Lagos(2006)"));
        assert!(!s.lookup("Lagos(2007)"));
        assert!(!empty().lookup("x"));
    }

    #[test]
    fn add_rejections() {
        let mut s = empty();
        assert!(matches!(
            s.add(CredentialRecord::password_only("a".repeat(256))),
            Err(StoreError::OverLength(256))
        ));
        s.add(CredentialRecord::password_only("a".repeat(255))).unwrap();
        assert!(matches!(
            s.add(CredentialRecord::password_only("a b")),
            Err(StoreError::ContainsSpace)
        ));
        assert!(matches!(
            s.add(CredentialRecord::password_only("ab~")),
            Err(StoreError::InvalidCharacter('~'))
        ));
        assert!(matches!(
            s.add(CredentialRecord::password_only("")),
            Err(StoreError::EmptyPassword)
        ));
        s.add(CredentialRecord::password_only("x")).unwrap();
        assert!(matches!(
            s.add(CredentialRecord::password_only("x")),
            Err(StoreError::DuplicatePassword)
        ));
        assert!(matches!(
            s.add(CredentialRecord::scoped("bob", "y")),
            Err(StoreError::UnexpectedUsername)
        ));
    }

    #[test]
    fn username_scoped_rules() {
        let mut s = CredentialStore::new(Arc::new(default_charset()), StoreMode::UsernameScoped);
        s.add(CredentialRecord::scoped("alice", "same")).unwrap();
        s.add(CredentialRecord::scoped("bob", "same")).unwrap();
        assert!(matches!(
            s.add(CredentialRecord::scoped("bob", "other")),
            Err(StoreError::DuplicateUsername(_))
        ));
        assert!(matches!(
            s.add(CredentialRecord::password_only("p")),
            Err(StoreError::MissingUsername)
        ));
        assert!(s.lookup("same"));
        assert_eq!(s.find_user("bob").unwrap().password, "same");
        s.remove(&Selector::Username("alice".into())).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn remove_cases() {
        let mut s = empty();
        assert!(matches!(
            s.remove(&Selector::Password("x".into())),
            Err(StoreError::NotFound)
        ));
        s.add(CredentialRecord::password_only("b")).unwrap();
        let before = s.clone();
        s.add(CredentialRecord::password_only("a")).unwrap();
        s.remove(&Selector::Password("a".into())).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn text_roundtrip_and_file_roundtrip() {
        let mut s = empty();
        for p in ["Lagos(2006)", "zz", "A", "0#"] {
            s.add(CredentialRecord::password_only(p)).unwrap();
        }
        assert_eq!(CredentialStore::from_text(&s.to_text()).unwrap(), s);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("users.db");
        s.save(&path).unwrap();
        assert_eq!(CredentialStore::load(&path).unwrap(), s);
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = fs::metadata(&path).unwrap().permissions().mode();
            assert_eq!(mode & 0o077, 0);
        }
    }

    #[test]
    fn load_rejects_shuffled_records() {
        let mut s = empty();
        for p in ["alpha", "beta", "gamma"] {
            s.add(CredentialRecord::password_only(p)).unwrap();
        }
        let text = s.to_text();
        let (head, body) = text.split_once("---\n").unwrap();
        let mut recs: Vec<&str> = body.lines().collect();
        recs.reverse();
        let shuffled = format!("{head}---\n{}\n", recs.join("\n"));
        assert!(matches!(
            CredentialStore::from_text(&shuffled),
            Err(StoreError::UnsortedFile { line: 7 })
        ));
    }

    #[test]
    fn load_rejects_foreign_character() {
        let text = empty().to_text() + "ok\nbad~one\n";
        match CredentialStore::from_text(&text) {
            Err(StoreError::Parse { line, field, message }) => {
                assert_eq!((line, field), (7, "record"));
                assert!(message.contains('~'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_rejects_builtin_charset_mismatch() {
        let text = empty().to_text().replace("charset: ABC", "charset: BAC");
        assert!(matches!(
            CredentialStore::from_text(&text),
            Err(StoreError::CharsetMismatch(_))
        ));
        let path = tempfile::NamedTempFile::new().unwrap();
        empty().save(path.path()).unwrap();
        let digits = CharacterSet::builtin("digits10").unwrap();
        assert!(matches!(
            CredentialStore::load_with_charset(path.path(), &digits),
            Err(StoreError::CharsetMismatch(_))
        ));
    }

    #[test]
    fn load_rejects_bad_header() {
        assert!(matches!(
            CredentialStore::from_text("format-version: 2\n"),
            Err(StoreError::Parse { line: 1, .. })
        ));
        let text = empty().to_text().replace("---", "--");
        assert!(matches!(
            CredentialStore::from_text(&text),
            Err(StoreError::Parse { field: "separator", .. })
        ));
    }

    #[test]
    fn shared_store_publishes_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.db");
        let shared = SharedStore::new(empty(), Some(path.clone()));
        let before = shared.snapshot();
        shared
            .update(|s| s.add(CredentialRecord::password_only("abc")))
            .unwrap();
        assert!(before.is_empty());
        assert_eq!(shared.snapshot().len(), 1);
        assert_eq!(CredentialStore::load(&path).unwrap().len(), 1);
        assert!(shared.update(|s| s.add(CredentialRecord::password_only("abc"))).is_err());
        assert_eq!(shared.snapshot().len(), 1);
    }

    #[test]
    fn lookup_matches_linear_scan() {
        let cs = Arc::new(default_charset());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let mut s = CredentialStore::new(Arc::clone(&cs), StoreMode::PasswordOnly);
            let random_pw = |rng: &mut ChaCha8Rng| -> String {
                let n = rng.random_range(1..4);
                (0..n).map(|_| cs.chars()[rng.random_range(0..12)]).collect()
            };
            for _ in 0..rng.random_range(0..20) {
                let _ = s.add(CredentialRecord::password_only(random_pw(&mut rng)));
            }
            assert!(s.is_sorted());
            for _ in 0..10 {
                let q = random_pw(&mut rng);
                assert_eq!(s.lookup(&q), s.records().iter().any(|r| r.password == q));
            }
        }
    }

    proptest! {
        #[test]
        fn sorted_after_any_mutations(ops in prop::collection::vec((any::<bool>(), "[A-Za-z0-9(){}]{1,5}"), 0..40)) {
            let mut s = empty();
            for (insert, pw) in ops {
                if insert {
                    let _ = s.add(CredentialRecord::password_only(pw));
                } else {
                    let _ = s.remove(&Selector::Password(pw));
                }
                prop_assert!(s.is_sorted());
            }
            prop_assert_eq!(CredentialStore::from_text(&s.to_text()).unwrap(), s);
        }
    }
}
