//! Operator commands behind the `gridpass` binary.
//!
//! Exit codes: 0 success, 1 bad input or a rejected operation, 2 I/O
//! failure, 3 crosscheck divergence.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::attack::{self, PasswordSource};
use crate::charset::{CharacterSet, CODE_DIGITS};
use crate::decoder::decode_sequence;
use crate::grid::{reference_grid, generate, CodeGrid, DigitSequence};
use crate::service::config::Config;
use crate::store::{CredentialRecord, CredentialStore, Selector, StoreError, StoreMode};
use crate::verifier::{verify_inverted, verify_naive, AuthResult};

#[derive(Debug, Error)]
pub enum AdminError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("crosscheck divergence\n{0}")]
    Divergence(String),
}

impl AdminError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AdminError::Usage(_) => 1,
            AdminError::Store(e) if e.is_io() => 2,
            AdminError::Store(_) => 1,
            AdminError::Io(_) => 2,
            AdminError::Divergence(_) => 3,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> AdminError {
    AdminError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "gridpass", version, about = "Coded-grid password login tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty credential store.
    InitDb {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "default80")]
        charset: String,
        #[arg(long, default_value = "password-only")]
        mode: StoreMode,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Add a password (prompted without echo).
    AddUser(UserArgs),
    /// Remove a user by name, or by password (prompted).
    RemoveUser(UserArgs),
    /// List stored users; passwords are masked.
    ListUsers {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print a grid as a character/code table.
    DemoGrid {
        #[arg(long)]
        seed: Option<u64>,
        /// Use a fixed grid instead of generating one.
        #[arg(long)]
        fixture: Option<Fixture>,
        #[arg(long, default_value = "default80")]
        charset: String,
        /// Also print the digits for this password.
        #[arg(long)]
        encode: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Measure how fast an observer narrows down a password.
    SimulateAttack(SimulateArgs),
    /// Compare the exhaustive and inverted verifiers on random small cases.
    Crosscheck(CrosscheckArgs),
    /// Run the HTTP login service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Fig2,
}

#[derive(Debug, Args)]
pub struct UserArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub username: Option<String>,
    /// Read the password from the first line of stdin instead of prompting.
    #[arg(long)]
    pub password_stdin: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Observer {
    /// Sees the grid and the digits.
    Strong,
    /// Sees only the digits.
    Weak,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Largest number of observed sessions.
    #[arg(long, default_value_t = 6)]
    pub k: u32,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, conflicts_with = "random_length")]
    pub password: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub random_length: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "default80")]
    pub charset: String,
    #[arg(long, value_enum, default_value_t = Observer::Strong)]
    pub observer: Observer,
    /// Write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CrosscheckArgs {
    /// Largest charset size drawn (a multiple of 10, at most 20).
    #[arg(long, default_value_t = 20)]
    pub charset_size: usize,
    #[arg(long, default_value_t = 4)]
    pub max_n: usize,
    #[arg(long, default_value_t = 8)]
    pub max_store: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Harness self-test: replace the inverted tie-break with the largest match.
    #[arg(long, hide = true)]
    pub broken_tiebreak: bool,
}

impl Default for CrosscheckArgs {
    fn default() -> Self {
        Self {
            charset_size: 20,
            max_n: 4,
            max_store: 8,
            trials: 10_000,
            seed: 1,
            broken_tiebreak: false,
        }
    }
}

/// Runs one command, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), AdminError> {
    match cli.command {
        Command::InitDb {
            store,
            charset,
            mode,
            force,
        } => init_db(&store, &charset, mode, force, out),
        Command::AddUser(args) => {
            let password = read_password(args.password_stdin)?;
            add_user(&args.store, args.username, password, out)
        }
        Command::RemoveUser(args) => {
            let selector = match args.username {
                Some(u) => Selector::Username(u),
                None => Selector::Password(read_password(args.password_stdin)?),
            };
            remove_user(&args.store, &selector, out)
        }
        Command::ListUsers { store, json } => list_users(&store, json, out),
        Command::DemoGrid {
            seed,
            fixture,
            charset,
            encode,
            json,
        } => demo_grid(seed, fixture, &charset, encode.as_deref(), json, out),
        Command::SimulateAttack(args) => simulate_attack(&args, out),
        Command::Crosscheck(args) => {
            let report = if args.broken_tiebreak {
                crosscheck(&args, &broken_inverted)
            } else {
                crosscheck(&args, &verify_inverted)
            }?;
            writeln!(out, "{report}")?;
            Ok(())
        }
        Command::Serve { config, listen, store } => {
            let mut cfg = Config::load(config.as_deref()).map_err(usage)?;
            if let Some(l) = listen {
                cfg.listen = l;
            }
            if let Some(s) = store {
                cfg.store_path = s;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::http::serve(&cfg)).map_err(|e| match e {
                crate::service::http::ServeError::Io(io) => AdminError::Io(io),
                other => usage(other),
            })
        }
    }
}

fn read_password(from_stdin: bool) -> Result<String, AdminError> {
    let line = if from_stdin {
        let mut line = String::new();
        io::stdin().lock().read_line(&mut line)?;
        line
    } else {
        rpassword::prompt_password("password: ")?
    };
    Ok(line.trim_end_matches(['\r', '\n']).to_string())
}

pub fn init_db(path: &Path, charset: &str, mode: StoreMode, force: bool, out: &mut dyn Write) -> Result<(), AdminError> {
    if path.exists() && !force {
        return Err(usage(format!("{} already exists (use --force)", path.display())));
    }
    let charset = CharacterSet::builtin(charset).map_err(usage)?;
    CredentialStore::new(Arc::new(charset), mode).save(path)?;
    writeln!(out, "created {} ({})", path.display(), mode.as_str())?;
    Ok(())
}

pub fn add_user(path: &Path, username: Option<String>, password: String, out: &mut dyn Write) -> Result<(), AdminError> {
    let mut store = CredentialStore::load(path)?;
    let record = CredentialRecord { username, password };
    store.add(record)?;
    store.save(path)?;
    writeln!(out, "added; store has {} record(s)", store.len())?;
    Ok(())
}

pub fn remove_user(path: &Path, selector: &Selector, out: &mut dyn Write) -> Result<(), AdminError> {
    let mut store = CredentialStore::load(path)?;
    store.remove(selector)?;
    store.save(path)?;
    writeln!(out, "removed; store has {} record(s)", store.len())?;
    Ok(())
}

pub fn list_users(path: &Path, json: bool, out: &mut dyn Write) -> Result<(), AdminError> {
    let store = CredentialStore::load(path)?;
    let rows: Vec<(Option<&str>, String)> = store
        .records()
        .iter()
        .map(|r| (r.username.as_deref(), "*".repeat(r.password.chars().count())))
        .collect();
    if json {
        let items: Vec<_> = rows
            .iter()
            .map(|(u, m)| serde_json::json!({"username": u, "password": m}))
            .collect();
        writeln!(out, "{}", serde_json::Value::Array(items))?;
    } else {
        for (u, masked) in rows {
            match u {
                Some(u) => writeln!(out, "{u}\t{masked}")?,
                None => writeln!(out, "{masked}")?,
            }
        }
    }
    Ok(())
}

/// Grid table, 13 cells per row, rows breaking where the character class
/// changes (upper, lower, digits, specials).
pub fn render_grid(grid: &CodeGrid) -> String {
    fn class(c: char) -> u8 {
        match c {
            'A'..='Z' => 0,
            'a'..='z' => 1,
            '0'..='9' => 2,
            _ => 3,
        }
    }
    let mut out = String::new();
    let cells = grid.cells();
    let mut row_len = 0;
    let mut prev_class = None;
    for cell in &cells {
        let cls = class(cell.ch);
        if row_len == 13 || (prev_class.is_some() && prev_class != Some(cls)) {
            out.push('\n');
            row_len = 0;
        }
        if row_len > 0 {
            out.push_str("  ");
        }
        let _ = write!(out, "{} {}", cell.ch, cell.code);
        row_len += 1;
        prev_class = Some(cls);
    }
    out.push('\n');
    out
}

fn frequency_line(grid: &CodeGrid) -> String {
    let freq = grid.frequencies();
    let d = grid.charset().per_digit();
    let ok = freq.iter().all(|&f| f == d);
    let counts: Vec<String> = (0..CODE_DIGITS).map(|i| format!("{i}:{}", freq[i])).collect();
    format!(
        "frequency {} (d = {d}): {}",
        counts.join(" "),
        if ok { "ok" } else { "VIOLATED" }
    )
}

pub fn demo_grid(
    seed: Option<u64>,
    fixture: Option<Fixture>,
    charset: &str,
    encode: Option<&str>,
    json: bool,
    out: &mut dyn Write,
) -> Result<(), AdminError> {
    let grid = match fixture {
        Some(Fixture::Fig2) => reference_grid(),
        None => {
            let cs = Arc::new(CharacterSet::builtin(charset).map_err(usage)?);
            match seed {
                Some(s) => generate(&cs, &mut ChaCha8Rng::seed_from_u64(s)),
                None => generate(&cs, &mut rand::rngs::StdRng::from_os_rng()),
            }
        }
    };
    let digits = encode
        .map(|p| grid.encode(p).map_err(usage))
        .transpose()?;
    if json {
        let v = serde_json::json!({
            "grid": grid.cells(),
            "frequencies": grid.frequencies(),
            "digits": digits.as_ref().map(ToString::to_string),
        });
        writeln!(out, "{v}")?;
        return Ok(());
    }
    write!(out, "{}", render_grid(&grid))?;
    writeln!(out, "{}", frequency_line(&grid))?;
    if let Some(d) = digits {
        writeln!(out, "{d}")?;
    }
    Ok(())
}

pub fn simulate_attack(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), AdminError> {
    let cs = Arc::new(CharacterSet::builtin(&args.charset).map_err(usage)?);
    if args.k == 0 || args.trials < 2 {
        return Err(usage("--k must be >= 1 and --trials >= 2"));
    }
    match args.observer {
        Observer::Strong => {
            let source = match &args.password {
                Some(p) => PasswordSource::Fixed(p.clone()),
                None => PasswordSource::RandomLength(args.random_length),
            };
            let rows = attack::monte_carlo(&cs, &source, args.k, args.trials, args.seed).map_err(usage)?;
            writeln!(out, "{:>3}  {:>14}  {:>12}  {:>9}", "k", "mean_survivors", "closed_form", "stderr")?;
            for r in &rows {
                writeln!(
                    out,
                    "{:>3}  {:>14.3}  {:>12.4}  {:>9.5}",
                    r.k, r.mean_survivors, r.closed_form, r.stderr
                )?;
            }
            if let Some(path) = &args.csv {
                std::fs::write(path, attack::rows_to_csv(&rows))?;
            }
        }
        Observer::Weak => {
            let n = args.password.as_ref().map_or(args.random_length, |p| p.chars().count());
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let a: String = match &args.password {
                Some(p) => p.clone(),
                None => (0..n).map(|_| cs.chars()[rng.random_range(0..cs.len())]).collect(),
            };
            let b: String = (0..n).map(|_| cs.chars()[rng.random_range(0..cs.len())]).collect();
            let sessions = args.trials.saturating_mul(args.k as usize);
            let r = attack::weak_observer_report(&cs, &a, &b, sessions, &mut rng).map_err(usage)?;
            writeln!(out, "digits-only observer, {} sessions per password, length {n}", r.sessions)?;
            writeln!(
                out,
                "max per-position chi_square {:.2} on {} dof (critical {:.2} at overall 1%); max total variation {:.4}",
                r.chi_square, r.degrees_of_freedom, r.critical_value_001, r.max_total_variation
            )?;
            writeln!(
                out,
                "{}",
                if r.distinguishable() {
                    "digit streams differ: digits leak password content"
                } else {
                    "digit streams indistinguishable: digits reveal only the length"
                }
            )?;
            if let Some(path) = &args.csv {
                std::fs::write(
                    path,
                    format!(
                        "sessions,chi_square,dof,critical_001,max_total_variation\n{},{:.6},{},{:.6},{:.6}\n",
                        r.sessions, r.chi_square, r.degrees_of_freedom, r.critical_value_001, r.max_total_variation
                    ),
                )?;
            }
        }
    }
    Ok(())
}

/// An inverted verifier with the tie-break reversed, for harness self-tests.
pub fn broken_inverted(digits: &DigitSequence, grid: &CodeGrid, store: &CredentialStore) -> AuthResult {
    let mut result = verify_inverted(digits, grid, store);
    if let Some(last) = store
        .records()
        .iter()
        .rev()
        .find(|r| grid.encodes_to(&r.password, digits))
    {
        result.matched_password = Some(last.password.clone());
    }
    result
}

/// One randomly drawn crosscheck case.
#[derive(Debug, Clone)]
pub struct CrosscheckCase {
    pub grid: CodeGrid,
    pub digits: DigitSequence,
    pub store: CredentialStore,
}

/// Draws a case: a shuffled charset of 10 or 20 printable characters, a
/// store of short passwords, and digits that half the time encode a stored
/// password, with colliding siblings planted beside it.
pub fn random_case<R: Rng + ?Sized>(args: &CrosscheckArgs, rng: &mut R) -> CrosscheckCase {
    let mut pool: Vec<char> = (b'!'..=b'~').map(char::from).collect();
    pool.shuffle(rng);
    let size = CODE_DIGITS * rng.random_range(1..=args.charset_size / CODE_DIGITS);
    let cs = Arc::new(CharacterSet::new(format!("rand{size}"), pool.into_iter().take(size)).expect("valid"));
    let grid = generate(&cs, rng);
    let n = rng.random_range(1..=args.max_n);
    let mut store = CredentialStore::new(Arc::clone(&cs), StoreMode::PasswordOnly);
    for _ in 0..rng.random_range(0..=args.max_store) {
        let len = if rng.random_bool(0.75) { n } else { rng.random_range(1..=args.max_n) };
        let pw: String = (0..len).map(|_| cs.chars()[rng.random_range(0..size)]).collect();
        let _ = store.add(CredentialRecord::password_only(pw));
    }
    let same_len: Vec<String> = store
        .records()
        .iter()
        .filter(|r| r.password.chars().count() == n)
        .map(|r| r.password.clone())
        .collect();
    let digits = if !same_len.is_empty() && rng.random_bool(0.5) {
        let target = &same_len[rng.random_range(0..same_len.len())];
        let digits = grid.encode(target).expect("stored password is over the charset");
        // Plant passwords that collide with the target under this grid.
        let columns = decode_sequence(&digits, &grid);
        for _ in 0..rng.random_range(0..=2usize) {
            if store.len() >= args.max_store {
                break;
            }
            let pw: String = columns
                .iter()
                .map(|c| c.chars()[rng.random_range(0..c.len())])
                .collect();
            let _ = store.add(CredentialRecord::password_only(pw));
        }
        digits
    } else {
        DigitSequence::new((0..n).map(|_| rng.random_range(0..10)).collect()).expect("1..=4 digits")
    };
    CrosscheckCase { grid, digits, store }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrosscheckReport {
    pub cases: usize,
    pub accepted: usize,
    pub collisions: usize,
}

impl std::fmt::Display for CrosscheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "crosscheck ok: {} cases, {} accepted, {} with colliding stored passwords",
            self.cases, self.accepted, self.collisions
        )
    }
}

/// Runs `args.trials` random cases through [`verify_naive`] and `inverted`
/// and fails on the first disagreement in outcome or matched password.
pub fn crosscheck(
    args: &CrosscheckArgs,
    inverted: &dyn Fn(&DigitSequence, &CodeGrid, &CredentialStore) -> AuthResult,
) -> Result<CrosscheckReport, AdminError> {
    if args.charset_size < CODE_DIGITS || args.charset_size > 20 || args.max_n == 0 || args.max_n > 4 {
        return Err(usage("--charset-size must be 10..=20 and --max-n 1..=4"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut report = CrosscheckReport {
        cases: 0,
        accepted: 0,
        collisions: 0,
    };
    for case_no in 0..args.trials {
        let case = random_case(args, &mut rng);
        let naive = verify_naive(&case.digits, &case.grid, &case.store, u64::MAX).expect("unbounded budget");
        let inv = inverted(&case.digits, &case.grid, &case.store);
        if naive.outcome != inv.outcome || naive.matched_password != inv.matched_password {
            return Err(AdminError::Divergence(format!(
                "case {case_no}\ncharset: {}\ngrid codes: {:?}\ndigits: {}\nstore: {:?}\nnaive: {:?}\ninverted: {:?}",
                case.grid.charset().as_string(),
                case.grid.codes(),
                case.digits,
                case.store.records().iter().map(|r| &r.password).collect::<Vec<_>>(),
                naive,
                inv
            )));
        }
        report.cases += 1;
        report.accepted += usize::from(naive.is_accepted());
        let matches = case
            .store
            .records()
            .iter()
            .filter(|r| case.grid.encodes_to(&r.password, &case.digits))
            .count();
        report.collisions += usize::from(matches > 1);
    }
    Ok(report)
}
