//! Observation attacks against coded-grid entry.
//!
//! A *strong* observer records the displayed grid and the typed digits for
//! each session and intersects the candidate sets position by position.
//! The true character always survives. Every other character survives one
//! independent grid with probability `(d - 1) / (|X| - 1)`, so the expected
//! survivor count after `k` sessions is
//! `1 + (|X| - 1) * ((d - 1) / (|X| - 1))^k`.
//!
//! A *weak* observer sees only the digits. Under a fresh uniform grid the
//! typed digit is uniform whatever the character, so the digits reveal the
//! password length and nothing else; [`weak_observer_report`] measures this.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::charset::{CharacterSet, CODE_DIGITS};
use crate::grid::{generate, CodeGrid, DigitSequence, GridError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("observation has {got} digits, transcript has {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("grid uses a different charset from the transcript")]
    CharsetMismatch,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Password(#[from] GridError),
}

/// Bit `i` set iff charset character `i` carries `digit` under `grid`.
fn digit_masks(grid: &CodeGrid) -> [u128; CODE_DIGITS] {
    let mut masks = [0u128; CODE_DIGITS];
    for (i, &code) in grid.codes().iter().enumerate() {
        masks[code as usize] |= 1u128 << i;
    }
    masks
}

/// Everything a strong observer has seen, plus the per-position survivors.
#[derive(Debug, Clone)]
pub struct AttackTranscript {
    charset: Arc<CharacterSet>,
    observations: Vec<(CodeGrid, DigitSequence)>,
    survivors: Vec<u128>,
}

impl AttackTranscript {
    pub fn new(charset: Arc<CharacterSet>) -> Self {
        Self {
            charset,
            observations: Vec::new(),
            survivors: Vec::new(),
        }
    }

    pub fn observe(&mut self, grid: CodeGrid, digits: DigitSequence) -> Result<(), AttackError> {
        if !Arc::ptr_eq(grid.charset(), &self.charset) && **grid.charset() != *self.charset {
            return Err(AttackError::CharsetMismatch);
        }
        if self.observations.is_empty() {
            self.survivors = vec![(1u128 << self.charset.len()) - 1; digits.len()];
        } else if digits.len() != self.survivors.len() {
            return Err(AttackError::LengthMismatch {
                got: digits.len(),
                expected: self.survivors.len(),
            });
        }
        let masks = digit_masks(&grid);
        for (s, &d) in self.survivors.iter_mut().zip(digits.digits()) {
            *s &= masks[d as usize];
        }
        self.observations.push((grid, digits));
        Ok(())
    }

    pub fn observations(&self) -> &[(CodeGrid, DigitSequence)] {
        &self.observations
    }

    pub fn sessions(&self) -> usize {
        self.observations.len()
    }

    /// Surviving characters per position, in charset order.
    pub fn survivors(&self) -> Vec<Vec<char>> {
        self.survivors
            .iter()
            .map(|&mask| {
                self.charset
                    .chars()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &c)| c)
                    .collect()
            })
            .collect()
    }

    pub fn survivor_counts(&self) -> Vec<usize> {
        self.survivors.iter().map(|m| m.count_ones() as usize).collect()
    }

    /// Product of survivor counts: the candidate passwords left.
    pub fn residual_space(&self) -> BigUint {
        self.survivor_counts()
            .into_iter()
            .fold(BigUint::from(1u32), |acc, c| acc * BigUint::from(c))
    }

    /// True once every position has a single survivor.
    pub fn is_recovered(&self) -> bool {
        !self.survivors.is_empty() && self.survivors.iter().all(|m| m.count_ones() == 1)
    }
}

/// Closed-form expected survivor count per position after `k` sessions.
pub fn expected_survivors(charset_size: usize, d: usize, k: u32) -> Result<f64, AttackError> {
    if charset_size == 0 || d * CODE_DIGITS != charset_size {
        return Err(AttackError::InvalidParameters(format!(
            "d * 10 must equal the charset size (d = {d}, size = {charset_size})"
        )));
    }
    if k == 0 {
        return Err(AttackError::InvalidParameters("k must be at least 1".into()));
    }
    if charset_size == 1 {
        return Ok(1.0);
    }
    let others = (charset_size - 1) as f64;
    let p = (d - 1) as f64 / others;
    Ok(1.0 + others * p.powi(k as i32))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationSummary {
    pub sessions: usize,
    pub survivor_counts: Vec<usize>,
    pub residual_space: BigUint,
    pub recovered: bool,
}

/// Watches `k` genuine logins of `password`, each under a fresh grid.
pub fn simulate<R: Rng + ?Sized>(
    password: &str,
    charset: &Arc<CharacterSet>,
    k: usize,
    rng: &mut R,
) -> Result<(AttackTranscript, SimulationSummary), AttackError> {
    let mut transcript = AttackTranscript::new(Arc::clone(charset));
    for _ in 0..k {
        let grid = generate(charset, rng);
        let digits = grid.encode(password)?;
        transcript.observe(grid, digits)?;
    }
    let summary = SimulationSummary {
        sessions: k,
        survivor_counts: transcript.survivor_counts(),
        residual_space: transcript.residual_space(),
        recovered: transcript.is_recovered(),
    };
    Ok((transcript, summary))
}

/// Which password each Monte Carlo trial observes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PasswordSource {
    Fixed(String),
    /// A fresh uniformly random password of this length per trial.
    RandomLength(usize),
}

impl PasswordSource {
    fn indices<R: Rng>(&self, charset: &CharacterSet, rng: &mut R) -> Result<Vec<u8>, AttackError> {
        match self {
            PasswordSource::Fixed(p) => charset
                .indices(p)
                .map_err(|_| AttackError::InvalidParameters(format!("password {p:?} is outside the charset"))),
            PasswordSource::RandomLength(n) => {
                Ok((0..*n).map(|_| rng.random_range(0..charset.len()) as u8).collect())
            }
        }
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRow {
    pub k: u32,
    pub mean_survivors: f64,
    pub closed_form: f64,
    /// Standard error of the mean, taking each trial's position-averaged
    /// count as one sample.
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

const TRIALS_PER_CHUNK: usize = 1024;

/// Mean per-position survivor counts for `k = 1..=max_k` over `trials`
/// independent attacks. Deterministic for a given `seed`, regardless of
/// thread count.
pub fn monte_carlo(
    charset: &Arc<CharacterSet>,
    source: &PasswordSource,
    max_k: u32,
    trials: usize,
    seed: u64,
) -> Result<Vec<MonteCarloRow>, AttackError> {
    if trials < 2 || max_k == 0 {
        return Err(AttackError::InvalidParameters("need trials >= 2 and k >= 1".into()));
    }
    if matches!(source, PasswordSource::RandomLength(0)) {
        return Err(AttackError::InvalidParameters("password length must be at least 1".into()));
    }
    let closed: Vec<f64> = (1..=max_k)
        .map(|k| expected_survivors(charset.len(), charset.per_digit(), k))
        .collect::<Result<_, _>>()?;

    let chunks = trials.div_ceil(TRIALS_PER_CHUNK);
    let per_chunk: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<Vec<Moments>, AttackError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let mut acc = vec![Moments::default(); max_k as usize];
            let count = TRIALS_PER_CHUNK.min(trials - chunk * TRIALS_PER_CHUNK);
            for _ in 0..count {
                let pw = source.indices(charset, &mut rng)?;
                let mut survivors = vec![u128::MAX; pw.len()];
                for m in acc.iter_mut() {
                    let grid = generate(charset, &mut rng);
                    let masks = digit_masks(&grid);
                    let mut total = 0u32;
                    for (s, &ci) in survivors.iter_mut().zip(&pw) {
                        *s &= masks[grid.codes()[ci as usize] as usize];
                        total += s.count_ones();
                    }
                    let mean = f64::from(total) / pw.len() as f64;
                    m.sum += mean;
                    m.sum_sq += mean * mean;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;

    // Sequential fold keeps the float sums independent of scheduling.
    let mut totals = vec![Moments::default(); max_k as usize];
    for chunk in per_chunk {
        for (t, m) in totals.iter_mut().zip(chunk) {
            t.sum += m.sum;
            t.sum_sq += m.sum_sq;
        }
    }

    let n = trials as f64;
    Ok(totals
        .into_iter()
        .zip(closed)
        .enumerate()
        .map(|(i, (m, closed_form))| {
            let mean = m.sum / n;
            let var = ((m.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            MonteCarloRow {
                k: i as u32 + 1,
                mean_survivors: mean,
                closed_form,
                stderr: (var / n).sqrt(),
            }
        })
        .collect())
}

/// CSV with header `k,mean_survivors,closed_form,stderr`.
pub fn rows_to_csv(rows: &[MonteCarloRow]) -> String {
    let mut out = String::from("k,mean_survivors,closed_form,stderr\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.k, r.mean_survivors, r.closed_form, r.stderr
        ));
    }
    out
}

/// Number of sessions a strong observer needed before every position was a
/// singleton, for each of `trials` random passwords. `None` when `max_k`
/// sessions were not enough.
pub fn sessions_to_recover(
    charset: &Arc<CharacterSet>,
    password_len: usize,
    max_k: usize,
    trials: usize,
    seed: u64,
) -> Vec<Option<usize>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let pw: String = (0..password_len)
                .map(|_| charset.chars()[rng.random_range(0..charset.len())])
                .collect();
            let mut transcript = AttackTranscript::new(Arc::clone(charset));
            for k in 1..=max_k {
                let grid = generate(charset, &mut rng);
                let digits = grid.encode(&pw).expect("password drawn from charset");
                transcript.observe(grid, digits).expect("equal lengths");
                if transcript.is_recovered() {
                    return Some(k);
                }
            }
            None
        })
        .collect()
}

/// Result of comparing the digit streams two passwords produce for an
/// observer who never sees the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakObserverReport {
    pub sessions: usize,
    /// Largest per-position Pearson statistic of the 2 x 10
    /// (password x digit) table. Positions are tested separately because
    /// repeated characters make them dependent.
    pub chi_square: f64,
    /// Degrees of freedom of each per-position table.
    pub degrees_of_freedom: usize,
    /// Critical value at overall level 0.01, Bonferroni-split across
    /// positions.
    pub critical_value_001: f64,
    /// Largest per-position total variation distance between the two
    /// empirical digit distributions.
    pub max_total_variation: f64,
}

impl WeakObserverReport {
    pub fn distinguishable(&self) -> bool {
        self.chi_square > self.critical_value_001
    }
}

/// Types `password_a` and `password_b` (same length) for `sessions` fresh
/// grids each and tests whether the digits alone tell them apart.
pub fn weak_observer_report<R: Rng + ?Sized>(
    charset: &Arc<CharacterSet>,
    password_a: &str,
    password_b: &str,
    sessions: usize,
    rng: &mut R,
) -> Result<WeakObserverReport, AttackError> {
    let n = password_a.chars().count();
    if password_b.chars().count() != n {
        return Err(AttackError::LengthMismatch {
            got: password_b.chars().count(),
            expected: n,
        });
    }
    if sessions == 0 {
        return Err(AttackError::InvalidParameters("sessions must be at least 1".into()));
    }
    let mut counts = vec![[[0u64; CODE_DIGITS]; 2]; n];
    for _ in 0..sessions {
        for (row, pw) in [password_a, password_b].into_iter().enumerate() {
            let grid = generate(charset, rng);
            for (pos, d) in grid.encode(pw)?.digits().iter().enumerate() {
                counts[pos][row][*d as usize] += 1;
            }
        }
    }

    let s = sessions as f64;
    let mut max_chi: f64 = 0.0;
    let mut max_tv: f64 = 0.0;
    for table in &counts {
        let (mut chi, mut tv) = (0.0, 0.0);
        for d in 0..CODE_DIGITS {
            let col = (table[0][d] + table[1][d]) as f64;
            if col == 0.0 {
                continue;
            }
            let expected = col / 2.0;
            for row in table {
                let o = row[d] as f64;
                chi += (o - expected).powi(2) / expected;
            }
            tv += (table[0][d] as f64 - table[1][d] as f64).abs() / s;
        }
        max_chi = max_chi.max(chi);
        max_tv = max_tv.max(tv / 2.0);
    }
    let dof = CODE_DIGITS - 1;
    let critical = ChiSquared::new(dof as f64)
        .expect("positive dof")
        .inverse_cdf(1.0 - 0.01 / n as f64);
    Ok(WeakObserverReport {
        sessions,
        chi_square: max_chi,
        degrees_of_freedom: dof,
        critical_value_001: critical,
        max_total_variation: max_tv,
    })
}
