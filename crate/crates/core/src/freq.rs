//! Frequency-of-frequencies tables and the ratio points derived from them.
//!
//! Text format, one record per line:
//!
//! ```text
//! # comment
//! 1 84        <- f_1 = 84
//! 2 15
//! >24 119     <- 119 units seen more than 24 times (collapsed tail)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Frequencies must be
//! nonnegative integers; zero frequencies are accepted and dropped.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Units known only to have been seen more than `above` times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CollapsedTail<T> {
    pub above: u32,
    pub mass: T,
}

/// Sparse map from count `x >= 1` to frequency `f_x > 0`.
///
/// Frequencies are stored as reals so tables can be rescaled; ingestion from
/// text only accepts integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FrequencyTable<T> {
    entries: BTreeMap<u32, T>,
    tail: Option<CollapsedTail<T>>,
    name: Option<String>,
}

impl<T: Scalar> FrequencyTable<T> {
    /// Builds a table from `(count, frequency)` pairs.
    ///
    /// Zero frequencies are dropped; duplicate counts, zero counts, negative
    /// or non-finite frequencies and tables with no units are rejected.
    pub fn new<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, T)>,
    {
        let mut map = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (x, f) in entries {
            if x == 0 {
                return Err(Error::InvalidCount(x));
            }
            if !seen.insert(x) {
                return Err(Error::DuplicateCount(x));
            }
            check_frequency(x, f)?;
            if f > T::zero() {
                map.insert(x, f);
            }
        }
        if map.is_empty() {
            return Err(Error::EmptyTable);
        }
        Ok(Self {
            entries: map,
            tail: None,
            name: None,
        })
    }

    /// Adds collapsed tail mass: `mass` units with counts greater than `above`.
    pub fn with_tail(mut self, above: u32, mass: T) -> Result<Self> {
        check_frequency(above, mass)?;
        if let Some(&max) = self.entries.keys().next_back() {
            if max > above {
                return Err(Error::TailOverlap { above, count: max });
            }
        }
        self.tail = (mass > T::zero()).then_some(CollapsedTail { above, mass });
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Frequency at count `x`; zero when absent.
    pub fn freq(&self, x: u32) -> T {
        self.entries.get(&x).copied().unwrap_or_else(T::zero)
    }

    /// Explicit `(x, f_x)` entries in ascending order of `x`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, T)> + '_ {
        self.entries.iter().map(|(&x, &f)| (x, f))
    }

    pub fn tail(&self) -> Option<CollapsedTail<T>> {
        self.tail
    }

    /// Number of distinct explicit counts.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Observed number of units, collapsed tail included.
    pub fn n(&self) -> T {
        self.explicit_total() + self.tail.map_or_else(T::zero, |t| t.mass)
    }

    /// Sum of the explicit frequencies.
    pub fn explicit_total(&self) -> T {
        self.entries.values().copied().sum()
    }

    /// Largest explicit count with a positive frequency.
    pub fn max_count(&self) -> u32 {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    /// Sum of `f_x` over `x <= m`.
    pub fn total_up_to(&self, m: u32) -> T {
        self.entries.range(..=m).map(|(_, &f)| f).sum()
    }

    /// Number of units with counts above `m`, collapsed tail included.
    pub fn total_above(&self, m: u32) -> T {
        self.n() - self.total_up_to(m)
    }

    /// Every frequency multiplied by `c > 0`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            entries: self.entries.iter().map(|(&x, &f)| (x, f * c)).collect(),
            tail: self.tail.map(|t| CollapsedTail {
                above: t.above,
                mass: t.mass * c,
            }),
            name: self.name.clone(),
        }
    }

    /// Checks that `m` is a usable truncation point.
    pub fn check_truncation(&self, m: u32) -> Result<()> {
        if m < 2 {
            return Err(Error::InvalidTruncation { m, min: 2 });
        }
        if let Some(tail) = self.tail {
            if m > tail.above {
                return Err(Error::TruncationInsideTail {
                    m,
                    above: tail.above,
                });
            }
        }
        Ok(())
    }

    /// Splits the table at `m`: entries with `x <= m`, and the number of units
    /// above `m`. `head.n() + tail_count == self.n()`.
    pub fn truncate(&self, m: u32) -> Result<(Self, T)> {
        self.check_truncation(m)?;
        let entries: BTreeMap<u32, T> = self.entries.range(..=m).map(|(&x, &f)| (x, f)).collect();
        if entries.is_empty() {
            return Err(Error::EmptyTable);
        }
        let head = Self {
            entries,
            tail: None,
            name: self.name.clone(),
        };
        let tail_count = self.n() - head.n();
        Ok((head, tail_count))
    }

    /// Log ratios `y_x = log((x+1) f_{x+1} / f_x)` for `x` in `1..m` where both
    /// frequencies are positive; every other `x` in range is recorded as skipped.
    pub fn ratio_points(&self, m: u32) -> RatioPoints<T> {
        let mut points = Vec::new();
        let mut skipped = Vec::new();
        for x in 1..m {
            let fx = self.freq(x);
            let fnext = self.freq(x + 1);
            if fx > T::zero() && fnext > T::zero() {
                let y = (T::from_count(x + 1) * fnext / fx).ln();
                points.push(RatioPoint { x, y });
            } else {
                skipped.push(x);
            }
        }
        RatioPoints {
            points,
            source_m: m,
            skipped,
        }
    }

    /// Serialises to the text format, counts ascending, tail record last.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (&x, &f) in &self.entries {
            let _ = writeln!(out, "{x} {}", format_frequency(f));
        }
        if let Some(t) = self.tail {
            let _ = writeln!(out, ">{} {}", t.above, format_frequency(t.mass));
        }
        out
    }
}

fn check_frequency<T: Scalar>(x: u32, f: T) -> Result<()> {
    if !f.is_finite() || f < T::zero() {
        return Err(Error::InvalidFrequency {
            count: x,
            value: f.to_f64_lossy(),
        });
    }
    Ok(())
}

fn format_frequency<T: Scalar>(f: T) -> String {
    if f.fract() == T::zero() {
        format!("{:.0}", f.to_f64_lossy())
    } else {
        format!("{}", f.to_f64_lossy())
    }
}

/// Parses the two-column text format.
pub fn parse_frequency_table<T: Scalar>(text: &str) -> Result<FrequencyTable<T>> {
    let mut records: Vec<(u32, T)> = Vec::new();
    let mut tail: Option<(u32, T, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| Error::Parse {
            line: line_no,
            message: message.to_string(),
        };

        let (is_tail, body) = match line.strip_prefix('>') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, line),
        };
        let mut fields = body.split_whitespace();
        let (Some(xs), Some(fs), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err("expected two fields: count frequency"));
        };
        let x: u32 = xs
            .parse()
            .map_err(|_| err(&format!("count `{xs}` is not a nonnegative integer")))?;
        let f: u64 = fs
            .parse()
            .map_err(|_| err(&format!("frequency `{fs}` is not a nonnegative integer")))?;
        let f = T::from_u64(f).ok_or_else(|| err("frequency out of range"))?;

        if is_tail {
            if tail.is_some() {
                return Err(err("more than one collapsed tail record"));
            }
            tail = Some((x, f, line_no));
        } else {
            if x == 0 {
                return Err(err("count 0 is unobservable and cannot be listed"));
            }
            records.push((x, f));
        }
    }

    // A table holding only collapsed tail mass has nothing to fit and is
    // rejected as empty.
    let table = FrequencyTable::new(records)?;
    match tail {
        Some((above, mass, line)) => table.with_tail(above, mass).map_err(|e| match e {
            Error::TailOverlap { .. } => Error::Parse {
                line,
                message: e.to_string(),
            },
            other => other,
        }),
        None => Ok(table),
    }
}

/// One regression point `(x, log((x+1) f_{x+1} / f_x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RatioPoint<T> {
    pub x: u32,
    pub y: T,
}

impl<T: Scalar> RatioPoint<T> {
    /// The raw ratio `(x+1) f_{x+1} / f_x`.
    pub fn ratio(&self) -> T {
        self.y.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RatioPoints<T> {
    pub points: Vec<RatioPoint<T>>,
    pub source_m: u32,
    pub skipped: Vec<u32>,
}

impl<T: Scalar> RatioPoints<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<T> {
        self.points.iter().map(|p| p.y).collect()
    }
}
