//! Points of the supported state spaces.
//!
//! A [`Point`] is one state of one of the catalog systems: a labelled state
//! of a finite map, a position on the unit circle, a finite word over a
//! finite alphabet, or a pair of points of factor systems. Circle positions
//! are kept exact (as reduced rationals) whenever the system's angle is
//! rational, so periodic orbits are exactly periodic; otherwise they are
//! `f64` in `[0, 1)`.
//!
//! Words deserve a note: they are *finite* views into a shared symbol
//! buffer. The shift map shortens the view by one symbol in O(1) without
//! copying, and an operation that would need symbols past the end of the
//! view fails with a horizon-exhausted error instead of inventing symbols.

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::{One, Signed};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact or floating-point position on the circle of circumference 1,
/// normalized to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CirclePos {
    /// Reduced rational position; arithmetic on these is exact.
    Exact(Ratio<i128>),
    /// Floating-point position.
    Float(f64),
}

impl CirclePos {
    /// Exact position `p/q` reduced mod 1.
    pub fn exact(p: i128, q: i128) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameters("circle position with zero denominator".into()));
        }
        Ok(CirclePos::Exact(wrap_ratio(Ratio::new(p, q))))
    }

    /// Floating-point position wrapped to `[0, 1)`.
    pub fn float(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidParameters(format!("non-finite circle position {x}")));
        }
        Ok(CirclePos::Float(wrap_f64(x)))
    }

    /// Position as `f64` in `[0, 1)`.
    pub fn to_f64(self) -> f64 {
        match self {
            CirclePos::Exact(r) => ratio_to_f64(r),
            CirclePos::Float(x) => x,
        }
    }

    /// Rotate by `angle`, staying exact when both sides are exact.
    pub fn rotate(self, angle: CirclePos) -> CirclePos {
        match (self, angle) {
            (CirclePos::Exact(a), CirclePos::Exact(b)) => CirclePos::Exact(wrap_ratio(a + b)),
            (a, b) => CirclePos::Float(wrap_f64(a.to_f64() + b.to_f64())),
        }
    }

    /// Rotate by `-angle`, staying exact when both sides are exact.
    pub fn rotate_back(self, angle: CirclePos) -> CirclePos {
        match (self, angle) {
            (CirclePos::Exact(a), CirclePos::Exact(b)) => CirclePos::Exact(wrap_ratio(a - b)),
            (a, b) => CirclePos::Float(wrap_f64(a.to_f64() - b.to_f64())),
        }
    }

    /// Arc-length distance on the circle of circumference 1; the diameter is
    /// 1/2. Exact positions are compared exactly before converting.
    pub fn arc_distance(self, other: CirclePos) -> f64 {
        match (self, other) {
            (CirclePos::Exact(a), CirclePos::Exact(b)) => {
                let diff = (a - b).abs();
                let around = Ratio::one() - diff;
                ratio_to_f64(diff.min(around))
            }
            (a, b) => {
                let diff = (a.to_f64() - b.to_f64()).abs();
                diff.min(1.0 - diff)
            }
        }
    }

    /// Parse `"p/q"` (exact) or `"p"` (exact integer, i.e. position 0).
    pub fn parse_exact(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameters(format!("cannot parse circle position {s:?}"));
        match s.split_once('/') {
            Some((p, q)) => {
                let p: i128 = p.trim().parse().map_err(|_| bad())?;
                let q: i128 = q.trim().parse().map_err(|_| bad())?;
                CirclePos::exact(p, q)
            }
            None => {
                let p: i128 = s.trim().parse().map_err(|_| bad())?;
                CirclePos::exact(p, 1)
            }
        }
    }
}

fn wrap_ratio(r: Ratio<i128>) -> Ratio<i128> {
    let f = r.floor();
    r - f
}

fn wrap_f64(x: f64) -> f64 {
    let y = x - x.floor();
    // x.floor() of a value like -1e-18 yields y == 1.0; fold that back.
    if y >= 1.0 {
        y - 1.0
    } else {
        y
    }
}

fn ratio_to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Finite word over a finite alphabet: an O(1)-shiftable view into a shared
/// symbol buffer.
#[derive(Debug, Clone)]
pub struct Word {
    backing: Arc<[u8]>,
    start: usize,
    len: usize,
}

impl Word {
    /// Word owning the given symbols.
    pub fn from_symbols(symbols: Vec<u8>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidParameters("empty word".into()));
        }
        let len = symbols.len();
        Ok(Word { backing: symbols.into(), start: 0, len })
    }

    /// Sub-word of length `len` starting at `start`, sharing the buffer.
    pub fn view(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len {
            return Err(Error::InvalidParameters(format!(
                "word view [{start}, {}) out of range for length {}",
                start + len,
                self.len
            )));
        }
        Ok(Word { backing: Arc::clone(&self.backing), start: self.start + start, len })
    }

    /// Remaining length of the view.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True when no symbols remain (never constructed; kept for clippy).
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Visible symbols.
    pub fn symbols(&self) -> &[u8] {
        &self.backing[self.start..self.start + self.len]
    }

    /// Symbol at index `i` of the view.
    pub fn symbol(&self, i: usize) -> Option<u8> {
        self.symbols().get(i).copied()
    }

    /// Drop the first symbol (the shift map); fails when only one symbol is
    /// left, because the result would be the empty word.
    pub fn shifted(&self) -> Result<Self> {
        if self.len <= 1 {
            return Err(Error::HorizonExhausted(
                "shift would empty the word; rebuild the system with a longer word horizon".into(),
            ));
        }
        Ok(Word { backing: Arc::clone(&self.backing), start: self.start + 1, len: self.len - 1 })
    }

    /// New word with `symbol` prepended (a shift preimage).
    pub fn prepended(&self, symbol: u8) -> Self {
        let mut symbols = Vec::with_capacity(self.len + 1);
        symbols.push(symbol);
        symbols.extend_from_slice(self.symbols());
        Word { backing: symbols.into(), start: 0, len: self.len + 1 }
    }

    /// Index of the first mismatch against `other`, or `None` when the two
    /// views agree up to the shorter length.
    pub fn first_mismatch(&self, other: &Word) -> Option<usize> {
        self.symbols().iter().zip(other.symbols()).position(|(a, b)| a != b)
    }
}

impl PartialEq for Word {
    fn eq(&self, other: &Self) -> bool {
        self.symbols() == other.symbols()
    }
}

const WORD_DIGITS: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

fn word_to_string(w: &Word) -> String {
    w.symbols().iter().map(|&s| WORD_DIGITS[s as usize % 36] as char).collect()
}

fn word_from_string(s: &str) -> Result<Word> {
    let symbols = s
        .chars()
        .map(|c| {
            c.to_digit(36)
                .map(|d| d as u8)
                .ok_or_else(|| Error::InvalidParameters(format!("bad word symbol {c:?}")))
        })
        .collect::<Result<Vec<u8>>>()?;
    Word::from_symbols(symbols)
}

/// One state of a catalog system.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    /// State of a finite map, by index.
    State(usize),
    /// Position on the circle.
    Circle(CirclePos),
    /// Scalar in a real interval (interval maps such as the tent map).
    Scalar(f64),
    /// Finite word of a shift space.
    Word(Word),
    /// Point of a product system.
    Pair(Box<Point>, Box<Point>),
}

impl Point {
    /// Circle point from an exact rational.
    pub fn circle_exact(p: i128, q: i128) -> Result<Point> {
        Ok(Point::Circle(CirclePos::exact(p, q)?))
    }

    /// Circle point from a float.
    pub fn circle_float(x: f64) -> Result<Point> {
        Ok(Point::Circle(CirclePos::float(x)?))
    }

    /// Word point from raw symbols.
    pub fn word(symbols: Vec<u8>) -> Result<Point> {
        Ok(Point::Word(Word::from_symbols(symbols)?))
    }

    /// Short human-readable rendering for log lines and witnesses.
    pub fn describe(&self) -> String {
        match self {
            Point::State(i) => format!("state {i}"),
            Point::Circle(CirclePos::Exact(r)) => format!("circle {}/{}", r.numer(), r.denom()),
            Point::Circle(CirclePos::Float(x)) => format!("circle {x:.9}"),
            Point::Scalar(x) => format!("scalar {x:.9}"),
            Point::Word(w) => {
                let s = word_to_string(w);
                if s.len() > 24 {
                    format!("word {}..({} symbols)", &s[..24], w.len())
                } else {
                    format!("word {s}")
                }
            }
            Point::Pair(a, b) => format!("({}, {})", a.describe(), b.describe()),
        }
    }
}

/// Serialized shape of a point. Externally tagged:
/// `{"state": 3}`, `{"circle": "1/3"}`, `{"circle": 0.25}`,
/// `{"scalar": 0.5}`, `{"word": "0110"}`, `{"pair": [.., ..]}`.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PointRepr {
    State(usize),
    Circle(CircleRepr),
    Scalar(f64),
    Word(String),
    Pair(Box<PointRepr>, Box<PointRepr>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CircleRepr {
    Exact(String),
    Float(f64),
}

impl From<&Point> for PointRepr {
    fn from(p: &Point) -> Self {
        match p {
            Point::State(i) => PointRepr::State(*i),
            Point::Circle(CirclePos::Exact(r)) => {
                PointRepr::Circle(CircleRepr::Exact(format!("{}/{}", r.numer(), r.denom())))
            }
            Point::Circle(CirclePos::Float(x)) => PointRepr::Circle(CircleRepr::Float(*x)),
            Point::Scalar(x) => PointRepr::Scalar(*x),
            Point::Word(w) => PointRepr::Word(word_to_string(w)),
            Point::Pair(a, b) => {
                PointRepr::Pair(Box::new(a.as_ref().into()), Box::new(b.as_ref().into()))
            }
        }
    }
}

impl PointRepr {
    fn into_point(self) -> Result<Point> {
        Ok(match self {
            PointRepr::State(i) => Point::State(i),
            PointRepr::Circle(CircleRepr::Exact(s)) => Point::Circle(CirclePos::parse_exact(&s)?),
            PointRepr::Circle(CircleRepr::Float(x)) => Point::Circle(CirclePos::float(x)?),
            PointRepr::Scalar(x) => Point::Scalar(x),
            PointRepr::Word(s) => Point::Word(word_from_string(&s)?),
            PointRepr::Pair(a, b) => {
                Point::Pair(Box::new(a.into_point()?), Box::new(b.into_point()?))
            }
        })
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PointRepr::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PointRepr::deserialize(deserializer)?;
        repr.into_point().map_err(|e| D::Error::custom(e.to_string()))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}
