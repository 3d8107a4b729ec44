//! The system catalog: compact metric spaces with a continuous self-map.
//!
//! Everything downstream (pseudo-orbits, constructions, verifiers) works
//! against the [`System`] interface: a metric, a map, a diameter, and an
//! epsilon-net. The catalog is closed on purpose — each entry has exact
//! semantics the tests can pin down:
//!
//! * **finite map** — explicit transition table on states `0..n` with the
//!   discrete metric;
//! * **circle rotation** — rotation of the circle of circumference 1 with
//!   the arc-length metric (diameter 1/2); exact rational arithmetic when
//!   the angle is rational, `f64` otherwise;
//! * **full shift** — finite words over an alphabet of `m` symbols with
//!   `d(x, y) = 2^-(first mismatch index)`; the shift consumes symbols and
//!   never invents them, so running past the word horizon is an error;
//! * **tent map** — `x -> 1 - |2x - 1|` on `[0, 1]` with `|x - y|`;
//! * **product** — two factor systems under the max metric;
//! * **iterate** — `f^k` of a base system, same metric.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{CirclePos, Point, Word};

/// Largest epsilon-net any system will materialize.
const NET_MAX: usize = 2_000_000;

/// Serializable description of a catalog system.
///
/// The JSON form is `{"kind": "...", "params": {...}}`; the tent map takes
/// no parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum SystemCatalogEntry {
    /// `table[i]` is the image of state `i`.
    FiniteMap { table: Vec<usize> },
    /// Rotation angle, exact (`"1/3"`) or floating (`0.6180339887`).
    CircleRotation { angle: AngleSpec },
    /// Words over `alphabet` symbols; fresh points carry `word_len` symbols.
    FullShift { alphabet: u8, word_len: usize },
    /// The tent map on the unit interval.
    TentMap,
    /// Product of two factor systems under the max metric.
    Product { left: Box<SystemCatalogEntry>, right: Box<SystemCatalogEntry> },
    /// `power`-th iterate of a base system.
    Iterate { base: Box<SystemCatalogEntry>, power: u32 },
}

/// Rotation angle: a fraction string keeps the system exact, a float makes
/// it floating-point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    /// Exact rational angle, e.g. `"1/3"`.
    Exact(String),
    /// Floating-point angle.
    Float(f64),
}

impl AngleSpec {
    fn to_pos(&self) -> Result<CirclePos> {
        match self {
            AngleSpec::Exact(s) => CirclePos::parse_exact(s),
            AngleSpec::Float(x) => CirclePos::float(*x),
        }
    }
}

/// A runnable catalog system.
#[derive(Debug, Clone)]
pub enum System {
    /// Finite map with its transition table.
    Finite { table: Vec<usize> },
    /// Circle rotation by a fixed angle.
    Rotation { angle: CirclePos },
    /// Full shift on `alphabet` symbols with default word length `word_len`.
    Shift { alphabet: u8, word_len: usize },
    /// Tent map on `[0, 1]`.
    Tent,
    /// Product of two systems.
    Product { left: Box<System>, right: Box<System> },
    /// Iterate of a base system.
    Iterate { base: Box<System>, power: u32 },
}

/// Which preimage a backward construction should take when the map is not
/// injective. Serializes as `"canonical"` or `{"prepend-symbol": 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreimageSelector {
    /// System-specific default: exact inverse for rotations, prepend `0`
    /// for shifts, smallest-index preimage for finite maps, the left branch
    /// for the tent map.
    Canonical,
    /// Prepend this symbol (shift systems only; product systems forward it
    /// to every shift factor).
    PrependSymbol(u8),
}

/// Build a runnable system from its catalog entry, validating parameters.
pub fn make_system(entry: &SystemCatalogEntry) -> Result<System> {
    match entry {
        SystemCatalogEntry::FiniteMap { table } => {
            if table.is_empty() {
                return Err(Error::InvalidParameters("finite map needs at least one state".into()));
            }
            if let Some(&bad) = table.iter().find(|&&t| t >= table.len()) {
                return Err(Error::InvalidParameters(format!(
                    "finite map table entry {bad} is not a state index < {}",
                    table.len()
                )));
            }
            Ok(System::Finite { table: table.clone() })
        }
        SystemCatalogEntry::CircleRotation { angle } => {
            Ok(System::Rotation { angle: angle.to_pos()? })
        }
        SystemCatalogEntry::FullShift { alphabet, word_len } => {
            if !(2..=36).contains(alphabet) {
                return Err(Error::InvalidParameters(format!(
                    "shift alphabet must have 2..=36 symbols, got {alphabet}"
                )));
            }
            if *word_len < 2 {
                return Err(Error::InvalidParameters(format!(
                    "shift word length must be at least 2, got {word_len}"
                )));
            }
            Ok(System::Shift { alphabet: *alphabet, word_len: *word_len })
        }
        SystemCatalogEntry::TentMap => Ok(System::Tent),
        SystemCatalogEntry::Product { left, right } => Ok(System::Product {
            left: Box::new(make_system(left)?),
            right: Box::new(make_system(right)?),
        }),
        SystemCatalogEntry::Iterate { base, power } => {
            if *power == 0 {
                return Err(Error::InvalidParameters("iterate power must be positive".into()));
            }
            Ok(System::Iterate { base: Box::new(make_system(base)?), power: *power })
        }
    }
}

impl System {
    /// The identity on two points — the smallest system with interesting
    /// average-shadowing behavior.
    pub fn two_point_identity() -> System {
        System::Finite { table: vec![0, 1] }
    }

    /// Catalog entry describing this system.
    pub fn entry(&self) -> SystemCatalogEntry {
        match self {
            System::Finite { table } => SystemCatalogEntry::FiniteMap { table: table.clone() },
            System::Rotation { angle } => SystemCatalogEntry::CircleRotation {
                angle: match angle {
                    CirclePos::Exact(r) => AngleSpec::Exact(format!("{}/{}", r.numer(), r.denom())),
                    CirclePos::Float(x) => AngleSpec::Float(*x),
                },
            },
            System::Shift { alphabet, word_len } => {
                SystemCatalogEntry::FullShift { alphabet: *alphabet, word_len: *word_len }
            }
            System::Tent => SystemCatalogEntry::TentMap,
            System::Product { left, right } => SystemCatalogEntry::Product {
                left: Box::new(left.entry()),
                right: Box::new(right.entry()),
            },
            System::Iterate { base, power } => {
                SystemCatalogEntry::Iterate { base: Box::new(base.entry()), power: *power }
            }
        }
    }

    /// Human-readable name.
    pub fn name(&self) -> String {
        match self {
            System::Finite { table } => format!("finite map on {} states", table.len()),
            System::Rotation { angle } => match angle {
                CirclePos::Exact(r) => format!("circle rotation by {}/{}", r.numer(), r.denom()),
                CirclePos::Float(x) => format!("circle rotation by {x:.9}"),
            },
            System::Shift { alphabet, word_len } => {
                format!("full shift on {alphabet} symbols (words of length {word_len})")
            }
            System::Tent => "tent map".into(),
            System::Product { left, right } => format!("product({}, {})", left.name(), right.name()),
            System::Iterate { base, power } => format!("iterate^{power}({})", base.name()),
        }
    }

    /// Check that `p` is a state of this system.
    pub fn validate_point(&self, p: &Point) -> Result<()> {
        match (self, p) {
            (System::Finite { table }, Point::State(i)) => {
                if *i < table.len() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameters(format!(
                        "state {i} out of range for {} states",
                        table.len()
                    )))
                }
            }
            (System::Rotation { .. }, Point::Circle(_)) => Ok(()),
            (System::Shift { alphabet, .. }, Point::Word(w)) => {
                match w.symbols().iter().find(|&&s| s >= *alphabet) {
                    None => Ok(()),
                    Some(s) => Err(Error::InvalidParameters(format!(
                        "word symbol {s} outside alphabet of {alphabet}"
                    ))),
                }
            }
            (System::Tent, Point::Scalar(x)) => {
                if (0.0..=1.0).contains(x) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameters(format!("scalar {x} outside [0, 1]")))
                }
            }
            (System::Product { left, right }, Point::Pair(a, b)) => {
                left.validate_point(a)?;
                right.validate_point(b)
            }
            (System::Iterate { base, .. }, p) => base.validate_point(p),
            (sys, p) => Err(Error::InvalidParameters(format!(
                "point {} is not a state of {}",
                p.describe(),
                sys.name()
            ))),
        }
    }

    /// Distance between two states.
    pub fn metric(&self, a: &Point, b: &Point) -> Result<f64> {
        self.validate_point(a)?;
        self.validate_point(b)?;
        Ok(self.distance(a, b))
    }

    /// Distance, assuming both points already validated. Hot path for the
    /// verifiers.
    pub(crate) fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (self, a, b) {
            (System::Finite { .. }, Point::State(i), Point::State(j)) => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            (System::Rotation { .. }, Point::Circle(x), Point::Circle(y)) => x.arc_distance(*y),
            (System::Shift { .. }, Point::Word(u), Point::Word(v)) => word_distance(u, v),
            (System::Tent, Point::Scalar(x), Point::Scalar(y)) => (x - y).abs(),
            (System::Product { left, right }, Point::Pair(a1, a2), Point::Pair(b1, b2)) => {
                left.distance(a1, b1).max(right.distance(a2, b2))
            }
            (System::Iterate { base, .. }, a, b) => base.distance(a, b),
            _ => f64::NAN,
        }
    }

    /// Image of `p` under the map.
    pub fn step(&self, p: &Point) -> Result<Point> {
        self.validate_point(p)?;
        self.step_unchecked(p)
    }

    pub(crate) fn step_unchecked(&self, p: &Point) -> Result<Point> {
        match (self, p) {
            (System::Finite { table }, Point::State(i)) => Ok(Point::State(table[*i])),
            (System::Rotation { angle }, Point::Circle(x)) => Ok(Point::Circle(x.rotate(*angle))),
            (System::Shift { .. }, Point::Word(w)) => Ok(Point::Word(w.shifted()?)),
            (System::Tent, Point::Scalar(x)) => Ok(Point::Scalar(1.0 - (2.0 * x - 1.0).abs())),
            (System::Product { left, right }, Point::Pair(a, b)) => Ok(Point::Pair(
                Box::new(left.step_unchecked(a)?),
                Box::new(right.step_unchecked(b)?),
            )),
            (System::Iterate { base, power }, p) => {
                let mut q = p.clone();
                for _ in 0..*power {
                    q = base.step_unchecked(&q)?;
                }
                Ok(q)
            }
            _ => unreachable!("step_unchecked on unvalidated point"),
        }
    }

    /// The first `n` points of the orbit of `x`: `x, f(x), ..., f^(n-1)(x)`.
    pub fn orbit_prefix(&self, x: &Point, n: usize) -> Result<Vec<Point>> {
        if n == 0 {
            return Err(Error::InvalidParameters("orbit prefix length must be positive".into()));
        }
        self.validate_point(x)?;
        let mut orbit = Vec::with_capacity(n);
        orbit.push(x.clone());
        for i in 1..n {
            let next = self.step_unchecked(&orbit[i - 1]).map_err(|e| match e {
                Error::HorizonExhausted(_) => Error::HorizonExhausted(format!(
                    "orbit of {} ends after {i} steps, {n} requested",
                    x.describe()
                )),
                other => other,
            })?;
            orbit.push(next);
        }
        Ok(orbit)
    }

    /// Diameter of the space.
    pub fn diameter(&self) -> f64 {
        match self {
            System::Finite { table } => {
                if table.len() > 1 {
                    1.0
                } else {
                    0.0
                }
            }
            System::Rotation { .. } => 0.5,
            System::Shift { .. } => 1.0,
            System::Tent => 1.0,
            System::Product { left, right } => left.diameter().max(right.diameter()),
            System::Iterate { base, .. } => base.diameter(),
        }
    }

    /// An epsilon-net: every state of the space is within `eps` of some net
    /// point. Finite maps return all states; the circle and the interval
    /// use uniform grids; the shift returns all words of length
    /// `ceil(log2(1/eps))`.
    pub fn net(&self, eps: f64) -> Result<Vec<Point>> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidParameters(format!("net resolution must be positive, got {eps}")));
        }
        match self {
            System::Finite { table } => Ok((0..table.len()).map(Point::State).collect()),
            System::Rotation { .. } => {
                let n = (1.0 / eps).ceil() as i128 + 1;
                if n as usize > NET_MAX {
                    return Err(Error::InvalidParameters(format!(
                        "circle net at resolution {eps} needs {n} points (cap {NET_MAX})"
                    )));
                }
                (0..n).map(|i| Point::circle_exact(i, n)).collect()
            }
            System::Shift { alphabet, word_len } => {
                // Words of length len cover the space at radius 2^-len.
                let len = if eps >= 0.5 { 1 } else { (1.0 / eps).log2().ceil() as usize };
                if len > *word_len {
                    return Err(Error::InvalidParameters(format!(
                        "shift net at resolution {eps} needs words of length {len}, \
                         but the system's word horizon is {word_len}"
                    )));
                }
                let count = (*alphabet as usize).checked_pow(len as u32).filter(|&c| c <= NET_MAX);
                let count = count.ok_or_else(|| {
                    Error::InvalidParameters(format!(
                        "shift net at resolution {eps} needs {alphabet}^{len} points (cap {NET_MAX})"
                    ))
                })?;
                let mut points = Vec::with_capacity(count);
                let mut symbols = vec![0u8; len];
                loop {
                    points.push(Point::word(symbols.clone())?);
                    // Odometer increment in base `alphabet`.
                    let mut i = len;
                    loop {
                        if i == 0 {
                            return Ok(points);
                        }
                        i -= 1;
                        symbols[i] += 1;
                        if symbols[i] < *alphabet {
                            break;
                        }
                        symbols[i] = 0;
                    }
                }
            }
            System::Tent => {
                let k = (1.0 / eps).ceil() as usize;
                if k + 1 > NET_MAX {
                    return Err(Error::InvalidParameters(format!(
                        "interval net at resolution {eps} needs {} points (cap {NET_MAX})",
                        k + 1
                    )));
                }
                Ok((0..=k).map(|i| Point::Scalar(i as f64 / k as f64)).collect())
            }
            System::Product { left, right } => {
                let ln = left.net(eps)?;
                let rn = right.net(eps)?;
                if ln.len().saturating_mul(rn.len()) > NET_MAX {
                    return Err(Error::InvalidParameters(format!(
                        "product net at resolution {eps} needs {} points (cap {NET_MAX})",
                        ln.len() * rn.len()
                    )));
                }
                let mut points = Vec::with_capacity(ln.len() * rn.len());
                for a in &ln {
                    for b in &rn {
                        points.push(Point::Pair(Box::new(a.clone()), Box::new(b.clone())));
                    }
                }
                Ok(points)
            }
            System::Iterate { base, .. } => base.net(eps),
        }
    }

    /// A preimage of `p`, or a no-preimage error.
    pub fn preimage(&self, p: &Point, selector: PreimageSelector) -> Result<Point> {
        self.validate_point(p)?;
        match (self, p) {
            (System::Finite { table }, Point::State(i)) => table
                .iter()
                .position(|&t| t == *i)
                .map(Point::State)
                .ok_or_else(|| Error::NoPreimage(format!("state {i} has no preimage"))),
            (System::Rotation { angle }, Point::Circle(x)) => {
                Ok(Point::Circle(x.rotate_back(*angle)))
            }
            (System::Shift { alphabet, .. }, Point::Word(w)) => {
                let symbol = match selector {
                    PreimageSelector::Canonical => 0,
                    PreimageSelector::PrependSymbol(s) => {
                        if s >= *alphabet {
                            return Err(Error::InvalidParameters(format!(
                                "prepend symbol {s} outside alphabet of {alphabet}"
                            )));
                        }
                        s
                    }
                };
                Ok(Point::Word(w.prepended(symbol)))
            }
            (System::Tent, Point::Scalar(x)) => Ok(Point::Scalar(x / 2.0)),
            (System::Product { left, right }, Point::Pair(a, b)) => Ok(Point::Pair(
                Box::new(left.preimage(a, selector)?),
                Box::new(right.preimage(b, selector)?),
            )),
            (System::Iterate { base, power }, p) => {
                let mut q = p.clone();
                for _ in 0..*power {
                    q = base.preimage(&q, selector)?;
                }
                Ok(q)
            }
            _ => unreachable!("preimage on unvalidated point"),
        }
    }

    /// The last `depth` points of a backward orbit ending at `target`:
    /// returns `w_0, ..., w_(depth-1)` with `f(w_j) = w_(j+1)` and
    /// `w_(depth-1) = target`. Shift systems with a prepend selector build
    /// one shared symbol buffer instead of `depth` separate words.
    pub fn backward_orbit(
        &self,
        target: &Point,
        depth: usize,
        selector: PreimageSelector,
    ) -> Result<Vec<Point>> {
        if depth == 0 {
            return Err(Error::InvalidParameters("backward orbit depth must be positive".into()));
        }
        self.validate_point(target)?;
        if let (System::Shift { alphabet, .. }, Point::Word(w)) = (self, target) {
            let symbol = match selector {
                PreimageSelector::Canonical => 0,
                PreimageSelector::PrependSymbol(s) => {
                    if s >= *alphabet {
                        return Err(Error::InvalidParameters(format!(
                            "prepend symbol {s} outside alphabet of {alphabet}"
                        )));
                    }
                    s
                }
            };
            let mut symbols = vec![symbol; depth - 1];
            symbols.extend_from_slice(w.symbols());
            let full = Word::from_symbols(symbols)?;
            return (0..depth)
                .map(|j| Ok(Point::Word(full.view(j, full.len() - j)?)))
                .collect();
        }
        let mut reversed = vec![target.clone()];
        for _ in 1..depth {
            let prev = self.preimage(reversed.last().unwrap(), selector)?;
            reversed.push(prev);
        }
        reversed.reverse();
        Ok(reversed)
    }

    /// A uniformly random state. Shift words carry `word_len` symbols;
    /// exact-angle rotations draw exact positions on a fine grid so orbits
    /// stay exact.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            System::Finite { table } => Point::State(rng.gen_range(0..table.len())),
            System::Rotation { angle } => match angle {
                CirclePos::Exact(_) => {
                    const GRID: i128 = 1 << 20;
                    Point::circle_exact(rng.gen_range(0..GRID), GRID).expect("valid grid point")
                }
                CirclePos::Float(_) => Point::circle_float(rng.gen::<f64>()).expect("finite"),
            },
            System::Shift { alphabet, word_len } => {
                let symbols = (0..*word_len).map(|_| rng.gen_range(0..*alphabet)).collect();
                Point::word(symbols).expect("nonempty word")
            }
            System::Tent => Point::Scalar(rng.gen::<f64>()),
            System::Product { left, right } => Point::Pair(
                Box::new(left.random_point(rng)),
                Box::new(right.random_point(rng)),
            ),
            System::Iterate { base, .. } => base.random_point(rng),
        }
    }

    /// A random state at distance strictly less than `delta` from `center`.
    pub fn random_point_near<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        center: &Point,
        delta: f64,
    ) -> Point {
        match (self, center) {
            (System::Finite { table }, Point::State(i)) => {
                if delta > 1.0 && table.len() > 1 {
                    Point::State(rng.gen_range(0..table.len()))
                } else {
                    Point::State(*i)
                }
            }
            (System::Rotation { .. }, Point::Circle(x)) => {
                let u = (rng.gen::<f64>() * 2.0 - 1.0) * delta * 0.999;
                Point::circle_float(x.to_f64() + u).expect("finite")
            }
            (System::Shift { alphabet, .. }, Point::Word(w)) => {
                // Distance < delta means agreement on a prefix long enough
                // that 2^-prefix is strictly below delta; keep that prefix,
                // randomize the rest.
                let mut keep = if delta > 1.0 { 0 } else { (1.0 / delta).log2().ceil() as usize };
                if 0.5f64.powi(keep as i32) >= delta {
                    keep += 1;
                }
                let keep = keep.min(w.len());
                let symbols: Vec<u8> = w
                    .symbols()
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| if i < keep { s } else { rng.gen_range(0..*alphabet) })
                    .collect();
                Point::word(symbols).expect("nonempty word")
            }
            (System::Tent, Point::Scalar(x)) => {
                let u = (rng.gen::<f64>() * 2.0 - 1.0) * delta * 0.999;
                Point::Scalar((x + u).clamp(0.0, 1.0))
            }
            (System::Product { left, right }, Point::Pair(a, b)) => Point::Pair(
                Box::new(left.random_point_near(rng, a, delta)),
                Box::new(right.random_point_near(rng, b, delta)),
            ),
            (System::Iterate { base, .. }, center) => base.random_point_near(rng, center, delta),
            _ => center.clone(),
        }
    }

    /// Empirical equicontinuity modulus at sensitivity `eps`: the largest
    /// `delta` from the grid `{eps * 2^-k : k = 0..=6}` such that over
    /// `samples` random pairs at distance `< delta`, every iterate up to
    /// `horizon` stays strictly `eps`-close. Returns `Ok(None)` when no grid
    /// value works (a sensitivity witness at this horizon).
    ///
    /// The grid is deliberately bounded: at a finite horizon every map is
    /// uniformly continuous, so arbitrarily small `delta` would always pass
    /// and the probe would say nothing about expansive systems.
    pub fn equicontinuity_modulus<R: Rng + ?Sized>(
        &self,
        eps: f64,
        horizon: usize,
        samples: usize,
        rng: &mut R,
    ) -> Result<Option<f64>> {
        if eps.is_nan() || eps <= 0.0 || samples == 0 {
            return Err(Error::InvalidParameters(
                "equicontinuity probe needs eps > 0 and at least one sample".into(),
            ));
        }
        'grid: for k in 0..=6u32 {
            let delta = eps * 0.5f64.powi(k as i32);
            for _ in 0..samples {
                let x = self.random_point(rng);
                let y = self.random_point_near(rng, &x, delta);
                if self.distance(&x, &y) >= delta {
                    // Sampler overshot (clamping at interval ends); this
                    // pair proves nothing either way.
                    continue;
                }
                let mut a = x;
                let mut b = y;
                for _ in 0..=horizon {
                    if self.distance(&a, &b) >= eps {
                        continue 'grid;
                    }
                    a = self.step_unchecked(&a)?;
                    b = self.step_unchecked(&b)?;
                }
            }
            return Ok(Some(delta));
        }
        Ok(None)
    }
}

/// Shift metric: `2^-(index of first mismatch)`, with agreement up to the
/// shorter word scored at the shorter length, and identical views at 0.
fn word_distance(u: &Word, v: &Word) -> f64 {
    match u.first_mismatch(v) {
        Some(i) => 0.5f64.powi(i as i32),
        None => {
            if u.len() == v.len() {
                0.0
            } else {
                0.5f64.powi(u.len().min(v.len()) as i32)
            }
        }
    }
}
