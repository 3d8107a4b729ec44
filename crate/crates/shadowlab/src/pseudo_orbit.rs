//! Pseudo-orbits and their taxonomy.
//!
//! A pseudo-orbit is a sequence of states whose step errors
//! `e_i = d(f(x_i), x_(i+1))` need not vanish. The laboratory grades them by
//! how the errors are distributed:
//!
//! * **per-step** — every step error is below `delta`;
//! * **ergodic** — the *density* of steps with error at least `delta`
//!   tends to zero (occasional large jumps are fine if they are rare);
//! * **average** — beyond some window length, every window's *mean* step
//!   error is below `delta`, uniformly in the window position;
//! * **asymptotic-average** — the limsup of the running mean step error is
//!   below `delta`;
//! * **vanishing average** — the running mean step error tends to zero.
//!
//! The classifier reports `Pass`/`Fail`/`Inconclusive` *at the orbit's
//! horizon*, never a claim about the limit: estimates within tolerance of
//! the threshold come back `Inconclusive`, and every `Fail` carries a
//! concrete witness (a step, a window, or a curve sample) that can be
//! re-evaluated directly.
//!
//! [`match_profile`] measures a candidate tracing orbit against a
//! pseudo-orbit: which indices are traced within `eps`, with what density,
//! and what the running mean tracing error looks like.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{density_stats_from_counts, sample_grid, DensityStats, IndexSet};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::system::{System, SystemCatalogEntry};

/// Where a pseudo-orbit came from: the construction, its parameters, the
/// seed, and (for block constructions) the first schedule terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Construction name, e.g. `"interleave-linear"`.
    pub label: String,
    /// Construction parameters as recorded by the builder.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
    /// RNG seed, when randomness was involved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// First terms of the block schedule, when one was used.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule_head: Vec<u64>,
}

impl Provenance {
    /// Provenance with just a label.
    pub fn labeled(label: impl Into<String>) -> Self {
        Provenance { label: label.into(), ..Default::default() }
    }
}

/// A finite pseudo-orbit of a catalog system.
#[derive(Debug, Clone)]
pub struct PseudoOrbit {
    system: Arc<System>,
    points: Vec<Point>,
    provenance: Provenance,
}

impl PseudoOrbit {
    /// Pseudo-orbit from explicit points; each must be a state of the
    /// system, and at least two are needed to have a step at all.
    pub fn new(system: Arc<System>, points: Vec<Point>, provenance: Provenance) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameters(format!(
                "a pseudo-orbit needs at least 2 points, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            system.validate_point(p).map_err(|e| {
                Error::InvalidParameters(format!("point {i} of the pseudo-orbit: {e}"))
            })?;
        }
        Ok(PseudoOrbit { system, points, provenance })
    }

    /// The true orbit of `x` as a (zero-error) pseudo-orbit.
    pub fn from_orbit(system: Arc<System>, x: &Point, n: usize) -> Result<Self> {
        let points = system.orbit_prefix(x, n)?;
        Ok(PseudoOrbit { system, points, provenance: Provenance::labeled("true-orbit") })
    }

    /// The underlying system.
    pub fn system(&self) -> &Arc<System> {
        &self.system
    }

    /// The points.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Never true: construction requires two points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of steps (one less than the number of points).
    pub fn steps(&self) -> u64 {
        (self.points.len() - 1) as u64
    }

    /// Construction record.
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The step-error sequence `e_i = d(f(x_i), x_(i+1))`.
    pub fn step_errors(&self) -> Result<Vec<f64>> {
        let mut errors = Vec::with_capacity(self.points.len() - 1);
        for i in 0..self.points.len() - 1 {
            let image = self.system.step_unchecked(&self.points[i]).map_err(|e| match e {
                Error::HorizonExhausted(_) => Error::HorizonExhausted(format!(
                    "step error at index {i}: the word ran out of symbols"
                )),
                other => other,
            })?;
            errors.push(self.system.distance(&image, &self.points[i + 1]));
        }
        Ok(errors)
    }

    /// Indices of steps with error at least `delta`, as a set over
    /// `[0, steps)`.
    pub fn mismatch_indices(&self, delta: f64) -> Result<IndexSet> {
        if delta.is_nan() || delta <= 0.0 {
            return Err(Error::InvalidParameters(format!("delta must be positive, got {delta}")));
        }
        let errors = self.step_errors()?;
        let members = errors
            .iter()
            .enumerate()
            .filter(|&(_, &e)| e >= delta)
            .map(|(i, _)| i as u64)
            .collect();
        Ok(IndexSet::from_sorted_unchecked(members, self.steps()))
    }

    /// Classify against one taxonomy class. `delta` is ignored for
    /// [`PseudoOrbitClass::VanishingAverage`], whose threshold is zero.
    pub fn classify(
        &self,
        class: PseudoOrbitClass,
        delta: f64,
        tolerance: f64,
    ) -> Result<ClassificationReport> {
        classify(self, class, delta, tolerance)
    }

    /// Lift a pseudo-orbit of an iterate system `f^k` to one of the base
    /// system `f`: each point `e_i` expands to its first `k` base-orbit
    /// points, so the only steps that can err are the block boundaries
    /// `k*i + (k-1)`, and those err exactly as much as step `i` did.
    pub fn lift(&self) -> Result<PseudoOrbit> {
        let System::Iterate { base, power } = self.system.as_ref() else {
            return Err(Error::InvalidParameters(
                "lift needs a pseudo-orbit of an iterate system".into(),
            ));
        };
        let k = *power as usize;
        let base = Arc::new(base.as_ref().clone());
        let mut points = Vec::with_capacity(self.points.len() * k);
        for e in &self.points {
            points.extend(base.orbit_prefix(e, k)?);
        }
        let mut provenance = Provenance::labeled("lift");
        provenance.params = serde_json::json!({
            "power": k,
            "from": self.provenance.label,
        });
        PseudoOrbit::new(base, points, provenance)
    }

    /// Project onto the `k`-th iterate system by sampling every `k`-th
    /// point. Inverse to [`PseudoOrbit::lift`] on the nose: projecting a
    /// lift returns the original points exactly.
    pub fn project(&self, k: u32) -> Result<PseudoOrbit> {
        if k == 0 {
            return Err(Error::InvalidParameters("projection stride must be positive".into()));
        }
        let points: Vec<Point> = self.points.iter().step_by(k as usize).cloned().collect();
        if points.len() < 2 {
            return Err(Error::HorizonTooSmall(format!(
                "projection by {k} of {} points leaves fewer than 2",
                self.points.len()
            )));
        }
        let system = Arc::new(System::Iterate {
            base: Box::new(self.system.as_ref().clone()),
            power: k,
        });
        let mut provenance = Provenance::labeled("project");
        provenance.params = serde_json::json!({
            "stride": k,
            "from": self.provenance.label,
        });
        PseudoOrbit::new(system, points, provenance)
    }
}

impl Serialize for PseudoOrbit {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            system: SystemCatalogEntry,
            points: &'a [Point],
            provenance: &'a Provenance,
        }
        Repr { system: self.system.entry(), points: &self.points, provenance: &self.provenance }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PseudoOrbit {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            system: SystemCatalogEntry,
            points: Vec<Point>,
            #[serde(default)]
            provenance: Provenance,
        }
        let repr = Repr::deserialize(deserializer)?;
        let system = crate::system::make_system(&repr.system)
            .map_err(|e| serde::de::Error::custom(e.to_string()))?;
        PseudoOrbit::new(Arc::new(system), repr.points, repr.provenance)
            .map_err(|e| serde::de::Error::custom(e.to_string()))
    }
}

/// The pseudo-orbit taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudoOrbitClass {
    /// Every step error strictly below `delta`.
    PerStep,
    /// Steps with error at least `delta` have vanishing density.
    Ergodic,
    /// Some window length beyond which every window mean is below `delta`.
    Average,
    /// Limsup of the running mean step error below `delta`.
    AsymptoticAverage,
    /// Running mean step error tends to zero (`delta` ignored).
    VanishingAverage,
}

impl PseudoOrbitClass {
    /// Kebab-case name used in reports and the CLI.
    pub fn name(self) -> &'static str {
        match self {
            PseudoOrbitClass::PerStep => "per-step",
            PseudoOrbitClass::Ergodic => "ergodic",
            PseudoOrbitClass::Average => "average",
            PseudoOrbitClass::AsymptoticAverage => "asymptotic-average",
            PseudoOrbitClass::VanishingAverage => "vanishing-average",
        }
    }
}

/// Three-valued classification outcome at a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// The observed data satisfies the class with margin.
    Pass,
    /// The observed data violates the class with margin; a witness is
    /// attached.
    Fail,
    /// The estimate is within tolerance of the threshold.
    Inconclusive,
}

/// A concrete, re-checkable reason for a `Fail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// A single step error at or above the threshold.
    Step {
        /// Step index.
        index: u64,
        /// The step error.
        error: f64,
    },
    /// A window whose mean step error is at or above the threshold.
    Window {
        /// First step index of the window.
        start: u64,
        /// Window length.
        len: u64,
        /// Mean step error over the window.
        mean: f64,
    },
    /// A prefix-curve sample violating the threshold.
    Curve {
        /// Prefix length.
        n: u64,
        /// Curve value at `n` (a density or a mean error).
        value: f64,
    },
}

/// One sample of a running-mean error curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurvePoint {
    /// Number of leading steps averaged.
    pub n: u64,
    /// Mean step error over those steps.
    pub mean: f64,
}

/// Outcome of classifying a pseudo-orbit against one taxonomy class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// The class tested.
    pub class: PseudoOrbitClass,
    /// The threshold (absent for the vanishing-average class).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Tolerance used at decision boundaries.
    pub tolerance: f64,
    /// Number of observed steps.
    pub steps: u64,
    /// The verdict at this horizon.
    pub verdict: Verdict,
    /// The decisive estimate (max step error, mismatch density, worst
    /// window mean, or limsup estimate, depending on the class).
    pub estimate: f64,
    /// Witness behind a `Fail` (or the near-boundary observation behind an
    /// `Inconclusive`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Running mean step error at grid samples.
    pub mean_curve: Vec<MeanCurvePoint>,
    /// Mismatch density statistics (ergodic class only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch_density: Option<DensityStats>,
    /// One-line explanation of the verdict.
    pub detail: String,
}

fn classify(
    orbit: &PseudoOrbit,
    class: PseudoOrbitClass,
    delta: f64,
    tolerance: f64,
) -> Result<ClassificationReport> {
    if class != PseudoOrbitClass::VanishingAverage && (delta.is_nan() || delta <= 0.0) {
        return Err(Error::InvalidParameters(format!(
            "classification against {} needs delta > 0, got {delta}",
            class.name()
        )));
    }
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidParameters(format!("tolerance must be positive, got {tolerance}")));
    }
    let errors = orbit.step_errors()?;
    let steps = errors.len() as u64;
    if steps < 4 {
        return Err(Error::HorizonTooSmall(format!(
            "classification needs at least 4 steps, got {steps}"
        )));
    }
    // Prefix sums: sums[n] = e_0 + ... + e_(n-1).
    let mut sums = Vec::with_capacity(errors.len() + 1);
    sums.push(0.0f64);
    for &e in &errors {
        sums.push(sums.last().unwrap() + e);
    }
    let grid = sample_grid(steps);
    let mean_curve: Vec<MeanCurvePoint> =
        grid.iter().map(|&n| MeanCurvePoint { n, mean: sums[n as usize] / n as f64 }).collect();
    let delta_opt =
        if class == PseudoOrbitClass::VanishingAverage { None } else { Some(delta) };

    let report = |verdict: Verdict,
                  estimate: f64,
                  witness: Option<Witness>,
                  mismatch_density: Option<DensityStats>,
                  detail: String| ClassificationReport {
        class,
        delta: delta_opt,
        tolerance,
        steps,
        verdict,
        estimate,
        witness,
        mean_curve: mean_curve.clone(),
        mismatch_density,
        detail,
    };

    match class {
        PseudoOrbitClass::PerStep => {
            // A finite conjunction of strict inequalities: exactly decidable.
            let &worst =
                errors.iter().max_by(|a, b| a.total_cmp(b)).expect("at least one step");
            if worst < delta {
                Ok(report(
                    Verdict::Pass,
                    worst,
                    None,
                    None,
                    format!("all {steps} step errors below {delta} (max {worst:.6})"),
                ))
            } else {
                let first = errors.iter().position(|&e| e >= delta).expect("worst exists");
                Ok(report(
                    Verdict::Fail,
                    worst,
                    Some(Witness::Step { index: first as u64, error: errors[first] }),
                    None,
                    format!("step {first} has error {:.6} >= {delta}", errors[first]),
                ))
            }
        }
        PseudoOrbitClass::Ergodic => {
            let mismatches = orbit.mismatch_indices(delta)?;
            let counts: Vec<(u64, u64)> =
                grid.iter().map(|&n| (n, mismatches.prefix_count(n))).collect();
            let stats = density_stats_from_counts(&counts, steps, tolerance, None)?;
            // The mismatch density must tend to 0; judge at the final,
            // highest-resolution sample, like the full-density family. The
            // decade-wide sanity bound allows the 10x drop a 1/n-type curve
            // can legitimately make across one decade, but rejects curves
            // that merely dip at the horizon.
            let final_ratio = stats.curve.last().map(|p| p.ratio).unwrap_or(0.0);
            let decade_max = stats.empirical_upper;
            if final_ratio <= tolerance && decade_max <= 10.0 * tolerance {
                let detail = format!(
                    "mismatch density {final_ratio:.6} at the horizon (tolerance {tolerance})"
                );
                Ok(report(Verdict::Pass, final_ratio, None, Some(stats), detail))
            } else if final_ratio <= 2.0 * tolerance {
                let detail = format!(
                    "mismatch density {final_ratio:.6} within 2x tolerance of {tolerance}: \
                     cannot decide the limit at this horizon"
                );
                Ok(report(Verdict::Inconclusive, final_ratio, None, Some(stats), detail))
            } else {
                let witness_sample = stats
                    .curve
                    .iter()
                    .filter(|p| p.n >= steps / 10)
                    .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
                    .expect("decade is nonempty");
                let detail = format!(
                    "mismatch density {:.6} at prefix {} stays above tolerance {tolerance}",
                    witness_sample.ratio, witness_sample.n
                );
                let witness =
                    Witness::Curve { n: witness_sample.n, value: witness_sample.ratio };
                Ok(report(Verdict::Fail, final_ratio, Some(witness), Some(stats), detail))
            }
        }
        PseudoOrbitClass::Average => {
            // All windows of length >= n0 have mean < delta, for some n0.
            // With t[j] = sums[j] - delta * j this reads: for every j,
            // t[j] < min over i <= j - n0 of t[i] — one running-min pass
            // per candidate n0.
            let t: Vec<f64> =
                sums.iter().enumerate().map(|(j, &s)| s - delta * j as f64).collect();
            let mut n0 = 1u64;
            let mut candidates = Vec::new();
            while n0 <= steps / 4 {
                candidates.push(n0);
                n0 *= 2;
            }
            if candidates.is_empty() {
                return Err(Error::HorizonTooSmall(format!(
                    "no admissible window length at {steps} steps"
                )));
            }
            let mut worst_for_largest: Option<Witness> = None;
            let mut passing = None;
            for &n0 in &candidates {
                let mut min_t = f64::INFINITY;
                let mut min_at = 0u64;
                let mut violation: Option<Witness> = None;
                for j in 0..=steps {
                    if j >= n0 {
                        let i = (j - n0) as usize;
                        if t[i] < min_t {
                            min_t = t[i];
                            min_at = j - n0;
                        }
                        if t[j as usize] >= min_t {
                            let len = j - min_at;
                            let mean = (sums[j as usize] - sums[min_at as usize]) / len as f64;
                            let worse = match &violation {
                                Some(Witness::Window { mean: m, .. }) => mean > *m,
                                _ => true,
                            };
                            if worse {
                                violation = Some(Witness::Window { start: min_at, len, mean });
                            }
                        }
                    }
                }
                match violation {
                    None => {
                        passing = Some(n0);
                        break;
                    }
                    Some(w) => worst_for_largest = Some(w),
                }
            }
            match passing {
                Some(n0) => Ok(report(
                    Verdict::Pass,
                    delta,
                    None,
                    None,
                    format!("every window of length >= {n0} has mean step error below {delta}"),
                )),
                None => {
                    let witness = worst_for_largest.expect("some candidate was checked");
                    let Witness::Window { start, len, mean } = witness else { unreachable!() };
                    if mean < delta + tolerance {
                        Ok(report(
                            Verdict::Inconclusive,
                            mean,
                            Some(witness),
                            None,
                            format!(
                                "worst window [{start}, {}) has mean {mean:.6}, within \
                                 tolerance of {delta}: strictness undecidable here",
                                start + len
                            ),
                        ))
                    } else {
                        Ok(report(
                            Verdict::Fail,
                            mean,
                            Some(witness),
                            None,
                            format!(
                                "window [{start}, {}) of length {len} has mean step error \
                                 {mean:.6} >= {delta}, at every admissible window length",
                                start + len
                            ),
                        ))
                    }
                }
            }
        }
        PseudoOrbitClass::AsymptoticAverage => {
            // Pass needs the whole last decade below the threshold; Fail
            // needs the whole decade above it (a curve still descending
            // through delta is inconclusive, not failing).
            let decade: Vec<&MeanCurvePoint> =
                mean_curve.iter().filter(|p| p.n >= steps / 10).collect();
            let limsup_est = decade.iter().map(|p| p.mean).fold(f64::NEG_INFINITY, f64::max);
            let decade_min = decade.iter().map(|p| p.mean).fold(f64::INFINITY, f64::min);
            let at_max = decade
                .iter()
                .max_by(|a, b| a.mean.total_cmp(&b.mean))
                .expect("decade is nonempty");
            if limsup_est < delta - tolerance {
                Ok(report(
                    Verdict::Pass,
                    limsup_est,
                    None,
                    None,
                    format!("running mean stays at {limsup_est:.6} < {delta} over the last decade"),
                ))
            } else if decade_min > delta + tolerance {
                let at_min = decade
                    .iter()
                    .min_by(|a, b| a.mean.total_cmp(&b.mean))
                    .expect("decade is nonempty");
                Ok(report(
                    Verdict::Fail,
                    limsup_est,
                    Some(Witness::Curve { n: at_min.n, value: at_min.mean }),
                    None,
                    format!(
                        "running mean stays above {delta} across the last decade \
                         (min {decade_min:.6} at prefix {})",
                        at_min.n
                    ),
                ))
            } else {
                Ok(report(
                    Verdict::Inconclusive,
                    limsup_est,
                    Some(Witness::Curve { n: at_max.n, value: at_max.mean }),
                    None,
                    format!(
                        "running mean crosses or hugs {delta} over the last decade \
                         ({decade_min:.6}..{limsup_est:.6}): undecidable at this horizon"
                    ),
                ))
            }
        }
        PseudoOrbitClass::VanishingAverage => {
            let decade: Vec<&MeanCurvePoint> =
                mean_curve.iter().filter(|p| p.n >= steps / 10).collect();
            let decade_max = decade.iter().map(|p| p.mean).fold(f64::NEG_INFINITY, f64::max);
            let decade_min = decade.iter().map(|p| p.mean).fold(f64::INFINITY, f64::min);
            if decade_max <= tolerance {
                Ok(report(
                    Verdict::Pass,
                    decade_max,
                    None,
                    None,
                    format!(
                        "running mean at most {decade_max:.6} over the last decade \
                         (tolerance {tolerance})"
                    ),
                ))
            } else if decade_min > tolerance {
                let at = decade
                    .iter()
                    .min_by(|a, b| a.mean.total_cmp(&b.mean))
                    .expect("decade is nonempty");
                Ok(report(
                    Verdict::Fail,
                    decade_min,
                    Some(Witness::Curve { n: at.n, value: at.mean }),
                    None,
                    format!(
                        "running mean stays above tolerance {tolerance} across the last \
                         decade (min {decade_min:.6} at prefix {})",
                        at.n
                    ),
                ))
            } else {
                let at = decade
                    .iter()
                    .max_by(|a, b| a.mean.total_cmp(&b.mean))
                    .expect("decade is nonempty");
                Ok(report(
                    Verdict::Inconclusive,
                    decade_max,
                    Some(Witness::Curve { n: at.n, value: at.mean }),
                    None,
                    format!(
                        "running mean straddles the tolerance {tolerance} over the last decade \
                         ({decade_min:.6}..{decade_max:.6})"
                    ),
                ))
            }
        }
    }
}

/// How a candidate orbit traces a pseudo-orbit: the set of `eps`-close
/// indices, its density, and the running mean tracing error.
#[derive(Debug, Clone, Serialize)]
pub struct MatchProfile {
    /// Tracing tolerance.
    pub eps: f64,
    /// Number of compared indices.
    pub horizon: u64,
    /// Indices where the candidate is within `eps` of the pseudo-orbit.
    pub matched: IndexSet,
    /// Density statistics of the matched set.
    pub matched_density: DensityStats,
    /// Running mean tracing error at grid samples.
    pub error_curve: Vec<MeanCurvePoint>,
    /// Mean tracing error over all compared indices.
    pub final_mean_error: f64,
}

/// Compare the orbit of `z` against the pseudo-orbit, index by index.
///
/// The matched set is `{i : d(f^i(z), x_i) < eps}` over `[0, len)`. The
/// running mean error curve satisfies
/// `mean(n) >= eps * (1 - matched_ratio(n))` at every sample, since every
/// unmatched index contributes at least `eps`.
pub fn match_profile(
    orbit: &PseudoOrbit,
    z: &Point,
    eps: f64,
    tolerance: f64,
) -> Result<MatchProfile> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameters(format!("eps must be positive, got {eps}")));
    }
    let system = orbit.system();
    system.validate_point(z)?;
    let horizon = orbit.len() as u64;
    let mut matched = Vec::new();
    let mut sum = 0.0f64;
    let grid = sample_grid(horizon);
    let mut grid_iter = grid.iter().peekable();
    let mut error_curve = Vec::with_capacity(grid.len());
    let mut match_counts = Vec::with_capacity(grid.len());
    let mut current = z.clone();
    for i in 0..orbit.len() {
        if i > 0 {
            current = system.step_unchecked(&current).map_err(|e| match e {
                Error::HorizonExhausted(_) => Error::HorizonExhausted(format!(
                    "candidate {} runs out after {i} steps of {horizon}",
                    z.describe()
                )),
                other => other,
            })?;
        }
        let d = system.distance(&current, &orbit.points()[i]);
        if d < eps {
            matched.push(i as u64);
        }
        sum += d;
        let n = (i + 1) as u64;
        if grid_iter.peek() == Some(&&n) {
            grid_iter.next();
            error_curve.push(MeanCurvePoint { n, mean: sum / n as f64 });
            match_counts.push((n, matched.len() as u64));
        }
    }
    let matched = IndexSet::from_sorted_unchecked(matched, horizon);
    let matched_density = density_stats_from_counts(&match_counts, horizon, tolerance, None)?;
    let final_mean_error = sum / horizon as f64;
    Ok(MatchProfile { eps, horizon, matched, matched_density, error_curve, final_mean_error })
}
