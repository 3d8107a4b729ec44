//! Prefix calculus and density estimation for index sets in `Z+`.
//!
//! Everything about *how well* an orbit traces a pseudo-orbit is a question
//! about subsets of the nonnegative integers: the set of good-tracing times,
//! the set of step-error times, the block structure of a construction. This
//! module gives those sets an exact finite representation — the members
//! below an explicit horizon — together with:
//!
//! * exact set algebra (shifts, scaling, boolean operations) that keeps
//!   track of the horizon on which the result is fully determined;
//! * density estimation: the prefix-count curve `n -> |A ∩ [0, n)| / n`
//!   sampled on a geometric grid, with upper/lower density estimated from
//!   the *last decade* of the curve (early transients are construction
//!   artifacts, and limsup/liminf only care about the tail);
//! * the families used to grade tracing quality: lower density above
//!   `alpha`, upper density above `alpha`, full density, syndetic with gap
//!   bound, thick with run bound.
//!
//! Estimates are honest about being finite-horizon: each verdict carries a
//! margin, and anything within `2 / sqrt(horizon)` of a threshold is
//! `Inconclusive` rather than a guess.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytically known density attached to a generated set, used as the
/// authoritative value when present (the empirical curve is still computed
/// and must agree within `2 / sqrt(horizon)` — see the module tests).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    /// Where the value comes from, e.g. `"arithmetic progression step 2"`.
    pub label: String,
    /// Exact upper density.
    pub upper: f64,
    /// Exact lower density.
    pub lower: f64,
}

impl ClosedForm {
    /// Closed form for a set of density zero.
    pub fn zero(label: impl Into<String>) -> Self {
        ClosedForm { label: label.into(), upper: 0.0, lower: 0.0 }
    }

    /// Closed form for a set with full density.
    pub fn one(label: impl Into<String>) -> Self {
        ClosedForm { label: label.into(), upper: 1.0, lower: 1.0 }
    }

    /// Closed form for a set whose density exists and equals `value`.
    pub fn value(label: impl Into<String>, value: f64) -> Self {
        ClosedForm { label: label.into(), upper: value, lower: value }
    }
}

/// A subset of `[0, horizon)`, stored as its sorted members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    horizon: u64,
    members: Vec<u64>,
    /// Optional analytically known density of the infinite set this prefix
    /// observes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedForm>,
}

impl IndexSet {
    /// Set from raw members; they are sorted, deduplicated, and must lie
    /// below the horizon.
    pub fn new(mut members: Vec<u64>, horizon: u64) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&last) = members.last() {
            if last >= horizon {
                return Err(Error::InvalidParameters(format!(
                    "member {last} at or above horizon {horizon}"
                )));
            }
        }
        Ok(IndexSet { horizon, members, closed_form: None })
    }

    /// Members from a sorted, in-range iterator the caller vouches for.
    pub(crate) fn from_sorted_unchecked(members: Vec<u64>, horizon: u64) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(members.last().is_none_or(|&m| m < horizon));
        IndexSet { horizon, members, closed_form: None }
    }

    /// The empty subset of `[0, horizon)`.
    pub fn empty(horizon: u64) -> Self {
        IndexSet { horizon, members: Vec::new(), closed_form: Some(ClosedForm::zero("empty set")) }
    }

    /// All of `[0, horizon)`.
    pub fn full(horizon: u64) -> Self {
        IndexSet {
            horizon,
            members: (0..horizon).collect(),
            closed_form: Some(ClosedForm::one("full set")),
        }
    }

    /// `{offset, offset + step, offset + 2 step, ...}` below the horizon.
    pub fn arithmetic(step: u64, offset: u64, horizon: u64) -> Result<Self> {
        if step == 0 {
            return Err(Error::InvalidParameters("arithmetic progression with step 0".into()));
        }
        let members = (offset..horizon).step_by(step as usize).collect();
        let mut set = IndexSet { horizon, members, closed_form: None };
        set.closed_form =
            Some(ClosedForm::value(format!("arithmetic progression step {step}"), 1.0 / step as f64));
        Ok(set)
    }

    /// The even numbers below the horizon.
    pub fn evens(horizon: u64) -> Self {
        Self::arithmetic(2, 0, horizon).expect("step 2 is valid")
    }

    /// The perfect squares below the horizon.
    pub fn squares(horizon: u64) -> Self {
        let mut members = Vec::new();
        let mut i = 0u64;
        while i * i < horizon {
            members.push(i * i);
            i += 1;
        }
        IndexSet { horizon, members, closed_form: Some(ClosedForm::zero("perfect squares")) }
    }

    /// Union of half-open blocks `[start, end)`, clipped to the horizon.
    pub fn from_blocks(blocks: &[(u64, u64)], horizon: u64) -> Result<Self> {
        let mut members = Vec::new();
        for &(start, end) in blocks {
            if start > end {
                return Err(Error::InvalidParameters(format!("block [{start}, {end}) is reversed")));
            }
            members.extend(start..end.min(horizon));
        }
        IndexSet::new(members, horizon)
    }

    /// Attach a closed form.
    pub fn with_closed_form(mut self, cf: ClosedForm) -> Self {
        self.closed_form = Some(cf);
        self
    }

    /// Horizon below which the set is known.
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Sorted members.
    pub fn members(&self) -> &[u64] {
        &self.members
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Whether the set is empty.
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Membership test.
    pub fn contains(&self, i: u64) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// `|A ∩ [0, n)|`.
    pub fn prefix_count(&self, n: u64) -> u64 {
        self.members.partition_point(|&m| m < n) as u64
    }

    /// `A + j = {a + j : a in A}`, known exactly below `horizon + j`.
    pub fn shift_add(&self, j: u64) -> Self {
        IndexSet {
            horizon: self.horizon + j,
            members: self.members.iter().map(|&m| m + j).collect(),
            closed_form: None,
        }
    }

    /// `A - j = {a - j : a in A, a >= j}` (the part that stays in `Z+`),
    /// known exactly below `horizon - j`.
    pub fn shift_sub(&self, j: u64) -> Result<Self> {
        if j >= self.horizon {
            return Err(Error::HorizonTooSmall(format!(
                "shifting down by {j} leaves nothing of horizon {}",
                self.horizon
            )));
        }
        let members =
            self.members.iter().filter(|&&m| m >= j).map(|&m| m - j).collect();
        Ok(IndexSet { horizon: self.horizon - j, members, closed_form: None })
    }

    /// `j * A = {j * a : a in A}`, known exactly below `j * horizon`.
    pub fn scale(&self, j: u64) -> Result<Self> {
        if j == 0 {
            return Err(Error::InvalidParameters("scaling an index set by 0".into()));
        }
        let horizon = self.horizon.checked_mul(j).ok_or_else(|| {
            Error::InvalidParameters(format!("scaled horizon {} * {j} overflows", self.horizon))
        })?;
        let members = self.members.iter().map(|&m| m * j).collect();
        Ok(IndexSet { horizon, members, closed_form: None })
    }

    /// Restriction to a smaller horizon.
    pub fn restrict(&self, horizon: u64) -> Result<Self> {
        if horizon > self.horizon {
            return Err(Error::InvalidParameters(format!(
                "cannot extend horizon {} to {horizon}: the tail is unknown",
                self.horizon
            )));
        }
        let cut = self.members.partition_point(|&m| m < horizon);
        Ok(IndexSet { horizon, members: self.members[..cut].to_vec(), closed_form: None })
    }

    /// `[0, horizon) \ A`.
    pub fn complement(&self) -> Self {
        let mut members = Vec::with_capacity((self.horizon as usize).saturating_sub(self.members.len()));
        let mut it = self.members.iter().peekable();
        for i in 0..self.horizon {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                members.push(i);
            }
        }
        IndexSet { horizon: self.horizon, members, closed_form: None }
    }

    /// Intersection; the result is known below the smaller horizon.
    pub fn intersect(&self, other: &Self) -> Self {
        let horizon = self.horizon.min(other.horizon);
        let mut members = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if self.members[i] < horizon {
                        members.push(self.members[i]);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        IndexSet { horizon, members, closed_form: None }
    }

    /// Union; the result is known below the smaller horizon.
    pub fn union(&self, other: &Self) -> Self {
        let horizon = self.horizon.min(other.horizon);
        let mut members: Vec<u64> = self
            .members
            .iter()
            .chain(other.members.iter())
            .copied()
            .filter(|&m| m < horizon)
            .collect();
        members.sort_unstable();
        members.dedup();
        IndexSet { horizon, members, closed_form: None }
    }

    /// Set difference `A \ B`; the result is known below the smaller horizon.
    pub fn difference(&self, other: &Self) -> Self {
        let horizon = self.horizon.min(other.horizon);
        let members = self
            .members
            .iter()
            .copied()
            .filter(|&m| m < horizon && !other.contains(m))
            .collect();
        IndexSet { horizon, members, closed_form: None }
    }

    /// Gaps of the set on the observed prefix: the first member, every
    /// difference of consecutive members, and the distance from the last
    /// member to the horizon.
    pub fn gaps(&self) -> Vec<u64> {
        let mut gaps = Vec::with_capacity(self.members.len() + 1);
        let mut prev: Option<u64> = None;
        for &m in &self.members {
            match prev {
                None => gaps.push(m),
                Some(p) => gaps.push(m - p),
            }
            prev = Some(m);
        }
        match prev {
            None => gaps.push(self.horizon),
            Some(p) => gaps.push(self.horizon - 1 - p),
        }
        gaps
    }

    /// Length of the longest run of consecutive members.
    pub fn longest_run(&self) -> u64 {
        let mut best = 0u64;
        let mut run = 0u64;
        let mut prev: Option<u64> = None;
        for &m in &self.members {
            run = match prev {
                Some(p) if m == p + 1 => run + 1,
                _ => 1,
            };
            best = best.max(run);
            prev = Some(m);
        }
        best
    }

    /// Density statistics of the observed prefix.
    pub fn density(&self, tolerance: f64) -> Result<DensityStats> {
        let counts: Vec<(u64, u64)> =
            sample_grid(self.horizon).into_iter().map(|n| (n, self.prefix_count(n))).collect();
        density_stats_from_counts(&counts, self.horizon, tolerance, self.closed_form.as_ref())
    }

    /// Membership verdict for a density/structure family at this horizon.
    pub fn family_membership(&self, family: Family, tolerance: f64) -> Result<FamilyVerdict> {
        family_membership(self, family, tolerance)
    }
}

/// The geometric sampling grid for prefix curves: `floor(horizon / 2^k)`
/// for every k, merged with a 5%-ratio geometric ladder. Bounded in size,
/// still dense enough to catch block-structured oscillation.
pub fn sample_grid(horizon: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut n = horizon;
    while n >= 1 {
        grid.push(n);
        n /= 2;
    }
    let mut g = 1f64;
    while (g as u64) < horizon {
        grid.push(g as u64);
        g = (g * 1.05).max(g + 1.0);
    }
    grid.sort_unstable();
    grid.dedup();
    grid.retain(|&n| n >= 1);
    grid
}

/// Density statistics computed from prefix counts on a sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    /// Horizon of the observation.
    pub horizon: u64,
    /// Upper density estimate (max prefix ratio over the last decade), or
    /// the closed form when one is attached.
    pub upper: f64,
    /// Lower density estimate (min prefix ratio over the last decade), or
    /// the closed form when one is attached.
    pub lower: f64,
    /// Upper estimate from the curve alone, kept alongside any closed form.
    pub empirical_upper: f64,
    /// Lower estimate from the curve alone.
    pub empirical_lower: f64,
    /// Whether the curve oscillation over the last decade is below the
    /// tolerance.
    pub converged: bool,
    /// Tolerance the convergence flag was judged at.
    pub tolerance: f64,
    /// Label of the closed form, when one overrode the estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<String>,
    /// The sampled prefix curve: `(n, count, count / n)`.
    pub curve: Vec<CurvePoint>,
}

/// One sample of a prefix curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Prefix length.
    pub n: u64,
    /// `|A ∩ [0, n)|`.
    pub count: u64,
    /// `count / n`.
    pub ratio: f64,
}

/// Build density statistics from `(n, count)` samples (sorted by `n`).
/// The estimates use only samples in the last decade `[horizon / 10,
/// horizon]`; the tolerance controls the convergence flag.
pub fn density_stats_from_counts(
    counts: &[(u64, u64)],
    horizon: u64,
    tolerance: f64,
    closed_form: Option<&ClosedForm>,
) -> Result<DensityStats> {
    if horizon < 10 {
        return Err(Error::HorizonTooSmall(format!(
            "density estimation needs a horizon of at least 10, got {horizon}"
        )));
    }
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidParameters(format!("tolerance must be positive, got {tolerance}")));
    }
    let curve: Vec<CurvePoint> = counts
        .iter()
        .filter(|&&(n, _)| n >= 1)
        .map(|&(n, count)| CurvePoint { n, count, ratio: count as f64 / n as f64 })
        .collect();
    let decade_start = horizon / 10;
    let decade: Vec<&CurvePoint> = curve.iter().filter(|p| p.n >= decade_start).collect();
    if decade.is_empty() {
        return Err(Error::HorizonTooSmall(format!(
            "no curve samples in the last decade of horizon {horizon}"
        )));
    }
    let empirical_upper = decade.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
    let empirical_lower = decade.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let converged = empirical_upper - empirical_lower <= tolerance;
    let (upper, lower, cf_label) = match closed_form {
        Some(cf) => (cf.upper, cf.lower, Some(cf.label.clone())),
        None => (empirical_upper, empirical_lower, None),
    };
    Ok(DensityStats {
        horizon,
        upper,
        lower,
        empirical_upper,
        empirical_lower,
        converged,
        tolerance,
        closed_form: cf_label,
        curve,
    })
}

/// Families of index sets used to grade tracing quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Lower density strictly above `alpha`.
    LowerAbove { alpha: f64 },
    /// Upper density strictly above `alpha`.
    UpperAbove { alpha: f64 },
    /// Density exists and equals 1.
    FullDensity,
    /// Every window of `gap + 1` consecutive integers meets the set.
    Syndetic { gap: u64 },
    /// Contains a run of at least `run` consecutive integers.
    Thick { run: u64 },
}

/// Three-valued membership at a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    /// The estimate clears the threshold by more than the margin.
    In,
    /// The estimate misses the threshold by more than the margin.
    Out,
    /// The estimate is within the margin of the threshold.
    Inconclusive,
}

/// Family membership verdict with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyVerdict {
    /// The family tested.
    pub family: Family,
    /// The verdict at this horizon.
    pub verdict: Membership,
    /// The estimate compared against the threshold (a density for the
    /// density families, a gap or run length for the structural ones).
    pub estimate: f64,
    /// The decision margin (`2 / sqrt(horizon)` for the density families).
    pub margin: f64,
    /// One-line explanation.
    pub detail: String,
}

fn family_membership(set: &IndexSet, family: Family, tolerance: f64) -> Result<FamilyVerdict> {
    let check_alpha = |alpha: f64| -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameters(format!("alpha must be in [0, 1], got {alpha}")));
        }
        Ok(())
    };
    match family {
        Family::LowerAbove { alpha } => {
            check_alpha(alpha)?;
            let stats = set.density(tolerance)?;
            Ok(threshold_verdict(family, stats.lower, alpha, stats.horizon, "lower density"))
        }
        Family::UpperAbove { alpha } => {
            check_alpha(alpha)?;
            let stats = set.density(tolerance)?;
            Ok(threshold_verdict(family, stats.upper, alpha, stats.horizon, "upper density"))
        }
        Family::FullDensity => {
            let stats = set.density(tolerance)?;
            // Density 1 means the deficit tends to 0, so judge it at the
            // final sample — the highest-resolution estimate. A decade-wide
            // minimum would be biased low for curves still improving.
            let final_ratio = stats.curve.last().map(|p| p.ratio).unwrap_or(0.0);
            let margin = density_margin(stats.horizon).max(tolerance);
            let deficit = 1.0 - final_ratio;
            let verdict = if deficit <= margin {
                Membership::In
            } else if stats.converged {
                Membership::Out
            } else {
                Membership::Inconclusive
            };
            Ok(FamilyVerdict {
                family,
                verdict,
                estimate: final_ratio,
                margin,
                detail: format!(
                    "final prefix ratio {final_ratio:.6} vs full density 1 (margin {margin:.6})"
                ),
            })
        }
        Family::Syndetic { gap } => {
            let gaps = set.gaps();
            let worst = gaps.iter().copied().max().unwrap_or(0);
            let verdict = if worst <= gap { Membership::In } else { Membership::Out };
            Ok(FamilyVerdict {
                family,
                verdict,
                estimate: worst as f64,
                margin: 0.0,
                detail: format!("largest observed gap {worst} vs bound {gap}"),
            })
        }
        Family::Thick { run } => {
            if run == 0 {
                return Err(Error::InvalidParameters("thickness needs a positive run length".into()));
            }
            let best = set.longest_run();
            let verdict = if best >= run { Membership::In } else { Membership::Out };
            Ok(FamilyVerdict {
                family,
                verdict,
                estimate: best as f64,
                margin: 0.0,
                detail: format!("longest observed run {best} vs bound {run}"),
            })
        }
    }
}

/// Decision margin for density thresholds at a horizon.
pub fn density_margin(horizon: u64) -> f64 {
    2.0 / (horizon as f64).sqrt()
}

fn threshold_verdict(
    family: Family,
    estimate: f64,
    alpha: f64,
    horizon: u64,
    what: &str,
) -> FamilyVerdict {
    let margin = density_margin(horizon);
    let verdict = if estimate > alpha + margin {
        Membership::In
    } else if estimate < alpha - margin {
        Membership::Out
    } else {
        Membership::Inconclusive
    };
    FamilyVerdict {
        family,
        verdict,
        estimate,
        margin,
        detail: format!("{what} {estimate:.6} vs threshold {alpha} (margin {margin:.6})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alternating(horizon: u64) -> IndexSet {
        IndexSet::evens(horizon)
    }

    #[test]
    fn prefix_counts_are_exact() {
        let evens = alternating(100);
        assert_eq!(evens.prefix_count(10), 5);
        assert_eq!(evens.prefix_count(11), 6);
        assert_eq!(evens.prefix_count(0), 0);
        assert_eq!(evens.prefix_count(100), 50);
    }

    #[test]
    fn shifted_intersections_commute_with_shifting() {
        // Intersection of shifted sets equals the shifted intersection.
        let a = IndexSet::arithmetic(3, 0, 500).unwrap();
        let b = IndexSet::arithmetic(4, 1, 500).unwrap();
        let c = IndexSet::squares(500);
        for k in [0u64, 1, 7, 50] {
            let lhs = a.shift_add(k).intersect(&b.shift_add(k)).intersect(&c.shift_add(k));
            let rhs = a.intersect(&b).intersect(&c).shift_add(k);
            assert_eq!(lhs.members(), rhs.members(), "shift by {k}");
            assert_eq!(lhs.horizon(), rhs.horizon());
        }
    }

    #[test]
    fn inclusion_exclusion_holds_at_every_prefix() {
        let a = IndexSet::arithmetic(2, 0, 300).unwrap();
        let b = IndexSet::arithmetic(3, 2, 300).unwrap();
        let inter = a.intersect(&b);
        let uni = a.union(&b);
        for n in 0..=300 {
            assert_eq!(
                inter.prefix_count(n),
                a.prefix_count(n) + b.prefix_count(n) - uni.prefix_count(n),
                "inclusion-exclusion fails at prefix {n}"
            );
        }
    }

    #[test]
    fn downward_shift_stays_in_nonnegatives() {
        let a = IndexSet::new(vec![0, 2, 5, 9], 12).unwrap();
        let shifted = a.shift_sub(3).unwrap();
        assert_eq!(shifted.members(), &[2, 6]);
        assert_eq!(shifted.horizon(), 9);
        assert!(a.shift_sub(12).is_err());
    }

    #[test]
    fn scaling_scales_members_and_horizon() {
        let a = IndexSet::new(vec![0, 1, 4], 5).unwrap();
        let scaled = a.scale(3).unwrap();
        assert_eq!(scaled.members(), &[0, 3, 12]);
        assert_eq!(scaled.horizon(), 15);
    }

    #[test]
    fn complement_round_trips() {
        let a = IndexSet::squares(200);
        let back = a.complement().complement();
        assert_eq!(back.members(), a.members());
    }

    #[test]
    fn evens_have_density_half() {
        let stats = alternating(10_000).density(0.01).unwrap();
        assert!((stats.empirical_upper - 0.5).abs() <= 0.01, "upper {}", stats.empirical_upper);
        assert!((stats.empirical_lower - 0.5).abs() <= 0.01, "lower {}", stats.empirical_lower);
        assert!(stats.converged);
        // The closed form (step 2) is authoritative and exact.
        assert_eq!(stats.upper, 0.5);
        assert_eq!(stats.lower, 0.5);
    }

    #[test]
    fn squares_have_density_zero() {
        let stats = IndexSet::squares(10_000).density(0.01).unwrap();
        assert!(stats.empirical_upper <= 0.04, "upper {}", stats.empirical_upper);
        assert_eq!(stats.upper, 0.0, "closed form should report exactly 0");
    }

    #[test]
    fn closed_form_agrees_with_the_curve_at_every_sample() {
        // For sets whose density exists, every curve sample is within
        // 2/sqrt(n) of the closed form (the margin at that sample's own
        // resolution).
        for set in [
            IndexSet::evens(40_000),
            IndexSet::arithmetic(5, 2, 40_000).unwrap(),
            IndexSet::squares(40_000),
            IndexSet::full(40_000),
        ] {
            let stats = set.density(0.01).unwrap();
            let cf = stats.closed_form.clone().unwrap();
            assert_eq!(stats.upper, stats.lower, "{cf}: closed form should be a point value");
            for p in &stats.curve {
                assert!(
                    (p.ratio - stats.upper).abs() <= density_margin(p.n),
                    "{cf}: sample at n={} has ratio {} vs closed form {}",
                    p.n,
                    p.ratio,
                    stats.upper
                );
            }
        }
    }

    #[test]
    fn density_families_grade_the_evens() {
        let evens = alternating(10_000);
        let in_04 = evens.family_membership(Family::UpperAbove { alpha: 0.4 }, 0.01).unwrap();
        assert_eq!(in_04.verdict, Membership::In, "{}", in_04.detail);
        let out_06 = evens.family_membership(Family::UpperAbove { alpha: 0.6 }, 0.01).unwrap();
        assert_eq!(out_06.verdict, Membership::Out, "{}", out_06.detail);
        let boundary = evens.family_membership(Family::UpperAbove { alpha: 0.5 }, 0.01).unwrap();
        assert_eq!(boundary.verdict, Membership::Inconclusive, "{}", boundary.detail);
        let lower_in = evens.family_membership(Family::LowerAbove { alpha: 0.2 }, 0.01).unwrap();
        assert_eq!(lower_in.verdict, Membership::In, "{}", lower_in.detail);
    }

    #[test]
    fn full_density_family_accepts_cofinite_sets_only() {
        let full = IndexSet::full(10_000);
        assert_eq!(
            full.family_membership(Family::FullDensity, 0.01).unwrap().verdict,
            Membership::In
        );
        let minus_squares = full.difference(&IndexSet::squares(10_000));
        assert_eq!(
            minus_squares.family_membership(Family::FullDensity, 0.01).unwrap().verdict,
            Membership::In,
            "density-zero holes keep full density"
        );
        let evens = alternating(10_000);
        assert_eq!(
            evens.family_membership(Family::FullDensity, 0.01).unwrap().verdict,
            Membership::Out
        );
    }

    #[test]
    fn syndetic_and_thick_read_gaps_and_runs() {
        let evens = alternating(1000);
        assert_eq!(
            evens.family_membership(Family::Syndetic { gap: 2 }, 0.01).unwrap().verdict,
            Membership::In
        );
        assert_eq!(
            evens.family_membership(Family::Syndetic { gap: 1 }, 0.01).unwrap().verdict,
            Membership::Out
        );
        assert_eq!(
            evens.family_membership(Family::Thick { run: 2 }, 0.01).unwrap().verdict,
            Membership::Out,
            "no two consecutive evens"
        );
        let blocks = IndexSet::from_blocks(&[(0, 3), (10, 20)], 1000).unwrap();
        assert_eq!(
            blocks.family_membership(Family::Thick { run: 10 }, 0.01).unwrap().verdict,
            Membership::In
        );
        let squares = IndexSet::squares(1000);
        assert_eq!(
            squares.family_membership(Family::Syndetic { gap: 10 }, 0.01).unwrap().verdict,
            Membership::Out,
            "square gaps grow without bound"
        );
    }

    #[test]
    fn intersection_density_law_on_prefix_level() {
        // Lower densities are superadditive minus 1 under intersection:
        // at every prefix, |A∩B∩[0,n)| >= |A∩[0,n)| + |B∩[0,n)| - n.
        let a = IndexSet::arithmetic(3, 0, 30_000).unwrap(); // lower density 1/3
        let b = IndexSet::from_blocks(
            &(0..150).map(|k| (200 * k, 200 * k + 160)).collect::<Vec<_>>(),
            30_000,
        )
        .unwrap(); // density 4/5
        for n in (1..=30_000).step_by(97) {
            let lhs = a.intersect(&b).prefix_count(n) as i64;
            let rhs = a.prefix_count(n) as i64 + b.prefix_count(n) as i64 - n as i64;
            assert!(lhs >= rhs, "prefix {n}: {lhs} < {rhs}");
        }
        // 1/3 + 4/5 - 1 = 2/15; the estimated lower density must clear
        // a threshold safely below that.
        let inter = a.intersect(&b);
        let verdict =
            inter.family_membership(Family::LowerAbove { alpha: 2.0 / 15.0 - 0.05 }, 0.01).unwrap();
        assert_eq!(verdict.verdict, Membership::In, "{}", verdict.detail);
    }

    #[test]
    fn exponential_blocks_separate_upper_and_lower_density() {
        // Blocks [0,2), [6,70) of an exponential cut sequence: at horizon
        // 128 the last decade straddles the 64-long block, so the prefix
        // ratio swings widely.
        let set = IndexSet::from_blocks(&[(0, 2), (6, 70)], 128).unwrap();
        let stats = set.density(0.01).unwrap();
        assert!(stats.empirical_upper >= 0.85, "upper {}", stats.empirical_upper);
        assert!(stats.empirical_lower <= 0.62, "lower {}", stats.empirical_lower);
        assert!(!stats.converged);
    }

    #[test]
    fn density_needs_a_decade_of_data() {
        let tiny = IndexSet::new(vec![0, 1], 5).unwrap();
        assert!(matches!(tiny.density(0.01), Err(Error::HorizonTooSmall(_))));
    }

    #[test]
    fn sample_grid_is_sorted_dedup_and_hits_the_horizon() {
        for horizon in [10u64, 100, 1000, 100_000] {
            let grid = sample_grid(horizon);
            assert!(grid.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(*grid.last().unwrap(), horizon);
            assert!(grid.len() < 400, "grid too large: {}", grid.len());
            let decade = grid.iter().filter(|&&n| n >= horizon / 10).count();
            assert!(decade >= 3, "only {decade} samples in the last decade of {horizon}");
        }
    }

    #[test]
    fn index_set_serde_round_trips() {
        let set = IndexSet::arithmetic(3, 1, 50).unwrap();
        let js = serde_json::to_string(&set).unwrap();
        let back: IndexSet = serde_json::from_str(&js).unwrap();
        assert_eq!(back, set);
    }
}
