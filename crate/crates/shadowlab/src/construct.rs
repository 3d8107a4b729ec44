//! Generators for the pseudo-orbits the theory feeds on.
//!
//! Each generator is a pure function of its parameters (randomness always
//! flows through a recorded seed), and each output re-classifies — via the
//! pseudo-orbit module — as the input class the surrounding argument needs:
//!
//! * [`spliced_orbit`] — true-orbit segments glued at seeded random
//!   restarts; fixed segment lengths give small window means, growing
//!   segments give vanishing join density;
//! * [`two_state_sequence`] — arbitrary sequences over the two-point
//!   identity system, the smallest source of on-average-traceable but
//!   pointwise-untraceable inputs;
//! * [`ergodic_to_average`] — surgery replacing the sparse bad steps of an
//!   ergodic pseudo-orbit with true-orbit patches, yielding a windowed
//!   (average) pseudo-orbit;
//! * [`concatenate_blocks`] — glues a family of pseudo-orbits along a
//!   doubling cascade of block lengths so the join density dies off and
//!   the running mean step error tends to zero;
//! * [`interleave_forward`] / [`interleave_backward`] — two orbits woven
//!   on alternating blocks with density-zero cut points, forward on both
//!   sides or forward/backward via a preimage selector;
//! * [`rotation_adversary`] — the restart pseudo-orbit on a circle
//!   rotation whose block boundaries are return times to a small ball,
//!   engineered so no single orbit can trace more than about half of it.
//!
//! Block length bookkeeping lives in [`BlockSchedule`]; every construction
//! that uses one records its first cut points in the orbit's provenance.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::IndexSet;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::pseudo_orbit::{Provenance, PseudoOrbit, PseudoOrbitClass, Verdict};
use crate::system::{PreimageSelector, System};

/// Hard cap on generated blocks, protecting the slow-growing rules from
/// absurd horizons.
const MAX_BLOCKS: usize = 1_000_000;

/// `2^e`, pinned at `u64::MAX` once it no longer fits.
fn pow2_saturating(e: u64) -> u64 {
    if e >= 64 {
        u64::MAX
    } else {
        1u64.checked_shl(e as u32).unwrap_or(u64::MAX)
    }
}

/// The block-length growth rules used by the constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum ScheduleRule {
    /// `m_1 = 2^seed_exponent`, then `m_(n+1) = 2^(M_n)` where
    /// `M_n = (m_1 + 1) + ... + (m_n + 1)` — each block holds `m_n + 1`
    /// entries. Used by [`concatenate_blocks`]; the cuts are the `M_n`.
    DoublingCascade {
        /// Exponent of the first block length.
        seed_exponent: u32,
    },
    /// Cut points `L_1 = 2`, `L_n = L_(n-1) + n`: 2, 4, 7, 11, 16, …
    /// Alternating blocks get density 1/2 each.
    ArithmeticCuts,
    /// Block lengths `l_1 = 2`, `l_n = 2^(l_1 + ... + l_(n-1))`; cut
    /// points are the prefix sums 2, 6, 70, … Each block dwarfs the whole
    /// past, so both sides of an alternation get upper density 1 and
    /// lower density 0.
    ExponentialCuts,
    /// Nominal cut points `m_n = 2 n (n+1) unit`. The adversary adjusts
    /// each actual cut into `[m_n, m_n + unit]` to hit a return time.
    QuadraticSpans {
        /// The syndeticity bound the spans are scaled by.
        unit: u64,
    },
}

impl ScheduleRule {
    fn name(self) -> &'static str {
        match self {
            ScheduleRule::DoublingCascade { .. } => "doubling-cascade",
            ScheduleRule::ArithmeticCuts => "arithmetic-cuts",
            ScheduleRule::ExponentialCuts => "exponential-cuts",
            ScheduleRule::QuadraticSpans { .. } => "quadratic-spans",
        }
    }
}

/// A generated block schedule: the rule's named terms and the cut points
/// partitioning `[0, horizon)` into blocks.
///
/// `terms` holds the sequence the rule is stated in (`m_n` for the cascade
/// and the spans, block lengths for the cut rules); `cuts` always holds
/// the strictly increasing block boundaries. Values saturate at
/// `u64::MAX` when a term outgrows 64 bits; generation stops at the first
/// cut at or past the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSchedule {
    /// The generating rule.
    pub rule: ScheduleRule,
    /// The rule's own sequence (see type docs).
    pub terms: Vec<u64>,
    /// Strictly increasing cut points; block `n` is `[cuts[n-1], cuts[n])`
    /// with `cuts[-1] = 0`.
    pub cuts: Vec<u64>,
}

impl BlockSchedule {
    /// Generate a schedule covering `[0, horizon)`.
    pub fn generate(rule: ScheduleRule, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameters("schedule horizon must be positive".into()));
        }
        let mut terms = Vec::new();
        let mut cuts: Vec<u64> = Vec::new();
        match rule {
            ScheduleRule::DoublingCascade { seed_exponent } => {
                if seed_exponent == 0 {
                    return Err(Error::InvalidParameters(
                        "the cascade seed exponent must be positive".into(),
                    ));
                }
                let mut m = pow2_saturating(seed_exponent as u64);
                let mut total = 0u64;
                loop {
                    terms.push(m);
                    total = total.saturating_add(m.saturating_add(1));
                    cuts.push(total);
                    if total >= horizon || total == u64::MAX || terms.len() >= MAX_BLOCKS {
                        break;
                    }
                    m = pow2_saturating(total);
                }
            }
            ScheduleRule::ArithmeticCuts => {
                let mut cut = 2u64;
                let mut n = 1u64;
                loop {
                    let prev = cuts.last().copied().unwrap_or(0);
                    terms.push(cut - prev);
                    cuts.push(cut);
                    if cut >= horizon || terms.len() >= MAX_BLOCKS {
                        break;
                    }
                    n += 1;
                    cut = cut.saturating_add(n);
                }
            }
            ScheduleRule::ExponentialCuts => {
                let mut len = 2u64;
                let mut total = 0u64;
                loop {
                    terms.push(len);
                    total = total.saturating_add(len);
                    cuts.push(total);
                    if total >= horizon || total == u64::MAX || terms.len() >= MAX_BLOCKS {
                        break;
                    }
                    len = pow2_saturating(total);
                }
            }
            ScheduleRule::QuadraticSpans { unit } => {
                if unit == 0 {
                    return Err(Error::InvalidParameters("the span unit must be positive".into()));
                }
                let mut n = 1u64;
                loop {
                    let m = 2u64
                        .saturating_mul(n)
                        .saturating_mul(n.saturating_add(1))
                        .saturating_mul(unit);
                    terms.push(m);
                    cuts.push(m);
                    if m >= horizon || m == u64::MAX || terms.len() >= MAX_BLOCKS {
                        break;
                    }
                    n += 1;
                }
            }
        }
        if cuts.last().copied().unwrap_or(0) < horizon {
            return Err(Error::InvalidParameters(format!(
                "rule {} cannot reach horizon {horizon} within {MAX_BLOCKS} blocks",
                rule.name()
            )));
        }
        Ok(BlockSchedule { rule, terms, cuts })
    }

    /// Index of the block containing position `i` (blocks are
    /// `[cuts[n-1], cuts[n])`).
    pub fn block_index(&self, i: u64) -> usize {
        self.cuts.partition_point(|&c| c <= i)
    }

    /// The first `k` cut points, for provenance records.
    pub fn cut_head(&self, k: usize) -> Vec<u64> {
        self.cuts.iter().take(k).copied().collect()
    }
}

/// The index sets of the even-indexed and odd-indexed blocks of a
/// schedule, clipped to `[0, horizon)`. Block 0 (starting at index 0)
/// lands in the first set.
pub fn alternating_blocks(schedule: &BlockSchedule, horizon: u64) -> (IndexSet, IndexSet) {
    let mut even = Vec::new();
    let mut odd = Vec::new();
    let mut start = 0u64;
    for (b, &cut) in schedule.cuts.iter().enumerate() {
        let end = cut.min(horizon);
        if start >= end {
            break;
        }
        if b % 2 == 0 {
            even.push((start, end));
        } else {
            odd.push((start, end));
        }
        start = end;
    }
    let even = IndexSet::from_blocks(&even, horizon).expect("clipped blocks are in range");
    let odd = IndexSet::from_blocks(&odd, horizon).expect("clipped blocks are in range");
    (even, odd)
}

/// How long the true-orbit segments of a splice run before restarting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "segments", rename_all = "kebab-case")]
pub enum SegmentRule {
    /// Every segment has the same length; restarts have density `1/len`.
    Fixed {
        /// Segment length, at least 2.
        len: u64,
    },
    /// Segment `k` has length `k`; restarts sit at the triangular numbers
    /// and their density vanishes.
    Growing,
    /// Segment `k` has length `2k - 1`; restarts sit at the perfect
    /// squares.
    Squares,
}

fn segment_length(rule: SegmentRule, k: u64) -> u64 {
    match rule {
        SegmentRule::Fixed { len } => len,
        SegmentRule::Growing => k,
        SegmentRule::Squares => 2 * k - 1,
    }
}

/// A random point able to run `len` forward steps. For shifts this draws
/// a fresh word of `len + 1` symbols (the system's default word length is
/// for standalone points, not for long segments).
fn random_segment_start<R: Rng + ?Sized>(system: &System, rng: &mut R, len: u64) -> Result<Point> {
    if let System::Shift { alphabet, .. } = system {
        let symbols = (0..len + 1).map(|_| rng.gen_range(0..*alphabet)).collect();
        return Point::word(symbols);
    }
    Ok(system.random_point(rng))
}

/// True-orbit segments glued at seeded random restart points.
pub fn spliced_orbit(
    system: Arc<System>,
    rule: SegmentRule,
    horizon: u64,
    seed: u64,
) -> Result<PseudoOrbit> {
    if horizon < 2 {
        return Err(Error::HorizonTooSmall(format!(
            "a splice needs a horizon of at least 2, got {horizon}"
        )));
    }
    if let SegmentRule::Fixed { len } = rule {
        if len < 2 {
            return Err(Error::InvalidParameters(format!(
                "fixed splice segments need length at least 2, got {len}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(horizon as usize);
    let mut k = 1u64;
    while (points.len() as u64) < horizon {
        let len = segment_length(rule, k).min(horizon - points.len() as u64);
        let start = random_segment_start(&system, &mut rng, len)?;
        points.extend(system.orbit_prefix(&start, len as usize)?);
        k += 1;
    }
    let mut provenance = Provenance::labeled("spliced");
    provenance.params = serde_json::to_value(rule)?;
    provenance.seed = Some(seed);
    PseudoOrbit::new(system, points, provenance)
}

/// Patterns for sequences over the two-point identity system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case")]
pub enum TwoStatePattern {
    /// `0, 1, 0, 1, …` — every step errs; both constants match exactly
    /// half the time.
    Alternating,
    /// The fixed point `state, state, …`.
    Constant {
        /// Which of the two states to repeat.
        state: usize,
    },
    /// Independent coin flips with probability `p` of state 1.
    Random {
        /// Probability of state 1 at each index.
        p: f64,
    },
    /// Alternating runs of 0s and 1s with run lengths from a schedule
    /// rule.
    Blocks {
        /// Cut-point rule for the runs.
        rule: ScheduleRule,
    },
}

/// A sequence over the two-point identity system. Any such sequence is a
/// pseudo-orbit; the interesting question is who traces it on average.
pub fn two_state_sequence(
    pattern: TwoStatePattern,
    horizon: u64,
    seed: u64,
) -> Result<PseudoOrbit> {
    if horizon < 2 {
        return Err(Error::HorizonTooSmall(format!(
            "a two-state sequence needs a horizon of at least 2, got {horizon}"
        )));
    }
    let states: Vec<usize> = match pattern {
        TwoStatePattern::Alternating => (0..horizon).map(|i| (i % 2) as usize).collect(),
        TwoStatePattern::Constant { state } => {
            if state > 1 {
                return Err(Error::InvalidParameters(format!(
                    "the two-point system has states 0 and 1, got {state}"
                )));
            }
            vec![state; horizon as usize]
        }
        TwoStatePattern::Random { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameters(format!(
                    "state probability must lie in [0, 1], got {p}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..horizon).map(|_| rng.gen_bool(p) as usize).collect()
        }
        TwoStatePattern::Blocks { rule } => {
            let schedule = BlockSchedule::generate(rule, horizon)?;
            (0..horizon).map(|i| schedule.block_index(i) % 2).collect()
        }
    };
    let mut provenance = Provenance::labeled("two-state");
    provenance.params = serde_json::to_value(pattern)?;
    if matches!(pattern, TwoStatePattern::Random { .. }) {
        provenance.seed = Some(seed);
    }
    PseudoOrbit::new(
        Arc::new(System::two_point_identity()),
        states.into_iter().map(Point::State).collect(),
        provenance,
    )
}

/// Result of the ergodic-to-average surgery: the patched pseudo-orbit and
/// the exact bookkeeping of where it may differ from the input.
#[derive(Debug, Clone)]
pub struct AverageConversion {
    /// The patched pseudo-orbit.
    pub output: PseudoOrbit,
    /// Patch length `N`: the smallest integer with `8 * diam / N < delta`,
    /// plus one.
    pub patch_len: u64,
    /// The patch start indices (greedily chosen `N`-separated mismatch
    /// steps).
    pub patch_starts: IndexSet,
    /// The union of patched index ranges — everywhere the output may
    /// differ from the input. Its density inherits the mismatch set's
    /// density zero.
    pub patched: IndexSet,
}

/// Replace the sparse bad steps of an ergodic pseudo-orbit with
/// true-orbit patches of length `N`, where `N` is large enough that a
/// window meeting a patch boundary still averages below `delta`.
///
/// The patch starts are the mismatch steps (error at least `delta / 2`)
/// thinned greedily to spacing at least `N`; each patch `[k, k + N)`
/// replays the true orbit of the input's point at `k`. Every mismatch
/// step lands inside some patch, the patched ranges are pairwise
/// disjoint, and the output's windowed mean step error drops below
/// `delta` at window length `N`.
pub fn ergodic_to_average(
    orbit: &PseudoOrbit,
    delta: f64,
    tolerance: f64,
) -> Result<AverageConversion> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidParameters(format!("delta must be positive, got {delta}")));
    }
    let report = orbit.classify(PseudoOrbitClass::Ergodic, delta / 2.0, tolerance)?;
    if report.verdict != Verdict::Pass {
        return Err(Error::NotErgodicInput(format!(
            "the input must classify as ergodic at threshold {}: {}",
            delta / 2.0,
            report.detail
        )));
    }
    let system = orbit.system().clone();
    let n_patch = (8.0 * system.diameter() / delta).ceil() as u64 + 1;
    let mismatches = orbit.mismatch_indices(delta / 2.0)?;
    let mut starts: Vec<u64> = Vec::new();
    for &j in mismatches.members() {
        match starts.last() {
            Some(&k) if j < k + n_patch => {}
            _ => starts.push(j),
        }
    }
    let mut points = orbit.points().to_vec();
    let len = points.len() as u64;
    let mut patched: Vec<u64> = Vec::new();
    for &k in &starts {
        let span = n_patch.min(len - k);
        let patch = system.orbit_prefix(&points[k as usize], span as usize)?;
        for (offset, p) in patch.into_iter().enumerate() {
            points[k as usize + offset] = p;
        }
        patched.extend(k..k + span);
    }
    let mut provenance = Provenance::labeled("ergodic-to-average");
    provenance.params = serde_json::json!({
        "delta": delta,
        "patch_len": n_patch,
        "from": orbit.provenance().label,
    });
    provenance.seed = orbit.provenance().seed;
    provenance.schedule_head = starts.iter().take(20).copied().collect();
    let output = PseudoOrbit::new(system, points, provenance)?;
    Ok(AverageConversion {
        output,
        patch_len: n_patch,
        patch_starts: IndexSet::from_sorted_unchecked(starts, orbit.steps()),
        patched: IndexSet::from_sorted_unchecked(patched, len),
    })
}

/// Concatenate a family of pseudo-orbits along a doubling cascade: block
/// `k` contributes the first `m_k + 1` points of `family[k]`. The joins
/// are the only new step errors and their density collapses, so the
/// output's running mean step error tends to zero when later blocks are
/// (ever better) pseudo-orbits.
pub fn concatenate_blocks(
    family: &[PseudoOrbit],
    seed_exponent: u32,
    horizon: u64,
) -> Result<PseudoOrbit> {
    if family.is_empty() {
        return Err(Error::InvalidParameters("the family must not be empty".into()));
    }
    let entry = family[0].system().entry();
    for (k, member) in family.iter().enumerate().skip(1) {
        if member.system().entry() != entry {
            return Err(Error::InvalidParameters(format!(
                "family member {k} lives on {} but member 0 lives on {}",
                member.system().name(),
                family[0].system().name()
            )));
        }
    }
    let schedule =
        BlockSchedule::generate(ScheduleRule::DoublingCascade { seed_exponent }, horizon)?;
    let mut points: Vec<Point> = Vec::with_capacity(horizon as usize);
    let mut start = 0u64;
    for (k, &cut) in schedule.cuts.iter().enumerate() {
        let end = cut.min(horizon);
        if start >= end {
            break;
        }
        let span = (end - start) as usize;
        let member = family.get(k).ok_or_else(|| {
            Error::BlocksTooShort(format!(
                "the schedule needs {} blocks before horizon {horizon} but the family has {}",
                k + 1,
                family.len()
            ))
        })?;
        if member.len() < span {
            return Err(Error::BlocksTooShort(format!(
                "block {k} needs {span} points but family member {k} has {}",
                member.len()
            )));
        }
        points.extend_from_slice(&member.points()[..span]);
        start = end;
    }
    let mut provenance = Provenance::labeled("concatenate-blocks");
    provenance.params = serde_json::json!({
        "seed_exponent": seed_exponent,
        "family": family.iter().map(|m| m.provenance().label.clone()).collect::<Vec<_>>(),
    });
    provenance.schedule_head = schedule.cut_head(20);
    PseudoOrbit::new(family[0].system().clone(), points, provenance)
}

/// Weave the true orbits of `u` and `v` on alternating schedule blocks:
/// position `i` holds `f^i(u)` on even blocks and `f^i(v)` on odd blocks,
/// so the only steps that can err are the cut points, a density-zero set.
pub fn interleave_forward(
    system: Arc<System>,
    u: &Point,
    v: &Point,
    rule: ScheduleRule,
    horizon: u64,
) -> Result<PseudoOrbit> {
    if !matches!(rule, ScheduleRule::ArithmeticCuts | ScheduleRule::ExponentialCuts) {
        return Err(Error::InvalidParameters(format!(
            "interleaving needs a cut rule, got {}",
            rule.name()
        )));
    }
    if horizon < 2 {
        return Err(Error::HorizonTooSmall(format!(
            "interleaving needs a horizon of at least 2, got {horizon}"
        )));
    }
    let schedule = BlockSchedule::generate(rule, horizon)?;
    let orbit_u = system.orbit_prefix(u, horizon as usize)?;
    let orbit_v = system.orbit_prefix(v, horizon as usize)?;
    let (even, _) = alternating_blocks(&schedule, horizon);
    let points: Vec<Point> = (0..horizon)
        .map(|i| {
            if even.contains(i) {
                orbit_u[i as usize].clone()
            } else {
                orbit_v[i as usize].clone()
            }
        })
        .collect();
    let mut provenance = Provenance::labeled("interleave-forward");
    provenance.params = serde_json::json!({
        "rule": rule,
        "u": u.describe(),
        "v": v.describe(),
    });
    provenance.schedule_head = schedule.cut_head(20);
    PseudoOrbit::new(system, points, provenance)
}

/// Weave a forward orbit of `u` with a backward orbit of `v`: even blocks
/// restart the forward orbit of `u` at their first index, odd blocks run
/// a shared backward orbit of `v` timed to arrive one step short of `v`
/// at the block's end (so stepping off the block lands exactly on `v`).
/// Cut points follow the arithmetic rule, so off-cut steps are exact.
pub fn interleave_backward(
    system: Arc<System>,
    u: &Point,
    v: &Point,
    selector: PreimageSelector,
    horizon: u64,
) -> Result<PseudoOrbit> {
    if horizon < 2 {
        return Err(Error::HorizonTooSmall(format!(
            "interleaving needs a horizon of at least 2, got {horizon}"
        )));
    }
    let schedule = BlockSchedule::generate(ScheduleRule::ArithmeticCuts, horizon)?;
    // Deepest backward index needed: an odd block [a, b) holds
    // v_(i - b) for i in [a, b), i.e. backward depths b - a, ..., 1.
    let mut max_depth = 0u64;
    let mut start = 0u64;
    for (b, &cut) in schedule.cuts.iter().enumerate() {
        if start >= horizon {
            break;
        }
        if b % 2 == 1 {
            max_depth = max_depth.max(cut - start);
        }
        start = cut;
    }
    // backward[j] = v_(j - max_depth), so v_(-k) = backward[max_depth - k].
    let backward = if max_depth > 0 {
        system.backward_orbit(v, max_depth as usize + 1, selector)?
    } else {
        vec![v.clone()]
    };
    let mut points: Vec<Point> = Vec::with_capacity(horizon as usize);
    let mut start = 0u64;
    for (b, &cut) in schedule.cuts.iter().enumerate() {
        let end = cut.min(horizon);
        if start >= end {
            break;
        }
        if b % 2 == 0 {
            points.extend(system.orbit_prefix(u, (end - start) as usize)?);
        } else {
            for i in start..end {
                let idx = (max_depth + i) - cut;
                points.push(backward[idx as usize].clone());
            }
        }
        start = end;
    }
    let mut provenance = Provenance::labeled("interleave-backward");
    provenance.params = serde_json::json!({
        "u": u.describe(),
        "v": v.describe(),
    });
    provenance.schedule_head = schedule.cut_head(20);
    PseudoOrbit::new(system, points, provenance)
}

/// The rotation adversary: a restart pseudo-orbit with its exact
/// bookkeeping.
#[derive(Debug, Clone)]
pub struct RotationAdversary {
    /// The pseudo-orbit (every block replays the orbit of `y` from
    /// scratch).
    pub orbit: PseudoOrbit,
    /// The adjusted schedule: `cuts` are the actual block boundaries
    /// `M_n`, `terms` the nominal spans `m_n`.
    pub schedule: BlockSchedule,
    /// Distance between the two reference points.
    pub xi: f64,
    /// Ball radius `xi / 4` used for the return condition.
    pub delta: f64,
    /// Syndeticity bound `K` discovered by the orbit scan.
    pub syndetic_bound: u64,
    /// Realized block lengths `M_n - M_(n-1)`; each is a return time of
    /// `y` into `B(y', delta)`, and they never decrease.
    pub return_times: Vec<u64>,
}

/// Build the adversary pseudo-orbit for a circle rotation: every block
/// restarts the orbit of `y`, and each block boundary `M_n` is placed on
/// a return time (`g^(M_n - M_(n-1))(y)` lands in `B(y', delta)` with
/// `delta = d(y, y') / 4`) inside the span window `[m_n, m_n + K]`,
/// `m_n = 2 n (n+1) K`. A block that matches a candidate's orbit well
/// forces the next block to miss it, so no candidate traces more than
/// about half the indices — the blocks' growth makes the halves exact in
/// the limit.
pub fn rotation_adversary(
    system: Arc<System>,
    y: &Point,
    y_prime: &Point,
    horizon: u64,
) -> Result<RotationAdversary> {
    if !matches!(system.as_ref(), System::Rotation { .. }) {
        return Err(Error::InvalidParameters(format!(
            "the adversary needs a circle rotation, got {}",
            system.name()
        )));
    }
    if horizon < 10 {
        return Err(Error::HorizonTooSmall(format!(
            "the adversary needs a horizon of at least 10, got {horizon}"
        )));
    }
    let xi = system.metric(y, y_prime)?;
    if xi <= 0.0 {
        return Err(Error::InvalidParameters(
            "the two reference points must be distinct".into(),
        ));
    }
    if horizon > ADVERSARY_HORIZON_CAP {
        return Err(Error::InvalidParameters(format!(
            "the adversary caches about three horizons of orbit points; \
             horizon {horizon} exceeds the cap {ADVERSARY_HORIZON_CAP}"
        )));
    }
    let delta = xi / 4.0;

    // One pass over the orbit of y finds the first return into
    // B(y', delta) and the largest gap between consecutive returns; the
    // gap bound is what makes every later window search succeed.
    let mut walker = y.clone();
    let mut first = 0u64;
    let mut max_gap = 0u64;
    let mut prev = 0u64;
    let mut j = 0u64;
    loop {
        j += 1;
        if first == 0 && j > FIRST_RETURN_LIMIT {
            return Err(Error::ReturnTimeNotFound(format!(
                "the orbit of {} stays {delta:.6}-clear of {} for {FIRST_RETURN_LIMIT} steps",
                y.describe(),
                y_prime.describe()
            )));
        }
        walker = system.step_unchecked(&walker)?;
        if system.distance(&walker, y_prime) < delta {
            if first == 0 {
                first = j;
            }
            max_gap = max_gap.max(j - prev);
            prev = j;
        }
        if first != 0 && j >= (64 * first).clamp(4096, ADVERSARY_HORIZON_CAP) {
            break;
        }
    }
    let k = max_gap.max(4);

    // Block n spans [M_(n-1), M_n); its length is the first return time
    // in the window (m_n - M_(n-1), m_n - M_(n-1) + k], which the gap
    // bound keeps nonempty. One growing orbit cache of y serves the
    // window probes and the emitted blocks alike.
    let mut cache: Vec<Point> = vec![y.clone()];
    let mut terms = Vec::new();
    let mut cuts = Vec::new();
    let mut return_times = Vec::new();
    let mut points: Vec<Point> = Vec::with_capacity(horizon as usize);
    let mut base = 0u64;
    let mut n = 1u64;
    while base < horizon {
        let m = 2 * n * (n + 1) * k;
        let wstart = m - base;
        extend_orbit(&system, &mut cache, (wstart + k) as usize + 1)?;
        let mut found = None;
        for len in wstart + 1..=wstart + k {
            if system.distance(&cache[len as usize], y_prime) < delta {
                found = Some(len);
                break;
            }
        }
        let len = found.ok_or_else(|| {
            Error::ReturnTimeNotFound(format!(
                "no return time in ({wstart}, {}] for block {n}; \
                 the scanned gap bound {k} was not syndetic after all",
                wstart + k
            ))
        })?;
        let end = (base + len).min(horizon);
        points.extend_from_slice(&cache[..(end - base) as usize]);
        terms.push(m);
        cuts.push(base + len);
        return_times.push(len);
        base += len;
        n += 1;
    }
    let schedule = BlockSchedule { rule: ScheduleRule::QuadraticSpans { unit: k }, terms, cuts };
    let mut provenance = Provenance::labeled("rotation-adversary");
    provenance.params = serde_json::json!({
        "y": y.describe(),
        "y_prime": y_prime.describe(),
        "xi": xi,
        "delta": delta,
        "syndetic_bound": k,
    });
    provenance.schedule_head = schedule.cut_head(20);
    let orbit = PseudoOrbit::new(system, points, provenance)?;
    Ok(RotationAdversary { orbit, schedule, xi, delta, syndetic_bound: k, return_times })
}

/// Steps to scan for a first return before giving up.
const FIRST_RETURN_LIMIT: u64 = 1 << 16;

/// Horizon cap for [`rotation_adversary`], bounding its orbit cache.
const ADVERSARY_HORIZON_CAP: u64 = 1 << 20;

/// Extend `cache` — the orbit of its first entry — to at least `len`
/// points.
fn extend_orbit(system: &System, cache: &mut Vec<Point>, len: usize) -> Result<()> {
    while cache.len() < len {
        let next = system.step_unchecked(cache.last().expect("orbit caches start nonempty"))?;
        cache.push(next);
    }
    Ok(())
}
