//! Finite-horizon verifiers for tracing properties.
//!
//! Everything here reports *at-horizon* evidence, never truth about the
//! limit: a `supports` verdict means some explicit candidate point traces
//! the input within the stated thresholds, a `refutes-at-horizon` verdict
//! means no candidate in the searched pool comes close, and anything in
//! between stays `inconclusive`. Every report records the candidate that
//! scored best so the number can be recomputed independently.
//!
//! The module also carries the combinatorial side of tracing: chain graphs
//! over finite nets (strong connectivity and cycle gcd), transfer-time and
//! sensitivity-time sets, Bowen distances along index sets, mistake-budget
//! balls, an almost-specification checker, and the cycle decomposition of
//! finite maps.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Family, IndexSet, Membership};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::pseudo_orbit::{
    match_profile, MeanCurvePoint, Provenance, PseudoOrbit, PseudoOrbitClass, Verdict,
};
use crate::system::System;

/// Cap on candidates fed to the pairwise sensitivity scan; beyond this the
/// ball members are subsampled on an even stride.
const SENSITIVITY_PAIR_CAP: usize = 48;

// --- candidate pools ---------------------------------------------------

/// Where tracing candidates come from.
///
/// Pools are assembled in a fixed order (net points in catalog order, then
/// pseudo-orbit samples, then the symbol diagonal), so reports that break
/// ties by pool position are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CandidateSource {
    /// An `eps`-net of the state space, augmented with the same samples
    /// [`CandidateSource::OrbitSamples`] takes from the pseudo-orbit. Keep
    /// `eps` around a quarter of the tracing threshold: a coarser net can
    /// miss genuine tracers.
    EpsilonNet {
        /// Net resolution.
        eps: f64,
    },
    /// Points sampled from the pseudo-orbit itself on a geometric index
    /// grid, one forward image of each, and — on full shifts — the symbol
    /// diagonal: the word reading off the leading symbol of every
    /// pseudo-orbit point, which is the constructive witness the splice
    /// and specification arguments assemble.
    OrbitSamples,
    /// An explicit candidate list, used verbatim.
    UserList {
        /// The candidate points.
        points: Vec<Point>,
    },
}

/// Geometric index grid over `[0, len)`: dense at the start, ratio about
/// 1.5 afterwards, at most 64 entries.
fn sample_indices(len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < len && out.len() < 64 {
        out.push(i);
        i = (i + 1).max(i + i / 2);
    }
    out
}

/// Extend a word point cyclically until it has `needed` symbols, so it can
/// be stepped `needed - 1` times. The extension stays in the same net cell
/// (it agrees with the original on every original symbol). Non-word points
/// pass through; words already long enough are kept verbatim.
fn word_extended(p: &Point, needed: usize) -> Option<Point> {
    let Point::Word(w) = p else {
        return Some(p.clone());
    };
    if w.len() >= needed {
        return Some(p.clone());
    }
    let syms = w.symbols();
    if syms.is_empty() {
        return None;
    }
    let filled: Vec<u8> = (0..needed).map(|i| syms[i % syms.len()]).collect();
    Point::word(filled).ok()
}

/// Symbols a candidate must carry to survive `steps` applications of the
/// system map (iterate systems consume `power` symbols per step).
fn symbols_needed(system: &System, steps: usize) -> usize {
    let per_step = match system {
        System::Iterate { power, .. } => *power as usize,
        _ => 1,
    };
    steps * per_step + 1
}

/// Assemble the candidate pool for a pseudo-orbit. Returns the points and
/// the tag recorded in reports.
fn candidate_pool(orbit: &PseudoOrbit, source: &CandidateSource) -> Result<(Vec<Point>, String)> {
    let system = orbit.system();
    let needed = symbols_needed(system, orbit.len().saturating_sub(1));
    let mut pool: Vec<Point> = Vec::new();
    let tag = match source {
        CandidateSource::UserList { points } => {
            for (j, p) in points.iter().enumerate() {
                system.validate_point(p)?;
                if let Point::Word(w) = p {
                    if w.len() < needed {
                        return Err(Error::InvalidParameters(format!(
                            "user candidate {j} carries {} symbols but tracing this \
                             horizon needs {needed}",
                            w.len()
                        )));
                    }
                }
                pool.push(p.clone());
            }
            format!("user-list({})", points.len())
        }
        CandidateSource::EpsilonNet { .. } | CandidateSource::OrbitSamples => {
            let tag = if let CandidateSource::EpsilonNet { eps } = source {
                pool.extend(system.net(*eps)?);
                format!("epsilon-net({eps})")
            } else {
                "orbit-samples".to_string()
            };
            let points = orbit.points();
            for &i in &sample_indices(points.len()) {
                pool.push(points[i].clone());
                if let Ok(image) = system.step(&points[i]) {
                    pool.push(image);
                }
            }
            if matches!(system.as_ref(), System::Shift { .. }) {
                let mut diagonal = Vec::with_capacity(points.len());
                for p in points {
                    match p {
                        Point::Word(w) => match w.symbol(0) {
                            Some(s) => diagonal.push(s),
                            None => break,
                        },
                        _ => break,
                    }
                }
                if diagonal.len() == points.len() {
                    pool.push(Point::word(diagonal)?);
                }
            }
            // Finite words cannot be stepped past their length; pad them
            // cyclically so every candidate survives the whole horizon.
            pool = pool.iter().filter_map(|p| word_extended(p, needed)).collect();
            tag
        }
    };
    if pool.is_empty() {
        return Err(Error::EmptyCandidateSet(
            "the candidate source produced no usable point".into(),
        ));
    }
    Ok((pool, tag))
}

// --- verdicts and reports ----------------------------------------------

/// What the search concluded at this horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifierVerdict {
    /// Some candidate traces the input within the thresholds.
    Supports,
    /// No searched candidate comes within tolerance of the threshold.
    RefutesAtHorizon,
    /// The evidence does not separate cleanly at this horizon.
    Inconclusive,
}

/// Outcome of one tracing-property search, with everything needed to
/// recompute the headline number.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifierReport {
    /// The property searched, e.g. `"average-shadowing"`.
    pub property: String,
    /// System the search ran on.
    pub system: String,
    /// Provenance of the input pseudo-orbit (or segment list).
    pub provenance: Provenance,
    /// Tag of the candidate source that built the pool.
    pub candidate_source: String,
    /// Number of candidates scored.
    pub candidates: usize,
    /// Number of compared indices.
    pub horizon: u64,
    /// Tracing threshold the verdict is judged against.
    pub epsilon: f64,
    /// Tolerance used at decision boundaries.
    pub tolerance: f64,
    /// How the input checked against the property's precondition class.
    pub input_check: String,
    /// The verdict at this horizon.
    pub verdict: VerifierVerdict,
    /// The candidate behind `best_score`. Re-running the profile on this
    /// point reproduces the score exactly.
    pub best_candidate: Point,
    /// The decisive score: decade-high mean tracing error for the
    /// average-style properties, the family's density estimate for the
    /// match-density ones, worst mistake excess for almost specification.
    pub best_score: f64,
    /// Companion low-side estimate for the best candidate (decade floor of
    /// its score curve).
    pub score_low: f64,
    /// Whether the best candidate's curve had settled (decade span within
    /// tolerance).
    pub converged: bool,
    /// Score curve of the best candidate at grid samples.
    pub score_curve: Vec<MeanCurvePoint>,
    /// The decision rule, spelled out with the thresholds filled in.
    pub thresholds: String,
    /// One-line explanation of the verdict.
    pub detail: String,
}

impl VerifierReport {
    /// The best candidate's score curve as CSV (`n,score` per row).
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("n,score\n");
        for p in &self.score_curve {
            out.push_str(&format!("{},{}\n", p.n, p.mean));
        }
        out
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// Max and min of the curve over the last decade (`n >= horizon / 10`).
fn decade_span(curve: &[MeanCurvePoint], horizon: u64) -> (f64, f64) {
    let start = (horizon / 10).max(1);
    let mut high = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for p in curve.iter().filter(|p| p.n >= start) {
        high = high.max(p.mean);
        low = low.min(p.mean);
    }
    if high == f64::NEG_INFINITY {
        if let Some(p) = curve.last() {
            high = p.mean;
            low = p.mean;
        }
    }
    (high, low)
}

fn check_threshold(name: &str, value: f64) -> Result<()> {
    if value.is_nan() || value <= 0.0 {
        return Err(Error::InvalidParameters(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

// --- average-style verifiers -------------------------------------------

/// Shared search for the mean-tracing-error properties: score every
/// candidate by the decade-high of its running mean tracing error, take
/// the smallest (pool order breaks ties), and judge against `epsilon`.
fn mean_error_search(
    orbit: &PseudoOrbit,
    epsilon: f64,
    source: &CandidateSource,
    tolerance: f64,
    property: &str,
    input_check: String,
) -> Result<VerifierReport> {
    check_threshold("epsilon", epsilon)?;
    check_threshold("tolerance", tolerance)?;
    let (pool, source_tag) = candidate_pool(orbit, source)?;
    let horizon = orbit.len() as u64;
    let mut spans: Vec<(usize, f64, f64)> = pool
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let profile = match_profile(orbit, z, epsilon, tolerance)?;
            let (high, low) = decade_span(&profile.error_curve, horizon);
            Ok((i, high, low))
        })
        .collect::<Result<Vec<_>>>()?;
    spans.sort_by_key(|s| s.0);
    let &(best_idx, best_high, best_low) = spans
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("pool is nonempty");
    let floor = spans.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let best = match_profile(orbit, &pool[best_idx], epsilon, tolerance)?;
    let converged = best_high - best_low <= tolerance;
    // A candidate certifies the property when even the high end of its
    // decade curve clears epsilon with margin; the pool refutes when no
    // candidate's curve ever dipped below the support threshold across the
    // whole decade.
    let verdict = if best_high < epsilon - tolerance {
        VerifierVerdict::Supports
    } else if floor >= epsilon - tolerance {
        VerifierVerdict::RefutesAtHorizon
    } else {
        VerifierVerdict::Inconclusive
    };
    Ok(VerifierReport {
        property: property.to_string(),
        system: orbit.system().name(),
        provenance: orbit.provenance().clone(),
        candidate_source: source_tag,
        candidates: pool.len(),
        horizon,
        epsilon,
        tolerance,
        input_check,
        verdict,
        best_candidate: pool[best_idx].clone(),
        best_score: best_high,
        score_low: best_low,
        converged,
        score_curve: best.error_curve,
        thresholds: format!(
            "supports iff best decade-high mean error < {:.6}; refutes iff every \
             candidate's decade-low stays >= {:.6}",
            epsilon - tolerance,
            epsilon - tolerance
        ),
        detail: format!(
            "best of {} candidates is {} with decade mean span [{:.6}, {:.6}]; \
             lowest decade floor over the pool is {:.6}",
            pool.len(),
            pool[best_idx].describe(),
            best_low,
            best_high,
            floor
        ),
    })
}

/// Search for a point whose mean tracing error along the pseudo-orbit
/// stays below `epsilon`.
///
/// Precondition: the input classifies as an average pseudo-orbit at
/// `delta` (a `fail` verdict is rejected; `inconclusive` proceeds and is
/// recorded in the report).
pub fn verify_average_shadowing(
    orbit: &PseudoOrbit,
    delta: f64,
    epsilon: f64,
    source: &CandidateSource,
    tolerance: f64,
) -> Result<VerifierReport> {
    let input = orbit.classify(PseudoOrbitClass::Average, delta, tolerance)?;
    if input.verdict == Verdict::Fail {
        return Err(Error::InvalidParameters(format!(
            "the input must classify as an average pseudo-orbit at delta {delta}: {}",
            input.detail
        )));
    }
    let input_check = format!(
        "{} at delta {delta}: {} ({})",
        input.class.name(),
        verdict_name(input.verdict),
        input.detail
    );
    mean_error_search(orbit, epsilon, source, tolerance, "average-shadowing", input_check)
}

/// Search for a point whose mean tracing error stays below `epsilon`,
/// for inputs whose own step errors average out to nothing.
///
/// Precondition: the input classifies as a vanishing-average pseudo-orbit
/// (running mean step error tending to zero).
pub fn verify_vanishing_average_shadowing(
    orbit: &PseudoOrbit,
    epsilon: f64,
    source: &CandidateSource,
    tolerance: f64,
) -> Result<VerifierReport> {
    let input = orbit.classify(PseudoOrbitClass::VanishingAverage, 0.0, tolerance)?;
    if input.verdict == Verdict::Fail {
        return Err(Error::InvalidParameters(format!(
            "the input's running mean step error must vanish: {}",
            input.detail
        )));
    }
    let input_check = format!(
        "{}: {} ({})",
        input.class.name(),
        verdict_name(input.verdict),
        input.detail
    );
    mean_error_search(
        orbit,
        epsilon,
        source,
        tolerance,
        "vanishing-average-shadowing",
        input_check,
    )
}

// --- match-density verifiers -------------------------------------------

fn family_tag(family: Family) -> String {
    match family {
        Family::LowerAbove { alpha } => format!("lower-density above {alpha}"),
        Family::UpperAbove { alpha } => format!("upper-density above {alpha}"),
        Family::FullDensity => "full-density".to_string(),
        Family::Syndetic { gap } => format!("syndetic within gap {gap}"),
        Family::Thick { run } => format!("thick with run {run}"),
    }
}

/// Search for a point whose match set — the indices where its orbit stays
/// within `epsilon` of the pseudo-orbit — lands in the given density
/// family. The score is the family's own estimate (a density for the
/// density families, a gap or run length for the structural ones), and
/// membership verdicts come from the density module's boundary rule.
///
/// Precondition: the input classifies as an ergodic pseudo-orbit at
/// `delta`. Sequences with no step error at all (for instance anything
/// over the two-point identity when `delta` exceeds the diameter) pass
/// vacuously.
pub fn verify_match_density_shadowing(
    orbit: &PseudoOrbit,
    delta: f64,
    epsilon: f64,
    family: Family,
    source: &CandidateSource,
    tolerance: f64,
) -> Result<VerifierReport> {
    check_threshold("epsilon", epsilon)?;
    check_threshold("tolerance", tolerance)?;
    let input = orbit.classify(PseudoOrbitClass::Ergodic, delta, tolerance)?;
    if input.verdict == Verdict::Fail {
        return Err(Error::NotErgodicInput(format!(
            "match-density tracing expects an ergodic input at delta {delta}: {}",
            input.detail
        )));
    }
    let input_check = format!(
        "{} at delta {delta}: {} ({})",
        input.class.name(),
        verdict_name(input.verdict),
        input.detail
    );
    let (pool, source_tag) = candidate_pool(orbit, source)?;
    let horizon = orbit.len() as u64;
    let mut scored: Vec<(usize, f64, Membership, bool)> = pool
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let profile = match_profile(orbit, z, epsilon, tolerance)?;
            let fv = profile.matched.family_membership(family, tolerance)?;
            Ok((i, fv.estimate, fv.verdict, profile.matched_density.converged))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by_key(|s| s.0);
    // Larger estimates are better for the density and thickness families;
    // for syndeticity the estimate is the worst gap, so smaller wins.
    let prefer_small = matches!(family, Family::Syndetic { .. });
    let &(best_idx, best_est, _, best_converged) = scored
        .iter()
        .min_by(|a, b| {
            let ord = if prefer_small { a.1.total_cmp(&b.1) } else { b.1.total_cmp(&a.1) };
            ord.then(a.0.cmp(&b.0))
        })
        .expect("pool is nonempty");
    let verdict = if scored.iter().any(|s| s.2 == Membership::In) {
        VerifierVerdict::Supports
    } else if scored.iter().all(|s| s.2 == Membership::Out) {
        VerifierVerdict::RefutesAtHorizon
    } else {
        VerifierVerdict::Inconclusive
    };
    let best = match_profile(orbit, &pool[best_idx], epsilon, tolerance)?;
    let in_count = scored.iter().filter(|s| s.2 == Membership::In).count();
    let out_count = scored.iter().filter(|s| s.2 == Membership::Out).count();
    Ok(VerifierReport {
        property: format!("match-density-shadowing({})", family_tag(family)),
        system: orbit.system().name(),
        provenance: orbit.provenance().clone(),
        candidate_source: source_tag,
        candidates: pool.len(),
        horizon,
        epsilon,
        tolerance,
        input_check,
        verdict,
        best_candidate: pool[best_idx].clone(),
        best_score: best_est,
        score_low: best.matched_density.empirical_lower,
        converged: best_converged,
        score_curve: best
            .matched_density
            .curve
            .iter()
            .map(|p| MeanCurvePoint { n: p.n, mean: p.ratio })
            .collect(),
        thresholds: format!(
            "family verdicts per candidate from the density boundary rule \
             (margin 2/sqrt(horizon), tolerance {tolerance}); supports iff some \
             candidate is in, refutes iff all are out"
        ),
        detail: format!(
            "best of {} candidates is {} with estimate {:.6}; {} in / {} out / {} near \
             the boundary",
            pool.len(),
            pool[best_idx].describe(),
            best_est,
            in_count,
            out_count,
            pool.len() - in_count - out_count
        ),
    })
}

// --- chain graphs ------------------------------------------------------

/// The jump graph of a finite net: node `i` reaches `j` when one map step
/// plus a jump smaller than the budget lands there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGraph {
    /// The net points (graph nodes, in net order).
    pub net: Vec<Point>,
    /// Jump budget per step.
    pub delta: f64,
    /// Net resolution the graph was built at.
    pub eps_net: f64,
    /// Adjacency lists: `edges[i]` holds every `j` with
    /// `d(f(net[i]), net[j]) < delta - 2 * eps_net`.
    pub edges: Vec<Vec<usize>>,
    /// Strongly connected component id per node.
    pub scc_of: Vec<usize>,
    /// Number of strongly connected components.
    pub scc_count: usize,
    /// Per component, the gcd of its cycle lengths (0 for a singleton
    /// without a self-loop).
    pub cycle_gcd: Vec<u64>,
}

/// Combinatorial verdict read off a chain graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainVerdict {
    /// Strongly connected with cycle gcd 1.
    ChainMixing,
    /// Strongly connected with a cycle, but gcd above 1.
    ChainTransitive,
    /// Not strongly connected (or no cycle at all).
    Neither,
}

/// Build the chain graph of a system over an `eps_net`-net with jump
/// budget `delta`.
///
/// The edge rule `d(f(p_i), p_j) < delta - 2 * eps_net` makes every graph
/// edge certify a genuine delta-chain step between the net cells, so the
/// verdicts are stable under refining the net. Requires
/// `eps_net <= delta / 4`; coarser nets are rejected.
pub fn chain_graph(system: &System, delta: f64, eps_net: f64) -> Result<ChainGraph> {
    check_threshold("delta", delta)?;
    if !delta.is_finite() {
        return Err(Error::InvalidParameters(format!("delta must be finite, got {delta}")));
    }
    check_threshold("eps_net", eps_net)?;
    if eps_net > delta / 4.0 {
        return Err(Error::NetTooCoarse(format!(
            "net resolution {eps_net} exceeds a quarter of delta = {delta}; jumps of the \
             net cells would swallow the chain budget"
        )));
    }
    let net = system.net(eps_net)?;
    let slack = delta - 2.0 * eps_net;
    let images: Vec<Point> = net.iter().map(|p| system.step(p)).collect::<Result<Vec<_>>>()?;
    let edges: Vec<Vec<usize>> = images
        .par_iter()
        .map(|image| {
            (0..net.len()).filter(|&j| system.distance(image, &net[j]) < slack).collect()
        })
        .collect();
    let (scc_of, scc_count) = strongly_connected_components(&edges);
    let cycle_gcd = component_cycle_gcds(&edges, &scc_of, scc_count);
    Ok(ChainGraph { net, delta, eps_net, edges, scc_of, scc_count, cycle_gcd })
}

impl ChainGraph {
    /// The edges as plain text, one `i j` pair per line.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.edges.iter().enumerate() {
            for &j in row {
                out.push_str(&format!("{i} {j}\n"));
            }
        }
        out
    }
}

/// Read the combinatorial verdict off a chain graph.
pub fn chain_verdict(graph: &ChainGraph) -> ChainVerdict {
    if graph.scc_count == 1 && graph.cycle_gcd.first().copied().unwrap_or(0) >= 1 {
        if graph.cycle_gcd[0] == 1 {
            ChainVerdict::ChainMixing
        } else {
            ChainVerdict::ChainTransitive
        }
    } else {
        ChainVerdict::Neither
    }
}

/// Kosaraju's two-pass strongly-connected-components, iterative. Returns
/// the component id per node and the component count.
fn strongly_connected_components(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack: Vec<(usize, usize)> = vec![(s, 0)];
        while let Some(top) = stack.last_mut() {
            let (v, next_edge) = (top.0, top.1);
            if next_edge < adj[v].len() {
                top.1 += 1;
                let w = adj[v][next_edge];
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut radj = vec![Vec::new(); n];
    for (v, row) in adj.iter().enumerate() {
        for &w in row {
            radj[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut count = 0usize;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &radj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Per component, the gcd of its cycle lengths: BFS levels from one root,
/// then gcd of `level(u) + 1 - level(v)` over the component's edges.
fn component_cycle_gcds(adj: &[Vec<usize>], comp: &[usize], count: usize) -> Vec<u64> {
    let n = adj.len();
    let mut roots = vec![usize::MAX; count];
    for v in 0..n {
        if roots[comp[v]] == usize::MAX {
            roots[comp[v]] = v;
        }
    }
    let mut level = vec![u64::MAX; n];
    let mut gcds = vec![0u64; count];
    for c in 0..count {
        let mut queue = VecDeque::from([roots[c]]);
        level[roots[c]] = 0;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if comp[w] == c && level[w] == u64::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let mut g = 0u64;
        for v in (0..n).filter(|&v| comp[v] == c) {
            for &w in adj[v].iter().filter(|&&w| comp[w] == c) {
                let diff = level[v] as i64 + 1 - level[w] as i64;
                g = gcd_u64(g, diff.unsigned_abs());
            }
        }
        gcds[c] = g;
    }
    gcds
}

// --- transfer and sensitivity times ------------------------------------

/// An open metric ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    /// Center point.
    pub center: Point,
    /// Radius (points strictly closer than this belong to the ball).
    pub radius: f64,
}

/// Net points strictly inside the ball. Errors with [`Error::EmptyBall`]
/// when the net at this resolution misses the ball entirely.
fn ball_members(system: &System, ball: &Ball, net: &[Point], label: &str) -> Result<Vec<Point>> {
    system.validate_point(&ball.center)?;
    check_threshold("radius", ball.radius)?;
    let members: Vec<Point> = net
        .iter()
        .filter(|p| system.distance(p, &ball.center) < ball.radius)
        .cloned()
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyBall(format!(
            "{label} around {} with radius {} contains no net point; refine the resolution",
            ball.center.describe(),
            ball.radius
        )));
    }
    Ok(members)
}

/// The times `n` in `[0, horizon)` at which some point of `u` lands inside
/// `v` after `n` steps. Membership is decided by iterating the net points
/// inside `u` at the given resolution, so the answer is a lower
/// approximation of the true transfer-time set.
pub fn transfer_times(
    system: &System,
    u: &Ball,
    v: &Ball,
    resolution: f64,
    horizon: u64,
) -> Result<IndexSet> {
    if horizon == 0 {
        return Err(Error::HorizonTooSmall("transfer times need a positive horizon".into()));
    }
    let net = system.net(resolution)?;
    let needed = symbols_needed(system, horizon as usize - 1);
    let sources: Vec<Point> = ball_members(system, u, &net, "the source ball")?
        .iter()
        .filter_map(|p| word_extended(p, needed))
        .collect();
    ball_members(system, v, &net, "the target ball")?;
    let mut hit = vec![false; horizon as usize];
    for p in sources {
        let mut cur = p;
        for (n, slot) in hit.iter_mut().enumerate() {
            if n > 0 {
                cur = system.step_unchecked(&cur)?;
            }
            if !*slot && system.distance(&cur, &v.center) < v.radius {
                *slot = true;
            }
        }
    }
    let members: Vec<u64> =
        hit.iter().enumerate().filter(|(_, &h)| h).map(|(n, _)| n as u64).collect();
    IndexSet::new(members, horizon)
}

/// The times `n` in `[0, horizon)` at which two points of `u` have drifted
/// more than `delta` apart. Net points inside `u` drive the scan; pools
/// larger than a small cap are subsampled on an even stride, which can
/// only under-report separation.
pub fn sensitivity_profile(
    system: &System,
    u: &Ball,
    delta: f64,
    resolution: f64,
    horizon: u64,
) -> Result<IndexSet> {
    check_threshold("delta", delta)?;
    if horizon == 0 {
        return Err(Error::HorizonTooSmall("a sensitivity profile needs a positive horizon".into()));
    }
    let net = system.net(resolution)?;
    let needed = symbols_needed(system, horizon as usize - 1);
    let members = ball_members(system, u, &net, "the ball")?;
    let picked: Vec<Point> = if members.len() > SENSITIVITY_PAIR_CAP {
        (0..SENSITIVITY_PAIR_CAP)
            .map(|i| members[i * members.len() / SENSITIVITY_PAIR_CAP].clone())
            .collect()
    } else {
        members
    };
    let mut current: Vec<Point> =
        picked.iter().filter_map(|p| word_extended(p, needed)).collect();
    if current.len() < 2 {
        return Err(Error::EmptyBall(
            "sensitivity needs at least two net points inside the ball".into(),
        ));
    }
    let mut times = Vec::new();
    for n in 0..horizon {
        if n > 0 {
            for p in current.iter_mut() {
                *p = system.step_unchecked(p)?;
            }
        }
        'pairs: for i in 0..current.len() {
            for j in i + 1..current.len() {
                if system.distance(&current[i], &current[j]) > delta {
                    times.push(n);
                    break 'pairs;
                }
            }
        }
    }
    IndexSet::new(times, horizon)
}

// --- Bowen distances and mistake budgets -------------------------------

/// Max distance between the two orbits along the given index set. The
/// empty set gives 0 (every pair of points is at distance zero along no
/// observations).
pub fn bowen_distance(system: &System, x: &Point, y: &Point, indices: &IndexSet) -> Result<f64> {
    system.validate_point(x)?;
    system.validate_point(y)?;
    let mut cx = x.clone();
    let mut cy = y.clone();
    let mut at = 0u64;
    let mut worst = 0.0f64;
    for &j in indices.members() {
        while at < j {
            cx = system.step_unchecked(&cx)?;
            cy = system.step_unchecked(&cy)?;
            at += 1;
        }
        worst = worst.max(system.distance(&cx, &cy));
    }
    Ok(worst)
}

/// Whether `y` stays strictly within `eps` of `x` along the index set.
pub fn bowen_ball_contains(
    system: &System,
    x: &Point,
    eps: f64,
    indices: &IndexSet,
    y: &Point,
) -> Result<bool> {
    check_threshold("eps", eps)?;
    Ok(bowen_distance(system, x, y, indices)? < eps)
}

/// How many mistakes the orbit budget allows, as a function of the window
/// length. All bundled rules are uniform in the tracing resolution; the
/// resolution enters through [`MistakeFunction::min_segment`], the
/// shortest window a rule supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum MistakeFunction {
    /// `ceil(log2(n))` mistakes in a window of length `n`.
    LogCeil,
    /// `ceil(sqrt(n))` mistakes.
    SqrtCeil,
    /// A fixed budget regardless of window length.
    Constant {
        /// The budget.
        count: u64,
    },
    /// No mistakes: budget balls are plain Bowen balls.
    Zero,
}

impl MistakeFunction {
    /// The mistake budget for a window of length `n`. Nondecreasing in `n`
    /// and sublinear for every bundled rule.
    pub fn budget(&self, n: u64) -> u64 {
        match self {
            MistakeFunction::LogCeil => {
                if n <= 1 {
                    0
                } else {
                    let floor = (63 - n.leading_zeros()) as u64;
                    if n.is_power_of_two() {
                        floor
                    } else {
                        floor + 1
                    }
                }
            }
            MistakeFunction::SqrtCeil => {
                let mut r = (n as f64).sqrt() as u64;
                while r * r < n {
                    r += 1;
                }
                while r > 0 && (r - 1) * (r - 1) >= n {
                    r -= 1;
                }
                r
            }
            MistakeFunction::Constant { count } => *count,
            MistakeFunction::Zero => 0,
        }
    }

    /// The shortest window this rule supports at tracing resolution `eps`:
    /// long enough that the budget stays below half the window, and — with
    /// word distances in mind — long enough to express `eps`-closeness at
    /// all. Floored at 4.
    pub fn min_segment(&self, eps: f64) -> Result<u64> {
        check_threshold("eps", eps)?;
        let structural: u64 = match self {
            MistakeFunction::Zero => 1,
            MistakeFunction::LogCeil | MistakeFunction::SqrtCeil => 4,
            MistakeFunction::Constant { count } => 2 * count,
        };
        let resolution: u64 =
            if eps >= 1.0 { 1 } else { (1.0 / eps).log2().ceil().max(1.0) as u64 };
        Ok(structural.max(resolution).max(4))
    }
}

/// Count the indices `j < n` at which the two orbits are `eps` or more
/// apart.
pub fn mistake_count(system: &System, n: u64, eps: f64, x: &Point, y: &Point) -> Result<u64> {
    check_threshold("eps", eps)?;
    system.validate_point(x)?;
    system.validate_point(y)?;
    let mut cx = x.clone();
    let mut cy = y.clone();
    let mut count = 0u64;
    for j in 0..n {
        if j > 0 {
            cx = system.step_unchecked(&cx)?;
            cy = system.step_unchecked(&cy)?;
        }
        if system.distance(&cx, &cy) >= eps {
            count += 1;
        }
    }
    Ok(count)
}

/// Whether `y` tracks `x` over the window `[0, n)` with at most the
/// budgeted number of `eps`-mistakes. Equivalently: some index set of size
/// at least `n - budget` keeps the two orbits strictly within `eps`.
pub fn mistake_ball_contains(
    system: &System,
    g: MistakeFunction,
    n: u64,
    eps: f64,
    x: &Point,
    y: &Point,
) -> Result<bool> {
    Ok(mistake_count(system, n, eps, x, y)? <= g.budget(n))
}

// --- almost specification ----------------------------------------------

/// One window of an almost-specification request: trace the orbit of
/// `start` for `len` steps at resolution `eps`, within the mistake budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecSegment {
    /// The point whose orbit the window should shadow.
    pub start: Point,
    /// Window length.
    pub len: u64,
    /// Tracing resolution for this window.
    pub eps: f64,
}

/// Mistake counts of one candidate against every segment, walking the
/// candidate's orbit across the concatenated windows.
fn segment_mistakes(system: &System, z: &Point, segments: &[SpecSegment]) -> Result<Vec<u64>> {
    system.validate_point(z)?;
    let mut mistakes = vec![0u64; segments.len()];
    let mut cur = z.clone();
    let mut advanced = 0u64;
    let mut offset = 0u64;
    for (j, seg) in segments.iter().enumerate() {
        let mut x = seg.start.clone();
        for t in 0..seg.len {
            let global = offset + t;
            while advanced < global {
                cur = system.step_unchecked(&cur)?;
                advanced += 1;
            }
            if t > 0 {
                x = system.step_unchecked(&x)?;
            }
            if system.distance(&cur, &x) >= seg.eps {
                mistakes[j] += 1;
            }
        }
        offset += seg.len;
    }
    Ok(mistakes)
}

/// Search for one point that shadows every segment's orbit back to back,
/// each within its mistake budget.
///
/// Preconditions: every segment is at least as long as the mistake rule's
/// minimum for its resolution (else [`Error::SegmentTooShort`]), and on
/// shifts every segment start carries at least `len` symbols. On shifts
/// the pool always includes the constructive candidate that concatenates
/// the segment words, which shadows each window up to boundary blur — a
/// handful of mistakes where one window's symbols run into the next.
///
/// With no witness found, the verdict is `refutes-at-horizon` when the
/// pool had net coverage (an epsilon-net source, or a finite system whose
/// net enumerates every state); a weaker pool leaves it `inconclusive`.
pub fn verify_almost_specification(
    system: &Arc<System>,
    segments: &[SpecSegment],
    g: MistakeFunction,
    source: &CandidateSource,
) -> Result<VerifierReport> {
    if segments.is_empty() {
        return Err(Error::InvalidParameters("almost specification needs segments".into()));
    }
    let mut total = 0u64;
    for (j, seg) in segments.iter().enumerate() {
        system.validate_point(&seg.start)?;
        let need = g.min_segment(seg.eps)?;
        if seg.len < need {
            return Err(Error::SegmentTooShort(format!(
                "segment {j} runs {} steps but the mistake rule needs at least {need} at \
                 resolution {}",
                seg.len, seg.eps
            )));
        }
        if let Point::Word(w) = &seg.start {
            if (w.len() as u64) < seg.len {
                return Err(Error::InvalidParameters(format!(
                    "segment {j} runs {} steps but its start carries only {} symbols",
                    seg.len,
                    w.len()
                )));
            }
        }
        total += seg.len;
    }
    let needed = symbols_needed(system, total as usize - 1);
    let mut pool: Vec<Point> = Vec::new();
    let source_tag = match source {
        CandidateSource::UserList { points } => {
            for (j, p) in points.iter().enumerate() {
                system.validate_point(p)?;
                if let Point::Word(w) = p {
                    if w.len() < needed {
                        return Err(Error::InvalidParameters(format!(
                            "user candidate {j} carries {} symbols but the segments run \
                             {total} steps",
                            w.len()
                        )));
                    }
                }
                pool.push(p.clone());
            }
            format!("user-list({})", points.len())
        }
        CandidateSource::EpsilonNet { .. } | CandidateSource::OrbitSamples => {
            let tag = if let CandidateSource::EpsilonNet { eps } = source {
                pool.extend(system.net(*eps)?);
                format!("epsilon-net({eps})")
            } else {
                "orbit-samples".to_string()
            };
            for seg in segments {
                pool.push(seg.start.clone());
                if let Ok(image) = system.step(&seg.start) {
                    pool.push(image);
                }
            }
            if matches!(system.as_ref(), System::Shift { .. }) {
                // The constructive candidate: each window's symbols in
                // order, the last window contributing its whole word.
                let mut joined: Vec<u8> = Vec::with_capacity(total as usize);
                let mut ok = true;
                for (j, seg) in segments.iter().enumerate() {
                    let Point::Word(w) = &seg.start else {
                        ok = false;
                        break;
                    };
                    let take =
                        if j + 1 == segments.len() { w.len() } else { seg.len as usize };
                    joined.extend_from_slice(&w.symbols()[..take]);
                }
                if ok {
                    pool.push(Point::word(joined)?);
                }
            }
            pool = pool.iter().filter_map(|p| word_extended(p, needed)).collect();
            tag
        }
    };
    if pool.is_empty() {
        return Err(Error::EmptyCandidateSet(
            "the candidate source produced no usable point".into(),
        ));
    }
    let budgets: Vec<u64> = segments.iter().map(|s| g.budget(s.len)).collect();
    let mut scored: Vec<(usize, f64)> = pool
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let mistakes = segment_mistakes(system, z, segments)?;
            let excess = mistakes
                .iter()
                .zip(&budgets)
                .map(|(&m, &b)| m as i64 - b as i64)
                .max()
                .expect("segments are nonempty");
            Ok((i, excess as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by_key(|s| s.0);
    let &(best_idx, best_excess) = scored
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("pool is nonempty");
    let exhaustive = matches!(source, CandidateSource::EpsilonNet { .. })
        || matches!(system.as_ref(), System::Finite { .. });
    let verdict = if best_excess <= 0.0 {
        VerifierVerdict::Supports
    } else if exhaustive {
        VerifierVerdict::RefutesAtHorizon
    } else {
        VerifierVerdict::Inconclusive
    };
    let best_mistakes = segment_mistakes(system, &pool[best_idx], segments)?;
    let mut curve = Vec::with_capacity(segments.len());
    let mut offset = 0u64;
    for (j, seg) in segments.iter().enumerate() {
        curve.push(MeanCurvePoint {
            n: offset,
            mean: best_mistakes[j] as f64 - budgets[j] as f64,
        });
        offset += seg.len;
    }
    let min_eps = segments.iter().map(|s| s.eps).fold(f64::INFINITY, f64::min);
    let mut provenance = Provenance::labeled("specification-segments");
    provenance.params = serde_json::json!({
        "segments": segments.len(),
        "lengths": segments.iter().map(|s| s.len).collect::<Vec<_>>(),
    });
    Ok(VerifierReport {
        property: "almost-specification".to_string(),
        system: system.name(),
        provenance,
        candidate_source: source_tag,
        candidates: pool.len(),
        horizon: total,
        epsilon: min_eps,
        tolerance: 0.0,
        input_check: format!(
            "{} segments of total length {total}, all at or above the rule's minimum window",
            segments.len()
        ),
        verdict,
        best_candidate: pool[best_idx].clone(),
        best_score: best_excess,
        score_low: best_excess,
        converged: true,
        score_curve: curve,
        thresholds: "supports iff some candidate keeps every segment's mistake count \
                     within its budget (worst excess <= 0)"
            .to_string(),
        detail: format!(
            "best of {} candidates is {} with worst budget excess {best_excess}; \
             per-segment mistakes {:?} against budgets {:?}",
            pool.len(),
            pool[best_idx].describe(),
            best_mistakes,
            budgets
        ),
    })
}

// --- finite minimal structure ------------------------------------------

/// The cycle decomposition of a finite map: every state falls into exactly
/// one cycle after a finite tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalStructure {
    /// The cycles, each rotated to start at its smallest state, in
    /// discovery order.
    pub cycles: Vec<Vec<usize>>,
    /// All states lying on a cycle, sorted.
    pub minimal_points: Vec<usize>,
    /// Per state, the number of steps until its orbit enters a cycle.
    pub entry_time: Vec<u64>,
    /// Per state, the index into `cycles` of the cycle it falls into.
    pub cycle_of: Vec<usize>,
}

/// Decompose a finite map into its cycles and the tails feeding them.
/// Errors with [`Error::SystemNotFinite`] on any other system.
pub fn minimal_structure(system: &System) -> Result<MinimalStructure> {
    let System::Finite { table } = system else {
        return Err(Error::SystemNotFinite(format!(
            "cycle decomposition is only defined for finite maps, got {}",
            system.name()
        )));
    };
    let n = table.len();
    let mut state = vec![0u8; n]; // 0 fresh, 1 on the current path, 2 resolved
    let mut cycle_of = vec![usize::MAX; n];
    let mut entry_time = vec![0u64; n];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if state[s] == 2 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = s;
        while state[cur] == 0 {
            state[cur] = 1;
            path.push(cur);
            cur = table[cur];
        }
        if state[cur] == 1 {
            // The walk closed a brand-new cycle; the suffix of the path
            // from the meeting point is the cycle itself.
            let pos = path.iter().position(|&v| v == cur).expect("cur is on the path");
            let cyc = &path[pos..];
            let id = cycles.len();
            for &v in cyc {
                cycle_of[v] = id;
                entry_time[v] = 0;
                state[v] = 2;
            }
            let min_pos = cyc
                .iter()
                .enumerate()
                .min_by_key(|(_, &v)| v)
                .map(|(i, _)| i)
                .expect("cycle is nonempty");
            let mut canonical = cyc[min_pos..].to_vec();
            canonical.extend_from_slice(&cyc[..min_pos]);
            cycles.push(canonical);
            for (d, &v) in path[..pos].iter().rev().enumerate() {
                cycle_of[v] = id;
                entry_time[v] = d as u64 + 1;
                state[v] = 2;
            }
        } else {
            // The walk ran into already-resolved territory; extend its
            // tail lengths backward along the path.
            let id = cycle_of[cur];
            let base = entry_time[cur];
            for (d, &v) in path.iter().rev().enumerate() {
                cycle_of[v] = id;
                entry_time[v] = base + d as u64 + 1;
                state[v] = 2;
            }
        }
    }
    let mut minimal_points: Vec<usize> = cycles.iter().flatten().copied().collect();
    minimal_points.sort_unstable();
    Ok(MinimalStructure { cycles, minimal_points, entry_time, cycle_of })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{
        rotation_adversary, spliced_orbit, two_state_sequence, SegmentRule, TwoStatePattern,
    };
    use crate::point::CirclePos;
    use proptest::prelude::*;

    fn two_point() -> Arc<System> {
        Arc::new(System::two_point_identity())
    }

    fn rotation(p: i128, q: i128) -> Arc<System> {
        Arc::new(System::Rotation { angle: CirclePos::exact(p, q).unwrap() })
    }

    fn shift(alphabet: u8, word_len: usize) -> Arc<System> {
        Arc::new(System::Shift { alphabet, word_len })
    }

    fn circle(p: i128, q: i128) -> Point {
        Point::circle_exact(p, q).unwrap()
    }

    #[test]
    fn true_orbit_supports_average_shadowing() {
        let system = rotation(1, 3);
        let orbit = PseudoOrbit::from_orbit(Arc::clone(&system), &circle(0, 1), 2000).unwrap();
        let report = verify_average_shadowing(
            &orbit,
            0.1,
            0.05,
            &CandidateSource::EpsilonNet { eps: 0.0125 },
            0.01,
        )
        .unwrap();
        // The net contains the true start, which traces with zero error.
        assert_eq!(report.verdict, VerifierVerdict::Supports);
        assert_eq!(report.best_score, 0.0);
        assert!(report.converged);
        assert!(report.input_check.contains("pass"));
        // The recorded score is reproducible from the recorded candidate.
        let profile = match_profile(&orbit, &report.best_candidate, 0.05, 0.01).unwrap();
        let (high, _) = decade_span(&profile.error_curve, report.horizon);
        assert_eq!(high, report.best_score);
    }

    #[test]
    fn alternating_two_state_refutes_average_shadowing_at_half() {
        let orbit = two_state_sequence(TwoStatePattern::Alternating, 2000, 0).unwrap();
        let report = verify_average_shadowing(
            &orbit,
            1.5,
            0.5,
            &CandidateSource::EpsilonNet { eps: 0.25 },
            0.01,
        )
        .unwrap();
        // Either constant point misses half the time, so the mean tracing
        // error is exactly 1/2 at even prefix lengths — at the threshold,
        // never below it.
        assert_eq!(report.verdict, VerifierVerdict::RefutesAtHorizon);
        assert!((report.best_score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn alternating_two_state_supports_average_shadowing_above_half() {
        let orbit = two_state_sequence(TwoStatePattern::Alternating, 2000, 0).unwrap();
        let report = verify_average_shadowing(
            &orbit,
            1.5,
            0.75,
            &CandidateSource::EpsilonNet { eps: 0.25 },
            0.01,
        )
        .unwrap();
        assert_eq!(report.verdict, VerifierVerdict::Supports);
        assert!((report.best_score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn splice_diagonal_supports_average_shadowing() {
        let system = shift(2, 16);
        let orbit = spliced_orbit(system, SegmentRule::Fixed { len: 16 }, 4096, 7).unwrap();
        let report = verify_average_shadowing(
            &orbit,
            0.2,
            0.25,
            &CandidateSource::OrbitSamples,
            0.01,
        )
        .unwrap();
        // The symbol diagonal agrees with every pseudo-orbit point until
        // its segment's restart, so its mean error is a fraction of the
        // threshold.
        assert_eq!(report.verdict, VerifierVerdict::Supports);
        assert!(report.best_score < 0.1, "diagonal score {}", report.best_score);
        assert_eq!(report.candidate_source, "orbit-samples");
    }

    #[test]
    fn average_shadowing_rejects_non_average_input() {
        let system = shift(2, 16);
        let orbit = spliced_orbit(system, SegmentRule::Fixed { len: 16 }, 4096, 7).unwrap();
        // Restart errors average around 1/24 per step; delta far below
        // that fails the input classification.
        let err = verify_average_shadowing(
            &orbit,
            0.001,
            0.25,
            &CandidateSource::OrbitSamples,
            0.001,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameters(_)), "got {err:?}");
    }

    #[test]
    fn random_two_state_supports_upper_match_density() {
        for seed in 1..=5u64 {
            let orbit =
                two_state_sequence(TwoStatePattern::Random { p: 0.5 }, 10_000, seed).unwrap();
            let report = verify_match_density_shadowing(
                &orbit,
                1.5,
                0.5,
                Family::UpperAbove { alpha: 0.4 },
                &CandidateSource::EpsilonNet { eps: 0.25 },
                0.01,
            )
            .unwrap();
            // The two constant candidates split the sequence between them,
            // so the better one matches at upper density >= 1/2.
            assert_eq!(report.verdict, VerifierVerdict::Supports, "seed {seed}");
            assert!(report.best_score >= 0.49, "seed {seed}: {}", report.best_score);
        }
    }

    #[test]
    fn alternating_refutes_upper_match_density_above_point_six() {
        let orbit = two_state_sequence(TwoStatePattern::Alternating, 2000, 0).unwrap();
        let report = verify_match_density_shadowing(
            &orbit,
            1.5,
            0.5,
            Family::UpperAbove { alpha: 0.6 },
            &CandidateSource::EpsilonNet { eps: 0.25 },
            0.01,
        )
        .unwrap();
        // Each constant candidate matches exactly the even or odd steps —
        // upper density 1/2, clear of 0.6 by more than the margin.
        assert_eq!(report.verdict, VerifierVerdict::RefutesAtHorizon);
        assert!(report.best_score >= 0.5 && report.best_score < 0.51, "{}", report.best_score);
    }

    #[test]
    fn match_density_score_is_reproducible() {
        let orbit = two_state_sequence(TwoStatePattern::Random { p: 0.5 }, 10_000, 3).unwrap();
        let family = Family::UpperAbove { alpha: 0.4 };
        let report = verify_match_density_shadowing(
            &orbit,
            1.5,
            0.5,
            family,
            &CandidateSource::EpsilonNet { eps: 0.25 },
            0.01,
        )
        .unwrap();
        let profile = match_profile(&orbit, &report.best_candidate, 0.5, 0.01).unwrap();
        let fv = profile.matched.family_membership(family, 0.01).unwrap();
        assert_eq!(fv.estimate, report.best_score);
    }

    #[test]
    fn match_density_rejects_dense_error_input() {
        let orbit = two_state_sequence(TwoStatePattern::Random { p: 0.5 }, 2000, 9).unwrap();
        // At delta 0.5 the mismatch density is about 1/2, nowhere near
        // vanishing, so the ergodic precondition fails.
        let err = verify_match_density_shadowing(
            &orbit,
            0.5,
            0.5,
            Family::UpperAbove { alpha: 0.4 },
            &CandidateSource::EpsilonNet { eps: 0.25 },
            0.01,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotErgodicInput(_)), "got {err:?}");
    }

    #[test]
    fn average_support_transfers_to_match_density() {
        // A mean tracing error below (1 - alpha) * eps forces the eps-match
        // set to have lower density above alpha: mean >= eps * (1 - match
        // ratio) pointwise, so the two verdicts must agree on the witness.
        let system = shift(2, 16);
        let orbit = spliced_orbit(system, SegmentRule::Fixed { len: 32 }, 8192, 11).unwrap();
        let eps = 0.25;
        for &alpha in &[0.0, 0.25, 0.5] {
            let scaled = (1.0 - alpha) * eps;
            let asp = verify_average_shadowing(
                &orbit,
                0.2,
                scaled,
                &CandidateSource::OrbitSamples,
                0.005,
            )
            .unwrap();
            assert_eq!(asp.verdict, VerifierVerdict::Supports, "alpha {alpha}");
            let m = verify_match_density_shadowing(
                &orbit,
                1.5,
                eps,
                Family::LowerAbove { alpha },
                &CandidateSource::OrbitSamples,
                0.005,
            )
            .unwrap();
            assert_eq!(m.verdict, VerifierVerdict::Supports, "alpha {alpha}");
            // The average-shadowing witness itself clears the density bar.
            let profile = match_profile(&orbit, &asp.best_candidate, eps, 0.005).unwrap();
            let fv = profile
                .matched
                .family_membership(Family::LowerAbove { alpha }, 0.005)
                .unwrap();
            assert_eq!(fv.verdict, Membership::In, "alpha {alpha}");
        }
    }

    #[test]
    fn adversary_refutes_vanishing_average_shadowing() {
        let system = rotation(1, 5);
        let adversary =
            rotation_adversary(Arc::clone(&system), &circle(0, 1), &circle(2, 5), 5000).unwrap();
        let report = verify_vanishing_average_shadowing(
            &adversary.orbit,
            0.05,
            &CandidateSource::EpsilonNet { eps: 0.1 },
            0.02,
        )
        .unwrap();
        // Block restarts cycle through all five phases of the rotation, so
        // every candidate pays a mean error far above xi / 8 = 0.05.
        assert_eq!(report.verdict, VerifierVerdict::RefutesAtHorizon);
        assert!(report.best_score > 0.05, "best score {}", report.best_score);
        assert!(report.score_low > 0.05, "decade floor {}", report.score_low);
        assert!(report.input_check.contains("pass"));
    }

    #[test]
    fn true_orbit_supports_vanishing_average_shadowing() {
        let system = rotation(1, 5);
        let orbit = PseudoOrbit::from_orbit(Arc::clone(&system), &circle(0, 1), 1000).unwrap();
        let report = verify_vanishing_average_shadowing(
            &orbit,
            0.05,
            &CandidateSource::EpsilonNet { eps: 0.1 },
            0.01,
        )
        .unwrap();
        assert_eq!(report.verdict, VerifierVerdict::Supports);
        assert_eq!(report.best_score, 0.0);
    }

    #[test]
    fn user_list_candidates_are_used_verbatim() {
        let system = rotation(1, 3);
        let orbit = PseudoOrbit::from_orbit(Arc::clone(&system), &circle(0, 1), 500).unwrap();
        let report = verify_average_shadowing(
            &orbit,
            0.1,
            0.05,
            &CandidateSource::UserList { points: vec![circle(0, 1)] },
            0.01,
        )
        .unwrap();
        assert_eq!(report.candidates, 1);
        assert_eq!(report.candidate_source, "user-list(1)");
        assert_eq!(report.best_candidate, circle(0, 1));
        assert_eq!(report.verdict, VerifierVerdict::Supports);
    }

    #[test]
    fn short_user_word_is_rejected() {
        let system = shift(2, 16);
        let orbit = spliced_orbit(Arc::clone(&system), SegmentRule::Fixed { len: 16 }, 256, 1)
            .unwrap();
        let err = verify_average_shadowing(
            &orbit,
            0.2,
            0.25,
            &CandidateSource::UserList { points: vec![Point::word(vec![0, 1, 0]).unwrap()] },
            0.01,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameters(_)), "got {err:?}");
    }

    #[test]
    fn verifier_report_serde_roundtrip_and_csv() {
        let orbit = two_state_sequence(TwoStatePattern::Alternating, 200, 0).unwrap();
        let report = verify_average_shadowing(
            &orbit,
            1.5,
            0.75,
            &CandidateSource::EpsilonNet { eps: 0.25 },
            0.01,
        )
        .unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"verdict\":\"supports\""));
        let back: VerifierReport = serde_json::from_str(&json).unwrap();
        assert_eq!(
            serde_json::to_value(&back).unwrap(),
            serde_json::to_value(&report).unwrap()
        );
        let csv = report.curve_csv();
        assert!(csv.starts_with("n,score\n"));
        assert_eq!(csv.lines().count(), report.score_curve.len() + 1);
    }

    // --- chain graphs ---

    #[test]
    fn two_point_identity_chain_is_neither() {
        let graph = chain_graph(&System::two_point_identity(), 0.5, 0.125).unwrap();
        // Identity keeps each state put: two self-loops, no crossing.
        assert_eq!(graph.edges, vec![vec![0], vec![1]]);
        assert_eq!(graph.scc_count, 2);
        assert_eq!(graph.cycle_gcd, vec![1, 1]);
        assert_eq!(chain_verdict(&graph), ChainVerdict::Neither);
        assert_eq!(graph.edge_list(), "0 0\n1 1\n");
    }

    #[test]
    fn finite_cycles_have_exact_chain_structure() {
        // With delta 0.5 and net resolution 0.125 the slack is 0.25, so an
        // edge exists exactly when the map sends one state to the other.
        let three_cycle = chain_graph(&System::Finite { table: vec![1, 2, 0] }, 0.5, 0.125)
            .unwrap();
        assert_eq!(three_cycle.edges, vec![vec![1], vec![2], vec![0]]);
        assert_eq!(three_cycle.scc_count, 1);
        assert_eq!(three_cycle.cycle_gcd, vec![3]);
        assert_eq!(chain_verdict(&three_cycle), ChainVerdict::ChainTransitive);

        let swap = chain_graph(&System::Finite { table: vec![1, 0] }, 0.5, 0.125).unwrap();
        assert_eq!(swap.scc_count, 1);
        assert_eq!(swap.cycle_gcd, vec![2]);
        assert_eq!(chain_verdict(&swap), ChainVerdict::ChainTransitive);

        let funnel = chain_graph(&System::Finite { table: vec![0, 0] }, 0.5, 0.125).unwrap();
        assert_eq!(funnel.scc_count, 2);
        assert_eq!(chain_verdict(&funnel), ChainVerdict::Neither);
        // State 0 sits on a self-loop; state 1 is a transient singleton.
        assert_eq!(funnel.cycle_gcd[funnel.scc_of[0]], 1);
        assert_eq!(funnel.cycle_gcd[funnel.scc_of[1]], 0);
    }

    #[test]
    fn rotation_chain_mixes_and_survives_net_halving() {
        let system = System::Rotation { angle: CirclePos::exact(1, 3).unwrap() };
        for eps_net in [0.01, 0.005] {
            let graph = chain_graph(&system, 0.05, eps_net).unwrap();
            assert_eq!(graph.scc_count, 1, "eps_net {eps_net}");
            assert_eq!(graph.cycle_gcd, vec![1], "eps_net {eps_net}");
            assert_eq!(chain_verdict(&graph), ChainVerdict::ChainMixing);
        }
    }

    #[test]
    fn shift_chain_is_a_de_bruijn_overlap_graph() {
        let system = System::Shift { alphabet: 2, word_len: 6 };
        // Each word steps to anything agreeing with its shift on the first
        // three symbols (the slack sits between 1/8 and 1/4 at both
        // resolutions), so the out-degree is 2^(net word length - 3).
        for (eps_net, degree) in [(1.0 / 32.0, 4usize), (1.0 / 64.0, 8)] {
            let graph = chain_graph(&system, 0.25, eps_net).unwrap();
            for (i, row) in graph.edges.iter().enumerate() {
                assert_eq!(row.len(), degree, "eps_net {eps_net}, node {i}");
            }
            assert_eq!(graph.scc_count, 1, "eps_net {eps_net}");
            assert_eq!(graph.cycle_gcd, vec![1], "eps_net {eps_net}");
            assert_eq!(chain_verdict(&graph), ChainVerdict::ChainMixing);
        }
    }

    #[test]
    fn coarse_net_is_rejected() {
        let system = System::Rotation { angle: CirclePos::exact(1, 3).unwrap() };
        let err = chain_graph(&system, 0.05, 0.02).unwrap_err();
        assert!(matches!(err, Error::NetTooCoarse(_)), "got {err:?}");
    }

    // --- transfer and sensitivity times ---

    #[test]
    fn whole_space_transfer_hits_every_time() {
        let system = System::Rotation { angle: CirclePos::exact(1, 4).unwrap() };
        let everything = Ball { center: circle(0, 1), radius: 0.6 };
        let times = transfer_times(&system, &everything, &everything, 0.1, 40).unwrap();
        assert_eq!(times.members(), (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn quarter_rotation_transfer_is_periodic() {
        let system = System::Rotation { angle: CirclePos::exact(1, 4).unwrap() };
        let ball = Ball { center: circle(0, 1), radius: 0.1 };
        let times = transfer_times(&system, &ball, &ball, 0.02, 64).unwrap();
        // Points near 0 return to the ball exactly when the quarter turns
        // add up to a full circle.
        let expected: Vec<u64> = (0..64).filter(|n| n % 4 == 0).collect();
        assert_eq!(times.members(), expected);
        let verdict = times.family_membership(Family::Syndetic { gap: 4 }, 0.01).unwrap();
        assert_eq!(verdict.verdict, Membership::In);
    }

    #[test]
    fn ball_below_net_resolution_is_rejected() {
        let system = System::Rotation { angle: CirclePos::exact(1, 4).unwrap() };
        let tiny = Ball { center: Point::circle_exact(1, 1000).unwrap(), radius: 1e-4 };
        let whole = Ball { center: circle(0, 1), radius: 0.6 };
        let err = transfer_times(&system, &tiny, &whole, 0.05, 16).unwrap_err();
        assert!(matches!(err, Error::EmptyBall(_)), "got {err:?}");
    }

    #[test]
    fn shift_sensitivity_times_are_exact_and_syndetic() {
        let system = System::Shift { alphabet: 2, word_len: 8 };
        let ball = Ball { center: Point::word(vec![0; 8]).unwrap(), radius: 0.3 };
        let times = sensitivity_profile(&system, &ball, 0.5, 0.0625, 30).unwrap();
        // Ball members are the cyclic extensions of 00ab: all agree on
        // positions 0 and 1 mod 4 and split on 2 and 3 mod 4, where the
        // suffixes differ in their very first symbol (distance 1 > 1/2).
        let expected: Vec<u64> = (0..30).filter(|n| matches!(n % 4, 2 | 3)).collect();
        assert_eq!(times.members(), expected);
        let verdict = times.family_membership(Family::Syndetic { gap: 4 }, 0.01).unwrap();
        assert_eq!(verdict.verdict, Membership::In);
    }

    // --- Bowen distances and mistake budgets ---

    #[test]
    fn bowen_distance_on_parallel_rotation_orbits() {
        let system = System::Rotation { angle: CirclePos::exact(1, 8).unwrap() };
        let x = circle(0, 1);
        let y = circle(1, 8);
        // Rotations are isometries: the gap stays exactly 1/8 forever.
        let some = IndexSet::new(vec![0, 5, 17], 32).unwrap();
        assert_eq!(bowen_distance(&system, &x, &y, &some).unwrap(), 0.125);
        let empty = IndexSet::empty(32);
        assert_eq!(bowen_distance(&system, &x, &y, &empty).unwrap(), 0.0);
        assert!(bowen_ball_contains(&system, &x, 0.2, &some, &y).unwrap());
        assert!(!bowen_ball_contains(&system, &x, 0.125, &some, &y).unwrap());
    }

    #[test]
    fn mistake_budget_oracles() {
        assert_eq!(MistakeFunction::LogCeil.budget(1), 0);
        assert_eq!(MistakeFunction::LogCeil.budget(2), 1);
        assert_eq!(MistakeFunction::LogCeil.budget(4), 2);
        assert_eq!(MistakeFunction::LogCeil.budget(20), 5);
        assert_eq!(MistakeFunction::LogCeil.budget(1024), 10);
        assert_eq!(MistakeFunction::LogCeil.budget(1025), 11);
        assert_eq!(MistakeFunction::SqrtCeil.budget(16), 4);
        assert_eq!(MistakeFunction::SqrtCeil.budget(17), 5);
        assert_eq!(MistakeFunction::Constant { count: 3 }.budget(7), 3);
        assert_eq!(MistakeFunction::Zero.budget(1000), 0);

        assert_eq!(MistakeFunction::LogCeil.min_segment(0.25).unwrap(), 4);
        assert_eq!(MistakeFunction::LogCeil.min_segment(1.0 / 1024.0).unwrap(), 10);
        assert_eq!(MistakeFunction::Constant { count: 8 }.min_segment(0.5).unwrap(), 16);
        assert_eq!(MistakeFunction::Zero.min_segment(0.5).unwrap(), 4);
    }

    #[test]
    fn mistake_ball_matches_subset_search() {
        // The budget formulation is equivalent to asking for an index set
        // of size >= n - budget along which the orbits stay within eps:
        // check that against brute-force enumeration of all subsets.
        let system = shift(2, 16);
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            rng_state
        };
        let rules = [
            MistakeFunction::Zero,
            MistakeFunction::LogCeil,
            MistakeFunction::Constant { count: 2 },
        ];
        for _ in 0..20 {
            let x: Vec<u8> = (0..16).map(|_| (next() & 1) as u8).collect();
            let y: Vec<u8> = (0..16).map(|_| (next() & 1) as u8).collect();
            let px = Point::word(x).unwrap();
            let py = Point::word(y).unwrap();
            for n in 1..=10u64 {
                for rule in rules {
                    for eps in [0.3, 0.6] {
                        let direct =
                            mistake_ball_contains(&system, rule, n, eps, &px, &py).unwrap();
                        let budget = rule.budget(n);
                        let mut found = false;
                        for mask in 0u32..(1 << n) {
                            if u64::from(mask.count_ones()) + budget < n {
                                continue;
                            }
                            let picked: Vec<u64> =
                                (0..n).filter(|j| mask >> j & 1 == 1).collect();
                            let set = IndexSet::new(picked, n).unwrap();
                            if bowen_distance(&system, &px, &py, &set).unwrap() < eps {
                                found = true;
                                break;
                            }
                        }
                        assert_eq!(direct, found, "n {n}, rule {rule:?}, eps {eps}");
                    }
                }
            }
        }
    }

    // --- almost specification ---

    #[test]
    fn shift_segments_concatenate_to_a_witness() {
        let system = shift(2, 64);
        let mut rng_state = 0xdeadbeefcafef00du64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            rng_state
        };
        let segments: Vec<SpecSegment> = (0..3)
            .map(|_| {
                let syms: Vec<u8> = (0..64).map(|_| (next() & 1) as u8).collect();
                SpecSegment { start: Point::word(syms).unwrap(), len: 20, eps: 0.25 }
            })
            .collect();
        let report = verify_almost_specification(
            &system,
            &segments,
            MistakeFunction::LogCeil,
            &CandidateSource::OrbitSamples,
        )
        .unwrap();
        // The concatenated word shadows each window exactly except for
        // boundary blur (at most 2 positions at eps = 1/4), well inside
        // the budget of ceil(log2 20) = 5.
        assert_eq!(report.verdict, VerifierVerdict::Supports);
        assert!(report.best_score <= 0.0);
        // The recorded witness replays cleanly segment by segment.
        let mut offset = 0u64;
        for seg in &segments {
            let mut probe = report.best_candidate.clone();
            for _ in 0..offset {
                probe = system.step(&probe).unwrap();
            }
            let wrong = mistake_count(&system, seg.len, seg.eps, &seg.start, &probe).unwrap();
            assert!(
                wrong <= MistakeFunction::LogCeil.budget(seg.len),
                "segment at {offset}: {wrong} mistakes"
            );
            offset += seg.len;
        }
    }

    #[test]
    fn conflicting_fixed_points_refute_specification() {
        let system = two_point();
        let segments = vec![
            SpecSegment { start: Point::State(0), len: 8, eps: 0.5 },
            SpecSegment { start: Point::State(1), len: 8, eps: 0.5 },
        ];
        let report = verify_almost_specification(
            &system,
            &segments,
            MistakeFunction::Zero,
            &CandidateSource::EpsilonNet { eps: 0.3 },
        )
        .unwrap();
        // Under the identity a candidate never moves, so one of the two
        // windows is wrong at every step; with a zero budget and both
        // states enumerated, that refutes.
        assert_eq!(report.verdict, VerifierVerdict::RefutesAtHorizon);
        assert_eq!(report.best_score, 8.0);
    }

    #[test]
    fn short_segment_is_rejected() {
        let system = two_point();
        let segments = vec![SpecSegment { start: Point::State(0), len: 2, eps: 0.5 }];
        let err = verify_almost_specification(
            &system,
            &segments,
            MistakeFunction::Zero,
            &CandidateSource::EpsilonNet { eps: 0.3 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::SegmentTooShort(_)), "got {err:?}");
    }

    #[test]
    fn segment_start_shorter_than_window_is_rejected() {
        let system = shift(2, 64);
        let segments = vec![SpecSegment {
            start: Point::word(vec![0, 1, 0, 1, 0, 1, 0, 1]).unwrap(),
            len: 20,
            eps: 0.25,
        }];
        let err = verify_almost_specification(
            &system,
            &segments,
            MistakeFunction::LogCeil,
            &CandidateSource::OrbitSamples,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameters(_)), "got {err:?}");
    }

    // --- finite minimal structure ---

    #[test]
    fn identity_decomposes_into_fixed_points() {
        let structure = minimal_structure(&System::two_point_identity()).unwrap();
        assert_eq!(structure.cycles, vec![vec![0], vec![1]]);
        assert_eq!(structure.minimal_points, vec![0, 1]);
        assert_eq!(structure.entry_time, vec![0, 0]);
        assert_eq!(structure.cycle_of, vec![0, 1]);
    }

    #[test]
    fn tails_feed_the_cycle_with_exact_entry_times() {
        // 0 -> 1 -> 2 -> 0 is the cycle; 3 -> 0 and 4 -> 3 are tails.
        let system = System::Finite { table: vec![1, 2, 0, 0, 3] };
        let structure = minimal_structure(&system).unwrap();
        assert_eq!(structure.cycles, vec![vec![0, 1, 2]]);
        assert_eq!(structure.minimal_points, vec![0, 1, 2]);
        assert_eq!(structure.entry_time, vec![0, 0, 0, 1, 2]);
        assert_eq!(structure.cycle_of, vec![0, 0, 0, 0, 0]);
    }

    #[test]
    fn cycle_decomposition_rejects_infinite_systems() {
        let system = System::Rotation { angle: CirclePos::exact(1, 3).unwrap() };
        let err = minimal_structure(&system).unwrap_err();
        assert!(matches!(err, Error::SystemNotFinite(_)), "got {err:?}");
    }

    /// Tortoise-and-hare oracle: tail length and cycle length of one state.
    fn floyd(table: &[usize], s: usize) -> (u64, usize) {
        let f = |x: usize| table[x];
        let mut tortoise = f(s);
        let mut hare = f(f(s));
        while tortoise != hare {
            tortoise = f(tortoise);
            hare = f(f(hare));
        }
        let mut mu = 0u64;
        let mut probe = s;
        while probe != hare {
            probe = f(probe);
            hare = f(hare);
            mu += 1;
        }
        let mut lambda = 1usize;
        let mut x = f(probe);
        while x != probe {
            x = f(x);
            lambda += 1;
        }
        (mu, lambda)
    }

    #[test]
    fn cycle_decomposition_matches_floyd_on_seeded_tables() {
        let mut rng_state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            rng_state
        };
        for _ in 0..20 {
            let n = 40;
            let table: Vec<usize> = (0..n).map(|_| (next() % n as u64) as usize).collect();
            let structure = minimal_structure(&System::Finite { table: table.clone() }).unwrap();
            for s in 0..n {
                let (mu, lambda) = floyd(&table, s);
                assert_eq!(structure.entry_time[s], mu, "state {s} of {table:?}");
                assert_eq!(
                    structure.cycles[structure.cycle_of[s]].len(),
                    lambda,
                    "state {s} of {table:?}"
                );
            }
            // Each cycle is genuinely cyclic under the table.
            for cyc in &structure.cycles {
                for (i, &v) in cyc.iter().enumerate() {
                    assert_eq!(table[v], cyc[(i + 1) % cyc.len()]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn prop_finite_chain_graph_is_the_function_graph(
            table in proptest::collection::vec(0usize..8, 1..8)
        ) {
            let table: Vec<usize> = table.iter().map(|&v| v % table.len()).collect();
            let system = System::Finite { table: table.clone() };
            let graph = chain_graph(&system, 0.5, 0.125).unwrap();
            // Slack 0.25 on a 0/1-valued metric keeps exactly the map edges.
            for (i, row) in graph.edges.iter().enumerate() {
                prop_assert_eq!(row.clone(), vec![table[i]]);
            }
            // Cross-check the cycle machinery: each cycle of the map is one
            // strongly connected component whose gcd is the cycle length.
            let structure = minimal_structure(&system).unwrap();
            for (id, cyc) in structure.cycles.iter().enumerate() {
                let comp = graph.scc_of[cyc[0]];
                for &v in cyc {
                    prop_assert_eq!(graph.scc_of[v], comp);
                    prop_assert_eq!(structure.cycle_of[v], id);
                }
                prop_assert_eq!(graph.cycle_gcd[comp], cyc.len() as u64);
            }
        }

        #[test]
        fn prop_mistake_ball_equals_subset_search(
            x in proptest::collection::vec(0u8..2, 12),
            y in proptest::collection::vec(0u8..2, 12),
            n in 1u64..=8,
            eps_pick in 0usize..2,
        ) {
            let system = System::Shift { alphabet: 2, word_len: 12 };
            let eps = [0.3, 0.6][eps_pick];
            let px = Point::word(x).unwrap();
            let py = Point::word(y).unwrap();
            let rule = MistakeFunction::LogCeil;
            let direct = mistake_ball_contains(&system, rule, n, eps, &px, &py).unwrap();
            let budget = rule.budget(n);
            let mut found = false;
            for mask in 0u32..(1 << n) {
                if u64::from(mask.count_ones()) + budget < n {
                    continue;
                }
                let picked: Vec<u64> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
                let set = IndexSet::new(picked, n).unwrap();
                if bowen_distance(&system, &px, &py, &set).unwrap() < eps {
                    found = true;
                    break;
                }
            }
            prop_assert_eq!(direct, found);
        }

        #[test]
        fn prop_budgets_are_monotone_and_sublinear(
            n in 4u64..100_000,
        ) {
            for rule in [
                MistakeFunction::LogCeil,
                MistakeFunction::SqrtCeil,
                MistakeFunction::Constant { count: 5 },
                MistakeFunction::Zero,
            ] {
                prop_assert!(rule.budget(n) <= rule.budget(n + 1));
                let floor = rule.min_segment(0.25).unwrap();
                if n >= floor {
                    prop_assert!(
                        2 * rule.budget(n) <= n,
                        "{rule:?} budget {} at n {n}", rule.budget(n)
                    );
                }
            }
        }
    }
}
