//! A numerical laboratory for shadowing with average error in tracing.
//!
//! Classical shadowing asks for a true orbit staying uniformly close to a
//! pseudo-orbit. The average-error variants relax both sides: a pseudo-orbit
//! may make occasional or on-average-small step errors, and a tracing orbit
//! may stray as long as its *average* tracing error, or the *density* of its
//! good-tracing times, stays controlled. This crate provides the pieces
//! needed to experiment with those notions at finite horizons:
//!
//! * [`system`] — a closed catalog of compact systems (finite maps, circle
//!   rotations, full shifts, the tent map, products, iterates) behind one
//!   metric-space interface;
//! * [`density`] — exact prefix calculus for index sets in `Z+` together
//!   with upper/lower density estimation and the density families used to
//!   grade tracing quality;
//! * [`pseudo_orbit`] — pseudo-orbit containers, the taxonomy classifier
//!   (per-step, ergodic, average, asymptotic-average), and match profiles
//!   of a candidate tracing orbit against a pseudo-orbit;
//! * [`construct`] — the block constructions that generate interesting
//!   inputs: interleaved orbits, concatenated average blocks, the
//!   ergodic-to-average surgery, and the rotation adversary;
//! * [`verify`] — finite-horizon verifiers for average shadowing and
//!   density-family shadowing, chain graphs, Bowen/mistake balls, almost
//!   specification, and structure probes (transfer times, sensitivity,
//!   minimal decomposition of finite maps).
//!
//! Every estimate is reported *at a horizon*, with convergence diagnostics
//! and explicit tolerances; nothing here claims to decide a limit.

pub mod construct;
pub mod density;
pub mod error;
pub mod point;
pub mod pseudo_orbit;
pub mod system;
pub mod verify;

pub use construct::{
    alternating_blocks, concatenate_blocks, ergodic_to_average, interleave_backward,
    interleave_forward, rotation_adversary, spliced_orbit, two_state_sequence,
    AverageConversion, BlockSchedule, RotationAdversary, ScheduleRule, SegmentRule,
    TwoStatePattern,
};
pub use error::{Error, Result};
pub use point::{CirclePos, Point, Word};
pub use pseudo_orbit::{match_profile, ClassificationReport, MatchProfile, Provenance, PseudoOrbit, PseudoOrbitClass, Verdict, Witness};
pub use system::{make_system, AngleSpec, PreimageSelector, System, SystemCatalogEntry};
pub use verify::{
    bowen_ball_contains, bowen_distance, chain_graph, chain_verdict, minimal_structure,
    mistake_ball_contains, mistake_count, sensitivity_profile, transfer_times,
    verify_almost_specification, verify_average_shadowing, verify_match_density_shadowing,
    verify_vanishing_average_shadowing, Ball, CandidateSource, ChainGraph, ChainVerdict,
    MinimalStructure, MistakeFunction, SpecSegment, VerifierReport, VerifierVerdict,
};
