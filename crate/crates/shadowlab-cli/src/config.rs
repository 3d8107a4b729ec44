//! Experiment configuration: the JSON contract, schema validation, and
//! semantic checks that run before any computation.

use std::path::Path;
use std::sync::OnceLock;

use anyhow::{bail, Context, Result};
use jsonschema::JSONSchema;
use serde::{Deserialize, Serialize};
use shadowlab::{
    CandidateSource, Point, PreimageSelector, ScheduleRule, SegmentRule, SystemCatalogEntry,
    TwoStatePattern,
};

/// The published schema; the same file ships at `docs/config.schema.json`.
pub const CONFIG_SCHEMA: &str = include_str!("../../../docs/config.schema.json");

/// One experiment: a system, a construction, and the properties to verify.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// The system to run on.
    pub system: SystemCatalogEntry,
    /// How to build the input pseudo-orbit.
    pub construction: ConstructionSpec,
    /// Tracing properties to verify; grids expand to one run each.
    #[serde(default)]
    pub verify: Vec<VerifyRequest>,
    /// Pseudo-orbit length (number of points).
    pub horizon: u64,
    /// Seed for every random draw; recorded verbatim in all artifacts.
    pub seed: u64,
    /// Output directory; `--out` overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Decision-boundary tolerances.
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Optional chain-graph survey of the system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainRequest>,
}

/// Tolerances used at decision boundaries.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// For pseudo-orbit classification gates.
    #[serde(default = "default_tolerance")]
    pub classify: f64,
    /// For verifier verdicts.
    #[serde(default = "default_tolerance")]
    pub verify: f64,
    /// For density estimation.
    #[serde(default = "default_tolerance")]
    pub density: f64,
}

fn default_tolerance() -> f64 {
    0.01
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { classify: 0.01, verify: 0.01, density: 0.01 }
    }
}

/// Chain-graph survey parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRequest {
    /// Jump budget per step.
    pub delta: f64,
    /// Net resolution (at most `delta / 4`).
    pub net: f64,
}

/// A pseudo-orbit construction, by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstructionSpec {
    /// The true orbit of `start` — the zero-error baseline.
    TrueOrbit {
        /// Orbit start point.
        start: Point,
    },
    /// A two-point-identity sequence following a pattern.
    TwoState {
        /// The pattern.
        pattern: TwoStatePattern,
    },
    /// True-orbit segments glued at seeded random restarts.
    Splice {
        /// Segment-length rule.
        rule: SegmentRule,
    },
    /// Forward orbits of `u` and `v` interleaved on schedule blocks.
    InterleaveForward {
        /// First orbit start.
        u: Point,
        /// Second orbit start.
        v: Point,
        /// Block schedule rule.
        rule: ScheduleRule,
    },
    /// Forward orbit of `u` against backward orbit segments of `v`.
    InterleaveBackward {
        /// Forward orbit start.
        u: Point,
        /// Backward orbit anchor.
        v: Point,
        /// Which preimage the backward steps take.
        selector: PreimageSelector,
    },
    /// The rotation adversary: orbit blocks restarting at `y`, cut at
    /// return times into a ball around `y_prime`.
    RotationAdversary {
        /// Block start point.
        y: Point,
        /// Return target.
        y_prime: Point,
    },
    /// Patch an ergodic inner construction into an average pseudo-orbit.
    ErgodicToAverage {
        /// The input construction.
        inner: Box<ConstructionSpec>,
        /// Average threshold the output must meet.
        delta: f64,
    },
    /// Concatenate a family of pseudo-orbits on a doubling block schedule.
    Concatenate {
        /// The family members, each built at the full horizon.
        family: Vec<ConstructionSpec>,
        /// Seed exponent of the doubling cascade.
        seed_exponent: u32,
    },
}

/// The tracing properties the CLI can verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropertyName {
    /// Mean tracing error below epsilon (average pseudo-orbit input).
    Average,
    /// Mean tracing error below epsilon (vanishing-mean input).
    VanishingAverage,
    /// Match set has lower density above alpha.
    MatchLower,
    /// Match set has upper density above alpha.
    MatchUpper,
    /// Match set has full density.
    MatchFull,
    /// Match set is syndetic within the given gap.
    MatchSyndetic,
    /// Match set is thick with the given run length.
    MatchThick,
}

impl PropertyName {
    /// The kebab-case name used in configs and reports.
    pub fn as_str(self) -> &'static str {
        match self {
            PropertyName::Average => "average",
            PropertyName::VanishingAverage => "vanishing-average",
            PropertyName::MatchLower => "match-lower",
            PropertyName::MatchUpper => "match-upper",
            PropertyName::MatchFull => "match-full",
            PropertyName::MatchSyndetic => "match-syndetic",
            PropertyName::MatchThick => "match-thick",
        }
    }

    fn needs_delta(self) -> bool {
        !matches!(self, PropertyName::VanishingAverage)
    }

    fn needs_alpha(self) -> bool {
        matches!(self, PropertyName::MatchLower | PropertyName::MatchUpper)
    }
}

/// One verification request; array-valued fields expand as a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    /// The property to verify.
    pub property: PropertyName,
    /// Tracing threshold(s).
    pub epsilon: Grid,
    /// Input-class threshold(s); required except for `vanishing-average`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Grid>,
    /// Density bound(s) for `match-lower` / `match-upper`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Grid>,
    /// Gap bound for `match-syndetic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<u64>,
    /// Run length for `match-thick`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<u64>,
    /// Candidate pool; defaults to an epsilon-net at `epsilon / 4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidateSource>,
}

/// A scalar or an explicit list of values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    /// A single value.
    One(f64),
    /// Several values, run in order.
    Many(Vec<f64>),
}

impl Grid {
    /// The values in declaration order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::One(x) => vec![*x],
            Grid::Many(xs) => xs.clone(),
        }
    }
}

fn schema() -> &'static JSONSchema {
    static SCHEMA: OnceLock<JSONSchema> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let doc: serde_json::Value =
            serde_json::from_str(CONFIG_SCHEMA).expect("bundled schema is valid JSON");
        JSONSchema::compile(&doc).expect("bundled schema compiles")
    })
}

/// Validate a raw config document against the published JSON schema.
pub fn validate_schema(doc: &serde_json::Value) -> Result<()> {
    if let Err(errors) = schema().validate(doc) {
        let lines: Vec<String> =
            errors.take(8).map(|e| format!("  at {}: {}", e.instance_path, e)).collect();
        bail!("config does not match docs/config.schema.json:\n{}", lines.join("\n"));
    }
    Ok(())
}

/// Parse and fully validate a config document (schema first, then the
/// semantic checks the schema cannot express).
pub fn parse_config(doc: serde_json::Value) -> Result<ExperimentConfig> {
    validate_schema(&doc)?;
    let config: ExperimentConfig =
        serde_json::from_value(doc).context("config did not deserialize")?;
    validate_semantics(&config)?;
    Ok(config)
}

/// Load a config from a file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {} as JSON", path.display()))?;
    parse_config(doc).with_context(|| format!("validating config {}", path.display()))
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_nan() || !value.is_finite() || value <= 0.0 {
        bail!("{name} must be a positive finite number, got {value}");
    }
    Ok(())
}

fn validate_construction(spec: &ConstructionSpec, system: &SystemCatalogEntry) -> Result<()> {
    match spec {
        ConstructionSpec::TwoState { .. } => {
            let two_point = SystemCatalogEntry::FiniteMap { table: vec![0, 1] };
            if *system != two_point {
                bail!(
                    "the two-state construction runs on the two-point identity; set \
                     system to {}",
                    serde_json::to_string(&two_point).expect("entry serializes")
                );
            }
            Ok(())
        }
        ConstructionSpec::RotationAdversary { .. } => {
            if !matches!(system, SystemCatalogEntry::CircleRotation { .. }) {
                bail!("the rotation adversary needs a circle-rotation system");
            }
            Ok(())
        }
        ConstructionSpec::ErgodicToAverage { inner, delta } => {
            check_positive("ergodic-to-average delta", *delta)?;
            validate_construction(inner, system)
        }
        ConstructionSpec::Concatenate { family, seed_exponent } => {
            if family.is_empty() {
                bail!("concatenate needs a nonempty family");
            }
            if *seed_exponent == 0 {
                bail!("concatenate seed_exponent must be positive");
            }
            for inner in family {
                validate_construction(inner, system)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// The semantic checks behind the schema: cross-field requirements and
/// value ranges.
pub fn validate_semantics(config: &ExperimentConfig) -> Result<()> {
    if config.horizon < 2 {
        bail!("horizon must be at least 2, got {}", config.horizon);
    }
    check_positive("tolerances.classify", config.tolerances.classify)?;
    check_positive("tolerances.verify", config.tolerances.verify)?;
    check_positive("tolerances.density", config.tolerances.density)?;
    validate_construction(&config.construction, &config.system)?;
    if let Some(chain) = &config.chain {
        check_positive("chain.delta", chain.delta)?;
        check_positive("chain.net", chain.net)?;
        if chain.net > chain.delta / 4.0 {
            bail!(
                "chain.net must be at most chain.delta / 4 ({} > {})",
                chain.net,
                chain.delta / 4.0
            );
        }
    }
    for (i, req) in config.verify.iter().enumerate() {
        let name = req.property.as_str();
        for eps in req.epsilon.values() {
            check_positive(&format!("verify[{i}].epsilon"), eps)?;
        }
        if req.property.needs_delta() {
            let Some(delta) = &req.delta else {
                bail!("verify[{i}]: property {name} needs delta");
            };
            for d in delta.values() {
                check_positive(&format!("verify[{i}].delta"), d)?;
            }
        } else if req.delta.is_some() {
            bail!("verify[{i}]: property {name} takes no delta (the input class has none)");
        }
        if req.property.needs_alpha() {
            let Some(alpha) = &req.alpha else {
                bail!("verify[{i}]: property {name} needs alpha");
            };
            for a in alpha.values() {
                if a.is_nan() || !(0.0..1.0).contains(&a) {
                    bail!("verify[{i}].alpha must lie in [0, 1), got {a}");
                }
            }
        } else if req.alpha.is_some() {
            bail!("verify[{i}]: property {name} takes no alpha");
        }
        match req.property {
            PropertyName::MatchSyndetic => {
                if req.gap.is_none_or(|g| g == 0) {
                    bail!("verify[{i}]: match-syndetic needs a positive gap");
                }
            }
            PropertyName::MatchThick => {
                if req.run.is_none_or(|r| r == 0) {
                    bail!("verify[{i}]: match-thick needs a positive run");
                }
            }
            _ => {
                if req.gap.is_some() || req.run.is_some() {
                    bail!("verify[{i}]: property {name} takes neither gap nor run");
                }
            }
        }
        if let Some(CandidateSource::EpsilonNet { eps }) = &req.candidates {
            check_positive(&format!("verify[{i}].candidates.eps"), *eps)?;
        }
        if let Some(CandidateSource::UserList { points }) = &req.candidates {
            if points.is_empty() {
                bail!("verify[{i}]: a user-list candidate source needs points");
            }
        }
    }
    Ok(())
}

/// Echo of the config as stored in artifacts (normalized through serde,
/// so defaults are materialized).
pub fn config_echo(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).expect("config serializes")
}

#[allow(clippy::unwrap_used)]
#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> serde_json::Value {
        json!({
            "system": {"kind": "finite-map", "params": {"table": [0, 1]}},
            "construction": {"name": "two-state", "params": {"pattern": {"pattern": "alternating"}}},
            "verify": [
                {"property": "average", "epsilon": 0.5, "delta": 1.5}
            ],
            "horizon": 100,
            "seed": 7
        })
    }

    #[test]
    fn minimal_config_parses() {
        let config = parse_config(minimal()).unwrap();
        assert_eq!(config.horizon, 100);
        assert_eq!(config.seed, 7);
        assert_eq!(config.tolerances.verify, 0.01);
        assert_eq!(config.verify.len(), 1);
    }

    #[test]
    fn schema_rejects_unknown_top_level_field() {
        let mut doc = minimal();
        doc["surprise"] = json!(1);
        let err = parse_config(doc).unwrap_err();
        assert!(format!("{err:#}").contains("config.schema.json"), "{err:#}");
    }

    #[test]
    fn schema_rejects_bad_property_name() {
        let mut doc = minimal();
        doc["verify"][0]["property"] = json!("uniform");
        assert!(parse_config(doc).is_err());
    }

    #[test]
    fn semantic_check_requires_delta_for_average() {
        let mut doc = minimal();
        doc["verify"][0] = json!({"property": "average", "epsilon": 0.5});
        let err = parse_config(doc).unwrap_err();
        assert!(format!("{err:#}").contains("needs delta"), "{err:#}");
    }

    #[test]
    fn semantic_check_rejects_delta_for_vanishing_average() {
        let mut doc = minimal();
        doc["verify"][0] =
            json!({"property": "vanishing-average", "epsilon": 0.5, "delta": 0.1});
        let err = parse_config(doc).unwrap_err();
        assert!(format!("{err:#}").contains("takes no delta"), "{err:#}");
    }

    #[test]
    fn semantic_check_matches_system_to_construction() {
        let mut doc = minimal();
        doc["system"] = json!({"kind": "tent-map"});
        let err = parse_config(doc).unwrap_err();
        assert!(format!("{err:#}").contains("two-point identity"), "{err:#}");
    }

    #[test]
    fn alpha_grid_expands_and_bounds_are_checked() {
        let mut doc = minimal();
        doc["verify"][0] = json!({
            "property": "match-upper",
            "epsilon": 0.5,
            "delta": 1.5,
            "alpha": [0.0, 0.4, 0.6]
        });
        let config = parse_config(doc.clone()).unwrap();
        assert_eq!(config.verify[0].alpha.as_ref().unwrap().values(), vec![0.0, 0.4, 0.6]);
        doc["verify"][0]["alpha"] = json!([1.0]);
        assert!(parse_config(doc).is_err());
    }

    #[test]
    fn chain_request_net_bound_is_enforced() {
        let mut doc = minimal();
        doc["chain"] = json!({"delta": 0.1, "net": 0.05});
        let err = parse_config(doc).unwrap_err();
        assert!(format!("{err:#}").contains("delta / 4"), "{err:#}");
    }

    #[test]
    fn nested_constructions_validate_recursively() {
        let mut doc = minimal();
        doc["construction"] = json!({
            "name": "ergodic-to-average",
            "params": {
                "inner": {"name": "two-state", "params": {"pattern": {"pattern": "alternating"}}},
                "delta": 0.0
            }
        });
        // The schema already rejects the non-positive delta; the semantic
        // pass behind it would too.
        let err = parse_config(doc).unwrap_err();
        assert!(format!("{err:#}").contains("delta"), "{err:#}");
    }

    #[test]
    fn config_roundtrips_through_echo() {
        let config = parse_config(minimal()).unwrap();
        let echo = config_echo(&config);
        let back = parse_config(echo).unwrap();
        assert_eq!(serde_json::to_value(&back).unwrap(), config_echo(&config));
    }
}
