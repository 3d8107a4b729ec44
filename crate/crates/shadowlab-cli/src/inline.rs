//! Compact flag grammars for running experiments without a config file.
//!
//! Systems: `two-point`, `finite:1,2,0`, `rotation:1/3`, `rotation:0.618`,
//! `shift:2:16`, `tent`, `iterate:3:rotation:1/5`.
//!
//! Constructions: `true-orbit:<point>`, `two-state:alternating`,
//! `two-state:constant:<state>`, `two-state:random:<p>`,
//! `two-state:blocks:<schedule>`, `splice:fixed:<len>`, `splice:growing`,
//! `splice:squares`, `adversary[:<y>:<y'>]`,
//! `interleave-forward:<u>:<v>[:<schedule>]`,
//! `interleave-backward:<u>:<v>[:<symbol>]`.
//!
//! Schedules: `linear`, `exponential`, `cascade:<k>`, `quadratic:<unit>`.
//!
//! Properties: `average`, `vanishing-average`, `match-lower:<alpha>`,
//! `match-upper:<alpha>`, `match-full`, `match-syndetic:<gap>`,
//! `match-thick:<run>`.
//!
//! Candidate pools: `net:<eps>`, `orbit-samples`.
//!
//! Points are written per system: a state index on finite maps, `p/q` or a
//! float on rotations, a scalar on the tent map, a symbol word like `0110`
//! on shifts.

use anyhow::{anyhow, bail, Context, Result};
use shadowlab::density::{ClosedForm, Family, IndexSet};
use shadowlab::{
    alternating_blocks, AngleSpec, BlockSchedule, CandidateSource, Point, PreimageSelector,
    ScheduleRule, SegmentRule, SystemCatalogEntry, TwoStatePattern,
};

use crate::config::{ConstructionSpec, Grid, PropertyName, VerifyRequest};

/// Parse a system description.
pub fn parse_system(text: &str) -> Result<SystemCatalogEntry> {
    let (head, rest) = split_head(text);
    match head {
        "two-point" => {
            expect_no_rest("two-point", rest)?;
            Ok(SystemCatalogEntry::FiniteMap { table: vec![0, 1] })
        }
        "finite" => {
            let table = rest
                .ok_or_else(|| anyhow!("finite needs a table, e.g. finite:1,2,0"))?
                .split(',')
                .map(|s| s.trim().parse::<usize>().context("finite table entry"))
                .collect::<Result<Vec<usize>>>()?;
            Ok(SystemCatalogEntry::FiniteMap { table })
        }
        "rotation" => {
            let angle = rest.ok_or_else(|| anyhow!("rotation needs an angle, e.g. rotation:1/3"))?;
            Ok(SystemCatalogEntry::CircleRotation { angle: parse_angle(angle)? })
        }
        "shift" => {
            let rest = rest.ok_or_else(|| anyhow!("shift needs parameters, e.g. shift:2:16"))?;
            let (alphabet, word_len) = rest
                .split_once(':')
                .ok_or_else(|| anyhow!("shift takes alphabet and word length, e.g. shift:2:16"))?;
            Ok(SystemCatalogEntry::FullShift {
                alphabet: alphabet.parse().context("shift alphabet")?,
                word_len: word_len.parse().context("shift word length")?,
            })
        }
        "tent" => {
            expect_no_rest("tent", rest)?;
            Ok(SystemCatalogEntry::TentMap)
        }
        "iterate" => {
            let rest = rest
                .ok_or_else(|| anyhow!("iterate needs a power and a base, e.g. iterate:3:tent"))?;
            let (power, base) = rest
                .split_once(':')
                .ok_or_else(|| anyhow!("iterate takes a power and a base system"))?;
            Ok(SystemCatalogEntry::Iterate {
                base: Box::new(parse_system(base)?),
                power: power.parse().context("iterate power")?,
            })
        }
        other => bail!(
            "unknown system '{other}' (expected two-point, finite:…, rotation:…, shift:…, \
             tent, or iterate:…)"
        ),
    }
}

fn parse_angle(text: &str) -> Result<AngleSpec> {
    if text.contains('/') {
        let (p, q) = text.split_once('/').expect("checked");
        p.trim().parse::<i128>().context("angle numerator")?;
        let q_val: i128 = q.trim().parse().context("angle denominator")?;
        if q_val == 0 {
            bail!("angle denominator must be nonzero");
        }
        Ok(AngleSpec::Exact(text.to_string()))
    } else {
        Ok(AngleSpec::Float(text.parse().context("angle")?))
    }
}

/// Parse a point written in the compact per-system form.
pub fn parse_point(system: &SystemCatalogEntry, text: &str) -> Result<Point> {
    match system {
        SystemCatalogEntry::FiniteMap { .. } => {
            Ok(Point::State(text.parse().context("state index")?))
        }
        SystemCatalogEntry::CircleRotation { .. } => {
            if text.contains('/') {
                let (p, q) = text.split_once('/').expect("checked");
                Point::circle_exact(
                    p.trim().parse().context("circle numerator")?,
                    q.trim().parse().context("circle denominator")?,
                )
                .map_err(|e| anyhow!("{e}"))
            } else {
                Point::circle_float(text.parse().context("circle position")?)
                    .map_err(|e| anyhow!("{e}"))
            }
        }
        SystemCatalogEntry::TentMap => Ok(Point::Scalar(text.parse().context("scalar")?)),
        SystemCatalogEntry::FullShift { .. } => {
            let symbols = text
                .chars()
                .map(|c| {
                    c.to_digit(10).map(|d| d as u8).ok_or_else(|| {
                        anyhow!("shift points are digit words like 0110, got '{text}'")
                    })
                })
                .collect::<Result<Vec<u8>>>()?;
            Point::word(symbols).map_err(|e| anyhow!("{e}"))
        }
        SystemCatalogEntry::Iterate { base, .. } => parse_point(base, text),
        SystemCatalogEntry::Product { .. } => {
            bail!("product-system points need a config file (\"pair\" form)")
        }
    }
}

fn parse_schedule(text: &str) -> Result<ScheduleRule> {
    let (head, rest) = split_head(text);
    match head {
        "linear" => {
            expect_no_rest("linear", rest)?;
            Ok(ScheduleRule::ArithmeticCuts)
        }
        "exponential" => {
            expect_no_rest("exponential", rest)?;
            Ok(ScheduleRule::ExponentialCuts)
        }
        "cascade" => {
            let k = rest.ok_or_else(|| anyhow!("cascade needs a seed exponent, e.g. cascade:10"))?;
            Ok(ScheduleRule::DoublingCascade { seed_exponent: k.parse().context("seed exponent")? })
        }
        "quadratic" => {
            let unit = rest.ok_or_else(|| anyhow!("quadratic needs a unit, e.g. quadratic:3"))?;
            Ok(ScheduleRule::QuadraticSpans { unit: unit.parse().context("quadratic unit")? })
        }
        other => bail!("unknown schedule '{other}' (linear, exponential, cascade:<k>, quadratic:<unit>)"),
    }
}

/// Parse a construction description against the system it will run on.
pub fn parse_construction(system: &SystemCatalogEntry, text: &str) -> Result<ConstructionSpec> {
    let (head, rest) = split_head(text);
    match head {
        "true-orbit" => {
            let start = rest.ok_or_else(|| anyhow!("true-orbit needs a start point"))?;
            Ok(ConstructionSpec::TrueOrbit { start: parse_point(system, start)? })
        }
        "two-state" => {
            let rest = rest.ok_or_else(|| {
                anyhow!("two-state needs a pattern: alternating, constant:<state>, random:<p>, blocks:<schedule>")
            })?;
            let (pat, arg) = split_head(rest);
            let pattern = match (pat, arg) {
                ("alternating", None) => TwoStatePattern::Alternating,
                ("constant", Some(s)) => {
                    TwoStatePattern::Constant { state: s.parse().context("constant state")? }
                }
                ("random", Some(p)) => {
                    TwoStatePattern::Random { p: p.parse().context("random bias")? }
                }
                ("blocks", Some(sched)) => TwoStatePattern::Blocks { rule: parse_schedule(sched)? },
                _ => bail!("unknown two-state pattern '{rest}'"),
            };
            Ok(ConstructionSpec::TwoState { pattern })
        }
        "splice" => {
            let rest = rest
                .ok_or_else(|| anyhow!("splice needs a rule: fixed:<len>, growing, or squares"))?;
            let (kind, arg) = split_head(rest);
            let rule = match (kind, arg) {
                ("fixed", Some(len)) => {
                    SegmentRule::Fixed { len: len.parse().context("segment length")? }
                }
                ("growing", None) => SegmentRule::Growing,
                ("squares", None) => SegmentRule::Squares,
                _ => bail!("unknown splice rule '{rest}'"),
            };
            Ok(ConstructionSpec::Splice { rule })
        }
        "adversary" => {
            let (y, y_prime) = match rest {
                None => default_adversary_points(system)?,
                Some(points) => {
                    let (y, y_prime) = points
                        .split_once(':')
                        .ok_or_else(|| anyhow!("adversary takes two points, e.g. adversary:0/1:2/5"))?;
                    (parse_point(system, y)?, parse_point(system, y_prime)?)
                }
            };
            Ok(ConstructionSpec::RotationAdversary { y, y_prime })
        }
        "interleave-forward" => {
            let rest =
                rest.ok_or_else(|| anyhow!("interleave-forward needs two points: <u>:<v>"))?;
            let mut parts = rest.splitn(3, ':');
            let u = parts.next().ok_or_else(|| anyhow!("interleave-forward needs u"))?;
            let v = parts.next().ok_or_else(|| anyhow!("interleave-forward needs v"))?;
            let rule = match parts.next() {
                Some(sched) => parse_schedule(sched)?,
                None => ScheduleRule::ArithmeticCuts,
            };
            Ok(ConstructionSpec::InterleaveForward {
                u: parse_point(system, u)?,
                v: parse_point(system, v)?,
                rule,
            })
        }
        "interleave-backward" => {
            let rest =
                rest.ok_or_else(|| anyhow!("interleave-backward needs two points: <u>:<v>"))?;
            let mut parts = rest.splitn(3, ':');
            let u = parts.next().ok_or_else(|| anyhow!("interleave-backward needs u"))?;
            let v = parts.next().ok_or_else(|| anyhow!("interleave-backward needs v"))?;
            let selector = match parts.next() {
                Some(sym) => PreimageSelector::PrependSymbol(
                    sym.parse().context("preimage symbol")?,
                ),
                None => PreimageSelector::Canonical,
            };
            Ok(ConstructionSpec::InterleaveBackward {
                u: parse_point(system, u)?,
                v: parse_point(system, v)?,
                selector,
            })
        }
        other => bail!(
            "unknown construction '{other}' (true-orbit:…, two-state:…, splice:…, \
             adversary…, interleave-forward:…, interleave-backward:…)"
        ),
    }
}

/// Default adversary anchors: blocks restart at 0 and the return target is
/// twice the rotation angle — one block start, one point the orbit visits
/// after two steps, so returns are guaranteed and the gap is generic.
fn default_adversary_points(system: &SystemCatalogEntry) -> Result<(Point, Point)> {
    let SystemCatalogEntry::CircleRotation { angle } = system else {
        bail!("the adversary construction needs a circle-rotation system");
    };
    let y = Point::circle_exact(0, 1).map_err(|e| anyhow!("{e}"))?;
    let y_prime = match angle {
        AngleSpec::Exact(s) => {
            let (p, q) = s.split_once('/').ok_or_else(|| anyhow!("malformed angle '{s}'"))?;
            let p: i128 = p.trim().parse().context("angle numerator")?;
            let q: i128 = q.trim().parse().context("angle denominator")?;
            Point::circle_exact(2 * p, q).map_err(|e| anyhow!("{e}"))?
        }
        AngleSpec::Float(x) => Point::circle_float((2.0 * x).fract()).map_err(|e| anyhow!("{e}"))?,
    };
    Ok((y, y_prime))
}

/// Parse a property description into a full verification request.
pub fn parse_property(text: &str, epsilon: f64, delta: Option<f64>) -> Result<VerifyRequest> {
    let (head, rest) = split_head(text);
    let mut request = VerifyRequest {
        property: PropertyName::Average,
        epsilon: Grid::One(epsilon),
        delta: delta.map(Grid::One),
        alpha: None,
        gap: None,
        run: None,
        candidates: None,
    };
    match head {
        "average" => {
            expect_no_rest("average", rest)?;
            request.property = PropertyName::Average;
        }
        "vanishing-average" => {
            expect_no_rest("vanishing-average", rest)?;
            request.property = PropertyName::VanishingAverage;
            request.delta = None;
        }
        "match-lower" | "match-upper" => {
            let alpha =
                rest.ok_or_else(|| anyhow!("{head} needs a density bound, e.g. {head}:0.4"))?;
            request.property = if head == "match-lower" {
                PropertyName::MatchLower
            } else {
                PropertyName::MatchUpper
            };
            request.alpha = Some(Grid::One(alpha.parse().context("density bound")?));
        }
        "match-full" => {
            expect_no_rest("match-full", rest)?;
            request.property = PropertyName::MatchFull;
        }
        "match-syndetic" => {
            let gap = rest.ok_or_else(|| anyhow!("match-syndetic needs a gap, e.g. match-syndetic:4"))?;
            request.property = PropertyName::MatchSyndetic;
            request.gap = Some(gap.parse().context("gap")?);
        }
        "match-thick" => {
            let run = rest.ok_or_else(|| anyhow!("match-thick needs a run, e.g. match-thick:8"))?;
            request.property = PropertyName::MatchThick;
            request.run = Some(run.parse().context("run")?);
        }
        other => bail!(
            "unknown property '{other}' (average, vanishing-average, match-lower:<a>, \
             match-upper:<a>, match-full, match-syndetic:<gap>, match-thick:<run>)"
        ),
    }
    Ok(request)
}

/// Parse a candidate-pool description.
pub fn parse_candidates(text: &str) -> Result<CandidateSource> {
    let (head, rest) = split_head(text);
    match head {
        "net" => {
            let eps = rest.ok_or_else(|| anyhow!("net needs a resolution, e.g. net:0.05"))?;
            Ok(CandidateSource::EpsilonNet { eps: eps.parse().context("net resolution")? })
        }
        "orbit-samples" => {
            expect_no_rest("orbit-samples", rest)?;
            Ok(CandidateSource::OrbitSamples)
        }
        other => bail!("unknown candidate pool '{other}' (net:<eps> or orbit-samples)"),
    }
}

/// Parse an index-set family description: `lower-above:<alpha>`,
/// `upper-above:<alpha>`, `full-density`, `syndetic:<gap>`, `thick:<run>`.
pub fn parse_family(text: &str) -> Result<Family> {
    let (head, rest) = split_head(text);
    match head {
        "lower-above" => {
            let alpha = rest.ok_or_else(|| anyhow!("lower-above needs a bound, e.g. lower-above:0.4"))?;
            Ok(Family::LowerAbove { alpha: alpha.parse().context("density bound")? })
        }
        "upper-above" => {
            let alpha = rest.ok_or_else(|| anyhow!("upper-above needs a bound, e.g. upper-above:0.4"))?;
            Ok(Family::UpperAbove { alpha: alpha.parse().context("density bound")? })
        }
        "full-density" => {
            expect_no_rest("full-density", rest)?;
            Ok(Family::FullDensity)
        }
        "syndetic" => {
            let gap = rest.ok_or_else(|| anyhow!("syndetic needs a gap, e.g. syndetic:4"))?;
            Ok(Family::Syndetic { gap: gap.parse().context("gap")? })
        }
        "thick" => {
            let run = rest.ok_or_else(|| anyhow!("thick needs a run, e.g. thick:8"))?;
            Ok(Family::Thick { run: run.parse().context("run")? })
        }
        other => bail!(
            "unknown family '{other}' (lower-above:<a>, upper-above:<a>, full-density, \
             syndetic:<gap>, thick:<run>)"
        ),
    }
}

/// Parse a named index set: `evens`, `squares`, `full`,
/// `arithmetic:<step>[:<offset>]`, or an even-indexed block union
/// `linear-blocks`, `exponential-blocks`, `cascade-blocks:<k>`,
/// `quadratic-blocks:<unit>`. Returns the set and a display label.
pub fn parse_index_set(text: &str, horizon: u64) -> Result<(IndexSet, String)> {
    let (head, rest) = split_head(text);
    let blocks = |rule: ScheduleRule, label: String| -> Result<(IndexSet, String)> {
        let schedule = BlockSchedule::generate(rule, horizon).map_err(|e| anyhow!("{e}"))?;
        let (even, _) = alternating_blocks(&schedule, horizon);
        Ok((even, label))
    };
    match head {
        "evens" => {
            expect_no_rest("evens", rest)?;
            Ok((IndexSet::evens(horizon), "even numbers".to_string()))
        }
        "squares" => {
            expect_no_rest("squares", rest)?;
            Ok((IndexSet::squares(horizon), "perfect squares".to_string()))
        }
        "full" => {
            expect_no_rest("full", rest)?;
            Ok((IndexSet::full(horizon), "full set".to_string()))
        }
        "arithmetic" => {
            let rest = rest.ok_or_else(|| anyhow!("arithmetic needs a step, e.g. arithmetic:3"))?;
            let (step, offset) = match rest.split_once(':') {
                Some((step, offset)) => (
                    step.parse::<u64>().context("arithmetic step")?,
                    offset.parse::<u64>().context("arithmetic offset")?,
                ),
                None => (rest.parse::<u64>().context("arithmetic step")?, 0),
            };
            let set = IndexSet::arithmetic(step, offset, horizon).map_err(|e| anyhow!("{e}"))?;
            Ok((set, format!("arithmetic progression step {step} offset {offset}")))
        }
        "linear-blocks" => {
            expect_no_rest("linear-blocks", rest)?;
            let (set, label) = blocks(
                ScheduleRule::ArithmeticCuts,
                "even-indexed blocks, linear schedule".to_string(),
            )?;
            // Linear blocks have length about sqrt(2 n) at index n, so the
            // prefix ratio oscillates within 2 / sqrt(n) of 1/2 — inside
            // the tolerance the closed-form contract promises.
            Ok((set.with_closed_form(ClosedForm::value(label.clone(), 0.5)), label))
        }
        "exponential-blocks" => {
            expect_no_rest("exponential-blocks", rest)?;
            blocks(
                ScheduleRule::ExponentialCuts,
                "even-indexed blocks, exponential schedule".to_string(),
            )
        }
        "cascade-blocks" => {
            let k = rest.ok_or_else(|| anyhow!("cascade-blocks needs a seed exponent, e.g. cascade-blocks:10"))?;
            let k: u32 = k.parse().context("seed exponent")?;
            blocks(
                ScheduleRule::DoublingCascade { seed_exponent: k },
                format!("even-indexed blocks, doubling cascade from 2^{k}"),
            )
        }
        "quadratic-blocks" => {
            let unit = rest.ok_or_else(|| anyhow!("quadratic-blocks needs a unit, e.g. quadratic-blocks:3"))?;
            let unit: u64 = unit.parse().context("quadratic unit")?;
            blocks(
                ScheduleRule::QuadraticSpans { unit },
                format!("even-indexed blocks, quadratic spans of unit {unit}"),
            )
        }
        other => bail!(
            "unknown set '{other}' (evens, squares, full, arithmetic:<step>[:<offset>], \
             linear-blocks, exponential-blocks, cascade-blocks:<k>, quadratic-blocks:<unit>)"
        ),
    }
}

fn split_head(text: &str) -> (&str, Option<&str>) {
    match text.split_once(':') {
        Some((head, rest)) => (head, Some(rest)),
        None => (text, None),
    }
}

fn expect_no_rest(name: &str, rest: Option<&str>) -> Result<()> {
    if let Some(extra) = rest {
        bail!("'{name}' takes no parameters, got ':{extra}'");
    }
    Ok(())
}

#[allow(clippy::unwrap_used)]
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn systems_parse_to_catalog_entries() {
        assert_eq!(
            parse_system("two-point").unwrap(),
            SystemCatalogEntry::FiniteMap { table: vec![0, 1] }
        );
        assert_eq!(
            parse_system("finite:1,2,0").unwrap(),
            SystemCatalogEntry::FiniteMap { table: vec![1, 2, 0] }
        );
        assert_eq!(
            parse_system("rotation:1/3").unwrap(),
            SystemCatalogEntry::CircleRotation { angle: AngleSpec::Exact("1/3".into()) }
        );
        assert_eq!(
            parse_system("rotation:0.618").unwrap(),
            SystemCatalogEntry::CircleRotation { angle: AngleSpec::Float(0.618) }
        );
        assert_eq!(
            parse_system("shift:2:16").unwrap(),
            SystemCatalogEntry::FullShift { alphabet: 2, word_len: 16 }
        );
        assert_eq!(parse_system("tent").unwrap(), SystemCatalogEntry::TentMap);
        assert_eq!(
            parse_system("iterate:3:rotation:1/5").unwrap(),
            SystemCatalogEntry::Iterate {
                base: Box::new(SystemCatalogEntry::CircleRotation {
                    angle: AngleSpec::Exact("1/5".into())
                }),
                power: 3,
            }
        );
        assert!(parse_system("torus").is_err());
        assert!(parse_system("rotation:1/0").is_err());
    }

    #[test]
    fn points_parse_per_system() {
        let finite = parse_system("finite:1,2,0").unwrap();
        assert_eq!(parse_point(&finite, "2").unwrap(), Point::State(2));

        let rotation = parse_system("rotation:1/3").unwrap();
        assert_eq!(parse_point(&rotation, "2/3").unwrap(), Point::circle_exact(2, 3).unwrap());
        assert_eq!(parse_point(&rotation, "0.25").unwrap(), Point::circle_float(0.25).unwrap());

        let shift = parse_system("shift:2:4").unwrap();
        assert_eq!(parse_point(&shift, "0110").unwrap(), Point::word(vec![0, 1, 1, 0]).unwrap());
        assert!(parse_point(&shift, "01a0").is_err());

        let tent = parse_system("tent").unwrap();
        assert_eq!(parse_point(&tent, "0.5").unwrap(), Point::Scalar(0.5));
    }

    #[test]
    fn constructions_parse_with_defaults() {
        let two_point = parse_system("two-point").unwrap();
        assert!(matches!(
            parse_construction(&two_point, "two-state:alternating").unwrap(),
            ConstructionSpec::TwoState { pattern: TwoStatePattern::Alternating }
        ));
        assert!(matches!(
            parse_construction(&two_point, "two-state:random:0.5").unwrap(),
            ConstructionSpec::TwoState { pattern: TwoStatePattern::Random { p } } if p == 0.5
        ));

        let shift = parse_system("shift:2:16").unwrap();
        assert!(matches!(
            parse_construction(&shift, "splice:fixed:32").unwrap(),
            ConstructionSpec::Splice { rule: SegmentRule::Fixed { len: 32 } }
        ));

        let rotation = parse_system("rotation:1/5").unwrap();
        let ConstructionSpec::RotationAdversary { y, y_prime } =
            parse_construction(&rotation, "adversary").unwrap()
        else {
            panic!("expected the adversary spec");
        };
        assert_eq!(y, Point::circle_exact(0, 1).unwrap());
        assert_eq!(y_prime, Point::circle_exact(2, 5).unwrap());

        let ConstructionSpec::InterleaveBackward { selector, .. } =
            parse_construction(&rotation, "interleave-backward:0/1:1/5").unwrap()
        else {
            panic!("expected the backward interleave spec");
        };
        assert_eq!(selector, PreimageSelector::Canonical);
    }

    #[test]
    fn properties_parse_into_requests() {
        let req = parse_property("match-upper:0.4", 0.5, Some(1.5)).unwrap();
        assert_eq!(req.property, PropertyName::MatchUpper);
        assert_eq!(req.alpha.as_ref().unwrap().values(), vec![0.4]);

        let req = parse_property("vanishing-average", 0.05, Some(1.0)).unwrap();
        assert_eq!(req.property, PropertyName::VanishingAverage);
        assert!(req.delta.is_none(), "vanishing-average drops the delta");

        let req = parse_property("match-syndetic:4", 0.5, Some(1.5)).unwrap();
        assert_eq!(req.gap, Some(4));

        assert!(parse_property("uniform", 0.5, None).is_err());
        assert!(parse_property("match-lower", 0.5, None).is_err());
    }

    #[test]
    fn candidate_pools_parse() {
        assert_eq!(parse_candidates("net:0.05").unwrap(), CandidateSource::EpsilonNet { eps: 0.05 });
        assert_eq!(parse_candidates("orbit-samples").unwrap(), CandidateSource::OrbitSamples);
        assert!(parse_candidates("grid").is_err());
    }
}
