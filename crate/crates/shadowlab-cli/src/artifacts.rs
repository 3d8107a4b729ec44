//! Artifact writing: reports, score curves, manifests, orbit dumps.
//!
//! Layout under the output directory:
//!
//! ```text
//! report.json          verdicts and score summaries
//! manifest.json        config echo, tool identity, wall time
//! curves/v000-….csv    per-verifier score curves ("# seed: N", then n,score)
//! chain-edges.txt      chain-graph edge list (with a chain survey)
//! ```
//!
//! Everything except the manifest's wall time is a pure function of the
//! config, so rerunning an experiment reproduces every byte.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use shadowlab::PseudoOrbit;

use crate::engine::{ExperimentOutcome, VerifierRunRecord};

/// Write `content` to `dir/name`, creating directories as needed, and
/// return the path.
pub fn write_text(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Pretty-print a JSON document with a trailing newline.
pub fn pretty_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).context("serializing artifact")?;
    text.push('\n');
    Ok(text)
}

/// Reduce a verifier property string to a file-name slug.
pub fn slug(property: &str) -> String {
    let mut out = String::new();
    for c in property.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

/// Write the full artifact set for an experiment. Returns the paths
/// written, report first.
pub fn write_experiment(
    dir: &Path,
    outcome: &ExperimentOutcome,
    config_echo: &serde_json::Value,
    wall_time_ms: u128,
) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    paths.push(write_text(dir, "report.json", &pretty_json(&outcome.report)?)?);

    for (idx, record) in outcome.report.verifiers.iter().enumerate() {
        let VerifierRunRecord::Completed(report) = record else { continue };
        let name = format!("curves/v{idx:03}-{}.csv", slug(&report.property));
        let content = format!("# seed: {}\n{}", outcome.report.seed, report.curve_csv());
        paths.push(write_text(dir, &name, &content)?);
    }

    if let Some(graph) = &outcome.chain {
        paths.push(write_text(dir, "chain-edges.txt", &graph.edge_list())?);
    }

    let manifest = serde_json::json!({
        "config": config_echo,
        "tool": crate::engine::tool_info(),
        "wall_time_ms": wall_time_ms,
    });
    paths.push(write_text(dir, "manifest.json", &pretty_json(&manifest)?)?);
    Ok(paths)
}

/// Write a constructed pseudo-orbit: the orbit itself plus its step-error
/// sequence as CSV.
pub fn write_orbit(dir: &Path, orbit: &PseudoOrbit) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    paths.push(write_text(dir, "orbit.json", &pretty_json(orbit)?)?);
    let errors = orbit.step_errors().map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut csv = String::from("n,error\n");
    for (n, err) in errors.iter().enumerate() {
        csv.push_str(&format!("{n},{err}\n"));
    }
    paths.push(write_text(dir, "step-errors.csv", &csv)?);
    Ok(paths)
}

#[allow(clippy::unwrap_used)]
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_keep_letters_and_digits() {
        assert_eq!(slug("average-shadowing"), "average-shadowing");
        assert_eq!(
            slug("match-density-shadowing(upper-density above 0.4)"),
            "match-density-shadowing-upper-density-above-0-4"
        );
        assert_eq!(slug("(weird)...NAME"), "weird-name");
    }

    #[test]
    fn pretty_json_ends_with_newline() {
        let text = pretty_json(&serde_json::json!({"a": 1})).unwrap();
        assert!(text.ends_with("}\n"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Slugs go into file names: only lowercase alphanumerics and
            // single interior dashes may survive, and re-slugging must be
            // a no-op.
            #[test]
            fn slugs_are_filename_safe_and_idempotent(property in ".{0,80}") {
                let once = slug(&property);
                prop_assert!(once
                    .chars()
                    .all(|c| c == '-' || c.is_ascii_lowercase() || c.is_ascii_digit()));
                prop_assert!(!once.starts_with('-'));
                prop_assert!(!once.ends_with('-'));
                prop_assert!(!once.contains("--"));
                prop_assert_eq!(slug(&once), once);
            }
        }
    }
}
