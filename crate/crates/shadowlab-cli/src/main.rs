//! Experiment runner for average-error shadowing.
//!
//! Subcommands:
//!
//! * `density` — estimate densities of index sets, test family membership.
//! * `classify` — build a pseudo-orbit and place it in the error taxonomy.
//! * `construct` — build a pseudo-orbit and dump it with its step errors.
//! * `verify` — run tracing verifiers over a constructed pseudo-orbit,
//!   driven by a JSON config or by inline flags.
//! * `chain` — survey a system's chain graph at a jump budget.
//! * `suite` — run the bundled experiment presets end to end.
//!
//! Exit codes: 0 on completion, 1 on any error, 2 under `--strict` when
//! the run completed but left open questions (an inconclusive verdict or
//! a failed verifier run).

mod artifacts;
mod config;
mod engine;
mod inline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use shadowlab::density::IndexSet;
use shadowlab::{chain_graph, chain_verdict, make_system, Provenance, PseudoOrbitClass};

use crate::config::{load_config, parse_config, ExperimentConfig, Tolerances};
use crate::engine::{run_experiment, ChainSummary, ExperimentOutcome, VerifierRunRecord};

/// Bundled experiment presets, embedded from `presets/`.
const PRESETS: &[(&str, &str)] = &[
    ("two-state-alternating", include_str!("../../../presets/two-state-alternating.json")),
    ("two-state-random", include_str!("../../../presets/two-state-random.json")),
    ("shift-splice", include_str!("../../../presets/shift-splice.json")),
    ("rotation-adversary", include_str!("../../../presets/rotation-adversary.json")),
];

#[derive(Parser)]
#[command(
    name = "shadowlab",
    version,
    about = "Numerical laboratory for average-error shadowing",
    after_help = "Exit codes: 0 done, 1 error, 2 with --strict when verdicts stay open."
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Estimate the density of an index set and test family membership.
    #[command(after_help = "\
Sets: evens, squares, full, arithmetic:<step>[:<offset>], linear-blocks,
exponential-blocks, cascade-blocks:<k>, quadratic-blocks:<unit> (even-indexed
block unions), or an explicit --members list.
Families: lower-above:<alpha>, upper-above:<alpha>, full-density,
syndetic:<gap>, thick:<run>.")]
    Density {
        /// Named set, e.g. evens or arithmetic:3:1.
        #[arg(long, conflicts_with = "members")]
        set: Option<String>,
        /// Explicit members, e.g. "0,4,8,12".
        #[arg(long)]
        members: Option<String>,
        /// Horizon the set lives below.
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
        /// Convergence tolerance.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Family to test membership in (repeatable).
        #[arg(long)]
        family: Vec<String>,
        /// Output directory for density.json and density-curve.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a pseudo-orbit and classify it in the error taxonomy.
    Classify {
        /// System description, e.g. two-point, rotation:1/3, shift:2:16.
        #[arg(long)]
        system: String,
        /// Construction description, e.g. two-state:alternating.
        #[arg(long)]
        construct: String,
        /// Class to test: per-step, ergodic, average, asymptotic-average,
        /// vanishing-average.
        #[arg(long)]
        class: String,
        /// Error threshold (ignored by vanishing-average).
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Pseudo-orbit length.
        #[arg(long, default_value_t = 2000)]
        horizon: u64,
        /// Seed for every random draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Decision tolerance.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Output directory for classification.json and mean-curve.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a pseudo-orbit and dump it with its step-error sequence.
    Construct {
        /// System description, e.g. two-point, rotation:1/3, shift:2:16.
        #[arg(long)]
        system: String,
        /// Construction description, e.g. splice:fixed:32.
        #[arg(long)]
        construct: String,
        /// Pseudo-orbit length.
        #[arg(long, default_value_t = 2000)]
        horizon: u64,
        /// Seed for every random draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for orbit.json and step-errors.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify tracing properties of a constructed pseudo-orbit.
    #[command(after_help = "\
Either point --config at a JSON experiment file (see docs/config.schema.json)
or describe the experiment inline with --system, --construct, --property,
--epsilon, and --delta. Properties: average, vanishing-average,
match-lower:<alpha>, match-upper:<alpha>, match-full, match-syndetic:<gap>,
match-thick:<run>. Candidate pools: net:<eps>, orbit-samples.")]
    Verify {
        /// Experiment config file (JSON).
        #[arg(long, conflicts_with_all = ["system", "construct", "property"])]
        config: Option<PathBuf>,
        /// System description for an inline experiment.
        #[arg(long)]
        system: Option<String>,
        /// Construction description for an inline experiment.
        #[arg(long)]
        construct: Option<String>,
        /// Property to verify (repeatable).
        #[arg(long)]
        property: Vec<String>,
        /// Tracing threshold for inline properties.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Input-class threshold for inline properties.
        #[arg(long)]
        delta: Option<f64>,
        /// Candidate pool for inline properties, e.g. net:0.1.
        #[arg(long)]
        candidates: Option<String>,
        /// Pseudo-orbit length (inline experiments).
        #[arg(long, default_value_t = 2000)]
        horizon: u64,
        /// Seed for every random draw (inline experiments).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Decision tolerance (inline experiments).
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with code 2 when a verdict is inconclusive or a run fails.
        #[arg(long)]
        strict: bool,
    },
    /// Survey a system's chain graph at a jump budget.
    Chain {
        /// System description, e.g. rotation:1/3 or shift:2:16.
        #[arg(long)]
        system: String,
        /// Jump budget per step.
        #[arg(long)]
        delta: f64,
        /// Net resolution (at most delta / 4).
        #[arg(long)]
        net: f64,
        /// Output directory for chain.json and chain-edges.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the bundled experiment presets and write one report each.
    Suite {
        /// Output directory; each preset writes to a subdirectory.
        #[arg(long)]
        out: PathBuf,
        /// Run a single preset by name.
        #[arg(long)]
        preset: Option<String>,
        /// Exit with code 2 when any preset leaves open questions.
        #[arg(long)]
        strict: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Commands) -> Result<ExitCode> {
    match command {
        Commands::Density { set, members, horizon, tolerance, family, out } => {
            run_density(set, members, horizon, tolerance, &family, out.as_deref())
        }
        Commands::Classify { system, construct, class, delta, horizon, seed, tolerance, out } => {
            run_classify(&system, &construct, &class, delta, horizon, seed, tolerance, out.as_deref())
        }
        Commands::Construct { system, construct, horizon, seed, out } => {
            run_construct(&system, &construct, horizon, seed, out.as_deref())
        }
        Commands::Verify {
            config,
            system,
            construct,
            property,
            epsilon,
            delta,
            candidates,
            horizon,
            seed,
            tolerance,
            out,
            strict,
        } => {
            let experiment = match config {
                Some(path) => load_config(&path)?,
                None => inline_experiment(
                    system.as_deref(),
                    construct.as_deref(),
                    &property,
                    epsilon,
                    delta,
                    candidates.as_deref(),
                    horizon,
                    seed,
                    tolerance,
                )?,
            };
            run_verify(&experiment, out.as_deref(), strict)
        }
        Commands::Chain { system, delta, net, out } => {
            run_chain(&system, delta, net, out.as_deref())
        }
        Commands::Suite { out, preset, strict } => run_suite(&out, preset.as_deref(), strict),
    }
}

/// Render a kebab-case enum (verdicts, memberships) for log lines.
fn kebab<T: serde::Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => "?".into(),
    }
}

fn describe_provenance(provenance: &Provenance) -> String {
    if provenance.params.is_null() {
        provenance.label.clone()
    } else {
        format!("{} {}", provenance.label, provenance.params)
    }
}

fn announce(paths: &[PathBuf]) {
    for path in paths {
        println!("wrote {}", path.display());
    }
}

#[allow(clippy::too_many_arguments)]
fn run_density(
    set: Option<String>,
    members: Option<String>,
    horizon: u64,
    tolerance: f64,
    families: &[String],
    out: Option<&Path>,
) -> Result<ExitCode> {
    let (index_set, label) = match (&set, &members) {
        (Some(name), None) => inline::parse_index_set(name, horizon)?,
        (None, Some(list)) => {
            let members = list
                .split(',')
                .map(|s| s.trim().parse::<u64>().context("set member"))
                .collect::<Result<Vec<u64>>>()?;
            let set = IndexSet::new(members, horizon).map_err(|e| anyhow!("{e}"))?;
            (set, "explicit members".to_string())
        }
        _ => bail!("pass exactly one of --set or --members"),
    };

    let stats = index_set.density(tolerance).map_err(|e| anyhow!("{e}"))?;
    println!("set: {label}");
    println!("horizon: {horizon}, members: {}", index_set.members().len());
    match &stats.closed_form {
        Some(label) => println!(
            "density: {} (closed form: {label}; observed {:.6}..{:.6})",
            stats.lower, stats.empirical_lower, stats.empirical_upper
        ),
        None => println!(
            "density: lower {:.6}, upper {:.6} (converged: {})",
            stats.lower, stats.upper, stats.converged
        ),
    }

    let mut verdicts = Vec::new();
    for text in families {
        let family = inline::parse_family(text)?;
        let verdict = index_set.family_membership(family, tolerance).map_err(|e| anyhow!("{e}"))?;
        println!("family {text}: {} — {}", kebab(&verdict.verdict), verdict.detail);
        verdicts.push(verdict);
    }

    if let Some(dir) = out {
        let doc = serde_json::json!({
            "set": label,
            "horizon": horizon,
            "member_count": index_set.members().len(),
            "stats": stats,
            "families": verdicts,
        });
        let mut paths = Vec::new();
        paths.push(artifacts::write_text(dir, "density.json", &artifacts::pretty_json(&doc)?)?);
        let mut csv = String::from("n,count,ratio\n");
        for point in &stats.curve {
            csv.push_str(&format!("{},{},{}\n", point.n, point.count, point.ratio));
        }
        paths.push(artifacts::write_text(dir, "density-curve.csv", &csv)?);
        announce(&paths);
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn run_classify(
    system_text: &str,
    construct_text: &str,
    class_text: &str,
    delta: f64,
    horizon: u64,
    seed: u64,
    tolerance: f64,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let entry = inline::parse_system(system_text)?;
    let spec = inline::parse_construction(&entry, construct_text)?;
    let class: PseudoOrbitClass = serde_json::from_value(serde_json::Value::String(
        class_text.to_string(),
    ))
    .map_err(|_| {
        anyhow!(
            "unknown class '{class_text}' (per-step, ergodic, average, asymptotic-average, \
             vanishing-average)"
        )
    })?;

    let system = Arc::new(make_system(&entry).map_err(|e| anyhow!("{e}"))?);
    let (orbit, _, _) = engine::build_orbit(&system, &spec, horizon, seed, tolerance)?;
    let report = orbit.classify(class, delta, tolerance).map_err(|e| anyhow!("{e}"))?;

    println!("system: {}", orbit.system().name());
    println!("construction: {}", describe_provenance(orbit.provenance()));
    println!(
        "class {}: {} — {}",
        class.name(),
        kebab(&report.verdict),
        report.detail
    );

    if let Some(dir) = out {
        let mut paths = Vec::new();
        paths.push(artifacts::write_text(
            dir,
            "classification.json",
            &artifacts::pretty_json(&report)?,
        )?);
        let mut csv = String::from("n,mean\n");
        for point in &report.mean_curve {
            csv.push_str(&format!("{},{}\n", point.n, point.mean));
        }
        paths.push(artifacts::write_text(dir, "mean-curve.csv", &csv)?);
        announce(&paths);
    }
    Ok(ExitCode::SUCCESS)
}

fn run_construct(
    system_text: &str,
    construct_text: &str,
    horizon: u64,
    seed: u64,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let entry = inline::parse_system(system_text)?;
    let spec = inline::parse_construction(&entry, construct_text)?;
    let system = Arc::new(make_system(&entry).map_err(|e| anyhow!("{e}"))?);
    let (orbit, adversary, conversion) = engine::build_orbit(&system, &spec, horizon, seed, 0.01)?;

    let errors = orbit.step_errors().map_err(|e| anyhow!("{e}"))?;
    let max = errors.iter().cloned().fold(0.0f64, f64::max);
    let mean = if errors.is_empty() { 0.0 } else { errors.iter().sum::<f64>() / errors.len() as f64 };
    println!("system: {}", orbit.system().name());
    println!("construction: {}", describe_provenance(orbit.provenance()));
    println!("points: {}, max step error: {max:.6}, mean step error: {mean:.6}", orbit.len());
    if let Some(echo) = &adversary {
        println!(
            "adversary: xi {:.6}, return ball {:.6}, syndetic bound {}, {} blocks",
            echo.xi,
            echo.delta,
            echo.syndetic_bound,
            echo.return_times.len()
        );
    }
    if let Some(echo) = &conversion {
        println!(
            "conversion: patch length {}, {} patches, {} indices rewritten",
            echo.patch_len, echo.patch_count, echo.patched_indices
        );
    }

    if let Some(dir) = out {
        announce(&artifacts::write_orbit(dir, &orbit)?);
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn inline_experiment(
    system: Option<&str>,
    construct: Option<&str>,
    properties: &[String],
    epsilon: Option<f64>,
    delta: Option<f64>,
    candidates: Option<&str>,
    horizon: u64,
    seed: u64,
    tolerance: f64,
) -> Result<ExperimentConfig> {
    let system_text =
        system.ok_or_else(|| anyhow!("inline experiments need --system (or use --config)"))?;
    let construct_text =
        construct.ok_or_else(|| anyhow!("inline experiments need --construct"))?;
    if properties.is_empty() {
        bail!("inline experiments need at least one --property");
    }
    let epsilon = epsilon.ok_or_else(|| anyhow!("inline experiments need --epsilon"))?;

    let entry = inline::parse_system(system_text)?;
    let construction = inline::parse_construction(&entry, construct_text)?;
    let source = candidates.map(inline::parse_candidates).transpose()?;
    let verify = properties
        .iter()
        .map(|text| {
            let mut request = inline::parse_property(text, epsilon, delta)?;
            request.candidates = source.clone();
            Ok(request)
        })
        .collect::<Result<Vec<_>>>()?;

    let config = ExperimentConfig {
        system: entry,
        construction,
        verify,
        horizon,
        seed,
        output: None,
        tolerances: Tolerances { classify: tolerance, verify: tolerance, density: tolerance },
        chain: None,
    };
    config::validate_semantics(&config)?;
    Ok(config)
}

fn print_experiment(outcome: &ExperimentOutcome) {
    println!("system: {}", outcome.report.system);
    println!("construction: {}", describe_provenance(&outcome.report.construction));
    for (idx, record) in outcome.report.verifiers.iter().enumerate() {
        match record {
            VerifierRunRecord::Completed(report) => {
                println!(
                    "v{idx:03} {} [{}] {}",
                    report.property,
                    kebab(&report.verdict),
                    report.detail
                );
            }
            VerifierRunRecord::Failed { property, error } => {
                println!("v{idx:03} {property} [failed] {error}");
            }
        }
    }
    if let Some(chain) = &outcome.report.chain {
        println!(
            "chain [{}] {} nodes, {} edges, {} components, cycle gcds {:?}",
            kebab(&chain.verdict),
            chain.nodes,
            chain.edges,
            chain.scc_count,
            chain.cycle_gcd
        );
    }
}

fn run_verify(
    experiment: &ExperimentConfig,
    out: Option<&Path>,
    strict: bool,
) -> Result<ExitCode> {
    let started = Instant::now();
    let outcome = run_experiment(experiment)?;
    let wall_time_ms = started.elapsed().as_millis();
    print_experiment(&outcome);

    let out_dir: Option<PathBuf> =
        out.map(Path::to_path_buf).or_else(|| experiment.output.as_ref().map(PathBuf::from));
    if let Some(dir) = out_dir {
        let echo = config::config_echo(experiment);
        announce(&artifacts::write_experiment(&dir, &outcome, &echo, wall_time_ms)?);
    }

    if strict && outcome.report.has_open_questions() {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_chain(system_text: &str, delta: f64, net: f64, out: Option<&Path>) -> Result<ExitCode> {
    let entry = inline::parse_system(system_text)?;
    let system = make_system(&entry).map_err(|e| anyhow!("{e}"))?;
    let graph = chain_graph(&system, delta, net).map_err(|e| anyhow!("{e}"))?;
    let summary = ChainSummary {
        delta: graph.delta,
        eps_net: graph.eps_net,
        nodes: graph.net.len(),
        edges: graph.edges.iter().map(Vec::len).sum(),
        scc_count: graph.scc_count,
        cycle_gcd: graph.cycle_gcd.clone(),
        verdict: chain_verdict(&graph),
    };
    println!("system: {}", system.name());
    println!(
        "chain [{}] {} nodes, {} edges, {} components, cycle gcds {:?}",
        kebab(&summary.verdict),
        summary.nodes,
        summary.edges,
        summary.scc_count,
        summary.cycle_gcd
    );
    if let Some(dir) = out {
        let paths = vec![
            artifacts::write_text(dir, "chain.json", &artifacts::pretty_json(&summary)?)?,
            artifacts::write_text(dir, "chain-edges.txt", &graph.edge_list())?,
        ];
        announce(&paths);
    }
    Ok(ExitCode::SUCCESS)
}

fn run_suite(out: &Path, only: Option<&str>, strict: bool) -> Result<ExitCode> {
    let selected: Vec<&(&str, &str)> = match only {
        Some(name) => {
            let preset = PRESETS
                .iter()
                .find(|(preset, _)| *preset == name)
                .ok_or_else(|| {
                    let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                    anyhow!("unknown preset '{name}' (available: {})", names.join(", "))
                })?;
            vec![preset]
        }
        None => PRESETS.iter().collect(),
    };

    let mut rows = Vec::new();
    let mut open_questions = false;
    for (name, text) in selected {
        println!("== preset {name} ==");
        let doc: serde_json::Value =
            serde_json::from_str(text).with_context(|| format!("parsing preset {name}"))?;
        let experiment =
            parse_config(doc).with_context(|| format!("validating preset {name}"))?;
        let started = Instant::now();
        let outcome =
            run_experiment(&experiment).with_context(|| format!("running preset {name}"))?;
        let wall_time_ms = started.elapsed().as_millis();
        print_experiment(&outcome);

        let echo = config::config_echo(&experiment);
        let dir = out.join(name);
        announce(&artifacts::write_experiment(&dir, &outcome, &echo, wall_time_ms)?);

        let verdicts: Vec<String> = outcome
            .report
            .verifiers
            .iter()
            .map(|record| match record {
                VerifierRunRecord::Completed(report) => {
                    format!("{}: {}", report.property, kebab(&report.verdict))
                }
                VerifierRunRecord::Failed { property, error } => {
                    format!("{property}: failed ({error})")
                }
            })
            .collect();
        open_questions |= outcome.report.has_open_questions();
        rows.push(serde_json::json!({
            "preset": name,
            "system": outcome.report.system,
            "verdicts": verdicts,
            "chain": outcome.report.chain.as_ref().map(|c| kebab(&c.verdict)),
            "open_questions": outcome.report.has_open_questions(),
        }));
    }

    let summary = serde_json::json!({
        "tool": engine::tool_info(),
        "presets": rows,
    });
    announce(&[artifacts::write_text(out, "suite-summary.json", &artifacts::pretty_json(&summary)?)?]);

    if strict && open_questions {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
