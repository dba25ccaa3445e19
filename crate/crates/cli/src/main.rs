use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bayeslink::eval::{
    distortion_study, error_report, exact_match_baseline, matched_fraction, near_twins_baseline, roc_sweep,
    simulate_dataset, LinkSet, SimulationSpec, StudyConfig, StudyRow,
};
use bayeslink::io::{
    ingest, read_json, read_samples, write_json, write_lists, write_samples, Dictionary, IngestSpec, PriorSpec,
    RunConfig,
};
use bayeslink::model::LinkageMode;
use bayeslink::posterior::{build_report, confusion_matrix, to_dot, DotOptions, MpmmsTable, ReportOptions};
use bayeslink::priors::{
    prior_cardinality_distribution, prior_mean_cardinality, solve_m_for_target_mean, PartitionPriorSpec,
};
use bayeslink::sampler::{build_blocks, ChainConfig, Checkpoint, Sampler};
use bayeslink::{FileLayout, GroundTruth, RecordCoord, RecordId};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const CHECKPOINT_FILE: &str = "checkpoint.json";
const TRUTH_FILE: &str = "truth.json";
const DICTIONARY_FILE: &str = "dictionary.json";
const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "bayeslink", version, about = "Bayesian record linkage and de-duplication")]
struct Cli {
    /// Worker threads for block-parallel sampling.
    #[arg(long, global = true, env = "BAYESLINK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Random seed; overrides any seed in the configuration.
    #[arg(long, env = "BAYESLINK_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the lists and sample the posterior linkage.
    Link {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        /// Output directory; overrides the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Sweeps between checkpoints (0 writes one only at the end).
        #[arg(long, default_value_t = 100)]
        checkpoint_every: usize,
    },
    /// Summarise a sample trace: match probabilities, point estimate, graph.
    Analyze {
        /// Directory written by `link`.
        #[arg(long)]
        samples: PathBuf,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the point estimate as a DOT graph.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Record pair to query, as `FILE.ROW:FILE.ROW` (1-based).
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<(RecordCoord, RecordCoord)>,
        /// Keep only estimated clusters at least this probable.
        #[arg(long)]
        threshold: Option<f64>,
        /// Ground truth (JSON list of ids); defaults to the one saved by `link`.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Include the most probable matching set of the first N records.
        #[arg(long)]
        mpmms_rows: Option<usize>,
    },
    /// Score the point estimate against the ground truth.
    Evaluate {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Comma-separated thresholds for an ROC sweep.
        #[arg(long, value_delimiter = ',')]
        roc: Vec<f64>,
        /// Run configuration; adds exact-match and near-twins baselines.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the JSON result here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw synthetic lists with known truth.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// Simulation settings (TOML); defaults to a three-wave panel.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        distortion: Option<f64>,
        #[arg(long)]
        individuals: Option<usize>,
        #[arg(long)]
        duplicate_rate: Option<f64>,
        /// Block keys for the generated run configuration.
        #[arg(long, value_delimiter = ',')]
        block_keys: Vec<String>,
        /// Sweeps for the generated run configuration.
        #[arg(long, default_value_t = 1000)]
        sweeps: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Partition-prior tables and latent population size calibration.
    Prior {
        /// Number of records.
        #[arg(long = "n", visible_alias = "N")]
        n: u64,
        /// Latent population size (defaults to the number of records).
        #[arg(long = "m", visible_alias = "M")]
        m: Option<u64>,
        /// Find the smallest M whose prior mean cardinality reaches this.
        #[arg(long)]
        target_mean: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        tolerance: f64,
        /// Emit JSON instead of a tab-separated table.
        #[arg(long)]
        json: bool,
    },
    /// Error rates across distortion levels on simulated data.
    Study {
        /// Study settings (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-run metrics (CSV).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        sweeps: Option<usize>,
        #[command(flatten)]
        seed: SeedArg,
    },
}

fn parse_pair(s: &str) -> Result<(RecordCoord, RecordCoord), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected FILE.ROW:FILE.ROW, got {s:?}"))?;
    Ok((a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            report_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = classify(&e);
            report_error(kind, &format!("{e:#}"));
            ExitCode::from(code)
        }
    }
}

fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    use bayeslink::Error as E;
    match e.downcast_ref::<bayeslink::Error>() {
        Some(E::Config(_) | E::Toml(_) | E::Hyperparameters(_) | E::Schema(_)) => ("config", 2),
        Some(E::Ingest { .. }) => ("ingest", 1),
        Some(E::Format { .. } | E::Json(_) | E::Csv(_)) => ("format", 1),
        Some(E::Io(_)) => ("io", 1),
        Some(E::Infeasible(_)) => ("infeasible", 1),
        Some(_) => ("internal", 1),
        None => ("error", 1),
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message.trim_end() } }));
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

/// Write to standard output; a closed pipe ends output quietly.
fn emit(text: &str) -> anyhow::Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Link { config, seed, output, resume, checkpoint_every } => {
            link(&config, seed.seed, output, resume, checkpoint_every)
        }
        Command::Analyze { samples, report, dot, pairs, threshold, truth, mpmms_rows } => {
            analyze(&samples, report, dot, &pairs, threshold, truth, mpmms_rows)
        }
        Command::Evaluate { samples, truth, threshold, roc, config, out } => {
            evaluate(&samples, truth, threshold, &roc, config, out)
        }
        Command::Simulate { out, spec, distortion, individuals, duplicate_rate, block_keys, sweeps, seed } => {
            let mut s: SimulationSpec = match spec {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?).map_err(bayeslink::Error::from)?,
                None => SimulationSpec::default(),
            };
            s.distortion = distortion.unwrap_or(s.distortion);
            s.individuals = individuals.unwrap_or(s.individuals);
            s.duplicate_rate = duplicate_rate.unwrap_or(s.duplicate_rate);
            simulate(&out, &s, &block_keys, sweeps, seed.seed.unwrap_or(DEFAULT_SEED))
        }
        Command::Prior { n, m, target_mean, tolerance, json } => prior(n, m, target_mean, tolerance, json),
        Command::Study { config, out, replications, sweeps, seed } => {
            let mut c: StudyConfig = match config {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?).map_err(bayeslink::Error::from)?,
                None => StudyConfig::default(),
            };
            c.replications = replications.unwrap_or(c.replications);
            c.chain.sweeps = sweeps.unwrap_or(c.chain.sweeps);
            c.seed = seed.seed.unwrap_or(c.seed);
            study(&c, &out)
        }
    }
}

fn link(
    config_path: &Path,
    seed: Option<u64>,
    output: Option<PathBuf>,
    resume: bool,
    checkpoint_every: usize,
) -> anyhow::Result<()> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(o) = output {
        config.output = o;
    }
    let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let hash = config.hash();
    let data = ingest(&config.ingest)?;
    let hp = config.prior.resolve(data.table.schema())?;
    let blocks = build_blocks(&data.table, &data.block_keys)?;
    let out = &config.output;
    std::fs::create_dir_all(out)?;
    let checkpoint_path = out.join(CHECKPOINT_FILE);

    let mut sampler = if resume && checkpoint_path.exists() {
        let cp: Checkpoint = read_json(&checkpoint_path)?;
        if cp.config_hash != hash {
            bail!(bayeslink::Error::Config("checkpoint belongs to a different configuration".into()));
        }
        Sampler::resume(&data.table, &hp, &config.chain, &blocks, &cp)?
    } else {
        let mut s = Sampler::new(&data.table, &hp, &config.chain, &blocks, seed)?;
        s.set_config_hash(hash);
        s
    };
    write_json(&out.join(DICTIONARY_FILE), &data.dictionary)?;
    if let Some(t) = &data.truth {
        write_json(&out.join(TRUTH_FILE), t)?;
    }
    while !sampler.is_finished() {
        let step = if checkpoint_every == 0 { usize::MAX } else { checkpoint_every };
        sampler.run_for(step)?;
        write_json(&checkpoint_path, &sampler.checkpoint())?;
    }
    write_json(&checkpoint_path, &sampler.checkpoint())?;
    let trace = sampler.finish();
    write_samples(out, &trace)?;
    print_json(&json!({
        "output": out,
        "records": data.table.n_records(),
        "blocks": trace.meta.blocks,
        "draws": trace.len(),
        "thin": trace.meta.thin,
        "moves": trace.meta.moves,
        "seed": trace.meta.seed,
        "config_hash": trace.meta.config_hash,
        "version": trace.meta.version,
    }))
}

fn load_truth(samples: &Path, truth: Option<PathBuf>, required: bool) -> anyhow::Result<Option<GroundTruth>> {
    let path = truth.clone().unwrap_or_else(|| samples.join(TRUTH_FILE));
    if truth.is_none() && !path.exists() {
        if required {
            bail!(bayeslink::Error::Config(format!("no ground truth at {}", path.display())));
        }
        return Ok(None);
    }
    Ok(Some(read_json(&path)?))
}

fn record_id(layout: &FileLayout, c: RecordCoord) -> anyhow::Result<RecordId> {
    layout.record_id(c).with_context(|| format!("record {c} is outside the data"))
}

fn analyze(
    dir: &Path,
    report_path: Option<PathBuf>,
    dot: Option<PathBuf>,
    pairs: &[(RecordCoord, RecordCoord)],
    threshold: Option<f64>,
    truth: Option<PathBuf>,
    mpmms_rows: Option<usize>,
) -> anyhow::Result<()> {
    let samples = read_samples(dir)?;
    let layout = FileLayout::new(&samples.meta.file_sizes);
    let truth = load_truth(dir, truth, false)?;
    let pairs = pairs
        .iter()
        .map(|&(a, b)| Ok((record_id(&layout, a)?, record_id(&layout, b)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report = build_report(&samples, &ReportOptions { pairs, threshold, mpmms_rows, truth: truth.as_ref() })?;
    if let Some(path) = dot {
        let estimate = MpmmsTable::new(&samples).shared_estimate(threshold);
        let provenance = format!(
            "bayeslink {}\nconfig_hash {}\nseed {}",
            samples.meta.version, samples.meta.config_hash, samples.meta.seed
        );
        let text = to_dot(
            &estimate,
            &layout,
            &DotOptions { threshold: threshold.unwrap_or(0.5), truth: truth.as_ref(), provenance: Some(provenance) },
        );
        std::fs::write(path, text)?;
    }
    match report_path {
        Some(p) => Ok(write_json(&p, &report)?),
        None => print_json(&report),
    }
}

fn evaluate(
    dir: &Path,
    truth: Option<PathBuf>,
    threshold: Option<f64>,
    roc: &[f64],
    config: Option<PathBuf>,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let samples = read_samples(dir)?;
    let truth = load_truth(dir, truth, true)?.expect("required");
    let layout = FileLayout::new(&samples.meta.file_sizes);
    let table = MpmmsTable::new(&samples);
    let estimate = table.shared_estimate(threshold);
    let errors = error_report(&LinkSet::Partition(estimate.labels.clone()), &truth)?;
    let confusion = confusion_matrix(samples.lambdas(), &truth, &layout)?;
    let mut result = json!({
        "version": samples.meta.version,
        "config_hash": samples.meta.config_hash,
        "seed": samples.meta.seed,
        "threshold": threshold,
        "estimate": errors,
        "matched_fraction": matched_fraction(&estimate.labels, &truth)?,
        "true_individuals": truth.clusters().len(),
        "estimated_individuals": estimate.clusters.len(),
        "confusion": {
            "labels": confusion.labels(),
            "counts": confusion.counts,
            "normalized": confusion.normalized(),
            "excluded": confusion.excluded,
        },
    });
    if !roc.is_empty() {
        let mut thresholds = roc.to_vec();
        thresholds.sort_by(f64::total_cmp);
        result["roc"] = serde_json::to_value(roc_sweep(&table, &truth, &thresholds)?)?;
    }
    if let Some(path) = config {
        let c = RunConfig::load(&path)?;
        let data = ingest(&c.ingest)?;
        if data.table.file_sizes() != samples.meta.file_sizes {
            bail!(bayeslink::Error::Dimension("configuration data does not match the trace".into()));
        }
        result["baselines"] = json!({
            "exact_match": error_report(&exact_match_baseline(&data.table), &truth)?,
            "near_twins": error_report(&near_twins_baseline(&data.table), &truth)?,
        });
    }
    match out {
        Some(p) => Ok(write_json(&p, &result)?),
        None => print_json(&result),
    }
}

fn simulate(out: &Path, spec: &SimulationSpec, block_keys: &[String], sweeps: usize, seed: u64) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sim = simulate_dataset(spec, &mut rng)?;
    let dictionary = Dictionary::numeric(sim.table.schema());
    let files = write_lists(out, &sim.table, Some(&sim.truth), &dictionary)?;
    write_json(&out.join(DICTIONARY_FILE), &dictionary)?;
    write_json(
        &out.join("simulation.json"),
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "spec": spec,
            "theta": sim.theta,
            "distorted_cells": sim.distorted.iter().filter(|&&d| d).count(),
        }),
    )?;
    let config = RunConfig {
        ingest: IngestSpec {
            files: files.iter().map(|f| PathBuf::from(f.file_name().expect("file"))).collect(),
            delimiter: ',',
            fields: spec.field_names.clone(),
            truth_column: Some("id".into()),
            block_keys: block_keys.to_vec(),
            dictionary: Some(PathBuf::from(DICTIONARY_FILE)),
            freeze_dictionary: true,
        },
        prior: PriorSpec::default(),
        chain: ChainConfig {
            mode: if spec.duplicate_rate > 0.0 { LinkageMode::Smered } else { LinkageMode::Smere },
            sweeps,
            ..ChainConfig::default()
        },
        output: PathBuf::from("linked"),
        seed: Some(seed),
    };
    config.validate()?;
    std::fs::write(out.join("link.toml"), config.to_toml()?)?;
    print_json(&json!({
        "output": out,
        "file_sizes": sim.table.file_sizes(),
        "individuals": sim.truth.clusters().len(),
        "config": out.join("link.toml"),
        "seed": seed,
    }))
}

fn prior(n: u64, m: Option<u64>, target: Option<f64>, tolerance: f64, as_json: bool) -> anyhow::Result<()> {
    if let Some(target) = target {
        let m = solve_m_for_target_mean(n, target, tolerance)?;
        return print_json(&json!({
            "n": n,
            "target_mean": target,
            "m": m,
            "mean_exact": prior_mean_cardinality(n, m, true),
            "mean_approx": prior_mean_cardinality(n, m, false),
        }));
    }
    let spec = PartitionPriorSpec::new(n, m)?;
    let table = prior_cardinality_distribution(&spec)?;
    if as_json {
        let rows: Vec<_> = table.iter().map(|&(k, p)| json!({ "size": k, "probability": p })).collect();
        return print_json(&json!({
            "n": spec.n,
            "m": spec.m,
            "mean_exact": prior_mean_cardinality(spec.n, spec.m, true),
            "mean_approx": prior_mean_cardinality(spec.n, spec.m, false),
            "distribution": rows,
        }));
    }
    let mut text = String::from("size\tprobability");
    for (k, p) in table {
        text.push_str(&format!("\n{k}\t{p}"));
    }
    emit(&text)
}

fn study(config: &StudyConfig, out: &Path) -> anyhow::Result<()> {
    let rows = distortion_study(config)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(out).map_err(bayeslink::Error::from)?;
    for r in &rows {
        w.serialize(r).map_err(bayeslink::Error::from)?;
    }
    w.flush()?;
    let summary: Vec<_> = config
        .levels
        .iter()
        .map(|&level| {
            let at: Vec<&StudyRow> = rows.iter().filter(|r| r.level == level).collect();
            json!({
                "level": level,
                "fnr": median(at.iter().map(|r| r.fnr)),
                "fpr": median(at.iter().map(|r| r.fpr)),
                "matched_fraction": median(at.iter().map(|r| r.matched_fraction)),
                "n_mean": median(at.iter().map(|r| r.n_mean)),
                "true_n": median(at.iter().map(|r| r.true_n as f64)),
            })
        })
        .collect();
    print_json(&json!({ "metrics": out, "medians": summary }))
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}
