use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cote_core::builder::{read_examples, write_examples};
use cote_core::corpus::save_schema;
use cote_core::evaluator::{load_predictions, read_report, render_report};
use cote_core::{
    build_dataset, compute_jga, fine_grained_report, ingest_legacy, load_corpus, load_schema, low_resource_sample,
    save_corpus, step_histogram, BucketPreset, BucketSpec, BuildOptions, Corpus, LegacyStyle, NormalizationPolicy,
    PromptTemplate, QuestionOverrides, RefineConfig, Refiner, ReportFormat, Split, StepHistogram,
};
use serde::Serialize;

use crate::args::*;
use crate::PartialRefine;

const SCHEMA_FILE: &str = "schema.json";

pub fn dispatch(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Ingest(a) => ingest(a, out),
        Command::Validate(a) => validate(a),
        Command::Stats(a) => stats(a, out),
        Command::Build(a) => build(a, out),
        Command::Refine(a) => refine(a, out),
        Command::Sample(a) => sample(a, cli.seed, out),
        Command::Eval(a) => eval(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Dialogue files of a directory: every `*.json` except the schema, sorted.
fn dialogue_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != SCHEMA_FILE))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no dialogue files in {}", dir.display());
    }
    Ok(files)
}

fn open_corpus(path: &Path) -> Result<Corpus> {
    let (schema_path, files) = if path.is_dir() {
        (path.join(SCHEMA_FILE), dialogue_files(path)?)
    } else {
        let dir = path.parent().unwrap_or(Path::new("."));
        (dir.join(SCHEMA_FILE), vec![path.to_path_buf()])
    };
    let schema = load_schema(&schema_path)?;
    Ok(load_corpus(&files, &schema, &BTreeSet::new())?)
}

fn select_split(corpus: &Corpus, split: SplitArg) -> Corpus {
    match split_of(split) {
        Some(s) => corpus.only_split(s),
        None => corpus.clone(),
    }
}

fn split_of(split: SplitArg) -> Option<Split> {
    match split {
        SplitArg::Train => Some(Split::Train),
        SplitArg::Dev => Some(Split::Dev),
        SplitArg::Test => Some(Split::Test),
        SplitArg::All => None,
    }
}

fn split_summary(corpus: &Corpus) -> String {
    let counts = corpus.split_counts();
    let n = |s| counts.get(&s).copied().unwrap_or(0);
    format!(
        "{}: train {}, dev {}, test {} dialogues; {} turns; {} slots",
        corpus.name(),
        n(Split::Train),
        n(Split::Dev),
        n(Split::Test),
        corpus.n_turns(),
        corpus.schema().len()
    )
}

/// Writes `schema.json` and `<name>.json` into `dir`, or the dialogues alone
/// to stdout.
fn write_corpus(corpus: &Corpus, out: Option<&Path>, schema_out: Option<&Path>) -> Result<()> {
    if let Some(path) = schema_out {
        save_schema(corpus.schema(), path)?;
    }
    let Some(dir) = out else {
        let mut text = serde_json::to_string_pretty(corpus.dialogues())?;
        text.push('\n');
        return write_output(None, text.as_bytes());
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    if schema_out.is_none() {
        save_schema(corpus.schema(), dir.join(SCHEMA_FILE))?;
    }
    let name = if corpus.name().is_empty() {
        "dialogues"
    } else {
        corpus.name()
    };
    save_corpus(corpus, dir.join(format!("{name}.json")))?;
    Ok(())
}

fn ingest(a: IngestArgs, out: Option<&Path>) -> Result<()> {
    let schema = load_schema(&a.schema)?;
    let excluded: BTreeSet<String> = a.exclude_domains.iter().map(|d| d.trim().to_string()).collect();
    let corpus = match a.style {
        InputStyle::Canonical => {
            let mut files = Vec::new();
            for input in &a.input {
                if input.is_dir() {
                    files.extend(dialogue_files(input)?);
                } else {
                    files.push(input.clone());
                }
            }
            load_corpus(&files, &schema, &excluded)?
        }
        style => {
            let style = match style {
                InputStyle::WozBelief => LegacyStyle::WozBelief,
                InputStyle::M2mFlat => LegacyStyle::M2mFlat,
                _ => LegacyStyle::MultiWoz22,
            };
            let mut dialogues = Vec::new();
            let mut name = String::new();
            for input in &a.input {
                let part = ingest_legacy(input, style, &schema)?;
                if name.is_empty() {
                    name = part.name().to_string();
                }
                dialogues.extend(part.dialogues().iter().cloned());
            }
            Corpus::new(name, schema, dialogues)?.exclude_domains(&excluded)
        }
    };
    eprintln!("{}", split_summary(&corpus));
    write_corpus(&corpus, out, a.schema_out.as_deref())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let corpus = open_corpus(&a.corpus.corpus)?;
    eprintln!("ok: {}", split_summary(&corpus));
    if let Some(path) = a.predictions {
        let predictions = load_predictions(&path)?;
        compute_jga(&corpus, &predictions, &NormalizationPolicy::default())?;
        eprintln!("ok: {} prediction records", predictions.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsJson<'a> {
    corpus: &'a str,
    split: &'a str,
    counts: &'a BTreeMap<usize, usize>,
    total_active: usize,
    multi_step_fraction: f64,
}

fn stats(a: StatsArgs, out: Option<&Path>) -> Result<()> {
    let corpus = open_corpus(&a.corpus.corpus)?;
    let hist = match split_of(a.split) {
        Some(s) => step_histogram(&corpus, s),
        None => {
            let mut h = StepHistogram::default();
            for s in [Split::Train, Split::Dev, Split::Test] {
                h.merge(&step_histogram(&corpus, s));
            }
            h
        }
    };
    let split = split_of(a.split).map_or("all", Split::as_str);
    print!("{}", hist.to_table());
    if let Some(path) = out {
        let json = StatsJson {
            corpus: corpus.name(),
            split,
            counts: &hist.counts,
            total_active: hist.total_active,
            multi_step_fraction: hist.fraction_at_least(2),
        };
        let mut text = serde_json::to_string_pretty(&json)?;
        text.push('\n');
        write_output(Some(path), text.as_bytes())?;
    }
    Ok(())
}

fn build(a: BuildArgs, out: Option<&Path>) -> Result<()> {
    let corpus = select_split(&open_corpus(&a.corpus.corpus)?, a.split);
    let template = match &a.template_file {
        Some(p) => PromptTemplate::from_file(p)?,
        None => PromptTemplate::default(),
    };
    let overrides = match &a.overrides_file {
        Some(p) => QuestionOverrides::from_file(p, corpus.schema())?,
        None => QuestionOverrides::default(),
    };
    let options = BuildOptions {
        include_explanations: !a.no_explanations,
        include_inactive: a.include_inactive,
    };
    let examples = build_dataset(&corpus, &template, &overrides, options)?;
    log::info!(
        "built {} examples from {} dialogues",
        examples.len(),
        corpus.dialogues().len()
    );
    let mut buf = Vec::new();
    write_examples(&mut buf, &examples)?;
    write_output(out, &buf)
}

fn refine(a: RefineArgs, out: Option<&Path>) -> Result<()> {
    let examples = read_examples(&a.input)?;
    let mut config = match &a.config {
        Some(p) => RefineConfig::from_file(p)?,
        None => RefineConfig::default(),
    };
    if a.offline {
        config.offline = true;
    }
    if let Some(n) = a.max_parallel {
        config.max_parallel = n;
    }
    let refiner = Refiner::new(config)?;
    let total = examples.len();
    let all_splits = a.all_splits;
    let outcome = refiner.refine_batch_where(examples, |e| all_splits || e.meta.split == Split::Train);
    let mut buf = Vec::new();
    write_examples(&mut buf, &outcome.examples)?;
    write_output(out, &buf)?;
    log::info!("{} requests sent", refiner.requests_sent());
    if !outcome.failures.is_empty() {
        for f in &outcome.failures {
            eprintln!("refine failed: {}: {}", f.example_id, f.error);
        }
        return Err(PartialRefine {
            failed: outcome.failures.len(),
            total,
        }
        .into());
    }
    Ok(())
}

fn sample(a: SampleArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let corpus = open_corpus(&a.corpus.corpus)?;
    let sampled = low_resource_sample(&corpus, a.fraction, seed)?;
    eprintln!(
        "kept {} of {} train dialogues (fraction {}, seed {seed})",
        sampled.split(Split::Train).count(),
        corpus.split(Split::Train).count(),
        a.fraction
    );
    write_corpus(&sampled, out, None)
}

fn format_of(f: FormatArg) -> ReportFormat {
    match f {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Markdown => ReportFormat::Markdown,
        FormatArg::Csv => ReportFormat::Csv,
    }
}

fn eval(a: EvalArgs, out: Option<&Path>) -> Result<()> {
    let full = open_corpus(&a.corpus.corpus)?;
    let corpus = select_split(&full, a.split);
    let policy: NormalizationPolicy = match &a.policy {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{}: malformed policy", p.display()))?
        }
        None => NormalizationPolicy::default(),
    };
    let mut specs: Vec<BucketSpec> = Vec::new();
    for path in &a.buckets {
        specs.extend(BucketSpec::load(path)?);
    }
    if let Some(preset) = a.bucket_preset {
        let preset = match preset {
            PresetArg::Mwz => BucketPreset::MultiWoz,
            PresetArg::M2m => BucketPreset::M2m,
            PresetArg::Woz => BucketPreset::Woz,
        };
        specs.extend(preset.specs());
    }

    // Records for dialogues of other splits are dropped; ids unknown to the
    // whole corpus still fail.
    let kept: HashSet<&str> = corpus.dialogues().iter().map(|d| d.dialogue_id.as_str()).collect();
    let predictions: Vec<_> = load_predictions(&a.predictions)?
        .into_iter()
        .filter(|p| kept.contains(p.dialogue_id.as_str()) || full.dialogue(&p.dialogue_id).is_none())
        .collect();
    let report = fine_grained_report(&corpus, &predictions, &policy, &specs)?;
    eprintln!(
        "JGA {:.4} over {} turns ({} missing predictions)",
        report.overall_jga, report.n_turns, report.n_missing_predictions
    );
    write_output(out, render_report(&report, format_of(a.format)).as_bytes())
}

fn report(a: ReportArgs, out: Option<&Path>) -> Result<()> {
    let report = read_report(&a.report)?;
    write_output(out, render_report(&report, format_of(a.format)).as_bytes())
}
