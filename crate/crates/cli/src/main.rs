use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use barec_core::corpus::{self, Adapter, Corpus, Split, SplitConfig};
use barec_core::guidelines::batch_floors;
use barec_core::iaa::{self, BrowserFilter, Strictness};
use barec_core::table::render_table;
use barec_core::{validate_choice, Execution, GuidelineProfile, Level, LevelScheme, MetricReport};
use barec_service::{Service, SystemClock};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "barec", version, about = "Arabic sentence readability toolkit")]
struct Cli {
    /// Guideline profile (TOML). Defaults to the shipped profile.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Level scheme with granularity cut points (TOML).
    #[arg(long, global = true)]
    granularity_map: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate input files and write the canonical corpus layout.
    Ingest(IngestArgs),
    /// Assign documents to train/dev/test by word count.
    Split(SplitArgs),
    /// Corpus statistics.
    Stats(StatsArgs),
    /// Guideline floor for sentences.
    Floor(FloorArgs),
    /// Score predicted levels against gold.
    Score(ScoreArgs),
    /// Inter-annotator agreement over labeled sets.
    Iaa(IaaArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AdapterKind {
    Canonical,
    Barec,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum, default_value = "canonical")]
    adapter: AdapterKind,
    /// Documents JSONL (canonical layout only).
    #[arg(long)]
    documents: Option<PathBuf>,
    /// Sentences JSONL, or the release table for `--adapter barec`.
    #[arg(long)]
    sentences: PathBuf,
    /// Column delimiter for the release table.
    #[arg(long, default_value = "\t")]
    delimiter: String,
    /// Fail on any error-level issue.
    #[arg(long)]
    strict: bool,
    /// Output directory for documents.jsonl and sentences.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArg {
    /// Directory holding documents.jsonl and sentences.jsonl.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train, dev and test word shares.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    proportions: Vec<f64>,
    /// Extra fixed assignments, `doc_id=split`.
    #[arg(long = "assign", value_parser = parse_assignment)]
    assign: Vec<(String, Split)>,
    /// Output directory; defaults to rewriting the corpus in place.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FloorArgs {
    /// A single sentence.
    #[arg(long, conflicts_with = "input")]
    text: Option<String>,
    /// One sentence per line, optionally `id<TAB>text`. `-` reads stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Check this candidate level against the floor (single sentence only).
    #[arg(long, requires = "text")]
    level: Option<String>,
    /// Feature ids asserted by the annotator.
    #[arg(long = "assert")]
    asserted: Vec<String>,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    /// TSV (`id<TAB>level`) or JSONL predictions.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    /// Score the covered subset instead of failing on gaps.
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct IaaArgs {
    /// JSONL with one record per sentence.
    #[arg(long)]
    input: PathBuf,
    /// Require every annotator to label every sentence of a set.
    #[arg(long)]
    strict: bool,
    /// List sentences with at least this max-min difference.
    #[arg(long)]
    min_mm: Option<u8>,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Append-only event log.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    snapshot_every: u64,
    /// Corpus whose unlabeled sentences form the annotation pool.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse()
}

fn parse_assignment(s: &str) -> Result<(String, Split), String> {
    let (id, split) = s.split_once('=').ok_or("expected doc_id=split")?;
    Ok((id.to_string(), split.parse()?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let profile = || -> Result<GuidelineProfile> {
        Ok(match &cli.profile {
            Some(p) => GuidelineProfile::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => GuidelineProfile::shipped(),
        })
    };
    let scheme = || -> Result<LevelScheme> {
        Ok(match &cli.granularity_map {
            Some(p) => LevelScheme::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => LevelScheme::shipped(),
        })
    };
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a),
        Command::Stats(a) => stats(a),
        Command::Floor(a) => floor(a, &profile()?),
        Command::Score(a) => score(a, &scheme()?),
        Command::Iaa(a) => agreement(a, &scheme()?),
        Command::Serve(a) => serve(a, profile()?),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn load_corpus(dir: &Path) -> Result<Corpus> {
    let (corpus, report) = corpus::ingest_canonical(
        open(&dir.join("documents.jsonl"))?,
        open(&dir.join("sentences.jsonl"))?,
    )?;
    if report.has_errors() {
        bail!("corpus in {} has errors:\n{report}", dir.display());
    }
    Ok(corpus)
}

fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    corpus.write_documents(io::BufWriter::new(File::create(dir.join("documents.jsonl"))?))?;
    corpus.write_sentences(io::BufWriter::new(File::create(dir.join("sentences.jsonl"))?))?;
    Ok(())
}

fn ingest(a: &IngestArgs) -> Result<ExitCode> {
    let adapter = match a.adapter {
        AdapterKind::Canonical => Adapter::Canonical,
        AdapterKind::Barec => {
            let d = match a.delimiter.as_str() {
                "\\t" | "tab" => b'\t',
                s if s.len() == 1 => s.as_bytes()[0],
                s => bail!("delimiter must be one byte, got {s:?}"),
            };
            Adapter::BarecV1 { delimiter: d }
        }
    };
    let mut docs = a.documents.as_deref().map(open).transpose()?;
    let mut sents = open(&a.sentences)?;
    let (corpus, report) = match corpus::ingest(
        adapter,
        docs.as_mut().map(|d| d as &mut dyn BufRead),
        &mut sents,
        a.strict,
    ) {
        Ok(r) => r,
        Err(corpus::IngestError::Strict { report }) => {
            eprint!("{report}");
            eprintln!("{} error(s); nothing written", report.errors().count());
            return Ok(ExitCode::FAILURE);
        }
        Err(e) => return Err(e.into()),
    };
    eprint!("{report}");
    println!(
        "{} documents, {} sentences ({} errors, {} warnings)",
        corpus.documents().len(),
        corpus.sentences().len(),
        report.errors().count(),
        report.warnings().count()
    );
    if let Some(out) = &a.out {
        save_corpus(&corpus, out)?;
        println!("wrote {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn split(a: &SplitArgs) -> Result<ExitCode> {
    let mut corpus = load_corpus(&a.corpus.corpus)?;
    let config = SplitConfig {
        proportions: [a.proportions[0], a.proportions[1], a.proportions[2]],
        seed: a.seed,
    };
    let extra: BTreeMap<String, Split> = a.assign.iter().cloned().collect();
    let assignment = corpus::split_documents(&corpus, &config, &extra)?;
    corpus.apply_split(&assignment);
    let s = corpus::stats(&corpus);
    let total = s.total.words.max(1) as f64;
    let rows: Vec<Vec<String>> = Split::ASSIGNABLE
        .iter()
        .map(|sp| {
            let c = s.by_split.get(sp).copied().unwrap_or_default();
            vec![
                sp.to_string(),
                c.documents.to_string(),
                c.sentences.to_string(),
                c.words.to_string(),
                format!("{:.1}%", 100.0 * c.words as f64 / total),
            ]
        })
        .collect();
    print!("{}", render_table(&["Split", "Documents", "Sentences", "Words", "Share"], &rows));
    let out = a.out.as_ref().unwrap_or(&a.corpus.corpus);
    save_corpus(&corpus, out)?;
    Ok(ExitCode::SUCCESS)
}

fn stats(a: &StatsArgs) -> Result<ExitCode> {
    let corpus = load_corpus(&a.corpus.corpus)?;
    let s = corpus::stats(&corpus);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&s)?);
        return Ok(ExitCode::SUCCESS);
    }
    let (h, rows) = s.level_table();
    print!("{}", render_table(&h, &rows));
    println!();
    let (h, rows) = s.domain_table();
    print!("{}", render_table(&h, &rows));
    println!();
    let r = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!("excluded sentences: {}", s.excluded_sentences);
    println!("unannotated sentences: {}", s.unannotated_sentences);
    println!("pearson(level, words) per sentence: {}", r(s.pearson_sentence));
    println!("pearson(level, mean words): {}", r(s.pearson_level_means));
    Ok(ExitCode::SUCCESS)
}

fn floor(a: &FloorArgs, profile: &GuidelineProfile) -> Result<ExitCode> {
    if let Some(text) = &a.text {
        let mut features = profile.detect(text);
        for id in &a.asserted {
            let dim = *profile
                .asserted_features()
                .get(id)
                .with_context(|| format!("unknown asserted feature {id:?}"))?;
            features = features.with_asserted(id.clone(), dim);
        }
        let judgment = match &a.level {
            Some(l) => validate_choice(Level::parse(l)?, &features, profile),
            None => barec_core::compute_floor(&features, profile)?,
        };
        if a.json {
            println!("{}", serde_json::to_string_pretty(&serde_json::json!({
                "word_count": features.word_count,
                "max_syllables": features.max_syllables,
                "judgment": judgment,
            }))?);
        } else {
            println!("words: {}", features.word_count);
            if let Some(n) = features.max_syllables {
                println!("longest word: {n} syllables");
            }
            for step in &judgment.trace {
                println!("  {} -> {} ({})", step.rule, step.level, step.detail);
            }
            println!("floor: {}", judgment.floor.name());
            for v in &judgment.violations {
                println!("violation: {}", v.message());
            }
        }
        return Ok(if judgment.violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) });
    }
    let Some(input) = &a.input else {
        bail!("give --text or --input");
    };
    let mut raw = String::new();
    if input.as_os_str() == "-" {
        io::stdin().read_to_string(&mut raw)?;
    } else {
        raw = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    }
    let items: Vec<(String, String)> = raw
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| match l.split_once('\t') {
            Some((id, text)) => (id.to_string(), text.to_string()),
            None => ((i + 1).to_string(), l.to_string()),
        })
        .collect();
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let records = batch_floors(&items, profile, exec);
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    for r in &records {
        if a.json {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        } else {
            let floor = r.judgment.as_ref().map_or("-", |j| j.floor.name());
            writeln!(out, "{}\t{}\t{}", r.id, r.word_count, floor)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn score(a: &ScoreArgs, scheme: &LevelScheme) -> Result<ExitCode> {
    let corpus = load_corpus(&a.corpus.corpus)?;
    let preds = corpus::read_predictions(open(&a.predictions)?)?;
    let outcome = corpus::score_predictions(&corpus, a.split, &preds, a.lenient, scheme)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&outcome)?);
    } else {
        print!(
            "{}",
            render_table(&MetricReport::TABLE_HEADER, &[outcome.report.table_cells().to_vec()])
        );
        if !outcome.missing.is_empty() || !outcome.extra.is_empty() {
            println!(
                "scored {} ({} gold without prediction, {} predictions outside gold)",
                outcome.scored,
                outcome.missing.len(),
                outcome.extra.len()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn agreement(a: &IaaArgs, scheme: &LevelScheme) -> Result<ExitCode> {
    let sets = iaa::read_jsonl(open(&a.input)?)?;
    let strictness = if a.strict { Strictness::Strict } else { Strictness::Lenient };
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let results = iaa::pairwise_reports(&sets, strictness, scheme, exec)?;
    let phases = iaa::phase_rollup(&results, scheme)?;
    let overall = iaa::overall_rollup("all", &results, scheme)?;
    let unification = iaa::unification_stats(&sets, scheme).ok();
    let vs_ul = iaa::annotator_vs_ul(&sets, scheme).ok();
    let browser = a.min_mm.map(|min_mm| {
        iaa::disagreement_browser(&sets, &BrowserFilter { min_mm: Some(min_mm), ..Default::default() })
    });
    if a.json {
        println!("{}", serde_json::to_string_pretty(&serde_json::json!({
            "sets": results,
            "phases": phases,
            "overall": overall,
            "unification": unification,
            "annotator_vs_ul": vs_ul,
            "disagreements": browser,
        }))?);
        return Ok(ExitCode::SUCCESS);
    }
    let mut header = vec!["Set", "Phase"];
    header.extend(MetricReport::TABLE_HEADER);
    let mut rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let mut row = vec![r.set_id.clone(), r.phase.clone()];
            row.extend(r.average.table_cells());
            row
        })
        .collect();
    for p in phases.iter().chain([&overall]) {
        for (kind, rep) in [("macro", &p.macro_report), ("micro", &p.micro_report)] {
            let mut row = vec![format!("{} ({kind})", p.phase), String::new()];
            row.extend(rep.table_cells());
            rows.push(row);
        }
    }
    print!("{}", render_table(&header, &rows));
    for r in &results {
        for (x, y) in &r.skipped_pairs {
            println!("note: {} / {x}-{y} share no sentence", r.set_id);
        }
    }
    if let Some(u) = &unification {
        println!();
        println!(
            "unified sentences: {} ({} without UL); UL within annotator range {:.1}%, equal to an annotator label {:.1}%",
            u.sentences,
            u.skipped_missing_ul,
            100.0 * u.within_range_rate,
            100.0 * u.matches_annotator_rate
        );
        print!("{}", render_table(&iaa::GRANULARITY_HEADER, &iaa::granularity_rows(&u.al_vs_ul)));
    }
    if let Some(v) = &vs_ul {
        println!();
        let mut header = vec!["Annotator"];
        header.extend(MetricReport::TABLE_HEADER);
        let mut rows: Vec<Vec<String>> = v
            .rows
            .iter()
            .map(|(a, r)| {
                let mut row = vec![a.clone()];
                row.extend(r.table_cells());
                row
            })
            .collect();
        let mut avg = vec!["average".to_string()];
        avg.extend(v.macro_report.table_cells());
        rows.push(avg);
        print!("{}", render_table(&header, &rows));
    }
    if let Some(rows) = browser {
        println!();
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let labels: Vec<String> = r.labels.iter().map(|(a, l)| format!("{a}:{l}")).collect();
                vec![
                    r.set_id.clone(),
                    r.sentence_id.clone(),
                    r.mm.to_string(),
                    r.al.to_string(),
                    r.ul.map_or("-".into(), |l| l.to_string()),
                    labels.join(" "),
                ]
            })
            .collect();
        print!("{}", render_table(&["Set", "Sentence", "MM", "AL", "UL", "Labels"], &table));
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(a: &ServeArgs, profile: GuidelineProfile) -> Result<ExitCode> {
    let snapshot = a.snapshot.as_deref().map(|p| (p, a.snapshot_every));
    let service = Service::open(profile, Box::new(SystemClock), &a.log, snapshot)?;
    if let Some(dir) = &a.corpus {
        let added = service.load_corpus(&load_corpus(dir)?)?;
        eprintln!("registered {added} sentence(s) for annotation");
    }
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("listening on {}", a.addr);
    rt.block_on(barec_service::http::serve(Arc::new(service), &a.addr))?;
    Ok(ExitCode::SUCCESS)
}
