use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use obfuscan::report::{fingerprint_bytes, CombinedReport, CvReport, RunManifest};
use obfuscan::synth::{load_lexicon, load_rules};
use obfuscan::{
    cross_validate_ordered, fit_pipeline, generate_synthetic_corpus, load_corpus, load_pipeline, predict_pipeline,
    save_corpus, save_pipeline, CorpusFormat, Error, ErrorKind, LabeledCorpus, PipelineConfig, ResampleOrdering,
    SynthConfig,
};
use serde_json::json;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_TRAINING: u8 = 4;
const EXIT_IO: u8 = 5;

const SYNTH_NOTE: &str = "synthetic corpus from `obfuscan synth`; its obfuscation rules are a stand-in taxonomy, \
not a description of any real dataset";

#[derive(Parser)]
#[command(
    name = "obfuscan",
    version,
    about = "Detect character-level obfuscation in short texts",
    after_help = "Exit status:\n  0  success\n  2  usage error (unknown flag, bad argument)\n  3  data or config validation failure\n  4  training failure\n  5  I/O failure (missing or unwritable file)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus.
    Synth(SynthArgs),
    /// Cross-validate one or more pipeline configs and write a report.
    Cv(CvArgs),
    /// Fit a pipeline on a corpus and save it.
    Train(TrainArgs),
    /// Label texts with a saved pipeline.
    Predict(PredictArgs),
    /// Combine cv reports into one metric table and accuracy bar data.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// SynthConfig TOML; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lexicon file, one phrase per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// TOML file with a `[[rules]]` array.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: CorpusFormat,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Corpus format; inferred from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    format: Option<CorpusFormat>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// PipelineConfig TOML, repeatable. The four default configs are used
    /// when omitted.
    #[arg(long)]
    config: Vec<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Replication only: vectorize and oversample the whole corpus before
    /// splitting. Scores are inflated by leakage and labelled UNSAFE.
    #[arg(long)]
    unsafe_resample_before_split: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    text: Option<String>,
    /// File with one text per line.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// cv_report.json files, repeatable.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Lib(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Cv(a) => cv(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => EXIT_DATA,
                ErrorKind::Training => EXIT_TRAINING,
                ErrorKind::Io => EXIT_IO,
            })
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Error> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn prepare_out(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn infer_format(args: &CorpusArgs) -> CorpusFormat {
    args.format
        .unwrap_or_else(|| match args.corpus.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("jsonl") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        })
}

fn load(args: &CorpusArgs) -> Result<(LabeledCorpus, CorpusFormat), Error> {
    let format = infer_format(args);
    Ok((load_corpus(&args.corpus, format)?, format))
}

/// True when the corpus sits next to a manifest written by `synth`.
fn is_synthetic(corpus_path: &Path) -> bool {
    let Some(dir) = corpus_path.parent() else {
        return false;
    };
    fs::read_to_string(dir.join("manifest.json"))
        .ok()
        .and_then(|s| serde_json::from_str::<RunManifest>(&s).ok())
        .is_some_and(|m| m.command == "synth")
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

fn synth(a: SynthArgs) -> CliResult {
    let mut config = match &a.config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    config.seed = a.seed;
    if let Some(p) = &a.lexicon {
        config.base_lexicon = load_lexicon(p)?;
    }
    if let Some(p) = &a.rules {
        config.rules = load_rules(p)?;
    }
    let corpus = generate_synthetic_corpus(&config)?;

    prepare_out(&a.out)?;
    let name = format!("corpus.{}", a.format.extension());
    let mut manifest = RunManifest::new(
        "synth",
        json!({ "synth": to_value(&config), "format": a.format }),
        Some(a.seed),
    );
    for (key, path) in [("config", &a.config), ("lexicon", &a.lexicon), ("rules", &a.rules)] {
        if let Some(p) = path {
            manifest
                .input_fingerprints
                .insert(key.into(), fingerprint_bytes(&read(p)?));
        }
    }
    manifest.output_paths = vec![name.clone(), "manifest.json".into()];
    save_corpus(&corpus, a.out.join(&name), a.format)?;
    write(&a.out, "manifest.json", manifest.to_json()?)?;
    println!(
        "wrote {} ({} plain, {} obfuscated)",
        a.out.join(&name).display(),
        corpus.class_counts()[0],
        corpus.class_counts()[1]
    );
    Ok(())
}

fn cv(a: CvArgs) -> CliResult {
    let (corpus, format) = load(&a.corpus)?;
    let mut configs = if a.config.is_empty() {
        PipelineConfig::defaults(a.seed)
    } else {
        a.config
            .iter()
            .map(PipelineConfig::load)
            .collect::<Result<Vec<_>, _>>()?
    };
    for c in &mut configs {
        c.seed = a.seed;
    }
    let ordering = if a.unsafe_resample_before_split {
        eprintln!("warning: --unsafe-resample-before-split leaks test data into training; scores are inflated");
        ResampleOrdering::BeforeSplit
    } else {
        ResampleOrdering::WithinTrainingFolds
    };

    let mut manifest = RunManifest::new(
        "cv",
        json!({
            "configs": configs.iter().map(to_value).collect::<Vec<_>>(),
            "k": a.k,
            "format": format,
            "unsafe_resample_before_split": a.unsafe_resample_before_split,
        }),
        Some(a.seed),
    );
    manifest
        .input_fingerprints
        .insert("corpus".into(), corpus.fingerprint());
    for (i, p) in a.config.iter().enumerate() {
        manifest
            .input_fingerprints
            .insert(format!("config[{i}]"), fingerprint_bytes(&read(p)?));
    }
    manifest.output_paths = ["cv_report.json", "cv_report.txt", "accuracy_bars.csv", "manifest.json"]
        .map(String::from)
        .to_vec();

    let results = configs
        .iter()
        .map(|c| cross_validate_ordered(c, &corpus, a.k, a.seed, ordering))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rep = CvReport::new(results, &corpus, manifest.fingerprint())?;
    if is_synthetic(&a.corpus.corpus) {
        rep = rep.with_data_note(SYNTH_NOTE);
    }

    prepare_out(&a.out)?;
    write(&a.out, "cv_report.json", rep.to_json()?)?;
    write(&a.out, "cv_report.txt", rep.render_text())?;
    write(&a.out, "accuracy_bars.csv", rep.accuracy_bars_csv())?;
    write(&a.out, "manifest.json", manifest.to_json()?)?;
    print!("{}", rep.render_text());
    Ok(())
}

fn train(a: TrainArgs) -> CliResult {
    let (corpus, format) = load(&a.corpus)?;
    let mut config = PipelineConfig::load(&a.config)?;
    config.seed = a.seed;
    let mut pipeline = fit_pipeline(&config, &corpus)?;
    // Honour reproducible-build timestamps; otherwise leave the field out so
    // identical inputs give identical files.
    pipeline.provenance.created_unix = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok());

    let mut manifest = RunManifest::new(
        "train",
        json!({ "config": to_value(&config), "format": format }),
        Some(a.seed),
    );
    manifest
        .input_fingerprints
        .insert("corpus".into(), corpus.fingerprint());
    manifest
        .input_fingerprints
        .insert("config".into(), fingerprint_bytes(&read(&a.config)?));
    manifest.output_paths = vec!["pipeline.json".into(), "manifest.json".into()];

    prepare_out(&a.out)?;
    save_pipeline(&pipeline, a.out.join("pipeline.json"))?;
    write(&a.out, "manifest.json", manifest.to_json()?)?;
    println!(
        "wrote {} ({} terms, {} synthetic rows)",
        a.out.join("pipeline.json").display(),
        pipeline.tfidf.dim(),
        pipeline.provenance.n_synthetic
    );
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult {
    let pipeline = load_pipeline(&a.pipeline)?;
    let texts: Vec<String> = match (&a.text, &a.input) {
        (Some(t), None) => vec![t.clone()],
        (None, Some(p)) => {
            let s = String::from_utf8(read(p)?).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?;
            s.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect()
        }
        _ => return Err(Failure::Usage("give exactly one of --text or --input".into())),
    };
    for t in &texts {
        let p = predict_pipeline(&pipeline, t);
        match p.score {
            Some(s) => println!("{}\t{s:.6}\t{t}", p.label),
            None => println!("{}\t-\t{t}", p.label),
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> CliResult {
    let mut reports = Vec::with_capacity(a.input.len());
    let mut manifest = RunManifest::new(
        "report",
        json!({ "inputs": a.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() }),
        None,
    );
    for (i, p) in a.input.iter().enumerate() {
        let bytes = read(p)?;
        manifest
            .input_fingerprints
            .insert(format!("input[{i}]"), fingerprint_bytes(&bytes));
        let s = String::from_utf8(bytes).map_err(|e| Error::Malformed(e.to_string()))?;
        reports.push(CvReport::from_json(&s)?);
    }
    manifest.output_paths = [
        "combined_report.json",
        "combined_report.txt",
        "accuracy_bars.csv",
        "manifest.json",
    ]
    .map(String::from)
    .to_vec();
    let combined = CombinedReport::new(&reports, manifest.fingerprint())?;

    prepare_out(&a.out)?;
    write(&a.out, "combined_report.json", combined.to_json()?)?;
    write(&a.out, "combined_report.txt", combined.render_text())?;
    write(&a.out, "accuracy_bars.csv", combined.accuracy_bars_csv())?;
    write(&a.out, "manifest.json", manifest.to_json()?)?;
    print!("{}", combined.render_text());
    Ok(())
}
