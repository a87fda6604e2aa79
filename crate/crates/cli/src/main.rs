use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use sdparse::eval::{
    attachment_scores_with, bench_speed, graph_f1, tradeoff_report, BenchOptions, EvalReport, PunctPolicy,
};
use sdparse::features::{ArcContext, TemplateConfig, DEFAULT_HASH_BITS};
use sdparse::fixtures::{generate_corpus, ToyGrammar};
use sdparse::graph_parser::{parse as graph_parse, Decoder};
use sdparse::io::{load_clusters, read_conll, read_sd_graphs, write_conll, write_corpus, write_sd_graph, ClusterLexicon};
use sdparse::learn::{load_model, save_model, train_structured, Model, ModelKind, TrainOptions, TrainResources};
use sdparse::sd_transform::{basic_to_ccprocessed, Rule1Mode, TransformConfig};
use sdparse::stacking::{
    annotate_training, build_plan, load_bundle, save_bundle, train_stacked, ParserFamily, ParserSpec, StackedBundle,
};
use sdparse::transition_parser::{parse_greedy, train_transition};
use sdparse::{DependencyGraph, DependencyTree, Error, Sentence};

const MODEL_DIR_ENV: &str = "SDPARSE_MODEL_DIR";

enum CliError {
    Usage(String),
    Data(String),
    /// The reader of our output went away (e.g. `| head`).
    ClosedPipe,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(m),
            Error::Io(e) => e.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            CliError::ClosedPipe
        } else {
            CliError::Data(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "sdparse", version, about = "Stanford-dependency parsing, transformation and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a parser on a CoNLL corpus with gold trees.
    Train(TrainArgs),
    /// Parse a CoNLL corpus, optionally emitting CCprocessed tuples.
    Parse(ParseArgs),
    /// Convert the gold Basic trees of a CoNLL corpus to CCprocessed tuples.
    Transform(TransformArgs),
    /// Score predictions against gold (trees or tuples).
    Evaluate(EvaluateArgs),
    /// Measure throughput and accuracy; prints a tradeoff CSV.
    Bench(BenchArgs),
    /// Train a stacked parser bundle with jackknifed first-stage output.
    StackTrain(StackTrainArgs),
    /// Parse with a stacked bundle.
    StackParse(StackParseArgs),
    /// Write a synthetic corpus from the built-in toy grammar.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Graph,
    Transition,
}

#[derive(Clone, Copy, ValueEnum)]
enum FirstFamily {
    Graph,
    Transition,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Proj,
    Nonproj,
    Sib,
    SibGp,
}

impl From<DecoderArg> for Decoder {
    fn from(d: DecoderArg) -> Self {
        match d {
            DecoderArg::Proj => Decoder::Projective,
            DecoderArg::Nonproj => Decoder::NonProjective,
            DecoderArg::Sib => Decoder::Sibling,
            DecoderArg::SibGp => Decoder::SiblingGrandparent,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule1Arg {
    Corrected,
    Literal,
}

impl From<Rule1Arg> for Rule1Mode {
    fn from(r: Rule1Arg) -> Self {
        match r {
            Rule1Arg::Corrected => Rule1Mode::Corrected,
            Rule1Arg::Literal => Rule1Mode::Literal,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransformKind {
    None,
    Ccprocessed,
}

#[derive(Args, Clone)]
struct PosArgs {
    /// Where POS tags come from: `column` (fine tag column), `gold` (coarse
    /// gold column) or `file:PATH` (one tag per line, blank line between
    /// sentences).
    #[arg(long, default_value = "column", value_parser = parse_pos_source)]
    pos_source: PosSource,
}

#[derive(Clone, Debug)]
enum PosSource {
    Column,
    Gold,
    File(PathBuf),
}

fn parse_pos_source(s: &str) -> Result<PosSource, String> {
    match s {
        "column" => Ok(PosSource::Column),
        "gold" => Ok(PosSource::Gold),
        other => match other.strip_prefix("file:") {
            Some(path) if !path.is_empty() => Ok(PosSource::File(PathBuf::from(path))),
            _ => Err(format!("expected column, gold or file:PATH, got '{other}'")),
        },
    }
}

#[derive(Args, Clone)]
struct TransformFlags {
    /// Reading of the uncollapsed-cc repair rule.
    #[arg(long, value_enum, default_value = "corrected")]
    rule1: Rule1Arg,
    #[arg(long)]
    no_collapse_preps: bool,
    #[arg(long)]
    no_collapse_conj: bool,
    #[arg(long)]
    no_propagate: bool,
    #[arg(long)]
    no_rule1: bool,
    #[arg(long)]
    no_rule2: bool,
}

impl TransformFlags {
    fn config(&self) -> TransformConfig {
        TransformConfig {
            rule1_mode: self.rule1.into(),
            collapse_preps: !self.no_collapse_preps,
            collapse_conj: !self.no_collapse_conj,
            propagate: !self.no_propagate,
            rule1: !self.no_rule1,
            rule2: !self.no_rule2,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "graph")]
    parser: Family,
    #[arg(long, value_enum, default_value = "proj")]
    decoder: DecoderArg,
    #[arg(long)]
    input: PathBuf,
    /// Output model path; relative paths resolve against $SDPARSE_MODEL_DIR when set.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_HASH_BITS)]
    hash_bits: u8,
    /// Brown-cluster file (`bits word [count]`); enables cluster templates.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Enable sibling/grandparent features (used by sib and sib-gp decoders).
    #[arg(long)]
    second_order: bool,
    /// Shuffle sentence order each epoch.
    #[arg(long)]
    shuffle: bool,
    #[command(flatten)]
    pos: PosArgs,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the decoder stored in a graph model.
    #[arg(long, value_enum)]
    decoder: Option<DecoderArg>,
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    transform: TransformKind,
    #[command(flatten)]
    transform_flags: TransformFlags,
    #[command(flatten)]
    pos: PosArgs,
    /// Worker threads for per-sentence parallel parsing.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the rewrite trace to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    transform_flags: TransformFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Skip tokens tagged `` '' . , : when scoring trees.
    #[arg(long)]
    exclude_punct: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Gold CoNLL corpus; parsed for timing and scored for accuracy.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    decoder: Option<DecoderArg>,
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Row label in the CSV.
    #[arg(long, default_value = "parser")]
    name: String,
    #[arg(long, default_value_t = sdparse::eval::DEFAULT_WARMUP)]
    warmup: usize,
    /// Count CCprocessed conversion in the timing and report graph F1.
    #[arg(long)]
    include_transform: bool,
    #[command(flatten)]
    transform_flags: TransformFlags,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    pos: PosArgs,
}

#[derive(Args)]
struct StackTrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output bundle path; relative paths resolve against $SDPARSE_MODEL_DIR when set.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = sdparse::stacking::DEFAULT_K)]
    k: usize,
    #[arg(long, value_enum, default_value = "transition")]
    first: FirstFamily,
    #[arg(long, value_enum, default_value = "proj")]
    first_decoder: DecoderArg,
    /// Decoder of the second-stage graph parser.
    #[arg(long, value_enum, default_value = "proj")]
    decoder: DecoderArg,
    /// Parallel CoNLL file whose trees the first stage learns instead.
    #[arg(long)]
    first_annotation: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_HASH_BITS)]
    hash_bits: u8,
    #[arg(long)]
    second_order: bool,
    /// Train the second stage without stacking features.
    #[arg(long)]
    no_stacking_features: bool,
    #[command(flatten)]
    pos: PosArgs,
}

#[derive(Args)]
struct StackParseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    pos: PosArgs,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Parse(a) => cmd_parse(a),
        Command::Transform(a) => cmd_transform(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::StackTrain(a) => cmd_stack_train(a),
        Command::StackParse(a) => cmd_stack_parse(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) | Err(CliError::ClosedPipe) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn model_path(path: &Path) -> PathBuf {
    match std::env::var_os(MODEL_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_corpus(path: &Path) -> CliResult<Vec<Sentence>> {
    Ok(read_conll(open(path)?)?)
}

fn read_tag_file(path: &Path) -> CliResult<Vec<Vec<String>>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        let tag = line.trim();
        if tag.is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else {
            current.push(tag.to_string());
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

/// Applies the chosen POS source to every sentence.
fn apply_pos_source(corpus: Vec<Sentence>, pos: &PosArgs) -> CliResult<Vec<Sentence>> {
    match &pos.pos_source {
        PosSource::Column => Ok(corpus),
        PosSource::Gold => corpus
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let tags: Vec<String> = s.tokens().iter().map(|t| t.cpos().to_string()).collect();
                if let Some(j) = tags.iter().position(String::is_empty) {
                    return Err(CliError::Data(format!(
                        "sentence {} token {} has no gold POS tag",
                        i + 1,
                        j + 1
                    )));
                }
                Ok(s.with_fine_tags(&tags)?)
            })
            .collect(),
        PosSource::File(path) => {
            let tags = read_tag_file(path)?;
            if tags.len() != corpus.len() {
                return Err(CliError::Data(format!(
                    "tag file has {} sentences, corpus has {}",
                    tags.len(),
                    corpus.len()
                )));
            }
            corpus
                .into_iter()
                .zip(tags)
                .map(|(s, t)| Ok(s.with_fine_tags(&t)?))
                .collect()
        }
    }
}

fn load_cluster_file(path: Option<&PathBuf>) -> CliResult<Option<ClusterLexicon>> {
    path.map(|p| Ok(load_clusters(open(p)?)?)).transpose()
}

fn check_model_resources(model: &Model, clusters: Option<&ClusterLexicon>) -> CliResult {
    if model.config().enable_stacking {
        return Err(CliError::Usage(
            "model uses stacking features; parse it through stack-parse".into(),
        ));
    }
    if model.config().enable_clusters && clusters.is_none() {
        return Err(CliError::Usage("model was trained with cluster features; pass --clusters".into()));
    }
    Ok(())
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(pool.install(f))
}

fn parse_one(
    model: &Model,
    decoder: Option<Decoder>,
    clusters: Option<&ClusterLexicon>,
    sentence: &Sentence,
) -> sdparse::Result<DependencyTree> {
    match model.kind() {
        ModelKind::Transition => parse_greedy(sentence, model),
        ModelKind::Graph(d) => {
            let ctx = ArcContext { clusters, stacked: None };
            graph_parse(sentence, model, &ctx, decoder.unwrap_or(d))
        }
    }
}

fn write_trees_or_graphs(
    out: &mut dyn Write,
    corpus: &[Sentence],
    trees: &[DependencyTree],
    transform: Option<&TransformConfig>,
) -> CliResult {
    match transform {
        None => write_conll(out, corpus, trees)?,
        Some(config) => {
            for (s, t) in corpus.iter().zip(trees) {
                let (g, _) = basic_to_ccprocessed(t, s, config);
                write_sd_graph(out, s, &g)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult {
    let mut config = TemplateConfig::with_hash_bits(a.hash_bits)?;
    config.enable_second_order = a.second_order;
    config.enable_clusters = a.clusters.is_some();
    if a.second_order && !matches!(a.parser, Family::Graph) {
        return Err(CliError::Usage("--second-order applies to the graph parser only".into()));
    }
    if a.clusters.is_some() && !matches!(a.parser, Family::Graph) {
        return Err(CliError::Usage("--clusters applies to the graph parser only".into()));
    }
    let corpus = apply_pos_source(read_corpus(&a.input)?, &a.pos)?;
    let clusters = load_cluster_file(a.clusters.as_ref())?;
    let (model, log) = match a.parser {
        Family::Transition => train_transition(&corpus, &config, a.epochs, a.seed)?,
        Family::Graph => {
            let options = TrainOptions {
                decoder: a.decoder.into(),
                config,
                epochs: a.epochs,
                seed: a.seed,
                shuffle: a.shuffle,
            };
            let resources = TrainResources {
                clusters: clusters.as_ref(),
                stacked: None,
            };
            train_structured(&corpus, &options, &resources)?
        }
    };
    for e in &log.epochs {
        eprintln!(
            "epoch={} uas={:.4} las={:.4} updates={} seconds={:.3}",
            e.epoch, e.uas, e.las, e.updates, e.seconds
        );
    }
    if log.skipped_nonprojective > 0 {
        eprintln!("skipped_nonprojective={}", log.skipped_nonprojective);
    }
    save_model(&model, model_path(&a.model))?;
    Ok(())
}

fn cmd_parse(a: ParseArgs) -> CliResult {
    let model = load_model(model_path(&a.model))?;
    let clusters = load_cluster_file(a.clusters.as_ref())?;
    check_model_resources(&model, clusters.as_ref())?;
    if a.decoder.is_some() && model.kind() == ModelKind::Transition {
        return Err(CliError::Usage("--decoder does not apply to a transition model".into()));
    }
    let corpus = apply_pos_source(read_corpus(&a.input)?, &a.pos)?;
    let decoder = a.decoder.map(Decoder::from);
    let trees = with_pool(a.jobs, || {
        corpus
            .par_iter()
            .map(|s| parse_one(&model, decoder, clusters.as_ref(), s))
            .collect::<sdparse::Result<Vec<_>>>()
    })??;
    let transform = (a.transform == TransformKind::Ccprocessed).then(|| a.transform_flags.config());
    write_trees_or_graphs(&mut *output(a.output.as_deref())?, &corpus, &trees, transform.as_ref())
}

fn cmd_transform(a: TransformArgs) -> CliResult {
    let corpus = read_corpus(&a.input)?;
    let config = a.transform_flags.config();
    let mut out = output(a.output.as_deref())?;
    let mut trace_out = a.trace.as_deref().map(|p| output(Some(p))).transpose()?;
    for (i, s) in corpus.iter().enumerate() {
        let tree = s
            .gold_tree()
            .ok_or_else(|| CliError::Data(format!("sentence {} has no tree to transform", i + 1)))?;
        let (g, trace) = basic_to_ccprocessed(tree, s, &config);
        write_sd_graph(&mut out, s, &g)?;
        if let Some(t) = trace_out.as_mut() {
            writeln!(t, "# sentence {}", i + 1)?;
            t.write_all(trace.to_text().as_bytes())?;
        }
    }
    out.flush()?;
    if let Some(mut t) = trace_out {
        t.flush()?;
    }
    Ok(())
}

#[derive(Debug, PartialEq, Eq)]
enum FileFormat {
    Conll,
    Tuples,
}

fn detect_format(path: &Path) -> CliResult<FileFormat> {
    for line in open(path)?.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if line.split('\t').count() == 10 {
            return Ok(FileFormat::Conll);
        }
        if sdparse::io::parse_sd_line(&line).is_ok() {
            return Ok(FileFormat::Tuples);
        }
        return Err(CliError::Usage(format!("{}: unrecognised file format", path.display())));
    }
    Err(CliError::Data(format!("{}: file is empty", path.display())))
}

fn read_graphs(path: &Path) -> CliResult<Vec<DependencyGraph>> {
    Ok(read_sd_graphs(open(path)?)?)
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult {
    let (gf, pf) = (detect_format(&a.gold)?, detect_format(&a.pred)?);
    if gf != pf {
        return Err(CliError::Usage("gold and predicted files use different formats".into()));
    }
    let mut report = EvalReport::default();
    match gf {
        FileFormat::Conll => {
            let gold = read_corpus(&a.gold)?;
            let pred = read_corpus(&a.pred)?;
            let trees = |c: &[Sentence], what: &str| -> CliResult<Vec<DependencyTree>> {
                c.iter()
                    .enumerate()
                    .map(|(i, s)| {
                        s.gold_tree()
                            .cloned()
                            .ok_or_else(|| CliError::Data(format!("{what} sentence {} has no tree", i + 1)))
                    })
                    .collect()
            };
            let policy = if a.exclude_punct {
                PunctPolicy::ExcludeByPos
            } else {
                PunctPolicy::Include
            };
            let scores = attachment_scores_with(&gold, &trees(&gold, "gold")?, &trees(&pred, "predicted")?, policy)?;
            report.uas = Some(scores.uas);
            report.las = Some(scores.las);
            report.tokens = scores.scored_tokens;
            report.sentences = scores.sentences;
        }
        FileFormat::Tuples => {
            let gold = read_graphs(&a.gold)?;
            let pred = read_graphs(&a.pred)?;
            report.unlabeled = Some(graph_f1(&gold, &pred, false)?);
            report.labeled = Some(graph_f1(&gold, &pred, true)?);
            report.sentences = gold.len();
            report.tokens = gold.iter().map(DependencyGraph::len).sum();
        }
    }
    print!("{}", report.to_text());
    Ok(())
}

fn gold_trees(corpus: &[Sentence]) -> CliResult<Vec<DependencyTree>> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.gold_tree()
                .cloned()
                .ok_or_else(|| CliError::Data(format!("sentence {} has no gold tree", i + 1)))
        })
        .collect()
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let model = load_model(model_path(&a.model))?;
    let clusters = load_cluster_file(a.clusters.as_ref())?;
    check_model_resources(&model, clusters.as_ref())?;
    let corpus = apply_pos_source(read_corpus(&a.input)?, &a.pos)?;
    let gold = gold_trees(&corpus)?;
    let decoder = a.decoder.map(Decoder::from);
    let tconfig = a.transform_flags.config();
    let parse = |s: &Sentence| parse_one(&model, decoder, clusters.as_ref(), s);
    let transform = |s: &Sentence, t: &DependencyTree| Ok(basic_to_ccprocessed(t, s, &tconfig).0);
    let options = BenchOptions {
        warmup: a.warmup,
        workers: a.workers,
    };
    let bench = bench_speed(&corpus, options, parse, a.include_transform.then_some(&transform as _))?;

    let pred = corpus.iter().map(parse).collect::<sdparse::Result<Vec<_>>>()?;
    let scores = attachment_scores_with(&corpus, &gold, &pred, PunctPolicy::Include)?;
    let mut report = EvalReport {
        uas: Some(scores.uas),
        las: Some(scores.las),
        tokens_per_second: Some(bench.tokens_per_second),
        tokens: bench.tokens,
        sentences: bench.sentences,
        parse_seconds: Some(bench.parse_seconds),
        transform_seconds: Some(bench.transform_seconds),
        ..Default::default()
    };
    if a.include_transform {
        let graphs = |trees: &[DependencyTree]| -> Vec<DependencyGraph> {
            corpus
                .iter()
                .zip(trees)
                .map(|(s, t)| basic_to_ccprocessed(t, s, &tconfig).0)
                .collect()
        };
        let (g, p) = (graphs(&gold), graphs(&pred));
        report.unlabeled = Some(graph_f1(&g, &p, false)?);
        report.labeled = Some(graph_f1(&g, &p, true)?);
    }
    eprint!("{}", bench.to_key_values());
    print!("{}", tradeoff_report(&[(a.name, report)]));
    Ok(())
}

fn cmd_stack_train(a: StackTrainArgs) -> CliResult {
    let corpus = apply_pos_source(read_corpus(&a.input)?, &a.pos)?;
    let first_corpus = match &a.first_annotation {
        Some(p) => Some(apply_pos_source(read_corpus(p)?, &a.pos)?),
        None => None,
    };
    let mut first_config = TemplateConfig::with_hash_bits(a.hash_bits)?;
    let mut second_config = first_config.clone();
    first_config.enable_second_order = a.second_order;
    second_config.enable_second_order = a.second_order;
    second_config.enable_stacking = !a.no_stacking_features;
    let family = match a.first {
        FirstFamily::Graph => ParserFamily::Graph(a.first_decoder.into()),
        FirstFamily::Transition => ParserFamily::Transition,
        FirstFamily::Oracle => ParserFamily::Oracle,
    };
    let spec = |family, config| ParserSpec {
        family,
        config,
        epochs: a.epochs,
        seed: a.seed,
    };
    let mut plan = build_plan(
        corpus.len(),
        a.k,
        spec(family, first_config),
        spec(ParserFamily::Graph(a.decoder.into()), second_config),
    )
    .map_err(|e| match e {
        Error::Stacking(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    let annotated = annotate_training(&mut plan, &corpus, first_corpus.as_deref())?;
    let log = train_stacked(&mut plan, &corpus, &annotated, first_corpus.as_deref())?;
    if let Some(e) = log.last() {
        eprintln!("second_stage_epoch={} uas={:.4} las={:.4}", e.epoch, e.uas, e.las);
    }
    let bundle = StackedBundle::from_plan(&plan)?;
    println!("{}", plan.audit_report().summary());
    save_bundle(&bundle, model_path(&a.model))?;
    Ok(())
}

fn cmd_stack_parse(a: StackParseArgs) -> CliResult {
    let bundle = load_bundle(model_path(&a.model))?;
    if bundle.second.is_none() {
        return Err(CliError::Data("bundle has no second-stage model".into()));
    }
    let corpus = apply_pos_source(read_corpus(&a.input)?, &a.pos)?;
    let trees = with_pool(a.jobs, || {
        corpus
            .par_iter()
            .map(|s| bundle.parse(s))
            .collect::<sdparse::Result<Vec<_>>>()
    })??;
    write_trees_or_graphs(&mut *output(a.output.as_deref())?, &corpus, &trees, None)
}

fn cmd_generate(a: GenerateArgs) -> CliResult {
    let corpus = generate_corpus(&ToyGrammar::default(), a.count, a.seed)?;
    let mut out = output(a.output.as_deref())?;
    write_corpus(&mut out, &corpus)?;
    out.flush()?;
    Ok(())
}
