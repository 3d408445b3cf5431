mod error;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use deskcap::codec::{write_media, GopConfig};
use deskcap::container::{
    format::MAGIC, recover, summarize, write_session, ContainerReader, MediaPolicy, MessageFilter,
    WriteOptions,
};
use deskcap::decode_engine::{bench_pipeline, parse_strategies, BenchConfig, Strategy};
use deskcap::events::{
    filter_inactive, resample_stream, segment_screen_stream, split_inactive, Episode, Timestamp,
    Topic, DEFAULT_INACTIVE_THRESHOLD_S, DEFAULT_RESAMPLE_MS,
};
use deskcap::fsl::{pack_dataset, write_dataset, PackConfig};
use deskcap::metrics::{evaluate, DEFAULT_BIN_MS};
use deskcap::synth::{generate, Actor, SynthConfig};
use deskcap::tokenizer::{read_token_file, write_token_file, TokenizerConfig, TOKEN_FILE_MAGIC};

use error::{CliError, Kind, Result};

/// Desktop interaction recordings: generate, convert, tokenize, pack,
/// benchmark and evaluate.
#[derive(Parser)]
#[command(name = "deskcap", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session: a container plus its media store.
    Gen(GenArgs),
    /// Resample and drop inactive spans.
    Convert(ConvertArgs),
    /// Write a container as a token file.
    Tokenize(InOut),
    /// Rebuild a container from a token file.
    Detok(InOut),
    /// Pack episodes into a fixed-length token dataset.
    Pack(PackArgs),
    /// Benchmark decode strategies over a packed dataset.
    Bench(BenchArgs),
    /// Compare predicted actions against ground truth.
    Eval(EvalArgs),
    /// List the two-minute evaluation windows of a recording.
    Segment(SegmentArgs),
    /// Dump events and storage statistics.
    Inspect(InspectArgs),
    /// Rebuild the index of a truncated or damaged container in place.
    Recover(RecoverArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Length in seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 20.0)]
    fps: f64,
    #[arg(long, default_value_t = 160)]
    width: u16,
    #[arg(long, default_value_t = 90)]
    height: u16,
    #[arg(long, default_value = "rect-chase")]
    actor: Actor,
    #[arg(long, default_value = "fixed:30")]
    gop: GopConfig,
    /// Container path; the store is written beside it as `<stem>.gops`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MediaRootArg {
    /// Directory external media paths are relative to [default: the
    /// input's directory].
    #[arg(long)]
    media_root: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Mouse resampling interval; 0 disables.
    #[arg(long, default_value_t = DEFAULT_RESAMPLE_MS)]
    resample_ms: u64,
    /// Inactivity threshold in seconds; 0 disables.
    #[arg(long, default_value_t = DEFAULT_INACTIVE_THRESHOLD_S)]
    filter_inactive: f64,
    /// Split at inactive spans instead of collapsing them; writes
    /// `<stem>-<k>.<ext>`.
    #[arg(long)]
    split: bool,
    #[command(flatten)]
    media: MediaRootArg,
}

#[derive(Args)]
struct InOut {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    media: MediaRootArg,
}

#[derive(Args)]
struct PackArgs {
    /// Containers or token files.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = deskcap::fsl::DEFAULT_MAX_SEQ_LEN)]
    max_len: usize,
    #[arg(long, default_value_t = deskcap::fsl::DEFAULT_TAU)]
    tau: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    media: MediaRootArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchFormat {
    Table,
    Records,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Comma list of per_frame, naive_batch, adaptive_batch, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_strategies)]
    strategies: std::vec::Vec<Strategy>,
    /// Comma list of GOP modes.
    #[arg(long, default_value = "fixed:30,variable:7", value_delimiter = ',')]
    gop: Vec<GopConfig>,
    #[arg(long, default_value_t = deskcap::decode_engine::DEFAULT_REPS)]
    reps: usize,
    /// Scratch directory for transcoded stores [default: a temporary
    /// directory].
    #[arg(long)]
    work_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: BenchFormat,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BIN_MS)]
    bin_ms: u64,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    frames: u64,
    #[arg(long, default_value_t = 20.0)]
    fps: f64,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma list of screen, keyboard, mouse.
    #[arg(long, value_delimiter = ',')]
    topic: Vec<Topic>,
    /// Half-open time window in seconds, `START:END`; either side may be
    /// empty.
    #[arg(long)]
    range: Option<String>,
    /// Print only the summary.
    #[arg(long)]
    summary_only: bool,
    #[command(flatten)]
    media: MediaRootArg,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn media_root(arg: &MediaRootArg, input: &Path) -> PathBuf {
    arg.media_root.clone().unwrap_or_else(|| parent_dir(input))
}

enum InputKind {
    Container,
    Tokens,
}

fn require_file(path: &Path) -> Result<()> {
    fs::metadata(path)
        .map(|_| ())
        .map_err(|e| CliError::new(Kind::Io, "io", format!("{}: {e}", path.display())))
}

fn sniff(path: &Path) -> Result<InputKind> {
    require_file(path)?;
    let mut head = [0u8; 17];
    let mut f = fs::File::open(path)?;
    let n = f.read(&mut head)?;
    if head[..n].starts_with(MAGIC) {
        Ok(InputKind::Container)
    } else if head[..n].starts_with(TOKEN_FILE_MAGIC.as_bytes()) {
        Ok(InputKind::Tokens)
    } else {
        Err(CliError::data(
            "input.unrecognized",
            format!("{} is neither a container nor a token file", path.display()),
        ))
    }
}

/// Loads an episode from a container or a token file.
fn load_episode(path: &Path) -> Result<Episode> {
    match sniff(path)? {
        InputKind::Container => Ok(ContainerReader::open_path(path)?.read_episode()?),
        InputKind::Tokens => {
            let text = fs::read_to_string(path)?;
            Ok(read_token_file(&text, &TokenizerConfig::default())?)
        }
    }
}

fn write_container(path: &Path, ep: &Episode, media_root: &Path) -> Result<()> {
    let policy = MediaPolicy::External {
        media_root: media_root.to_path_buf(),
    };
    let summary = write_session(path, ep, &policy, &WriteOptions::default())?;
    log::info!(
        "wrote {}: {} messages in {} chunks, {} bytes",
        path.display(),
        summary.messages,
        summary.chunks,
        summary.bytes
    );
    Ok(())
}

fn gen(args: GenArgs, out: &mut impl Write) -> Result<()> {
    let cfg = SynthConfig {
        seed: args.seed,
        duration_s: args.duration,
        fps: args.fps,
        width: args.width,
        height: args.height,
        actor: args.actor,
    };
    cfg.validate().map_err(CliError::usage)?;
    args.gop.validate()?;
    let stem = args
        .out
        .file_stem()
        .ok_or_else(|| CliError::usage("--out needs a file name"))?
        .to_string_lossy()
        .into_owned();
    let dir = parent_dir(&args.out);
    let store_name = format!("{stem}.gops");
    let synth = generate(&cfg, &store_name);
    let store_bytes = write_media(dir.join(&store_name), &synth.frames, &args.gop, cfg.fps as f32)?;
    write_container(&args.out, &synth.episode, &dir)?;
    writeln!(
        out,
        "episode={} events={} screens={} store={} store_bytes={}",
        synth.episode.id,
        synth.episode.len(),
        synth.episode.count(Topic::Screen),
        store_name,
        store_bytes
    )?;
    Ok(())
}

fn convert(args: ConvertArgs, out: &mut impl Write) -> Result<()> {
    if args.filter_inactive < 0.0 || !args.filter_inactive.is_finite() {
        return Err(CliError::usage("--filter-inactive must be a non-negative number of seconds"));
    }
    let root = media_root(&args.media, &args.input);
    let mut ep = load_episode(&args.input)?;
    let before = ep.len();
    if args.resample_ms > 0 {
        ep = resample_stream(&ep, args.resample_ms);
    }
    let episodes = match (args.filter_inactive > 0.0, args.split) {
        (false, _) => vec![ep],
        (true, false) => vec![filter_inactive(&ep, args.filter_inactive)],
        (true, true) => split_inactive(&ep, args.filter_inactive),
    };
    if !args.split {
        write_container(&args.out, &episodes[0], &root)?;
        writeln!(out, "events_in={before} events_out={}", episodes[0].len())?;
        return Ok(());
    }
    let stem = args.out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let ext = args.out.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    let dir = parent_dir(&args.out);
    for (k, part) in episodes.iter().enumerate() {
        let path = dir.join(format!("{stem}-{k}{ext}"));
        write_container(&path, part, &root)?;
        writeln!(out, "part={} events={}", path.display(), part.len())?;
    }
    writeln!(out, "events_in={before} parts={}", episodes.len())?;
    Ok(())
}

fn tokenize(args: InOut, out: &mut impl Write) -> Result<()> {
    let ep = load_episode(&args.input)?;
    let text = write_token_file(&ep, &TokenizerConfig::default())?;
    fs::write(&args.out, &text)?;
    writeln!(out, "events={} lines={}", ep.len(), text.lines().count())?;
    Ok(())
}

fn detok(args: InOut, out: &mut impl Write) -> Result<()> {
    let root = media_root(&args.media, &args.input);
    require_file(&args.input)?;
    let text = fs::read_to_string(&args.input)?;
    let ep = read_token_file(&text, &TokenizerConfig::default())?;
    write_container(&args.out, &ep, &root)?;
    writeln!(out, "events={}", ep.len())?;
    Ok(())
}

fn pack(args: PackArgs, out: &mut impl Write) -> Result<()> {
    let root = match &args.media.media_root {
        Some(r) => r.clone(),
        None => {
            let first = parent_dir(&args.inputs[0]);
            if args.inputs.iter().any(|p| parent_dir(p) != first) {
                return Err(CliError::usage(
                    "inputs live in different directories; pass --media-root",
                ));
            }
            first
        }
    };
    let root = fs::canonicalize(&root)?;
    let episodes = args
        .inputs
        .iter()
        .map(|p| load_episode(p))
        .collect::<Result<Vec<_>>>()?;
    let cfg = PackConfig {
        max_seq_len: args.max_len,
        tau: args.tau,
        tokenizer: TokenizerConfig::default(),
    };
    let ds = pack_dataset(&episodes, &cfg)?;
    fs::create_dir_all(&args.out)?;
    let root_text = root
        .to_str()
        .ok_or_else(|| CliError::usage("media root is not valid UTF-8"))?;
    let header = write_dataset(&args.out, &ds, root_text)?;
    writeln!(
        out,
        "episodes={} samples={} events={} screen_frames={} max_seq_len={} tau={}",
        header.episodes, header.samples, header.events, header.screen_frames, header.max_seq_len, header.tau
    )?;
    Ok(())
}

fn bench(args: BenchArgs, out: &mut impl Write) -> Result<()> {
    let cfg = BenchConfig {
        strategies: args.strategies,
        gops: args.gop,
        reps: args.reps,
    };
    let scratch;
    let work_dir = match &args.work_dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            d.clone()
        }
        None => {
            scratch = tempfile::tempdir()?;
            scratch.path().to_path_buf()
        }
    };
    let report = bench_pipeline(&args.dataset, &cfg, &work_dir)?;
    match args.format {
        BenchFormat::Table => write!(out, "{report}")?,
        BenchFormat::Records => write!(out, "{}", report.records())?,
    }
    Ok(())
}

fn eval(args: EvalArgs, out: &mut impl Write) -> Result<()> {
    if args.bin_ms == 0 {
        return Err(CliError::usage("--bin-ms must be positive"));
    }
    let gt = load_episode(&args.gt)?;
    let pred = load_episode(&args.pred)?;
    writeln!(out, "{}", evaluate(&gt, &pred, args.bin_ms))?;
    Ok(())
}

fn segment(args: SegmentArgs, out: &mut impl Write) -> Result<()> {
    if !(args.fps.is_finite() && args.fps > 0.0) {
        return Err(CliError::usage("--fps must be positive"));
    }
    for s in segment_screen_stream(args.frames, args.fps) {
        writeln!(out, "{:.3}\t{:.3}", s.start_s, s.end_s)?;
    }
    Ok(())
}

fn parse_range(s: &str) -> Result<(Timestamp, Timestamp)> {
    let bad = || CliError::usage(format!("bad --range `{s}`, expected START:END in seconds"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let secs = |v: &str, default: Timestamp| -> Result<Timestamp> {
        if v.is_empty() {
            return Ok(default);
        }
        let x: f64 = v.parse().map_err(|_| bad())?;
        if !(x.is_finite() && x >= 0.0) {
            return Err(bad());
        }
        Ok(Timestamp::from_secs_f64(x))
    };
    Ok((secs(a, Timestamp::ZERO)?, secs(b, Timestamp(u64::MAX))?))
}

fn inspect(args: InspectArgs, out: &mut impl Write) -> Result<()> {
    let root = media_root(&args.media, &args.input);
    let mut filter = MessageFilter::all();
    if !args.topic.is_empty() {
        filter = filter.topics(args.topic.iter().copied());
    }
    if let Some(r) = &args.range {
        let (start, end) = parse_range(r)?;
        filter = filter.range(start, end);
    }
    require_file(&args.input)?;
    let mut reader = ContainerReader::open_path(&args.input)?;
    if !args.summary_only {
        let messages = reader.read_messages(&filter)?;
        for c in &messages.corrupt {
            log::warn!("skipped corrupt chunk at offset {} (channel {})", c.offset, c.channel_id);
        }
        for e in &messages.events {
            writeln!(out, "{}", e.debug_line())?;
        }
        writeln!(out)?;
    }
    write!(out, "{}", summarize(&mut reader, &root)?)?;
    writeln!(out)?;
    Ok(())
}

fn recover_cmd(args: RecoverArgs, out: &mut impl Write) -> Result<()> {
    require_file(&args.input)?;
    let r = recover(&args.input)?;
    writeln!(
        out,
        "intact={} chunks={} messages={} dropped_chunks={} discarded_bytes={}",
        r.intact, r.chunks, r.messages, r.dropped_chunks, r.discarded_bytes
    )?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    match cli.command {
        Command::Gen(a) => gen(a, &mut out)?,
        Command::Convert(a) => convert(a, &mut out)?,
        Command::Tokenize(a) => tokenize(a, &mut out)?,
        Command::Detok(a) => detok(a, &mut out)?,
        Command::Pack(a) => pack(a, &mut out)?,
        Command::Bench(a) => bench(a, &mut out)?,
        Command::Eval(a) => eval(a, &mut out)?,
        Command::Segment(a) => segment(a, &mut out)?,
        Command::Inspect(a) => inspect(a, &mut out)?,
        Command::Recover(a) => recover_cmd(a, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.kind.exit_code()
        }
    }
}
