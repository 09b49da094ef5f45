use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use framepack_core::codebook::{Codebook, FitConfig, DEFAULT_K};
use framepack_core::container::{read_video, FpltFile};
use framepack_core::eval::drift::{builtin_metrics, drift, metric_by_name};
use framepack_core::eval::elo::{parse_match_log, RatingTable, DEFAULT_INITIAL, TIE_MARGIN};
use framepack_core::ledger::{budget_breakdown, decompose_rate, parse_rational, Divisibility};
use framepack_core::packing::{apply_schedule_bidirectional, PackOptions, TokenSource};
use framepack_core::planner::{Endpoint, GenerationPlan};
use framepack_core::schedule::{PackingSchedule, SamplingMode, Segment};
use framepack_core::video::LatentVideo;

#[derive(Parser)]
#[command(name = "framepack", version, about = "Frame-context packing schedules, plans and metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a schedule name and print its structure.
    Parse { name: String },
    /// Token accounting for a schedule at a latent resolution.
    Budget {
        name: String,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        tail_frames: usize,
        /// Round partial kernel windows up instead of rejecting them.
        #[arg(long)]
        pad: bool,
    },
    /// Print a generation plan in the line-oriented plan format.
    Plan {
        name: String,
        #[arg(long)]
        total: usize,
        #[arg(long)]
        section: usize,
        /// Anchor sections as `a..b`; repeat or comma-separate.
        #[arg(long = "endpoint", value_delimiter = ',')]
        endpoints: Vec<String>,
    },
    /// Pack a history tensor and write token features plus a provenance sidecar.
    Pack {
        name: String,
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Frames after the generated section.
        #[arg(long)]
        future: Option<PathBuf>,
        /// Repeat the outermost frame when the history is too short.
        #[arg(long)]
        pad_history: bool,
        /// Zero-pad spatial and repeat temporal kernel remainders.
        #[arg(long)]
        pad: bool,
        /// Codebook for `+D` schedules.
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// Codebook operations.
    Codebook {
        #[command(subcommand)]
        action: CodebookCommand,
    },
    /// Replace every pixel with its nearest codebook centroid.
    Quantize {
        input: PathBuf,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Start/end drift of a latent video.
    Drift {
        input: PathBuf,
        /// Metric name, or `all`.
        #[arg(long, default_value = "all")]
        metric: String,
    },
    /// ELO ratings from a `player_a,player_b,A|B|D` match log.
    Elo {
        matches: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INITIAL)]
        initial: f64,
        /// Also print rank buckets.
        #[arg(long)]
        ranks: bool,
        #[arg(long, default_value_t = TIE_MARGIN)]
        tie_margin: f64,
    },
    /// Decompose a dyadic per-frame budget relative to the base series.
    Rate { budget: String },
}

#[derive(Subcommand)]
enum CodebookCommand {
    Fit {
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn data(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, error: error.into() }
}

type CmdResult = Result<String, Failure>;

fn parse_schedule(name: &str) -> Result<PackingSchedule, Failure> {
    PackingSchedule::parse(name).map_err(|e| usage(anyhow!(e).context(format!("invalid schedule {name:?}"))))
}

fn load_video(path: &Path) -> Result<LatentVideo, Failure> {
    read_video(path).with_context(|| format!("reading {}", path.display())).map_err(data)
}

fn cmd_parse(name: &str) -> CmdResult {
    let s = parse_schedule(name)?;
    let mut out = String::new();
    let _ = writeln!(out, "name={s}");
    let _ = writeln!(out, "mode={}", s.sampling_mode().as_str());
    let _ = writeln!(out, "discretize={}", s.discretize_history());
    let _ = writeln!(out, "generate={}", s.generate_count());
    let _ = writeln!(out, "entries={}", s.frame_entries().count());
    for (i, seg) in s.segments().iter().enumerate() {
        let _ = match seg {
            Segment::Tail(m) => writeln!(out, "segment {i} tail {}", m.token()),
            Segment::Frames { count, kernel } => {
                let (f, h, w) = kernel.as_tuple();
                writeln!(out, "segment {i} frames count={count} kernel={f}x{h}x{w}")
            }
            Segment::Skip => writeln!(out, "segment {i} skip"),
            Segment::Generate(n) => writeln!(out, "segment {i} generate count={n}"),
        };
    }
    Ok(out)
}

fn divisibility(pad: bool) -> Divisibility {
    if pad {
        Divisibility::Pad
    } else {
        Divisibility::Strict
    }
}

fn cmd_budget(name: &str, height: usize, width: usize, tail_frames: usize, pad: bool) -> CmdResult {
    let s = parse_schedule(name)?;
    let lines = budget_breakdown(&s, height, width, tail_frames, divisibility(pad)).map_err(usage)?;
    let mut out = String::new();
    let mut total = 0;
    let mut generate = 0;
    for line in &lines {
        let _ = writeln!(out, "{} tokens={}", line.label, line.tokens);
        total += line.tokens;
        if line.label.starts_with('g') {
            generate = line.tokens;
        }
    }
    let _ = writeln!(out, "history={}", total - generate);
    let _ = writeln!(out, "total={total}");
    Ok(out)
}

fn parse_range(text: &str) -> Result<Range<usize>, Failure> {
    let bad = || usage(anyhow!("expected a frame range `a..b`, got {text:?}"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    Ok(a..b)
}

fn cmd_plan(name: &str, total: usize, section: usize, endpoints: &[String]) -> CmdResult {
    let s = parse_schedule(name)?;
    let eps = endpoints
        .iter()
        .filter(|e| !e.trim().is_empty())
        .map(|e| parse_range(e).map(Endpoint::from))
        .collect::<Result<Vec<_>, _>>()?;
    if !eps.is_empty() && s.sampling_mode() != SamplingMode::EndpointAnchored {
        return Err(usage(anyhow!("--endpoint needs an endpoint-anchored schedule, {s} is {}", s.sampling_mode())));
    }
    let plan = GenerationPlan::for_schedule(total, section, &s, &eps).map_err(usage)?;
    Ok(plan.to_text())
}

struct PackArgs<'a> {
    name: &'a str,
    input: &'a Path,
    output: &'a Path,
    future: Option<&'a Path>,
    pad_history: bool,
    pad: bool,
    codebook: Option<&'a Path>,
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut p = output.as_os_str().to_owned();
    p.push(".prov");
    PathBuf::from(p)
}

fn cmd_pack(a: PackArgs<'_>) -> CmdResult {
    let s = parse_schedule(a.name)?;
    let mut past = load_video(a.input)?;
    let mut future = a.future.map(load_video).transpose()?;
    if s.discretize_history() {
        let path = a.codebook.ok_or_else(|| usage(anyhow!("schedule {s} discretizes history; pass --codebook")))?;
        let cb = Codebook::load(path).with_context(|| format!("reading {}", path.display())).map_err(data)?;
        past = cb.discretize(&past).map_err(data)?;
        if let Some(f) = future.as_mut() {
            *f = cb.discretize(f).map_err(data)?;
        }
    }
    let opts = PackOptions {
        pad_history: a.pad_history,
        divisibility: divisibility(a.pad),
    };
    let ctx = apply_schedule_bidirectional(&past, future.as_ref(), &s, opts).map_err(data)?;

    let c = past.channels();
    let features = LatentVideo::new(ctx.tokens.len(), 1, 1, c, ctx.feature_matrix()).map_err(data)?;
    FpltFile::from_video(&features, 0)
        .and_then(|f| f.save(a.output))
        .with_context(|| format!("writing {}", a.output.display()))
        .map_err(data)?;

    let mut prov = String::new();
    let _ = writeln!(prov, "schedule={s}");
    let _ = writeln!(prov, "history_tokens={}", ctx.history_tokens());
    let _ = writeln!(prov, "generate_tokens={}", ctx.generate_tokens);
    let _ = writeln!(prov, "budget={}", ctx.budget);
    let _ = writeln!(prov, "tail_frames={}", ctx.tail_frames);
    for p in &ctx.placements {
        let frames: Vec<String> = p.frames.iter().map(i64::to_string).collect();
        let _ = writeln!(prov, "entry segment={} padded={} frames={}", p.segment, p.padded, frames.join(","));
    }
    for (i, t) in ctx.tokens.iter().enumerate() {
        let source = match t.source {
            TokenSource::Entry(seg) => format!("entry:{seg}"),
            TokenSource::Tail(m) => format!("tail:{}", m.token()),
        };
        let (f, h, w) = t.kernel.as_tuple();
        let _ = writeln!(
            prov,
            "token {i} source={source} time={}..{} cell={},{} kernel={f}x{h}x{w} pos={},{},{}",
            t.time_span.0, t.time_span.1, t.cell.0, t.cell.1, t.phase.time, t.phase.height, t.phase.width
        );
    }
    let side = sidecar_path(a.output);
    fs::write(&side, prov).with_context(|| format!("writing {}", side.display())).map_err(data)?;
    Ok(format!(
        "tokens={} budget={} tail_frames={}\n",
        ctx.history_tokens(),
        ctx.budget,
        ctx.tail_frames
    ))
}

fn cmd_codebook_fit(k: usize, seed: u64, max_iters: usize, tol: f64, inputs: &[PathBuf], output: &Path) -> CmdResult {
    let videos = inputs.iter().map(|p| load_video(p)).collect::<Result<Vec<_>, _>>()?;
    let cfg = FitConfig { k, seed, max_iters, tol };
    let cb = Codebook::fit(&videos, cfg).map_err(data)?;
    cb.save(output).with_context(|| format!("writing {}", output.display())).map_err(data)?;
    let st = cb.stats().expect("fitted codebook has stats");
    Ok(format!("k={} channels={} inertia={} iterations={} seed={}\n", cb.k(), cb.channels(), st.inertia, st.iterations, st.seed))
}

fn cmd_quantize(input: &Path, codebook: &Path, output: &Path) -> CmdResult {
    let v = load_video(input)?;
    let cb = Codebook::load(codebook).with_context(|| format!("reading {}", codebook.display())).map_err(data)?;
    let out = cb.discretize(&v).map_err(data)?;
    FpltFile::from_video(&out, 0)
        .and_then(|f| f.save(output))
        .with_context(|| format!("writing {}", output.display()))
        .map_err(data)?;
    Ok(String::new())
}

fn cmd_drift(input: &Path, metric: &str) -> CmdResult {
    let metrics = if metric == "all" {
        builtin_metrics()
    } else {
        vec![metric_by_name(metric).map_err(usage)?]
    };
    let v = load_video(input)?;
    let mut out = String::new();
    for m in metrics {
        let r = drift(&v, m.as_ref()).map_err(data)?;
        let _ = writeln!(out, "{r}");
    }
    Ok(out)
}

fn cmd_elo(path: &Path, initial: f64, ranks: bool, tie_margin: f64) -> CmdResult {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(data)?;
    let records = parse_match_log(&text).map_err(data)?;
    let table = RatingTable::tournament(&records, initial);
    if !ranks {
        return Ok(table.to_string());
    }
    let buckets = table.rank_buckets(tie_margin);
    let mut out = String::new();
    for (name, r) in table.standings() {
        let _ = writeln!(out, "{name}={r:.1} rank={}", buckets[name]);
    }
    Ok(out)
}

fn cmd_rate(budget: &str) -> CmdResult {
    let b = parse_rational(budget).map_err(usage)?;
    let d = decompose_rate(&b).map_err(usage)?;
    let list = |v: &[u32]| {
        if v.is_empty() {
            "-".to_string()
        } else {
            v.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
        }
    };
    Ok(format!(
        "budget={b}\nbase={}\nduplicated={}\ndropped={}\n",
        d.base_included,
        list(&d.duplicated_levels),
        list(&d.dropped_levels)
    ))
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Parse { name } => cmd_parse(&name),
        Command::Budget {
            name,
            height,
            width,
            tail_frames,
            pad,
        } => cmd_budget(&name, height, width, tail_frames, pad),
        Command::Plan {
            name,
            total,
            section,
            endpoints,
        } => cmd_plan(&name, total, section, &endpoints),
        Command::Pack {
            name,
            input,
            output,
            future,
            pad_history,
            pad,
            codebook,
        } => cmd_pack(PackArgs {
            name: &name,
            input: &input,
            output: &output,
            future: future.as_deref(),
            pad_history,
            pad,
            codebook: codebook.as_deref(),
        }),
        Command::Codebook {
            action:
                CodebookCommand::Fit {
                    k,
                    seed,
                    max_iters,
                    tol,
                    inputs,
                    output,
                },
        } => cmd_codebook_fit(k, seed, max_iters, tol, &inputs, &output),
        Command::Quantize { input, codebook, output } => cmd_quantize(&input, &codebook, &output),
        Command::Drift { input, metric } => cmd_drift(&input, &metric),
        Command::Elo {
            matches,
            initial,
            ranks,
            tie_margin,
        } => cmd_elo(&matches, initial, ranks, tie_margin),
        Command::Rate { budget } => cmd_rate(&budget),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

