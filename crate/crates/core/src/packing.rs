//! Applies a schedule to a latent history.
//!
//! History frames on each side of the generated section are consumed by the
//! schedule's frame entries starting next to the generated section and moving
//! outward; whatever is left beyond the outermost entry is the tail. Every
//! token carries the frames it came from, its cell in the kernel grid, the
//! kernel, a mean-pooled feature and the mean `(t, y, x)` position used for
//! rotary alignment.
//!
//! Time coordinates: past frames sit at `0..P`, the generated section at
//! `P..P+S` and future frames at `P+S..`.

use thiserror::Error;

use crate::ledger::{self, Divisibility, LedgerError, APPEND_POOL};
use crate::schedule::{KernelSpec, PackingSchedule, ScheduleError, Segment, Side, TailMode};
use crate::video::{LatentVideo, VideoError};

/// Kernels that have their own projection; larger kernels are reached by
/// downsampling first.
pub const LEARNED_KERNELS: [KernelSpec; 4] = [
    KernelSpec { frames: 1, height: 2, width: 2 },
    KernelSpec { frames: 2, height: 4, width: 4 },
    KernelSpec { frames: 4, height: 8, width: 8 },
    KernelSpec { frames: 8, height: 16, width: 16 },
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PackingError {
    #[error("{side:?} history has {have} frames but the schedule needs {need}")]
    ShortHistory { side: Side, need: u64, have: usize },
    #[error("{frames} {side:?} history frames are not covered by any entry and there is no tail on that side")]
    UnconsumedHistory { side: Side, frames: usize },
    #[error(transparent)]
    Indivisible(#[from] LedgerError),
    #[error("kernel {0} cannot be built from the learned kernels")]
    UnsupportedKernel(KernelSpec),
    #[error("group has {got} frames, kernel expects {expected}")]
    GroupLength { expected: u32, got: usize },
    #[error("ranked packing needs single-frame kernels, segment {segment} uses {kernel}")]
    RankedTemporalKernel { segment: usize, kernel: KernelSpec },
    #[error("order is not a permutation of 0..{0}")]
    InvalidPermutation(usize),
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PackOptions {
    /// Replicate the outermost frame of a side until the side's entries are full.
    pub pad_history: bool,
    pub divisibility: Divisibility,
}

/// Mean position of a token's window, in frames and latent pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePosition {
    pub time: f64,
    pub height: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenSource {
    /// Index of the frame entry in the schedule's segment list.
    Entry(usize),
    Tail(TailMode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedToken {
    /// `[start, end)` in frame time.
    pub time_span: (i64, i64),
    /// `(row, col)` in the kernel grid.
    pub cell: (usize, usize),
    pub kernel: KernelSpec,
    pub feature: Vec<f64>,
    pub phase: PhasePosition,
    pub source: TokenSource,
}

/// Where one frame entry landed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryPlacement {
    pub segment: usize,
    /// Frame times in temporal order, padding included.
    pub frames: Vec<i64>,
    /// Number of frames produced by replication rather than taken from history.
    pub padded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedContext {
    /// History tokens: temporal segment order, then group order, then row-major.
    pub tokens: Vec<PackedToken>,
    pub schedule: PackingSchedule,
    /// Whole-context size: history tokens plus the generated section at the base kernel.
    pub budget: usize,
    pub generate_tokens: usize,
    pub tail_frames: usize,
    pub placements: Vec<EntryPlacement>,
}

impl PackedContext {
    pub fn history_tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Token features as a row-major `tokens × channels` matrix.
    pub fn feature_matrix(&self) -> Vec<f64> {
        self.tokens.iter().flat_map(|t| t.feature.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelResolution {
    /// Average-pooling factors applied before the physical kernel.
    pub downsample: (u32, u32, u32),
    pub physical: KernelSpec,
}

/// Picks the largest learned kernel that divides `requested` and covers the
/// rest with a pre-pooling step.
pub fn resolve_kernel(requested: KernelSpec) -> Result<KernelResolution, PackingError> {
    let dims = [requested.frames, requested.height, requested.width];
    if !dims.iter().all(|d| d.is_power_of_two()) || requested.height < 2 || requested.width < 2 {
        return Err(PackingError::UnsupportedKernel(requested));
    }
    let physical = LEARNED_KERNELS
        .iter()
        .rev()
        .find(|k| k.frames <= requested.frames && k.height <= requested.height && k.width <= requested.width)
        .copied()
        .ok_or(PackingError::UnsupportedKernel(requested))?;
    Ok(KernelResolution {
        downsample: (
            requested.frames / physical.frames,
            requested.height / physical.height,
            requested.width / physical.width,
        ),
        physical,
    })
}

type Frame<'a> = (i64, &'a [f64]);

struct Geometry {
    h: usize,
    w: usize,
    c: usize,
}

/// Mean-pools one temporal group. The divisor is always the full window
/// volume, so zero-padded cells pull the mean toward zero.
fn pool_group(
    geo: &Geometry,
    group: &[Frame<'_>],
    kernel: KernelSpec,
    div: Divisibility,
    source: TokenSource,
    out: &mut Vec<PackedToken>,
) -> Result<(), PackingError> {
    let (ph, pw) = (kernel.height as usize, kernel.width as usize);
    let rows = div.cells("height", geo.h, ph)?;
    let cols = div.cells("width", geo.w, pw)?;
    let volume = (kernel.frames as usize * ph * pw) as f64;
    let t_start = group.iter().map(|f| f.0).min().unwrap_or(0);
    let t_end = group.iter().map(|f| f.0).max().map_or(0, |t| t + 1);
    let t_mean = group.iter().map(|f| f.0 as f64).sum::<f64>() / group.len() as f64;
    for r in 0..rows {
        for col in 0..cols {
            let mut feature = vec![0.0; geo.c];
            for (_, frame) in group {
                for y in r * ph..((r + 1) * ph).min(geo.h) {
                    for x in col * pw..((col + 1) * pw).min(geo.w) {
                        let at = (y * geo.w + x) * geo.c;
                        for (f, v) in feature.iter_mut().zip(&frame[at..at + geo.c]) {
                            *f += v;
                        }
                    }
                }
            }
            feature.iter_mut().for_each(|f| *f /= volume);
            out.push(PackedToken {
                time_span: (t_start, t_end),
                cell: (r, col),
                kernel,
                feature,
                phase: PhasePosition {
                    time: t_mean,
                    height: (r * ph) as f64 + (ph as f64 - 1.0) / 2.0,
                    width: (col * pw) as f64 + (pw as f64 - 1.0) / 2.0,
                },
                source,
            });
        }
    }
    Ok(())
}

/// Mean-pools `frames` (exactly `kernel.frames` of them) into one token per
/// spatial cell.
pub fn patchify(frames: &LatentVideo, kernel: KernelSpec) -> Result<Vec<PackedToken>, PackingError> {
    patchify_with(frames, kernel, Divisibility::Strict)
}

pub fn patchify_with(frames: &LatentVideo, kernel: KernelSpec, div: Divisibility) -> Result<Vec<PackedToken>, PackingError> {
    if frames.frames() != kernel.frames as usize {
        return Err(PackingError::GroupLength {
            expected: kernel.frames,
            got: frames.frames(),
        });
    }
    let geo = Geometry {
        h: frames.height(),
        w: frames.width(),
        c: frames.channels(),
    };
    let group: Vec<Frame<'_>> = (0..frames.frames()).map(|t| (t as i64, frames.frame(t))).collect();
    let mut out = Vec::new();
    pool_group(&geo, &group, kernel, div, TokenSource::Entry(0), &mut out)?;
    Ok(out)
}

/// Pools an entry's frames group by group. Groups are aligned to the end next
/// to the generated section; a short outermost group repeats its outermost frame.
fn pool_entry(
    geo: &Geometry,
    frames: &[Frame<'_>],
    kernel: KernelSpec,
    side: Side,
    div: Divisibility,
    source: TokenSource,
    out: &mut Vec<PackedToken>,
) -> Result<usize, PackingError> {
    let pf = kernel.frames as usize;
    let rem = frames.len() % pf;
    if rem != 0 && div == Divisibility::Strict {
        return Err(LedgerError::IndivisibleDims {
            what: "frame count",
            value: frames.len(),
            step: pf,
        }
        .into());
    }
    let mut padded = 0;
    let mut groups: Vec<Vec<Frame<'_>>> = Vec::new();
    match side {
        Side::Past => {
            if rem != 0 {
                let mut g = vec![frames[0]; pf - rem];
                g.extend_from_slice(&frames[..rem]);
                padded = pf - rem;
                groups.push(g);
            }
            groups.extend(frames[rem..].chunks(pf).map(<[_]>::to_vec));
        }
        Side::Future => {
            let full = frames.len() - rem;
            groups.extend(frames[..full].chunks(pf).map(<[_]>::to_vec));
            if rem != 0 {
                let mut g = frames[full..].to_vec();
                g.extend(std::iter::repeat_n(frames[frames.len() - 1], pf - rem));
                padded = pf - rem;
                groups.push(g);
            }
        }
    }
    for g in &groups {
        pool_group(geo, g, kernel, div, source, out)?;
    }
    Ok(padded)
}

fn append_tail(geo: &Geometry, tail: &[Frame<'_>], out: &mut Vec<PackedToken>) {
    let (ph, pw) = APPEND_POOL;
    let kernel = KernelSpec {
        frames: 1,
        height: ph as u32,
        width: pw as u32,
    };
    for &(t, frame) in tail {
        for r in 0..geo.h.div_ceil(ph) {
            for col in 0..geo.w.div_ceil(pw) {
                let (y0, y1) = (r * ph, ((r + 1) * ph).min(geo.h));
                let (x0, x1) = (col * pw, ((col + 1) * pw).min(geo.w));
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                let mut feature = vec![0.0; geo.c];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let at = (y * geo.w + x) * geo.c;
                        for (f, v) in feature.iter_mut().zip(&frame[at..at + geo.c]) {
                            *f += v;
                        }
                    }
                }
                feature.iter_mut().for_each(|f| *f /= n);
                out.push(PackedToken {
                    time_span: (t, t + 1),
                    cell: (r, col),
                    kernel,
                    feature,
                    phase: PhasePosition {
                        time: t as f64,
                        height: (y0 + y1 - 1) as f64 / 2.0,
                        width: (x0 + x1 - 1) as f64 / 2.0,
                    },
                    source: TokenSource::Tail(TailMode::Append),
                });
            }
        }
    }
}

fn compress_tail(
    geo: &Geometry,
    tail: &[Frame<'_>],
    coarsest: KernelSpec,
    div: Divisibility,
    out: &mut Vec<PackedToken>,
) -> Result<(), PackingError> {
    if tail.is_empty() {
        return Ok(());
    }
    let n = geo.h * geo.w * geo.c;
    let mut avg = vec![0.0; n];
    for (_, frame) in tail {
        for (a, v) in avg.iter_mut().zip(frame.iter()) {
            *a += v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= tail.len() as f64);
    let spatial = KernelSpec {
        frames: 1,
        height: coarsest.height,
        width: coarsest.width,
    };
    let start = out.len();
    pool_group(geo, &[(0, &avg)], spatial, div, TokenSource::Tail(TailMode::Compress), out)?;
    let t0 = tail.iter().map(|f| f.0).min().unwrap();
    let t1 = tail.iter().map(|f| f.0).max().unwrap() + 1;
    let t_mean = tail.iter().map(|f| f.0 as f64).sum::<f64>() / tail.len() as f64;
    for tok in &mut out[start..] {
        tok.time_span = (t0, t1);
        tok.kernel = coarsest;
        tok.phase.time = t_mean;
    }
    Ok(())
}

fn tail_into(
    geo: &Geometry,
    tail: &[Frame<'_>],
    mode: TailMode,
    coarsest: KernelSpec,
    div: Divisibility,
    out: &mut Vec<PackedToken>,
) -> Result<(), PackingError> {
    match mode {
        TailMode::Delete => Ok(()),
        TailMode::Append => {
            append_tail(geo, tail, out);
            Ok(())
        }
        TailMode::Compress => compress_tail(geo, tail, coarsest, div, out),
    }
}

/// Tokens for a block of tail frames. `coarsest` is the kernel the compress
/// option pools with.
pub fn handle_tail(
    tail: &LatentVideo,
    mode: TailMode,
    coarsest: KernelSpec,
    div: Divisibility,
) -> Result<Vec<PackedToken>, PackingError> {
    let geo = Geometry {
        h: tail.height(),
        w: tail.width(),
        c: tail.channels(),
    };
    let frames: Vec<Frame<'_>> = (0..tail.frames()).map(|t| (t as i64, tail.frame(t))).collect();
    let mut out = Vec::new();
    tail_into(&geo, &frames, mode, coarsest, div, &mut out)?;
    Ok(out)
}

struct SideLayout<'a> {
    /// Frames in temporal order, padding included.
    frames: Vec<Frame<'a>>,
    /// `segment -> [start, end)` into `frames`.
    entries: Vec<(usize, usize, usize)>,
    tail: (usize, usize),
    padded: usize,
}

fn layout_side<'a>(
    schedule: &PackingSchedule,
    side: Side,
    mut frames: Vec<Frame<'a>>,
    pad: bool,
) -> Result<SideLayout<'a>, PackingError> {
    let need = schedule.side_capacity(side);
    let have = frames.len();
    let mut padded = 0;
    if (have as u64) < need {
        if !pad || have == 0 {
            return Err(PackingError::ShortHistory { side, need, have });
        }
        padded = need as usize - have;
        match side {
            Side::Past => {
                let first = frames[0];
                frames.splice(0..0, std::iter::repeat_n(first, padded));
            }
            Side::Future => {
                let last = frames[have - 1];
                frames.extend(std::iter::repeat_n(last, padded));
            }
        }
    }
    let segments = schedule.segments();
    let order: Vec<usize> = match side {
        Side::Past => schedule.past_side().collect(),
        Side::Future => schedule.future_side().collect(),
    };
    let n = frames.len();
    let mut entries = Vec::new();
    let mut tail = (0, 0);
    // Number of frames already consumed, counted from the generated section.
    let mut used = 0usize;
    let mut has_tail = false;
    for idx in order {
        match segments[idx] {
            Segment::Frames { count, .. } => {
                let count = count as usize;
                let (a, b) = match side {
                    Side::Past => (n - used - count, n - used),
                    Side::Future => (used, used + count),
                };
                entries.push((idx, a, b));
                used += count;
            }
            Segment::Tail(_) => {
                has_tail = true;
                tail = match side {
                    Side::Past => (0, n - used),
                    Side::Future => (used, n),
                };
                used = n;
            }
            Segment::Skip | Segment::Generate(_) => {}
        }
    }
    if !has_tail && used < n {
        return Err(PackingError::UnconsumedHistory { side, frames: n - used });
    }
    Ok(SideLayout {
        frames,
        entries,
        tail,
        padded,
    })
}

fn pack_layouts(
    schedule: &PackingSchedule,
    geo: &Geometry,
    past: SideLayout<'_>,
    future: SideLayout<'_>,
    opts: PackOptions,
) -> Result<PackedContext, PackingError> {
    let div = opts.divisibility;
    let g = schedule.generate_index();
    let coarsest = schedule.coarsest_kernel();
    let mut tokens = Vec::new();
    let mut placements = Vec::new();
    let mut tail_frames = 0;
    for (idx, seg) in schedule.segments().iter().enumerate() {
        let (layout, side) = if idx < g { (&past, Side::Past) } else { (&future, Side::Future) };
        match seg {
            Segment::Frames { kernel, .. } => {
                let &(_, a, b) = layout.entries.iter().find(|e| e.0 == idx).expect("laid out");
                let frames = &layout.frames[a..b];
                let remainder_pad = pool_entry(geo, frames, *kernel, side, div, TokenSource::Entry(idx), &mut tokens)?;
                let history_pad = match side {
                    Side::Past => layout.padded.saturating_sub(a).min(b - a),
                    Side::Future => (b.min(layout.frames.len())).saturating_sub(a.max(layout.frames.len() - layout.padded)),
                };
                placements.push(EntryPlacement {
                    segment: idx,
                    frames: frames.iter().map(|f| f.0).collect(),
                    padded: remainder_pad + history_pad,
                });
            }
            Segment::Tail(mode) => {
                let (a, b) = layout.tail;
                tail_frames = b - a;
                tail_into(geo, &layout.frames[a..b], *mode, coarsest, div, &mut tokens)?;
            }
            Segment::Skip | Segment::Generate(_) => {}
        }
    }
    let generate_tokens = ledger::tokens_for_entry_with(schedule.generate_count(), KernelSpec::BASE, geo.h, geo.w, div)?;
    Ok(PackedContext {
        budget: tokens.len() + generate_tokens,
        tokens,
        schedule: schedule.clone(),
        generate_tokens,
        tail_frames,
        placements,
    })
}

fn frames_of(video: &LatentVideo, time_offset: i64) -> Vec<Frame<'_>> {
    (0..video.frames()).map(|t| (t as i64 + time_offset, video.frame(t))).collect()
}

/// Packs a past-only history (oldest frame first).
pub fn apply_schedule(history: &LatentVideo, schedule: &PackingSchedule, opts: PackOptions) -> Result<PackedContext, PackingError> {
    apply_schedule_bidirectional(history, None, schedule, opts)
}

/// Packs history on both sides of the generated section. `future` frames
/// start right after the section.
pub fn apply_schedule_bidirectional(
    past: &LatentVideo,
    future: Option<&LatentVideo>,
    schedule: &PackingSchedule,
    opts: PackOptions,
) -> Result<PackedContext, PackingError> {
    if let Some(f) = future {
        past.ensure_same_frame_shape(f)?;
    }
    let geo = Geometry {
        h: past.height(),
        w: past.width(),
        c: past.channels(),
    };
    let p = past.frames() as i64;
    let future_offset = p + schedule.generate_count() as i64;
    let past_layout = layout_side(schedule, Side::Past, frames_of(past, 0), opts.pad_history)?;
    let future_layout = layout_side(
        schedule,
        Side::Future,
        future.map(|f| frames_of(f, future_offset)).unwrap_or_default(),
        opts.pad_history,
    )?;
    pack_layouts(schedule, &geo, past_layout, future_layout, opts)
}

/// Packs a past-only history after reordering it by importance: `order[0]`
/// is the most important frame and lands next to the generated section.
/// Tokens keep the original frame times. Past-side kernels must span a
/// single frame, since reordered frames are no longer contiguous.
pub fn apply_schedule_ranked(
    history: &LatentVideo,
    order: &[usize],
    schedule: &PackingSchedule,
    opts: PackOptions,
) -> Result<PackedContext, PackingError> {
    let n = history.frames();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(PackingError::InvalidPermutation(n));
    }
    let g = schedule.generate_index();
    for (idx, _, kernel) in schedule.frame_entries() {
        if idx < g && kernel.frames != 1 {
            return Err(PackingError::RankedTemporalKernel { segment: idx, kernel });
        }
    }
    let geo = Geometry {
        h: history.height(),
        w: history.width(),
        c: history.channels(),
    };
    let frames: Vec<Frame<'_>> = order.iter().rev().map(|&i| (i as i64, history.frame(i))).collect();
    let past = layout_side(schedule, Side::Past, frames, opts.pad_history)?;
    let future = layout_side(schedule, Side::Future, Vec::new(), opts.pad_history)?;
    pack_layouts(schedule, &geo, past, future, opts)
}

/// Mirrors a finest-first half progression so both ends of the history are
/// finest and the middle coarsest, followed by the generated section.
pub fn build_symmetric_schedule(half: &[(u32, KernelSpec)], generate: u32) -> Result<PackingSchedule, PackingError> {
    if half.is_empty() {
        return Err(ScheduleError::InvalidSchedule("symmetric schedule needs at least one entry".into()).into());
    }
    let per_frame_volume = |&(_, k): &(u32, KernelSpec)| k.volume() as f64 / k.frames as f64;
    if half.windows(2).any(|w| per_frame_volume(&w[1]) < per_frame_volume(&w[0])) {
        return Err(ScheduleError::InvalidSchedule("half progression must go from finest to coarsest".into()).into());
    }
    let mut segments: Vec<Segment> = half.iter().map(|&(c, k)| Segment::frames(c, k)).collect();
    segments.extend(half.iter().rev().map(|&(c, k)| Segment::frames(c, k)));
    segments.push(Segment::Generate(generate));
    Ok(PackingSchedule::new(segments, false)?)
}
