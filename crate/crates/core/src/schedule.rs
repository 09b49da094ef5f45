//! Schedule names: parsing, canonical formatting and sampling-mode inference.
//!
//! A name lists segments in temporal order (left is earliest):
//!
//! - `td` / `ta` / `tc`: tail frames are deleted, appended as pooled pixels,
//!   or averaged and compressed.
//! - `f16k4`: 16 frames patchified with kernel `k4`. `kN` is shorthand for
//!   `kNh{2N}w{2N}`; any other kernel is spelled out as `k1h4w4`.
//! - `x`: a skip of any length, bound when a plan is instantiated.
//! - `g9`: the 9 frames being generated.
//! - `+D`: history is discretized through a codebook.
//!
//! Underscores carry no meaning. The canonical form puts one `_` between
//! groups and none between consecutive frame entries.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("empty schedule")]
    EmptySchedule,
    #[error("unknown token {token:?} at byte {offset}")]
    UnknownToken { token: String, offset: usize },
    #[error("more than one generate segment")]
    MultipleGenerate,
    #[error("schedule has no generate segment")]
    MissingGenerate,
    #[error("tail marker must appear once, at either end")]
    MisplacedTail,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

/// Patchify window `(p_f, p_h, p_w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub frames: u32,
    pub height: u32,
    pub width: u32,
}

impl KernelSpec {
    /// The base `(1, 2, 2)` kernel that defines one frame's full context.
    pub const BASE: KernelSpec = KernelSpec {
        frames: 1,
        height: 2,
        width: 2,
    };

    pub fn new(frames: u32, height: u32, width: u32) -> Result<Self, ScheduleError> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(ScheduleError::InvalidSchedule(format!(
                "kernel dims must be positive, got ({frames},{height},{width})"
            )));
        }
        Ok(Self {
            frames,
            height,
            width,
        })
    }

    /// `kN` shorthand: `(N, 2N, 2N)`.
    pub fn simplified(n: u32) -> Result<Self, ScheduleError> {
        let doubled = n
            .checked_mul(2)
            .ok_or_else(|| ScheduleError::InvalidSchedule(format!("kernel k{n} overflows")))?;
        Self::new(n, doubled, doubled)
    }

    pub fn is_simplified(&self) -> bool {
        self.height as u64 == 2 * self.frames as u64 && self.width == self.height
    }

    pub fn volume(&self) -> u64 {
        self.frames as u64 * self.height as u64 * self.width as u64
    }

    pub fn as_tuple(&self) -> (u32, u32, u32) {
        (self.frames, self.height, self.width)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_simplified() {
            write!(f, "k{}", self.frames)
        } else {
            write!(f, "k{}h{}w{}", self.frames, self.height, self.width)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailMode {
    Delete,
    Append,
    Compress,
}

impl TailMode {
    pub fn token(&self) -> &'static str {
        match self {
            TailMode::Delete => "td",
            TailMode::Append => "ta",
            TailMode::Compress => "tc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    Tail(TailMode),
    Frames { count: u32, kernel: KernelSpec },
    Skip,
    Generate(u32),
}

impl Segment {
    pub fn frames(count: u32, kernel: KernelSpec) -> Self {
        Segment::Frames { count, kernel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    Vanilla,
    EndpointAnchored,
    Inverted,
    Unclassified,
}

impl SamplingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingMode::Vanilla => "vanilla",
            SamplingMode::EndpointAnchored => "endpoint",
            SamplingMode::Inverted => "inverted",
            SamplingMode::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which side of the generate segment a tail sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Temporally before the generated section.
    Past,
    /// Temporally after the generated section.
    Future,
}

/// A validated schedule. Construct with [`PackingSchedule::new`] or by parsing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PackingSchedule {
    segments: Vec<Segment>,
    discretize_history: bool,
}

impl PackingSchedule {
    pub fn new(segments: Vec<Segment>, discretize_history: bool) -> Result<Self, ScheduleError> {
        validate(&segments)?;
        Ok(Self {
            segments,
            discretize_history,
        })
    }

    pub fn parse(name: &str) -> Result<Self, ScheduleError> {
        let (segments, discretize) = tokenize(name)?;
        Self::new(segments, discretize)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn discretize_history(&self) -> bool {
        self.discretize_history
    }

    pub fn with_discretize(mut self, on: bool) -> Self {
        self.discretize_history = on;
        self
    }

    pub fn generate_index(&self) -> usize {
        self.segments
            .iter()
            .position(|s| matches!(s, Segment::Generate(_)))
            .expect("validated schedule has a generate segment")
    }

    pub fn generate_count(&self) -> u32 {
        match self.segments[self.generate_index()] {
            Segment::Generate(n) => n,
            _ => unreachable!(),
        }
    }

    /// Segment indices before the generate segment, nearest first.
    pub fn past_side(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.generate_index()).rev()
    }

    /// Segment indices after the generate segment, nearest first.
    pub fn future_side(&self) -> impl Iterator<Item = usize> + '_ {
        self.generate_index() + 1..self.segments.len()
    }

    pub fn tail(&self) -> Option<(TailMode, Side)> {
        match (self.segments.first(), self.segments.last()) {
            (Some(Segment::Tail(m)), _) => Some((*m, Side::Past)),
            (_, Some(Segment::Tail(m))) => Some((*m, Side::Future)),
            _ => None,
        }
    }

    /// `(segment index, count, kernel)` for every frame entry, in temporal order.
    pub fn frame_entries(&self) -> impl Iterator<Item = (usize, u32, KernelSpec)> + '_ {
        self.segments.iter().enumerate().filter_map(|(i, s)| match s {
            Segment::Frames { count, kernel } => Some((i, *count, *kernel)),
            _ => None,
        })
    }

    /// Frames consumed by the entries on one side, skips counted as zero.
    pub fn side_capacity(&self, side: Side) -> u64 {
        let g = self.generate_index();
        self.frame_entries()
            .filter(|(i, _, _)| match side {
                Side::Past => *i < g,
                Side::Future => *i > g,
            })
            .map(|(_, c, _)| c as u64)
            .sum()
    }

    /// The entry kernel with the largest volume, or the base kernel if there
    /// are no entries. Ties go to the temporally earliest entry.
    pub fn coarsest_kernel(&self) -> KernelSpec {
        self.frame_entries()
            .map(|(_, _, k)| k)
            .fold(None, |best: Option<KernelSpec>, k| match best {
                Some(b) if b.volume() >= k.volume() => Some(b),
                _ => Some(k),
            })
            .unwrap_or(KernelSpec::BASE)
    }

    pub fn sampling_mode(&self) -> SamplingMode {
        classify_sampling_mode(self)
    }

    /// Canonical name.
    pub fn format(&self) -> String {
        self.to_string()
    }
}

impl FromStr for PackingSchedule {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for PackingSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut in_frames = false;
        for seg in &self.segments {
            let continues_run = in_frames && matches!(seg, Segment::Frames { .. });
            if !first && !continues_run {
                f.write_str("_")?;
            }
            first = false;
            in_frames = matches!(seg, Segment::Frames { .. });
            match seg {
                Segment::Tail(m) => f.write_str(m.token())?,
                Segment::Frames { count, kernel } => write!(f, "f{count}{kernel}")?,
                Segment::Skip => f.write_str("x")?,
                Segment::Generate(n) => write!(f, "g{n}")?,
            }
        }
        if self.discretize_history {
            f.write_str("+D")?;
        }
        Ok(())
    }
}

pub fn classify_sampling_mode(schedule: &PackingSchedule) -> SamplingMode {
    let segs = schedule.segments();
    let tail = schedule.tail();
    let body: &[Segment] = match tail {
        Some((_, Side::Past)) => &segs[1..],
        Some((_, Side::Future)) => &segs[..segs.len() - 1],
        None => segs,
    };
    let g = body
        .iter()
        .position(|s| matches!(s, Segment::Generate(_)))
        .expect("validated");
    let is_frames = |s: &Segment| matches!(s, Segment::Frames { .. });
    let has_skip = body.iter().any(|s| matches!(s, Segment::Skip));

    if !has_skip && g == body.len() - 1 {
        return SamplingMode::Vanilla;
    }

    // Frames*, G, x, Frames+ with any tail at the early end.
    let after = &body[g + 1..];
    let endpoint = body[..g].iter().all(is_frames)
        && after.len() >= 2
        && matches!(after[0], Segment::Skip)
        && after[1..].iter().all(is_frames)
        && !matches!(tail, Some((_, Side::Future)));

    // Frames+, x, G, Frames* with any tail at the late end.
    let before = &body[..g];
    let inverted = before.len() >= 2
        && matches!(before[before.len() - 1], Segment::Skip)
        && before[..before.len() - 1].iter().all(is_frames)
        && after.iter().all(is_frames)
        && !matches!(tail, Some((_, Side::Past)));

    match (endpoint, inverted) {
        (true, false) => SamplingMode::EndpointAnchored,
        (false, true) => SamplingMode::Inverted,
        _ => SamplingMode::Unclassified,
    }
}

fn validate(segments: &[Segment]) -> Result<(), ScheduleError> {
    if segments.is_empty() {
        return Err(ScheduleError::EmptySchedule);
    }
    let generates = segments
        .iter()
        .filter(|s| matches!(s, Segment::Generate(_)))
        .count();
    match generates {
        0 => return Err(ScheduleError::MissingGenerate),
        1 => {}
        _ => return Err(ScheduleError::MultipleGenerate),
    }
    let tails: Vec<usize> = segments
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, Segment::Tail(_)))
        .map(|(i, _)| i)
        .collect();
    match tails.as_slice() {
        [] => {}
        [i] if *i == 0 || *i == segments.len() - 1 => {}
        _ => return Err(ScheduleError::MisplacedTail),
    }
    for seg in segments {
        match seg {
            Segment::Frames { count, kernel } => {
                if *count == 0 || kernel.frames == 0 || kernel.height == 0 || kernel.width == 0 {
                    return Err(ScheduleError::InvalidSchedule(format!("zero-sized entry {seg:?}")));
                }
            }
            Segment::Generate(0) => {
                return Err(ScheduleError::InvalidSchedule("generate count must be positive".into()))
            }
            _ => {}
        }
    }
    Ok(())
}

enum Lexeme {
    Tail(TailMode),
    FrameCount(u32),
    Kernel(KernelSpec),
    Skip,
    Generate(u32),
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn unknown(&self, start: usize) -> ScheduleError {
        let end = self.pos.max(start + 1).min(self.bytes.len());
        ScheduleError::UnknownToken {
            token: String::from_utf8_lossy(&self.bytes[start..end]).into_owned(),
            offset: start,
        }
    }

    /// A positive decimal without leading zeros.
    fn number(&mut self, start: usize) -> Result<u32, ScheduleError> {
        let digits_start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = &self.bytes[digits_start..self.pos];
        if digits.is_empty() || digits[0] == b'0' {
            self.pos = self.pos.max(digits_start + 1).min(self.bytes.len());
            return Err(self.unknown(start));
        }
        std::str::from_utf8(digits)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| self.unknown(start))
    }

    fn expect(&mut self, byte: u8, start: usize) -> Result<(), ScheduleError> {
        if self.bytes.get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            self.pos += 1;
            Err(self.unknown(start))
        }
    }

    fn next(&mut self) -> Option<Result<(Lexeme, usize), ScheduleError>> {
        while self.bytes.get(self.pos) == Some(&b'_') {
            self.pos += 1;
        }
        let start = self.pos;
        let &b = self.bytes.get(self.pos)?;
        self.pos += 1;
        let lexeme = match b {
            b't' => {
                let mode = match self.bytes.get(self.pos) {
                    Some(b'd') => TailMode::Delete,
                    Some(b'a') => TailMode::Append,
                    Some(b'c') => TailMode::Compress,
                    _ => return Some(Err(self.unknown(start))),
                };
                self.pos += 1;
                Ok(Lexeme::Tail(mode))
            }
            b'f' => self.number(start).map(Lexeme::FrameCount),
            b'g' => self.number(start).map(Lexeme::Generate),
            b'x' => Ok(Lexeme::Skip),
            b'k' => self.kernel(start).map(Lexeme::Kernel),
            _ => Err(self.unknown(start)),
        };
        Some(lexeme.map(|l| (l, start)))
    }

    fn kernel(&mut self, start: usize) -> Result<KernelSpec, ScheduleError> {
        let frames = self.number(start)?;
        if self.bytes.get(self.pos) != Some(&b'h') {
            return KernelSpec::simplified(frames).map_err(|_| self.unknown(start));
        }
        self.pos += 1;
        let height = self.number(start)?;
        self.expect(b'w', start)?;
        let width = self.number(start)?;
        KernelSpec::new(frames, height, width).map_err(|_| self.unknown(start))
    }
}

fn tokenize(name: &str) -> Result<(Vec<Segment>, bool), ScheduleError> {
    if name.is_empty() {
        return Err(ScheduleError::EmptySchedule);
    }
    if !name.is_ascii() {
        let offset = name.bytes().position(|b| !b.is_ascii()).unwrap_or(0);
        return Err(ScheduleError::UnknownToken {
            token: name[offset..].chars().next().map(String::from).unwrap_or_default(),
            offset,
        });
    }
    let (body, discretize) = match name.find('+') {
        Some(i) if &name[i..] == "+D" => (&name[..i], true),
        Some(i) => {
            return Err(ScheduleError::UnknownToken {
                token: name[i..].to_string(),
                offset: i,
            })
        }
        None => (name, false),
    };

    let mut lexer = Lexer {
        bytes: body.as_bytes(),
        pos: 0,
    };
    let mut segments = Vec::new();
    let mut pending_count: Option<(u32, usize)> = None;
    while let Some(item) = lexer.next() {
        let (lexeme, offset) = item?;
        match (lexeme, pending_count.take()) {
            (Lexeme::Kernel(kernel), Some((count, _))) => segments.push(Segment::Frames { count, kernel }),
            (Lexeme::Kernel(_), None) => {
                return Err(ScheduleError::UnknownToken {
                    token: body[offset..lexer.pos].to_string(),
                    offset,
                })
            }
            (_, Some((_, f_offset))) => {
                return Err(ScheduleError::UnknownToken {
                    token: body[f_offset..offset].trim_end_matches('_').to_string(),
                    offset: f_offset,
                })
            }
            (Lexeme::FrameCount(count), None) => pending_count = Some((count, offset)),
            (Lexeme::Tail(m), None) => segments.push(Segment::Tail(m)),
            (Lexeme::Skip, None) => segments.push(Segment::Skip),
            (Lexeme::Generate(n), None) => segments.push(Segment::Generate(n)),
        }
    }
    if let Some((_, f_offset)) = pending_count {
        return Err(ScheduleError::UnknownToken {
            token: body[f_offset..].to_string(),
            offset: f_offset,
        });
    }
    if segments.is_empty() {
        return Err(ScheduleError::EmptySchedule);
    }
    Ok((segments, discretize))
}
