//! Generation plans: which frames each iteration generates and which already
//! available frames feed each schedule entry.
//!
//! Binding works outward from the iteration's generated block. On each side,
//! a frame entry takes up to `count` contiguous available frames, a skip
//! passes over frames that are neither available nor being generated, and a
//! tail takes whatever contiguous available frames remain. Entries that run
//! out of frames are clipped, possibly to nothing.

use std::fmt::{self, Write as _};
use std::ops::Range;

use thiserror::Error;

use crate::schedule::{KernelSpec, PackingSchedule, SamplingMode, Segment, TailMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("schedule samples in {found} order, {expected} planning was requested")]
    ModeMismatch { expected: PlanMode, found: &'static str },
    #[error("{total} frames is too short, need at least {need}")]
    TooShort { total: usize, need: usize },
    #[error("section length must be positive")]
    ZeroSection,
    #[error("endpoints {0:?} and {1:?} overlap")]
    OverlappingEndpoints(Range<usize>, Range<usize>),
    #[error("endpoint {0:?} must be one section long and start on a section boundary or end at the last frame")]
    InvalidEndpoint(Range<usize>),
    #[error("plan violates {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Vanilla,
    Endpoint,
    Inverted,
    MultiEndpoint,
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanMode::Vanilla => "vanilla",
            PlanMode::Endpoint => "endpoint",
            PlanMode::Inverted => "inverted",
            PlanMode::MultiEndpoint => "multi-endpoint",
        })
    }
}

/// A schedule entry bound to concrete frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub segment: usize,
    pub frames: Range<usize>,
    pub kernel: KernelSpec,
    /// Entry count from the schedule; `frames` is shorter when clipped.
    pub requested: u32,
}

impl Binding {
    pub fn is_clipped(&self) -> bool {
        self.frames.len() < self.requested as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iteration {
    /// Generated ranges in temporal order. The first one is the block the
    /// schedule's generate segment sits on.
    pub target: Vec<Range<usize>>,
    /// Frame entry bindings in schedule segment order, empty ones included.
    pub inputs: Vec<Binding>,
    pub skip_spans: Vec<Range<usize>>,
    pub tail: Option<(TailMode, Range<usize>)>,
    pub prompt: Option<String>,
}

impl Iteration {
    pub fn target_len(&self) -> usize {
        self.target.iter().map(|r| r.len()).sum()
    }

    pub fn input_frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.inputs.iter().flat_map(|b| b.frames.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub frames: Range<usize>,
    pub prompt: Option<String>,
}

impl From<Range<usize>> for Endpoint {
    fn from(frames: Range<usize>) -> Self {
        Self { frames, prompt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationPlan {
    pub mode: PlanMode,
    pub total: usize,
    pub section: usize,
    /// Frames supplied by the user before the first iteration.
    pub user_frames: Range<usize>,
    pub iterations: Vec<Iteration>,
}

fn bind(schedule: &PackingSchedule, primary: Range<usize>, available: &[bool], target: &[bool]) -> Iteration {
    let total = available.len();
    let segments = schedule.segments();
    let mut inputs = Vec::new();
    let mut skip_spans = Vec::new();
    let mut tail = None;

    let mut cur = primary.start;
    for idx in schedule.past_side() {
        let mut lo = cur;
        match segments[idx] {
            Segment::Frames { count, kernel } => {
                while lo > 0 && cur - lo < count as usize && available[lo - 1] {
                    lo -= 1;
                }
                inputs.push(Binding {
                    segment: idx,
                    frames: lo..cur,
                    kernel,
                    requested: count,
                });
            }
            Segment::Skip => {
                while lo > 0 && !available[lo - 1] && !target[lo - 1] {
                    lo -= 1;
                }
                skip_spans.push(lo..cur);
            }
            Segment::Tail(mode) => {
                while lo > 0 && available[lo - 1] {
                    lo -= 1;
                }
                tail = Some((mode, lo..cur));
            }
            Segment::Generate(_) => {}
        }
        cur = lo;
    }

    let mut cur = primary.end;
    for idx in schedule.future_side() {
        let mut hi = cur;
        match segments[idx] {
            Segment::Frames { count, kernel } => {
                while hi < total && hi - cur < count as usize && available[hi] {
                    hi += 1;
                }
                inputs.push(Binding {
                    segment: idx,
                    frames: cur..hi,
                    kernel,
                    requested: count,
                });
            }
            Segment::Skip => {
                while hi < total && !available[hi] && !target[hi] {
                    hi += 1;
                }
                skip_spans.push(cur..hi);
            }
            Segment::Tail(mode) => {
                while hi < total && available[hi] {
                    hi += 1;
                }
                tail = Some((mode, cur..hi));
            }
            Segment::Generate(_) => {}
        }
        cur = hi;
    }

    inputs.sort_by_key(|b| b.segment);
    skip_spans.sort_by_key(|r| r.start);
    Iteration {
        target: Vec::new(),
        inputs,
        skip_spans,
        tail,
        prompt: None,
    }
}

struct Builder<'a> {
    schedule: &'a PackingSchedule,
    available: Vec<bool>,
    iterations: Vec<Iteration>,
}

impl<'a> Builder<'a> {
    fn new(schedule: &'a PackingSchedule, total: usize, user: Range<usize>) -> Self {
        let mut available = vec![false; total];
        available[user].iter_mut().for_each(|a| *a = true);
        Self {
            schedule,
            available,
            iterations: Vec::new(),
        }
    }

    fn push(&mut self, target: Vec<Range<usize>>, prompt: Option<String>) {
        let mut in_target = vec![false; self.available.len()];
        for r in &target {
            in_target[r.clone()].iter_mut().for_each(|t| *t = true);
        }
        let mut it = bind(self.schedule, target[0].clone(), &self.available, &in_target);
        for r in &target {
            self.available[r.clone()].iter_mut().for_each(|a| *a = true);
        }
        let mut sorted = target;
        sorted.sort_by_key(|r| r.start);
        it.target = sorted;
        it.prompt = prompt;
        self.iterations.push(it);
    }
}

fn check_mode(schedule: &PackingSchedule, want: SamplingMode, mode: PlanMode) -> Result<(), PlanError> {
    let found = schedule.sampling_mode();
    if found != want {
        return Err(PlanError::ModeMismatch {
            expected: mode,
            found: found.as_str(),
        });
    }
    Ok(())
}

fn chunks(range: Range<usize>, section: usize) -> impl Iterator<Item = Range<usize>> {
    range.clone().step_by(section).map(move |a| a..(a + section).min(range.end))
}

impl GenerationPlan {
    /// Sections in temporal order, each conditioned on the frames before it.
    /// A final short section is allowed.
    pub fn vanilla(total: usize, section: usize, schedule: &PackingSchedule) -> Result<Self, PlanError> {
        check_mode(schedule, SamplingMode::Vanilla, PlanMode::Vanilla)?;
        if section == 0 {
            return Err(PlanError::ZeroSection);
        }
        if total == 0 {
            return Err(PlanError::TooShort { total, need: 1 });
        }
        let mut b = Builder::new(schedule, total, 0..0);
        for r in chunks(0..total, section) {
            b.push(vec![r], None);
        }
        Ok(Self::finish(PlanMode::Vanilla, total, section, 0..0, b))
    }

    /// First and last sections together, then the gaps in temporal order.
    pub fn endpoint(total: usize, section: usize, schedule: &PackingSchedule) -> Result<Self, PlanError> {
        if section == 0 {
            return Err(PlanError::ZeroSection);
        }
        if total < 2 * section {
            return Err(PlanError::TooShort { total, need: 2 * section });
        }
        let mut plan = Self::multi_endpoint(total, section, schedule, &[Endpoint::from(total - section..total)])?;
        plan.mode = PlanMode::Endpoint;
        Ok(plan)
    }

    /// Sections from the last one backwards, each conditioned on the user
    /// frames and on the sections already generated after it. The user frames
    /// are the leading frames the pre-generate entries cover.
    pub fn inverted(total: usize, section: usize, schedule: &PackingSchedule) -> Result<Self, PlanError> {
        check_mode(schedule, SamplingMode::Inverted, PlanMode::Inverted)?;
        if section == 0 {
            return Err(PlanError::ZeroSection);
        }
        let user: usize = schedule
            .past_side()
            .map(|i| match schedule.segments()[i] {
                Segment::Frames { count, .. } => count as usize,
                _ => 0,
            })
            .sum();
        if total <= user {
            return Err(PlanError::TooShort { total, need: user + 1 });
        }
        let mut b = Builder::new(schedule, total, 0..user);
        let mut hi = total;
        while hi > user {
            let lo = hi.saturating_sub(section).max(user);
            b.push(vec![lo..hi], None);
            hi = lo;
        }
        Ok(Self::finish(PlanMode::Inverted, total, section, 0..user, b))
    }

    /// Anchor sections first, in temporal order, then the gaps between them
    /// in temporal order. If the first anchor does not open the video, the
    /// opening section is generated together with it.
    pub fn multi_endpoint(
        total: usize,
        section: usize,
        schedule: &PackingSchedule,
        endpoints: &[Endpoint],
    ) -> Result<Self, PlanError> {
        check_mode(schedule, SamplingMode::EndpointAnchored, PlanMode::MultiEndpoint)?;
        if section == 0 {
            return Err(PlanError::ZeroSection);
        }
        if total == 0 {
            return Err(PlanError::TooShort { total, need: section });
        }
        let mut anchors: Vec<&Endpoint> = endpoints.iter().collect();
        anchors.sort_by_key(|e| e.frames.start);
        for e in &anchors {
            let r = &e.frames;
            let aligned = r.start % section == 0 || r.end == total;
            if r.len() != section.min(total - r.start.min(total)) || r.end > total || !aligned || r.is_empty() {
                return Err(PlanError::InvalidEndpoint(r.clone()));
            }
        }
        for w in anchors.windows(2) {
            if w[1].frames.start < w[0].frames.end {
                return Err(PlanError::OverlappingEndpoints(w[0].frames.clone(), w[1].frames.clone()));
            }
        }

        let mut b = Builder::new(schedule, total, 0..0);
        let mut covered = vec![false; total];
        let mut rest = anchors.as_slice();
        if let Some((first, tail)) = anchors.split_first() {
            if first.frames.start != 0 {
                let opening = 0..section.min(first.frames.start);
                b.push(vec![opening.clone(), first.frames.clone()], first.prompt.clone());
                covered[opening].iter_mut().for_each(|c| *c = true);
                covered[first.frames.clone()].iter_mut().for_each(|c| *c = true);
                rest = tail;
            }
        }
        for e in rest {
            b.push(vec![e.frames.clone()], e.prompt.clone());
            covered[e.frames.clone()].iter_mut().for_each(|c| *c = true);
        }
        let mut t = 0;
        while t < total {
            if covered[t] {
                t += 1;
                continue;
            }
            let gap_end = (t..total).find(|&i| covered[i]).unwrap_or(total);
            for r in chunks(t..gap_end, section) {
                b.push(vec![r], None);
            }
            t = gap_end;
        }
        Ok(Self::finish(PlanMode::MultiEndpoint, total, section, 0..0, b))
    }

    /// Plans by the order the schedule implies. Endpoint schedules use
    /// `endpoints` when given, otherwise a single final anchor.
    pub fn for_schedule(
        total: usize,
        section: usize,
        schedule: &PackingSchedule,
        endpoints: &[Endpoint],
    ) -> Result<Self, PlanError> {
        match schedule.sampling_mode() {
            SamplingMode::Vanilla => Self::vanilla(total, section, schedule),
            SamplingMode::Inverted => Self::inverted(total, section, schedule),
            SamplingMode::EndpointAnchored if endpoints.is_empty() => Self::endpoint(total, section, schedule),
            SamplingMode::EndpointAnchored => Self::multi_endpoint(total, section, schedule, endpoints),
            SamplingMode::Unclassified => Err(PlanError::ModeMismatch {
                expected: PlanMode::Vanilla,
                found: SamplingMode::Unclassified.as_str(),
            }),
        }
    }

    fn finish(mode: PlanMode, total: usize, section: usize, user_frames: Range<usize>, b: Builder<'_>) -> Self {
        Self {
            mode,
            total,
            section,
            user_frames,
            iterations: b.iterations,
        }
    }

    /// Checks coverage, disjointness and that inputs only use frames that
    /// exist by the time they are read.
    pub fn validate(&self) -> Result<(), PlanError> {
        let mut available = vec![false; self.total];
        let mut hits = vec![0usize; self.total];
        for t in self.user_frames.clone() {
            available[t] = true;
            hits[t] += 1;
        }
        for (n, it) in self.iterations.iter().enumerate() {
            for f in it.input_frames() {
                if f >= self.total || !available[f] {
                    return Err(PlanError::Invalid(format!("availability: iteration {} reads frame {f}", n + 1)));
                }
            }
            if let Some((_, r)) = &it.tail {
                if r.clone().any(|f| !available[f]) {
                    return Err(PlanError::Invalid(format!("availability: iteration {} tail", n + 1)));
                }
            }
            for r in &it.target {
                for t in r.clone() {
                    if t >= self.total {
                        return Err(PlanError::Invalid(format!("range: frame {t}")));
                    }
                    hits[t] += 1;
                }
            }
            for r in &it.target {
                available[r.clone()].iter_mut().for_each(|a| *a = true);
            }
        }
        if let Some(t) = hits.iter().position(|&h| h != 1) {
            return Err(PlanError::Invalid(format!("coverage: frame {t} appears {} times", hits[t])));
        }
        Ok(())
    }

    /// One line per iteration:
    /// `ITER <n> TARGET <a>..<b>[,<c>..<d>] INPUTS <a>..<b>@<kernel>,...`.
    /// Iterations are numbered from 1 and empty bindings are left out; an
    /// iteration with no inputs prints `INPUTS -`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, it) in self.iterations.iter().enumerate() {
            let targets: Vec<String> = it.target.iter().map(|r| format!("{}..{}", r.start, r.end)).collect();
            let inputs: Vec<String> = it
                .inputs
                .iter()
                .filter(|b| !b.frames.is_empty())
                .map(|b| format!("{}..{}@{}", b.frames.start, b.frames.end, b.kernel))
                .collect();
            let inputs = if inputs.is_empty() { "-".to_string() } else { inputs.join(",") };
            let _ = writeln!(out, "ITER {} TARGET {} INPUTS {}", n + 1, targets.join(","), inputs);
        }
        out
    }
}

pub fn plan_vanilla(total: usize, section: usize, schedule: &PackingSchedule) -> Result<GenerationPlan, PlanError> {
    GenerationPlan::vanilla(total, section, schedule)
}

pub fn plan_endpoint(total: usize, section: usize, schedule: &PackingSchedule) -> Result<GenerationPlan, PlanError> {
    GenerationPlan::endpoint(total, section, schedule)
}

pub fn plan_inverted(total: usize, section: usize, schedule: &PackingSchedule) -> Result<GenerationPlan, PlanError> {
    GenerationPlan::inverted(total, section, schedule)
}

pub fn plan_multi_endpoint(
    total: usize,
    section: usize,
    schedule: &PackingSchedule,
    endpoints: &[Endpoint],
) -> Result<GenerationPlan, PlanError> {
    GenerationPlan::multi_endpoint(total, section, schedule, endpoints)
}
