//! Token-budget arithmetic.
//!
//! Frame `i` in importance order gets `L_f / λ^i` tokens, so a history of `T`
//! frames plus a generated section of `S` frames costs
//! `S·L_f + L_f·(1 − λ^−T)/(1 − λ^−1)`, which never exceeds
//! `(S + λ/(λ−1))·L_f`. The `_exact` variants do the same sums over rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::schedule::{KernelSpec, PackingSchedule, Segment, TailMode};

/// Spatial window used by the append tail option.
pub const APPEND_POOL: (usize, usize) = (32, 32);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("invalid budget parameters: {0}")]
    InvalidParams(String),
    #[error("budget {0} has no finite binary expansion")]
    NonDyadicBudget(String),
    #[error("budget must be positive, got {0}")]
    NonPositiveBudget(String),
    #[error("cannot parse {0:?} as a rational number")]
    BadNumber(String),
    #[error("{what}: {value} is not divisible by {step}")]
    IndivisibleDims {
        what: &'static str,
        value: usize,
        step: usize,
    },
}

/// How grids are formed when a dimension is not a multiple of the kernel step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Divisibility {
    /// Any remainder is an error.
    #[default]
    Strict,
    /// Ceiling-divided grids: spatial remainders are zero-padded on the
    /// bottom/right, temporal remainders replicate the entry's outermost frame.
    Pad,
}

impl Divisibility {
    pub fn cells(self, what: &'static str, value: usize, step: usize) -> Result<usize, LedgerError> {
        match self {
            Divisibility::Strict if !value.is_multiple_of(step) => Err(LedgerError::IndivisibleDims { what, value, step }),
            Divisibility::Strict => Ok(value / step),
            Divisibility::Pad => Ok(value.div_ceil(step)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetParams {
    /// Tokens of one frame at the base kernel.
    pub frame_tokens: u64,
    /// Compression ratio λ between consecutive importance levels.
    pub lambda: f64,
    /// Frames in the generated section.
    pub section: u64,
    /// History frames.
    pub history: u64,
}

impl BudgetParams {
    pub fn new(frame_tokens: u64, lambda: f64, section: u64, history: u64) -> Result<Self, LedgerError> {
        if frame_tokens == 0 {
            return Err(LedgerError::InvalidParams("L_f must be at least 1".into()));
        }
        if !(lambda.is_finite() && lambda > 1.0) {
            return Err(LedgerError::InvalidParams(format!("lambda must be > 1, got {lambda}")));
        }
        if section == 0 {
            return Err(LedgerError::InvalidParams("section must be at least 1 frame".into()));
        }
        Ok(Self {
            frame_tokens,
            lambda,
            section,
            history,
        })
    }
}

pub fn per_frame_length(frame_tokens: f64, lambda: f64, level: u32) -> f64 {
    frame_tokens / lambda.powi(level as i32)
}

pub fn total_length(p: &BudgetParams) -> f64 {
    let lf = p.frame_tokens as f64;
    let s = p.section as f64;
    if p.history == 0 {
        return s * lf;
    }
    let decay = p.lambda.powf(-(p.history as f64));
    s * lf + lf * (1.0 - decay) / (1.0 - 1.0 / p.lambda)
}

pub fn length_bound(frame_tokens: f64, lambda: f64, section: f64) -> f64 {
    (section + lambda / (lambda - 1.0)) * frame_tokens
}

/// `λ^−T` built from integer powers, reduced once.
fn inverse_power(lambda: &BigRational, t: u64) -> BigRational {
    let t = t as usize;
    BigRational::new(Pow::pow(lambda.denom(), t), Pow::pow(lambda.numer(), t))
}

/// [`total_length`] over rationals; `lambda` must exceed one.
pub fn total_length_exact(frame_tokens: u64, lambda: &BigRational, section: u64, history: u64) -> BigRational {
    length_bound_exact(frame_tokens, lambda, section) - convergence_gap_exact(frame_tokens, lambda, history)
}

pub fn length_bound_exact(frame_tokens: u64, lambda: &BigRational, section: u64) -> BigRational {
    let one = BigRational::one();
    let lf = BigRational::from_integer(frame_tokens.into());
    (BigRational::from_integer(section.into()) + lambda / (lambda - &one)) * lf
}

/// `length_bound − total_length = L_f·λ^−T/(1 − λ^−1)`.
pub fn convergence_gap_exact(frame_tokens: u64, lambda: &BigRational, history: u64) -> BigRational {
    let lf = BigRational::from_integer(frame_tokens.into());
    lf * inverse_power(lambda, history) / (BigRational::one() - lambda.recip())
}

/// A budget expressed through the series `Σ_{i≥0} 2^−i = 2`, plus or minus
/// single terms `2^−i`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RateDecomposition {
    pub base_included: bool,
    /// Levels whose term is added once more. May repeat.
    pub duplicated_levels: Vec<u32>,
    /// Levels whose term is removed from the base series.
    pub dropped_levels: Vec<u32>,
}

impl RateDecomposition {
    pub fn reconstruct(&self) -> BigRational {
        let term = |i: u32| BigRational::new(BigInt::one(), BigInt::one() << i as usize);
        let mut sum = if self.base_included {
            BigRational::from_integer(2.into())
        } else {
            BigRational::zero()
        };
        for &i in &self.duplicated_levels {
            sum += term(i);
        }
        for &i in &self.dropped_levels {
            sum -= term(i);
        }
        sum
    }
}

fn dyadic_exponent(x: &BigRational) -> Option<u32> {
    let d = x.denom();
    if !d.is_positive() {
        return None;
    }
    let tz = d.trailing_zeros().unwrap_or(0);
    if (d >> tz as usize).is_one() {
        u32::try_from(tz).ok()
    } else {
        None
    }
}

/// Binary digits of a non-negative dyadic rational as levels: the integer
/// part contributes `⌊x⌋` copies of level 0, fractional bit `2^−i` contributes
/// level `i`.
fn levels_of(x: &BigRational) -> Vec<u32> {
    let mut levels = Vec::new();
    let whole = x.to_integer();
    let copies = whole.to_u64().expect("integer part fits in u64");
    levels.extend(std::iter::repeat_n(0, copies as usize));
    let mut frac = x - BigRational::from_integer(whole);
    let mut level = 0u32;
    while !frac.is_zero() {
        level += 1;
        frac *= BigRational::from_integer(2.into());
        if frac >= BigRational::one() {
            levels.push(level);
            frac -= BigRational::one();
        }
    }
    levels
}

/// Expresses a budget (in units of `L_f`) through duplicated or dropped
/// terms of the halving series.
///
/// Budgets of at least 2 keep the base series and only duplicate terms.
/// Smaller budgets keep the base series and drop the bits of `2 − budget`.
pub fn decompose_rate(budget: &BigRational) -> Result<RateDecomposition, LedgerError> {
    if !budget.is_positive() {
        return Err(LedgerError::NonPositiveBudget(budget.to_string()));
    }
    if dyadic_exponent(budget).is_none() {
        return Err(LedgerError::NonDyadicBudget(budget.to_string()));
    }
    if budget.to_integer() > BigInt::from(u32::MAX) {
        return Err(LedgerError::InvalidParams(format!("budget {budget} is too large")));
    }
    let two = BigRational::from_integer(2.into());
    if *budget >= two {
        Ok(RateDecomposition {
            base_included: true,
            duplicated_levels: levels_of(&(budget - &two)),
            dropped_levels: Vec::new(),
        })
    } else {
        Ok(RateDecomposition {
            base_included: true,
            duplicated_levels: Vec::new(),
            dropped_levels: levels_of(&(two - budget)),
        })
    }
}

/// Parses `"2.625"`, `"21/8"` or `"3"` exactly.
pub fn parse_rational(text: &str) -> Result<BigRational, LedgerError> {
    let bad = || LedgerError::BadNumber(text.to_string());
    let s = text.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let mantissa: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| bad())? };
    let scale = Pow::pow(&BigInt::from(10), frac_part.len());
    let r = BigRational::new(mantissa, scale);
    Ok(if neg { -r } else { r })
}

/// `(count/p_f)·(H/p_h)·(W/p_w)`.
pub fn tokens_for_entry(count: u32, kernel: KernelSpec, h: usize, w: usize) -> Result<usize, LedgerError> {
    tokens_for_entry_with(count, kernel, h, w, Divisibility::Strict)
}

pub fn tokens_for_entry_with(
    count: u32,
    kernel: KernelSpec,
    h: usize,
    w: usize,
    div: Divisibility,
) -> Result<usize, LedgerError> {
    let groups = div.cells("frame count", count as usize, kernel.frames as usize)?;
    let rows = div.cells("height", h, kernel.height as usize)?;
    let cols = div.cells("width", w, kernel.width as usize)?;
    Ok(groups * rows * cols)
}

/// Tokens one tail of `tail_frames` frames contributes under `mode`.
pub fn tail_tokens(
    mode: TailMode,
    tail_frames: usize,
    coarsest: KernelSpec,
    h: usize,
    w: usize,
    div: Divisibility,
) -> Result<usize, LedgerError> {
    Ok(match mode {
        TailMode::Delete => 0,
        TailMode::Append => tail_frames * h.div_ceil(APPEND_POOL.0) * w.div_ceil(APPEND_POOL.1),
        TailMode::Compress if tail_frames == 0 => 0,
        TailMode::Compress => {
            div.cells("height", h, coarsest.height as usize)? * div.cells("width", w, coarsest.width as usize)?
        }
    })
}

/// One line of a schedule's token accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetLine {
    pub label: String,
    pub tokens: usize,
}

pub fn budget_breakdown(
    schedule: &PackingSchedule,
    h: usize,
    w: usize,
    tail_frames: usize,
    div: Divisibility,
) -> Result<Vec<BudgetLine>, LedgerError> {
    let mut lines = Vec::new();
    for seg in schedule.segments() {
        match seg {
            Segment::Frames { count, kernel } => lines.push(BudgetLine {
                label: format!("f{count}{kernel}"),
                tokens: tokens_for_entry_with(*count, *kernel, h, w, div)?,
            }),
            Segment::Generate(n) => lines.push(BudgetLine {
                label: format!("g{n}"),
                tokens: tokens_for_entry_with(*n, KernelSpec::BASE, h, w, div)?,
            }),
            Segment::Tail(mode) => lines.push(BudgetLine {
                label: mode.token().to_string(),
                tokens: tail_tokens(*mode, tail_frames, schedule.coarsest_kernel(), h, w, div)?,
            }),
            Segment::Skip => {}
        }
    }
    Ok(lines)
}

/// Whole-context token count: every frame entry, the generated section at
/// the base kernel, and the tail.
pub fn tokens_for_schedule(schedule: &PackingSchedule, h: usize, w: usize, tail_frames: usize) -> Result<usize, LedgerError> {
    tokens_for_schedule_with(schedule, h, w, tail_frames, Divisibility::Strict)
}

pub fn tokens_for_schedule_with(
    schedule: &PackingSchedule,
    h: usize,
    w: usize,
    tail_frames: usize,
    div: Divisibility,
) -> Result<usize, LedgerError> {
    Ok(budget_breakdown(schedule, h, w, tail_frames, div)?.iter().map(|l| l.tokens).sum())
}

/// History-only share of [`tokens_for_schedule`].
pub fn history_tokens(
    schedule: &PackingSchedule,
    h: usize,
    w: usize,
    tail_frames: usize,
    div: Divisibility,
) -> Result<usize, LedgerError> {
    let generate = tokens_for_entry_with(schedule.generate_count(), KernelSpec::BASE, h, w, div)?;
    Ok(tokens_for_schedule_with(schedule, h, w, tail_frames, div)? - generate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn per_frame_lengths() {
        assert_eq!(per_frame_length(1024.0, 2.0, 0), 1024.0);
        assert_eq!(per_frame_length(1024.0, 2.0, 3), 128.0);
        assert_eq!(per_frame_length(1560.0, 2.0, 5), 48.75);
    }

    #[test]
    fn total_lengths() {
        let p = |t| BudgetParams::new(1024, 2.0, 1, t).unwrap();
        assert_eq!(total_length(&p(0)), 1024.0);
        // 1024·(1 + 1 + 1/2 + 1/4 + 1/8)
        assert_eq!(total_length(&p(4)), 2944.0);
        assert_eq!(total_length(&p(4000)), 3072.0);
        assert_eq!(length_bound(1024.0, 2.0, 1.0), 3072.0);
        assert_eq!(length_bound(1024.0, 2.0, 9.0), 11264.0);
        let big = length_bound(1024.0, 1e12, 3.0);
        assert!((big - 4.0 * 1024.0).abs() < 1e-6);
    }

    #[test]
    fn exact_totals_match_direct_summation() {
        let two = BigRational::from_integer(2.into());
        for t in 0..20u64 {
            let direct: BigRational = (0..t)
                .map(|i| BigRational::new(1024.into(), BigInt::one() << i as usize))
                .fold(BigRational::from_integer(1024.into()), |a, b| a + b);
            assert_eq!(total_length_exact(1024, &two, 1, t), direct);
            assert_eq!(
                length_bound_exact(1024, &two, 1) - total_length_exact(1024, &two, 1, t),
                convergence_gap_exact(1024, &two, t)
            );
        }
    }

    #[test]
    fn budget_params_validation() {
        assert!(BudgetParams::new(0, 2.0, 1, 0).is_err());
        assert!(BudgetParams::new(1, 1.0, 1, 0).is_err());
        assert!(BudgetParams::new(1, f64::NAN, 1, 0).is_err());
        assert!(BudgetParams::new(1, 2.0, 0, 0).is_err());
    }

    #[test]
    fn rate_decompositions() {
        let d = decompose_rate(&q("2.625")).unwrap();
        assert!(d.base_included);
        assert_eq!(d.duplicated_levels, vec![1, 3]);
        assert!(d.dropped_levels.is_empty());
        assert_eq!(d.reconstruct(), q("21/8"));

        let d = decompose_rate(&q("2")).unwrap();
        assert_eq!(d, RateDecomposition { base_included: true, ..Default::default() });

        let d = decompose_rate(&q("3.5")).unwrap();
        assert_eq!(d.duplicated_levels, vec![0, 1]);

        let d = decompose_rate(&q("8")).unwrap();
        assert_eq!(d.duplicated_levels, vec![0; 6]);
        assert_eq!(d.reconstruct(), q("8"));

        let d = decompose_rate(&q("0.25")).unwrap();
        assert_eq!(d.dropped_levels, vec![0, 1, 2]);
        assert_eq!(d.reconstruct(), q("1/4"));
        assert!(d.duplicated_levels.is_empty());
    }

    #[test]
    fn rate_errors() {
        assert!(matches!(decompose_rate(&q("0.1")), Err(LedgerError::NonDyadicBudget(_))));
        assert!(matches!(decompose_rate(&q("1/3")), Err(LedgerError::NonDyadicBudget(_))));
        assert!(matches!(decompose_rate(&q("0")), Err(LedgerError::NonPositiveBudget(_))));
        assert!(matches!(decompose_rate(&q("-1")), Err(LedgerError::NonPositiveBudget(_))));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational(".").is_err());
        assert_eq!(q(".5"), q("1/2"));
        assert_eq!(q("-0.75"), q("-3/4"));
    }

    #[test]
    fn entry_tokens() {
        let k = |n| KernelSpec::simplified(n).unwrap();
        assert_eq!(tokens_for_entry(1, k(1), 64, 64).unwrap(), 1024);
        assert_eq!(tokens_for_entry(2, k(2), 64, 64).unwrap(), 256);
        assert_eq!(tokens_for_entry(16, k(4), 64, 64).unwrap(), 256);
        assert_eq!(tokens_for_entry(1, k(1), 60, 104).unwrap(), 1560);
        assert!(matches!(
            tokens_for_entry(16, k(4), 60, 104),
            Err(LedgerError::IndivisibleDims { what: "height", value: 60, step: 8 })
        ));
        assert!(matches!(
            tokens_for_entry(3, k(2), 64, 64),
            Err(LedgerError::IndivisibleDims { what: "frame count", .. })
        ));
        // ⌈3/2⌉·⌈60/8⌉·⌈104/8⌉
        assert_eq!(tokens_for_entry_with(3, k(4), 60, 104, Divisibility::Pad).unwrap(), 8 * 13);
    }

    #[test]
    fn schedule_tokens() {
        let s = PackingSchedule::parse("td_f16k4f2k2f1k1_g9").unwrap();
        assert_eq!(tokens_for_schedule(&s, 64, 64, 0).unwrap(), 10752);
        assert_eq!(tokens_for_schedule(&s, 64, 64, 81).unwrap(), 10752);
        assert_eq!(history_tokens(&s, 64, 64, 0, Divisibility::Strict).unwrap(), 1536);
        let s = PackingSchedule::parse("td_f1k1_g1").unwrap();
        assert_eq!(tokens_for_schedule(&s, 64, 64, 0).unwrap(), 2048);

        let ta = PackingSchedule::parse("ta_f16k4f2k2f1k1_g9").unwrap();
        assert_eq!(tokens_for_schedule(&ta, 64, 64, 3).unwrap(), 10752 + 12);
        let tc = PackingSchedule::parse("tc_f16k4f2k2f1k1_g9").unwrap();
        assert_eq!(tokens_for_schedule(&tc, 64, 64, 8).unwrap(), 10752 + 64);
        assert_eq!(tokens_for_schedule(&tc, 64, 64, 0).unwrap(), 10752);
    }
}
