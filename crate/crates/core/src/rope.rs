//! Axial rotary phases over `(time, height, width)`.
//!
//! `channels` real channels are split equally between the three axes; each
//! axis rotates `d_axis/2` channel pairs with angular frequencies
//! `ω_j = base^(−2j/d_axis)`. A phase is the angle `p·ω_j`. Phases are kept as
//! raw angles and pooled by averaging, which for these linear phases equals
//! evaluating them at the mean position of the window.

use thiserror::Error;

use crate::schedule::KernelSpec;

pub const DEFAULT_BASE: f64 = 10_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RopeError {
    #[error("time indices must be strictly increasing (index {at})")]
    NonMonotonicIndices { at: usize },
    #[error("channels ({0}) must split into three axes of an even width")]
    ChannelSplit(usize),
    #[error("axis {axis} has length {len}, not divisible by step {step}")]
    IndivisibleDims { axis: &'static str, len: usize, step: usize },
    #[error("every axis needs at least one position")]
    EmptyAxis,
    #[error("rotary base must be finite and > 1, got {0}")]
    BadBase(f64),
}

/// How the last window along an axis is handled when the axis length is not
/// a multiple of the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgePolicy {
    #[default]
    Strict,
    /// Ceiling-divided grid; the last window averages whatever it covers.
    Partial,
}

/// Per-axis angular frequencies for a channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct AxialFrequencies {
    pub time: Vec<f64>,
    pub height: Vec<f64>,
    pub width: Vec<f64>,
}

impl AxialFrequencies {
    pub fn new(channels: usize, base: f64) -> Result<Self, RopeError> {
        if !(base.is_finite() && base > 1.0) {
            return Err(RopeError::BadBase(base));
        }
        if channels == 0 || !channels.is_multiple_of(6) {
            return Err(RopeError::ChannelSplit(channels));
        }
        let d_axis = channels / 3;
        let freqs: Vec<f64> = (0..d_axis / 2)
            .map(|j| base.powf(-2.0 * j as f64 / d_axis as f64))
            .collect();
        Ok(Self {
            time: freqs.clone(),
            height: freqs.clone(),
            width: freqs,
        })
    }

    pub fn len(&self) -> usize {
        self.time.len() + self.height.len() + self.width.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Phase vector `[t·ω_t…, h·ω_h…, w·ω_w…]` at one position.
    pub fn phases_at(&self, t: f64, h: f64, w: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.time.iter().map(|f| t * f));
        out.extend(self.height.iter().map(|f| h * f));
        out.extend(self.width.iter().map(|f| w * f));
        out
    }
}

/// Phases on a `time × height × width` grid of positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    time: Vec<f64>,
    height: Vec<f64>,
    width: Vec<f64>,
    freqs: AxialFrequencies,
    /// `[t][h][w][freq]`, flattened.
    phases: Vec<f64>,
}

impl PhaseGrid {
    /// Grid at arbitrary (possibly fractional) positions.
    pub fn from_positions(
        time: Vec<f64>,
        height: Vec<f64>,
        width: Vec<f64>,
        freqs: AxialFrequencies,
    ) -> Result<Self, RopeError> {
        if time.is_empty() || height.is_empty() || width.is_empty() {
            return Err(RopeError::EmptyAxis);
        }
        let mut phases = Vec::with_capacity(time.len() * height.len() * width.len() * freqs.len());
        for &t in &time {
            for &h in &height {
                for &w in &width {
                    phases.extend(freqs.phases_at(t, h, w));
                }
            }
        }
        Ok(Self {
            time,
            height,
            width,
            freqs,
            phases,
        })
    }

    pub fn time_positions(&self) -> &[f64] {
        &self.time
    }

    pub fn height_positions(&self) -> &[f64] {
        &self.height
    }

    pub fn width_positions(&self) -> &[f64] {
        &self.width
    }

    pub fn frequencies(&self) -> &AxialFrequencies {
        &self.freqs
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.time.len(), self.height.len(), self.width.len())
    }

    pub fn freq_count(&self) -> usize {
        self.freqs.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phase(&self, t: usize, h: usize, w: usize) -> &[f64] {
        let n = self.freq_count();
        let (_, nh, nw) = self.shape();
        let at = ((t * nh + h) * nw + w) * n;
        &self.phases[at..at + n]
    }

    /// `(cos, sin)` for every stored angle.
    pub fn rotations(&self) -> Vec<(f64, f64)> {
        self.phases.iter().map(|a| (a.cos(), a.sin())).collect()
    }
}

/// Phases at integer time indices (which may skip values) on an
/// `h_cells × w_cells` spatial grid.
pub fn generate_phases(
    time_indices: &[i64],
    h_cells: usize,
    w_cells: usize,
    channels: usize,
) -> Result<PhaseGrid, RopeError> {
    generate_phases_with_base(time_indices, h_cells, w_cells, channels, DEFAULT_BASE)
}

pub fn generate_phases_with_base(
    time_indices: &[i64],
    h_cells: usize,
    w_cells: usize,
    channels: usize,
    base: f64,
) -> Result<PhaseGrid, RopeError> {
    if let Some(at) = time_indices.windows(2).position(|w| w[1] <= w[0]) {
        return Err(RopeError::NonMonotonicIndices { at: at + 1 });
    }
    let freqs = AxialFrequencies::new(channels, base)?;
    PhaseGrid::from_positions(
        time_indices.iter().map(|&t| t as f64).collect(),
        (0..h_cells).map(|h| h as f64).collect(),
        (0..w_cells).map(|w| w as f64).collect(),
        freqs,
    )
}

fn windows(axis: &'static str, len: usize, step: usize, policy: EdgePolicy) -> Result<Vec<(usize, usize)>, RopeError> {
    if policy == EdgePolicy::Strict && !len.is_multiple_of(step) {
        return Err(RopeError::IndivisibleDims { axis, len, step });
    }
    Ok((0..len.div_ceil(step))
        .map(|i| (i * step, ((i + 1) * step).min(len)))
        .collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Average-pools phases over `(p_f, p_h, p_w)` windows.
pub fn pool_phases(grid: &PhaseGrid, kernel: KernelSpec) -> Result<PhaseGrid, RopeError> {
    pool_phases_with(grid, kernel, EdgePolicy::Strict)
}

pub fn pool_phases_with(grid: &PhaseGrid, kernel: KernelSpec, policy: EdgePolicy) -> Result<PhaseGrid, RopeError> {
    let (nt, nh, nw) = grid.shape();
    let tw = windows("time", nt, kernel.frames as usize, policy)?;
    let hw = windows("height", nh, kernel.height as usize, policy)?;
    let ww = windows("width", nw, kernel.width as usize, policy)?;
    let nf = grid.freq_count();

    let mut phases = Vec::with_capacity(tw.len() * hw.len() * ww.len() * nf);
    let mut acc = vec![0.0; nf];
    for &(t0, t1) in &tw {
        for &(h0, h1) in &hw {
            for &(w0, w1) in &ww {
                acc.iter_mut().for_each(|a| *a = 0.0);
                for t in t0..t1 {
                    for h in h0..h1 {
                        for w in w0..w1 {
                            for (a, p) in acc.iter_mut().zip(grid.phase(t, h, w)) {
                                *a += p;
                            }
                        }
                    }
                }
                let n = ((t1 - t0) * (h1 - h0) * (w1 - w0)) as f64;
                phases.extend(acc.iter().map(|a| a / n));
            }
        }
    }
    let pooled_axis = |pos: &[f64], win: &[(usize, usize)]| win.iter().map(|&(a, b)| mean(&pos[a..b])).collect();
    Ok(PhaseGrid {
        time: pooled_axis(&grid.time, &tw),
        height: pooled_axis(&grid.height, &hw),
        width: pooled_axis(&grid.width, &ww),
        freqs: grid.freqs.clone(),
        phases,
    })
}
