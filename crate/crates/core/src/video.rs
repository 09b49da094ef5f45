//! Dense `T×H×W×C` latent tensors.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VideoError {
    #[error("spatial and channel dimensions must be at least 1 (got H={h}, W={w}, C={c})")]
    ZeroDim { h: usize, w: usize, c: usize },
    #[error("data length {got} does not match dims {t}x{h}x{w}x{c}")]
    DataLength {
        t: usize,
        h: usize,
        w: usize,
        c: usize,
        got: usize,
    },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("frame range {start}..{end} out of bounds for {frames} frames")]
    FrameRange {
        start: usize,
        end: usize,
        frames: usize,
    },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },
}

/// A latent video stored t-major, then row-major, then channel.
///
/// `frames() == 0` is allowed and represents an empty history.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVideo {
    t: usize,
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

impl LatentVideo {
    pub fn new(t: usize, h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self, VideoError> {
        if h == 0 || w == 0 || c == 0 {
            return Err(VideoError::ZeroDim { h, w, c });
        }
        if data.len() != t * h * w * c {
            return Err(VideoError::DataLength {
                t,
                h,
                w,
                c,
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(VideoError::NonFinite { index });
        }
        Ok(Self { t, h, w, c, data })
    }

    pub fn zeros(t: usize, h: usize, w: usize, c: usize) -> Result<Self, VideoError> {
        Self::new(t, h, w, c, vec![0.0; t * h * w * c])
    }

    pub fn constant(t: usize, h: usize, w: usize, c: usize, value: f64) -> Result<Self, VideoError> {
        Self::new(t, h, w, c, vec![value; t * h * w * c])
    }

    /// Builds a video from `f(t, y, x, ch)`.
    pub fn from_fn(
        t: usize,
        h: usize,
        w: usize,
        c: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self, VideoError> {
        let mut data = Vec::with_capacity(t * h * w * c);
        for ti in 0..t {
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        data.push(f(ti, y, x, ch));
                    }
                }
            }
        }
        Self::new(t, h, w, c, data)
    }

    pub fn frames(&self) -> usize {
        self.t
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    /// `(T, H, W, C)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.t, self.h, self.w, self.c)
    }

    pub fn frame_shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    pub fn frame_len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, t: usize, y: usize, x: usize, ch: usize) -> f64 {
        self.data[((t * self.h + y) * self.w + x) * self.c + ch]
    }

    /// Channel vector of one latent pixel.
    #[inline]
    pub fn pixel(&self, t: usize, y: usize, x: usize) -> &[f64] {
        let start = ((t * self.h + y) * self.w + x) * self.c;
        &self.data[start..start + self.c]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    /// Iterates over every pixel vector in storage order.
    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.c)
    }

    pub fn slice_frames(&self, range: Range<usize>) -> Result<Self, VideoError> {
        if range.start > range.end || range.end > self.t {
            return Err(VideoError::FrameRange {
                start: range.start,
                end: range.end,
                frames: self.t,
            });
        }
        let n = self.frame_len();
        Ok(Self {
            t: range.len(),
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data[range.start * n..range.end * n].to_vec(),
        })
    }

    /// Frames listed by index, in the given order. Indices may repeat.
    pub fn select_frames(&self, indices: &[usize]) -> Result<Self, VideoError> {
        let n = self.frame_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= self.t {
                return Err(VideoError::FrameRange {
                    start: i,
                    end: i + 1,
                    frames: self.t,
                });
            }
            data.extend_from_slice(self.frame(i));
        }
        Ok(Self {
            t: indices.len(),
            h: self.h,
            w: self.w,
            c: self.c,
            data,
        })
    }

    pub fn reversed(&self) -> Self {
        let order: Vec<usize> = (0..self.t).rev().collect();
        self.select_frames(&order).expect("indices in range")
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self, VideoError> {
        Self::new(self.t, self.h, self.w, self.c, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Mean over all frames, as a one-frame video. Requires at least one frame.
    pub fn temporal_mean(&self) -> Option<Self> {
        if self.t == 0 {
            return None;
        }
        let n = self.frame_len();
        let mut acc = vec![0.0; n];
        for t in 0..self.t {
            for (a, v) in acc.iter_mut().zip(self.frame(t)) {
                *a += v;
            }
        }
        let inv = 1.0 / self.t as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Some(Self {
            t: 1,
            h: self.h,
            w: self.w,
            c: self.c,
            data: acc,
        })
    }

    pub fn ensure_same_frame_shape(&self, other: &Self) -> Result<(), VideoError> {
        if self.frame_shape() != other.frame_shape() {
            return Err(VideoError::ShapeMismatch {
                left: self.frame_shape(),
                right: other.frame_shape(),
            });
        }
        Ok(())
    }
}
