//! Frame-fetch strategies over GOP-structured media stores.
//!
//! A strategy turns a sorted frame plan into a sequence of decode runs.
//! The scheduler is pure and allocation-free, so strategies can be compared
//! exhaustively by counting; [`fetch_frames`] executes the same runs against
//! a real store and returns instrumented statistics.
//!
//! `adaptive_batch` keeps a decoder position `p` (the next frame it would
//! produce). For each target `t`: when `p <= t` and no keyframe lies in
//! `(p, t]` it decodes `p..=t` sequentially, otherwise it seeks to the
//! keyframe before `t` and decodes forward. Continuing across a GOP boundary
//! is allowed as long as it is not longer than re-seeking.

mod bench;

use std::fmt;
use std::io::{Read, Seek};
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::codec::{open_sequential, ByteCounter, CodecError, Frame, MediaStore};
use crate::fsl::FslError;

pub use bench::{bench_pipeline, BenchConfig, BenchReport, BenchRow, DEFAULT_REPS};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Fsl(#[from] FslError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// One fresh seek per target.
    PerFrame,
    /// One seek to the first target's keyframe, then decode straight through
    /// to the last target.
    NaiveBatch,
    AdaptiveBatch,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::PerFrame, Strategy::NaiveBatch, Strategy::AdaptiveBatch];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::PerFrame => "per_frame",
            Strategy::NaiveBatch => "naive_batch",
            Strategy::AdaptiveBatch => "adaptive_batch",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_frame" | "per-frame" => Ok(Strategy::PerFrame),
            "naive_batch" | "naive-batch" | "naive" => Ok(Strategy::NaiveBatch),
            "adaptive_batch" | "adaptive-batch" | "adaptive" => Ok(Strategy::AdaptiveBatch),
            _ => Err(format!(
                "unknown strategy `{s}` (expected per_frame, naive_batch or adaptive_batch)"
            )),
        }
    }
}

/// Parses a comma list of strategies; `all` selects every strategy.
pub fn parse_strategies(s: &str) -> Result<Vec<Strategy>, String> {
    if s == "all" {
        return Ok(Strategy::ALL.to_vec());
    }
    s.split(',').map(|p| p.trim().parse()).collect()
}

/// Decode `from..=to` and emit frame `to`. When `seek` is set the decoder is
/// first repositioned at keyframe `from`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Run {
    pub seek: bool,
    pub from: u64,
    pub to: u64,
}

impl Run {
    pub fn frames(&self) -> u64 {
        self.to - self.from + 1
    }
}

/// Decode runs for `plan` (sorted, unique). `kf` maps a frame to the
/// keyframe at or before it.
pub fn schedule<'a, K>(plan: &'a [u64], kf: K, strategy: Strategy) -> Schedule<'a, K>
where
    K: Fn(u64) -> u64,
{
    Schedule {
        plan,
        kf,
        strategy,
        next: 0,
        pos: None,
    }
}

pub struct Schedule<'a, K> {
    plan: &'a [u64],
    kf: K,
    strategy: Strategy,
    next: usize,
    pos: Option<u64>,
}

impl<K: Fn(u64) -> u64> Iterator for Schedule<'_, K> {
    type Item = Run;

    fn next(&mut self) -> Option<Run> {
        let t = *self.plan.get(self.next)?;
        self.next += 1;
        let seek_run = Run {
            seek: true,
            from: (self.kf)(t),
            to: t,
        };
        let run = match (self.strategy, self.pos) {
            (Strategy::PerFrame, _) | (_, None) => seek_run,
            (Strategy::NaiveBatch, Some(p)) => Run {
                seek: false,
                from: p,
                to: t,
            },
            (Strategy::AdaptiveBatch, Some(p)) => {
                if p <= t && (self.kf)(t) <= p {
                    Run {
                        seek: false,
                        from: p,
                        to: t,
                    }
                } else {
                    seek_run
                }
            }
        };
        self.pos = Some(t + 1);
        Some(run)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.plan.len() - self.next;
        (n, Some(n))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimCounts {
    pub frames_decoded: u64,
    pub seeks: u64,
}

/// Counts what `strategy` would decode for `plan`, without touching a store.
pub fn simulate<K: Fn(u64) -> u64>(plan: &[u64], kf: K, strategy: Strategy) -> SimCounts {
    schedule(plan, kf, strategy).fold(SimCounts::default(), |mut c, r| {
        c.frames_decoded += r.frames();
        c.seeks += r.seek as u64;
        c
    })
}

/// O(1) keyframe lookup for every frame of a store.
#[derive(Clone, Debug)]
pub struct KeyframeTable {
    kf: Vec<u64>,
}

impl KeyframeTable {
    pub fn new(keyframes: &[u64], frame_count: u64) -> Self {
        let mut kf = Vec::with_capacity(frame_count as usize);
        let mut cur = 0;
        let mut next = keyframes.iter().peekable();
        for i in 0..frame_count {
            while next.peek().is_some_and(|&&k| k <= i) {
                cur = *next.next().unwrap();
            }
            kf.push(cur);
        }
        KeyframeTable { kf }
    }

    pub fn keyframe_before(&self, index: u64) -> u64 {
        self.kf[index as usize]
    }

    pub fn len(&self) -> u64 {
        self.kf.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.kf.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DecodeStats {
    pub images: u64,
    pub bytes_read: u64,
    pub frames_decoded: u64,
    pub seeks: u64,
    pub elapsed: Duration,
}

impl DecodeStats {
    pub fn kb_per_img(&self) -> f64 {
        if self.images == 0 {
            0.0
        } else {
            self.bytes_read as f64 / self.images as f64 / 1024.0
        }
    }

    pub fn img_per_s(&self) -> f64 {
        let s = self.elapsed.as_secs_f64();
        if s == 0.0 {
            0.0
        } else {
            self.images as f64 / s
        }
    }
}

impl std::ops::AddAssign for DecodeStats {
    fn add_assign(&mut self, o: DecodeStats) {
        self.images += o.images;
        self.bytes_read += o.bytes_read;
        self.frames_decoded += o.frames_decoded;
        self.seeks += o.seeks;
        self.elapsed += o.elapsed;
    }
}

fn check_plan(plan: &[u64], frame_count: u64) -> Result<(), DecodeError> {
    if let Some(w) = plan.windows(2).find(|w| w[0] >= w[1]) {
        return Err(DecodeError::InvalidPlan(format!(
            "plan must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    if let Some(&last) = plan.last() {
        if last >= frame_count {
            return Err(CodecError::FrameOutOfRange {
                index: last,
                frame_count,
            }
            .into());
        }
    }
    Ok(())
}

/// Decodes the frames of `plan` with `strategy`. Frames come back in plan
/// order; stats cover exactly the frame records read.
pub fn fetch_frames<R: Read + Seek>(
    plan: &[u64],
    store: &mut MediaStore<R>,
    strategy: Strategy,
) -> Result<(Vec<Frame>, DecodeStats), DecodeError> {
    check_plan(plan, store.frame_count())?;
    let started = Instant::now();
    let mut counter = ByteCounter::default();
    let mut frames = Vec::with_capacity(plan.len());
    if let Some(&first) = plan.first() {
        let table = KeyframeTable::new(store.keyframes(), store.frame_count());
        let kf = |i| table.keyframe_before(i);
        let mut dec = open_sequential(store, kf(first), &mut counter)?;
        let mut fresh = true;
        for run in schedule(plan, kf, strategy) {
            if run.seek && !fresh {
                dec.seek(run.from, &mut counter)?;
            }
            fresh = false;
            debug_assert_eq!(dec.position(), run.from);
            dec.advance_to(run.to, &mut counter)?;
            frames.push(dec.next(&mut counter)?);
        }
    }
    let stats = DecodeStats {
        images: plan.len() as u64,
        bytes_read: counter.bytes_read,
        frames_decoded: counter.frames_decoded,
        seeks: counter.seeks,
        elapsed: started.elapsed(),
    };
    Ok((frames, stats))
}

#[cfg(test)]
mod tests;
