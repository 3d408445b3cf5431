//! Action-stream evaluation over fixed time bins: per-axis Pearson
//! correlation and scale ratio of mouse motion, and keypress accuracy for
//! keyboard keys and mouse buttons.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::events::{mouse_flags, Episode, Event, KeyAction, NANOS_PER_MS};

pub const DEFAULT_BIN_MS: u64 = 50;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bin {
    pub dx: i64,
    pub dy: i64,
    /// Virtual keys held at any instant of the bin.
    pub keys: BTreeSet<u8>,
    /// Mouse buttons held at any instant of the bin, one bit per button in
    /// the order of [`mouse_flags::BUTTONS`].
    pub buttons: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinnedActions {
    pub bin_ms: u64,
    pub bins: Vec<Bin>,
}

impl BinnedActions {
    pub fn n(&self) -> usize {
        self.bins.len()
    }

    pub fn dx(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.dx as f64).collect()
    }

    pub fn dy(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.dy as f64).collect()
    }

    /// Extends with empty bins up to `n`. Held keys and buttons are not
    /// carried into the padding.
    pub fn pad_to(&mut self, n: usize) {
        if self.bins.len() < n {
            self.bins.resize(n, Bin::default());
        }
    }
}

/// Aggregates actions into contiguous bins starting at t = 0. The bin count
/// covers the last event of any kind.
pub fn bin_actions(ep: &Episode, bin_ms: u64) -> BinnedActions {
    assert!(bin_ms > 0, "bin width must be positive");
    let bin_ns = bin_ms * NANOS_PER_MS;
    let n = match ep.events.last() {
        Some(_) => (ep.end_time().as_ns() / bin_ns + 1) as usize,
        None => 0,
    };
    let mut bins = vec![Bin::default(); n];
    let mut held_keys: BTreeSet<u8> = BTreeSet::new();
    let mut held_buttons = 0u8;
    let mut cur = 0usize;
    for e in &ep.events {
        let idx = (e.t().as_ns() / bin_ns) as usize;
        while cur < idx {
            cur += 1;
            bins[cur].keys.clone_from(&held_keys);
            bins[cur].buttons = held_buttons;
        }
        let bin = &mut bins[cur];
        match e {
            Event::Mouse(m) => {
                bin.dx += m.dx as i64;
                bin.dy += m.dy as i64;
                for (bit, (down, up)) in mouse_flags::BUTTONS.iter().enumerate() {
                    let mask = 1u8 << bit;
                    if m.button_flags & down != 0 {
                        held_buttons |= mask;
                        bin.buttons |= mask;
                    }
                    if m.button_flags & up != 0 {
                        held_buttons &= !mask;
                    }
                }
            }
            Event::Keyboard(k) => match k.action {
                KeyAction::Press => {
                    held_keys.insert(k.vk);
                    bin.keys.insert(k.vk);
                }
                KeyAction::Release => {
                    held_keys.remove(&k.vk);
                }
            },
            Event::Screen(_) => {}
        }
    }
    while cur + 1 < n {
        cur += 1;
        bins[cur].keys.clone_from(&held_keys);
        bins[cur].buttons = held_buttons;
    }
    BinnedActions { bin_ms, bins }
}

/// A correlation coefficient; `undefined` when either series has zero
/// variance, in which case `value` is 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub undefined: bool,
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(MetricsError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Correlation> {
    check_len(a.len(), b.len())?;
    let n = a.len() as f64;
    let undefined = Correlation {
        value: 0.0,
        undefined: true,
    };
    if a.is_empty() {
        return Ok(undefined);
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(undefined);
    }
    Ok(Correlation {
        value: (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0),
        undefined: false,
    })
}

/// Mean absolute magnitude ratio, inverted to be at least 1. Both means
/// zero gives 1.0; exactly one zero gives infinity.
pub fn magnitude_ratio(src: &[f64], pred: &[f64]) -> Result<f64> {
    check_len(src.len(), pred.len())?;
    let n = src.len().max(1) as f64;
    let ms = src.iter().map(|v| v.abs()).sum::<f64>() / n;
    let mp = pred.iter().map(|v| v.abs()).sum::<f64>() / n;
    Ok(match (ms == 0.0, mp == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => f64::INFINITY,
        (false, false) => {
            let r = ms / mp;
            if r < 1.0 {
                1.0 / r
            } else {
                r
            }
        }
    })
}

/// Per-axis scale ratios of mouse motion.
pub fn scale_ratio(src: &BinnedActions, pred: &BinnedActions) -> Result<(f64, f64)> {
    check_len(src.n(), pred.n())?;
    Ok((
        magnitude_ratio(&src.dx(), &pred.dx())?,
        magnitude_ratio(&src.dy(), &pred.dy())?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracy {
    pub percent: f64,
    /// Bins where either side was active.
    pub bins: usize,
    pub matched: usize,
    /// No qualifying bins; `percent` is reported as 100.
    pub vacuous: bool,
}

impl Accuracy {
    fn from_counts(matched: usize, bins: usize) -> Self {
        Accuracy {
            percent: if bins == 0 {
                100.0
            } else {
                100.0 * matched as f64 / bins as f64
            },
            bins,
            matched,
            vacuous: bins == 0,
        }
    }
}

/// Exact-set accuracy over bins where either stream is active, for keys and
/// for mouse buttons.
pub fn keypress_accuracy(gt: &BinnedActions, pred: &BinnedActions) -> Result<(Accuracy, Accuracy)> {
    check_len(gt.n(), pred.n())?;
    let (mut kb, mut km, mut mb, mut mm) = (0, 0, 0, 0);
    for (g, p) in gt.bins.iter().zip(&pred.bins) {
        if !g.keys.is_empty() || !p.keys.is_empty() {
            kb += 1;
            km += (g.keys == p.keys) as usize;
        }
        if g.buttons != 0 || p.buttons != 0 {
            mb += 1;
            mm += (g.buttons == p.buttons) as usize;
        }
    }
    Ok((Accuracy::from_counts(km, kb), Accuracy::from_counts(mm, mb)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub bins: usize,
    pub bin_ms: u64,
    pub pearson_x: Correlation,
    pub pearson_y: Correlation,
    pub scale_ratio_x: f64,
    pub scale_ratio_y: f64,
    pub kbd: Accuracy,
    pub mouse: Accuracy,
}

/// Bins both episodes, pads the shorter one with empty bins, and computes
/// every metric.
pub fn evaluate(gt: &Episode, pred: &Episode, bin_ms: u64) -> MetricsReport {
    let mut g = bin_actions(gt, bin_ms);
    let mut p = bin_actions(pred, bin_ms);
    let n = g.n().max(p.n());
    g.pad_to(n);
    p.pad_to(n);
    let (scale_ratio_x, scale_ratio_y) = scale_ratio(&g, &p).expect("padded to equal length");
    let (kbd, mouse) = keypress_accuracy(&g, &p).expect("padded to equal length");
    MetricsReport {
        bins: n,
        bin_ms,
        pearson_x: pearson(&g.dx(), &p.dx()).expect("padded to equal length"),
        pearson_y: pearson(&g.dy(), &p.dy()).expect("padded to equal length"),
        scale_ratio_x,
        scale_ratio_y,
        kbd,
        mouse,
    }
}

fn ratio_text(r: f64) -> String {
    if r.is_finite() {
        format!("{r:.4}")
    } else {
        "inf".to_string()
    }
}

impl fmt::Display for MetricsReport {
    /// Deterministic `key=value` lines.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bins={}", self.bins)?;
        writeln!(f, "bin_ms={}", self.bin_ms)?;
        writeln!(f, "pearson_x={:.4}", self.pearson_x.value)?;
        writeln!(f, "pearson_x_undefined={}", self.pearson_x.undefined)?;
        writeln!(f, "pearson_y={:.4}", self.pearson_y.value)?;
        writeln!(f, "pearson_y_undefined={}", self.pearson_y.undefined)?;
        writeln!(f, "scale_ratio_x={}", ratio_text(self.scale_ratio_x))?;
        writeln!(f, "scale_ratio_y={}", ratio_text(self.scale_ratio_y))?;
        writeln!(f, "keypress_acc_kbd={:.2}", self.kbd.percent)?;
        writeln!(f, "keypress_acc_kbd_bins={}", self.kbd.bins)?;
        writeln!(f, "keypress_acc_kbd_vacuous={}", self.kbd.vacuous)?;
        writeln!(f, "keypress_acc_mouse={:.2}", self.mouse.percent)?;
        writeln!(f, "keypress_acc_mouse_bins={}", self.mouse.bins)?;
        write!(f, "keypress_acc_mouse_vacuous={}", self.mouse.vacuous)
    }
}

#[cfg(test)]
mod tests;
