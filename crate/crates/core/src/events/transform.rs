use std::collections::BTreeMap;

use log::warn;

use super::{
    Episode, Event, EventError, MouseEvent, Timestamp, MAX_MOUSE_DELTA, NANOS_PER_MS,
    NANOS_PER_SEC,
};
use crate::events::mouse_flags;

pub const DEFAULT_RESAMPLE_MS: u64 = 50;
pub const DEFAULT_INACTIVE_THRESHOLD_S: f64 = 10.0;

/// Largest wheel detent count kept after merging.
pub const MAX_SCROLL_DETENTS: i32 = 9;

const SEGMENT_LEN_S: f64 = 120.0;
const SEGMENT_HEAD_SKIP_S: f64 = 60.0;
const SEGMENT_TAIL_SKIP_S: f64 = 120.0;

/// Validates and orders raw events into an episode.
///
/// Screen events sharing a timestamp collapse to the last one seen.
pub fn normalize_stream(raw: Vec<Event>) -> Result<Episode, EventError> {
    Episode::with_events("", raw).normalize()
}

impl Episode {
    /// Sorts, validates and deduplicates in place, keeping id and metadata.
    pub fn normalize(mut self) -> Result<Episode, EventError> {
        for (index, e) in self.events.iter().enumerate() {
            e.validate()
                .map_err(|reason| EventError::InvalidEvent { index, reason })?;
        }
        self.events.sort_by_key(Event::order_key);
        let mut out: Vec<Event> = Vec::with_capacity(self.events.len());
        for e in self.events.drain(..) {
            if let (Some(Event::Screen(prev)), Event::Screen(cur)) = (out.last(), &e) {
                if prev.t == cur.t {
                    out.pop();
                }
            }
            out.push(e);
        }
        self.events = out;
        Ok(self)
    }
}

/// Re-bins screen and mouse events onto a fixed interval grid.
///
/// Each bin keeps its latest screen frame (at that frame's own timestamp) and
/// one merged mouse event stamped at the bin start: deltas and scroll summed,
/// flags OR-ed. Keyboard events pass through untouched.
pub fn resample_stream(ep: &Episode, interval_ms: u64) -> Episode {
    assert!(interval_ms > 0, "resample interval must be positive");
    let bin_ns = interval_ms * NANOS_PER_MS;

    let mut screens: BTreeMap<u64, Event> = BTreeMap::new();
    let mut mice: BTreeMap<u64, MouseAccum> = BTreeMap::new();
    let mut keys: Vec<Event> = Vec::new();

    for e in &ep.events {
        let bin = e.t().as_ns() / bin_ns;
        match e {
            Event::Screen(_) => {
                screens.insert(bin, e.clone());
            }
            Event::Mouse(m) => mice.entry(bin).or_default().add(m),
            Event::Keyboard(_) => keys.push(e.clone()),
        }
    }

    let mut events: Vec<Event> = screens.into_values().collect();
    events.extend(
        mice.into_iter()
            .map(|(bin, acc)| Event::Mouse(acc.finish(Timestamp(bin * bin_ns)))),
    );
    events.extend(keys);
    events.sort_by_key(Event::order_key);

    Episode {
        id: ep.id.clone(),
        events,
        meta: ep.meta.clone(),
    }
}

#[derive(Default)]
struct MouseAccum {
    dx: i64,
    dy: i64,
    flags: u16,
    scroll: Option<i64>,
}

impl MouseAccum {
    fn add(&mut self, m: &MouseEvent) {
        self.dx += m.dx as i64;
        self.dy += m.dy as i64;
        self.flags |= m.button_flags;
        if let Some(s) = m.scroll {
            *self.scroll.get_or_insert(0) += s as i64;
        }
    }

    fn finish(self, t: Timestamp) -> MouseEvent {
        let clamp = |v: i64, axis: &str| {
            let limit = MAX_MOUSE_DELTA as i64;
            if v.abs() > limit {
                warn!("merged {axis} delta {v} at {t} ns clamped to ±{limit}");
            }
            v.clamp(-limit, limit) as i32
        };
        let has_wheel = self.flags & mouse_flags::ANY_WHEEL != 0;
        let scroll = has_wheel.then(|| {
            let s = self.scroll.unwrap_or(0);
            let limit = MAX_SCROLL_DETENTS as i64;
            if s.abs() > limit {
                warn!("merged scroll {s} at {t} ns clamped to ±{limit}");
            }
            s.clamp(-limit, limit) as i32
        });
        MouseEvent {
            t,
            dx: clamp(self.dx, "dx"),
            dy: clamp(self.dy, "dy"),
            button_flags: self.flags,
            scroll,
        }
    }
}

/// One collapsed inactive gap.
struct Cut {
    /// Events strictly after this time (or from the episode start when `None`)
    /// and strictly before `resume_at` are dropped.
    drop_after: Option<u64>,
    resume_at: u64,
    /// Total shift applied to events at or after `resume_at`.
    shift: u64,
}

impl Cut {
    /// Whether `t` survives this cut once shifted. An event exactly at the
    /// resume point of an interior gap would land on the last action before
    /// the gap, so it is dropped too.
    fn keeps_shifted(&self, t: u64) -> bool {
        match self.drop_after {
            None => t >= self.resume_at,
            Some(_) => t > self.resume_at,
        }
    }
}

fn inactive_cuts(action_times: &[u64], threshold_ns: u64) -> Vec<Cut> {
    let mut cuts = Vec::new();
    let mut shift = 0;
    if let Some(&first) = action_times.first() {
        if first > threshold_ns {
            shift += first - threshold_ns;
            cuts.push(Cut {
                drop_after: None,
                resume_at: first - threshold_ns,
                shift,
            });
        }
    }
    for w in action_times.windows(2) {
        let gap = w[1] - w[0];
        if gap > threshold_ns {
            shift += gap - threshold_ns;
            cuts.push(Cut {
                drop_after: Some(w[0]),
                resume_at: w[1] - threshold_ns,
                shift,
            });
        }
    }
    cuts
}

fn threshold_ns(threshold_s: f64) -> u64 {
    assert!(threshold_s >= 0.0, "inactivity threshold must be non-negative");
    (threshold_s * NANOS_PER_SEC as f64).round() as u64
}

fn action_times(ep: &Episode) -> Vec<u64> {
    ep.events
        .iter()
        .filter(|e| e.is_action())
        .map(|e| e.t().as_ns())
        .collect()
}

/// Removes action-free stretches longer than `threshold_s`.
///
/// Each such stretch is collapsed so that exactly `threshold_s` of lead-in
/// before the next action survives; later events shift back accordingly. A
/// trailing stretch keeps `threshold_s` after the last action. An episode
/// without any keyboard or mouse event comes back empty.
pub fn filter_inactive(ep: &Episode, threshold_s: f64) -> Episode {
    let thr = threshold_ns(threshold_s);
    let actions = action_times(ep);
    let mut out = Episode {
        id: ep.id.clone(),
        events: Vec::new(),
        meta: ep.meta.clone(),
    };
    let Some(&last_action) = actions.last() else {
        return out;
    };
    let cuts = inactive_cuts(&actions, thr);
    let tail_limit = last_action.saturating_add(thr);

    let mut next_cut = 0;
    let mut shift = 0;
    for e in &ep.events {
        let t = e.t().as_ns();
        if t > tail_limit {
            break;
        }
        while next_cut < cuts.len() && cuts[next_cut].keeps_shifted(t) {
            shift = cuts[next_cut].shift;
            next_cut += 1;
        }
        if let Some(cut) = cuts.get(next_cut) {
            if cut.drop_after.map_or(true, |lo| t > lo) {
                continue;
            }
        }
        let mut kept = e.clone();
        kept.set_t(Timestamp(t - shift));
        out.events.push(kept);
    }
    out
}

/// Like [`filter_inactive`], but starts a new episode at every collapsed gap
/// instead of shifting timestamps. Each piece is re-based to start at zero
/// and gets the id `<id>#<k>`.
pub fn split_inactive(ep: &Episode, threshold_s: f64) -> Vec<Episode> {
    let thr = threshold_ns(threshold_s);
    let actions = action_times(ep);
    let Some(&last_action) = actions.last() else {
        return Vec::new();
    };
    let cuts = inactive_cuts(&actions, thr);
    let tail_limit = last_action.saturating_add(thr);

    let mut pieces: Vec<Vec<Event>> = vec![Vec::new()];
    let mut next_cut = 0;
    for e in &ep.events {
        let t = e.t().as_ns();
        if t > tail_limit {
            break;
        }
        while next_cut < cuts.len() && cuts[next_cut].resume_at <= t {
            next_cut += 1;
            if !pieces.last().map_or(true, Vec::is_empty) {
                pieces.push(Vec::new());
            }
        }
        if let Some(cut) = cuts.get(next_cut) {
            let after_start = cut.drop_after.map_or(true, |lo| t > lo);
            if after_start && t < cut.resume_at {
                continue;
            }
        }
        pieces.last_mut().unwrap().push(e.clone());
    }

    pieces
        .into_iter()
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(k, mut events)| {
            let base = events[0].t().as_ns();
            for e in &mut events {
                let t = e.t().as_ns() - base;
                e.set_t(Timestamp(t));
            }
            Episode {
                id: format!("{}#{k}", ep.id),
                events,
                meta: ep.meta.clone(),
            }
        })
        .collect()
}

/// A `[start_s, end_s)` window of a screen recording.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
}

/// Two-minute windows over a recording, skipping the first minute and the
/// last two minutes. A trailing window shorter than two minutes is dropped.
pub fn segment_screen_stream(frame_count: u64, fps: f64) -> Vec<Segment> {
    assert!(fps > 0.0, "fps must be positive");
    let duration = frame_count as f64 / fps;
    let usable_end = duration - SEGMENT_TAIL_SKIP_S;
    let mut segments = Vec::new();
    let mut k = 0u64;
    loop {
        let start_s = SEGMENT_HEAD_SKIP_S + k as f64 * SEGMENT_LEN_S;
        let end_s = start_s + SEGMENT_LEN_S;
        if end_s > usable_end + 1e-9 {
            break;
        }
        segments.push(Segment { start_s, end_s });
        k += 1;
    }
    segments
}
