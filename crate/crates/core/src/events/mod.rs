//! Desktop interaction events and the stream transforms applied before
//! tokenization.
//!
//! An [`Episode`] is an ordered list of [`Event`]s. Ordering is by timestamp,
//! ties broken screen < keyboard < mouse, then by insertion order, so that an
//! observation always precedes the actions recorded at the same instant.

mod transform;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::container::MediaRef;

pub use transform::{
    filter_inactive, normalize_stream, resample_stream, segment_screen_stream, split_inactive,
    Segment, DEFAULT_INACTIVE_THRESHOLD_S, DEFAULT_RESAMPLE_MS,
};

pub const NANOS_PER_MS: u64 = 1_000_000;
pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Largest absolute mouse delta representable by the token vocabulary.
pub const MAX_MOUSE_DELTA: i32 = 1999;

/// Windows raw-input mouse button flags.
pub mod mouse_flags {
    pub const NOP: u16 = 0x0000;
    pub const LEFT_DOWN: u16 = 0x0001;
    pub const LEFT_UP: u16 = 0x0002;
    pub const RIGHT_DOWN: u16 = 0x0004;
    pub const RIGHT_UP: u16 = 0x0008;
    pub const MIDDLE_DOWN: u16 = 0x0010;
    pub const MIDDLE_UP: u16 = 0x0020;
    pub const BUTTON4_DOWN: u16 = 0x0040;
    pub const BUTTON4_UP: u16 = 0x0080;
    pub const BUTTON5_DOWN: u16 = 0x0100;
    pub const BUTTON5_UP: u16 = 0x0200;
    pub const WHEEL: u16 = 0x0400;
    pub const HWHEEL: u16 = 0x0800;

    /// Every bit defined by the flag table.
    pub const VALID_MASK: u16 = 0x0FFF;
    pub const ANY_WHEEL: u16 = WHEEL | HWHEEL;

    /// `(down, up)` flag pairs for the five buttons, indexed by button number.
    pub const BUTTONS: [(u16, u16); 5] = [
        (LEFT_DOWN, LEFT_UP),
        (RIGHT_DOWN, RIGHT_UP),
        (MIDDLE_DOWN, MIDDLE_UP),
        (BUTTON4_DOWN, BUTTON4_UP),
        (BUTTON5_DOWN, BUTTON5_UP),
    ];
}

/// Nanoseconds since episode start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn from_ms(ms: u64) -> Self {
        Timestamp(ms * NANOS_PER_MS)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Timestamp((s * NANOS_PER_SEC as f64).round().max(0.0) as u64)
    }

    pub fn as_ns(self) -> u64 {
        self.0
    }

    /// Whole milliseconds, truncated.
    pub fn as_ms(self) -> u64 {
        self.0 / NANOS_PER_MS
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Topic {
    Screen,
    Keyboard,
    Mouse,
}

impl Topic {
    pub const ALL: [Topic; 3] = [Topic::Screen, Topic::Keyboard, Topic::Mouse];

    /// Position in the tie-break order at equal timestamps.
    pub fn rank(self) -> u8 {
        match self {
            Topic::Screen => 0,
            Topic::Keyboard => 1,
            Topic::Mouse => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Topic::Screen => "screen",
            Topic::Keyboard => "keyboard",
            Topic::Mouse => "mouse",
        }
    }

    pub fn is_action(self) -> bool {
        !matches!(self, Topic::Screen)
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Topic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "screen" => Ok(Topic::Screen),
            "keyboard" => Ok(Topic::Keyboard),
            "mouse" => Ok(Topic::Mouse),
            other => Err(format!("unknown topic `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KeyAction {
    Press,
    Release,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyboardEvent {
    pub t: Timestamp,
    /// Windows virtual-key code.
    pub vk: u8,
    pub action: KeyAction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MouseEvent {
    pub t: Timestamp,
    pub dx: i32,
    pub dy: i32,
    pub button_flags: u16,
    /// Wheel detents; present iff `button_flags` carries a wheel bit.
    pub scroll: Option<i32>,
}

impl MouseEvent {
    pub fn movement(t: Timestamp, dx: i32, dy: i32) -> Self {
        MouseEvent {
            t,
            dx,
            dy,
            button_flags: mouse_flags::NOP,
            scroll: None,
        }
    }

    pub fn has_wheel(&self) -> bool {
        self.button_flags & mouse_flags::ANY_WHEEL != 0
    }
}

/// A screen observation: one frame of a referenced media store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScreenEvent {
    pub t: Timestamp,
    pub media: MediaRef,
    pub frame_index: u64,
}

impl ScreenEvent {
    /// The media reference pinned to this event's frame.
    pub fn frame_ref(&self) -> MediaRef {
        MediaRef {
            frame_index: Some(self.frame_index),
            ..self.media.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Screen(ScreenEvent),
    Keyboard(KeyboardEvent),
    Mouse(MouseEvent),
}

impl Event {
    pub fn t(&self) -> Timestamp {
        match self {
            Event::Screen(e) => e.t,
            Event::Keyboard(e) => e.t,
            Event::Mouse(e) => e.t,
        }
    }

    pub fn set_t(&mut self, t: Timestamp) {
        match self {
            Event::Screen(e) => e.t = t,
            Event::Keyboard(e) => e.t = t,
            Event::Mouse(e) => e.t = t,
        }
    }

    pub fn topic(&self) -> Topic {
        match self {
            Event::Screen(_) => Topic::Screen,
            Event::Keyboard(_) => Topic::Keyboard,
            Event::Mouse(_) => Topic::Mouse,
        }
    }

    pub fn is_action(&self) -> bool {
        self.topic().is_action()
    }

    /// Sort key for episode ordering (stable sort supplies the final tie-break).
    pub fn order_key(&self) -> (Timestamp, u8) {
        (self.t(), self.topic().rank())
    }

    /// Checks the per-type invariants.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Event::Mouse(m) => {
                if m.dx.abs() > MAX_MOUSE_DELTA || m.dy.abs() > MAX_MOUSE_DELTA {
                    return Err(format!(
                        "mouse delta ({}, {}) outside ±{MAX_MOUSE_DELTA}",
                        m.dx, m.dy
                    ));
                }
                if m.button_flags & !mouse_flags::VALID_MASK != 0 {
                    return Err(format!("undefined mouse flag bits in {:#06x}", m.button_flags));
                }
                if m.has_wheel() != m.scroll.is_some() {
                    return Err(format!(
                        "scroll {:?} inconsistent with flags {:#06x}",
                        m.scroll, m.button_flags
                    ));
                }
                Ok(())
            }
            Event::Keyboard(_) | Event::Screen(_) => Ok(()),
        }
    }

    /// Debug text form: `t_ns TYPE fields…`.
    pub fn debug_line(&self) -> String {
        match self {
            Event::Screen(s) => format!("{} SCREEN media={} frame={}", s.t, s.media, s.frame_index),
            Event::Keyboard(k) => format!(
                "{} KEYBOARD vk={} {}",
                k.t,
                k.vk,
                match k.action {
                    KeyAction::Press => "press",
                    KeyAction::Release => "release",
                }
            ),
            Event::Mouse(m) => {
                let mut line = format!(
                    "{} MOUSE dx={} dy={} flags={:#05x}",
                    m.t, m.dx, m.dy, m.button_flags
                );
                if let Some(s) = m.scroll {
                    line.push_str(&format!(" scroll={s}"));
                }
                line
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("invalid event at index {index}: {reason}")]
    InvalidEvent { index: usize, reason: String },
}

/// A recorded session: normalized events plus free-form metadata.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Episode {
    pub id: String,
    pub events: Vec<Event>,
    pub meta: BTreeMap<String, String>,
}

impl Episode {
    pub fn new(id: impl Into<String>) -> Self {
        Episode {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn with_events(id: impl Into<String>, events: Vec<Event>) -> Self {
        Episode {
            id: id.into(),
            events,
            meta: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, topic: Topic) -> usize {
        self.events.iter().filter(|e| e.topic() == topic).count()
    }

    pub fn screens(&self) -> impl Iterator<Item = &ScreenEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Screen(s) => Some(s),
            _ => None,
        })
    }

    /// Timestamp of the last event, or zero when empty.
    pub fn end_time(&self) -> Timestamp {
        self.events.last().map(Event::t).unwrap_or_default()
    }

    pub fn is_normalized(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| w[0].order_key() <= w[1].order_key())
    }
}
