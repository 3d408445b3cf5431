//! Deterministic synthetic desktop sessions.
//!
//! A small rectangle moves over a static banded background. Its position
//! is the start position plus every mouse delta up to the frame's
//! timestamp, and it brightens while a key is held, so frames and actions
//! are coupled exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::Frame;
use crate::container::MediaRef;
use crate::events::{
    mouse_flags, Episode, Event, KeyAction, KeyboardEvent, MouseEvent, ScreenEvent, Timestamp,
    NANOS_PER_MS, NANOS_PER_SEC,
};

pub const RECT_W: i32 = 16;
pub const RECT_H: i32 = 12;
/// Rectangle luminance with no key held.
pub const RECT_IDLE: u8 = 180;
/// Rectangle luminance while any key is held.
pub const RECT_ACTIVE: u8 = 240;

const KEYS: [u8; 8] = [0x20, 0x41, 0x44, 0x53, 0x57, 0x45, 0x51, 0x10];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Actor {
    RandomWalk,
    RectChase,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actor::RandomWalk => "random-walk",
            Actor::RectChase => "rect-chase",
        })
    }
}

impl FromStr for Actor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-walk" => Ok(Actor::RandomWalk),
            "rect-chase" => Ok(Actor::RectChase),
            _ => Err(format!("unknown actor `{s}` (expected random-walk or rect-chase)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub fps: f64,
    pub width: u16,
    pub height: u16,
    pub actor: Actor,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            duration_s: 10.0,
            fps: 20.0,
            width: 160,
            height: 90,
            actor: Actor::RectChase,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(format!("duration {} must be a non-negative number", self.duration_s));
        }
        if !(self.fps.is_finite() && self.fps > 0.0 && self.fps <= 1000.0) {
            return Err(format!("fps {} must be in (0, 1000]", self.fps));
        }
        if (self.width as i32) < RECT_W || (self.height as i32) < RECT_H {
            return Err(format!(
                "frame {}x{} is smaller than the {RECT_W}x{RECT_H} rectangle",
                self.width, self.height
            ));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> u64 {
        (self.duration_s * self.fps).round() as u64
    }

    /// Timestamp of frame `i`.
    pub fn frame_time(&self, i: u64) -> Timestamp {
        Timestamp((i as f64 * NANOS_PER_SEC as f64 / self.fps).round() as u64)
    }
}

#[derive(Clone, Debug)]
pub struct Synthesized {
    pub episode: Episode,
    pub frames: Vec<Frame>,
    /// Top-left rectangle corner drawn in each frame.
    pub rect: Vec<(i32, i32)>,
}

fn background(w: u16, h: u16) -> Vec<u8> {
    let mut px = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h as usize {
        for x in 0..w as usize {
            let v = if y + 8 >= h as usize {
                40
            } else {
                60 + 10 * ((x / 20 + y / 30) % 5) as u8
            };
            px.push(v);
        }
    }
    px
}

fn render(bg: &[u8], w: u16, h: u16, pos: (i32, i32), lit: bool) -> Frame {
    let mut px = bg.to_vec();
    let v = if lit { RECT_ACTIVE } else { RECT_IDLE };
    for y in pos.1..pos.1 + RECT_H {
        let row = y as usize * w as usize;
        px[row + pos.0 as usize..row + (pos.0 + RECT_W) as usize].fill(v);
    }
    Frame::new(w, h, px)
}

/// Top-left corner of the rectangle in a rendered frame, if visible.
pub fn locate_rect(frame: &Frame) -> Option<(i32, i32)> {
    let w = frame.width as usize;
    let i = frame.pixels.iter().position(|&p| p >= RECT_IDLE)?;
    Some(((i % w) as i32, (i / w) as i32))
}

struct Pending {
    frame: u64,
    event: Event,
}

struct ActorState {
    pos: (i32, i32),
    target: (i32, i32),
    idle_until: u64,
    held_key: Option<u8>,
    held_button: Option<u16>,
    pending: Vec<Pending>,
}

/// Generates a session whose screen events reference `media_uri`.
pub fn generate(cfg: &SynthConfig, media_uri: &str) -> Synthesized {
    cfg.validate().expect("invalid synth config");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (cfg.width, cfg.height);
    let max_x = w as i32 - RECT_W;
    let max_y = h as i32 - RECT_H;
    let bg = background(w, h);
    let n = cfg.frame_count();

    let mut st = ActorState {
        pos: (max_x / 2, max_y / 2),
        target: (rng.gen_range(0..=max_x), rng.gen_range(0..=max_y)),
        idle_until: 0,
        held_key: None,
        held_button: None,
        pending: Vec::new(),
    };
    let mut events = Vec::new();
    let mut frames = Vec::with_capacity(n as usize);
    let mut rect = Vec::with_capacity(n as usize);

    for i in 0..n {
        let t = cfg.frame_time(i);
        let lit = st.held_key.is_some();
        frames.push(render(&bg, w, h, st.pos, lit));
        rect.push(st.pos);
        events.push(Event::Screen(ScreenEvent {
            t,
            media: MediaRef::external(media_uri),
            frame_index: i,
        }));
        if i + 1 == n {
            break;
        }
        // Actions between this frame and the next.
        let span_ms = (cfg.frame_time(i + 1).0 - t.0) / NANOS_PER_MS;
        if span_ms < 2 {
            continue;
        }
        let at = |rng: &mut ChaCha8Rng| Timestamp(t.0 + rng.gen_range(1..span_ms) * NANOS_PER_MS);
        let mut interval: Vec<Event> = Vec::new();

        let due: Vec<Pending> = {
            let (now, later) = st.pending.drain(..).partition(|p| p.frame <= i);
            st.pending = later;
            now
        };
        for mut p in due {
            let stamp = at(&mut rng);
            p.event.set_t(stamp);
            match &p.event {
                Event::Keyboard(_) => st.held_key = None,
                Event::Mouse(_) => st.held_button = None,
                Event::Screen(_) => {}
            }
            interval.push(p.event);
        }

        let idle = i < st.idle_until;
        if !idle && st.held_key.is_none() && st.held_button.is_none() && rng.gen_bool(0.004) {
            st.idle_until = i + rng.gen_range(20..160);
        } else if !idle {
            let moves = if rng.gen_bool(0.8) { rng.gen_range(1..=2) } else { 0 };
            for _ in 0..moves {
                let (dx, dy) = match cfg.actor {
                    Actor::RandomWalk => (rng.gen_range(-4..=4), rng.gen_range(-4..=4)),
                    Actor::RectChase => {
                        if st.pos == st.target || rng.gen_bool(0.01) {
                            st.target = (rng.gen_range(0..=max_x), rng.gen_range(0..=max_y));
                        }
                        let step = |d: i32| d.clamp(-3, 3);
                        (step(st.target.0 - st.pos.0), step(st.target.1 - st.pos.1))
                    }
                };
                let dx = (st.pos.0 + dx).clamp(0, max_x) - st.pos.0;
                let dy = (st.pos.1 + dy).clamp(0, max_y) - st.pos.1;
                if dx == 0 && dy == 0 {
                    continue;
                }
                st.pos = (st.pos.0 + dx, st.pos.1 + dy);
                interval.push(Event::Mouse(MouseEvent::movement(at(&mut rng), dx, dy)));
            }
            if st.held_key.is_none() && rng.gen_bool(0.03) {
                let vk = KEYS[rng.gen_range(0..KEYS.len())];
                st.held_key = Some(vk);
                interval.push(Event::Keyboard(KeyboardEvent {
                    t: at(&mut rng),
                    vk,
                    action: KeyAction::Press,
                }));
                st.pending.push(Pending {
                    frame: i + rng.gen_range(2..12),
                    event: Event::Keyboard(KeyboardEvent {
                        t: Timestamp::ZERO,
                        vk,
                        action: KeyAction::Release,
                    }),
                });
            }
            if st.held_button.is_none() && rng.gen_bool(0.01) {
                let (down, up) = if rng.gen_bool(0.8) {
                    (mouse_flags::LEFT_DOWN, mouse_flags::LEFT_UP)
                } else {
                    (mouse_flags::RIGHT_DOWN, mouse_flags::RIGHT_UP)
                };
                st.held_button = Some(down);
                let click = |flags, t| {
                    Event::Mouse(MouseEvent {
                        button_flags: flags,
                        ..MouseEvent::movement(t, 0, 0)
                    })
                };
                interval.push(click(down, at(&mut rng)));
                st.pending.push(Pending {
                    frame: i + rng.gen_range(1..6),
                    event: click(up, Timestamp::ZERO),
                });
            }
            if rng.gen_bool(0.01) {
                let detents = rng.gen_range(1..=3) * if rng.gen_bool(0.5) { 1 } else { -1 };
                interval.push(Event::Mouse(MouseEvent {
                    button_flags: mouse_flags::WHEEL,
                    scroll: Some(detents),
                    ..MouseEvent::movement(at(&mut rng), 0, 0)
                }));
            }
        }
        // Mouse deltas must land in the frame they were applied to, so the
        // stream is ordered by time before rendering the next frame.
        interval.sort_by_key(Event::order_key);
        events.extend(interval);
    }

    let mut meta = BTreeMap::new();
    meta.insert("generator".to_string(), "deskcap-synth".to_string());
    meta.insert("seed".to_string(), cfg.seed.to_string());
    meta.insert("actor".to_string(), cfg.actor.to_string());
    meta.insert("fps".to_string(), cfg.fps.to_string());
    meta.insert("width".to_string(), cfg.width.to_string());
    meta.insert("height".to_string(), cfg.height.to_string());
    let episode = Episode {
        id: format!("synth-{}", cfg.seed),
        events,
        meta,
    };
    debug_assert!(episode.is_normalized());
    Synthesized {
        episode,
        frames,
        rect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_arithmetic() {
        let s = generate(&SynthConfig::default(), "s.gops");
        assert_eq!(s.episode.count(crate::events::Topic::Screen), 200);
        assert_eq!(s.frames.len(), 200);
        assert!(s.episode.is_normalized());
        for e in &s.episode.events {
            e.validate().unwrap();
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg, "s.gops");
        let b = generate(&cfg, "s.gops");
        assert_eq!(a.episode, b.episode);
        assert_eq!(a.frames, b.frames);
        let c = generate(&SynthConfig { seed: 43, ..cfg }, "s.gops");
        assert_ne!(a.episode, c.episode);
    }

    #[test]
    fn rect_is_integral_of_mouse_deltas() {
        for actor in [Actor::RectChase, Actor::RandomWalk] {
            let cfg = SynthConfig {
                duration_s: 30.0,
                actor,
                ..SynthConfig::default()
            };
            let s = generate(&cfg, "s.gops");
            let start = s.rect[0];
            let (mut x, mut y) = start;
            let mut moves = s.episode.events.iter().peekable();
            for (i, frame) in s.frames.iter().enumerate() {
                let t = cfg.frame_time(i as u64);
                while let Some(e) = moves.next_if(|e| e.t() <= t) {
                    if let Event::Mouse(m) = e {
                        x += m.dx;
                        y += m.dy;
                    }
                }
                assert_eq!(locate_rect(frame), Some((x, y)), "{actor} frame {i}");
                assert_eq!(s.rect[i], (x, y));
            }
        }
    }

    #[test]
    fn brightness_tracks_held_keys() {
        let cfg = SynthConfig {
            duration_s: 60.0,
            ..SynthConfig::default()
        };
        let s = generate(&cfg, "s.gops");
        let mut held = 0i32;
        let mut events = s.episode.events.iter().peekable();
        let mut lit_frames = 0;
        for (i, frame) in s.frames.iter().enumerate() {
            let t = cfg.frame_time(i as u64);
            while let Some(e) = events.next_if(|e| e.t() <= t) {
                if let Event::Keyboard(k) = e {
                    held += if k.action == KeyAction::Press { 1 } else { -1 };
                }
            }
            let (x, y) = locate_rect(frame).unwrap();
            let v = frame.pixels[y as usize * cfg.width as usize + x as usize];
            assert_eq!(v == RECT_ACTIVE, held > 0, "frame {i}");
            lit_frames += (held > 0) as usize;
        }
        assert!(lit_frames > 0);
    }
}
