//! Event ⇄ token conversion.
//!
//! Each event becomes `<EVENT_START>{TYPE}{TIMESTAMP}{DETAIL}<EVENT_END>`.
//! Timestamps are cyclic (three digits of 10 ms, a 10 s window) and are
//! unwrapped on decode against the previous absolute time.

mod file;
mod vocab;

use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::container::MediaRef;
use crate::events::{
    mouse_flags, Episode, Event, KeyAction, KeyboardEvent, MouseEvent, ScreenEvent, Timestamp,
    MAX_MOUSE_DELTA,
};

pub use file::{read_token_file, write_token_file, TOKEN_FILE_MAGIC};
pub use vocab::{
    ids_to_tokens, parse_tokens, tokens_to_ids, tokens_to_text, vocabulary_manifest, Token,
    VOCAB_SIZE,
};

/// Largest scroll payload, in detents.
pub const MAX_SCROLL: i32 = 9;

/// Token count of a keyboard event.
pub const KEYBOARD_ARITY: usize = 8;
/// Token count of a mouse event without scroll payload.
pub const MOUSE_ARITY: usize = 19;
/// Token count of a mouse event with scroll payload.
pub const MOUSE_SCROLL_ARITY: usize = 21;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenizerError {
    #[error("{what} {value} out of range")]
    OutOfRange { what: &'static str, value: i64 },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("malformed event at token {at}: {reason}")]
    MalformedEvent { at: usize, reason: String },
    #[error("gap of {gap_ms} ms before event {index} exceeds the timestamp window")]
    GapTooLarge { index: usize, gap_ms: u64 },
    #[error("event {index} is earlier than its predecessor")]
    OutOfOrder { index: usize },
    #[error("invalid tokenizer config: {0}")]
    InvalidConfig(String),
    #[error("screen sidecar has {got} entries, stream has {expected} screen events")]
    SidecarMismatch { got: usize, expected: usize },
    #[error("malformed token file at line {line}: {reason}")]
    TokenFile { line: usize, reason: String },
}

type Result<T> = std::result::Result<T, TokenizerError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub delta_bases: Vec<u32>,
    pub ts_bases: Vec<u32>,
    pub ts_unit_ms: u64,
    pub img_token_count: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            delta_bases: vec![2, 10, 10, 10],
            ts_bases: vec![10, 10, 10],
            ts_unit_ms: 10,
            img_token_count: 256,
        }
    }
}

fn product(bases: &[u32]) -> u64 {
    bases.iter().map(|&b| b as u64).product()
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, bases) in [("delta_bases", &self.delta_bases), ("ts_bases", &self.ts_bases)] {
            if bases.is_empty() || bases.iter().any(|&b| !(2..=10).contains(&b)) {
                return Err(TokenizerError::InvalidConfig(format!(
                    "{name} must be non-empty with every base in 2..=10, got {bases:?}"
                )));
            }
        }
        if product(&self.delta_bases) <= MAX_MOUSE_DELTA as u64 {
            return Err(TokenizerError::InvalidConfig(format!(
                "delta_bases {:?} cannot represent ±{MAX_MOUSE_DELTA}",
                self.delta_bases
            )));
        }
        if self.ts_unit_ms == 0 {
            return Err(TokenizerError::InvalidConfig("ts_unit_ms must be positive".into()));
        }
        Ok(())
    }

    /// Cyclic timestamp period in ticks.
    pub fn ts_period(&self) -> u64 {
        product(&self.ts_bases)
    }

    /// Cyclic timestamp window in milliseconds.
    pub fn window_ms(&self) -> u64 {
        self.ts_period() * self.ts_unit_ms
    }

    /// Token count of one screen event.
    pub fn screen_arity(&self) -> usize {
        3 + self.ts_bases.len() + self.img_token_count
    }

    /// Token count of the longest event this config can produce.
    pub fn max_event_len(&self) -> usize {
        let mouse = 3 + self.ts_bases.len() + 2 * (1 + self.delta_bases.len()) + 3 + 2;
        mouse.max(self.screen_arity())
    }
}

/// Mixed-radix digits of `value`, most significant first.
pub fn encode_magnitude(value: u64, bases: &[u32]) -> Result<Vec<Token>> {
    if value >= product(bases) {
        return Err(TokenizerError::OutOfRange {
            what: "magnitude",
            value: value as i64,
        });
    }
    let mut digits = vec![Token::Digit(0); bases.len()];
    let mut v = value;
    for (slot, &b) in digits.iter_mut().zip(bases).rev() {
        *slot = Token::Digit((v % b as u64) as u8);
        v /= b as u64;
    }
    Ok(digits)
}

/// The cyclic tick count `(t_ms / unit) mod period` as digits.
pub fn encode_timestamp(t: Timestamp, cfg: &TokenizerConfig) -> Vec<Token> {
    let ticks = (t.as_ms() / cfg.ts_unit_ms) % cfg.ts_period();
    encode_magnitude(ticks, &cfg.ts_bases).expect("reduced modulo the period")
}

fn push_signed(out: &mut Vec<Token>, value: i32, bases: &[u32], what: &'static str) -> Result<()> {
    let mag = value.unsigned_abs() as u64;
    if mag >= product(bases) {
        return Err(TokenizerError::OutOfRange {
            what,
            value: value as i64,
        });
    }
    out.push(if value < 0 { Token::SignMinus } else { Token::SignPlus });
    out.extend(encode_magnitude(mag, bases)?);
    Ok(())
}

/// Appends the tokens of one event to `out`.
pub fn encode_event_into(e: &Event, cfg: &TokenizerConfig, out: &mut Vec<Token>) -> Result<()> {
    let start = out.len();
    let res = encode_inner(e, cfg, out);
    if res.is_err() {
        out.truncate(start);
    }
    res
}

fn encode_inner(e: &Event, cfg: &TokenizerConfig, out: &mut Vec<Token>) -> Result<()> {
    out.push(Token::EventStart);
    match e {
        Event::Keyboard(k) => {
            out.push(Token::Keyboard);
            out.extend(encode_timestamp(k.t, cfg));
            out.push(Token::VirtualKey(k.vk));
            out.push(match k.action {
                KeyAction::Press => Token::Press,
                KeyAction::Release => Token::Release,
            });
        }
        Event::Mouse(m) => {
            if m.button_flags & !mouse_flags::VALID_MASK != 0 {
                return Err(TokenizerError::InvalidEvent(format!(
                    "undefined mouse flag bits in {:#06x}",
                    m.button_flags
                )));
            }
            if m.button_flags & mouse_flags::ANY_WHEEL == mouse_flags::ANY_WHEEL {
                return Err(TokenizerError::InvalidEvent(
                    "vertical and horizontal wheel flags in one event".into(),
                ));
            }
            if m.has_wheel() != m.scroll.is_some() {
                return Err(TokenizerError::InvalidEvent(format!(
                    "scroll {:?} inconsistent with flags {:#06x}",
                    m.scroll, m.button_flags
                )));
            }
            out.push(Token::Mouse);
            out.extend(encode_timestamp(m.t, cfg));
            push_signed(out, m.dx, &cfg.delta_bases, "dx")?;
            push_signed(out, m.dy, &cfg.delta_bases, "dy")?;
            for shift in [8, 4, 0] {
                out.push(Token::MouseButton(((m.button_flags >> shift) & 0xF) as u8));
            }
            if let Some(s) = m.scroll {
                push_signed(out, s, &[10], "scroll")?;
            }
        }
        Event::Screen(s) => {
            out.push(Token::Screen);
            out.extend(encode_timestamp(s.t, cfg));
            out.extend(std::iter::repeat(Token::ImgContext).take(cfg.img_token_count));
        }
    }
    out.push(Token::EventEnd);
    Ok(())
}

pub fn encode_event(e: &Event, cfg: &TokenizerConfig) -> Result<Vec<Token>> {
    let mut out = Vec::with_capacity(KEYBOARD_ARITY);
    encode_event_into(e, cfg, &mut out)?;
    Ok(out)
}

/// Decoder position in absolute time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UnwrapState {
    pub last_abs_ms: u64,
    pub wrap_count: u64,
}

impl UnwrapState {
    /// Absolute time of a cyclic tick count, assuming it is the first
    /// occurrence at or after the last reconstructed time.
    pub fn unwrap(&mut self, cyclic: u64, cfg: &TokenizerConfig) -> u64 {
        let period = cfg.ts_period();
        let last_ticks = self.last_abs_ms / cfg.ts_unit_ms;
        let phase = last_ticks % period;
        let delta = (cyclic + period - phase) % period;
        if phase + delta >= period {
            self.wrap_count += 1;
        }
        self.last_abs_ms += delta * cfg.ts_unit_ms;
        self.last_abs_ms
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    base: usize,
}

impl Parser<'_> {
    fn err(&self, reason: impl Into<String>) -> TokenizerError {
        TokenizerError::MalformedEvent {
            at: self.base + self.pos,
            reason: reason.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<Token> {
        let t = self
            .tokens
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err(format!("expected {what}, found end of event")))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        let got = self.next(&want.to_string())?;
        if got != want {
            self.pos -= 1;
            return Err(self.err(format!("expected {want}, found {got}")));
        }
        Ok(())
    }

    fn magnitude(&mut self, bases: &[u32]) -> Result<u64> {
        let mut v = 0u64;
        for &b in bases {
            match self.next("digit")? {
                Token::Digit(d) if (d as u32) < b => v = v * b as u64 + d as u64,
                Token::Digit(d) => {
                    self.pos -= 1;
                    return Err(self.err(format!("digit {d} not below base {b}")));
                }
                other => {
                    self.pos -= 1;
                    return Err(self.err(format!("expected digit, found {other}")));
                }
            }
        }
        Ok(v)
    }

    fn signed(&mut self, bases: &[u32]) -> Result<i32> {
        let neg = match self.next("sign")? {
            Token::SignPlus => false,
            Token::SignMinus => true,
            other => {
                self.pos -= 1;
                return Err(self.err(format!("expected sign, found {other}")));
            }
        };
        let mag = self.magnitude(bases)? as i32;
        Ok(if neg { -mag } else { mag })
    }
}

/// Decodes exactly one event. Screen events carry an empty external media
/// reference; [`decode_stream`] fills them from the sidecar.
pub fn decode_event(tokens: &[Token], state: &mut UnwrapState, cfg: &TokenizerConfig) -> Result<Event> {
    decode_at(tokens, 0, state, cfg)
}

fn decode_at(tokens: &[Token], base: usize, state: &mut UnwrapState, cfg: &TokenizerConfig) -> Result<Event> {
    let mut p = Parser { tokens, pos: 0, base };
    p.expect(Token::EventStart)?;
    let kind = p.next("event type")?;
    let cyclic = p.magnitude(&cfg.ts_bases)?;
    let mut next_state = *state;
    let t = Timestamp::from_ms(next_state.unwrap(cyclic, cfg));
    let event = match kind {
        Token::Keyboard => {
            let vk = match p.next("virtual key")? {
                Token::VirtualKey(vk) => vk,
                other => {
                    p.pos -= 1;
                    return Err(p.err(format!("expected virtual key, found {other}")));
                }
            };
            let action = match p.next("key action")? {
                Token::Press => KeyAction::Press,
                Token::Release => KeyAction::Release,
                other => {
                    p.pos -= 1;
                    return Err(p.err(format!("expected press or release, found {other}")));
                }
            };
            Event::Keyboard(KeyboardEvent { t, vk, action })
        }
        Token::Mouse => {
            let dx = p.signed(&cfg.delta_bases)?;
            let dy = p.signed(&cfg.delta_bases)?;
            let mut flags = 0u16;
            for _ in 0..3 {
                match p.next("button flag digit")? {
                    Token::MouseButton(h) => flags = flags << 4 | h as u16,
                    other => {
                        p.pos -= 1;
                        return Err(p.err(format!("expected button flag digit, found {other}")));
                    }
                }
            }
            if flags & mouse_flags::ANY_WHEEL == mouse_flags::ANY_WHEEL {
                return Err(p.err("vertical and horizontal wheel flags in one event"));
            }
            let wheel = flags & mouse_flags::ANY_WHEEL != 0;
            let has_payload = matches!(
                p.tokens.get(p.pos),
                Some(Token::SignPlus | Token::SignMinus)
            );
            let scroll = match (wheel, has_payload) {
                (true, true) => Some(p.signed(&[10])?),
                (false, false) => None,
                (true, false) => return Err(p.err("wheel flag without scroll payload")),
                (false, true) => return Err(p.err("scroll present without wheel flag")),
            };
            Event::Mouse(MouseEvent {
                t,
                dx,
                dy,
                button_flags: flags,
                scroll,
            })
        }
        Token::Screen => {
            for _ in 0..cfg.img_token_count {
                p.expect(Token::ImgContext)?;
            }
            Event::Screen(ScreenEvent {
                t,
                media: MediaRef::external(""),
                frame_index: 0,
            })
        }
        other => {
            p.pos = 1;
            return Err(p.err(format!("expected event type, found {other}")));
        }
    };
    p.expect(Token::EventEnd)?;
    if p.pos != tokens.len() {
        return Err(p.err("trailing tokens after <EVENT_END>"));
    }
    *state = next_state;
    Ok(event)
}

/// Media location of one screen event, kept beside the token stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScreenRef {
    pub media: MediaRef,
    pub frame_index: u64,
}

impl fmt::Display for ScreenRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.media, self.frame_index)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncodedStream {
    pub tokens: Vec<Token>,
    /// Token span of each event, in episode order.
    pub spans: Vec<Range<usize>>,
    /// One entry per screen event, in episode order.
    pub screens: Vec<ScreenRef>,
}

/// Encodes a normalized episode. Consecutive events, and the first event
/// relative to t = 0, must lie less than one timestamp window apart.
pub fn encode_stream(ep: &Episode, cfg: &TokenizerConfig) -> Result<EncodedStream> {
    cfg.validate()?;
    let mut out = EncodedStream::default();
    let mut prev_ticks = 0u64;
    let mut prev_ms = 0u64;
    for (index, e) in ep.events.iter().enumerate() {
        let ms = e.t().as_ms();
        let ticks = ms / cfg.ts_unit_ms;
        if ms < prev_ms {
            return Err(TokenizerError::OutOfOrder { index });
        }
        if ticks - prev_ticks >= cfg.ts_period() {
            return Err(TokenizerError::GapTooLarge {
                index,
                gap_ms: ms - prev_ms,
            });
        }
        prev_ticks = ticks;
        prev_ms = ms;
        let start = out.tokens.len();
        encode_event_into(e, cfg, &mut out.tokens)?;
        out.spans.push(start..out.tokens.len());
        if let Event::Screen(s) = e {
            out.screens.push(ScreenRef {
                media: s.media.clone(),
                frame_index: s.frame_index,
            });
        }
    }
    Ok(out)
}

/// Decodes a token stream back into events. `<PAD>` tokens between events
/// are skipped. Screen media come from `screens` when given.
pub fn decode_stream(
    tokens: &[Token],
    cfg: &TokenizerConfig,
    screens: Option<&[ScreenRef]>,
) -> Result<Vec<Event>> {
    cfg.validate()?;
    let mut state = UnwrapState::default();
    let mut events = Vec::new();
    let mut pos = 0;
    let mut screen_idx = 0;
    while pos < tokens.len() {
        match tokens[pos] {
            Token::Pad => {
                pos += 1;
                continue;
            }
            Token::EventStart => {}
            other => {
                return Err(TokenizerError::MalformedEvent {
                    at: pos,
                    reason: format!("expected <EVENT_START>, found {other}"),
                })
            }
        }
        let end = tokens[pos..]
            .iter()
            .position(|&t| t == Token::EventEnd)
            .map(|i| pos + i + 1)
            .ok_or_else(|| TokenizerError::MalformedEvent {
                at: pos,
                reason: "missing <EVENT_END>".into(),
            })?;
        let mut e = decode_at(&tokens[pos..end], pos, &mut state, cfg)?;
        if let (Event::Screen(s), Some(refs)) = (&mut e, screens) {
            let r = refs.get(screen_idx).ok_or(TokenizerError::SidecarMismatch {
                got: refs.len(),
                expected: screen_idx + 1,
            })?;
            s.media = r.media.clone();
            s.frame_index = r.frame_index;
        }
        if matches!(e, Event::Screen(_)) {
            screen_idx += 1;
        }
        events.push(e);
        pos = end;
    }
    if let Some(refs) = screens {
        if refs.len() != screen_idx {
            return Err(TokenizerError::SidecarMismatch {
                got: refs.len(),
                expected: screen_idx,
            });
        }
    }
    Ok(events)
}
