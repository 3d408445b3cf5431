//! Fixed-sequence-length packing.
//!
//! Episodes are rearranged so that actions trail the observations by τ
//! screen steps, tokenized event by event, and packed greedily into samples
//! of exactly `max_seq_len` token ids. Every sample carries the frame list it
//! needs, grouped per media store, so a loader can fetch all of its images in
//! one batched query.

mod manifest;

use std::collections::BTreeMap;
use std::ops::Range;

use thiserror::Error;

use crate::container::MediaSource;
use crate::events::{Episode, Event};
use crate::tokenizer::{encode_event_into, ScreenRef, Token, TokenizerConfig, TokenizerError};

pub use manifest::{
    manifest_text, parse_manifest, read_manifest, read_sample_tokens, write_dataset,
    DatasetManifest, ManifestEntry, ManifestHeader, MANIFEST_FILE, TOKENS_FILE, VOCAB_FILE,
};

pub const DEFAULT_MAX_SEQ_LEN: usize = 4096;
pub const DEFAULT_TAU: usize = 1;

#[derive(Debug, Error)]
pub enum FslError {
    #[error("event {event_index} of episode `{episode}` needs {len} tokens, more than max_seq_len {max}")]
    EventTooLarge {
        episode: String,
        event_index: usize,
        len: usize,
        max: usize,
    },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error("invalid pack config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
}

type Result<T> = std::result::Result<T, FslError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackConfig {
    pub max_seq_len: usize,
    pub tau: usize,
    pub tokenizer: TokenizerConfig,
}

impl Default for PackConfig {
    fn default() -> Self {
        PackConfig {
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            tau: DEFAULT_TAU,
            tokenizer: TokenizerConfig::default(),
        }
    }
}

impl PackConfig {
    pub fn validate(&self) -> Result<()> {
        self.tokenizer.validate()?;
        let need = self.tokenizer.max_event_len();
        if self.max_seq_len < need {
            return Err(FslError::InvalidConfig(format!(
                "max_seq_len {} is shorter than the longest event ({need} tokens)",
                self.max_seq_len
            )));
        }
        Ok(())
    }
}

/// Per-store frame indices, sorted and unique.
pub type AccessPlan = BTreeMap<MediaSource, Vec<u64>>;

/// Where one source event sits inside a sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub span: Range<usize>,
    /// Index of the event in the source episode.
    pub event_index: usize,
    pub screen: Option<ScreenRef>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedSample {
    pub episode_id: String,
    pub tokens: Vec<u32>,
    pub alignment: Vec<Alignment>,
    pub access_plan: AccessPlan,
}

impl PackedSample {
    /// Tokens before the padding suffix.
    pub fn content_len(&self) -> usize {
        self.alignment.last().map_or(0, |a| a.span.end)
    }

    pub fn frame_count(&self) -> usize {
        self.alignment.iter().filter(|a| a.screen.is_some()).count()
    }
}

/// Emission order of the episode's events under NEP-τ.
///
/// Screens keep their order. An action that follows screen `j`
/// chronologically is re-emitted right after screen `min(j + τ, last)`;
/// actions before the first screen move behind screen `τ - 1` (or stay in
/// front when τ = 0). Actions sharing a slot keep their original order.
pub fn nep_tau_order(ep: &Episode, tau: usize) -> Vec<usize> {
    let screens: Vec<usize> = ep
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, Event::Screen(_)))
        .map(|(i, _)| i)
        .collect();
    if screens.is_empty() {
        return (0..ep.events.len()).collect();
    }
    let last = screens.len() - 1;
    // slots[0] precedes the first screen; slots[k + 1] follows screen k.
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); screens.len() + 1];
    let mut seen: Option<usize> = None;
    for (i, e) in ep.events.iter().enumerate() {
        if matches!(e, Event::Screen(_)) {
            seen = Some(seen.map_or(0, |j| j + 1));
            continue;
        }
        let slot = match seen {
            Some(j) => (j + tau).min(last) + 1,
            None if tau == 0 => 0,
            None => (tau - 1).min(last) + 1,
        };
        slots[slot].push(i);
    }
    let mut order = Vec::with_capacity(ep.events.len());
    order.append(&mut slots[0]);
    for (k, &s) in screens.iter().enumerate() {
        order.push(s);
        order.append(&mut slots[k + 1]);
    }
    order
}

/// The episode's events in NEP-τ order.
pub fn apply_nep_tau(ep: &Episode, tau: usize) -> Vec<Event> {
    nep_tau_order(ep, tau)
        .into_iter()
        .map(|i| ep.events[i].clone())
        .collect()
}

/// Frames referenced by the sample's screen events, per store.
pub fn build_access_plan(alignment: &[Alignment]) -> AccessPlan {
    let mut plan = AccessPlan::new();
    for s in alignment.iter().filter_map(|a| a.screen.as_ref()) {
        plan.entry(s.media.source.clone())
            .or_default()
            .push(s.frame_index);
    }
    for frames in plan.values_mut() {
        frames.sort_unstable();
        frames.dedup();
    }
    plan
}

struct Builder {
    tokens: Vec<Token>,
    alignment: Vec<Alignment>,
}

impl Builder {
    fn new(cap: usize) -> Self {
        Builder {
            tokens: Vec::with_capacity(cap),
            alignment: Vec::new(),
        }
    }

    fn seal(self, episode_id: &str, max_seq_len: usize) -> PackedSample {
        let mut ids: Vec<u32> = self.tokens.iter().map(|t| t.id()).collect();
        ids.resize(max_seq_len, Token::Pad.id());
        PackedSample {
            episode_id: episode_id.to_string(),
            tokens: ids,
            access_plan: build_access_plan(&self.alignment),
            alignment: self.alignment,
        }
    }
}

/// Packs one episode into padded samples. Events are rearranged with NEP-τ,
/// never split across samples, and keep their original timestamps.
pub fn pack_episode(ep: &Episode, cfg: &PackConfig) -> Result<Vec<PackedSample>> {
    cfg.tokenizer.validate()?;
    let max = cfg.max_seq_len;
    let mut samples = Vec::new();
    let mut cur = Builder::new(max);
    let mut scratch = Vec::new();
    for i in nep_tau_order(ep, cfg.tau) {
        let e = &ep.events[i];
        scratch.clear();
        encode_event_into(e, &cfg.tokenizer, &mut scratch)?;
        if scratch.len() > max {
            return Err(FslError::EventTooLarge {
                episode: ep.id.clone(),
                event_index: i,
                len: scratch.len(),
                max,
            });
        }
        if cur.tokens.len() + scratch.len() > max {
            let full = std::mem::replace(&mut cur, Builder::new(max));
            samples.push(full.seal(&ep.id, max));
        }
        let start = cur.tokens.len();
        cur.tokens.extend_from_slice(&scratch);
        cur.alignment.push(Alignment {
            span: start..cur.tokens.len(),
            event_index: i,
            screen: match e {
                Event::Screen(s) => Some(ScreenRef {
                    media: s.media.clone(),
                    frame_index: s.frame_index,
                }),
                _ => None,
            },
        });
    }
    if !cur.alignment.is_empty() {
        samples.push(cur.seal(&ep.id, max));
    }
    Ok(samples)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedDataset {
    pub config: PackConfig,
    pub episodes: usize,
    pub samples: Vec<PackedSample>,
}

impl PackedDataset {
    pub fn screen_frames(&self) -> usize {
        self.samples.iter().map(PackedSample::frame_count).sum()
    }

    pub fn events(&self) -> usize {
        self.samples.iter().map(|s| s.alignment.len()).sum()
    }
}

/// Packs every episode in input order.
pub fn pack_dataset(episodes: &[Episode], cfg: &PackConfig) -> Result<PackedDataset> {
    cfg.validate()?;
    let mut samples = Vec::new();
    for ep in episodes {
        samples.extend(pack_episode(ep, cfg)?);
    }
    Ok(PackedDataset {
        config: cfg.clone(),
        episodes: episodes.len(),
        samples,
    })
}

#[cfg(test)]
mod tests;
