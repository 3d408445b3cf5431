//! Chunked, indexed, crash-safe event log.
//!
//! Each event topic gets its own channel. Messages are buffered per channel
//! and flushed as CRC-protected chunks; the footer written on close indexes
//! every chunk by channel and time range so readers can skip straight to the
//! chunks they need. A file whose footer never made it to disk is repaired by
//! [`recover`], which keeps every complete, checksum-valid chunk.

pub mod format;
mod reader;
mod recover;
mod summary;
mod writer;

use std::fmt;
use std::io;

use thiserror::Error;

use crate::codec::CodecError;
use crate::events::{Timestamp, Topic};

pub use reader::{resolve_media, ContainerReader, CorruptChunk, MessageFilter, Messages, ReadStats};
pub use recover::{recover, recover_bytes, RecoveryReport};
pub use summary::{summarize, ChannelSummary, CompressionRatio, Summary};
pub use writer::{
    encode_episode, write_episode, write_session, ContainerWriter, MediaPolicy, WriteOptions,
    WriteSummary, DEFAULT_FLUSH_EVERY,
};

/// Reserved channel carrying embedded media payloads.
pub const MEDIA_CHANNEL: u16 = 0xFFFF;
pub const SCHEMA_VERSION: u16 = 1;

pub fn channel_for(topic: Topic) -> u16 {
    match topic {
        Topic::Screen => 0,
        Topic::Keyboard => 1,
        Topic::Mouse => 2,
    }
}

pub fn schema_name(topic: Option<Topic>) -> &'static str {
    match topic {
        Some(Topic::Screen) => "desktop/ScreenEvent",
        Some(Topic::Keyboard) => "desktop/KeyboardEvent",
        Some(Topic::Mouse) => "desktop/MouseEvent",
        None => "desktop/MediaBlob",
    }
}

/// The fixed channel table every file carries.
pub fn default_channels() -> Vec<ChannelDescriptor> {
    Topic::ALL
        .iter()
        .map(|&t| Some(t))
        .chain([None])
        .map(|topic| ChannelDescriptor {
            channel_id: topic.map_or(MEDIA_CHANNEL, channel_for),
            topic,
            schema_name: schema_name(topic).to_string(),
            schema_version: SCHEMA_VERSION,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MediaSource {
    /// Path of a media store, relative to the media root.
    External(String),
    /// Handle of a payload on the reserved media channel of the same file.
    Embedded(u32),
}

impl fmt::Display for MediaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MediaSource::External(uri) => write!(f, "{uri}"),
            MediaSource::Embedded(h) => write!(f, "embedded:{h}"),
        }
    }
}

/// Link from an event to media stored outside the event payload.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MediaRef {
    pub source: MediaSource,
    pub frame_index: Option<u64>,
}

impl MediaRef {
    pub fn external(uri: impl Into<String>) -> Self {
        MediaRef {
            source: MediaSource::External(uri.into()),
            frame_index: None,
        }
    }

    pub fn embedded(handle: u32) -> Self {
        MediaRef {
            source: MediaSource::Embedded(handle),
            frame_index: None,
        }
    }

    pub fn at(mut self, frame_index: u64) -> Self {
        self.frame_index = Some(frame_index);
        self
    }
}

impl fmt::Display for MediaRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame_index {
            Some(i) => write!(f, "{}@{i}", self.source),
            None => write!(f, "{}", self.source),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelDescriptor {
    pub channel_id: u16,
    /// `None` for the reserved media channel.
    pub topic: Option<Topic>,
    pub schema_name: String,
    pub schema_version: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkIndexEntry {
    pub channel_id: u16,
    pub time_min: Timestamp,
    pub time_max: Timestamp,
    /// Offset of the chunk's record-type byte.
    pub file_offset: u64,
    pub payload_len: u32,
    pub message_count: u32,
    pub crc32: u32,
}

impl ChunkIndexEntry {
    /// Bytes of the whole chunk record on disk.
    pub fn record_len(&self) -> u64 {
        format::CHUNK_PREFIX_LEN + self.payload_len as u64 + format::CHUNK_CRC_LEN
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub count: u64,
    pub t_min: Timestamp,
    pub t_max: Timestamp,
    /// Message bytes including per-message headers.
    pub bytes: u64,
}

impl ChannelStats {
    pub fn add(&mut self, t: Timestamp, bytes: u64) {
        if self.count == 0 {
            self.t_min = t;
            self.t_max = t;
        } else {
            self.t_min = self.t_min.min(t);
            self.t_max = self.t_max.max(t);
        }
        self.count += 1;
        self.bytes += bytes;
    }
}

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a container (bad magic or header)")]
    NotAContainer,
    #[error("no valid footer; run recovery first")]
    NoFooter,
    #[error("chunk at offset {offset} failed its checksum")]
    CorruptChunk { offset: u64 },
    #[error("media missing: {0}")]
    MediaMissing(String),
    #[error("frame {index} out of range (frame count {frame_count})")]
    FrameOutOfRange { index: u64, frame_count: u64 },
    #[error("unsupported schema {name} v{version}")]
    UnsupportedSchema { name: String, version: u16 },
    #[error("{topic} message at {t} ns precedes the previous one on its channel")]
    OutOfOrder { topic: String, t: Timestamp },
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Codec(CodecError),
}

impl From<CodecError> for ContainerError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::FrameOutOfRange { index, frame_count } => {
                ContainerError::FrameOutOfRange { index, frame_count }
            }
            CodecError::Io(e) => ContainerError::Io(e),
            other => ContainerError::Codec(other),
        }
    }
}
