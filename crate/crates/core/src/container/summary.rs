use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Seek};
use std::path::Path;

use super::{ContainerError, ContainerReader, MediaSource, MessageFilter};
use crate::codec::MediaStore;
use crate::events::{Event, Timestamp, Topic};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChannelSummary {
    pub count: u64,
    pub t_min: Timestamp,
    pub t_max: Timestamp,
    pub bytes: u64,
}

/// Raw-frame bytes over stored bytes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressionRatio {
    pub frames: u64,
    pub raw_bytes: u64,
    pub container_bytes: u64,
    pub external_media_bytes: u64,
    pub ratio: f64,
    /// No frames to compare against; `ratio` is reported as 1.0.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub channels: BTreeMap<Topic, ChannelSummary>,
    pub compression: CompressionRatio,
}

/// Per-channel statistics and the storage ratio against raw frames.
///
/// Every external store referenced by a screen event is opened under
/// `media_root`; its full frame count times the raw frame size counts toward
/// the raw total, and its file size toward the stored total.
pub fn summarize<R: Read + Seek>(
    reader: &mut ContainerReader<R>,
    media_root: &Path,
) -> Result<Summary, ContainerError> {
    let mut channels = BTreeMap::new();
    for ch in &reader.footer().channels {
        let Some(topic) = ch.topic else { continue };
        let s = reader
            .footer()
            .stats
            .get(&ch.channel_id)
            .copied()
            .unwrap_or_default();
        channels.insert(
            topic,
            ChannelSummary {
                count: s.count,
                t_min: s.t_min,
                t_max: s.t_max,
                bytes: s.bytes,
            },
        );
    }

    let screens = reader.read_messages(&MessageFilter::all().topics([Topic::Screen]))?;
    let uris: BTreeSet<String> = screens
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Screen(s) => match &s.media.source {
                MediaSource::External(uri) => Some(uri.clone()),
                MediaSource::Embedded(_) => None,
            },
            _ => None,
        })
        .collect();

    let mut frames = 0;
    let mut raw_bytes = 0;
    let mut external_media_bytes = 0;
    for uri in uris {
        let path = media_root.join(&uri);
        if !path.is_file() {
            return Err(ContainerError::MediaMissing(uri));
        }
        let store = MediaStore::open_path(path)?;
        frames += store.frame_count();
        raw_bytes += store.frame_count() * store.header().frame_bytes();
        external_media_bytes += store.file_len();
    }
    let (blob_count, blob_bytes) = reader.embedded_media();
    frames += blob_count;
    // Blob message bytes include the 14-byte message header and 4-byte handle.
    raw_bytes += blob_bytes.saturating_sub(blob_count * 18);

    let container_bytes = reader.file_len();
    let degenerate = frames == 0;
    let ratio = if degenerate {
        1.0
    } else {
        raw_bytes as f64 / (container_bytes + external_media_bytes) as f64
    };
    Ok(Summary {
        channels,
        compression: CompressionRatio {
            frames,
            raw_bytes,
            container_bytes,
            external_media_bytes,
            ratio,
            degenerate,
        },
    })
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (topic, s) in &self.channels {
            writeln!(
                f,
                "channel={topic} count={} t_min={} t_max={} bytes={}",
                s.count, s.t_min, s.t_max, s.bytes
            )?;
        }
        let c = &self.compression;
        write!(
            f,
            "frames={} raw_bytes={} container_bytes={} media_bytes={} ratio={:.2}{}",
            c.frames,
            c.raw_bytes,
            c.container_bytes,
            c.external_media_bytes,
            c.ratio,
            if c.degenerate { " degenerate=true" } else { "" }
        )
    }
}
