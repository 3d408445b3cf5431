use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::format::{self, Footer};
use super::{
    channel_for, default_channels, ChannelStats, ChunkIndexEntry, ContainerError, MediaRef,
    MediaSource, MEDIA_CHANNEL,
};
use crate::codec::{ByteCounter, MediaStore};
use crate::events::{Episode, Event, Timestamp};

pub const DEFAULT_FLUSH_EVERY: usize = 512;

#[derive(Clone, Debug)]
pub struct WriteOptions {
    /// Messages per channel buffered before a chunk is flushed.
    pub flush_every: usize,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            flush_every: DEFAULT_FLUSH_EVERY,
        }
    }
}

/// Where screen frames live once the session is written.
#[derive(Clone, Debug)]
pub enum MediaPolicy {
    /// Keep external references; every referenced store must exist under
    /// `media_root`.
    External { media_root: PathBuf },
    /// Decode every referenced frame and store it in the file itself.
    Embed { media_root: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WriteSummary {
    pub chunks: usize,
    pub messages: u64,
    pub bytes: u64,
}

#[derive(Default)]
struct ChunkBuf {
    payload: Vec<u8>,
    count: u32,
    t_min: u64,
    t_max: u64,
}

/// Streaming writer. Chunks reach the underlying writer as soon as they
/// fill, so a crash loses at most the unflushed tail of each channel.
pub struct ContainerWriter<W: Write> {
    out: W,
    offset: u64,
    flush_every: usize,
    buffers: BTreeMap<u16, ChunkBuf>,
    last_t: HashMap<u16, u64>,
    index: Vec<ChunkIndexEntry>,
    stats: BTreeMap<u16, ChannelStats>,
    messages: u64,
}

impl<W: Write> ContainerWriter<W> {
    pub fn new(mut out: W, opts: &WriteOptions) -> Result<Self, ContainerError> {
        let header = format::header_bytes();
        out.write_all(&header)?;
        out.flush()?;
        Ok(ContainerWriter {
            out,
            offset: header.len() as u64,
            flush_every: opts.flush_every.max(1),
            buffers: BTreeMap::new(),
            last_t: HashMap::new(),
            index: Vec::new(),
            stats: BTreeMap::new(),
            messages: 0,
        })
    }

    fn push(&mut self, channel_id: u16, t: Timestamp, body: &[u8], topic: &str) -> Result<(), ContainerError> {
        if let Some(&prev) = self.last_t.get(&channel_id) {
            if t.0 < prev {
                return Err(ContainerError::OutOfOrder {
                    topic: topic.to_string(),
                    t,
                });
            }
        }
        self.last_t.insert(channel_id, t.0);
        let buf = self.buffers.entry(channel_id).or_default();
        if buf.count == 0 {
            buf.t_min = t.0;
        }
        buf.t_max = t.0;
        buf.count += 1;
        let before = buf.payload.len();
        format::put_message(&mut buf.payload, channel_id, t.0, body);
        let written = (buf.payload.len() - before) as u64;
        self.stats.entry(channel_id).or_default().add(t, written);
        self.messages += 1;
        if buf.count as usize >= self.flush_every {
            self.flush_channel(channel_id)?;
        }
        Ok(())
    }

    pub fn write_event(&mut self, event: &Event) -> Result<(), ContainerError> {
        let body = format::encode_body(event);
        let topic = event.topic();
        self.push(channel_for(topic), event.t(), &body, topic.name())
    }

    /// Appends an embedded media payload on the reserved channel.
    pub fn write_blob(&mut self, handle: u32, t: Timestamp, payload: &[u8]) -> Result<(), ContainerError> {
        let body = format::encode_blob(handle, payload);
        self.push(MEDIA_CHANNEL, t, &body, "media")
    }

    fn flush_channel(&mut self, channel_id: u16) -> Result<(), ContainerError> {
        let Some(buf) = self.buffers.remove(&channel_id) else {
            return Ok(());
        };
        if buf.count == 0 {
            return Ok(());
        }
        let record = format::chunk_bytes(&buf.payload);
        self.out.write_all(&record)?;
        self.out.flush()?;
        self.index.push(ChunkIndexEntry {
            channel_id,
            time_min: Timestamp(buf.t_min),
            time_max: Timestamp(buf.t_max),
            file_offset: self.offset,
            payload_len: buf.payload.len() as u32,
            message_count: buf.count,
            crc32: crc32fast::hash(&buf.payload),
        });
        self.offset += record.len() as u64;
        Ok(())
    }

    /// Flushes remaining buffers and seals the file with its footer.
    pub fn finish(
        mut self,
        episode_id: &str,
        meta: &BTreeMap<String, String>,
    ) -> Result<(W, WriteSummary), ContainerError> {
        let pending: Vec<u16> = self.buffers.keys().copied().collect();
        for id in pending {
            self.flush_channel(id)?;
        }
        let footer = Footer {
            channels: default_channels(),
            index: self.index,
            stats: self.stats,
            episode_id: episode_id.to_string(),
            meta: meta.clone(),
        };
        let bytes = footer.to_bytes(self.offset);
        self.out.write_all(&bytes)?;
        self.out.flush()?;
        let summary = WriteSummary {
            chunks: footer.index.len(),
            messages: self.messages,
            bytes: self.offset + bytes.len() as u64,
        };
        Ok((self.out, summary))
    }
}

/// Writes an episode as-is, without touching its media references.
pub fn write_episode<W: Write>(out: W, ep: &Episode, opts: &WriteOptions) -> Result<(W, WriteSummary), ContainerError> {
    let mut w = ContainerWriter::new(out, opts)?;
    for e in &ep.events {
        w.write_event(e)?;
    }
    w.finish(&ep.id, &ep.meta)
}

/// In-memory [`write_episode`].
pub fn encode_episode(ep: &Episode, opts: &WriteOptions) -> Result<Vec<u8>, ContainerError> {
    Ok(write_episode(Vec::new(), ep, opts)?.0)
}

fn check_external(media_root: &Path, ep: &Episode) -> Result<(), ContainerError> {
    let mut checked = std::collections::HashSet::new();
    for s in ep.screens() {
        match &s.media.source {
            MediaSource::External(uri) => {
                if checked.insert(uri.as_str()) && !media_root.join(uri).is_file() {
                    return Err(ContainerError::MediaMissing(uri.clone()));
                }
            }
            MediaSource::Embedded(h) => {
                return Err(ContainerError::MediaMissing(format!(
                    "embedded handle {h} has no payload to write"
                )))
            }
        }
    }
    Ok(())
}

/// Writes a normalized episode to `path` under the given media policy.
pub fn write_session(
    path: impl AsRef<Path>,
    ep: &Episode,
    policy: &MediaPolicy,
    opts: &WriteOptions,
) -> Result<WriteSummary, ContainerError> {
    if let MediaPolicy::External { media_root } = policy {
        check_external(media_root, ep)?;
    }
    let file = BufWriter::new(File::create(path.as_ref())?);
    let mut w = ContainerWriter::new(file, opts)?;
    match policy {
        MediaPolicy::External { .. } => {
            for e in &ep.events {
                w.write_event(e)?;
            }
        }
        MediaPolicy::Embed { media_root } => {
            check_external(media_root, ep)?;
            let mut stores: HashMap<String, MediaStore<_>> = HashMap::new();
            let mut handles: HashMap<(String, u64), u32> = HashMap::new();
            let mut counter = ByteCounter::default();
            for e in &ep.events {
                let Event::Screen(s) = e else {
                    w.write_event(e)?;
                    continue;
                };
                let MediaSource::External(uri) = &s.media.source else {
                    unreachable!("checked above");
                };
                let key = (uri.clone(), s.frame_index);
                let handle = match handles.get(&key) {
                    Some(&h) => h,
                    None => {
                        if !stores.contains_key(uri) {
                            stores.insert(uri.clone(), MediaStore::open_path(media_root.join(uri))?);
                        }
                        let store = stores.get_mut(uri).unwrap();
                        let frame = store.decode_frame(s.frame_index, &mut counter)?;
                        let h = handles.len() as u32;
                        w.write_blob(h, s.t, &frame.pixels)?;
                        handles.insert(key, h);
                        h
                    }
                };
                let mut embedded = s.clone();
                embedded.media = MediaRef::embedded(handle);
                embedded.frame_index = 0;
                w.write_event(&Event::Screen(embedded))?;
            }
        }
    }
    let (mut file, summary) = w.finish(&ep.id, &ep.meta)?;
    file.flush()?;
    file.get_ref().sync_all()?;
    Ok(summary)
}
