use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, Cursor, Read, Seek, SeekFrom};
use std::path::Path;

use super::format::{self, Footer};
use super::{
    schema_name, ChunkIndexEntry, ContainerError, MediaRef, MediaSource, MEDIA_CHANNEL,
    SCHEMA_VERSION,
};
use crate::codec::{ByteCounter, MediaStore};
use crate::events::{Episode, Event, Timestamp, Topic};

/// Pass-through reader that counts every byte handed out.
struct CountingReader<R> {
    inner: R,
    bytes: u64,
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }
}

impl<R: Seek> Seek for CountingReader<R> {
    fn seek(&mut self, pos: SeekFrom) -> io::Result<u64> {
        self.inner.seek(pos)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReadStats {
    /// Header, footer tail and footer record read while opening.
    pub footer_bytes: u64,
    /// Chunk record bytes read since opening.
    pub chunk_bytes: u64,
    pub chunks_read: u64,
}

/// Topic and time selection. Time ranges are half-open `[start, end)`.
#[derive(Clone, Debug, Default)]
pub struct MessageFilter {
    pub topics: Option<BTreeSet<Topic>>,
    pub range: Option<(Timestamp, Timestamp)>,
}

impl MessageFilter {
    pub fn all() -> Self {
        MessageFilter::default()
    }

    pub fn topics(mut self, topics: impl IntoIterator<Item = Topic>) -> Self {
        self.topics = Some(topics.into_iter().collect());
        self
    }

    pub fn range(mut self, start: Timestamp, end: Timestamp) -> Self {
        self.range = Some((start, end));
        self
    }

    fn wants_topic(&self, topic: Topic) -> bool {
        self.topics.as_ref().map_or(true, |t| t.contains(&topic))
    }

    fn wants_time(&self, t: Timestamp) -> bool {
        self.range.map_or(true, |(s, e)| s <= t && t < e)
    }

    fn wants_chunk(&self, entry: &ChunkIndexEntry) -> bool {
        self.range
            .map_or(true, |(s, e)| entry.time_max >= s && entry.time_min < e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorruptChunk {
    pub offset: u64,
    pub channel_id: u16,
}

/// Events selected by a read, in global timestamp order, plus any chunks
/// that were skipped because their checksum failed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Messages {
    pub events: Vec<Event>,
    pub corrupt: Vec<CorruptChunk>,
}

impl IntoIterator for Messages {
    type Item = Event;
    type IntoIter = std::vec::IntoIter<Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.into_iter()
    }
}

pub struct ContainerReader<R> {
    inner: CountingReader<R>,
    footer: Footer,
    file_len: u64,
    footer_bytes: u64,
    chunks_read: u64,
}

impl ContainerReader<BufReader<File>> {
    pub fn open_path(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        ContainerReader::open(BufReader::new(File::open(path)?))
    }
}

impl ContainerReader<Cursor<Vec<u8>>> {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, ContainerError> {
        ContainerReader::open(Cursor::new(bytes))
    }
}

impl<R: Read + Seek> ContainerReader<R> {
    pub fn open(reader: R) -> Result<Self, ContainerError> {
        let mut inner = CountingReader {
            inner: reader,
            bytes: 0,
        };
        let file_len = inner.seek(SeekFrom::End(0))?;
        inner.seek(SeekFrom::Start(0))?;
        let mut header = [0u8; format::HEADER_LEN as usize];
        if file_len < format::HEADER_LEN {
            return Err(ContainerError::NotAContainer);
        }
        inner.read_exact(&mut header)?;
        if header[..] != format::header_bytes()[..] {
            return Err(ContainerError::NotAContainer);
        }
        if file_len < format::HEADER_LEN + format::FOOTER_TAIL_LEN {
            return Err(ContainerError::NoFooter);
        }
        let mut tail = [0u8; format::FOOTER_TAIL_LEN as usize];
        inner.seek(SeekFrom::End(-(format::FOOTER_TAIL_LEN as i64)))?;
        inner.read_exact(&mut tail)?;
        if &tail[8..] != format::FOOTER_MAGIC {
            return Err(ContainerError::NoFooter);
        }
        let footer_start = u64::from_le_bytes(tail[..8].try_into().unwrap());
        if footer_start < format::HEADER_LEN || footer_start >= file_len - format::FOOTER_TAIL_LEN {
            return Err(ContainerError::NoFooter);
        }
        let mut footer_bytes = vec![0u8; (file_len - footer_start) as usize];
        inner.seek(SeekFrom::Start(footer_start))?;
        inner.read_exact(&mut footer_bytes)?;
        let (footer, recorded_start) =
            Footer::parse(&footer_bytes).map_err(|_| ContainerError::NoFooter)?;
        if recorded_start != footer_start {
            return Err(ContainerError::NoFooter);
        }
        for ch in &footer.channels {
            if ch.schema_version != SCHEMA_VERSION || ch.schema_name != schema_name(ch.topic) {
                return Err(ContainerError::UnsupportedSchema {
                    name: ch.schema_name.clone(),
                    version: ch.schema_version,
                });
            }
        }
        let footer_bytes = inner.bytes;
        Ok(ContainerReader {
            inner,
            footer,
            file_len,
            footer_bytes,
            chunks_read: 0,
        })
    }

    pub fn footer(&self) -> &Footer {
        &self.footer
    }

    pub fn index(&self) -> &[ChunkIndexEntry] {
        &self.footer.index
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    pub fn stats(&self) -> ReadStats {
        ReadStats {
            footer_bytes: self.footer_bytes,
            chunk_bytes: self.inner.bytes - self.footer_bytes,
            chunks_read: self.chunks_read,
        }
    }

    fn topic_of(&self, channel_id: u16) -> Option<Topic> {
        self.footer.channel(channel_id).and_then(|c| c.topic)
    }

    /// Reads and checksums one chunk; `None` if the checksum fails.
    fn read_chunk(&mut self, entry: &ChunkIndexEntry) -> Result<Option<Vec<u8>>, ContainerError> {
        let mut record = vec![0u8; entry.record_len() as usize];
        self.inner.seek(SeekFrom::Start(entry.file_offset))?;
        self.inner.read_exact(&mut record)?;
        self.chunks_read += 1;
        let payload_end = record.len() - format::CHUNK_CRC_LEN as usize;
        let declared = u32::from_le_bytes(record[1..5].try_into().unwrap());
        let crc = u32::from_le_bytes(record[payload_end..].try_into().unwrap());
        let payload = &record[format::CHUNK_PREFIX_LEN as usize..payload_end];
        if record[0] != format::RECORD_CHUNK
            || declared != entry.payload_len
            || crc != crc32fast::hash(payload)
        {
            return Ok(None);
        }
        Ok(Some(payload.to_vec()))
    }

    /// Reads the messages matching `filter`. Only chunks whose indexed time
    /// range intersects the filter range are touched.
    pub fn read_messages(&mut self, filter: &MessageFilter) -> Result<Messages, ContainerError> {
        let selected: Vec<(ChunkIndexEntry, Topic)> = self
            .footer
            .index
            .iter()
            .filter_map(|e| Some((*e, self.topic_of(e.channel_id)?)))
            .filter(|(e, topic)| filter.wants_topic(*topic) && filter.wants_chunk(e))
            .collect();

        let mut out = Messages::default();
        for (entry, topic) in selected {
            let Some(payload) = self.read_chunk(&entry)? else {
                out.corrupt.push(CorruptChunk {
                    offset: entry.file_offset,
                    channel_id: entry.channel_id,
                });
                continue;
            };
            for msg in format::parse_messages(&payload)? {
                let t = Timestamp(msg.t_ns);
                if msg.channel_id != entry.channel_id || !filter.wants_time(t) {
                    continue;
                }
                out.events.push(format::decode_body(topic, t, msg.body)?);
            }
        }
        out.events.sort_by_key(Event::order_key);
        Ok(out)
    }

    /// Reads the whole file back into an episode.
    pub fn read_episode(&mut self) -> Result<Episode, ContainerError> {
        let messages = self.read_messages(&MessageFilter::all())?;
        if let Some(c) = messages.corrupt.first() {
            return Err(ContainerError::CorruptChunk { offset: c.offset });
        }
        Ok(Episode {
            id: self.footer.episode_id.clone(),
            events: messages.events,
            meta: self.footer.meta.clone(),
        })
    }

    /// Embedded media payload for `handle`, if the file carries one.
    pub fn read_blob(&mut self, handle: u32) -> Result<Option<Vec<u8>>, ContainerError> {
        let entries: Vec<ChunkIndexEntry> = self
            .footer
            .index
            .iter()
            .filter(|e| e.channel_id == MEDIA_CHANNEL)
            .copied()
            .collect();
        for entry in entries {
            let Some(payload) = self.read_chunk(&entry)? else {
                return Err(ContainerError::CorruptChunk {
                    offset: entry.file_offset,
                });
            };
            for msg in format::parse_messages(&payload)? {
                let (h, data) = format::decode_blob(msg.body)?;
                if h == handle {
                    return Ok(Some(data.to_vec()));
                }
            }
        }
        Ok(None)
    }

    /// Number of embedded payloads and their total bytes.
    pub fn embedded_media(&self) -> (u64, u64) {
        self.footer
            .stats
            .get(&MEDIA_CHANNEL)
            .map_or((0, 0), |s| (s.count, s.bytes))
    }
}

/// Fetches the frame a media reference points at.
///
/// External references decode from the store at `media_root/uri`; embedded
/// references return the stored payload verbatim.
pub fn resolve_media<R: Read + Seek>(
    media_ref: &MediaRef,
    container: &mut ContainerReader<R>,
    media_root: &Path,
) -> Result<Vec<u8>, ContainerError> {
    let index = media_ref.frame_index.unwrap_or(0);
    match &media_ref.source {
        MediaSource::External(uri) => {
            let path = media_root.join(uri);
            if !path.is_file() {
                return Err(ContainerError::MediaMissing(uri.clone()));
            }
            let mut store = MediaStore::open_path(path)?;
            let frame = store.decode_frame(index, &mut ByteCounter::default())?;
            Ok(frame.pixels)
        }
        MediaSource::Embedded(handle) => {
            let payload = container
                .read_blob(*handle)?
                .ok_or_else(|| ContainerError::MediaMissing(format!("embedded:{handle}")))?;
            if index != 0 {
                return Err(ContainerError::FrameOutOfRange {
                    index,
                    frame_count: 1,
                });
            }
            Ok(payload)
        }
    }
}
