//! Byte-level grammar of the container.
//!
//! ```text
//! header  = "OWA1" | version u16
//! chunk   = 0x01 | payload_len u32 | payload | crc32(payload) u32
//! payload = { channel_id u16 | t_ns u64 | body_len u32 | body }*
//! footer  = 0x02 | channels | index | stats | episode | footer_start u64 | "1AWO"
//! ```
//! All integers are little-endian.

use std::collections::BTreeMap;

use super::{
    ChannelDescriptor, ChannelStats, ChunkIndexEntry, ContainerError, MediaRef, MediaSource,
    MEDIA_CHANNEL,
};
use crate::events::{Event, KeyAction, KeyboardEvent, MouseEvent, ScreenEvent, Timestamp, Topic};

pub const MAGIC: &[u8; 4] = b"OWA1";
pub const FOOTER_MAGIC: &[u8; 4] = b"1AWO";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 6;

pub const RECORD_CHUNK: u8 = 1;
pub const RECORD_FOOTER: u8 = 2;

/// `record_type | payload_len` before a chunk payload.
pub const CHUNK_PREFIX_LEN: u64 = 5;
pub const CHUNK_CRC_LEN: u64 = 4;
/// `channel_id | t_ns | body_len` before every message body.
pub const MESSAGE_HEADER_LEN: usize = 14;
/// `footer_start | footer magic` at the very end of a sealed file.
pub const FOOTER_TAIL_LEN: u64 = 12;

pub fn header_bytes() -> Vec<u8> {
    let mut v = MAGIC.to_vec();
    v.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    v
}

/// Little-endian cursor over a byte slice.
pub struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| ContainerError::Malformed("unexpected end of record".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, ContainerError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ContainerError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn i16(&mut self) -> Result<i16, ContainerError> {
        Ok(i16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn i32(&mut self) -> Result<i32, ContainerError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn string(&mut self) -> Result<String, ContainerError> {
        let len = self.u16()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| ContainerError::Malformed("string is not utf-8".into()))
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    let bytes = s.as_bytes();
    let len = u16::try_from(bytes.len()).expect("string longer than 65535 bytes");
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(bytes);
}

/// A raw message as stored in a chunk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawMessage<'a> {
    pub channel_id: u16,
    pub t_ns: u64,
    pub body: &'a [u8],
}

pub fn put_message(out: &mut Vec<u8>, channel_id: u16, t_ns: u64, body: &[u8]) {
    out.extend_from_slice(&channel_id.to_le_bytes());
    out.extend_from_slice(&t_ns.to_le_bytes());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(body);
}

pub fn parse_messages(payload: &[u8]) -> Result<Vec<RawMessage<'_>>, ContainerError> {
    let mut c = Cursor::new(payload);
    let mut out = Vec::new();
    while !c.is_empty() {
        let channel_id = c.u16()?;
        let t_ns = c.u64()?;
        let len = c.u32()? as usize;
        let body = c.take(len)?;
        out.push(RawMessage {
            channel_id,
            t_ns,
            body,
        });
    }
    Ok(out)
}

pub fn encode_body(event: &Event) -> Vec<u8> {
    let mut out = Vec::new();
    match event {
        Event::Screen(s) => {
            match &s.media.source {
                MediaSource::External(uri) => {
                    out.push(0);
                    put_string(&mut out, uri);
                }
                MediaSource::Embedded(handle) => {
                    out.push(1);
                    out.extend_from_slice(&handle.to_le_bytes());
                }
            }
            match s.media.frame_index {
                Some(i) => {
                    out.push(1);
                    out.extend_from_slice(&i.to_le_bytes());
                }
                None => out.push(0),
            }
            out.extend_from_slice(&s.frame_index.to_le_bytes());
        }
        Event::Keyboard(k) => {
            out.push(k.vk);
            out.push(match k.action {
                KeyAction::Press => 0,
                KeyAction::Release => 1,
            });
        }
        Event::Mouse(m) => {
            // Validated events keep deltas within ±1999, which fits i16.
            out.extend_from_slice(&(m.dx as i16).to_le_bytes());
            out.extend_from_slice(&(m.dy as i16).to_le_bytes());
            out.extend_from_slice(&m.button_flags.to_le_bytes());
            match m.scroll {
                Some(s) => {
                    out.push(1);
                    out.extend_from_slice(&s.to_le_bytes());
                }
                None => out.push(0),
            }
        }
    }
    out
}

pub fn decode_body(topic: Topic, t: Timestamp, body: &[u8]) -> Result<Event, ContainerError> {
    let mut c = Cursor::new(body);
    let event = match topic {
        Topic::Screen => {
            let source = match c.u8()? {
                0 => MediaSource::External(c.string()?),
                1 => MediaSource::Embedded(c.u32()?),
                other => {
                    return Err(ContainerError::Malformed(format!("media kind {other}")));
                }
            };
            let ref_frame = match c.u8()? {
                0 => None,
                _ => Some(c.u64()?),
            };
            Event::Screen(ScreenEvent {
                t,
                media: MediaRef {
                    source,
                    frame_index: ref_frame,
                },
                frame_index: c.u64()?,
            })
        }
        Topic::Keyboard => {
            let vk = c.u8()?;
            let action = match c.u8()? {
                0 => KeyAction::Press,
                1 => KeyAction::Release,
                other => return Err(ContainerError::Malformed(format!("key action {other}"))),
            };
            Event::Keyboard(KeyboardEvent { t, vk, action })
        }
        Topic::Mouse => {
            let dx = c.i16()? as i32;
            let dy = c.i16()? as i32;
            let button_flags = c.u16()?;
            let scroll = match c.u8()? {
                0 => None,
                _ => Some(c.i32()?),
            };
            Event::Mouse(MouseEvent {
                t,
                dx,
                dy,
                button_flags,
                scroll,
            })
        }
    };
    if !c.is_empty() {
        return Err(ContainerError::Malformed(format!("trailing bytes in {topic} body")));
    }
    Ok(event)
}

pub fn encode_blob(handle: u32, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&handle.to_le_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn decode_blob(body: &[u8]) -> Result<(u32, &[u8]), ContainerError> {
    let mut c = Cursor::new(body);
    let handle = c.u32()?;
    Ok((handle, &body[c.pos()..]))
}

/// Frames a chunk payload into `0x01 | len | payload | crc`.
pub fn chunk_bytes(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 9);
    out.push(RECORD_CHUNK);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out
}

/// Everything the footer records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Footer {
    pub channels: Vec<ChannelDescriptor>,
    pub index: Vec<ChunkIndexEntry>,
    pub stats: BTreeMap<u16, ChannelStats>,
    pub episode_id: String,
    pub meta: BTreeMap<String, String>,
}

fn topic_tag(topic: Option<Topic>) -> u8 {
    match topic {
        Some(Topic::Screen) => 0,
        Some(Topic::Keyboard) => 1,
        Some(Topic::Mouse) => 2,
        None => 0xFF,
    }
}

fn tag_topic(tag: u8) -> Result<Option<Topic>, ContainerError> {
    Ok(match tag {
        0 => Some(Topic::Screen),
        1 => Some(Topic::Keyboard),
        2 => Some(Topic::Mouse),
        0xFF => None,
        other => return Err(ContainerError::Malformed(format!("topic tag {other}"))),
    })
}

impl Footer {
    /// Serializes the footer record; `footer_start` is its own file offset.
    pub fn to_bytes(&self, footer_start: u64) -> Vec<u8> {
        let mut out = vec![RECORD_FOOTER];
        out.extend_from_slice(&(self.channels.len() as u16).to_le_bytes());
        for ch in &self.channels {
            out.extend_from_slice(&ch.channel_id.to_le_bytes());
            out.push(topic_tag(ch.topic));
            put_string(&mut out, &ch.schema_name);
            out.extend_from_slice(&ch.schema_version.to_le_bytes());
        }
        out.extend_from_slice(&(self.index.len() as u32).to_le_bytes());
        for e in &self.index {
            out.extend_from_slice(&e.channel_id.to_le_bytes());
            out.extend_from_slice(&e.time_min.0.to_le_bytes());
            out.extend_from_slice(&e.time_max.0.to_le_bytes());
            out.extend_from_slice(&e.file_offset.to_le_bytes());
            out.extend_from_slice(&e.payload_len.to_le_bytes());
            out.extend_from_slice(&e.message_count.to_le_bytes());
            out.extend_from_slice(&e.crc32.to_le_bytes());
        }
        out.extend_from_slice(&(self.stats.len() as u16).to_le_bytes());
        for (id, s) in &self.stats {
            out.extend_from_slice(&id.to_le_bytes());
            out.extend_from_slice(&s.count.to_le_bytes());
            out.extend_from_slice(&s.t_min.0.to_le_bytes());
            out.extend_from_slice(&s.t_max.0.to_le_bytes());
            out.extend_from_slice(&s.bytes.to_le_bytes());
        }
        put_string(&mut out, &self.episode_id);
        out.extend_from_slice(&(self.meta.len() as u16).to_le_bytes());
        for (k, v) in &self.meta {
            put_string(&mut out, k);
            put_string(&mut out, v);
        }
        out.extend_from_slice(&footer_start.to_le_bytes());
        out.extend_from_slice(FOOTER_MAGIC);
        out
    }

    /// Parses a footer record spanning all of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<(Footer, u64), ContainerError> {
        let mut c = Cursor::new(bytes);
        if c.u8()? != RECORD_FOOTER {
            return Err(ContainerError::Malformed("footer record type".into()));
        }
        let mut footer = Footer::default();
        for _ in 0..c.u16()? {
            footer.channels.push(ChannelDescriptor {
                channel_id: c.u16()?,
                topic: tag_topic(c.u8()?)?,
                schema_name: c.string()?,
                schema_version: c.u16()?,
            });
        }
        for _ in 0..c.u32()? {
            footer.index.push(ChunkIndexEntry {
                channel_id: c.u16()?,
                time_min: Timestamp(c.u64()?),
                time_max: Timestamp(c.u64()?),
                file_offset: c.u64()?,
                payload_len: c.u32()?,
                message_count: c.u32()?,
                crc32: c.u32()?,
            });
        }
        for _ in 0..c.u16()? {
            let id = c.u16()?;
            footer.stats.insert(
                id,
                ChannelStats {
                    count: c.u64()?,
                    t_min: Timestamp(c.u64()?),
                    t_max: Timestamp(c.u64()?),
                    bytes: c.u64()?,
                },
            );
        }
        footer.episode_id = c.string()?;
        for _ in 0..c.u16()? {
            let k = c.string()?;
            let v = c.string()?;
            footer.meta.insert(k, v);
        }
        let footer_start = c.u64()?;
        if c.take(4)? != FOOTER_MAGIC || !c.is_empty() {
            return Err(ContainerError::Malformed("footer trailer".into()));
        }
        Ok((footer, footer_start))
    }

    pub fn channel(&self, id: u16) -> Option<&ChannelDescriptor> {
        self.channels.iter().find(|c| c.channel_id == id)
    }

    pub fn is_media_channel(id: u16) -> bool {
        id == MEDIA_CHANNEL
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::default_channels;

    #[test]
    fn footer_roundtrip() {
        let mut footer = Footer {
            channels: default_channels(),
            episode_id: "ep-1".into(),
            ..Default::default()
        };
        footer.meta.insert("fps".into(), "20".into());
        footer.index.push(ChunkIndexEntry {
            channel_id: 2,
            time_min: Timestamp(5),
            time_max: Timestamp(9),
            file_offset: 6,
            payload_len: 100,
            message_count: 3,
            crc32: 0xdead_beef,
        });
        footer.stats.insert(
            2,
            ChannelStats {
                count: 3,
                t_min: Timestamp(5),
                t_max: Timestamp(9),
                bytes: 100,
            },
        );
        let bytes = footer.to_bytes(1234);
        let (parsed, start) = Footer::parse(&bytes).unwrap();
        assert_eq!(parsed, footer);
        assert_eq!(start, 1234);
        assert!(Footer::parse(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn body_roundtrip_all_topics() {
        let events = [
            Event::Screen(ScreenEvent {
                t: Timestamp(1),
                media: MediaRef::external("a b.gops"),
                frame_index: 17,
            }),
            Event::Screen(ScreenEvent {
                t: Timestamp(1),
                media: MediaRef {
                    source: MediaSource::Embedded(4),
                    frame_index: Some(0),
                },
                frame_index: 0,
            }),
            Event::Keyboard(KeyboardEvent {
                t: Timestamp(2),
                vk: 255,
                action: KeyAction::Release,
            }),
            Event::Mouse(MouseEvent {
                t: Timestamp(3),
                dx: -1999,
                dy: 1999,
                button_flags: 0x0480,
                scroll: Some(-3),
            }),
        ];
        for e in events {
            let body = encode_body(&e);
            assert_eq!(decode_body(e.topic(), e.t(), &body).unwrap(), e);
        }
    }
}
