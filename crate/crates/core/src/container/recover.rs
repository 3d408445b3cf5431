use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::format::{self, Footer};
use super::{default_channels, ChannelStats, ChunkIndexEntry, ContainerError};
use crate::events::Timestamp;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub chunks: usize,
    pub messages: u64,
    /// Complete chunks skipped because their checksum or framing was bad.
    pub dropped_chunks: usize,
    /// Trailing bytes cut off (partial chunk, partial footer).
    pub discarded_bytes: u64,
    /// The file already carried a valid footer and was left untouched.
    pub intact: bool,
}

struct Scanned {
    index: Vec<ChunkIndexEntry>,
    stats: BTreeMap<u16, ChannelStats>,
    messages: u64,
    dropped: usize,
}

/// Parses a chunk payload into an index entry, or `None` if it is not a
/// well-formed single-channel chunk.
fn index_chunk(
    offset: u64,
    payload: &[u8],
    crc: u32,
    stats: &mut BTreeMap<u16, ChannelStats>,
) -> Option<ChunkIndexEntry> {
    let messages = format::parse_messages(payload).ok()?;
    let first = messages.first()?;
    let channel_id = first.channel_id;
    let known = default_channels().iter().any(|c| c.channel_id == channel_id);
    if !known || messages.iter().any(|m| m.channel_id != channel_id) {
        return None;
    }
    let time_min = messages.iter().map(|m| m.t_ns).min()?;
    let time_max = messages.iter().map(|m| m.t_ns).max()?;
    let s = stats.entry(channel_id).or_default();
    for m in &messages {
        s.add(
            Timestamp(m.t_ns),
            (format::MESSAGE_HEADER_LEN + m.body.len()) as u64,
        );
    }
    Some(ChunkIndexEntry {
        channel_id,
        time_min: Timestamp(time_min),
        time_max: Timestamp(time_max),
        file_offset: offset,
        payload_len: payload.len() as u32,
        message_count: messages.len() as u32,
        crc32: crc,
    })
}

/// Rebuilds a sealed container from a possibly truncated image.
///
/// Every complete chunk whose checksum verifies is kept; a fresh footer is
/// appended after the last complete record. An image that already ends in a
/// footer consistent with its chunks is returned unchanged.
pub fn recover_bytes(bytes: &[u8]) -> Result<(Vec<u8>, RecoveryReport), ContainerError> {
    recover_with_id(bytes, "")
}

fn recover_with_id(bytes: &[u8], episode_id: &str) -> Result<(Vec<u8>, RecoveryReport), ContainerError> {
    let header = format::header_bytes();
    if bytes.len() < header.len() || bytes[..header.len()] != header[..] {
        return Err(ContainerError::NotAContainer);
    }
    let len = bytes.len();
    let mut pos = header.len();
    let mut scan = Scanned {
        index: Vec::new(),
        stats: BTreeMap::new(),
        messages: 0,
        dropped: 0,
    };

    while pos < len {
        match bytes[pos] {
            format::RECORD_CHUNK => {
                let prefix = format::CHUNK_PREFIX_LEN as usize;
                if pos + prefix > len {
                    break;
                }
                let plen = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().unwrap()) as usize;
                let end = pos + prefix + plen + format::CHUNK_CRC_LEN as usize;
                if end > len {
                    break;
                }
                let payload = &bytes[pos + prefix..pos + prefix + plen];
                let crc = u32::from_le_bytes(bytes[end - 4..end].try_into().unwrap());
                let entry = (crc == crc32fast::hash(payload))
                    .then(|| index_chunk(pos as u64, payload, crc, &mut scan.stats))
                    .flatten();
                match entry {
                    Some(e) => {
                        scan.messages += e.message_count as u64;
                        scan.index.push(e);
                    }
                    None => scan.dropped += 1,
                }
                pos = end;
            }
            format::RECORD_FOOTER => {
                if let Ok((footer, start)) = Footer::parse(&bytes[pos..]) {
                    if start == pos as u64 && footer.index == scan.index && scan.dropped == 0 {
                        let report = RecoveryReport {
                            chunks: scan.index.len(),
                            messages: scan.messages,
                            intact: true,
                            ..Default::default()
                        };
                        return Ok((bytes.to_vec(), report));
                    }
                }
                break;
            }
            _ => break,
        }
    }

    let mut out = bytes[..pos].to_vec();
    let footer = Footer {
        channels: default_channels(),
        index: scan.index,
        stats: scan.stats,
        episode_id: episode_id.to_string(),
        meta: BTreeMap::new(),
    };
    out.extend_from_slice(&footer.to_bytes(pos as u64));
    let report = RecoveryReport {
        chunks: footer.index.len(),
        messages: scan.messages,
        dropped_chunks: scan.dropped,
        discarded_bytes: (len - pos) as u64,
        intact: false,
    };
    Ok((out, report))
}

/// Repairs the container at `path` in place. The episode id of a rebuilt
/// footer is taken from the file stem.
pub fn recover(path: impl AsRef<Path>) -> Result<RecoveryReport, ContainerError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (fixed, report) = recover_with_id(&bytes, &id)?;
    if !report.intact {
        let tmp = path.with_extension("recovering");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&fixed)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
    }
    Ok(report)
}
