//! On-disk dataset layout.
//!
//! A dataset directory holds `tokens.bin` (little-endian u32 ids, samples
//! back to back), `vocab.txt` and `manifest.txt`. The manifest starts with
//! `key=value` header lines, then a blank line, then one tab-separated line
//! per sample: episode id, byte offset into `tokens.bin`, content length in
//! tokens, and one `ext:<uri>@<frames>` or `emb:<handle>@<frames>` field per
//! media store with frames as a comma list.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{AccessPlan, FslError, PackedDataset, Result};
use crate::container::MediaSource;
use crate::tokenizer::vocabulary_manifest;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TOKENS_FILE: &str = "tokens.bin";
pub const VOCAB_FILE: &str = "vocab.txt";
const MAGIC_LINE: &str = "deskcap-fsl 1";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ManifestHeader {
    pub max_seq_len: usize,
    pub tau: usize,
    pub img_token_count: usize,
    pub vocab_size: usize,
    pub media_root: String,
    pub episodes: usize,
    pub samples: usize,
    pub events: usize,
    pub screen_frames: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub episode_id: String,
    pub byte_offset: u64,
    pub content_len: usize,
    pub plan: AccessPlan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn total_frames(&self) -> usize {
        self.entries
            .iter()
            .flat_map(|e| e.plan.values())
            .map(Vec::len)
            .sum()
    }
}

fn check_field(what: &str, s: &str) -> Result<()> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(FslError::InvalidConfig(format!(
            "{what} `{}` contains a tab or newline",
            s.escape_debug()
        )));
    }
    Ok(())
}

fn plan_field(source: &MediaSource, frames: &[u64]) -> String {
    let list = frames
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    match source {
        MediaSource::External(uri) => format!("ext:{uri}@{list}"),
        MediaSource::Embedded(h) => format!("emb:{h}@{list}"),
    }
}

/// Renders the manifest text for a packed dataset.
pub fn manifest_text(ds: &PackedDataset, media_root: &str) -> Result<String> {
    check_field("media root", media_root)?;
    let mut out = String::new();
    let h = header_of(ds, media_root);
    out.push_str(MAGIC_LINE);
    out.push('\n');
    for (k, v) in [
        ("max_seq_len", h.max_seq_len.to_string()),
        ("tau", h.tau.to_string()),
        ("img_token_count", h.img_token_count.to_string()),
        ("vocab_size", h.vocab_size.to_string()),
        ("media_root", h.media_root.clone()),
        ("episodes", h.episodes.to_string()),
        ("samples", h.samples.to_string()),
        ("events", h.events.to_string()),
        ("screen_frames", h.screen_frames.to_string()),
    ] {
        out.push_str(&format!("{k}={v}\n"));
    }
    out.push('\n');
    let stride = (ds.config.max_seq_len * 4) as u64;
    for (k, s) in ds.samples.iter().enumerate() {
        check_field("episode id", &s.episode_id)?;
        out.push_str(&format!("{}\t{}\t{}", s.episode_id, k as u64 * stride, s.content_len()));
        for (source, frames) in &s.access_plan {
            if let MediaSource::External(uri) = source {
                check_field("media uri", uri)?;
            }
            out.push('\t');
            out.push_str(&plan_field(source, frames));
        }
        out.push('\n');
    }
    Ok(out)
}

fn header_of(ds: &PackedDataset, media_root: &str) -> ManifestHeader {
    ManifestHeader {
        max_seq_len: ds.config.max_seq_len,
        tau: ds.config.tau,
        img_token_count: ds.config.tokenizer.img_token_count,
        vocab_size: crate::tokenizer::VOCAB_SIZE as usize,
        media_root: media_root.to_string(),
        episodes: ds.episodes,
        samples: ds.samples.len(),
        events: ds.events(),
        screen_frames: ds.screen_frames(),
    }
}

/// Writes `manifest.txt`, `tokens.bin` and `vocab.txt` into `dir`.
pub fn write_dataset(dir: &Path, ds: &PackedDataset, media_root: &str) -> Result<ManifestHeader> {
    fs::create_dir_all(dir)?;
    let text = manifest_text(ds, media_root)?;
    let mut tokens = BufWriter::new(fs::File::create(dir.join(TOKENS_FILE))?);
    for s in &ds.samples {
        for id in &s.tokens {
            tokens.write_all(&id.to_le_bytes())?;
        }
    }
    tokens.flush()?;
    fs::write(dir.join(VOCAB_FILE), vocabulary_manifest())?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(header_of(ds, media_root))
}

fn bad(line: usize, reason: impl Into<String>) -> FslError {
    FslError::Manifest {
        line,
        reason: reason.into(),
    }
}

fn parse_plan_field(line: usize, field: &str) -> Result<(MediaSource, Vec<u64>)> {
    let (source, list) = field
        .rsplit_once('@')
        .ok_or_else(|| bad(line, format!("plan field `{field}` has no `@`")))?;
    let source = if let Some(uri) = source.strip_prefix("ext:") {
        MediaSource::External(uri.to_string())
    } else if let Some(h) = source.strip_prefix("emb:") {
        MediaSource::Embedded(h.parse().map_err(|_| bad(line, format!("bad handle `{h}`")))?)
    } else {
        return Err(bad(line, format!("unknown media source `{source}`")));
    };
    let frames = if list.is_empty() {
        Vec::new()
    } else {
        list.split(',')
            .map(|f| f.parse().map_err(|_| bad(line, format!("bad frame index `{f}`"))))
            .collect::<Result<Vec<u64>>>()?
    };
    Ok((source, frames))
}

pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC_LINE)) => {}
        _ => return Err(bad(1, format!("expected `{MAGIC_LINE}`"))),
    }
    let mut header = ManifestHeader::default();
    for (n, line) in lines.by_ref() {
        if line.is_empty() {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(n, "header line without `=`"))?;
        let num = || v.parse::<usize>().map_err(|_| bad(n, format!("bad value for {k}")));
        match k {
            "max_seq_len" => header.max_seq_len = num()?,
            "tau" => header.tau = num()?,
            "img_token_count" => header.img_token_count = num()?,
            "vocab_size" => header.vocab_size = num()?,
            "media_root" => header.media_root = v.to_string(),
            "episodes" => header.episodes = num()?,
            "samples" => header.samples = num()?,
            "events" => header.events = num()?,
            "screen_frames" => header.screen_frames = num()?,
            _ => log::debug!("ignoring manifest header key {k}"),
        }
    }
    let mut entries = Vec::new();
    for (n, line) in lines {
        let mut fields = line.split('\t');
        let episode_id = fields.next().unwrap_or_default().to_string();
        let byte_offset = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad(n, "missing or bad byte offset"))?;
        let content_len = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad(n, "missing or bad content length"))?;
        let mut plan = AccessPlan::new();
        for f in fields {
            let (source, frames) = parse_plan_field(n, f)?;
            plan.insert(source, frames);
        }
        entries.push(ManifestEntry {
            episode_id,
            byte_offset,
            content_len,
            plan,
        });
    }
    if entries.len() != header.samples {
        return Err(bad(
            0,
            format!("header declares {} samples, found {}", header.samples, entries.len()),
        ));
    }
    Ok(DatasetManifest { header, entries })
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    parse_manifest(&fs::read_to_string(dir.join(MANIFEST_FILE))?)
}

/// Token ids of sample `k`, read from `tokens.bin`.
pub fn read_sample_tokens(dir: &Path, manifest: &DatasetManifest, k: usize) -> Result<Vec<u32>> {
    use std::io::{Read, Seek, SeekFrom};
    let entry = manifest
        .entries
        .get(k)
        .ok_or_else(|| bad(0, format!("no sample {k}")))?;
    let mut f = fs::File::open(dir.join(TOKENS_FILE))?;
    f.seek(SeekFrom::Start(entry.byte_offset))?;
    let mut buf = vec![0u8; manifest.header.max_seq_len * 4];
    f.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
