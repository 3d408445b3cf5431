use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::gop::{gop_layout, keyframe_before, GopConfig};
use super::{rle, ByteCounter, CodecError, Frame};

pub const MEDIA_MAGIC: &[u8; 4] = b"GOPS";
/// `kind(u8) | len(u32)` in front of every frame payload.
pub const RECORD_HEADER_LEN: u64 = 5;

const GOP_MODE_FIXED: u8 = 0;
const GOP_MODE_VARIABLE: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    I,
    P,
}

impl FrameKind {
    fn tag(self) -> u8 {
        match self {
            FrameKind::I => 0,
            FrameKind::P => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MediaHeader {
    pub width: u16,
    pub height: u16,
    pub fps: f32,
    pub frame_count: u64,
    pub gop: GopConfig,
    pub frame_offsets: Vec<u64>,
}

impl MediaHeader {
    pub fn frame_bytes(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

/// Encodes frames into the store layout:
/// `GOPS | width u16 | height u16 | fps f32 | frame_count u32 | gop | offsets u64×n | records`.
pub fn encode_media(frames: &[Frame], cfg: &GopConfig, fps: f32) -> Result<Vec<u8>, CodecError> {
    cfg.validate()?;
    let (width, height) = frames.first().map_or((0, 0), |f| (f.width, f.height));
    for (index, f) in frames.iter().enumerate() {
        if (f.width, f.height) != (width, height) || f.pixels.len() != f.width as usize * f.height as usize {
            return Err(CodecError::DimensionMismatch {
                index,
                got: (f.width, f.height),
                expected: (width, height),
            });
        }
    }
    let frame_count = u32::try_from(frames.len())
        .map_err(|_| CodecError::InvalidGop("more than u32::MAX frames".into()))?;

    let mut out = Vec::new();
    out.extend_from_slice(MEDIA_MAGIC);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&fps.to_le_bytes());
    out.extend_from_slice(&frame_count.to_le_bytes());
    match *cfg {
        GopConfig::Fixed { interval } => {
            out.push(GOP_MODE_FIXED);
            out.extend_from_slice(&interval.to_le_bytes());
        }
        GopConfig::Variable {
            seed,
            min_frames,
            max_frames,
        } => {
            out.push(GOP_MODE_VARIABLE);
            out.extend_from_slice(&seed.to_le_bytes());
            out.extend_from_slice(&min_frames.to_le_bytes());
            out.extend_from_slice(&max_frames.to_le_bytes());
        }
    }
    let table_at = out.len();
    out.resize(table_at + 8 * frames.len(), 0);

    let keyframes = gop_layout(cfg, frames.len() as u64);
    let mut next_key = keyframes.iter().peekable();
    let mut prev: Option<&Frame> = None;
    for (i, frame) in frames.iter().enumerate() {
        let offset = out.len() as u64;
        out[table_at + 8 * i..table_at + 8 * i + 8].copy_from_slice(&offset.to_le_bytes());
        let is_key = next_key.peek().is_some_and(|&&k| k == i as u64);
        let (kind, payload) = match prev {
            Some(p) if !is_key => {
                let delta: Vec<u8> = frame
                    .pixels
                    .iter()
                    .zip(&p.pixels)
                    .map(|(a, b)| a ^ b)
                    .collect();
                (FrameKind::P, rle::encode(&delta))
            }
            _ => {
                next_key.next();
                (FrameKind::I, rle::encode(&frame.pixels))
            }
        };
        out.push(kind.tag());
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&payload);
        prev = Some(frame);
    }
    Ok(out)
}

/// Encodes and writes a store, returning its size in bytes.
pub fn write_media(
    path: impl AsRef<Path>,
    frames: &[Frame],
    cfg: &GopConfig,
    fps: f32,
) -> Result<u64, CodecError> {
    let bytes = encode_media(frames, cfg, fps)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(bytes.len() as u64)
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N], CodecError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CodecError::BadMagic
        } else {
            CodecError::Io(e)
        }
    })?;
    Ok(buf)
}

/// Read handle over an encoded store. Every payload read is charged to the
/// caller's [`ByteCounter`].
pub struct MediaStore<R> {
    reader: R,
    header: MediaHeader,
    keyframes: Vec<u64>,
    header_bytes: u64,
    total_bytes: u64,
}

impl MediaStore<BufReader<File>> {
    pub fn open_path(path: impl AsRef<Path>) -> Result<Self, CodecError> {
        MediaStore::open(BufReader::new(File::open(path)?))
    }
}

impl MediaStore<Cursor<Vec<u8>>> {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, CodecError> {
        MediaStore::open(Cursor::new(bytes))
    }
}

impl<R: Read + Seek> MediaStore<R> {
    pub fn open(mut reader: R) -> Result<Self, CodecError> {
        let total_bytes = reader.seek(SeekFrom::End(0))?;
        reader.seek(SeekFrom::Start(0))?;
        if &read_array::<4>(&mut reader)? != MEDIA_MAGIC {
            return Err(CodecError::BadMagic);
        }
        let width = u16::from_le_bytes(read_array(&mut reader)?);
        let height = u16::from_le_bytes(read_array(&mut reader)?);
        let fps = f32::from_le_bytes(read_array(&mut reader)?);
        let frame_count = u32::from_le_bytes(read_array(&mut reader)?) as u64;
        let gop = match read_array::<1>(&mut reader)?[0] {
            GOP_MODE_FIXED => GopConfig::Fixed {
                interval: u32::from_le_bytes(read_array(&mut reader)?),
            },
            GOP_MODE_VARIABLE => GopConfig::Variable {
                seed: u64::from_le_bytes(read_array(&mut reader)?),
                min_frames: u32::from_le_bytes(read_array(&mut reader)?),
                max_frames: u32::from_le_bytes(read_array(&mut reader)?),
            },
            other => return Err(CodecError::InvalidGop(format!("unknown gop mode {other}"))),
        };
        gop.validate()?;
        let mut frame_offsets = Vec::with_capacity(frame_count as usize);
        for _ in 0..frame_count {
            frame_offsets.push(u64::from_le_bytes(read_array(&mut reader)?));
        }
        let header_bytes = reader.stream_position()?;
        if frame_offsets.first().is_some_and(|&o| o < header_bytes)
            || frame_offsets.windows(2).any(|w| w[0] >= w[1])
            || frame_offsets.last().is_some_and(|&o| o >= total_bytes)
        {
            return Err(CodecError::CorruptFrame {
                index: 0,
                reason: "frame offset table is not strictly increasing within the file".into(),
            });
        }
        let keyframes = gop_layout(&gop, frame_count);
        Ok(MediaStore {
            reader,
            header: MediaHeader {
                width,
                height,
                fps,
                frame_count,
                gop,
                frame_offsets,
            },
            keyframes,
            header_bytes,
            total_bytes,
        })
    }

    pub fn header(&self) -> &MediaHeader {
        &self.header
    }

    pub fn frame_count(&self) -> u64 {
        self.header.frame_count
    }

    pub fn keyframes(&self) -> &[u64] {
        &self.keyframes
    }

    pub fn is_keyframe(&self, index: u64) -> bool {
        self.keyframes.binary_search(&index).is_ok()
    }

    pub fn keyframe_before(&self, index: u64) -> u64 {
        keyframe_before(&self.keyframes, index)
    }

    /// Bytes of magic, dimensions, GOP descriptor and offset table.
    pub fn header_bytes(&self) -> u64 {
        self.header_bytes
    }

    pub fn file_len(&self) -> u64 {
        self.total_bytes
    }

    fn check_range(&self, index: u64) -> Result<(), CodecError> {
        if index >= self.header.frame_count {
            return Err(CodecError::FrameOutOfRange {
                index,
                frame_count: self.header.frame_count,
            });
        }
        Ok(())
    }

    fn read_record(
        &mut self,
        index: u64,
        counter: &mut ByteCounter,
    ) -> Result<(FrameKind, Vec<u8>), CodecError> {
        let corrupt = |reason: &str| CodecError::CorruptFrame {
            index,
            reason: reason.to_string(),
        };
        let offset = self.header.frame_offsets[index as usize];
        self.reader.seek(SeekFrom::Start(offset))?;
        let mut head = [0u8; RECORD_HEADER_LEN as usize];
        self.reader
            .read_exact(&mut head)
            .map_err(|_| corrupt("truncated record header"))?;
        let kind = match head[0] {
            0 => FrameKind::I,
            1 => FrameKind::P,
            _ => return Err(corrupt("unknown frame kind")),
        };
        let len = u32::from_le_bytes(head[1..5].try_into().unwrap()) as u64;
        if offset + RECORD_HEADER_LEN + len > self.total_bytes {
            return Err(corrupt("payload runs past end of file"));
        }
        let mut payload = vec![0u8; len as usize];
        self.reader
            .read_exact(&mut payload)
            .map_err(|_| corrupt("truncated payload"))?;
        counter.bytes_read += RECORD_HEADER_LEN + len;
        Ok((kind, payload))
    }

    /// Reads and decodes one record given the previously decoded frame.
    fn decode_next(
        &mut self,
        index: u64,
        prev: Option<&[u8]>,
        counter: &mut ByteCounter,
    ) -> Result<Vec<u8>, CodecError> {
        let (kind, payload) = self.read_record(index, counter)?;
        let expected_kind = if self.is_keyframe(index) {
            FrameKind::I
        } else {
            FrameKind::P
        };
        if kind != expected_kind {
            return Err(CodecError::CorruptFrame {
                index,
                reason: format!("record is {kind:?}, layout expects {expected_kind:?}"),
            });
        }
        let len = self.header.frame_bytes() as usize;
        let data = rle::decode(&payload, len).map_err(|e| CodecError::CorruptFrame {
            index,
            reason: e.to_string(),
        })?;
        counter.frames_decoded += 1;
        match kind {
            FrameKind::I => Ok(data),
            FrameKind::P => {
                let prev = prev.ok_or_else(|| CodecError::CorruptFrame {
                    index,
                    reason: "P-frame without a decoded predecessor".into(),
                })?;
                Ok(data.iter().zip(prev).map(|(d, p)| d ^ p).collect())
            }
        }
    }

    fn frame(&self, pixels: Vec<u8>) -> Frame {
        Frame {
            width: self.header.width,
            height: self.header.height,
            pixels,
        }
    }

    /// Decodes one frame by seeking to its keyframe and rolling forward.
    pub fn decode_frame(&mut self, index: u64, counter: &mut ByteCounter) -> Result<Frame, CodecError> {
        self.check_range(index)?;
        counter.seeks += 1;
        let mut prev: Option<Vec<u8>> = None;
        for i in self.keyframe_before(index)..=index {
            prev = Some(self.decode_next(i, prev.as_deref(), counter)?);
        }
        Ok(self.frame(prev.expect("range is non-empty")))
    }

    /// Decodes every frame in order.
    pub fn decode_all(&mut self, counter: &mut ByteCounter) -> Result<Vec<Frame>, CodecError> {
        if self.frame_count() == 0 {
            return Ok(Vec::new());
        }
        let mut dec = open_sequential(self, 0, counter)?;
        let mut frames = Vec::new();
        loop {
            match dec.next(counter) {
                Ok(f) => frames.push(f),
                Err(CodecError::EndOfStream) => return Ok(frames),
                Err(e) => return Err(e),
            }
        }
    }
}

/// Forward decoder positioned at some frame. Each `next` costs exactly one
/// payload read; crossing a keyframe just reads the I-frame record.
pub struct SequentialDecoder<'s, R> {
    store: &'s mut MediaStore<R>,
    next_index: u64,
    prev: Option<Vec<u8>>,
}

/// Seeks to the keyframe before `start` and decodes up to (not including)
/// `start`, so the first `next` yields frame `start`.
pub fn open_sequential<'s, R: Read + Seek>(
    store: &'s mut MediaStore<R>,
    start: u64,
    counter: &mut ByteCounter,
) -> Result<SequentialDecoder<'s, R>, CodecError> {
    store.check_range(start)?;
    counter.seeks += 1;
    let mut prev = None;
    for i in store.keyframe_before(start)..start {
        prev = Some(store.decode_next(i, prev.as_deref(), counter)?);
    }
    Ok(SequentialDecoder {
        store,
        next_index: start,
        prev,
    })
}

impl<R: Read + Seek> SequentialDecoder<'_, R> {
    /// Index of the frame the next call returns.
    pub fn position(&self) -> u64 {
        self.next_index
    }

    pub fn next(&mut self, counter: &mut ByteCounter) -> Result<Frame, CodecError> {
        if self.next_index >= self.store.frame_count() {
            return Err(CodecError::EndOfStream);
        }
        let pixels = self
            .store
            .decode_next(self.next_index, self.prev.as_deref(), counter)?;
        self.next_index += 1;
        self.prev = Some(pixels.clone());
        Ok(self.store.frame(pixels))
    }

    /// Decodes forward without returning frames until `position() == target`.
    pub fn advance_to(&mut self, target: u64, counter: &mut ByteCounter) -> Result<(), CodecError> {
        while self.next_index < target {
            self.next(counter)?;
        }
        Ok(())
    }

    /// Re-seeks this decoder to the keyframe before `target` and decodes up
    /// to it.
    pub fn seek(&mut self, target: u64, counter: &mut ByteCounter) -> Result<(), CodecError> {
        self.store.check_range(target)?;
        counter.seeks += 1;
        self.next_index = self.store.keyframe_before(target);
        self.prev = None;
        self.advance_to(target, counter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, w: u16, h: u16) -> Vec<Frame> {
        (0..n)
            .map(|i| {
                let mut f = Frame::filled(w, h, 10);
                let len = f.pixels.len();
                f.pixels[i % len] = 200;
                f
            })
            .collect()
    }

    #[test]
    fn single_frame_is_one_iframe() {
        let bytes = encode_media(&ramp(1, 4, 4), &GopConfig::default(), 20.0).unwrap();
        let mut store = MediaStore::from_bytes(bytes).unwrap();
        assert_eq!(store.frame_count(), 1);
        assert_eq!(store.keyframes(), [0]);
        let mut c = ByteCounter::default();
        store.decode_frame(0, &mut c).unwrap();
        assert_eq!(c.frames_decoded, 1);
    }

    #[test]
    fn identical_frames_give_zero_deltas() {
        let frames = vec![Frame::filled(8, 8, 77); 61];
        let bytes = encode_media(&frames, &GopConfig::fixed(30), 20.0).unwrap();
        let mut store = MediaStore::from_bytes(bytes).unwrap();
        let mut c = ByteCounter::default();
        for i in 0..61 {
            let (kind, payload) = store.read_record(i, &mut c).unwrap();
            if i % 30 == 0 {
                assert_eq!(kind, FrameKind::I);
                assert_eq!(payload, rle::encode(&[77; 64]));
            } else {
                assert_eq!(kind, FrameKind::P);
                // one run of 64 zero bytes
                assert_eq!(payload, vec![64, 0]);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let frames = vec![Frame::filled(4, 4, 0), Frame::filled(4, 5, 0)];
        let err = encode_media(&frames, &GopConfig::default(), 20.0).unwrap_err();
        assert!(matches!(err, CodecError::DimensionMismatch { index: 1, .. }));
    }

    #[test]
    fn decode_frame_reads_from_keyframe() {
        let frames = ramp(100, 6, 5);
        let mut store =
            MediaStore::from_bytes(encode_media(&frames, &GopConfig::fixed(30), 20.0).unwrap()).unwrap();
        let mut c = ByteCounter::default();
        assert_eq!(store.decode_frame(0, &mut c).unwrap(), frames[0]);
        assert_eq!(c.frames_decoded, 1);

        let mut c = ByteCounter::default();
        assert_eq!(store.decode_frame(35, &mut c).unwrap(), frames[35]);
        assert_eq!(c.frames_decoded, 6);
        assert_eq!(c.seeks, 1);

        let err = store.decode_frame(100, &mut c).unwrap_err();
        assert!(matches!(err, CodecError::FrameOutOfRange { index: 100, frame_count: 100 }));
    }

    #[test]
    fn sequential_reads_one_payload_per_frame() {
        let frames = ramp(61, 3, 3);
        let mut store =
            MediaStore::from_bytes(encode_media(&frames, &GopConfig::fixed(30), 20.0).unwrap()).unwrap();

        let mut c = ByteCounter::default();
        let mut dec = open_sequential(&mut store, 0, &mut c).unwrap();
        for i in 0..3 {
            assert_eq!(dec.next(&mut c).unwrap(), frames[i]);
        }
        assert_eq!(c.frames_decoded, 3);

        let mut c = ByteCounter::default();
        let mut dec = open_sequential(&mut store, 29, &mut c).unwrap();
        let primed = c.frames_decoded;
        assert_eq!(primed, 29);
        assert_eq!(dec.next(&mut c).unwrap(), frames[29]);
        assert_eq!(dec.next(&mut c).unwrap(), frames[30]);
        assert_eq!(c.frames_decoded - primed, 2);
        assert_eq!(c.seeks, 1);

        let mut c = ByteCounter::default();
        let mut dec = open_sequential(&mut store, 60, &mut c).unwrap();
        assert_eq!(dec.next(&mut c).unwrap(), frames[60]);
        assert!(matches!(dec.next(&mut c), Err(CodecError::EndOfStream)));
    }

    #[test]
    fn corrupt_payload_is_reported() {
        let frames = ramp(3, 4, 4);
        let mut bytes = encode_media(&frames, &GopConfig::fixed(30), 20.0).unwrap();
        let store = MediaStore::from_bytes(bytes.clone()).unwrap();
        let off = store.header().frame_offsets[1] as usize;
        // Lengthen the first run of frame 1 so the payload overflows.
        bytes[off + 5] = 0x7F;
        let mut store = MediaStore::from_bytes(bytes).unwrap();
        let err = store.decode_frame(1, &mut ByteCounter::default()).unwrap_err();
        assert!(matches!(err, CodecError::CorruptFrame { index: 1, .. }));
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(
            MediaStore::from_bytes(b"NOPE0000000000".to_vec()),
            Err(CodecError::BadMagic)
        ));
        assert!(matches!(MediaStore::from_bytes(vec![]), Err(CodecError::BadMagic)));
    }

    #[test]
    fn header_roundtrip() {
        let cfg = GopConfig::variable(9);
        let store =
            MediaStore::from_bytes(encode_media(&ramp(40, 7, 2), &cfg, 12.5).unwrap()).unwrap();
        let h = store.header();
        assert_eq!((h.width, h.height, h.fps, h.frame_count, h.gop), (7, 2, 12.5, 40, cfg));
        assert_eq!(store.header_bytes(), 4 + 2 + 2 + 4 + 4 + 1 + 16 + 8 * 40);
    }
}
