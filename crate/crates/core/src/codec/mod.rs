//! A small lossless GOP-structured media store.
//!
//! Keyframes (I) hold a run-length coded frame; every other frame (P) holds
//! the run-length coded XOR against the previous decoded frame. There are no
//! bidirectional frames, so payloads always decode in presentation order and
//! reaching frame `i` costs exactly the records from the keyframe before `i`.

mod gop;
pub mod rle;
mod store;

use std::io;

use thiserror::Error;

pub use gop::{gop_layout, keyframe_before, GopConfig, DEFAULT_GOP_INTERVAL};
pub use store::{
    encode_media, open_sequential, write_media, FrameKind, MediaHeader, MediaStore,
    SequentialDecoder, MEDIA_MAGIC, RECORD_HEADER_LEN,
};

/// An 8-bit grayscale frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub width: u16,
    pub height: u16,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: u16, height: u16, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize);
        Frame {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: u16, height: u16, value: u8) -> Self {
        Frame::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn byte_len(&self) -> usize {
        self.pixels.len()
    }
}

/// Read-side instrumentation shared by every access path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ByteCounter {
    pub bytes_read: u64,
    pub frames_decoded: u64,
    pub seeks: u64,
}

impl std::ops::AddAssign for ByteCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.bytes_read += rhs.bytes_read;
        self.frames_decoded += rhs.frames_decoded;
        self.seeks += rhs.seeks;
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a media store (bad magic)")]
    BadMagic,
    #[error("frame {index} out of range (frame count {frame_count})")]
    FrameOutOfRange { index: u64, frame_count: u64 },
    #[error("corrupt frame {index}: {reason}")]
    CorruptFrame { index: u64, reason: String },
    #[error("end of stream")]
    EndOfStream,
    #[error("frame {index} is {got:?}, expected {expected:?}")]
    DimensionMismatch {
        index: usize,
        got: (u16, u16),
        expected: (u16, u16),
    },
    #[error("invalid gop config: {0}")]
    InvalidGop(String),
}
