use std::fmt;
use std::io;
use std::process::ExitCode;

use deskcap::codec::CodecError;
use deskcap::container::ContainerError;
use deskcap::decode_engine::DecodeError;
use deskcap::events::EventError;
use deskcap::fsl::FslError;
use deskcap::metrics::MetricsError;
use deskcap::tokenizer::TokenizerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> ExitCode {
        ExitCode::from(match self {
            Kind::Usage => 2,
            Kind::Data => 3,
            Kind::Io => 4,
        })
    }
}

/// A failure reported as `error[<class>]: <message>` on one line.
#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub class: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, class: &'static str, message: impl fmt::Display) -> Self {
        CliError {
            kind,
            class,
            message: message.to_string(),
        }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        CliError::new(Kind::Usage, "usage", message)
    }

    pub fn data(class: &'static str, message: impl fmt::Display) -> Self {
        CliError::new(Kind::Data, class, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.replace(['\n', '\r'], " ");
        write!(f, "error[{}]: {one_line}", self.class)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::new(Kind::Io, "io", e)
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        let class = match &e {
            CodecError::Io(_) => return CliError::new(Kind::Io, "io", e),
            CodecError::BadMagic => "codec.bad_magic",
            CodecError::FrameOutOfRange { .. } => "codec.frame_out_of_range",
            CodecError::CorruptFrame { .. } => "codec.corrupt_frame",
            CodecError::EndOfStream => "codec.end_of_stream",
            CodecError::DimensionMismatch { .. } => "codec.dimension_mismatch",
            CodecError::InvalidGop(_) => return CliError::new(Kind::Usage, "codec.invalid_gop", e),
        };
        CliError::data(class, e)
    }
}

impl From<ContainerError> for CliError {
    fn from(e: ContainerError) -> Self {
        let class = match e {
            ContainerError::Io(_) => return CliError::new(Kind::Io, "io", e),
            ContainerError::MediaMissing(_) => return CliError::new(Kind::Io, "container.media_missing", e),
            ContainerError::Codec(inner) => return inner.into(),
            ContainerError::NotAContainer => "container.not_a_container",
            ContainerError::NoFooter => "container.no_footer",
            ContainerError::CorruptChunk { .. } => "container.corrupt_chunk",
            ContainerError::FrameOutOfRange { .. } => "container.frame_out_of_range",
            ContainerError::UnsupportedSchema { .. } => "container.unsupported_schema",
            ContainerError::OutOfOrder { .. } => "container.out_of_order",
            ContainerError::Malformed(_) => "container.malformed",
        };
        CliError::data(class, e)
    }
}

impl From<TokenizerError> for CliError {
    fn from(e: TokenizerError) -> Self {
        let class = match &e {
            TokenizerError::OutOfRange { .. } => "tokenizer.out_of_range",
            TokenizerError::InvalidEvent(_) => "tokenizer.invalid_event",
            TokenizerError::MalformedEvent { .. } => "tokenizer.malformed_event",
            TokenizerError::GapTooLarge { .. } => "tokenizer.gap_too_large",
            TokenizerError::OutOfOrder { .. } => "tokenizer.out_of_order",
            TokenizerError::InvalidConfig(_) => return CliError::new(Kind::Usage, "tokenizer.invalid_config", e),
            TokenizerError::SidecarMismatch { .. } => "tokenizer.sidecar_mismatch",
            TokenizerError::TokenFile { .. } => "tokenizer.token_file",
        };
        CliError::data(class, e)
    }
}

impl From<FslError> for CliError {
    fn from(e: FslError) -> Self {
        let class = match e {
            FslError::Tokenizer(inner) => return inner.into(),
            FslError::Io(_) => return CliError::new(Kind::Io, "io", e),
            FslError::InvalidConfig(_) => return CliError::new(Kind::Usage, "fsl.invalid_config", e),
            FslError::EventTooLarge { .. } => "fsl.event_too_large",
            FslError::Manifest { .. } => "fsl.manifest",
        };
        CliError::data(class, e)
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Codec(inner) => inner.into(),
            DecodeError::Fsl(inner) => inner.into(),
            DecodeError::Io(inner) => inner.into(),
            DecodeError::InvalidPlan(_) => CliError::data("decode.invalid_plan", e),
            DecodeError::Unsupported(_) => CliError::data("decode.unsupported", e),
        }
    }
}

impl From<EventError> for CliError {
    fn from(e: EventError) -> Self {
        CliError::data("events.invalid_event", e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::data("metrics.length_mismatch", e)
    }
}
