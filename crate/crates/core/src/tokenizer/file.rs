//! Plain-text token files.
//!
//! ```text
//! #deskcap-tokens 1
//! #episode <id>
//! #img_tokens 256
//! #meta <key>\t<value>
//! #screen ext\t<uri>\t<media frame or ->\t<frame index>
//! <EVENT_START><KEYBOARD>...<EVENT_END>
//! ```
//!
//! Header lines come first, then one event per line. The `#screen` lines
//! carry the media reference of each screen event in stream order.

use std::collections::BTreeMap;

use super::{decode_stream, encode_stream, parse_tokens, tokens_to_text, ScreenRef, TokenizerConfig, TokenizerError};
use crate::container::{MediaRef, MediaSource};
use crate::events::Episode;

pub const TOKEN_FILE_MAGIC: &str = "#deskcap-tokens 1";

type Result<T> = std::result::Result<T, TokenizerError>;

fn bad(line: usize, reason: impl Into<String>) -> TokenizerError {
    TokenizerError::TokenFile {
        line,
        reason: reason.into(),
    }
}

fn check_field(what: &str, s: &str) -> Result<()> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(TokenizerError::InvalidEvent(format!(
            "{what} `{}` contains a tab or line break",
            s.escape_debug()
        )));
    }
    Ok(())
}

/// Renders an episode as a token file.
pub fn write_token_file(ep: &Episode, cfg: &TokenizerConfig) -> Result<String> {
    let stream = encode_stream(ep, cfg)?;
    check_field("episode id", &ep.id)?;
    let mut out = String::new();
    out.push_str(TOKEN_FILE_MAGIC);
    out.push('\n');
    out.push_str(&format!("#episode {}\n", ep.id));
    out.push_str(&format!("#img_tokens {}\n", cfg.img_token_count));
    for (k, v) in &ep.meta {
        check_field("meta key", k)?;
        check_field("meta value", v)?;
        out.push_str(&format!("#meta {k}\t{v}\n"));
    }
    for s in &stream.screens {
        let (kind, value) = match &s.media.source {
            MediaSource::External(uri) => {
                check_field("media uri", uri)?;
                ("ext", uri.clone())
            }
            MediaSource::Embedded(h) => ("emb", h.to_string()),
        };
        let media_frame = s.media.frame_index.map_or("-".to_string(), |i| i.to_string());
        out.push_str(&format!("#screen {kind}\t{value}\t{media_frame}\t{}\n", s.frame_index));
    }
    for span in &stream.spans {
        out.push_str(&tokens_to_text(&stream.tokens[span.clone()]));
        out.push('\n');
    }
    Ok(out)
}

fn parse_screen(line: usize, rest: &str) -> Result<ScreenRef> {
    let fields: Vec<&str> = rest.split('\t').collect();
    let [kind, value, media_frame, frame] = fields[..] else {
        return Err(bad(line, "expected 4 tab-separated screen fields"));
    };
    let source = match kind {
        "ext" => MediaSource::External(value.to_string()),
        "emb" => MediaSource::Embedded(value.parse().map_err(|_| bad(line, "bad embedded handle"))?),
        _ => return Err(bad(line, format!("unknown media kind `{kind}`"))),
    };
    let media_frame = match media_frame {
        "-" => None,
        s => Some(s.parse().map_err(|_| bad(line, "bad media frame"))?),
    };
    Ok(ScreenRef {
        media: MediaRef { source, frame_index: media_frame },
        frame_index: frame.parse().map_err(|_| bad(line, "bad frame index"))?,
    })
}

/// Parses a token file back into an episode. The tokenizer config's image
/// token count is taken from the file.
pub fn read_token_file(text: &str, cfg: &TokenizerConfig) -> Result<Episode> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == TOKEN_FILE_MAGIC => {}
        _ => return Err(bad(1, format!("expected `{TOKEN_FILE_MAGIC}`"))),
    }
    let mut cfg = cfg.clone();
    let mut id = None;
    let mut meta = BTreeMap::new();
    let mut screens = Vec::new();
    let mut tokens = Vec::new();
    for (n, line) in lines {
        if let Some(header) = line.strip_prefix('#') {
            if !tokens.is_empty() {
                return Err(bad(n, "header line after the first event"));
            }
            let (key, rest) = header.split_once(' ').unwrap_or((header, ""));
            match key {
                "episode" => id = Some(rest.to_string()),
                "img_tokens" => {
                    cfg.img_token_count = rest.parse().map_err(|_| bad(n, "bad image token count"))?
                }
                "meta" => {
                    let (k, v) = rest.split_once('\t').ok_or_else(|| bad(n, "meta needs key\\tvalue"))?;
                    meta.insert(k.to_string(), v.to_string());
                }
                "screen" => screens.push(parse_screen(n, rest)?),
                _ => return Err(bad(n, format!("unknown header `#{key}`"))),
            }
        } else {
            tokens.extend(parse_tokens(line).map_err(|e| bad(n, e))?);
        }
    }
    let events = decode_stream(&tokens, &cfg, Some(&screens))?;
    Ok(Episode {
        id: id.ok_or_else(|| bad(1, "missing #episode header"))?,
        events,
        meta,
    })
}
