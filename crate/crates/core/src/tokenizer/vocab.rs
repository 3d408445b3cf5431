//! The closed event-token vocabulary and its text and integer forms.

use std::fmt;
use std::str::FromStr;

/// One symbol of the event vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    EventStart,
    EventEnd,
    Keyboard,
    Mouse,
    Screen,
    /// `<0>` … `<9>`
    Digit(u8),
    SignPlus,
    SignMinus,
    /// `<MB_0>` … `<MB_15>`: one hex digit of the mouse button flags.
    MouseButton(u8),
    /// `<VK_0>` … `<VK_255>`
    VirtualKey(u8),
    Press,
    Release,
    ImgContext,
    Pad,
}

const DIGIT_BASE: u32 = 5;
const SIGN_BASE: u32 = DIGIT_BASE + 10;
const MB_BASE: u32 = SIGN_BASE + 2;
const VK_BASE: u32 = MB_BASE + 16;
const PRESS_ID: u32 = VK_BASE + 256;

/// Number of symbols in the vocabulary.
pub const VOCAB_SIZE: u32 = PRESS_ID + 4;

impl Token {
    pub fn id(self) -> u32 {
        match self {
            Token::EventStart => 0,
            Token::EventEnd => 1,
            Token::Keyboard => 2,
            Token::Mouse => 3,
            Token::Screen => 4,
            Token::Digit(d) => DIGIT_BASE + d as u32,
            Token::SignPlus => SIGN_BASE,
            Token::SignMinus => SIGN_BASE + 1,
            Token::MouseButton(h) => MB_BASE + h as u32,
            Token::VirtualKey(vk) => VK_BASE + vk as u32,
            Token::Press => PRESS_ID,
            Token::Release => PRESS_ID + 1,
            Token::ImgContext => PRESS_ID + 2,
            Token::Pad => PRESS_ID + 3,
        }
    }

    pub fn from_id(id: u32) -> Option<Token> {
        Some(match id {
            0 => Token::EventStart,
            1 => Token::EventEnd,
            2 => Token::Keyboard,
            3 => Token::Mouse,
            4 => Token::Screen,
            i if (DIGIT_BASE..SIGN_BASE).contains(&i) => Token::Digit((i - DIGIT_BASE) as u8),
            i if i == SIGN_BASE => Token::SignPlus,
            i if i == SIGN_BASE + 1 => Token::SignMinus,
            i if (MB_BASE..VK_BASE).contains(&i) => Token::MouseButton((i - MB_BASE) as u8),
            i if (VK_BASE..PRESS_ID).contains(&i) => Token::VirtualKey((i - VK_BASE) as u8),
            i if i == PRESS_ID => Token::Press,
            i if i == PRESS_ID + 1 => Token::Release,
            i if i == PRESS_ID + 2 => Token::ImgContext,
            i if i == PRESS_ID + 3 => Token::Pad,
            _ => return None,
        })
    }

    /// Every symbol in id order.
    pub fn all() -> impl Iterator<Item = Token> {
        (0..VOCAB_SIZE).map(|i| Token::from_id(i).expect("dense ids"))
    }

    /// Symbol name without angle brackets.
    pub fn name(self) -> String {
        match self {
            Token::EventStart => "EVENT_START".into(),
            Token::EventEnd => "EVENT_END".into(),
            Token::Keyboard => "KEYBOARD".into(),
            Token::Mouse => "MOUSE".into(),
            Token::Screen => "SCREEN".into(),
            Token::Digit(d) => d.to_string(),
            Token::SignPlus => "SIGN_PLUS".into(),
            Token::SignMinus => "SIGN_MINUS".into(),
            Token::MouseButton(h) => format!("MB_{h}"),
            Token::VirtualKey(vk) => format!("VK_{vk}"),
            Token::Press => "press".into(),
            Token::Release => "release".into(),
            Token::ImgContext => "IMG_CONTEXT".into(),
            Token::Pad => "PAD".into(),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.name())
    }
}

impl FromStr for Token {
    type Err = String;

    /// Parses a symbol with or without its angle brackets.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s
            .strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .unwrap_or(s);
        let bounded = |rest: &str, max: u32| -> Option<u8> {
            let v: u32 = rest.parse().ok()?;
            (v <= max && rest == v.to_string()).then_some(v as u8)
        };
        let tok = match name {
            "EVENT_START" => Token::EventStart,
            "EVENT_END" => Token::EventEnd,
            "KEYBOARD" => Token::Keyboard,
            "MOUSE" => Token::Mouse,
            "SCREEN" => Token::Screen,
            "SIGN_PLUS" => Token::SignPlus,
            "SIGN_MINUS" => Token::SignMinus,
            "press" => Token::Press,
            "release" => Token::Release,
            "IMG_CONTEXT" => Token::ImgContext,
            "PAD" => Token::Pad,
            n if n.len() == 1 && n.as_bytes()[0].is_ascii_digit() => {
                Token::Digit(n.as_bytes()[0] - b'0')
            }
            n => {
                if let Some(v) = n.strip_prefix("MB_").and_then(|r| bounded(r, 15)) {
                    Token::MouseButton(v)
                } else if let Some(v) = n.strip_prefix("VK_").and_then(|r| bounded(r, 255)) {
                    Token::VirtualKey(v)
                } else {
                    return Err(format!("unknown token `{s}`"));
                }
            }
        };
        Ok(tok)
    }
}

/// Renders tokens in the bracketed text form with no separators.
pub fn tokens_to_text(tokens: &[Token]) -> String {
    tokens.iter().map(ToString::to_string).collect()
}

/// Parses the bracketed text form. Whitespace between tokens is ignored.
pub fn parse_tokens(text: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        if !rest.starts_with('<') {
            return Err(format!("expected `<` at `{}`", rest.chars().take(16).collect::<String>()));
        }
        let end = rest
            .find('>')
            .ok_or_else(|| "unterminated token".to_string())?;
        out.push(rest[..=end].parse()?);
        rest = rest[end + 1..].trim_start();
    }
    Ok(out)
}

pub fn tokens_to_ids(tokens: &[Token]) -> Vec<u32> {
    tokens.iter().map(|t| t.id()).collect()
}

pub fn ids_to_tokens(ids: &[u32]) -> Result<Vec<Token>, u32> {
    ids.iter().map(|&i| Token::from_id(i).ok_or(i)).collect()
}

/// Deterministic `symbol<TAB>id` listing of the whole vocabulary.
pub fn vocabulary_manifest() -> String {
    Token::all()
        .map(|t| format!("{t}\t{}\n", t.id()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn vocabulary_is_dense_and_closed() {
        assert_eq!(VOCAB_SIZE, 293);
        let tokens: Vec<Token> = Token::all().collect();
        assert_eq!(tokens.len(), 293);
        let ids: HashSet<u32> = tokens.iter().map(|t| t.id()).collect();
        assert_eq!(ids.len(), 293);
        let names: HashSet<String> = tokens.iter().map(|t| t.name()).collect();
        assert_eq!(names.len(), 293);
        for t in tokens {
            assert_eq!(Token::from_id(t.id()), Some(t));
            assert_eq!(t.to_string().parse::<Token>(), Ok(t));
        }
        assert_eq!(Token::from_id(293), None);
    }

    #[test]
    fn rejects_unknown_symbols() {
        for bad in ["<VK_256>", "<MB_16>", "<VK_01>", "<10>", "<FOO>", "</EVENT_END>"] {
            assert!(bad.parse::<Token>().is_err(), "{bad}");
        }
    }

    #[test]
    fn text_roundtrip() {
        let text = "<EVENT_START><KEYBOARD><2><0><0><VK_32><release><EVENT_END>";
        let tokens = parse_tokens(text).unwrap();
        assert_eq!(tokens.len(), 8);
        assert_eq!(tokens_to_text(&tokens), text);
        assert_eq!(parse_tokens("<PAD>\n <PAD>").unwrap(), [Token::Pad, Token::Pad]);
        assert!(parse_tokens("<PAD").is_err());
        assert!(parse_tokens("x<PAD>").is_err());
    }

    #[test]
    fn manifest_is_deterministic() {
        let m = vocabulary_manifest();
        assert_eq!(m, vocabulary_manifest());
        assert_eq!(m.lines().count(), 293);
        assert!(m.starts_with("<EVENT_START>\t0\n<EVENT_END>\t1\n"));
        assert!(m.ends_with("<PAD>\t292\n"));
    }
}
