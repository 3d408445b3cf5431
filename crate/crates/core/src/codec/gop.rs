use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CodecError;

pub const DEFAULT_GOP_INTERVAL: u32 = 30;
const DEFAULT_VARIABLE_MIN: u32 = 27;
const DEFAULT_VARIABLE_MAX: u32 = 250;

/// Keyframe placement policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GopConfig {
    /// A keyframe every `interval` frames.
    Fixed { interval: u32 },
    /// Keyframe gaps drawn uniformly from `[min_frames, max_frames]`.
    Variable {
        seed: u64,
        min_frames: u32,
        max_frames: u32,
    },
}

impl Default for GopConfig {
    fn default() -> Self {
        GopConfig::Fixed {
            interval: DEFAULT_GOP_INTERVAL,
        }
    }
}

impl GopConfig {
    pub fn fixed(interval: u32) -> Self {
        GopConfig::Fixed { interval }
    }

    /// Variable GOP with the default 27..=250 frame gap range.
    pub fn variable(seed: u64) -> Self {
        GopConfig::Variable {
            seed,
            min_frames: DEFAULT_VARIABLE_MIN,
            max_frames: DEFAULT_VARIABLE_MAX,
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        match *self {
            GopConfig::Fixed { interval } if interval == 0 => {
                Err(CodecError::InvalidGop("fixed interval must be ≥ 1".into()))
            }
            GopConfig::Variable {
                min_frames,
                max_frames,
                ..
            } if min_frames == 0 || min_frames > max_frames => Err(CodecError::InvalidGop(
                format!("variable bounds {min_frames}..{max_frames} violate 1 ≤ min ≤ max"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for GopConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GopConfig::Fixed { interval } => write!(f, "fixed:{interval}"),
            GopConfig::Variable {
                seed,
                min_frames,
                max_frames,
            } if min_frames == DEFAULT_VARIABLE_MIN && max_frames == DEFAULT_VARIABLE_MAX => {
                write!(f, "variable:{seed}")
            }
            GopConfig::Variable {
                seed,
                min_frames,
                max_frames,
            } => write!(f, "variable:{seed}:{min_frames}:{max_frames}"),
        }
    }
}

/// Parses `fixed:N`, `variable:SEED` or `variable:SEED:MIN:MAX`.
impl FromStr for GopConfig {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::InvalidGop(format!("cannot parse `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<u64>().map_err(|_| bad());
        let cfg = match parts.as_slice() {
            ["fixed", n] => GopConfig::fixed(u32::try_from(num(n)?).map_err(|_| bad())?),
            ["variable", seed] => GopConfig::variable(num(seed)?),
            ["variable", seed, lo, hi] => GopConfig::Variable {
                seed: num(seed)?,
                min_frames: u32::try_from(num(lo)?).map_err(|_| bad())?,
                max_frames: u32::try_from(num(hi)?).map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sorted keyframe indices for a store of `frame_count` frames.
pub fn gop_layout(cfg: &GopConfig, frame_count: u64) -> Vec<u64> {
    match *cfg {
        GopConfig::Fixed { interval } => {
            (0..frame_count).step_by(interval.max(1) as usize).collect()
        }
        GopConfig::Variable {
            seed,
            min_frames,
            max_frames,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lo = min_frames.max(1) as u64;
            let hi = (max_frames as u64).max(lo);
            let mut keys = Vec::new();
            let mut k = 0;
            while k < frame_count {
                keys.push(k);
                k += rng.gen_range(lo..=hi);
            }
            keys
        }
    }
}

/// The last keyframe at or before `index`. `keyframes` must start at 0.
pub fn keyframe_before(keyframes: &[u64], index: u64) -> u64 {
    let pos = keyframes.partition_point(|&k| k <= index);
    keyframes[pos.saturating_sub(1)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_layout() {
        assert_eq!(gop_layout(&GopConfig::fixed(30), 61), [0, 30, 60]);
        assert_eq!(gop_layout(&GopConfig::fixed(30), 60), [0, 30]);
        assert_eq!(gop_layout(&GopConfig::fixed(1), 3), [0, 1, 2]);
    }

    #[test]
    fn empty_layout() {
        assert!(gop_layout(&GopConfig::fixed(30), 0).is_empty());
        assert!(gop_layout(&GopConfig::variable(7), 0).is_empty());
    }

    #[test]
    fn variable_layout_is_deterministic_and_bounded() {
        let cfg = GopConfig::variable(7);
        let a = gop_layout(&cfg, 1000);
        let b = gop_layout(&cfg, 1000);
        assert_eq!(a, b);
        assert_eq!(a[0], 0);
        for w in a.windows(2) {
            let gap = w[1] - w[0];
            assert!((27..=250).contains(&gap), "gap {gap}");
        }
        assert_ne!(a, gop_layout(&GopConfig::variable(8), 1000));
    }

    #[test]
    fn keyframe_lookup() {
        let keys = [0, 30, 60];
        assert_eq!(keyframe_before(&keys, 0), 0);
        assert_eq!(keyframe_before(&keys, 29), 0);
        assert_eq!(keyframe_before(&keys, 30), 30);
        assert_eq!(keyframe_before(&keys, 35), 30);
        assert_eq!(keyframe_before(&keys, 1000), 60);
    }

    #[test]
    fn parse_and_display() {
        for s in ["fixed:30", "variable:7", "variable:3:10:20"] {
            assert_eq!(s.parse::<GopConfig>().unwrap().to_string(), s);
        }
        assert!("fixed:0".parse::<GopConfig>().is_err());
        assert!("variable:1:20:10".parse::<GopConfig>().is_err());
        assert!("bogus".parse::<GopConfig>().is_err());
    }
}
