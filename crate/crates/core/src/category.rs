//! The four shot-label axes carried by cinematology inputs and label files.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotCategory {
    ShotSize,
    ShotAngle,
    ShotMotion,
    ShotType,
}

pub const CATEGORY_COUNT: usize = 4;

/// Class counts per category, in [`ShotCategory::ALL`] order: sizes
/// (extreme wide .. extreme close-up), angles (aerial, overhead, high, eye
/// level, low), motions (locked, pan, tilt, zoom, push/pull, handheld) and
/// types (single, two, three, group, insert, over-the-shoulder, establishing).
pub const DEFAULT_CARDINALITIES: [usize; CATEGORY_COUNT] = [5, 5, 6, 7];

impl ShotCategory {
    pub const ALL: [ShotCategory; CATEGORY_COUNT] = [
        ShotCategory::ShotSize,
        ShotCategory::ShotAngle,
        ShotCategory::ShotMotion,
        ShotCategory::ShotType,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ShotCategory::ShotSize => "shot_size",
            ShotCategory::ShotAngle => "shot_angle",
            ShotCategory::ShotMotion => "shot_motion",
            ShotCategory::ShotType => "shot_type",
        }
    }
}

impl fmt::Display for ShotCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShotCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShotCategory::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown shot category '{s}'"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in ShotCategory::ALL {
            assert_eq!(c.name().parse::<ShotCategory>().unwrap(), c);
        }
        assert!("shot_colour".parse::<ShotCategory>().is_err());
    }
}
