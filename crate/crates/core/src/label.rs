use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four induced gait categories.
///
/// Variant order is the canonical class order used for confusion matrices,
/// one-hot encodings and tie-breaking ("lowest label code" means lowest
/// [`GaitLabel::index`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GaitLabel {
    #[serde(rename = "MN")]
    Walking,
    #[serde(rename = "MS")]
    Marching,
    #[serde(rename = "MM")]
    Limping,
    #[serde(rename = "MF")]
    Feint,
}

impl GaitLabel {
    pub const ALL: [GaitLabel; 4] = [
        GaitLabel::Walking,
        GaitLabel::Marching,
        GaitLabel::Limping,
        GaitLabel::Feint,
    ];
    pub const COUNT: usize = 4;

    pub fn code(self) -> &'static str {
        match self {
            GaitLabel::Walking => "MN",
            GaitLabel::Marching => "MS",
            GaitLabel::Limping => "MM",
            GaitLabel::Feint => "MF",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            GaitLabel::Walking => "walking",
            GaitLabel::Marching => "marching",
            GaitLabel::Limping => "limping",
            GaitLabel::Feint => "feint",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.code() == code)
    }

    pub fn from_display_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.display_name() == name)
    }
}

impl fmt::Display for GaitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown gait label {:?}", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for GaitLabel {
    type Err = UnknownLabel;

    /// Accepts either the two-letter code or the display name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_code(s)
            .or_else(|| Self::from_display_name(s))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}
