use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const NUM_CLASSES: usize = 5;

/// One of the five recognizable letters, in canonical order S < K < O < L < J.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    S,
    K,
    O,
    L,
    J,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::S, Label::K, Label::O, Label::L, Label::J];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::S => "S",
            Label::K => "K",
            Label::O => "O",
            Label::L => "L",
            Label::J => "J",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown letter {0:?}; valid letters are S, K, O, L, J")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" => Ok(Label::S),
            "K" => Ok(Label::K),
            "O" => Ok(Label::O),
            "L" => Ok(Label::L),
            "J" => Ok(Label::J),
            other => Err(ParseLabelError(other.to_string())),
        }
    }
}
