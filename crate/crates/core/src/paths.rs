//! Path labels and path configurations of the three-path interferometer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One IR spectral component, in order of decreasing wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathLabel {
    A,
    B,
    C,
}

impl PathLabel {
    pub const ALL: [PathLabel; 3] = [PathLabel::A, PathLabel::B, PathLabel::C];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> char {
        ['a', 'b', 'c'][self.index()]
    }
}

/// Subset of {a, b, c} that is switched on, stored as a bit mask over [`PathLabel::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathConfiguration(u8);

impl PathConfiguration {
    pub const EMPTY: Self = Self(0b000);
    pub const A: Self = Self(0b001);
    pub const B: Self = Self(0b010);
    pub const C: Self = Self(0b100);
    pub const AB: Self = Self(0b011);
    pub const AC: Self = Self(0b101);
    pub const BC: Self = Self(0b110);
    pub const ABC: Self = Self(0b111);

    /// Canonical ordering used for every table, histogram and file column.
    pub const ALL: [Self; 8] = [
        Self::EMPTY,
        Self::A,
        Self::B,
        Self::C,
        Self::AB,
        Self::AC,
        Self::BC,
        Self::ABC,
    ];

    const NAMES: [&'static str; 8] = ["0", "a", "b", "c", "ab", "ac", "bc", "abc"];

    pub fn from_mask(mask: u8) -> Result<Self> {
        if mask < 8 {
            Ok(Self(mask))
        } else {
            Err(Error::Domain(format!("path mask {mask:#b} has bits outside {{a,b,c}}")))
        }
    }

    pub fn from_labels(labels: &[PathLabel]) -> Self {
        Self(labels.iter().fold(0, |m, l| m | (1 << l.index())))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, label: PathLabel) -> bool {
        self.0 & (1 << label.index()) != 0
    }

    pub fn labels(self) -> impl Iterator<Item = PathLabel> {
        PathLabel::ALL.into_iter().filter(move |l| self.contains(*l))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Position in [`PathConfiguration::ALL`].
    pub fn index(self) -> usize {
        match self.0 {
            0b000 => 0,
            0b001 => 1,
            0b010 => 2,
            0b100 => 3,
            0b011 => 4,
            0b101 => 5,
            0b110 => 6,
            _ => 7,
        }
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }
}

impl fmt::Display for PathConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PathConfiguration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| Error::Domain(format!("unknown path configuration {s:?}")))
    }
}

impl Serialize for PathConfiguration {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for PathConfiguration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
