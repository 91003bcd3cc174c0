//! The 33 incident categories and their integer encoding.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const NAMES: [&str; 33] = [
    "Aggravated Assault Firearm",
    "Aggravated Assault No Firearm",
    "All Other Offenses",
    "Arson",
    "Burglary Non-Residential",
    "Burglary Residential",
    "Driving Under Influence",
    "Disorderly Conduct",
    "Embezzlement",
    "Forgery and Counterfeiting",
    "Fraud",
    "Gambling Violations",
    "Homicide - Criminal",
    "Homicide - Gross Negligence",
    "Homicide - Justifiable",
    "Liquor Law Violations",
    "Motor Vehicle Theft",
    "Narcotic / Drug Law Violations",
    "Offenses Against Family and Children",
    "Other Assaults",
    "Other Sex Offenses (Not Commercialized)",
    "Prostitution and Commercialized Vice",
    "Public Drunkenness",
    "Rape",
    "Receiving Stolen Property",
    "Recovered Stolen Motor Vehicle",
    "Robbery Firearm",
    "Robbery No Firearm",
    "Theft from Vehicle",
    "Thefts",
    "Vagrancy/Loitering",
    "Vandalism/Criminal Mischief",
    "Weapon Violations",
];

/// An incident category, stored as its index in the canonical label table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassLabel(u8);

impl ClassLabel {
    pub const COUNT: usize = NAMES.len();

    pub fn from_index(index: usize) -> Result<Self> {
        if index < Self::COUNT {
            Ok(ClassLabel(index as u8))
        } else {
            Err(Error::UnknownLabel(format!("index {index}")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        NAMES[self.0 as usize]
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..Self::COUNT as u8).map(ClassLabel)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Match `name` against the canonical table, ignoring case and runs of whitespace.
pub fn encode_label(name: &str) -> Result<ClassLabel> {
    let wanted = normalize(name);
    NAMES
        .iter()
        .position(|candidate| normalize(candidate) == wanted)
        .map(|i| ClassLabel(i as u8))
        .ok_or_else(|| Error::UnknownLabel(name.to_string()))
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let index = usize::deserialize(deserializer)?;
        ClassLabel::from_index(index).map_err(serde::de::Error::custom)
    }
}
