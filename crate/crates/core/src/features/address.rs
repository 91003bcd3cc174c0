use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::schema::FeatureName;
use crate::ingest::CrimeRecord;

/// Code used for "no value": missing address, no second street, unknown token.
pub const SENTINEL: i64 = -1;

/// Recognized street suffixes; a suffix's code is its index here.
const STREET_TYPES: [(&str, &[&str]); 16] = [
    ("ST", &["ST", "STREET"]),
    ("AVE", &["AVE", "AV", "AVENUE"]),
    ("BLVD", &["BLVD", "BLV", "BOULEVARD"]),
    ("RD", &["RD", "ROAD"]),
    ("DR", &["DR", "DRIVE"]),
    ("LN", &["LN", "LANE"]),
    ("PL", &["PL", "PLACE"]),
    ("CT", &["CT", "COURT"]),
    ("TER", &["TER", "TERRACE"]),
    ("WAY", &["WAY"]),
    ("PKWY", &["PKWY", "PARKWAY"]),
    ("HWY", &["HWY", "HIGHWAY"]),
    ("PIKE", &["PIKE"]),
    ("SQ", &["SQ", "SQUARE"]),
    ("CIR", &["CIR", "CIRCLE"]),
    ("EXPY", &["EXPY", "EXPRESSWAY"]),
];

pub fn street_type_code(token: &str) -> i64 {
    let token = token.to_ascii_uppercase();
    STREET_TYPES
        .iter()
        .position(|(_, spellings)| spellings.contains(&token.as_str()))
        .map_or(SENTINEL, |i| i as i64)
}

/// Structural reading of a free-text address.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedAddress {
    pub street1: Option<String>,
    pub street2: Option<String>,
    pub is_intersection: bool,
    pub is_block: bool,
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_uppercase()
}

fn non_empty(s: String) -> Option<String> {
    (!s.is_empty()).then_some(s)
}

pub fn parse_address(address: &str) -> ParsedAddress {
    let text = normalize(address);
    if let Some((left, right)) = text.split_once('/') {
        let (left, right) = (normalize(left), normalize(right));
        if !left.is_empty() && !right.is_empty() {
            return ParsedAddress {
                street1: Some(left),
                street2: Some(right),
                is_intersection: true,
                is_block: false,
            };
        }
    }
    let tokens: Vec<&str> = text.split(' ').filter(|t| !t.is_empty()).collect();
    let numeric = |t: &str| !t.is_empty() && t.chars().all(|c| c.is_ascii_digit());
    if tokens.len() >= 3 && numeric(tokens[0]) && tokens[1] == "BLOCK" {
        return ParsedAddress {
            street1: non_empty(tokens[2..].join(" ")),
            is_block: true,
            ..Default::default()
        };
    }
    let street = if tokens.len() >= 2 && numeric(tokens[0]) {
        tokens[1..].join(" ")
    } else {
        tokens.join(" ")
    };
    ParsedAddress {
        street1: non_empty(street),
        ..Default::default()
    }
}

/// Street names seen in training, coded by their sorted position.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreetVocabulary {
    streets: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, i64>,
}

impl StreetVocabulary {
    pub fn fit(train: &[CrimeRecord]) -> Self {
        let mut names = std::collections::BTreeSet::new();
        for parsed in train.iter().filter_map(|r| r.address().map(parse_address)) {
            names.extend(parsed.street1);
            names.extend(parsed.street2);
        }
        Self::from_streets(names.into_iter().collect())
    }

    pub fn from_streets(mut streets: Vec<String>) -> Self {
        streets.sort();
        streets.dedup();
        let index = streets
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as i64))
            .collect();
        Self { streets, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindexed(self) -> Self {
        Self::from_streets(self.streets)
    }

    pub fn code(&self, street: &str) -> i64 {
        self.index.get(street).copied().unwrap_or(SENTINEL)
    }

    pub fn len(&self) -> usize {
        self.streets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AddressFeatures {
    pub street1: i64,
    pub street2: i64,
    pub is_intersection: bool,
    pub is_block: bool,
    pub street_type: i64,
    pub district: i64,
}

impl AddressFeatures {
    pub fn value(&self, name: FeatureName) -> Option<f64> {
        use FeatureName::*;
        let v = match name {
            Street1 => self.street1 as f64,
            Street2 => self.street2 as f64,
            IsIntersection => f64::from(u8::from(self.is_intersection)),
            IsBlock => f64::from(u8::from(self.is_block)),
            StreetType => self.street_type as f64,
            PdDistrictNum => self.district as f64,
            _ => return None,
        };
        Some(v)
    }
}

pub fn address_features(record: &CrimeRecord, vocabulary: &StreetVocabulary) -> AddressFeatures {
    let parsed = record.address().map(parse_address).unwrap_or_default();
    let street_type = parsed
        .street1
        .as_deref()
        .and_then(|s| s.rsplit(' ').next())
        .map_or(SENTINEL, street_type_code);
    AddressFeatures {
        street1: parsed
            .street1
            .as_deref()
            .map_or(SENTINEL, |s| vocabulary.code(s)),
        street2: parsed
            .street2
            .as_deref()
            .map_or(SENTINEL, |s| vocabulary.code(s)),
        is_intersection: parsed.is_intersection,
        is_block: parsed.is_block,
        street_type,
        district: record.district().unwrap_or(SENTINEL),
    }
}
