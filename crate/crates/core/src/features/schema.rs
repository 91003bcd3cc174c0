use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A named feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureName {
    HourZone,
    Hour,
    Minute,
    Day,
    Month,
    Year,
    DayOfWeekNum,
    WeekOfYear,
    IsWeekend,
    Season,
    X,
    Y,
    Radius,
    Angle,
    Rot30X,
    Rot30Y,
    Rot45X,
    Rot45Y,
    Rot60X,
    Rot60Y,
    Street1,
    Street2,
    IsIntersection,
    IsBlock,
    StreetType,
    PdDistrictNum,
    NearestClusterDistance,
    /// Distance to the i-th stacked cluster center.
    CenterDistance(u16),
    /// i-th principal component score.
    Component(u16),
}

use FeatureName::*;

const FIXED: [FeatureName; 27] = [
    HourZone,
    Hour,
    Minute,
    Day,
    Month,
    Year,
    DayOfWeekNum,
    WeekOfYear,
    IsWeekend,
    Season,
    X,
    Y,
    Radius,
    Angle,
    Rot30X,
    Rot30Y,
    Rot45X,
    Rot45Y,
    Rot60X,
    Rot60Y,
    Street1,
    Street2,
    IsIntersection,
    IsBlock,
    StreetType,
    PdDistrictNum,
    NearestClusterDistance,
];

impl FeatureName {
    pub fn as_str(&self) -> std::borrow::Cow<'static, str> {
        let s = match self {
            HourZone => "HourZone",
            Hour => "Hour",
            Minute => "Minute",
            Day => "Day",
            Month => "Month",
            Year => "Year",
            DayOfWeekNum => "DayOfWeekNum",
            WeekOfYear => "WeekOfYear",
            IsWeekend => "IsWeekend",
            Season => "Season",
            X => "X",
            Y => "Y",
            Radius => "Radius",
            Angle => "Angle",
            Rot30X => "Rot30X",
            Rot30Y => "Rot30Y",
            Rot45X => "Rot45X",
            Rot45Y => "Rot45Y",
            Rot60X => "Rot60X",
            Rot60Y => "Rot60Y",
            Street1 => "Street1",
            Street2 => "Street2",
            IsIntersection => "IsIntersection",
            IsBlock => "IsBlock",
            StreetType => "StreetType",
            PdDistrictNum => "PdDistrictNum",
            NearestClusterDistance => "NearestClusterDistance",
            CenterDistance(i) => return format!("CenterDistance{i}").into(),
            Component(i) => return format!("PC{i}").into(),
        };
        s.into()
    }

    pub fn is_temporal(&self) -> bool {
        matches!(
            self,
            HourZone | Hour | Minute | Day | Month | Year | DayOfWeekNum | WeekOfYear | IsWeekend
                | Season
        )
    }

    pub fn is_spatial(&self) -> bool {
        matches!(
            self,
            X | Y | Radius | Angle | Rot30X | Rot30Y | Rot45X | Rot45Y | Rot60X | Rot60Y
        )
    }

    pub fn is_address(&self) -> bool {
        matches!(
            self,
            Street1 | Street2 | IsIntersection | IsBlock | StreetType | PdDistrictNum
        )
    }

    pub fn is_cluster_distance(&self) -> bool {
        matches!(self, NearestClusterDistance | CenterDistance(_))
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

impl FromStr for FeatureName {
    type Err = Error;

    /// Accepts canonical names plus spaced or underscored spellings such as "Hour Zone".
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        if let Some(name) = FIXED
            .iter()
            .find(|n| n.as_str().to_ascii_lowercase() == compact)
        {
            return Ok(*name);
        }
        let indexed = |prefix: &str| {
            compact
                .strip_prefix(prefix)
                .and_then(|rest| rest.parse::<u16>().ok())
        };
        if let Some(i) = indexed("centerdistance") {
            return Ok(CenterDistance(i));
        }
        if let Some(i) = indexed("pc") {
            return Ok(Component(i));
        }
        Err(Error::Schema(format!("unknown feature name {s:?}")))
    }
}

impl Serialize for FeatureName {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_str())
    }
}

impl<'de> Deserialize<'de> for FeatureName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered, duplicate-free list of feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureSchema(Vec<FeatureName>);

impl FeatureSchema {
    pub fn new(names: Vec<FeatureName>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for name in &names {
            if !seen.insert(*name) {
                return Err(Error::Schema(format!("duplicate feature {name}")));
            }
        }
        Ok(Self(names))
    }

    /// The 26 ranked base features, without cluster distances.
    pub fn base() -> Self {
        Self(FIXED[..26].to_vec())
    }

    /// Base features plus `NearestClusterDistance`.
    pub fn full() -> Self {
        Self(FIXED.to_vec())
    }

    pub fn names(&self) -> &[FeatureName] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, name: FeatureName) -> Option<usize> {
        self.0.iter().position(|n| *n == name)
    }

    pub fn contains(&self, name: FeatureName) -> bool {
        self.position(name).is_some()
    }

    /// Hex SHA-256 of the comma-joined column names.
    pub fn fingerprint(&self) -> String {
        let joined = self
            .0
            .iter()
            .map(|n| n.as_str().into_owned())
            .collect::<Vec<_>>()
            .join(",");
        hex::encode(Sha256::digest(joined.as_bytes()))
    }
}

impl<'de> Deserialize<'de> for FeatureSchema {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<FeatureName>::deserialize(deserializer)?;
        FeatureSchema::new(names).map_err(serde::de::Error::custom)
    }
}
