use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Drop height on the 0.1 cm grid.
///
/// Stored as integer tenths of a centimetre so repeated 0.2 cm steps never
/// accumulate float drift. Serialized as a plain number of centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Height(i64);

/// How far (in tenths) an input may sit from the grid and still snap to it.
const GRID_TOLERANCE: f64 = 1e-6;

impl Height {
    pub const fn from_tenths(tenths: i64) -> Self {
        Self(tenths)
    }

    pub fn from_cm(cm: f64) -> Result<Self> {
        if !cm.is_finite() {
            return Err(Error::invalid("height must be finite"));
        }
        let tenths = cm * 10.0;
        let snapped = tenths.round();
        if (tenths - snapped).abs() > GRID_TOLERANCE {
            return Err(Error::invalid(format!(
                "height {cm} cm is not on the 0.1 cm grid"
            )));
        }
        Ok(Self(snapped as i64))
    }

    pub const fn tenths(self) -> i64 {
        self.0
    }

    pub fn cm(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub(crate) fn offset(self, tenths: i64) -> Self {
        Self(self.0 + tenths)
    }
}

impl fmt::Display for Height {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0.div_euclid(10), self.0.rem_euclid(10))
    }
}

impl Serialize for Height {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.cm())
    }
}

impl<'de> Deserialize<'de> for Height {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let cm = f64::deserialize(deserializer)?;
        Height::from_cm(cm).map_err(serde::de::Error::custom)
    }
}
