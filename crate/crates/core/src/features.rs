//! Named numeric inputs that models can draw from a record.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::EnvironmentRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    SpeedThroughWater,
    Draught,
    SeaDepth,
    SeaTemp,
    AirTemp,
    WaveHeight,
    SwellHeight,
    WaveDir,
    SwellDir,
    WindDir,
    WindSpeed,
    DaysSincePolish,
    DaysSinceDrydock,
    /// Output of the RPM model; never stored on a record.
    PredictedRpm,
}

impl Feature {
    /// Every feature stored directly on [`EnvironmentRecord`].
    pub const RECORD_FEATURES: [Feature; 13] = [
        Feature::SpeedThroughWater,
        Feature::Draught,
        Feature::SeaDepth,
        Feature::SeaTemp,
        Feature::AirTemp,
        Feature::WaveHeight,
        Feature::SwellHeight,
        Feature::WaveDir,
        Feature::SwellDir,
        Feature::WindDir,
        Feature::WindSpeed,
        Feature::DaysSincePolish,
        Feature::DaysSinceDrydock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::SpeedThroughWater => "speed_through_water",
            Feature::Draught => "draught",
            Feature::SeaDepth => "sea_depth",
            Feature::SeaTemp => "sea_temp",
            Feature::AirTemp => "air_temp",
            Feature::WaveHeight => "wave_height",
            Feature::SwellHeight => "swell_height",
            Feature::WaveDir => "wave_dir",
            Feature::SwellDir => "swell_dir",
            Feature::WindDir => "wind_dir",
            Feature::WindSpeed => "wind_speed",
            Feature::DaysSincePolish => "days_since_polish",
            Feature::DaysSinceDrydock => "days_since_drydock",
            Feature::PredictedRpm => "predicted_rpm",
        }
    }

    /// Reads the feature from a record; `None` for [`Feature::PredictedRpm`].
    pub fn from_record(self, r: &EnvironmentRecord) -> Option<f64> {
        Some(match self {
            Feature::SpeedThroughWater => r.speed_through_water,
            Feature::Draught => r.draught,
            Feature::SeaDepth => r.sea_depth,
            Feature::SeaTemp => r.sea_temp,
            Feature::AirTemp => r.air_temp,
            Feature::WaveHeight => r.wave_height,
            Feature::SwellHeight => r.swell_height,
            Feature::WaveDir => r.wave_dir,
            Feature::SwellDir => r.swell_dir,
            Feature::WindDir => r.wind_dir,
            Feature::WindSpeed => r.wind_speed,
            Feature::DaysSincePolish => r.days_since_polish,
            Feature::DaysSinceDrydock => r.days_since_drydock,
            Feature::PredictedRpm => return None,
        })
    }

    /// Reads the feature, resolving [`Feature::PredictedRpm`] from `predicted_rpm`.
    pub fn extract(self, r: &EnvironmentRecord, predicted_rpm: Option<f64>) -> Result<f64> {
        match self {
            Feature::PredictedRpm => predicted_rpm
                .ok_or_else(|| Error::Schema("predicted_rpm requires an RPM model".into())),
            f => Ok(f.from_record(r).expect("record feature")),
        }
    }

    pub fn is_direction(self) -> bool {
        matches!(
            self,
            Feature::WaveDir | Feature::SwellDir | Feature::WindDir
        )
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::RECORD_FEATURES
            .iter()
            .copied()
            .chain(std::iter::once(Feature::PredictedRpm))
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown feature `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::test_support::record;

    #[test]
    fn names_parse_back() {
        for f in Feature::RECORD_FEATURES {
            assert_eq!(f.name().parse::<Feature>().unwrap(), f);
        }
        assert_eq!(
            "predicted_rpm".parse::<Feature>().unwrap(),
            Feature::PredictedRpm
        );
        assert!("hull_speed".parse::<Feature>().is_err());
    }

    #[test]
    fn predicted_rpm_needs_a_value() {
        let r = record(12.0, 9.0);
        assert_eq!(Feature::PredictedRpm.from_record(&r), None);
        assert!(Feature::PredictedRpm.extract(&r, None).is_err());
        assert_eq!(Feature::PredictedRpm.extract(&r, Some(80.0)).unwrap(), 80.0);
        assert_eq!(Feature::Draught.extract(&r, None).unwrap(), 9.0);
    }
}
