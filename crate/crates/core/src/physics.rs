//! Empirical resistance formulas and the physical power they imply.
//!
//! Units are only fixed at the I/O boundary (knots, meters, m/s, kW). Inside the
//! formulas they are arbitrary: the fitted coefficients absorb every conversion
//! constant.

use std::f64::consts::PI;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute zero in degrees Celsius.
pub const ABSOLUTE_ZERO_C: f64 = -273.15;

/// Default exponent applied to wave height in the head-wave term.
pub const DEFAULT_WAVE_EXPONENT: f64 = 2.5;

/// One timestamped observation of the vessel and its environment.
///
/// Directions are relative to the vessel heading, in radians normalized to
/// `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentRecord {
    pub timestamp: DateTime<Utc>,
    /// Speed through water, knots.
    pub speed_through_water: f64,
    /// Draught, meters.
    pub draught: f64,
    pub sea_depth: f64,
    /// Sea temperature, deg C.
    pub sea_temp: f64,
    /// Air temperature, deg C.
    pub air_temp: f64,
    pub wave_height: f64,
    pub swell_height: f64,
    pub wave_dir: f64,
    pub swell_dir: f64,
    pub wind_dir: f64,
    /// Wind speed, m/s.
    pub wind_speed: f64,
    pub days_since_polish: f64,
    pub days_since_drydock: f64,
    /// Measured shaft RPM, when available.
    pub shaft_rpm: Option<f64>,
    /// Measured shaft power in kW, when available.
    pub shaft_power: Option<f64>,
}

impl EnvironmentRecord {
    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("speed_through_water", self.speed_through_water),
            ("draught", self.draught),
            ("sea_depth", self.sea_depth),
            ("sea_temp", self.sea_temp),
            ("air_temp", self.air_temp),
            ("wave_height", self.wave_height),
            ("swell_height", self.swell_height),
            ("wave_dir", self.wave_dir),
            ("swell_dir", self.swell_dir),
            ("wind_dir", self.wind_dir),
            ("wind_speed", self.wind_speed),
            ("days_since_polish", self.days_since_polish),
            ("days_since_drydock", self.days_since_drydock),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::Domain(format!("{name} is not finite")));
            }
        }
        for (name, value) in [
            ("wave_height", self.wave_height),
            ("swell_height", self.swell_height),
            ("wind_speed", self.wind_speed),
            ("days_since_polish", self.days_since_polish),
            ("days_since_drydock", self.days_since_drydock),
        ] {
            if value < 0.0 {
                return Err(Error::Domain(format!("{name} must be >= 0, got {value}")));
            }
        }
        if self.draught <= 0.0 {
            return Err(Error::Domain(format!(
                "draught must be > 0, got {}",
                self.draught
            )));
        }
        for (name, value) in [
            ("wave_dir", self.wave_dir),
            ("swell_dir", self.swell_dir),
            ("wind_dir", self.wind_dir),
        ] {
            if !(value > -PI && value <= PI) {
                return Err(Error::Domain(format!(
                    "{name} must lie in (-pi, pi], got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Maps an angle in radians onto `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let two_pi = 2.0 * PI;
    let wrapped = angle - two_pi * ((angle + PI) / two_pi).floor();
    // `wrapped` is in [-pi, pi); fold the lower endpoint up.
    if wrapped <= -PI {
        wrapped + two_pi
    } else {
        wrapped
    }
}

/// The seven fitted resistance coefficients plus the fixed constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientsDoc", into = "CoefficientsDoc")]
pub struct ResistanceCoefficients {
    a: f64,
    b: f64,
    c: f64,
    f_c: f64,
    f_h: f64,
    f_s: f64,
    f_g: f64,
    gamma: f64,
    water_density: f64,
}

impl ResistanceCoefficients {
    /// Builds a coefficient set with `gamma = 2.5` and unit water density.
    ///
    /// Rejects `c <= 0`, `f_g < 0`, `f_c` outside `[0, 1]` and non-finite values.
    pub fn new(a: f64, b: f64, c: f64, f_c: f64, f_h: f64, f_s: f64, f_g: f64) -> Result<Self> {
        let coeffs = Self {
            a,
            b,
            c,
            f_c,
            f_h,
            f_s,
            f_g,
            gamma: DEFAULT_WAVE_EXPONENT,
            water_density: 1.0,
        };
        coeffs.validate()?;
        Ok(coeffs)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_water_density(mut self, water_density: f64) -> Result<Self> {
        self.water_density = water_density;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.b,
            self.c,
            self.f_c,
            self.f_h,
            self.f_s,
            self.f_g,
            self.gamma,
            self.water_density,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "resistance coefficients must be finite".into(),
            ));
        }
        if self.c <= 0.0 {
            return Err(Error::Domain(format!("c must be > 0, got {}", self.c)));
        }
        if self.f_g < 0.0 {
            return Err(Error::Domain(format!("f_g must be >= 0, got {}", self.f_g)));
        }
        if !(0.0..=1.0).contains(&self.f_c) {
            return Err(Error::Domain(format!(
                "f_c must lie in [0, 1], got {}",
                self.f_c
            )));
        }
        if self.gamma <= 0.0 {
            return Err(Error::Domain(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if self.water_density <= 0.0 {
            return Err(Error::Domain(format!(
                "water_density must be > 0, got {}",
                self.water_density
            )));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn f_c(&self) -> f64 {
        self.f_c
    }
    pub fn f_h(&self) -> f64 {
        self.f_h
    }
    pub fn f_s(&self) -> f64 {
        self.f_s
    }
    pub fn f_g(&self) -> f64 {
        self.f_g
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn water_density(&self) -> f64 {
        self.water_density
    }

    /// The seven learnable values in the order `a, b, c, f_c, f_h, f_s, f_g`.
    pub fn learnable(&self) -> [f64; 7] {
        [
            self.a, self.b, self.c, self.f_c, self.f_h, self.f_s, self.f_g,
        ]
    }
}

pub const COEFFICIENTS_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CoefficientsDoc {
    schema_version: u32,
    a: f64,
    b: f64,
    c: f64,
    f_c: f64,
    f_h: f64,
    f_s: f64,
    f_g: f64,
    gamma: f64,
    water_density: f64,
}

impl TryFrom<CoefficientsDoc> for ResistanceCoefficients {
    type Error = Error;

    fn try_from(doc: CoefficientsDoc) -> Result<Self> {
        if doc.schema_version != COEFFICIENTS_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported coefficient schema_version {}",
                doc.schema_version
            )));
        }
        ResistanceCoefficients::new(doc.a, doc.b, doc.c, doc.f_c, doc.f_h, doc.f_s, doc.f_g)?
            .with_gamma(doc.gamma)?
            .with_water_density(doc.water_density)
    }
}

impl From<ResistanceCoefficients> for CoefficientsDoc {
    fn from(c: ResistanceCoefficients) -> Self {
        Self {
            schema_version: COEFFICIENTS_SCHEMA_VERSION,
            a: c.a,
            b: c.b,
            c: c.c,
            f_c: c.f_c,
            f_h: c.f_h,
            f_s: c.f_s,
            f_g: c.f_g,
            gamma: c.gamma,
            water_density: c.water_density,
        }
    }
}

/// Per-component resistance and the total power they require.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistanceBreakdown {
    pub calm: f64,
    pub wind: f64,
    pub wave: f64,
    pub total_power: f64,
}

fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} is not finite")))
    }
}

/// Relative air density `1 / (1 + t_air / 273.15)`.
pub fn air_density(air_temp: f64) -> Result<f64> {
    require_finite("air_temp", air_temp)?;
    if air_temp <= ABSOLUTE_ZERO_C {
        return Err(Error::Domain(format!(
            "air_temp must exceed {ABSOLUTE_ZERO_C} C, got {air_temp}"
        )));
    }
    Ok(1.0 / (1.0 + air_temp / 273.15))
}

/// Calm water resistance `c (a + T) (b + V)^3 / V`.
pub fn calm_water_resistance(
    coeffs: &ResistanceCoefficients,
    draught: f64,
    speed: f64,
) -> Result<f64> {
    require_finite("draught", draught)?;
    require_finite("speed_through_water", speed)?;
    if speed <= 0.0 {
        return Err(Error::Domain(format!(
            "speed_through_water must be > 0, got {speed}"
        )));
    }
    Ok(coeffs.c * (coeffs.a + draught) * (coeffs.b + speed).powi(3) / speed)
}

/// Wind drag coefficient `C_x`, air density included.
pub fn wind_drag_coefficient(
    coeffs: &ResistanceCoefficients,
    air_temp: f64,
    wind_dir: f64,
) -> Result<f64> {
    require_finite("wind_dir", wind_dir)?;
    let rho = air_density(air_temp)?;
    let directional = coeffs.f_h * wind_dir.cos().abs() + coeffs.f_s * wind_dir.sin().abs();
    Ok(rho * (coeffs.f_c * coeffs.f_h + (1.0 - coeffs.f_c) * directional))
}

/// Wind resistance `C_x v^2 cos(d)`. Negative for following winds.
pub fn wind_resistance(
    coeffs: &ResistanceCoefficients,
    air_temp: f64,
    wind_dir: f64,
    wind_speed: f64,
) -> Result<f64> {
    require_finite("wind_speed", wind_speed)?;
    if wind_speed < 0.0 {
        return Err(Error::Domain(format!(
            "wind_speed must be >= 0, got {wind_speed}"
        )));
    }
    let cx = wind_drag_coefficient(coeffs, air_temp, wind_dir)?;
    Ok(cx * wind_speed * wind_speed * wind_dir.cos())
}

/// Head-wave resistance `h^gamma f_g d_water`.
pub fn head_wave_resistance(coeffs: &ResistanceCoefficients, wave_height: f64) -> Result<f64> {
    require_finite("wave_height", wave_height)?;
    if wave_height < 0.0 {
        return Err(Error::Domain(format!(
            "wave_height must be >= 0, got {wave_height}"
        )));
    }
    Ok(wave_height.powf(coeffs.gamma) * coeffs.f_g * coeffs.water_density)
}

/// Angular factor applied to the head-wave term, in `[0.334, 1.0]`.
pub fn wave_direction_factor(wave_dir: f64) -> f64 {
    0.667 + 0.333 * wave_dir.cos()
}

/// Wave resistance: head-wave resistance scaled by the encounter angle.
pub fn wave_resistance(
    coeffs: &ResistanceCoefficients,
    wave_height: f64,
    wave_dir: f64,
) -> Result<f64> {
    require_finite("wave_dir", wave_dir)?;
    Ok(head_wave_resistance(coeffs, wave_height)? * wave_direction_factor(wave_dir))
}

/// Total required power `(R_calm + R_wind + R_wave) V` with its components.
pub fn physical_power(
    coeffs: &ResistanceCoefficients,
    record: &EnvironmentRecord,
) -> Result<ResistanceBreakdown> {
    let speed = record.speed_through_water;
    let calm = calm_water_resistance(coeffs, record.draught, speed)?;
    let wind = wind_resistance(coeffs, record.air_temp, record.wind_dir, record.wind_speed)?;
    let wave = wave_resistance(coeffs, record.wave_height, record.wave_dir)?;
    Ok(ResistanceBreakdown {
        calm,
        wind,
        wave,
        total_power: (calm + wind + wave) * speed,
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use chrono::TimeZone;

    pub fn record(speed: f64, draught: f64) -> EnvironmentRecord {
        EnvironmentRecord {
            timestamp: Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(),
            speed_through_water: speed,
            draught,
            sea_depth: 200.0,
            sea_temp: 15.0,
            air_temp: 0.0,
            wave_height: 0.0,
            swell_height: 0.0,
            wave_dir: 0.0,
            swell_dir: 0.0,
            wind_dir: 0.0,
            wind_speed: 0.0,
            days_since_polish: 10.0,
            days_since_drydock: 100.0,
            shaft_rpm: None,
            shaft_power: None,
        }
    }
}
