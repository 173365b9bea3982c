//! Physical constants, unit-safe scalars and power conversions.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// CODATA 2018 values. `h` and `kb` are exact in the 2019 SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Planck constant, J·s.
    pub h: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub kb: f64,
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    h: 6.626_070_15e-34,
    hbar: 6.626_070_15e-34 / (2.0 * std::f64::consts::PI),
    kb: 1.380_649e-23,
    eps0: 8.854_187_812_8e-12,
};

pub fn dbm_to_watts(dbm: f64) -> Result<f64> {
    ensure_finite("power (dBm)", dbm)?;
    Ok(1e-3 * 10f64.powf(dbm / 10.0))
}

pub fn watts_to_dbm(watts: f64) -> Result<f64> {
    ensure_positive("power (W)", watts)?;
    Ok(10.0 * (watts / 1e-3).log10())
}

/// A microwave power, stored in watts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Power(f64);

impl Power {
    pub fn from_watts(watts: f64) -> Result<Self> {
        ensure_positive("power (W)", watts)?;
        Ok(Power(watts))
    }

    pub fn from_dbm(dbm: f64) -> Result<Self> {
        Power::from_watts(dbm_to_watts(dbm)?)
    }

    pub fn watts(self) -> f64 {
        self.0
    }

    pub fn dbm(self) -> f64 {
        10.0 * (self.0 / 1e-3).log10()
    }
}

/// An absolute temperature in kelvin.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Temperature(f64);

impl Temperature {
    pub fn from_kelvin(kelvin: f64) -> Result<Self> {
        if !(kelvin.is_finite() && kelvin > 0.0) {
            return Err(Error::invalid("temperature", format!("must be > 0 K, got {kelvin}")));
        }
        Ok(Temperature(kelvin))
    }

    pub fn kelvin(self) -> f64 {
        self.0
    }
}

/// Estimate with one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn hbar_is_h_over_two_pi() {
        let c = CONSTANTS;
        assert!(rel(c.hbar * 2.0 * std::f64::consts::PI, c.h) < 1e-12);
    }

    #[test]
    fn dbm_examples() {
        assert!(rel(dbm_to_watts(0.0).unwrap(), 1e-3) < 1e-15);
        assert!(rel(dbm_to_watts(-30.0).unwrap(), 1e-6) < 1e-14);
        assert!(rel(dbm_to_watts(-141.0).unwrap(), 1e-3 * 10f64.powf(-14.1)) < 1e-12);
        assert!(dbm_to_watts(f64::NAN).is_err());
        assert!(dbm_to_watts(f64::INFINITY).is_err());
    }

    #[test]
    fn watts_examples() {
        assert!(watts_to_dbm(1e-3).unwrap().abs() < 1e-12);
        assert!((watts_to_dbm(1.0).unwrap() - 30.0).abs() < 1e-12);
        assert!((watts_to_dbm(1e-3 * 10f64.powf(-14.1)).unwrap() + 141.0).abs() < 1e-9);
        assert!(watts_to_dbm(0.0).is_err());
        assert!(watts_to_dbm(-1.0).is_err());
    }

    #[test]
    fn newtypes_reject_nonpositive() {
        assert!(Power::from_watts(0.0).is_err());
        assert!(Temperature::from_kelvin(0.0).is_err());
        assert!(Temperature::from_kelvin(-1.0).is_err());
        assert_eq!(Temperature::from_kelvin(0.01).unwrap().kelvin(), 0.01);
    }

    proptest! {
        #[test]
        fn dbm_round_trip(p in -200.0f64..30.0) {
            let w = dbm_to_watts(p).unwrap();
            let back = watts_to_dbm(w).unwrap();
            let scale = p.abs().max(1.0);
            prop_assert!((back - p).abs() / scale < 1e-12);
            let pw = Power::from_dbm(p).unwrap();
            prop_assert!(((pw.dbm() - p) / scale).abs() < 1e-12);
        }
    }
}
