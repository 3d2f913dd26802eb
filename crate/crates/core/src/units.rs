//! Physical constants and unit conversion.
//!
//! Internally everything is SI with frequencies as angular frequencies:
//! energies in joules, times in seconds, fields in tesla and frequencies in
//! rad/s. Values coming from configuration files are converted on ingestion.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Bohr magneton, J/T (CODATA 2018).
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

/// Angular frequency of one wavenumber (1 cm⁻¹), rad/s.
pub const RAD_PER_S_PER_WAVENUMBER: f64 = 2.0 * PI * C_LIGHT * 100.0;

/// The constant set as a value, for callers that want to pass it around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConstants {
    pub mu_b: f64,
    pub hbar: f64,
    pub k_b: f64,
    pub c: f64,
}

impl Default for PhysConstants {
    fn default() -> Self {
        Self {
            mu_b: MU_B,
            hbar: HBAR,
            k_b: K_B,
            c: C_LIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    /// Energy and (angular) frequency, linked through ħ and 2π.
    Energy,
    Field,
    FieldSquared,
    Temperature,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Joule,
    RadianPerSecond,
    Hertz,
    Megahertz,
    Wavenumber,
    Tesla,
    Millitesla,
    TeslaSquared,
    Kelvin,
    Second,
    Picosecond,
    Femtosecond,
}

impl Unit {
    fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            Joule | RadianPerSecond | Hertz | Megahertz | Wavenumber => Dimension::Energy,
            Tesla | Millitesla => Dimension::Field,
            TeslaSquared => Dimension::FieldSquared,
            Kelvin => Dimension::Temperature,
            Second | Picosecond | Femtosecond => Dimension::Time,
        }
    }

    /// Multiplier taking one of `self` to the canonical unit of its dimension
    /// (rad/s, tesla, kelvin, second).
    fn to_canonical(self) -> f64 {
        use Unit::*;
        match self {
            Joule => 1.0 / HBAR,
            RadianPerSecond => 1.0,
            Hertz => 2.0 * PI,
            Megahertz => 2.0 * PI * 1e6,
            Wavenumber => RAD_PER_S_PER_WAVENUMBER,
            Tesla => 1.0,
            Millitesla => 1e-3,
            TeslaSquared => 1.0,
            Kelvin => 1.0,
            Second => 1.0,
            Picosecond => 1e-12,
            Femtosecond => 1e-15,
        }
    }

    pub fn symbol(self) -> &'static str {
        use Unit::*;
        match self {
            Joule => "J",
            RadianPerSecond => "rad/s",
            Hertz => "Hz",
            Megahertz => "MHz",
            Wavenumber => "cm-1",
            Tesla => "T",
            Millitesla => "mT",
            TeslaSquared => "T2",
            Kelvin => "K",
            Second => "s",
            Picosecond => "ps",
            Femtosecond => "fs",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Unit::*;
        Ok(match s.trim() {
            "J" => Joule,
            "rad/s" => RadianPerSecond,
            "Hz" => Hertz,
            "MHz" => Megahertz,
            "cm-1" | "cm^-1" | "cm⁻¹" => Wavenumber,
            "T" => Tesla,
            "mT" => Millitesla,
            "T2" | "T^2" | "T²" => TeslaSquared,
            "K" => Kelvin,
            "s" => Second,
            "ps" => Picosecond,
            "fs" => Femtosecond,
            other => return Err(Error::domain(format!("unknown unit `{other}`"))),
        })
    }
}

/// A value tagged with its unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Self { value, unit }
    }

    pub fn convert(self, target: Unit) -> Result<Quantity> {
        convert(self, target)
    }

    /// Value in the canonical SI unit of its dimension.
    pub fn canonical(self) -> f64 {
        self.value * self.unit.to_canonical()
    }
}

/// Parses strings such as `"0.001 cm-1"`, `"611 MHz"` or `"35 ps"`.
impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (num, unit) = s
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::domain(format!("`{s}` has no unit suffix")))?;
        let value: f64 = num
            .parse()
            .map_err(|_| Error::domain(format!("`{num}` is not a number")))?;
        Ok(Quantity::new(value, unit.parse()?))
    }
}

/// Converts between dimensionally compatible units. Energy, angular
/// frequency, cyclic frequency and wavenumber are mutually convertible.
pub fn convert(q: Quantity, target: Unit) -> Result<Quantity> {
    if q.unit.dimension() != target.dimension() {
        return Err(Error::Units {
            from: q.unit.symbol(),
            to: target.symbol(),
        });
    }
    if q.unit == target {
        return Ok(q);
    }
    let value = q.value * q.unit.to_canonical() / target.to_canonical();
    Ok(Quantity::new(value, target))
}

pub fn wavenumber_to_rad_per_s(cm1: f64) -> f64 {
    cm1 * RAD_PER_S_PER_WAVENUMBER
}

pub fn rad_per_s_to_wavenumber(omega: f64) -> f64 {
    omega / RAD_PER_S_PER_WAVENUMBER
}

pub fn megahertz_to_rad_per_s(mhz: f64) -> f64 {
    mhz * 2.0 * PI * 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Unit; 11] = [
        Unit::Joule,
        Unit::RadianPerSecond,
        Unit::Hertz,
        Unit::Megahertz,
        Unit::Wavenumber,
        Unit::Tesla,
        Unit::Millitesla,
        Unit::Kelvin,
        Unit::Second,
        Unit::Picosecond,
        Unit::Femtosecond,
    ];

    #[test]
    fn wavenumber_to_angular_frequency() {
        // 2π · c · 100, evaluated by hand: 1.883651567e11 rad/s
        let q = convert(Quantity::new(1.0, Unit::Wavenumber), Unit::RadianPerSecond).unwrap();
        assert!((q.value - 1.883_651_567_308_853e11).abs() / q.value < 1e-12);
        assert!((q.value - 1.8836515e11).abs() / q.value < 1e-7);
    }

    #[test]
    fn hyperfine_megahertz_to_wavenumber() {
        let q = convert(Quantity::new(611.0, Unit::Megahertz), Unit::Wavenumber).unwrap();
        let expected = 611e6 / (C_LIGHT * 100.0);
        assert!((q.value - expected).abs() < 1e-15);
        assert!((q.value - 0.0204).abs() < 1e-4);
    }

    #[test]
    fn zero_converts_to_zero() {
        for from in ALL {
            for to in ALL {
                if let Ok(q) = convert(Quantity::new(0.0, from), to) {
                    assert_eq!(q.value, 0.0);
                }
            }
        }
    }

    #[test]
    fn incompatible_dimensions_rejected() {
        let err = convert(Quantity::new(1.0, Unit::Tesla), Unit::Kelvin).unwrap_err();
        assert!(matches!(err, Error::Units { .. }));
        assert!(convert(Quantity::new(1.0, Unit::Second), Unit::Hertz).is_err());
    }

    #[test]
    fn round_trips_are_exact_to_1e12() {
        for from in ALL {
            for to in ALL {
                let q = Quantity::new(3.7, from);
                if let Ok(there) = convert(q, to) {
                    let back = convert(there, from).unwrap();
                    assert!((back.value - 3.7).abs() / 3.7 < 1e-12, "{from} -> {to}");
                }
            }
        }
    }

    #[test]
    fn joule_and_angular_frequency_linked_by_hbar() {
        let q = convert(Quantity::new(HBAR, Unit::Joule), Unit::RadianPerSecond).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_tagged_values() {
        let q: Quantity = "0.001 cm-1".parse().unwrap();
        assert_eq!(q, Quantity::new(0.001, Unit::Wavenumber));
        let q: Quantity = "35 ps".parse().unwrap();
        assert!((q.canonical() - 35e-12).abs() < 1e-24);
        assert!("12".parse::<Quantity>().is_err());
        assert!("12 furlongs".parse::<Quantity>().is_err());
        let q: Quantity = "16e-10 T2".parse().unwrap();
        assert_eq!(q.canonical(), 16e-10);
        assert!(convert(q, Unit::Tesla).is_err());
    }
}
