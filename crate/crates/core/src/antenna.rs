//! Half-wave dipole field patterns and the polarization presets used for
//! 2x2 arrays.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::UnitDirection;

/// Width of the band around `xi^2 = 1` where the array factor is replaced
/// by its limit.
const SINGULAR_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    V,
    H,
}

/// Dipole tilted by `tilt` radians from the z axis, in the x-z plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleElement {
    pub tilt: f64,
}

impl DipoleElement {
    pub fn pattern(&self, d: UnitDirection, pol: Polarization) -> f64 {
        match pol {
            Polarization::V => field_pattern_v(d, self.tilt),
            Polarization::H => field_pattern_h(d, self.tilt),
        }
    }
}

/// `cos(pi xi / 2) / (1 - xi^2)`, continuous at `xi = +-1` where it equals
/// `pi / 4`.
pub fn dipole_factor(xi: f64) -> f64 {
    let one_minus = 1.0 - xi.abs();
    let denom = one_minus * (1.0 + xi.abs());
    if denom.abs() < SINGULAR_BAND {
        return FRAC_PI_4;
    }
    // cos(pi xi / 2) = sin(pi (1 - |xi|) / 2), which keeps precision near the poles
    (FRAC_PI_2 * one_minus).sin() / denom
}

/// Sines and cosines of a direction's elevation and azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionTrig {
    pub sin_elevation: f64,
    pub cos_elevation: f64,
    pub sin_azimuth: f64,
    pub cos_azimuth: f64,
}

impl DirectionTrig {
    pub fn from_direction(d: UnitDirection) -> Self {
        let (st, ct) = d.elevation().sin_cos();
        let (sp, cp) = d.azimuth().sin_cos();
        DirectionTrig {
            sin_elevation: st,
            cos_elevation: ct,
            sin_azimuth: sp,
            cos_azimuth: cp,
        }
    }

    /// From a unit vector; on the z axis the azimuth is taken as zero.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let rho = v.x.hypot(v.y);
        let (sp, cp) = if rho > 0.0 { (v.y / rho, v.x / rho) } else { (0.0, 1.0) };
        DirectionTrig {
            sin_elevation: rho,
            cos_elevation: v.z.clamp(-1.0, 1.0),
            sin_azimuth: sp,
            cos_azimuth: cp,
        }
    }
}

/// `(F_v, F_h)` for a dipole whose tilt has sine `sin_tilt` and cosine
/// `cos_tilt`.
pub fn field_patterns(d: &DirectionTrig, sin_tilt: f64, cos_tilt: f64) -> (f64, f64) {
    let xi = d.sin_elevation * d.cos_azimuth * sin_tilt + d.cos_elevation * cos_tilt;
    let f = dipole_factor(xi);
    let pol_v = d.cos_elevation * d.cos_azimuth * sin_tilt - d.sin_elevation * cos_tilt;
    ((pol_v * f).abs(), (d.sin_azimuth * sin_tilt * f).abs())
}

pub fn field_pattern_v(d: UnitDirection, tilt: f64) -> f64 {
    let (sg, cg) = tilt.sin_cos();
    field_patterns(&DirectionTrig::from_direction(d), sg, cg).0
}

pub fn field_pattern_h(d: UnitDirection, tilt: f64) -> f64 {
    let (sg, cg) = tilt.sin_cos();
    field_patterns(&DirectionTrig::from_direction(d), sg, cg).1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarizationPreset {
    VV,
    VH,
    Slant45,
}

impl PolarizationPreset {
    pub const ALL: [PolarizationPreset; 3] = [Self::VV, Self::VH, Self::Slant45];

    pub fn name(&self) -> &'static str {
        match self {
            Self::VV => "VV",
            Self::VH => "VH",
            Self::Slant45 => "SLANT45",
        }
    }
}

impl fmt::Display for PolarizationPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolarizationPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "VV" | "V/V" => Ok(Self::VV),
            "VH" | "V/H" => Ok(Self::VH),
            "SLANT45" | "+-45" | "±45" => Ok(Self::Slant45),
            other => Err(Error::invalid(
                "polarization",
                format!("unknown preset `{other}` (expected VV, VH or SLANT45)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationConfig {
    pub tx_tilts: Vec<f64>,
    pub rx_tilts: Vec<f64>,
    pub label: String,
}

impl PolarizationConfig {
    pub fn new(tx_tilts: Vec<f64>, rx_tilts: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if tx_tilts.iter().chain(&rx_tilts).any(|t| !t.is_finite()) {
            return Err(Error::invalid("tilts", "must be finite"));
        }
        Ok(PolarizationConfig {
            tx_tilts,
            rx_tilts,
            label: label.into(),
        })
    }

    /// Checks the tilt counts against the array sizes.
    pub fn check_sizes(&self, s: usize, u: usize) -> Result<()> {
        if self.tx_tilts.len() != s {
            return Err(Error::invalid(
                "tx_tilts",
                format!("{} tilts for {s} transmit elements", self.tx_tilts.len()),
            ));
        }
        if self.rx_tilts.len() != u {
            return Err(Error::invalid(
                "rx_tilts",
                format!("{} tilts for {u} receive elements", self.rx_tilts.len()),
            ));
        }
        Ok(())
    }

    /// True when every element on both sides shares the same tilt.
    pub fn is_co_polarized(&self) -> bool {
        let mut all = self.tx_tilts.iter().chain(&self.rx_tilts);
        match all.next() {
            Some(first) => all.all(|t| t == first),
            None => true,
        }
    }
}

pub fn preset_config(preset: PolarizationPreset, s: usize, u: usize) -> Result<PolarizationConfig> {
    if s != 2 || u != 2 {
        return Err(Error::invalid(
            "polarization",
            format!("preset {preset} needs a 2x2 array, got {u}x{s}"),
        ));
    }
    let tilts = match preset {
        PolarizationPreset::VV => vec![0.0, 0.0],
        PolarizationPreset::VH => vec![0.0, FRAC_PI_2],
        PolarizationPreset::Slant45 => vec![FRAC_PI_4, -FRAC_PI_4],
    };
    PolarizationConfig::new(tilts.clone(), tilts, preset.name())
}

/// Looks a preset up by name.
pub fn preset_by_name(name: &str, s: usize, u: usize) -> Result<PolarizationConfig> {
    preset_config(name.parse()?, s, u)
}
