//! Angles, array element placement and scatterer distance terms.
//!
//! Every scatterer sits on a sphere of radius `R` around its array's phase
//! reference. The distance from array element `k` to a scatterer is written
//! in terms of the signed projection `x_k = r_k cos(alpha_k)` of the element
//! offset onto the scatterer direction, either exactly (law of cosines) or
//! through the second-order expansion used by the correlation engine.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset-to-radius ratio above which the second-order distance expansion
/// is reported as degraded.
pub const EXPANSION_RATIO_LIMIT: f64 = 0.1;

/// A direction on the unit sphere as (elevation, azimuth) in radians.
///
/// Elevation is the polar angle measured from +z and lies in `[0, pi]`;
/// azimuth lies in `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDirection {
    elevation: f64,
    azimuth: f64,
}

impl UnitDirection {
    /// Builds a direction, folding the elevation into `[0, pi]` and reducing
    /// the azimuth modulo `2pi` (see [`fold_elevation`]).
    pub fn new(elevation: f64, azimuth: f64) -> Self {
        UnitDirection {
            elevation: fold_elevation(elevation),
            azimuth: wrap_azimuth(azimuth),
        }
    }

    pub fn from_degrees(elevation_deg: f64, azimuth_deg: f64) -> Self {
        Self::new(elevation_deg.to_radians(), azimuth_deg.to_radians())
    }

    /// Direction of a nonzero 3-vector.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let norm = v.norm();
        let z = (v.z / norm).clamp(-1.0, 1.0);
        UnitDirection {
            elevation: z.acos(),
            azimuth: wrap_azimuth(v.y.atan2(v.x)),
        }
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn to_degrees(&self) -> (f64, f64) {
        (self.elevation.to_degrees(), self.azimuth.to_degrees())
    }

    pub fn unit_vector(&self) -> Vector3<f64> {
        unit_vector(*self)
    }
}

/// Triangle-wave fold of an unbounded polar angle into `[0, pi]`.
///
/// The azimuth is left untouched: a crossing of either pole reflects the
/// elevation only.
pub fn fold_elevation(raw: f64) -> f64 {
    let r = raw.rem_euclid(TAU);
    let folded = if r > PI { TAU - r } else { r };
    folded.clamp(0.0, PI)
}

pub fn wrap_azimuth(raw: f64) -> f64 {
    let a = raw.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Which point of the array sits at the center of its scatterer sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrayReference {
    /// The array is symmetric about the sphere center.
    #[default]
    Center,
    /// Element 0 sits at the sphere center and the array extends along
    /// its orientation.
    FirstElement,
}

/// Uniform linear array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    num_elements: usize,
    /// Element spacing in wavelengths.
    spacing: f64,
    orientation: UnitDirection,
    center: Vector3<f64>,
    reference: ArrayReference,
}

impl ArrayGeometry {
    pub fn new(
        num_elements: usize,
        spacing: f64,
        orientation: UnitDirection,
        center: Vector3<f64>,
    ) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::invalid("num_elements", "must be at least 1"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(
                "spacing",
                format!("must be positive and finite, got {spacing}"),
            ));
        }
        Ok(ArrayGeometry {
            num_elements,
            spacing,
            orientation,
            center,
            reference: ArrayReference::Center,
        })
    }

    pub fn with_reference(mut self, reference: ArrayReference) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_spacing(&self, spacing: f64) -> Result<Self> {
        let mut g = Self::new(self.num_elements, spacing, self.orientation, self.center)?;
        g.reference = self.reference;
        Ok(g)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn orientation(&self) -> UnitDirection {
        self.orientation
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn reference(&self) -> ArrayReference {
        self.reference
    }

    fn index_factor(&self, index: usize) -> f64 {
        match self.reference {
            ArrayReference::Center => index as f64 - (self.num_elements as f64 - 1.0) / 2.0,
            ArrayReference::FirstElement => index as f64,
        }
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.num_elements {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.num_elements,
            });
        }
        Ok(())
    }

    /// Signed distance in meters of each element from the phase reference,
    /// measured along the array axis.
    pub fn axial_offsets(&self, wavelength: f64) -> Vec<f64> {
        (0..self.num_elements)
            .map(|k| self.index_factor(k) * self.spacing * wavelength)
            .collect()
    }

    /// Largest element distance from the phase reference, in meters.
    pub fn max_element_norm(&self, wavelength: f64) -> f64 {
        self.axial_offsets(wavelength)
            .into_iter()
            .fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

/// Cartesian unit vector `(sin e cos a, sin e sin a, cos e)`.
pub fn unit_vector(d: UnitDirection) -> Vector3<f64> {
    let (se, ce) = d.elevation.sin_cos();
    let (sa, ca) = d.azimuth.sin_cos();
    Vector3::new(se * ca, se * sa, ce)
}

/// Position of element `index` relative to the phase reference, in meters.
pub fn element_offset(g: &ArrayGeometry, index: usize, wavelength: f64) -> Result<Vector3<f64>> {
    g.check_index(index)?;
    Ok(g.index_factor(index) * g.spacing * wavelength * unit_vector(g.orientation))
}

/// Cosine of the angle between two directions.
pub fn cos_alpha(element_dir: UnitDirection, scatterer_dir: UnitDirection) -> f64 {
    unit_vector(element_dir)
        .dot(&unit_vector(scatterer_dir))
        .clamp(-1.0, 1.0)
}

/// Element-to-scatterer distance by the law of cosines.
pub fn exact_distance(radius: f64, element_norm: f64, cos_alpha: f64) -> f64 {
    (radius * radius + element_norm * element_norm - 2.0 * radius * element_norm * cos_alpha)
        .max(0.0)
        .sqrt()
}

/// Second-order expansion `R - r cos(a) - r^2 cos^2(a) / (2R)` of
/// [`exact_distance`], valid for `r << R`.
pub fn approx_distance(radius: f64, element_norm: f64, cos_alpha: f64) -> f64 {
    if element_norm / radius > EXPANSION_RATIO_LIMIT {
        log::warn!(
            "distance expansion used at offset/radius ratio {:.3} (> {EXPANSION_RATIO_LIMIT})",
            element_norm / radius
        );
    }
    let x = element_norm * cos_alpha;
    radius - x - x * x / (2.0 * radius)
}

/// Path-length difference between elements `m` and `n` for the second-order
/// expansion, given the signed projections `x_k = r_k cos(alpha_k)`.
#[inline]
pub fn distance_diff_from_projections(x_m: f64, x_n: f64, radius: f64) -> f64 {
    (x_n - x_m) * (1.0 + (x_n + x_m) / (2.0 * radius))
}

/// Path-length difference `D_m - D_n` (meters) between elements `m` and `n`
/// toward a scatterer at `radius` in direction `scatterer`.
///
/// Antisymmetric in `(m, n)`; a positive value means element `n` is closer
/// to the scatterer.
pub fn phase_distance_diff(
    g: &ArrayGeometry,
    m: usize,
    n: usize,
    scatterer: UnitDirection,
    radius: f64,
    wavelength: f64,
) -> Result<f64> {
    g.check_index(m)?;
    g.check_index(n)?;
    let c = cos_alpha(g.orientation, scatterer);
    let unit = g.spacing * wavelength * c;
    let x_m = g.index_factor(m) * unit;
    let x_n = g.index_factor(n) * unit;
    Ok(distance_diff_from_projections(x_m, x_n, radius))
}
