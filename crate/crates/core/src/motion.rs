//! Cluster motion: radial expansion of the scatterer spheres and drifted
//! Brownian paths of cluster mean directions.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::UnitDirection;
use crate::rng::{self, Domain};

/// Radial motion of a scatterer sphere: `R(t) = R0 + v t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMotion {
    pub initial_radius: f64,
    /// Signed, m/s; positive means the sphere grows.
    pub radial_velocity: f64,
}

impl RadialMotion {
    pub fn new(initial_radius: f64, radial_velocity: f64) -> Result<Self> {
        if !(initial_radius > 0.0 && initial_radius.is_finite()) {
            return Err(Error::invalid(
                "initial_radius",
                format!("must be positive, got {initial_radius}"),
            ));
        }
        if !radial_velocity.is_finite() {
            return Err(Error::invalid("radial_velocity", "must be finite"));
        }
        Ok(RadialMotion {
            initial_radius,
            radial_velocity,
        })
    }

    pub fn radius_at(&self, t: f64) -> Result<f64> {
        radius_at(self, t)
    }
}

pub fn radius_at(rm: &RadialMotion, t: f64) -> Result<f64> {
    let r = rm.initial_radius + rm.radial_velocity * t;
    if !(r > 0.0) || t < 0.0 {
        return Err(Error::SphereCollapse { radius: r, time: t });
    }
    Ok(r)
}

/// Drifted Brownian path of a cluster mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPathSpec {
    pub start: UnitDirection,
    pub dest: Option<UnitDirection>,
    /// (elevation, azimuth) drift rates, rad/s.
    pub angular_rates: (f64, f64),
    /// (elevation, azimuth) Brownian scales, rad per sqrt(s).
    pub sigmas: (f64, f64),
    pub segments: usize,
    pub dt: f64,
}

impl MotionPathSpec {
    pub fn new(
        start: UnitDirection,
        angular_rates: (f64, f64),
        sigmas: (f64, f64),
        segments: usize,
        dt: f64,
    ) -> Result<Self> {
        let spec = MotionPathSpec {
            start,
            dest: None,
            angular_rates,
            sigmas,
            segments,
            dt,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Drift chosen so that the noise-free path reaches `dest` at `t_M`.
    pub fn toward(
        start: UnitDirection,
        dest: UnitDirection,
        sigmas: (f64, f64),
        segments: usize,
        dt: f64,
    ) -> Result<Self> {
        let horizon = segments as f64 * dt;
        let rates = (
            (dest.elevation() - start.elevation()) / horizon,
            (dest.azimuth() - start.azimuth()) / horizon,
        );
        let mut spec = Self::new(start, rates, sigmas, segments, dt)?;
        spec.dest = Some(dest);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::invalid("segments", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.sigmas.0 >= 0.0 && self.sigmas.1 >= 0.0) {
            return Err(Error::invalid("sigmas", "must be nonnegative"));
        }
        if !(self.angular_rates.0.is_finite() && self.angular_rates.1.is_finite()) {
            return Err(Error::invalid("angular_rates", "must be finite"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.segments as f64 * self.dt
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigmas.0 == 0.0 && self.sigmas.1 == 0.0
    }

    pub fn with_start(mut self, start: UnitDirection) -> Self {
        self.start = start;
        self
    }

    pub fn without_noise(mut self) -> Self {
        self.sigmas = (0.0, 0.0);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    /// Angles before folding onto the sphere.
    pub raw_elevation: f64,
    pub raw_azimuth: f64,
    pub direction: UnitDirection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn horizon(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    /// Direction at an arbitrary time, interpolating the raw angles
    /// linearly between grid points.
    pub fn direction_at(&self, t: f64) -> Result<UnitDirection> {
        let (e, a) = self.raw_at(t)?;
        Ok(wrap_to_sphere(e, a))
    }

    pub fn raw_at(&self, t: f64) -> Result<(f64, f64)> {
        let horizon = self.horizon();
        let dt = if self.samples.len() > 1 {
            self.samples[1].time
        } else {
            1.0
        };
        let eps = 1e-9 * dt;
        if t < -eps || t > horizon + eps {
            return Err(Error::BeyondHorizon { time: t, horizon });
        }
        let pos = (t / dt).clamp(0.0, (self.samples.len() - 1) as f64);
        let k = pos.round();
        if (pos - k).abs() * dt <= eps {
            let s = &self.samples[k as usize];
            return Ok((s.raw_elevation, s.raw_azimuth));
        }
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let (a, b) = (&self.samples[lo], &self.samples[lo + 1]);
        Ok((
            a.raw_elevation + frac * (b.raw_elevation - a.raw_elevation),
            a.raw_azimuth + frac * (b.raw_azimuth - a.raw_azimuth),
        ))
    }
}

/// Standard Brownian motion sampled at `t_m = m dt`, `m = 0..=segments`.
pub fn brownian_path<R: Rng + ?Sized>(rng: &mut R, segments: usize, dt: f64) -> Vec<f64> {
    let scale = dt.sqrt();
    let mut out = Vec::with_capacity(segments + 1);
    let mut b = 0.0;
    out.push(b);
    for _ in 0..segments {
        let z: f64 = rng.sample(StandardNormal);
        b += scale * z;
        out.push(b);
    }
    out
}

/// Maps raw path angles onto the sphere.
///
/// The elevation is folded into `[0, pi]` by reflection at the poles and
/// the azimuth is reduced modulo `2pi`; a pole crossing does not shift the
/// azimuth.
pub fn wrap_to_sphere(raw_elevation: f64, raw_azimuth: f64) -> UnitDirection {
    UnitDirection::new(raw_elevation, raw_azimuth)
}

pub fn motion_path<R: Rng + ?Sized>(spec: &MotionPathSpec, rng: &mut R) -> Result<Trajectory> {
    spec.validate()?;
    let b_elev = brownian_path(rng, spec.segments, spec.dt);
    let b_azim = brownian_path(rng, spec.segments, spec.dt);
    let (we, wa) = spec.angular_rates;
    let (se, sa) = spec.sigmas;
    let samples = (0..=spec.segments)
        .map(|m| {
            let t = m as f64 * spec.dt;
            let raw_elevation = spec.start.elevation() + we * t + se * b_elev[m];
            let raw_azimuth = spec.start.azimuth() + wa * t + sa * b_azim[m];
            TrajectorySample {
                time: t,
                raw_elevation,
                raw_azimuth,
                direction: wrap_to_sphere(raw_elevation, raw_azimuth),
            }
        })
        .collect();
    Ok(Trajectory { samples })
}

/// `n_paths` independent trajectories; path `i` uses the stream
/// `(seed, i)`.
pub fn trajectory_bundle(spec: &MotionPathSpec, seed: u64, n_paths: usize) -> Result<Vec<Trajectory>> {
    spec.validate()?;
    (0..n_paths)
        .into_par_iter()
        .map(|i| motion_path(spec, &mut rng::stream(seed, Domain::Trajectory, i as u64)))
        .collect()
}
