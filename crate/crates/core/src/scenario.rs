//! Scenario files.
//!
//! A scenario is a TOML document. Angles are in degrees, ratios with a
//! `_db` suffix in dB, lengths in meters and element spacings in
//! wavelengths. Every optional field falls back to the reference
//! parameters of the model (0.1 wavelength spacing, 1 m initial radius,
//! 10 dB SNR, 9 dB XPD, 2 dB CPR, 10000 channel draws).
//!
//! ```toml
//! wavelength_m = 0.5            # or carrier_frequency_hz
//! seed = 24301
//!
//! [tx]
//! elements = 2
//! spacing_wl = 0.1
//! orientation_deg = [90.0, 0.0]
//! center_m = [0.0, 0.0, 0.0]
//! reference = "first-element"   # or "center"
//! motion = { initial_radius_m = 1.0, radial_velocity_mps = 10.0 }
//! clusters = [{ mean_deg = [90.0, 0.0], kappa = 10.0, weight = 1.0 }]
//!
//! [rx]
//! center_m = [0.0, 100.0, 0.0]
//! clusters = [
//!   { mean_deg = [90.0, 330.0], kappa = 50.0, weight = 0.6,
//!     path = { rates_deg_s = [45.0, -45.0], sigma_deg = [2.0, 2.0], segments = 500, dt_s = 0.01 } },
//!   { mean_deg = [80.0, 300.0], kappa = 20.0, weight = 0.4 },
//! ]
//! # applied to every cluster without its own path
//! cluster_motion = { rates_deg_s = [45.0, -45.0], sigma_deg = [2.0, 2.0], segments = 500, dt_s = 0.01 }
//!
//! [polarization]
//! presets = ["VV", "VH", "SLANT45"]
//! custom = [{ label = "HV", tx_tilts_deg = [90.0, 0.0], rx_tilts_deg = [90.0, 0.0] }]
//!
//! [depolarization]
//! xpd_v_db = 9.0
//! xpd_h_db = 9.0
//! cpr_db = 2.0
//!
//! [capacity]
//! snr_db = 10.0
//! xpd_for_snr = "auto"          # v | h | mean | auto
//! n_channel_draws = 10000
//!
//! [trajectories]
//! n_draws = 64
//!
//! [quadrature]
//! n_polar = 64
//! n_azimuth = 128
//! rel_tol = 1e-4
//! max_doublings = 3
//! adaptive = true
//!
//! [sweep]
//! times_s = [0.0, 1.0, 2.0]
//! tx_spacings_wl = [0.1]
//! rx_spacings_wl = [0.1]
//! snrs_db = [10.0, 20.0]
//! ```

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::antenna::{preset_config, PolarizationConfig, PolarizationPreset};
use crate::directional::{VmfComponent, VmfMixture};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ArrayReference, UnitDirection};
use crate::motion::{MotionPathSpec, RadialMotion};
use crate::realization::XpdSelection;
use crate::stcf::{DepolarizationStats, QuadratureSettings, Scene, SideModel};

/// Seed used when a scenario does not set one.
pub const DEFAULT_SEED: u64 = 24_301;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_frequency_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tx: SideFile,
    pub rx: SideFile,
    #[serde(default)]
    pub polarization: PolarizationFile,
    #[serde(default)]
    pub depolarization: DepolarizationFile,
    #[serde(default)]
    pub capacity: CapacityFile,
    #[serde(default)]
    pub trajectories: TrajectoriesFile,
    #[serde(default)]
    pub quadrature: QuadratureFile,
    #[serde(default)]
    pub sweep: SweepFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideFile {
    #[serde(default = "default_elements")]
    pub elements: usize,
    #[serde(default = "default_spacing")]
    pub spacing_wl: f64,
    #[serde(default = "default_orientation")]
    pub orientation_deg: [f64; 2],
    #[serde(default)]
    pub center_m: [f64; 3],
    #[serde(default)]
    pub reference: ArrayReference,
    #[serde(default)]
    pub motion: MotionFile,
    pub clusters: Vec<ClusterFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_motion: Option<PathFile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionFile {
    #[serde(default = "default_radius")]
    pub initial_radius_m: f64,
    #[serde(default)]
    pub radial_velocity_mps: f64,
}

impl Default for MotionFile {
    fn default() -> Self {
        MotionFile {
            initial_radius_m: default_radius(),
            radial_velocity_mps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterFile {
    pub mean_deg: [f64; 2],
    pub kappa: f64,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathFile>,
}

/// Drifted Brownian path of a cluster mean, starting at the cluster mean.
/// Either `rates_deg_s` or `dest_deg` sets the drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates_deg_s: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dest_deg: Option<[f64; 2]>,
    /// Brownian scale, degrees per square-root second.
    #[serde(default)]
    pub sigma_deg: [f64; 2],
    pub segments: usize,
    pub dt_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizationFile {
    #[serde(default = "default_presets")]
    pub presets: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub custom: Vec<CustomPolarizationFile>,
}

impl Default for PolarizationFile {
    fn default() -> Self {
        PolarizationFile {
            presets: default_presets(),
            custom: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomPolarizationFile {
    pub label: String,
    pub tx_tilts_deg: Vec<f64>,
    pub rx_tilts_deg: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepolarizationFile {
    #[serde(default = "default_xpd")]
    pub xpd_v_db: f64,
    #[serde(default = "default_xpd")]
    pub xpd_h_db: f64,
    #[serde(default = "default_cpr")]
    pub cpr_db: f64,
}

impl Default for DepolarizationFile {
    fn default() -> Self {
        DepolarizationFile {
            xpd_v_db: default_xpd(),
            xpd_h_db: default_xpd(),
            cpr_db: default_cpr(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityFile {
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub xpd_for_snr: XpdSelection,
    #[serde(default = "default_channel_draws")]
    pub n_channel_draws: usize,
}

impl Default for CapacityFile {
    fn default() -> Self {
        CapacityFile {
            snr_db: default_snr(),
            xpd_for_snr: XpdSelection::Auto,
            n_channel_draws: default_channel_draws(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoriesFile {
    #[serde(default = "default_trajectory_draws")]
    pub n_draws: usize,
}

impl Default for TrajectoriesFile {
    fn default() -> Self {
        TrajectoriesFile {
            n_draws: default_trajectory_draws(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_polar: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_azimuth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_doublings: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default = "default_times")]
    pub times_s: Vec<f64>,
    #[serde(default = "default_spacings")]
    pub tx_spacings_wl: Vec<f64>,
    #[serde(default = "default_spacings")]
    pub rx_spacings_wl: Vec<f64>,
    #[serde(default = "default_snrs")]
    pub snrs_db: Vec<f64>,
}

impl Default for SweepFile {
    fn default() -> Self {
        SweepFile {
            times_s: default_times(),
            tx_spacings_wl: default_spacings(),
            rx_spacings_wl: default_spacings(),
            snrs_db: default_snrs(),
        }
    }
}

fn default_elements() -> usize {
    2
}
fn default_spacing() -> f64 {
    0.1
}
fn default_orientation() -> [f64; 2] {
    [90.0, 0.0]
}
fn default_radius() -> f64 {
    1.0
}
fn default_presets() -> Vec<String> {
    PolarizationPreset::ALL.iter().map(|p| p.name().to_string()).collect()
}
fn default_xpd() -> f64 {
    9.0
}
fn default_cpr() -> f64 {
    2.0
}
fn default_snr() -> f64 {
    10.0
}
fn default_channel_draws() -> usize {
    10_000
}
fn default_trajectory_draws() -> usize {
    64
}
fn default_times() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 1.5, 2.0]
}
fn default_spacings() -> Vec<f64> {
    vec![0.1]
}
fn default_snrs() -> Vec<f64> {
    vec![10.0, 20.0]
}

/// One validated side of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct SideConfig {
    pub array: ArrayGeometry,
    pub motion: RadialMotion,
    pub mixture: VmfMixture,
    /// One entry per mixture component.
    pub cluster_paths: Vec<Option<MotionPathSpec>>,
}

impl SideConfig {
    fn model(&self, spacing: f64, tilts: Vec<f64>) -> Result<SideModel> {
        SideModel::new(
            self.mixture.clone(),
            self.motion,
            self.array.with_spacing(spacing)?,
            tilts,
        )?
        .with_paths(self.cluster_paths.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub times: Vec<f64>,
    pub tx_spacings: Vec<f64>,
    pub rx_spacings: Vec<f64>,
    pub snrs_db: Vec<f64>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub wavelength: f64,
    pub tx: SideConfig,
    pub rx: SideConfig,
    pub polarizations: Vec<PolarizationConfig>,
    pub xpd_v_db: f64,
    pub xpd_h_db: f64,
    pub cpr_db: f64,
    pub snr_db: f64,
    pub xpd_for_snr: XpdSelection,
    pub n_channel_draws: usize,
    pub n_trajectory_draws: usize,
    pub seed: u64,
    pub quadrature: QuadratureSettings,
    pub sweep: Sweep,
}

impl ScenarioConfig {
    pub fn depol(&self) -> DepolarizationStats {
        DepolarizationStats::from_db(self.xpd_v_db, self.xpd_h_db, self.cpr_db)
            .expect("validated at parse time")
    }

    /// Linear inverse XPD used to reduce the SNR for `pol`.
    pub fn snr_inv_xpd(&self, pol: &PolarizationConfig) -> f64 {
        self.xpd_for_snr.resolve(&self.depol(), pol.is_co_polarized())
    }

    pub fn polarization(&self, label: &str) -> Result<PolarizationConfig> {
        if let Some(p) = self
            .polarizations
            .iter()
            .find(|p| p.label.eq_ignore_ascii_case(label))
        {
            return Ok(p.clone());
        }
        preset_config(
            label.parse()?,
            self.tx.array.num_elements(),
            self.rx.array.num_elements(),
        )
    }

    pub fn scene(&self, pol: &PolarizationConfig) -> Result<Scene> {
        self.scene_with_spacings(pol, self.tx.array.spacing(), self.rx.array.spacing())
    }

    pub fn scene_with_spacings(
        &self,
        pol: &PolarizationConfig,
        tx_spacing: f64,
        rx_spacing: f64,
    ) -> Result<Scene> {
        pol.check_sizes(self.tx.array.num_elements(), self.rx.array.num_elements())?;
        Ok(Scene {
            tx: self.tx.model(tx_spacing, pol.tx_tilts.clone())?,
            rx: self.rx.model(rx_spacing, pol.rx_tilts.clone())?,
            depol: self.depol(),
            wavelength: self.wavelength,
            quadrature: self.quadrature,
        })
    }

    pub fn to_file(&self) -> ScenarioFile {
        let side = |s: &SideConfig| {
            let (e, a) = s.array.orientation().to_degrees();
            let c = s.array.center();
            SideFile {
                elements: s.array.num_elements(),
                spacing_wl: s.array.spacing(),
                orientation_deg: [e, a],
                center_m: [c.x, c.y, c.z],
                reference: s.array.reference(),
                motion: MotionFile {
                    initial_radius_m: s.motion.initial_radius,
                    radial_velocity_mps: s.motion.radial_velocity,
                },
                clusters: s
                    .mixture
                    .components()
                    .iter()
                    .zip(&s.cluster_paths)
                    .map(|(c, p)| {
                        let (e, a) = c.mean.to_degrees();
                        ClusterFile {
                            mean_deg: [e, a],
                            kappa: c.kappa,
                            weight: c.weight,
                            path: p.as_ref().map(path_to_file),
                        }
                    })
                    .collect(),
                cluster_motion: None,
            }
        };
        let q = self.quadrature;
        ScenarioFile {
            wavelength_m: Some(self.wavelength),
            carrier_frequency_hz: None,
            seed: Some(self.seed),
            tx: side(&self.tx),
            rx: side(&self.rx),
            polarization: PolarizationFile {
                presets: Vec::new(),
                custom: self
                    .polarizations
                    .iter()
                    .map(|p| CustomPolarizationFile {
                        label: p.label.clone(),
                        tx_tilts_deg: p.tx_tilts.iter().map(|t| t.to_degrees()).collect(),
                        rx_tilts_deg: p.rx_tilts.iter().map(|t| t.to_degrees()).collect(),
                    })
                    .collect(),
            },
            depolarization: DepolarizationFile {
                xpd_v_db: self.xpd_v_db,
                xpd_h_db: self.xpd_h_db,
                cpr_db: self.cpr_db,
            },
            capacity: CapacityFile {
                snr_db: self.snr_db,
                xpd_for_snr: self.xpd_for_snr,
                n_channel_draws: self.n_channel_draws,
            },
            trajectories: TrajectoriesFile {
                n_draws: self.n_trajectory_draws,
            },
            quadrature: QuadratureFile {
                n_polar: Some(q.n_polar),
                n_azimuth: Some(q.n_azimuth),
                rel_tol: Some(q.rel_tol),
                max_doublings: Some(q.max_doublings),
                adaptive: Some(q.adaptive),
            },
            sweep: SweepFile {
                times_s: self.sweep.times.clone(),
                tx_spacings_wl: self.sweep.tx_spacings.clone(),
                rx_spacings_wl: self.sweep.rx_spacings.clone(),
                snrs_db: self.sweep.snrs_db.clone(),
            },
        }
    }
}

fn path_to_file(p: &MotionPathSpec) -> PathFile {
    let sigma_deg = [p.sigmas.0.to_degrees(), p.sigmas.1.to_degrees()];
    match p.dest {
        Some(d) => {
            let (e, a) = d.to_degrees();
            PathFile {
                rates_deg_s: None,
                dest_deg: Some([e, a]),
                sigma_deg,
                segments: p.segments,
                dt_s: p.dt,
            }
        }
        None => PathFile {
            rates_deg_s: Some([p.angular_rates.0.to_degrees(), p.angular_rates.1.to_degrees()]),
            dest_deg: None,
            sigma_deg,
            segments: p.segments,
            dt_s: p.dt,
        },
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    validate(&file)
}

pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioConfig> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

pub fn serialize_scenario(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(&cfg.to_file()).map_err(|e| Error::Parse(e.to_string()))
}

fn finite(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("must be finite, got {v}")))
    }
}

fn at(field: String, e: Error) -> Error {
    match e {
        Error::Invalid { field: inner, reason } => Error::Invalid {
            field: format!("{field}.{inner}"),
            reason,
        },
        other => other,
    }
}

pub fn validate(file: &ScenarioFile) -> Result<ScenarioConfig> {
    let wavelength = match (file.wavelength_m, file.carrier_frequency_hz) {
        (Some(_), Some(_)) => {
            return Err(Error::invalid(
                "wavelength_m",
                "set either wavelength_m or carrier_frequency_hz, not both",
            ))
        }
        (Some(w), None) => w,
        (None, Some(f)) => {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::invalid(
                    "carrier_frequency_hz",
                    format!("must be positive, got {f}"),
                ));
            }
            SPEED_OF_LIGHT / f
        }
        (None, None) => {
            return Err(Error::invalid(
                "wavelength_m",
                "one of wavelength_m or carrier_frequency_hz is required",
            ))
        }
    };
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::invalid(
            "wavelength_m",
            format!("must be positive, got {wavelength}"),
        ));
    }
    let tx = validate_side("tx", &file.tx)?;
    let rx = validate_side("rx", &file.rx)?;
    let (s, u) = (tx.array.num_elements(), rx.array.num_elements());

    let mut polarizations = Vec::new();
    for (i, name) in file.polarization.presets.iter().enumerate() {
        let preset: PolarizationPreset = name
            .parse()
            .map_err(|e| at(format!("polarization.presets[{i}]"), e))?;
        polarizations.push(preset_config(preset, s, u)?);
    }
    for (i, c) in file.polarization.custom.iter().enumerate() {
        let field = format!("polarization.custom[{i}]");
        let p = PolarizationConfig::new(
            c.tx_tilts_deg.iter().map(|t| t.to_radians()).collect(),
            c.rx_tilts_deg.iter().map(|t| t.to_radians()).collect(),
            c.label.clone(),
        )
        .map_err(|e| at(field.clone(), e))?;
        p.check_sizes(s, u).map_err(|e| at(field, e))?;
        polarizations.push(p);
    }
    if polarizations.is_empty() {
        return Err(Error::invalid("polarization", "at least one configuration is required"));
    }

    let d = &file.depolarization;
    DepolarizationStats::from_db(
        finite("depolarization.xpd_v_db", d.xpd_v_db)?,
        finite("depolarization.xpd_h_db", d.xpd_h_db)?,
        finite("depolarization.cpr_db", d.cpr_db)?,
    )
    .map_err(|e| at("depolarization".into(), e))?;

    let c = &file.capacity;
    finite("capacity.snr_db", c.snr_db)?;
    if c.n_channel_draws == 0 {
        return Err(Error::invalid("capacity.n_channel_draws", "must be at least 1"));
    }
    if file.trajectories.n_draws == 0 {
        return Err(Error::invalid("trajectories.n_draws", "must be at least 1"));
    }

    let defaults = QuadratureSettings::default();
    let qf = &file.quadrature;
    let quadrature = QuadratureSettings {
        n_polar: qf.n_polar.unwrap_or(defaults.n_polar),
        n_azimuth: qf.n_azimuth.unwrap_or(defaults.n_azimuth),
        rel_tol: qf.rel_tol.unwrap_or(defaults.rel_tol),
        max_doublings: qf.max_doublings.unwrap_or(defaults.max_doublings),
        adaptive: qf.adaptive.unwrap_or(defaults.adaptive),
    };
    if quadrature.n_polar == 0 || quadrature.n_azimuth == 0 {
        return Err(Error::invalid("quadrature", "node counts must be at least 1"));
    }
    if !(quadrature.rel_tol > 0.0) {
        return Err(Error::invalid("quadrature.rel_tol", "must be positive"));
    }

    let sw = &file.sweep;
    for (name, values) in [
        ("sweep.times_s", &sw.times_s),
        ("sweep.tx_spacings_wl", &sw.tx_spacings_wl),
        ("sweep.rx_spacings_wl", &sw.rx_spacings_wl),
        ("sweep.snrs_db", &sw.snrs_db),
    ] {
        if values.is_empty() {
            return Err(Error::invalid(name, "must not be empty"));
        }
        for &v in values.iter() {
            finite(name, v)?;
        }
    }
    if sw.times_s.iter().any(|&t| t < 0.0) {
        return Err(Error::invalid("sweep.times_s", "times must be >= 0"));
    }
    if sw
        .tx_spacings_wl
        .iter()
        .chain(&sw.rx_spacings_wl)
        .any(|&x| x <= 0.0)
    {
        return Err(Error::invalid("sweep", "spacings must be positive"));
    }

    Ok(ScenarioConfig {
        wavelength,
        tx,
        rx,
        polarizations,
        xpd_v_db: d.xpd_v_db,
        xpd_h_db: d.xpd_h_db,
        cpr_db: d.cpr_db,
        snr_db: c.snr_db,
        xpd_for_snr: c.xpd_for_snr,
        n_channel_draws: c.n_channel_draws,
        n_trajectory_draws: file.trajectories.n_draws,
        seed: file.seed.unwrap_or(DEFAULT_SEED),
        quadrature,
        sweep: Sweep {
            times: sw.times_s.clone(),
            tx_spacings: sw.tx_spacings_wl.clone(),
            rx_spacings: sw.rx_spacings_wl.clone(),
            snrs_db: sw.snrs_db.clone(),
        },
    })
}

fn direction(field: &str, deg: [f64; 2]) -> Result<UnitDirection> {
    finite(field, deg[0])?;
    finite(field, deg[1])?;
    if !(0.0..=180.0).contains(&deg[0]) {
        return Err(Error::invalid(
            field,
            format!("elevation must lie in [0, 180] degrees, got {}", deg[0]),
        ));
    }
    Ok(UnitDirection::from_degrees(deg[0], deg[1]))
}

fn validate_path(field: &str, start: UnitDirection, p: &PathFile) -> Result<MotionPathSpec> {
    let sigmas = (p.sigma_deg[0].to_radians(), p.sigma_deg[1].to_radians());
    let spec = match (p.rates_deg_s, p.dest_deg) {
        (Some(r), None) => MotionPathSpec::new(
            start,
            (r[0].to_radians(), r[1].to_radians()),
            sigmas,
            p.segments,
            p.dt_s,
        ),
        (None, Some(d)) => MotionPathSpec::toward(
            start,
            direction(&format!("{field}.dest_deg"), d)?,
            sigmas,
            p.segments,
            p.dt_s,
        ),
        (None, None) => MotionPathSpec::new(start, (0.0, 0.0), sigmas, p.segments, p.dt_s),
        (Some(_), Some(_)) => {
            return Err(Error::invalid(
                field,
                "set either rates_deg_s or dest_deg, not both",
            ))
        }
    };
    spec.map_err(|e| at(field.to_string(), e))
}

fn validate_side(name: &str, s: &SideFile) -> Result<SideConfig> {
    let orientation = direction(&format!("{name}.orientation_deg"), s.orientation_deg)?;
    for (k, c) in s.center_m.iter().enumerate() {
        finite(&format!("{name}.center_m[{k}]"), *c)?;
    }
    let array = ArrayGeometry::new(
        s.elements,
        s.spacing_wl,
        orientation,
        Vector3::from(s.center_m),
    )
    .map_err(|e| at(name.to_string(), e))?
    .with_reference(s.reference);
    let motion = RadialMotion::new(s.motion.initial_radius_m, s.motion.radial_velocity_mps)
        .map_err(|e| at(format!("{name}.motion"), e))?;
    if s.clusters.is_empty() {
        return Err(Error::invalid(format!("{name}.clusters"), "at least one cluster is required"));
    }
    let mut components = Vec::with_capacity(s.clusters.len());
    let mut paths = Vec::with_capacity(s.clusters.len());
    for (i, c) in s.clusters.iter().enumerate() {
        let field = format!("{name}.clusters[{i}]");
        let mean = direction(&format!("{field}.mean_deg"), c.mean_deg)?;
        components.push(VmfComponent::new(mean, c.kappa, c.weight).map_err(|e| at(field.clone(), e))?);
        let path = match (&c.path, &s.cluster_motion) {
            (Some(p), _) => Some(validate_path(&format!("{field}.path"), mean, p)?),
            (None, Some(p)) => Some(validate_path(&format!("{name}.cluster_motion"), mean, p)?),
            (None, None) => None,
        };
        paths.push(path);
    }
    let mixture = VmfMixture::new(components).map_err(|e| at(format!("{name}.clusters"), e))?;
    Ok(SideConfig {
        array,
        motion,
        mixture,
        cluster_paths: paths,
    })
}
