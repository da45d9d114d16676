//! C ABI for the gbsm channel simulator.
//!
//! Every fallible function returns a [`GbsmStatus`]. On failure the
//! message is kept per thread and read with [`gbsm_last_error_message`].
//! Scenarios are opaque handles created by [`gbsm_scenario_load`] or
//! [`gbsm_scenario_parse`] and released with [`gbsm_scenario_free`].
//! Angles are radians and SNRs are dB; complex outputs are interleaved
//! `(re, im)` pairs in row-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gbsm_core::directional::{vmf_pdf, VmfComponent};
use gbsm_core::experiments::db_to_linear;
use gbsm_core::geometry::UnitDirection;
use gbsm_core::motion::{motion_path, MotionPathSpec};
use gbsm_core::realization::ergodic_capacity;
use gbsm_core::rng::{self, Domain};
use gbsm_core::scenario::{load_scenario, parse_scenario, ScenarioConfig};
use gbsm_core::stcf::{mean_correlation, stcf_over_time, CorrelationMatrix};
use gbsm_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GbsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A requested time lies past a trajectory horizon or a sphere collapses.
    OutOfRange = 3,
    /// Quadrature failed to converge or a matrix is not usable.
    Numerical = 4,
    Parse = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque scenario handle.
pub struct GbsmScenario {
    cfg: ScenarioConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> GbsmStatus {
    match e {
        Error::Invalid { .. } | Error::IndexOutOfRange { .. } | Error::DimensionMismatch { .. } => {
            GbsmStatus::InvalidArgument
        }
        Error::SphereCollapse { .. } | Error::BeyondHorizon { .. } => GbsmStatus::OutOfRange,
        Error::QuadratureNonConvergence { .. } | Error::ZeroSelfPower { .. } | Error::NotHermitian { .. } => {
            GbsmStatus::Numerical
        }
        Error::Parse(_) => GbsmStatus::Parse,
        Error::Io(_) => GbsmStatus::Io,
    }
}

struct Failure(GbsmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: GbsmStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Runs `f`, converting errors and panics into a status plus a message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GbsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GbsmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("internal panic: {message}"));
            GbsmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(GbsmStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GbsmStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn handle_arg<'a>(h: *const GbsmScenario) -> Result<&'a GbsmScenario, Failure> {
    h.as_ref()
        .ok_or_else(|| fail(GbsmStatus::NullPointer, "scenario handle is null"))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(GbsmStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn buffer_arg<'a>(p: *mut f64, capacity: usize, needed: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(fail(GbsmStatus::NullPointer, format!("`{name}` is null")));
    }
    if capacity < needed {
        return Err(fail(
            GbsmStatus::BufferTooSmall,
            format!("`{name}` holds {capacity} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

fn matrix_at(s: &GbsmScenario, polarization: &str, time: f64) -> Result<CorrelationMatrix, Failure> {
    let cfg = &s.cfg;
    let pol = cfg.polarization(polarization)?;
    let scene = cfg.scene(&pol)?;
    let mut mats = stcf_over_time(&scene, &[time], cfg.n_trajectory_draws, cfg.seed)?;
    Ok(mats.remove(0))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gbsm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Clears the last error of this thread.
#[no_mangle]
pub extern "C" fn gbsm_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gbsm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gbsm_scenario_load(path: *const c_char, out: *mut *mut GbsmScenario) -> GbsmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = load_scenario(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(GbsmScenario { cfg }));
        Ok(())
    })
}

/// Parses and validates a scenario from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gbsm_scenario_parse(text: *const c_char, out: *mut *mut GbsmScenario) -> GbsmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = parse_scenario(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(GbsmScenario { cfg }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `scenario` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gbsm_scenario_free(scenario: *mut GbsmScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Overrides the seed used by every random computation on this handle.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gbsm_scenario_set_seed(scenario: *mut GbsmScenario, seed: u64) -> GbsmStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or_else(|| fail(GbsmStatus::NullPointer, "scenario handle is null"))?;
        s.cfg.seed = seed;
        Ok(())
    })
}

/// Receive and transmit element counts; the correlation matrix has
/// dimension `rx * tx`.
///
/// # Safety
/// `scenario` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gbsm_scenario_dims(
    scenario: *const GbsmScenario,
    rx_elements: *mut usize,
    tx_elements: *mut usize,
) -> GbsmStatus {
    guard(|| {
        let s = handle_arg(scenario)?;
        *out_arg(rx_elements, "rx_elements")? = s.cfg.rx.array.num_elements();
        *out_arg(tx_elements, "tx_elements")? = s.cfg.tx.array.num_elements();
        Ok(())
    })
}

/// Correlation matrix at `time_s` for a polarization label, written as
/// `dim * dim` interleaved complex values (`2 * dim * dim` doubles).
///
/// # Safety
/// `scenario` must be a live handle, `polarization` a NUL-terminated
/// string and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn gbsm_correlation_matrix(
    scenario: *const GbsmScenario,
    polarization: *const c_char,
    time_s: f64,
    out: *mut f64,
    capacity: usize,
) -> GbsmStatus {
    guard(|| {
        let s = handle_arg(scenario)?;
        let label = str_arg(polarization, "polarization")?;
        let dim = s.cfg.rx.array.num_elements() * s.cfg.tx.array.num_elements();
        let buf = buffer_arg(out, capacity, 2 * dim * dim, "out")?;
        let r = matrix_at(s, label, time_s)?;
        for i in 0..dim {
            for j in 0..dim {
                let z = r.entry(i, j);
                buf[2 * (i * dim + j)] = z.re;
                buf[2 * (i * dim + j) + 1] = z.im;
            }
        }
        Ok(())
    })
}

/// Mean off-diagonal correlation modulus at `time_s`.
///
/// # Safety
/// `scenario` must be a live handle, `polarization` a NUL-terminated
/// string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gbsm_mean_correlation(
    scenario: *const GbsmScenario,
    polarization: *const c_char,
    time_s: f64,
    out: *mut f64,
) -> GbsmStatus {
    guard(|| {
        let s = handle_arg(scenario)?;
        let label = str_arg(polarization, "polarization")?;
        let out = out_arg(out, "out")?;
        *out = mean_correlation(&matrix_at(s, label, time_s)?)?;
        Ok(())
    })
}

/// Ergodic capacity (bps/Hz) and its standard error at `time_s`. A zero
/// `n_draws` uses the scenario's draw count.
///
/// # Safety
/// `scenario` must be a live handle, `polarization` a NUL-terminated
/// string and both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gbsm_ergodic_capacity(
    scenario: *const GbsmScenario,
    polarization: *const c_char,
    time_s: f64,
    snr_db: f64,
    n_draws: usize,
    mean: *mut f64,
    std_error: *mut f64,
) -> GbsmStatus {
    guard(|| {
        let s = handle_arg(scenario)?;
        let label = str_arg(polarization, "polarization")?;
        let mean = out_arg(mean, "mean")?;
        let std_error = out_arg(std_error, "std_error")?;
        let pol = s.cfg.polarization(label)?;
        let r = matrix_at(s, label, time_s)?;
        let draws = if n_draws == 0 { s.cfg.n_channel_draws } else { n_draws };
        let stats = ergodic_capacity(&r, db_to_linear(snr_db), s.cfg.snr_inv_xpd(&pol), draws, s.cfg.seed)?;
        *mean = stats.mean;
        *std_error = stats.std_error;
        Ok(())
    })
}

/// Von Mises-Fisher density per unit elevation and azimuth at
/// `(elevation, azimuth)` for a single component.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gbsm_vmf_pdf(
    elevation: f64,
    azimuth: f64,
    mean_elevation: f64,
    mean_azimuth: f64,
    kappa: f64,
    out: *mut f64,
) -> GbsmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = VmfComponent::new(UnitDirection::new(mean_elevation, mean_azimuth), kappa, 1.0)?;
        *out = vmf_pdf(UnitDirection::new(elevation, azimuth), &c);
        Ok(())
    })
}

/// Samples one drifted Brownian path of a cluster mean and writes the
/// `segments + 1` directions on the sphere.
///
/// # Safety
/// `elevations` and `azimuths` must each hold `capacity` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gbsm_motion_path(
    start_elevation: f64,
    start_azimuth: f64,
    rate_elevation: f64,
    rate_azimuth: f64,
    sigma_elevation: f64,
    sigma_azimuth: f64,
    segments: usize,
    dt: f64,
    seed: u64,
    elevations: *mut f64,
    azimuths: *mut f64,
    capacity: usize,
) -> GbsmStatus {
    guard(|| {
        let spec = MotionPathSpec::new(
            UnitDirection::new(start_elevation, start_azimuth),
            (rate_elevation, rate_azimuth),
            (sigma_elevation, sigma_azimuth),
            segments,
            dt,
        )?;
        let n = segments + 1;
        let el = buffer_arg(elevations, capacity, n, "elevations")?;
        let az = buffer_arg(azimuths, capacity, n, "azimuths")?;
        let path = motion_path(&spec, &mut rng::stream(seed, Domain::Trajectory, 0))?;
        for (k, sample) in path.samples().iter().enumerate() {
            el[k] = sample.direction.elevation();
            az[k] = sample.direction.azimuth();
        }
        Ok(())
    })
}
