//! Batch experiments over a scenario. Each returns typed rows and has a
//! matching `*_table` function producing the CSV layout.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::antenna::PolarizationConfig;
use crate::directional::mixture_pdf;
use crate::error::{Error, Result};
use crate::geometry::UnitDirection;
use crate::motion::{motion_path, MotionPathSpec, Trajectory};
use crate::realization::ergodic_capacity;
use crate::rng::{self, Domain};
use crate::scenario::ScenarioConfig;
use crate::stcf::{correlation_matrix, mean_correlation, stcf_monte_carlo, stcf_over_time};
use crate::table::{fmt_f64, Table};

/// Converts a dB value to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StcfRow {
    pub time: f64,
    pub tx_spacing: f64,
    pub rx_spacing: f64,
    pub polarization: String,
    pub mean_corr: f64,
    /// `|r_ij|` over the strict upper triangle, row by row.
    pub moduli: Vec<f64>,
}

/// Correlation over a time x spacing grid for every polarization. Rows are
/// ordered by time, then tx spacing, rx spacing and polarization (in the
/// order given).
pub fn run_stcf_sweep(
    cfg: &ScenarioConfig,
    times: &[f64],
    tx_spacings: &[f64],
    rx_spacings: &[f64],
    polarizations: &[PolarizationConfig],
) -> Result<Vec<StcfRow>> {
    let mut jobs = Vec::new();
    for (pi, pol) in polarizations.iter().enumerate() {
        for (ti, &tx) in tx_spacings.iter().enumerate() {
            for (ri, &rx) in rx_spacings.iter().enumerate() {
                jobs.push((pi, ti, ri, pol, tx, rx));
            }
        }
    }
    let per_job: Vec<Vec<StcfRow>> = jobs
        .par_iter()
        .map(|&(_, _, _, pol, tx, rx)| {
            let scene = cfg.scene_with_spacings(pol, tx, rx)?;
            let mats = stcf_over_time(&scene, times, cfg.n_trajectory_draws, cfg.seed)?;
            times
                .iter()
                .zip(mats)
                .map(|(&time, m)| {
                    Ok(StcfRow {
                        time,
                        tx_spacing: tx,
                        rx_spacing: rx,
                        polarization: pol.label.clone(),
                        mean_corr: mean_correlation(&m)?,
                        moduli: m.upper_moduli(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut keyed: Vec<((usize, usize, usize, usize), StcfRow)> = Vec::new();
    for (job, rows) in jobs.iter().zip(per_job) {
        for (k, row) in rows.into_iter().enumerate() {
            keyed.push(((k, job.1, job.2, job.0), row));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

pub fn stcf_table(rows: &[StcfRow], dim: usize) -> Table {
    let mut header: Vec<String> = ["time_s", "tx_spacing_wl", "rx_spacing_wl", "polarization", "mean_corr"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..dim {
        for j in (i + 1)..dim {
            header.push(format!("abs_r{i}{j}"));
        }
    }
    let mut t = Table::new(header);
    for r in rows {
        let mut cells = vec![
            fmt_f64(r.time),
            fmt_f64(r.tx_spacing),
            fmt_f64(r.rx_spacing),
            r.polarization.clone(),
            fmt_f64(r.mean_corr),
        ];
        cells.extend(r.moduli.iter().map(|&m| fmt_f64(m)));
        t.push(cells);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub time: f64,
    pub snr_db: f64,
    pub polarization: String,
    pub capacity: f64,
    pub std_error: f64,
}

/// Ergodic capacity at the scenario spacings. Every row reuses the same
/// white channel draws, so differences between rows are not Monte Carlo
/// noise. Rows are ordered by time, SNR, then polarization.
pub fn run_capacity_sweep(
    cfg: &ScenarioConfig,
    times: &[f64],
    snrs_db: &[f64],
    polarizations: &[PolarizationConfig],
) -> Result<Vec<CapacityRow>> {
    let mut per_pol = Vec::with_capacity(polarizations.len());
    for pol in polarizations {
        let scene = cfg.scene(pol)?;
        per_pol.push(stcf_over_time(&scene, times, cfg.n_trajectory_draws, cfg.seed)?);
    }
    let mut rows = Vec::new();
    for (ti, &time) in times.iter().enumerate() {
        for &snr_db in snrs_db {
            for (pol, mats) in polarizations.iter().zip(&per_pol) {
                let stats = ergodic_capacity(
                    &mats[ti],
                    db_to_linear(snr_db),
                    cfg.snr_inv_xpd(pol),
                    cfg.n_channel_draws,
                    cfg.seed,
                )?;
                rows.push(CapacityRow {
                    time,
                    snr_db,
                    polarization: pol.label.clone(),
                    capacity: stats.mean,
                    std_error: stats.std_error,
                });
            }
        }
    }
    Ok(rows)
}

pub fn capacity_table(rows: &[CapacityRow]) -> Table {
    let mut t = Table::new(["time_s", "snr_db", "polarization", "ergodic_capacity_bpshz", "std_error"]);
    for r in rows {
        t.push(vec![
            fmt_f64(r.time),
            fmt_f64(r.snr_db),
            r.polarization.clone(),
            fmt_f64(r.capacity),
            fmt_f64(r.std_error),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoaCell {
    pub time: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub density: f64,
}

/// Receive-side mixture density on an `n_elevation x n_azimuth` grid
/// (elevation `i * 180 / (n_elevation - 1)`, azimuth `j * 360 /
/// n_azimuth`) with cluster means moved along their paths. Random paths
/// are averaged over the scenario's trajectory draws.
pub fn run_aoa_map(
    cfg: &ScenarioConfig,
    times: &[f64],
    n_elevation: usize,
    n_azimuth: usize,
) -> Result<Vec<AoaCell>> {
    if n_elevation < 16 || n_azimuth < 16 {
        return Err(Error::invalid(
            "grid_resolution",
            format!("needs at least 16 x 16, got {n_elevation} x {n_azimuth}"),
        ));
    }
    let pol = cfg
        .polarizations
        .first()
        .ok_or_else(|| Error::invalid("polarization", "none configured"))?;
    let side = cfg.scene(pol)?.rx;
    let horizon = side.horizon();
    for &t in times {
        if !(t >= 0.0) || t > horizon * (1.0 + 1e-12) {
            return Err(Error::BeyondHorizon { time: t, horizon });
        }
    }
    let draws = if side.is_random() {
        cfg.n_trajectory_draws
    } else {
        1
    };
    let paths: Vec<Vec<Option<Trajectory>>> = (0..draws)
        .into_par_iter()
        .map(|d| side.realize_paths(cfg.seed, d))
        .collect::<Result<_>>()?;
    let grid: Vec<UnitDirection> = (0..n_elevation)
        .flat_map(|i| {
            (0..n_azimuth).map(move |j| {
                UnitDirection::new(
                    i as f64 * PI / (n_elevation - 1) as f64,
                    j as f64 * TAU / n_azimuth as f64,
                )
            })
        })
        .collect();
    let mut cells = Vec::with_capacity(times.len() * grid.len());
    for &time in times {
        let mixtures = paths
            .iter()
            .map(|p| side.mixture_at(time, p))
            .collect::<Result<Vec<_>>>()?;
        let densities: Vec<f64> = grid
            .par_iter()
            .map(|&d| mixtures.iter().map(|m| mixture_pdf(d, m)).sum::<f64>() / draws as f64)
            .collect();
        for (k, density) in densities.into_iter().enumerate() {
            let (i, j) = (k / n_azimuth, k % n_azimuth);
            cells.push(AoaCell {
                time,
                elevation_deg: i as f64 * 180.0 / (n_elevation - 1) as f64,
                azimuth_deg: j as f64 * 360.0 / n_azimuth as f64,
                density,
            });
        }
    }
    Ok(cells)
}

pub fn aoa_table(cells: &[AoaCell]) -> Table {
    let mut t = Table::new(["time_s", "elevation_deg", "azimuth_deg", "density"]);
    for c in cells {
        t.push(vec![
            fmt_f64(c.time),
            fmt_f64(c.elevation_deg),
            fmt_f64(c.azimuth_deg),
            fmt_f64(c.density),
        ]);
    }
    t
}

/// The path used by the motion demo: the heaviest receive cluster that has
/// one.
pub fn demo_path(cfg: &ScenarioConfig) -> Result<MotionPathSpec> {
    cfg.rx
        .mixture
        .components()
        .iter()
        .zip(&cfg.rx.cluster_paths)
        .filter_map(|(c, p)| p.map(|p| (c.weight, p)))
        .fold(None, |best: Option<(f64, MotionPathSpec)>, (w, p)| match best {
            Some((bw, _)) if bw >= w => best,
            _ => Some((w, p)),
        })
        .map(|(_, p)| p)
        .ok_or_else(|| Error::invalid("rx.clusters", "no cluster has a motion path"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSample {
    pub path_id: usize,
    pub time: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

/// Path 0 is the noise-free drift; paths `1..=n_paths` are random, path `i`
/// drawing from stream `(seed, i)`.
pub fn run_motion_demo(spec: &MotionPathSpec, n_paths: usize, seed: u64) -> Result<Vec<MotionSample>> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "must be at least 1"));
    }
    let trajectories: Vec<Trajectory> = (0..=n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, Domain::MotionDemo, i as u64);
            if i == 0 {
                motion_path(&spec.without_noise(), &mut rng)
            } else {
                motion_path(spec, &mut rng)
            }
        })
        .collect::<Result<_>>()?;
    Ok(trajectories
        .iter()
        .enumerate()
        .flat_map(|(path_id, tr)| {
            tr.samples().iter().map(move |s| {
                let (e, a) = s.direction.to_degrees();
                MotionSample {
                    path_id,
                    time: s.time,
                    elevation_deg: e,
                    azimuth_deg: a,
                }
            })
        })
        .collect())
}

pub fn motion_table(samples: &[MotionSample]) -> Table {
    let mut t = Table::new(["path_id", "time_s", "elevation_deg", "azimuth_deg"]);
    for s in samples {
        t.push(vec![
            s.path_id.to_string(),
            fmt_f64(s.time),
            fmt_f64(s.elevation_deg),
            fmt_f64(s.azimuth_deg),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    pub row: usize,
    pub col: usize,
    pub quadrature_re: f64,
    pub quadrature_im: f64,
    pub monte_carlo_re: f64,
    pub monte_carlo_im: f64,
    pub std_error: f64,
    pub pass: bool,
}

/// Agreement tolerance of the cross-check, in standard errors.
pub const CROSS_CHECK_SIGMAS: f64 = 3.0;

/// Compares every entry of the quadrature correlation matrix at `time`
/// with the sampled estimate from `n_scatterers` directions per side.
pub fn cross_validate(
    cfg: &ScenarioConfig,
    pol: &PolarizationConfig,
    time: f64,
    n_scatterers: usize,
) -> Result<Vec<CrossCheck>> {
    let scene = cfg.scene(pol)?;
    let tx = scene.tx.snapshot(time, &scene.tx.realize_paths(cfg.seed, 0)?)?;
    let rx = scene.rx.snapshot(time, &scene.rx.realize_paths(cfg.seed, 0)?)?;
    let quad = correlation_matrix(&tx, &rx, &scene.depol, scene.wavelength, &scene.quadrature)?;
    let mc = stcf_monte_carlo(&tx, &rx, &scene.depol, scene.wavelength, n_scatterers, cfg.seed)?;
    let dim = quad.dim();
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let q = quad.entry(i, j);
            let m = mc.estimate[(i, j)];
            let se = mc.std_error[(i, j)];
            out.push(CrossCheck {
                row: i,
                col: j,
                quadrature_re: q.re,
                quadrature_im: q.im,
                monte_carlo_re: m.re,
                monte_carlo_im: m.im,
                std_error: se,
                pass: (q - m).norm() <= CROSS_CHECK_SIGMAS * se + 1e-12,
            });
        }
    }
    Ok(out)
}

pub fn cross_table(checks: &[CrossCheck]) -> Table {
    let mut t = Table::new([
        "row", "col", "quad_re", "quad_im", "mc_re", "mc_im", "std_error", "pass",
    ]);
    for c in checks {
        t.push(vec![
            c.row.to_string(),
            c.col.to_string(),
            fmt_f64(c.quadrature_re),
            fmt_f64(c.quadrature_im),
            fmt_f64(c.monte_carlo_re),
            fmt_f64(c.monte_carlo_im),
            fmt_f64(c.std_error),
            c.pass.to_string(),
        ]);
    }
    t
}
