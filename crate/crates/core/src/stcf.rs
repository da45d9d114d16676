//! Space-time correlation of the polarized two-sphere channel.
//!
//! The normalized correlation between subchannels `(p, m)` and `(q, n)`
//! (receive index first) factors into a transmit-side and a receive-side
//! integral per polarization pair, weighted by the depolarization
//! statistics:
//!
//! ```text
//! E[h_pm h*_qn] =   T_v(m,n) R_v(p,q)
//!                 + E[1/XPD_v]            T_h(m,n) R_v(p,q)
//!                 + E[1/XPD_h] E[1/CPR]   T_v(m,n) R_h(p,q)
//!                 + E[1/CPR]              T_h(m,n) R_h(p,q)
//! ```
//!
//! with `X_pol(a,b) = integral of exp(-j k0 D_ab) F_a F_b p` over the
//! scatterer directions of that side. Side integrals are evaluated with a
//! product rule per mixture component and an automatic
//! refinement check; [`stcf_monte_carlo`] is the sampled counterpart used
//! as an oracle.

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::antenna::{field_patterns, DirectionTrig, Polarization};
use crate::directional::{component_rule_vectors, translate_mixture, VmfMixture};
use crate::error::{Error, Result};
use crate::geometry::{
    distance_diff_from_projections, ArrayGeometry,
    EXPANSION_RATIO_LIMIT,
};
use crate::motion::{motion_path, MotionPathSpec, RadialMotion, Trajectory};
use crate::rng::{self, Domain};

/// Matrices whose smallest eigenvalue is below this are projected back onto
/// the PSD cone.
pub const PSD_REPAIR_THRESHOLD: f64 = -1e-10;

/// Linear `E[1/X]` for a mean ratio given in dB, `10^(-dB/10)`.
pub fn xpd_from_db(db_value: f64) -> f64 {
    10f64.powf(-db_value / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolarizationStats {
    pub inv_xpd_v: f64,
    pub inv_xpd_h: f64,
    pub inv_cpr: f64,
}

impl DepolarizationStats {
    pub fn new(inv_xpd_v: f64, inv_xpd_h: f64, inv_cpr: f64) -> Result<Self> {
        for (name, v) in [("inv_xpd_v", inv_xpd_v), ("inv_xpd_h", inv_xpd_h)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(inv_cpr > 0.0 && inv_cpr.is_finite()) {
            return Err(Error::invalid(
                "inv_cpr",
                format!("must be finite and > 0, got {inv_cpr}"),
            ));
        }
        Ok(DepolarizationStats {
            inv_xpd_v,
            inv_xpd_h,
            inv_cpr,
        })
    }

    pub fn from_db(xpd_v_db: f64, xpd_h_db: f64, cpr_db: f64) -> Result<Self> {
        Self::new(xpd_from_db(xpd_v_db), xpd_from_db(xpd_h_db), xpd_from_db(cpr_db))
    }

    /// `(receive pol, transmit pol, weight)` for the four channel components.
    pub fn terms(&self) -> [(Polarization, Polarization, f64); 4] {
        use Polarization::{H, V};
        [
            (V, V, 1.0),
            (V, H, self.inv_xpd_v),
            (H, V, self.inv_xpd_h * self.inv_cpr),
            (H, H, self.inv_cpr),
        ]
    }
}

/// Element radiation model used inside the side integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatternModel {
    #[default]
    Dipole,
    /// Unit vertical response in every direction, no horizontal response.
    Isotropic,
}

/// One side of the link frozen at a time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SideSnapshot {
    pub mixture: VmfMixture,
    pub radius: f64,
    pub geometry: ArrayGeometry,
    pub tilts: Vec<f64>,
    pub patterns: PatternModel,
}

impl SideSnapshot {
    pub fn new(
        mixture: VmfMixture,
        radius: f64,
        geometry: ArrayGeometry,
        tilts: Vec<f64>,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        if tilts.len() != geometry.num_elements() {
            return Err(Error::DimensionMismatch {
                expected: geometry.num_elements(),
                got: tilts.len(),
            });
        }
        Ok(SideSnapshot {
            mixture,
            radius,
            geometry,
            tilts,
            patterns: PatternModel::Dipole,
        })
    }

    pub fn with_patterns(mut self, patterns: PatternModel) -> Self {
        self.patterns = patterns;
        self
    }

    pub fn num_elements(&self) -> usize {
        self.geometry.num_elements()
    }
}

/// Resolution and refinement policy for the side integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Gauss-Legendre nodes in the polar cosine about each component mean.
    pub n_polar: usize,
    /// Uniform nodes around each component mean.
    pub n_azimuth: usize,
    pub rel_tol: f64,
    pub max_doublings: usize,
    /// When false a single evaluation at the base resolution is returned.
    pub adaptive: bool,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            n_polar: 64,
            n_azimuth: 128,
            rel_tol: 1e-4,
            max_doublings: 3,
            adaptive: true,
        }
    }
}

/// All element-pair integrals of one side for both polarizations, row-major
/// `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SideIntegrals {
    n: usize,
    v: Vec<Complex64>,
    h: Vec<Complex64>,
    /// Integral of `|F_a F_b| p` summed over both polarizations, used as
    /// the convergence scale.
    scale: Vec<f64>,
}

impl SideIntegrals {
    fn zeros(n: usize) -> Self {
        SideIntegrals {
            n,
            v: vec![Complex64::new(0.0, 0.0); n * n],
            h: vec![Complex64::new(0.0, 0.0); n * n],
            scale: vec![0.0; n * n],
        }
    }

    pub fn num_elements(&self) -> usize {
        self.n
    }

    pub fn get(&self, pol: Polarization, a: usize, b: usize) -> Complex64 {
        match pol {
            Polarization::V => self.v[a * self.n + b],
            Polarization::H => self.h[a * self.n + b],
        }
    }

    fn mirror(&mut self) {
        let n = self.n;
        for a in 0..n {
            for b in 0..a {
                self.v[a * n + b] = self.v[b * n + a].conj();
                self.h[a * n + b] = self.h[b * n + a].conj();
                self.scale[a * n + b] = self.scale[b * n + a];
            }
            self.v[a * n + a].im = 0.0;
            self.h[a * n + a].im = 0.0;
        }
    }

    /// Accumulates one weighted scatterer direction into the upper triangle.
    fn accumulate(&mut self, kernel: &SideKernel, v: &Vector3<f64>, w: f64) {
        let n = self.n;
        let c = kernel.axis.dot(v).clamp(-1.0, 1.0);
        let trig = DirectionTrig::from_vector(v);
        let mut buf = [(0.0, 0.0, 0.0); 8];
        let mut heap = Vec::new();
        // small arrays stay on the stack
        let per: &mut [(f64, f64, f64)] = if n <= buf.len() {
            &mut buf[..n]
        } else {
            heap.resize(n, (0.0, 0.0, 0.0));
            &mut heap
        };
        for (k, slot) in per.iter_mut().enumerate() {
            let (fv, fh) = match kernel.patterns {
                PatternModel::Dipole => {
                    let (sg, cg) = kernel.tilt_trig[k];
                    field_patterns(&trig, sg, cg)
                }
                PatternModel::Isotropic => (1.0, 0.0),
            };
            *slot = (fv, fh, kernel.axial[k] * c);
        }
        for (a, &(fva, fha, xa)) in per.iter().enumerate() {
            for (b, &(fvb, fhb, xb)) in per.iter().enumerate().skip(a) {
                let idx = a * n + b;
                let phase = if a == b {
                    Complex64::new(1.0, 0.0)
                } else {
                    let dist = distance_diff_from_projections(xa, xb, kernel.radius);
                    Complex64::from_polar(1.0, -kernel.k0 * dist)
                };
                let pv = w * fva * fvb;
                let ph = w * fha * fhb;
                self.v[idx] += phase * pv;
                self.h[idx] += phase * ph;
                self.scale[idx] += pv + ph;
            }
        }
    }

    fn max_change(&self, other: &SideIntegrals) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for i in 0..self.n * self.n {
            let scale = self.scale[i].max(other.scale[i]).max(f64::MIN_POSITIVE);
            let change = (self.v[i] - other.v[i]).norm().max((self.h[i] - other.h[i]).norm()) / scale;
            if change > worst.0 {
                worst = (change, i);
            }
        }
        worst
    }
}

/// Per-evaluation constants of one side.
struct SideKernel {
    axis: Vector3<f64>,
    axial: Vec<f64>,
    tilt_trig: Vec<(f64, f64)>,
    patterns: PatternModel,
    radius: f64,
    k0: f64,
}

impl SideKernel {
    fn new(snap: &SideSnapshot, wavelength: f64) -> Self {
        SideKernel {
            axis: snap.geometry.orientation().unit_vector(),
            axial: snap.geometry.axial_offsets(wavelength),
            tilt_trig: snap.tilts.iter().map(|t| t.sin_cos()).collect(),
            patterns: snap.patterns,
            radius: snap.radius,
            k0: TAU / wavelength,
        }
    }
}

fn side_integrals_at(snap: &SideSnapshot, wavelength: f64, n_polar: usize, n_azimuth: usize) -> SideIntegrals {
    let n = snap.num_elements();
    let kernel = SideKernel::new(snap, wavelength);
    let mut out = SideIntegrals::zeros(n);
    for comp in snap.mixture.components() {
        if comp.weight == 0.0 {
            continue;
        }
        for (v, w) in component_rule_vectors(comp, n_polar, n_azimuth) {
            out.accumulate(&kernel, &v, comp.weight * w);
        }
    }
    out.mirror();
    out
}

/// Every side integral of `snap`. The base rule is accepted when it agrees
/// with the rule at half its resolution to `settings.rel_tol`; otherwise
/// both resolutions are doubled, up to `settings.max_doublings` times.
pub fn side_integrals(
    snap: &SideSnapshot,
    wavelength: f64,
    settings: &QuadratureSettings,
) -> Result<SideIntegrals> {
    let ratio = snap.geometry.max_element_norm(wavelength) / snap.radius;
    if ratio > EXPANSION_RATIO_LIMIT && !EXPANSION_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!(
            "array extent / sphere radius = {ratio:.3} exceeds {EXPANSION_RATIO_LIMIT}; \
             the second-order distance expansion is degraded"
        );
    }
    let (mut np, mut na) = (settings.n_polar.max(1), settings.n_azimuth.max(1));
    let mut fine = side_integrals_at(snap, wavelength, np, na);
    if !settings.adaptive {
        return Ok(fine);
    }
    let mut coarse = side_integrals_at(snap, wavelength, (np / 2).max(1), (na / 2).max(1));
    for doubling in 0..=settings.max_doublings {
        let (change, i) = fine.max_change(&coarse);
        if change <= settings.rel_tol {
            return Ok(fine);
        }
        if doubling == settings.max_doublings {
            return Err(Error::QuadratureNonConvergence {
                last: fine.v[i],
                previous: coarse.v[i],
            });
        }
        np *= 2;
        na *= 2;
        coarse = fine;
        fine = side_integrals_at(snap, wavelength, np, na);
    }
    unreachable!("the loop returns on its last iteration")
}

static EXPANSION_WARNED: AtomicBool = AtomicBool::new(false);

/// A single side integral for one polarization and element pair.
pub fn side_integral(
    snap: &SideSnapshot,
    pol: Polarization,
    m: usize,
    n: usize,
    wavelength: f64,
    settings: &QuadratureSettings,
) -> Result<Complex64> {
    let len = snap.num_elements();
    for idx in [m, n] {
        if idx >= len {
            return Err(Error::IndexOutOfRange { index: idx, len });
        }
    }
    Ok(side_integrals(snap, wavelength, settings)?.get(pol, m, n))
}

/// Unnormalized `E[h_pm h*_qn]` from precomputed side integrals.
pub fn unnormalized_entry(
    tx: &SideIntegrals,
    rx: &SideIntegrals,
    depol: &DepolarizationStats,
    p: usize,
    m: usize,
    q: usize,
    n: usize,
) -> Complex64 {
    depol
        .terms()
        .iter()
        .map(|&(pol_r, pol_t, w)| tx.get(pol_t, m, n) * rx.get(pol_r, p, q) * w)
        .sum()
}

fn self_power(
    tx: &SideIntegrals,
    rx: &SideIntegrals,
    depol: &DepolarizationStats,
    p: usize,
    m: usize,
) -> Result<f64> {
    let power = unnormalized_entry(tx, rx, depol, p, m, p, m).re;
    if !(power > 0.0) {
        return Err(Error::ZeroSelfPower { rx: p, tx: m });
    }
    Ok(power)
}

pub fn normalized_entry(
    tx: &SideIntegrals,
    rx: &SideIntegrals,
    depol: &DepolarizationStats,
    (p, m): (usize, usize),
    (q, n): (usize, usize),
) -> Result<Complex64> {
    if (p, m) == (q, n) {
        self_power(tx, rx, depol, p, m)?;
        return Ok(Complex64::new(1.0, 0.0));
    }
    let num = unnormalized_entry(tx, rx, depol, p, m, q, n);
    let den = (self_power(tx, rx, depol, p, m)? * self_power(tx, rx, depol, q, n)?).sqrt();
    Ok(num / den)
}

/// Normalized correlation between subchannel `(p, m)` and `(q, n)`, with
/// `p, q` receive and `m, n` transmit element indices.
#[allow(clippy::too_many_arguments)]
pub fn correlation_entry(
    p: usize,
    m: usize,
    q: usize,
    n: usize,
    tx: &SideSnapshot,
    rx: &SideSnapshot,
    depol: &DepolarizationStats,
    wavelength: f64,
    settings: &QuadratureSettings,
) -> Result<Complex64> {
    for (idx, len) in [(p, rx.num_elements()), (q, rx.num_elements())]
        .into_iter()
        .chain([(m, tx.num_elements()), (n, tx.num_elements())])
    {
        if idx >= len {
            return Err(Error::IndexOutOfRange { index: idx, len });
        }
    }
    let ti = side_integrals(tx, wavelength, settings)?;
    let ri = side_integrals(rx, wavelength, settings)?;
    normalized_entry(&ti, &ri, depol, (p, m), (q, n))
}

/// `US x US` correlation matrix of `vec(H)`; row/column `i = m U + p` for
/// receive element `p` and transmit element `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: DMatrix<Complex64>,
    u: usize,
    s: usize,
}

impl CorrelationMatrix {
    pub fn from_matrix(matrix: DMatrix<Complex64>, u: usize, s: usize) -> Result<Self> {
        if matrix.nrows() != u * s || matrix.ncols() != u * s {
            return Err(Error::DimensionMismatch {
                expected: u * s,
                got: matrix.nrows(),
            });
        }
        Ok(CorrelationMatrix { matrix, u, s })
    }

    pub fn identity(u: usize, s: usize) -> Self {
        CorrelationMatrix {
            matrix: DMatrix::identity(u * s, u * s),
            u,
            s,
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn rx_elements(&self) -> usize {
        self.u
    }

    pub fn tx_elements(&self) -> usize {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.u * self.s
    }

    /// Position of subchannel `(rx p, tx m)` in `vec(H)`.
    pub fn index(&self, p: usize, m: usize) -> usize {
        m * self.u + p
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn max_hermitian_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = hermitian_part(&self.matrix);
        SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Projects onto the PSD cone with unit diagonal. Without `force` the
    /// matrix is left alone unless its smallest eigenvalue is below
    /// [`PSD_REPAIR_THRESHOLD`]. Returns whether anything changed.
    pub fn repair_psd(&mut self, force: bool) -> bool {
        if !force && self.min_eigenvalue() >= PSD_REPAIR_THRESHOLD {
            return false;
        }
        let eig = SymmetricEigen::new(hermitian_part(&self.matrix));
        let n = self.dim();
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let mut rebuilt = DMatrix::<Complex64>::zeros(n, n);
        for (k, &l) in clipped.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            rebuilt += (v * v.adjoint()) * Complex64::new(l, 0.0);
        }
        let d: Vec<f64> = (0..n).map(|i| rebuilt[(i, i)].re.max(f64::MIN_POSITIVE).sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                rebuilt[(i, j)] /= d[i] * d[j];
            }
            rebuilt[(i, i)] = Complex64::new(1.0, 0.0);
        }
        // exact Hermitian symmetry
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)].conj());
                rebuilt[(i, j)] = avg;
                rebuilt[(j, i)] = avg.conj();
            }
        }
        self.matrix = rebuilt;
        true
    }

    /// Moduli of the strict upper triangle, row by row.
    pub fn upper_moduli(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix[(i, j)].norm())
            .collect()
    }
}

fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Assembles the normalized matrix from side integrals.
pub fn assemble_correlation(
    tx: &SideIntegrals,
    rx: &SideIntegrals,
    depol: &DepolarizationStats,
) -> Result<CorrelationMatrix> {
    let (u, s) = (rx.num_elements(), tx.num_elements());
    let dim = u * s;
    let pair = |i: usize| (i % u, i / u);
    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let r = normalized_entry(tx, rx, depol, pair(i), pair(j))?;
            matrix[(i, j)] = r;
            matrix[(j, i)] = r.conj();
        }
    }
    let mut out = CorrelationMatrix { matrix, u, s };
    out.repair_psd(false);
    Ok(out)
}

pub fn correlation_matrix(
    tx: &SideSnapshot,
    rx: &SideSnapshot,
    depol: &DepolarizationStats,
    wavelength: f64,
    settings: &QuadratureSettings,
) -> Result<CorrelationMatrix> {
    let ti = side_integrals(tx, wavelength, settings)?;
    let ri = side_integrals(rx, wavelength, settings)?;
    assemble_correlation(&ti, &ri, depol)
}

/// Average modulus of the strict upper triangle.
pub fn mean_correlation(r: &CorrelationMatrix) -> Result<f64> {
    let n = r.dim();
    if n < 2 {
        return Err(Error::invalid("correlation matrix", "needs at least two subchannels"));
    }
    let moduli = r.upper_moduli();
    Ok(moduli.iter().sum::<f64>() / moduli.len() as f64)
}

/// Sampled estimate of the correlation matrix with per-entry standard
/// errors.
#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub estimate: DMatrix<Complex64>,
    pub std_error: DMatrix<f64>,
}

/// Number of independent batches used for the standard errors.
pub const MC_BATCHES: usize = 50;

/// Replaces the side integrals by sample averages over `n_scatterers`
/// directions drawn from each side's mixture. Standard errors come from
/// `MC_BATCHES` independent batches; batch `b` draws from stream
/// `(seed, b)`.
pub fn stcf_monte_carlo(
    tx: &SideSnapshot,
    rx: &SideSnapshot,
    depol: &DepolarizationStats,
    wavelength: f64,
    n_scatterers: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n_scatterers < MC_BATCHES {
        return Err(Error::invalid(
            "n_scatterers",
            format!("need at least {MC_BATCHES}, got {n_scatterers}"),
        ));
    }
    let per_batch = n_scatterers / MC_BATCHES;
    let batches: Vec<(SideIntegrals, SideIntegrals)> = (0..MC_BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, Domain::Scatterers, b as u64);
            let side = |snap: &SideSnapshot, rng: &mut rand_chacha::ChaCha8Rng| {
                let kernel = SideKernel::new(snap, wavelength);
                let mut acc = SideIntegrals::zeros(snap.num_elements());
                let w = 1.0 / per_batch as f64;
                for _ in 0..per_batch {
                    let d = snap.mixture.draw(rng);
                    acc.accumulate(&kernel, &d.unit_vector(), w);
                }
                acc.mirror();
                acc
            };
            let t = side(tx, &mut rng);
            let r = side(rx, &mut rng);
            (t, r)
        })
        .collect();

    let average = |pick: fn(&(SideIntegrals, SideIntegrals)) -> &SideIntegrals| {
        let first = pick(&batches[0]);
        let mut acc = SideIntegrals::zeros(first.n);
        for b in &batches {
            let s = pick(b);
            for i in 0..acc.v.len() {
                acc.v[i] += s.v[i] / MC_BATCHES as f64;
                acc.h[i] += s.h[i] / MC_BATCHES as f64;
                acc.scale[i] += s.scale[i] / MC_BATCHES as f64;
            }
        }
        acc
    };
    let tx_all = average(|b| &b.0);
    let rx_all = average(|b| &b.1);

    let (u, s) = (rx.num_elements(), tx.num_elements());
    let dim = u * s;
    let pair = |i: usize| (i % u, i / u);
    let mut estimate = DMatrix::<Complex64>::zeros(dim, dim);
    let mut std_error = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let full = normalized_entry(&tx_all, &rx_all, depol, pair(i), pair(j))?;
            let per: Vec<Complex64> = batches
                .iter()
                .map(|(t, r)| normalized_entry(t, r, depol, pair(i), pair(j)))
                .collect::<Result<_>>()?;
            let mean: Complex64 = per.iter().sum::<Complex64>() / per.len() as f64;
            let var = per.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>()
                / (per.len() as f64 - 1.0);
            let se = (var / per.len() as f64).sqrt();
            estimate[(i, j)] = full;
            estimate[(j, i)] = full.conj();
            std_error[(i, j)] = se;
            std_error[(j, i)] = se;
        }
    }
    Ok(MonteCarloEstimate {
        estimate,
        std_error,
    })
}

/// Time-invariant description of one link side.
#[derive(Debug, Clone, PartialEq)]
pub struct SideModel {
    pub mixture: VmfMixture,
    pub motion: RadialMotion,
    pub geometry: ArrayGeometry,
    pub tilts: Vec<f64>,
    /// One optional path per mixture component; `None` keeps that mean fixed.
    pub cluster_paths: Vec<Option<MotionPathSpec>>,
}

impl SideModel {
    pub fn new(
        mixture: VmfMixture,
        motion: RadialMotion,
        geometry: ArrayGeometry,
        tilts: Vec<f64>,
    ) -> Result<Self> {
        if tilts.len() != geometry.num_elements() {
            return Err(Error::DimensionMismatch {
                expected: geometry.num_elements(),
                got: tilts.len(),
            });
        }
        let q = mixture.len();
        Ok(SideModel {
            mixture,
            motion,
            geometry,
            tilts,
            cluster_paths: vec![None; q],
        })
    }

    pub fn with_paths(mut self, paths: Vec<Option<MotionPathSpec>>) -> Result<Self> {
        if paths.len() != self.mixture.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mixture.len(),
                got: paths.len(),
            });
        }
        self.cluster_paths = paths;
        Ok(self)
    }

    pub fn is_random(&self) -> bool {
        self.cluster_paths
            .iter()
            .flatten()
            .any(|p| !p.is_deterministic())
    }

    pub fn horizon(&self) -> f64 {
        self.cluster_paths
            .iter()
            .flatten()
            .map(|p| p.horizon())
            .fold(f64::INFINITY, f64::min)
    }

    /// Realizes every cluster path; draw `d` uses streams
    /// `(seed, d * Q + q)`.
    pub fn realize_paths(&self, seed: u64, draw: usize) -> Result<Vec<Option<Trajectory>>> {
        let q_count = self.cluster_paths.len();
        self.cluster_paths
            .iter()
            .enumerate()
            .map(|(q, spec)| {
                spec.as_ref()
                    .map(|s| {
                        let idx = (draw * q_count + q) as u64;
                        motion_path(s, &mut rng::stream(seed, Domain::Trajectory, idx))
                    })
                    .transpose()
            })
            .collect()
    }

    /// Mixture with every cluster mean advanced to `t`.
    pub fn mixture_at(&self, t: f64, paths: &[Option<Trajectory>]) -> Result<VmfMixture> {
        let means = self
            .mixture
            .components()
            .iter()
            .zip(paths)
            .map(|(c, path)| match path {
                Some(tr) => tr.direction_at(t),
                None => Ok(c.mean),
            })
            .collect::<Result<Vec<_>>>()?;
        translate_mixture(&self.mixture, &means)
    }

    pub fn snapshot(&self, t: f64, paths: &[Option<Trajectory>]) -> Result<SideSnapshot> {
        SideSnapshot::new(
            self.mixture_at(t, paths)?,
            self.motion.radius_at(t)?,
            self.geometry.clone(),
            self.tilts.clone(),
        )
    }
}

/// Everything needed to evaluate the correlation over time.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub tx: SideModel,
    pub rx: SideModel,
    pub depol: DepolarizationStats,
    pub wavelength: f64,
    pub quadrature: QuadratureSettings,
}

impl Scene {
    pub fn horizon(&self) -> f64 {
        self.tx.horizon().min(self.rx.horizon())
    }

    pub fn is_random(&self) -> bool {
        self.tx.is_random() || self.rx.is_random()
    }

    fn check_times(&self, times: &[f64]) -> Result<()> {
        let horizon = self.horizon();
        for &t in times {
            if !(t >= 0.0) {
                return Err(Error::invalid("times", format!("must be >= 0, got {t}")));
            }
            if t > horizon * (1.0 + 1e-12) {
                return Err(Error::BeyondHorizon { time: t, horizon });
            }
        }
        Ok(())
    }

    /// Correlation matrix at `t` for one realization of the cluster paths.
    pub fn matrix_for_draw(&self, t: f64, seed: u64, draw: usize) -> Result<CorrelationMatrix> {
        let tx_paths = self.tx.realize_paths(seed ^ TX_PATH_SALT, draw)?;
        let rx_paths = self.rx.realize_paths(seed, draw)?;
        let tx = self.tx.snapshot(t, &tx_paths)?;
        let rx = self.rx.snapshot(t, &rx_paths)?;
        correlation_matrix(&tx, &rx, &self.depol, self.wavelength, &self.quadrature)
    }
}

const TX_PATH_SALT: u64 = 0x7478_5f70_6174_6873;

/// Correlation matrix at each time. With random cluster paths the matrices
/// are averaged over `trajectory_draws` independent path realizations (draw
/// `d` uses streams derived from `(seed, d)`) and projected back onto the
/// PSD cone.
pub fn stcf_over_time(
    scene: &Scene,
    times: &[f64],
    trajectory_draws: usize,
    seed: u64,
) -> Result<Vec<CorrelationMatrix>> {
    scene.check_times(times)?;
    let draws = if scene.is_random() {
        trajectory_draws.max(1)
    } else {
        1
    };
    let jobs: Vec<(usize, usize)> = (0..times.len())
        .flat_map(|ti| (0..draws).map(move |d| (ti, d)))
        .collect();
    let results: Vec<CorrelationMatrix> = jobs
        .par_iter()
        .map(|&(ti, d)| scene.matrix_for_draw(times[ti], seed, d))
        .collect::<Result<_>>()?;
    if draws == 1 {
        return Ok(results);
    }
    Ok(results
        .chunks(draws)
        .map(|chunk| {
            let mut sum = chunk[0].matrix.clone();
            for m in &chunk[1..] {
                sum += &m.matrix;
            }
            sum /= Complex64::new(draws as f64, 0.0);
            let mut avg = CorrelationMatrix {
                matrix: sum,
                u: chunk[0].u,
                s: chunk[0].s,
            };
            avg.repair_psd(true);
            avg
        })
        .collect())
}
