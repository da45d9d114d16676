//! Correlated channel draws, MIMO capacity and its Monte Carlo mean.
//!
//! A channel with correlation `R` is drawn as `vec(H) = R^(1/2) vec(H_w)`
//! where `H_w` has i.i.d. `CN(0, 1)` entries and `vec` stacks columns (the
//! ordering used by [`CorrelationMatrix`]).

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::stcf::{CorrelationMatrix, DepolarizationStats};

/// Largest `|R_ij - conj(R_ji)|`, relative to the largest entry, accepted
/// as Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-9;

/// One `U x S` channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub matrix: DMatrix<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityStats {
    pub mean: f64,
    pub std_error: f64,
    pub n_draws: usize,
}

/// Hermitian square root of a PSD matrix; negative round-off eigenvalues
/// are clipped to zero.
pub fn hermitian_sqrt(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let asymmetry = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asymmetry > HERMITIAN_TOLERANCE * scale {
        return Err(Error::NotHermitian { asymmetry });
    }
    let eig = SymmetricEigen::new((m + m.adjoint()) * Complex64::new(0.5, 0.0));
    let roots = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.adjoint())
}

pub fn matrix_sqrt_psd(r: &CorrelationMatrix) -> Result<DMatrix<Complex64>> {
    hermitian_sqrt(r.matrix())
}

/// Draws `vec(H)` for a fixed correlation matrix.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    sqrt: DMatrix<Complex64>,
    u: usize,
    s: usize,
}

impl ChannelSampler {
    pub fn new(r: &CorrelationMatrix) -> Result<Self> {
        Ok(ChannelSampler {
            sqrt: matrix_sqrt_psd(r)?,
            u: r.rx_elements(),
            s: r.tx_elements(),
        })
    }

    pub fn rx_elements(&self) -> usize {
        self.u
    }

    pub fn tx_elements(&self) -> usize {
        self.s
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelDraw {
        let white = DVector::from_fn(self.u * self.s, |_, _| complex_normal(rng));
        let v = &self.sqrt * white;
        ChannelDraw {
            matrix: DMatrix::from_column_slice(self.u, self.s, v.as_slice()),
        }
    }
}

/// One `CN(0, 1)` sample: real and imaginary parts each have variance 1/2.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn realize_channel<R: Rng + ?Sized>(
    r: &CorrelationMatrix,
    u: usize,
    s: usize,
    rng: &mut R,
) -> Result<ChannelDraw> {
    if r.rx_elements() != u || r.tx_elements() != s {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            got: u * s,
        });
    }
    Ok(ChannelSampler::new(r)?.draw(rng))
}

/// `log2 det(I + (snr / S) H H^H)` in bps/Hz.
pub fn capacity(h: &ChannelDraw, snr: f64, s: usize) -> f64 {
    let u = h.matrix.nrows();
    if snr == 0.0 || u == 0 {
        return 0.0;
    }
    let gram = &h.matrix * h.matrix.adjoint() * Complex64::new(snr / s as f64, 0.0);
    let a = DMatrix::<Complex64>::identity(u, u) + gram;
    let log2_det = match Cholesky::new(a.clone()) {
        Some(ch) => {
            let l = ch.l_dirty();
            2.0 * (0..u).map(|i| l[(i, i)].re.log2()).sum::<f64>()
        }
        None => SymmetricEigen::new(a)
            .eigenvalues
            .iter()
            .map(|l| l.max(1.0).log2())
            .sum(),
    };
    log2_det.max(0.0)
}

/// SNR after the power lost to cross-polar leakage: `rho0 / (1 + inv_xpd)`.
pub fn effective_snr(rho0: f64, inv_xpd: f64) -> f64 {
    rho0 / (1.0 + inv_xpd)
}

/// Which cross-polar statistic reduces the SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XpdSelection {
    V,
    H,
    Mean,
    /// `V` for co-polarized arrays, `Mean` otherwise.
    #[default]
    Auto,
}

impl XpdSelection {
    pub fn resolve(&self, depol: &DepolarizationStats, co_polarized: bool) -> f64 {
        let mean = 0.5 * (depol.inv_xpd_v + depol.inv_xpd_h);
        match self {
            XpdSelection::V => depol.inv_xpd_v,
            XpdSelection::H => depol.inv_xpd_h,
            XpdSelection::Mean => mean,
            XpdSelection::Auto if co_polarized => depol.inv_xpd_v,
            XpdSelection::Auto => mean,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            XpdSelection::V => "v",
            XpdSelection::H => "h",
            XpdSelection::Mean => "mean",
            XpdSelection::Auto => "auto",
        }
    }
}

impl fmt::Display for XpdSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for XpdSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v" => Ok(XpdSelection::V),
            "h" => Ok(XpdSelection::H),
            "mean" => Ok(XpdSelection::Mean),
            "auto" => Ok(XpdSelection::Auto),
            other => Err(Error::invalid(
                "xpd_for_snr",
                format!("unknown selection `{other}` (expected v, h, mean or auto)"),
            )),
        }
    }
}

/// Mean and standard error of the capacity over `n_draws` channels at SNR
/// `effective_snr(rho0, inv_xpd)`. Draw `i` uses stream `(seed, i)`, so the
/// same seed reuses the same white matrices across SNRs and correlation
/// matrices of the same size.
pub fn ergodic_capacity(
    r: &CorrelationMatrix,
    rho0: f64,
    inv_xpd: f64,
    n_draws: usize,
    seed: u64,
) -> Result<CapacityStats> {
    if n_draws == 0 {
        return Err(Error::invalid("n_draws", "must be at least 1"));
    }
    if !(rho0 >= 0.0 && rho0.is_finite()) || !(inv_xpd >= 0.0 && inv_xpd.is_finite()) {
        return Err(Error::invalid(
            "snr",
            format!("rho0 = {rho0} and inv_xpd = {inv_xpd} must be finite and >= 0"),
        ));
    }
    let sampler = ChannelSampler::new(r)?;
    let rho = effective_snr(rho0, inv_xpd);
    let s = sampler.tx_elements();
    let values: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let h = sampler.draw(&mut rng::stream(seed, Domain::Channel, i as u64));
            capacity(&h, rho, s)
        })
        .collect();
    Ok(summarize(&values))
}

fn summarize(values: &[f64]) -> CapacityStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let var = values.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    CapacityStats {
        mean,
        std_error,
        n_draws: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_correlation(seed: u64, n: usize) -> CorrelationMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| complex_normal(&mut rng));
        let mut g = &a * a.adjoint();
        let d: Vec<f64> = (0..n).map(|i| g[(i, i)].re.sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] /= d[i] * d[j];
            }
        }
        CorrelationMatrix::from_matrix(g, 2, n / 2).unwrap()
    }

    fn frobenius(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn sqrt_cases() {
        let id = CorrelationMatrix::identity(2, 2);
        let s = matrix_sqrt_psd(&id).unwrap();
        assert!(frobenius(&(s - DMatrix::identity(4, 4))) < 1e-14);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![c(4.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]));
        let s = hermitian_sqrt(&d).unwrap();
        assert_abs_diff_eq!(s[(0, 0)].re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[(1, 1)].re, 1.0, epsilon = 1e-14);

        for seed in 0..5 {
            let r = random_correlation(seed, 4);
            let s = matrix_sqrt_psd(&r).unwrap();
            let back = &s * s.adjoint();
            assert!(frobenius(&(back - r.matrix())) / frobenius(r.matrix()) < 1e-10);
        }
    }

    #[test]
    fn sqrt_rejects_non_hermitian() {
        let mut m = DMatrix::<Complex64>::identity(2, 2);
        m[(0, 1)] = c(0.5, 0.0);
        assert!(matches!(hermitian_sqrt(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn white_channel_has_unit_power() {
        let r = CorrelationMatrix::identity(2, 2);
        let sampler = ChannelSampler::new(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut power = [0.0; 4];
        for _ in 0..n {
            let h = sampler.draw(&mut rng);
            for (k, z) in h.matrix.iter().enumerate() {
                power[k] += z.norm_sqr();
            }
        }
        for p in power {
            assert!((p / n as f64 - 1.0).abs() < 0.02, "power {}", p / n as f64);
        }
    }

    #[test]
    fn white_channel_parts_are_normal() {
        let r = CorrelationMatrix::identity(2, 2);
        let sampler = ChannelSampler::new(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for _ in 0..n {
            let z = sampler.draw(&mut rng).matrix[(1, 0)];
            re.push(z.re);
            im.push(z.im);
        }
        let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        // asymptotic Kolmogorov-Smirnov critical value at 1%
        let critical = 1.6276 / (n as f64).sqrt();
        for mut xs in [re, im] {
            xs.sort_by(f64::total_cmp);
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = normal.cdf(x);
                    (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
                })
                .fold(0.0, f64::max);
            assert!(d < critical, "KS statistic {d} >= {critical}");
        }
    }

    #[test]
    fn covariance_recovery() {
        let r = random_correlation(42, 4);
        let sampler = ChannelSampler::new(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut acc = DMatrix::<Complex64>::zeros(4, 4);
        for _ in 0..n {
            let h = sampler.draw(&mut rng);
            let v = DVector::from_column_slice(h.matrix.as_slice());
            acc += &v * v.adjoint();
        }
        acc /= c(n as f64, 0.0);
        let err = (acc - r.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 0.02, "max error {err}");
    }

    #[test]
    fn unvec_is_column_stacking() {
        // rank-one R tying vec index 1 (rx 1, tx 0) to index 2 (rx 0, tx 1)
        let mut m = DMatrix::<Complex64>::identity(4, 4);
        m[(1, 2)] = c(1.0, 0.0);
        m[(2, 1)] = c(1.0, 0.0);
        let r = CorrelationMatrix::from_matrix(m, 2, 2).unwrap();
        let h = realize_channel(&r, 2, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((h.matrix[(1, 0)] - h.matrix[(0, 1)]).norm() < 1e-12);
        assert!(realize_channel(&r, 1, 4, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn draws_are_seed_deterministic() {
        let r = random_correlation(1, 4);
        let a = realize_channel(&r, 2, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = realize_channel(&r, 2, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn capacity_closed_forms() {
        let zero = ChannelDraw {
            matrix: DMatrix::zeros(2, 2),
        };
        assert_eq!(capacity(&zero, 10.0, 2), 0.0);
        let id = ChannelDraw {
            matrix: DMatrix::identity(2, 2),
        };
        assert_abs_diff_eq!(capacity(&id, 10.0, 2), 2.0 * 6f64.log2(), epsilon = 1e-12);
        let scalar = ChannelDraw {
            matrix: DMatrix::from_element(1, 1, c(0.6, 0.8)),
        };
        assert_abs_diff_eq!(capacity(&scalar, 7.0, 1), 8f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn capacity_is_monotone_in_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sampler = ChannelSampler::new(&random_correlation(8, 4)).unwrap();
        for _ in 0..50 {
            let h = sampler.draw(&mut rng);
            let mut prev = 0.0;
            for k in 0..40 {
                let cap = capacity(&h, 0.25 * k as f64, 2);
                assert!(cap >= prev && cap >= 0.0);
                prev = cap;
            }
        }
    }

    #[test]
    fn effective_snr_cases() {
        assert_eq!(effective_snr(10.0, 0.0), 10.0);
        assert_abs_diff_eq!(effective_snr(10.0, 0.125893), 8.8819, epsilon = 1e-4);
        assert_eq!(effective_snr(10.0, 1.0), 5.0);
    }

    #[test]
    fn xpd_selection() {
        let d = DepolarizationStats::new(0.1, 0.3, 0.5).unwrap();
        assert_eq!(XpdSelection::V.resolve(&d, false), 0.1);
        assert_eq!(XpdSelection::H.resolve(&d, true), 0.3);
        assert_abs_diff_eq!(XpdSelection::Mean.resolve(&d, true), 0.2, epsilon = 1e-15);
        assert_eq!(XpdSelection::Auto.resolve(&d, true), 0.1);
        assert_abs_diff_eq!(XpdSelection::Auto.resolve(&d, false), 0.2, epsilon = 1e-15);
        assert_eq!("MEAN".parse::<XpdSelection>().unwrap(), XpdSelection::Mean);
        assert!("x".parse::<XpdSelection>().is_err());
    }

    #[test]
    fn ergodic_capacity_matches_direct_rayleigh() {
        let r = CorrelationMatrix::identity(2, 2);
        let stats = ergodic_capacity(&r, 10.0, 0.0, 10_000, 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 10_000;
        let mut total = 0.0;
        for _ in 0..n {
            let hw = DMatrix::from_fn(2, 2, |_, _| complex_normal(&mut rng));
            let a = DMatrix::<Complex64>::identity(2, 2) + &hw * hw.adjoint() * c(5.0, 0.0);
            // 2x2 determinant, real for a Hermitian matrix
            let det = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).re;
            total += det.log2();
        }
        let oracle = total / n as f64;
        assert!((stats.mean - oracle).abs() / oracle < 0.02, "{} vs {oracle}", stats.mean);
    }

    #[test]
    fn standard_error_scaling() {
        let r = random_correlation(3, 4);
        let a = ergodic_capacity(&r, 10.0, 0.1, 2_000, 1).unwrap();
        let b = ergodic_capacity(&r, 10.0, 0.1, 8_000, 1).unwrap();
        let ratio = a.std_error / b.std_error;
        assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
        assert_eq!(b.n_draws, 8_000);
    }

    #[test]
    fn correlation_penalty() {
        let ones = CorrelationMatrix::from_matrix(DMatrix::from_element(4, 4, c(1.0, 0.0)), 2, 2).unwrap();
        let id = CorrelationMatrix::identity(2, 2);
        let full = ergodic_capacity(&ones, 10.0, 0.0, 4_000, 4).unwrap();
        let iid = ergodic_capacity(&id, 10.0, 0.0, 4_000, 4).unwrap();
        assert!(full.mean < iid.mean);
        assert!(full.mean >= 0.0 && full.std_error >= 0.0);
    }

    #[test]
    fn ergodic_capacity_is_deterministic_and_zero_at_zero_snr() {
        let r = random_correlation(6, 4);
        let a = ergodic_capacity(&r, 10.0, 0.1, 500, 9).unwrap();
        let b = ergodic_capacity(&r, 10.0, 0.1, 500, 9).unwrap();
        assert_eq!(a, b);
        let z = ergodic_capacity(&r, 0.0, 0.1, 100, 9).unwrap();
        assert_eq!(z.mean, 0.0);
        assert!(ergodic_capacity(&r, 10.0, 0.1, 0, 9).is_err());
    }
}
