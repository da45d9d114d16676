//! Von Mises-Fisher clusters on the unit sphere.
//!
//! Densities here are over the `(elevation, azimuth)` rectangle: they carry
//! the `sin(elevation)` Jacobian, so they integrate to one against
//! `d(elevation) d(azimuth)` directly.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{unit_vector, UnitDirection};
use crate::quadrature::GaussLegendre;

/// Mixture weights must sum to one within this tolerance before they are
/// renormalized.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Beyond `LOG_TAIL / kappa` in `1 - cos(offset)` the kernel is below
/// `exp(-LOG_TAIL)` of its peak and is dropped by the component rule.
const LOG_TAIL: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfComponent {
    pub mean: UnitDirection,
    pub kappa: f64,
    pub weight: f64,
}

impl VmfComponent {
    pub fn new(mean: UnitDirection, kappa: f64, weight: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::invalid(
                "kappa",
                format!("must be finite and >= 0, got {kappa}"),
            ));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::invalid(
                "weight",
                format!("must lie in [0, 1], got {weight}"),
            ));
        }
        Ok(VmfComponent {
            mean,
            kappa,
            weight,
        })
    }

    /// Draws one direction (inverse CDF for the cosine to the mean, uniform
    /// angle around it).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitDirection {
        let u: f64 = rng.random();
        let psi: f64 = rng.random::<f64>() * TAU;
        let w = polar_cosine_from_uniform(self.kappa, u);
        let (e1, e2) = tangent_basis(self.mean);
        UnitDirection::from_vector(&frame_point(unit_vector(self.mean), e1, e2, w, psi))
    }
}

/// `ln C3(kappa)` with `C3 = kappa / (4 pi sinh kappa)`, `1/(4 pi)` at zero.
pub fn log_normalizer(kappa: f64) -> f64 {
    let ln_4pi = (4.0 * PI).ln();
    if kappa == 0.0 {
        -ln_4pi
    } else if kappa < 20.0 {
        -(kappa.sinh() / kappa).ln() - ln_4pi
    } else {
        // ln sinh k = k - ln 2 + ln(1 - e^{-2k})
        kappa.ln() - ln_4pi - kappa + std::f64::consts::LN_2 - (-(-2.0 * kappa).exp()).ln_1p()
    }
}

/// Density with respect to solid angle: `C3(kappa) exp(kappa * cos)`.
pub fn vmf_solid_angle_density(kappa: f64, cos_to_mean: f64) -> f64 {
    (log_normalizer(kappa) + kappa * cos_to_mean).exp()
}

pub fn vmf_pdf(d: UnitDirection, c: &VmfComponent) -> f64 {
    let cos_to_mean = unit_vector(d).dot(&unit_vector(c.mean)).clamp(-1.0, 1.0);
    vmf_solid_angle_density(c.kappa, cos_to_mean) * d.elevation().sin()
}

/// Inverse CDF of the cosine between a VMF draw and its mean.
pub fn polar_cosine_from_uniform(kappa: f64, u: f64) -> f64 {
    if kappa == 0.0 {
        return 2.0 * u - 1.0;
    }
    // 1 + ln(u + (1-u) e^{-2k}) / k, rearranged to stay accurate for small k
    let w = 1.0 + ((1.0 - u) * (-2.0 * kappa).exp_m1()).ln_1p() / kappa;
    w.clamp(-1.0, 1.0)
}

/// Orthonormal tangent vectors at `d`, so that `(e1, e2, unit(d))` is a
/// right-handed frame.
pub fn tangent_basis(d: UnitDirection) -> (Vector3<f64>, Vector3<f64>) {
    let (st, ct) = d.elevation().sin_cos();
    let (sp, cp) = d.azimuth().sin_cos();
    (
        Vector3::new(ct * cp, ct * sp, -st),
        Vector3::new(-sp, cp, 0.0),
    )
}

fn frame_point(
    axis: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    cos_polar: f64,
    psi: f64,
) -> Vector3<f64> {
    let sin_polar = (1.0 - cos_polar * cos_polar).max(0.0).sqrt();
    let (sp, cp) = psi.sin_cos();
    cos_polar * axis + sin_polar * (cp * e1 + sp * e2)
}

pub fn sample_component<R: Rng + ?Sized>(
    c: &VmfComponent,
    rng: &mut R,
    n: usize,
) -> Vec<UnitDirection> {
    (0..n).map(|_| c.draw(rng)).collect()
}

/// A weighted set of VMF clusters with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfMixture {
    components: Vec<VmfComponent>,
}

impl VmfMixture {
    /// Weights within [`WEIGHT_SUM_TOLERANCE`] of one are renormalized;
    /// anything further off is rejected.
    pub fn new(mut components: Vec<VmfComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("components", "mixture needs at least one"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid(
                "weight",
                format!("mixture weights sum to {total}, expected 1"),
            ));
        }
        for c in &mut components {
            c.weight /= total;
        }
        Ok(VmfMixture { components })
    }

    pub fn single(mean: UnitDirection, kappa: f64) -> Result<Self> {
        Self::new(vec![VmfComponent::new(mean, kappa, 1.0)?])
    }

    pub fn components(&self) -> &[VmfComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn means(&self) -> Vec<UnitDirection> {
        self.components.iter().map(|c| c.mean).collect()
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &VmfComponent {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                return c;
            }
        }
        // round-off: fall back to the last component with positive weight
        self.components
            .iter()
            .rev()
            .find(|c| c.weight > 0.0)
            .unwrap_or(&self.components[0])
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitDirection {
        self.pick(rng).draw(rng)
    }
}

pub fn mixture_pdf(d: UnitDirection, mix: &VmfMixture) -> f64 {
    mix.components.iter().map(|c| c.weight * vmf_pdf(d, c)).sum()
}

pub fn sample_mixture<R: Rng + ?Sized>(
    mix: &VmfMixture,
    rng: &mut R,
    n: usize,
) -> Vec<UnitDirection> {
    (0..n).map(|_| mix.draw(rng)).collect()
}

/// Moves every cluster to a new mean direction, keeping weights and
/// concentrations.
pub fn translate_mixture(mix: &VmfMixture, new_means: &[UnitDirection]) -> Result<VmfMixture> {
    if new_means.len() != mix.len() {
        return Err(Error::DimensionMismatch {
            expected: mix.len(),
            got: new_means.len(),
        });
    }
    Ok(VmfMixture {
        components: mix
            .components
            .iter()
            .zip(new_means)
            .map(|(c, &mean)| VmfComponent { mean, ..*c })
            .collect(),
    })
}

/// Quadrature rule for expectations under one VMF component.
///
/// Gauss-Legendre in the cosine to the mean (restricted to the part of
/// `[-1, 1]` where the kernel is not negligible) times a uniform rule in
/// the angle around the mean. Weights sum to one.
pub fn component_rule(c: &VmfComponent, n_polar: usize, n_around: usize) -> Vec<(UnitDirection, f64)> {
    component_rule_vectors(c, n_polar, n_around)
        .into_iter()
        .map(|(v, w)| (UnitDirection::from_vector(&v), w))
        .collect()
}

/// [`component_rule`] with nodes as unit vectors.
pub fn component_rule_vectors(c: &VmfComponent, n_polar: usize, n_around: usize) -> Vec<(Vector3<f64>, f64)> {
    let kappa = c.kappa;
    let lower = if kappa > 0.0 {
        (1.0 - LOG_TAIL / kappa).max(-1.0)
    } else {
        -1.0
    };
    let gl = GaussLegendre::new(n_polar);
    let polar: Vec<(f64, f64)> = gl
        .on_interval(lower, 1.0)
        .map(|(t, w)| (t, w * (kappa * (t - 1.0)).exp()))
        .collect();
    let mass: f64 = polar.iter().map(|(_, w)| w).sum();
    let axis = unit_vector(c.mean);
    let (e1, e2) = tangent_basis(c.mean);
    let dpsi = TAU / n_around as f64;
    let ring: Vec<Vector3<f64>> = (0..n_around)
        .map(|j| {
            let (sp, cp) = (j as f64 * dpsi).sin_cos();
            cp * e1 + sp * e2
        })
        .collect();
    let mut out = Vec::with_capacity(n_polar * n_around);
    for &(t, w) in &polar {
        let s = (1.0 - t * t).max(0.0).sqrt();
        let weight = w / mass / n_around as f64;
        for r in &ring {
            out.push((t * axis + s * r, weight));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_rectangle;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn comp(e_deg: f64, a_deg: f64, kappa: f64) -> VmfComponent {
        VmfComponent::new(UnitDirection::from_degrees(e_deg, a_deg), kappa, 1.0).unwrap()
    }

    #[test]
    fn uniform_limit() {
        let c = comp(30.0, 60.0, 0.0);
        for (e, a) in [(0.3, 0.1), (1.5, 4.0), (2.9, 6.0)] {
            let d = UnitDirection::new(e, a);
            assert_abs_diff_eq!(vmf_pdf(d, &c), e.sin() / (4.0 * PI), epsilon = 1e-15);
        }
        let tiny = comp(30.0, 60.0, 1e-12);
        let d = UnitDirection::new(1.0, 1.0);
        assert_abs_diff_eq!(vmf_pdf(d, &tiny), 1f64.sin() / (4.0 * PI), epsilon = 1e-12);
    }

    #[test]
    fn peak_value() {
        let c = comp(70.0, 20.0, 10.0);
        let expected =
            10.0 / (4.0 * PI * 10f64.sinh()) * 10f64.exp() * 70f64.to_radians().sin();
        assert!((vmf_pdf(c.mean, &c) / expected - 1.0).abs() < 1e-13);
    }

    #[test]
    fn normalizer_branches_agree() {
        for k in [19.9, 20.0, 20.1] {
            let direct = (k / (4.0 * PI * f64::sinh(k))).ln();
            assert_abs_diff_eq!(log_normalizer(k), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for kappa in [0.001, 1.0, 10.0, 100.0] {
            let c = comp(63.0, 250.0, kappa);
            let total = integrate_rectangle(|e, a| vmf_pdf(UnitDirection::new(e, a), &c), 300, 600);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        }
        let mix = VmfMixture::new(vec![
            VmfComponent::new(UnitDirection::from_degrees(90.0, 330.0), 20.0, 0.5).unwrap(),
            VmfComponent::new(UnitDirection::from_degrees(10.0, 0.0), 3.0, 0.3).unwrap(),
            VmfComponent::new(UnitDirection::from_degrees(150.0, 100.0), 0.5, 0.2).unwrap(),
        ])
        .unwrap();
        let total = integrate_rectangle(|e, a| mixture_pdf(UnitDirection::new(e, a), &mix), 300, 600);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn large_kappa_does_not_overflow() {
        let c = comp(90.0, 0.0, 1e4);
        let p = vmf_pdf(c.mean, &c);
        assert!(p.is_finite() && p > 0.0);
        let off = vmf_pdf(UnitDirection::from_degrees(90.0, 180.0), &c);
        assert!((0.0..1e-300).contains(&off));
    }

    #[test]
    fn mixture_reductions() {
        let c = comp(40.0, 80.0, 7.0);
        let single = VmfMixture::new(vec![c]).unwrap();
        let split = VmfMixture::new(vec![
            VmfComponent { weight: 0.3, ..c },
            VmfComponent { weight: 0.7, ..c },
        ])
        .unwrap();
        for (e, a) in [(0.2, 0.2), (0.7, 1.4), (2.0, 3.0)] {
            let d = UnitDirection::new(e, a);
            assert_abs_diff_eq!(mixture_pdf(d, &single), vmf_pdf(d, &c), epsilon = 1e-15);
            assert_abs_diff_eq!(mixture_pdf(d, &split), vmf_pdf(d, &c), epsilon = 1e-14);
        }
    }

    #[test]
    fn weight_validation() {
        let c = comp(40.0, 80.0, 7.0);
        assert!(VmfMixture::new(vec![]).is_err());
        assert!(VmfMixture::new(vec![VmfComponent { weight: 0.5, ..c }]).is_err());
        let nearly = VmfMixture::new(vec![
            VmfComponent { weight: 0.6, ..c },
            VmfComponent { weight: 0.4000005, ..c },
        ])
        .unwrap();
        let sum: f64 = nearly.components().iter().map(|c| c.weight).sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
        assert!(VmfComponent::new(c.mean, -1.0, 1.0).is_err());
    }

    #[test]
    fn translation() {
        let mix = VmfMixture::new(vec![
            VmfComponent::new(UnitDirection::from_degrees(60.0, 30.0), 5.0, 0.4).unwrap(),
            VmfComponent::new(UnitDirection::from_degrees(120.0, 200.0), 12.0, 0.6).unwrap(),
        ])
        .unwrap();
        assert_eq!(translate_mixture(&mix, &mix.means()).unwrap(), mix);
        assert!(translate_mixture(&mix, &mix.means()[..1]).is_err());

        let moved_means = [
            UnitDirection::from_degrees(100.0, 300.0),
            UnitDirection::from_degrees(20.0, 10.0),
        ];
        let moved = translate_mixture(&mix, &moved_means).unwrap();
        let back = translate_mixture(&moved, &mix.means()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let d = UnitDirection::new(rng.random::<f64>() * PI, rng.random::<f64>() * TAU);
            assert_abs_diff_eq!(mixture_pdf(d, &back), mixture_pdf(d, &mix), epsilon = 1e-12);
        }
        // The peak moves with the mean; only the Jacobian changes.
        let (old, new) = (&mix.components()[1], &moved.components()[1]);
        let ratio = new.mean.elevation().sin() / old.mean.elevation().sin();
        assert_abs_diff_eq!(
            vmf_pdf(new.mean, new),
            vmf_pdf(old.mean, old) * ratio,
            epsilon = 1e-12
        );
    }

    #[test]
    fn component_rule_moments() {
        // E[cos to mean] = coth(k) - 1/k; second moment 1 - 2 E/k.
        for kappa in [0.0, 0.01, 1.0, 10.0, 100.0, 5000.0] {
            let c = comp(33.0, 150.0, kappa);
            let rule = component_rule(&c, 64, 16);
            let axis = unit_vector(c.mean);
            let wsum: f64 = rule.iter().map(|(_, w)| w).sum();
            assert_abs_diff_eq!(wsum, 1.0, epsilon = 1e-13);
            let m1: f64 = rule.iter().map(|(d, w)| w * unit_vector(*d).dot(&axis)).sum();
            let m2: f64 = rule
                .iter()
                .map(|(d, w)| w * unit_vector(*d).dot(&axis).powi(2))
                .sum();
            let expected = if kappa == 0.0 {
                0.0
            } else {
                1.0 / kappa.tanh() - 1.0 / kappa
            };
            let expected2 = if kappa == 0.0 {
                1.0 / 3.0
            } else {
                1.0 - 2.0 * expected / kappa
            };
            assert_abs_diff_eq!(m1, expected, epsilon = 1e-12);
            assert_abs_diff_eq!(m2, expected2, epsilon = 1e-12);
            // first moment vector points along the mean
            let mv: Vector3<f64> = rule.iter().map(|(d, w)| *w * unit_vector(*d)).sum();
            assert_abs_diff_eq!(mv, expected * axis, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_sampling_has_no_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = comp(10.0, 10.0, 0.0);
        let n = 100_000;
        let s: Vector3<f64> = sample_component(&c, &mut rng, n)
            .iter()
            .map(|d| unit_vector(*d))
            .sum();
        assert!(s.norm() / (n as f64) < 0.01);
    }

    #[test]
    fn concentrated_sampling_hits_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = comp(75.0, 300.0, 200.0);
        let s: Vector3<f64> = sample_component(&c, &mut rng, 10_000)
            .iter()
            .map(|d| unit_vector(*d))
            .sum();
        let angle = (s.normalize().dot(&unit_vector(c.mean))).clamp(-1.0, 1.0).acos();
        assert!(angle.to_degrees() < 2.0, "angle {}", angle.to_degrees());
    }

    #[test]
    fn sampling_histogram_matches_density() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let c = comp(70.0, 120.0, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let (ne, na) = (12, 24);
        let mut counts = vec![0usize; ne * na];
        for d in sample_component(&c, &mut rng, n) {
            let i = ((d.elevation() / PI * ne as f64) as usize).min(ne - 1);
            let j = ((d.azimuth() / TAU * na as f64) as usize).min(na - 1);
            counts[i * na + j] += 1;
        }
        // expected cell mass from the density by fine quadrature per cell
        let gl = GaussLegendre::new(12);
        let (de, da) = (PI / ne as f64, TAU / na as f64);
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        let mut pooled_obs = 0.0;
        let mut pooled_exp = 0.0;
        for i in 0..ne {
            for j in 0..na {
                let mut mass = 0.0;
                for (e, we) in gl.on_interval(i as f64 * de, (i + 1) as f64 * de) {
                    for (a, wa) in gl.on_interval(j as f64 * da, (j + 1) as f64 * da) {
                        mass += we * wa * vmf_pdf(UnitDirection::new(e, a), &c);
                    }
                }
                let expected = mass * n as f64;
                let observed = counts[i * na + j] as f64;
                if expected < 5.0 {
                    pooled_obs += observed;
                    pooled_exp += expected;
                } else {
                    chi2 += (observed - expected).powi(2) / expected;
                    dof += 1;
                }
            }
        }
        if pooled_exp > 0.0 {
            chi2 += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
            dof += 1;
        }
        let critical = ChiSquared::new((dof - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical} (dof {dof})");
    }

    #[test]
    fn mixture_selection_frequencies() {
        let weights = [0.5, 0.3, 0.2];
        let mix = VmfMixture::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| {
                    VmfComponent::new(UnitDirection::from_degrees(90.0, 120.0 * i as f64), 1e4, w)
                        .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut counts = [0usize; 3];
        for d in sample_mixture(&mix, &mut rng, n) {
            let k = (d.azimuth().to_degrees() / 120.0).round() as usize % 3;
            counts[k] += 1;
        }
        for (k, &w) in weights.iter().enumerate() {
            let sigma = (n as f64 * w * (1.0 - w)).sqrt();
            assert!((counts[k] as f64 - n as f64 * w).abs() < 3.0 * sigma);
        }

        let degenerate = VmfMixture::new(vec![
            VmfComponent { weight: 1.0, ..mix.components()[0] },
            VmfComponent { weight: 0.0, ..mix.components()[1] },
        ])
        .unwrap();
        for d in sample_mixture(&degenerate, &mut rng, 2000) {
            assert!(d.azimuth().to_degrees() < 10.0 || d.azimuth().to_degrees() > 350.0);
        }
    }

    #[test]
    fn single_component_mixture_draws_like_component() {
        let c = comp(50.0, 50.0, 3.0);
        let mix = VmfMixture::new(vec![c]).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let xs = sample_mixture(&mix, &mut a, 2000);
        let ys = sample_mixture(&mix, &mut b, 2000);
        assert_eq!(xs, ys);
        let mean_cos = |v: &[UnitDirection]| {
            v.iter().map(|d| unit_vector(*d).dot(&unit_vector(c.mean))).sum::<f64>() / v.len() as f64
        };
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let zs = sample_component(&c, &mut r, 2000);
        assert!((mean_cos(&xs) - mean_cos(&zs)).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn kernel_is_rotation_equivariant(
            e in 0.0..PI, a in 0.0..TAU, me in 0.0..PI, ma in 0.0..TAU,
            axis_e in 0.0..PI, axis_a in 0.0..TAU, angle in 0.0..TAU, kappa in 0.0f64..50.0,
        ) {
            use nalgebra::{Rotation3, Unit};
            let rot = Rotation3::from_axis_angle(
                &Unit::new_normalize(unit_vector(UnitDirection::new(axis_e, axis_a))),
                angle,
            );
            let d = unit_vector(UnitDirection::new(e, a));
            let mu = unit_vector(UnitDirection::new(me, ma));
            let before = vmf_solid_angle_density(kappa, d.dot(&mu));
            let rd = UnitDirection::from_vector(&(rot * d));
            let rmu = UnitDirection::from_vector(&(rot * mu));
            let c = VmfComponent::new(rmu, kappa, 1.0).unwrap();
            let s = rd.elevation().sin();
            prop_assume!(s > 1e-3);
            let after = vmf_pdf(rd, &c) / s;
            prop_assert!((after - before).abs() <= 1e-9 * before.max(1.0));
        }

        #[test]
        fn pdf_finite_for_large_kappa(kappa in 0.0f64..1e4, e in 0.0..PI, a in 0.0..TAU) {
            let c = comp(45.0, 45.0, kappa);
            let p = vmf_pdf(UnitDirection::new(e, a), &c);
            prop_assert!(p.is_finite() && p >= 0.0);
        }

        #[test]
        fn sampling_is_seed_deterministic(seed in 0u64..1000) {
            let c = comp(20.0, 200.0, 4.0);
            let x = sample_component(&c, &mut ChaCha8Rng::seed_from_u64(seed), 8);
            let y = sample_component(&c, &mut ChaCha8Rng::seed_from_u64(seed), 8);
            prop_assert_eq!(x, y);
        }
    }
}
