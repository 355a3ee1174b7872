//! The variance-exploding diffusion process: geometric noise schedule,
//! forward perturbation kernel, terminal prior, and diffusion coefficient.
//!
//! The process is driftless (f == 0, s(t) == 1), so it is fully described by
//! sigma(t) = sigma_min * (sigma_max / sigma_min)^t on t in [0, 1].

use crate::error::{Error, Result};
use crate::grid::Field;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DEFAULT_SIGMA_MIN: f64 = 0.01;
pub const DEFAULT_SIGMA_MAX: f64 = 50.0;
pub const DEFAULT_T_MIN: f64 = 1e-3;

/// Immutable VE schedule definition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceSchedule {
    sigma_min: f64,
    sigma_max: f64,
    t_min: f64,
}

impl VarianceSchedule {
    pub fn new(sigma_min: f64, sigma_max: f64, t_min: f64) -> Result<Self> {
        if !(sigma_min > 0.0) || !(sigma_max > sigma_min) {
            return Err(Error::Config(format!(
                "require 0 < sigma_min < sigma_max, got {} and {}",
                sigma_min, sigma_max
            )));
        }
        if !(t_min > 0.0 && t_min < 1.0) {
            return Err(Error::Config(format!("t_min must lie in (0,1), got {}", t_min)));
        }
        Ok(VarianceSchedule { sigma_min, sigma_max, t_min })
    }

    pub fn paper_defaults() -> Self {
        VarianceSchedule {
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: DEFAULT_SIGMA_MAX,
            t_min: DEFAULT_T_MIN,
        }
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Smallest solver time; reverse integration stops here because the score
    /// scale 1/sigma(t) diverges as t -> 0.
    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("diffusion time {} outside [0,1]", t)));
        }
        Ok(())
    }

    /// sigma(t) = sigma_min * (sigma_max / sigma_min)^t
    pub fn sigma(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.sigma_min * (self.sigma_max / self.sigma_min).powf(t))
    }

    /// g(t) = sigma(t) * sqrt(2 ln(sigma_max / sigma_min)) for the driftless
    /// VE process (g = s * sqrt(2 sigma dsigma/dt) with s == 1).
    pub fn diffusion_g(&self, t: f64) -> Result<f64> {
        let s = self.sigma(t)?;
        Ok(s * (2.0 * (self.sigma_max / self.sigma_min).ln()).sqrt())
    }

    /// One-shot forward noising: x_t = x0 + sigma(t) * z.
    pub fn perturb(&self, x0: &Field, t: f64, z: &Field) -> Result<Field> {
        let s = self.sigma(t)? as f32;
        x0.zip(z, |x, n| x + s * n)
    }

    /// i.i.d. N(0, sigma_max^2) per cell; the terminal marginal of the VE
    /// process (data signal is negligible next to sigma_max).
    pub fn prior_sample(&self, height: usize, width: usize, rng: &mut impl Rng) -> Field {
        let s = self.sigma_max as f32;
        let values = (0..height * width)
            .map(|_| {
                let z: f32 = StandardNormal.sample(rng);
                s * z
            })
            .collect();
        Field::new(height, width, values).expect("positive dimensions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigma_endpoints_paper_defaults() {
        let s = VarianceSchedule::paper_defaults();
        assert!((s.sigma(0.0).unwrap() - 0.01).abs() < 1e-12);
        assert!((s.sigma(1.0).unwrap() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn sigma_midpoint_is_geometric_mean() {
        let s = VarianceSchedule::paper_defaults();
        // sqrt(0.01 * 50) evaluated with high-precision arithmetic
        let expect = (0.01f64 * 50.0).sqrt();
        assert!((s.sigma(0.5).unwrap() - expect).abs() < 1e-12);
        assert!((s.sigma(0.5).unwrap() - 0.707_106_8).abs() < 1e-6);
    }

    #[test]
    fn sigma_rejects_out_of_range_t() {
        let s = VarianceSchedule::paper_defaults();
        assert!(matches!(s.sigma(-0.1), Err(Error::Domain(_))));
        assert!(matches!(s.sigma(1.1), Err(Error::Domain(_))));
    }

    #[test]
    fn sigma_is_monotone() {
        let s = VarianceSchedule::paper_defaults();
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = s.sigma(i as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn g_over_sigma_is_constant() {
        let s = VarianceSchedule::paper_defaults();
        let c = (2.0f64 * 5000.0f64.ln()).sqrt();
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let ratio = s.diffusion_g(t).unwrap() / s.sigma(t).unwrap();
            assert!((ratio - c).abs() < 1e-10);
        }
    }

    #[test]
    fn g_matches_finite_difference_of_sigma_squared() {
        // g(t)^2 == d(sigma^2)/dt, central differences with h = 1e-6
        let s = VarianceSchedule::paper_defaults();
        let h = 1e-6;
        for &t in &[0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let g2 = s.diffusion_g(t).unwrap().powi(2);
            let fd = (s.sigma(t + h).unwrap().powi(2) - s.sigma(t - h).unwrap().powi(2)) / (2.0 * h);
            assert!((g2 - fd).abs() / fd.abs() < 1e-4, "t={}", t);
        }
    }

    #[test]
    fn g_endpoint_values() {
        let s = VarianceSchedule::paper_defaults();
        assert!((s.diffusion_g(0.0).unwrap() - 0.041274).abs() < 1e-5);
        assert!((s.diffusion_g(1.0).unwrap() - 206.37).abs() < 0.01);
    }

    #[test]
    fn perturb_zero_noise_is_identity() {
        let s = VarianceSchedule::paper_defaults();
        let x0 = Field::constant(3, 3, 2.5);
        let z = Field::zeros(3, 3);
        assert_eq!(s.perturb(&x0, 0.5, &z).unwrap(), x0);
    }

    #[test]
    fn perturb_kernel_formula() {
        let s = VarianceSchedule::paper_defaults();
        let x0 = Field::zeros(2, 2);
        let z = Field::constant(2, 2, 1.0);
        let xt = s.perturb(&x0, 0.5, &z).unwrap();
        for &v in xt.values() {
            assert!((v - 0.7071068).abs() < 1e-6);
        }
    }

    #[test]
    fn perturb_rejects_shape_mismatch() {
        let s = VarianceSchedule::paper_defaults();
        let x0 = Field::zeros(2, 2);
        let z = Field::zeros(3, 3);
        assert!(matches!(s.perturb(&x0, 0.5, &z), Err(Error::Dimension(_))));
    }

    #[test]
    fn perturb_monte_carlo_variance() {
        let s = VarianceSchedule::paper_defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &t in &[0.1, 0.5, 0.9] {
            let sigma2 = s.sigma(t).unwrap().powi(2);
            let n = 100_000;
            let x0 = Field::zeros(1, 1);
            let mut sum = 0.0f64;
            let mut sum2 = 0.0f64;
            for _ in 0..n {
                let z = s.prior_sample(1, 1, &mut rng).map(|v| v / 50.0);
                let xt = s.perturb(&x0, t, &z).unwrap();
                let v = xt.values()[0] as f64;
                sum += v;
                sum2 += v * v;
            }
            let var = sum2 / n as f64 - (sum / n as f64).powi(2);
            assert!((var - sigma2).abs() / sigma2 < 0.03, "t={}", t);
        }
    }

    #[test]
    fn prior_sample_moments() {
        let s = VarianceSchedule::paper_defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mut sum = 0.0f64;
        let mut sum2 = 0.0f64;
        for _ in 0..n / 100 {
            let f = s.prior_sample(10, 10, &mut rng);
            for &v in f.values() {
                sum += v as f64;
                sum2 += (v as f64) * (v as f64);
            }
        }
        let mean = sum / n as f64;
        let std = (sum2 / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.2);
        assert!((std - 50.0).abs() / 50.0 < 0.01);
    }

    #[test]
    fn prior_sample_is_deterministic_per_seed() {
        let s = VarianceSchedule::paper_defaults();
        let a = s.prior_sample(4, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let b = s.prior_sample(4, 4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
