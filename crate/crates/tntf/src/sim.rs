//! Degradation pipeline: blur the ground truth and add seeded Gaussian noise.
//!
//! The noise is a counter-based stream (see [`crate::rng`]): pixel i in
//! row-major order consumes draws 2i and 2i+1 of the SplitMix64 stream and
//! maps them to a normal sample with the Box-Muller cosine branch. The same
//! seed therefore reproduces the same observation bit for bit, independent of
//! traversal order. The output is not clipped to `[0, 1]`.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linops::BlurOperator;
use crate::rng;

/// Blur kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// 5x5 averaging kernel, periodic boundary.
    #[default]
    Average5,
}

impl Kernel {
    pub fn operator(&self) -> BlurOperator {
        match self {
            Kernel::Average5 => BlurOperator::average5(),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average5" => Ok(Kernel::Average5),
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel {other:?} (expected average5)"
            ))),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Average5 => write!(f, "average5"),
        }
    }
}

/// Blur kernel, noise level, and noise seed of one simulated observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationSpec {
    pub kernel: Kernel,
    pub sigma: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(kernel: Kernel, sigma: f64, seed: u64) -> Result<DegradationSpec> {
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        Ok(DegradationSpec {
            kernel,
            sigma,
            seed,
        })
    }
}

/// Blur the image and add i.i.d. Gaussian noise of standard deviation
/// `spec.sigma`; deterministic in `spec.seed`, output not clipped.
pub fn degrade(truth: &Image, spec: &DegradationSpec) -> Result<Image> {
    if spec.sigma < 0.0 || !spec.sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be nonnegative, got {}",
            spec.sigma
        )));
    }
    let mut z = spec.kernel.operator().apply(truth, false)?;
    if spec.sigma > 0.0 {
        for (i, v) in z.data_mut().iter_mut().enumerate() {
            *v += spec.sigma * rng::standard_normal(spec.seed, i as u64);
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{make_synthetic, SyntheticKind};

    #[test]
    fn zero_sigma_constant_stays_constant() {
        let img = Image::constant(16, 16, 0.37);
        let spec = DegradationSpec::new(Kernel::Average5, 0.0, 1).unwrap();
        let z = degrade(&img, &spec).unwrap();
        for &v in z.data() {
            assert!((v - 0.37).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_sigma_equals_blur_exactly() {
        let truth = make_synthetic(SyntheticKind::SquareCircle, 32, 0).unwrap();
        let spec = DegradationSpec::new(Kernel::Average5, 0.0, 9).unwrap();
        let z = degrade(&truth, &spec).unwrap();
        let blurred = BlurOperator::average5().apply(&truth, false).unwrap();
        assert_eq!(z, blurred);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let truth = make_synthetic(SyntheticKind::SquareCircle, 32, 0).unwrap();
        let spec = DegradationSpec::new(Kernel::Average5, 0.03, 5).unwrap();
        let a = degrade(&truth, &spec).unwrap();
        let b = degrade(&truth, &spec).unwrap();
        assert_eq!(a, b);
        let other = DegradationSpec::new(Kernel::Average5, 0.03, 6).unwrap();
        assert_ne!(a, degrade(&truth, &other).unwrap());
    }

    #[test]
    fn noise_sample_statistics() {
        // Statistical bounds for n = 256^2 i.i.d. draws: mean within
        // 3*sigma/sqrt(n) of 0, standard deviation within 2% of sigma.
        let side = 256;
        let truth = Image::constant(side, side, 0.5);
        let sigma = 0.03;
        let spec = DegradationSpec::new(Kernel::Average5, sigma, 0).unwrap();
        let z = degrade(&truth, &spec).unwrap();
        let n = (side * side) as f64;
        let noise: Vec<f64> = z.data().iter().map(|v| v - 0.5).collect();
        let mean = noise.iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * sigma / 256.0, "mean {mean}");
        let var = noise.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!((std - sigma).abs() / sigma < 0.02, "std {std}");
    }

    #[test]
    fn residual_variance_matches_sigma_squared() {
        // E|z - Ku|^2 / n within 5% of sigma^2 for n = 64^2.
        let truth = make_synthetic(SyntheticKind::SquareCircle, 64, 0).unwrap();
        let sigma = 0.04;
        let spec = DegradationSpec::new(Kernel::Average5, sigma, 3).unwrap();
        let z = degrade(&truth, &spec).unwrap();
        let ku = BlurOperator::average5().apply(&truth, false).unwrap();
        let n = truth.len() as f64;
        let mse = z
            .data()
            .iter()
            .zip(ku.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        assert!((mse - sigma * sigma).abs() / (sigma * sigma) < 0.05, "mse {mse}");
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(DegradationSpec::new(Kernel::Average5, -0.1, 0).is_err());
    }

    #[test]
    fn small_image_rejected() {
        let img = Image::constant(4, 4, 0.5);
        let spec = DegradationSpec::new(Kernel::Average5, 0.0, 0).unwrap();
        assert!(degrade(&img, &spec).is_err());
    }
}
