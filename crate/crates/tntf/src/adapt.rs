//! Adaptive estimation of the per-pixel regularization weights from the
//! current framelet coefficients.
//!
//! First-level weights: for each pixel the weight of a coefficient pair is
//! `base * |window| / max(sum of pair norms over the window, 1e-10)`, so flat
//! neighborhoods get heavy smoothing and edges keep their coefficients.
//! Second-level weights come from a local signal-variance estimate against
//! the known per-subband noise variance. Windows wrap periodically.
//! Weights are refreshed every 30 iterations and frozen after iteration 200.

use crate::error::{Error, Result};
use crate::framelet::FilterBank;
use crate::prox::{GroupWeightMap, SubbandWeightMap};

const DENOM_FLOOR: f64 = 1e-10;

/// Gaussian noise level and its propagation to the second-level subbands:
/// `sigma_kappa_sq[k] = (sigma^2 / 4) * frobenius(tau_k)^2`, the factor 1/4
/// being the energy of the first-level averaging filter.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub sigma_kappa_sq: [f64; 8],
}

impl NoiseModel {
    pub fn new(sigma: f64, second_level: &FilterBank) -> Result<NoiseModel> {
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        if second_level.highpass.len() != 8 {
            return Err(Error::ShapeMismatch(format!(
                "second-level bank must have 8 high-pass filters, got {}",
                second_level.highpass.len()
            )));
        }
        let mut sigma_kappa_sq = [0.0; 8];
        for (slot, f) in sigma_kappa_sq.iter_mut().zip(&second_level.highpass) {
            let fro = f.frobenius_norm();
            *slot = sigma * sigma / 4.0 * fro * fro;
        }
        Ok(NoiseModel {
            sigma,
            sigma_kappa_sq,
        })
    }
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "window must be odd and positive, got {window}"
        )));
    }
    Ok(())
}

/// Periodic box sum: out[i] = sum of `field` over the window x window
/// neighborhood of pixel i.
fn windowed_sum(field: &[f64], width: usize, height: usize, window: usize) -> Vec<f64> {
    let radius = (window / 2) as isize;
    let mut out = vec![0.0; width * height];
    for r in 0..height as isize {
        for c in 0..width as isize {
            let mut acc = 0.0;
            for dr in -radius..=radius {
                let rr = (r + dr).rem_euclid(height as isize) as usize;
                for dc in -radius..=radius {
                    let cc = (c + dc).rem_euclid(width as isize) as usize;
                    acc += field[rr * width + cc];
                }
            }
            out[r as usize * width + c as usize] = acc;
        }
    }
    out
}

/// Estimate the two first-level weight maps from a 6n coefficient block
/// (plane-major). Each group's weight at pixel i is
/// `base_lambda * window^2 / max(sum of that group's pair norms over the
/// window around i, 1e-10)`.
pub fn estimate_lambda(
    coeffs_s1: &[f64],
    width: usize,
    height: usize,
    base_lambda: f64,
    window: usize,
) -> Result<GroupWeightMap> {
    if base_lambda <= 0.0 || !base_lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "base_lambda must be positive, got {base_lambda}"
        )));
    }
    check_window(window)?;
    let n = width * height;
    if coeffs_s1.len() != 6 * n {
        return Err(Error::ShapeMismatch(format!(
            "expected 6n = {} coefficients, got {}",
            6 * n,
            coeffs_s1.len()
        )));
    }
    let window_size = (window * window) as f64;
    let pair_norms = |p0: usize, p1: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let a = coeffs_s1[p0 * n + i];
                let b = coeffs_s1[p1 * n + i];
                (a * a + b * b).sqrt()
            })
            .collect()
    };
    let mut maps = Vec::with_capacity(2);
    for (p0, p1) in [(0, 1), (2, 3)] {
        let norms = pair_norms(p0, p1);
        let sums = windowed_sum(&norms, width, height, window);
        maps.push(
            sums.iter()
                .map(|s| base_lambda * window_size / s.max(DENOM_FLOOR))
                .collect::<Vec<f64>>(),
        );
    }
    let axis = maps.pop().unwrap();
    let diag = maps.pop().unwrap();
    GroupWeightMap::new(diag, axis)
}

/// Estimate the second-level weight map from an 8n coefficient block.
/// Per pixel and subband: the local mean absolute coefficient `m` gives the
/// signal variance estimate `max(m^2 - sigma_k^2, 1e-10)`, and the weight is
/// `sqrt(2) * sigma_k^2 / sqrt(signal variance)`.
pub fn estimate_theta(
    coeffs_s2: &[f64],
    width: usize,
    height: usize,
    noise: &NoiseModel,
    window: usize,
) -> Result<SubbandWeightMap> {
    check_window(window)?;
    let n = width * height;
    if coeffs_s2.len() != 8 * n {
        return Err(Error::ShapeMismatch(format!(
            "expected 8n = {} coefficients, got {}",
            8 * n,
            coeffs_s2.len()
        )));
    }
    let window_size = (window * window) as f64;
    let mut theta = vec![0.0; 8 * n];
    for kappa in 0..8 {
        let sigma_k_sq = noise.sigma_kappa_sq[kappa];
        let abs_plane: Vec<f64> = coeffs_s2[kappa * n..(kappa + 1) * n]
            .iter()
            .map(|v| v.abs())
            .collect();
        let sums = windowed_sum(&abs_plane, width, height, window);
        for i in 0..n {
            let mean = sums[i] / window_size;
            let signal_var = (mean * mean - sigma_k_sq).max(DENOM_FLOOR);
            theta[kappa * n + i] = std::f64::consts::SQRT_2 * sigma_k_sq / signal_var.sqrt();
        }
    }
    SubbandWeightMap::new(theta)
}

/// Whether the weight maps are re-estimated at iteration `k`: every 30
/// iterations, frozen after the 200th (k = 0 counts as the initial estimate).
pub fn update_schedule(k: usize) -> bool {
    k.is_multiple_of(30) && k <= 200
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framelet::dct_bank;
    use crate::rng;

    #[test]
    fn noise_model_matches_dct_frobenius_norms() {
        // sigma = 0.03: sigma_k^2 = (0.0009 / 4) * (1/9) = 2.5e-5, all subbands.
        let nm = NoiseModel::new(0.03, &dct_bank(2)).unwrap();
        for &v in &nm.sigma_kappa_sq {
            assert!((v - 2.5e-5).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_direct_arithmetic_example() {
        // Uniform pair norm 0.01 over a 3x3 window: window sum = 0.09,
        // so lambda = 2e-4 * 9 / 0.09 = 0.02 at every pixel.
        let n = 36;
        let mut coeffs = vec![0.0; 6 * n];
        coeffs[..n].fill(0.01); // diagonal pair = (0.01, 0), norm 0.01
        let w = estimate_lambda(&coeffs, 6, 6, 2e-4, 3).unwrap();
        for &l in &w.lambda_diag {
            assert!((l - 0.02).abs() < 1e-15, "lambda {l}");
        }
    }

    #[test]
    fn lambda_floor_on_zero_coefficients() {
        let n = 25;
        let coeffs = vec![0.0; 6 * n];
        let w = estimate_lambda(&coeffs, 5, 5, 2e-4, 3).unwrap();
        let expect = 2e-4 * 9.0 / 1e-10;
        for &l in &w.lambda_diag {
            assert!(l.is_finite());
            assert!((l - expect).abs() / expect < 1e-12);
        }
    }

    #[test]
    fn lambda_window_size_cancels_for_uniform_coefficients() {
        let n = 49;
        let c = 0.34;
        let mut coeffs = vec![0.0; 6 * n];
        for i in 0..n {
            coeffs[2 * n + i] = c; // axis pair norm c everywhere
        }
        for window in [3usize, 5] {
            let w = estimate_lambda(&coeffs, 7, 7, 1e-3, window).unwrap();
            for &l in &w.lambda_axis {
                assert!((l - 1e-3 / c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lambda_groups_are_estimated_independently() {
        let n = 25;
        let mut coeffs = vec![0.0; 6 * n];
        for i in 0..n {
            coeffs[i] = 0.1; // diagonal pair
            coeffs[2 * n + i] = 0.4; // axis pair
        }
        let w = estimate_lambda(&coeffs, 5, 5, 1e-3, 3).unwrap();
        assert!((w.lambda_diag[0] - 1e-3 / 0.1).abs() < 1e-15);
        assert!((w.lambda_axis[0] - 1e-3 / 0.4).abs() < 1e-15);
    }

    #[test]
    fn lambda_rejects_bad_arguments() {
        assert!(estimate_lambda(&[0.0; 6], 1, 1, 0.0, 3).is_err());
        assert!(estimate_lambda(&[0.0; 6], 1, 1, 1e-3, 4).is_err());
        assert!(estimate_lambda(&[0.0; 5], 1, 1, 1e-3, 3).is_err());
    }

    #[test]
    fn theta_direct_arithmetic_example() {
        // sigma_i = 0.01 with sigma_k^2 = 2.5e-5 gives
        // theta = sqrt(2) * 2.5e-5 / 0.01 = 3.5355e-3.
        let nm = NoiseModel::new(0.03, &dct_bank(2)).unwrap();
        let n = 25;
        // Mean absolute coefficient m with m^2 - sigma_k^2 = 1e-4 requires
        // m = sqrt(1e-4 + 2.5e-5).
        let m = (1e-4 + 2.5e-5f64).sqrt();
        let coeffs = vec![m; 8 * n];
        let th = estimate_theta(&coeffs, 5, 5, &nm, 3).unwrap();
        let expect = std::f64::consts::SQRT_2 * 2.5e-5 / 0.01;
        assert!((expect - 3.5355e-3).abs() < 1e-7);
        for &t in &th.theta {
            assert!((t - expect).abs() < 1e-12, "theta {t}");
        }
    }

    #[test]
    fn theta_floor_on_zero_coefficients() {
        let nm = NoiseModel::new(0.03, &dct_bank(2)).unwrap();
        let coeffs = vec![0.0; 8 * 25];
        let th = estimate_theta(&coeffs, 5, 5, &nm, 3).unwrap();
        let expect = std::f64::consts::SQRT_2 * 2.5e-5 * 1e5;
        for &t in &th.theta {
            assert!((t - expect).abs() / expect < 1e-12);
        }
    }

    #[test]
    fn schedule_matches_protocol() {
        assert!(update_schedule(0));
        assert!(update_schedule(30));
        assert!(update_schedule(90));
        assert!(!update_schedule(91));
        assert!(update_schedule(180));
        assert!(!update_schedule(200)); // not a multiple of 30
        assert!(!update_schedule(210)); // past the freeze point
        assert!(!update_schedule(240));
    }

    #[test]
    fn estimates_are_translation_equivariant() {
        let (w, h) = (8usize, 8usize);
        let n = w * h;
        let coeffs: Vec<f64> = (0..6 * n).map(|i| rng::centered(41, i as u64)).collect();
        let (dr, dc) = (3usize, 5usize);
        let shift_plane = |p: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let (r, c) = (i / w, i % w);
                    p[((r + dr) % h) * w + (c + dc) % w]
                })
                .collect()
        };
        let shifted: Vec<f64> = (0..6)
            .flat_map(|l| shift_plane(&coeffs[l * n..(l + 1) * n]))
            .collect();
        let base = estimate_lambda(&coeffs, w, h, 1e-3, 3).unwrap();
        let moved = estimate_lambda(&shifted, w, h, 1e-3, 3).unwrap();
        let base_shifted = shift_plane(&base.lambda_diag);
        for (a, b) in moved.lambda_diag.iter().zip(&base_shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_scaling_identity() {
        // Scaling all coefficients by c > 0 divides lambda by c where the
        // floor is inactive.
        let n = 25;
        let coeffs: Vec<f64> = (0..6 * n)
            .map(|i| 0.5 + rng::unit(rng::stream(42, i as u64)))
            .collect();
        let c = 4.0;
        let scaled: Vec<f64> = coeffs.iter().map(|v| c * v).collect();
        let base = estimate_lambda(&coeffs, 5, 5, 1e-3, 3).unwrap();
        let after = estimate_lambda(&scaled, 5, 5, 1e-3, 3).unwrap();
        for (a, b) in after.lambda_diag.iter().zip(&base.lambda_diag) {
            assert!((a * c - b).abs() / b < 1e-12);
        }
    }

    #[test]
    fn outputs_always_finite_and_nonnegative() {
        let nm = NoiseModel::new(0.0, &dct_bank(2)).unwrap();
        let coeffs = vec![0.0; 8 * 25];
        let th = estimate_theta(&coeffs, 5, 5, &nm, 3).unwrap();
        assert!(th.theta.iter().all(|t| t.is_finite() && *t >= 0.0));
    }
}
