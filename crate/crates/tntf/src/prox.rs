//! Proximity operators for the penalty blocks: box projection, per-pixel
//! group shrinkage on the directional-Haar block, weighted soft thresholding
//! on the DCT block, and conjugate proxes through the Moreau identity.
//!
//! Stacked vectors are plane-major: subband `l` of an n-pixel block occupies
//! entries `[l*n, (l+1)*n)`. In the six-subband first-level block, subbands
//! (1,2) form the diagonal pair and (3,4) the axis pair; subbands 5 and 6
//! carry no penalty and pass through unchanged.

use crate::error::{Error, Result};

/// Per-pixel nonnegative weights for the two penalized first-level pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupWeightMap {
    /// Weight of the diagonal pair (subbands 1,2) at each pixel.
    pub lambda_diag: Vec<f64>,
    /// Weight of the axis pair (subbands 3,4) at each pixel.
    pub lambda_axis: Vec<f64>,
}

impl GroupWeightMap {
    pub fn new(lambda_diag: Vec<f64>, lambda_axis: Vec<f64>) -> Result<GroupWeightMap> {
        if lambda_diag.len() != lambda_axis.len() {
            return Err(Error::ShapeMismatch(
                "group weight maps must have equal length".into(),
            ));
        }
        let ok = |v: &[f64]| v.iter().all(|t| t.is_finite() && *t >= 0.0);
        if !ok(&lambda_diag) || !ok(&lambda_axis) {
            return Err(Error::InvalidParameter(
                "group weights must be finite and nonnegative".into(),
            ));
        }
        Ok(GroupWeightMap {
            lambda_diag,
            lambda_axis,
        })
    }

    /// Both groups share one constant weight.
    pub fn constant(n: usize, lambda: f64) -> Result<GroupWeightMap> {
        GroupWeightMap::new(vec![lambda; n], vec![lambda; n])
    }

    pub fn len(&self) -> usize {
        self.lambda_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_diag.is_empty()
    }
}

/// Per-pixel, per-subband nonnegative weights for the eight-subband block,
/// plane-major (subband `k` at `[k*n, (k+1)*n)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandWeightMap {
    pub theta: Vec<f64>,
}

impl SubbandWeightMap {
    pub fn new(theta: Vec<f64>) -> Result<SubbandWeightMap> {
        if !theta.len().is_multiple_of(8) {
            return Err(Error::ShapeMismatch(
                "subband weight map length must be a multiple of 8".into(),
            ));
        }
        if !theta.iter().all(|t| t.is_finite() && *t >= 0.0) {
            return Err(Error::InvalidParameter(
                "subband weights must be finite and nonnegative".into(),
            ));
        }
        Ok(SubbandWeightMap { theta })
    }

    pub fn constant(n: usize, theta: f64) -> Result<SubbandWeightMap> {
        SubbandWeightMap::new(vec![theta; 8 * n])
    }

    pub fn pixels(&self) -> usize {
        self.theta.len() / 8
    }
}

/// Componentwise clamp to `[0, 1]`.
pub fn project_box(v: &[f64]) -> Vec<f64> {
    v.iter().map(|t| t.clamp(0.0, 1.0)).collect()
}

fn check_scale_and_weights(scale: f64, weights: &[&[f64]]) -> Result<()> {
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "prox scale must be positive and finite, got {scale}"
        )));
    }
    for w in weights {
        if !w.iter().all(|t| t.is_finite() && *t >= 0.0) {
            return Err(Error::InvalidParameter(
                "prox weights must be finite and nonnegative".into(),
            ));
        }
    }
    Ok(())
}

/// Shrink the pair `(a, b)` toward zero by threshold `t >= 0`.
#[inline]
fn shrink_pair(a: f64, b: f64, t: f64) -> (f64, f64) {
    let norm = (a * a + b * b).sqrt();
    let factor = 1.0 - t / norm.max(t);
    (factor * a, factor * b)
}

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Prox of the weighted first-level penalty with parameter `scale`:
/// per pixel, the diagonal pair and the axis pair are shrunk toward zero by
/// `lambda * scale` for their group's lambda; subbands 5 and 6 pass through.
pub fn prox_phi1(v: &[f64], weights: &GroupWeightMap, scale: f64) -> Result<Vec<f64>> {
    check_scale_and_weights(scale, &[&weights.lambda_diag, &weights.lambda_axis])?;
    let n = weights.len();
    if v.len() != 6 * n {
        return Err(Error::ShapeMismatch(format!(
            "expected 6n = {} entries, got {}",
            6 * n,
            v.len()
        )));
    }
    let mut y = v.to_vec();
    for i in 0..n {
        let (a, b) = shrink_pair(v[i], v[n + i], weights.lambda_diag[i] * scale);
        y[i] = a;
        y[n + i] = b;
        let (a, b) = shrink_pair(v[2 * n + i], v[3 * n + i], weights.lambda_axis[i] * scale);
        y[2 * n + i] = a;
        y[3 * n + i] = b;
    }
    Ok(y)
}

/// Anisotropic variant: componentwise soft threshold on the axis pair
/// (subbands 3,4) with the axis lambda; everything else passes through.
pub fn prox_phi1_aniso(v: &[f64], weights: &GroupWeightMap, scale: f64) -> Result<Vec<f64>> {
    check_scale_and_weights(scale, &[&weights.lambda_axis])?;
    let n = weights.len();
    if v.len() != 6 * n {
        return Err(Error::ShapeMismatch(format!(
            "expected 6n = {} entries, got {}",
            6 * n,
            v.len()
        )));
    }
    let mut y = v.to_vec();
    for i in 0..n {
        let t = weights.lambda_axis[i] * scale;
        y[2 * n + i] = soft(v[2 * n + i], t);
        y[3 * n + i] = soft(v[3 * n + i], t);
    }
    Ok(y)
}

/// Isotropic variant: group shrinkage on the axis pair only.
pub fn prox_phi1_iso(v: &[f64], weights: &GroupWeightMap, scale: f64) -> Result<Vec<f64>> {
    check_scale_and_weights(scale, &[&weights.lambda_axis])?;
    let n = weights.len();
    if v.len() != 6 * n {
        return Err(Error::ShapeMismatch(format!(
            "expected 6n = {} entries, got {}",
            6 * n,
            v.len()
        )));
    }
    let mut y = v.to_vec();
    for i in 0..n {
        let (a, b) = shrink_pair(v[2 * n + i], v[3 * n + i], weights.lambda_axis[i] * scale);
        y[2 * n + i] = a;
        y[3 * n + i] = b;
    }
    Ok(y)
}

/// Prox of the weighted second-level penalty: componentwise soft threshold
/// with per-entry threshold `theta * scale`.
pub fn prox_phi2(v: &[f64], weights: &SubbandWeightMap, scale: f64) -> Result<Vec<f64>> {
    check_scale_and_weights(scale, &[&weights.theta])?;
    if v.len() != weights.theta.len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} entries, got {}",
            weights.theta.len(),
            v.len()
        )));
    }
    Ok(v.iter()
        .zip(&weights.theta)
        .map(|(x, th)| soft(*x, th * scale))
        .collect())
}

/// Prox of the conjugate function through the Moreau identity:
/// given `prox_direct` computing the prox of `p` at parameter `1/delta`,
/// returns `t - delta * prox_direct(t / delta)`.
pub fn prox_conjugate<F>(prox_direct: F, t: &[f64], delta: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive and finite, got {delta}"
        )));
    }
    let scaled: Vec<f64> = t.iter().map(|x| x / delta).collect();
    let direct = prox_direct(&scaled)?;
    if direct.len() != t.len() {
        return Err(Error::ShapeMismatch(
            "prox delegate changed the vector length".into(),
        ));
    }
    Ok(t.iter().zip(&direct).map(|(x, d)| x - delta * d).collect())
}

/// Value of the first-level penalty (group form) at a 6n coefficient block.
pub fn phi1_value(v: &[f64], weights: &GroupWeightMap) -> f64 {
    let n = weights.len();
    debug_assert_eq!(v.len(), 6 * n);
    let mut acc = 0.0;
    for i in 0..n {
        acc += weights.lambda_diag[i] * (v[i] * v[i] + v[n + i] * v[n + i]).sqrt();
        acc += weights.lambda_axis[i]
            * (v[2 * n + i] * v[2 * n + i] + v[3 * n + i] * v[3 * n + i]).sqrt();
    }
    acc
}

/// Value of the anisotropic first-level variant.
pub fn phi1_aniso_value(v: &[f64], weights: &GroupWeightMap) -> f64 {
    let n = weights.len();
    debug_assert_eq!(v.len(), 6 * n);
    (0..n)
        .map(|i| weights.lambda_axis[i] * (v[2 * n + i].abs() + v[3 * n + i].abs()))
        .sum()
}

/// Value of the isotropic first-level variant.
pub fn phi1_iso_value(v: &[f64], weights: &GroupWeightMap) -> f64 {
    let n = weights.len();
    debug_assert_eq!(v.len(), 6 * n);
    (0..n)
        .map(|i| {
            weights.lambda_axis[i]
                * (v[2 * n + i] * v[2 * n + i] + v[3 * n + i] * v[3 * n + i]).sqrt()
        })
        .sum()
}

/// Value of the second-level penalty at an 8n coefficient block.
pub fn phi2_value(v: &[f64], weights: &SubbandWeightMap) -> f64 {
    debug_assert_eq!(v.len(), weights.theta.len());
    v.iter().zip(&weights.theta).map(|(x, th)| th * x.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    /// Independent oracle: minimize 0.5*|u - v|^2 + t*|u| over u in R^2.
    /// Searches directions exhaustively; along a fixed unit direction d the
    /// objective is an ordinary quadratic in the radius r >= 0 with minimizer
    /// max(d.v - t, 0), so the 2D problem reduces to a fine angular grid plus
    /// golden-section refinement of the angle.
    pub(crate) fn min_pair_oracle(v: (f64, f64), t: f64) -> (f64, f64) {
        let value_at = |theta: f64| -> (f64, f64) {
            let d = (theta.cos(), theta.sin());
            let along = d.0 * v.0 + d.1 * v.1;
            let r = (along - t).max(0.0);
            let val = 0.5 * (r * r - 2.0 * r * along + v.0 * v.0 + v.1 * v.1) + t * r;
            (val, r)
        };
        let samples = 4096;
        let mut best_theta = 0.0;
        let mut best_val = f64::INFINITY;
        for i in 0..samples {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
            let (val, _) = value_at(theta);
            if val < best_val {
                best_val = val;
                best_theta = theta;
            }
        }
        let mut lo = best_theta - 2.0 * std::f64::consts::PI / samples as f64;
        let mut hi = best_theta + 2.0 * std::f64::consts::PI / samples as f64;
        let golden = 0.5 * (3.0 - 5.0f64.sqrt());
        for _ in 0..200 {
            let a = lo + golden * (hi - lo);
            let b = hi - golden * (hi - lo);
            if value_at(a).0 < value_at(b).0 {
                hi = b;
            } else {
                lo = a;
            }
        }
        let theta = 0.5 * (lo + hi);
        let (_, r) = value_at(theta);
        (r * theta.cos(), r * theta.sin())
    }

    /// Independent oracle for the scalar problem 0.5*(u - v)^2 + t*|u|.
    pub(crate) fn min_scalar_oracle(v: f64, t: f64) -> f64 {
        let obj = |u: f64| 0.5 * (u - v) * (u - v) + t * u.abs();
        let lim = v.abs() + t + 1.0;
        let grid = 200;
        let mut best = 0.0;
        let mut best_val = obj(best);
        for i in 0..=grid {
            let u = -lim + 2.0 * lim * i as f64 / grid as f64;
            let val = obj(u);
            if val < best_val {
                best_val = val;
                best = u;
            }
        }
        let mut step = 2.0 * lim / grid as f64;
        while step > 1e-12 {
            let mut improved = false;
            for u in [best + step, best - step] {
                let val = obj(u);
                if val < best_val {
                    best_val = val;
                    best = u;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }

    #[test]
    fn box_projection_examples() {
        assert_eq!(project_box(&[1.3, -0.2, 0.42]), vec![1.0, 0.0, 0.42]);
    }

    #[test]
    fn group_shrink_frozen_example() {
        // Frozen from the pair oracle: prox of (0.3, 0.4) at threshold 0.25.
        let (a, b) = min_pair_oracle((0.3, 0.4), 0.25);
        assert!((a - 0.15).abs() < 1e-6 && (b - 0.20).abs() < 1e-6);
        let w = GroupWeightMap::new(vec![0.25], vec![0.0]).unwrap();
        let v = [0.3, 0.4, 0.0, 0.0, 0.0, 0.0];
        let y = prox_phi1(&v, &w, 1.0).unwrap();
        assert!((y[0] - 0.15).abs() < 1e-15);
        assert!((y[1] - 0.20).abs() < 1e-15);
    }

    #[test]
    fn group_shrink_kills_small_pairs() {
        let w = GroupWeightMap::new(vec![0.6], vec![0.0]).unwrap();
        let v = [0.3, 0.4, 0.0, 0.0, 0.0, 0.0];
        let y = prox_phi1(&v, &w, 1.0).unwrap();
        assert_eq!(&y[..2], &[0.0, 0.0]);
    }

    #[test]
    fn zero_weights_give_identity() {
        let w = GroupWeightMap::constant(2, 0.0).unwrap();
        let v: Vec<f64> = (0..12).map(|i| rng::centered(31, i as u64)).collect();
        assert_eq!(prox_phi1(&v, &w, 1.0).unwrap(), v);
        let th = SubbandWeightMap::constant(2, 0.0).unwrap();
        let v8: Vec<f64> = (0..16).map(|i| rng::centered(32, i as u64)).collect();
        assert_eq!(prox_phi2(&v8, &th, 1.0).unwrap(), v8);
    }

    #[test]
    fn passthrough_subbands_unchanged() {
        let w = GroupWeightMap::constant(1, 10.0).unwrap();
        let v = [0.5, -0.5, 0.25, 0.25, 0.7, -0.9];
        let y = prox_phi1(&v, &w, 1.0).unwrap();
        assert_eq!(y[4], 0.7);
        assert_eq!(y[5], -0.9);
    }

    #[test]
    fn soft_threshold_frozen_example() {
        // Frozen from the scalar oracle: prox of -2 at threshold 0.5.
        let o = min_scalar_oracle(-2.0, 0.5);
        assert!((o + 1.5).abs() < 1e-6);
        let th = SubbandWeightMap::constant(1, 0.5).unwrap();
        let mut v = vec![0.0; 8];
        v[0] = -2.0;
        let y = prox_phi2(&v, &th, 1.0).unwrap();
        assert!((y[0] + 1.5).abs() < 1e-15);
    }

    #[test]
    fn soft_threshold_below_threshold_is_zero() {
        let th = SubbandWeightMap::constant(1, 0.5).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = 0.3;
        let y = prox_phi2(&v, &th, 1.0).unwrap();
        assert!(y.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn negative_scale_rejected() {
        let w = GroupWeightMap::constant(1, 0.1).unwrap();
        let v = [0.0; 6];
        assert!(matches!(
            prox_phi1(&v, &w, -1.0),
            Err(Error::InvalidParameter(_))
        ));
        let th = SubbandWeightMap::constant(1, 0.1).unwrap();
        assert!(matches!(
            prox_phi2(&[0.0; 8], &th, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn negative_weights_rejected() {
        assert!(GroupWeightMap::new(vec![-0.1], vec![0.0]).is_err());
        assert!(SubbandWeightMap::new(vec![-1.0; 8]).is_err());
        // A map mutated after construction is still caught by the prox.
        let mut w = GroupWeightMap::constant(1, 0.1).unwrap();
        w.lambda_axis[0] = -2.0;
        assert!(matches!(
            prox_phi1(&[0.0; 6], &w, 1.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn moreau_identity_is_exact() {
        let n = 4;
        let w = GroupWeightMap::constant(n, 0.3).unwrap();
        let t: Vec<f64> = (0..6 * n).map(|i| 2.0 * rng::centered(33, i as u64)).collect();
        let delta = 0.7;
        let conj = prox_conjugate(|x| prox_phi1(x, &w, 1.0 / delta), &t, delta).unwrap();
        let direct = prox_phi1(
            &t.iter().map(|x| x / delta).collect::<Vec<_>>(),
            &w,
            1.0 / delta,
        )
        .unwrap();
        for ((c, d), orig) in conj.iter().zip(&direct).zip(&t) {
            assert!((c + delta * d - orig).abs() <= 1e-14);
        }
    }

    #[test]
    fn conjugate_of_zero_function_maps_to_zero() {
        // Direct prox = identity, so the conjugate prox returns zero.
        let t: Vec<f64> = (0..10).map(|i| rng::centered(34, i as u64)).collect();
        let out = prox_conjugate(|x| Ok(x.to_vec()), &t, 0.5).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conjugate_of_soft_threshold_is_clamp() {
        // With delta = 1 the conjugate of a weighted l1 prox clamps each
        // component to [-theta, theta].
        let theta = 0.4;
        let th = SubbandWeightMap::constant(2, theta).unwrap();
        let t: Vec<f64> = (0..16).map(|i| 3.0 * rng::centered(35, i as u64)).collect();
        let out = prox_conjugate(|x| prox_phi2(x, &th, 1.0), &t, 1.0).unwrap();
        for (o, x) in out.iter().zip(&t) {
            assert!((o - x.clamp(-theta, theta)).abs() < 1e-15);
        }
    }

    #[test]
    fn optimality_certificate_where_differentiable() {
        // 0 in (y - v) + t * subgradient(|.|) at the prox output.
        for seed in 0..50u64 {
            let v = (
                4.0 * rng::centered(seed, 0),
                4.0 * rng::centered(seed, 1),
            );
            let t = rng::unit(rng::stream(seed, 2));
            let w = GroupWeightMap::new(vec![t], vec![0.0]).unwrap();
            let y = prox_phi1(&[v.0, v.1, 0.0, 0.0, 0.0, 0.0], &w, 1.0).unwrap();
            let norm = (y[0] * y[0] + y[1] * y[1]).sqrt();
            if norm > 1e-8 {
                let g0 = (y[0] - v.0) + t * y[0] / norm;
                let g1 = (y[1] - v.1) + t * y[1] / norm;
                assert!((g0 * g0 + g1 * g1).sqrt() <= 1e-10);
            }
        }
    }

    #[test]
    fn permuting_pixels_commutes_with_prox() {
        let n = 16;
        let mut perm: Vec<usize> = (0..n).collect();
        // Seeded Fisher-Yates.
        for i in (1..n).rev() {
            let j = (rng::stream(36, i as u64) % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let diag: Vec<f64> = (0..n).map(|i| rng::unit(rng::stream(37, i as u64))).collect();
        let axis: Vec<f64> = (0..n).map(|i| rng::unit(rng::stream(38, i as u64))).collect();
        let v: Vec<f64> = (0..6 * n).map(|i| rng::centered(39, i as u64)).collect();
        let w = GroupWeightMap::new(diag.clone(), axis.clone()).unwrap();
        let y = prox_phi1(&v, &w, 1.0).unwrap();

        let permute_block = |b: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; 6 * n];
            for l in 0..6 {
                for i in 0..n {
                    out[l * n + i] = b[l * n + perm[i]];
                }
            }
            out
        };
        let wp = GroupWeightMap::new(
            (0..n).map(|i| diag[perm[i]]).collect(),
            (0..n).map(|i| axis[perm[i]]).collect(),
        )
        .unwrap();
        let yp = prox_phi1(&permute_block(&v), &wp, 1.0).unwrap();
        assert_eq!(yp, permute_block(&y));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prop_group_prox_matches_oracle(
            a in -2.0f64..2.0, b in -2.0f64..2.0, t in 0.0f64..1.5,
        ) {
            let oracle = min_pair_oracle((a, b), t);
            let w = GroupWeightMap::new(vec![t], vec![0.0]).unwrap();
            let y = prox_phi1(&[a, b, 0.0, 0.0, 0.0, 0.0], &w, 1.0).unwrap();
            prop_assert!((y[0] - oracle.0).abs() < 1e-6);
            prop_assert!((y[1] - oracle.1).abs() < 1e-6);
        }

        #[test]
        fn prop_soft_threshold_matches_oracle(v in -3.0f64..3.0, t in 0.0f64..2.0) {
            let oracle = min_scalar_oracle(v, t);
            let th = SubbandWeightMap::new(vec![t; 8]).unwrap();
            let mut x = vec![0.0; 8];
            x[0] = v;
            let y = prox_phi2(&x, &th, 1.0).unwrap();
            prop_assert!((y[0] - oracle).abs() < 1e-6);
        }

        #[test]
        fn prop_proxes_are_nonexpansive(seed in 0u64..10_000) {
            let n = 5;
            let a: Vec<f64> = (0..6 * n).map(|i| 2.0 * rng::centered(seed, i as u64)).collect();
            let b: Vec<f64> = (0..6 * n).map(|i| 2.0 * rng::centered(seed ^ 0xF00D, i as u64)).collect();
            let w = GroupWeightMap::new(
                (0..n).map(|i| rng::unit(rng::stream(seed ^ 1, i as u64))).collect(),
                (0..n).map(|i| rng::unit(rng::stream(seed ^ 2, i as u64))).collect(),
            ).unwrap();
            let pa = prox_phi1(&a, &w, 1.3).unwrap();
            let pb = prox_phi1(&b, &w, 1.3).unwrap();
            let dist = |x: &[f64], y: &[f64]| x.iter().zip(y)
                .map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-12);

            let th = SubbandWeightMap::new(
                (0..8 * n).map(|i| rng::unit(rng::stream(seed ^ 3, i as u64))).collect(),
            ).unwrap();
            let a8: Vec<f64> = (0..8 * n).map(|i| 2.0 * rng::centered(seed ^ 4, i as u64)).collect();
            let b8: Vec<f64> = (0..8 * n).map(|i| 2.0 * rng::centered(seed ^ 5, i as u64)).collect();
            let pa8 = prox_phi2(&a8, &th, 0.8).unwrap();
            let pb8 = prox_phi2(&b8, &th, 0.8).unwrap();
            prop_assert!(dist(&pa8, &pb8) <= dist(&a8, &b8) + 1e-12);
        }
    }
}
