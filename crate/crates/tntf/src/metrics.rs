//! PSNR and SSIM image quality metrics.
//!
//! Both operate on 255-scaled copies of the `[0, 1]` images so the reported
//! numbers match the usual 8-bit magnitudes. SSIM uses the standard 11x11
//! Gaussian window with sigma 1.5 and stabilizers (0.01*255)^2, (0.03*255)^2;
//! windows extend past the border by half-sample symmetric reflection.

use crate::error::{Error, Result};
use crate::image::Image;

/// PSNR in decibels plus mean SSIM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr_db: f64,
    pub ssim: f64,
}

fn check_same_shape(reference: &Image, test: &Image) -> Result<()> {
    if !reference.same_shape(test) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            test.width(),
            test.height()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB; +infinity for identical images.
pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    check_same_shape(reference, test)?;
    let n = reference.len() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| {
            let d = (a - b) * 255.0;
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let radius = (SSIM_WINDOW / 2) as isize;
    let mut sum = 0.0;
    for r in -radius..=radius {
        for c in -radius..=radius {
            let g = (-((r * r + c * c) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[((r + radius) * SSIM_WINDOW as isize + c + radius) as usize] = g;
            sum += g;
        }
    }
    for g in &mut w {
        *g /= sum;
    }
    w
}

/// Half-sample symmetric reflection: ..., 1, 0 | 0, 1, ..., n-1 | n-1, ...
#[inline]
fn reflect(idx: isize, len: usize) -> usize {
    let n = len as isize;
    let mut i = idx;
    if i < 0 {
        i = -i - 1;
    }
    if i >= n {
        i = 2 * n - 1 - i;
    }
    debug_assert!(i >= 0 && i < n);
    i as usize
}

/// Mean structural similarity; 1 exactly for identical images.
pub fn ssim(reference: &Image, test: &Image) -> Result<f64> {
    check_same_shape(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "image {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let c1 = (0.01 * 255.0) * (0.01 * 255.0);
    let c2 = (0.03 * 255.0) * (0.03 * 255.0);
    let win = gaussian_window();
    let radius = (SSIM_WINDOW / 2) as isize;
    let x: Vec<f64> = reference.data().iter().map(|v| v * 255.0).collect();
    let y: Vec<f64> = test.data().iter().map(|v| v * 255.0).collect();
    let mut total = 0.0;
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut mx = 0.0;
            let mut my = 0.0;
            let mut mxx = 0.0;
            let mut myy = 0.0;
            let mut mxy = 0.0;
            for dr in -radius..=radius {
                let rr = reflect(r + dr, h);
                for dc in -radius..=radius {
                    let cc = reflect(c + dc, w);
                    let g = win[((dr + radius) * SSIM_WINDOW as isize + dc + radius) as usize];
                    let xv = x[rr * w + cc];
                    let yv = y[rr * w + cc];
                    mx += g * xv;
                    my += g * yv;
                    mxx += g * (xv * xv);
                    myy += g * (yv * yv);
                    // Grouped so the accumulation is exactly symmetric in x, y.
                    mxy += g * (xv * yv);
                }
            }
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let cov = mxy - mx * my;
            let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            total += s;
        }
    }
    Ok(total / (w * h) as f64)
}

/// Both metrics at once.
pub fn quality(reference: &Image, test: &Image) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr_db: psnr(reference, test)?,
        ssim: ssim(reference, test)?,
    })
}
