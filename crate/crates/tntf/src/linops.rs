//! Linear operators of the restoration model: the blur, the stacked framelet
//! analysis operator and its adjoint, and power-iteration norm estimation.
//!
//! The analysis operator stacks the six directional-Haar high-pass planes
//! (block `s1`) over the eight DCT high-pass planes (block `s2`). In the
//! two-level mode the second block is taken on the Haar low-pass output, so
//! second differences are measured on a smoothed version of the image; the
//! ablation modes take it on the image directly or drop a block entirely.
//! Blocks are laid out plane-major: plane `l` of an n-pixel image occupies
//! entries `[l*n, (l+1)*n)` of its block.

use crate::error::{Error, Result};
use crate::framelet::{convolve_periodic, dct_bank, dhf_bank, Filter, FilterBank};
use crate::image::Image;
use crate::rng;

/// Spatially invariant blur with periodic boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurOperator {
    kernel: Filter,
}

impl BlurOperator {
    /// 5x5 averaging kernel (all taps 1/25), centered anchor.
    pub fn average5() -> BlurOperator {
        BlurOperator {
            kernel: Filter::new(5, 5, vec![1.0 / 25.0; 25], (2, 2)),
        }
    }

    /// Identity kernel; turns the fidelity term into plain denoising.
    pub fn identity() -> BlurOperator {
        BlurOperator {
            kernel: Filter::new(1, 1, vec![1.0], (0, 0)),
        }
    }

    /// Any mass-preserving kernel (taps must sum to 1 within 1e-15).
    pub fn from_kernel(kernel: Filter) -> Result<BlurOperator> {
        if (kernel.sum() - 1.0).abs() > 1e-15 {
            return Err(Error::InvalidParameter(format!(
                "blur kernel taps sum to {}, expected 1",
                kernel.sum()
            )));
        }
        Ok(BlurOperator { kernel })
    }

    pub fn kernel(&self) -> &Filter {
        &self.kernel
    }

    /// Periodic correlation with the kernel; `adjoint` flips to convolution.
    /// For the symmetric averaging kernel the two coincide.
    pub fn apply(&self, img: &Image, adjoint: bool) -> Result<Image> {
        convolve_periodic(img, &self.kernel, 1, !adjoint).map_err(|e| match e {
            Error::FilterTooLarge { span, image } => Error::FilterTooLarge { span, image },
            other => other,
        })
    }
}

/// Which blocks the stacked analysis operator carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisMode {
    /// `s1 = B1h u`, `s2 = B2h B1l u` (second level on the smoothed image).
    Tntf,
    /// `s1 = B1h u` only.
    DhfOnly,
    /// `s2 = B2h u` only.
    DctOnly,
    /// `s1 = B1h u`, `s2 = B2h u` (second level on the image itself).
    DhfDct,
}

/// Stacked framelet analysis operator; operator norm 1 in every mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOperator {
    dhf: FilterBank,
    dct: FilterBank,
    mode: AnalysisMode,
}

impl AnalysisOperator {
    /// Standard construction: Haar bank at dilation 1, DCT bank a-trous
    /// dilated by 2.
    pub fn new(mode: AnalysisMode) -> AnalysisOperator {
        AnalysisOperator::with_dct_dilation(mode, 2)
    }

    /// Ablation switch for the second-level dilation (1 or 2).
    pub fn with_dct_dilation(mode: AnalysisMode, dct_dilation: usize) -> AnalysisOperator {
        AnalysisOperator {
            dhf: dhf_bank(1),
            dct: dct_bank(dct_dilation),
            mode,
        }
    }

    pub fn mode(&self) -> AnalysisMode {
        self.mode
    }

    pub fn dhf(&self) -> &FilterBank {
        &self.dhf
    }

    pub fn dct(&self) -> &FilterBank {
        &self.dct
    }

    /// Length of the `s1` block for an n-pixel image (0 if absent).
    pub fn s1_len(&self, n: usize) -> usize {
        match self.mode {
            AnalysisMode::DctOnly => 0,
            _ => 6 * n,
        }
    }

    /// Length of the `s2` block for an n-pixel image (0 if absent).
    pub fn s2_len(&self, n: usize) -> usize {
        match self.mode {
            AnalysisMode::DhfOnly => 0,
            _ => 8 * n,
        }
    }

    pub fn output_len(&self, n: usize) -> usize {
        self.s1_len(n) + self.s2_len(n)
    }

    fn analyze_planes(&self, img: &Image, bank: &FilterBank, out: &mut Vec<f64>) -> Result<()> {
        for f in &bank.highpass {
            let plane = convolve_periodic(img, f, bank.dilation, false)?;
            out.extend_from_slice(plane.data());
        }
        Ok(())
    }

    /// Forward application; returns the stacked coefficient vector
    /// (`s1` block first when present).
    pub fn apply(&self, img: &Image) -> Result<Vec<f64>> {
        let n = img.len();
        let mut out = Vec::with_capacity(self.output_len(n));
        match self.mode {
            AnalysisMode::Tntf => {
                self.analyze_planes(img, &self.dhf, &mut out)?;
                let low = convolve_periodic(img, &self.dhf.lowpass, self.dhf.dilation, false)?;
                self.analyze_planes(&low, &self.dct, &mut out)?;
            }
            AnalysisMode::DhfOnly => self.analyze_planes(img, &self.dhf, &mut out)?,
            AnalysisMode::DctOnly => self.analyze_planes(img, &self.dct, &mut out)?,
            AnalysisMode::DhfDct => {
                self.analyze_planes(img, &self.dhf, &mut out)?;
                self.analyze_planes(img, &self.dct, &mut out)?;
            }
        }
        Ok(out)
    }

    fn synthesize_planes(
        &self,
        coeffs: &[f64],
        bank: &FilterBank,
        width: usize,
        height: usize,
        acc: &mut Image,
    ) -> Result<()> {
        let n = width * height;
        for (l, f) in bank.highpass.iter().enumerate() {
            let plane = Image::from_vec(width, height, coeffs[l * n..(l + 1) * n].to_vec())?;
            let part = convolve_periodic(&plane, f, bank.dilation, true)?;
            for (a, p) in acc.data_mut().iter_mut().zip(part.data()) {
                *a += p;
            }
        }
        Ok(())
    }

    /// Adjoint application: synthesis of the stacked coefficient vector back
    /// to the image grid.
    pub fn adjoint(&self, coeffs: &[f64], width: usize, height: usize) -> Result<Image> {
        let n = width * height;
        if coeffs.len() != self.output_len(n) {
            return Err(Error::ShapeMismatch(format!(
                "stacked vector has {} entries, operator expects {}",
                coeffs.len(),
                self.output_len(n)
            )));
        }
        let s1 = &coeffs[..self.s1_len(n)];
        let s2 = &coeffs[self.s1_len(n)..];
        let mut acc = Image::new(width, height);
        match self.mode {
            AnalysisMode::Tntf => {
                self.synthesize_planes(s1, &self.dhf, width, height, &mut acc)?;
                let mut t = Image::new(width, height);
                self.synthesize_planes(s2, &self.dct, width, height, &mut t)?;
                let part = convolve_periodic(&t, &self.dhf.lowpass, self.dhf.dilation, true)?;
                for (a, p) in acc.data_mut().iter_mut().zip(part.data()) {
                    *a += p;
                }
            }
            AnalysisMode::DhfOnly => {
                self.synthesize_planes(s1, &self.dhf, width, height, &mut acc)?
            }
            AnalysisMode::DctOnly => {
                self.synthesize_planes(s2, &self.dct, width, height, &mut acc)?
            }
            AnalysisMode::DhfDct => {
                self.synthesize_planes(s1, &self.dhf, width, height, &mut acc)?;
                self.synthesize_planes(s2, &self.dct, width, height, &mut acc)?;
            }
        }
        Ok(acc)
    }
}

/// Largest singular value of a linear operator, estimated by power iteration
/// on `adjoint . apply` from a seeded random start; deterministic for a fixed
/// seed. Returns 0 for the zero operator.
pub fn operator_norm<F, G>(apply: F, adjoint: G, n: usize, iters: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    assert!(iters >= 1, "power iteration needs at least one step");
    let mut x: Vec<f64> = (0..n).map(|i| rng::centered(seed, i as u64)).collect();
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    let nx = norm(&x);
    if nx == 0.0 {
        return 0.0;
    }
    x.iter_mut().for_each(|t| *t /= nx);
    for _ in 0..iters {
        let mut y = adjoint(&apply(&x));
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        y.iter_mut().for_each(|t| *t /= ny);
        x = y;
    }
    // With unit x, |A x| equals the square root of the Rayleigh quotient of
    // the normal operator.
    norm(&apply(&x))
}
