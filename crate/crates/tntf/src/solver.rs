//! Primal-dual three-operator splitting (PD3O) and the two-level
//! non-stationary tight framelet restoration algorithm built on it.
//!
//! The model splits as `f(u) = 0.5*|Ku - z|^2` (differentiable),
//! `g = indicator of [0,1]^n` (projection), and `p(A u)` where `A` stacks the
//! penalized framelet analysis blocks and `p` is the weighted group/soft
//! penalty handled by its conjugate prox. One iteration:
//!
//! ```text
//! u = proj_[0,1](v)
//! x = gamma * At s - (2u - v) + gamma * Kt (K u - z)
//! s <- prox_conjugate applied blockwise to s - delta * A x
//! v <- u - gamma * Kt (K u - z) - gamma * At s
//! ```
//!
//! Convergence requires `gamma < 2 / |K|^2` and `gamma * delta < 1` (the
//! analysis operator has unit norm); both are checked up front, the first
//! against a power-iteration estimate. Iterates contract in the M-norm
//! `sqrt(|dv|^2 + (gamma/delta) * (|ds|^2 - gamma*delta*|At ds|^2))`, and
//! with frozen weights the step norms are monotonically nonincreasing.
//!
//! Weight maps are re-estimated from the running iterate on the 30-iteration
//! schedule (frozen after iteration 200, or entirely with `freeze_params`);
//! the initial estimate at k = 0 comes from the observation itself. The TV
//! modes use a constant weight everywhere instead, which makes them the
//! classical anisotropic/isotropic TV baselines.

use std::path::Path;

use crate::adapt::{estimate_lambda, estimate_theta, update_schedule, NoiseModel};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::linops::{operator_norm, AnalysisMode, AnalysisOperator, BlurOperator};
use crate::prox::{
    phi1_aniso_value, phi1_iso_value, phi1_value, phi2_value, prox_conjugate, prox_phi1,
    prox_phi1_aniso, prox_phi1_iso, prox_phi2, GroupWeightMap, SubbandWeightMap,
};

/// Regularizer selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Group penalty on the Haar block plus soft penalty on the DCT block of
    /// the smoothed image; weights adapt on the update schedule.
    Tntf,
    /// Anisotropic TV: absolute values of the axis differences, constant weight.
    TvAniso,
    /// Isotropic TV: norm of the axis difference pair, constant weight.
    TvIso,
    /// Soft penalty on the DCT block of the image itself.
    DctOnly,
    /// Haar group penalty plus DCT soft penalty, both on the image itself.
    DhfDct,
}

impl SolverMode {
    pub fn analysis_mode(&self) -> AnalysisMode {
        match self {
            SolverMode::Tntf => AnalysisMode::Tntf,
            SolverMode::TvAniso | SolverMode::TvIso => AnalysisMode::DhfOnly,
            SolverMode::DctOnly => AnalysisMode::DctOnly,
            SolverMode::DhfDct => AnalysisMode::DhfDct,
        }
    }

    pub fn has_s1(&self) -> bool {
        !matches!(self, SolverMode::DctOnly)
    }

    pub fn has_s2(&self) -> bool {
        !matches!(self, SolverMode::TvAniso | SolverMode::TvIso)
    }

    /// TV modes keep a constant weight; the framelet modes re-estimate on the
    /// update schedule.
    pub fn is_adaptive(&self) -> bool {
        !matches!(self, SolverMode::TvAniso | SolverMode::TvIso)
    }
}

impl std::str::FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tntf" => Ok(SolverMode::Tntf),
            "tv-aniso" => Ok(SolverMode::TvAniso),
            "tv-iso" => Ok(SolverMode::TvIso),
            "dct" | "dct-only" => Ok(SolverMode::DctOnly),
            "dhf+dct" => Ok(SolverMode::DhfDct),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode {other:?} (expected tntf, tv-aniso, tv-iso, dct, dhf+dct)"
            ))),
        }
    }
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SolverMode::Tntf => "tntf",
            SolverMode::TvAniso => "tv-aniso",
            SolverMode::TvIso => "tv-iso",
            SolverMode::DctOnly => "dct",
            SolverMode::DhfDct => "dhf+dct",
        };
        write!(f, "{name}")
    }
}

/// Fidelity kernel selection for [`restore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelChoice {
    #[default]
    Average5,
    Identity,
}

impl KernelChoice {
    pub fn operator(&self) -> BlurOperator {
        match self {
            KernelChoice::Average5 => BlurOperator::average5(),
            KernelChoice::Identity => BlurOperator::identity(),
        }
    }
}

/// Solver parameters; defaults follow the experimental protocol
/// (gamma 1.99, delta 0.5, at most 400 iterations, tolerance 1e-9).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub delta: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub base_lambda: f64,
    pub sigma: f64,
    pub mode: SolverMode,
    pub param_window: usize,
    pub seed: u64,
    pub freeze_params: bool,
    pub kernel: KernelChoice,
    /// A-trous dilation of the second-level bank (2 standard, 1 for ablation).
    pub dct_dilation: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 1.99,
            delta: 0.5,
            max_iters: 400,
            rel_tol: 1e-9,
            base_lambda: 2e-4,
            sigma: 0.0,
            mode: SolverMode::Tntf,
            param_window: 3,
            seed: 0,
            freeze_params: false,
            kernel: KernelChoice::Average5,
            dct_dilation: 2,
        }
    }
}

impl SolverConfig {
    pub fn new(mode: SolverMode, base_lambda: f64, sigma: f64) -> SolverConfig {
        SolverConfig {
            mode,
            base_lambda,
            sigma,
            ..SolverConfig::default()
        }
    }

    /// Check the structural constraints plus the step-size condition
    /// `gamma < 2 / |K|^2` against a power-iteration estimate of the blur
    /// norm on the given grid. Returns the Lipschitz estimate.
    pub fn validate(&self, blur: &BlurOperator, width: usize, height: usize) -> Result<f64> {
        if self.gamma.is_nan() || self.delta.is_nan() || self.gamma <= 0.0 || self.delta <= 0.0 {
            return Err(Error::InvalidConfig(
                "gamma and delta must be positive".into(),
            ));
        }
        if self.gamma * self.delta >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma*delta = {} must be < 1",
                self.gamma * self.delta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return Err(Error::InvalidConfig("rel_tol must be nonnegative".into()));
        }
        if self.param_window < 3 || self.param_window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "param_window must be odd and >= 3, got {}",
                self.param_window
            )));
        }
        if self.base_lambda < 0.0 || !self.base_lambda.is_finite() {
            return Err(Error::InvalidConfig("base_lambda must be nonnegative".into()));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig("sigma must be nonnegative".into()));
        }
        if self.dct_dilation != 1 && self.dct_dilation != 2 {
            return Err(Error::InvalidConfig(format!(
                "dct_dilation must be 1 or 2, got {}",
                self.dct_dilation
            )));
        }
        let n = width * height;
        let norm_k = operator_norm(
            |x| {
                let img = Image::from_vec(width, height, x.to_vec()).unwrap();
                blur.apply(&img, false).unwrap().into_data()
            },
            |x| {
                let img = Image::from_vec(width, height, x.to_vec()).unwrap();
                blur.apply(&img, true).unwrap().into_data()
            },
            n,
            150,
            0x6f72_6d6b,
        );
        let lipschitz = norm_k * norm_k;
        if self.gamma >= 2.0 / lipschitz {
            return Err(Error::InvalidConfig(format!(
                "gamma = {} violates gamma < 2/|K|^2 = {}",
                self.gamma,
                2.0 / lipschitz
            )));
        }
        Ok(lipschitz)
    }
}

/// One history row per iteration. `rel_change` is the relative l2 change of
/// consecutive projected iterates (infinite at k = 0), `m_norm_step` the
/// M-norm of the (v, s) update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub rel_change: f64,
    pub m_norm_step: f64,
}

/// Iterate tuple of the splitting scheme plus the convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Projected primal iterate; inside `[0,1]^n` after every step.
    pub u: Image,
    /// Unprojected primal iterate.
    pub v: Vec<f64>,
    /// Stacked dual iterate (`s1` block then `s2` block) and its cached
    /// adjoint image; the cache always equals `At s`.
    s: Vec<f64>,
    at_s: Vec<f64>,
    s1_len: usize,
    pub k: usize,
    pub history: Vec<IterationRecord>,
}

impl SolverState {
    /// Zero-initialized state (`v = 0`, `s = 0`).
    pub fn new(width: usize, height: usize, analysis: &AnalysisOperator) -> SolverState {
        let n = width * height;
        SolverState {
            u: Image::new(width, height),
            v: vec![0.0; n],
            s: vec![0.0; analysis.output_len(n)],
            at_s: vec![0.0; n],
            s1_len: analysis.s1_len(n),
            k: 0,
            history: Vec::new(),
        }
    }

    /// State with explicit iterates, for warm starts and step-level tests.
    pub fn from_parts(
        u: Image,
        v: Vec<f64>,
        s: Vec<f64>,
        analysis: &AnalysisOperator,
    ) -> Result<SolverState> {
        let n = u.len();
        if v.len() != n {
            return Err(Error::ShapeMismatch("v must have one entry per pixel".into()));
        }
        if s.len() != analysis.output_len(n) {
            return Err(Error::ShapeMismatch(format!(
                "dual vector has {} entries, operator expects {}",
                s.len(),
                analysis.output_len(n)
            )));
        }
        let at_s = analysis.adjoint(&s, u.width(), u.height())?.into_data();
        Ok(SolverState {
            s1_len: analysis.s1_len(n),
            u,
            v,
            s,
            at_s,
            k: 0,
            history: Vec::new(),
        })
    }

    /// First dual block (empty when the mode carries none).
    pub fn s1(&self) -> &[f64] {
        &self.s[..self.s1_len]
    }

    /// Second dual block (empty when the mode carries none).
    pub fn s2(&self) -> &[f64] {
        &self.s[self.s1_len..]
    }
}

/// Data, operators, and current weight maps of one restoration instance.
#[derive(Debug, Clone)]
pub struct RestorationProblem {
    pub z: Image,
    pub blur: BlurOperator,
    pub analysis: AnalysisOperator,
    pub lambda: Option<GroupWeightMap>,
    pub theta: Option<SubbandWeightMap>,
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

fn penalty_value(problem: &RestorationProblem, mode: SolverMode, coeffs: &[f64]) -> f64 {
    let n = problem.z.len();
    let s1_len = problem.analysis.s1_len(n);
    let mut value = 0.0;
    if mode.has_s1() {
        let lambda = problem.lambda.as_ref().expect("lambda map present");
        let block = &coeffs[..s1_len];
        value += match mode {
            SolverMode::TvAniso => phi1_aniso_value(block, lambda),
            SolverMode::TvIso => phi1_iso_value(block, lambda),
            _ => phi1_value(block, lambda),
        };
    }
    if mode.has_s2() {
        let theta = problem.theta.as_ref().expect("theta map present");
        value += phi2_value(&coeffs[s1_len..], theta);
    }
    value
}

fn dual_prox(
    problem: &RestorationProblem,
    mode: SolverMode,
    t: &[f64],
    delta: f64,
) -> Result<Vec<f64>> {
    let n = problem.z.len();
    let s1_len = problem.analysis.s1_len(n);
    let scale = 1.0 / delta;
    let mut s_new = Vec::with_capacity(t.len());
    if mode.has_s1() {
        let lambda = problem
            .lambda
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("mode needs a lambda map".into()))?;
        let block = prox_conjugate(
            |x| match mode {
                SolverMode::TvAniso => prox_phi1_aniso(x, lambda, scale),
                SolverMode::TvIso => prox_phi1_iso(x, lambda, scale),
                _ => prox_phi1(x, lambda, scale),
            },
            &t[..s1_len],
            delta,
        )?;
        s_new.extend_from_slice(&block);
    }
    if mode.has_s2() {
        let theta = problem
            .theta
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("mode needs a theta map".into()))?;
        let block = prox_conjugate(|x| prox_phi2(x, theta, scale), &t[s1_len..], delta)?;
        s_new.extend_from_slice(&block);
    }
    Ok(s_new)
}

/// One PD3O iteration. Records the model objective at the projected iterate
/// and the M-norm of the (v, s) update; errors with the iteration index if a
/// non-finite value appears.
pub fn pd3o_step(
    state: SolverState,
    problem: &RestorationProblem,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    let (gamma, delta) = (cfg.gamma, cfg.delta);
    let (width, height) = (problem.z.width(), problem.z.height());
    let n = width * height;
    debug_assert_eq!(state.v.len(), n);

    // (a) project onto the box
    let u: Vec<f64> = state.v.iter().map(|t| t.clamp(0.0, 1.0)).collect();
    let u_img = Image::from_vec(width, height, u.clone())?;

    // gradient of the fidelity at u
    let ku = problem.blur.apply(&u_img, false)?;
    let residual: Vec<f64> = ku
        .data()
        .iter()
        .zip(problem.z.data())
        .map(|(a, b)| a - b)
        .collect();
    let residual_img = Image::from_vec(width, height, residual.clone())?;
    let grad = problem.blur.apply(&residual_img, true)?;

    // (b) auxiliary point fed to the dual update
    let x: Vec<f64> = (0..n)
        .map(|i| gamma * state.at_s[i] - (2.0 * u[i] - state.v[i]) + gamma * grad.data()[i])
        .collect();
    let ax = problem.analysis.apply(&Image::from_vec(width, height, x)?)?;

    // (c)-(d) conjugate prox on s - delta * A x, blockwise
    let t: Vec<f64> = state
        .s
        .iter()
        .zip(&ax)
        .map(|(si, axi)| si - delta * axi)
        .collect();
    let s_new = dual_prox(problem, cfg.mode, &t, delta)?;
    let at_new = problem.analysis.adjoint(&s_new, width, height)?.into_data();

    // (e) primal update
    let v_new: Vec<f64> = (0..n)
        .map(|i| u[i] - gamma * grad.data()[i] - gamma * at_new[i])
        .collect();

    // Objective at u under the current weights.
    let au = problem.analysis.apply(&u_img)?;
    let fidelity = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
    let objective = fidelity + penalty_value(problem, cfg.mode, &au);

    // M-norm of the update, from the cached adjoints (At ds = At s_new - At s).
    let dv_sq: f64 = v_new
        .iter()
        .zip(&state.v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let ds_sq: f64 = s_new
        .iter()
        .zip(&state.s)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let at_ds_sq: f64 = at_new
        .iter()
        .zip(&state.at_s)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let m_norm_step =
        (dv_sq + gamma / delta * (ds_sq - gamma * delta * at_ds_sq).max(0.0)).sqrt();

    // Relative change of consecutive projected iterates.
    let rel_change = if state.k == 0 {
        f64::INFINITY
    } else {
        let diff: f64 = u
            .iter()
            .zip(state.u.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        diff / l2_norm(state.u.data()).max(1e-30)
    };

    let finite = u.iter().all(|t| t.is_finite())
        && v_new.iter().all(|t| t.is_finite())
        && s_new.iter().all(|t| t.is_finite())
        && objective.is_finite();
    if !finite {
        return Err(Error::Diverged {
            iteration: state.k,
        });
    }

    let mut history = state.history;
    history.push(IterationRecord {
        k: state.k,
        objective,
        rel_change,
        m_norm_step,
    });
    Ok(SolverState {
        u: u_img,
        v: v_new,
        s: s_new,
        at_s: at_new,
        s1_len: state.s1_len,
        k: state.k + 1,
        history,
    })
}

/// M-norm of a (dv, ds) pair:
/// `sqrt(|dv|^2 + (gamma/delta) * (|ds|^2 - gamma*delta*|At ds|^2))`.
/// Requires `gamma * delta < 1` so the metric is positive definite.
pub fn m_norm(
    dv: &[f64],
    ds: &[f64],
    analysis: &AnalysisOperator,
    width: usize,
    height: usize,
    gamma: f64,
    delta: f64,
) -> Result<f64> {
    if gamma.is_nan() || delta.is_nan() || gamma <= 0.0 || delta <= 0.0 || gamma * delta >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "M-norm needs positive steps with gamma*delta < 1, got {}",
            gamma * delta
        )));
    }
    let at_ds = analysis.adjoint(ds, width, height)?;
    let dv_sq: f64 = dv.iter().map(|t| t * t).sum();
    let ds_sq: f64 = ds.iter().map(|t| t * t).sum();
    let at_sq: f64 = at_ds.data().iter().map(|t| t * t).sum();
    Ok((dv_sq + gamma / delta * (ds_sq - gamma * delta * at_sq).max(0.0)).sqrt())
}

/// Restored image plus the per-iteration convergence records.
#[derive(Debug, Clone, PartialEq)]
pub struct RestoreResult {
    pub image: Image,
    pub history: Vec<IterationRecord>,
}

/// Re-estimate the weight maps. The first-level map adapts to the analysis
/// coefficients of `lambda_source` (the observation at startup, the running
/// iterate afterwards). The second-level map subtracts the per-subband noise
/// variance from a local moment, which is only calibrated when its source
/// still carries the observation noise, so it is estimated from the
/// residual-corrected iterate `u + (z - K u)`; for the zero iterate that
/// source is the observation itself.
fn refresh_weights(
    problem: &mut RestorationProblem,
    cfg: &SolverConfig,
    noise: &NoiseModel,
    lambda_source: &Image,
    theta_iterate: &Image,
) -> Result<()> {
    let n = lambda_source.len();
    let (w, h) = (lambda_source.width(), lambda_source.height());
    let s1_len = problem.analysis.s1_len(n);
    if cfg.mode.has_s1() {
        let coeffs = problem.analysis.apply(lambda_source)?;
        problem.lambda = Some(if cfg.base_lambda > 0.0 {
            estimate_lambda(&coeffs[..s1_len], w, h, cfg.base_lambda, cfg.param_window)?
        } else {
            GroupWeightMap::constant(n, 0.0)?
        });
    }
    if cfg.mode.has_s2() {
        let ku = problem.blur.apply(theta_iterate, false)?;
        let corrected: Vec<f64> = theta_iterate
            .data()
            .iter()
            .zip(ku.data())
            .zip(problem.z.data())
            .map(|((ui, kui), zi)| ui + (zi - kui))
            .collect();
        let coeffs = problem.analysis.apply(&Image::from_vec(w, h, corrected)?)?;
        problem.theta = Some(estimate_theta(
            &coeffs[s1_len..],
            w,
            h,
            noise,
            cfg.param_window,
        )?);
    }
    Ok(())
}

/// Build the operators and initial weight maps for an observation.
pub fn build_problem(z: &Image, cfg: &SolverConfig) -> Result<RestorationProblem> {
    let blur = cfg.kernel.operator();
    cfg.validate(&blur, z.width(), z.height())?;
    let analysis = AnalysisOperator::with_dct_dilation(cfg.mode.analysis_mode(), cfg.dct_dilation);
    let noise = NoiseModel::new(cfg.sigma, analysis.dct())?;
    let mut problem = RestorationProblem {
        z: z.clone(),
        blur,
        analysis,
        lambda: None,
        theta: None,
    };
    if cfg.mode.is_adaptive() {
        let zero = Image::new(z.width(), z.height());
        refresh_weights(&mut problem, cfg, &noise, z, &zero)?;
    } else {
        // TV baselines: one constant weight, never re-estimated.
        problem.lambda = Some(GroupWeightMap::constant(z.len(), cfg.base_lambda)?);
    }
    Ok(problem)
}

/// Run the splitting scheme on an observation until the relative change of
/// consecutive iterates drops below `rel_tol` or `max_iters` is reached.
pub fn restore(z: &Image, cfg: &SolverConfig) -> Result<RestoreResult> {
    let mut problem = build_problem(z, cfg)?;
    let noise = NoiseModel::new(cfg.sigma, problem.analysis.dct())?;
    let mut state = SolverState::new(z.width(), z.height(), &problem.analysis);
    for k in 0..cfg.max_iters {
        if k > 0 && cfg.mode.is_adaptive() && !cfg.freeze_params && update_schedule(k) {
            let current = Image::from_vec(
                z.width(),
                z.height(),
                state.v.iter().map(|t| t.clamp(0.0, 1.0)).collect(),
            )?;
            refresh_weights(&mut problem, cfg, &noise, &current, &current)?;
        }
        state = pd3o_step(state, &problem, cfg)?;
        let record = state.history.last().expect("step pushed a record");
        if record.rel_change < cfg.rel_tol {
            break;
        }
    }
    Ok(RestoreResult {
        image: state.u,
        history: state.history,
    })
}

/// Write the convergence history as CSV with columns
/// `k,objective,rel_change,m_norm_step`.
pub fn write_history_csv(history: &[IterationRecord], path: &Path) -> Result<()> {
    let mut out = String::from("k,objective,rel_change,m_norm_step\n");
    for rec in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            rec.k, rec.objective, rec.rel_change, rec.m_norm_step
        ));
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
