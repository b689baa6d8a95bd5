//! Outer Bregman iterations in adding-back-the-noise form.
//!
//! With `Qᵏ = α·pᵏ` the image-space subgradients, one step reads
//!
//! ```text
//! u_iᵏ⁺¹ = ROF_α(f_effᵢᵏ)
//! Qᵢᵏ⁺¹  = f_effᵢᵏ − u_iᵏ⁺¹
//! f_effᵢᵏ⁺¹ = fᵢ + Σⱼ w_ij Qⱼᵏ⁺¹
//! ```
//!
//! which is the dual update `pᵏ⁺¹ = W pᵏ + λ(f − uᵏ⁺¹)` with `λ = 1/α`.
//! Channelwise Bregman is the same loop with each channel feeding only itself.

use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::admm::{solve_rof_warm, AdmmConfig, AdmmWarmStart, InnerSolution};
use crate::bench::psnr;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::functionals::{tv_value, Subgradient};
use crate::grid::{MultiChannelImage, ScalarField};
use crate::weights::WeightMatrix;

/// When the outer loop ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    FixedIterations(usize),
    /// Stop once `‖qᵏ⁺¹ − qᵏ‖ < sigma·√(pixels·channels)`.
    Discrepancy { sigma: f64, max_iters: usize },
    /// Stop once `‖rᵏ‖ < eps`.
    ResidualFloor { eps: f64, max_iters: usize },
}

impl StopRule {
    pub fn max_iters(&self) -> usize {
        match *self {
            StopRule::FixedIterations(n) => n,
            StopRule::Discrepancy { max_iters, .. } | StopRule::ResidualFloor { max_iters, .. } => {
                max_iters
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StopRule::FixedIterations(n) => n >= 1,
            StopRule::Discrepancy { sigma, max_iters } => sigma > 0.0 && max_iters >= 1,
            StopRule::ResidualFloor { eps, max_iters } => eps > 0.0 && max_iters >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid stop rule {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    IterationCap,
    Discrepancy,
    ResidualFloor,
    /// The observer asked to stop.
    Observer,
}

/// Everything an outer iteration carries between steps.
#[derive(Clone, Debug)]
pub struct OuterState {
    pub k: usize,
    pub f: MultiChannelImage,
    pub u: MultiChannelImage,
    pub f_eff: MultiChannelImage,
    /// Image-space subgradients `Qᵏ = α·pᵏ`.
    pub dual: MultiChannelImage,
    /// Dual vector fields of the last inner solves; empty at `k = 0`.
    pub q: Vec<Subgradient>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    warm: Vec<Option<AdmmWarmStart>>,
}

impl OuterState {
    /// `u⁰ = 0`, `Q⁰ = 0`, `f_eff⁰ = f`.
    pub fn new(f: &MultiChannelImage) -> Self {
        let m = f.num_channels();
        let zeros = MultiChannelImage::zeros(f.grid(), m);
        Self {
            k: 0,
            f: f.clone(),
            u: zeros.clone(),
            f_eff: f.clone(),
            dual: zeros,
            q: Vec::new(),
            diagnostics: Vec::new(),
            warm: vec![None; m],
        }
    }
}

/// Per-step settings shared by every engine.
#[derive(Clone, Copy, Debug)]
pub struct StepOptions<'a> {
    /// Clean image for the PSNR column.
    pub reference: Option<&'a MultiChannelImage>,
    /// Solve channels on the rayon pool.
    pub parallel: bool,
    /// Carry ADMM splitting variables across outer iterations.
    pub warm_start: bool,
}

impl Default for StepOptions<'_> {
    fn default() -> Self {
        Self {
            reference: None,
            parallel: true,
            warm_start: true,
        }
    }
}

/// How the channels exchange subgradients.
#[derive(Clone, Debug, PartialEq)]
pub enum Coupling {
    /// Each channel only sees its own subgradient.
    Channelwise,
    Weighted(WeightMatrix),
}

impl Coupling {
    fn check(&self, m: usize) -> Result<()> {
        match self {
            Coupling::Weighted(w) if w.size() != m => Err(Error::ShapeMismatch(format!(
                "weight matrix is {0}x{0} but the image has {m} channels",
                w.size()
            ))),
            _ => Ok(()),
        }
    }

    fn mix(&self, i: usize, dual: &[ScalarField]) -> ScalarField {
        match self {
            Coupling::Channelwise => dual[i].clone(),
            Coupling::Weighted(w) => {
                let mut acc: Option<ScalarField> = None;
                for (j, qj) in dual.iter().enumerate() {
                    let wij = w.get(i, j);
                    if wij == 0.0 {
                        continue;
                    }
                    acc = Some(match acc {
                        None => qj.scale(wij),
                        Some(a) => a.axpy(wij, qj),
                    });
                }
                acc.unwrap_or_else(|| ScalarField::zeros(dual[i].grid()))
            }
        }
    }
}

fn solve_channels(
    state: &OuterState,
    alpha: f64,
    cfg: &AdmmConfig,
    opts: &StepOptions<'_>,
) -> Result<Vec<InnerSolution>> {
    let solve = |i: usize| {
        let warm = if opts.warm_start { state.warm[i].as_ref() } else { None };
        solve_rof_warm(state.f_eff.channel(i), alpha, cfg, warm).map_err(|e| e.on_channel(i))
    };
    let m = state.f.num_channels();
    if opts.parallel && m > 1 {
        (0..m).into_par_iter().map(solve).collect()
    } else {
        (0..m).map(solve).collect()
    }
}

/// `(W − I)Qᵏ + f − uᵏ` for each channel.
fn residual_fields(state: &OuterState, coupling: &Coupling) -> Vec<ScalarField> {
    let dual = state.dual.channels();
    (0..state.f.num_channels())
        .map(|i| {
            coupling
                .mix(i, dual)
                .sub(&dual[i])
                .add(state.f.channel(i))
                .sub(state.u.channel(i))
        })
        .collect()
}

fn stacked_norm(fields: &[ScalarField]) -> f64 {
    fields.iter().map(|f| f.norm().powi(2)).sum::<f64>().sqrt()
}

/// Stacked Euclidean norm of `rᵏ = (W − I)Qᵏ + f − uᵏ`.
pub fn residual(state: &OuterState, w: &WeightMatrix) -> Result<f64> {
    let coupling = Coupling::Weighted(w.clone());
    coupling.check(state.f.num_channels())?;
    Ok(stacked_norm(&residual_fields(state, &coupling)))
}

/// One outer step with the given coupling.
pub fn coupled_step(
    mut state: OuterState,
    coupling: &Coupling,
    alpha: f64,
    cfg: &AdmmConfig,
    opts: &StepOptions<'_>,
) -> Result<OuterState> {
    advance(&mut state, coupling, alpha, cfg, opts)?;
    Ok(state)
}

fn advance(
    state: &mut OuterState,
    coupling: &Coupling,
    alpha: f64,
    cfg: &AdmmConfig,
    opts: &StepOptions<'_>,
) -> Result<()> {
    let m = state.f.num_channels();
    coupling.check(m)?;
    let solutions = solve_channels(state, alpha, cfg, opts)?;

    let excess_tol = 10.0 * cfg.tol_dual.max(1e-12);
    for (i, s) in solutions.iter().enumerate() {
        let excess = s.q_out.dual_norm() - 1.0;
        if excess > excess_tol {
            return Err(Error::DualNormViolation { channel: i, excess });
        }
    }

    let new_dual: Vec<ScalarField> = (0..m)
        .map(|i| state.f_eff.channel(i).sub(&solutions[i].u))
        .collect();
    let new_u: Vec<ScalarField> = solutions.iter().map(|s| s.u.clone()).collect();
    let new_f_eff: Vec<ScalarField> = (0..m)
        .map(|i| state.f.channel(i).add(&coupling.mix(i, &new_dual)))
        .collect();

    let dual_step = stacked_norm(
        &new_dual
            .iter()
            .zip(state.dual.channels())
            .map(|(a, b)| a.sub(b))
            .collect::<Vec<_>>(),
    );
    let sym_bregman = (0..m)
        .map(|i| {
            let dq = new_dual[i].sub(state.dual.channel(i));
            let du = new_u[i].sub(state.u.channel(i));
            dq.dot(&du) / alpha
        })
        .sum::<f64>();

    state.warm = solutions.iter().map(|s| Some(s.warm_start())).collect();
    state.q = solutions.into_iter().map(|s| s.q_out).collect();
    state.u = MultiChannelImage::new(new_u)?;
    state.dual = MultiChannelImage::new(new_dual)?;
    state.f_eff = MultiChannelImage::new(new_f_eff)?;
    state.k += 1;

    let residual = stacked_norm(&residual_fields(state, coupling));
    let flavor = cfg.flavor;
    state.diagnostics.push(DiagnosticsRecord {
        k: state.k,
        tv: state.u.channels().iter().map(|c| tv_value(c, flavor)).collect(),
        residual,
        dual_step,
        psnr: opts.reference.map(|r| psnr(&state.u, r)).transpose()?,
        sym_bregman: Some(sym_bregman),
        stationarity: None,
    });
    Ok(())
}

/// One color Bregman step with weight matrix `w`.
pub fn color_bregman_step(
    state: OuterState,
    w: &WeightMatrix,
    alpha: f64,
    cfg: &AdmmConfig,
    opts: &StepOptions<'_>,
) -> Result<OuterState> {
    coupled_step(state, &Coupling::Weighted(w.clone()), alpha, cfg, opts)
}

/// One step of independent per-channel Bregman iterations.
pub fn channelwise_step(
    state: OuterState,
    alpha: f64,
    cfg: &AdmmConfig,
    opts: &StepOptions<'_>,
) -> Result<OuterState> {
    coupled_step(state, &Coupling::Channelwise, alpha, cfg, opts)
}

/// An outer iteration the generic driver can advance.
pub trait OuterIteration {
    fn step(&mut self) -> Result<()>;
    fn iterate(&self) -> &MultiChannelImage;
    fn diagnostics(&self) -> &[DiagnosticsRecord];
}

/// Color or channelwise Bregman iteration bundled with its parameters.
#[derive(Clone, Debug)]
pub struct BregmanEngine {
    pub state: OuterState,
    pub coupling: Coupling,
    pub alpha: f64,
    pub cfg: AdmmConfig,
    pub reference: Option<MultiChannelImage>,
    pub parallel: bool,
    pub warm_start: bool,
}

impl BregmanEngine {
    pub fn new(f: &MultiChannelImage, coupling: Coupling, alpha: f64, cfg: AdmmConfig) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        cfg.validate()?;
        coupling.check(f.num_channels())?;
        Ok(Self {
            state: OuterState::new(f),
            coupling,
            alpha,
            cfg,
            reference: None,
            parallel: true,
            warm_start: true,
        })
    }

    pub fn with_reference(mut self, reference: Option<MultiChannelImage>) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }
}

impl OuterIteration for BregmanEngine {
    fn step(&mut self) -> Result<()> {
        let opts = StepOptions {
            reference: self.reference.as_ref(),
            parallel: self.parallel,
            warm_start: self.warm_start,
        };
        advance(&mut self.state, &self.coupling, self.alpha, &self.cfg, &opts)
    }

    fn iterate(&self) -> &MultiChannelImage {
        &self.state.u
    }

    fn diagnostics(&self) -> &[DiagnosticsRecord] {
        &self.state.diagnostics
    }
}

/// Advances `engine` until `stop` fires or `observer` breaks. The observer
/// sees the engine after every step.
pub fn drive<E: OuterIteration>(
    engine: &mut E,
    stop: &StopRule,
    mut observer: impl FnMut(&E) -> ControlFlow<()>,
) -> Result<StopReason> {
    stop.validate()?;
    let proxy = match *stop {
        StopRule::Discrepancy { sigma, .. } => {
            let u = engine.iterate();
            sigma * ((u.grid().len() * u.num_channels()) as f64).sqrt()
        }
        _ => 0.0,
    };
    for _ in 0..stop.max_iters() {
        engine.step()?;
        if observer(engine).is_break() {
            return Ok(StopReason::Observer);
        }
        let last = engine.diagnostics().last().expect("step logs a record");
        match *stop {
            StopRule::Discrepancy { .. } if last.dual_step < proxy => {
                return Ok(StopReason::Discrepancy)
            }
            StopRule::ResidualFloor { eps, .. } if last.residual < eps => {
                return Ok(StopReason::ResidualFloor)
            }
            _ => {}
        }
    }
    Ok(StopReason::IterationCap)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub u: MultiChannelImage,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub reason: StopReason,
}

impl RunOutput {
    pub fn iterations(&self) -> usize {
        self.diagnostics.last().map_or(0, |r| r.k)
    }
}

/// Color Bregman iteration until `stop` fires.
pub fn run(
    f: &MultiChannelImage,
    w: &WeightMatrix,
    alpha: f64,
    stop: StopRule,
    cfg: &AdmmConfig,
) -> Result<RunOutput> {
    run_engine(BregmanEngine::new(f, Coupling::Weighted(w.clone()), alpha, *cfg)?, stop)
}

/// Independent per-channel Bregman iterations until `stop` fires.
pub fn run_channelwise(
    f: &MultiChannelImage,
    alpha: f64,
    stop: StopRule,
    cfg: &AdmmConfig,
) -> Result<RunOutput> {
    run_engine(BregmanEngine::new(f, Coupling::Channelwise, alpha, *cfg)?, stop)
}

fn run_engine(mut engine: BregmanEngine, stop: StopRule) -> Result<RunOutput> {
    let reason = drive(&mut engine, &stop, |_| ControlFlow::Continue(()))?;
    Ok(RunOutput {
        u: engine.state.u,
        diagnostics: engine.state.diagnostics,
        reason,
    })
}
