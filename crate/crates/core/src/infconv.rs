//! Bregman iteration with sign-independent cross-channel coupling.
//!
//! Channel `i` minimizes
//!
//! ```text
//! λ/2‖u − fᵢ‖² + w_ii·D^{qᵢ}(u) + Σ_{j≠i} w_ij·inf_φ [D^{qⱼ}(u − φ) + D^{−qⱼ}(φ)]
//! ```
//!
//! where `D^q(v) = J(v) − ⟨q, ∇v⟩`. The splitting `dᵢ = ∇u`,
//! `d₊ⱼ = ∇(u − φⱼ)`, `d₋ⱼ = ∇φⱼ` turns every nonsmooth term into a
//! shrinkage, and the joint `(u, φ)` minimization reduces to one screened
//! Poisson solve for `u` followed by one pure Poisson solve per `φⱼ`.
//!
//! `φⱼ` is stored as `ψⱼ = φⱼ − u/2`. Negating `qⱼ` then maps `ψⱼ` to `−ψⱼ`
//! and swaps the `±` splitting variables exactly, so the iterates of the
//! other channels do not depend on the sign of channel `j` even in floating
//! point.

use std::ops::ControlFlow;

use log::debug;
use rayon::prelude::*;

use crate::admm::{balance_penalty, AdmmConfig};
use crate::bench::psnr;
use crate::bregman::{drive, OuterIteration, RunOutput, StepOptions, StopRule};
use crate::dct;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::functionals::{dual_image, tv_of_gradient, tv_value, TvFlavor};
use crate::grid::{
    divergence, gradient, shrink_field_in_place, MultiChannelImage, ScalarField,
    VectorField,
};
use crate::weights::WeightMatrix;

/// Splitting variables coupling channel `i` to channel `j`.
#[derive(Clone, Debug)]
pub struct PairBlock {
    pub j: usize,
    pub weight: f64,
    /// `ψ = φ − u/2`, zero mean.
    pub psi: ScalarField,
    pub d_plus: VectorField,
    pub d_minus: VectorField,
    pub b_plus: VectorField,
    pub b_minus: VectorField,
}

impl PairBlock {
    /// `φ = u/2 + ψ` for the channel image `u`.
    pub fn phi(&self, u: &ScalarField) -> ScalarField {
        u.scale(0.5).add(&self.psi)
    }
}

/// Converged splitting state of one channel.
#[derive(Clone, Debug)]
pub struct ChannelBlock {
    pub i: usize,
    /// `w_ii`
    pub weight: f64,
    pub u: ScalarField,
    pub d: VectorField,
    pub b: VectorField,
    /// Only pairs with `w_ij > 0`.
    pub pairs: Vec<PairBlock>,
    pub mu: f64,
    pub inner_iters: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Energy of the split problem around one inner sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepEnergy {
    pub start: f64,
    /// After the joint `(u, φ)` solve.
    pub after_primal: f64,
    /// After the shrinkages.
    pub after_shrink: f64,
}

#[derive(Clone, Debug)]
pub struct InfconvState {
    pub k: usize,
    pub f: MultiChannelImage,
    pub u: MultiChannelImage,
    /// Dual vector fields `qᵢᵏ`.
    pub q: Vec<VectorField>,
    /// `None` before the first solve.
    pub blocks: Vec<Option<ChannelBlock>>,
    pub diagnostics: Vec<DiagnosticsRecord>,
}

impl InfconvState {
    pub fn new(f: &MultiChannelImage) -> Self {
        let m = f.num_channels();
        let grid = f.grid();
        Self {
            k: 0,
            f: f.clone(),
            u: MultiChannelImage::zeros(grid, m),
            q: vec![VectorField::zeros(grid); m],
            blocks: vec![None; m],
            diagnostics: Vec::new(),
        }
    }
}

fn check_weights(w: &WeightMatrix, m: usize) -> Result<()> {
    if w.size() != m {
        return Err(Error::ShapeMismatch(format!(
            "weight matrix is {0}x{0} but the image has {m} channels",
            w.size()
        )));
    }
    if let Some(i) = (0..m).find(|&i| w.get(i, i) <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "infimal convolution needs positive diagonal weights, w[{i}][{i}] = {}",
            w.get(i, i)
        )));
    }
    Ok(())
}

/// Joint minimizer of the quadratic part over `(u, ψ)` for fixed
/// `aᵢ = dᵢ − bᵢ` and per-pair `(a₊, a₋) = (d₊ − b₊, d₋ − b₋)`:
///
/// ```text
/// (λ − μ(c+2)/2·Δ) u = λf − μ·div aᵢ − μ/2·Σ div(a₊ + a₋)
/// −Δψⱼ = div(a₊ − a₋)/2
/// ```
///
/// with `c` the number of pairs. Each `ψⱼ` is returned with zero mean.
pub fn solve_u_psi(
    f: &ScalarField,
    lambda: f64,
    mu: f64,
    a_i: &VectorField,
    pairs: &[(VectorField, VectorField)],
) -> (ScalarField, Vec<ScalarField>) {
    let c = pairs.len() as f64;
    let mut rhs = f.scale(lambda).axpy(-mu, &divergence(a_i));
    for (ap, am) in pairs {
        rhs = rhs.axpy(-0.5 * mu, &divergence(&ap.add(am)));
    }
    let u = dct::screened(lambda, 0.5 * mu * (c + 2.0), &rhs);
    let psis = pairs
        .iter()
        .map(|(ap, am)| {
            let rhs = divergence(&ap.sub(am)).scale(0.5);
            let (psi, removed) = dct::solve_pure_poisson_projected(&rhs);
            if removed.abs() > 1e-10 * rhs.max_abs().max(1.0) {
                debug!("projected mean {removed:.3e} out of a psi right-hand side");
            }
            psi
        })
        .collect();
    (u, psis)
}

fn flavor_norm(g: &VectorField, flavor: TvFlavor) -> f64 {
    tv_of_gradient(g, flavor)
}

struct Problem<'a> {
    f: &'a ScalarField,
    lambda: f64,
    flavor: TvFlavor,
    w_ii: f64,
    q_i: &'a VectorField,
    /// `(j, w_ij, qⱼ)`
    others: Vec<(usize, f64, &'a VectorField)>,
}

/// `(∇u/2 − ∇ψ, ∇u/2 + ∇ψ)`, the gradients of `u − φ` and `φ`.
fn split_gradients(half_grad_u: &VectorField, psi: &ScalarField) -> (VectorField, VectorField) {
    let g = gradient(psi);
    (half_grad_u.sub(&g), half_grad_u.add(&g))
}

impl Problem<'_> {
    fn energy(&self, block: &ChannelBlock) -> f64 {
        let mu = block.mu;
        let grad_u = gradient(&block.u);
        let half = grad_u.scale(0.5);
        let fid = block.u.distance(self.f);
        let mut e = 0.5 * self.lambda * fid * fid;
        e += self.w_ii * (flavor_norm(&block.d, self.flavor) - self.q_i.dot(&block.d));
        e += 0.5 * mu * block.d.sub(&grad_u).sub(&block.b).norm().powi(2);
        for (pair, &(_, w, qj)) in block.pairs.iter().zip(&self.others) {
            let (gp, gm) = split_gradients(&half, &pair.psi);
            e += w * (flavor_norm(&pair.d_plus, self.flavor) - qj.dot(&pair.d_plus));
            e += w * (flavor_norm(&pair.d_minus, self.flavor) + qj.dot(&pair.d_minus));
            e += 0.5 * mu * pair.d_plus.sub(&gp).sub(&pair.b_plus).norm().powi(2);
            e += 0.5 * mu * pair.d_minus.sub(&gm).sub(&pair.b_minus).norm().powi(2);
        }
        e
    }
}

fn fresh_block(i: usize, prob: &Problem<'_>, mu: f64) -> ChannelBlock {
    let grid = prob.f.grid();
    let zero = VectorField::zeros(grid);
    ChannelBlock {
        i,
        weight: prob.w_ii,
        u: prob.f.clone(),
        d: zero.clone(),
        b: zero.clone(),
        pairs: prob
            .others
            .iter()
            .map(|&(j, weight, _)| PairBlock {
                j,
                weight,
                psi: ScalarField::zeros(grid),
                d_plus: zero.clone(),
                d_minus: zero.clone(),
                b_plus: zero.clone(),
                b_minus: zero.clone(),
            })
            .collect(),
        mu,
        inner_iters: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
    }
}

fn solve_primal(block: &mut ChannelBlock, prob: &Problem<'_>) {
    let mu = block.mu;
    let a_i = block.d.sub(&block.b);
    let a_pairs: Vec<(VectorField, VectorField)> = block
        .pairs
        .iter()
        .map(|p| (p.d_plus.sub(&p.b_plus), p.d_minus.sub(&p.b_minus)))
        .collect();
    let (u, psis) = solve_u_psi(prob.f, prob.lambda, mu, &a_i, &a_pairs);
    block.u = u;
    for (pair, psi) in block.pairs.iter_mut().zip(psis) {
        pair.psi = psi;
    }
}

fn shrink_and_update(block: &mut ChannelBlock, prob: &Problem<'_>, isotropic: bool) -> (f64, f64) {
    let mu = block.mu;
    let grad_u = gradient(&block.u);

    let t_i = prob.w_ii / mu;
    let mut d_new = grad_u.add(&block.b).axpy(t_i, prob.q_i);
    shrink_field_in_place(&mut d_new, t_i, isotropic);
    let delta_i = d_new.sub(&block.d);
    block.b.add_scaled_in_place(1.0, &grad_u);
    block.b.add_scaled_in_place(-1.0, &d_new);
    let mut primal2 = grad_u.sub(&d_new).norm().powi(2);
    block.d = d_new;

    // dual residual μ·Aᵀ(Δd) with A = [∇; ∇/2 − ∇ψ; ∇/2 + ∇ψ]
    let mut u_dual = delta_i;
    let mut psi_dual2 = 0.0;
    let half = grad_u.scale(0.5);
    for (pair, &(_, w, qj)) in block.pairs.iter_mut().zip(&prob.others) {
        let t = w / mu;
        let (gp, gm) = split_gradients(&half, &pair.psi);

        let mut dp = gp.add(&pair.b_plus).axpy(t, qj);
        shrink_field_in_place(&mut dp, t, isotropic);
        let mut dm = gm.add(&pair.b_minus).axpy(-t, qj);
        shrink_field_in_place(&mut dm, t, isotropic);

        let delta_p = dp.sub(&pair.d_plus);
        let delta_m = dm.sub(&pair.d_minus);
        pair.b_plus.add_scaled_in_place(1.0, &gp);
        pair.b_plus.add_scaled_in_place(-1.0, &dp);
        pair.b_minus.add_scaled_in_place(1.0, &gm);
        pair.b_minus.add_scaled_in_place(-1.0, &dm);
        primal2 += gp.sub(&dp).norm().powi(2) + gm.sub(&dm).norm().powi(2);

        psi_dual2 += divergence(&delta_m.sub(&delta_p)).norm().powi(2);
        u_dual.add_scaled_in_place(0.5, &delta_p.add(&delta_m));
        pair.d_plus = dp;
        pair.d_minus = dm;
    }
    let dual = mu * (divergence(&u_dual).norm().powi(2) + psi_dual2).sqrt();
    (primal2.sqrt(), dual)
}

fn rescale_multipliers(block: &mut ChannelBlock, factor: f64) {
    block.b.scale_in_place(factor);
    for pair in &mut block.pairs {
        pair.b_plus.scale_in_place(factor);
        pair.b_minus.scale_in_place(factor);
    }
}

fn inner(
    i: usize,
    state: &InfconvState,
    w: &WeightMatrix,
    lambda: f64,
    cfg: &AdmmConfig,
    mut trace: Option<&mut Vec<SweepEnergy>>,
) -> Result<ChannelBlock> {
    let m = state.f.num_channels();
    check_weights(w, m)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    cfg.validate()?;
    let prob = Problem {
        f: state.f.channel(i),
        lambda,
        flavor: cfg.flavor,
        w_ii: w.get(i, i),
        q_i: &state.q[i],
        others: (0..m)
            .filter(|&j| j != i && w.get(i, j) > 0.0)
            .map(|j| (j, w.get(i, j), &state.q[j]))
            .collect(),
    };
    let isotropic = cfg.flavor.is_isotropic();
    let mut block = match &state.blocks[i] {
        Some(b) if b.pairs.len() == prob.others.len() => {
            let mut b = b.clone();
            b.weight = prob.w_ii;
            b
        }
        _ => fresh_block(i, &prob, cfg.mu0 * lambda),
    };

    let scale = prob.f.norm();
    let tol_p = cfg.tol_primal * scale;
    let tol_d = cfg.tol_dual * lambda * scale;
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    for it in 1..=cfg.max_inner {
        let start = trace.as_ref().map(|_| prob.energy(&block));
        solve_primal(&mut block, &prob);
        let after_primal = trace.as_ref().map(|_| prob.energy(&block));
        let b_before: Option<ChannelBlock> = trace.as_ref().map(|_| block.clone());
        (primal, dual) = shrink_and_update(&mut block, &prob, isotropic);
        if let (Some(t), Some(start), Some(after_primal), Some(mut shrunk)) =
            (trace.as_deref_mut(), start, after_primal, b_before)
        {
            // Energy after the shrinkages, measured with the multipliers
            // those shrinkages saw.
            shrunk.d = block.d.clone();
            for (p, q) in shrunk.pairs.iter_mut().zip(&block.pairs) {
                p.d_plus = q.d_plus.clone();
                p.d_minus = q.d_minus.clone();
            }
            t.push(SweepEnergy {
                start,
                after_primal,
                after_shrink: prob.energy(&shrunk),
            });
        }
        if primal <= tol_p && dual <= tol_d {
            block.inner_iters = it;
            block.primal_residual = primal;
            block.dual_residual = dual;
            return Ok(block);
        }
        if cfg.adapt {
            if let Some(next) = balance_penalty(block.mu, primal, dual / lambda) {
                let factor = block.mu / next;
                rescale_multipliers(&mut block, factor);
                block.mu = next;
            }
        }
    }
    Err(Error::NotConverged {
        channel: Some(i),
        primal,
        dual,
        tol_primal: tol_p,
        tol_dual: tol_d,
        iterations: cfg.max_inner,
    })
}

/// Solves the split problem of channel `i` against the duals stored in
/// `state`, warm-started from the channel's previous block when present.
pub fn infconv_inner_solve(
    i: usize,
    state: &InfconvState,
    w: &WeightMatrix,
    lambda: f64,
    cfg: &AdmmConfig,
) -> Result<ChannelBlock> {
    inner(i, state, w, lambda, cfg, None)
}

/// Like [`infconv_inner_solve`], also returning the split energy around
/// every sweep.
pub fn infconv_inner_traced(
    i: usize,
    state: &InfconvState,
    w: &WeightMatrix,
    lambda: f64,
    cfg: &AdmmConfig,
) -> Result<(ChannelBlock, Vec<SweepEnergy>)> {
    let mut trace = Vec::new();
    let block = inner(i, state, w, lambda, cfg, Some(&mut trace))?;
    Ok((block, trace))
}

/// `qᵢᵏ⁺¹ = qᵢᵏ + (μ/w_ii)·bᵢ`, checked against the dual-norm bound.
pub fn infconv_q_update(
    q_prev: &VectorField,
    block: &ChannelBlock,
    flavor: TvFlavor,
    tol: f64,
) -> Result<VectorField> {
    let q = q_prev.axpy(block.mu / block.weight, &block.b);
    let excess = q.max_pointwise_norm(flavor.is_isotropic()) - 1.0;
    if excess > 10.0 * tol {
        return Err(Error::DualNormViolation { channel: block.i, excess });
    }
    Ok(q)
}

/// Re-expresses the multipliers against the new duals so the implied sign
/// fields `q + (μ/w)·b` are unchanged.
fn rebase_block(block: &mut ChannelBlock, q_old: &[VectorField], q_new: &[VectorField]) {
    block.b = VectorField::zeros(block.b.grid());
    for pair in &mut block.pairs {
        let shift = q_old[pair.j].sub(&q_new[pair.j]);
        let s = pair.weight / block.mu;
        pair.b_plus.add_scaled_in_place(s, &shift);
        pair.b_minus.add_scaled_in_place(-s, &shift);
    }
}

/// `max over pairs` of `D^{qⱼ}(uᵢ − φ)` and `D^{−qⱼ}(φ)`.
fn stationarity(
    blocks: &[ChannelBlock],
    q_prev: &[VectorField],
    flavor: TvFlavor,
) -> Option<(f64, f64)> {
    let mut out: Option<(f64, f64)> = None;
    for block in blocks {
        let half = gradient(&block.u).scale(0.5);
        for pair in &block.pairs {
            let (gp, grad_phi) = split_gradients(&half, &pair.psi);
            let qj = &q_prev[pair.j];
            let plus = tv_of_gradient(&gp, flavor) - qj.dot(&gp);
            let minus = tv_of_gradient(&grad_phi, flavor) + qj.dot(&grad_phi);
            out = Some(match out {
                None => (plus, minus),
                Some((p, m)) => (p.max(plus), m.max(minus)),
            });
        }
    }
    out
}

/// One outer iteration: every channel against `qᵏ`, then the dual update.
pub fn infconv_step(
    mut state: InfconvState,
    w: &WeightMatrix,
    alpha: f64,
    cfg: &AdmmConfig,
    opts: &StepOptions<'_>,
) -> Result<InfconvState> {
    advance(&mut state, w, alpha, cfg, opts)?;
    Ok(state)
}

fn advance(
    state: &mut InfconvState,
    w: &WeightMatrix,
    alpha: f64,
    cfg: &AdmmConfig,
    opts: &StepOptions<'_>,
) -> Result<()> {
    let m = state.f.num_channels();
    check_weights(w, m)?;
    let lambda = 1.0 / alpha;
    let solve = |i: usize| {
        if opts.warm_start {
            infconv_inner_solve(i, state, w, lambda, cfg)
        } else {
            let mut cold = state.clone();
            cold.blocks[i] = None;
            infconv_inner_solve(i, &cold, w, lambda, cfg)
        }
    };
    let mut blocks: Vec<ChannelBlock> = if opts.parallel && m > 1 {
        (0..m).into_par_iter().map(solve).collect::<Result<_>>()?
    } else {
        (0..m).map(solve).collect::<Result<_>>()?
    };

    let q_new = blocks
        .iter()
        .zip(&state.q)
        .map(|(b, q)| infconv_q_update(q, b, cfg.flavor, cfg.tol_dual.max(1e-12)))
        .collect::<Result<Vec<_>>>()?;
    let stat = stationarity(&blocks, &state.q, cfg.flavor);

    let u_new = MultiChannelImage::new(blocks.iter().map(|b| b.u.clone()).collect())?;
    let mut dual_step2 = 0.0;
    let mut sym = 0.0;
    for (i, (qn, qo)) in q_new.iter().zip(&state.q).enumerate() {
        let dq = dual_image(&qn.sub(qo)).scale(alpha);
        dual_step2 += dq.norm().powi(2);
        sym += dq.dot(&u_new.channel(i).sub(state.u.channel(i))) / alpha;
    }

    for block in &mut blocks {
        rebase_block(block, &state.q, &q_new);
    }
    state.blocks = blocks.into_iter().map(Some).collect();
    state.q = q_new;
    state.u = u_new;
    state.k += 1;

    state.diagnostics.push(DiagnosticsRecord {
        k: state.k,
        tv: state.u.channels().iter().map(|c| tv_value(c, cfg.flavor)).collect(),
        residual: state.f.distance(&state.u),
        dual_step: dual_step2.sqrt(),
        psnr: opts.reference.map(|r| psnr(&state.u, r)).transpose()?,
        sym_bregman: Some(sym),
        stationarity: stat.or(Some((0.0, 0.0))),
    });
    Ok(())
}

#[derive(Clone, Debug)]
pub struct InfconvEngine {
    pub state: InfconvState,
    pub weights: WeightMatrix,
    pub alpha: f64,
    pub cfg: AdmmConfig,
    pub reference: Option<MultiChannelImage>,
    pub parallel: bool,
}

impl InfconvEngine {
    pub fn new(f: &MultiChannelImage, weights: WeightMatrix, alpha: f64, cfg: AdmmConfig) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        cfg.validate()?;
        check_weights(&weights, f.num_channels())?;
        Ok(Self {
            state: InfconvState::new(f),
            weights,
            alpha,
            cfg,
            reference: None,
            parallel: true,
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

impl OuterIteration for InfconvEngine {
    fn step(&mut self) -> Result<()> {
        let opts = StepOptions {
            reference: self.reference.as_ref(),
            parallel: self.parallel,
            warm_start: true,
        };
        advance(&mut self.state, &self.weights, self.alpha, &self.cfg, &opts)
    }

    fn iterate(&self) -> &MultiChannelImage {
        &self.state.u
    }

    fn diagnostics(&self) -> &[DiagnosticsRecord] {
        &self.state.diagnostics
    }
}

/// Infimal-convolution Bregman iteration until `stop` fires.
pub fn infconv_run(
    f: &MultiChannelImage,
    w: &WeightMatrix,
    alpha: f64,
    stop: StopRule,
    cfg: &AdmmConfig,
) -> Result<RunOutput> {
    let mut engine = InfconvEngine::new(f, w.clone(), alpha, *cfg)?;
    let reason = drive(&mut engine, &stop, |_| ControlFlow::Continue(()))?;
    Ok(RunOutput {
        u: engine.state.u,
        diagnostics: engine.state.diagnostics,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::solve_rof_with_prior;
    use crate::grid::Grid;

    fn two_channel(grid: Grid) -> MultiChannelImage {
        let a = ScalarField::from_fn(grid, |r, c| {
            if (2..6).contains(&r) && (2..6).contains(&c) { 1.0 } else { 0.0 }
        });
        let b = ScalarField::from_fn(grid, |r, c| {
            let base = if (2..6).contains(&r) && (2..6).contains(&c) { -0.5 } else { 0.2 };
            base + 0.03 * (((r * 3 + c * 5) % 4) as f64 - 1.5)
        });
        MultiChannelImage::new(vec![a, b]).unwrap()
    }

    #[test]
    fn single_channel_matches_rof() {
        let g = Grid::new(7, 6).unwrap();
        let f = MultiChannelImage::new(vec![two_channel(g).channel(1).clone()]).unwrap();
        let w = WeightMatrix::identity(1).unwrap();
        let cfg = AdmmConfig::default().with_tolerance(1e-10).with_max_inner(20_000);
        let alpha = 0.2;
        let out = infconv_run(&f, &w, alpha, StopRule::FixedIterations(1), &cfg).unwrap();
        let rof = solve_rof_with_prior(f.channel(0), alpha, &cfg).unwrap();
        assert!(out.u.channel(0).sub(&rof.u).max_abs() < 1e-8);
    }

    #[test]
    fn q_update_certifies_subgradient() {
        let g = Grid::new(8, 8).unwrap();
        let f = two_channel(g);
        let w = WeightMatrix::uniform(2, 0.25).unwrap();
        let cfg = AdmmConfig::with_flavor(TvFlavor::Anisotropic).with_tolerance(1e-8).with_max_inner(20_000);
        let opts = StepOptions { parallel: false, ..StepOptions::default() };
        let state = infconv_step(InfconvState::new(&f), &w, 0.2, &cfg, &opts).unwrap();
        for i in 0..2 {
            let sub = crate::functionals::Subgradient::new(state.q[i].clone(), cfg.flavor);
            let report = crate::functionals::is_subgradient(state.u.channel(i), &sub, 1e-5);
            assert!(report.holds, "{report:?}");
        }
    }

    #[test]
    fn zero_multiplier_keeps_dual() {
        let g = Grid::new(3, 3).unwrap();
        let q = VectorField::from_components(g, vec![0.5; 9], vec![-0.25; 9]).unwrap();
        let block = ChannelBlock {
            i: 0,
            weight: 0.5,
            u: ScalarField::zeros(g),
            d: VectorField::zeros(g),
            b: VectorField::zeros(g),
            pairs: Vec::new(),
            mu: 3.0,
            inner_iters: 1,
            primal_residual: 0.0,
            dual_residual: 0.0,
        };
        assert_eq!(infconv_q_update(&q, &block, TvFlavor::Isotropic, 1e-6).unwrap(), q);
        let mut bad = block.clone();
        bad.b = VectorField::from_components(g, vec![1.0; 9], vec![0.0; 9]).unwrap();
        assert!(matches!(
            infconv_q_update(&q, &bad, TvFlavor::Isotropic, 1e-6),
            Err(Error::DualNormViolation { .. })
        ));
    }

    #[test]
    fn constant_input_is_fixed() {
        let g = Grid::new(5, 5).unwrap();
        let f = MultiChannelImage::new(vec![ScalarField::constant(g, 0.2), ScalarField::constant(g, 0.9)])
            .unwrap();
        let w = WeightMatrix::default_for(2).unwrap();
        let out = infconv_run(&f, &w, 0.1, StopRule::FixedIterations(1), &AdmmConfig::default()).unwrap();
        assert!(out.u.distance(&f) < 1e-10);
    }

    #[test]
    fn rejects_zero_diagonal() {
        let g = Grid::new(3, 3).unwrap();
        let f = two_channel(g);
        let w = WeightMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(infconv_run(&f, &w, 0.1, StopRule::FixedIterations(1), &AdmmConfig::default()).is_err());
    }
}
