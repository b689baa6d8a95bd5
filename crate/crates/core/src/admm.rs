//! Split Bregman (ADMM) solver for `min ½‖u − f‖² + α·J(u)`.
//!
//! The prior subgradient of a Bregman step is folded into `f` by the caller
//! (adding-back form), so this is a plain ROF solve that additionally returns
//! the dual field certifying its optimality: at convergence
//! `u − f = α·divergence(q)` with `q` inside the unit ball of the flavor.

use crate::dct;
use crate::error::{Error, Result};
use crate::functionals::{tv_value, Subgradient, TvFlavor};
use crate::grid::{divergence, gradient, shrink_field_in_place, ScalarField, VectorField};

pub const MU_MIN: f64 = 1e-4;
pub const MU_MAX: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmmConfig {
    /// Initial penalty.
    pub mu0: f64,
    /// Residual balancing of the penalty.
    pub adapt: bool,
    /// Primal tolerance, relative to `‖f‖₂`.
    pub tol_primal: f64,
    /// Dual tolerance, relative to `‖f‖₂`.
    pub tol_dual: f64,
    pub max_inner: usize,
    pub flavor: TvFlavor,
    /// Over-relaxation factor in `[1, 2)`; 1 is plain ADMM.
    pub relaxation: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            mu0: 3.0,
            adapt: true,
            tol_primal: 1e-5,
            tol_dual: 1e-5,
            max_inner: 2000,
            flavor: TvFlavor::Isotropic,
            relaxation: 1.6,
        }
    }
}

impl AdmmConfig {
    pub fn with_flavor(flavor: TvFlavor) -> Self {
        Self {
            flavor,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol_primal = tol;
        self.tol_dual = tol;
        self
    }

    pub fn with_max_inner(mut self, max_inner: usize) -> Self {
        self.max_inner = max_inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0 > 0.0
            && self.mu0.is_finite()
            && self.tol_primal > 0.0
            && self.tol_dual > 0.0
            && self.max_inner >= 1
            && (1.0..2.0).contains(&self.relaxation);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid ADMM configuration {self:?}")))
        }
    }
}

/// Residual balancing: returns the new penalty, or `None` when unchanged.
pub(crate) fn balance_penalty(mu: f64, primal: f64, dual: f64) -> Option<f64> {
    let next = if primal > 10.0 * dual {
        (mu * 2.0).min(MU_MAX)
    } else if dual > 10.0 * primal {
        (mu * 0.5).max(MU_MIN)
    } else {
        mu
    };
    (next != mu).then_some(next)
}

/// Splitting state carried between consecutive solves. The dual is stored
/// unscaled so it stays valid when the penalty changes.
#[derive(Clone, Debug)]
pub struct AdmmWarmStart {
    pub d: VectorField,
    pub q: VectorField,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub u: ScalarField,
    pub d: VectorField,
    /// Scaled multiplier at the final penalty.
    pub b: VectorField,
    pub mu: f64,
    /// `(μ/α)·b`
    pub q_out: Subgradient,
    pub inner_iters: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl InnerSolution {
    pub fn warm_start(&self) -> AdmmWarmStart {
        AdmmWarmStart {
            d: self.d.clone(),
            q: self.q_out.field.clone(),
            mu: self.mu,
        }
    }
}

/// `½‖u − f‖² + α·J(u)`
pub fn objective_value(u: &ScalarField, f_eff: &ScalarField, alpha: f64, flavor: TvFlavor) -> f64 {
    let fid = u.distance(f_eff);
    0.5 * fid * fid + alpha * tv_value(u, flavor)
}

pub fn solve_rof_with_prior(
    f_eff: &ScalarField,
    alpha: f64,
    cfg: &AdmmConfig,
) -> Result<InnerSolution> {
    solve_rof_warm(f_eff, alpha, cfg, None)
}

pub fn solve_rof_warm(
    f_eff: &ScalarField,
    alpha: f64,
    cfg: &AdmmConfig,
    warm: Option<&AdmmWarmStart>,
) -> Result<InnerSolution> {
    solve(f_eff, alpha, cfg, warm, None)
}

/// Like [`solve_rof_with_prior`] but also returns the objective after every
/// sweep.
pub fn solve_rof_traced(
    f_eff: &ScalarField,
    alpha: f64,
    cfg: &AdmmConfig,
) -> Result<(InnerSolution, Vec<f64>)> {
    let mut trace = Vec::new();
    let sol = solve(f_eff, alpha, cfg, None, Some(&mut trace))?;
    Ok((sol, trace))
}

fn solve(
    f: &ScalarField,
    alpha: f64,
    cfg: &AdmmConfig,
    warm: Option<&AdmmWarmStart>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<InnerSolution> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    cfg.validate()?;
    let grid = f.grid();
    let isotropic = cfg.flavor.is_isotropic();
    let scale = f.norm();
    let tol_p = cfg.tol_primal * scale;
    let tol_d = cfg.tol_dual * scale;

    let (mut mu, mut d, mut b) = match warm {
        Some(w) if w.d.grid() == grid => (w.mu, w.d.clone(), w.q.scale(alpha / w.mu)),
        _ => (cfg.mu0, VectorField::zeros(grid), VectorField::zeros(grid)),
    };

    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    for it in 1..=cfg.max_inner {
        // (I − μΔ)u = f − μ·div(d − b)
        let div_bd = divergence(&b.sub(&d));
        let rhs = f.axpy(mu, &div_bd);
        let u = dct::screened(1.0, mu, &rhs);

        let grad = gradient(&u);
        // relaxed ∇u: ρ∇u + (1 − ρ)d
        let mut relaxed = grad.scale(cfg.relaxation);
        relaxed.add_scaled_in_place(1.0 - cfg.relaxation, &d);
        let mut d_new = relaxed.add(&b);
        shrink_field_in_place(&mut d_new, alpha / mu, isotropic);
        b.add_scaled_in_place(1.0, &relaxed);
        b.add_scaled_in_place(-1.0, &d_new);

        primal = grad.sub(&d_new).norm();
        // defect of u − f = μ·div b in the u-step optimality condition
        let mut defect = d_new.sub(&d);
        if cfg.relaxation != 1.0 {
            defect.add_scaled_in_place(1.0 - cfg.relaxation, &grad.sub(&d));
        }
        dual = mu * divergence(&defect).norm();
        d = d_new;

        if let Some(t) = trace.as_deref_mut() {
            t.push(objective_value(&u, f, alpha, cfg.flavor));
        }
        if primal <= tol_p && dual <= tol_d {
            let q = b.scale(mu / alpha);
            return Ok(InnerSolution {
                u,
                d,
                b,
                mu,
                q_out: Subgradient::new(q, cfg.flavor),
                inner_iters: it,
                primal_residual: primal,
                dual_residual: dual,
            });
        }
        if cfg.adapt {
            if let Some(next) = balance_penalty(mu, primal, dual) {
                b.scale_in_place(mu / next);
                mu = next;
            }
        }
    }
    Err(Error::NotConverged {
        channel: None,
        primal,
        dual,
        tol_primal: tol_p,
        tol_dual: tol_d,
        iterations: cfg.max_inner,
    })
}
