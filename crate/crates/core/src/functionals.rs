//! Total variation, ℓ¹ Bregman distances and subgradient checks.
//!
//! A TV subgradient is carried by its dual vector field `g`; the image-space
//! element is `p = Dᵀg = -divergence(g)`, so that `⟨p, u⟩ = ⟨g, ∇u⟩` and a
//! field equal to `sign(∇u)` on the jump set certifies `p ∈ ∂J(u)`.

use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, ScalarField, VectorField};

/// Pointwise coupling of the two gradient components inside the TV norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TvFlavor {
    /// `Σ |∂x u| + |∂y u|`
    Anisotropic,
    /// `Σ sqrt(∂x u² + ∂y u²)`
    Isotropic,
}

impl TvFlavor {
    pub fn is_isotropic(self) -> bool {
        matches!(self, TvFlavor::Isotropic)
    }

    pub fn name(self) -> &'static str {
        match self {
            TvFlavor::Anisotropic => "anisotropic",
            TvFlavor::Isotropic => "isotropic",
        }
    }
}

impl std::str::FromStr for TvFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anisotropic" | "aniso" => Ok(TvFlavor::Anisotropic),
            "isotropic" | "iso" => Ok(TvFlavor::Isotropic),
            other => Err(Error::InvalidParameter(format!("unknown TV flavor '{other}'"))),
        }
    }
}

impl std::fmt::Display for TvFlavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dual vector field of a TV subgradient together with the norm it lives in.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgradient {
    pub field: VectorField,
    pub flavor: TvFlavor,
}

impl Subgradient {
    pub fn new(field: VectorField, flavor: TvFlavor) -> Self {
        Self { field, flavor }
    }

    pub fn zeros(grid: crate::grid::Grid, flavor: TvFlavor) -> Self {
        Self::new(VectorField::zeros(grid), flavor)
    }

    /// The image-space element `p = Dᵀg`.
    pub fn image(&self) -> ScalarField {
        dual_image(&self.field)
    }

    /// Pointwise dual norm: max-abs for anisotropic, Euclidean for isotropic.
    pub fn dual_norm(&self) -> f64 {
        self.field.max_pointwise_norm(self.flavor.is_isotropic())
    }
}

/// `Dᵀg`, the adjoint of the forward-difference gradient applied to `g`.
pub fn dual_image(g: &VectorField) -> ScalarField {
    divergence(g).scale(-1.0)
}

pub fn tv_value(u: &ScalarField, flavor: TvFlavor) -> f64 {
    tv_of_gradient(&gradient(u), flavor)
}

pub(crate) fn tv_of_gradient(g: &VectorField, flavor: TvFlavor) -> f64 {
    let pairs = g.x().iter().zip(g.y());
    match flavor {
        TvFlavor::Anisotropic => pairs.map(|(a, b)| a.abs() + b.abs()).sum(),
        TvFlavor::Isotropic => pairs.map(|(a, b)| (a * a + b * b).sqrt()).sum(),
    }
}

/// `J(v) − ⟨p, v⟩`, the Bregman distance of a one-homogeneous functional
/// with `p` a subgradient at the reference point.
pub fn bregman_distance(v: &ScalarField, j_of_v: f64, p: &ScalarField) -> f64 {
    j_of_v - p.dot(v)
}

fn check_l1_subgradient(v: &[f64], p: &[f64]) -> Result<()> {
    if v.len() != p.len() {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} against subgradient of length {}",
            v.len(),
            p.len()
        )));
    }
    let norm = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if norm > 1.0 + 1e-12 {
        return Err(Error::InvalidSubgradient { norm });
    }
    Ok(())
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Σ (sign(v_j) − p_j)·v_j`
pub fn l1_bregman_distance(v: &[f64], p: &[f64]) -> Result<f64> {
    check_l1_subgradient(v, p)?;
    Ok(v.iter().zip(p).map(|(&v, &p)| (sign0(v) - p) * v).sum())
}

/// Closed form of the infimal convolution of the ℓ¹ Bregman distances with
/// respect to `p` and `−p`: `Σ |v_i|·(1 − |p_i|)`.
pub fn l1_infconv_bregman(v: &[f64], p: &[f64]) -> Result<f64> {
    check_l1_subgradient(v, p)?;
    Ok(v.iter().zip(p).map(|(v, p)| v.abs() * (1.0 - p.abs())).sum())
}

/// Residuals behind an [`is_subgradient`] verdict.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubgradientReport {
    /// `max(dual_norm − 1, 0)`
    pub norm_excess: f64,
    /// `|⟨Dᵀg, u⟩ − J(u)|`
    pub duality_gap: f64,
    pub tv: f64,
    pub holds: bool,
}

/// Checks `Dᵀg ∈ ∂J(u)` through the dual-norm bound (absolute `tol`) and the
/// duality product `⟨Dᵀg, u⟩ = J(u)` (relative `tol·(1 + J(u))`).
pub fn is_subgradient(u: &ScalarField, g: &Subgradient, tol: f64) -> SubgradientReport {
    let grad = gradient(u);
    let tv = tv_of_gradient(&grad, g.flavor);
    let norm_excess = (g.dual_norm() - 1.0).max(0.0);
    let duality_gap = (g.field.dot(&grad) - tv).abs();
    SubgradientReport {
        norm_excess,
        duality_gap,
        tv,
        holds: norm_excess <= tol && duality_gap <= tol * (1.0 + tv),
    }
}

/// Default tolerance for [`is_subgradient`] on solver output.
pub const SUBGRADIENT_TOL: f64 = 1e-6;
