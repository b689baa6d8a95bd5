//! Cosine-transform solvers for the Neumann Laplacian.
//!
//! The orthonormal type-II DCT diagonalizes `divergence ∘ gradient` on the
//! replicate-boundary grid, with eigenvalues `−(λ_k + λ_l)` where
//! `λ_k = 2 − 2cos(πk/N)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Transform plans and Laplacian spectrum for one grid shape.
pub struct DctPlan {
    grid: Grid,
    rows: Arc<dyn TransformType2And3<f64>>,
    cols: Arc<dyn TransformType2And3<f64>>,
    row_eig: Vec<f64>,
    col_eig: Vec<f64>,
    scratch_len: usize,
}

impl std::fmt::Debug for DctPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DctPlan").field("grid", &self.grid).finish()
    }
}

fn laplacian_spectrum(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 - 2.0 * (PI * k as f64 / n as f64).cos())
        .collect()
}

impl DctPlan {
    fn build(grid: Grid) -> Self {
        let mut planner = DctPlanner::new();
        let rows = planner.plan_dct2(grid.width());
        let cols = planner.plan_dct2(grid.height());
        let scratch_len = rows.get_scratch_len().max(cols.get_scratch_len());
        Self {
            grid,
            rows,
            cols,
            row_eig: laplacian_spectrum(grid.width()),
            col_eig: laplacian_spectrum(grid.height()),
            scratch_len,
        }
    }

    /// Shared plan for `grid`, built on first use.
    pub fn for_grid(grid: Grid) -> Arc<DctPlan> {
        static CACHE: OnceLock<Mutex<HashMap<Grid, Arc<DctPlan>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(grid)
            .or_insert_with(|| Arc::new(DctPlan::build(grid)))
            .clone()
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Eigenvalue of `−Δ` for coefficient `(row, col)`.
    #[inline]
    pub fn neg_laplacian_eigenvalue(&self, row: usize, col: usize) -> f64 {
        self.col_eig[row] + self.row_eig[col]
    }

    /// In-place orthonormal 2-D DCT-II of row-major `values`.
    pub fn forward(&self, values: &mut [f64]) {
        self.separable(values, Direction::Forward);
    }

    /// In-place inverse of [`DctPlan::forward`].
    pub fn inverse(&self, values: &mut [f64]) {
        self.separable(values, Direction::Inverse);
    }

    fn separable(&self, values: &mut [f64], dir: Direction) {
        let (h, w) = (self.grid.height(), self.grid.width());
        assert_eq!(values.len(), h * w);
        let mut scratch = vec![0.0; self.scratch_len];
        if w > 1 {
            for row in values.chunks_exact_mut(w) {
                transform_1d(self.rows.as_ref(), row, &mut scratch, dir);
            }
        }
        if h > 1 {
            let mut t = vec![0.0; h * w];
            transpose(values, &mut t, h, w);
            for col in t.chunks_exact_mut(h) {
                transform_1d(self.cols.as_ref(), col, &mut scratch, dir);
            }
            transpose(&t, values, w, h);
        }
    }
}

/// Blocked transpose of an `h × w` row-major array into `out`.
fn transpose(src: &[f64], out: &mut [f64], h: usize, w: usize) {
    const B: usize = 16;
    for r0 in (0..h).step_by(B) {
        for c0 in (0..w).step_by(B) {
            for r in r0..(r0 + B).min(h) {
                for c in c0..(c0 + B).min(w) {
                    out[c * h + r] = src[r * w + c];
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn transform_1d(
    plan: &dyn TransformType2And3<f64>,
    buf: &mut [f64],
    scratch: &mut [f64],
    dir: Direction,
) {
    let n = buf.len() as f64;
    let s0 = (1.0 / n).sqrt();
    let sk = (2.0 / n).sqrt();
    match dir {
        Direction::Forward => {
            plan.process_dct2_with_scratch(buf, scratch);
            buf[0] *= s0;
            buf[1..].iter_mut().for_each(|v| *v *= sk);
        }
        Direction::Inverse => {
            buf[0] *= 2.0 * s0;
            buf[1..].iter_mut().for_each(|v| *v *= sk);
            plan.process_dct3_with_scratch(buf, scratch);
        }
    }
}

/// Orthonormal 2-D DCT-II.
pub fn dct2(u: &ScalarField) -> ScalarField {
    let mut values = u.values().to_vec();
    DctPlan::for_grid(u.grid()).forward(&mut values);
    ScalarField::from_raw(u.grid(), values)
}

/// Inverse of [`dct2`].
pub fn idct2(c: &ScalarField) -> ScalarField {
    let mut values = c.values().to_vec();
    DctPlan::for_grid(c.grid()).inverse(&mut values);
    ScalarField::from_raw(c.grid(), values)
}

/// `(a·I − b·Δ) u = rhs` with Neumann Δ.
#[derive(Clone, Debug)]
pub struct ScreenedPoissonProblem {
    pub a: f64,
    pub b: f64,
    pub rhs: ScalarField,
}

pub fn solve_screened_poisson(problem: &ScreenedPoissonProblem) -> Result<ScalarField> {
    if !(problem.a > 0.0) || !problem.a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "screened Poisson needs a > 0, got {}",
            problem.a
        )));
    }
    if !(problem.b >= 0.0) || !problem.b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "screened Poisson needs b >= 0, got {}",
            problem.b
        )));
    }
    Ok(screened(problem.a, problem.b, &problem.rhs))
}

/// Unchecked screened solve for the inner loops.
pub(crate) fn screened(a: f64, b: f64, rhs: &ScalarField) -> ScalarField {
    let grid = rhs.grid();
    let plan = DctPlan::for_grid(grid);
    let mut values = rhs.values().to_vec();
    plan.forward(&mut values);
    let w = grid.width();
    for r in 0..grid.height() {
        for c in 0..w {
            values[r * w + c] /= a + b * plan.neg_laplacian_eigenvalue(r, c);
        }
    }
    plan.inverse(&mut values);
    ScalarField::from_raw(grid, values)
}

/// Zero-mean solution of `−Δu = rhs`; `rhs` must sum to zero.
pub fn solve_pure_poisson(rhs: &ScalarField) -> Result<ScalarField> {
    let sum = rhs.sum();
    let l1: f64 = rhs.values().iter().map(|v| v.abs()).sum();
    if sum.abs() > 1e-6 * l1 {
        return Err(Error::IncompatiblePoisson { sum, l1 });
    }
    Ok(pure(rhs))
}

/// Projects out the mean of `rhs` before solving; returns the removed mean.
pub(crate) fn solve_pure_poisson_projected(rhs: &ScalarField) -> (ScalarField, f64) {
    let mean = rhs.mean();
    if mean == 0.0 {
        return (pure(rhs), 0.0);
    }
    (pure(&rhs.map(|v| v - mean)), mean)
}

fn pure(rhs: &ScalarField) -> ScalarField {
    let grid = rhs.grid();
    let plan = DctPlan::for_grid(grid);
    let mut values = rhs.values().to_vec();
    plan.forward(&mut values);
    let w = grid.width();
    values[0] = 0.0;
    for r in 0..grid.height() {
        for c in 0..w {
            if r + c > 0 {
                values[r * w + c] /= plan.neg_laplacian_eigenvalue(r, c);
            }
        }
    }
    plan.inverse(&mut values);
    ScalarField::from_raw(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::laplacian;

    fn pseudo_random(grid: Grid, seed: u64) -> ScalarField {
        let mut s = seed;
        ScalarField::from_fn(grid, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn constant_concentrates_in_dc() {
        let g = Grid::new(6, 5).unwrap();
        let c = dct2(&ScalarField::constant(g, 2.0));
        assert!((c.values()[0] - 2.0 * (30f64).sqrt()).abs() < 1e-12);
        assert!(c.values()[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn round_trip_and_parseval() {
        for (h, w) in [(8, 8), (1, 13), (7, 3), (16, 9)] {
            let g = Grid::new(h, w).unwrap();
            let u = pseudo_random(g, (h * 31 + w) as u64);
            let c = dct2(&u);
            assert!((c.norm() - u.norm()).abs() < 1e-12);
            let back = idct2(&c);
            assert!(back.sub(&u).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn screened_trivial_cases() {
        let g = Grid::new(5, 4).unwrap();
        let rhs = pseudo_random(g, 3);
        let u = solve_screened_poisson(&ScreenedPoissonProblem { a: 2.0, b: 0.0, rhs: rhs.clone() })
            .unwrap();
        assert!(u.sub(&rhs.scale(0.5)).max_abs() < 1e-14);
        let c = solve_screened_poisson(&ScreenedPoissonProblem {
            a: 4.0,
            b: 3.0,
            rhs: ScalarField::constant(g, 2.0),
        })
        .unwrap();
        assert!(c.values().iter().all(|v| (v - 0.5).abs() < 1e-14));
        assert!(solve_screened_poisson(&ScreenedPoissonProblem { a: 0.0, b: 1.0, rhs }).is_err());
    }

    #[test]
    fn screened_inverts_grid_laplacian() {
        let g = Grid::new(9, 6).unwrap();
        let u = pseudo_random(g, 11);
        let rhs = u.sub(&laplacian(&u));
        let back = solve_screened_poisson(&ScreenedPoissonProblem { a: 1.0, b: 1.0, rhs }).unwrap();
        assert!(back.sub(&u).max_abs() < 1e-12);
    }

    #[test]
    fn pure_poisson_recovers_mean_free_part() {
        let g = Grid::new(7, 8).unwrap();
        let v = pseudo_random(g, 5);
        let rhs = laplacian(&v).scale(-1.0);
        let u = solve_pure_poisson(&rhs).unwrap();
        let mean = v.mean();
        assert!(u.sub(&v.map(|x| x - mean)).max_abs() < 1e-9);
        assert!(u.mean().abs() < 1e-12);
        assert_eq!(solve_pure_poisson(&ScalarField::zeros(g)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn pure_poisson_rejects_incompatible_rhs() {
        let g = Grid::new(3, 3).unwrap();
        let rhs = ScalarField::constant(g, 1.0);
        assert!(matches!(
            solve_pure_poisson(&rhs),
            Err(Error::IncompatiblePoisson { .. })
        ));
        let (u, removed) = solve_pure_poisson_projected(&rhs);
        assert!((removed - 1.0).abs() < 1e-15);
        assert!(u.max_abs() < 1e-12);
    }
}
