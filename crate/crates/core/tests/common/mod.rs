//! Independent reference solvers shared by the oracle and acceptance tests.

#![allow(dead_code)]

use colorbreg::grid::{divergence, gradient, Grid, ScalarField, VectorField};
use colorbreg::TvFlavor;
use nalgebra::{DMatrix, DVector};

/// Exact 1-D ROF `min ½‖u − f‖² + α·Σ|u_{i+1} − u_i|` by enumerating the
/// active sets of the dual box QP `min ½‖f − α·Dᵀq‖²`, `|q_j| ≤ 1`.
pub fn rof_1d_exact(f: &[f64], alpha: f64) -> Vec<f64> {
    let n = f.len();
    if n < 2 {
        return f.to_vec();
    }
    let m = n - 1;
    // (D u)_j = u_{j+1} − u_j; Dᵀ is n × m.
    let mut dt = DMatrix::<f64>::zeros(n, m);
    for j in 0..m {
        dt[(j, j)] = -1.0;
        dt[(j + 1, j)] = 1.0;
    }
    let fv = DVector::from_column_slice(f);
    let primal = |q: &DVector<f64>| &fv - alpha * (&dt * q);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(m as u32) {
        // 0 free, 1 at +1, 2 at −1
        let state: Vec<usize> = (0..m).map(|j| (code / 3usize.pow(j as u32)) % 3).collect();
        let mut q = DVector::<f64>::zeros(m);
        for j in 0..m {
            q[j] = match state[j] {
                1 => 1.0,
                2 => -1.0,
                _ => 0.0,
            };
        }
        let free: Vec<usize> = (0..m).filter(|&j| state[j] == 0).collect();
        if !free.is_empty() {
            // stationarity on the free set: α·D_F (f − α Dᵀq) = 0
            let dt_f = DMatrix::from_fn(n, free.len(), |r, c| dt[(r, free[c])]);
            let fixed = &fv - alpha * (&dt * &q);
            let lhs = alpha * dt_f.transpose() * &dt_f;
            let rhs = dt_f.transpose() * fixed;
            let Some(sol) = lhs.lu().solve(&rhs) else { continue };
            for (c, &j) in free.iter().enumerate() {
                q[j] = sol[c];
            }
        }
        if q.iter().any(|v| v.abs() > 1.0 + 1e-12) {
            continue;
        }
        let u = primal(&q);
        let val = 0.5 * u.norm_squared();
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, u));
        }
    }
    best.expect("q = 0 restricted problems always include a feasible point").1.as_slice().to_vec()
}

fn project_dual(q: &mut VectorField, flavor: TvFlavor) {
    let g = q.grid();
    let (x, y): (Vec<f64>, Vec<f64>) = match flavor {
        TvFlavor::Isotropic => q
            .x()
            .iter()
            .zip(q.y())
            .map(|(&a, &b)| {
                let n = (a * a + b * b).sqrt().max(1.0);
                (a / n, b / n)
            })
            .unzip(),
        TvFlavor::Anisotropic => (
            q.x().iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
            q.y().iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        ),
    };
    *q = VectorField::from_components(g, x, y).unwrap();
}

/// ROF by FISTA on the dual `min ½‖f + α·div q‖²` over the unit ball.
/// Returns the primal solution and the final duality gap.
pub fn rof_fista(f: &ScalarField, alpha: f64, flavor: TvFlavor, iters: usize) -> (ScalarField, f64) {
    let grid = f.grid();
    let step = 1.0 / (8.0 * alpha * alpha);
    let mut q = VectorField::zeros(grid);
    let mut z = q.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let u = f.axpy(alpha, &divergence(&z));
        // ∇_q ½‖f + α div q‖² = −α ∇(f + α div q)
        let mut next = z.axpy(step * alpha, &gradient(&u));
        project_dual(&mut next, flavor);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.axpy((t - 1.0) / t_next, &next.sub(&q));
        q = next;
        t = t_next;
    }
    let u = f.axpy(alpha, &divergence(&q));
    let primal = colorbreg::objective_value(&u, f, alpha, flavor);
    let dual = 0.5 * f.norm().powi(2) - 0.5 * u.norm().powi(2);
    (u, primal - dual)
}

/// Dense matrix of a linear field map, column `k` = image of basis vector `k`.
pub fn dense_scalar_op(grid: Grid, op: impl Fn(&ScalarField) -> ScalarField) -> DMatrix<f64> {
    let n = grid.len();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = op(&ScalarField::from_vec(grid, e).unwrap());
        for (r, v) in col.values().iter().enumerate() {
            m[(r, k)] = *v;
        }
    }
    m
}

/// Dense `2N × N` gradient, x components first.
pub fn dense_gradient(grid: Grid) -> DMatrix<f64> {
    let n = grid.len();
    let mut m = DMatrix::zeros(2 * n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let g = gradient(&ScalarField::from_vec(grid, e).unwrap());
        for r in 0..n {
            m[(r, k)] = g.x()[r];
            m[(n + r, k)] = g.y()[r];
        }
    }
    m
}

pub fn stack(v: &VectorField) -> DVector<f64> {
    DVector::from_iterator(2 * v.x().len(), v.x().iter().chain(v.y()).copied())
}

/// `min_φ Σ_i |φ_i| − p_i φ_i + |v_i − φ_i| + p_i (v_i − φ_i)` by exhaustive
/// search over `φ ∈ h·ℤ^d ∩ [−r, r]^d`.
pub fn l1_infconv_brute(v: &[f64], p: &[f64], h: f64, r: f64) -> f64 {
    let d = v.len();
    let steps = (r / h).round() as i64;
    let axis: Vec<f64> = (-steps..=steps).map(|k| k as f64 * h).collect();
    let mut idx = vec![0usize; d];
    let mut best = f64::INFINITY;
    loop {
        let mut val = 0.0;
        for i in 0..d {
            let phi = axis[idx[i]];
            let psi = v[i] - phi;
            val += phi.abs() - p[i] * phi + psi.abs() + p[i] * psi;
        }
        best = best.min(val);
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < axis.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            return best;
        }
    }
}
