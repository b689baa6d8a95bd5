//! Acceptance checks, one PASS/FAIL line per criterion. Exits nonzero when
//! any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use colorbreg::bench::{
    gen_demo1d, gen_nested_squares, run_experiment, run_method, DatasetSource, ExperimentSpec, Method,
    MethodRun, NestedSquares, Selection,
};
use colorbreg::bregman::{BregmanEngine, Coupling, OuterIteration};
use colorbreg::dct::{solve_screened_poisson, ScreenedPoissonProblem};
use colorbreg::diagnostics::{diagnose, MONOTONE_SLACK};
use colorbreg::functionals::l1_infconv_bregman;
use colorbreg::grid::{divergence, gradient, laplacian, shrink_scalar, shrink_vector, Grid};
use colorbreg::infconv::InfconvEngine;
use colorbreg::{
    is_subgradient, objective_value, solve_rof_with_prior, AdmmConfig, MultiChannelImage, ScalarField,
    StopRule, TvFlavor, VectorField, WeightMatrix,
};
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_fn(grid, |_, _| rng.random_range(-1.0..1.0))
}

fn natural_ordering() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/natural");
    let mut spec = ExperimentSpec::new(vec![DatasetSource::Path(dir)]);
    spec.crop = Some((64, 64));
    spec.alphas = vec![0.05, 0.1, 0.2, 0.4, 0.8];
    spec.stop = StopRule::FixedIterations(16);
    spec.selection = Selection::BestPsnr { patience: 2 };
    let report = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let images = report.rows.len() / spec.methods.len().max(1);
    let mean = |m| report.mean_psnr(m, TvFlavor::Isotropic).unwrap_or(f64::NAN);
    let (tv, chan, color, inf) = (
        mean(Method::Tv),
        mean(Method::BregmanChannelwise),
        mean(Method::ColorBregman),
        mean(Method::Infconv),
    );
    let failures = report.rows.iter().filter(|r| r.failure.is_some()).count();
    let passed = images >= 6
        && failures == 0
        && color >= inf
        && inf >= chan.max(tv)
        && color >= tv + 0.5;
    outcome(
        passed,
        format!(
            "{images} images (64x64 crops), mean PSNR color {color:.3} >= infconv {inf:.3} >= max(channelwise {chan:.3}, tv {tv:.3}); color - tv = {:.2} dB",
            color - tv
        ),
    )
}

/// Largest up and down steps of a 1-D signal, as indices after the step.
fn jump_positions(u: &ScalarField) -> (usize, usize) {
    let v = u.values();
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let up = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
    let down = (0..d.len()).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
    (up + 1, down + 1)
}

fn demo1d() -> Outcome {
    let (_, noisy) = gen_demo1d(0);
    let alpha = 32.0;
    let cfg = AdmmConfig::default().with_tolerance(1e-6).with_max_inner(20_000);
    let w = WeightMatrix::uniform(3, 1.0 / 3.0).unwrap();
    let blue_after_6 = |coupling: Coupling| -> colorbreg::Result<(usize, usize)> {
        let mut e = BregmanEngine::new(&noisy, coupling, alpha, cfg)?.with_parallel(false);
        for _ in 0..6 {
            e.step()?;
        }
        Ok(jump_positions(e.iterate().channel(2)))
    };
    let near = |(up, down): (usize, usize)| up.abs_diff(50) <= 2 && down.abs_diff(100) <= 2;
    match (blue_after_6(Coupling::Weighted(w)), blue_after_6(Coupling::Channelwise)) {
        (Ok(color), Ok(chan)) => outcome(
            near(color) && !near(chan),
            format!("blue jumps after 6 iterations: color {color:?}, channelwise {chan:?} (true (50, 100), window +-2)"),
        ),
        (a, b) => outcome(false, format!("solver error: {:?} / {:?}", a.err(), b.err())),
    }
}

fn scaled_squares() -> MultiChannelImage {
    NestedSquares::aligned(3)
        .with_channel_scales(vec![1.0, 0.7, 0.4])
        .clean()
        .unwrap()
}

fn convergence() -> Outcome {
    let f = scaled_squares();
    let w = WeightMatrix::uniform(3, 1.0 / 3.0).unwrap();
    let cfg = AdmmConfig::default().with_tolerance(1e-6).with_max_inner(50_000);
    let out = match colorbreg::run(&f, &w, 0.2, StopRule::FixedIterations(50), &cfg) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let report = diagnose(&out.diagnostics, MONOTONE_SLACK);
    let rate = report.rate.as_ref();
    outcome(
        report.passed() && out.diagnostics.len() == 50,
        format!(
            "50 iterations: residual {}, dual step {}, max k*r^2 = {:.4e} vs 2*r1^2 = {:.4e}",
            if report.residual.passed() { "non-increasing" } else { "INCREASES" },
            if report.dual_step.passed() { "non-increasing" } else { "INCREASES" },
            rate.map_or(f64::NAN, |r| r.max_k_r2),
            rate.map_or(f64::NAN, |r| 2.0 * r.first),
        ),
    )
}

fn consensus() -> Outcome {
    let f = scaled_squares();
    let w = WeightMatrix::uniform(3, 1.0 / 3.0).unwrap();
    let cfg = AdmmConfig::default().with_tolerance(1e-6).with_max_inner(50_000);
    let mut engine = match BregmanEngine::new(&f, Coupling::Weighted(w), 0.2, cfg) {
        Ok(e) => e.with_parallel(false),
        Err(e) => return outcome(false, e.to_string()),
    };
    for k in 1..=30 {
        if let Err(e) = engine.step() {
            return outcome(false, format!("step {k} failed: {e}"));
        }
        let state = &engine.state;
        let mut worst = 0.0f64;
        let mut certified = true;
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                let r = is_subgradient(state.u.channel(i), &state.q[j], 1e-6);
                let ratio = r.duality_gap / r.tv.max(f64::MIN_POSITIVE);
                worst = worst.max(ratio);
                certified &= r.norm_excess <= 1e-6 && r.duality_gap <= 0.05 * r.tv;
            }
        }
        if certified {
            return outcome(
                true,
                format!("all channel pairs cross-certify at k = {k}, worst gap/J = {worst:.3e}"),
            );
        }
    }
    outcome(false, "no cross-certification within 30 iterations".into())
}

fn l1_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = rng.random_range(1..=3usize);
        // split points on the search lattice make the brute force exact
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-30..=30) as f64 * 0.05).collect();
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let closed = l1_infconv_bregman(&v, &p).unwrap();
        worst = worst.max((closed - l1_infconv_brute(&v, &p, 0.05, 2.0)).abs());
    }
    outcome(worst <= 1e-3, format!("200 random (v, p), dim <= 3: max |closed form - brute force| = {worst:.2e}"))
}

fn inner_oracle() -> Outcome {
    let tight = AdmmConfig::default().with_tolerance(1e-10).with_max_inner(200_000);
    let mut worst_1d = 0.0f64;
    let mut count = 0;
    for n in 1..=5usize {
        for code in 0..3usize.pow(n as u32) {
            let f: Vec<f64> = (0..n).map(|i| ((code / 3usize.pow(i as u32)) % 3) as f64 - 1.0).collect();
            let grid = Grid::line(n).unwrap();
            let field = ScalarField::from_vec(grid, f.clone()).unwrap();
            for alpha in [0.1, 0.35, 1.0] {
                let exact = ScalarField::from_vec(grid, rof_1d_exact(&f, alpha)).unwrap();
                let Ok(sol) = solve_rof_with_prior(&field, alpha, &tight) else {
                    return outcome(false, format!("ADMM failed on {f:?}"));
                };
                let got = objective_value(&sol.u, &field, alpha, TvFlavor::Isotropic);
                let want = objective_value(&exact, &field, alpha, TvFlavor::Isotropic);
                worst_1d = worst_1d.max((got - want).abs());
                count += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let grid = Grid::new(4, 4).unwrap();
    let mut worst_2d = 0.0f64;
    let mut worst_gap = 0.0f64;
    for _ in 0..20 {
        let f = random_field(grid, &mut rng);
        let alpha = rng.random_range(0.05..0.5);
        let (oracle, gap) = rof_fista(&f, alpha, TvFlavor::Isotropic, 50_000);
        let Ok(sol) = solve_rof_with_prior(&f, alpha, &tight) else {
            return outcome(false, "ADMM failed on a 4x4 image".into());
        };
        let got = objective_value(&sol.u, &f, alpha, TvFlavor::Isotropic);
        let want = objective_value(&oracle, &f, alpha, TvFlavor::Isotropic);
        worst_2d = worst_2d.max((got - want).abs());
        worst_gap = worst_gap.max(gap);
    }
    outcome(
        worst_1d <= 1e-5 && worst_2d <= 1e-5 && worst_gap <= 1e-8,
        format!(
            "{count} 1-D ternary cases: max objective error {worst_1d:.2e}; 20 random 4x4: {worst_2d:.2e} (oracle gap {worst_gap:.1e})"
        ),
    )
}

fn operator_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut adj = 0.0f64;
    for (h, w) in [(1, 10), (7, 5), (16, 16), (33, 20)] {
        let grid = Grid::new(h, w).unwrap();
        for _ in 0..10 {
            let u = random_field(grid, &mut rng);
            let gy = if grid.is_1d() { vec![0.0; grid.len()] } else { random_field(grid, &mut rng).into_values() };
            let g = VectorField::from_components(grid, random_field(grid, &mut rng).into_values(), gy).unwrap();
            adj = adj.max((gradient(&u).dot(&g) + u.dot(&divergence(&g))).abs());
        }
    }

    let mut lu = 0.0f64;
    for (h, w) in [(1, 16), (4, 4), (9, 13), (16, 16)] {
        let grid = Grid::new(h, w).unwrap();
        let lap = dense_scalar_op(grid, laplacian);
        for (a, b) in [(1.0, 1.0), (0.2, 3.0)] {
            let rhs = random_field(grid, &mut rng);
            let m = DMatrix::identity(grid.len(), grid.len()) * a - &lap * b;
            let dense = m.lu().solve(&DVector::from_column_slice(rhs.values())).unwrap();
            let fast = solve_screened_poisson(&ScreenedPoissonProblem { a, b, rhs }).unwrap();
            for (x, y) in fast.values().iter().zip(dense.iter()) {
                lu = lu.max((x - y).abs());
            }
        }
    }

    // prox optimality: the shrinkage beats every nearby point
    let mut prox_ok = true;
    for _ in 0..100 {
        let t = rng.random_range(0.0..1.5);
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (ya, yb) = shrink_vector((a, b), t);
        let obj = |x: f64, y: f64| t * (x * x + y * y).sqrt() + 0.5 * ((x - a).powi(2) + (y - b).powi(2));
        let s = shrink_scalar(a, t);
        let obj1 = |x: f64| t * x.abs() + 0.5 * (x - a).powi(2);
        for _ in 0..20 {
            let (dx, dy) = (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
            prox_ok &= obj(ya, yb) <= obj(ya + dx, yb + dy) + 1e-14;
            prox_ok &= obj1(s) <= obj1(s + dx) + 1e-14;
        }
    }
    outcome(
        adj <= 1e-12 && lu <= 1e-9 && prox_ok,
        format!(
            "adjointness defect {adj:.1e}; DCT vs dense LU {lu:.1e}; shrinkage prox-optimal on 100 inputs: {prox_ok}"
        ),
    )
}

fn sign_independence() -> Outcome {
    let (clean, noisy) = gen_nested_squares(&NestedSquares::opposite(), 0).unwrap();
    let w = WeightMatrix::default_for(2).unwrap();
    let cfg = AdmmConfig::default().with_tolerance(1e-3).with_max_inner(20_000);
    let flipped = MultiChannelImage::new(vec![noisy.channel(0).clone(), noisy.channel(1).scale(-1.0)]).unwrap();
    let mut diff = 0.0f64;
    let engines = InfconvEngine::new(&noisy, w.clone(), 0.2, cfg)
        .and_then(|a| Ok((a, InfconvEngine::new(&flipped, w.clone(), 0.2, cfg)?)));
    let (mut a, mut b) = match engines {
        Ok((a, b)) => (a.with_parallel(false), b.with_parallel(false)),
        Err(e) => return outcome(false, e.to_string()),
    };
    for _ in 0..5 {
        if let Err(e) = a.step().and_then(|_| b.step()) {
            return outcome(false, format!("infconv failed: {e}"));
        }
        diff = diff.max(a.iterate().channel(0).sub(b.iterate().channel(0)).max_abs());
    }

    let best = |method: Method| -> colorbreg::Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for alpha in [0.05, 0.1, 0.2, 0.4] {
            let run = MethodRun {
                method,
                alpha,
                weights: &w,
                stop: StopRule::FixedIterations(20),
                cfg: if method == Method::Infconv { cfg } else { cfg.with_tolerance(1e-4) },
                selection: Selection::BestPsnr { patience: 2 },
                parallel: false,
            };
            best = best.max(run_method(&noisy, Some(&clean), &run)?.psnr.unwrap_or(f64::NAN));
        }
        Ok(best)
    };
    match (best(Method::Infconv), best(Method::ColorBregman)) {
        (Ok(inf), Ok(color)) => outcome(
            diff <= 1e-6 && inf > color,
            format!(
                "flip of channel 1 moves channel 0 by {diff:.1e} over 5 iterations; opposite squares PSNR infconv {inf:.2} vs color {color:.2}"
            ),
        ),
        (a, b) => outcome(false, format!("solver error: {:?} / {:?}", a.err(), b.err())),
    }
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("natural-image ordering", natural_ordering),
        ("1-D demo jump recovery", demo1d),
        ("convergence monotonicity and rate", convergence),
        ("stationary consensus", consensus),
        ("l1 infimal convolution oracle", l1_oracle),
        ("inner solver oracle", inner_oracle),
        ("operator identities", operator_identities),
        ("sign independence", sign_independence),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} [{}] {name}: {} ({secs:.1} s)",
            if o.passed { "PASS" } else { "FAIL" },
            n + 1,
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
