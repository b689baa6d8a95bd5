use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use colorbreg::bench::{
    gen_demo1d, gen_nested_squares, load_dataset, run_experiment, run_method, DatasetSource, ExperimentSpec,
    Method, MethodOutcome, MethodRun, NestedSquares, Selection,
};
use colorbreg::bregman::{BregmanEngine, Coupling, OuterIteration};
use colorbreg::diagnostics::{self, MONOTONE_SLACK};
use colorbreg::io::{atomic_write, read_image, write_png16};
use colorbreg::{AdmmConfig, MultiChannelImage, StopRule, TvFlavor, WeightMatrix};

use crate::{BenchArgs, DenoiseArgs, Demo1dArgs, DiagnoseArgs, SolverArgs, SquaresArgs};

/// An error message with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<colorbreg::Error> for Failure {
    fn from(e: colorbreg::Error) -> Self {
        Self {
            code: if e.is_numerical() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<colorbreg::WeightError> for Failure {
    fn from(e: colorbreg::WeightError) -> Self {
        Self::usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<usize, Failure> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(Failure::usage(format!("--{name} must be at least 1")))
    }
}

fn ensure_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))
}

/// Parsed and checked solver flags.
struct Solver {
    method: Method,
    alpha: f64,
    weights: WeightMatrix,
    max_iters: usize,
    cfg: AdmmConfig,
}

impl Solver {
    fn from_args(a: &SolverArgs, channels: usize) -> Result<Self, Failure> {
        let method: Method = a.method.parse()?;
        let flavor: TvFlavor = a.flavor.parse()?;
        let cfg = AdmmConfig { flavor, ..AdmmConfig::default() }.with_tolerance(positive("tol", a.tol)?);
        cfg.validate()?;
        Ok(Self {
            method,
            alpha: positive("alpha", a.alpha)?,
            weights: WeightMatrix::parse(&a.weights, channels)?,
            max_iters: at_least_one("max-iters", a.max_iters)?,
            cfg,
        })
    }

    fn run(
        &self,
        f: &MultiChannelImage,
        reference: Option<&MultiChannelImage>,
        stop: StopRule,
        parallel: bool,
    ) -> Result<MethodOutcome, Failure> {
        let run = MethodRun {
            method: self.method,
            alpha: self.alpha,
            weights: &self.weights,
            stop,
            cfg: self.cfg,
            selection: Selection::AtStop,
            parallel,
        };
        Ok(run_method(f, reference, &run)?)
    }
}

fn write_diagnostics(path: &Path, records: &[colorbreg::DiagnosticsRecord]) -> CmdResult {
    let csv = diagnostics::to_csv_string(records)?;
    Ok(atomic_write(path, csv.as_bytes())?)
}

/// One PNG for gray or RGB images, one gray PNG per channel otherwise.
fn write_image(dir: &Path, stem: &str, img: &MultiChannelImage) -> CmdResult {
    if matches!(img.num_channels(), 1 | 3) {
        return Ok(write_png16(&dir.join(format!("{stem}.png")), img)?);
    }
    for (c, ch) in img.channels().iter().enumerate() {
        let single = MultiChannelImage::new(vec![ch.clone()])?;
        write_png16(&dir.join(format!("{stem}_c{c}.png")), &single)?;
    }
    Ok(())
}

pub fn denoise(a: &DenoiseArgs, parallel: bool) -> CmdResult {
    let f = read_image(&a.input)?;
    let solver = Solver::from_args(&a.solver, f.num_channels())?;
    let stop = match a.sigma {
        Some(s) => StopRule::Discrepancy { sigma: positive("sigma", s)?, max_iters: solver.max_iters },
        None => StopRule::FixedIterations(solver.max_iters),
    };
    let out = solver.run(&f, None, stop, parallel)?;
    write_png16(&a.out, &out.u)?;
    if let Some(path) = &a.diag_csv {
        write_diagnostics(path, &out.diagnostics)?;
    }
    println!("{}: {} iterations, stop reason {:?}", solver.method, out.iteration, out.reason);
    Ok(())
}

/// Index of the sample after the largest rise and after the largest drop.
fn jumps(values: &[f64]) -> (usize, usize) {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let up = (0..d.len()).max_by(|&x, &y| d[x].total_cmp(&d[y])).unwrap_or(0);
    let down = (0..d.len()).min_by(|&x, &y| d[x].total_cmp(&d[y])).unwrap_or(0);
    (up + 1, down + 1)
}

fn columns_csv(names: &[String], cols: &[&[f64]]) -> String {
    let mut out = String::from("i");
    for n in names {
        out.push(',');
        out += n;
    }
    out.push('\n');
    let len = cols.first().map_or(0, |c| c.len());
    for i in 0..len {
        out += &i.to_string();
        for c in cols {
            out.push(',');
            out += &fmt_f64(c[i]);
        }
        out.push('\n');
    }
    out
}

pub fn demo1d(a: &Demo1dArgs) -> CmdResult {
    let iters = at_least_one("iters", a.iters)?;
    let alpha = positive("alpha", a.alpha)?;
    let weights = match &a.weights {
        Some(s) => WeightMatrix::parse(s, 3)?,
        None => WeightMatrix::uniform(3, 1.0 / 3.0)?,
    };
    let (clean, noisy) = gen_demo1d(a.seed);
    ensure_dir(&a.out_dir)?;
    let names: Vec<String> = (0..3)
        .map(|c| format!("clean_{c}"))
        .chain((0..3).map(|c| format!("noisy_{c}")))
        .collect();
    let cols: Vec<&[f64]> = clean.channels().iter().chain(noisy.channels()).map(|c| c.values()).collect();
    atomic_write(&a.out_dir.join("input.csv"), columns_csv(&names, &cols).as_bytes())?;

    let cfg = AdmmConfig::default().with_tolerance(1e-6).with_max_inner(20_000);
    let channel_names: Vec<String> = (0..3).map(|c| format!("ch{c}")).collect();
    for (label, coupling) in [("color", Coupling::Weighted(weights)), ("channelwise", Coupling::Channelwise)] {
        let dir = a.out_dir.join(label);
        ensure_dir(&dir)?;
        let mut engine = BregmanEngine::new(&noisy, coupling, alpha, cfg)?.with_parallel(false);
        for k in 1..=iters {
            engine.step()?;
            let u: Vec<&[f64]> = engine.state.u.channels().iter().map(|c| c.values()).collect();
            atomic_write(&dir.join(format!("u_k{k}.csv")), columns_csv(&channel_names, &u).as_bytes())?;
            // on a line the dual field only has an x component
            let q: Vec<&[f64]> = engine.state.q.iter().map(|s| s.field.x()).collect();
            atomic_write(&dir.join(format!("q_k{k}.csv")), columns_csv(&channel_names, &q).as_bytes())?;
        }
        write_diagnostics(&dir.join("diagnostics.csv"), &engine.state.diagnostics)?;
        let (up, down) = jumps(engine.state.u.channel(2).values());
        println!("{label}: blue jumps after {iters} iterations at {up} and {down}");
    }
    Ok(())
}

pub fn squares(a: &SquaresArgs, parallel: bool) -> CmdResult {
    at_least_one("size", a.size)?;
    if !(a.sigma >= 0.0) {
        return Err(Failure::usage(format!("--sigma must be >= 0, got {}", a.sigma)));
    }
    let base = if a.opposite { NestedSquares::opposite() } else { NestedSquares::aligned(3) };
    let spec = base.with_size(a.size).with_sigma(a.sigma);
    let channels = if a.opposite { 2 } else { 3 };
    let solver = Solver::from_args(&a.solver, channels)?;
    let (clean, noisy) = gen_nested_squares(&spec, a.seed)?;
    let out = solver.run(&noisy, Some(&clean), StopRule::FixedIterations(solver.max_iters), parallel)?;

    ensure_dir(&a.out_dir)?;
    write_image(&a.out_dir, "clean", &clean)?;
    write_image(&a.out_dir, "noisy", &noisy)?;
    write_image(&a.out_dir, "denoised", &out.u)?;
    write_diagnostics(&a.out_dir.join("diagnostics.csv"), &out.diagnostics)?;
    println!(
        "{}: noisy PSNR {:.3} dB, denoised PSNR {:.3} dB after {} iterations",
        solver.method,
        colorbreg::psnr(&noisy, &clean)?,
        colorbreg::psnr(&out.u, &clean)?,
        out.iteration
    );
    Ok(())
}

fn parse_crop(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::usage(format!("--crop expects HEIGHTxWIDTH, got '{s}'"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

pub fn bench(a: &BenchArgs) -> CmdResult {
    let mut spec = ExperimentSpec::new(a.data.iter().map(|d| DatasetSource::parse(d)).collect());
    spec.sigma = a.sigma;
    spec.alphas = a.alphas.clone();
    spec.seed = a.seed;
    spec.stop = StopRule::FixedIterations(at_least_one("max-iters", a.max_iters)?);
    spec.cfg = AdmmConfig::default().with_tolerance(positive("tol", a.tol)?);
    spec.infconv_tol = positive("infconv-tol", a.infconv_tol)?;
    spec.crop = a.crop.as_deref().map(parse_crop).transpose()?;
    let flavors = a.flavors.iter().map(|f| f.parse()).collect::<Result<Vec<TvFlavor>, _>>()?;
    let methods = a.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>, _>>()?;
    spec.methods = methods.iter().flat_map(|&m| flavors.iter().map(move |&f| (m, f))).collect();

    if let Some(w) = &a.weights {
        let (images, _) = load_dataset(&spec);
        let mut counts: Vec<usize> = images.iter().map(|(_, img)| img.num_channels()).collect();
        counts.dedup();
        let [m] = counts[..] else {
            return Err(Failure::usage("--weights needs a dataset with one channel count"));
        };
        spec.weights = Some(WeightMatrix::parse(w, m)?);
    }

    let report = run_experiment(&spec)?;
    print!("{}", report.summary());
    if let Some(path) = &a.out {
        atomic_write(path, report.to_csv()?.as_bytes())?;
    }
    let failed: Vec<String> = report
        .rows
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|e| format!("{} {}: {e}", r.image, r.method)))
        .collect();
    if report.rows.is_empty() {
        return Err(Failure::usage("no images could be loaded"));
    }
    if !failed.is_empty() {
        return Err(Failure::numerical(failed.join("\n")));
    }
    Ok(())
}

pub fn diagnose(a: &DiagnoseArgs) -> CmdResult {
    let file = fs::File::open(&a.csv).map_err(|e| Failure::usage(format!("{}: {e}", a.csv.display())))?;
    let records = diagnostics::read_csv(file)?;
    if records.is_empty() {
        return Err(Failure::usage(format!("{}: no diagnostics rows", a.csv.display())));
    }
    let report = diagnostics::diagnose(&records, MONOTONE_SLACK);
    let mut text = String::new();
    let _ = write!(text, "{report}");
    print!("{text}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::numerical("convergence checks failed"))
    }
}
