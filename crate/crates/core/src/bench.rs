//! Synthetic data, noise, PSNR, and batch comparisons of the methods.

use std::fmt;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::admm::AdmmConfig;
use crate::bregman::{drive, BregmanEngine, Coupling, OuterIteration, StopReason, StopRule};
use crate::error::{Error, Result};
use crate::functionals::TvFlavor;
use crate::grid::{Grid, MultiChannelImage, ScalarField};
use crate::infconv::InfconvEngine;
use crate::io::read_image;
use crate::weights::WeightMatrix;

/// `u + N(0, σ²)` per pixel and channel, no clipping.
pub fn add_gaussian_noise(u: &MultiChannelImage, sigma: f64, seed: u64) -> Result<MultiChannelImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(u.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = u
        .channels()
        .iter()
        .map(|c| {
            let values = c.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
            ScalarField::from_vec(c.grid(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiChannelImage::new(channels)
}

/// `10·log₁₀(1/MSE)` over all pixels and channels; `+∞` for identical images.
pub fn psnr(u: &MultiChannelImage, reference: &MultiChannelImage) -> Result<f64> {
    if !u.same_shape(reference) {
        return Err(Error::ShapeMismatch("PSNR of images with different shapes".into()));
    }
    let d = u.distance(reference);
    let n = (u.grid().len() * u.num_channels()) as f64;
    let mse = d * d / n;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Parameters of the three-channel 1-D step demo.
#[derive(Clone, Debug, PartialEq)]
pub struct Demo1dParams {
    pub len: usize,
    /// Step up before `edges.0`, down before `edges.1`.
    pub edges: (usize, usize),
    pub amplitudes: [f64; 3],
    pub sigmas: [f64; 3],
}

impl Default for Demo1dParams {
    fn default() -> Self {
        Self {
            len: 150,
            edges: (50, 100),
            amplitudes: [1.0, 0.8, 0.1],
            sigmas: [0.1, 0.1, 0.15],
        }
    }
}

pub fn gen_demo1d(seed: u64) -> (MultiChannelImage, MultiChannelImage) {
    gen_demo1d_with(&Demo1dParams::default(), seed)
}

pub fn gen_demo1d_with(p: &Demo1dParams, seed: u64) -> (MultiChannelImage, MultiChannelImage) {
    let grid = Grid::line(p.len).expect("nonempty signal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    for (amp, sigma) in p.amplitudes.iter().zip(p.sigmas) {
        let c = ScalarField::from_fn(grid, |_, x| if (p.edges.0..p.edges.1).contains(&x) { *amp } else { 0.0 });
        let n = if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("valid sigma");
            let values = c.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
            ScalarField::from_vec(grid, values).expect("finite samples")
        } else {
            c.clone()
        };
        clean.push(c);
        noisy.push(n);
    }
    (
        MultiChannelImage::new(clean).expect("shared grid"),
        MultiChannelImage::new(noisy).expect("shared grid"),
    )
}

/// Two concentric squares on a zero background with per-channel jump signs.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedSquares {
    pub size: usize,
    /// Sign of the background→outer jump per channel.
    pub outer_signs: Vec<f64>,
    /// Sign of the outer→inner jump per channel.
    pub inner_signs: Vec<f64>,
    pub outer_amp: f64,
    pub inner_amp: f64,
    /// Per-channel contrast factors; `None` means 1 everywhere.
    pub channel_scales: Option<Vec<f64>>,
    pub sigma: f64,
}

impl NestedSquares {
    pub fn new(outer_signs: Vec<f64>, inner_signs: Vec<f64>) -> Self {
        Self {
            size: 64,
            outer_signs,
            inner_signs,
            outer_amp: 0.4,
            inner_amp: 0.4,
            channel_scales: None,
            sigma: 0.05,
        }
    }

    /// All jumps point the same way in every channel.
    pub fn aligned(m: usize) -> Self {
        Self::new(vec![1.0; m], vec![1.0; m])
    }

    /// Two channels whose inner jumps point in opposite directions.
    pub fn opposite() -> Self {
        Self::new(vec![1.0, 1.0], vec![1.0, -1.0])
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_channel_scales(mut self, scales: Vec<f64>) -> Self {
        self.channel_scales = Some(scales);
        self
    }

    pub fn with_size(mut self, size: usize) -> Self {
        self.size = size;
        self
    }

    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        out.outer_signs.iter_mut().for_each(|s| *s = -*s);
        out.inner_signs.iter_mut().for_each(|s| *s = -*s);
        out
    }

    /// Whether `(row, col)` lies inside the square inset by `size·frac`.
    fn inside(&self, r: usize, c: usize, frac: f64) -> bool {
        let lo = (self.size as f64 * frac).round() as usize;
        let hi = self.size - lo;
        (lo..hi).contains(&r) && (lo..hi).contains(&c)
    }

    pub fn clean(&self) -> Result<MultiChannelImage> {
        if self.outer_signs.len() != self.inner_signs.len() || self.outer_signs.is_empty() {
            return Err(Error::InvalidParameter("need one outer and one inner sign per channel".into()));
        }
        if self.outer_signs.iter().chain(&self.inner_signs).any(|s| s.abs() != 1.0) {
            return Err(Error::InvalidParameter("signs must be +1 or -1".into()));
        }
        let m = self.outer_signs.len();
        let scales = self.channel_scales.clone().unwrap_or_else(|| vec![1.0; m]);
        if scales.len() != m || scales.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("need one finite scale per channel".into()));
        }
        let grid = Grid::new(self.size, self.size)?;
        let channels = self
            .outer_signs
            .iter()
            .zip(&self.inner_signs)
            .zip(&scales)
            .map(|((&so, &si), &scale)| {
                ScalarField::from_fn(grid, |r, c| {
                    let mut v = 0.0;
                    if self.inside(r, c, 0.25) {
                        v += so * self.outer_amp;
                    }
                    if self.inside(r, c, 0.375) {
                        v += si * self.inner_amp;
                    }
                    scale * v
                })
            })
            .collect();
        MultiChannelImage::new(channels)
    }
}

pub fn gen_nested_squares(spec: &NestedSquares, seed: u64) -> Result<(MultiChannelImage, MultiChannelImage)> {
    let clean = spec.clean()?;
    let noisy = add_gaussian_noise(&clean, spec.sigma, seed)?;
    Ok((clean, noisy))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Tv,
    BregmanChannelwise,
    ColorBregman,
    Infconv,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tv, Method::BregmanChannelwise, Method::ColorBregman, Method::Infconv];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tv => "tv",
            Method::BregmanChannelwise => "bregman_channelwise",
            Method::ColorBregman => "color_bregman",
            Method::Infconv => "infconv",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" | "rof" => Ok(Method::Tv),
            "bregman_channelwise" | "bregman" | "channelwise" => Ok(Method::BregmanChannelwise),
            "color_bregman" | "color" => Ok(Method::ColorBregman),
            "infconv" => Ok(Method::Infconv),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which iterate a run reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// The iterate at which the stop rule fired.
    AtStop,
    /// The best-PSNR iterate within the cap. The run ends early once PSNR
    /// has fallen for `patience` consecutive iterations.
    BestPsnr { patience: usize },
}

/// Everything needed to run one method on one image.
#[derive(Clone, Debug)]
pub struct MethodRun<'a> {
    pub method: Method,
    pub alpha: f64,
    pub weights: &'a WeightMatrix,
    pub stop: StopRule,
    pub cfg: AdmmConfig,
    pub selection: Selection,
    pub parallel: bool,
}

#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub u: MultiChannelImage,
    pub iteration: usize,
    pub psnr: Option<f64>,
    pub reason: StopReason,
    pub diagnostics: Vec<crate::diagnostics::DiagnosticsRecord>,
}

fn drive_selected<E: OuterIteration>(
    mut engine: E,
    stop: StopRule,
    selection: Selection,
) -> Result<MethodOutcome> {
    let mut best: Option<(f64, usize, MultiChannelImage)> = None;
    let mut falling = 0usize;
    let reason = drive(&mut engine, &stop, |e| {
        let Selection::BestPsnr { patience } = selection else {
            return ControlFlow::Continue(());
        };
        let last = e.diagnostics().last().expect("record per step");
        let Some(p) = last.psnr else {
            return ControlFlow::Continue(());
        };
        match &best {
            Some((b, _, _)) if p <= *b => {
                falling += 1;
                if falling >= patience {
                    return ControlFlow::Break(());
                }
            }
            _ => {
                falling = 0;
                best = Some((p, last.k, e.iterate().clone()));
            }
        }
        ControlFlow::Continue(())
    })?;
    let diagnostics = engine.diagnostics().to_vec();
    Ok(match best {
        Some((p, k, u)) => MethodOutcome {
            u,
            iteration: k,
            psnr: Some(p),
            reason,
            diagnostics,
        },
        None => {
            let last = diagnostics.last().expect("at least one step");
            MethodOutcome {
                u: engine.iterate().clone(),
                iteration: last.k,
                psnr: last.psnr,
                reason,
                diagnostics,
            }
        }
    })
}

/// Runs one method; `reference` enables PSNR and best-iterate selection.
pub fn run_method(
    f: &MultiChannelImage,
    reference: Option<&MultiChannelImage>,
    run: &MethodRun<'_>,
) -> Result<MethodOutcome> {
    let reference = reference.cloned();
    let (stop, selection) = match run.method {
        Method::Tv => (StopRule::FixedIterations(1), Selection::AtStop),
        _ => (run.stop, run.selection),
    };
    match run.method {
        Method::Tv | Method::BregmanChannelwise => {
            let engine = BregmanEngine::new(f, Coupling::Channelwise, run.alpha, run.cfg)?
                .with_reference(reference)
                .with_parallel(run.parallel);
            drive_selected(engine, stop, selection)
        }
        Method::ColorBregman => {
            let engine = BregmanEngine::new(f, Coupling::Weighted(run.weights.clone()), run.alpha, run.cfg)?
                .with_reference(reference)
                .with_parallel(run.parallel);
            drive_selected(engine, stop, selection)
        }
        Method::Infconv => {
            let engine = InfconvEngine::new(f, run.weights.clone(), run.alpha, run.cfg)?
                .with_reference(reference)
                .with_parallel(run.parallel);
            drive_selected(engine, stop, selection)
        }
    }
}

/// Where the clean images of an experiment come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    /// An image file or a directory of PNG/PGM/PPM files.
    Path(PathBuf),
    /// `demo1d`, `squares`, `squares-opposite` or `constant`.
    Generator(String),
}

impl DatasetSource {
    pub fn parse(s: &str) -> Self {
        match s {
            "demo1d" | "squares" | "squares-opposite" | "constant" => DatasetSource::Generator(s.to_owned()),
            _ => DatasetSource::Path(PathBuf::from(s)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub datasets: Vec<DatasetSource>,
    pub sigma: f64,
    pub methods: Vec<(Method, TvFlavor)>,
    /// Candidate regularization weights; the best PSNR wins.
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub stop: StopRule,
    pub selection: Selection,
    /// Coupling for the coupled methods; `None` picks the default for the
    /// channel count.
    pub weights: Option<WeightMatrix>,
    pub cfg: AdmmConfig,
    /// Center crop `(height, width)` applied to every loaded image.
    pub crop: Option<(usize, usize)>,
    /// Inner tolerance for the infimal-convolution method, whose split
    /// problem converges far more slowly than plain ROF.
    pub infconv_tol: f64,
}

impl ExperimentSpec {
    pub fn new(datasets: Vec<DatasetSource>) -> Self {
        Self {
            datasets,
            sigma: 0.05,
            methods: Method::ALL.iter().map(|&m| (m, TvFlavor::Isotropic)).collect(),
            alphas: vec![0.1, 0.2, 0.4, 0.8],
            seed: 0,
            stop: StopRule::FixedIterations(20),
            selection: Selection::BestPsnr { patience: 2 },
            weights: None,
            cfg: AdmmConfig::default().with_tolerance(1e-4),
            crop: None,
            infconv_tol: 1e-3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("experiment needs at least one method".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidParameter("alphas must be a nonempty list of positive values".into()));
        }
        if !(self.infconv_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("infconv_tol must be positive, got {}", self.infconv_tol)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        self.stop.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub image: String,
    pub method: Method,
    pub flavor: TvFlavor,
    pub alpha: f64,
    pub iteration: usize,
    pub psnr: f64,
    pub runtime_secs: f64,
    /// Solver error message when every α failed.
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    /// Per `(method, flavor)` mean PSNR over successful rows, in the order of `ExperimentSpec::methods`.
    pub means: Vec<(Method, TvFlavor, f64)>,
    pub skipped: Vec<String>,
}

impl ExperimentReport {
    pub fn mean_psnr(&self, method: Method, flavor: TvFlavor) -> Option<f64> {
        self.means
            .iter()
            .find(|(m, f, _)| *m == method && *f == flavor)
            .map(|t| t.2)
    }

    /// RFC-4180 CSV of the rows followed by per-method mean rows. Runtime is
    /// left out so fixed seeds give identical bytes.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["image", "method", "flavor", "alpha", "iteration", "psnr", "status"])?;
        for r in &self.rows {
            w.write_record([
                r.image.clone(),
                r.method.to_string(),
                r.flavor.to_string(),
                format!("{:.16e}", r.alpha),
                r.iteration.to_string(),
                format!("{:.16e}", r.psnr),
                r.failure.clone().unwrap_or_else(|| "ok".into()),
            ])?;
        }
        for (m, f, mean) in &self.means {
            w.write_record([
                "MEAN".to_owned(),
                m.to_string(),
                f.to_string(),
                String::new(),
                String::new(),
                format!("{mean:.16e}"),
                "summary".into(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Diagnostics(e.to_string()))
    }

    /// Plain-text table of mean PSNR and total runtime per method.
    pub fn summary(&self) -> String {
        let mut out = format!("{:<22} {:<12} {:>10} {:>10}\n", "method", "flavor", "mean PSNR", "time [s]");
        for (m, f, mean) in &self.means {
            let secs: f64 = self
                .rows
                .iter()
                .filter(|r| r.method == *m && r.flavor == *f)
                .map(|r| r.runtime_secs)
                .sum();
            out += &format!("{:<22} {:<12} {:>10.3} {:>10.2}\n", m.name(), f.name(), mean, secs);
        }
        for s in &self.skipped {
            out += &format!("skipped: {s}\n");
        }
        out
    }
}

fn is_image_file(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm" | "ppm" | "pnm")
    )
}

fn generated(name: &str, seed: u64) -> Result<MultiChannelImage> {
    match name {
        "demo1d" => Ok(gen_demo1d(seed).0),
        "squares" => NestedSquares::aligned(3).clean(),
        "squares-opposite" => NestedSquares::opposite().clean(),
        "constant" => {
            let g = Grid::new(16, 16)?;
            MultiChannelImage::new(vec![ScalarField::constant(g, 0.5); 3])
        }
        other => Err(Error::InvalidParameter(format!("unknown generator '{other}'"))),
    }
}

/// Central `height × width` window; images smaller than the window keep
/// their size along that axis.
pub fn center_crop(img: &MultiChannelImage, height: usize, width: usize) -> Result<MultiChannelImage> {
    let g = img.grid();
    let (h, w) = (height.min(g.height()), width.min(g.width()));
    let (r0, c0) = ((g.height() - h) / 2, (g.width() - w) / 2);
    let grid = Grid::new(h, w)?;
    MultiChannelImage::new(
        img.channels()
            .iter()
            .map(|c| ScalarField::from_fn(grid, |r, col| c.get(r0 + r, c0 + col)))
            .collect(),
    )
}

/// Resolves the clean images, skipping unreadable files with a warning.
pub fn load_dataset(spec: &ExperimentSpec) -> (Vec<(String, MultiChannelImage)>, Vec<String>) {
    let (mut images, mut skipped) = load_uncropped(spec);
    if let Some((h, w)) = spec.crop {
        images.retain_mut(|(id, img)| match center_crop(img, h, w) {
            Ok(c) => {
                *img = c;
                true
            }
            Err(e) => {
                skipped.push(format!("{id}: {e}"));
                false
            }
        });
    }
    (images, skipped)
}

fn load_uncropped(spec: &ExperimentSpec) -> (Vec<(String, MultiChannelImage)>, Vec<String>) {
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for src in &spec.datasets {
        let paths = match src {
            DatasetSource::Generator(name) => {
                match generated(name, spec.seed) {
                    Ok(img) => images.push((name.clone(), img)),
                    Err(e) => {
                        warn!("skipping generator {name}: {e}");
                        skipped.push(format!("{name}: {e}"));
                    }
                }
                continue;
            }
            DatasetSource::Path(p) if p.is_dir() => match std::fs::read_dir(p) {
                Ok(entries) => {
                    let mut v: Vec<PathBuf> = entries
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| is_image_file(p))
                        .collect();
                    v.sort();
                    v
                }
                Err(e) => {
                    warn!("skipping {}: {e}", p.display());
                    skipped.push(format!("{}: {e}", p.display()));
                    continue;
                }
            },
            DatasetSource::Path(p) => vec![p.clone()],
        };
        for path in paths {
            match read_image(&path) {
                Ok(img) => {
                    let id = path.file_name().map_or_else(
                        || path.display().to_string(),
                        |n| n.to_string_lossy().into_owned(),
                    );
                    images.push((id, img));
                }
                Err(e) => {
                    warn!("skipping {}: {e}", path.display());
                    skipped.push(format!("{}: {e}", path.display()));
                }
            }
        }
    }
    (images, skipped)
}

/// Runs every image × method × α and keeps the best α per image and method.
/// Jobs run on the current rayon pool; results are ordered by image, then
/// method as listed in the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (images, skipped) = load_dataset(spec);
    let mut noisy = Vec::with_capacity(images.len());
    for (idx, (_, clean)) in images.iter().enumerate() {
        noisy.push(add_gaussian_noise(clean, spec.sigma, spec.seed.wrapping_add(idx as u64))?);
    }
    let weights: Vec<WeightMatrix> = images
        .iter()
        .map(|(_, img)| match &spec.weights {
            Some(w) => Ok(w.clone()),
            None => WeightMatrix::default_for(img.num_channels()).map_err(Error::from),
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..images.len())
        .flat_map(|i| {
            (0..spec.methods.len()).flat_map(move |m| (0..spec.alphas.len()).map(move |a| (i, m, a)))
        })
        .collect();
    // ((iteration, psnr) or error message, seconds)
    type JobOutcome = (std::result::Result<(usize, f64), String>, f64);
    let outcomes: Vec<JobOutcome> = jobs
        .par_iter()
        .map(|&(i, m, a)| {
            let (method, flavor) = spec.methods[m];
            let mut cfg = AdmmConfig { flavor, ..spec.cfg };
            if method == Method::Infconv {
                cfg = cfg.with_tolerance(spec.infconv_tol);
            }
            let run = MethodRun {
                method,
                alpha: spec.alphas[a],
                weights: &weights[i],
                stop: spec.stop,
                cfg,
                selection: spec.selection,
                parallel: false,
            };
            let start = Instant::now();
            let res = run_method(&noisy[i], Some(&images[i].1), &run)
                .map(|o| (o.iteration, o.psnr.unwrap_or(f64::NAN)))
                .map_err(|e| e.to_string());
            (res, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut rows = Vec::new();
    let per_image = spec.methods.len() * spec.alphas.len();
    for (i, (id, _)) in images.iter().enumerate() {
        for (m, &(method, flavor)) in spec.methods.iter().enumerate() {
            let base = i * per_image + m * spec.alphas.len();
            let slice = &outcomes[base..base + spec.alphas.len()];
            let runtime: f64 = slice.iter().map(|o| o.1).sum();
            let best = slice
                .iter()
                .enumerate()
                .filter_map(|(a, (r, _))| r.as_ref().ok().map(|&(it, p)| (a, it, p)))
                .fold(None, |acc: Option<(usize, usize, f64)>, cur| match acc {
                    Some(b) if b.2 >= cur.2 => Some(b),
                    _ => Some(cur),
                });
            rows.push(match best {
                Some((a, iteration, psnr)) => ResultRow {
                    image: id.clone(),
                    method,
                    flavor,
                    alpha: spec.alphas[a],
                    iteration,
                    psnr,
                    runtime_secs: runtime,
                    failure: None,
                },
                None => ResultRow {
                    image: id.clone(),
                    method,
                    flavor,
                    alpha: f64::NAN,
                    iteration: 0,
                    psnr: f64::NAN,
                    runtime_secs: runtime,
                    failure: slice.iter().find_map(|(r, _)| r.as_ref().err().cloned()),
                },
            });
        }
    }
    let means = spec
        .methods
        .iter()
        .map(|&(m, f)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m && r.flavor == f && r.failure.is_none())
                .map(|r| r.psnr)
                .collect();
            let mean = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
            (m, f, mean)
        })
        .collect();
    Ok(ExperimentReport { rows, means, skipped })
}
