//! Multichannel total-variation denoising with coupled Bregman iterations.
//!
//! Channels are denoised by ROF problems whose regularizers share subgradient
//! information through a weight matrix, either directly (color Bregman) or
//! through an infimal convolution that ignores edge orientation.

pub mod admm;
pub mod bench;
pub mod bregman;
pub mod dct;
pub mod diagnostics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod infconv;
pub mod io;
pub mod weights;

pub use admm::{objective_value, solve_rof_with_prior, AdmmConfig, InnerSolution};
pub use bench::{add_gaussian_noise, psnr, Method};
pub use bregman::{color_bregman_step, run, run_channelwise, OuterState, RunOutput, StopRule};
pub use diagnostics::DiagnosticsRecord;
pub use error::{Error, Result};
pub use functionals::{is_subgradient, tv_value, Subgradient, TvFlavor};
pub use grid::{divergence, gradient, Grid, MultiChannelImage, ScalarField, VectorField};
pub use infconv::{infconv_run, InfconvState};
pub use weights::{WeightError, WeightMatrix};
