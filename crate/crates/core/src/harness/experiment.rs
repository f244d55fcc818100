//! Restoration presets: a test image, a degradation, and solver settings.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{parse_pairs, parse_value};
use super::pgm::load_image;
use crate::denoise::DenoiserKind;
use crate::error::{Error, Result};
use crate::fidelity::{FidelityTerm, ForwardOperator, OperatorKind, Stencil};
use crate::image::ImageGrid;
use crate::linalg::RealVector;
use crate::solver::{backprojection_start, run, RunTrace, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Deblur,
    Superres,
    /// Identity operator and identity denoiser; converges immediately.
    Smoke,
}

impl PresetName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "deblur" => Ok(PresetName::Deblur),
            "superres" => Ok(PresetName::Superres),
            "smoke" => Ok(PresetName::Smoke),
            other => Err(Error::invalid(
                "preset",
                format!("unknown preset `{other}` (expected deblur, superres or smoke)"),
            )),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Deblur => "deblur",
            PresetName::Superres => "superres",
            PresetName::Smoke => "smoke",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    Builtin { width: usize, height: usize },
    File(PathBuf),
}

/// Keys accepted in a preset config file.
pub const PRESET_KEYS: &[&str] = &[
    "preset",
    "image",
    "width",
    "height",
    "blur_size",
    "factor",
    "noise_sigma",
    "lambda",
    "rho0",
    "gamma",
    "eta",
    "max_iter",
    "delta_tol",
    "seed",
    "snapshots",
    "denoiser",
    "classify_window",
];

/// Regularization weight of the imaging presets.
pub const PRESET_LAMBDA: f64 = 3e-5;
/// Stopping tolerance of the imaging presets.
pub const PRESET_DELTA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub image: ImageSource,
    /// Side of the binomial blur stencil (deblur).
    pub blur_size: usize,
    /// Downsampling factor (superres).
    pub factor: usize,
    pub noise_sigma: f64,
    pub solver: SolverConfig,
    pub denoiser: DenoiserKind,
    /// Flagged iterations examined by the case classifier.
    pub classify_window: usize,
}

impl ExperimentPreset {
    pub fn deblur() -> Self {
        Self {
            name: PresetName::Deblur,
            image: ImageSource::Builtin { width: 64, height: 64 },
            blur_size: 5,
            factor: 2,
            noise_sigma: 0.01,
            solver: SolverConfig {
                lambda: PRESET_LAMBDA,
                delta_tol: PRESET_DELTA_TOL,
                keep_snapshots: true,
                ..SolverConfig::default()
            },
            denoiser: DenoiserKind::gaussian(),
            classify_window: 40,
        }
    }

    pub fn superres() -> Self {
        Self {
            name: PresetName::Superres,
            ..Self::deblur()
        }
    }

    pub fn smoke() -> Self {
        Self {
            name: PresetName::Smoke,
            denoiser: DenoiserKind::Identity,
            noise_sigma: 0.0,
            solver: SolverConfig {
                max_iter: 5,
                delta_tol: SolverConfig::default().delta_tol,
                ..Self::deblur().solver
            },
            ..Self::deblur()
        }
    }

    pub fn named(name: PresetName) -> Self {
        match name {
            PresetName::Deblur => Self::deblur(),
            PresetName::Superres => Self::superres(),
            PresetName::Smoke => Self::smoke(),
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.solver.eta = eta;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.solver.gamma = gamma;
        self
    }

    /// Parses a config file; `preset` picks the defaults, other keys
    /// override them. Relative image paths resolve against `base_dir`.
    pub fn from_config(text: &str, base_dir: &Path) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut preset = match pairs.iter().find(|(_, k, _)| k == "preset") {
            Some((line, _, v)) => Self::named(PresetName::parse(v).map_err(|e| Error::Config {
                line: *line,
                reason: e.to_string(),
            })?),
            None => Self::deblur(),
        };
        for (line, key, value) in &pairs {
            preset.set(*line, key, value, base_dir)?;
        }
        preset.validate()?;
        Ok(preset)
    }

    fn set(&mut self, line: usize, key: &str, value: &str, base_dir: &Path) -> Result<()> {
        let s = &mut self.solver;
        match key {
            "preset" => {}
            "image" if value == "builtin" => {
                if !matches!(self.image, ImageSource::Builtin { .. }) {
                    self.image = ImageSource::Builtin { width: 64, height: 64 };
                }
            }
            "image" => self.image = ImageSource::File(base_dir.join(value)),
            "width" | "height" => {
                let n: usize = parse_value(line, key, value)?;
                match &mut self.image {
                    ImageSource::Builtin { width, height } => {
                        *(if key == "width" { width } else { height }) = n;
                    }
                    ImageSource::File(_) => {
                        return Err(Error::Config {
                            line,
                            reason: format!("`{key}` applies only to the builtin image"),
                        })
                    }
                }
            }
            "blur_size" => self.blur_size = parse_value(line, key, value)?,
            "factor" => self.factor = parse_value(line, key, value)?,
            "noise_sigma" => self.noise_sigma = parse_value(line, key, value)?,
            "lambda" => s.lambda = parse_value(line, key, value)?,
            "rho0" => s.rho0 = parse_value(line, key, value)?,
            "gamma" => s.gamma = parse_value(line, key, value)?,
            "eta" => s.eta = parse_value(line, key, value)?,
            "max_iter" => s.max_iter = parse_value(line, key, value)?,
            "delta_tol" => s.delta_tol = parse_value(line, key, value)?,
            "seed" => s.seed = parse_value(line, key, value)?,
            "snapshots" => s.keep_snapshots = parse_value(line, key, value)?,
            "denoiser" => {
                self.denoiser = DenoiserKind::from_name(value).map_err(|e| Error::Config {
                    line,
                    reason: e.to_string(),
                })?
            }
            "classify_window" => self.classify_window = parse_value(line, key, value)?,
            other => {
                return Err(Error::Config {
                    line,
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.blur_size.is_multiple_of(2) {
            return Err(Error::invalid("blur_size", "must be odd"));
        }
        if self.factor == 0 {
            return Err(Error::invalid("factor", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma", "must be finite and nonnegative"));
        }
        if self.classify_window == 0 {
            return Err(Error::invalid("classify_window", "must be positive"));
        }
        if let ImageSource::Builtin { width, height } = self.image {
            if width == 0 || height == 0 {
                return Err(Error::invalid("width/height", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn load_clean_image(&self) -> Result<ImageGrid> {
        match &self.image {
            ImageSource::Builtin { width, height } => Ok(builtin_image(*width, *height)),
            ImageSource::File(path) => load_image(path),
        }
    }

    pub fn forward_operator(&self, width: usize, height: usize) -> Result<ForwardOperator> {
        match self.name {
            PresetName::Deblur => ForwardOperator::new(
                width,
                height,
                OperatorKind::CircularBlur(Stencil::binomial(self.blur_size)?),
            ),
            PresetName::Superres => ForwardOperator::downsample(width, height, self.factor),
            PresetName::Smoke => Ok(ForwardOperator::identity(width, height)),
        }
    }
}

/// Checkerboard of 8-pixel squares over a diagonal ramp, in `[0.15, 0.85]`.
pub fn builtin_image(width: usize, height: usize) -> ImageGrid {
    let span = (width + height).saturating_sub(2).max(1) as f64;
    let pixels = (0..height)
        .flat_map(|y| {
            (0..width).map(move |x| {
                let checker = if (x / 8 + y / 8) % 2 == 0 { 0.0 } else { 0.4 };
                0.15 + checker + 0.3 * (x + y) as f64 / span
            })
        })
        .collect();
    ImageGrid::from_vec(width, height, pixels).expect("builtin image is finite")
}

/// `b = H·clean + n`, with `n` seeded Gaussian noise of `noise_sigma`.
pub fn degrade(preset: &ExperimentPreset, clean: &ImageGrid) -> Result<FidelityTerm> {
    let op = preset.forward_operator(clean.width(), clean.height())?;
    let mut b = op.apply(clean.pixels())?;
    if preset.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(preset.solver.seed);
        let normal = Normal::new(0.0, preset.noise_sigma).map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
        b.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    FidelityTerm::new(op, RealVector::new(b)?)
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub preset: ExperimentPreset,
    pub clean: ImageGrid,
    pub fidelity: FidelityTerm,
    pub trace: RunTrace,
}

impl Experiment {
    pub fn restored(&self) -> ImageGrid {
        let (w, h) = self.fidelity.operator().input_shape();
        ImageGrid::new(w, h, self.trace.final_iterate.x.clone()).expect("iterate matches operator shape")
    }

    pub fn psnr(&self) -> f64 {
        let mse = self
            .trace
            .final_iterate
            .x
            .iter()
            .zip(self.clean.pixels().iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.clean.dim() as f64;
        -10.0 * mse.log10()
    }
}

/// Loads, degrades and restores, starting from the back-projection.
pub fn run_experiment(preset: &ExperimentPreset) -> Result<Experiment> {
    preset.validate()?;
    let clean = preset.load_clean_image()?;
    let fidelity = degrade(preset, &clean)?;
    let theta0 = backprojection_start(&fidelity)?;
    let trace = run(&fidelity, &preset.denoiser, &preset.solver, theta0)?;
    Ok(Experiment {
        preset: preset.clone(),
        clean,
        fidelity,
        trace,
    })
}
