//! σ-parameterized denoisers and an empirical check of the residue bound
//! `‖D_σ(x) − x‖² ≤ K·d·σ²`.
//!
//! Every denoiser maps `σ` to a spatial scale in pixels through
//! `scale = c_map · σ · max(width, height)` and returns its input unchanged
//! at `σ = 0`. All window filters use half-sample symmetric padding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{reflect, ImageGrid};

pub const DEFAULT_TRUNCATE: f64 = 4.0;
pub const DEFAULT_HOLDOUT_MARGIN: f64 = 0.5;

/// A denoising operator `D_σ` acting on images.
pub trait Denoiser {
    fn denoise(&self, sigma: f64, img: &ImageGrid) -> ImageGrid;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DenoiserKind {
    /// Acts as the identity for every σ.
    Identity,
    /// Separable Gaussian with standard deviation `c_map·σ·max(w, h)` pixels,
    /// truncated at `truncate` standard deviations and renormalized.
    GaussianSmoothing { c_map: f64, truncate: f64 },
    /// Median over a square window of side `1 + 2·round(c_map·σ·max(w, h))`.
    MedianFilter { c_map: f64 },
    /// Mean over the same window as [`DenoiserKind::MedianFilter`].
    BoxAverage { c_map: f64 },
}

impl DenoiserKind {
    pub fn gaussian() -> Self {
        DenoiserKind::GaussianSmoothing {
            c_map: 1.0,
            truncate: DEFAULT_TRUNCATE,
        }
    }

    pub fn median() -> Self {
        DenoiserKind::MedianFilter { c_map: 1.0 }
    }

    pub fn box_average() -> Self {
        DenoiserKind::BoxAverage { c_map: 1.0 }
    }

    pub fn all_defaults() -> [DenoiserKind; 4] {
        [
            DenoiserKind::Identity,
            Self::gaussian(),
            Self::median(),
            Self::box_average(),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            DenoiserKind::Identity => "identity",
            DenoiserKind::GaussianSmoothing { .. } => "gaussian",
            DenoiserKind::MedianFilter { .. } => "median",
            DenoiserKind::BoxAverage { .. } => "box",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(DenoiserKind::Identity),
            "gaussian" => Ok(Self::gaussian()),
            "median" => Ok(Self::median()),
            "box" => Ok(Self::box_average()),
            other => Err(Error::invalid(
                "denoiser",
                format!("unknown denoiser `{other}` (expected identity, gaussian, median or box)"),
            )),
        }
    }
}

impl Denoiser for DenoiserKind {
    fn denoise(&self, sigma: f64, img: &ImageGrid) -> ImageGrid {
        assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and >= 0");
        if sigma == 0.0 {
            return img.clone();
        }
        let extent = img.width().max(img.height()) as f64;
        match *self {
            DenoiserKind::Identity => img.clone(),
            DenoiserKind::GaussianSmoothing { c_map, truncate } => {
                let std_px = c_map * sigma * extent;
                let kernel = gaussian_kernel(std_px, truncate);
                separable(img, &kernel)
            }
            DenoiserKind::MedianFilter { c_map } => {
                let half = window_half_width(c_map, sigma, extent);
                if half == 0 {
                    img.clone()
                } else {
                    median(img, half)
                }
            }
            DenoiserKind::BoxAverage { c_map } => {
                let half = window_half_width(c_map, sigma, extent);
                if half == 0 {
                    img.clone()
                } else {
                    let side = 2 * half + 1;
                    separable(img, &vec![1.0 / side as f64; side])
                }
            }
        }
    }
}

fn window_half_width(c_map: f64, sigma: f64, extent: f64) -> usize {
    (c_map * sigma * extent).round() as usize
}

/// Normalized 1-D Gaussian taps on `[-r, r]`, `r = ceil(truncate·std)`.
pub fn gaussian_kernel(std_px: f64, truncate: f64) -> Vec<f64> {
    let radius = (truncate * std_px).ceil().max(0.0) as isize;
    if radius == 0 {
        return vec![1.0];
    }
    let two_var = 2.0 * std_px * std_px;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / two_var).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Applies an odd-length symmetric kernel along rows, then columns.
fn separable(img: &ImageGrid, kernel: &[f64]) -> ImageGrid {
    let (w, h) = (img.width(), img.height());
    let r = (kernel.len() / 2) as isize;
    let src = img.pixels();
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..w {
            rows[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, k)| k * line[reflect(x as isize + t as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, k)| k * rows[reflect(y as isize + t as isize - r, h) * w + x])
                .sum();
        }
    }
    ImageGrid::from_vec(w, h, out).expect("filter output stays finite")
}

fn median(img: &ImageGrid, half: usize) -> ImageGrid {
    let (w, h) = (img.width(), img.height());
    let r = half as isize;
    let mut window = Vec::with_capacity((2 * half + 1).pow(2));
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            window.clear();
            for dy in -r..=r {
                let yy = reflect(y as isize + dy, h);
                for dx in -r..=r {
                    window.push(img.get(reflect(x as isize + dx, w), yy));
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
            out[y * w + x] = *m;
        }
    }
    ImageGrid::from_vec(w, h, out).expect("median of finite values is finite")
}

/// `‖D_σ(x) − x‖² / (d·σ²)` for a single image.
pub fn residue_ratio<D: Denoiser + ?Sized>(den: &D, sigma: f64, img: &ImageGrid) -> f64 {
    let out = den.denoise(sigma, img);
    let diff = crate::linalg::distance(out.pixels(), img.pixels());
    diff * diff / (img.dim() as f64 * sigma * sigma)
}

/// Seeded i.i.d. uniform `[0, 1)` image; sample `index` gets its own
/// ChaCha stream so samples are independent of evaluation order.
pub fn noise_image(width: usize, height: usize, seed: u64, index: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let pixels = (0..width * height).map(|_| rng.random::<f64>()).collect();
    ImageGrid::from_vec(width, height, pixels).expect("uniform samples are finite")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserBoundEstimate {
    /// Largest observed ratio; zero for a denoiser with no residue.
    pub k_hat: f64,
    pub sample_count: usize,
    pub sigma_grid: Vec<f64>,
    pub width: usize,
    pub height: usize,
}

impl DenoiserBoundEstimate {
    pub fn vacuous(&self) -> bool {
        self.k_hat == 0.0
    }
}

fn check_sigma_grid(sigma_grid: &[f64]) -> Result<()> {
    if sigma_grid.is_empty() {
        return Err(Error::invalid("sigma_grid", "must not be empty"));
    }
    if sigma_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("sigma_grid", "entries must be positive and finite"));
    }
    Ok(())
}

pub fn estimate_assumption2_constant<D: Denoiser + ?Sized>(
    den: &D,
    width: usize,
    height: usize,
    sigma_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<DenoiserBoundEstimate> {
    check_sigma_grid(sigma_grid)?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    let mut k_hat = 0.0f64;
    for i in 0..n_samples {
        let img = noise_image(width, height, seed, i as u64);
        for &sigma in sigma_grid {
            k_hat = k_hat.max(residue_ratio(den, sigma, &img));
        }
    }
    Ok(DenoiserBoundEstimate {
        k_hat,
        sample_count: n_samples,
        sigma_grid: sigma_grid.to_vec(),
        width,
        height,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assumption2Report {
    pub violations: usize,
    pub worst_ratio: f64,
    pub threshold: f64,
    pub samples: usize,
}

/// Counts held-out `(image, σ)` pairs whose ratio exceeds `k_hat·(1 + margin)`.
/// Use a seed different from the one that produced `estimate`.
pub fn verify_assumption2<D: Denoiser + ?Sized>(
    den: &D,
    estimate: &DenoiserBoundEstimate,
    n_holdout: usize,
    seed: u64,
    margin: f64,
) -> Result<Assumption2Report> {
    check_sigma_grid(&estimate.sigma_grid)?;
    if margin.is_nan() || margin < 0.0 {
        return Err(Error::invalid("margin", "must be nonnegative"));
    }
    let threshold = estimate.k_hat * (1.0 + margin);
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for i in 0..n_holdout {
        let img = noise_image(estimate.width, estimate.height, seed, i as u64);
        for &sigma in &estimate.sigma_grid {
            let ratio = residue_ratio(den, sigma, &img);
            worst_ratio = worst_ratio.max(ratio);
            if ratio > threshold {
                violations += 1;
            }
        }
    }
    Ok(Assumption2Report {
        violations,
        worst_ratio,
        threshold,
        samples: n_holdout,
    })
}
