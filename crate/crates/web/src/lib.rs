//! Browser bindings for the demo page in `www/`: PGS sawtooth data,
//! condition traces with their residual bound, and denoiser previews.

use pnp_admm::denoise::{Denoiser, DenoiserKind};
use pnp_admm::harness::{
    analyze_records, builtin_image, degrade, parse_chunk_lengths, pgs_demo, run_experiment, AnalyzeOptions, BoundKind,
    ExperimentPreset, ImageSource, PresetName,
};
use pnp_admm::solver::ConditionFlag;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct PgsView {
    y: Vec<f64>,
    partial_sums: Vec<f64>,
    peaks: Vec<u32>,
    summability_bound: f64,
    cauchy_k: u32,
    cauchy_n: u32,
    tail_bound: f64,
}

#[wasm_bindgen]
impl PgsView {
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    pub fn partial_sums(&self) -> Vec<f64> {
        self.partial_sums.clone()
    }

    /// 1-based indices of the chunk peaks.
    pub fn peaks(&self) -> Vec<u32> {
        self.peaks.clone()
    }

    pub fn summability_bound(&self) -> f64 {
        self.summability_bound
    }

    pub fn cauchy_k(&self) -> u32 {
        self.cauchy_k
    }

    pub fn cauchy_n(&self) -> u32 {
        self.cauchy_n
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }
}

/// Head-free PGS with the given comma-separated chunk lengths.
#[wasm_bindgen]
pub fn pgs_sawtooth(beta: f64, peak0: f64, chunk_lengths: &str, epsilon: f64, length: u32) -> Result<PgsView, String> {
    let lengths = parse_chunk_lengths(chunk_lengths).map_err(err)?;
    let demo = pgs_demo(beta, peak0, &lengths, epsilon, Some(length as usize)).map_err(err)?;
    let spec = &demo.spec;
    let peaks = (1..)
        .map(|j| spec.chunk_start(j) + 1)
        .take_while(|&k| k <= length as usize)
        .map(|k| k as u32)
        .collect();
    Ok(PgsView {
        y: demo.rows.iter().map(|r| r.y).collect(),
        partial_sums: demo.rows.iter().map(|r| r.partial_sum).collect(),
        peaks,
        summability_bound: demo.summability_bound,
        cauchy_k: demo.certificate.k_index as u32,
        cauchy_n: demo.certificate.n_start as u32,
        tail_bound: demo.certificate.tail_bound,
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct TraceView {
    deltas: Vec<f64>,
    rhos: Vec<f64>,
    flags: Vec<u8>,
    bound: Vec<f64>,
    bound_start: u32,
    case_label: String,
    bound_label: String,
    holds: bool,
    psnr: f64,
}

#[wasm_bindgen]
impl TraceView {
    pub fn deltas(&self) -> Vec<f64> {
        self.deltas.clone()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.rhos.clone()
    }

    /// 1 for C1, 2 for C2, 0 for the unflagged last row.
    pub fn flags(&self) -> Vec<u8> {
        self.flags.clone()
    }

    pub fn bound(&self) -> Vec<f64> {
        self.bound.clone()
    }

    pub fn bound_start(&self) -> u32 {
        self.bound_start
    }

    pub fn case_label(&self) -> String {
        self.case_label.clone()
    }

    pub fn bound_label(&self) -> String {
        self.bound_label.clone()
    }

    pub fn holds(&self) -> bool {
        self.holds
    }

    pub fn psnr(&self) -> f64 {
        self.psnr
    }
}

/// Runs `deblur` or `superres` on the builtin image and bounds the residuals.
#[wasm_bindgen]
pub fn condition_trace(preset: &str, eta: f64, gamma: f64, side: u32, iterations: u32) -> Result<TraceView, String> {
    let mut p = ExperimentPreset::named(PresetName::parse(preset).map_err(err)?)
        .with_eta(eta)
        .with_gamma(gamma);
    p.image = ImageSource::Builtin {
        width: side as usize,
        height: side as usize,
    };
    p.solver.max_iter = iterations as usize;
    p.solver.keep_snapshots = false;
    p.validate().map_err(err)?;
    let exp = run_experiment(&p).map_err(err)?;
    let recs = &exp.trace.records;
    let opts = AnalyzeOptions {
        eta,
        gamma: Some(gamma),
        ..AnalyzeOptions::default()
    };
    let report = analyze_records(recs, &opts).map_err(err)?;
    let bound_label = match &report.bound_kind {
        BoundKind::Piecewise { beta, onsets, .. } => {
            format!("piecewise geometric, beta = {beta:.4}, {} chunks", onsets.len())
        }
        BoundKind::Geometric { beta, n, .. } => format!("geometric from k = {}, beta = {beta:.4}", n + 1),
    };
    Ok(TraceView {
        deltas: recs.iter().map(|r| r.delta).collect(),
        rhos: recs.iter().map(|r| r.rho).collect(),
        flags: recs
            .iter()
            .map(|r| match r.condition {
                Some(ConditionFlag::C1) => 1,
                Some(ConditionFlag::C2) => 2,
                None => 0,
            })
            .collect(),
        bound: report.bound.clone(),
        bound_start: report.start as u32,
        case_label: report.case.to_string(),
        bound_label,
        holds: report.check.holds,
        psnr: exp.psnr(),
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct DenoiseView {
    side: u32,
    noisy: Vec<f64>,
    denoised: Vec<f64>,
    residue_ratio: f64,
}

#[wasm_bindgen]
impl DenoiseView {
    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn noisy(&self) -> Vec<f64> {
        self.noisy.clone()
    }

    pub fn denoised(&self) -> Vec<f64> {
        self.denoised.clone()
    }

    /// `‖D_σ(x) − x‖² / (d·σ²)` on the noisy image; zero at `σ = 0`.
    pub fn residue_ratio(&self) -> f64 {
        self.residue_ratio
    }
}

/// Applies `gaussian`, `median`, `box` or `identity` at strength `sigma` to
/// the builtin image with additive noise.
#[wasm_bindgen]
pub fn denoise_preview(kind: &str, sigma: f64, noise: f64, side: u32, seed: u32) -> Result<DenoiseView, String> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err("sigma must be finite and nonnegative".into());
    }
    let den = DenoiserKind::from_name(kind).map_err(err)?;
    let clean = builtin_image(side as usize, side as usize);
    let mut p = ExperimentPreset::deblur();
    p.blur_size = 1;
    p.noise_sigma = noise;
    p.solver.seed = u64::from(seed);
    p.validate().map_err(err)?;
    let observed = degrade(&p, &clean).map_err(err)?.observation().clone();
    let noisy = pnp_admm::ImageGrid::new(side as usize, side as usize, observed).map_err(err)?;
    let out = den.denoise(sigma, &noisy);
    let residue_ratio = if sigma == 0.0 {
        0.0
    } else {
        pnp_admm::denoise::residue_ratio(&den, sigma, &noisy)
    };
    Ok(DenoiseView {
        side,
        noisy: noisy.pixels().to_vec(),
        denoised: out.pixels().to_vec(),
        residue_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sawtooth_peaks_and_sums() {
        let v = pgs_sawtooth(0.5, 1.0, "2,3,4", 1e-3, 20).unwrap();
        assert_eq!(v.y().len(), 20);
        assert_eq!(&v.peaks()[..4], &[1, 3, 6, 10]);
        assert_eq!(v.y()[2], 0.5);
        assert!(v.partial_sums().iter().all(|&s| s <= v.summability_bound()));
        assert!(v.tail_bound() < 1e-3);
        assert!(pgs_sawtooth(1.2, 1.0, "2", 1e-3, 10).is_err());
        assert!(pgs_sawtooth(0.5, 1.0, "2,a", 1e-3, 10).is_err());
    }

    #[test]
    fn trace_with_bound() {
        let v = condition_trace("deblur", 0.95, 1.2, 24, 40).unwrap();
        assert_eq!(v.deltas().len(), 40);
        assert_eq!(v.bound().len(), 40);
        assert_eq!(*v.flags().last().unwrap(), 0);
        assert!(v.holds());
        assert!(condition_trace("deblur", 1.5, 1.2, 24, 40).is_err());
        assert!(condition_trace("nope", 0.5, 1.2, 24, 40).is_err());
    }

    #[test]
    fn preview_identity_at_zero() {
        let v = denoise_preview("gaussian", 0.0, 0.05, 16, 1).unwrap();
        assert_eq!(v.noisy(), v.denoised());
        assert_eq!(v.residue_ratio(), 0.0);
        let v = denoise_preview("median", 0.05, 0.05, 16, 1).unwrap();
        assert_ne!(v.noisy(), v.denoised());
        assert!(denoise_preview("wavelet", 0.1, 0.0, 16, 1).is_err());
    }
}
