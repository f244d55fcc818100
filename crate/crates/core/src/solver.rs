//! PnP-ADMM with the residual-driven penalty rule.
//!
//! Indexing follows the iteration `θ_k → θ_{k+1}`: the step uses `ρ_k` and
//! `σ_k = √(λ/ρ_k)`, produces `Δ_{k+1} = D(θ_k, θ_{k+1})`, and once both
//! `Δ_k` and `Δ_{k+1}` exist the condition at `k` decides `ρ_{k+1}`.
//! The first update is held: `ρ_1 = ρ_0`.
//!
//! Trace row `k` (1-based) stores `Δ_k`, `ρ_k`, `σ_k`, `f(x_k)` and the
//! condition at `k`, which compares `Δ_{k+1}` against `η·Δ_k`. The last row
//! has no condition.

use std::fmt;
use std::str::FromStr;

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::fidelity::{prox_x_update, FidelityTerm};
use crate::image::ImageGrid;
use crate::linalg::{metric_distance, IterateTriple, RealVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub rho0: f64,
    pub gamma: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub delta_tol: f64,
    pub seed: u64,
    /// Keep every iterate `θ_0 … θ_n` in the trace.
    pub keep_snapshots: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            rho0: 1.0,
            gamma: 1.05,
            eta: 0.6,
            max_iter: 100,
            delta_tol: 1e-6,
            seed: 0,
            keep_snapshots: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("rho0", self.rho0)?;
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must exceed 1, got {}", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invalid("eta", format!("must lie in (0, 1), got {}", self.eta)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be positive"));
        }
        if self.delta_tol.is_nan() || self.delta_tol < 0.0 {
            return Err(Error::invalid("delta_tol", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionFlag {
    /// `Δ_{k+1} ≥ η·Δ_k`: the penalty grows.
    C1,
    /// `Δ_{k+1} < η·Δ_k`: the penalty is held.
    C2,
}

impl ConditionFlag {
    pub fn classify(delta_next: f64, delta_prev: f64, eta: f64) -> Self {
        if delta_next >= eta * delta_prev {
            ConditionFlag::C1
        } else {
            ConditionFlag::C2
        }
    }
}

impl fmt::Display for ConditionFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionFlag::C1 => "C1",
            ConditionFlag::C2 => "C2",
        })
    }
}

impl FromStr for ConditionFlag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "C1" => Ok(ConditionFlag::C1),
            "C2" => Ok(ConditionFlag::C2),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

pub fn update_rho(rho: f64, delta_next: f64, delta_prev: f64, gamma: f64, eta: f64) -> (f64, ConditionFlag) {
    match ConditionFlag::classify(delta_next, delta_prev, eta) {
        ConditionFlag::C1 => (gamma * rho, ConditionFlag::C1),
        ConditionFlag::C2 => (rho, ConditionFlag::C2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub delta: f64,
    pub rho: f64,
    pub sigma: f64,
    pub condition: Option<ConditionFlag>,
    pub fidelity_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxIter,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Tolerance => "tolerance",
            StopReason::MaxIter => "max_iter",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub final_iterate: IterateTriple,
    pub stop_reason: StopReason,
    /// `θ_0 … θ_n` when [`SolverConfig::keep_snapshots`] was set.
    pub snapshots: Option<Vec<IterateTriple>>,
}

impl RunTrace {
    pub fn deltas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.delta).collect()
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a run records at least one iteration")
    }
}

fn image(f: &FidelityTerm, data: Vec<f64>) -> Result<ImageGrid> {
    let (w, h) = f.operator().input_shape();
    ImageGrid::from_vec(w, h, data)
}

/// One PnP-ADMM update at fixed `(ρ, σ)`.
pub fn step<D: Denoiser + ?Sized>(
    f: &FidelityTerm,
    den: &D,
    rho: f64,
    sigma: f64,
    theta: &IterateTriple,
) -> Result<IterateTriple> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(
            "sigma",
            format!("must be finite and nonnegative, got {sigma}"),
        ));
    }
    crate::linalg::check_dim("theta", f.dim(), theta.dim())?;
    let target: Vec<f64> = theta.v.iter().zip(theta.u.iter()).map(|(v, u)| v - u).collect();
    let x = prox_x_update(f, rho, &target)?;
    let noisy: Vec<f64> = x.iter().zip(theta.u.iter()).map(|(x, u)| x + u).collect();
    let v = den.denoise(sigma, &image(f, noisy)?).into_pixels();
    let u: Vec<f64> = theta
        .u
        .iter()
        .zip(x.iter().zip(v.iter()))
        .map(|(u, (x, v))| u + x - v)
        .collect();
    IterateTriple::new(x, v, RealVector::new(u)?)
}

pub fn run<D: Denoiser + ?Sized>(
    f: &FidelityTerm,
    den: &D,
    cfg: &SolverConfig,
    theta0: IterateTriple,
) -> Result<RunTrace> {
    cfg.validate()?;
    crate::linalg::check_dim("theta0", f.dim(), theta0.dim())?;

    let mut snapshots = cfg.keep_snapshots.then(|| vec![theta0.clone()]);
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut theta = theta0;
    let mut rho = cfg.rho0;
    let mut stop_reason = StopReason::MaxIter;

    for k in 1..=cfg.max_iter {
        let sigma = (cfg.lambda / rho).sqrt();
        let next = step(f, den, rho, sigma, &theta).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Diverged { iteration: k },
            other => other,
        })?;
        let delta = metric_distance(&theta, &next)?;
        if !delta.is_finite() {
            return Err(Error::Diverged { iteration: k });
        }
        if let Some(prev) = records.last_mut() {
            let (rho_next, flag) = update_rho(rho, delta, prev.delta, cfg.gamma, cfg.eta);
            prev.condition = Some(flag);
            rho = rho_next;
        }
        records.push(TraceRecord {
            iter: k,
            delta,
            rho,
            sigma: (cfg.lambda / rho).sqrt(),
            condition: None,
            fidelity_value: f.value(&next.x)?,
        });
        if let Some(s) = snapshots.as_mut() {
            s.push(next.clone());
        }
        theta = next;
        if delta < cfg.delta_tol {
            stop_reason = StopReason::Tolerance;
            break;
        }
    }

    Ok(RunTrace {
        records,
        final_iterate: theta,
        stop_reason,
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    /// `D(θ, T(θ))` for the final iterate and one step at its `(ρ, σ)`.
    pub residual: f64,
}

pub fn fixed_point_residual<D: Denoiser + ?Sized>(
    f: &FidelityTerm,
    den: &D,
    trace: &RunTrace,
) -> Result<FixedPointReport> {
    let last = trace.last();
    let next = step(f, den, last.rho, last.sigma, &trace.final_iterate)?;
    Ok(FixedPointReport {
        residual: metric_distance(&trace.final_iterate, &next)?,
    })
}

/// `(Hᵀb, Hᵀb, 0)`.
pub fn backprojection_start(f: &FidelityTerm) -> Result<IterateTriple> {
    let x = RealVector::new(f.backprojection())?;
    IterateTriple::new(x.clone(), x, RealVector::zeros(f.dim()))
}
