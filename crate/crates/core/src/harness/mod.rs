//! Experiment presets, file formats and the `run` / `analyze` /
//! `pgs-demo` commands.

pub mod config;
pub mod experiment;
pub mod pgm;
pub mod trace_csv;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::denoise::{estimate_assumption2_constant, DenoiserBoundEstimate};
use crate::error::{Error, Result};
use crate::fidelity::{box_vertex_samples, estimate_assumption1_constant, GradientBoundEstimate};
use crate::sequence::{
    cauchy_index, classify_case, construct_s12_bound, construct_s3_bound, default_window, estimate_lemma1_constant,
    pgs_chunk_sum_bound, verify_bound, BoundCheck, CaseLabel, CaseReport, CauchyCertificate, ConditionTrace, PgsSpec,
};
use crate::solver::{fixed_point_residual, ConditionFlag, FixedPointReport, SolverConfig, StopReason, TraceRecord};
use config::{parse_pairs, parse_value};

pub use experiment::{
    builtin_image, degrade, run_experiment, Experiment, ExperimentPreset, ImageSource, PresetName, PRESET_KEYS,
};

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub preset: PresetName,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub final_delta: f64,
    pub case: Option<CaseReport>,
    pub m_hat: GradientBoundEstimate,
    pub k_hat: DenoiserBoundEstimate,
    pub fixed_point: FixedPointReport,
    pub psnr: f64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "preset: {}", self.preset.as_str()).unwrap();
        writeln!(s, "iterations: {}", self.iterations).unwrap();
        writeln!(s, "stop_reason: {}", self.stop_reason).unwrap();
        writeln!(s, "final_delta: {:e}", self.final_delta).unwrap();
        match &self.case {
            Some(c) => {
                writeln!(s, "case: {}", c.label).unwrap();
                writeln!(s, "case_caveat: {}", c.caveat).unwrap();
            }
            None => writeln!(s, "case: undetermined (too few flagged iterations)").unwrap(),
        }
        writeln!(
            s,
            "m_hat: {:e} (over {}, {} samples)",
            self.m_hat.m_hat, self.m_hat.region, self.m_hat.sample_count
        )
        .unwrap();
        writeln!(
            s,
            "k_hat: {:e} ({} noise samples, {} sigma values{})",
            self.k_hat.k_hat,
            self.k_hat.sample_count,
            self.k_hat.sigma_grid.len(),
            if self.k_hat.vacuous() { ", vacuous" } else { "" }
        )
        .unwrap();
        writeln!(s, "fixed_point_residual: {:e}", self.fixed_point.residual).unwrap();
        writeln!(s, "psnr_db: {:.3}", self.psnr).unwrap();
        s
    }
}

const K_HAT_SAMPLES: usize = 8;

/// Summarizes an experiment: case label, empirical gradient and denoiser
/// constants, and the fixed-point residual.
pub fn summarize(exp: &Experiment) -> Result<RunSummary> {
    let trace = &exp.trace;
    let ct = ConditionTrace::from_run(trace, exp.preset.solver.gamma, exp.preset.solver.eta);
    let window = exp.preset.classify_window.min(ct.flagged_count());
    let case = if window == 0 {
        None
    } else {
        Some(classify_case(&ct, window)?)
    };

    let d = exp.fidelity.dim();
    let mut samples: Vec<_> = match &trace.snapshots {
        Some(snaps) => snaps.iter().map(|t| t.x.clone()).collect(),
        None => vec![trace.final_iterate.x.clone()],
    };
    let trajectory_len = samples.len();
    samples.extend(box_vertex_samples(d, 16, exp.preset.solver.seed));
    let m_hat = estimate_assumption1_constant(
        &exp.fidelity,
        &samples,
        &format!("{trajectory_len} trajectory iterates + 16 vertices of [0,1]^d"),
    )?;

    let mut sigmas: Vec<f64> = trace.records.iter().map(|r| r.sigma).collect();
    sigmas.insert(0, (exp.preset.solver.lambda / exp.preset.solver.rho0).sqrt());
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let picks = [0, sigmas.len() / 2, sigmas.len() - 1];
    let mut grid: Vec<f64> = picks.iter().map(|&i| sigmas[i]).collect();
    grid.dedup();
    let (w, h) = exp.fidelity.operator().input_shape();
    let k_hat =
        estimate_assumption2_constant(&exp.preset.denoiser, w, h, &grid, K_HAT_SAMPLES, exp.preset.solver.seed)?;

    Ok(RunSummary {
        preset: exp.preset.name,
        iterations: trace.records.len(),
        stop_reason: trace.stop_reason,
        final_delta: trace.last().delta,
        case,
        m_hat,
        k_hat,
        fixed_point: fixed_point_residual(&exp.fidelity, &exp.preset.denoiser, trace)?,
        psnr: exp.psnr(),
    })
}

/// Runs a preset and writes `trace.csv`, `restored.pgm`, `observed.pgm`
/// and `summary.txt` into `out_dir`.
pub fn cmd_run(preset: &ExperimentPreset, out_dir: &Path) -> Result<RunSummary> {
    ensure_dir(out_dir)?;
    let exp = run_experiment(preset)?;
    let summary = summarize(&exp)?;
    write_file(&out_dir.join("trace.csv"), trace_csv::write_trace(&exp.trace.records))?;
    pgm::save_image(&exp.restored(), &out_dir.join("restored.pgm"))?;
    let (ow, oh) = exp.fidelity.operator().output_shape();
    let observed = crate::ImageGrid::new(ow, oh, exp.fidelity.observation().clone())?;
    pgm::save_image(&observed, &out_dir.join("observed.pgm"))?;
    write_file(&out_dir.join("summary.txt"), summary.to_text())?;
    Ok(summary)
}

/// Runs one preset per `eta` concurrently, each into `out_dir/eta_<eta>`.
pub fn cmd_sweep(preset: &ExperimentPreset, etas: &[f64], out_dir: &Path) -> Result<Vec<(PathBuf, RunSummary)>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = etas
            .iter()
            .map(|&eta| {
                let dir = out_dir.join(format!("eta_{eta}"));
                let p = preset.clone().with_eta(eta);
                scope.spawn(move || cmd_run(&p, &dir).map(|s| (dir, s)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeMode {
    Auto,
    S3,
    S12,
}

impl AnalyzeMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(AnalyzeMode::Auto),
            "s3" => Ok(AnalyzeMode::S3),
            "s12" => Ok(AnalyzeMode::S12),
            other => Err(Error::invalid(
                "mode",
                format!("unknown mode `{other}` (auto, s3, s12)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub mode: AnalyzeMode,
    pub epsilon: f64,
    /// Inferred from the recorded penalty ratios when absent.
    pub gamma: Option<f64>,
    pub eta: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            mode: AnalyzeMode::Auto,
            epsilon: 1e-3,
            gamma: None,
            eta: SolverConfig::default().eta,
        }
    }
}

impl AnalyzeOptions {
    /// Reads `eta`, `gamma`, `epsilon` and `mode`; other preset keys are
    /// skipped so the config of the producing run can be reused.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut opts = Self::default();
        for (line, key, value) in parse_pairs(text)? {
            match key.as_str() {
                "eta" => opts.eta = parse_value(line, &key, &value)?,
                "gamma" => opts.gamma = Some(parse_value(line, &key, &value)?),
                "epsilon" => opts.epsilon = parse_value(line, &key, &value)?,
                "mode" => {
                    opts.mode = AnalyzeMode::parse(&value).map_err(|e| Error::Config {
                        line,
                        reason: e.to_string(),
                    })?
                }
                k if PRESET_KEYS.contains(&k) => {}
                other => {
                    return Err(Error::Config {
                        line,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        Ok(opts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundKind {
    Piecewise { beta: f64, peak0: f64, onsets: Vec<usize> },
    Geometric { a: f64, beta: f64, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeReport {
    pub case: CaseLabel,
    pub c_hat: Option<f64>,
    pub bound_kind: BoundKind,
    pub start: usize,
    pub bound: Vec<f64>,
    pub check: BoundCheck,
    pub certificate: CauchyCertificate,
}

impl AnalyzeReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "case: {}", self.case).unwrap();
        match self.c_hat {
            Some(c) => writeln!(s, "c_hat: {c:e}").unwrap(),
            None => writeln!(s, "c_hat: undefined (no C1 iterations)").unwrap(),
        }
        match &self.bound_kind {
            BoundKind::Piecewise { beta, peak0, onsets } => {
                writeln!(s, "bound: piecewise geometric, beta = {beta}, A = {peak0:e}").unwrap();
                writeln!(s, "chunk_onsets: {onsets:?}").unwrap();
            }
            BoundKind::Geometric { a, beta, n } => {
                writeln!(
                    s,
                    "bound: geometric, delta_(k+1) <= A*beta^k for k >= {n}, beta = {beta}, A = {a:e}"
                )
                .unwrap();
            }
        }
        writeln!(s, "checked_from: {}", self.start).unwrap();
        writeln!(s, "holds: {}", self.check.holds).unwrap();
        writeln!(s, "worst_margin: {:.17e}", self.check.worst_margin).unwrap();
        let cert = &self.certificate;
        writeln!(s, "epsilon: {:e}", cert.epsilon).unwrap();
        writeln!(s, "cauchy_K: {}", cert.k_index).unwrap();
        writeln!(s, "cauchy_N: {}", cert.n_start).unwrap();
        writeln!(s, "tail_bound: {:e}", cert.tail_bound).unwrap();
        s
    }
}

fn infer_gamma(records: &[TraceRecord]) -> Result<f64> {
    records
        .windows(2)
        .find(|w| w[0].condition == Some(ConditionFlag::C1))
        .map(|w| w[1].rho / w[0].rho)
        .ok_or_else(|| Error::invalid("gamma", "no C1 iteration to infer it from; pass it explicitly"))
}

/// Builds and checks a residual bound for recorded trace rows.
pub fn analyze_records(records: &[TraceRecord], opts: &AnalyzeOptions) -> Result<AnalyzeReport> {
    if records.len() < 2 {
        return Err(Error::InsufficientIterations(records.len()));
    }
    let gamma = match opts.gamma {
        Some(g) => g,
        None => infer_gamma(records)?,
    };
    let trace = ConditionTrace {
        flags: records.iter().map(|r| r.condition).collect(),
        deltas: records.iter().map(|r| r.delta).collect(),
        rhos: records.iter().map(|r| r.rho).collect(),
        gamma,
        eta: opts.eta,
    };
    trace.validate()?;
    let case = classify_case(&trace, default_window(trace.flagged_count()))?.label;
    let c_hat = match estimate_lemma1_constant(&trace) {
        Ok(c) => Some(c),
        Err(Error::NoC1Iterations) => None,
        Err(e) => return Err(e),
    };
    let use_s3 = match opts.mode {
        AnalyzeMode::S3 => true,
        AnalyzeMode::S12 => false,
        AnalyzeMode::Auto => case == CaseLabel::S3Like,
    };
    let (bound_kind, bound, start, certificate) = if use_s3 {
        let c = c_hat.ok_or(Error::NoC1Iterations)?;
        let pgs = construct_s3_bound(&trace, c)?;
        let cert = cauchy_index(pgs.spec.peak0(), pgs.spec.beta(), opts.epsilon, pgs.spec.chunk_starts())?;
        (
            BoundKind::Piecewise {
                beta: pgs.spec.beta(),
                peak0: pgs.spec.peak0(),
                onsets: pgs.onsets.clone(),
            },
            pgs.sequence(trace.len()),
            pgs.start(),
            cert,
        )
    } else {
        // An all-C2 trace never consults c.
        let geo = construct_s12_bound(&trace, c_hat.unwrap_or(1.0))?;
        let cert = cauchy_index(geo.first, geo.beta, opts.epsilon, &[geo.n])?;
        (
            BoundKind::Geometric {
                a: geo.a,
                beta: geo.beta,
                n: geo.n,
            },
            geo.sequence(&trace.deltas),
            geo.start(),
            cert,
        )
    };
    let check = verify_bound(&trace.deltas, &bound, start)?;
    Ok(AnalyzeReport {
        case,
        c_hat,
        bound_kind,
        start,
        bound,
        check,
        certificate,
    })
}

/// Reads a trace CSV, writes `bound.csv` and `certificate.txt` into `out_dir`.
pub fn cmd_analyze(trace_file: &Path, opts: &AnalyzeOptions, out_dir: &Path) -> Result<AnalyzeReport> {
    let text = fs::read_to_string(trace_file)?;
    let records = trace_csv::parse_trace(&text)?;
    let report = analyze_records(&records, opts)?;
    ensure_dir(out_dir)?;
    let deltas: Vec<f64> = records.iter().map(|r| r.delta).collect();
    write_file(
        &out_dir.join("bound.csv"),
        trace_csv::write_bound(&deltas, &report.bound),
    )?;
    write_file(&out_dir.join("certificate.txt"), report.to_text())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgsDemo {
    pub spec: PgsSpec,
    pub rows: Vec<PgsDemoRow>,
    pub certificate: CauchyCertificate,
    pub summability_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgsDemoRow {
    pub k: usize,
    pub y: f64,
    pub partial_sum: f64,
    /// Bound on the sum of the chunk containing `k`.
    pub chunk_bound: f64,
}

impl PgsDemo {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(trace_csv::PGS_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                r.k,
                trace_csv::num(r.y),
                trace_csv::num(r.partial_sum),
                trace_csv::num(r.chunk_bound)
            )
            .unwrap();
        }
        out
    }

    pub fn report(&self) -> String {
        let c = &self.certificate;
        format!(
            "beta: {}\nA: {}\nsummability_bound: {:e}\nepsilon: {:e}\ncauchy_K: {}\ncauchy_N: {}\ntail_bound: {:e}\n",
            self.spec.beta(),
            self.spec.peak0(),
            self.summability_bound,
            c.epsilon,
            c.k_index,
            c.n_start,
            c.tail_bound
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgsDemoParams {
    pub beta: f64,
    pub peak0: f64,
    pub chunk_lengths: Vec<usize>,
    pub epsilon: f64,
    pub length: Option<usize>,
}

impl Default for PgsDemoParams {
    fn default() -> Self {
        Self {
            beta: 0.5,
            peak0: 1.0,
            chunk_lengths: vec![2, 3, 4, 5, 6],
            epsilon: 1e-3,
            length: None,
        }
    }
}

/// Comma-separated chunk lengths, e.g. `2,3,4`.
pub fn parse_chunk_lengths(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::invalid("chunk_lengths", format!("`{t}` is not a chunk length")))
        })
        .collect()
}

impl PgsDemoParams {
    /// Reads `beta`, `peak0`, `chunk_lengths`, `epsilon` and `length`.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for (line, key, value) in parse_pairs(text)? {
            match key.as_str() {
                "beta" => p.beta = parse_value(line, &key, &value)?,
                "peak0" => p.peak0 = parse_value(line, &key, &value)?,
                "chunk_lengths" => {
                    p.chunk_lengths = parse_chunk_lengths(&value).map_err(|e| Error::Config {
                        line,
                        reason: e.to_string(),
                    })?
                }
                "epsilon" => p.epsilon = parse_value(line, &key, &value)?,
                "length" => p.length = Some(parse_value(line, &key, &value)?),
                other => {
                    return Err(Error::Config {
                        line,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        Ok(p)
    }

    pub fn demo(&self) -> Result<PgsDemo> {
        pgs_demo(self.beta, self.peak0, &self.chunk_lengths, self.epsilon, self.length)
    }
}

/// Sawtooth data for a PGS with no head: chunk `j` has `chunk_lengths[j−1]`
/// terms. Defaults to enough terms to pass the Cauchy index twice.
pub fn pgs_demo(
    beta: f64,
    peak0: f64,
    chunk_lengths: &[usize],
    epsilon: f64,
    length: Option<usize>,
) -> Result<PgsDemo> {
    let spec = PgsSpec::from_chunk_lengths(beta, peak0, 0, chunk_lengths, Vec::new())?;
    let certificate = cauchy_index(peak0, beta, epsilon, spec.chunk_starts())?;
    let listed: usize = chunk_lengths.iter().sum();
    let length = length.unwrap_or_else(|| listed.max(2 * certificate.n_start));
    let mut partial_sum = 0.0;
    let rows = (1..=length)
        .map(|k| {
            let y = spec.term(k);
            partial_sum += y;
            PgsDemoRow {
                k,
                y,
                partial_sum,
                chunk_bound: pgs_chunk_sum_bound(&spec, spec.chunk_of(k)),
            }
        })
        .collect();
    Ok(PgsDemo {
        summability_bound: spec.summability_bound(),
        spec,
        rows,
        certificate,
    })
}

pub fn cmd_pgs_demo(
    beta: f64,
    peak0: f64,
    chunk_lengths: &[usize],
    epsilon: f64,
    length: Option<usize>,
    out: &Path,
) -> Result<PgsDemo> {
    let demo = pgs_demo(beta, peak0, chunk_lengths, epsilon, length)?;
    write_file(out, demo.to_csv())?;
    Ok(demo)
}
