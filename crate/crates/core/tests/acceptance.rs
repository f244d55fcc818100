//! Acceptance criteria A1–A8. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{dense_operator, dense_prox, rel_err};
use pnp_admm::denoise::{estimate_assumption2_constant, verify_assumption2, Denoiser, DenoiserKind};
use pnp_admm::fidelity::{prox_x_update, FidelityTerm, ForwardOperator, OperatorKind, Stencil};
use pnp_admm::harness::trace_csv::write_trace;
use pnp_admm::harness::{run_experiment, Experiment, ExperimentPreset, PresetName};
use pnp_admm::sequence::{
    cauchy_index, classify_case, construct_s3_bound, estimate_lemma1_constant, verify_bound, CaseLabel, ConditionTrace,
    PgsSpec, BOUND_TOLERANCE,
};
use pnp_admm::solver::{ConditionFlag, SolverConfig, StopReason};
use pnp_admm::{metric_distance, ImageGrid, RealVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const TERMS: usize = 10_000;

struct RandomPgs {
    beta: f64,
    peak0: f64,
    head: Vec<f64>,
    lengths: Vec<usize>,
}

impl RandomPgs {
    fn spec(&self) -> PgsSpec {
        PgsSpec::from_chunk_lengths(self.beta, self.peak0, self.head.len(), &self.lengths, self.head.clone()).unwrap()
    }

    /// Terms by explicit expansion: head, then chunk after chunk.
    fn terms(&self, len: usize) -> Vec<f64> {
        let mut out = self.head.clone();
        let mut peak = self.peak0;
        for &l in &self.lengths {
            let mut y = peak;
            for _ in 0..l {
                out.push(y);
                y *= self.beta;
            }
            peak *= self.beta;
        }
        while out.len() < len {
            out.push(peak);
            peak *= self.beta;
        }
        out.truncate(len);
        out
    }
}

fn random_specs() -> Vec<RandomPgs> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240101);
    (0..100)
        .map(|_| {
            let beta = rng.random_range(0.1..=0.95);
            let peak0 = rng.random_range(0.1..=10.0);
            let n1 = rng.random_range(0..=5);
            let head = (0..n1).map(|_| rng.random_range(0.0..=peak0)).collect();
            let mut lengths = Vec::new();
            let mut covered = n1;
            while covered < TERMS {
                let l = rng.random_range(1..=10);
                lengths.push(l);
                covered += l;
            }
            RandomPgs {
                beta,
                peak0,
                head,
                lengths,
            }
        })
        .collect()
}

fn a1(specs: &[RandomPgs]) -> Outcome {
    let t0 = Instant::now();
    let mut violations = 0;
    for r in specs {
        let terms = r.terms(TERMS);
        let lib = r.spec().generate(TERMS);
        if terms
            .iter()
            .zip(&lib)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.max(1e-300))
        {
            return Err("PgsSpec terms disagree with chunk expansion".into());
        }
        let bound = r.head.iter().sum::<f64>() + r.peak0 / (1.0 - r.beta).powi(2);
        let mut s = 0.0;
        for y in &terms {
            s += y;
            if s > bound {
                violations += 1;
            }
        }
    }
    let elapsed = t0.elapsed();
    if violations > 0 {
        return Err(format!("{violations} partial sums exceed head + A/(1-beta)^2"));
    }
    if elapsed >= Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("100 specs x {TERMS} terms, 0 violations, {elapsed:.2?}"))
}

fn a3(specs: &[RandomPgs]) -> Outcome {
    let mut checked = 0;
    for (i, r) in specs.iter().enumerate() {
        let spec = r.spec();
        let terms = r.terms(TERMS);
        for eps in [1e-1, 1e-3] {
            // Head terms precede n_1 and never enter the tail.
            let starts: Vec<usize> = spec.chunk_starts().to_vec();
            let cert = cauchy_index(r.peak0, r.beta, eps, &starts).map_err(|e| e.to_string())?;
            let thr = eps * (1.0 - r.beta).powi(2) / r.peak0;
            let k = cert.k_index;
            let holds = |k: usize| r.beta.powi(k as i32 - 1) < thr;
            if !holds(k) || (k > 1 && holds(k - 1)) {
                return Err(format!("spec {i}, eps {eps}: K = {k} is not minimal"));
            }
            let n = cert.n_start;
            if n != spec.chunk_start(k) + 1 {
                return Err(format!(
                    "spec {i}, eps {eps}: N = {n} but n_K + 1 = {}",
                    spec.chunk_start(k) + 1
                ));
            }
            let tail: f64 = if n <= TERMS { terms[n - 1..].iter().sum() } else { 0.0 };
            if tail >= eps {
                return Err(format!("spec {i}, eps {eps}: tail sum {tail:e} from N = {n}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} certificates, K minimal, tail < eps"))
}

fn run(name: PresetName, eta: f64, gamma: f64) -> Experiment {
    run_experiment(&ExperimentPreset::named(name).with_eta(eta).with_gamma(gamma)).unwrap()
}

fn flag_string(exp: &Experiment) -> String {
    exp.trace
        .records
        .iter()
        .map(|r| match r.condition {
            Some(ConditionFlag::C1) => '1',
            Some(ConditionFlag::C2) => '2',
            None => '.',
        })
        .collect()
}

/// Bound built from the definitions alone: `c` over C1 rows, chunks starting
/// at the first C1 after each C2 run, rate `max(1/√γ, η)`.
fn oracle_s3_bound(t: &ConditionTrace) -> Option<(usize, Vec<f64>)> {
    let n = t.len();
    let flags: Vec<Option<ConditionFlag>> = t.flags.clone();
    let c = (0..n)
        .filter(|&i| flags[i] == Some(ConditionFlag::C1))
        .map(|i| t.deltas[i + 1] * t.rhos[i].sqrt())
        .fold(0.0f64, f64::max);
    let mut onsets = Vec::new();
    let mut switches = 0;
    let mut prev = None;
    for (i, f) in flags.iter().enumerate() {
        let Some(f) = *f else { continue };
        match (prev, f) {
            (None, ConditionFlag::C1) | (Some(ConditionFlag::C2), ConditionFlag::C1) => onsets.push(i + 1),
            (Some(ConditionFlag::C1), ConditionFlag::C2) => switches += 1,
            _ => {}
        }
        if f == ConditionFlag::C1 || prev.is_some() {
            prev = Some(f);
        }
    }
    if switches < 2 {
        return None;
    }
    let beta = (1.0 / t.gamma.sqrt()).max(t.eta);
    let n1 = onsets[0];
    let a = c / t.rhos[n1 - 1].sqrt();
    let mut bound: Vec<f64> = t.deltas[..n1].to_vec();
    let mut peak = a;
    for (j, &start) in onsets.iter().enumerate() {
        let end = onsets.get(j + 1).copied().unwrap_or(n);
        let mut y = peak;
        for _ in start..end {
            bound.push(y);
            y *= beta;
        }
        peak *= beta;
    }
    while bound.len() < n {
        bound.push(peak);
        peak *= beta;
    }
    Some((n1 + 1, bound))
}

fn a2(runs: &[(f64, f64, Experiment)], elapsed: Duration) -> Outcome {
    let mut notes = Vec::new();
    let mut s3_like = 0;
    for (eta, gamma, exp) in runs {
        let t = ConditionTrace::from_run(&exp.trace, *gamma, *eta);
        let tag = format!("eta={eta} gamma={gamma}");
        if t.len() != 100 {
            return Err(format!("{tag}: {} iterations, expected 100", t.len()));
        }
        let (_, switches) = t.alternations();
        if switches.len() < 2 {
            notes.push(format!("{tag} excluded ({} C1->C2 alternation(s))", switches.len()));
            continue;
        }
        let c = estimate_lemma1_constant(&t).map_err(|e| e.to_string())?;
        let b = construct_s3_bound(&t, c).map_err(|e| format!("{tag}: {e}"))?;
        let chk = verify_bound(&t.deltas, &b.sequence(t.len()), b.start()).map_err(|e| e.to_string())?;
        if !chk.holds {
            return Err(format!("{tag}: bound fails, worst margin {}", chk.worst_margin));
        }
        let (start, oracle) = oracle_s3_bound(&t).ok_or_else(|| format!("{tag}: oracle finds < 2 alternations"))?;
        if start != b.start() {
            return Err(format!("{tag}: oracle starts at {start}, library at {}", b.start()));
        }
        for k in start..=t.len() {
            let d = t.deltas[k - 1];
            if d > oracle[k - 1] * (1.0 + BOUND_TOLERANCE) {
                return Err(format!(
                    "{tag}: Delta_{k} = {d:e} exceeds oracle bound {:e}",
                    oracle[k - 1]
                ));
            }
        }
        if classify_case(&t, 40).map_err(|e| e.to_string())?.label == CaseLabel::S3Like {
            s3_like += 1;
        }
        notes.push(format!("{tag} holds (margin {:.6})", chk.worst_margin));
    }
    if s3_like == 0 {
        return Err(format!("no S3-like run; {}", notes.join("; ")));
    }
    if elapsed >= Duration::from_secs(60) {
        return Err(format!("runs took {elapsed:?}"));
    }
    Ok(format!("{s3_like}/4 S3-like; {}; {elapsed:.2?}", notes.join("; ")))
}

fn a4(runs: &[(PresetName, f64, Experiment)]) -> Outcome {
    let mut notes = Vec::new();
    for (name, eta, exp) in runs {
        let flags = flag_string(exp);
        let after: &str = &flags[20..];
        let tag = format!("{} eta={eta}", name.as_str());
        if *eta < 0.5 {
            if let Some(pos) = flags.rfind('2') {
                if pos + 1 >= 20 {
                    return Err(format!("{tag}: C2 at iteration {} ({flags})", pos + 1));
                }
            }
            if !after.contains('1') {
                return Err(format!("{tag}: no C1 after iteration 20 ({flags})"));
            }
            notes.push(format!("{tag} S1-like"));
        } else {
            if !(after.contains('1') && after.contains('2')) {
                return Err(format!("{tag}: flags after iteration 20 are {after}"));
            }
            notes.push(format!("{tag} switches"));
        }
    }
    Ok(notes.join("; "))
}

fn a5() -> Outcome {
    let den = DenoiserKind::gaussian();
    let grid = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2];
    let est = estimate_assumption2_constant(&den, 16, 16, &grid, 100, 1).map_err(|e| e.to_string())?;
    let rep = verify_assumption2(&den, &est, 1000, 2, 0.5).map_err(|e| e.to_string())?;
    if rep.violations > 0 {
        return Err(format!(
            "{} violations, worst {} > {}",
            rep.violations, rep.worst_ratio, rep.threshold
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = ImageGrid::from_vec(16, 16, (0..256).map(|_| rng.random::<f64>()).collect()).unwrap();
    for kind in DenoiserKind::all_defaults() {
        let out = kind.denoise(0.0, &img);
        if out
            .pixels()
            .iter()
            .zip(img.pixels().iter())
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return Err(format!("{} is not the identity at sigma = 0", kind.name()));
        }
    }
    Ok(format!(
        "k_hat = {:.4}, worst held-out ratio {:.4} <= {:.4}, sigma = 0 identity for all kinds",
        est.k_hat, rep.worst_ratio, rep.threshold
    ))
}

fn a6() -> Outcome {
    let (w, h) = (8, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..50 {
        let mask: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.5)).collect();
        let ops = [
            ForwardOperator::identity(w, h),
            ForwardOperator::new(w, h, OperatorKind::CircularBlur(Stencil::binomial(3).unwrap())).unwrap(),
            ForwardOperator::new(w, h, OperatorKind::Mask(mask)).unwrap(),
            ForwardOperator::downsample(w, h, 2).unwrap(),
        ];
        for op in ops {
            let kind = format!("{:?}", op.kind())
                .split(['(', ' ', '{'])
                .next()
                .unwrap_or("")
                .to_string();
            let hd = dense_operator(&op);
            let b: Vec<f64> = (0..op.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rho = 10f64.powf(rng.random_range(-2.0..2.0));
            let f = FidelityTerm::new(op, RealVector::new(b.clone()).unwrap()).unwrap();
            let got = prox_x_update(&f, rho, &target).map_err(|e| e.to_string())?;
            let err = rel_err(&got, &dense_prox(&hd, &b, rho, &target));
            let res = rel_err(&f.normal_apply(rho, &got), &f.normal_rhs(rho, &target));
            worst = (worst.0.max(err), worst.1.max(res));
            if err > 1e-8 || res > 1e-8 {
                return Err(format!("{kind} instance {i}: error {err:e}, residual {res:e}"));
            }
        }
    }
    Ok(format!(
        "200 instances, worst error {:.1e}, worst residual {:.1e}",
        worst.0, worst.1
    ))
}

fn a7(exps: &[&Experiment]) -> Outcome {
    for exp in exps {
        let cfg: &SolverConfig = &exp.preset.solver;
        let tag = format!("{} eta={} gamma={}", exp.preset.name.as_str(), cfg.eta, cfg.gamma);
        let recs = &exp.trace.records;
        for r in recs {
            if (r.sigma * r.sigma * r.rho - cfg.lambda).abs() > 1e-12 * cfg.lambda {
                return Err(format!("{tag}: sigma^2 rho != lambda at {}", r.iter));
            }
        }
        for w in recs.windows(2) {
            if w[1].rho < w[0].rho {
                return Err(format!("{tag}: rho decreases at {}", w[1].iter));
            }
            let want = ConditionFlag::classify(w[1].delta, w[0].delta, cfg.eta);
            if w[0].condition != Some(want) {
                return Err(format!("{tag}: flag at {} inconsistent", w[0].iter));
            }
        }
        ConditionTrace::from_run(&exp.trace, cfg.gamma, cfg.eta)
            .validate()
            .map_err(|e| format!("{tag}: {e}"))?;
        let again = run_experiment(&exp.preset).map_err(|e| e.to_string())?;
        if write_trace(&again.trace.records).as_bytes() != write_trace(recs).as_bytes() {
            return Err(format!("{tag}: rerun trace differs"));
        }
    }
    Ok(format!(
        "{} runs: monotone rho, sigma^2 rho = lambda, flags consistent, reruns identical",
        exps.len()
    ))
}

fn a8() -> Outcome {
    let mut p = ExperimentPreset::deblur().with_eta(0.9).with_gamma(1.2);
    p.solver.delta_tol = 1e-6;
    p.solver.max_iter = 500;
    let exp = run_experiment(&p).map_err(|e| e.to_string())?;
    if exp.trace.stop_reason != StopReason::Tolerance {
        return Err("run did not converge".into());
    }
    let snaps = exp.trace.snapshots.as_ref().ok_or("no snapshots")?;
    let deltas = exp.trace.deltas();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(0..deltas.len());
        let m = rng.random_range(n + 1..=deltas.len());
        let chain: f64 = deltas[n..m].iter().sum();
        let d = metric_distance(&snaps[n], &snaps[m]).map_err(|e| e.to_string())?;
        worst = worst.max(d - chain);
        if d > chain + 1e-10 {
            return Err(format!("D(theta_{n}, theta_{m}) = {d:e} > {chain:e}"));
        }
    }
    Ok(format!(
        "{} iterations, 100 pairs, max D - sum = {worst:.2e}",
        deltas.len()
    ))
}

fn main() {
    let specs = random_specs();

    let t0 = Instant::now();
    let a2_runs: Vec<(f64, f64, Experiment)> = std::thread::scope(|s| {
        let handles: Vec<_> = [(0.9, 1.05), (0.9, 1.2), (0.95, 1.05), (0.95, 1.2)]
            .into_iter()
            .map(|(eta, gamma)| s.spawn(move || (eta, gamma, run(PresetName::Deblur, eta, gamma))))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let a2_elapsed = t0.elapsed();
    let a4_runs: Vec<(PresetName, f64, Experiment)> = std::thread::scope(|s| {
        let handles: Vec<_> = [
            (PresetName::Deblur, 0.1),
            (PresetName::Deblur, 0.95),
            (PresetName::Superres, 0.1),
            (PresetName::Superres, 0.95),
        ]
        .into_iter()
        .map(|(name, eta)| s.spawn(move || (name, eta, run(name, eta, SolverConfig::default().gamma))))
        .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let all: Vec<&Experiment> = a2_runs
        .iter()
        .map(|r| &r.2)
        .chain(a4_runs.iter().map(|r| &r.2))
        .collect();

    let results: Vec<(&str, &str, Outcome)> = vec![
        ("A1", "PGS summability", a1(&specs)),
        ("A2", "residual bound on deblur traces", a2(&a2_runs, a2_elapsed)),
        ("A3", "Cauchy certificate", a3(&specs)),
        ("A4", "condition-flag pattern", a4(&a4_runs)),
        ("A5", "denoiser residue bound", a5()),
        ("A6", "proximal solve", a6()),
        ("A7", "trace invariants", a7(&all)),
        ("A8", "triangle-inequality chain", a8()),
    ];
    let mut failed = 0;
    for (id, what, outcome) in &results {
        match outcome {
            Ok(detail) => println!("{id} PASS  {what}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL  {what}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
