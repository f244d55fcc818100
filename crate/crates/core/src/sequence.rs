//! Piecewise geometric sequences and the residual bounds built from them.
//!
//! A piecewise geometric sequence (PGS) with rate `β` and indices
//! `n_1 < n_2 < ⋯` has chunks `y_{n_j+1} … y_{n_{j+1}}` decaying by `β`,
//! and chunk peaks `y_{n_j+1} = A·β^{j−1}`. The first `n_1` terms are free.
//!
//! For a run in which both conditions keep recurring, the residuals are
//! dominated by a PGS with `β = max(1/√γ, η)` and `A = c/√ρ_{n_1}`, where
//! `c` bounds `Δ_{k+1}·√ρ_k` over the C1 iterations. The PGS is summable,
//! and [`cauchy_index`] yields the index past which its tail sums stay
//! below any `ε`.
//!
//! All sequences here are indexed from 1, as iterations are.

use crate::error::{Error, Result};
use crate::solver::{ConditionFlag, RunTrace};

/// Multiplicative slack for pointwise bound checks.
pub const BOUND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PgsSpec {
    beta: f64,
    peak0: f64,
    chunk_starts: Vec<usize>,
    head: Vec<f64>,
}

impl PgsSpec {
    /// `head` supplies `y_1 … y_{n_1}`; missing head entries default to
    /// `peak0`. Beyond the last listed start, chunks have unit length.
    pub fn new(beta: f64, peak0: f64, chunk_starts: Vec<usize>, head: Vec<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 1), got {beta}")));
        }
        if !(peak0 > 0.0 && peak0.is_finite()) {
            return Err(Error::invalid("peak0", format!("must be positive, got {peak0}")));
        }
        if chunk_starts.is_empty() {
            return Err(Error::invalid("chunk_starts", "must not be empty"));
        }
        if chunk_starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("chunk_starts", "must be strictly increasing"));
        }
        if head.len() > chunk_starts[0] {
            return Err(Error::invalid(
                "head",
                format!("has {} terms but n_1 = {}", head.len(), chunk_starts[0]),
            ));
        }
        if head.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::invalid("head", "terms must be finite and nonnegative"));
        }
        Ok(Self {
            beta,
            peak0,
            chunk_starts,
            head,
        })
    }

    /// Spec from the lengths of consecutive chunks, starting after `n_1`.
    pub fn from_chunk_lengths(beta: f64, peak0: f64, n1: usize, lengths: &[usize], head: Vec<f64>) -> Result<Self> {
        if lengths.contains(&0) {
            return Err(Error::invalid("chunk_lengths", "must be positive"));
        }
        let mut starts = vec![n1];
        for &l in lengths {
            starts.push(starts.last().unwrap() + l);
        }
        Self::new(beta, peak0, starts, head)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn peak0(&self) -> f64 {
        self.peak0
    }

    pub fn chunk_starts(&self) -> &[usize] {
        &self.chunk_starts
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn n1(&self) -> usize {
        self.chunk_starts[0]
    }

    /// `n_j` for `j ≥ 1`, extended with unit-length chunks.
    pub fn chunk_start(&self, j: usize) -> usize {
        assert!(j >= 1);
        let listed = self.chunk_starts.len();
        if j <= listed {
            self.chunk_starts[j - 1]
        } else {
            self.chunk_starts[listed - 1] + (j - listed)
        }
    }

    fn head_term(&self, k: usize) -> f64 {
        self.head.get(k - 1).copied().unwrap_or(self.peak0)
    }

    pub fn head_sum(&self) -> f64 {
        (1..=self.n1()).map(|k| self.head_term(k)).sum()
    }

    /// `head_sum + A/(1−β)²`, an upper bound on every partial sum.
    pub fn summability_bound(&self) -> f64 {
        self.head_sum() + self.peak0 / (1.0 - self.beta).powi(2)
    }

    /// Chunk `j` containing index `k > n_1`.
    pub fn chunk_of(&self, k: usize) -> usize {
        assert!(k > self.n1());
        // Position of the last listed start below k.
        let listed = self.chunk_starts.partition_point(|&n| n < k);
        let last = *self.chunk_starts.last().unwrap();
        if k <= last + 1 || listed < self.chunk_starts.len() {
            listed
        } else {
            self.chunk_starts.len() + (k - last - 1)
        }
    }

    /// `y_k`, 1-based.
    pub fn term(&self, k: usize) -> f64 {
        assert!(k >= 1);
        if k <= self.n1() {
            return self.head_term(k);
        }
        let j = self.chunk_of(k);
        let nj = self.chunk_start(j);
        self.peak0 * self.beta.powi((j - 1) as i32) * self.beta.powi((k - nj - 1) as i32)
    }

    /// `y_1 … y_length`.
    pub fn generate(&self, length: usize) -> Vec<f64> {
        (1..=length).map(|k| self.term(k)).collect()
    }
}

/// `A·β^{j−1}/(1−β)`, a strict upper bound on the sum of chunk `j`.
pub fn pgs_chunk_sum_bound(spec: &PgsSpec, j: usize) -> f64 {
    assert!(j >= 1);
    spec.peak0 * spec.beta.powi((j - 1) as i32) / (1.0 - spec.beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyCertificate {
    pub epsilon: f64,
    /// Smallest `K ≥ 1` with `β^{K−1} < ε(1−β)²/A`.
    pub k_index: usize,
    /// `N = n_K + 1`.
    pub n_start: usize,
    /// `A·β^{K−1}/(1−β)²`, which bounds every tail sum from `N` on.
    pub tail_bound: f64,
}

pub fn cauchy_index(peak0: f64, beta: f64, epsilon: f64, chunk_starts: &[usize]) -> Result<CauchyCertificate> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    let spec = PgsSpec::new(beta, peak0, chunk_starts.to_vec(), Vec::new())?;
    let threshold = epsilon * (1.0 - beta).powi(2) / peak0;
    let holds = |k: usize| beta.powi((k - 1) as i32) < threshold;

    // Start from the logarithmic estimate, then settle on the exact minimum.
    let mut k = if threshold > 1.0 {
        1
    } else {
        ((threshold.ln() / beta.ln()).floor() as usize + 1).max(1)
    };
    while k > 1 && holds(k - 1) {
        k -= 1;
    }
    while !holds(k) {
        k += 1;
    }
    let tail_bound = peak0 * beta.powi((k - 1) as i32) / (1.0 - beta).powi(2);
    Ok(CauchyCertificate {
        epsilon,
        k_index: k,
        n_start: spec.chunk_start(k) + 1,
        tail_bound,
    })
}

/// Condition flags, residuals and penalties of a run, row `i` holding
/// iteration `i + 1`. The final row may carry no flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionTrace {
    pub flags: Vec<Option<ConditionFlag>>,
    pub deltas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub gamma: f64,
    pub eta: f64,
}

impl ConditionTrace {
    pub fn from_run(trace: &RunTrace, gamma: f64, eta: f64) -> Self {
        Self {
            flags: trace.records.iter().map(|r| r.condition).collect(),
            deltas: trace.records.iter().map(|r| r.delta).collect(),
            rhos: trace.records.iter().map(|r| r.rho).collect(),
            gamma,
            eta,
        }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Flags as `(iteration, flag)` pairs, skipping unflagged rows.
    pub fn flagged(&self) -> impl Iterator<Item = (usize, ConditionFlag)> + '_ {
        self.flags.iter().enumerate().filter_map(|(i, f)| f.map(|f| (i + 1, f)))
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged().count()
    }

    pub fn delta(&self, k: usize) -> f64 {
        self.deltas[k - 1]
    }

    pub fn rho(&self, k: usize) -> f64 {
        self.rhos[k - 1]
    }

    pub fn flag(&self, k: usize) -> Option<ConditionFlag> {
        self.flags[k - 1]
    }

    /// Checks every structural invariant, naming the first violation.
    pub fn validate(&self) -> Result<()> {
        let n = self.deltas.len();
        if self.flags.len() != n || self.rhos.len() != n {
            return Err(Error::TraceInvariant(format!(
                "column lengths differ (flags {}, deltas {n}, rhos {})",
                self.flags.len(),
                self.rhos.len()
            )));
        }
        if self.gamma.is_nan() || self.gamma <= 1.0 || self.eta.is_nan() || self.eta <= 0.0 || self.eta >= 1.0 {
            return Err(Error::TraceInvariant(format!(
                "parameters out of range (gamma {}, eta {})",
                self.gamma, self.eta
            )));
        }
        for (i, (&d, &r)) in self.deltas.iter().zip(&self.rhos).enumerate() {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::TraceInvariant(format!("delta at iteration {} is {d}", i + 1)));
            }
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::TraceInvariant(format!("rho at iteration {} is {r}", i + 1)));
            }
        }
        for i in 0..n {
            let k = i + 1;
            match self.flags[i] {
                None if i + 1 < n => {
                    return Err(Error::TraceInvariant(format!(
                        "missing condition at iteration {k}; only the last row may be NA"
                    )))
                }
                None => {}
                Some(_) if i + 1 == n => {
                    return Err(Error::TraceInvariant(format!(
                        "condition at final iteration {k} needs a following residual"
                    )))
                }
                Some(flag) => {
                    let expected = ConditionFlag::classify(self.deltas[i + 1], self.deltas[i], self.eta);
                    if flag != expected {
                        return Err(Error::TraceInvariant(format!(
                            "condition flag at iteration {k} is {flag} but residuals imply {expected} at eta = {}",
                            self.eta
                        )));
                    }
                    let ratio = self.rhos[i + 1] / self.rhos[i];
                    let want = match flag {
                        ConditionFlag::C1 => self.gamma,
                        ConditionFlag::C2 => 1.0,
                    };
                    if (ratio - want).abs() > 1e-12 * want {
                        return Err(Error::TraceInvariant(format!(
                            "rho ratio {ratio} after iteration {k} does not match {flag}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `(n_j)` and `(m_j)`: onsets of C1 runs and of the C2 runs that follow.
    pub fn alternations(&self) -> (Vec<usize>, Vec<usize>) {
        let mut ns = Vec::new();
        let mut ms = Vec::new();
        let mut want = ConditionFlag::C1;
        for (k, flag) in self.flagged() {
            if flag == want {
                match flag {
                    ConditionFlag::C1 => ns.push(k),
                    ConditionFlag::C2 => ms.push(k),
                }
                want = match want {
                    ConditionFlag::C1 => ConditionFlag::C2,
                    ConditionFlag::C2 => ConditionFlag::C1,
                };
            }
        }
        (ns, ms)
    }
}

/// `max Δ_{k+1}·√ρ_k` over iterations `k` flagged C1.
pub fn estimate_lemma1_constant(trace: &ConditionTrace) -> Result<f64> {
    trace
        .flagged()
        .filter(|&(_, f)| f == ConditionFlag::C1)
        .map(|(k, _)| trace.delta(k + 1) * trace.rho(k).sqrt())
        .reduce(f64::max)
        .ok_or(Error::NoC1Iterations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgsBound {
    pub spec: PgsSpec,
    pub c_used: f64,
    /// `1/√γ`.
    pub alpha: f64,
    /// `n_1 < n_2 < ⋯`, the C1 onsets.
    pub onsets: Vec<usize>,
    /// `m_1 < m_2 < ⋯`, the C2 onsets following each C1 run.
    pub switches: Vec<usize>,
    /// `L_j = c/√ρ_{n_j}` as recorded.
    pub peaks: Vec<f64>,
}

impl PgsBound {
    pub fn n1(&self) -> usize {
        self.spec.n1()
    }

    /// First index at which the constructed bound is informative.
    pub fn start(&self) -> usize {
        self.n1() + 1
    }

    pub fn sequence(&self, length: usize) -> Vec<f64> {
        self.spec.generate(length)
    }
}

/// Rate of the dominating PGS: `max(1/√γ, η)`.
pub fn pgs_rate(gamma: f64, eta: f64) -> f64 {
    (1.0 / gamma.sqrt()).max(eta)
}

/// Builds the PGS that dominates the residuals of a switching run.
pub fn construct_s3_bound(trace: &ConditionTrace, c: f64) -> Result<PgsBound> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    if trace.flagged_count() < 2 {
        return Err(Error::InsufficientIterations(trace.len()));
    }
    let (onsets, switches) = trace.alternations();
    if switches.len() < 2 {
        return Err(Error::TooFewAlternations {
            alternations: switches.len(),
        });
    }
    let n1 = onsets[0];
    let peaks: Vec<f64> = onsets.iter().map(|&n| c / trace.rho(n).sqrt()).collect();
    let head = trace.deltas[..n1].to_vec();
    let spec = PgsSpec::new(pgs_rate(trace.gamma, trace.eta), peaks[0], onsets.clone(), head)?;
    Ok(PgsBound {
        spec,
        c_used: c,
        alpha: 1.0 / trace.gamma.sqrt(),
        onsets,
        switches,
        peaks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailCase {
    /// Only C1 in the tail; the penalty grows every iteration.
    AllC1,
    /// Only C2 in the tail; the penalty is frozen.
    AllC2,
}

/// `Δ_{k+1} ≤ A·β^k` for `k ≥ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricBound {
    pub a: f64,
    pub beta: f64,
    pub n: usize,
    pub tail: TailCase,
    /// Bound on `Δ_{n+1}`, kept separately since `A = first/β^n` can overflow.
    pub first: f64,
}

impl GeometricBound {
    /// Bound on `Δ_idx` for `idx ≥ n + 1`.
    pub fn at(&self, idx: usize) -> f64 {
        assert!(idx > self.n);
        self.first * self.beta.powi((idx - self.n - 1) as i32)
    }

    /// Observed residuals up to `n`, then the geometric bound.
    pub fn sequence(&self, deltas: &[f64]) -> Vec<f64> {
        (1..=deltas.len())
            .map(|idx| if idx <= self.n { deltas[idx - 1] } else { self.at(idx) })
            .collect()
    }

    pub fn start(&self) -> usize {
        self.n + 1
    }
}

/// Window used when a caller does not pick one: the last quarter of the
/// flagged iterations.
pub fn default_window(flagged: usize) -> usize {
    flagged.div_ceil(4).max(1)
}

/// Geometric bound for a run whose tail is a single condition.
pub fn construct_s12_bound(trace: &ConditionTrace, c: f64) -> Result<GeometricBound> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    let flagged: Vec<(usize, ConditionFlag)> = trace.flagged().collect();
    if flagged.is_empty() {
        return Err(Error::InsufficientIterations(trace.len()));
    }
    let report = classify_case(trace, default_window(flagged.len()))?;
    if report.label == CaseLabel::S3Like {
        return Err(Error::MixedTail);
    }
    let (_, last_flag) = *flagged.last().unwrap();
    // First iteration of the final constant run.
    let s = flagged
        .iter()
        .rev()
        .take_while(|(_, f)| *f == last_flag)
        .last()
        .map(|&(k, _)| k)
        .unwrap();

    let (beta, first, tail) = match last_flag {
        ConditionFlag::C1 => {
            let alpha = 1.0 / trace.gamma.sqrt();
            (alpha, c / trace.rho(s).sqrt(), TailCase::AllC1)
        }
        ConditionFlag::C2 => {
            let anchor = match s.checked_sub(1).filter(|&k| k >= 1).and_then(|k| trace.flag(k)) {
                Some(ConditionFlag::C1) => c / trace.rho(s - 1).sqrt(),
                _ => trace.delta(s),
            };
            (trace.eta, anchor * trace.eta, TailCase::AllC2)
        }
    };
    Ok(GeometricBound {
        a: first / beta.powi(s as i32),
        beta,
        n: s,
        tail,
        first,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseLabel {
    S1Like,
    S2Like,
    S3Like,
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CaseLabel::S1Like => "S1-like",
            CaseLabel::S2Like => "S2-like",
            CaseLabel::S3Like => "S3-like",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub label: CaseLabel,
    pub window: usize,
    pub caveat: String,
}

/// Labels a trace by the flags in its final `window` flagged iterations.
pub fn classify_case(trace: &ConditionTrace, window: usize) -> Result<CaseReport> {
    let flags: Vec<ConditionFlag> = trace.flagged().map(|(_, f)| f).collect();
    if window == 0 || flags.len() < window {
        return Err(Error::InsufficientIterations(trace.len()));
    }
    let tail = &flags[flags.len() - window..];
    let has_c1 = tail.contains(&ConditionFlag::C1);
    let has_c2 = tail.contains(&ConditionFlag::C2);
    let label = match (has_c1, has_c2) {
        (_, false) => CaseLabel::S1Like,
        (false, true) => CaseLabel::S2Like,
        (true, true) => CaseLabel::S3Like,
    };
    Ok(CaseReport {
        label,
        window,
        caveat: format!(
            "heuristic over the last {window} of {} flagged iterations; which case holds \
             asymptotically cannot be decided from a finite run",
            flags.len()
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub holds: bool,
    /// `max Δ_k / y_k` over the checked range.
    pub worst_margin: f64,
}

/// Checks `Δ_k ≤ y_k·(1 + 1e−12)` for `k ≥ start` (1-based).
pub fn verify_bound(deltas: &[f64], bound: &[f64], start: usize) -> Result<BoundCheck> {
    crate::linalg::check_dim("bound", deltas.len(), bound.len())?;
    let start = start.max(1);
    let mut holds = true;
    let mut worst_margin = 0.0f64;
    for (&d, &y) in deltas.iter().zip(bound).skip(start - 1) {
        if d > y * (1.0 + BOUND_TOLERANCE) {
            holds = false;
        }
        let margin = if d == 0.0 { 0.0 } else { d / y };
        worst_margin = worst_margin.max(margin);
    }
    Ok(BoundCheck { holds, worst_margin })
}

/// Deterministic trace following a flag pattern, with every C1 residual
/// equal to `c/√ρ_k` and C2 residuals contracting by `η/(2√γ)`. Useful
/// for exercising bound construction where the bound is attained.
pub fn synthetic_trace(pattern: &[ConditionFlag], c: f64, rho1: f64, gamma: f64, eta: f64) -> ConditionTrace {
    let contraction = eta / (2.0 * gamma.sqrt());
    let mut rhos = vec![rho1];
    for flag in pattern {
        let last = *rhos.last().unwrap();
        rhos.push(match flag {
            ConditionFlag::C1 => gamma * last,
            ConditionFlag::C2 => last,
        });
    }
    let mut deltas = vec![c / rho1.sqrt()];
    for (i, flag) in pattern.iter().enumerate() {
        let next = match flag {
            ConditionFlag::C1 => c / rhos[i].sqrt(),
            ConditionFlag::C2 => contraction * deltas[i],
        };
        deltas.push(next);
    }
    let mut flags: Vec<Option<ConditionFlag>> = pattern.iter().copied().map(Some).collect();
    flags.push(None);
    ConditionTrace {
        flags,
        deltas,
        rhos,
        gamma,
        eta,
    }
}
