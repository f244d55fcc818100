//! Quadratic data-fidelity terms `f(x) = ½‖Hx − b‖²` over matrix-free
//! linear forward operators, and the proximal x-update
//! `argmin_x f(x) + (ρ/2)‖x − t‖²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, euclidean_norm, RealVector};

/// Centered 2-D stencil with odd sides, nonnegative taps summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    width: usize,
    height: usize,
    taps: Vec<f64>,
}

impl Stencil {
    pub fn new(width: usize, height: usize, taps: Vec<f64>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::invalid("stencil", "sides must be odd"));
        }
        check_dim("stencil", width * height, taps.len())?;
        if taps.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid("stencil", "taps must be finite and nonnegative"));
        }
        let total: f64 = taps.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("stencil", format!("taps sum to {total}, expected 1")));
        }
        Ok(Self { width, height, taps })
    }

    /// Uniform `side × side` average.
    pub fn average(side: usize) -> Result<Self> {
        let n = side * side;
        Self::new(side, side, vec![1.0 / n as f64; n])
    }

    /// Outer product of binomial rows with `side` taps (`side` odd).
    pub fn binomial(side: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("stencil", "side must be positive"));
        }
        let mut row = vec![1.0f64];
        for _ in 1..side {
            let mut next = vec![1.0; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        let total: f64 = row.iter().sum::<f64>().powi(2);
        let taps = row
            .iter()
            .flat_map(|a| row.iter().map(move |b| a * b / total))
            .collect();
        Self::new(side, side, taps)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    fn offsets(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let (cx, cy) = ((self.width / 2) as isize, (self.height / 2) as isize);
        self.taps.iter().enumerate().map(move |(i, &t)| {
            let dx = (i % self.width) as isize - cx;
            let dy = (i / self.width) as isize - cy;
            (dx, dy, t)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Identity,
    /// Convolution with periodic wraparound.
    CircularBlur(Stencil),
    /// Zeroes pixels whose `keep` flag is false.
    Mask(Vec<bool>),
    /// Circular prefilter, then keeps every `factor`-th pixel in each direction.
    Downsample {
        factor: usize,
        prefilter: Stencil,
    },
}

/// Linear operator on row-major `width × height` images.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator {
    width: usize,
    height: usize,
    kind: OperatorKind,
}

impl ForwardOperator {
    pub fn new(width: usize, height: usize, kind: OperatorKind) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("operator", "image sides must be positive"));
        }
        match &kind {
            OperatorKind::Mask(keep) => check_dim("mask", width * height, keep.len())?,
            OperatorKind::Downsample { factor, .. } if *factor == 0 => {
                return Err(Error::invalid("factor", "must be positive"))
            }
            _ => {}
        }
        Ok(Self { width, height, kind })
    }

    pub fn identity(width: usize, height: usize) -> Self {
        Self::new(width, height, OperatorKind::Identity).expect("valid identity")
    }

    /// Downsampling with a binomial prefilter of `2·factor − 1` taps per side.
    pub fn downsample(width: usize, height: usize, factor: usize) -> Result<Self> {
        let prefilter = Stencil::binomial(2 * factor.max(1) - 1)?;
        Self::new(width, height, OperatorKind::Downsample { factor, prefilter })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn output_shape(&self) -> (usize, usize) {
        match &self.kind {
            OperatorKind::Downsample { factor, .. } => (self.width.div_ceil(*factor), self.height.div_ceil(*factor)),
            _ => (self.width, self.height),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.width * self.height
    }

    pub fn output_dim(&self) -> usize {
        let (w, h) = self.output_shape();
        w * h
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("operator input", self.input_dim(), x.len())?;
        Ok(self.apply_raw(x))
    }

    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("operator output", self.output_dim(), y.len())?;
        Ok(self.adjoint_raw(y))
    }

    fn apply_raw(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            OperatorKind::Identity => x.to_vec(),
            OperatorKind::CircularBlur(k) => self.convolve(x, k, false),
            OperatorKind::Mask(keep) => x.iter().zip(keep).map(|(v, &k)| if k { *v } else { 0.0 }).collect(),
            OperatorKind::Downsample { factor, prefilter } => {
                let blurred = self.convolve(x, prefilter, false);
                let (ow, oh) = self.output_shape();
                let mut out = Vec::with_capacity(ow * oh);
                for y in 0..oh {
                    for x in 0..ow {
                        out.push(blurred[y * factor * self.width + x * factor]);
                    }
                }
                out
            }
        }
    }

    fn adjoint_raw(&self, y: &[f64]) -> Vec<f64> {
        match &self.kind {
            OperatorKind::Identity | OperatorKind::Mask(_) => self.apply_raw(y),
            OperatorKind::CircularBlur(k) => self.convolve(y, k, true),
            OperatorKind::Downsample { factor, prefilter } => {
                let (ow, oh) = self.output_shape();
                let mut up = vec![0.0; self.input_dim()];
                for yy in 0..oh {
                    for xx in 0..ow {
                        up[yy * factor * self.width + xx * factor] = y[yy * ow + xx];
                    }
                }
                self.convolve(&up, prefilter, true)
            }
        }
    }

    /// Circular convolution, or correlation (the adjoint) when `adjoint`.
    fn convolve(&self, x: &[f64], k: &Stencil, adjoint: bool) -> Vec<f64> {
        let (w, h) = (self.width as isize, self.height as isize);
        let sign = if adjoint { 1 } else { -1 };
        let mut out = vec![0.0; x.len()];
        for py in 0..h {
            for px in 0..w {
                out[(py * w + px) as usize] = k
                    .offsets()
                    .map(|(dx, dy, t)| {
                        let sx = (px + sign * dx).rem_euclid(w);
                        let sy = (py + sign * dy).rem_euclid(h);
                        t * x[(sy * w + sx) as usize]
                    })
                    .sum();
            }
        }
        out
    }
}

/// `f(x) = ½‖Hx − b‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTerm {
    op: ForwardOperator,
    observation: RealVector,
}

pub const CG_RELATIVE_TOLERANCE: f64 = 1e-10;

impl FidelityTerm {
    pub fn new(op: ForwardOperator, observation: RealVector) -> Result<Self> {
        check_dim("observation", op.output_dim(), observation.dim())?;
        Ok(Self { op, observation })
    }

    pub fn operator(&self) -> &ForwardOperator {
        &self.op
    }

    pub fn observation(&self) -> &RealVector {
        &self.observation
    }

    pub fn dim(&self) -> usize {
        self.op.input_dim()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.op.apply(x)?;
        r.iter_mut().zip(self.observation.iter()).for_each(|(a, b)| *a -= b);
        Ok(r)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        Ok(0.5 * dot(&r, &r))
    }

    /// `Hᵀ(Hx − b)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(x)?;
        self.op.apply_adjoint(&r)
    }

    /// `Hᵀb`, the back-projected observation.
    pub fn backprojection(&self) -> Vec<f64> {
        self.op.adjoint_raw(&self.observation)
    }

    /// `(HᵀH + ρI)z`.
    pub fn normal_apply(&self, rho: f64, z: &[f64]) -> Vec<f64> {
        let hz = self.op.apply_raw(z);
        let mut out = self.op.adjoint_raw(&hz);
        out.iter_mut().zip(z).for_each(|(o, zi)| *o += rho * zi);
        out
    }

    /// `Hᵀb + ρ·target`, the right-hand side of the prox normal equations.
    pub fn normal_rhs(&self, rho: f64, target: &[f64]) -> Vec<f64> {
        let mut rhs = self.backprojection();
        rhs.iter_mut().zip(target).for_each(|(r, t)| *r += rho * t);
        rhs
    }
}

/// Solves `(HᵀH + ρI)x = Hᵀb + ρ·target` by conjugate gradient, warm
/// started at `target`. Iteration cap is `10·d`.
pub fn prox_x_update(f: &FidelityTerm, rho: f64, target: &[f64]) -> Result<RealVector> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("rho", format!("must be positive and finite, got {rho}")));
    }
    check_dim("prox target", f.dim(), target.len())?;
    if let OperatorKind::Identity = f.op.kind {
        let x = f
            .observation
            .iter()
            .zip(target)
            .map(|(b, t)| (b + rho * t) / (1.0 + rho))
            .collect();
        return RealVector::new(x);
    }

    let rhs = f.normal_rhs(rho, target);
    let rhs_norm = euclidean_norm(&rhs);
    if rhs_norm == 0.0 {
        return Ok(RealVector::zeros(f.dim()));
    }
    let tol = CG_RELATIVE_TOLERANCE * rhs_norm;
    let max_iter = 10 * f.dim();

    let mut x = target.to_vec();
    let ax = f.normal_apply(rho, &x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while rr.sqrt() > tol {
        if iterations == max_iter {
            return Err(Error::SolverNotConverged {
                iterations,
                residual: rr.sqrt() / rhs_norm,
            });
        }
        let ap = f.normal_apply(rho, &p);
        let alpha = rr / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = rr_next;
        iterations += 1;
    }
    RealVector::new(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoundEstimate {
    /// `max ‖∇f(x)‖ / √d` over the samples.
    pub m_hat: f64,
    pub region: String,
    pub sample_count: usize,
}

pub fn estimate_assumption1_constant(
    f: &FidelityTerm,
    samples: &[RealVector],
    region: &str,
) -> Result<GradientBoundEstimate> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "must not be empty"));
    }
    let sqrt_d = (f.dim() as f64).sqrt();
    let mut m_hat = 0.0f64;
    for x in samples {
        m_hat = m_hat.max(euclidean_norm(&f.gradient(x)?) / sqrt_d);
    }
    Ok(GradientBoundEstimate {
        m_hat,
        region: region.to_string(),
        sample_count: samples.len(),
    })
}

/// Random vertices of the unit box `[0, 1]^d`, where the convex map
/// `x ↦ ‖∇f(x)‖` attains its maximum over the box.
pub fn box_vertex_samples(dim: usize, count: usize, seed: u64) -> Vec<RealVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
            RealVector::new(v).expect("box vertex is finite")
        })
        .collect()
}
