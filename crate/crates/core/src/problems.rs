//! Data terms `G` and the handles the solvers need from them.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_finite, check_len, Error, Result};

/// Result of an inexact proximal solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxStatus {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl ProxStatus {
    fn exact() -> Self {
        Self {
            converged: true,
            iterations: 0,
            residual: 0.0,
        }
    }
}

/// A convex data term `G` on vertex signals.
///
/// Solvers query the capabilities they need: proximal gradient methods use
/// `grad_gstar` and the curvature bounds of `G*`, PDHG uses `prox_g`.
pub trait DataTerm: Send + Sync {
    /// Dimension of the primal variable.
    fn dim(&self) -> usize;

    fn eval_g(&self, u: &[f64]) -> f64;

    fn eval_gstar(&self, w: &[f64]) -> f64;

    fn has_grad_gstar(&self) -> bool {
        false
    }

    /// Writes `grad G*(w)` to `out`.
    fn grad_gstar(&self, _w: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::Unsupported("gradient of the conjugate"))
    }

    fn has_prox_g(&self) -> bool {
        false
    }

    /// Writes `argmin_u G(u) + s/2 ||u - z||^2` to `out`. The incoming content
    /// of `out` may be used as a warm start.
    fn prox_g(&self, _z: &[f64], _s: f64, _out: &mut [f64]) -> Result<ProxStatus> {
        Err(Error::Unsupported("proximal map"))
    }

    /// Bounds `(l, L)` with `l I <= hess G* <= L I`, when `grad_gstar` is offered.
    fn curvature(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `kappa(G*) = L / l`.
pub fn conjugate_condition(term: &dyn DataTerm) -> Option<f64> {
    term.curvature().map(|(l, big_l)| big_l / l)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `G(u) = 1/2 ||u - f||^2`.
#[derive(Clone, Debug)]
pub struct RofDataTerm {
    f: Vec<f64>,
}

impl RofDataTerm {
    pub fn new(f: Vec<f64>) -> Result<Self> {
        check_finite(&f, "data vector")?;
        Ok(Self { f })
    }

    pub fn data(&self) -> &[f64] {
        &self.f
    }
}

impl DataTerm for RofDataTerm {
    fn dim(&self) -> usize {
        self.f.len()
    }

    fn eval_g(&self, u: &[f64]) -> f64 {
        0.5 * u.iter().zip(&self.f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    fn eval_gstar(&self, w: &[f64]) -> f64 {
        dot(&self.f, w) + 0.5 * norm_sq(w)
    }

    fn has_grad_gstar(&self) -> bool {
        true
    }

    fn grad_gstar(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.f.len(), w.len())?;
        check_len(self.f.len(), out.len())?;
        for ((o, a), b) in out.iter_mut().zip(w).zip(&self.f) {
            *o = a + b;
        }
        Ok(())
    }

    fn has_prox_g(&self) -> bool {
        true
    }

    fn prox_g(&self, z: &[f64], s: f64, out: &mut [f64]) -> Result<ProxStatus> {
        check_len(self.f.len(), z.len())?;
        check_len(self.f.len(), out.len())?;
        for ((o, a), b) in out.iter_mut().zip(z).zip(&self.f) {
            *o = (s * a + b) / (s + 1.0);
        }
        Ok(ProxStatus::exact())
    }

    fn curvature(&self) -> Option<(f64, f64)> {
        Some((1.0, 1.0))
    }
}

/// Row-major 2D convolution stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, taps: Vec<f64>) -> Result<Self> {
        check_len(width * height, taps.len())?;
        check_finite(&taps, "kernel")?;
        if width == 0 || height == 0 || taps.iter().all(|&t| t == 0.0) {
            return Err(Error::InvalidArgument("kernel must be nonzero".into()));
        }
        Ok(Self { width, height, taps })
    }

    pub fn identity() -> Self {
        Self {
            width: 1,
            height: 1,
            taps: vec![1.0],
        }
    }

    /// Horizontal line of `2 * radius + 1` uniform taps.
    pub fn motion_blur(radius: usize) -> Self {
        let len = 2 * radius + 1;
        Self {
            width: len,
            height: 1,
            taps: vec![1.0 / len as f64; len],
        }
    }

    /// Kernel by shape name: `identity` or `motion`.
    pub fn by_name(name: &str, radius: usize) -> Result<Self> {
        match name {
            "identity" => Ok(Self::identity()),
            "motion" => Ok(Self::motion_blur(radius)),
            other => Err(Error::InvalidArgument(format!("unknown kernel shape '{other}'"))),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Zero-padded full convolution `A: R^{w x h} -> R^{(w+kw-1) x (h+kh-1)}`.
#[derive(Clone, Debug)]
pub struct Convolution {
    width: usize,
    height: usize,
    kernel: Kernel,
}

impl Convolution {
    pub fn new(width: usize, height: usize, kernel: Kernel) -> Self {
        Self { width, height, kernel }
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn output_dims(&self) -> (usize, usize) {
        (
            self.width + self.kernel.width - 1,
            self.height + self.kernel.height - 1,
        )
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (ow, _) = self.output_dims();
        out.iter_mut().for_each(|x| *x = 0.0);
        let k = &self.kernel;
        for y in 0..self.height {
            for x in 0..self.width {
                let v = u[y * self.width + x];
                if v == 0.0 {
                    continue;
                }
                for b in 0..k.height {
                    let row = (y + b) * ow + x;
                    for a in 0..k.width {
                        out[row + a] += k.taps[b * k.width + a] * v;
                    }
                }
            }
        }
    }

    pub fn apply_adjoint(&self, v: &[f64], out: &mut [f64]) {
        let (ow, _) = self.output_dims();
        let k = &self.kernel;
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = 0.0;
                for b in 0..k.height {
                    let row = (y + b) * ow + x;
                    for a in 0..k.width {
                        acc += k.taps[b * k.width + a] * v[row + a];
                    }
                }
                out[y * self.width + x] = acc;
            }
        }
    }

    fn gram_apply(&self, u: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.apply(u, scratch);
        self.apply_adjoint(scratch, out);
    }

    fn dense(&self) -> DMatrix<f64> {
        let (ow, oh) = self.output_dims();
        let n = self.width * self.height;
        let mut m = DMatrix::zeros(ow * oh, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; ow * oh];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

const DENSE_GRAM_LIMIT: usize = 2500;

// Solver for A^T A u = b.
#[derive(Clone, Debug)]
enum GramSolver {
    // one-row kernels: A^T A is block diagonal with identical row blocks
    RowBlock(Cholesky<f64, Dyn>),
    Dense(Cholesky<f64, Dyn>),
    Iterative,
}

/// `G(u) = 1/2 ||A u - f||^2` with `A` a zero-padded full convolution.
#[derive(Clone, Debug)]
pub struct DeconvDataTerm {
    op: Convolution,
    f: Vec<f64>,
    gram: GramSolver,
    cg_tol: f64,
    cg_max_iter: usize,
}

impl DeconvDataTerm {
    /// `f` has the output dimensions of the full convolution.
    pub fn new(kernel: Kernel, width: usize, height: usize, f: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("empty image".into()));
        }
        let op = Convolution::new(width, height, kernel);
        let (ow, oh) = op.output_dims();
        check_len(ow * oh, f.len())?;
        check_finite(&f, "observation")?;
        let gram = if op.kernel.height == 1 {
            let row = Convolution::new(width, 1, op.kernel.clone()).dense();
            GramSolver::RowBlock(Self::factor(row)?)
        } else if width * height <= DENSE_GRAM_LIMIT {
            GramSolver::Dense(Self::factor(op.dense())?)
        } else {
            GramSolver::Iterative
        };
        Ok(Self {
            op,
            f,
            gram,
            cg_tol: 1e-12,
            cg_max_iter: 10,
        })
    }

    fn factor(a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
        (a.transpose() * &a)
            .cholesky()
            .ok_or_else(|| Error::Numerical("convolution Gram matrix is not positive definite".into()))
    }

    /// Inner conjugate gradient settings of `prox_g`.
    pub fn with_cg(mut self, tol: f64, max_iter: usize) -> Self {
        self.cg_tol = tol;
        self.cg_max_iter = max_iter;
        self
    }

    pub fn operator(&self) -> &Convolution {
        &self.op
    }

    pub fn observation(&self) -> &[f64] {
        &self.f
    }

    fn solve_gram(&self, b: &[f64]) -> Vec<f64> {
        match &self.gram {
            GramSolver::RowBlock(chol) => {
                let w = self.op.width;
                let mut out = vec![0.0; b.len()];
                for (src, dst) in b.chunks(w).zip(out.chunks_mut(w)) {
                    let x = chol.solve(&DVector::from_column_slice(src));
                    dst.copy_from_slice(x.as_slice());
                }
                out
            }
            GramSolver::Dense(chol) => chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec(),
            GramSolver::Iterative => {
                let mut x = vec![0.0; b.len()];
                self.cg(b, 0.0, &mut x, 1e-13, 10 * b.len());
                x
            }
        }
    }

    // CG on (A^T A + s I) x = b starting from x.
    fn cg(&self, b: &[f64], s: f64, x: &mut [f64], tol: f64, max_iter: usize) -> ProxStatus {
        let n = b.len();
        let (ow, oh) = self.op.output_dims();
        let mut scratch = vec![0.0; ow * oh];
        let mut ax = vec![0.0; n];
        let apply = |v: &[f64], out: &mut [f64], scratch: &mut [f64]| {
            self.op.gram_apply(v, scratch, out);
            for (o, vi) in out.iter_mut().zip(v) {
                *o += s * vi;
            }
        };
        apply(x, &mut ax, &mut scratch);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let threshold = tol * norm_sq(b).sqrt().max(1.0);
        let mut d = r.clone();
        let mut rr = norm_sq(&r);
        let mut iterations = 0;
        while rr.sqrt() > threshold && iterations < max_iter {
            apply(&d, &mut ax, &mut scratch);
            let alpha = rr / dot(&d, &ax);
            for i in 0..n {
                x[i] += alpha * d[i];
                r[i] -= alpha * ax[i];
            }
            let rr_new = norm_sq(&r);
            let beta = rr_new / rr;
            for i in 0..n {
                d[i] = r[i] + beta * d[i];
            }
            rr = rr_new;
            iterations += 1;
        }
        ProxStatus {
            converged: rr.sqrt() <= threshold,
            iterations,
            residual: rr.sqrt(),
        }
    }
}

impl DataTerm for DeconvDataTerm {
    fn dim(&self) -> usize {
        self.op.width * self.op.height
    }

    fn eval_g(&self, u: &[f64]) -> f64 {
        let mut au = vec![0.0; self.f.len()];
        self.op.apply(u, &mut au);
        0.5 * au.iter().zip(&self.f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    /// Exact conjugate: `<w, u> - G(u)` at `A^T A u = w + A^T f`.
    fn eval_gstar(&self, w: &[f64]) -> f64 {
        let mut rhs = vec![0.0; self.dim()];
        self.op.apply_adjoint(&self.f, &mut rhs);
        for (r, wi) in rhs.iter_mut().zip(w) {
            *r += wi;
        }
        let u = self.solve_gram(&rhs);
        dot(w, &u) - self.eval_g(&u)
    }

    fn has_prox_g(&self) -> bool {
        true
    }

    fn prox_g(&self, z: &[f64], s: f64, out: &mut [f64]) -> Result<ProxStatus> {
        check_len(self.dim(), z.len())?;
        check_len(self.dim(), out.len())?;
        let mut b = vec![0.0; self.dim()];
        self.op.apply_adjoint(&self.f, &mut b);
        for (bi, zi) in b.iter_mut().zip(z) {
            *bi += s * zi;
        }
        Ok(self.cg(&b, s, out, self.cg_tol, self.cg_max_iter))
    }
}

/// Random piecewise-constant phantom, blurred with `kernel` and corrupted by
/// Gaussian noise of standard deviation `noise_sigma`. Returns the data term
/// and the phantom.
pub fn synth_deconv_instance(
    width: usize,
    height: usize,
    kernel: Kernel,
    seed: u64,
    noise_sigma: f64,
) -> Result<(DeconvDataTerm, Vec<f64>)> {
    if width < 8 || height < 8 {
        return Err(Error::InvalidArgument(format!(
            "phantom needs at least 8x8 pixels, got {width}x{height}"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument("noise level must be finite and nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phantom = vec![0.1; width * height];
    let shapes = 3 + rng.random_range(0..4);
    for _ in 0..shapes {
        let x0 = rng.random_range(0..width - 2);
        let y0 = rng.random_range(0..height - 2);
        let x1 = rng.random_range(x0 + 2..=width);
        let y1 = rng.random_range(y0 + 2..=height);
        let level: f64 = rng.random_range(0.0..1.0);
        for y in y0..y1 {
            for x in x0..x1 {
                phantom[y * width + x] = level;
            }
        }
    }
    let op = Convolution::new(width, height, kernel.clone());
    let (ow, oh) = op.output_dims();
    let mut f = vec![0.0; ow * oh];
    op.apply(&phantom, &mut f);
    if noise_sigma > 0.0 {
        let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for v in &mut f {
            *v += noise.sample(&mut rng);
        }
    }
    Ok((DeconvDataTerm::new(kernel, width, height, f)?, phantom))
}

/// Plain-text PGM (P2), values mapped linearly from their range to 0..=255.
pub fn write_pgm(width: usize, height: usize, values: &[f64]) -> Result<String> {
    check_len(width * height, values.len())?;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in values.chunks(width) {
        let line: Vec<String> = row
            .iter()
            .map(|v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}
