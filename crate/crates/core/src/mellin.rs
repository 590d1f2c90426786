//! Matrix Mellin symbol calculus on the multiplicative half-line.
//!
//! A Mellin pseudodifferential operator with symbol a(r, lambda) acts as
//!
//!   (op(a)u)(r) = (1/2pi) int int a(r, lambda) (r/rho)^{i lambda} u(rho)
//!                 d rho / rho  d lambda.
//!
//! Under r = e^{-x} this is a Fourier operator with symbol
//! a(e^{-x}, -xi), which is how everything here is discretized: uniform
//! grids in x, FFT in the r-independent case, pointwise frequency synthesis
//! otherwise. Composition and adjoint return tabulated symbols.

use crate::functions::{geometric_grid, kappa, Weight};
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MellinError {
    #[error("derivative order ({0}, {1}) not available (max 4)")]
    DerivativeUnavailable(usize, usize),
    #[error("grid too coarse: top-band energy fraction {fraction:.3e} exceeds {limit:.1e}")]
    GridTooCoarse { fraction: f64, limit: f64 },
    #[error("quadrature tail {tail:.3e} above tolerance {tol:.1e}")]
    QuadratureDiverged { tail: f64, tol: f64 },
    #[error("weight exponent range [{lo:.4}, {hi:.4}] leaves the analytic strip ({c:.4}, {d:.4})")]
    StripViolation { lo: f64, hi: f64, c: f64, d: f64 },
    #[error("symbol size mismatch")]
    SizeMismatch,
}

pub type SymbolFn = Arc<dyn Fn(f64, Complex64) -> Array2<Complex64> + Send + Sync>;

/// A matrix-valued Mellin symbol. The evaluator accepts complex lambda;
/// callers must keep Im(lambda) inside `analytic_strip` when one is declared
/// and on the real line otherwise.
#[derive(Clone)]
pub struct MellinSymbol {
    pub size: usize,
    pub analytic_strip: Option<(f64, f64)>,
    pub r_independent: bool,
    eval: SymbolFn,
}

impl MellinSymbol {
    pub fn new(
        size: usize,
        eval: SymbolFn,
        analytic_strip: Option<(f64, f64)>,
        r_independent: bool,
    ) -> Self {
        MellinSymbol {
            size,
            analytic_strip,
            r_independent,
            eval,
        }
    }

    pub fn scalar<F>(f: F, analytic_strip: Option<(f64, f64)>, r_independent: bool) -> Self
    where
        F: Fn(f64, Complex64) -> Complex64 + Send + Sync + 'static,
    {
        MellinSymbol {
            size: 1,
            analytic_strip,
            r_independent,
            eval: Arc::new(move |r, l| Array2::from_elem((1, 1), f(r, l))),
        }
    }

    pub fn constant(m: Array2<Complex64>) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols());
        MellinSymbol {
            size: n,
            analytic_strip: Some((f64::NEG_INFINITY, f64::INFINITY)),
            r_independent: true,
            eval: Arc::new(move |_, _| m.clone()),
        }
    }

    pub fn identity(n: usize) -> Self {
        MellinSymbol::constant(Array2::eye(n))
    }

    pub fn eval(&self, r: f64, lambda: Complex64) -> Array2<Complex64> {
        (self.eval)(r, lambda)
    }

    pub fn eval_scalar(&self, r: f64, lambda: Complex64) -> Complex64 {
        debug_assert_eq!(self.size, 1);
        (self.eval)(r, lambda)[(0, 0)]
    }
}

/// Which derivative count carries the bracket weight in the seminorm sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeminormWeight {
    /// Weight <lambda>^beta on the (r d/dr)^beta term.
    RDerivative,
    /// Weight <lambda>^alpha on the lambda-derivative term.
    LambdaDerivative,
}

fn bracket(l: f64) -> f64 {
    (1.0 + l * l).sqrt()
}

/// Complex tanh with saturation: the library routine works with e^{2x} and
/// overflows to NaN for moderately large real parts.
pub fn ctanh(z: Complex64) -> Complex64 {
    if z.re.abs() > 20.0 {
        Complex64::new(z.re.signum(), 0.0)
    } else {
        z.tanh()
    }
}

/// Mixed derivative (r d/dr)^beta (d/d lambda)^alpha by nested central
/// differences: logarithmic steps in r, plain steps in lambda.
pub fn symbol_derivative(
    a: &MellinSymbol,
    r: f64,
    lambda: f64,
    alpha: usize,
    beta: usize,
) -> Result<Array2<Complex64>, MellinError> {
    if alpha > 4 || beta > 4 {
        return Err(MellinError::DerivativeUnavailable(alpha, beta));
    }
    fn rec(
        a: &MellinSymbol,
        log_r: f64,
        lambda: f64,
        alpha: usize,
        beta: usize,
    ) -> Array2<Complex64> {
        if beta > 0 {
            let h = 1e-3;
            let p = rec(a, log_r + h, lambda, alpha, beta - 1);
            let m = rec(a, log_r - h, lambda, alpha, beta - 1);
            (p - m) / Complex64::new(2.0 * h, 0.0)
        } else if alpha > 0 {
            let h = 1e-3;
            let p = rec(a, log_r, lambda + h, alpha - 1, 0);
            let m = rec(a, log_r, lambda - h, alpha - 1, 0);
            (p - m) / Complex64::new(2.0 * h, 0.0)
        } else {
            a.eval(log_r.exp(), Complex64::new(lambda, 0.0))
        }
    }
    Ok(rec(a, r.ln(), lambda, alpha, beta))
}

/// Gridded seminorm |a|_{l1,l2}: max over entries of the sup over the grid of
/// sum_{alpha <= l1, beta <= l2} |(r d_r)^beta d_lambda^alpha a| <lambda>^w
/// with the weighted exponent chosen by `convention`.
pub fn seminorm(
    a: &MellinSymbol,
    l1: usize,
    l2: usize,
    r_grid: &[f64],
    lambda_grid: &[f64],
    convention: SeminormWeight,
) -> Result<f64, MellinError> {
    if l1 > 4 || l2 > 4 {
        return Err(MellinError::DerivativeUnavailable(l1, l2));
    }
    let mut best: f64 = 0.0;
    for &r in r_grid {
        for &l in lambda_grid {
            let mut per_entry = Array2::<f64>::zeros((a.size, a.size));
            for alpha in 0..=l1 {
                for beta in 0..=l2 {
                    let d = symbol_derivative(a, r, l, alpha, beta)?;
                    let w = match convention {
                        SeminormWeight::RDerivative => bracket(l).powi(beta as i32),
                        SeminormWeight::LambdaDerivative => bracket(l).powi(alpha as i32),
                    };
                    for i in 0..a.size {
                        for j in 0..a.size {
                            per_entry[(i, j)] += d[(i, j)].norm() * w;
                        }
                    }
                }
            }
            for v in per_entry.iter() {
                best = best.max(*v);
            }
        }
    }
    Ok(best)
}

/// Uniform grid in x = -log r.
#[derive(Clone, Debug)]
pub struct LogGrid {
    pub x_min: f64,
    pub dx: f64,
    pub n: usize,
}

impl LogGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Self {
        assert!(n.is_power_of_two());
        LogGrid {
            x_min,
            dx: (x_max - x_min) / n as f64,
            n,
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn r(&self, j: usize) -> f64 {
        (-self.x(j)).exp()
    }

    /// Frequency of FFT bin k, wrapped to the symmetric range.
    pub fn xi(&self, k: usize) -> f64 {
        let k = if k <= self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        };
        2.0 * std::f64::consts::PI * k as f64 / (self.n as f64 * self.dx)
    }

    /// Sample a function of r on the grid.
    pub fn sample<F: Fn(f64) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        (0..self.n).map(|j| f(self.r(j))).collect()
    }
}

fn fft(data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(data.len())
    } else {
        planner.plan_fft_forward(data.len())
    };
    plan.process(data);
    if inverse {
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// Apply op(a) to samples of a (vector-valued) function on the log grid.
/// `u` has one row per component. FFT multiplier path for r-independent
/// symbols, pointwise frequency synthesis otherwise.
pub fn apply_mellin(
    a: &MellinSymbol,
    u: &Array2<Complex64>,
    grid: &LogGrid,
) -> Result<Array2<Complex64>, MellinError> {
    let n = a.size;
    if u.nrows() != n || u.ncols() != grid.n {
        return Err(MellinError::SizeMismatch);
    }
    let nn = grid.n;
    // forward transforms per component
    let mut hats: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut row: Vec<Complex64> = u.row(c).to_vec();
        fft(&mut row, false);
        hats.push(row);
    }
    // aliasing detector on the top decile of frequencies
    let mut total = 0.0;
    let mut top = 0.0;
    let cut = (0.9 * (nn / 2) as f64) as i64;
    for c in 0..n {
        for k in 0..nn {
            let e = hats[c][k].norm_sqr();
            total += e;
            let kk = if k <= nn / 2 {
                k as i64
            } else {
                nn as i64 - k as i64
            };
            if kk >= cut {
                top += e;
            }
        }
    }
    if total > 0.0 && top / total > 1e-2 {
        return Err(MellinError::GridTooCoarse {
            fraction: top / total,
            limit: 1e-2,
        });
    }

    let mut out = Array2::<Complex64>::zeros((n, nn));
    if a.r_independent {
        let mut rows: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); nn]; n];
        for k in 0..nn {
            let m = a.eval(1.0, Complex64::new(-grid.xi(k), 0.0));
            for i in 0..n {
                let mut acc = Complex64::default();
                for j in 0..n {
                    acc += m[(i, j)] * hats[j][k];
                }
                rows[i][k] = acc;
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            fft(row, true);
            for k in 0..nn {
                out[(i, k)] = row[k];
            }
        }
    } else {
        let tau = 2.0 * std::f64::consts::PI / nn as f64;
        for j in 0..nn {
            let r = grid.r(j);
            let mut acc = vec![Complex64::default(); n];
            for k in 0..nn {
                let m = a.eval(r, Complex64::new(-grid.xi(k), 0.0));
                let phase = Complex64::from_polar(1.0, tau * (k * j % nn) as f64);
                for i in 0..n {
                    let mut s = Complex64::default();
                    for c in 0..n {
                        s += m[(i, c)] * hats[c][k];
                    }
                    acc[i] += s * phase;
                }
            }
            for i in 0..n {
                out[(i, j)] = acc[i] / nn as f64;
            }
        }
    }
    Ok(out)
}

/// A symbol tabulated on a (log r, lambda) grid, read back through bicubic
/// (Catmull-Rom) interpolation with clamping outside the grid.
pub struct TabulatedSymbol {
    pub size: usize,
    pub log_r0: f64,
    pub d_log_r: f64,
    pub nr: usize,
    pub lambda0: f64,
    pub d_lambda: f64,
    pub nl: usize,
    /// Row-major over (ir, il, i, j).
    pub data: Vec<Complex64>,
}

fn catmull_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

impl TabulatedSymbol {
    fn index(&self, ir: usize, il: usize, i: usize, j: usize) -> usize {
        ((ir * self.nl + il) * self.size + i) * self.size + j
    }

    pub fn eval(&self, r: f64, lambda: f64) -> Array2<Complex64> {
        let n = self.size;
        let pos = |v: f64, v0: f64, dv: f64, count: usize| -> (i64, f64) {
            let t = ((v - v0) / dv).clamp(0.0, (count - 1) as f64);
            let i = (t.floor() as i64).min(count as i64 - 2).max(0);
            (i, t - i as f64)
        };
        let (ir, tr) = pos(r.ln(), self.log_r0, self.d_log_r, self.nr);
        let (il, tl) = pos(lambda, self.lambda0, self.d_lambda, self.nl);
        let wr = catmull_weights(tr);
        let wl = catmull_weights(tl);
        let clamp = |i: i64, count: usize| i.clamp(0, count as i64 - 1) as usize;
        let mut out = Array2::<Complex64>::zeros((n, n));
        for (dr, wri) in wr.iter().enumerate() {
            let rr = clamp(ir + dr as i64 - 1, self.nr);
            for (dl, wli) in wl.iter().enumerate() {
                let ll = clamp(il + dl as i64 - 1, self.nl);
                let w = wri * wli;
                if w == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] += self.data[self.index(rr, ll, i, j)] * w;
                    }
                }
            }
        }
        out
    }

    pub fn into_symbol(self) -> MellinSymbol {
        let n = self.size;
        let me = Arc::new(self);
        MellinSymbol::new(
            n,
            Arc::new(move |r, l| me.eval(r, l.re)),
            None,
            false,
        )
    }
}

/// Tabulation window for symbols returned by compose/adjoint.
#[derive(Clone, Debug)]
pub struct TabGrid {
    pub log_r_min: f64,
    pub log_r_max: f64,
    pub nr: usize,
    pub lambda_max: f64,
    pub nl: usize,
}

impl TabGrid {
    pub fn log_r(&self, i: usize) -> f64 {
        self.log_r_min + (self.log_r_max - self.log_r_min) * i as f64 / (self.nr - 1) as f64
    }
    pub fn lambda(&self, i: usize) -> f64 {
        -self.lambda_max + 2.0 * self.lambda_max * i as f64 / (self.nl - 1) as f64
    }
}

/// Quadrature configuration for the composition formula.
#[derive(Clone, Debug)]
pub struct ComposeConfig {
    /// Half-width of the log rho range.
    pub s_half: f64,
    /// Number of log rho samples (power of two).
    pub s_points: usize,
    /// Truncation of the eta principal-value integral.
    pub eta_max: f64,
    pub eta_panels: usize,
    pub gl_order: usize,
    /// Transition scale of the smoothed step used to split off the limits of
    /// b at 0 and infinity.
    pub smoothing: f64,
    pub tail_tol: f64,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            s_half: 16.0,
            s_points: 2048,
            eta_max: 40.0,
            eta_panels: 80,
            gl_order: 8,
            smoothing: 1.0,
            tail_tol: 1e-6,
        }
    }
}

/// Composition symbol of op(a)op(b).
///
/// The inner rho-integral is the Fourier transform in s = log rho of
/// f(s) = b(r e^s, lambda). f tends to limits at both ends, so it is split
/// into a constant, a smoothed step carrying the jump, and a decaying rest:
/// the first two have closed-form transforms (the step via the distributional
/// transform of tanh, integrated against a by an odd-pairing principal-value
/// rule), the rest goes through an FFT. When b is r-independent the integral
/// collapses and the exact product a*b is returned.
pub fn compose(
    a: &MellinSymbol,
    b: &MellinSymbol,
    tab: &TabGrid,
    cfg: &ComposeConfig,
) -> Result<MellinSymbol, MellinError> {
    if a.size != b.size {
        return Err(MellinError::SizeMismatch);
    }
    let n = a.size;
    if b.r_independent {
        let (ae, be) = (a.eval.clone(), b.eval.clone());
        return Ok(MellinSymbol::new(
            n,
            Arc::new(move |r, l| ae(r, l).dot(&be(1.0, l))),
            a.analytic_strip,
            a.r_independent,
        ));
    }

    let np = cfg.s_points;
    let ds = 2.0 * cfg.s_half / np as f64;
    let s0 = -cfg.s_half;
    let rule = crate::quad::GaussRule::new(cfg.gl_order);
    let t = cfg.smoothing;

    let mut data = vec![Complex64::default(); tab.nr * tab.nl * n * n];
    let mut worst_tail: f64 = 0.0;
    for ir in 0..tab.nr {
        let r = tab.log_r(ir).exp();
        for il in 0..tab.nl {
            let lam = Complex64::new(tab.lambda(il), 0.0);
            // sample f(s) = b(r e^s, lambda)
            let f: Vec<Array2<Complex64>> = (0..np)
                .map(|m| b.eval(r * (s0 + m as f64 * ds).exp(), lam))
                .collect();
            let c_minus = f[0].clone();
            let c_plus = f[np - 1].clone();
            let jump = &c_plus - &c_minus;
            // boundary flatness check (FFT wrap-around control)
            let edge = np / 50;
            for m in 1..edge {
                let d1 = (&f[m] - &c_minus).iter().map(|v| v.norm()).fold(0.0, f64::max);
                let d2 = (&f[np - 1 - m] - &c_plus)
                    .iter()
                    .map(|v| v.norm())
                    .fold(0.0, f64::max);
                worst_tail = worst_tail.max(d1).max(d2);
            }
            // g = f - c_minus - jump * step
            let mut g: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); np]; n * n];
            for m in 0..np {
                let s = s0 + m as f64 * ds;
                let step = 0.5 * (1.0 + (s / t).tanh());
                for i in 0..n {
                    for j in 0..n {
                        g[i * n + j][m] =
                            f[m][(i, j)] - c_minus[(i, j)] - jump[(i, j)] * step;
                    }
                }
            }
            for row in g.iter_mut() {
                fft(row, false);
            }
            // convolution of a with the transform of g:
            // (1/N) sum_k e^{-i eta_k s0} a(r, lambda + eta_k) G_k
            let mut conv = Array2::<Complex64>::zeros((n, n));
            for k in 0..np {
                let kk = if k <= np / 2 {
                    k as i64
                } else {
                    k as i64 - np as i64
                };
                let eta = 2.0 * std::f64::consts::PI * kk as f64 / (np as f64 * ds);
                let am = a.eval(r, lam + eta);
                let phase = Complex64::from_polar(1.0, -eta * s0);
                let mut gm = Array2::<Complex64>::zeros((n, n));
                for i in 0..n {
                    for j in 0..n {
                        gm[(i, j)] = g[i * n + j][k];
                    }
                }
                conv += &(am.dot(&gm) * phase);
            }
            conv /= Complex64::new(np as f64, 0.0);
            // principal value against the step transform, odd pairing
            let mut pv = Array2::<Complex64>::zeros((n, n));
            let h = cfg.eta_max / cfg.eta_panels as f64;
            for p in 0..cfg.eta_panels {
                let a0 = p as f64 * h;
                for (eta, w) in rule.mapped(a0, a0 + h) {
                    let diff = a.eval(r, lam + eta) - a.eval(r, lam - eta);
                    let kern = w / (std::f64::consts::PI * eta * t / 2.0).sinh();
                    pv += &(diff * Complex64::new(kern, 0.0));
                }
            }
            let a0m = a.eval(r, lam);
            let c = a0m.dot(&c_minus)
                + a0m.dot(&jump) * Complex64::new(0.5, 0.0)
                + pv.dot(&jump) * Complex64::new(0.0, -t / 4.0)
                + conv;
            for i in 0..n {
                for j in 0..n {
                    data[((ir * tab.nl + il) * n + i) * n + j] = c[(i, j)];
                }
            }
        }
    }
    if worst_tail > cfg.tail_tol {
        return Err(MellinError::QuadratureDiverged {
            tail: worst_tail,
            tol: cfg.tail_tol,
        });
    }
    Ok(TabulatedSymbol {
        size: n,
        log_r0: tab.log_r_min,
        d_log_r: (tab.log_r_max - tab.log_r_min) / (tab.nr - 1) as f64,
        nr: tab.nr,
        lambda0: -tab.lambda_max,
        d_lambda: 2.0 * tab.lambda_max / (tab.nl - 1) as f64,
        nl: tab.nl,
        data,
    }
    .into_symbol())
}

/// Adjoint symbol of op(a) with respect to the invariant-measure pairing.
/// For r-independent symbols this is the conjugate transpose. Otherwise the
/// operator is discretized on a log grid, conjugate-transposed as a matrix,
/// and its symbol is read back off the central region of the grid.
pub fn adjoint(
    a: &MellinSymbol,
    _p: f64,
    grid: &LogGrid,
) -> Result<MellinSymbol, MellinError> {
    let n = a.size;
    if a.r_independent {
        let ae = a.eval.clone();
        return Ok(MellinSymbol::new(
            n,
            Arc::new(move |_, l| {
                let m = ae(1.0, l.conj());
                let mut out = Array2::<Complex64>::zeros((m.nrows(), m.ncols()));
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        out[(i, j)] = m[(j, i)].conj();
                    }
                }
                out
            }),
            a.analytic_strip,
            true,
        ));
    }
    let nn = grid.n;
    // kernel rows t_j[d] with M[j, m] = t_j[(j - m) mod N]
    let mut t: Vec<Vec<Array2<Complex64>>> = Vec::with_capacity(nn);
    for j in 0..nn {
        let r = grid.r(j);
        let mut rows: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); nn]; n * n];
        for k in 0..nn {
            let m = a.eval(r, Complex64::new(-grid.xi(k), 0.0));
            for i in 0..n {
                for c in 0..n {
                    rows[i * n + c][k] = m[(i, c)];
                }
            }
        }
        for row in rows.iter_mut() {
            fft(row, true);
        }
        let mut tj = Vec::with_capacity(nn);
        for d in 0..nn {
            let mut m = Array2::<Complex64>::zeros((n, n));
            for i in 0..n {
                for c in 0..n {
                    m[(i, c)] = rows[i * n + c][d];
                }
            }
            tj.push(m);
        }
        t.push(tj);
    }
    // adjoint symbol on the central half of the grid:
    // b(x_j, xi_l) = sum_d conj-transpose(t_{(j+d)%N}[d]) e^{2 pi i l d / N},
    // an inverse FFT over d scaled by N
    let j_lo = nn / 4;
    let j_hi = 3 * nn / 4;
    let nr = j_hi - j_lo;
    let mut lam_sorted: Vec<(f64, usize)> = (0..nn).map(|k| (-grid.xi(k), k)).collect();
    lam_sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let nl = nn;
    let mut data = vec![Complex64::default(); nr * nl * n * n];
    for (jr, j) in (j_lo..j_hi).enumerate() {
        let mut rows: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); nn]; n * n];
        for d in 0..nn {
            let src = &t[(j + d) % nn][d];
            for i in 0..n {
                for c in 0..n {
                    // conjugate transpose of the block
                    rows[i * n + c][d] = src[(c, i)].conj();
                }
            }
        }
        for row in rows.iter_mut() {
            fft(row, true);
            for v in row.iter_mut() {
                *v *= nn as f64;
            }
        }
        // bin l of the inverse FFT corresponds to xi_l, i.e. lambda = -xi_l
        for (il, &(_, k)) in lam_sorted.iter().enumerate() {
            for i in 0..n {
                for c in 0..n {
                    data[((jr * nl + il) * n + i) * n + c] = rows[i * n + c][k];
                }
            }
        }
    }
    // x decreasing in r: log r = -x, so reorder rows by log r
    let log_r_of = |j: usize| -grid.x(j);
    let (lr_min, lr_max) = (log_r_of(j_hi - 1), log_r_of(j_lo));
    let mut flipped = vec![Complex64::default(); data.len()];
    for jr in 0..nr {
        let src = nr - 1 - jr;
        let chunk = nl * n * n;
        flipped[jr * chunk..(jr + 1) * chunk]
            .copy_from_slice(&data[src * chunk..(src + 1) * chunk]);
    }
    Ok(TabulatedSymbol {
        size: n,
        log_r0: lr_min,
        d_log_r: (lr_max - lr_min) / (nr - 1) as f64,
        nr,
        lambda0: lam_sorted[0].0,
        d_lambda: lam_sorted[1].0 - lam_sorted[0].0,
        nl,
        data: flipped,
    }
    .into_symbol())
}

/// The kappa range of a weight over a geometric grid accumulating at 0.
fn kappa_range(w: &Weight) -> (f64, f64) {
    let grid = geometric_grid(w.eps, 60, 1e-8 * w.eps);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in grid {
        if let Ok(k) = kappa(w, r) {
            lo = lo.min(k);
            hi = hi.max(k);
        }
    }
    (lo, hi)
}

/// Leading conjugation symbol b0(r, lambda) = a(r, lambda + i kappa(r)) of
/// w op(a) w^{-1}. The class-E0 remainder is not reconstructed; use
/// [`conjugation_defect`] for an operator-level error estimate.
pub fn conjugate_by_weight(
    a: &MellinSymbol,
    w: &Weight,
) -> Result<MellinSymbol, MellinError> {
    let strip = a.analytic_strip.unwrap_or((0.0, 0.0));
    let (lo, hi) = kappa_range(w);
    if lo < strip.0 || hi > strip.1 {
        return Err(MellinError::StripViolation {
            lo,
            hi,
            c: strip.0,
            d: strip.1,
        });
    }
    let ae = a.eval.clone();
    let wc = w.clone();
    let n = a.size;
    let r_ind = a.r_independent && w.dsigma.is_some() && {
        // constant kappa keeps r-independence
        let (klo, khi) = kappa_range(w);
        (khi - klo).abs() < 1e-14
    };
    Ok(MellinSymbol::new(
        n,
        Arc::new(move |r, l| {
            let rr = r.clamp(1e-300, wc.eps * (1.0 - 1e-12));
            let k = kappa(&wc, rr).unwrap_or(0.0);
            ae(r, l + Complex64::new(0.0, k))
        }),
        Some((strip.0 - lo, strip.1 - hi)),
        r_ind,
    ))
}

/// Operator-level conjugation defect sup |w op(a) w^{-1} u - op(b0) u| /
/// sup |u| on a Gaussian test function, both sides evaluated by the same
/// frequency synthesis.
pub fn conjugation_defect(a: &MellinSymbol, w: &Weight, b0: &MellinSymbol) -> f64 {
    assert_eq!(a.size, 1, "defect probe is scalar");
    let x0 = 2.0;
    let u = |x: f64| (-(x - x0) * (x - x0)).exp();
    // sigma and kappa as functions of x = -log r
    let sig = |x: f64| (w.sigma)((-x).exp());
    let kap = |x: f64| kappa(w, (-x).exp()).unwrap_or(0.0);

    // Fourier transform of W^{-1} u by trapezoid over the effective support
    let ny = 1600;
    let ly = 8.0;
    let dy = 2.0 * ly / ny as f64;
    let nxi = 1024;
    let xi_max = 16.0;
    let dxi = 2.0 * xi_max / nxi as f64;
    let mut hat_wu = vec![Complex64::default(); nxi];
    let mut hat_u = vec![Complex64::default(); nxi];
    for (k, hw) in hat_wu.iter_mut().enumerate() {
        let xi = -xi_max + k as f64 * dxi;
        let mut s_w = Complex64::default();
        let mut s_u = Complex64::default();
        for m in 0..ny {
            let y = x0 - ly + (m as f64 + 0.5) * dy;
            let ph = Complex64::from_polar(1.0, -xi * y);
            s_w += (-sig(y)).exp() * u(y) * ph;
            s_u += u(y) * ph;
        }
        *hw = s_w * dy;
        hat_u[k] = s_u * dy;
    }
    let mut defect: f64 = 0.0;
    let nx = 33;
    for jx in 0..nx {
        let x = x0 - 2.0 + 4.0 * jx as f64 / (nx - 1) as f64;
        let r = (-x).exp();
        let mut lhs = Complex64::default();
        let mut rhs = Complex64::default();
        for k in 0..nxi {
            let xi = -xi_max + k as f64 * dxi;
            let ph = Complex64::from_polar(1.0, xi * x);
            lhs += a.eval_scalar(r, Complex64::new(-xi, 0.0)) * hat_wu[k] * ph;
            rhs += b0.eval_scalar(r, Complex64::new(-xi, 0.0)) * hat_u[k] * ph;
        }
        let scale = dxi / (2.0 * std::f64::consts::PI);
        let v = sig(x).exp() * lhs * scale - rhs * scale;
        let _ = kap;
        defect = defect.max(v.norm());
    }
    defect
}

#[derive(Debug, Clone)]
pub struct InvertibilityReport {
    pub inf_det: f64,
    pub pass: bool,
    pub threshold: f64,
    /// Grid points where the determinant was not finite (symbol poles).
    pub skipped: usize,
}

/// Local invertibility at 0: gridded infimum of |det a(r, lambda + i kappa(r))|
/// over a geometric r grid and a lambda grid.
pub fn local_invertibility_zero(
    a: &MellinSymbol,
    w: &Weight,
    r_grid: &[f64],
    lambda_grid: &[f64],
    threshold: f64,
) -> Result<InvertibilityReport, MellinError> {
    if let Some(strip) = a.analytic_strip {
        let (lo, hi) = kappa_range(w);
        if lo < strip.0 || hi > strip.1 {
            return Err(MellinError::StripViolation {
                lo,
                hi,
                c: strip.0,
                d: strip.1,
            });
        }
    }
    let mut inf = f64::INFINITY;
    let mut skipped = 0usize;
    for &r in r_grid {
        let k = kappa(w, r).unwrap_or(0.0);
        for &l in lambda_grid {
            let m = a.eval(r, Complex64::new(l, k));
            let det = determinant(&m);
            if det.is_finite() {
                inf = inf.min(det);
            } else {
                skipped += 1;
            }
        }
    }
    Ok(InvertibilityReport {
        inf_det: inf,
        pass: inf >= threshold,
        threshold,
        skipped,
    })
}

fn determinant(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    match n {
        1 => m[(0, 0)].norm(),
        2 => (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm(),
        _ => {
            // LU with partial pivoting
            let mut a = m.clone();
            let mut det = Complex64::new(1.0, 0.0);
            for col in 0..n {
                let mut piv = col;
                for rrow in col + 1..n {
                    if a[(rrow, col)].norm() > a[(piv, col)].norm() {
                        piv = rrow;
                    }
                }
                if piv != col {
                    for j in 0..n {
                        let tmp = a[(col, j)];
                        a[(col, j)] = a[(piv, j)];
                        a[(piv, j)] = tmp;
                    }
                    det = -det;
                }
                let d = a[(col, col)];
                if d.norm() == 0.0 {
                    return 0.0;
                }
                det *= d;
                for rrow in col + 1..n {
                    let f = a[(rrow, col)] / d;
                    for j in col..n {
                        let v = a[(col, j)];
                        a[(rrow, j)] = a[(rrow, j)] - f * v;
                    }
                }
            }
            det.norm()
        }
    }
}

/// A lambda grid offset from symmetric pole locations.
pub fn offset_lambda_grid(half_width: f64, points: usize) -> Vec<f64> {
    let d = 2.0 * half_width / points as f64;
    (0..points)
        .map(|j| -half_width + (j as f64 + 0.5) * d)
        .collect()
}
