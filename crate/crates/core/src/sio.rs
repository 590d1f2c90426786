//! Pointwise symbols of singular integral operators aI + b S on the embedded
//! graph: the Fourier symbol along an edge, the Mellin symbol matrices at a
//! vertex, and the ellipticity tests feeding the Fredholm verdicts.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::functions::{kappa, vertex_trace, FnError, PCFunction, Weight};
use crate::graph::{GraphPoint, GroupElement, MetricGraph, VertexStar};
use crate::mellin::MellinSymbol;
use crate::quad::GaussRule;

pub const POLE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SioError {
    #[error("symbol pole: zeta = {zeta} within {tol} of the imaginary integers")]
    SymbolPole { zeta: Complex64, tol: f64 },
    #[error("the point lies on a vertex")]
    PointIsVertex,
    #[error("quadrature tail estimate {tail} above tolerance {tol}")]
    QuadratureDiverged { tail: f64, tol: f64 },
    #[error(transparent)]
    Trace(#[from] FnError),
}

/// Kernel modulation phi on graph x R^2, evaluated per edge copy.
pub type ModFn = Arc<dyn Fn(usize, f64, &GroupElement, [f64; 2]) -> Complex64 + Send + Sync>;

/// The function phi(x, z) modulating the Cauchy kernel. `decay_order` is the
/// declared decay rate in z; `verify_decay` spot-checks it on sample grids.
#[derive(Clone)]
pub struct KernelModulation {
    pub graph: Arc<MetricGraph>,
    f: ModFn,
    pub decay_order: usize,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    /// Fitted constants C_N for N = 0..=n_max, from sup |phi| (1+|z|)^N over
    /// the sampled radii (max over x samples and z directions, derivative
    /// orders up to 2 in both slots).
    pub constants: Vec<f64>,
    pub radii: Vec<f64>,
    pub pass: bool,
}

impl KernelModulation {
    pub fn new(graph: Arc<MetricGraph>, f: ModFn, decay_order: usize) -> Self {
        KernelModulation {
            graph,
            f,
            decay_order,
        }
    }

    /// z-independent modulation; declared decay order 0.
    pub fn constant(graph: Arc<MetricGraph>, c: Complex64) -> Self {
        KernelModulation {
            graph,
            f: Arc::new(move |_, _, _, _| c),
            decay_order: 0,
        }
    }

    /// Build from a function of embedded position and kernel displacement.
    pub fn from_position_fn<F>(graph: Arc<MetricGraph>, g: F, decay_order: usize) -> Self
    where
        F: Fn([f64; 2], [f64; 2]) -> Complex64 + Send + Sync + 'static,
    {
        let gr = graph.clone();
        KernelModulation {
            graph,
            f: Arc::new(move |edge, t, offset, z| {
                let p = GraphPoint {
                    edge,
                    coord: t,
                    offset: *offset,
                };
                g(gr.position(&p), z)
            }),
            decay_order,
        }
    }

    pub fn eval(&self, x: &GraphPoint, z: [f64; 2]) -> Complex64 {
        (self.f)(x.edge, x.coord, &x.offset, z)
    }

    /// The trace phi(., 0) as a function on the graph.
    pub fn at_zero(&self) -> PCFunction {
        let f = self.f.clone();
        PCFunction::new(
            self.graph.clone(),
            Arc::new(move |e, t, g| f(e, t, g, [0.0, 0.0])),
        )
    }

    /// Sampled check of |d^a_x d^b_z phi(x, z)| <= C_N (1 + |z|)^{-N} for
    /// N <= n_max and derivative orders a, b <= 2. Passes when, for every N,
    /// the weighted sup over the shells is not attained in the outer third of
    /// the radius range, i.e. the bound does not degrade with |z|.
    pub fn verify_decay(&self, points: &[GraphPoint], n_max: usize, z_max: f64) -> DecayReport {
        let radii: Vec<f64> = (0..24).map(|k| z_max * ((k as f64 + 1.0) / 24.0)).collect();
        let dirs = [[1.0, 0.0], [0.0, 1.0], [0.7071067811865476, 0.7071067811865476]];
        let h = 1e-3;
        // sup over x samples, directions and derivative stencils per shell
        let mut shell_sup = vec![0.0f64; radii.len()];
        for (si, &rho) in radii.iter().enumerate() {
            let mut sup: f64 = 0.0;
            for x in points {
                for d in dirs {
                    let z = [rho * d[0], rho * d[1]];
                    let at = |dt: f64, dz: f64| {
                        let p = GraphPoint {
                            edge: x.edge,
                            coord: x.coord + dt,
                            offset: x.offset,
                        };
                        self.eval(&p, [z[0] + dz * d[0], z[1] + dz * d[1]])
                    };
                    for a in 0..3usize {
                        for b in 0..3usize {
                            let mut v = Complex64::new(0.0, 0.0);
                            // central difference tables up to order 2
                            let st: &[(f64, f64)] = match a {
                                0 => &[(0.0, 1.0)],
                                1 => &[(-1.0, -0.5), (1.0, 0.5)],
                                _ => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
                            };
                            let sz: &[(f64, f64)] = match b {
                                0 => &[(0.0, 1.0)],
                                1 => &[(-1.0, -0.5), (1.0, 0.5)],
                                _ => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
                            };
                            for &(ct, wt) in st {
                                for &(cz, wz) in sz {
                                    v += wt * wz * at(ct * h, cz * h);
                                }
                            }
                            let scale = h.powi(a as i32) * h.powi(b as i32);
                            sup = sup.max(v.norm() / scale);
                        }
                    }
                }
            }
            shell_sup[si] = sup;
        }
        let mut constants = Vec::with_capacity(n_max + 1);
        let mut pass = true;
        for n in 0..=n_max {
            let weighted: Vec<f64> = radii
                .iter()
                .zip(&shell_sup)
                .map(|(&rho, &m)| m * (1.0 + rho).powi(n as i32))
                .collect();
            let c = weighted.iter().cloned().fold(0.0, f64::max);
            let inner = weighted[..2 * weighted.len() / 3]
                .iter()
                .cloned()
                .fold(0.0, f64::max);
            if n <= self.decay_order && c > inner * (1.0 + 1e-9) {
                pass = false;
            }
            constants.push(c);
        }
        DecayReport {
            constants,
            radii,
            pass,
        }
    }
}

fn dist_to_i_integers(z: Complex64) -> f64 {
    (z.re * z.re + (z.im - z.im.round()).powi(2)).sqrt()
}

/// The kernel function of the vertex Mellin symbol: coth(pi zeta) for the
/// angular difference 0, e^{(pi - delta) zeta} / sinh(pi zeta) otherwise.
/// Large real parts take the asymptotic branch to dodge exp overflow.
pub fn nu(delta: f64, zeta: Complex64) -> Result<Complex64, SioError> {
    if dist_to_i_integers(zeta) < POLE_TOL {
        return Err(SioError::SymbolPole {
            zeta,
            tol: POLE_TOL,
        });
    }
    let pz = std::f64::consts::PI * zeta;
    if delta == 0.0 {
        if pz.re.abs() > 20.0 {
            return Ok(Complex64::new(pz.re.signum(), 0.0));
        }
        Ok(pz.cosh() / pz.sinh())
    } else {
        if pz.re.abs() > 300.0 {
            // sinh(pz) ~ s e^{s pz} / 2 with s the sign of the real part
            let s = pz.re.signum();
            let expo = (std::f64::consts::PI - delta) * zeta - s * pz;
            return Ok(2.0 * s * expo.exp());
        }
        Ok(((std::f64::consts::PI - delta) * zeta).exp() / pz.sinh())
    }
}

fn angular_difference(star: &VertexStar, j: usize, k: usize) -> f64 {
    if j == k {
        0.0
    } else {
        // canonical representative in (0, 2 pi); for angle-sorted stars this
        // is theta_j - theta_k when j > k and 2 pi + theta_j - theta_k when
        // j < k, and it keeps relabeled stars consistent
        (star.rays[j].angle - star.rays[k].angle).rem_euclid(2.0 * std::f64::consts::PI)
    }
}

/// Mellin symbol matrix of the pure singular operator S at the star's vertex:
/// entry (j, k) is epsilon_k nu(delta_jk, lambda + i (1/p + kappa(r))).
pub fn vertex_symbol_s(
    star: &VertexStar,
    p: f64,
    w: &Weight,
    r: f64,
    lambda: Complex64,
) -> Result<Array2<Complex64>, SioError> {
    let kap = kappa(w, r)?;
    let zeta = lambda + Complex64::new(0.0, 1.0 / p + kap);
    let n = star.valency();
    let mut m = Array2::zeros((n, n));
    for j in 0..n {
        for k in 0..n {
            m[(j, k)] = star.rays[k].sign * nu(angular_difference(star, j, k), zeta)?;
        }
    }
    Ok(m)
}

type VertexEval = Arc<dyn Fn(f64, Complex64) -> Result<Array2<Complex64>, SioError> + Send + Sync>;

/// A val x val Mellin symbol at a vertex, with the star geometry and weight
/// data it was built from.
#[derive(Clone)]
pub struct VertexSymbolMatrix {
    pub vertex: usize,
    pub star: VertexStar,
    pub p: f64,
    pub weight: Weight,
    eval: VertexEval,
}

impl VertexSymbolMatrix {
    pub fn size(&self) -> usize {
        self.star.valency()
    }

    pub fn eval(&self, r: f64, lambda: Complex64) -> Result<Array2<Complex64>, SioError> {
        (self.eval)(r, lambda)
    }

    /// View as a plain Mellin symbol; pole hits become NaN entries, which the
    /// downstream determinant scans count as skipped points.
    pub fn mellin_symbol(&self) -> MellinSymbol {
        let f = self.eval.clone();
        let n = self.size();
        MellinSymbol::new(
            n,
            Arc::new(move |r, l| {
                f(r, l).unwrap_or_else(|_| {
                    Array2::from_elem((n, n), Complex64::new(f64::NAN, f64::NAN))
                })
            }),
            None,
            false,
        )
    }
}

/// Vertex symbol of S alone as a matrix family in (r, lambda).
pub fn vertex_symbol_s_matrix(
    star: &VertexStar,
    p: f64,
    w: &Weight,
) -> VertexSymbolMatrix {
    let st = star.clone();
    let weight = w.clone();
    let wc = w.clone();
    VertexSymbolMatrix {
        vertex: star.vertex,
        star: st.clone(),
        p,
        weight,
        eval: Arc::new(move |r, l| vertex_symbol_s(&st, p, &wc, r, l)),
    }
}

/// Vertex symbol of A = aI + b S: diag of the a-traces plus the phi- and
/// b-traces row-scaling the S matrix. All traces are one-sided limits along
/// the rays, in the star's sorted order.
pub fn vertex_symbol_a(
    star: &VertexStar,
    a: &PCFunction,
    b: &PCFunction,
    phi: &KernelModulation,
    p: f64,
    w: &Weight,
) -> Result<VertexSymbolMatrix, SioError> {
    let graph = a.graph.clone();
    let ta = vertex_trace(a, star, &graph)?;
    let tb = vertex_trace(b, star, &graph)?;
    let tphi = vertex_trace(&phi.at_zero(), star, &graph)?;
    let st = star.clone();
    let wc = w.clone();
    let n = star.valency();
    Ok(VertexSymbolMatrix {
        vertex: star.vertex,
        star: star.clone(),
        p,
        weight: w.clone(),
        eval: Arc::new(move |r, l| {
            let s = vertex_symbol_s(&st, p, &wc, r, l)?;
            let mut m = Array2::zeros((n, n));
            for j in 0..n {
                for k in 0..n {
                    let mut v = tphi[j] * tb[j] * s[(j, k)];
                    if j == k {
                        v += ta[j];
                    }
                    m[(j, k)] = v;
                }
            }
            Ok(m)
        }),
    })
}

/// The two-valued symbol a(x) + b(x) phi(x, 0) sgn(xi) at an interior point.
#[derive(Debug, Clone, Copy)]
pub struct EdgeSymbol {
    /// Value for xi > 0 (and, by reporting convention, xi = 0).
    pub plus: Complex64,
    /// Value for xi < 0.
    pub minus: Complex64,
}

impl EdgeSymbol {
    pub fn at(&self, xi: f64) -> Complex64 {
        if xi >= 0.0 {
            self.plus
        } else {
            self.minus
        }
    }

    /// Both branches bounded away from zero.
    pub fn elliptic(&self, ell_tol: f64) -> bool {
        self.plus.norm() >= ell_tol && self.minus.norm() >= ell_tol
    }
}

pub fn edge_symbol(
    a: &PCFunction,
    b: &PCFunction,
    phi: &KernelModulation,
    x: &GraphPoint,
) -> Result<EdgeSymbol, SioError> {
    if a.graph.vertex_at(x, 1e-12).is_some() {
        return Err(SioError::PointIsVertex);
    }
    let av = a.eval(x);
    let bp = b.eval(x) * phi.eval(x, [0.0, 0.0]);
    Ok(EdgeSymbol {
        plus: av + bp,
        minus: av - bp,
    })
}

#[derive(Debug, Clone)]
pub struct PhiQuadConfig {
    /// Truncation radius of the principal value integral.
    pub z_max: f64,
    pub gl_order: usize,
    /// Upper bound on the panel width; shrinks further with |xi|.
    pub max_panel: f64,
    pub tail_tol: f64,
}

impl Default for PhiQuadConfig {
    fn default() -> Self {
        PhiQuadConfig {
            z_max: 40.0,
            gl_order: 16,
            max_panel: 0.5,
            tail_tol: 1e-3,
        }
    }
}

/// Fourier symbol of S restricted to the edge through x:
/// v.p. (1/pi i) int phi(x, z d) e^{i z xi} / z dz with d the edge direction.
/// The integrand is folded to (0, inf) by odd pairing, which removes the
/// singularity; returns the symbol and the distance |sigma - phi(x,0) sgn xi|
/// to its leading term.
pub fn fourier_symbol_phi(
    phi: &KernelModulation,
    x: &GraphPoint,
    xi: f64,
    cfg: &PhiQuadConfig,
) -> Result<(Complex64, f64), SioError> {
    if phi.graph.vertex_at(x, 1e-12).is_some() {
        return Err(SioError::PointIsVertex);
    }
    let d = phi.graph.edges[x.edge].direction;
    let sample = |z: f64| phi.eval(x, [z * d[0], z * d[1]]);
    // reject when the modulation has not decayed at the truncation radius
    let mut tail: f64 = 0.0;
    for k in 0..8 {
        let z = cfg.z_max * (1.0 + k as f64 / 7.0);
        tail = tail.max(sample(z).norm()).max(sample(-z).norm());
    }
    let tail = tail * 2.0 * std::f64::consts::LN_2 / std::f64::consts::PI;
    if tail > cfg.tail_tol {
        return Err(SioError::QuadratureDiverged {
            tail,
            tol: cfg.tail_tol,
        });
    }
    let width = cfg.max_panel.min(std::f64::consts::PI / (2.0 * xi.abs() + 1.0));
    let panels = (cfg.z_max / width).ceil() as usize;
    let rule = GaussRule::new(cfg.gl_order);
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a = cfg.z_max * p as f64 / panels as f64;
        let b = cfg.z_max * (p + 1) as f64 / panels as f64;
        for (z, wq) in rule.mapped(a, b) {
            let osc = Complex64::new(0.0, z * xi).exp();
            acc += wq * (sample(z) * osc - sample(-z) * osc.conj()) / z;
        }
    }
    let sigma = acc / Complex64::new(0.0, std::f64::consts::PI);
    let sgn = if xi >= 0.0 { 1.0 } else { -1.0 };
    let q = (sigma - sgn * sample(0.0)).norm();
    Ok((sigma, q))
}
