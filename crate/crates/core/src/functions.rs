//! Coefficient and weight function classes: piecewise-smooth functions with
//! one-sided vertex limits, slowly oscillating functions, and admissible
//! radial weights w = exp(sigma).

use crate::graph::{GraphPoint, GroupElement, MetricGraph, VertexStar};
use num_complex::Complex64;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FnError {
    #[error("one-sided limit missing at vertex {vertex}, ray {ray}")]
    MissingLimit { vertex: usize, ray: usize },
    #[error("radius {0} outside the weight domain")]
    OutOfDomain(f64),
    #[error("no Cauchy subsequence within tolerance {tol} over {tried} shifts")]
    NoConvergentSubsequence { tol: f64, tried: usize },
}

pub type EdgeFn = Arc<dyn Fn(usize, f64, &GroupElement) -> Complex64 + Send + Sync>;

/// A function smooth on every open edge, evaluated per edge copy. One-sided
/// vertex limits are taken numerically along rays.
#[derive(Clone)]
pub struct PCFunction {
    pub graph: Arc<MetricGraph>,
    f: EdgeFn,
}

impl PCFunction {
    pub fn new(graph: Arc<MetricGraph>, f: EdgeFn) -> Self {
        PCFunction { graph, f }
    }

    pub fn constant(graph: Arc<MetricGraph>, c: Complex64) -> Self {
        PCFunction {
            graph,
            f: Arc::new(move |_, _, _| c),
        }
    }

    /// Build from a function of the embedded position in the plane.
    pub fn from_position_fn<F>(graph: Arc<MetricGraph>, g: F) -> Self
    where
        F: Fn([f64; 2]) -> Complex64 + Send + Sync + 'static,
    {
        let gr = graph.clone();
        PCFunction {
            graph,
            f: Arc::new(move |edge, t, offset| {
                let p = GraphPoint {
                    edge,
                    coord: t,
                    offset: *offset,
                };
                g(gr.position(&p))
            }),
        }
    }

    pub fn eval(&self, p: &GraphPoint) -> Complex64 {
        (self.f)(p.edge, p.coord, &p.offset)
    }

    pub fn eval_parts(&self, edge: usize, t: f64, offset: &GroupElement) -> Complex64 {
        (self.f)(edge, t, offset)
    }

    /// Pointwise product, staying in the class.
    pub fn product(&self, other: &PCFunction) -> PCFunction {
        let a = self.f.clone();
        let b = other.f.clone();
        PCFunction {
            graph: self.graph.clone(),
            f: Arc::new(move |e, t, g| a(e, t, g) * b(e, t, g)),
        }
    }
}

/// One-sided limits of `f` at the vertex, as a diagonal in the ray order of
/// the star. The limit along each ray is evaluated on a shrinking radius
/// sequence and must stabilize.
pub fn vertex_trace(
    f: &PCFunction,
    star: &VertexStar,
    graph: &MetricGraph,
) -> Result<Vec<Complex64>, FnError> {
    let mut out = Vec::with_capacity(star.valency());
    for j in 0..star.valency() {
        // Richardson extrapolation on a fixed shrinking radius ladder; the
        // fixed radii keep the trace a function algebra homomorphism to
        // rounding accuracy.
        let sample = |k: i32| {
            let r = star.eps * 0.25f64.powi(k);
            f.eval(&star.ray_point(j, r, graph))
        };
        let (v0, v1, v2) = (sample(12), sample(13), sample(14));
        let limit = (4.0 * v2 - v1) / 3.0;
        let check = (4.0 * v1 - v0) / 3.0;
        if (limit - check).norm() > 1e-8 * (1.0 + limit.norm()) {
            return Err(FnError::MissingLimit {
                vertex: star.vertex,
                ray: j,
            });
        }
        out.push(limit);
    }
    Ok(out)
}

/// A function considered as a candidate member of the slowly oscillating
/// class: same data as a piecewise smooth function, but evaluated on cell
/// point plus arbitrary offset.
#[derive(Clone)]
pub struct SOFunction(pub PCFunction);

impl SOFunction {
    pub fn eval(&self, y: &GraphPoint, alpha: &GroupElement) -> Complex64 {
        self.0.eval_parts(y.edge, y.coord, &y.offset.add(alpha))
    }
}

#[derive(Debug, Clone)]
pub struct SoShellReport {
    pub shift: GroupElement,
    /// Shell-wise sup defect, aligned with the requested radii.
    pub defects: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SoReport {
    pub shells: Vec<SoShellReport>,
    pub radii: Vec<i64>,
    pub tol: f64,
    pub pass: bool,
}

fn shell_points(rank: usize, radius: i64, cap: usize) -> Vec<GroupElement> {
    if rank == 1 {
        return vec![GroupElement::new(&[radius]), GroupElement::new(&[-radius])];
    }
    let mut ring = Vec::new();
    for a in -radius..=radius {
        for b in [-radius, radius] {
            ring.push(GroupElement::new(&[a, b]));
        }
    }
    for b in (-radius + 1)..radius {
        for a in [-radius, radius] {
            ring.push(GroupElement::new(&[a, b]));
        }
    }
    if ring.len() > cap {
        let stride = ring.len() / cap;
        ring = ring.into_iter().step_by(stride.max(1)).collect();
    }
    ring
}

/// Shell-wise slow oscillation defect sup_y |f(y + beta + alpha) - f(y + alpha)|
/// over |alpha| = radius.
pub fn check_slowly_oscillating(
    f: &SOFunction,
    shifts: &[GroupElement],
    radii: &[i64],
    tol: f64,
) -> SoReport {
    let cell = f.0.graph.sample_cell(4);
    let rank = f.0.graph.rank;
    let mut shells = Vec::new();
    let mut pass = true;
    for beta in shifts {
        let mut defects = Vec::new();
        for &radius in radii {
            let mut sup: f64 = 0.0;
            for alpha in shell_points(rank, radius, 16) {
                for y in &cell {
                    let d = (f.eval(y, &beta.add(&alpha)) - f.eval(y, &alpha)).norm();
                    sup = sup.max(d);
                }
            }
            defects.push(sup);
        }
        if *defects.last().unwrap() > tol {
            pass = false;
        }
        shells.push(SoShellReport {
            shift: *beta,
            defects,
        });
    }
    SoReport {
        shells,
        radii: radii.to_vec(),
        tol,
        pass,
    }
}

#[derive(Debug, Clone)]
pub struct LimitFunction {
    /// Limit values at the requested cell sample points.
    pub values: Vec<Complex64>,
    /// Largest deviation of the accepted subsequence from its anchor.
    pub achieved_tol: f64,
    /// Indices into the shift sequence that form the accepted subsequence.
    pub subsequence: Vec<usize>,
}

/// Extract a limit function along the shift sequence `h` on the sample
/// region `region`. Greedy Cauchy selection: anchor at the deepest sample and
/// collect earlier samples within `tol` of it; the limit is the average of
/// the last two accepted samples.
pub fn limit_function(
    f: &SOFunction,
    h: &[GroupElement],
    region: &[GraphPoint],
    tol: f64,
) -> Result<LimitFunction, FnError> {
    assert!(!h.is_empty() && !region.is_empty());
    let samples: Vec<Vec<Complex64>> = h
        .iter()
        .map(|g| region.iter().map(|p| f.eval(p, g)).collect())
        .collect();
    let sup_diff = |a: &[Complex64], b: &[Complex64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max)
    };
    let anchor = samples.last().unwrap();
    let mut accepted = Vec::new();
    let mut achieved: f64 = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let d = sup_diff(s, anchor);
        if d <= tol {
            accepted.push(i);
            achieved = achieved.max(d);
        }
    }
    if accepted.len() < 2 {
        return Err(FnError::NoConvergentSubsequence {
            tol,
            tried: h.len(),
        });
    }
    let last_two = &accepted[accepted.len() - 2..];
    let values: Vec<Complex64> = (0..region.len())
        .map(|k| {
            let s: Complex64 = last_two.iter().map(|&i| samples[i][k]).sum();
            s / last_two.len() as f64
        })
        .collect();
    Ok(LimitFunction {
        values,
        achieved_tol: achieved,
        subsequence: accepted,
    })
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An admissible weight near a vertex, given through sigma with w = exp(sigma)
/// on a punctured radius interval (0, eps). The target interval holds the
/// admissible range of kappa(r) = r sigma'(r).
#[derive(Clone)]
pub struct Weight {
    pub sigma: RadialFn,
    pub dsigma: Option<RadialFn>,
    /// (c, d) with 0 inside.
    pub interval: (f64, f64),
    pub eps: f64,
}

impl Weight {
    /// The trivial weight w = 1.
    pub fn one(interval: (f64, f64), eps: f64) -> Self {
        Weight {
            sigma: Arc::new(|_| 0.0),
            dsigma: Some(Arc::new(|_| 0.0)),
            interval,
            eps,
        }
    }

    /// Power weight w(r) = r^kappa.
    pub fn power(kappa: f64, interval: (f64, f64), eps: f64) -> Self {
        Weight {
            sigma: Arc::new(move |r| kappa * r.ln()),
            dsigma: Some(Arc::new(move |r| kappa / r)),
            interval,
            eps,
        }
    }

    pub fn w(&self, r: f64) -> f64 {
        (self.sigma)(r).exp()
    }
}

/// kappa(r) = r sigma'(r). Closed form when the derivative is declared, else
/// a 4th-order central difference in log r.
pub fn kappa(w: &Weight, r: f64) -> Result<f64, FnError> {
    if !(r > 0.0 && r < w.eps) {
        return Err(FnError::OutOfDomain(r));
    }
    if let Some(d) = &w.dsigma {
        return Ok(r * d(r));
    }
    let h = 1e-4;
    let s = |k: f64| (w.sigma)(r * (k * h).exp());
    Ok((-s(2.0) + 8.0 * s(1.0) - 8.0 * s(-1.0) + s(-2.0)) / (12.0 * h))
}

/// Second logarithmic derivative (r d/dr)^2 sigma via differences of kappa.
pub fn kappa_log_derivative(w: &Weight, r: f64) -> Result<f64, FnError> {
    let h = 1e-3f64;
    let kp = kappa(w, r * h.exp())?;
    let km = kappa(w, r * (-h).exp())?;
    Ok((kp - km) / (2.0 * h))
}

#[derive(Debug, Clone)]
pub struct WeightReport {
    pub inf_kappa: f64,
    pub sup_kappa: f64,
    /// max |(r d/dr)^2 sigma| over the smallest grid radii.
    pub so_defect: f64,
    pub interval: (f64, f64),
    pub delta_margin: f64,
    pub pass: bool,
}

/// Geometric grid in (0, eps) accumulating at 0.
pub fn geometric_grid(eps: f64, points: usize, shrink_to: f64) -> Vec<f64> {
    let top = 0.5 * eps;
    let q = (shrink_to / top).powf(1.0 / (points as f64 - 1.0));
    (0..points).map(|j| top * q.powi(j as i32)).collect()
}

/// Sampled admissibility check: kappa range inside the interval with margin,
/// and the second logarithmic derivative vanishing at the smallest radii.
pub fn check_weight_class(
    w: &Weight,
    interval: (f64, f64),
    r_grid: &[f64],
    delta_margin: f64,
    tol_so: f64,
) -> Result<WeightReport, FnError> {
    let mut inf = f64::INFINITY;
    let mut sup = f64::NEG_INFINITY;
    for &r in r_grid {
        let k = kappa(w, r)?;
        inf = inf.min(k);
        sup = sup.max(k);
    }
    let mut sorted = r_grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut so_defect: f64 = 0.0;
    for &r in sorted.iter().take(5) {
        so_defect = so_defect.max(kappa_log_derivative(w, r)?.abs());
    }
    let pass = inf >= interval.0 + delta_margin
        && sup <= interval.1 - delta_margin
        && so_defect <= tol_so;
    Ok(WeightReport {
        inf_kappa: inf,
        sup_kappa: sup,
        so_defect,
        interval,
        delta_margin,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{honeycomb_graph, line_graph};
    use num_complex::Complex64 as C;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn vertex_trace_constant_and_sign() {
        let g = line_graph();
        let star = g.vertex_star(0, 0.25).unwrap();
        let f = PCFunction::constant(g.clone(), c(2.5));
        let tr = vertex_trace(&f, &star, &g).unwrap();
        assert_eq!(tr, vec![c(2.5), c(2.5)]);

        // sign of the embedded first coordinate: +1 on the right ray
        // (angle 0), -1 on the left ray (angle pi)
        let sgn = PCFunction::from_position_fn(g.clone(), |p| c(if p[0] >= 0.0 { 1.0 } else { -1.0 }));
        let tr = vertex_trace(&sgn, &star, &g).unwrap();
        assert_eq!(tr, vec![c(1.0), c(-1.0)]);
    }

    #[test]
    fn vertex_trace_matches_small_radius_oracle() {
        let g = honeycomb_graph();
        let star = g.vertex_star(0, 0.3).unwrap();
        let f = PCFunction::from_position_fn(g.clone(), |p| {
            (C::i() * p[1].atan2(p[0])).exp()
        });
        let tr = vertex_trace(&f, &star, &g).unwrap();
        for (j, v) in tr.iter().enumerate() {
            let p = star.ray_point(j, 1e-6, &g);
            let oracle = f.eval(&p);
            assert!((v - oracle).norm() < 1e-5, "ray {j}");
        }
    }

    #[test]
    fn vertex_trace_product_homomorphism() {
        let g = honeycomb_graph();
        let star = g.vertex_star(1, 0.3).unwrap();
        let f1 = PCFunction::from_position_fn(g.clone(), |p| c(2.0 + p[0].sin()));
        let f2 = PCFunction::from_position_fn(g.clone(), |p| C::new(p[1].cos(), 0.5));
        let t1 = vertex_trace(&f1, &star, &g).unwrap();
        let t2 = vertex_trace(&f2, &star, &g).unwrap();
        let tp = vertex_trace(&f1.product(&f2), &star, &g).unwrap();
        for j in 0..star.valency() {
            assert!((tp[j] - t1[j] * t2[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn kappa_power_weight() {
        let w = Weight::power(0.3, (-0.5, 0.5), 0.5);
        for r in [1e-6, 1e-3, 0.1, 0.4] {
            assert!((kappa(&w, r).unwrap() - 0.3).abs() < 1e-14);
        }
        let w0 = Weight::one((-0.5, 0.5), 0.5);
        assert_eq!(kappa(&w0, 0.1).unwrap(), 0.0);
        assert!(matches!(kappa(&w0, 0.6), Err(FnError::OutOfDomain(_))));
    }

    #[test]
    fn kappa_finite_difference_matches_closed_form() {
        // sigma with a slowly varying part, closed form withheld
        let sigma = |r: f64| 0.2 * r.ln() + ((1.0 / r).ln().ln()).sin() * 0.1;
        let w = Weight {
            sigma: Arc::new(sigma),
            dsigma: None,
            interval: (-0.5, 0.5),
            eps: 0.1,
        };
        // closed form: 0.2 - 0.1 cos(log log(1/r)) / log(1/r)
        for r in [1e-8, 1e-5, 1e-3] {
            let exact = 0.2 - 0.1 * ((1.0f64 / r).ln().ln()).cos() / (1.0f64 / r).ln();
            assert!(
                (kappa(&w, r).unwrap() - exact).abs() < 1e-8,
                "r = {r}"
            );
        }
    }

    #[test]
    fn kappa_additive_for_power_weights() {
        let w1 = Weight::power(0.2, (-0.5, 0.5), 0.5);
        let w2 = Weight::power(-0.45, (-0.5, 0.5), 0.5);
        let s1 = w1.sigma.clone();
        let s2 = w2.sigma.clone();
        let sum = Weight {
            sigma: Arc::new(move |r| s1(r) + s2(r)),
            dsigma: None,
            interval: (-0.5, 0.5),
            eps: 0.5,
        };
        for r in [1e-5, 1e-2, 0.2] {
            let k = kappa(&sum, r).unwrap();
            let k12 = kappa(&w1, r).unwrap() + kappa(&w2, r).unwrap();
            assert!((k - k12).abs() < 1e-10);
        }
    }

    #[test]
    fn weight_class_reports() {
        let grid = geometric_grid(0.5, 40, 1e-6 * 0.5);
        // power weight inside (-1/2, 1/2)
        let w = Weight::power(0.3, (-0.5, 0.5), 0.5);
        let rep = check_weight_class(&w, (-0.5, 0.5), &grid, 0.01, 1e-3).unwrap();
        assert!(rep.pass, "{rep:?}");
        // sigma(r) = 1/r: kappa = -1/r unbounded
        let w = Weight {
            sigma: Arc::new(|r: f64| 1.0 / r),
            dsigma: Some(Arc::new(|r: f64| -1.0 / (r * r))),
            interval: (-0.5, 0.5),
            eps: 0.5,
        };
        let rep = check_weight_class(&w, (-0.5, 0.5), &grid, 0.01, 1e-3).unwrap();
        assert!(!rep.pass);
        // damped oscillation on top of a power part
        let w = Weight {
            sigma: Arc::new(|r: f64| 0.3 * r.ln() + (((1.0 / r).ln()).ln()).sin()),
            dsigma: None,
            interval: (-0.5, 0.5),
            eps: 0.1,
        };
        let grid = geometric_grid(0.1, 40, 1e-8);
        let rep = check_weight_class(&w, (-0.5, 0.5), &grid, 0.01, 1e-2).unwrap();
        // kappa = 0.3 - cos(log log (1/r))/log(1/r), inside the interval
        assert!(rep.pass, "{rep:?}");
        assert!(rep.inf_kappa > 0.0 && rep.sup_kappa < 0.45, "{rep:?}");
    }

    #[test]
    fn so_defect_zero_for_periodic() {
        let g = line_graph();
        let f = SOFunction(PCFunction::from_position_fn(g, |p| {
            c((2.0 * std::f64::consts::PI * p[0]).sin())
        }));
        let rep = check_slowly_oscillating(
            &f,
            &[GroupElement::new(&[1]), GroupElement::new(&[2])],
            &[1, 10, 100],
            1e-12,
        );
        assert!(rep.pass);
        for s in &rep.shells {
            for d in &s.defects {
                assert!(*d < 1e-13);
            }
        }
    }

    #[test]
    fn so_log_oscillation_passes_plain_sine_fails() {
        let g = line_graph();
        let slow = SOFunction(PCFunction::from_position_fn(g.clone(), |p| {
            c((1.0 + p[0].abs()).ln().sin())
        }));
        let radii = [10, 100, 1000];
        let rep = check_slowly_oscillating(&slow, &[GroupElement::new(&[1])], &radii, 2e-3);
        assert!(rep.pass, "{:?}", rep.shells);
        let fast = SOFunction(PCFunction::from_position_fn(g, |p| c(p[0].abs().sin())));
        let rep = check_slowly_oscillating(&fast, &[GroupElement::new(&[1])], &radii, 2e-3);
        assert!(!rep.pass);
    }

    #[test]
    fn limit_function_periodic_and_arctan() {
        let g = line_graph();
        let region = g.sample_cell(5);
        let per = SOFunction(PCFunction::from_position_fn(g.clone(), |p| {
            c((2.0 * std::f64::consts::PI * p[0]).cos())
        }));
        let h: Vec<GroupElement> = (0..22).map(|k| GroupElement::new(&[1i64 << k])).collect();
        let lim = limit_function(&per, &h, &region, 1e-8).unwrap();
        for (p, v) in region.iter().zip(&lim.values) {
            assert!((v - per.eval(p, &GroupElement::zero(1))).norm() < 1e-8);
        }

        let atanf = SOFunction(PCFunction::from_position_fn(g, |p| c(3.0 + p[0].atan())));
        let lim = limit_function(&atanf, &h, &region, 1e-6).unwrap();
        for v in &lim.values {
            assert!(
                (v.re - (3.0 + std::f64::consts::FRAC_PI_2)).abs() < 1e-6,
                "{}",
                v.re
            );
        }
    }

    #[test]
    fn limit_function_log_oscillation_two_limits() {
        let g = line_graph();
        let region = g.sample_cell(3);
        let f = SOFunction(PCFunction::from_position_fn(g, |p| {
            c((1.0 + p[0].abs()).ln().sin())
        }));
        // shift sequences spaced by e^{2 pi}, pinning sin(log) at a phase
        let mk = |phase: f64| -> Vec<GroupElement> {
            (1..=4)
                .map(|k| {
                    let r = (phase + 2.0 * std::f64::consts::PI * k as f64).exp();
                    GroupElement::new(&[r as i64])
                })
                .collect()
        };
        let l0 = limit_function(&f, &mk(0.0), &region, 1e-2).unwrap();
        let l1 = limit_function(&f, &mk(std::f64::consts::FRAC_PI_2), &region, 1e-2).unwrap();
        // each limit is constant on the region
        for l in [&l0, &l1] {
            for v in &l.values {
                assert!((v - l.values[0]).norm() < 2e-2);
            }
        }
        // tail evaluation oracle at the deepest shift
        let deep = f.eval(
            &region[0],
            &GroupElement::new(&[(8.0 * std::f64::consts::PI).exp() as i64]),
        );
        assert!((l0.values[0] - deep).norm() < 2e-2);
        assert!((l0.values[0] - l1.values[0]).norm() > 0.5);
    }

    #[test]
    fn limit_function_shift_invariance_for_so() {
        let g = line_graph();
        let f = SOFunction(PCFunction::from_position_fn(g.clone(), |p| {
            c(3.0 + p[0].atan())
        }));
        let h: Vec<GroupElement> = (0..22).map(|k| GroupElement::new(&[1i64 << k])).collect();
        let base = g.sample_cell(3);
        let mut region = base.clone();
        for b in [1i64, 2, -1, -2] {
            for p in &base {
                region.push(g.act(p, &GroupElement::new(&[b])).unwrap());
            }
        }
        let lim = limit_function(&f, &h, &region, 1e-5).unwrap();
        let n = base.len();
        for shifted in 1..=4 {
            for k in 0..n {
                let d = (lim.values[k] - lim.values[shifted * n + k]).norm();
                assert!(d <= lim.achieved_tol + 1e-5);
            }
        }
    }

    #[test]
    fn no_convergent_subsequence_for_fast_oscillation() {
        let g = line_graph();
        let region = g.sample_cell(2);
        let f = SOFunction(PCFunction::from_position_fn(g, |p| c(p[0].abs().sin())));
        // linear shifts: sin keeps moving, nothing stays near the anchor
        let h: Vec<GroupElement> = (1..6).map(|m| GroupElement::new(&[m])).collect();
        assert!(matches!(
            limit_function(&f, &h, &region, 1e-9),
            Err(FnError::NoConvergentSubsequence { .. })
        ));
    }
}
