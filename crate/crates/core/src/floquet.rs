//! Floquet reduction of periodic band operators: fiber families over the
//! torus, fiber spectra and invertibility margins, limit coefficient
//! extraction, and essential spectrum clouds.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::{Eig, Eigh, SVD, UPLO};
use num_complex::Complex64;
use thiserror::Error;

use crate::assemble::{BandOperator, Mesh};
use crate::functions::{limit_function, FnError, PCFunction, SOFunction};
use crate::graph::{GraphPoint, GroupElement};

#[derive(Debug, Error)]
pub enum FloquetError {
    #[error("coefficient is not periodic: defect {defect} at lattice generator {generator}")]
    NotPeriodic { generator: usize, defect: f64 },
    #[error("tau component {index} has modulus {modulus}, not on the torus")]
    OffTorus { index: usize, modulus: f64 },
    #[error(transparent)]
    Fn(#[from] FnError),
}

/// The fibered form of a periodic operator a I + b T: kernel blocks M_gamma
/// plus coefficient samples at the mesh nodes. The fiber at tau is
/// diag(a) + diag(b) sum_gamma M_gamma tau^gamma.
pub struct FiberFamily {
    pub mesh: Arc<Mesh>,
    pub rank: usize,
    pub blocks: BTreeMap<[i64; 2], Array2<Complex64>>,
    pub tail_bound: f64,
    /// Multiplication part at the nodes.
    pub a: Vec<Complex64>,
    /// Coefficient in front of the kernel part, at the nodes.
    pub b: Vec<Complex64>,
}

fn sample_nodes(f: &PCFunction, mesh: &Mesh) -> Vec<Complex64> {
    (0..mesh.n0()).map(|i| f.eval(&mesh.point(i))).collect()
}

fn periodicity_defect(f: &PCFunction, mesh: &Mesh) -> Option<(usize, f64)> {
    for k in 0..mesh.graph.rank {
        let mut gen = [0i64; 2];
        gen[k] = 1;
        let g = GroupElement {
            coords: gen,
            rank: mesh.graph.rank,
        };
        let mut defect: f64 = 0.0;
        for i in 0..mesh.n0() {
            let p = mesh.point(i);
            let shifted = GraphPoint {
                edge: p.edge,
                coord: p.coord,
                offset: g,
            };
            defect = defect.max((f.eval(&shifted) - f.eval(&p)).norm());
        }
        if defect > 1e-10 {
            return Some((k, defect));
        }
    }
    None
}

/// Identify the blocks of a periodic band operator as Floquet kernel blocks.
/// Optional coefficients are sampled at the nodes and must be periodic.
pub fn fiber_blocks(
    band: &BandOperator,
    a: Option<&PCFunction>,
    b: Option<&PCFunction>,
) -> Result<FiberFamily, FloquetError> {
    let mesh = band.mesh.clone();
    let n = mesh.n0();
    for f in [a, b].into_iter().flatten() {
        if let Some((generator, defect)) = periodicity_defect(f, &mesh) {
            return Err(FloquetError::NotPeriodic { generator, defect });
        }
    }
    let av = a
        .map(|f| sample_nodes(f, &mesh))
        .unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); n]);
    let bv = b
        .map(|f| sample_nodes(f, &mesh))
        .unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); n]);
    Ok(FiberFamily {
        rank: mesh.graph.rank,
        blocks: band.blocks.clone(),
        tail_bound: band.tail_bound,
        a: av,
        b: bv,
        mesh,
    })
}

/// Limit operator of a I + b T along the shift sequence h: the SO
/// coefficients are replaced by their extracted limits on the cell, while the
/// translation-invariant kernel blocks pass through unchanged. The output is
/// periodic by construction.
pub fn limit_operator_band(
    band: &BandOperator,
    a: &SOFunction,
    b: &SOFunction,
    h: &[GroupElement],
    tol: f64,
) -> Result<FiberFamily, FloquetError> {
    let mesh = band.mesh.clone();
    let region: Vec<GraphPoint> = (0..mesh.n0()).map(|i| mesh.point(i)).collect();
    let la = limit_function(a, h, &region, tol)?;
    let lb = limit_function(b, h, &region, tol)?;
    Ok(FiberFamily {
        rank: mesh.graph.rank,
        blocks: band.blocks.clone(),
        tail_bound: band.tail_bound,
        a: la.values,
        b: lb.values,
        mesh,
    })
}

impl FiberFamily {
    pub fn n0(&self) -> usize {
        self.mesh.n0()
    }

    /// Fiber matrix at a torus point, in the weighted quadrature
    /// representation (similar to the plain sampling, so spectra agree).
    pub fn fiber_at(&self, tau: &[Complex64]) -> Result<Array2<Complex64>, FloquetError> {
        assert_eq!(tau.len(), self.rank);
        for (index, t) in tau.iter().enumerate() {
            let modulus = t.norm();
            if (modulus - 1.0).abs() > 1e-9 {
                return Err(FloquetError::OffTorus { index, modulus });
            }
        }
        let n = self.n0();
        let mut m = Array2::zeros((n, n));
        for (gamma, block) in &self.blocks {
            let mut phase = Complex64::new(1.0, 0.0);
            for k in 0..self.rank {
                phase *= tau[k].powi(gamma[k] as i32);
            }
            m.scaled_add(phase, block);
        }
        for i in 0..n {
            let si = self.mesh.nodes[i].weight.sqrt();
            for j in 0..n {
                let sj = self.mesh.nodes[j].weight.sqrt();
                m[(i, j)] *= self.b[i] * si / sj;
            }
            m[(i, i)] += self.a[i];
        }
        Ok(m)
    }

    /// The torus grid point with the given per-dimension indices.
    pub fn tau_point(&self, grid: usize, idx: &[usize]) -> Vec<Complex64> {
        idx.iter()
            .map(|&j| Complex64::from_polar(1.0, TAU * j as f64 / grid as f64))
            .collect()
    }

    fn grid_indices(&self, grid: usize) -> Vec<Vec<usize>> {
        if self.rank == 1 {
            (0..grid).map(|j| vec![j]).collect()
        } else {
            let mut out = Vec::with_capacity(grid * grid);
            for j in 0..grid {
                for k in 0..grid {
                    out.push(vec![j, k]);
                }
            }
            out
        }
    }
}

fn hermitian_defect(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    d
}

pub fn fiber_eigenvalues(m: &Array2<Complex64>) -> Vec<Complex64> {
    let scale = m.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    if hermitian_defect(m) <= 1e-10 * scale.max(1.0) {
        let (ev, _) = m.eigh(UPLO::Lower).expect("eigh failed");
        ev.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    } else {
        let (ev, _) = m.eig().expect("eig failed");
        ev.to_vec()
    }
}

pub fn smallest_singular_value(m: &Array2<Complex64>) -> f64 {
    let (_, s, _) = m.svd(false, false).expect("svd failed");
    s.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Fiber eigenvalue cloud over a uniform torus grid, with each point tagged
/// by the flat grid index of its fiber.
#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    pub cloud: Vec<(Complex64, usize)>,
    pub tau_grid: usize,
    pub rank: usize,
    pub tail_bound: f64,
    /// Per probe value: (probe, min over tau of sigma_min(mu - probe),
    /// flat argmin index).
    pub margins: Vec<(Complex64, f64, usize)>,
}

impl SpectrumEstimate {
    /// Rows "re,im,tau_index".
    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,tau_index\n");
        for (lambda, idx) in &self.cloud {
            s.push_str(&format!("{},{},{}\n", lambda.re, lambda.im, idx));
        }
        s
    }

    pub fn margins_csv(&self) -> String {
        let mut s = String::from("probe_re,probe_im,margin,argmin_tau\n");
        for (probe, margin, idx) in &self.margins {
            s.push_str(&format!("{},{},{},{}\n", probe.re, probe.im, margin, idx));
        }
        s
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.cloud.iter().map(|(l, _)| *l).collect()
    }
}

/// Eigenvalue cloud of the fibers over the torus grid, plus margin scans for
/// the probe values.
pub fn essential_spectrum(
    family: &FiberFamily,
    tau_grid: usize,
    probes: &[Complex64],
) -> Result<SpectrumEstimate, FloquetError> {
    let mut cloud = Vec::new();
    let mut margins: Vec<(Complex64, f64, usize)> =
        probes.iter().map(|&p| (p, f64::INFINITY, 0)).collect();
    for (flat, idx) in family.grid_indices(tau_grid).iter().enumerate() {
        let tau = family.tau_point(tau_grid, idx);
        let m = family.fiber_at(&tau)?;
        for lambda in fiber_eigenvalues(&m) {
            cloud.push((lambda, flat));
        }
        for (probe, margin, argmin) in margins.iter_mut() {
            let mut shifted = m.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] -= *probe;
            }
            let s = smallest_singular_value(&shifted);
            if s < *margin {
                *margin = s;
                *argmin = flat;
            }
        }
    }
    Ok(SpectrumEstimate {
        cloud,
        tau_grid,
        rank: family.rank,
        tail_bound: family.tail_bound,
        margins,
    })
}

/// Smallest fiber singular value over the torus grid.
#[derive(Debug, Clone)]
pub struct MarginReport {
    pub margin: f64,
    pub argmin: Vec<usize>,
    pub tau_grid: usize,
}

pub fn fiber_invertibility_scan(
    family: &FiberFamily,
    tau_grid: usize,
) -> Result<MarginReport, FloquetError> {
    let mut margin = f64::INFINITY;
    let mut argmin = Vec::new();
    for idx in family.grid_indices(tau_grid) {
        let tau = family.tau_point(tau_grid, &idx);
        let m = family.fiber_at(&tau)?;
        let s = smallest_singular_value(&m);
        if s < margin {
            margin = s;
            argmin = idx;
        }
    }
    Ok(MarginReport {
        margin,
        argmin,
        tau_grid,
    })
}

/// Symmetric Hausdorff distance of two finite point sets.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one_sided = |from: &[Complex64], to: &[Complex64]| {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

fn point_polyline_distance(p: Complex64, poly: &[Complex64]) -> f64 {
    if poly.len() == 1 {
        return (p - poly[0]).norm();
    }
    let mut best = f64::INFINITY;
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ab = b - a;
        let denom = ab.norm_sqr();
        let t = if denom > 0.0 {
            (((p - a) * ab.conj()).re / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
        best = best.min((p - (a + ab * t)).norm());
    }
    best
}

/// Hausdorff distance with each set read as a polyline through consecutive
/// points; resolves the chord gaps of coarse parameter grids.
pub fn hausdorff_distance_polyline(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one_sided = |from: &[Complex64], to: &[Complex64]| {
        from.iter()
            .map(|&p| point_polyline_distance(p, to))
            .fold(0.0f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Dense sample of the segment from a to b.
pub fn sample_segment(a: Complex64, b: Complex64, n: usize) -> Vec<Complex64> {
    (0..=n)
        .map(|j| a + (b - a) * (j as f64 / n as f64))
        .collect()
}

/// Dense sample of the circle |z - c| = r.
pub fn sample_circle(c: Complex64, r: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| c + Complex64::from_polar(r, TAU * j as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::{
        assemble_convolution, assemble_multiplication, assemble_sio, mesh_graph, zero_band,
        ConvKernel, SioAssembleConfig,
    };
    use crate::graph::line_graph;
    use std::f64::consts::PI;

    type C = Complex64;

    fn line_mesh(ppul: usize, order: usize) -> Arc<Mesh> {
        Arc::new(mesh_graph(line_graph(), ppul, order))
    }

    fn gaussian_kernel() -> ConvKernel {
        Arc::new(|z: [f64; 2]| C::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0))
    }

    fn shift_family(mesh: Arc<Mesh>) -> FiberFamily {
        let n = mesh.n0();
        let mut band = zero_band(mesh);
        band.blocks
            .insert([1, 0], Array2::eye(n).mapv(|v: f64| C::new(v, 0.0)));
        fiber_blocks(&band, None, None).unwrap()
    }

    #[test]
    fn fiber_blocks_bookkeeping() {
        let mesh = line_mesh(4, 4);
        let g = mesh.graph.clone();
        let f = PCFunction::from_position_fn(g.clone(), |p| C::new(2.0 + (2.0 * PI * p[0]).sin(), 0.0));
        let band = assemble_multiplication(&f, mesh.clone());
        let fam = fiber_blocks(&band, None, None).unwrap();
        assert_eq!(fam.blocks.len(), 1);
        assert!(fam.blocks.contains_key(&[0, 0]));

        // non-periodic coefficient is rejected
        let sofn = PCFunction::from_position_fn(g, |p| C::new(p[0].atan(), 0.0));
        assert!(matches!(
            fiber_blocks(&band, Some(&sofn), None),
            Err(FloquetError::NotPeriodic { .. })
        ));

        // one-cell kernel support
        let small: ConvKernel = Arc::new(|z: [f64; 2]| {
            let r2 = z[0] * z[0] + z[1] * z[1];
            if r2 < 0.16 {
                C::new((0.16 - r2).powi(3), 0.0)
            } else {
                C::new(0.0, 0.0)
            }
        });
        let band = assemble_convolution(&small, mesh, 4, 1e-8).unwrap();
        let fam = fiber_blocks(&band, None, None).unwrap();
        for (k, b) in &fam.blocks {
            if k[0].abs() > 1 {
                assert!(b.iter().all(|v| v.norm() == 0.0), "gamma {k:?}");
            }
        }
    }

    #[test]
    fn fiber_at_identities() {
        let mesh = line_mesh(4, 4);
        let n = mesh.n0();
        // diagonal only: constant in tau
        let one = PCFunction::constant(mesh.graph.clone(), C::new(1.0, 0.0));
        let band = assemble_multiplication(&one, mesh.clone());
        let fam = fiber_blocks(&band, None, None).unwrap();
        let m1 = fam.fiber_at(&[C::new(1.0, 0.0)]).unwrap();
        let m2 = fam.fiber_at(&[C::new(0.0, 1.0)]).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((m1[(i, j)] - m2[(i, j)]).norm() < 1e-14);
            }
        }
        // pure shift: mu(tau) = tau I
        let fam = shift_family(mesh.clone());
        let tau = C::from_polar(1.0, 0.7);
        let m = fam.fiber_at(&[tau]).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { tau } else { C::new(0.0, 0.0) };
                assert!((m[(i, j)] - want).norm() < 1e-14);
            }
        }
        // off the torus
        assert!(matches!(
            fam.fiber_at(&[C::new(0.5, 0.0)]),
            Err(FloquetError::OffTorus { .. })
        ));
        // tau = 1 equals the block row sum
        let band = assemble_convolution(&gaussian_kernel(), mesh, 10, 1e-6).unwrap();
        let fam = fiber_blocks(&band, None, None).unwrap();
        let m = fam.fiber_at(&[C::new(1.0, 0.0)]).unwrap();
        for i in 0..n {
            let si = fam.mesh.nodes[i].weight.sqrt();
            for j in 0..n {
                let sj = fam.mesh.nodes[j].weight.sqrt();
                let mut sum = C::new(0.0, 0.0);
                for b in fam.blocks.values() {
                    sum += b[(i, j)];
                }
                assert!((m[(i, j)] - sum * si / sj).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dft_reconstructs_blocks() {
        let mesh = line_mesh(4, 4);
        let g = mesh.graph.clone();
        let band = assemble_convolution(&gaussian_kernel(), mesh.clone(), 10, 1e-6).unwrap();
        let a = PCFunction::from_position_fn(g.clone(), |p| C::new(1.5, 0.2 * (2.0 * PI * p[0]).cos()));
        let b = PCFunction::from_position_fn(g, |p| C::new(2.0 + (2.0 * PI * p[0]).sin(), 0.0));
        let fam = fiber_blocks(&band, Some(&a), Some(&b)).unwrap();
        let grid = 32;
        let n = mesh.n0();
        let fibers: Vec<Array2<C>> = (0..grid)
            .map(|j| {
                fam.fiber_at(&[C::from_polar(1.0, TAU * j as f64 / grid as f64)])
                    .unwrap()
            })
            .collect();
        for gamma in [-2i64, 0, 3] {
            let mut rec: Array2<C> = Array2::zeros((n, n));
            for (j, m) in fibers.iter().enumerate() {
                let phase = C::from_polar(1.0, -TAU * j as f64 * gamma as f64 / grid as f64);
                rec.scaled_add(phase / grid as f64, m);
            }
            // expected: diag(b) sym(M_gamma) + delta diag(a)
            let zero = Array2::zeros((n, n));
            let blk = fam.blocks.get(&[gamma, 0]).unwrap_or(&zero);
            let mut want = Array2::zeros((n, n));
            for i in 0..n {
                let si = mesh.nodes[i].weight.sqrt();
                for j in 0..n {
                    let sj = mesh.nodes[j].weight.sqrt();
                    want[(i, j)] = fam.b[i] * blk[(i, j)] * si / sj;
                }
                if gamma == 0 {
                    want[(i, i)] += fam.a[i];
                }
            }
            let defect = rec
                .iter()
                .zip(want.iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0f64, f64::max);
            assert!(defect < 1e-10, "gamma {gamma}: defect {defect}");
        }
    }

    #[test]
    fn shift_spectrum_is_unit_circle() {
        let fam = shift_family(line_mesh(4, 4));
        let est = essential_spectrum(&fam, 512, &[]).unwrap();
        // cloud ordered by tau; read it as a closed polyline
        let mut pts = est.points();
        pts.push(pts[0]);
        let mut circle = sample_circle(C::new(0.0, 0.0), 1.0, 4096);
        circle.push(circle[0]);
        let d = hausdorff_distance_polyline(&pts, &circle);
        assert!(d <= 1e-3, "Hausdorff {d}");
    }

    #[test]
    fn multiplication_spectrum_is_essential_range() {
        let mesh = line_mesh(8, 8);
        let a = PCFunction::from_position_fn(mesh.graph.clone(), |p| {
            C::new(2.0 + (2.0 * PI * p[0]).sin(), 0.0)
        });
        let band = assemble_multiplication(&a, mesh);
        let fam = fiber_blocks(&band, None, None).unwrap();
        let est = essential_spectrum(&fam, 4, &[]).unwrap();
        // real cloud: sort and read as a polyline against the range segment
        let mut pts = est.points();
        pts.sort_by(|x, y| x.re.total_cmp(&y.re));
        let range = [C::new(1.0, 0.0), C::new(3.0, 0.0)];
        let d = hausdorff_distance_polyline(&pts, &range);
        assert!(d <= 1e-3, "Hausdorff {d}");
    }

    #[test]
    fn gaussian_conv_spectrum_matches_fourier_range() {
        let mesh = line_mesh(8, 4);
        let band = assemble_convolution(&gaussian_kernel(), mesh, 20, 1e-8).unwrap();
        let fam = fiber_blocks(&band, None, None).unwrap();
        let est = essential_spectrum(&fam, 256, &[]).unwrap();
        let range = sample_segment(C::new(0.0, 0.0), C::new(PI.sqrt(), 0.0), 8192);
        let d = hausdorff_distance(&est.points(), &range);
        assert!(d <= 1e-2, "Hausdorff {d}");
    }

    #[test]
    fn spectrum_shifts_with_diagonal() {
        let mesh = line_mesh(4, 4);
        let band = assemble_convolution(&gaussian_kernel(), mesh.clone(), 8, 1e-6).unwrap();
        let lambda = C::new(0.4, -0.3);
        let a = PCFunction::constant(mesh.graph.clone(), -lambda);
        let fam0 = fiber_blocks(&band, None, None).unwrap();
        let fam1 = fiber_blocks(&band, Some(&a), None).unwrap();
        let e0 = essential_spectrum(&fam0, 16, &[]).unwrap();
        let e1 = essential_spectrum(&fam1, 16, &[]).unwrap();
        // per fiber the eigenvalue multiset shifts by -lambda; solver order
        // may differ, so match by nearest
        for (l1, t1) in &e1.cloud {
            let d = e0
                .cloud
                .iter()
                .filter(|(_, t0)| t0 == t1)
                .map(|(l0, _)| (l1 - (l0 - lambda)).norm())
                .fold(f64::INFINITY, f64::min)
;
            assert!(d < 1e-8, "distance {d}");
        }
    }

    #[test]
    fn limit_operator_of_arctan_coefficient() {
        let mesh = line_mesh(4, 4);
        let g = mesh.graph.clone();
        let band = zero_band(mesh.clone());
        let a = SOFunction(PCFunction::from_position_fn(g.clone(), |p| {
            C::new(3.0 + p[0].atan(), 0.0)
        }));
        let b = SOFunction(PCFunction::constant(g.clone(), C::new(0.0, 0.0)));
        let h: Vec<GroupElement> = (8..22).map(|k| GroupElement::new(&[1i64 << k])).collect();
        let fam = limit_operator_band(&band, &a, &b, &h, 1e-4).unwrap();
        for v in &fam.a {
            assert!((v.re - (3.0 + PI / 2.0)).abs() < 1e-5 && v.im == 0.0);
        }
        // periodic coefficient: the limit is the coefficient itself; the
        // tolerance absorbs sin() rounding at arguments of size 2 pi 2^21
        let ap = SOFunction(PCFunction::from_position_fn(g, |p| {
            C::new((2.0 * PI * p[0]).sin(), 0.0)
        }));
        let fam = limit_operator_band(&band, &ap, &b, &h, 1e-6).unwrap();
        for (i, v) in fam.a.iter().enumerate() {
            let want = (2.0 * PI * mesh.nodes[i].position[0]).sin();
            assert!((v.re - want).abs() < 1e-6);
        }
    }

    #[test]
    fn log_oscillation_has_distinct_limits() {
        let mesh = line_mesh(4, 4);
        let g = mesh.graph.clone();
        let band = zero_band(mesh);
        let a = SOFunction(PCFunction::from_position_fn(g.clone(), |p| {
            C::new((1.0 + p[0].abs()).ln().sin(), 0.0)
        }));
        let b = SOFunction(PCFunction::constant(g, C::new(0.0, 0.0)));
        // shifts x_m with log(1+x_m) near 0 resp. pi/2 mod 2 pi
        let h1: Vec<GroupElement> = (1..=5)
            .map(|k| GroupElement::new(&[(TAU * k as f64).exp() as i64]))
            .collect();
        let h2: Vec<GroupElement> = (1..=5)
            .map(|k| GroupElement::new(&[(TAU * k as f64 + PI / 2.0).exp() as i64]))
            .collect();
        let f1 = limit_operator_band(&band, &a, &b, &h1, 1e-2).unwrap();
        let f2 = limit_operator_band(&band, &a, &b, &h2, 1e-2).unwrap();
        let v1 = f1.a[0].re;
        let v2 = f2.a[0].re;
        assert!((v1 - 0.0).abs() < 0.05, "v1 = {v1}");
        assert!((v2 - 1.0).abs() < 0.05, "v2 = {v2}");
    }

    #[test]
    fn invertibility_margins() {
        let mesh = line_mesh(4, 4);
        // mu = 2 I
        let two = PCFunction::constant(mesh.graph.clone(), C::new(2.0, 0.0));
        let band = assemble_multiplication(&two, mesh.clone());
        let fam = fiber_blocks(&band, None, None).unwrap();
        let rep = fiber_invertibility_scan(&fam, 8).unwrap();
        assert!((rep.margin - 2.0).abs() < 1e-12);

        // shift minus 1/2: margin 1/2 attained at tau = 1
        let mut fam = shift_family(mesh.clone());
        fam.a = vec![C::new(-0.5, 0.0); fam.n0()];
        let rep = fiber_invertibility_scan(&fam, 16).unwrap();
        assert!((rep.margin - 0.5).abs() < 1e-10);
        assert_eq!(rep.argmin, vec![0]);

        // 2 + Gaussian convolution: 0 is outside 2 + [0, sqrt(pi)]
        let band = assemble_convolution(&gaussian_kernel(), mesh.clone(), 10, 1e-6).unwrap();
        let two = PCFunction::constant(mesh.graph.clone(), C::new(2.0, 0.0));
        let fam = fiber_blocks(&band, Some(&two), None).unwrap();
        let rep = fiber_invertibility_scan(&fam, 32).unwrap();
        assert!(rep.margin > 1.9, "margin {}", rep.margin);
    }

    #[test]
    fn finite_section_eigenvalues_near_cloud() {
        let mesh = line_mesh(8, 4);
        let band = assemble_convolution(&gaussian_kernel(), mesh, 12, 1e-8).unwrap();
        let fam = fiber_blocks(&band, None, None).unwrap();
        let est = essential_spectrum(&fam, 128, &[]).unwrap();
        let cloud = est.points();
        let s = band.finite_section_real(30).expect("real band");
        let (ev, _) = s.eigh(UPLO::Lower).unwrap();
        for &e in ev.iter() {
            let d = cloud
                .iter()
                .map(|c| (c - C::new(e, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 5e-2, "eigenvalue {e} at distance {d}");
        }
    }

    #[test]
    fn sio_fiber_spectrum_sane() {
        // phi with Gaussian z decay: fibers are well conditioned and the
        // cloud stays within the closed unit disc scaled by the Wiener sum
        let mesh = line_mesh(4, 4);
        let phi = crate::sio::KernelModulation::from_position_fn(
            mesh.graph.clone(),
            |_, z| C::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0),
            4,
        );
        let band = assemble_sio(&phi, mesh, &SioAssembleConfig::default()).unwrap();
        let wiener = band.band_norms().wiener_sum;
        let fam = fiber_blocks(&band, None, None).unwrap();
        let est = essential_spectrum(&fam, 64, &[]).unwrap();
        for (l, _) in &est.cloud {
            assert!(l.norm() <= wiener + 1e-9);
        }
    }

    #[test]
    fn csv_exports() {
        let fam = shift_family(line_mesh(4, 4));
        let est = essential_spectrum(&fam, 4, &[C::new(0.5, 0.0)]).unwrap();
        let csv = est.to_csv();
        assert!(csv.starts_with("re,im,tau_index\n"));
        assert_eq!(csv.lines().count(), 1 + est.cloud.len());
        let mcsv = est.margins_csv();
        assert_eq!(mcsv.lines().count(), 2);
        // shift margin to 0.5 over the coarse grid: min |tau - 0.5|
        assert!((est.margins[0].1 - 0.5).abs() < 1e-10);
    }
}
