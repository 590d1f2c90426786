//! Discretization of the cell operators into block-band form over the
//! lattice: composite Gauss meshes, multiplication / convolution / singular
//! integral bands, Wiener-style band-norm diagnostics, and brute-force
//! finite sections.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::SVD;
use num_complex::Complex64;
use thiserror::Error;

use crate::functions::PCFunction;
use crate::graph::{GraphPoint, GroupElement, MetricGraph};
use crate::quad::gauss_legendre;
use crate::sio::KernelModulation;

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("band tail estimate {tail} above tolerance {tol}; enlarge the band radius")]
    BandRadiusTooSmall { tail: f64, tol: f64 },
    #[error("kernel decay violated: |k| = {value} at |z| = {radius} exceeds the fitted bound {bound}")]
    DecayViolation {
        radius: f64,
        value: f64,
        bound: f64,
    },
    #[error("operator is not periodic on the inspected window")]
    NotPeriodic,
}

/// One quadrature node of the cell mesh.
#[derive(Debug, Clone)]
pub struct MeshNode {
    pub edge: usize,
    pub panel: usize,
    /// Arclength coordinate on the edge.
    pub coord: f64,
    /// Quadrature weight for the arclength measure.
    pub weight: f64,
    /// Embedded position of the cell copy.
    pub position: [f64; 2],
}

/// Composite open Gauss mesh of the fundamental cell.
pub struct Mesh {
    pub graph: Arc<MetricGraph>,
    pub order: usize,
    /// Panel count per edge.
    pub panels: Vec<usize>,
    pub nodes: Vec<MeshNode>,
    /// Node index range per edge.
    pub edge_nodes: Vec<(usize, usize)>,
    /// Graph weight values at the nodes (1 for the unweighted space).
    pub wnode: Vec<f64>,
}

impl Mesh {
    pub fn n0(&self) -> usize {
        self.nodes.len()
    }

    pub fn point(&self, i: usize) -> GraphPoint {
        GraphPoint {
            edge: self.nodes[i].edge,
            coord: self.nodes[i].coord,
            offset: GroupElement::zero(self.graph.rank),
        }
    }

    /// Embedded position of node j translated to cell beta.
    pub fn node_position(&self, j: usize, beta: &GroupElement) -> [f64; 2] {
        let t = self.graph.translation(beta);
        let p = self.nodes[j].position;
        [p[0] + t[0], p[1] + t[1]]
    }

    /// Override the graph weight samples (same length as nodes).
    pub fn with_weight(mut self, w: Vec<f64>) -> Self {
        assert_eq!(w.len(), self.nodes.len());
        self.wnode = w;
        self
    }
}

/// Composite Gauss panels on every edge; nodes are interior to the panels, so
/// no node hits a vertex.
pub fn mesh_graph(graph: Arc<MetricGraph>, panels_per_unit_length: usize, order: usize) -> Mesh {
    assert!(matches!(order, 4 | 8 | 16), "order must be 4, 8 or 16");
    let (gn, gw) = gauss_legendre(order);
    let mut nodes = Vec::new();
    let mut panels = Vec::new();
    let mut edge_nodes = Vec::new();
    for (ei, e) in graph.edges.iter().enumerate() {
        let np = ((e.length * panels_per_unit_length as f64).round() as usize).max(1);
        panels.push(np);
        let start = nodes.len();
        let hl = e.length / np as f64;
        for p in 0..np {
            let a = p as f64 * hl;
            for (x, w) in gn.iter().zip(&gw) {
                let coord = a + 0.5 * hl * (x + 1.0);
                nodes.push(MeshNode {
                    edge: ei,
                    panel: p,
                    coord,
                    weight: 0.5 * hl * w,
                    position: [
                        e.start_position[0] + coord * e.direction[0],
                        e.start_position[1] + coord * e.direction[1],
                    ],
                });
            }
        }
        edge_nodes.push((start, nodes.len()));
    }
    let wnode = vec![1.0; nodes.len()];
    Mesh {
        graph,
        order,
        panels,
        nodes,
        edge_nodes,
        wnode,
    }
}

pub type ConvKernel = Arc<dyn Fn([f64; 2]) -> Complex64 + Send + Sync>;

/// Block-band matrix over the lattice: block A_beta maps data supported on
/// cell beta to cell 0, in the plain node sampling. Spectral computations go
/// through the similarity by the square-rooted quadrature weights, which is
/// the weighted little-ell-2 representation.
pub struct BandOperator {
    pub mesh: Arc<Mesh>,
    pub blocks: BTreeMap<[i64; 2], Array2<Complex64>>,
    pub band_radius: i64,
    /// Upper estimate of the summed norms of the dropped blocks.
    pub tail_bound: f64,
}

#[derive(Debug, Clone)]
pub struct BandNorms {
    /// (offset, spectral norm), sorted by offset.
    pub norms: Vec<([i64; 2], f64)>,
    pub wiener_sum: f64,
    /// Least-squares slope of log |A_beta| against log |beta| over the fit
    /// window, when enough nonzero norms exist there.
    pub slope: Option<f64>,
}

fn spectral_norm(m: &Array2<Complex64>) -> f64 {
    if m.iter().all(|v| v.norm() == 0.0) {
        return 0.0;
    }
    let (_, s, _) = m.svd(false, false).expect("svd failed");
    s.iter().cloned().fold(0.0, f64::max)
}

impl BandOperator {
    pub fn n0(&self) -> usize {
        self.mesh.n0()
    }

    pub fn rank(&self) -> usize {
        self.mesh.graph.rank
    }

    pub fn block(&self, beta: &GroupElement) -> Option<&Array2<Complex64>> {
        self.blocks.get(&beta.coords)
    }

    /// Similarity scaling into the symmetric quadrature representation.
    pub fn sym_block(&self, beta: &GroupElement) -> Option<Array2<Complex64>> {
        self.block(beta).map(|b| self.symmetrize(b))
    }

    fn symmetrize(&self, b: &Array2<Complex64>) -> Array2<Complex64> {
        let n = self.n0();
        let mut out = b.clone();
        for i in 0..n {
            let si = self.mesh.nodes[i].weight.sqrt();
            for j in 0..n {
                let sj = self.mesh.nodes[j].weight.sqrt();
                out[(i, j)] *= si / sj;
            }
        }
        out
    }

    /// a I + this, with a sampled at the nodes.
    pub fn add_diagonal(&mut self, a: &[Complex64]) {
        assert_eq!(a.len(), self.n0());
        let zero = GroupElement::zero(self.rank());
        let n = self.n0();
        let entry = self
            .blocks
            .entry(zero.coords)
            .or_insert_with(|| Array2::zeros((n, n)));
        for i in 0..n {
            entry[(i, i)] += a[i];
        }
    }

    /// diag(b) * this; the row scaling of a coefficient in front of an
    /// integral operator.
    pub fn scale_rows(&mut self, b: &[Complex64]) {
        assert_eq!(b.len(), self.n0());
        for block in self.blocks.values_mut() {
            for (i, &bi) in b.iter().enumerate() {
                for v in block.row_mut(i) {
                    *v *= bi;
                }
            }
        }
    }

    pub fn add(&mut self, other: &BandOperator) {
        let n = self.n0();
        assert_eq!(n, other.n0());
        for (k, b) in &other.blocks {
            let entry = self
                .blocks
                .entry(*k)
                .or_insert_with(|| Array2::zeros((n, n)));
            *entry += b;
        }
        self.band_radius = self.band_radius.max(other.band_radius);
        self.tail_bound += other.tail_bound;
    }

    pub fn band_norms(&self) -> BandNorms {
        let mut norms: Vec<([i64; 2], f64)> = self
            .blocks
            .iter()
            .map(|(k, b)| (*k, spectral_norm(&self.symmetrize(b))))
            .collect();
        norms.sort_by_key(|(k, _)| *k);
        let wiener_sum = norms.iter().map(|(_, n)| n).sum();
        // log-log fit over 2 <= |beta| <= band radius
        let pts: Vec<(f64, f64)> = norms
            .iter()
            .filter(|(k, n)| {
                let d = k[0].abs().max(k[1].abs());
                d >= 2 && *n > 1e-300
            })
            .map(|(k, n)| {
                let d = (k[0].abs().max(k[1].abs())) as f64;
                (d.ln(), n.ln())
            })
            .collect();
        let slope = if pts.len() >= 3 {
            let m = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            let den = m * sxx - sx * sx;
            if den.abs() > 1e-12 {
                Some((m * sxy - sx * sy) / den)
            } else {
                None
            }
        } else {
            None
        };
        BandNorms {
            norms,
            wiener_sum,
            slope,
        }
    }

    fn section_cells(&self, rho: i64) -> Vec<GroupElement> {
        GroupElement::ball(self.rank(), rho)
    }

    /// Dense block-Toeplitz section over cells |alpha| <= rho, in the
    /// symmetric quadrature representation.
    pub fn finite_section(&self, rho: i64) -> Array2<Complex64> {
        let cells = self.section_cells(rho);
        let n = self.n0();
        let dim = cells.len() * n;
        let mut out = Array2::zeros((dim, dim));
        let sym: BTreeMap<[i64; 2], Array2<Complex64>> = self
            .blocks
            .iter()
            .map(|(k, b)| (*k, self.symmetrize(b)))
            .collect();
        for (ia, a) in cells.iter().enumerate() {
            for (ib, b) in cells.iter().enumerate() {
                let beta = b.sub(a);
                if let Some(block) = sym.get(&beta.coords) {
                    for i in 0..n {
                        for j in 0..n {
                            out[(ia * n + i, ib * n + j)] = block[(i, j)];
                        }
                    }
                }
            }
        }
        out
    }

    /// Real part of the finite section when the band is real to rounding;
    /// None otherwise. Lets symmetric eigenproblems run in real arithmetic.
    pub fn finite_section_real(&self, rho: i64) -> Option<Array2<f64>> {
        let imag_max = self
            .blocks
            .values()
            .flat_map(|b| b.iter())
            .map(|v| v.im.abs())
            .fold(0.0f64, f64::max);
        if imag_max > 1e-13 {
            return None;
        }
        Some(self.finite_section(rho).mapv(|v| v.re))
    }

    /// Block convolution product: (AB)_beta = sum_gamma A_gamma B_{beta-gamma}.
    pub fn band_product(&self, other: &BandOperator) -> BandOperator {
        let n = self.n0();
        assert_eq!(n, other.n0());
        let mut blocks: BTreeMap<[i64; 2], Array2<Complex64>> = BTreeMap::new();
        for (ka, a) in &self.blocks {
            for (kb, b) in &other.blocks {
                let key = [ka[0] + kb[0], ka[1] + kb[1]];
                let entry = blocks
                    .entry(key)
                    .or_insert_with(|| Array2::zeros((n, n)));
                *entry += &a.dot(b);
            }
        }
        BandOperator {
            mesh: self.mesh.clone(),
            blocks,
            band_radius: self.band_radius + other.band_radius,
            tail_bound: self.tail_bound + other.tail_bound,
        }
    }

    /// Apply the band to a section vector (plain node sampling); u is laid
    /// out like finite_section's cells at the given radius.
    pub fn apply_section(&self, u: &[Complex64], rho: i64) -> Vec<Complex64> {
        let cells = self.section_cells(rho);
        let n = self.n0();
        assert_eq!(u.len(), cells.len() * n);
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        for (ia, a) in cells.iter().enumerate() {
            for (ib, b) in cells.iter().enumerate() {
                let beta = b.sub(a);
                if let Some(block) = self.blocks.get(&beta.coords) {
                    for i in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..n {
                            acc += block[(i, j)] * u[ib * n + j];
                        }
                        out[ia * n + i] += acc;
                    }
                }
            }
        }
        out
    }
}

/// Zero band on the mesh.
pub fn zero_band(mesh: Arc<Mesh>) -> BandOperator {
    BandOperator {
        mesh,
        blocks: BTreeMap::new(),
        band_radius: 0,
        tail_bound: 0.0,
    }
}

/// Multiplication by f: the diagonal block only.
pub fn assemble_multiplication(f: &PCFunction, mesh: Arc<Mesh>) -> BandOperator {
    let n = mesh.n0();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        d[(i, i)] = f.eval(&mesh.point(i));
    }
    let mut blocks = BTreeMap::new();
    blocks.insert(GroupElement::zero(mesh.graph.rank).coords, d);
    BandOperator {
        mesh,
        blocks,
        band_radius: 0,
        tail_bound: 0.0,
    }
}

/// Shortest nonzero lattice translation length.
fn min_translation(graph: &MetricGraph) -> f64 {
    let mut best = f64::INFINITY;
    for g in GroupElement::ball(graph.rank, 1) {
        if g.norm_inf() == 0 {
            continue;
        }
        let t = graph.translation(&g);
        best = best.min((t[0] * t[0] + t[1] * t[1]).sqrt());
    }
    best
}

fn cell_measure(mesh: &Mesh) -> f64 {
    mesh.nodes.iter().map(|n| n.weight).sum()
}

/// Geometric tail estimate: per shell s > R, (number of cells) x (operator
/// bound from the sampled kernel magnitude at the shell distance); the
/// remainder past the sampled shells is extrapolated geometrically.
fn band_tail_estimate<F: Fn(f64) -> f64>(
    mesh: &Mesh,
    radius: i64,
    kernel_sup_at: F,
) -> f64 {
    let lmin = min_translation(&mesh.graph);
    let diam = 2.0 * cell_measure(mesh).max(1.0);
    let rank = mesh.graph.rank as u32;
    let meas = cell_measure(mesh);
    let mut tail = 0.0;
    let mut last = 0.0;
    let mut prev = f64::INFINITY;
    let mut ratio: f64 = 1.0;
    for s in (radius + 1)..(radius + 33) {
        let d = (s as f64 * lmin - diam).max(0.5 * lmin);
        let count = if rank == 1 { 2.0 } else { 8.0 * s as f64 };
        last = count * meas * kernel_sup_at(d);
        tail += last;
        if prev.is_finite() && prev > 0.0 {
            ratio = last / prev;
        }
        prev = last;
    }
    if ratio < 0.95 {
        tail += last * ratio / (1.0 - ratio);
    } else if last > 0.0 {
        // no visible decay left; signal through a large tail
        tail += last * 64.0;
    }
    tail
}

/// Convolution band (Tu)(x) = int k(x - y) u(y) dy, blocks by smooth
/// quadrature. The kernel decay is spot-checked against (1+|z|)^{-2-eps}.
pub fn assemble_convolution(
    k: &ConvKernel,
    mesh: Arc<Mesh>,
    band_radius: i64,
    tail_tol: f64,
) -> Result<BandOperator, AssembleError> {
    let lmin = min_translation(&mesh.graph);
    // decay probe along lattice-ish directions
    let dirs = [[1.0, 0.0], [0.0, 1.0], [0.70710678, 0.70710678], [-0.70710678, 0.70710678]];
    let sup_at = |d: f64| -> f64 {
        dirs.iter()
            .map(|v| k([d * v[0], d * v[1]]).norm())
            .fold(0.0, f64::max)
    };
    let probe_max = (band_radius + 16) as f64 * lmin;
    let samples: Vec<(f64, f64)> = (1..=40)
        .map(|j| {
            let r = probe_max * j as f64 / 40.0;
            (r, sup_at(r))
        })
        .collect();
    let weighted: Vec<f64> = samples
        .iter()
        .map(|(r, m)| m * (1.0 + r).powf(2.1))
        .collect();
    let inner = weighted[..2 * weighted.len() / 3]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    for (i, wv) in weighted.iter().enumerate().skip(2 * weighted.len() / 3) {
        if *wv > inner * (1.0 + 1e-9) && *wv > 1e-14 {
            return Err(AssembleError::DecayViolation {
                radius: samples[i].0,
                value: samples[i].1,
                bound: inner / (1.0 + samples[i].0).powf(2.1),
            });
        }
    }
    let tail = band_tail_estimate(&mesh, band_radius, sup_at);
    if tail > tail_tol {
        return Err(AssembleError::BandRadiusTooSmall {
            tail,
            tol: tail_tol,
        });
    }
    let n = mesh.n0();
    let mut blocks = BTreeMap::new();
    for beta in GroupElement::ball(mesh.graph.rank, band_radius) {
        let mut block = Array2::zeros((n, n));
        let mut nonzero = false;
        for i in 0..n {
            let xi = mesh.nodes[i].position;
            let wi = mesh.wnode[i];
            for j in 0..n {
                let yj = mesh.node_position(j, &beta);
                let v = k([xi[0] - yj[0], xi[1] - yj[1]]);
                if v.norm() > 0.0 {
                    nonzero = true;
                }
                block[(i, j)] = (wi / mesh.wnode[j]) * mesh.nodes[j].weight * v;
            }
        }
        if nonzero || beta.norm_inf() == 0 {
            blocks.insert(beta.coords, block);
        }
    }
    Ok(BandOperator {
        mesh,
        blocks,
        band_radius,
        tail_bound: tail,
    })
}

/// Monomial coefficients gamma[j][k] of the Lagrange basis on the scaled
/// nodes u in [-1, 1]: L_j(u) = sum_k gamma[j][k] u^k. Found by inverting
/// the transposed Vandermonde matrix.
fn lagrange_monomial_coeffs(u: &[f64]) -> Vec<Vec<f64>> {
    let order = u.len();
    // augmented [V^T | I], eliminate to get (V^T)^{-1}
    let mut vt = vec![vec![0.0; 2 * order]; order];
    for i in 0..order {
        let mut p = 1.0;
        for k in 0..order {
            vt[k][i] = p;
            p *= u[i];
        }
        vt[i][order + i] = 1.0;
    }
    for col in 0..order {
        let mut piv = col;
        for r in col + 1..order {
            if vt[r][col].abs() > vt[piv][col].abs() {
                piv = r;
            }
        }
        vt.swap(col, piv);
        let d = vt[col][col];
        for x in vt[col].iter_mut() {
            *x /= d;
        }
        for r in 0..order {
            if r != col {
                let f = vt[r][col];
                if f != 0.0 {
                    for x in 0..2 * order {
                        vt[r][x] -= f * vt[col][x];
                    }
                }
            }
        }
    }
    // row j of (V^T)^{-1} holds gamma_j
    (0..order)
        .map(|j| (0..order).map(|k| vt[j][order + k]).collect())
        .collect()
}

/// PV integral weights of the Lagrange basis on one panel: returns
/// M_j(t) = PV int_a^b L_j(tau) / (tau - t) dtau for a target t inside the
/// panel, via monomial moments in the scaled variable.
fn singular_panel_weights(panel_nodes: &[f64], a: f64, b: f64, t: f64) -> Vec<f64> {
    let order = panel_nodes.len();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let th = (t - c) / h;
    // PV moments m_k = int_{-1}^1 u^k / (u - th) du
    let mut m = vec![0.0; order];
    m[0] = ((1.0 - th) / (1.0 + th)).ln();
    for k in 1..order {
        let poly = if k % 2 == 1 { 2.0 / k as f64 } else { 0.0 };
        m[k] = poly + th * m[k - 1];
    }
    let u: Vec<f64> = panel_nodes.iter().map(|x| (x - c) / h).collect();
    let gamma = lagrange_monomial_coeffs(&u);
    (0..order)
        .map(|j| (0..order).map(|k| gamma[j][k] * m[k]).sum())
        .collect()
}

/// Near-panel analogue with the pole off the panel: the target enters as the
/// scaled complex coordinate w = (x - center) / (h d) with |w| > 1 or
/// Im w != 0, and the weights are int_{-1}^1 L_j(u) / (u - w) du. Exact in
/// the Cauchy factor, so close collinear panels lose no accuracy.
fn near_panel_weights(scaled_nodes: &[f64], w: Complex64) -> Vec<Complex64> {
    let order = scaled_nodes.len();
    let mut m = vec![Complex64::new(0.0, 0.0); order];
    // the segment u - w, u in [-1, 1], misses the log branch cut
    m[0] = (Complex64::new(1.0, 0.0) - w).ln() - (Complex64::new(-1.0, 0.0) - w).ln();
    for k in 1..order {
        let poly = if k % 2 == 1 { 2.0 / k as f64 } else { 0.0 };
        m[k] = poly + w * m[k - 1];
    }
    let gamma = lagrange_monomial_coeffs(scaled_nodes);
    (0..order)
        .map(|j| (0..order).map(|k| gamma[j][k] * m[k]).sum())
        .collect()
}

#[derive(Debug, Clone)]
pub struct SioAssembleConfig {
    pub band_radius: i64,
    pub tail_tol: f64,
    /// Multiple of the panel length below which a source panel counts as
    /// near.
    pub near_factor: f64,
}

impl Default for SioAssembleConfig {
    fn default() -> Self {
        SioAssembleConfig {
            band_radius: 16,
            tail_tol: 1e-6,
            near_factor: 1.5,
        }
    }
}

struct PanelInfo {
    edge: usize,
    a: f64,
    b: f64,
    /// Node indices into the mesh.
    nodes: Vec<usize>,
}

fn panel_list(mesh: &Mesh) -> Vec<PanelInfo> {
    let mut out = Vec::new();
    for (ei, _) in mesh.graph.edges.iter().enumerate() {
        let (lo, hi) = mesh.edge_nodes[ei];
        let np = mesh.panels[ei];
        let hl = mesh.graph.edges[ei].length / np as f64;
        for p in 0..np {
            let nodes: Vec<usize> = (lo..hi).filter(|&i| mesh.nodes[i].panel == p).collect();
            out.push(PanelInfo {
                edge: ei,
                a: p as f64 * hl,
                b: (p + 1) as f64 * hl,
                nodes,
            });
        }
    }
    out
}

/// Singular integral band (S u)(x) = (1/pi i) int phi(x, x-y) u(y) / (y-x) dy
/// with the complex division given by the plane embedding. Same-panel
/// interactions use the PV product-integration rule, near panels an
/// product integration with the off-panel pole, everything else plain
/// Nystrom quadrature.
pub fn assemble_sio(
    phi: &KernelModulation,
    mesh: Arc<Mesh>,
    cfg: &SioAssembleConfig,
) -> Result<BandOperator, AssembleError> {
    let graph = mesh.graph.clone();
    let lmin = min_translation(&graph);
    // phi magnitude probe for the tail; the kernel adds a 1/distance factor
    let probe = mesh.point(0);
    let sup_phi_at = |d: f64| -> f64 {
        [[1.0, 0.0], [0.0, 1.0], [0.70710678, 0.70710678]]
            .iter()
            .map(|v| phi.eval(&probe, [d * v[0], d * v[1]]).norm())
            .fold(0.0, f64::max)
    };
    let tail = band_tail_estimate(&mesh, cfg.band_radius, |d| {
        sup_phi_at(d) / (std::f64::consts::PI * d)
    });
    if tail > cfg.tail_tol {
        return Err(AssembleError::BandRadiusTooSmall {
            tail,
            tol: cfg.tail_tol,
        });
    }
    let n = mesh.n0();
    let panels = panel_list(&mesh);
    let inv_pi_i = 1.0 / Complex64::new(0.0, std::f64::consts::PI);
    let mut blocks = BTreeMap::new();
    for beta in GroupElement::ball(graph.rank, cfg.band_radius) {
        let tr = graph.translation(&beta);
        let mut block = Array2::zeros((n, n));
        for i in 0..n {
            let node = &mesh.nodes[i];
            let xi = node.position;
            let xp = mesh.point(i);
            let wi = mesh.wnode[i];
            for panel in &panels {
                let e = &graph.edges[panel.edge];
                let plen = panel.b - panel.a;
                // panel endpoints in the embedding, shifted by beta
                let pa = [
                    e.start_position[0] + panel.a * e.direction[0] + tr[0],
                    e.start_position[1] + panel.a * e.direction[1] + tr[1],
                ];
                let pb = [
                    e.start_position[0] + panel.b * e.direction[0] + tr[0],
                    e.start_position[1] + panel.b * e.direction[1] + tr[1],
                ];
                let dist = point_segment_distance(xi, pa, pb);
                let same_panel = beta.norm_inf() == 0
                    && panel.edge == node.edge
                    && node.panel == mesh.nodes[panel.nodes[0]].panel;
                if same_panel {
                    // PV product integration on the straight segment
                    let d_c = Complex64::new(e.direction[0], e.direction[1]);
                    let taus: Vec<f64> =
                        panel.nodes.iter().map(|&j| mesh.nodes[j].coord).collect();
                    let mj = singular_panel_weights(&taus, panel.a, panel.b, node.coord);
                    for (jj, &j) in panel.nodes.iter().enumerate() {
                        let zz = [
                            (node.coord - taus[jj]) * e.direction[0],
                            (node.coord - taus[jj]) * e.direction[1],
                        ];
                        block[(i, j)] += inv_pi_i
                            * phi.eval(&xp, zz)
                            * (wi / mesh.wnode[j])
                            * mj[jj]
                            / d_c;
                    }
                } else if dist < cfg.near_factor * plen {
                    // product integration with the pole off the panel; the
                    // target enters through its complex coordinate along the
                    // panel line
                    let d_c = Complex64::new(e.direction[0], e.direction[1]);
                    let cmid = 0.5 * (panel.a + panel.b);
                    let center_c = Complex64::new(
                        e.start_position[0] + cmid * e.direction[0] + tr[0],
                        e.start_position[1] + cmid * e.direction[1] + tr[1],
                    );
                    let w = (Complex64::new(xi[0], xi[1]) - center_c)
                        / (d_c * (0.5 * plen));
                    let su: Vec<f64> = panel
                        .nodes
                        .iter()
                        .map(|&j| (mesh.nodes[j].coord - cmid) / (0.5 * plen))
                        .collect();
                    let mj = near_panel_weights(&su, w);
                    for (jj, &j) in panel.nodes.iter().enumerate() {
                        let yj = mesh.node_position(j, &beta);
                        let ph = phi.eval(&xp, [xi[0] - yj[0], xi[1] - yj[1]]);
                        block[(i, j)] +=
                            inv_pi_i * ph * (wi / mesh.wnode[j]) * mj[jj] / d_c;
                    }
                } else {
                    for &j in &panel.nodes {
                        let yj = mesh.node_position(j, &beta);
                        let den = Complex64::new(yj[0] - xi[0], yj[1] - xi[1]);
                        let ph = phi.eval(&xp, [xi[0] - yj[0], xi[1] - yj[1]]);
                        block[(i, j)] += inv_pi_i
                            * ph
                            * mesh.nodes[j].weight
                            * (wi / mesh.wnode[j])
                            / den;
                    }
                }
            }
        }
        blocks.insert(beta.coords, block);
    }
    let _ = lmin;
    Ok(BandOperator {
        mesh,
        blocks,
        band_radius: cfg.band_radius,
        tail_bound: tail,
    })
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let denom = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if denom > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    let d = [p[0] - q[0], p[1] - q[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}
