//! Fredholm verdicts: edge ellipticity, vertex Mellin determinant infima and
//! fiber margins of the scanned limit family, merged into machine-readable
//! reports.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray_linalg::Determinant;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assemble::{
    assemble_convolution, assemble_sio, mesh_graph, AssembleError, BandOperator, ConvKernel,
    SioAssembleConfig,
};
use crate::floquet::{fiber_invertibility_scan, limit_operator_band, FloquetError};
use crate::functions::{
    check_weight_class, geometric_grid, FnError, PCFunction, SOFunction, Weight,
};
use crate::graph::{GraphError, GraphPoint, GroupElement, MetricGraph};
use crate::sio::{edge_symbol, vertex_symbol_a, KernelModulation, SioError};

#[derive(Debug, Error)]
pub enum FredholmError {
    #[error("weight kappa range [{inf}, {sup}] leaves the admissible interval ({lo}, {hi})")]
    WeightOutOfClass {
        inf: f64,
        sup: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sio(#[from] SioError),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Fn(#[from] FnError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum Witness {
    /// Edge symbol branch vanishing at a point.
    EdgePoint {
        edge: usize,
        coord: f64,
        cell: Vec<i64>,
        /// +1 for the xi > 0 branch, -1 for xi < 0.
        branch: i8,
        value: [f64; 2],
    },
    /// Vertex Mellin determinant vanishing at (r, lambda).
    Vertex {
        vertex: usize,
        r: f64,
        lambda: f64,
        det: [f64; 2],
    },
    /// Singular fiber of a scanned limit operator.
    Infinity {
        direction: String,
        tau_index: Vec<usize>,
        margin: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum Verdict {
    Fredholm,
    NotFredholm(Witness),
    Inconclusive(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConditionReport {
    pub pass: bool,
    /// Raw infimum backing the condition; None when not applicable.
    pub inf: Option<f64>,
    pub witness: Option<Witness>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Conditions {
    pub edge: ConditionReport,
    pub vertex: ConditionReport,
    pub infinity: ConditionReport,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Thresholds {
    pub p: f64,
    pub det_threshold: f64,
    pub delta_margin: f64,
    pub inv_tol: f64,
    pub zero_tol: f64,
    pub tau_grid: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FredholmReport {
    pub verdict: Verdict,
    pub conditions: Conditions,
    pub thresholds: Thresholds,
    pub scanned_limit_family: Vec<String>,
    pub caveat: String,
}

pub const LIMIT_FAMILY_CAVEAT: &str = "Fredholm relative to the scanned limit family";

#[derive(Debug, Clone)]
pub struct FredholmConfig {
    pub p: f64,
    /// Infima below threshold + margin are not certified.
    pub det_threshold: f64,
    pub delta_margin: f64,
    /// Grid values below this count as genuine zeros (witnesses).
    pub zero_tol: f64,
    /// Interior sample count per edge.
    pub edge_samples: usize,
    /// Coefficients are also scanned on cells at dyadic offsets up to here.
    pub cell_scan_radius: i64,
    pub r_points: usize,
    /// r grid shrinks to this multiple of the star radius.
    pub r_shrink: f64,
    /// The lambda scan extends until nu(0, .) is within this of its
    /// asymptote.
    pub nu_tail_tol: f64,
    pub lambda_points: usize,
    pub tau_grid: usize,
    /// Smallest acceptable fiber margin.
    pub inv_tol: f64,
    pub limit_tol: f64,
    pub mesh_panels: usize,
    pub mesh_order: usize,
    pub band_radius: i64,
    pub band_tail_tol: f64,
    /// Dyadic shift exponents 2^min .. 2^max per scan direction.
    pub shift_min_exp: u32,
    pub shift_max_exp: u32,
}

impl Default for FredholmConfig {
    fn default() -> Self {
        FredholmConfig {
            p: 2.0,
            det_threshold: 1e-6,
            delta_margin: 0.01,
            zero_tol: 1e-12,
            edge_samples: 40,
            cell_scan_radius: 64,
            r_points: 40,
            r_shrink: 1e-6,
            nu_tail_tol: 1e-6,
            lambda_points: 201,
            tau_grid: 256,
            inv_tol: 1e-3,
            limit_tol: 1e-4,
            mesh_panels: 4,
            mesh_order: 4,
            band_radius: 16,
            band_tail_tol: 1e-4,
            shift_min_exp: 4,
            shift_max_exp: 20,
        }
    }
}

impl FredholmConfig {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            p: self.p,
            det_threshold: self.det_threshold,
            delta_margin: self.delta_margin,
            inv_tol: self.inv_tol,
            zero_tol: self.zero_tol,
            tau_grid: self.tau_grid,
        }
    }

    /// Half-width of the lambda scan: where coth(pi lambda) has settled to
    /// within nu_tail_tol of 1.
    pub fn lambda_halfwidth(&self) -> f64 {
        (2.0 / self.nu_tail_tol).ln() / (2.0 * PI) + 0.5
    }

    fn scan_offsets(&self, rank: usize) -> Vec<GroupElement> {
        let mut mags = vec![0i64];
        let mut m = 1i64;
        while m <= self.cell_scan_radius {
            mags.push(m);
            mags.push(-m);
            m *= 2;
        }
        let mut out = Vec::new();
        for &v in &mags {
            if rank == 1 {
                out.push(GroupElement::new(&[v]));
            } else {
                out.push(GroupElement::new(&[v, 0]));
                out.push(GroupElement::new(&[0, v]));
            }
        }
        out.dedup();
        out
    }

    /// Scan directions of the limit family: lattice axes both ways plus the
    /// diagonals in rank 2.
    pub fn scan_directions(&self, rank: usize) -> Vec<(String, [i64; 2])> {
        if rank == 1 {
            vec![
                ("axis0+".into(), [1, 0]),
                ("axis0-".into(), [-1, 0]),
            ]
        } else {
            vec![
                ("axis0+".into(), [1, 0]),
                ("axis0-".into(), [-1, 0]),
                ("axis1+".into(), [0, 1]),
                ("axis1-".into(), [0, -1]),
                ("diag++".into(), [1, 1]),
                ("diag+-".into(), [1, -1]),
                ("diag-+".into(), [-1, 1]),
                ("diag--".into(), [-1, -1]),
            ]
        }
    }

    fn shift_sequence(&self, rank: usize, dir: [i64; 2]) -> Vec<GroupElement> {
        (self.shift_min_exp..=self.shift_max_exp)
            .map(|k| {
                let m = 1i64 << k;
                if rank == 1 {
                    GroupElement::new(&[dir[0] * m])
                } else {
                    GroupElement::new(&[dir[0] * m, dir[1] * m])
                }
            })
            .collect()
    }
}

/// A = a I + b S_{Gamma, phi} with a common vertex weight.
pub struct SioOperator {
    pub graph: Arc<MetricGraph>,
    pub a: PCFunction,
    pub b: PCFunction,
    pub phi: KernelModulation,
    pub weight: Weight,
}

/// A = a I + b T with convolution kernel k(x - y).
pub struct ConvOperator {
    pub graph: Arc<MetricGraph>,
    pub a: PCFunction,
    pub b: PCFunction,
    pub kernel: ConvKernel,
}

fn classify(inf: f64, witness: Option<Witness>, cfg: &FredholmConfig, what: &str) -> ConditionReport {
    if let Some(w) = witness {
        return ConditionReport {
            pass: false,
            inf: Some(inf),
            witness: Some(w),
            note: format!("{what} vanishes on the scan grid"),
        };
    }
    if inf >= cfg.det_threshold + cfg.delta_margin {
        ConditionReport {
            pass: true,
            inf: Some(inf),
            witness: None,
            note: format!("{what} bounded below by {inf:.3e}"),
        }
    } else {
        ConditionReport {
            pass: false,
            inf: Some(inf),
            witness: None,
            note: format!(
                "{what} infimum {inf:.3e} below threshold {} + margin {}",
                cfg.det_threshold, cfg.delta_margin
            ),
        }
    }
}

fn edge_condition_sio(op: &SioOperator, cfg: &FredholmConfig) -> Result<ConditionReport, FredholmError> {
    let mut inf = f64::INFINITY;
    let mut witness = None;
    for offset in cfg.scan_offsets(op.graph.rank) {
        for (ei, e) in op.graph.edges.iter().enumerate() {
            for i in 0..cfg.edge_samples {
                let coord = (i as f64 + 0.5) * e.length / cfg.edge_samples as f64;
                let x = GraphPoint {
                    edge: ei,
                    coord,
                    offset,
                };
                let es = edge_symbol(&op.a, &op.b, &op.phi, &x)?;
                for (branch, v) in [(1i8, es.plus), (-1i8, es.minus)] {
                    let n = v.norm();
                    if n < inf {
                        inf = n;
                    }
                    if n < cfg.zero_tol && witness.is_none() {
                        witness = Some(Witness::EdgePoint {
                            edge: ei,
                            coord,
                            cell: offset.coords[..op.graph.rank].to_vec(),
                            branch,
                            value: [v.re, v.im],
                        });
                    }
                }
            }
        }
    }
    Ok(classify(inf, witness, cfg, "edge symbol"))
}

fn vertex_condition_sio(op: &SioOperator, cfg: &FredholmConfig) -> Result<ConditionReport, FredholmError> {
    let min_len = op
        .graph
        .edges
        .iter()
        .map(|e| e.length)
        .fold(f64::INFINITY, f64::min);
    let star_eps = (0.4 * min_len).min(op.weight.eps * 0.999);
    let lam_max = cfg.lambda_halfwidth();
    let mut inf = f64::INFINITY;
    let mut witness = None;
    let mut skipped = 0usize;
    for v in 0..op.graph.vertices.len() {
        let star = op.graph.vertex_star(v, star_eps)?;
        let sym = vertex_symbol_a(&star, &op.a, &op.b, &op.phi, cfg.p, &op.weight)?;
        let r_grid = geometric_grid(star.eps, cfg.r_points, cfg.r_shrink * star.eps);
        for &r in &r_grid {
            for i in 0..cfg.lambda_points {
                let lambda =
                    -lam_max + 2.0 * lam_max * i as f64 / (cfg.lambda_points - 1) as f64;
                let m = match sym.eval(r, Complex64::new(lambda, 0.0)) {
                    Ok(m) => m,
                    Err(SioError::SymbolPole { .. }) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let det = m.det().expect("determinant failed");
                let n = det.norm();
                if !n.is_finite() {
                    skipped += 1;
                    continue;
                }
                if n < inf {
                    inf = n;
                }
                if n < cfg.zero_tol && witness.is_none() {
                    witness = Some(Witness::Vertex {
                        vertex: v,
                        r,
                        lambda,
                        det: [det.re, det.im],
                    });
                }
            }
        }
    }
    let mut rep = classify(inf, witness, cfg, "vertex Mellin determinant");
    if skipped > 0 {
        rep.note.push_str(&format!("; {skipped} pole-adjacent points skipped"));
    }
    Ok(rep)
}

fn infinity_condition(
    band: &BandOperator,
    a: &PCFunction,
    b: &PCFunction,
    cfg: &FredholmConfig,
) -> Result<(ConditionReport, Vec<String>), FredholmError> {
    let rank = band.mesh.graph.rank;
    let sa = SOFunction(a.clone());
    let sb = SOFunction(b.clone());
    let mut family = Vec::new();
    let mut worst: f64 = f64::INFINITY;
    let mut witness = None;
    let mut failed_dirs = Vec::new();
    for (name, dir) in cfg.scan_directions(rank) {
        let h = cfg.shift_sequence(rank, dir);
        family.push(format!(
            "{name} radii 2^{}..2^{}",
            cfg.shift_min_exp, cfg.shift_max_exp
        ));
        let fam = match limit_operator_band(band, &sa, &sb, &h, cfg.limit_tol) {
            Ok(f) => f,
            Err(FloquetError::Fn(FnError::NoConvergentSubsequence { .. })) => {
                failed_dirs.push(name);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let rep = fiber_invertibility_scan(&fam, cfg.tau_grid)?;
        if rep.margin < worst {
            worst = rep.margin;
            if rep.margin < cfg.inv_tol {
                witness = Some(Witness::Infinity {
                    direction: name.clone(),
                    tau_index: rep.argmin.clone(),
                    margin: rep.margin,
                });
            }
        }
    }
    let report = if !failed_dirs.is_empty() {
        ConditionReport {
            pass: false,
            inf: if worst.is_finite() { Some(worst) } else { None },
            witness: None,
            note: format!(
                "no convergent limit along {:?} within tol {}",
                failed_dirs, cfg.limit_tol
            ),
        }
    } else if worst < cfg.zero_tol {
        ConditionReport {
            pass: false,
            inf: Some(worst),
            witness: witness.clone(),
            note: "singular limit fiber".into(),
        }
    } else if worst >= cfg.inv_tol {
        ConditionReport {
            pass: true,
            inf: Some(worst),
            witness: None,
            note: format!("smallest limit fiber margin {worst:.3e}"),
        }
    } else {
        ConditionReport {
            pass: false,
            inf: Some(worst),
            witness,
            note: format!("limit fiber margin {worst:.3e} below inv_tol {}", cfg.inv_tol),
        }
    };
    Ok((report, family))
}

fn merge_verdict(conds: &Conditions) -> Verdict {
    for c in [&conds.edge, &conds.vertex, &conds.infinity] {
        if let Some(w) = &c.witness {
            if !c.pass {
                return Verdict::NotFredholm(w.clone());
            }
        }
    }
    if conds.edge.pass && conds.vertex.pass && conds.infinity.pass {
        return Verdict::Fredholm;
    }
    let mut reasons = Vec::new();
    for (name, c) in [
        ("edge", &conds.edge),
        ("vertex", &conds.vertex),
        ("infinity", &conds.infinity),
    ] {
        if !c.pass {
            reasons.push(format!("{name}: {}", c.note));
        }
    }
    Verdict::Inconclusive(reasons.join("; "))
}

fn skipped_condition() -> ConditionReport {
    ConditionReport {
        pass: false,
        inf: None,
        witness: None,
        note: "skipped: an earlier condition produced a witness".into(),
    }
}

pub fn check_fredholm_sio(
    op: &SioOperator,
    cfg: &FredholmConfig,
) -> Result<FredholmReport, FredholmError> {
    let interval = (-1.0 / cfg.p, 1.0 - 1.0 / cfg.p);
    let r_grid = geometric_grid(op.weight.eps, cfg.r_points, cfg.r_shrink * op.weight.eps);
    let wrep = check_weight_class(&op.weight, interval, &r_grid, cfg.delta_margin, 0.1)?;
    if !wrep.pass {
        return Err(FredholmError::WeightOutOfClass {
            inf: wrep.inf_kappa,
            sup: wrep.sup_kappa,
            lo: interval.0,
            hi: interval.1,
        });
    }
    let edge = edge_condition_sio(op, cfg)?;
    let vertex = vertex_condition_sio(op, cfg)?;
    // a pointwise witness already settles the verdict; skip the
    // discretization
    if edge.witness.is_some() || vertex.witness.is_some() {
        let conditions = Conditions {
            edge,
            vertex,
            infinity: skipped_condition(),
        };
        return Ok(FredholmReport {
            verdict: merge_verdict(&conditions),
            conditions,
            thresholds: cfg.thresholds(),
            scanned_limit_family: Vec::new(),
            caveat: LIMIT_FAMILY_CAVEAT.into(),
        });
    }
    let mesh = Arc::new(mesh_graph(op.graph.clone(), cfg.mesh_panels, cfg.mesh_order));
    let band = assemble_sio(
        &op.phi,
        mesh,
        &SioAssembleConfig {
            band_radius: cfg.band_radius,
            tail_tol: cfg.band_tail_tol,
            ..SioAssembleConfig::default()
        },
    )?;
    let (infinity, family) = infinity_condition(&band, &op.a, &op.b, cfg)?;
    let conditions = Conditions {
        edge,
        vertex,
        infinity,
    };
    Ok(FredholmReport {
        verdict: merge_verdict(&conditions),
        conditions,
        thresholds: cfg.thresholds(),
        scanned_limit_family: family,
        caveat: LIMIT_FAMILY_CAVEAT.into(),
    })
}

fn edge_condition_conv(op: &ConvOperator, cfg: &FredholmConfig) -> ConditionReport {
    let mut inf = f64::INFINITY;
    let mut witness = None;
    for offset in cfg.scan_offsets(op.graph.rank) {
        for (ei, e) in op.graph.edges.iter().enumerate() {
            for i in 0..cfg.edge_samples {
                let coord = (i as f64 + 0.5) * e.length / cfg.edge_samples as f64;
                let v = op.a.eval_parts(ei, coord, &offset);
                let n = v.norm();
                if n < inf {
                    inf = n;
                }
                if n < cfg.zero_tol && witness.is_none() {
                    witness = Some(Witness::EdgePoint {
                        edge: ei,
                        coord,
                        cell: offset.coords[..op.graph.rank].to_vec(),
                        branch: 1,
                        value: [v.re, v.im],
                    });
                }
            }
        }
    }
    classify(inf, witness, cfg, "coefficient a")
}

pub fn check_fredholm_conv(
    op: &ConvOperator,
    cfg: &FredholmConfig,
) -> Result<FredholmReport, FredholmError> {
    let edge = edge_condition_conv(op, cfg);
    let vertex = ConditionReport {
        pass: true,
        inf: None,
        witness: None,
        note: "no vertex condition for locally compact kernels".into(),
    };
    if edge.witness.is_some() {
        let conditions = Conditions {
            edge,
            vertex,
            infinity: skipped_condition(),
        };
        return Ok(FredholmReport {
            verdict: merge_verdict(&conditions),
            conditions,
            thresholds: cfg.thresholds(),
            scanned_limit_family: Vec::new(),
            caveat: LIMIT_FAMILY_CAVEAT.into(),
        });
    }
    let mesh = Arc::new(mesh_graph(op.graph.clone(), cfg.mesh_panels, cfg.mesh_order));
    let band = assemble_convolution(&op.kernel, mesh, cfg.band_radius, cfg.band_tail_tol)?;
    let (infinity, family) = infinity_condition(&band, &op.a, &op.b, cfg)?;
    let conditions = Conditions {
        edge,
        vertex,
        infinity,
    };
    Ok(FredholmReport {
        verdict: merge_verdict(&conditions),
        conditions,
        thresholds: cfg.thresholds(),
        scanned_limit_family: family,
        caveat: LIMIT_FAMILY_CAVEAT.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::line_graph;
    use std::f64::consts::PI;

    type C = Complex64;

    fn unit_weight() -> Weight {
        Weight::one((-0.5, 0.5), 0.4)
    }

    fn gaussian_phi(graph: Arc<MetricGraph>) -> KernelModulation {
        KernelModulation::from_position_fn(
            graph,
            |_, z| C::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0),
            4,
        )
    }

    fn quick_cfg() -> FredholmConfig {
        FredholmConfig {
            lambda_points: 81,
            r_points: 20,
            tau_grid: 64,
            shift_max_exp: 16,
            ..FredholmConfig::default()
        }
    }

    #[test]
    fn identity_is_fredholm() {
        let g = line_graph();
        let op = SioOperator {
            graph: g.clone(),
            a: PCFunction::constant(g.clone(), C::new(1.0, 0.0)),
            b: PCFunction::constant(g.clone(), C::new(0.0, 0.0)),
            phi: gaussian_phi(g),
            weight: unit_weight(),
        };
        let rep = check_fredholm_sio(&op, &quick_cfg()).unwrap();
        assert_eq!(rep.verdict, Verdict::Fredholm);
        assert!(rep.conditions.edge.pass && rep.conditions.vertex.pass);
        assert!((rep.conditions.infinity.inf.unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(rep.caveat, LIMIT_FAMILY_CAVEAT);
    }

    #[test]
    fn cancelling_branch_is_not_fredholm() {
        let g = line_graph();
        let op = SioOperator {
            graph: g.clone(),
            a: PCFunction::constant(g.clone(), C::new(1.0, 0.0)),
            b: PCFunction::constant(g.clone(), C::new(1.0, 0.0)),
            phi: KernelModulation::constant(g, C::new(1.0, 0.0)),
            weight: unit_weight(),
        };
        // constant phi has no decaying band, but the edge witness settles the
        // verdict before any discretization is attempted
        let rep = check_fredholm_sio(&op, &quick_cfg()).unwrap();
        match &rep.verdict {
            Verdict::NotFredholm(Witness::EdgePoint { branch, value, .. }) => {
                assert_eq!(*branch, -1);
                assert!(value[0].abs() < 1e-14);
            }
            v => panic!("unexpected verdict {v:?}"),
        }
        // field-exact JSON round trip
        let s = serde_json::to_string(&rep).unwrap();
        let back: FredholmReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn oscillating_coefficient_sio_is_fredholm() {
        let g = line_graph();
        let op = SioOperator {
            graph: g.clone(),
            a: PCFunction::from_position_fn(g.clone(), |p| {
                C::new(2.0 + (2.0 * PI * p[0]).sin(), 0.0)
            }),
            b: PCFunction::constant(g.clone(), C::new(0.5, 0.0)),
            phi: gaussian_phi(g),
            weight: unit_weight(),
        };
        let rep = check_fredholm_sio(&op, &quick_cfg()).unwrap();
        assert_eq!(rep.verdict, Verdict::Fredholm, "{:#?}", rep.conditions);
    }

    #[test]
    fn verdict_monotone_in_thresholds() {
        let g = line_graph();
        let op = SioOperator {
            graph: g.clone(),
            a: PCFunction::from_position_fn(g.clone(), |p| {
                C::new(2.0 + (2.0 * PI * p[0]).sin(), 0.0)
            }),
            b: PCFunction::constant(g.clone(), C::new(0.5, 0.0)),
            phi: gaussian_phi(g),
            weight: unit_weight(),
        };
        let mut cfg = quick_cfg();
        cfg.det_threshold = 10.0;
        let rep = check_fredholm_sio(&op, &cfg).unwrap();
        assert!(matches!(rep.verdict, Verdict::Inconclusive(_)), "{:?}", rep.verdict);
    }

    #[test]
    fn weight_out_of_class_is_rejected() {
        let g = line_graph();
        let op = SioOperator {
            graph: g.clone(),
            a: PCFunction::constant(g.clone(), C::new(1.0, 0.0)),
            b: PCFunction::constant(g.clone(), C::new(0.0, 0.0)),
            phi: gaussian_phi(g),
            weight: Weight::power(0.9, (-0.5, 0.5), 0.4),
        };
        assert!(matches!(
            check_fredholm_sio(&op, &quick_cfg()),
            Err(FredholmError::WeightOutOfClass { .. })
        ));
    }

    fn gaussian_kernel() -> ConvKernel {
        Arc::new(|z: [f64; 2]| C::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0))
    }

    #[test]
    fn decaying_b_conv_is_fredholm() {
        let g = line_graph();
        let op = ConvOperator {
            graph: g.clone(),
            a: PCFunction::from_position_fn(g.clone(), |p| {
                C::new(2.0 + 0.3 * p[0].atan() / (PI / 2.0), 0.0)
            }),
            b: PCFunction::from_position_fn(g, |p| C::new(1.0 / (1.0 + p[0].abs()), 0.0)),
            kernel: gaussian_kernel(),
        };
        let mut cfg = quick_cfg();
        cfg.limit_tol = 1e-3;
        let rep = check_fredholm_conv(&op, &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Fredholm, "{:#?}", rep.conditions);
        // b drops out in the limit, so the fibers are diagonal with margin
        // near inf |a^h| = 1.7
        assert!((rep.conditions.infinity.inf.unwrap() - 1.7).abs() < 1e-2);
    }

    #[test]
    fn interior_zero_of_a_is_witnessed() {
        let g = line_graph();
        // zero placed on a scan sample: x = 9.5/40
        let x0 = 9.5 / 40.0;
        let op = ConvOperator {
            graph: g.clone(),
            a: PCFunction::from_position_fn(g.clone(), move |p| {
                C::new((2.0 * PI * (p[0] - x0)).sin() + 0.0, 0.0)
            }),
            b: PCFunction::constant(g, C::new(0.0, 0.0)),
            kernel: gaussian_kernel(),
        };
        let rep = check_fredholm_conv(&op, &quick_cfg()).unwrap();
        match &rep.verdict {
            Verdict::NotFredholm(Witness::EdgePoint { coord, .. }) => {
                assert!((coord - x0).abs() < 1e-12);
            }
            v => panic!("unexpected verdict {v:?}"),
        }
    }

    #[test]
    fn gaussian_conv_shifted_is_fredholm() {
        let g = line_graph();
        let op = ConvOperator {
            graph: g.clone(),
            a: PCFunction::constant(g.clone(), C::new(2.0, 0.0)),
            b: PCFunction::constant(g, C::new(-1.0, 0.0)),
            kernel: gaussian_kernel(),
        };
        let rep = check_fredholm_conv(&op, &quick_cfg()).unwrap();
        assert_eq!(rep.verdict, Verdict::Fredholm);
        // spectrum of the limit fibers is 2 - [0, sqrt(pi)]
        let margin = rep.conditions.infinity.inf.unwrap();
        assert!((margin - (2.0 - PI.sqrt())).abs() < 1e-2, "margin {margin}");
    }

    #[test]
    fn b_zero_reduces_to_multiplication_criterion() {
        let g = line_graph();
        let a = PCFunction::from_position_fn(g.clone(), |p| {
            C::new(1.5 + 0.5 * (2.0 * PI * p[0]).cos(), 0.0)
        });
        let zero = PCFunction::constant(g.clone(), C::new(0.0, 0.0));
        let sio = SioOperator {
            graph: g.clone(),
            a: a.clone(),
            b: zero.clone(),
            phi: gaussian_phi(g.clone()),
            weight: unit_weight(),
        };
        let conv = ConvOperator {
            graph: g,
            a,
            b: zero,
            kernel: gaussian_kernel(),
        };
        let cfg = quick_cfg();
        let r1 = check_fredholm_sio(&sio, &cfg).unwrap();
        let r2 = check_fredholm_conv(&conv, &cfg).unwrap();
        assert_eq!(r1.verdict, Verdict::Fredholm);
        assert_eq!(r2.verdict, Verdict::Fredholm);
        // both reduce to inf |a| = 1 on the scan grid
        let i1 = r1.conditions.edge.inf.unwrap();
        let i2 = r2.conditions.edge.inf.unwrap();
        assert!((i1 - i2).abs() < 1e-12);
        assert!((i1 - 1.0).abs() < 1e-2);
    }
}
