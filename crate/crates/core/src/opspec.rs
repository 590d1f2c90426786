//! Operator spec files: JSON descriptions of aI + bT operators with
//! expression-backed coefficients, plus builders turning them into coefficient
//! functions and band discretizations.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assemble::{
    assemble_convolution, assemble_multiplication, assemble_sio, mesh_graph, zero_band,
    AssembleError, BandOperator, ConvKernel, Mesh, SioAssembleConfig,
};
use crate::expr::{Compiled, ExprError};
use crate::fredholm::{ConvOperator, SioOperator};
use crate::functions::{PCFunction, Weight};
use crate::graph::{GraphError, GraphSpec, MetricGraph};
use crate::sio::KernelModulation;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error("operator kind `{0}` is not supported by this command")]
    UnsupportedKind(String),
    #[error("sum specs must contain at least one term")]
    EmptySum,
}

/// A real scalar field given either literally or as an expression.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RealExpr {
    Literal(f64),
    Formula(String),
}

pub(crate) enum Scalar {
    Const(f64),
    Expr(Compiled),
}

impl Scalar {
    fn eval(&self, vals: &[f64]) -> f64 {
        match self {
            Scalar::Const(c) => *c,
            Scalar::Expr(e) => e.eval(vals),
        }
    }
}

impl RealExpr {
    fn compile(&self, vars: &[&str]) -> Result<Scalar, ExprError> {
        match self {
            RealExpr::Literal(c) => Ok(Scalar::Const(*c)),
            RealExpr::Formula(s) => Ok(Scalar::Expr(Compiled::parse(s, vars)?)),
        }
    }
}

/// A complex scalar field: real-valued shorthand or explicit re/im parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffExpr {
    Real(RealExpr),
    Complex { re: RealExpr, im: RealExpr },
}

/// Coefficient expressions see the local coordinate, the cell offset and the
/// embedded position.
pub const COEFF_VARS: [&str; 6] = ["t", "c1", "c2", "edge", "x1", "x2"];
/// Modulation expressions see the edge index, the local coordinate and the
/// kernel displacement.
pub const PHI_VARS: [&str; 4] = ["x_edge", "x_coord", "z1", "z2"];
/// Convolution kernels see the displacement only.
pub const KERNEL_VARS: [&str; 2] = ["z1", "z2"];

impl CoeffExpr {
    pub fn constant(c: f64) -> Self {
        CoeffExpr::Real(RealExpr::Literal(c))
    }

    fn compile(&self, vars: &[&str]) -> Result<(Scalar, Option<Scalar>), ExprError> {
        match self {
            CoeffExpr::Real(r) => Ok((r.compile(vars)?, None)),
            CoeffExpr::Complex { re, im } => Ok((re.compile(vars)?, Some(im.compile(vars)?))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiSpec {
    pub expr: CoeffExpr,
    #[serde(default = "default_decay_order")]
    pub decay_order: usize,
}

fn default_decay_order() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OperatorKind {
    Multiplication {
        a: CoeffExpr,
    },
    Sio {
        a: CoeffExpr,
        b: CoeffExpr,
        phi: PhiSpec,
    },
    Convolution {
        a: CoeffExpr,
        b: CoeffExpr,
        kernel: CoeffExpr,
    },
    Sum {
        terms: Vec<OperatorKind>,
    },
}

/// Graph given inline or as a path relative to the spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphRef {
    Path(String),
    Inline(GraphSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshParams {
    #[serde(default = "default_panels")]
    pub panels_per_unit_length: usize,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_panels() -> usize {
    4
}
fn default_order() -> usize {
    4
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            panels_per_unit_length: default_panels(),
            order: default_order(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandParams {
    #[serde(default = "default_band_radius")]
    pub radius: i64,
    #[serde(default = "default_band_tail")]
    pub tail_tol: f64,
}

fn default_band_radius() -> i64 {
    16
}
fn default_band_tail() -> f64 {
    1e-4
}

impl Default for BandParams {
    fn default() -> Self {
        BandParams {
            radius: default_band_radius(),
            tail_tol: default_band_tail(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightParams {
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "default_weight_eps")]
    pub eps: f64,
}

fn default_weight_eps() -> f64 {
    0.25
}

impl Default for WeightParams {
    fn default() -> Self {
        WeightParams {
            kappa: 0.0,
            eps: default_weight_eps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub graph: GraphRef,
    pub operator: OperatorKind,
    #[serde(default)]
    pub mesh: MeshParams,
    #[serde(default)]
    pub band: BandParams,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub weight: WeightParams,
}

fn default_p() -> f64 {
    2.0
}

impl OperatorSpec {
    pub fn load(path: &Path) -> Result<OperatorSpec, SpecError> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: OperatorSpec = serde_json::from_str(&text)?;
        if let GraphRef::Path(rel) = &spec.graph {
            let gp = path.parent().unwrap_or(Path::new(".")).join(rel);
            let gtext = std::fs::read_to_string(&gp)?;
            spec.graph = GraphRef::Inline(serde_json::from_str(&gtext)?);
        }
        Ok(spec)
    }

    pub fn build_graph(&self) -> Result<Arc<MetricGraph>, SpecError> {
        match &self.graph {
            GraphRef::Inline(g) => Ok(MetricGraph::build(g)?),
            GraphRef::Path(p) => {
                let text = std::fs::read_to_string(p)?;
                let g: GraphSpec = serde_json::from_str(&text)?;
                Ok(MetricGraph::build(&g)?)
            }
        }
    }

    pub fn build_mesh(&self, graph: Arc<MetricGraph>) -> Arc<Mesh> {
        Arc::new(mesh_graph(
            graph,
            self.mesh.panels_per_unit_length,
            self.mesh.order,
        ))
    }

    pub fn build_weight(&self) -> Weight {
        let interval = (-1.0 / self.p, 1.0 - 1.0 / self.p);
        if self.weight.kappa == 0.0 {
            Weight::one(interval, self.weight.eps)
        } else {
            Weight::power(self.weight.kappa, interval, self.weight.eps)
        }
    }
}

pub fn build_coefficient(
    expr: &CoeffExpr,
    graph: Arc<MetricGraph>,
) -> Result<PCFunction, SpecError> {
    let (re, im) = expr.compile(&COEFF_VARS)?;
    let gr = graph.clone();
    Ok(PCFunction::new(
        graph,
        Arc::new(move |edge, t, offset| {
            let p = gr.position(&crate::graph::GraphPoint {
                edge,
                coord: t,
                offset: *offset,
            });
            let vals = [
                t,
                offset.coords[0] as f64,
                offset.coords[1] as f64,
                edge as f64,
                p[0],
                p[1],
            ];
            let r = re.eval(&vals);
            let i = im.as_ref().map_or(0.0, |c| c.eval(&vals));
            Complex64::new(r, i)
        }),
    ))
}

pub fn build_phi(spec: &PhiSpec, graph: Arc<MetricGraph>) -> Result<KernelModulation, SpecError> {
    let (re, im) = spec.expr.compile(&PHI_VARS)?;
    Ok(KernelModulation::new(
        graph,
        Arc::new(move |edge, t, _offset, z| {
            let vals = [edge as f64, t, z[0], z[1]];
            let r = re.eval(&vals);
            let i = im.as_ref().map_or(0.0, |c| c.eval(&vals));
            Complex64::new(r, i)
        }),
        spec.decay_order,
    ))
}

pub fn build_kernel(expr: &CoeffExpr) -> Result<ConvKernel, SpecError> {
    let (re, im) = expr.compile(&KERNEL_VARS)?;
    Ok(Arc::new(move |z: [f64; 2]| {
        let vals = [z[0], z[1]];
        let r = re.eval(&vals);
        let i = im.as_ref().map_or(0.0, |c| c.eval(&vals));
        Complex64::new(r, i)
    }))
}

/// The a, b, T decomposition of a single (non-sum) operator: coefficients
/// plus the kernel part discretized as a band. Pure multiplication has no
/// kernel part.
pub struct BuiltOperator {
    pub a: PCFunction,
    pub b: Option<PCFunction>,
    pub kernel_band: Option<BandOperator>,
}

pub fn build_operator(
    kind: &OperatorKind,
    spec: &OperatorSpec,
    graph: Arc<MetricGraph>,
    mesh: Arc<Mesh>,
) -> Result<BuiltOperator, SpecError> {
    match kind {
        OperatorKind::Multiplication { a } => Ok(BuiltOperator {
            a: build_coefficient(a, graph)?,
            b: None,
            kernel_band: None,
        }),
        OperatorKind::Sio { a, b, phi } => {
            let band = assemble_sio(
                &build_phi(phi, graph.clone())?,
                mesh,
                &SioAssembleConfig {
                    band_radius: spec.band.radius,
                    tail_tol: spec.band.tail_tol,
                    ..SioAssembleConfig::default()
                },
            )?;
            Ok(BuiltOperator {
                a: build_coefficient(a, graph.clone())?,
                b: Some(build_coefficient(b, graph)?),
                kernel_band: Some(band),
            })
        }
        OperatorKind::Convolution { a, b, kernel } => {
            let band = assemble_convolution(
                &build_kernel(kernel)?,
                mesh,
                spec.band.radius,
                spec.band.tail_tol,
            )?;
            Ok(BuiltOperator {
                a: build_coefficient(a, graph.clone())?,
                b: Some(build_coefficient(b, graph)?),
                kernel_band: Some(band),
            })
        }
        OperatorKind::Sum { .. } => Err(SpecError::UnsupportedKind("sum".into())),
    }
}

/// Full band of aI + bT (nodewise coefficients folded into the blocks). Sums
/// assemble termwise and add.
pub fn assemble_full_band(
    kind: &OperatorKind,
    spec: &OperatorSpec,
    graph: Arc<MetricGraph>,
    mesh: Arc<Mesh>,
) -> Result<BandOperator, SpecError> {
    match kind {
        OperatorKind::Sum { terms } => {
            let mut it = terms.iter();
            let first = it.next().ok_or(SpecError::EmptySum)?;
            let mut band = assemble_full_band(first, spec, graph.clone(), mesh.clone())?;
            for term in it {
                let next = assemble_full_band(term, spec, graph.clone(), mesh.clone())?;
                band.add(&next);
            }
            Ok(band)
        }
        OperatorKind::Multiplication { a } => {
            let af = build_coefficient(a, graph)?;
            Ok(assemble_multiplication(&af, mesh))
        }
        _ => {
            let built = build_operator(kind, spec, graph, mesh.clone())?;
            let mut band = match built.kernel_band {
                Some(b) => b,
                None => zero_band(mesh.clone()),
            };
            if let Some(bf) = &built.b {
                let vals: Vec<Complex64> = (0..mesh.n0())
                    .map(|i| bf.eval(&mesh.point(i)))
                    .collect();
                band.scale_rows(&vals);
            }
            let avals: Vec<Complex64> = (0..mesh.n0())
                .map(|i| built.a.eval(&mesh.point(i)))
                .collect();
            band.add_diagonal(&avals);
            Ok(band)
        }
    }
}

/// Interpret the spec as an aI + b S operator for the Fredholm check.
pub fn as_sio_operator(spec: &OperatorSpec) -> Result<SioOperator, SpecError> {
    let graph = spec.build_graph()?;
    match &spec.operator {
        OperatorKind::Sio { a, b, phi } => Ok(SioOperator {
            graph: graph.clone(),
            a: build_coefficient(a, graph.clone())?,
            b: build_coefficient(b, graph.clone())?,
            phi: build_phi(phi, graph)?,
            weight: spec.build_weight(),
        }),
        OperatorKind::Multiplication { a } => Ok(SioOperator {
            graph: graph.clone(),
            a: build_coefficient(a, graph.clone())?,
            b: PCFunction::constant(graph.clone(), Complex64::new(0.0, 0.0)),
            phi: KernelModulation::constant(graph, Complex64::new(1.0, 0.0)),
            weight: spec.build_weight(),
        }),
        k => Err(SpecError::UnsupportedKind(kind_name(k).into())),
    }
}

/// Interpret the spec as an aI + bT operator with locally compact kernel.
pub fn as_conv_operator(spec: &OperatorSpec) -> Result<ConvOperator, SpecError> {
    let graph = spec.build_graph()?;
    match &spec.operator {
        OperatorKind::Convolution { a, b, kernel } => Ok(ConvOperator {
            graph: graph.clone(),
            a: build_coefficient(a, graph.clone())?,
            b: build_coefficient(b, graph)?,
            kernel: build_kernel(kernel)?,
        }),
        OperatorKind::Multiplication { a } => Ok(ConvOperator {
            graph: graph.clone(),
            a: build_coefficient(a, graph.clone())?,
            b: PCFunction::constant(graph, Complex64::new(0.0, 0.0)),
            kernel: Arc::new(|_| Complex64::new(0.0, 0.0)),
        }),
        k => Err(SpecError::UnsupportedKind(kind_name(k).into())),
    }
}

pub fn kind_name(k: &OperatorKind) -> &'static str {
    match k {
        OperatorKind::Multiplication { .. } => "multiplication",
        OperatorKind::Sio { .. } => "sio",
        OperatorKind::Convolution { .. } => "convolution",
        OperatorKind::Sum { .. } => "sum",
    }
}
