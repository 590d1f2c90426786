//! Command line front end: graph validation, symbol scans, Fredholm checks,
//! essential spectrum estimates and finite-section cross-checks, all driven
//! by JSON spec files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndarray_linalg::{Determinant, Eig};
use num_complex::Complex64;

use perigraph::floquet::{essential_spectrum, fiber_blocks, fiber_invertibility_scan};
use perigraph::fredholm::{check_fredholm_conv, check_fredholm_sio, FredholmConfig, Verdict};
use perigraph::functions::geometric_grid;
use perigraph::graph::{GraphSpec, MetricGraph};
use perigraph::opspec::{
    as_conv_operator, as_sio_operator, assemble_full_band, build_operator, kind_name, OperatorKind,
    OperatorSpec,
};
use perigraph::sio::{edge_symbol, vertex_symbol_a};

#[derive(Parser)]
#[command(name = "perigraph", about = "Fredholm analysis of operators on periodic metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a graph spec file.
    Validate { graph: PathBuf },
    /// Scan a pointwise symbol and export it as CSV.
    Symbol {
        #[command(subcommand)]
        which: SymbolCommand,
    },
    /// Run the three-condition Fredholm check.
    CheckFredholm {
        operator: PathBuf,
        /// Override the exponent p of the spec file.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Estimate the essential spectrum as a fiber eigenvalue cloud.
    EssSpectrum {
        operator: PathBuf,
        #[arg(long, default_value_t = 128)]
        tau_grid: usize,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Brute-force cross-checks against dense discretizations.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Subcommand)]
enum SymbolCommand {
    /// Fourier symbol along an edge: CSV columns xi, lambda, re, im, abs.
    Edge {
        operator: PathBuf,
        #[arg(long, default_value_t = 0)]
        edge: usize,
        #[arg(long, default_value_t = 0.5)]
        coord: f64,
        #[arg(long, default_value_t = 10.0)]
        xi_max: f64,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Mellin symbol determinant at a vertex: CSV columns r, lambda, re, im,
    /// abs.
    Vertex {
        operator: PathBuf,
        #[arg(long, default_value_t = 0)]
        vertex: usize,
        #[arg(long, default_value_t = 61)]
        grid: usize,
        #[arg(long, default_value_t = 20)]
        r_points: usize,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Compare finite-section eigenvalues with the fiber cloud.
    FiniteSection {
        operator: PathBuf,
        #[arg(long, default_value_t = 30)]
        radius: i64,
        #[arg(long, default_value_t = 128)]
        tau_grid: usize,
        #[arg(long, default_value_t = 5e-2)]
        tol: f64,
    },
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<(), Box<dyn std::error::Error>> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Validate { graph } => {
            let text = std::fs::read_to_string(&graph)?;
            let spec: GraphSpec = serde_json::from_str(&text)?;
            let g = MetricGraph::build(&spec)?;
            println!(
                "ok: rank {} cell with {} vertex orbits, {} edge orbits",
                g.rank,
                g.vertices.len(),
                g.edges.len()
            );
            Ok(0)
        }
        Command::Symbol { which } => match which {
            SymbolCommand::Edge {
                operator,
                edge,
                coord,
                xi_max,
                grid,
                csv_out,
            } => {
                let spec = OperatorSpec::load(&operator)?;
                let op = as_sio_operator(&spec)?;
                let x = perigraph::graph::GraphPoint {
                    edge,
                    coord,
                    offset: perigraph::graph::GroupElement::zero(op.graph.rank),
                };
                let es = edge_symbol(&op.a, &op.b, &op.phi, &x)?;
                let mut csv = String::from("xi,lambda,re,im,abs\n");
                for i in 0..grid {
                    let xi = -xi_max + 2.0 * xi_max * i as f64 / (grid - 1) as f64;
                    let v = es.at(xi);
                    csv.push_str(&format!("{xi},0,{},{},{}\n", v.re, v.im, v.norm()));
                }
                write_or_print(&csv_out, &csv)?;
                Ok(0)
            }
            SymbolCommand::Vertex {
                operator,
                vertex,
                grid,
                r_points,
                csv_out,
            } => {
                let spec = OperatorSpec::load(&operator)?;
                let op = as_sio_operator(&spec)?;
                let min_len = op
                    .graph
                    .edges
                    .iter()
                    .map(|e| e.length)
                    .fold(f64::INFINITY, f64::min);
                let star_eps = (0.4 * min_len).min(op.weight.eps * 0.999);
                let star = op.graph.vertex_star(vertex, star_eps)?;
                let sym = vertex_symbol_a(&star, &op.a, &op.b, &op.phi, spec.p, &op.weight)?;
                let lam_max = FredholmConfig::default().lambda_halfwidth();
                let mut csv = String::from("r,lambda,re,im,abs\n");
                for &r in &geometric_grid(star.eps, r_points, 1e-6 * star.eps) {
                    for i in 0..grid {
                        let lambda = -lam_max + 2.0 * lam_max * i as f64 / (grid - 1) as f64;
                        match sym.eval(r, Complex64::new(lambda, 0.0)) {
                            Ok(m) => {
                                let det = m.det()?;
                                csv.push_str(&format!(
                                    "{r},{lambda},{},{},{}\n",
                                    det.re,
                                    det.im,
                                    det.norm()
                                ));
                            }
                            Err(_) => {
                                csv.push_str(&format!("{r},{lambda},nan,nan,nan\n"));
                            }
                        }
                    }
                }
                write_or_print(&csv_out, &csv)?;
                Ok(0)
            }
        },
        Command::CheckFredholm {
            operator,
            p,
            json_out,
        } => {
            let mut spec = OperatorSpec::load(&operator)?;
            if let Some(p) = p {
                spec.p = p;
            }
            let cfg = FredholmConfig {
                p: spec.p,
                ..FredholmConfig::default()
            };
            let report = match &spec.operator {
                OperatorKind::Convolution { .. } => {
                    check_fredholm_conv(&as_conv_operator(&spec)?, &cfg)?
                }
                OperatorKind::Sio { .. } | OperatorKind::Multiplication { .. } => {
                    check_fredholm_sio(&as_sio_operator(&spec)?, &cfg)?
                }
                k => {
                    return Err(Box::new(perigraph::opspec::SpecError::UnsupportedKind(
                        kind_name(k).into(),
                    )))
                }
            };
            let json = serde_json::to_string_pretty(&report)?;
            if let Some(path) = &json_out {
                std::fs::write(path, &json)?;
            }
            println!("{json}");
            Ok(match report.verdict {
                Verdict::Fredholm => 0,
                Verdict::NotFredholm(_) => 2,
                Verdict::Inconclusive(_) => 3,
            })
        }
        Command::EssSpectrum {
            operator,
            tau_grid,
            csv_out,
        } => {
            let spec = OperatorSpec::load(&operator)?;
            let graph = spec.build_graph()?;
            let mesh = spec.build_mesh(graph.clone());
            let fam = match &spec.operator {
                OperatorKind::Sum { .. } => {
                    let band =
                        assemble_full_band(&spec.operator, &spec, graph.clone(), mesh.clone())?;
                    fiber_blocks(&band, None, None)?
                }
                kind => {
                    let built = build_operator(kind, &spec, graph.clone(), mesh.clone())?;
                    let band = built
                        .kernel_band
                        .unwrap_or_else(|| perigraph::assemble::zero_band(mesh.clone()));
                    fiber_blocks(&band, Some(&built.a), built.b.as_ref())?
                }
            };
            let est = essential_spectrum(&fam, tau_grid, &[])?;
            let margin = fiber_invertibility_scan(&fam, tau_grid)?;
            write_or_print(&csv_out, &est.to_csv())?;
            let summary = serde_json::json!({
                "min_margin": margin.margin,
                "argmin_tau": margin.argmin,
                "grid_size": tau_grid,
                "tail_bound": est.tail_bound,
                "points": est.cloud.len(),
            });
            eprintln!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(0)
        }
        Command::Oracle { which } => match which {
            OracleCommand::FiniteSection {
                operator,
                radius,
                tau_grid,
                tol,
            } => {
                let spec = OperatorSpec::load(&operator)?;
                let graph = spec.build_graph()?;
                let mesh = spec.build_mesh(graph.clone());
                let band = assemble_full_band(&spec.operator, &spec, graph, mesh)?;
                let fam = fiber_blocks(&band, None, None)?;
                let cloud = essential_spectrum(&fam, tau_grid, &[])?.points();
                let section = band.finite_section(radius);
                let (eigs, _) = section.eig()?;
                let mut worst = 0.0f64;
                for &e in eigs.iter() {
                    let d = cloud
                        .iter()
                        .map(|&c| (e - c).norm())
                        .fold(f64::INFINITY, f64::min);
                    if d > worst {
                        worst = d;
                    }
                }
                let pass = worst <= tol;
                let summary = serde_json::json!({
                    "radius": radius,
                    "section_dim": section.nrows(),
                    "max_deviation": worst,
                    "tol": tol,
                    "pass": pass,
                });
                println!("{}", serde_json::to_string_pretty(&summary)?);
                Ok(if pass { 0 } else { 3 })
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
