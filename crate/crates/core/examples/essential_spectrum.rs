//! Essential spectrum of 2 - conv(gaussian) on the periodic line: assemble
//! the band, reduce to Floquet fibers, and export the eigenvalue cloud.

use std::sync::Arc;

use num_complex::Complex64;
use perigraph::assemble::{assemble_convolution, mesh_graph, ConvKernel};
use perigraph::floquet::{essential_spectrum, fiber_blocks, fiber_invertibility_scan};
use perigraph::functions::PCFunction;
use perigraph::graph::line_graph;

fn main() {
    let g = line_graph();
    let mesh = Arc::new(mesh_graph(g.clone(), 8, 4));
    let kernel: ConvKernel =
        Arc::new(|z| Complex64::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0));
    let band = assemble_convolution(&kernel, mesh, 16, 1e-6).unwrap();
    println!(
        "band with {} blocks, tail bound {:.2e}",
        band.blocks.len(),
        band.tail_bound
    );

    let a = PCFunction::constant(g.clone(), Complex64::new(2.0, 0.0));
    let b = PCFunction::constant(g, Complex64::new(-1.0, 0.0));
    let fam = fiber_blocks(&band, Some(&a), Some(&b)).unwrap();

    let est = essential_spectrum(&fam, 256, &[Complex64::new(0.0, 0.0)]).unwrap();
    let (lo, hi) = est.points().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
        (l.min(p.re), h.max(p.re))
    });
    println!(
        "cloud of {} points, real range [{lo:.4}, {hi:.4}] (expect [2 - sqrt(pi), 2])",
        est.cloud.len()
    );

    let margin = fiber_invertibility_scan(&fam, 256).unwrap();
    println!(
        "distance of 0 to the spectrum: {:.4} at tau index {:?}",
        margin.margin, margin.argmin
    );

    let out = std::env::temp_dir().join("essential_spectrum.csv");
    std::fs::write(&out, est.to_csv()).unwrap();
    println!("cloud written to {}", out.display());
}
