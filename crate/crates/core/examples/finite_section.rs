//! Brute-force cross-check: eigenvalues of a large finite section against
//! the Floquet fiber cloud of the same band operator.

use std::sync::Arc;

use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use perigraph::assemble::{assemble_convolution, mesh_graph, ConvKernel};
use perigraph::floquet::{essential_spectrum, fiber_blocks};
use perigraph::graph::line_graph;

fn main() {
    let mesh = Arc::new(mesh_graph(line_graph(), 4, 4));
    let kernel: ConvKernel =
        Arc::new(|z| Complex64::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0));
    let band = assemble_convolution(&kernel, mesh, 12, 1e-8).unwrap();

    let fam = fiber_blocks(&band, None, None).unwrap();
    let cloud = essential_spectrum(&fam, 128, &[]).unwrap().points();

    for rho in [10, 20, 40] {
        let s = band.finite_section_real(rho).expect("real band");
        let (ev, _) = s.eigh(UPLO::Lower).unwrap();
        let worst = ev
            .iter()
            .map(|&e| {
                cloud
                    .iter()
                    .map(|c| (c - Complex64::new(e, 0.0)).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        println!(
            "radius {rho:3}: section {}x{}, max eigenvalue distance to cloud {worst:.2e}",
            s.nrows(),
            s.ncols()
        );
    }
}
