//! Fourier symbol of the modulated singular integral along an edge: scan
//! sigma(xi) for a Gaussian modulation and watch it approach sgn(xi).

use num_complex::Complex64;
use perigraph::graph::{line_graph, GraphPoint, GroupElement};
use perigraph::sio::{fourier_symbol_phi, KernelModulation, PhiQuadConfig};

fn main() {
    let g = line_graph();
    let phi = KernelModulation::from_position_fn(
        g,
        |_, z| Complex64::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0),
        4,
    );
    let x = GraphPoint {
        edge: 0,
        coord: 0.5,
        offset: GroupElement::new(&[0]),
    };
    let cfg = PhiQuadConfig::default();

    println!("{:>8}  {:>12}  {:>12}", "xi", "sigma", "|sigma - sgn|");
    for xi in [-8.0, -4.0, -2.0, -0.5, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let (sigma, dist) = fourier_symbol_phi(&phi, &x, xi, &cfg).unwrap();
        println!("{xi:8.2}  {:12.8}  {dist:12.3e}", sigma.re);
    }
}
