//! Vertex Mellin symbol of a I + b S on the line graph: evaluate the 2x2
//! symbol matrix, scan its determinant, and confirm ellipticity.

use ndarray_linalg::Determinant;
use num_complex::Complex64;
use perigraph::functions::{geometric_grid, PCFunction, Weight};
use perigraph::graph::line_graph;
use perigraph::sio::{vertex_symbol_a, KernelModulation};

fn main() {
    let g = line_graph();
    let a = PCFunction::constant(g.clone(), Complex64::new(2.0, 0.0));
    let b = PCFunction::constant(g.clone(), Complex64::new(0.5, 0.0));
    let phi = KernelModulation::from_position_fn(
        g.clone(),
        |_, z| Complex64::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0),
        4,
    );
    let w = Weight::power(0.2, (-0.5, 0.5), 0.4);

    let star = g.vertex_star(0, 0.25).unwrap();
    let sym = vertex_symbol_a(&star, &a, &b, &phi, 2.0, &w).unwrap();
    println!("symbol size {} at the integer vertices", sym.size());

    let m = sym.eval(0.1, Complex64::new(0.7, 0.0)).unwrap();
    println!("A(0.1, 0.7) = ");
    for i in 0..2 {
        println!("  [{:.6}  {:.6}]", m[(i, 0)], m[(i, 1)]);
    }

    // determinant infimum over (r, lambda): the condition (b) scan
    let mut inf = f64::INFINITY;
    for &r in &geometric_grid(star.eps, 30, 1e-6 * star.eps) {
        for i in 0..81 {
            let lambda = -4.0 + 8.0 * i as f64 / 80.0;
            if let Ok(m) = sym.eval(r, Complex64::new(lambda, 0.0)) {
                inf = inf.min(m.det().unwrap().norm());
            }
        }
    }
    println!("inf |det| over the scan grid: {inf:.6}");
    println!("elliptic: {}", inf > 1e-6);
}
