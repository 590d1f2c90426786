//! Limit operators of a slowly oscillating coefficient: extract the constant
//! limits of 3 + arctan(x) at plus and minus infinity along dyadic shifts.

use num_complex::Complex64;
use perigraph::assemble::{mesh_graph, zero_band};
use perigraph::floquet::limit_operator_band;
use perigraph::functions::{PCFunction, SOFunction};
use perigraph::graph::{line_graph, GroupElement};
use std::sync::Arc;

fn main() {
    let g = line_graph();
    let mesh = Arc::new(mesh_graph(g.clone(), 4, 4));
    let band = zero_band(mesh);
    let a = SOFunction(PCFunction::from_position_fn(g.clone(), |p| {
        Complex64::new(3.0 + p[0].atan(), 0.0)
    }));
    let b = SOFunction(PCFunction::constant(g, Complex64::new(0.0, 0.0)));

    for (label, sign) in [("x -> +inf", 1i64), ("x -> -inf", -1i64)] {
        let h: Vec<GroupElement> = (8..=24)
            .map(|k| GroupElement::new(&[sign * (1i64 << k)]))
            .collect();
        let fam = limit_operator_band(&band, &a, &b, &h, 1e-4).unwrap();
        // the limit coefficient is constant across the cell
        let v = fam.a[0];
        println!(
            "{label}: limit coefficient {:.8} (expect {:.8})",
            v.re,
            3.0 + sign as f64 * std::f64::consts::FRAC_PI_2
        );
    }
}
