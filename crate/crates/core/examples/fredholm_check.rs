//! Full three-condition Fredholm check of a I + b S with a Gaussian kernel
//! modulation on the periodic line.

use num_complex::Complex64;
use perigraph::fredholm::{check_fredholm_sio, FredholmConfig, SioOperator};
use perigraph::functions::{PCFunction, Weight};
use perigraph::graph::line_graph;
use perigraph::sio::KernelModulation;

fn main() {
    let g = line_graph();
    let op = SioOperator {
        graph: g.clone(),
        a: PCFunction::from_position_fn(g.clone(), |p| {
            Complex64::new(2.0 + (2.0 * std::f64::consts::PI * p[0]).sin(), 0.0)
        }),
        b: PCFunction::constant(g.clone(), Complex64::new(0.5, 0.0)),
        phi: KernelModulation::from_position_fn(
            g,
            |_, z| Complex64::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0),
            4,
        ),
        weight: Weight::one((-0.5, 0.5), 0.4),
    };

    let report = check_fredholm_sio(&op, &FredholmConfig::default()).unwrap();
    println!("verdict: {:?}", report.verdict);
    for (name, c) in [
        ("edge", &report.conditions.edge),
        ("vertex", &report.conditions.vertex),
        ("infinity", &report.conditions.infinity),
    ] {
        println!("  {name:9} pass={} inf={:?}  {}", c.pass, c.inf, c.note);
    }
    println!("scanned family: {:?}", report.scanned_limit_family);
    println!("caveat: {}", report.caveat);
    println!();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
