//! Load a periodic graph from JSON, inspect its cell, and walk a few
//! translated points.

use perigraph::graph::{GraphPoint, GraphSpec, GroupElement, MetricGraph};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/honeycomb.json");
    let spec: GraphSpec = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let g = MetricGraph::build(&spec).unwrap();

    println!("rank {} lattice", g.rank);
    for (i, v) in g.vertices.iter().enumerate() {
        println!(
            "vertex {i} ({}) at {:?}, valency {}",
            v.id,
            v.position,
            g.valency(i)
        );
    }
    for (i, e) in g.edges.iter().enumerate() {
        println!("edge {i} ({}) length {:.4}", e.id, e.length);
    }

    // the same edge point in three different cells
    for c in [[0, 0], [1, 0], [-2, 3]] {
        let p = GraphPoint {
            edge: 0,
            coord: 0.25,
            offset: GroupElement::new(&c),
        };
        println!("edge 0 at t=0.25 in cell {c:?} sits at {:?}", g.position(&p));
    }

    // the star of rays around the first vertex drives the Mellin symbols
    let star = g.vertex_star(0, 0.3).unwrap();
    for ray in &star.rays {
        println!(
            "ray along edge {} angle {:.3} sign {}",
            ray.edge, ray.angle, ray.sign
        );
    }
}
