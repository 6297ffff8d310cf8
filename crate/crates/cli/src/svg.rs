//! SVG rendering of the gasket at a finite depth.
//!
//! Colour ramp: a value `v` of `h_i` (which ranges over `[0, 3]`) is mapped
//! to `t = v / 3` and interpolated linearly through the stops
//! `#440154` (t = 0), `#21918c` (t = 1/2) and `#fde725` (t = 1).
//! Each cell is filled with the colour of the mean of its three vertex
//! values; the vertices are drawn as dots in their own colour.

use std::collections::HashMap;
use std::fmt::Write;

use martin_gasket::boundary::{harmonic_at_boundary, BoundaryError, BoundaryPoint};
use martin_gasket::potential::Potential;
use martin_gasket::words::{vertex_point, BoundaryWord, FiniteWord, Point2D, LETTERS};
use rayon::prelude::*;

pub const MAX_SVG_DEPTH: usize = 8;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;
const STOPS: [(f64, [f64; 3]); 3] = [
    (0.0, [68.0, 1.0, 84.0]),
    (0.5, [33.0, 145.0, 140.0]),
    (1.0, [253.0, 231.0, 37.0]),
];

/// `#rrggbb` for a value of `h_i`.
pub fn ramp(value: f64) -> String {
    let t = (value / 3.0).clamp(0.0, 1.0);
    let k = if t <= STOPS[1].0 { 0 } else { 1 };
    let (t0, c0) = STOPS[k];
    let (t1, c1) = STOPS[k + 1];
    let s = (t - t0) / (t1 - t0);
    let ch = |j: usize| (c0[j] + s * (c1[j] - c0[j])).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

fn screen(z: Point2D) -> (f64, f64) {
    let scale = SIZE - 2.0 * MARGIN;
    let height = 3f64.sqrt() / 2.0;
    (MARGIN + scale * z.x, MARGIN + scale * (height - z.y))
}

/// Vertex values of `h_i` for every cell of the given depth, keyed by the
/// boundary point `ω j^∞` they sit on.
fn vertex_values(
    potential: &Potential<f64>,
    i: u8,
    depth: usize,
    tol: f64,
) -> Result<HashMap<BoundaryPoint, f64>, BoundaryError> {
    let mut points: Vec<BoundaryPoint> = FiniteWord::all(depth)
        .flat_map(|w| {
            LETTERS.map(|j| BoundaryPoint::new(&BoundaryWord::eventually_constant(&w, j)))
        })
        .collect();
    points.sort_by(|a, b| a.representative().cmp(b.representative()));
    points.dedup();
    let values = points
        .par_iter()
        .map(|pt| harmonic_at_boundary(potential, i, pt.representative(), tol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(points.into_iter().zip(values).collect())
}

/// The depth-`depth` gasket coloured by `h_i`.
pub fn render(
    potential: &Potential<f64>,
    i: u8,
    depth: usize,
    tol: f64,
) -> Result<String, BoundaryError> {
    let values = vertex_values(potential, i, depth, tol)?;
    let value = |w: &FiniteWord, j: u8| {
        values[&BoundaryPoint::new(&BoundaryWord::eventually_constant(w, j))]
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{h}\" viewBox=\"0 0 {SIZE} {h}\">",
        h = (SIZE - 2.0 * MARGIN) * 3f64.sqrt() / 2.0 + 2.0 * MARGIN
    );
    let _ = writeln!(out, "<g stroke=\"#000000\" stroke-width=\"0.5\">");
    for w in FiniteWord::all(depth) {
        let pts = LETTERS.map(|j| screen(vertex_point(&w, j)));
        let mean = LETTERS.iter().map(|&j| value(&w, j)).sum::<f64>() / 3.0;
        let _ = writeln!(
            out,
            "<polygon points=\"{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}\" fill=\"{}\"/>",
            pts[0].0,
            pts[0].1,
            pts[1].0,
            pts[1].1,
            pts[2].0,
            pts[2].1,
            ramp(mean)
        );
    }
    let _ = writeln!(out, "</g>");
    let radius = (6.0 / (depth as f64 + 1.0)).max(1.0);
    let mut dots: Vec<(BoundaryPoint, Point2D)> = FiniteWord::all(depth)
        .flat_map(|w| {
            LETTERS.map(|j| {
                (
                    BoundaryPoint::new(&BoundaryWord::eventually_constant(&w, j)),
                    vertex_point(&w, j),
                )
            })
        })
        .collect();
    dots.sort_by(|a, b| a.0.representative().cmp(b.0.representative()));
    dots.dedup_by(|a, b| a.0 == b.0);
    let _ = writeln!(out, "<g stroke=\"none\">");
    for (pt, z) in dots {
        let (x, y) = screen(z);
        let _ = writeln!(
            out,
            "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"{radius:.2}\" fill=\"{}\"><title>{} {:.9}</title></circle>",
            ramp(values[&pt]),
            pt,
            values[&pt]
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}
