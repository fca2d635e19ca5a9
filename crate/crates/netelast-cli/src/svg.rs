//! SVG rendering of a two-dimensional net: one period cell, vertices,
//! edges, loops as small circles, and the per-weight tension ellipse
//! centered in the cell.

use netelast::linalg;
use netelast::net::{PeriodMap, QuotientGraph, Realization};
use netelast::solver::ellipsoid_matrix;

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// Renders the net. The ellipse axes are the square roots of the
/// per-weight tension eigenvalues, written at full precision.
pub fn render_svg(
    g: &QuotientGraph,
    r: &Realization,
    period: &PeriodMap,
) -> Result<String, String> {
    if g.dimension() != 2 {
        return Err("svg rendering supports dimension 2 only".into());
    }
    let u1 = period.apply(&netelast::net::LatticeOffset(vec![1, 0]));
    let u2 = period.apply(&netelast::net::LatticeOffset(vec![0, 1]));
    let corners = [
        vec![0.0, 0.0],
        u1.clone(),
        linalg::add(&u1, &u2),
        u2.clone(),
    ];
    let center = linalg::scale(&linalg::add(&u1, &u2), 0.5);

    // Per-weight tension ellipse: x^T M x = 1 with M = T_w^{-1}.
    let m = ellipsoid_matrix(g, r).map_err(|e| e.to_string())?;
    let tw = m.inverse().map_err(|e| e.to_string())?;
    let (vals, vecs) = linalg::sym_eigen(&tw);
    let (minor, major) = (vals[0].max(0.0).sqrt(), vals[1].max(0.0).sqrt());
    let axis = vecs.column(1);
    let angle_deg = -axis[1].atan2(axis[0]).to_degrees();

    // Geometry for the bounding box: cell, vertices, edge endpoints.
    let mut points: Vec<Vec<f64>> = corners.to_vec();
    points.extend(r.positions.iter().cloned());
    let mut segments: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut loops: Vec<Vec<f64>> = Vec::new();
    for e in g.edges() {
        if e.is_true_loop() {
            loops.push(r.positions[e.tail].clone());
            continue;
        }
        let from = r.positions[e.tail].clone();
        let to = linalg::add(&r.positions[e.head], &period.apply(&e.offset));
        points.push(from.clone());
        points.push(to.clone());
        segments.push((from, to));
    }
    points.push(linalg::add(&center, &[major, major]));
    points.push(linalg::sub(&center, &[major, major]));

    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &points {
        min_x = min_x.min(p[0]);
        max_x = max_x.max(p[0]);
        min_y = min_y.min(-p[1]);
        max_y = max_y.max(-p[1]);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1e-6);
    let pad = 0.1 * span;
    let stroke = 0.01 * span;
    let vertex_radius = 0.025 * span;
    let loop_radius = 0.05 * span;

    // The y axis is flipped so the drawing matches math orientation.
    let flip = |p: &[f64]| (p[0], -p[1]);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         viewBox=\"{} {} {} {}\">\n",
        fmt(min_x - pad),
        fmt(min_y - pad),
        fmt(max_x - min_x + 2.0 * pad),
        fmt(max_y - min_y + 2.0 * pad)
    ));

    // Period cell.
    let cell: Vec<String> = corners
        .iter()
        .map(|c| {
            let (x, y) = flip(c);
            format!("{},{}", fmt(x), fmt(y))
        })
        .collect();
    out.push_str(&format!(
        "  <polygon points=\"{}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"{}\" \
         stroke-dasharray=\"{}\"/>\n",
        cell.join(" "),
        fmt(stroke),
        fmt(4.0 * stroke)
    ));

    // Edges.
    for (from, to) in &segments {
        let (x1, y1) = flip(from);
        let (x2, y2) = flip(to);
        out.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#1f3d7a\" \
             stroke-width=\"{}\"/>\n",
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2),
            fmt(stroke)
        ));
    }

    // Loops as small circles beside their vertex.
    for p in &loops {
        let (x, y) = flip(p);
        out.push_str(&format!(
            "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"#1f3d7a\" \
             stroke-width=\"{}\"/>\n",
            fmt(x),
            fmt(y - loop_radius),
            fmt(loop_radius),
            fmt(stroke)
        ));
    }

    // Vertices.
    for p in &r.positions {
        let (x, y) = flip(p);
        out.push_str(&format!(
            "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#d1495b\"/>\n",
            fmt(x),
            fmt(y),
            fmt(vertex_radius)
        ));
    }

    // Tension ellipse with full-precision axes.
    let (cx, cy) = flip(&center);
    out.push_str(&format!(
        "  <ellipse cx=\"{}\" cy=\"{}\" rx=\"{:.12}\" ry=\"{:.12}\" \
         transform=\"rotate({} {} {})\" fill=\"none\" stroke=\"#2e7d32\" \
         stroke-width=\"{}\"/>\n",
        fmt(cx),
        fmt(cy),
        major,
        minor,
        fmt(angle_deg),
        fmt(cx),
        fmt(cy),
        fmt(stroke)
    ));
    out.push_str("</svg>\n");
    Ok(out)
}
