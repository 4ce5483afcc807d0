//! JSON and SVG output for Stokes graphs.

use std::fmt::Write;

use serde::Serialize;

use super::StokesGraph;

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct GraphDoc<'a> {
    schema_version: u32,
    kind: &'static str,
    #[serde(flatten)]
    graph: &'a StokesGraph,
}

/// Pretty-printed JSON document with a schema version.
pub fn graph_json(g: &StokesGraph) -> String {
    serde_json::to_string_pretty(&GraphDoc { schema_version: GRAPH_SCHEMA_VERSION, kind: "stokes_graph", graph: g })
        .expect("graph serializes")
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const FILLS: [&str; 6] = ["#f3f6fb", "#fbf3f3", "#f3fbf4", "#f8f3fb", "#fbf8f0", "#f0fafb"];

/// SVG rendering: shaded regions as polygons, one path per curve coloured by
/// its sheet pair, one circle marker per turning point.
pub fn graph_svg(g: &StokesGraph) -> String {
    let size = 640.0;
    let half = size / 2.0;
    let s = half / (g.radius * 1.05);
    let map = |z: num_complex::Complex64| (half + (z.re - g.center.re) * s, half - (z.im - g.center.im) * s);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )
    .unwrap();
    writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##).unwrap();
    let (cx, cy) = map(g.center);
    writeln!(out, r##"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="#999999"/>"##, g.radius * s)
        .unwrap();
    if let Some(a) = &g.arrangement {
        for r in &a.regions {
            let pts: Vec<String> = r
                .boundary
                .iter()
                .map(|&z| {
                    let (x, y) = map(z);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            writeln!(out, r#"<polygon points="{}" fill="{}" stroke="none"/>"#, pts.join(" "), FILLS[r.id % FILLS.len()])
                .unwrap();
        }
    }
    for c in &g.curves {
        let m = g.base_sheets.len().max(1);
        let color = PALETTE[(c.sheets[0] * m + c.sheets[1]) % PALETTE.len()];
        let mut d = String::new();
        for (k, &z) in c.points.iter().enumerate() {
            let (x, y) = map(z);
            write!(d, "{}{x:.3},{y:.3} ", if k == 0 { "M" } else { "L" }).unwrap();
        }
        writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5" data-curve="{}" data-generation="{}"/>"#,
            d.trim_end(),
            c.label,
            c.generation
        )
        .unwrap();
    }
    for t in &g.turning_points {
        let (x, y) = map(t.position);
        writeln!(out, r##"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="#000000" class="turning-point"/>"##).unwrap();
    }
    out.push_str("</svg>\n");
    out
}
