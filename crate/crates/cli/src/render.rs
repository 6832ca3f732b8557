//! SVG figures: the shape with its detected symmetries, and the vote space
//! with the invalid ball and walker trajectories.

use std::fmt::Write as _;

use symmode::geometry::Vector;
use symmode::symmetry::Symmetry;
use symmode::transform::{SpaceKind, TransformSpace};

const PANEL: f64 = 400.0;
const GAP: f64 = 20.0;
const PALETTE: [&str; 8] = [
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Scene<'a> {
    pub dim: usize,
    pub points: &'a [Vector],
    pub symmetries: &'a [Symmetry],
    pub space: Option<&'a TransformSpace>,
    /// One polyline per walker.
    pub paths: &'a [Vec<Vector>],
}

/// Maps a square world window onto one panel.
struct Panel {
    left: f64,
    lo: (f64, f64),
    span: f64,
    axes: (usize, usize),
    id: usize,
}

impl Panel {
    fn fit(left: f64, id: usize, axes: (usize, usize), pts: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for (x, y) in pts {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        if x0 > x1 {
            (x0, y0, x1, y1) = (-1.0, -1.0, 1.0, 1.0);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-9) * 1.1;
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        Panel {
            left,
            lo: (cx - 0.5 * span, cy - 0.5 * span),
            span,
            axes,
            id,
        }
    }

    fn project(&self, p: &Vector) -> (f64, f64) {
        self.map(p[self.axes.0], p[self.axes.1])
    }

    /// World to pixel; y grows upward in the world.
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let s = PANEL / self.span;
        (self.left + (x - self.lo.0) * s, PANEL - (y - self.lo.1) * s)
    }

    fn scale(&self) -> f64 {
        PANEL / self.span
    }

    fn open(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            r#"<clipPath id="c{id}"><rect x="{x}" y="0" width="{PANEL}" height="{PANEL}"/></clipPath>"#,
            id = self.id,
            x = self.left
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x}" y="0" width="{PANEL}" height="{PANEL}" fill="white" stroke="#999"/>"##,
            x = self.left
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12">{title}</text>"#,
            x = self.left + 6.0,
            y = 16.0
        );
        let _ = writeln!(out, r#"<g clip-path="url(#c{})">"#, self.id);
    }
}

fn dots(out: &mut String, panel: &Panel, pts: &[Vector], r: f64, fill: &str) {
    for p in pts {
        let (x, y) = panel.project(p);
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"/>"#);
    }
}

/// Draws the trace of `sym` in the panel's coordinate plane.
fn draw_symmetry(out: &mut String, panel: &Panel, sym: &Symmetry, centroid: &Vector, color: &str) {
    let (a, b) = panel.axes;
    match sym {
        Symmetry::Reflection(plane) => {
            let n = plane.normal();
            let (na, nb) = (n[a], n[b]);
            let len = (na * na + nb * nb).sqrt();
            // Planes nearly parallel to the view have no useful trace.
            if len < 0.5 {
                return;
            }
            let rest = plane.offset() - (0..3).filter(|&c| c != a && c != b).map(|c| n[c] * centroid[c]).sum::<f64>();
            let (px, py) = (na * rest / (len * len), nb * rest / (len * len));
            let (dx, dy) = (-nb / len, na / len);
            let reach = 2.0 * panel.span;
            let (x0, y0) = panel.map(px - dx * reach, py - dy * reach);
            let (x1, y1) = panel.map(px + dx * reach, py + dy * reach);
            let _ = writeln!(
                out,
                r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="{color}" stroke-width="2"/>"#
            );
        }
        Symmetry::Translation(v) => {
            let (x0, y0) = panel.project(centroid);
            let (x1, y1) = panel.project(&(centroid + v));
            let _ = writeln!(
                out,
                r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="{color}" stroke-width="2" marker-end="url(#arrow)"/>"#
            );
        }
        Symmetry::Rotation(r) => {
            let (x, y) = panel.project(&r.center);
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="{color}" stroke-width="2"/>"#
            );
        }
    }
}

fn views(dim: usize) -> Vec<((usize, usize), &'static str)> {
    if dim == 3 {
        vec![((0, 1), "xy"), ((0, 2), "xz"), ((1, 2), "yz")]
    } else {
        vec![((0, 1), "shape")]
    }
}

pub fn render(scene: &Scene) -> String {
    let mut body = String::new();
    let mut left = 0.0;
    let mut id = 0;
    let centroid = if scene.points.is_empty() {
        Vector::zeros()
    } else {
        scene.points.iter().sum::<Vector>() / scene.points.len() as f64
    };
    for (axes, title) in views(scene.dim) {
        let panel = Panel::fit(left, id, axes, scene.points.iter().map(|p| (p[axes.0], p[axes.1])));
        panel.open(&mut body, title);
        dots(&mut body, &panel, scene.points, 1.6, "#333");
        for (i, sym) in scene.symmetries.iter().enumerate() {
            draw_symmetry(&mut body, &panel, sym, &centroid, PALETTE[i % PALETTE.len()]);
        }
        body.push_str("</g>\n");
        left += PANEL + GAP;
        id += 1;
    }
    if let Some(space) = scene.space {
        let extent = scene
            .paths
            .iter()
            .flatten()
            .chain(&space.samples)
            .map(|p| (p.x, p.y))
            .chain([(-space.k, -space.k), (space.k, space.k)]);
        let panel = Panel::fit(left, id, (0, 1), extent);
        panel.open(&mut body, "transformation space");
        dots(&mut body, &panel, &space.samples, 1.0, "#9aa");
        if space.kind == SpaceKind::Reflective {
            let (cx, cy) = panel.map(0.0, 0.0);
            let _ = writeln!(
                body,
                r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="#eee" fill-opacity="0.6" stroke="#555" stroke-dasharray="4 3"/>"##,
                r = space.k * panel.scale()
            );
        }
        for (w, path) in scene.paths.iter().enumerate() {
            let color = PALETTE[w % PALETTE.len()];
            if path.len() > 1 {
                let pts: Vec<String> = path
                    .iter()
                    .map(|p| {
                        let (x, y) = panel.project(p);
                        format!("{x:.2},{y:.2}")
                    })
                    .collect();
                let _ = writeln!(
                    body,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="0.8" stroke-opacity="0.7"/>"#,
                    pts.join(" ")
                );
            }
            if let Some(last) = path.last() {
                dots(&mut body, &panel, std::slice::from_ref(last), 2.5, color);
            }
        }
        body.push_str("</g>\n");
        left += PANEL + GAP;
    }
    let width = (left - GAP).max(PANEL);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{PANEL}" viewBox="0 0 {width} {PANEL}">"#
    );
    out.push_str(
        r#"<defs><marker id="arrow" markerWidth="8" markerHeight="8" refX="6" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z"/></marker></defs>"#,
    );
    out.push('\n');
    out.push_str(&body);
    out.push_str("</svg>\n");
    out
}
