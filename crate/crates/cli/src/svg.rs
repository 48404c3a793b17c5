//! Plain SVG output: scent heatmaps, trajectory snapshot panels and
//! success-probability charts.
//!
//! Numbers are printed with fixed precision and elements in a fixed order,
//! so identical inputs give identical bytes.

use std::fmt::Write;

use shoal_core::{Arena, AxisRect, ScentField, Vec2};

/// Pixels per world unit.
const SCALE: f64 = 100.0;
const MARGIN: f64 = 30.0;
const SOLID: &str = "#808080";

/// Dense cell-centred grid; `None` marks solid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    /// Lower-left corner of cell (0, 0).
    pub origin: Vec2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Option<f64>>,
}

impl CellGrid {
    pub fn from_field(field: &ScentField) -> Self {
        let (nx, ny) = field.dims();
        let h = field.spacing();
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(field.is_fluid(i, j).then(|| field.value(i, j)));
            }
        }
        CellGrid { origin: field.cell_center(0, 0) - Vec2::new(h / 2.0, h / 2.0), spacing: h, nx, ny, values }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.nx + i]
    }

    pub fn extent(&self) -> AxisRect {
        let size = Vec2::new(self.nx as f64, self.ny as f64) * self.spacing;
        AxisRect { lo: self.origin, hi: self.origin + size }
    }
}

/// Block-averaged copy of a [`CellGrid`] at most `max_pixels` wide or tall.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub origin: Vec2,
    /// World size of one pixel.
    pub pixel: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Option<f64>>,
}

impl Heatmap {
    pub fn from_grid(grid: &CellGrid, max_pixels: usize) -> Self {
        let block = grid.nx.max(grid.ny).div_ceil(max_pixels.max(1)).max(1);
        let (nx, ny) = (grid.nx.div_ceil(block), grid.ny.div_ceil(block));
        let mut values = Vec::with_capacity(nx * ny);
        for pj in 0..ny {
            for pi in 0..nx {
                let (mut sum, mut count) = (0.0, 0usize);
                for j in pj * block..((pj + 1) * block).min(grid.ny) {
                    for i in pi * block..((pi + 1) * block).min(grid.nx) {
                        if let Some(v) = grid.get(i, j) {
                            sum += v;
                            count += 1;
                        }
                    }
                }
                values.push((count > 0).then(|| sum / count as f64));
            }
        }
        Heatmap { origin: grid.origin, pixel: grid.spacing * block as f64, nx, ny, values }
    }

    pub fn pixel_center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new((i as f64 + 0.5) * self.pixel, (j as f64 + 0.5) * self.pixel)
    }

    /// Brightest pixel; the first one in row-major order on ties.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in self.values.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
        }
        best.map(|(k, _)| (k % self.nx, k / self.nx))
    }

    fn range(&self) -> (f64, f64) {
        self.values.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Scene decorations shared by the heatmap and the trajectory panels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bounds: AxisRect,
    pub obstacles: Vec<AxisRect>,
    /// Food disc centre and radius.
    pub food: Option<(Vec2, f64)>,
}

impl Scene {
    pub fn from_arena(arena: &Arena, food: Option<(Vec2, f64)>) -> Self {
        Scene { bounds: arena.bounds, obstacles: arena.obstacles.clone(), food }
    }

    pub fn bare(bounds: AxisRect) -> Self {
        Scene { bounds, obstacles: Vec::new(), food: None }
    }
}

/// Maps world coordinates into one panel (y up in the world, down in SVG).
#[derive(Clone, Copy)]
struct Frame {
    bounds: AxisRect,
    left: f64,
    top: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        self.left + (x - self.bounds.lo.x) * SCALE
    }

    fn y(&self, y: f64) -> f64 {
        self.top + (self.bounds.hi.y - y) * SCALE
    }

    fn width(&self) -> f64 {
        self.bounds.width() * SCALE
    }

    fn height(&self) -> f64 {
        self.bounds.height() * SCALE
    }

    fn rect(&self, out: &mut String, r: &AxisRect, attrs: &str) {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {attrs}/>"#,
            self.x(r.lo.x),
            self.y(r.hi.y),
            r.width() * SCALE,
            r.height() * SCALE
        );
    }
}

fn open_svg(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn decorate(out: &mut String, frame: &Frame, scene: &Scene) {
    for ob in &scene.obstacles {
        frame.rect(out, ob, &format!(r#"class="obstacle" fill="{SOLID}" stroke="black" stroke-width="1""#));
    }
    if let Some((c, r)) = scene.food {
        let _ = writeln!(
            out,
            r#"<circle class="food" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="red" stroke-width="1.5"/>"#,
            frame.x(c.x),
            frame.y(c.y),
            (r * SCALE).max(3.0)
        );
    }
    frame.rect(out, &scene.bounds, r#"class="wall" fill="none" stroke="black" stroke-width="1.5""#);
}

/// Five-stop dark-to-bright ramp.
fn ramp(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let s = t * (STOPS.len() - 1) as f64;
    let k = (s.floor() as usize).min(STOPS.len() - 2);
    let f = s - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn heatmap_svg(map: &Heatmap, scene: &Scene) -> String {
    let frame = Frame { bounds: scene.bounds, left: MARGIN, top: MARGIN };
    let mut out = String::new();
    open_svg(&mut out, frame.width() + 2.0 * MARGIN, frame.height() + 2.0 * MARGIN + 20.0);
    let (lo, hi) = map.range();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let _ = writeln!(out, r#"<g class="heatmap" shape-rendering="crispEdges">"#);
    for j in 0..map.ny {
        for i in 0..map.nx {
            let c = map.pixel_center(i, j);
            let half = Vec2::new(map.pixel, map.pixel) * 0.5;
            let fill = match map.values[j * map.nx + i] {
                Some(v) => ramp((v - lo) / span),
                None => SOLID.to_string(),
            };
            frame.rect(&mut out, &AxisRect { lo: c - half, hi: c + half }, &format!(r#"fill="{fill}""#));
        }
    }
    let _ = writeln!(out, "</g>");
    decorate(&mut out, &frame, scene);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN:.0}" y="{:.0}">U from {lo:.4e} to {hi:.4e}</text>"#,
        frame.height() + MARGIN + 20.0
    );
    out.push_str("</svg>\n");
    out
}

/// One snapshot per panel, two panels per row.
pub fn trajectory_svg(panels: &[(f64, Vec<Vec2>)], scene: &Scene) -> String {
    const COLS: usize = 2;
    const TITLE: f64 = 20.0;
    let cols = panels.len().clamp(1, COLS);
    let rows = panels.len().div_ceil(COLS).max(1);
    let (w, h) = (scene.bounds.width() * SCALE, scene.bounds.height() * SCALE);
    let mut out = String::new();
    open_svg(&mut out, cols as f64 * (w + MARGIN) + MARGIN, rows as f64 * (h + MARGIN + TITLE) + MARGIN);
    for (k, (time, positions)) in panels.iter().enumerate() {
        let frame = Frame {
            bounds: scene.bounds,
            left: MARGIN + (k % COLS) as f64 * (w + MARGIN),
            top: MARGIN + TITLE + (k / COLS) as f64 * (h + MARGIN + TITLE),
        };
        let _ = writeln!(out, r#"<g class="panel" data-time="{time}">"#);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">t = {time}</text>"#, frame.left, frame.top - 6.0);
        decorate(&mut out, &frame, scene);
        for p in positions {
            let _ = writeln!(
                out,
                r#"<circle class="fish" cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
                frame.x(p.x),
                frame.y(p.y)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

/// Success probability against school size. `None` when there is nothing to draw.
pub fn probability_svg(points: &[(usize, f64)]) -> Option<String> {
    const W: f64 = 480.0;
    const H: f64 = 300.0;
    const LEFT: f64 = 50.0;
    const BOTTOM: f64 = 40.0;
    if points.is_empty() {
        return None;
    }
    let n_lo = points.iter().map(|p| p.0).min()? as f64;
    let n_hi = points.iter().map(|p| p.0).max()? as f64;
    let n_span = if n_hi > n_lo { n_hi - n_lo } else { 1.0 };
    let px = |n: f64| LEFT + (n - n_lo) / n_span * (W - LEFT - 20.0);
    let py = |p: f64| H - BOTTOM - p * (H - BOTTOM - 20.0);

    let mut out = String::new();
    open_svg(&mut out, W, H);
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{LEFT:.2} 20 V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        H - BOTTOM,
        W - 20.0
    );
    for tick in 0..=4 {
        let p = tick as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{p:.2}</text>"#, LEFT - 6.0, py(p) + 4.0);
    }
    let every = points.len().div_ceil(12).max(1);
    for (k, &(n, _)) in points.iter().enumerate() {
        if k % every == 0 {
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{n}</text>"#, px(n as f64), H - BOTTOM + 16.0);
        }
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">N</text>"#, (W + LEFT) / 2.0, H - 6.0);
    let _ = writeln!(out, r#"<text x="12" y="14">success probability</text>"#);
    let line: Vec<String> = points.iter().map(|&(n, p)| format!("{:.2},{:.2}", px(n as f64), py(p))).collect();
    let _ = writeln!(out, r#"<polyline class="probability" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, line.join(" "));
    for &(n, p) in points {
        let _ = writeln!(out, r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(n as f64), py(p));
    }
    out.push_str("</svg>\n");
    Some(out)
}
