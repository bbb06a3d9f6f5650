//! Static heatmaps: one filled polygon per grid cell, colored by the mean of
//! its corner values.

use std::fmt::Write;

use slbvp_core::grid::{Grid, POLE};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;
const BAR_WIDTH: f64 = 16.0;

// Viridis anchors at 0, 0.25, 0.5, 0.75, 1.
const RAMP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn color(s: f64) -> String {
    let s = if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.0 };
    let x = s * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|k| (RAMP[i][k] + f * (RAMP[i + 1][k] - RAMP[i][k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Cells as node index lists: triangles around the pole, quads elsewhere.
fn cells(grid: &Grid) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for j in 0..grid.n_phi {
        let jn = (j + 1) % grid.n_phi;
        out.push(vec![POLE, grid.node(1, j), grid.node(1, jn)]);
        for i in 1..grid.n_r {
            out.push(vec![grid.node(i, j), grid.node(i + 1, j), grid.node(i + 1, jn), grid.node(i, jn)]);
        }
    }
    out
}

pub fn heatmap(grid: &Grid, values: &[f64], title: &str) -> String {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let span = if hi > lo { hi - lo } else { 1.0 };

    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &grid.positions {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    let scale = (SIZE - 2.0 * MARGIN) / (xmax - xmin).max(ymax - ymin);
    let px = |p: [f64; 2]| (MARGIN + (p[0] - xmin) * scale, SIZE - MARGIN - (p[1] - ymin) * scale);

    let width = SIZE + 3.0 * BAR_WIDTH + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{SIZE}" viewBox="0 0 {width} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
        SIZE / 2.0
    );
    for cell in cells(grid) {
        let mean = cell.iter().map(|&k| values[k]).sum::<f64>() / cell.len() as f64;
        let pts: Vec<String> = cell
            .iter()
            .map(|&k| {
                let (x, y) = px(grid.positions[k]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let fill = color((mean - lo) / span);
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{fill}" stroke="{fill}" stroke-width="0.3"/>"#,
            pts.join(" ")
        );
    }

    let bar_x = SIZE + BAR_WIDTH;
    let bar_h = SIZE - 2.0 * MARGIN;
    let steps = 64;
    for k in 0..steps {
        let y = MARGIN + bar_h * (1.0 - (k + 1) as f64 / steps as f64);
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{y:.2}" width="{BAR_WIDTH}" height="{:.2}" fill="{}"/>"#,
            bar_h / steps as f64 + 0.5,
            color((k as f64 + 0.5) / steps as f64)
        );
    }
    for (v, y) in [(hi, MARGIN), (lo, SIZE - MARGIN)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11">{v:.4e}</text>"#,
            bar_x + BAR_WIDTH + 4.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
