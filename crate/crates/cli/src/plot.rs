//! Static SVG figures: width staircase, orthographic trajectory views and
//! level-set traces on the hemisphere.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn header(s: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(s: &mut String, pts: &[(f64, f64)], color: &str, width: f64) {
    if pts.len() < 2 {
        return;
    }
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
        d.trim_end()
    );
}

/// Step plot of `ω_p / π` against `p`.
pub fn staircase(title: &str, values: &[(u64, u64)]) -> String {
    let mut s = String::new();
    header(&mut s, W, H, title);
    let (l, r, t, b) = (50.0, W - 20.0, 30.0, H - 40.0);
    let p_max = values.last().map(|v| v.0).unwrap_or(1).max(1) as f64;
    let y_max = values.iter().map(|v| v.1).max().unwrap_or(1).max(1) as f64;
    let sx = |p: f64| l + (p - 0.5) / p_max * (r - l);
    let sy = |v: f64| b - v / (y_max + 0.5) * (b - t);
    let _ = writeln!(s, r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{l}" y1="{b}" x2="{l}" y2="{t}" stroke="black"/>"#);
    let ticks = (y_max as u64).min(10);
    for k in 1..=ticks {
        let v = (k as f64 * y_max / ticks as f64).round();
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v}π</text>"#, l - 6.0, sy(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">p</text>"#, (l + r) / 2.0, H - 12.0);
    let mut pts = Vec::with_capacity(2 * values.len());
    for &(p, v) in values {
        pts.push((sx(p as f64 - 0.5), sy(v as f64)));
        pts.push((sx(p as f64 + 0.5), sy(v as f64)));
    }
    polyline(&mut s, &pts, PALETTE[0], 1.5);
    s.push_str("</svg>\n");
    s
}

/// Top (x₁, x₂) and side (x₁, x₃) orthographic views of curves in R³.
pub fn projections(title: &str, curves: &[(String, Vec<[f64; 3]>)]) -> String {
    let mut s = String::new();
    header(&mut s, W, H, title);
    let extent = curves
        .iter()
        .flat_map(|c| c.1.iter())
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .fold(1e-9f64, f64::max)
        * 1.05;
    let panel = (W - 60.0) / 2.0;
    let size = panel.min(H - 90.0);
    for (k, (name, axes)) in [("top", (0usize, 1usize)), ("side", (0, 2))].iter().enumerate() {
        let cx = 30.0 + panel * (k as f64 + 0.5) + 10.0 * k as f64;
        let cy = 30.0 + size / 2.0 + 10.0;
        let scale = size / (2.0 * extent);
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{size:.2}" height="{size:.2}" fill="none" stroke="#999"/>"##,
            cx - size / 2.0,
            cy - size / 2.0
        );
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{name}</text>"#, cy + size / 2.0 + 16.0);
        for (i, (_, pts)) in curves.iter().enumerate() {
            let proj: Vec<(f64, f64)> = pts
                .iter()
                .map(|p| (cx + p[axes.0] * scale, cy - p[axes.1] * scale))
                .collect();
            polyline(&mut s, &proj, PALETTE[i % PALETTE.len()], 1.2);
        }
    }
    for (i, (label, _)) in curves.iter().enumerate() {
        let y = H - 30.0 + 14.0 * (i / 4) as f64;
        let x = 30.0 + 150.0 * (i % 4) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" fill="{}">{}</text>"#,
            PALETTE[i % PALETTE.len()],
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Level-set components on the upper hemisphere seen from above; the unit
/// circle is the equator.
pub fn disk_traces(title: &str, components: &[Vec<[f64; 3]>]) -> String {
    let mut s = String::new();
    let side = H;
    header(&mut s, side, side, title);
    let c = side / 2.0 + 10.0;
    let r = side / 2.0 - 40.0;
    let _ = writeln!(s, r##"<circle cx="{c}" cy="{c}" r="{r}" fill="none" stroke="#999"/>"##);
    for (i, comp) in components.iter().enumerate() {
        let pts: Vec<(f64, f64)> = comp.iter().map(|p| (c + p[0] * r, c - p[1] * r)).collect();
        polyline(&mut s, &pts, PALETTE[i % PALETTE.len()], 1.5);
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `svg` to `dir/name`, creating `dir` if needed, and returns the path.
pub fn write(dir: &Path, name: &str, svg: &str) -> Result<String, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, svg).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staircase_is_wellformed() {
        let svg = staircase("ω_p", &[(1, 1), (2, 1), (3, 2)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn projections_draw_each_curve_twice() {
        let c = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.5], [-1.0, 0.0, 0.0]];
        let svg = projections("a<b", &[("one".into(), c.clone()), ("two".into(), c)]);
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn traces_and_write() {
        let svg = disk_traces("x = 0", &[vec![[0.0, -1.0, 0.0], [0.0, 1.0, 0.0]]]);
        let dir = std::env::temp_dir().join(format!("hemiwidth-plot-{}", std::process::id()));
        let p = write(&dir, "t.svg", &svg).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), svg);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
