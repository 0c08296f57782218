//! Minimal SVG plots: a log-log line chart and trajectory panels.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 50.0;

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log plot of positive `(x, y)` points joined by a line. Points with a
/// non-positive coordinate are skipped.
pub fn loglog(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite())
        .map(|p| (p.0.log10(), p.1.log10()))
        .collect();
    let mut s = header(W, H);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        H - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    let _ = writeln!(
        s,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    if !pts.is_empty() {
        let (x0, x1) = bounds(pts.iter().map(|p| p.0));
        let (y0, y1) = bounds(pts.iter().map(|p| p.1));
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        for d in (x0.floor() as i32)..=(x1.ceil() as i32) {
            let v = d as f64;
            if v >= x0 && v <= x1 {
                let _ = writeln!(
                    s,
                    "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">1e{d}</text>",
                    sx(v),
                    H - PAD + 15.0
                );
            }
        }
        for d in (y0.floor() as i32)..=(y1.ceil() as i32) {
            let v = d as f64;
            if v >= y0 && v <= y1 {
                let _ = writeln!(
                    s,
                    "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">1e{d}</text>",
                    PAD - 4.0,
                    sy(v) + 4.0
                );
            }
        }
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>",
            line.join(" ")
        );
        for p in &pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>",
                sx(p.0),
                sy(p.1)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(x), a.1.max(x)));
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Side-by-side square panels of wrapped paths on `[0, l1) x [0, l2)`. A new
/// segment starts wherever the path crosses a wall of the fundamental domain.
pub fn panels(panels: &[(String, Vec<[f64; 2]>)], lengths: [f64; 2]) -> String {
    let side = 300.0;
    let gap = 20.0;
    let width = panels.len() as f64 * (side + gap) + gap;
    let mut s = header(width, side + 60.0);
    for (i, (title, pts)) in panels.iter().enumerate() {
        let ox = gap + i as f64 * (side + gap);
        let oy = 40.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"25\" text-anchor=\"middle\">{}</text>",
            ox + side / 2.0,
            escape(title)
        );
        let _ = writeln!(
            s,
            "<rect x=\"{ox}\" y=\"{oy}\" width=\"{side}\" height=\"{side}\" fill=\"none\" stroke=\"black\"/>"
        );
        let px = |p: &[f64; 2]| (ox + p[0] / lengths[0] * side, oy + side - p[1] / lengths[1] * side);
        let mut seg: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, s: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(
                    s,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>",
                    seg.join(" ")
                );
            }
            seg.clear();
        };
        for (j, p) in pts.iter().enumerate() {
            if j > 0 {
                let q = pts[j - 1];
                if (p[0] - q[0]).abs() > lengths[0] / 2.0 || (p[1] - q[1]).abs() > lengths[1] / 2.0 {
                    flush(&mut seg, &mut s);
                }
            }
            let (x, y) = px(p);
            seg.push(format!("{x:.2},{y:.2}"));
        }
        flush(&mut seg, &mut s);
    }
    s.push_str("</svg>\n");
    s
}
