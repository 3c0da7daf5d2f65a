//! Minimal SVG writers: heatmaps and line plots.

use std::fmt::Write;

const PALETTE: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(u: f64) -> String {
    let u = if u.is_finite() { u.clamp(0.0, 1.0) } else { 0.0 };
    let s = u * (PALETTE.len() - 1) as f64;
    let i = (s.floor() as usize).min(PALETTE.len() - 2);
    let f = s - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn open(out: &mut String, header: &str, w: f64, h: f64) {
    out.push_str("<!--\n");
    out.push_str(&header.replace("--", "- -"));
    out.push_str("-->\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

/// `values[i * ny + j]` at `(xs[i], ys[j])`, rendered with `y` upwards.
pub fn heatmap(header: &str, title: &str, xs: &[f64], ys: &[f64], values: &[f64]) -> String {
    let (nx, ny) = (xs.len(), ys.len());
    let (pw, ph) = (600.0, 360.0);
    let (left, top) = (60.0, 30.0);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    open(&mut s, header, left + pw + 110.0, top + ph + 50.0);
    let _ = writeln!(s, r#"<text x="{left}" y="18">{title}</text>"#);
    let (cw, ch) = (pw / nx as f64, ph / ny as f64);
    for i in 0..nx {
        for j in 0..ny {
            let v = values[i * ny + j];
            let x = left + i as f64 * cw;
            let y = top + (ny - 1 - j) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cw + 0.05,
                ch + 0.05,
                color((v - lo) / span)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{}">x from {:.3} to {:.3}, v from {:.3} to {:.3}</text>"#,
        top + ph + 20.0,
        xs[0],
        xs[nx - 1],
        ys[0],
        ys[ny - 1]
    );
    // colour bar
    let bx = left + pw + 20.0;
    for k in 0..50 {
        let u = k as f64 / 49.0;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{:.2}" width="20" height="{:.2}" fill="{}"/>"#,
            top + (1.0 - u) * (ph - ph / 50.0),
            ph / 50.0 + 0.5,
            color(u)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{hi:.2}</text>"#, bx + 25.0, top + 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">{lo:.2}</text>"#, bx + 25.0, top + ph);
    s.push_str("</svg>\n");
    s
}

/// Stacked panels, each a set of polylines sharing the horizontal axis.
pub fn line_panels(header: &str, title: &str, xs: &[f64], panels: &[(&str, Vec<Vec<f64>>)]) -> String {
    let (pw, ph, gap) = (640.0, 200.0, 40.0);
    let (left, top) = (70.0, 30.0);
    let height = top + panels.len() as f64 * (ph + gap) + 20.0;
    let mut s = String::new();
    open(&mut s, header, left + pw + 20.0, height);
    let _ = writeln!(s, r#"<text x="{left}" y="18">{title}</text>"#);
    let (x0, x1) = (xs[0], xs[xs.len() - 1]);
    let xw = if x1 > x0 { x1 - x0 } else { 1.0 };
    for (p, (label, series)) in panels.iter().enumerate() {
        let y_top = top + p as f64 * (ph + gap);
        let all = series.iter().flatten().copied().filter(|v| v.is_finite());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{y_top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(s, r#"<text x="5" y="{}">{label}</text>"#, y_top + ph / 2.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{hi:.3}</text>"#, left - 60.0, y_top + 10.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{lo:.3}</text>"#, left - 60.0, y_top + ph);
        for (k, ys) in series.iter().enumerate() {
            let pts: Vec<String> = xs
                .iter()
                .zip(ys)
                .map(|(x, y)| {
                    format!(
                        "{:.2},{:.2}",
                        left + (x - x0) / xw * pw,
                        y_top + ph - (y - lo) / (hi - lo) * ph
                    )
                })
                .collect();
            let c = color(if series.len() > 1 { k as f64 / (series.len() - 1) as f64 } else { 0.2 });
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{}">t from {x0} to {x1}</text>"#,
        height - 5.0
    );
    s.push_str("</svg>\n");
    s
}
