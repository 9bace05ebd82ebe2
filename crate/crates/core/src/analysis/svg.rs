//! Minimal hand-written SVG for the three figure shapes.
//!
//! Coordinates are printed with two decimals so output is stable across runs.

use std::fmt::Write;

use super::{Figure, Series};

const PALETTE: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Comments may not contain `--`.
fn comment_safe(s: &str) -> String {
    let mut out = s.replace("--", "- -");
    while out.contains("--") {
        out = out.replace("--", "- -");
    }
    out
}

fn open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
}

fn data_comment(out: &mut String, labels: &[String], series: &[Series]) {
    out.push_str("<!-- data\n");
    let _ = writeln!(out, "series,{}", comment_safe(&labels.join(",")));
    for s in series {
        let vals: Vec<String> = s.values.iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(out, "{},{}", comment_safe(&s.label), vals.join(","));
    }
    out.push_str("-->\n");
}

fn legend(out: &mut String, series: &[Series], x: f64, y: f64) {
    for (i, s) in series.iter().enumerate() {
        let yy = y + 18.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{}"/>"#, yy - 10.0, color(i));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{yy:.2}">{}</text>"#, x + 18.0, escape(&s.label));
    }
}

fn value_range(series: &[Series], floor_zero: bool) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            let e = s.errors.as_ref().and_then(|e| e.get(i)).copied().unwrap_or(0.0);
            lo = lo.min(v - e);
            hi = hi.max(v + e);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if floor_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    (lo, hi)
}

fn radar(title: &str, axes: &[String], series: &[Series]) -> String {
    let (w, h) = (560.0, 480.0);
    let (cx, cy, radius) = (240.0, 250.0, 170.0);
    let (_, hi) = value_range(series, true);
    let max = hi.max(5.0);
    let n = axes.len().max(1);
    let point = |k: usize, v: f64| {
        let a = -std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * k as f64 / n as f64;
        let r = radius * (v / max).clamp(0.0, 1.0);
        (cx + r * a.cos(), cy + r * a.sin())
    };
    let mut out = String::new();
    open(&mut out, w, h, title);
    data_comment(&mut out, axes, series);
    for ring in 1..=5 {
        let v = max * ring as f64 / 5.0;
        let pts: Vec<String> = (0..n).map(|k| point(k, v)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(out, r##"<polygon points="{}" fill="none" stroke="#dddddd"/>"##, pts.join(" "));
    }
    for (k, name) in axes.iter().enumerate() {
        let (x, y) = point(k, max);
        let _ = writeln!(out, r##"<line class="axis" x1="{cx:.2}" y1="{cy:.2}" x2="{x:.2}" y2="{y:.2}" stroke="#999999"/>"##);
        let (lx, ly) = point(k, max * 1.12);
        let _ = writeln!(out, r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle">{}</text>"#, escape(name));
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> =
            s.values.iter().enumerate().map(|(k, v)| point(k, *v)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{c}" fill-opacity="0.15" stroke="{c}" stroke-width="2"/>"#,
            pts.join(" "),
            c = color(i)
        );
    }
    legend(&mut out, series, 440.0, 60.0);
    out.push_str("</svg>\n");
    out
}

/// Diverging blue-white-red fill for a value scaled to [-1, 1].
fn diverging(x: f64) -> String {
    let x = x.clamp(-1.0, 1.0);
    let (r, g, b) = if x >= 0.0 {
        (255.0, 255.0 - 155.0 * x, 255.0 - 155.0 * x)
    } else {
        (255.0 + 155.0 * x, 255.0 + 155.0 * x, 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn heatmap(
    title: &str,
    rows: &[String],
    cols: &[String],
    values: &[Vec<Option<f64>>],
    p_values: &[Vec<Option<f64>>],
) -> String {
    let cell = 56.0;
    let (x0, y0) = (70.0, 60.0);
    let w = x0 + cell * cols.len() as f64 + 30.0;
    let h = y0 + cell * rows.len() as f64 + 40.0;
    let scale = values.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
    let mut out = String::new();
    open(&mut out, w, h, title);
    out.push_str("<!-- data\n");
    let _ = writeln!(out, "row,{}", comment_safe(&cols.join(",")));
    for (r, name) in rows.iter().enumerate() {
        let vals: Vec<String> =
            values[r].iter().map(|v| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))).collect();
        let _ = writeln!(out, "{},{}", comment_safe(name), vals.join(","));
    }
    out.push_str("-->\n");
    for (c, name) in cols.iter().enumerate() {
        let x = x0 + cell * (c as f64 + 0.5);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 - 8.0, escape(name));
    }
    for (r, name) in rows.iter().enumerate() {
        let y = y0 + cell * r as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y + cell / 2.0 + 4.0,
            escape(name)
        );
        for c in 0..cols.len() {
            let x = x0 + cell * c as f64;
            let v = values[r][c];
            let fill = v.map_or_else(|| "#eeeeee".to_string(), |v| diverging(v / scale));
            let _ = writeln!(
                out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}" stroke="#ffffff"/>"##
            );
            if let Some(v) = v {
                let mark = p_values[r][c].map_or("", stars);
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{v:.2}{mark}</text>"#,
                    x + cell / 2.0,
                    y + cell / 2.0 + 4.0
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

fn bars(title: &str, groups: &[String], series: &[Series], y_label: &str) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 60.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let (lo, hi) = value_range(series, true);
    let y_of = |v: f64| top + plot_h * (hi - v) / (hi - lo);
    let mut out = String::new();
    open(&mut out, w, h, title);
    data_comment(&mut out, groups, series);
    let zero = y_of(0.0);
    let _ = writeln!(out, r##"<line x1="{left:.2}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#333333"/>"##, left + plot_w);
    let _ = writeln!(out, r##"<line x1="{left:.2}" y1="{top:.2}" x2="{left:.2}" y2="{:.2}" stroke="#333333"/>"##, top + plot_h);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{v:.2}</text>"#, left - 6.0, y + 3.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    );
    let gw = plot_w / groups.len().max(1) as f64;
    let bw = gw * 0.8 / series.len().max(1) as f64;
    for (g, name) in groups.iter().enumerate() {
        let gx = left + gw * g as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            gx + gw / 2.0,
            top + plot_h + 18.0,
            escape(name)
        );
        for (i, s) in series.iter().enumerate() {
            let Some(&v) = s.values.get(g) else { continue };
            let x = gx + gw * 0.1 + bw * i as f64;
            let (y1, y2) = (y_of(v).min(zero), y_of(v).max(zero));
            let _ = writeln!(
                out,
                r#"<rect class="bar" x="{x:.2}" y="{y1:.2}" width="{bw:.2}" height="{:.2}" fill="{}"/>"#,
                y2 - y1,
                color(i)
            );
            if let Some(e) = s.errors.as_ref().and_then(|e| e.get(g)) {
                let cx = x + bw / 2.0;
                let _ = writeln!(
                    out,
                    r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#000000"/>"##,
                    y_of(v + e),
                    y_of(v - e)
                );
            }
        }
    }
    legend(&mut out, series, w - right + 16.0, top + 10.0);
    out.push_str("</svg>\n");
    out
}

pub(crate) fn render(figure: &Figure) -> String {
    match figure {
        Figure::Radar { title, axes, series, .. } => radar(title, axes, series),
        Figure::Heatmap { title, rows, cols, values, p_values, .. } => heatmap(title, rows, cols, values, p_values),
        Figure::Bars { title, groups, series, y_label, .. } => bars(title, groups, series, y_label),
    }
}
