//! Static SVG figures.

use std::fmt::Write as _;

use super::ErrorField;
use crate::error::{config, Result};
use crate::real::Real;
use crate::training::LossRecord;

/// Cells per heatmap axis; finer grids are aggregated in blocks.
pub const HEATMAP_MAX_CELLS: usize = 200;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [(f64, f64, f64); 5] =
    [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
const SERIES: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn header(s: &mut String, extra: &str, title: &str) {
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" {extra}>"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn colour(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (PALETTE.len() - 1) as f64;
    let i = (x.floor() as usize).min(PALETTE.len() - 2);
    let w = x - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |p: f64, q: f64| (p + w * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Linear map of `[lo, hi]` onto `[a, b]`; a degenerate range maps to the middle.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        0.5 * (a + b)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn axes_box(s: &mut String, left: f64, top: f64, w: f64, h: f64) {
    writeln!(s, r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#).unwrap();
}

fn tick_labels(s: &mut String, left: f64, top: f64, w: f64, h: f64, x: (f64, f64), y: (f64, f64)) {
    let bottom = top + h;
    writeln!(s, r#"<text class="xmin" x="{left}" y="{}" text-anchor="start" font-size="11">{}</text>"#, bottom + 16.0, fmt_num(x.0)).unwrap();
    writeln!(s, r#"<text class="xmax" x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#, left + w, bottom + 16.0, fmt_num(x.1)).unwrap();
    writeln!(s, r#"<text x="{}" y="{bottom}" text-anchor="end" font-size="11">{}</text>"#, left - 4.0, fmt_num(y.0)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#, left - 4.0, top + 10.0, fmt_num(y.1)).unwrap();
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{}", (v * 1e4).round() / 1e4)
    } else {
        format!("{v:.2e}")
    }
}

fn polyline(s: &mut String, class: &str, colour: &str, pts: impl Iterator<Item = (f64, f64)>) {
    let mut path = String::new();
    for (x, y) in pts {
        write!(path, "{x:.2},{y:.2} ").unwrap();
    }
    writeln!(s, r#"<polyline class="{class}" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, path.trim_end())
        .unwrap();
}

fn legend(s: &mut String, x: f64, y: f64, entries: &[(&str, &str)]) {
    for (k, (name, c)) in entries.iter().enumerate() {
        let yy = y + 16.0 * k as f64;
        writeln!(s, r#"<line x1="{x}" y1="{yy}" x2="{}" y2="{yy}" stroke="{c}" stroke-width="2"/>"#, x + 18.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" font-size="11">{name}</text>"#, x + 22.0, yy + 4.0).unwrap();
    }
}

/// Reference and prediction over `x` (top) and the pointwise error (bottom).
pub fn line_plot_svg<T: Real>(field: &ErrorField<T>, title: &str) -> Result<String> {
    if field.points.iter().any(|p| p.len() != 1) {
        return Err(config("line plots need one-dimensional points"));
    }
    let mut order: Vec<usize> = (0..field.points.len()).collect();
    let x = |i: usize| field.points[i][0].to_f64_lossy();
    order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
    let u = |i: usize| field.truth[i].to_f64_lossy();
    let p = |i: usize| field.prediction[i].to_f64_lossy();
    let e = |i: usize| p(i) - u(i);
    let xr = range(order.iter().map(|&i| x(i)));
    let yr = range(order.iter().flat_map(|&i| [u(i), p(i)]));
    let er = range(order.iter().map(|&i| e(i)));

    let mut s = String::new();
    header(&mut s, r#"data-kind="line""#, title);
    let (left, w) = (MARGIN, WIDTH - 1.5 * MARGIN);
    let (top1, h1) = (40.0, 250.0);
    let (top2, h2) = (top1 + h1 + 40.0, HEIGHT - top1 - h1 - 40.0 - 40.0);
    axes_box(&mut s, left, top1, w, h1);
    tick_labels(&mut s, left, top1, w, h1, xr, yr);
    let px = |i: usize| scale(x(i), xr.0, xr.1, left, left + w);
    polyline(&mut s, "truth", SERIES[0], order.iter().map(|&i| (px(i), scale(u(i), yr.0, yr.1, top1 + h1, top1))));
    polyline(&mut s, "prediction", SERIES[1], order.iter().map(|&i| (px(i), scale(p(i), yr.0, yr.1, top1 + h1, top1))));
    legend(&mut s, left + 10.0, top1 + 16.0, &[("reference", SERIES[0]), ("prediction", SERIES[1])]);
    axes_box(&mut s, left, top2, w, h2);
    tick_labels(&mut s, left, top2, w, h2, xr, er);
    polyline(&mut s, "error", SERIES[2], order.iter().map(|&i| (px(i), scale(e(i), er.0, er.1, top2 + h2, top2))));
    legend(&mut s, left + 10.0, top2 + 16.0, &[("prediction - reference", SERIES[2])]);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Block aggregation of a grid field: the value at the block centre, or
/// the largest magnitude in the block.
fn blocks(values: &[f64], shape: &[usize], cells: (usize, usize), max_abs: bool) -> Vec<f64> {
    let (n0, n1) = (shape[0], shape[1]);
    let mut out = Vec::with_capacity(cells.0 * cells.1);
    for c0 in 0..cells.0 {
        let (a0, b0) = (c0 * n0 / cells.0, (c0 + 1) * n0 / cells.0);
        for c1 in 0..cells.1 {
            let (a1, b1) = (c1 * n1 / cells.1, (c1 + 1) * n1 / cells.1);
            if max_abs {
                let mut m = 0.0_f64;
                for i in a0..b0 {
                    for j in a1..b1 {
                        m = m.max(values[i * n1 + j].abs());
                    }
                }
                out.push(m);
            } else {
                out.push(values[(a0 + b0) / 2 * n1 + (a1 + b1) / 2]);
            }
        }
    }
    out
}

/// Prediction (left) and absolute error (right) on a 2-D grid. The first
/// coordinate runs horizontally.
pub fn heatmap_svg<T: Real>(field: &ErrorField<T>, shape: &[usize], title: &str) -> Result<String> {
    if shape.len() != 2 || shape.iter().product::<usize>() != field.points.len() || shape.contains(&0) {
        return Err(config(format!("heatmap shape {shape:?} does not match {} points", field.points.len())));
    }
    let cells = (shape[0].min(HEATMAP_MAX_CELLS), shape[1].min(HEATMAP_MAX_CELLS));
    let pred: Vec<f64> = field.prediction.iter().map(|v| v.to_f64_lossy()).collect();
    let err: Vec<f64> = field.error().iter().map(|v| v.to_f64_lossy()).collect();
    let panels = [("prediction", blocks(&pred, shape, cells, false)), ("absolute error", blocks(&err, shape, cells, true))];
    let first = field.points.first().expect("non-empty grid");
    let last = field.points.last().expect("non-empty grid");
    let xr = (first[0].to_f64_lossy(), last[0].to_f64_lossy());
    let yr = (first[1].to_f64_lossy(), last[1].to_f64_lossy());

    let mut s = String::new();
    let extra = format!(r#"data-kind="heatmap" data-grid="{}x{}" data-cells="{}x{}""#, shape[0], shape[1], cells.0, cells.1);
    header(&mut s, &extra, title);
    let side = 280.0;
    for (k, (name, values)) in panels.iter().enumerate() {
        let left = MARGIN + k as f64 * (side + MARGIN);
        let top = 70.0;
        let vr = range(values.iter().copied());
        writeln!(s, r#"<g class="panel" data-name="{name}">"#).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{name}</text>"#, left + side / 2.0, top - 10.0).unwrap();
        let (cw, ch) = (side / cells.0 as f64, side / cells.1 as f64);
        for c0 in 0..cells.0 {
            for c1 in 0..cells.1 {
                let v = values[c0 * cells.1 + c1];
                writeln!(
                    s,
                    r#"<rect class="cell" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    left + c0 as f64 * cw,
                    top + side - (c1 + 1) as f64 * ch,
                    cw + 0.05,
                    ch + 0.05,
                    colour(scale(v, vr.0, vr.1, 0.0, 1.0))
                )
                .unwrap();
            }
        }
        axes_box(&mut s, left, top, side, side);
        tick_labels(&mut s, left, top, side, side, xr, yr);
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">range [{}, {}]</text>"#,
            left + side / 2.0,
            top + side + 34.0,
            fmt_num(vr.0),
            fmt_num(vr.1)
        )
        .unwrap();
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Loss components on a log scale over `[0, iterations]`.
pub fn loss_plot_svg(history: &[LossRecord], iterations: usize, title: &str) -> String {
    let series: [(&str, fn(&LossRecord) -> f64); 4] =
        [("total", |r| r.loss_total), ("residual", |r| r.loss_r), ("boundary", |r| r.loss_bc), ("initial", |r| r.loss_ic)];
    let logs = |f: fn(&LossRecord) -> f64| -> Vec<(f64, f64)> {
        history.iter().filter(|r| f(r) > 0.0 && f(r).is_finite()).map(|r| (r.iteration as f64, f(r).log10())).collect()
    };
    let all: Vec<Vec<(f64, f64)>> = series.iter().map(|(_, f)| logs(*f)).collect();
    let mut yr = range(all.iter().flatten().map(|p| p.1));
    if !yr.0.is_finite() {
        yr = (0.0, 1.0);
    }
    yr = (yr.0.floor(), yr.1.ceil().max(yr.0.floor() + 1.0));
    let xr = (0.0, iterations as f64);

    let mut s = String::new();
    header(&mut s, &format!(r#"data-kind="loss" data-xmin="0" data-xmax="{iterations}""#), title);
    let (left, top, w, h) = (MARGIN + 10.0, 40.0, WIDTH - 1.7 * MARGIN, HEIGHT - 40.0 - MARGIN);
    axes_box(&mut s, left, top, w, h);
    let bottom = top + h;
    writeln!(s, r#"<text class="xmin" x="{left}" y="{}" font-size="11">0</text>"#, bottom + 16.0).unwrap();
    writeln!(s, r#"<text class="xmax" x="{}" y="{}" text-anchor="end" font-size="11">{iterations}</text>"#, left + w, bottom + 16.0)
        .unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">iteration</text>"#, left + w / 2.0, bottom + 32.0).unwrap();
    let mut decade = yr.0;
    while decade <= yr.1 {
        let y = scale(decade, yr.0, yr.1, bottom, top);
        writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, left + w).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">1e{decade}</text>"#, left - 4.0, y + 4.0).unwrap();
        decade += 1.0;
    }
    let mut entries = Vec::new();
    for (k, ((name, _), pts)) in series.iter().zip(&all).enumerate() {
        if pts.is_empty() {
            continue;
        }
        polyline(&mut s, name, SERIES[k], pts.iter().map(|&(it, l)| (scale(it, xr.0, xr.1, left, left + w), scale(l, yr.0, yr.1, bottom, top))));
        entries.push((*name, SERIES[k]));
    }
    legend(&mut s, left + w - 110.0, top + 16.0, &entries);
    s.push_str("</svg>\n");
    s
}
