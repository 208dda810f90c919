//! Minimal SVG line charts: one panel per algorithm, one series per mode.

use std::fmt::Write;

use super::{Algorithm, BenchResult};
use crate::pktgen::Mode;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 55.0;
const MARGIN_R: f64 = 15.0;
const MARGIN_T: f64 = 35.0;
const MARGIN_B: f64 = 45.0;

fn series_color(mode: Mode) -> &'static str {
    match mode {
        Mode::Ordered => "#1f77b4",
        Mode::Random => "#d62728",
    }
}

fn x_label(alg: Algorithm) -> &'static str {
    match alg {
        Algorithm::FmDelta => "word size (bytes)",
        Algorithm::Baseline => "zlib level",
    }
}

fn title(alg: Algorithm) -> &'static str {
    match alg {
        Algorithm::FmDelta => "FM-Delta",
        Algorithm::Baseline => "zlib baseline",
    }
}

pub(super) fn render(results: &[BenchResult]) -> String {
    let mut algs: Vec<Algorithm> = results.iter().map(|r| r.algorithm).collect();
    algs.sort();
    algs.dedup();
    // Baseline panel first, matching the usual left/right layout.
    algs.reverse();

    let width = PANEL_W * algs.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="11">"#
    );
    for (i, alg) in algs.iter().enumerate() {
        let rows: Vec<&BenchResult> = results.iter().filter(|r| r.algorithm == *alg).collect();
        panel(&mut svg, *alg, &rows, PANEL_W * i as f64);
    }
    svg.push_str("</svg>\n");
    svg
}

fn panel(svg: &mut String, alg: Algorithm, rows: &[&BenchResult], x0: f64) {
    let mut params: Vec<u32> = rows.iter().map(|r| r.parameter).collect();
    params.sort_unstable();
    params.dedup();
    let y_max = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max).max(1.0);
    let y_top = (y_max * 1.1 * 2.0).ceil() / 2.0;

    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |k: usize| {
        let span = (params.len().max(2) - 1) as f64;
        x0 + MARGIN_L + plot_w * k as f64 / span
    };
    let py = |v: f64| MARGIN_T + plot_h * (1.0 - v / y_top);

    let _ = writeln!(svg, r#"<g class="chart" data-algorithm="{alg}">"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        x0 + PANEL_W / 2.0,
        title(alg)
    );
    let (left, right, bottom) = (x0 + MARGIN_L, x0 + PANEL_W - MARGIN_R, PANEL_H - MARGIN_B);
    let _ = writeln!(
        svg,
        r#"<path d="M{left:.1},{MARGIN_T:.1} L{left:.1},{bottom:.1} L{right:.1},{bottom:.1}" fill="none" stroke="black"/>"#
    );
    let steps = (y_top / 0.5).round() as usize;
    for s in 0..=steps {
        let v = s as f64 * 0.5;
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{right:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            left - 5.0,
            y + 4.0
        );
    }
    for (k, p) in params.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{p}</text>"#,
            px(k),
            bottom + 15.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        x0 + MARGIN_L + plot_w / 2.0,
        PANEL_H - 8.0,
        x_label(alg)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle">compression ratio</text>"#,
        x0 + 14.0,
        MARGIN_T + plot_h / 2.0
    );

    for (n, mode) in [Mode::Ordered, Mode::Random].into_iter().enumerate() {
        let pts: Vec<(f64, f64)> = params
            .iter()
            .enumerate()
            .filter_map(|(k, p)| {
                rows.iter()
                    .find(|r| r.parameter == *p && r.mode == mode)
                    .map(|r| (px(k), py(r.ratio)))
            })
            .collect();
        if pts.is_empty() {
            continue;
        }
        let color = series_color(mode);
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-mode="{mode}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
        }
        let ly = MARGIN_T + 12.0 + 14.0 * n as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{mode}</text>"#,
            right - 80.0,
            right - 60.0,
            right - 55.0,
            ly + 4.0
        );
    }
    svg.push_str("</g>\n");
}
