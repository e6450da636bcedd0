//! Standalone SVG curve plots for metrics files.
//!
//! One file per logged metric (format reward, accuracy reward, mean
//! response length, gradient norm, difficult fraction), each a
//! self-contained vector image: no external renderer, no scripts, no
//! timestamps. Output bytes are a pure function of the input series, so
//! identical metrics produce identical files. With two series the
//! curves overlay and a legend names them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use ghpo_core::types::RunMetrics;

/// One labeled metrics run.
pub struct Series<'a> {
    pub label: String,
    pub rows: &'a [RunMetrics],
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 74.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 54.0;
const COLORS: [&str; 2] = ["#3465a4", "#cc0000"];

/// The five plotted metrics: (file stem, axis label, accessor).
const CURVES: [(&str, &str, fn(&RunMetrics) -> f64); 5] = [
    ("format_reward", "format reward", |m| m.mean_format_reward),
    ("accuracy_reward", "accuracy reward", |m| m.mean_accuracy_reward),
    ("mean_resp_len", "mean response length", |m| {
        m.mean_response_length
    }),
    ("grad_norm", "gradient norm", |m| m.grad_norm),
    ("difficult_fraction", "difficult fraction", |m| {
        m.difficult_fraction
    }),
];

/// Render all five curve files into `out_dir`; returns the paths.
pub fn emit_plots(series: &[Series], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if series.is_empty() {
        bail!("no data rows");
    }
    for s in series {
        if s.rows.is_empty() {
            bail!("no data rows in run {:?}", s.label);
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut paths = Vec::new();
    for (stem, label, get) in CURVES {
        let path = out_dir.join(format!("{stem}.svg"));
        fs::write(&path, render_svg(label, series, get))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Trimmed fixed-point tick label; pure formatting keeps bytes stable.
fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn render_svg(metric_label: &str, series: &[Series], get: fn(&RunMetrics) -> f64) -> String {
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for s in series {
        for m in s.rows {
            x0 = x0.min(m.step as f64);
            x1 = x1.max(m.step as f64);
            y0 = y0.min(get(m));
            y1 = y1.max(get(m));
        }
    }
    // Degenerate spans still render: widen to a unit box around the value.
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        let pad = y0.abs().max(1.0) * 0.5;
        y0 -= pad;
        y1 += pad;
    } else {
        let pad = (y1 - y0) * 0.05;
        y0 -= pad;
        y1 += pad;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!("<title>{metric_label}</title>\n"));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{metric_label}</text>\n",
        MARGIN_L + plot_w / 2.0
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{l:.2}\" y1=\"{t:.2}\" x2=\"{l:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{l:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n",
        l = MARGIN_L,
        r = MARGIN_L + plot_w,
        t = MARGIN_T,
        b = MARGIN_T + plot_h,
    ));
    // Ticks: five per axis at even fractions.
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let xp = sx(xv);
        svg.push_str(&format!(
            "<line x1=\"{xp:.2}\" y1=\"{b:.2}\" x2=\"{xp:.2}\" y2=\"{b2:.2}\" stroke=\"black\"/>\n\
             <text x=\"{xp:.2}\" y=\"{ty:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{lbl}</text>\n",
            b = MARGIN_T + plot_h,
            b2 = MARGIN_T + plot_h + 5.0,
            ty = MARGIN_T + plot_h + 18.0,
            lbl = tick_label(xv),
        ));
        let yv = y0 + f * (y1 - y0);
        let yp = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{l2:.2}\" y1=\"{yp:.2}\" x2=\"{l:.2}\" y2=\"{yp:.2}\" stroke=\"black\"/>\n\
             <text x=\"{tx:.2}\" y=\"{typ:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{lbl}</text>\n",
            l = MARGIN_L,
            l2 = MARGIN_L - 5.0,
            tx = MARGIN_L - 8.0,
            typ = yp + 4.0,
            lbl = tick_label(yv),
        ));
    }
    // Axis labels.
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">step</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 14.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {mid:.2})\">{metric_label}</text>\n",
        MARGIN_T + plot_h / 2.0,
        mid = MARGIN_T + plot_h / 2.0
    ));

    // Curves.
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = s
            .rows
            .iter()
            .map(|m| format!("{:.2},{:.2}", sx(m.step as f64), sy(get(m))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    }

    // Legend only when curves need telling apart.
    if series.len() > 1 {
        for (i, s) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let y = MARGIN_T + 10.0 + 16.0 * i as f64;
            let x = MARGIN_L + plot_w - 120.0;
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{y:.2}\" x2=\"{x2:.2}\" y2=\"{y:.2}\" \
                 stroke=\"{color}\" stroke-width=\"2\"/>\n\
                 <text x=\"{tx:.2}\" y=\"{ty:.2}\" font-family=\"sans-serif\" \
                 font-size=\"12\">{label}</text>\n",
                x2 = x + 22.0,
                tx = x + 28.0,
                ty = y + 4.0,
                label = s.label,
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
