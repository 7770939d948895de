//! Static SVG line charts with error bars.

use std::fmt::Write as _;
use std::path::Path;

use tddlab_core::metrics::{SweepTable, Window, DIVERGENCE_SENTINEL};

use crate::error::{HarnessError, Result};
use crate::output::{write_text, Curve};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MAX_POINTS: usize = 800;
const ERROR_BARS_PER_CURVE: usize = 20;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub err: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxesSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    /// Tick positions in data units; evenly spaced ticks when `None`.
    pub x_ticks: Option<Vec<f64>>,
    /// Draw a marker at every point (sensitivity plots) or only the line.
    pub markers: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn linear_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect()
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    scale: Scale,
}

impl Frame {
    fn tx(&self, x: f64) -> f64 {
        let x = match self.scale {
            Scale::Linear => x,
            Scale::Log10 => x.log10(),
        };
        LEFT + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - LEFT - RIGHT)
    }

    fn ty(&self, y: f64) -> f64 {
        let y = y.clamp(self.y_lo, self.y_hi);
        HEIGHT - BOTTOM - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn frame(series: &[Series], scale: Scale) -> Result<Frame> {
    let xs = series.iter().flat_map(|s| s.x.iter().copied()).map(|x| match scale {
        Scale::Linear => x,
        Scale::Log10 => x.log10(),
    });
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in xs.filter(|x| x.is_finite()) {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
    }
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (y, e) in s.y.iter().zip(&s.err) {
            // Diverged cells sit at the sentinel; keep them off the scale.
            if y.is_finite() && *y < DIVERGENCE_SENTINEL {
                y_lo = y_lo.min(y - e.max(0.0));
                y_hi = y_hi.max(y + e.max(0.0));
            }
        }
    }
    if !x_lo.is_finite() || !y_lo.is_finite() {
        return Err(HarnessError::config("nothing finite to plot"));
    }
    if x_hi == x_lo {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    y_lo = y_lo.min(0.0);
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    y_hi += 0.05 * (y_hi - y_lo);
    Ok(Frame {
        x_lo,
        x_hi,
        y_lo,
        y_hi,
        scale,
    })
}

/// Renders `series` as an SVG document.
pub fn render_svg(series: &[Series], axes: &AxesSpec) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        return Err(HarnessError::config("no curves to plot"));
    }
    let f = frame(series, axes.x_scale)?;
    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&axes.title)
    );
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        w,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );

    let x_ticks: Vec<f64> = match (&axes.x_ticks, axes.x_scale) {
        (Some(t), _) => t.clone(),
        (None, Scale::Linear) => linear_ticks(f.x_lo, f.x_hi, 5),
        (None, Scale::Log10) => linear_ticks(f.x_lo, f.x_hi, 5).into_iter().map(|e| 10f64.powf(e)).collect(),
    };
    let _ = writeln!(w, r#"<g class="x-ticks">"#);
    for t in &x_ticks {
        let px = f.tx(*t);
        let label = match axes.x_scale {
            Scale::Linear => nice_label(*t),
            Scale::Log10 => nice_label(t.log10()),
        };
        let _ = writeln!(
            w,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black" data-value="{t:e}"/><text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"#,
            y0 + 5.0,
            y0 + 18.0
        );
    }
    let _ = writeln!(w, "</g>");
    for t in linear_ticks(f.y_lo, f.y_hi, 5) {
        let py = f.ty(t);
        let _ = writeln!(
            w,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            nice_label(t)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&axes.y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let n = s.x.len();
        let stride = n.div_ceil(MAX_POINTS).max(1);
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if idx.last() != Some(&(n - 1)) && n > 0 {
            idx.push(n - 1);
        }
        let points: Vec<String> = idx
            .iter()
            .map(|&k| format!("{:.2},{:.2}", f.tx(s.x[k]), f.ty(s.y[k])))
            .collect();
        let _ = writeln!(w, r#"<g class="series" data-label="{}">"#, escape(&s.label));
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let bar_stride = if axes.markers { 1 } else { n.div_ceil(ERROR_BARS_PER_CURVE).max(1) };
        for k in (0..n).step_by(bar_stride) {
            let px = f.tx(s.x[k]);
            let (lo, hi) = (f.ty(s.y[k] - s.err[k]), f.ty(s.y[k] + s.err[k]));
            if s.err[k] > 0.0 {
                let _ = writeln!(
                    w,
                    r#"<path class="errorbar" d="M{px:.2} {lo:.2} L{px:.2} {hi:.2} M{:.2} {lo:.2} L{:.2} {lo:.2} M{:.2} {hi:.2} L{:.2} {hi:.2}" stroke="{color}"/>"#,
                    px - 3.0,
                    px + 3.0,
                    px - 3.0,
                    px + 3.0
                );
            }
            if axes.markers {
                let _ = writeln!(
                    w,
                    r#"<circle cx="{px:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    f.ty(s.y[k])
                );
            }
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            w,
            r#"<line class="legend" x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x1 + 15.0,
            x1 + 40.0,
            x1 + 46.0,
            ly + 4.0,
            escape(&s.label)
        );
        let _ = writeln!(w, "</g>");
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

pub fn emit_svg(series: &[Series], path: &Path, axes: &AxesSpec) -> Result<()> {
    write_text(path, &render_svg(series, axes)?)
}

/// One series per algorithm: the best criterion at each α over the other
/// grid dimensions, with its standard error.
pub fn sensitivity_series(table: &SweepTable, window: Window) -> Vec<Series> {
    let mut out = Vec::new();
    for algorithm in table.algorithms() {
        let mut alphas: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.algorithm == algorithm && r.window == window)
            .map(|r| r.alpha)
            .collect();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let mut s = Series {
            label: algorithm.label().to_string(),
            x: Vec::new(),
            y: Vec::new(),
            err: Vec::new(),
        };
        for alpha in alphas {
            let best = table
                .rows
                .iter()
                .filter(|r| r.algorithm == algorithm && r.window == window && r.alpha == alpha)
                .min_by(|a, b| a.criterion.total_cmp(&b.criterion))
                .expect("alpha taken from these rows");
            s.x.push(alpha);
            s.y.push(best.criterion);
            s.err.push(best.criterion_stderr);
        }
        if !s.x.is_empty() {
            out.push(s);
        }
    }
    out
}

pub fn sensitivity_axes(table: &SweepTable, window: Window) -> AxesSpec {
    let mut ticks: Vec<f64> = table.rows.iter().map(|r| r.alpha).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    let task = table.rows.first().map_or("", |r| r.task.as_str());
    AxesSpec {
        title: format!("{task}: RMS error vs step size ({window})"),
        x_label: "log10 α".into(),
        y_label: "RMS error".into(),
        x_scale: Scale::Log10,
        x_ticks: Some(ticks),
        markers: true,
    }
}

pub fn curve_series(curves: &[Curve]) -> Vec<Series> {
    curves
        .iter()
        .map(|c| Series {
            label: c.label.clone(),
            x: (1..=c.mean.len()).map(|e| e as f64).collect(),
            y: c.mean.clone(),
            err: c.stderr.clone(),
        })
        .collect()
}

pub fn curve_axes(title: &str) -> AxesSpec {
    AxesSpec {
        title: title.to_string(),
        x_label: "episode".into(),
        y_label: "RMS error".into(),
        x_scale: Scale::Linear,
        x_ticks: None,
        markers: false,
    }
}
