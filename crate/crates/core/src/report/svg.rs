//! Minimal standalone SVG charts: axes, ticks, markers and 95% CI bars.

use std::fmt::Write as _;

use crate::stats::Summary;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

/// Solo full, solo distributed, collaboration.
const GAP_COLORS: [&str; 3] = ["#8c8c8c", "#e6b800", "#d62728"];
const GAP_LABELS: [&str; 3] = ["solo (full map)", "solo (distributed)", "collaboration"];
const LINE_COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub label: String,
    /// One optional value per series, in series order.
    pub values: Vec<Option<Summary>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, Summary)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    out: String,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(title: &str, y_label: &str, y_min: f64, y_max: f64) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
            (LEFT + WIDTH - RIGHT) / 2.0,
            esc(title)
        );
        let mut f = Frame { out, y_min, y_max };
        f.axes(y_label);
        f
    }

    fn plot_w(&self) -> f64 {
        WIDTH - LEFT - RIGHT
    }

    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - TOP - BOTTOM;
        TOP + h * (1.0 - (v - self.y_min) / (self.y_max - self.y_min))
    }

    fn axes(&mut self, y_label: &str) {
        let bottom = HEIGHT - BOTTOM;
        let right = WIDTH - RIGHT;
        let _ = writeln!(self.out, "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{bottom}\" stroke=\"black\"/>");
        let _ = writeln!(self.out, "<line x1=\"{LEFT}\" y1=\"{bottom}\" x2=\"{right}\" y2=\"{bottom}\" stroke=\"black\"/>");
        let steps = 5;
        for i in 0..=steps {
            let v = self.y_min + (self.y_max - self.y_min) * f64::from(i) / f64::from(steps);
            let y = self.y(v);
            let _ = writeln!(
                self.out,
                "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{LEFT}\" y2=\"{y:.1}\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0,
                tick(v)
            );
            let _ = writeln!(
                self.out,
                "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{right}\" y2=\"{y:.1}\" stroke=\"#e0e0e0\"/>"
            );
        }
        let mid = (TOP + bottom) / 2.0;
        let _ = writeln!(
            self.out,
            "<text x=\"18\" y=\"{mid:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {mid:.1})\">{}</text>",
            esc(y_label)
        );
    }

    fn marker(&mut self, x: f64, s: &Summary, color: &str) {
        let clamp = |v: f64| v.clamp(self.y_min, self.y_max);
        let (y, lo, hi) = (self.y(clamp(s.mean)), self.y(clamp(s.ci95_low)), self.y(clamp(s.ci95_high)));
        let _ = writeln!(
            self.out,
            "<line x1=\"{x:.1}\" y1=\"{lo:.1}\" x2=\"{x:.1}\" y2=\"{hi:.1}\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        );
        for yy in [lo, hi] {
            let _ = writeln!(
                self.out,
                "<line x1=\"{:.1}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                x - 4.0,
                x + 4.0
            );
        }
        let _ = writeln!(self.out, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"4.5\" fill=\"{color}\"/>");
    }

    fn x_label(&mut self, x: f64, text: &str) {
        let y = HEIGHT - BOTTOM + 16.0;
        let _ = writeln!(
            self.out,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"end\" transform=\"rotate(-30 {x:.1} {y:.1})\">{}</text>",
            esc(text)
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        let x = WIDTH - RIGHT + 15.0;
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = TOP + 10.0 + 20.0 * i as f64;
            let _ = writeln!(
                self.out,
                "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"5\" fill=\"{color}\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
                x + 10.0,
                y + 4.0,
                esc(label)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn y_range(values: impl Iterator<Item = Summary>, floor: f64, ceil: f64) -> (f64, f64) {
    let mut lo = floor;
    let mut hi = ceil;
    for s in values {
        lo = lo.min(s.ci95_low.floor());
        hi = hi.max(s.ci95_high);
    }
    (lo, if hi > ceil { hi.ceil() } else { hi })
}

fn grouped_markers(title: &str, y_label: &str, series: &[(&str, &str)], groups: &[BarGroup], floor: f64, ceil: f64) -> String {
    let (lo, hi) = y_range(groups.iter().flat_map(|g| g.values.iter().flatten().cloned()), floor, ceil);
    let mut f = Frame::new(title, y_label, lo, hi);
    let slot = f.plot_w() / groups.len().max(1) as f64;
    for (gi, g) in groups.iter().enumerate() {
        let centre = LEFT + slot * (gi as f64 + 0.5);
        let spread = (slot * 0.6) / series.len().max(1) as f64;
        for (si, value) in g.values.iter().enumerate() {
            if let (Some(s), Some((_, color))) = (value, series.get(si)) {
                let x = centre + spread * (si as f64 - (series.len() as f64 - 1.0) / 2.0);
                f.marker(x, s, color);
            }
        }
        f.x_label(centre, &g.label);
    }
    f.legend(series);
    f.finish()
}

/// Weighted outcome per model for solo full (gray), solo distributed (yellow)
/// and homogeneous collaboration (red), with 95% CI.
pub fn gap_chart(groups: &[BarGroup]) -> String {
    let series: Vec<(&str, &str)> = GAP_LABELS.into_iter().zip(GAP_COLORS).collect();
    grouped_markers("Solo vs. collaboration", "weighted outcome", &series, groups, 0.0, 1.0)
}

/// Mean message count per outcome band; one series per mode.
pub fn efficiency_chart(series_labels: &[String], groups: &[BarGroup]) -> String {
    let series: Vec<(&str, &str)> = series_labels
        .iter()
        .zip(LINE_COLORS.iter().cycle())
        .map(|(l, c)| (l.as_str(), *c))
        .collect();
    grouped_markers("Messages by outcome band", "messages", &series, groups, 0.0, 1.0)
}

/// Weighted outcome against the number of frozen messages K.
pub fn relay_chart(series: &[Series]) -> String {
    let (lo, hi) = y_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1.clone())), 0.0, 1.0);
    let mut f = Frame::new("Relay: outcome vs. K", "weighted outcome", lo, hi);
    let ks: Vec<f64> = {
        let mut v: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (k_min, k_max) = (ks.first().copied().unwrap_or(0.0), ks.last().copied().unwrap_or(1.0));
    let span = if k_max > k_min { k_max - k_min } else { 1.0 };
    let plot_w = f.plot_w();
    let x = |k: f64| LEFT + 30.0 + (plot_w - 60.0) * (k - k_min) / span;
    for &k in &ks {
        f.x_label(x(k) + 8.0, &format!("K={k}"));
    }
    let mut legend = Vec::new();
    for (s, color) in series.iter().zip(LINE_COLORS.iter().cycle()) {
        let pts: Vec<String> = s.points.iter().map(|(k, m)| format!("{:.1},{:.1}", x(*k), f.y(m.mean))).collect();
        let _ = writeln!(
            f.out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
        for (k, m) in &s.points {
            f.marker(x(*k), m, color);
        }
        legend.push((s.label.as_str(), *color));
    }
    f.legend(&legend);
    f.finish()
}
