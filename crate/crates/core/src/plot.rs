//! Self-contained SVG overlays of theory against simulation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{by_method, ResultRow};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub log_y: bool,
    pub title: Option<String>,
    pub width: f64,
    pub height: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            log_y: false,
            title: None,
            width: 720.0,
            height: 480.0,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    pix_lo: f64,
    pix_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, log: bool, pix_lo: f64, pix_hi: f64) -> Self {
        let (mut lo, mut hi) = if log { (lo.log10(), hi.log10()) } else { (lo, hi) };
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { 0.05 * lo.abs() } else { 0.5 };
            lo -= pad;
            hi += pad;
        } else {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log, pix_lo, pix_hi }
    }

    fn map(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        self.pix_lo + (t - self.lo) / (self.hi - self.lo) * (self.pix_hi - self.pix_lo)
    }

    /// Tick values in data units.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            let decades: Vec<f64> = (a..=b)
                .map(|e| 10f64.powi(e))
                .filter(|&v| (self.lo..=self.hi).contains(&v.log10()))
                .collect();
            if decades.len() >= 2 {
                return decades;
            }
            return (0..=4)
                .map(|k| 10f64.powf(self.lo + (self.hi - self.lo) * k as f64 / 4.0))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| s >= raw)
            .unwrap_or(10.0 * mag);
        let start = (self.lo / step).ceil() as i64;
        let end = (self.hi / step).floor() as i64;
        (start..=end).map(|k| k as f64 * step).collect()
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn points(coords: &[(f64, f64)]) -> String {
    coords
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn x_of(row: &ResultRow) -> f64 {
    row.r as f64 / row.n as f64
}

/// Renders rows sharing one metric as an SVG document.
pub fn render_svg(rows: &[ResultRow], style: &PlotStyle) -> Result<String> {
    let first = rows.first().ok_or_else(|| Error::invalid("nothing to plot: no rows"))?;
    let metric = first.metric;
    if rows.iter().any(|r| r.metric != metric) {
        return Err(Error::invalid("rows must share one metric; filter with --metric"));
    }
    let mut ys: Vec<f64> = Vec::new();
    for r in rows {
        ys.extend([r.empirical_mean, r.empirical_q05, r.empirical_q95]);
        ys.extend(r.theory_value);
    }
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("plot values must be finite".into()));
    }
    if style.log_y {
        if let Some(v) = ys.iter().find(|&&v| v <= 0.0) {
            return Err(Error::invalid(format!("log-scale y axis needs positive values, found {v}")));
        }
    }
    let xs: Vec<f64> = rows.iter().map(x_of).collect();
    let fold = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let ((x0, x1), (y0, y1)) = (fold(&xs), fold(&ys));
    let (w, h) = (style.width, style.height);
    let xa = Axis::new(x0, x1, false, MARGIN_LEFT, w - MARGIN_RIGHT);
    let ya = Axis::new(y0, y1, style.log_y, h - MARGIN_BOTTOM, MARGIN_TOP);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let title = style.title.clone().unwrap_or_else(|| metric.as_str().to_uppercase());
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (MARGIN_LEFT + w - MARGIN_RIGHT) / 2.0,
        escape(&title)
    );

    let (px0, px1, py0, py1) = (MARGIN_LEFT, w - MARGIN_RIGHT, h - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = writeln!(s, r##"<g class="axes" stroke="#333" fill="none">"##);
    let _ = writeln!(s, r#"<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}"/>"#);
    let _ = writeln!(s, r#"<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g class="ticks" fill="#333">"##);
    for t in xa.ticks() {
        let x = xa.map(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{py0}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            py0 + 5.0,
            py0 + 18.0,
            fmt_tick(t)
        );
    }
    for t in ya.ticks() {
        let y = ya.map(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{px0}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            px0 - 5.0,
            px0 - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">r/n</text>"#,
        (px0 + px1) / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}{}</text>"#,
        (py0 + py1) / 2.0,
        (py0 + py1) / 2.0,
        metric.as_str().to_uppercase(),
        if style.log_y { " (log scale)" } else { "" }
    );

    for (k, (method, group)) in by_method(rows).into_iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut group = group;
        group.sort_by(|a, b| x_of(a).total_cmp(&x_of(b)));
        let _ = writeln!(s, r#"<g class="series" data-method="{method}">"#);

        let upper: Vec<(f64, f64)> = group.iter().map(|r| (xa.map(x_of(r)), ya.map(r.empirical_q95))).collect();
        let lower: Vec<(f64, f64)> = group.iter().rev().map(|r| (xa.map(x_of(r)), ya.map(r.empirical_q05))).collect();
        let band: Vec<(f64, f64)> = upper.into_iter().chain(lower).collect();
        let _ = writeln!(
            s,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            points(&band)
        );

        let mean: Vec<(f64, f64)> = group.iter().map(|r| (xa.map(x_of(r)), ya.map(r.empirical_mean))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="empirical" points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
            points(&mean)
        );
        for (x, y) in &mean {
            let _ = writeln!(s, r#"<circle class="marker" cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }

        let theory: Vec<(f64, f64)> = group
            .iter()
            .filter_map(|r| r.theory_value.map(|t| (xa.map(x_of(r)), ya.map(t))))
            .collect();
        if !theory.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline class="theory" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                points(&theory)
            );
            for (x, y) in &theory {
                let _ = writeln!(
                    s,
                    r#"<rect class="theory-point" x="{:.2}" y="{:.2}" width="5" height="5" fill="white" stroke="{color}"/>"#,
                    x - 2.5,
                    y - 2.5
                );
            }
        }

        let ly = MARGIN_TOP + 10.0 + 36.0 * k as f64;
        let lx = w - MARGIN_RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/><line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-dasharray="6 4"/><text x="{:.1}" y="{:.1}">{method}</text></g>"#,
            lx + 25.0,
            ly + 12.0,
            lx + 25.0,
            ly + 12.0,
            lx + 32.0,
            ly + 10.0
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes [`render_svg`] output to `path`.
pub fn emit_plot(rows: &[ResultRow], path: impl AsRef<Path>, style: &PlotStyle) -> Result<()> {
    let svg = render_svg(rows, style)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efficiency::Metric;
    use crate::sketch::SketchMethod;

    fn row(method: SketchMethod, r: usize, mean: f64, theory: Option<f64>) -> ResultRow {
        ResultRow {
            method,
            n: 100,
            p: 10,
            r,
            gamma: 0.1,
            xi: r as f64 / 100.0,
            metric: Metric::Ve,
            empirical_mean: mean,
            empirical_sd: 0.1,
            empirical_q05: mean - 0.1,
            empirical_q95: mean + 0.1,
            theory_value: theory,
            replicates: 5,
            padded_n: None,
            mean_rows: r as f64,
            retries: 0,
            note: String::new(),
        }
    }

    fn count(doc: &roxmltree::Document, class: &str) -> usize {
        doc.descendants().filter(|n| n.attribute("class") == Some(class)).count()
    }

    #[test]
    fn single_row() {
        let svg = render_svg(&[row(SketchMethod::Haar, 50, 1.2, Some(1.18))], &PlotStyle::default()).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(count(&doc, "marker"), 1);
        assert_eq!(count(&doc, "theory-point"), 1);
    }

    #[test]
    fn well_formed_with_several_series() {
        let mut rows = Vec::new();
        for (m, off) in [(SketchMethod::Gaussian, 1.0), (SketchMethod::Srht, 0.0)] {
            for r in [20, 50, 100] {
                rows.push(row(m, r, 1.0 + off + 10.0 / r as f64, Some(1.0 + off + 9.0 / r as f64)));
            }
        }
        rows.push(row(SketchMethod::LeverageSample, 50, 2.0, None));
        for log_y in [false, true] {
            let svg = render_svg(&rows, &PlotStyle { log_y, title: Some("a < b & c".into()), ..PlotStyle::default() }).unwrap();
            let doc = roxmltree::Document::parse(&svg).unwrap();
            assert_eq!(count(&doc, "marker"), 7);
            assert_eq!(count(&doc, "theory-point"), 6);
            assert_eq!(count(&doc, "series"), 3);
        }
    }

    #[test]
    fn validation() {
        assert!(render_svg(&[], &PlotStyle::default()).is_err());
        let neg = [row(SketchMethod::Haar, 50, 0.05, Some(1.0))];
        let log = PlotStyle { log_y: true, ..PlotStyle::default() };
        assert!(render_svg(&neg, &log).is_err());
        assert!(render_svg(&neg, &PlotStyle::default()).is_ok());
        let mut mixed = vec![row(SketchMethod::Haar, 50, 1.0, None)];
        let mut other = row(SketchMethod::Haar, 60, 1.0, None);
        other.metric = Metric::Oe;
        mixed.push(other);
        assert!(render_svg(&mixed, &PlotStyle::default()).is_err());
    }

    #[test]
    fn writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        emit_plot(&[row(SketchMethod::Haar, 50, 1.2, Some(1.1))], &path, &PlotStyle::default()).unwrap();
        assert!(std::fs::read_to_string(path).unwrap().starts_with("<svg"));
    }
}
