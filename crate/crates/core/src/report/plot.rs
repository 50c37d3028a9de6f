use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sir::{CompartmentSeries, RtSeries};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

/// A labelled event, drawn as a vertical marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub date: NaiveDate,
    pub label: String,
}

pub enum PlotData<'a> {
    Rt(&'a RtSeries),
    Compartments(&'a CompartmentSeries),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlotSummary {
    pub points: usize,
    pub annotations_drawn: usize,
    pub annotations_skipped: usize,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(out: &mut String, frame: &Frame, t: &[f64], v: &[f64], color: &str) {
    let pts: Vec<String> =
        t.iter().zip(v).map(|(&a, &b)| format!("{:.2},{:.2}", frame.x(a), frame.y(b))).collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        pts.join(" ")
    );
}

/// Renders a single-panel line plot. `start` is the date of `t = 0`.
/// R_t plots get a dashed reference line at one. Annotations outside the
/// series' time range are skipped with a warning.
pub fn render_svg(
    data: PlotData<'_>,
    start: NaiveDate,
    title: &str,
    annotations: &[Annotation],
) -> Result<(String, PlotSummary)> {
    let (t, lines): (&[f64], Vec<(&[f64], &str)>) = match data {
        PlotData::Rt(s) => (&s.t, vec![(&s.rt[..], "#1f77b4")]),
        PlotData::Compartments(s) => (
            &s.t,
            vec![(&s.s[..], "#2ca02c"), (&s.i[..], "#d62728"), (&s.r[..], "#7f7f7f")],
        ),
    };
    if t.is_empty() {
        return Err(Error::Input("cannot plot an empty series".into()));
    }
    let is_rt = matches!(data, PlotData::Rt(_));
    let values = lines.iter().flat_map(|(v, _)| v.iter().copied());
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Input("cannot plot non-finite values".into()));
    }
    if is_rt {
        lo = lo.min(1.0);
        hi = hi.max(1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (tmin, tmax) = (t[0], t[t.len() - 1]);
    let frame = Frame {
        x0: tmin,
        x1: if tmax > tmin { tmax } else { tmin + 1.0 },
        y0: lo - pad,
        y1: hi + pad,
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="20" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (v, anchor) in [(frame.y0, "end"), (frame.y1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="{anchor}">{:.3}</text>"#,
            MARGIN - 4.0,
            frame.y(v),
            v
        );
    }
    let end = start + chrono::Days::new(tmax.max(0.0) as u64);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{}">{start}</text>"#, HEIGHT - MARGIN + 16.0);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{end}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0
    );
    if is_rt {
        let y = frame.y(1.0);
        let _ = writeln!(
            out,
            r#"<line class="reference" x1="{MARGIN}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="black" stroke-dasharray="4 3"/>"#,
            WIDTH - MARGIN
        );
    }
    for (v, color) in &lines {
        polyline(&mut out, &frame, t, v, color);
    }

    let mut summary = PlotSummary { points: t.len(), annotations_drawn: 0, annotations_skipped: 0 };
    for a in annotations {
        let day = (a.date - start).num_days() as f64;
        if day < tmin || day > tmax {
            log::warn!("annotation {:?} on {} is outside the plotted range; skipped", a.label, a.date);
            summary.annotations_skipped += 1;
            continue;
        }
        let x = frame.x(day);
        let _ = writeln!(
            out,
            r##"<line class="annotation" x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{}" stroke="#ff7f0e"/>"##,
            HEIGHT - MARGIN
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{}" fill="#ff7f0e">{}</text>"##,
            x + 3.0,
            MARGIN + 12.0 + 12.0 * (summary.annotations_drawn % 4) as f64,
            escape(&a.label)
        );
        summary.annotations_drawn += 1;
    }
    out.push_str("</svg>\n");
    Ok((out, summary))
}

pub fn emit_plot(
    data: PlotData<'_>,
    start: NaiveDate,
    title: &str,
    annotations: &[Annotation],
    path: impl AsRef<Path>,
) -> Result<PlotSummary> {
    let (svg, summary) = render_svg(data, start, title, annotations)?;
    std::fs::write(path, svg)?;
    Ok(summary)
}
