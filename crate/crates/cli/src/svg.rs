//! Hand-rolled SVG output so plots need no external dependency. Output is
//! deterministic: floats use the shortest round-trip formatting.

use std::fmt::Write as _;

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub const PALETTE: [&str; 4] = ["#1f6fb2", "#d1495b", "#3a7d44", "#8a6d3b"];

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub marks: bool,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

fn fmt(v: f64) -> String {
    // fixed then trimmed keeps tick labels compact and deterministic
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.into()
    }
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    if xmin == xmax {
        xmax = xmin + 1.0;
    }
    if ymin == ymax {
        ymax = ymin + 1.0;
    }
    // y axis includes zero when it is nearby; graphs read better anchored
    if ymin > 0.0 && ymin < 0.5 * ymax {
        ymin = 0.0;
    }
    ((xmin, xmax), (ymin, ymax))
}

impl LinePlot {
    pub fn render(&self) -> String {
        let ((xmin, xmax), (ymin, ymax)) = bounds(&self.series);
        let sx = move |x: f64| ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
        let sy = move |y: f64| H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\">"
        );
        let _ = writeln!(out, "<!-- units: lengths um, angles rad, times s -->");
        let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" \
             text-anchor=\"middle\">{}</text>",
            (ML + W - MR) / 2.0,
            xml_escape(&self.title)
        );

        // frame and ticks
        let _ = writeln!(
            out,
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" \
             stroke=\"#333\"/>",
            W - ML - MR,
            H - MT - MB
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = xmin + t * (xmax - xmin);
            let yv = ymin + t * (ymax - ymin);
            let xp = sx(xv);
            let yp = sy(yv);
            let _ = writeln!(
                out,
                "<line x1=\"{xp}\" y1=\"{}\" x2=\"{xp}\" y2=\"{}\" stroke=\"#333\"/>",
                H - MB,
                H - MB + 5.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{xp}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"middle\">{}</text>",
                H - MB + 18.0,
                fmt(xv)
            );
            let _ = writeln!(
                out,
                "<line x1=\"{}\" y1=\"{yp}\" x2=\"{ML}\" y2=\"{yp}\" stroke=\"#333\"/>",
                ML - 5.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"end\">{}</text>",
                ML - 8.0,
                yp + 4.0,
                fmt(yv)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\">{}</text>",
            (ML + W - MR) / 2.0,
            H - 12.0,
            xml_escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
            (MT + H - MB) / 2.0,
            (MT + H - MB) / 2.0,
            xml_escape(&self.y_label)
        );

        for (si, s) in self.series.iter().enumerate() {
            if s.points.len() > 1 {
                let mut d = String::new();
                for &(x, y) in &s.points {
                    let _ = write!(d, "{},{} ", sx(x), sy(y));
                }
                let _ = writeln!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                    d.trim_end(),
                    s.color
                );
            }
            if self.marks || s.points.len() == 1 {
                for &(x, y) in &s.points {
                    let _ = writeln!(
                        out,
                        "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>",
                        sx(x),
                        sy(y),
                        s.color
                    );
                }
            }
            let ly = MT + 16.0 + 16.0 * si as f64;
            let _ = writeln!(
                out,
                "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" \
                 stroke-width=\"2\"/>",
                ML + 10.0,
                ML + 34.0,
                s.color
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
                ML + 40.0,
                ly + 4.0,
                xml_escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

pub fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
