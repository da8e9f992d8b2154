//! Standalone SVG line charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    /// `(iteration, value)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Optional half-width of a shaded band around each point.
    pub band: Option<Vec<f64>>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Iteration window drawn again, magnified, in a corner panel.
    pub inset: Option<(usize, usize)>,
}

#[derive(Clone, Copy)]
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h
    }
}

fn extent<'a>(values: impl Iterator<Item = &'a f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = lo.abs().max(1.0) * 1e-3;
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn nice_step(range: f64, target: usize) -> f64 {
    let raw = range / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let step = nice_step(hi - lo, target);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn window(series: &[Series], range: Option<(f64, f64)>) -> Option<Frame> {
    let inside = |x: f64| range.is_none_or(|(a, b)| x >= a && x <= b);
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .filter(|x| inside(*x))
        .collect();
    let mut ys = Vec::new();
    for s in series {
        for (i, p) in s.points.iter().enumerate() {
            if !inside(p.0) {
                continue;
            }
            let half = s.band.as_ref().and_then(|b| b.get(i)).copied().unwrap_or(0.0);
            ys.push(p.1 - half);
            ys.push(p.1 + half);
        }
    }
    let (xmin, xmax) = match range {
        Some((a, b)) => (a, b),
        None => extent(xs.iter())?,
    };
    let (ymin, ymax) = extent(ys.iter())?;
    let pad = (ymax - ymin) * 0.05;
    Some(Frame {
        x0: 0.0,
        y0: 0.0,
        w: 0.0,
        h: 0.0,
        xmin,
        xmax,
        ymin: ymin - pad,
        ymax: ymax + pad,
    })
}

fn draw_series(out: &mut String, f: &Frame, series: &[Series], clip: &str, width: f64) {
    for s in series {
        if let Some(band) = &s.band {
            let upper = s.points.iter().zip(band).map(|(p, b)| (p.0, p.1 + b));
            let lower = s.points.iter().zip(band).rev().map(|(p, b)| (p.0, p.1 - b));
            let pts: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polygon clip-path="url(#{clip})" points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" "),
                s.color
            );
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline clip-path="url(#{clip})" points="{}" fill="none" stroke="{}" stroke-width="{width}"/>"#,
            pts.join(" "),
            s.color
        );
    }
}

fn draw_axes(out: &mut String, f: &Frame, font: f64, target: usize) {
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="white" stroke="black"/>"#,
        f.x0, f.y0, f.w, f.h
    );
    for t in ticks(f.xmin, f.xmax, target) {
        let x = f.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="{font}" text-anchor="middle">{}</text>"#,
            f.y0 + f.h,
            f.y0 + f.h + 4.0,
            f.y0 + f.h + 4.0 + font,
            label(t)
        );
    }
    for t in ticks(f.ymin, f.ymax, target) {
        let y = f.py(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="{font}" text-anchor="end">{}</text>"#,
            f.x0 - 4.0,
            f.x0,
            f.x0 - 6.0,
            y + font / 3.0,
            label(t)
        );
    }
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        let Some(mut main) = window(&self.series, None) else {
            out.push_str("</svg>\n");
            return out;
        };
        main.x0 = MARGIN_LEFT;
        main.y0 = MARGIN_TOP;
        main.w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        main.h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

        let _ = writeln!(
            out,
            r#"<defs><clipPath id="main"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath>"#,
            main.x0, main.y0, main.w, main.h
        );
        let inset_frame = self.inset.and_then(|(a, b)| {
            let mut f = window(&self.series, Some((a as f64, b as f64)))?;
            f.w = main.w * 0.4;
            f.h = main.h * 0.35;
            f.x0 = main.x0 + main.w - f.w - 10.0;
            f.y0 = main.y0 + 10.0;
            Some(f)
        });
        if let Some(f) = &inset_frame {
            let _ = write!(
                out,
                r#"<clipPath id="inset"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath>"#,
                f.x0, f.y0, f.w, f.h
            );
        }
        out.push_str("</defs>\n");

        draw_axes(&mut out, &main, 11.0, 6);
        draw_series(&mut out, &main, &self.series, "main", 1.5);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
            main.x0 + main.w / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            main.y0 + main.h / 2.0,
            main.y0 + main.h / 2.0,
            escape(&self.y_label)
        );

        if let Some(f) = &inset_frame {
            draw_axes(&mut out, f, 9.0, 3);
            draw_series(&mut out, f, &self.series, "inset", 1.0);
        }

        let legend_y = if inset_frame.is_some() {
            main.y0 + main.h * 0.45
        } else {
            main.y0 + 20.0
        };
        for (i, s) in self.series.iter().enumerate() {
            let y = legend_y + 18.0 * i as f64;
            let x = main.x0 + main.w - 180.0;
            let _ = writeln!(
                out,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
                x + 24.0,
                s.color,
                x + 30.0,
                y + 4.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
