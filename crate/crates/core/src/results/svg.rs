//! Minimal deterministic SVG 1.1 writer.

use std::fmt::Write;

pub(crate) struct Svg {
    width: f64,
    height: f64,
    body: String,
}

/// Fixed-precision coordinates keep output byte-stable.
fn n(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub(crate) const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" fill-opacity="{}"/>"#,
            n(x),
            n(y),
            n(w.max(0.0)),
            n(h.max(0.0)),
            n(opacity)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dashed: bool) {
        let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="1"{dash}/>"#,
            n(x1),
            n(y1),
            n(x2),
            n(y2)
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", n(*x), n(*y))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{}" cy="{}" r="{}" fill="{fill}"/>"#, n(x), n(y), n(r));
    }

    /// Five-pointed star centred on `(x, y)`.
    pub fn star(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let pts: Vec<String> = (0..10)
            .map(|i| {
                let radius = if i % 2 == 0 { r } else { r * 0.45 };
                let a = std::f64::consts::PI * (i as f64 / 5.0 - 0.5);
                format!("{},{}", n(x + radius * a.cos()), n(y + radius * a.sin()))
            })
            .collect();
        let _ = writeln!(self.body, r#"<polygon points="{}" fill="{fill}"/>"#, pts.join(" "));
    }

    /// Downward-pointing triangle with its tip at `(x, y)`.
    pub fn triangle_down(&mut self, x: f64, y: f64, size: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<polygon points="{},{} {},{} {},{}" fill="{fill}"/>"#,
            n(x - size),
            n(y - size * 1.6),
            n(x + size),
            n(y - size * 1.6),
            n(x),
            n(y)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{}" text-anchor="{anchor}">{}</text>"#,
            n(x),
            n(y),
            n(size),
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            n(self.width),
            n(self.height),
            n(self.width),
            n(self.height),
            self.body
        )
    }
}

/// Affine map from a data interval onto a pixel interval.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Scale {
    pub d0: f64,
    pub d1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl Scale {
    pub fn new(d0: f64, d1: f64, p0: f64, p1: f64) -> Self {
        let d1 = if d1 > d0 { d1 } else { d0 + 1.0 };
        Scale { d0, d1, p0, p1 }
    }

    pub fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }
}

/// A rectangular plotting area with a title and axes.
pub(crate) struct Panel {
    pub x: Scale,
    pub y: Scale,
}

impl Panel {
    #[allow(clippy::too_many_arguments)]
    pub fn draw(
        svg: &mut Svg,
        left: f64,
        top: f64,
        width: f64,
        height: f64,
        x_range: (f64, f64),
        y_range: (f64, f64),
        title: &str,
        x_label: &str,
        y_label: &str,
    ) -> Panel {
        let x = Scale::new(x_range.0, x_range.1, left, left + width);
        let y = Scale::new(y_range.0, y_range.1, top + height, top);
        svg.line(left, top + height, left + width, top + height, "black", false);
        svg.line(left, top, left, top + height, "black", false);
        svg.text(left + width / 2.0, top - 8.0, 13.0, "middle", title);
        svg.text(left + width / 2.0, top + height + 32.0, 11.0, "middle", x_label);
        svg.text(left - 40.0, top + height / 2.0, 11.0, "middle", y_label);
        for i in 0..=4 {
            let v = y.d0 + (y.d1 - y.d0) * i as f64 / 4.0;
            let py = y.map(v);
            svg.line(left - 4.0, py, left, py, "black", false);
            svg.text(left - 6.0, py + 4.0, 9.0, "end", &format!("{v:.2}"));
        }
        Panel { x, y }
    }

    pub fn x_ticks(&self, svg: &mut Svg, ticks: &[(f64, String)]) {
        let base = self.y.p0;
        for (v, label) in ticks {
            let px = self.x.map(*v);
            svg.line(px, base, px, base + 4.0, "black", false);
            svg.text(px, base + 15.0, 9.0, "middle", label);
        }
    }
}
