//! Minimal standalone SVG renderer for empirical CDF step plots.

use std::fmt::Write;

use psrsim_core::Ecdf;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Linear,
    Log10,
}

#[derive(Debug, Clone)]
pub struct Series<'a> {
    pub label: String,
    pub cdf: &'a Ecdf,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct CdfPlot<'a> {
    pub title: String,
    pub x_label: String,
    pub x_axis: Axis,
    pub series: Vec<Series<'a>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl CdfPlot<'_> {
    fn x_range(&self) -> (f64, f64) {
        let values = self.series.iter().flat_map(|s| s.cdf.samples().iter().copied());
        let values: Vec<f64> = match self.x_axis {
            Axis::Log10 => values.filter(|&v| v > 0.0).collect(),
            Axis::Linear => values.collect(),
        };
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            return match self.x_axis {
                Axis::Log10 => (1.0, 10.0),
                Axis::Linear => (0.0, 1.0),
            };
        }
        match self.x_axis {
            Axis::Log10 => {
                (10f64.powf(lo.log10().floor()), 10f64.powf(hi.log10().ceil().max(lo.log10().floor() + 1.0)))
            }
            Axis::Linear if hi > lo => (lo.min(0.0), hi),
            Axis::Linear => (lo - 1.0, hi + 1.0),
        }
    }

    /// Renders the plot. Output depends only on the data.
    pub fn render(&self) -> String {
        let (x0, x1) = self.x_range();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let tx = |x: f64| -> f64 {
            let f = match self.x_axis {
                Axis::Log10 => (x.max(x0).log10() - x0.log10()) / (x1.log10() - x0.log10()),
                Axis::Linear => (x - x0) / (x1 - x0),
            };
            LEFT + f.clamp(0.0, 1.0) * pw
        };
        let ty = |y: f64| TOP + (1.0 - y) * ph;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        for i in 0..=10 {
            let y = i as f64 / 10.0;
            let _ = writeln!(
                svg,
                r##"<line x1="{LEFT}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="#ddd"/>"##,
                LEFT + pw,
                ty(y),
                ty(y)
            );
            let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{y:.1}</text>"#, LEFT - 6.0, ty(y) + 4.0);
        }
        for (x, label) in self.ticks(x0, x1) {
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" x2="{:.2}" y1="{TOP}" y2="{}" stroke="#ddd"/>"##,
                tx(x),
                tx(x),
                TOP + ph
            );
            let _ =
                writeln!(svg, r#"<text x="{:.2}" y="{}" text-anchor="middle">{label}</text>"#, tx(x), TOP + ph + 16.0);
        }
        let _ = writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">CDF</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut d = String::new();
            let mut prev_y = 0.0;
            for (k, (x, y)) in s.cdf.steps().into_iter().enumerate() {
                if k == 0 {
                    let _ = write!(d, "M{:.2},{:.2}", tx(x), ty(0.0));
                } else {
                    let _ = write!(d, " H{:.2}", tx(x));
                }
                let _ = write!(d, " V{:.2}", ty(y));
                prev_y = y;
            }
            if !d.is_empty() {
                let _ = write!(d, " H{:.2}", tx(x1));
                let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(svg, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#);
            }
            debug_assert!(prev_y <= 1.0);
            let ly = TOP + 16.0 + 16.0 * i as f64;
            let lx = LEFT + pw - 190.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                lx + 24.0
            );
            let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.label));
        }
        svg.push_str("</svg>\n");
        svg
    }

    fn ticks(&self, x0: f64, x1: f64) -> Vec<(f64, String)> {
        match self.x_axis {
            Axis::Log10 => {
                let (a, b) = (x0.log10().round() as i32, x1.log10().round() as i32);
                (a..=b).map(|e| (10f64.powi(e), format!("1e{e}"))).collect()
            }
            Axis::Linear => (0..=5).map(|i| x0 + (x1 - x0) * i as f64 / 5.0).map(|x| (x, format!("{x:.3}"))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic_and_complete() {
        let a = Ecdf::new(vec![100.0, 250.0, 1e4]);
        let b = Ecdf::new(vec![90.0, 90.0, 5e3]);
        let plot = CdfPlot {
            title: "delay <test>".into(),
            x_label: "delay (us)".into(),
            x_axis: Axis::Log10,
            series: vec![
                Series { label: "baseline".into(), cdf: &a, dashed: true },
                Series { label: "PSR".into(), cdf: &b, dashed: false },
            ],
        };
        let svg = plot.render();
        assert_eq!(svg, plot.render());
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.contains("delay &lt;test&gt;"));
        assert!(svg.contains(">1e1<") && svg.contains(">1e4<"));
    }

    #[test]
    fn empty_series_still_renders() {
        let e = Ecdf::new(Vec::new());
        let plot = CdfPlot {
            title: "t".into(),
            x_label: "x".into(),
            x_axis: Axis::Linear,
            series: vec![Series { label: "none".into(), cdf: &e, dashed: false }],
        };
        assert_eq!(plot.render().matches("<path").count(), 0);
    }
}
