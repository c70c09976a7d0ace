//! Minimal static SVG charts.

use std::fmt::Write;

const W: f64 = 760.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 4] = ["#1f77b4", "#aec7e8", "#d62728", "#ff9896"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly five round tick values covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

struct Frame {
    out: String,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(title: &str, metadata: &str, y0: f64, y1: f64, x0: f64, x1: f64) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, "<metadata>{}</metadata>", esc(metadata));
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            esc(title)
        );
        let y1 = if y1 > y0 { y1 } else { y0 + 1.0 };
        Self { out, x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }

    fn y_axis(&mut self, label: &str) {
        for t in nice_ticks(self.y0, self.y1) {
            let y = self.py(t);
            let _ = writeln!(
                self.out,
                "<line x1=\"{LEFT}\" x2=\"{:.1}\" y1=\"{y:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                W - RIGHT,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            self.out,
            r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            esc(label)
        );
        let _ = writeln!(
            self.out,
            "<line x1=\"{LEFT}\" x2=\"{LEFT}\" y1=\"{TOP}\" y2=\"{:.1}\" stroke=\"black\"/>\n<line x1=\"{LEFT}\" x2=\"{:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            H - BOTTOM,
            W - RIGHT,
            H - BOTTOM,
            H - BOTTOM
        );
    }

    fn x_label(&mut self, label: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 18.0,
            esc(label)
        );
    }

    fn x_tick(&mut self, x: f64, label: &str) {
        let px = self.px(x);
        let _ = writeln!(
            self.out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 16.0,
            esc(label)
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        for (i, (name, color)) in entries.iter().enumerate() {
            let x = LEFT + 10.0 + 170.0 * i as f64;
            let _ = writeln!(
                self.out,
                r#"<rect x="{x:.1}" y="30" width="12" height="10" fill="{color}"/><text x="{:.1}" y="39">{}</text>"#,
                x + 16.0,
                esc(name)
            );
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dash: bool) {
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{}/>"#,
            path.join(" "),
            if dash { r#" stroke-dasharray="6,4""# } else { "" }
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Grouped bars, one group per category.
pub fn grouped_bars(
    title: &str,
    metadata: &str,
    categories: &[String],
    series: &[(&str, &str, Vec<f64>)],
    y_label: &str,
    reference: Option<(f64, &str)>,
) -> String {
    let ymax = series
        .iter()
        .flat_map(|s| s.2.iter().copied())
        .chain(reference.map(|r| r.0))
        .fold(0.0, f64::max)
        * 1.1;
    let n = categories.len().max(1) as f64;
    let mut f = Frame::new(title, metadata, 0.0, ymax, 0.0, n);
    f.y_axis(y_label);
    let group_w = 1.0 / (series.len().max(1) as f64 + 1.0);
    for (ci, cat) in categories.iter().enumerate() {
        f.x_tick(ci as f64 + 0.5, cat);
        for (si, (_, color, vals)) in series.iter().enumerate() {
            let v = vals.get(ci).copied().unwrap_or(0.0).max(0.0);
            let x = f.px(ci as f64 + group_w * (si as f64 + 0.5));
            let w = f.px(group_w) - f.px(0.0);
            let (top, base) = (f.py(v), f.py(0.0));
            let _ = writeln!(
                f.out,
                r#"<rect x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}" fill="{color}"/>"#,
                base - top
            );
        }
    }
    if let Some((v, name)) = reference {
        f.polyline(&[(0.0, v), (n, v)], "black", true);
        let _ = writeln!(
            f.out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            W - RIGHT - 4.0,
            f.py(v) - 4.0,
            esc(name)
        );
    }
    f.x_label("hour of day");
    let legend: Vec<(&str, &str)> = series.iter().map(|s| (s.0, s.1)).collect();
    f.legend(&legend);
    f.finish()
}

/// Mean curve with a shaded interval over a log10 x axis.
pub fn band_chart(
    title: &str,
    metadata: &str,
    points: &[(f64, f64, f64, f64)],
    x_label: &str,
    y_label: &str,
) -> String {
    let lx: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let (x0, x1) = lx
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x0 + 1.0) };
    let ymax = points.iter().map(|p| p.3.max(p.1)).fold(0.0, f64::max) * 1.1;
    let mut f = Frame::new(title, metadata, 0.0, ymax, x0, x1);
    f.y_axis(y_label);
    let mut band: Vec<String> = points
        .iter()
        .zip(&lx)
        .map(|(p, &x)| format!("{:.2},{:.2}", f.px(x), f.py(p.3)))
        .collect();
    band.extend(
        points
            .iter()
            .zip(&lx)
            .rev()
            .map(|(p, &x)| format!("{:.2},{:.2}", f.px(x), f.py(p.2))),
    );
    let _ = writeln!(
        f.out,
        "<polygon points=\"{}\" fill=\"#bbbbbb\" fill-opacity=\"0.6\" stroke=\"none\"/>",
        band.join(" ")
    );
    let line: Vec<(f64, f64)> = points.iter().zip(&lx).map(|(p, &x)| (x, p.1)).collect();
    f.polyline(&line, PALETTE[0], false);
    for (p, &x) in points.iter().zip(&lx) {
        let _ = writeln!(
            f.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#,
            f.px(x),
            f.py(p.1),
            PALETTE[0]
        );
        f.x_tick(x, &format!("{}", p.0));
    }
    f.x_label(x_label);
    f.legend(&[("mean over runs", PALETTE[0]), ("95% CI", "#bbbbbb")]);
    f.finish()
}

/// Empirical step CDF against a fitted CDF curve.
pub fn cdf_overlay(
    title: &str,
    metadata: &str,
    samples: &[f64],
    fitted: impl Fn(f64) -> f64,
    x_label: &str,
) -> String {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let xmax = s.last().copied().unwrap_or(1.0).max(1e-9) * 1.1;
    let mut f = Frame::new(title, metadata, 0.0, 1.0, 0.0, xmax);
    f.y_axis("cumulative probability");
    for t in nice_ticks(0.0, xmax) {
        f.x_tick(t, &fmt_tick(t));
    }
    let n = s.len() as f64;
    let mut steps = vec![(0.0, 0.0)];
    for (i, &x) in s.iter().enumerate() {
        steps.push((x, i as f64 / n));
        steps.push((x, (i + 1) as f64 / n));
    }
    steps.push((xmax, 1.0));
    f.polyline(&steps, PALETTE[2], false);
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let x = xmax * i as f64 / 200.0;
            (x, fitted(x))
        })
        .collect();
    f.polyline(&curve, PALETTE[0], true);
    f.x_label(x_label);
    f.legend(&[("empirical", PALETTE[2]), ("fitted Weibull", PALETTE[0])]);
    f.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_in_range() {
        let t = nice_ticks(0.0, 347.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!(t.iter().all(|&v| (0.0..=347.0).contains(&v)));
        assert!((3..=7).contains(&t.len()));
    }

    #[test]
    fn charts_are_well_formed() {
        let cats: Vec<String> = (0..3).map(|h| h.to_string()).collect();
        let s = grouped_bars("t", "{}", &cats, &[("a", PALETTE[0], vec![1.0, 2.0, 0.0])], "kW", Some((0.1, "eps")));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect x=").count(), 3 + 1);
        let b = band_chart("t", "m<&>", &[(0.1, 5.0, 4.0, 6.0), (0.01, 3.0, 2.0, 4.0)], "alpha", "kW");
        assert!(b.contains("<polygon") && b.contains("m&lt;&amp;&gt;"));
        let c = cdf_overlay("t", "", &[1.0, 2.0], |x| 1.0 - (-x).exp(), "x");
        assert_eq!(c.matches("<polyline").count(), 2);
    }
}
