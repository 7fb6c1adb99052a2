//! Standalone SVG charts: D / Q control charts and oMEDA bar charts.
//!
//! Output depends only on the inputs; coordinates are printed with a fixed
//! number of decimals.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn plot_w() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_h() -> f64 {
    HEIGHT - TOP - BOTTOM
}

/// Control chart of one statistic over time.
#[derive(Debug, Clone)]
pub struct ControlChart<'a> {
    pub title: &'a str,
    pub y_label: &'a str,
    /// (time in h, value).
    pub series: &'a [(f64, f64)],
    pub limit_95: f64,
    pub limit_99: f64,
    pub onset_h: Option<f64>,
    pub log_scale: bool,
}

impl ControlChart<'_> {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, self.title);

        let t_min = self.series.first().map_or(0.0, |p| p.0);
        let t_max = self.series.last().map_or(1.0, |p| p.0).max(t_min + 1e-9);
        let floor = 1e-6;
        let tf = |v: f64| if self.log_scale { v.max(floor).log10() } else { v };
        let values = self.series.iter().map(|p| p.1).chain([self.limit_95, self.limit_99]);
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let v = tf(v);
            (lo.min(v), hi.max(v))
        });
        if !self.log_scale {
            lo = lo.min(0.0);
        }
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            hi = lo + 1.0;
        }
        let x = |t: f64| LEFT + (t - t_min) / (t_max - t_min) * plot_w();
        let y = |v: f64| TOP + (1.0 - (tf(v) - lo) / (hi - lo)) * plot_h();

        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            plot_w(),
            plot_h()
        );

        // min/max per pixel column keeps long series small
        let columns = plot_w() as usize;
        let mut buckets: Vec<Option<(f64, f64)>> = vec![None; columns + 1];
        for &(t, v) in self.series {
            let c = (((t - t_min) / (t_max - t_min)) * columns as f64).round() as usize;
            let b = &mut buckets[c.min(columns)];
            *b = Some(b.map_or((v, v), |(a, z)| (a.min(v), z.max(v))));
        }
        let mut path = String::new();
        for (c, b) in buckets.iter().enumerate() {
            if let Some((a, z)) = b {
                let px = LEFT + c as f64;
                let cmd = if path.is_empty() { 'M' } else { 'L' };
                let _ = write!(path, "{cmd}{px:.2},{:.2} L{px:.2},{:.2} ", y(*a), y(*z));
            }
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="1"/>"#,
            path.trim_end()
        );

        for (limit, label) in [(self.limit_95, "95%"), (self.limit_99, "99%")] {
            let ly = y(limit);
            let _ = writeln!(
                out,
                r#"<line x1="{LEFT}" y1="{ly:.2}" x2="{:.1}" y2="{ly:.2}" stroke="firebrick" stroke-dasharray="6,4"/>"#,
                LEFT + plot_w()
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.2}" text-anchor="end" fill="firebrick">{label}</text>"#,
                LEFT + plot_w() - 4.0,
                ly - 4.0
            );
        }
        if let Some(on) = self.onset_h.filter(|&t| t >= t_min && t <= t_max) {
            let ox = x(on);
            let _ = writeln!(
                out,
                r#"<line x1="{ox:.2}" y1="{TOP}" x2="{ox:.2}" y2="{:.1}" stroke="gray" stroke-dasharray="2,3"/>"#,
                TOP + plot_h()
            );
        }

        for i in 0..=4 {
            let t = t_min + (t_max - t_min) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{t:.1}</text>"#,
                x(t),
                TOP + plot_h() + 16.0
            );
        }
        for i in 0..=4 {
            let tv = lo + (hi - lo) * i as f64 / 4.0;
            let shown = if self.log_scale { 10f64.powf(tv) } else { tv };
            let py = TOP + (1.0 - i as f64 / 4.0) * plot_h();
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                py + 4.0,
                format_tick(shown)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (h)</text>"#,
            LEFT + plot_w() / 2.0,
            HEIGHT - 14.0
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + plot_h() / 2.0,
            TOP + plot_h() / 2.0,
            escape(self.y_label)
        );
        out.push_str("</svg>\n");
        out
    }
}

fn format_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Signed bar chart, one bar per variable in the given order.
pub fn bar_chart(title: &str, names: &[String], values: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let zero_y = TOP + plot_h() / 2.0;
    let half = plot_h() / 2.0;
    let n = names.len().max(1) as f64;
    let slot = plot_w() / n;
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{zero_y:.2}" x2="{:.1}" y2="{zero_y:.2}" stroke="black"/>"#,
        LEFT + plot_w()
    );
    for (i, (name, &v)) in names.iter().zip(values).enumerate() {
        let h = v.abs() / max * half;
        let bx = LEFT + slot * i as f64 + slot * 0.15;
        let by = if v >= 0.0 { zero_y - h } else { zero_y };
        let fill = if v >= 0.0 { "steelblue" } else { "indianred" };
        let _ = writeln!(
            out,
            r#"<rect x="{bx:.2}" y="{by:.2}" width="{:.2}" height="{h:.2}" fill="{fill}"/>"#,
            slot * 0.7
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + slot * (i as f64 + 0.5),
            TOP + plot_h() + 16.0,
            escape(name)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
        LEFT - 6.0,
        TOP + 4.0,
        format_tick(max)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
        LEFT - 6.0,
        TOP + plot_h() + 4.0,
        format_tick(-max)
    );
    out.push_str("</svg>\n");
    out
}
