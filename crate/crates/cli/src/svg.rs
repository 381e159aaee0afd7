//! Deterministic SVG rendering of Corbit and Wagner layouts.
//!
//! Rings count stages from the inside, lag labels sit outside the last ring
//! with lag 1 at three o'clock, and colour follows the viridis scale over
//! `[-1, 1]`. Every data point is a `<circle class="point ...">`.

use std::fmt::Write;

use gnar::correlogram::{CorbitLayout, CorrelogramKind, LayoutPoint, WagnerLayout, SIZE_MAX, SIZE_MIN};

const WIDTH: f64 = 680.0;
const HEIGHT: f64 = 560.0;
const CX: f64 = 270.0;
const CY: f64 = 280.0;
const PLOT_RADIUS: f64 = 230.0;
const LEGEND_X: f64 = 545.0;
/// Pixels per unit of layout size.
const SIZE_SCALE: f64 = 1.6;

fn viridis(t: f64) -> String {
    let c = colorous::VIRIDIS.eval_continuous(t.clamp(0.0, 1.0));
    format!("#{c:x}")
}

fn slice_colour(c: usize) -> String {
    let palette = colorous::CATEGORY10;
    format!("#{:x}", palette[c % palette.len()])
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn title(kind: CorrelogramKind) -> &'static str {
    match kind {
        CorrelogramKind::Nacf => "NACF",
        CorrelogramKind::Pnacf => "PNACF",
    }
}

struct Frame {
    unit: f64,
}

impl Frame {
    fn new(max_r: usize) -> Self {
        Self { unit: PLOT_RADIUS / (max_r as f64 + 1.0) }
    }

    fn position(&self, ring: f64, angle: f64) -> (f64, f64) {
        let radius = ring * self.unit;
        (CX + radius * angle.cos(), CY - radius * angle.sin())
    }
}

fn header(out: &mut String, heading: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();
    writeln!(out, r#"<text x="{CX}" y="24" text-anchor="middle" font-size="16">{}</text>"#, escape(heading)).unwrap();
}

fn rings_and_lags(out: &mut String, frame: &Frame, max_h: usize, max_r: usize) {
    for r in 1..=max_r {
        writeln!(
            out,
            r##"<circle class="ring" cx="{CX}" cy="{CY}" r="{:.3}" fill="none" stroke="#d0d0d0"/>"##,
            r as f64 * frame.unit
        )
        .unwrap();
    }
    for h in 1..=max_h {
        let angle = 2.0 * std::f64::consts::PI * (h - 1) as f64 / max_h as f64;
        let (x, y) = frame.position(max_r as f64 + 0.6, angle);
        writeln!(
            out,
            r#"<text class="lag" x="{x:.3}" y="{:.3}" text-anchor="middle">{h}</text>"#,
            y + 4.0
        )
        .unwrap();
    }
}

fn point(out: &mut String, class: &str, x: f64, y: f64, p: &LayoutPoint, stroke: Option<&str>) {
    let stroke = stroke.map_or(String::new(), |s| format!(r#" stroke="{s}" stroke-width="1.5""#));
    writeln!(
        out,
        r#"<circle class="point {class}" data-h="{}" data-r="{}" data-value="{:.6}" cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="{}"{stroke}/>"#,
        p.h,
        p.r,
        p.value,
        p.size * SIZE_SCALE,
        viridis(p.color)
    )
    .unwrap();
}

fn legends(out: &mut String, kind: CorrelogramKind) {
    let label = title(kind);
    writeln!(out, r#"<text x="{LEGEND_X}" y="60">{label}</text>"#).unwrap();
    let steps = 20;
    let (top, height) = (70.0, 160.0);
    for k in 0..steps {
        // Top of the bar is +1.
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        writeln!(
            out,
            r#"<rect class="legend-swatch" x="{LEGEND_X}" y="{:.3}" width="16" height="{:.3}" fill="{}"/>"#,
            top + k as f64 * height / steps as f64,
            height / steps as f64 + 0.5,
            viridis(t)
        )
        .unwrap();
    }
    for (value, y) in [("1", top), ("0", top + height / 2.0), ("-1", top + height)] {
        writeln!(out, r#"<text x="{:.3}" y="{:.3}">{value}</text>"#, LEGEND_X + 22.0, y + 4.0).unwrap();
    }
    writeln!(out, r#"<text x="{LEGEND_X}" y="265">|{label}|</text>"#).unwrap();
    for (k, value) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let size = SIZE_MIN + value * (SIZE_MAX - SIZE_MIN);
        let y = 285.0 + 24.0 * k as f64;
        writeln!(
            out,
            r##"<circle class="legend-size" cx="{:.3}" cy="{y:.3}" r="{:.3}" fill="#808080"/>"##,
            LEGEND_X + 8.0,
            size * SIZE_SCALE
        )
        .unwrap();
        writeln!(out, r#"<text x="{:.3}" y="{:.3}">{value}</text>"#, LEGEND_X + 26.0, y + 4.0).unwrap();
    }
}

pub fn render_corbit(layout: &CorbitLayout) -> String {
    let mut out = String::new();
    header(&mut out, &format!("{} Corbit plot", title(layout.kind)));
    let frame = Frame::new(layout.max_r);
    rings_and_lags(&mut out, &frame, layout.max_h, layout.max_r);
    point(&mut out, "center", CX, CY, &layout.center, None);
    for p in &layout.points {
        let (x, y) = frame.position(p.ring as f64, p.angle);
        point(&mut out, "cell", x, y, p, None);
    }
    legends(&mut out, layout.kind);
    out.push_str("</svg>\n");
    out
}

/// Each `(h, r)` cell shows its slice mean in the middle and one outlined
/// sub-point per slice on a small circle around it.
pub fn render_wagner(layout: &WagnerLayout) -> String {
    let mut out = String::new();
    header(&mut out, &format!("{} Wagner plot", title(layout.kind)));
    let frame = Frame::new(layout.max_r);
    rings_and_lags(&mut out, &frame, layout.max_h, layout.max_r);
    let c_count = layout.slices.len().max(1);
    let offset = (frame.unit * 0.3).min(14.0);
    for mean in &layout.center {
        let (x, y) = frame.position(mean.ring as f64, mean.angle);
        point(&mut out, "mean", x, y, mean, None);
    }
    for p in &layout.points {
        let (x0, y0) = frame.position(p.ring as f64, p.angle);
        let theta = 2.0 * std::f64::consts::PI * p.slice as f64 / c_count as f64;
        let (x, y) = (x0 + offset * theta.cos(), y0 - offset * theta.sin());
        let as_point = LayoutPoint {
            h: p.h,
            r: p.r,
            ring: p.ring,
            angle: p.angle,
            value: p.value,
            color: p.color,
            size: p.size * 0.6,
        };
        point(&mut out, "slice", x, y, &as_point, Some(&slice_colour(p.slice)));
    }
    legends(&mut out, layout.kind);
    writeln!(out, r#"<text x="{LEGEND_X}" y="370">Slices</text>"#).unwrap();
    for (c, label) in layout.slices.iter().enumerate() {
        let y = 390.0 + 18.0 * c as f64;
        writeln!(
            out,
            r#"<circle class="legend-slice" cx="{:.3}" cy="{y:.3}" r="5" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            LEGEND_X + 6.0,
            slice_colour(c)
        )
        .unwrap();
        writeln!(out, r#"<text x="{:.3}" y="{:.3}">{}</text>"#, LEGEND_X + 18.0, y + 4.0, escape(label)).unwrap();
    }
    writeln!(
        out,
        r#"<text x="{LEGEND_X}" y="{:.3}">centre: mean</text>"#,
        398.0 + 18.0 * layout.slices.len() as f64
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

/// Number of data points drawn in an SVG produced by this module.
pub fn count_points(svg: &str) -> usize {
    svg.matches(r#"class="point "#).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gnar::correlogram::{corbit_layout, grid, time_slices, wagner_layout, NacfGrid};
    use gnar::graph::{Network, NetworkStructure};
    use gnar::model::NetworkTimeSeries;
    use nalgebra::DMatrix;

    fn zero_grid(max_h: usize, max_r: usize) -> NacfGrid {
        NacfGrid {
            kind: CorrelogramKind::Nacf,
            max_h,
            max_r,
            values: vec![vec![0.0; max_r]; max_h],
            null_band: 0.1,
        }
    }

    fn wavy(net: &Network, t: usize) -> NetworkTimeSeries {
        NetworkTimeSeries::new(
            DMatrix::from_fn(t, net.d(), |t, i| ((t as f64) * 0.41 + i as f64).sin() + 0.05 * ((t * (i + 1)) % 7) as f64),
            net,
        )
        .unwrap()
    }

    #[test]
    fn zero_grid_draws_minimum_sizes() {
        let layout = corbit_layout(&zero_grid(5, 3));
        let svg = render_corbit(&layout);
        let expected = format!(r#"r="{:.3}""#, SIZE_MIN * SIZE_SCALE);
        for line in svg.lines().filter(|l| l.contains(r#"class="point "#)) {
            assert!(line.contains(&expected), "{line}");
        }
    }

    #[test]
    fn corbit_point_count_matches_layout() {
        let net = Network::path(5);
        let structure = NetworkStructure::new(&net);
        let g = grid(&wavy(&net, 60), &structure, 7, 3, CorrelogramKind::Nacf).unwrap();
        let layout = corbit_layout(&g);
        let svg = render_corbit(&layout);
        assert_eq!(count_points(&svg), layout.point_count());
        assert_eq!(svg.matches(r#"class="lag""#).count(), 7);
        assert_eq!(svg.matches(r#"class="ring""#).count(), 3);
    }

    #[test]
    fn rendering_is_deterministic() {
        let layout = corbit_layout(&zero_grid(4, 2));
        assert_eq!(render_corbit(&layout), render_corbit(&layout));
    }

    #[test]
    fn lag_one_sits_right_of_centre() {
        let layout = corbit_layout(&zero_grid(4, 1));
        let svg = render_corbit(&layout);
        let line = svg.lines().find(|l| l.contains(r#"data-h="1" data-r="1""#)).unwrap();
        let frame = Frame::new(1);
        assert!(line.contains(&format!(r#"cx="{:.3}" cy="{:.3}""#, CX + frame.unit, CY)));
    }

    #[test]
    fn wagner_point_count_and_legend() {
        let net = Network::cycle(6);
        let structure = NetworkStructure::new(&net);
        let series = wavy(&net, 90);
        let slices = time_slices(
            &series,
            &[("first <wave>".to_string(), 0..30), ("gap".to_string(), 30..60), ("second".to_string(), 60..90)],
        )
        .unwrap();
        let layout = wagner_layout(&slices, &structure, 4, 2, CorrelogramKind::Nacf).unwrap();
        let svg = render_wagner(&layout);
        assert_eq!(count_points(&svg), layout.point_count());
        assert_eq!(count_points(&svg), 4 * 2 * 4);
        assert_eq!(svg.matches(r#"class="legend-slice""#).count(), 3);
        assert!(svg.contains("first &lt;wave&gt;"));
    }

    #[test]
    fn viridis_endpoints() {
        assert_eq!(viridis(0.0), "#440154");
        assert_eq!(viridis(1.0), "#fde725");
    }
}
