//! Minimal SVG rendering of a trajectory over the objective graph.
//!
//! The plot shows the function curve over a fixed window, the visited
//! `(x, F(x))` points joined in iteration order, and start/end markers
//! (pink start, blue end). Pure string assembly; no raster dependencies.

use sgdlab_core::engine::TrajectoryRecord;
use sgdlab_core::objective::ObjectiveSpec;

use crate::config::ExperimentConfig;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 460.0;
const MARGIN: f64 = 45.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn polyline(points: &[(f64, f64)], frame: &Frame, style: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
        .collect();
    format!("<polyline fill=\"none\" {style} points=\"{}\"/>\n", coords.join(" "))
}

/// Renders the run to a standalone SVG document.
pub fn render_trajectory_svg(
    rec: &TrajectoryRecord,
    f: &ObjectiveSpec,
    config: &ExperimentConfig,
) -> String {
    let x_lo = -2.0;
    let x_hi = 20.0;

    // the function curve over the plot window
    let n_curve = 1200;
    let mut curve = Vec::with_capacity(n_curve + 1);
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for i in 0..=n_curve {
        let x = x_lo + (x_hi - x_lo) * i as f64 / n_curve as f64;
        let y = f.evaluate1(x).unwrap_or(f64::NAN);
        if y.is_finite() {
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        curve.push((x, y));
    }
    // focus on the landscape's interesting band rather than the distant
    // quadratic walls
    let y_hi = y_hi.min(6.0);
    let y_lo = y_lo - 0.3;
    let frame = Frame { x_lo, x_hi, y_lo, y_hi: y_hi + 0.3 };

    let path: Vec<(f64, f64)> = rec
        .samples
        .iter()
        .map(|s| (s.x[0], s.f))
        .filter(|(x, _)| (x_lo..=x_hi).contains(x))
        .collect();

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    let meta = serde_json::json!({
        "config": config,
        "seed": rec.seed,
        "final_k": rec.final_k,
    });
    svg.push_str(&format!("<!-- {meta} -->\n"));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // axes
    let axis_style = "stroke=\"#888\" stroke-width=\"1\"";
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" {axis_style}/>\n",
        m = MARGIN,
        b = frame.py(0.0).min(HEIGHT - MARGIN),
        r = WIDTH - MARGIN
    ));
    for tick in [-1.0, 0.0, 1.0, 2.0, 5.0] {
        if tick >= frame.y_lo && tick <= frame.y_hi {
            svg.push_str(&format!(
                "<text x=\"6\" y=\"{:.2}\" font-size=\"11\" fill=\"#555\">{tick}</text>\n",
                frame.py(tick) + 4.0
            ));
        }
    }
    for tick in [0.0, 5.0, 10.0, 15.0, 20.0] {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#555\">{tick}</text>\n",
            frame.px(tick) - 6.0,
            HEIGHT - MARGIN + 16.0
        ));
    }

    svg.push_str(&polyline(&curve, &frame, "stroke=\"#333\" stroke-width=\"1.6\""));
    svg.push_str(&polyline(
        &path,
        &frame,
        "stroke=\"#2a9d8f\" stroke-width=\"1.0\" stroke-opacity=\"0.75\"",
    ));

    if let Some(first) = path.first() {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"#ff4fa3\"/>\n",
            frame.px(first.0),
            frame.py(first.1)
        ));
    }
    if let Some(last) = path.last() {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"#2457d6\"/>\n",
            frame.px(last.0),
            frame.py(last.1)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"12\" fill=\"#333\">seed {} | {} iterations | final x = {:.6}</text>\n",
        MARGIN, rec.seed, rec.final_k, rec.final_x[0]
    ));
    svg.push_str("</svg>\n");
    svg
}
