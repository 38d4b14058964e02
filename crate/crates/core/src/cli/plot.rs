//! Hand-written SVG line charts of actual vs predicted values, with a CSV
//! twin holding exactly the plotted numbers.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evalkit::ForecastSet;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 45.0;
const BOTTOM: f64 = 60.0;
const ACTUAL_COLOR: &str = "#1f77b4";
const PREDICTED_COLOR: &str = "#d62728";

pub struct PlotFiles {
    pub svg: String,
    pub csv: String,
}

/// One forecast drawn on the chart: its origin and (test position, value) points.
struct Fan {
    origin: usize,
    points: Vec<(usize, f64)>,
}

fn actual_at(set: &ForecastSet, p: usize) -> f64 {
    let n = set.len();
    if p < n {
        set.actual[p][0]
    } else {
        set.actual[n - 1][p - (n - 1)]
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Chart the first `points` test positions of `set`. Forecasts are drawn
/// from every `stride`-th origin; with `f = 1` they join into one line.
pub fn plot_forecasts(set: &ForecastSet, title: &str, points: usize, stride: usize) -> Result<PlotFiles> {
    if set.is_empty() || points == 0 || stride == 0 {
        return Err(Error::Argument("plot needs forecasts, points >= 1 and stride >= 1".into()));
    }
    let f = set.horizon;
    let span = set.len() + f - 1;
    let limit = points.min(span);
    let actual: Vec<f64> = (0..limit).map(|p| actual_at(set, p)).collect();

    let fans: Vec<Fan> = if f == 1 {
        vec![Fan { origin: 0, points: (0..limit.min(set.len())).map(|j| (j, set.predicted[j][0])).collect() }]
    } else {
        (0..limit.min(set.len()))
            .step_by(stride)
            .map(|j| Fan {
                origin: j,
                points: (0..f).map(|k| (j + k, set.predicted[j][k])).filter(|&(p, _)| p < limit).collect(),
            })
            .collect()
    };

    let mut csv = String::from("t,actual,origin,predicted\n");
    for (t, a) in actual.iter().enumerate() {
        let mut covered = false;
        for fan in &fans {
            if let Some(&(_, v)) = fan.points.iter().find(|&&(p, _)| p == t) {
                let origin = if f == 1 { t } else { fan.origin };
                let _ = writeln!(csv, "{t},{a},{origin},{v}");
                covered = true;
            }
        }
        if !covered {
            let _ = writeln!(csv, "{t},{a},,");
        }
    }

    let all = actual.iter().copied().chain(fans.iter().flat_map(|fan| fan.points.iter().map(|&(_, v)| v)));
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |p: usize| LEFT + plot_w * p as f64 / (limit.max(2) - 1) as f64;
    let y_of = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);
    let polyline = |pts: &mut dyn Iterator<Item = (usize, f64)>, color: &str| {
        let coords: Vec<String> = pts.map(|(p, v)| format!("{:.2},{:.2}", x_of(p), y_of(v))).collect();
        format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(svg, "  <text x=\"{}\" y=\"25\" text-anchor=\"middle\" font-size=\"15\">{}</text>", WIDTH / 2.0, escape(title));

    // axes
    let (x0, y0, x1) = (LEFT, TOP + plot_h, LEFT + plot_w);
    let _ = writeln!(svg, "  <line x1=\"{x0}\" y1=\"{TOP}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>");
    let _ = writeln!(svg, "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>");
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(svg, "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0}\" y2=\"{y:.2}\" stroke=\"black\"/>", x0 - 5.0);
        let _ = writeln!(svg, "  <line x1=\"{x0}\" y1=\"{y:.2}\" x2=\"{x1}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>");
        let _ = writeln!(svg, "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>", x0 - 8.0, y + 4.0);
    }
    let tick_step = (limit / 10).max(1);
    for p in (0..limit).step_by(tick_step) {
        let x = x_of(p);
        let _ = writeln!(svg, "  <line x1=\"{x:.2}\" y1=\"{y0}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>", y0 + 5.0);
        let _ = writeln!(svg, "  <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{p}</text>", y0 + 18.0);
    }
    let _ = writeln!(svg, "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">test step</text>", LEFT + plot_w / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        svg,
        "  <text x=\"20\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">value</text>",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    svg.push_str(&polyline(&mut actual.iter().copied().enumerate(), ACTUAL_COLOR));
    for fan in &fans {
        svg.push_str(&polyline(&mut fan.points.iter().copied(), PREDICTED_COLOR));
    }

    // legend
    let lx = x1 - 150.0;
    for (i, (label, color)) in [("actual", ACTUAL_COLOR), ("predicted", PREDICTED_COLOR)].iter().enumerate() {
        let y = TOP + 12.0 + 18.0 * i as f64;
        let _ = writeln!(svg, "  <line x1=\"{lx}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"/>", lx + 25.0);
        let _ = writeln!(svg, "  <text x=\"{}\" y=\"{}\">{label}</text>", lx + 32.0, y + 4.0);
    }
    svg.push_str("</svg>\n");
    Ok(PlotFiles { svg, csv })
}
