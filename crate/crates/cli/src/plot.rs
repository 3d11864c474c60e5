//! Minimal SVG line charts for trajectory columns: one chart per requested
//! column, one polyline per input CSV, optional log-scale y.

use crate::CliError;

pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

pub struct Chart {
    pub column: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 840.0;
const CHART_HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() {
            "0".to_string()
        } else {
            s
        }
    }
}

/// Renders stacked charts into one SVG document.
pub fn render(charts: &[Chart], log_y: bool) -> Result<String, CliError> {
    if charts.is_empty() {
        return Err(CliError::usage("nothing to plot".to_string()));
    }
    let total_height = CHART_HEIGHT * charts.len() as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{total_height}\" \
         viewBox=\"0 0 {WIDTH} {total_height}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{total_height}\" fill=\"white\"/>\n"
    ));
    for (ci, chart) in charts.iter().enumerate() {
        render_chart(&mut svg, chart, ci as f64 * CHART_HEIGHT, log_y)?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn render_chart(svg: &mut String, chart: &Chart, y_off: f64, log_y: bool) -> Result<(), CliError> {
    // Collect plottable points, dropping non-finite values and (when the axis
    // is logarithmic) non-positive ones.
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    let mut cleaned: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for (si, s) in chart.series.iter().enumerate() {
        let mut pts = Vec::new();
        for (&x, &y) in s.xs.iter().zip(&s.ys) {
            if !x.is_finite() || !y.is_finite() || (log_y && y <= 0.0) {
                continue;
            }
            let yv = if log_y { y.log10() } else { y };
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(yv);
            ymax = ymax.max(yv);
            pts.push((x, yv));
        }
        cleaned.push((si, pts));
    }
    if !xmin.is_finite() {
        return Err(CliError::usage(format!(
            "column `{}` has no plottable points",
            chart.column
        )));
    }
    if xmax - xmin < 1e-12 {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if ymax - ymin < 1e-12 {
        ymin -= 0.5;
        ymax += 0.5;
    }

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - xmin) / (xmax - xmin) * plot_w;
    let py = |y: f64| y_off + MARGIN_TOP + plot_h - (y - ymin) / (ymax - ymin) * plot_h;

    // Frame and title.
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT}\" y=\"{}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#444\"/>\n",
        y_off + MARGIN_TOP
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        y_off + MARGIN_TOP - 14.0,
        chart.column,
        if log_y { " (log scale)" } else { "" }
    ));

    // Ticks.
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = xmin + f * (xmax - xmin);
        let x = px(xv);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#444\"/>\n",
            y_off + MARGIN_TOP + plot_h,
            y_off + MARGIN_TOP + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            y_off + MARGIN_TOP + plot_h + 20.0,
            fmt_num(xv)
        ));
        let yv = ymin + f * (ymax - ymin);
        let y = py(yv);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{MARGIN_LEFT}\" y2=\"{y}\" stroke=\"#444\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        let label = if log_y {
            format!("1e{}", fmt_num(yv))
        } else {
            fmt_num(yv)
        };
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_LEFT - 9.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">iter</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        y_off + MARGIN_TOP + plot_h + 38.0
    ));

    // Polylines and legend.
    for (si, pts) in &cleaned {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[si % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = y_off + MARGIN_TOP + 16.0 + 16.0 * *si as f64;
        let lx = MARGIN_LEFT + plot_w - 180.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 24.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            lx + 30.0,
            ly + 4.0,
            chart.series[*si].label
        ));
    }
    Ok(())
}
