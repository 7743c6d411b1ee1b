//! Static SVG log-log charts of a study.

use std::path::Path;
use std::str::FromStr;

use plotters::prelude::*;

use super::slope::fit_log_log;
use super::study::ConvergenceRow;
use crate::error::{NestorError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    RmseVsEps,
    CostVsEps,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::RmseVsEps => "rmse_vs_eps",
            PlotKind::CostVsEps => "cost_vs_eps",
        }
    }
}

impl FromStr for PlotKind {
    type Err = NestorError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse_vs_eps" => Ok(PlotKind::RmseVsEps),
            "cost_vs_eps" => Ok(PlotKind::CostVsEps),
            _ => Err(NestorError::Config(format!(
                "unknown plot kind `{s}`; expected rmse_vs_eps or cost_vs_eps"
            ))),
        }
    }
}

struct Series {
    label: &'static str,
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

fn series(rows: &[ConvergenceRow], kind: PlotKind) -> Vec<Series> {
    let pick = |label, color, f: fn(&ConvergenceRow) -> f64| Series {
        label,
        color,
        points: rows
            .iter()
            .map(|r| (r.eps, f(r)))
            .filter(|(e, v)| *e > 0.0 && *v > 0.0 && v.is_finite())
            .collect(),
    };
    let all = match kind {
        PlotKind::RmseVsEps => vec![pick("empirical rmse", BLUE, |r| r.empirical_rmse)],
        PlotKind::CostVsEps => vec![
            pick("classical steps", BLUE, |r| r.classical_steps_mean),
            pick("quantum charged", RED, |r| r.quantum_charged),
        ],
    };
    all.into_iter().filter(|s| !s.points.is_empty()).collect()
}

fn plot_err(e: impl std::fmt::Display) -> NestorError {
    NestorError::Plot(e.to_string())
}

/// Draws the chart to an SVG string.
pub fn render_svg(rows: &[ConvergenceRow], kind: PlotKind) -> Result<String> {
    if rows.is_empty() {
        return Err(NestorError::InsufficientData { needed: 1, got: 0 });
    }
    let series = series(rows, kind);
    let eps_min = rows.iter().map(|r| r.eps).fold(f64::INFINITY, f64::min);
    let eps_max = rows.iter().map(|r| r.eps).fold(0.0, f64::max);
    let (x0, x1) = (eps_min / 1.5, eps_max * 1.5);
    let values = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (mut lo, mut hi) = values.fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if series.is_empty() {
        // nothing positive to show; keep axes sane
        (lo, hi) = (1e-3, 1.0);
    }
    // guides anchored at the first point of the first series
    let anchor = series.first().map(|s| s.points[0]).unwrap_or((eps_max, hi));
    let guides: Vec<(f64, &str)> = vec![(1.0, "slope -1"), (2.0, "slope -2")];
    let guide = |k: f64, x: f64| anchor.1 * (x / anchor.0).powf(-k);
    for (k, _) in &guides {
        for x in [x0, x1] {
            let v = guide(*k, x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let (y0, y1) = (lo / 2.0, hi * 2.0);

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (720, 520)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let (title, ylabel) = match kind {
            PlotKind::RmseVsEps => ("RMSE vs eps", "empirical RMSE"),
            PlotKind::CostVsEps => ("Cost vs eps", "cost per estimate"),
        };
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 22))
            .margin(16)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("eps")
            .y_desc(ylabel)
            .y_label_formatter(&|v| format!("{v:.0e}"))
            .draw()
            .map_err(plot_err)?;

        for (k, label) in &guides {
            let color = RGBColor(150, 150, 150);
            chart
                .draw_series(LineSeries::new(
                    [x0, x1].iter().map(|&x| (x, guide(*k, x))),
                    ShapeStyle::from(color).stroke_width(1),
                ))
                .map_err(plot_err)?
                .label(*label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
        }

        for s in &series {
            let color = s.color;
            chart
                .draw_series(s.points.iter().map(|&p| Circle::new(p, 4, color.filled())))
                .map_err(plot_err)?
                .label(s.label)
                .legend(move |(x, y)| Circle::new((x + 9, y), 4, color.filled()));
            if s.points.len() >= 3 {
                let (eps, vals): (Vec<f64>, Vec<f64>) = s.points.iter().copied().unzip();
                let fit = fit_log_log(&eps, &vals, 0)?;
                let line = |x: f64| (fit.intercept + fit.slope * (1.0 / x).log2()).exp2();
                let label = format!("{} fit, slope {:.2}", s.label, -fit.slope);
                chart
                    .draw_series(LineSeries::new(
                        [eps_min, eps_max].iter().map(|&x| (x, line(x))),
                        ShapeStyle::from(color).stroke_width(2),
                    ))
                    .map_err(plot_err)?
                    .label(label)
                    .legend(move |(x, y)| {
                        PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                    });
            } else {
                chart
                    .draw_series(LineSeries::new(s.points.iter().copied(), color))
                    .map_err(plot_err)?;
            }
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Writes the chart to `path`.
pub fn emit_plot(rows: &[ConvergenceRow], kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render_svg(rows, kind)?;
    std::fs::write(path, svg).map_err(|source| NestorError::Io {
        path: path.to_path_buf(),
        source,
    })
}
