//! Result export: one CSV per learning curve plus a standalone SVG chart.
//! Output is deliberately plain — stable column order, full-precision
//! floats, no timestamps — so re-exporting the same curves is
//! byte-identical and diffs stay meaningful.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::curve::{CurveBundle, LearningCurve};
use crate::error::{Error, Result};

/// Indices of `curve.sizes` in ascending size order (stable for ties).
fn sorted_order(curve: &LearningCurve) -> Vec<usize> {
    let mut order: Vec<usize> = (0..curve.sizes.len()).collect();
    order.sort_by_key(|&i| curve.sizes[i]);
    order
}

fn curve_csv_string(curve: &LearningCurve) -> Result<String> {
    if curve.sizes.len() != curve.rep_errors.len() {
        return Err(Error::invalid(format!(
            "curve '{}' has {} sizes but {} repetition rows",
            curve.name,
            curve.sizes.len(),
            curve.rep_errors.len()
        )));
    }
    let reps = curve.repetitions();
    if reps == 0 || curve.rep_errors.iter().any(|r| r.len() != reps) {
        return Err(Error::invalid(format!(
            "curve '{}' must have the same nonzero repetition count at every size",
            curve.name
        )));
    }
    let mut out = String::new();
    out.push_str("size,mean_error,std_error");
    for r in 1..=reps {
        let _ = write!(out, ",rep_{r}");
    }
    out.push('\n');
    for &i in &sorted_order(curve) {
        let _ = write!(out, "{},{},{}", curve.sizes[i], curve.mean(i), curve.std(i));
        for e in &curve.rep_errors[i] {
            let _ = write!(out, ",{e}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes one curve as CSV (`size,mean_error,std_error,rep_1..rep_R`),
/// rows ascending by training size.
pub fn write_curve_csv(curve: &LearningCurve, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), curve_csv_string(curve)?)?;
    Ok(())
}

/// Reads a curve back from its CSV. The curve is named after the file
/// stem and comes back in ascending size order; mean and std columns are
/// ignored (they are derived from the repetition columns).
pub fn parse_curve_csv(path: impl AsRef<Path>) -> Result<LearningCurve> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("curve")
        .to_string();
    let bad = |what: &str| Error::Config(format!("{}: {what}", path.display()));

    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty curve file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 4
        || columns[0] != "size"
        || columns[1] != "mean_error"
        || columns[2] != "std_error"
    {
        return Err(bad("header must be size,mean_error,std_error,rep_1,..."));
    }
    for (i, col) in columns[3..].iter().enumerate() {
        if *col != format!("rep_{}", i + 1) {
            return Err(bad(&format!("unexpected repetition column '{col}'")));
        }
    }
    let reps = columns.len() - 3;

    let mut sizes = Vec::new();
    let mut rep_errors = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(bad(&format!(
                "row {} has {} fields, expected {}",
                row + 2,
                fields.len(),
                columns.len()
            )));
        }
        let size: usize = fields[0]
            .parse()
            .map_err(|_| bad(&format!("bad size '{}'", fields[0])))?;
        let mut errors = Vec::with_capacity(reps);
        for f in &fields[3..] {
            errors.push(
                f.parse::<f64>()
                    .map_err(|_| bad(&format!("bad error value '{f}'")))?,
            );
        }
        sizes.push(size);
        rep_errors.push(errors);
    }
    if sizes.is_empty() {
        return Err(bad("no data rows"));
    }
    Ok(LearningCurve {
        name,
        sizes,
        rep_errors,
    })
}

struct SeriesStyle {
    stroke: &'static str,
    width: f64,
    dash: Option<&'static str>,
    /// Legend entry; None keeps the series out of the legend.
    legend: Option<String>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#e377c2",
];

/// Renders learning curves as a self-contained SVG: mean error versus
/// training size on a logarithmic x-axis. The root element carries the
/// data ranges as `data-x-min/x-max/y-min/y-max` attributes.
fn render_chart(series: &[(&LearningCurve, SeriesStyle)]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::invalid("cannot chart an empty curve list"));
    }
    let mut x_min = usize::MAX;
    let mut x_max = 0usize;
    let mut y_max = 0.0_f64;
    for (curve, _) in series {
        if curve.sizes.is_empty() {
            return Err(Error::invalid(format!("curve '{}' is empty", curve.name)));
        }
        for &s in &curve.sizes {
            x_min = x_min.min(s);
            x_max = x_max.max(s);
        }
        y_max = y_max.max(curve.max_observed());
    }

    const W: f64 = 860.0;
    const H: f64 = 520.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 190.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 60.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;

    let (lx_min, lx_max) = ((x_min as f64).log10(), (x_max as f64).log10());
    let x_of = |size: usize| -> f64 {
        if lx_max > lx_min {
            LEFT + ((size as f64).log10() - lx_min) / (lx_max - lx_min) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let y_span = if y_max > 0.0 { y_max } else { 1.0 };
    let y_of = |e: f64| -> f64 { TOP + plot_h - (e / y_span) * plot_h };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\" \
         data-x-min=\"{x_min}\" data-x-max=\"{x_max}\" data-y-min=\"0\" data-y-max=\"{y_max}\">"
    );
    let _ = writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>"
    );

    // Axes.
    let _ = writeln!(
        svg,
        "  <line x1=\"{LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>",
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.2}\" stroke=\"#333\"/>",
        TOP + plot_h
    );

    // X ticks at every distinct size.
    let mut ticks: Vec<usize> = series
        .iter()
        .flat_map(|(c, _)| c.sizes.iter().copied())
        .collect();
    ticks.sort_unstable();
    ticks.dedup();
    for &size in &ticks {
        let x = x_of(size);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>",
            TOP + plot_h,
            TOP + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{size}</text>",
            TOP + plot_h + 20.0
        );
    }
    // Y ticks: five even divisions of the observed range.
    for i in 0..=5 {
        let e = y_span * i as f64 / 5.0;
        let y = y_of(e);
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"#333\"/>",
            LEFT - 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{e:.3}</text>",
            LEFT - 9.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">training patches per class (log scale)</text>",
        LEFT + plot_w / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">error rate</text>",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    // Series polylines (means over repetitions), drawn in given order so
    // emphasized curves go last in the caller's list to sit on top.
    for (curve, style) in series {
        let order = sorted_order(curve);
        let mut points = String::new();
        for &i in &order {
            let _ = write!(
                points,
                "{:.2},{:.2} ",
                x_of(curve.sizes[i]),
                y_of(curve.mean(i))
            );
        }
        let dash = style
            .dash
            .map(|d| format!(" stroke-dasharray=\"{d}\""))
            .unwrap_or_default();
        let _ = writeln!(
            svg,
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{dash} points=\"{}\"/>",
            style.stroke,
            style.width,
            points.trim_end()
        );
    }

    // Legend.
    let mut ly = TOP + 10.0;
    let lx = LEFT + plot_w + 18.0;
    for (_, style) in series {
        if let Some(label) = &style.legend {
            let dash = style
                .dash
                .map(|d| format!(" stroke-dasharray=\"{d}\""))
                .unwrap_or_default();
            let _ = writeln!(
                svg,
                "  <line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
                 stroke=\"{}\" stroke-width=\"{}\"{dash}/>",
                lx + 26.0,
                style.stroke,
                style.width
            );
            let _ = writeln!(
                svg,
                "  <text x=\"{:.2}\" y=\"{:.2}\">{label}</text>",
                lx + 32.0,
                ly + 4.0
            );
            ly += 20.0;
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders a chart of the given curves to `path` (every curve gets a
/// legend entry and a palette color).
pub fn write_chart(curves: &[&LearningCurve], path: impl AsRef<Path>) -> Result<()> {
    let series: Vec<(&LearningCurve, SeriesStyle)> = curves
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (
                *c,
                SeriesStyle {
                    stroke: PALETTE[i % PALETTE.len()],
                    width: 2.5,
                    dash: None,
                    legend: Some(c.name.clone()),
                },
            )
        })
        .collect();
    std::fs::write(path.as_ref(), render_chart(&series)?)?;
    Ok(())
}

/// Writes one CSV per curve plus `{chart_name}.svg` into `out_dir`
/// (created if missing). Returns the written paths.
pub fn export_curves(
    curves: &[LearningCurve],
    out_dir: impl AsRef<Path>,
    chart_name: &str,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for curve in curves {
        let path = out_dir.join(format!("{}.csv", curve.name));
        write_curve_csv(curve, &path)?;
        written.push(path);
    }
    let chart = out_dir.join(format!("{chart_name}.svg"));
    let refs: Vec<&LearningCurve> = curves.iter().collect();
    write_chart(&refs, &chart)?;
    written.push(chart);
    Ok(written)
}

/// Writes a full experiment bundle: one CSV per curve and a single
/// `chart.svg` where the combined curve is emphasized, groups are dashed,
/// and the individual subsets form a thin gray background. Returns the
/// written paths.
pub fn export_results(bundle: &CurveBundle, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for curve in bundle.all_curves() {
        let path = out_dir.join(format!("{}.csv", curve.name));
        write_curve_csv(curve, &path)?;
        written.push(path);
    }

    let mut series: Vec<(&LearningCurve, SeriesStyle)> = Vec::new();
    for (i, subset) in bundle.subsets.iter().enumerate() {
        series.push((
            subset,
            SeriesStyle {
                stroke: "#b0b0b0",
                width: 0.9,
                dash: None,
                legend: (i == 0).then(|| format!("subsets ({})", bundle.subsets.len())),
            },
        ));
    }
    for (g, group) in bundle.groups.iter().enumerate() {
        series.push((
            group,
            SeriesStyle {
                stroke: PALETTE[1 + g % (PALETTE.len() - 1)],
                width: 1.6,
                dash: Some("6,3"),
                legend: Some(group.name.clone()),
            },
        ));
    }
    series.push((
        &bundle.combined,
        SeriesStyle {
            stroke: PALETTE[0],
            width: 3.0,
            dash: None,
            legend: Some(bundle.combined.name.clone()),
        },
    ));

    let chart = out_dir.join("chart.svg");
    std::fs::write(&chart, render_chart(&series)?)?;
    written.push(chart);
    Ok(written)
}
