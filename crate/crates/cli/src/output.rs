//! CSV tables and standalone SVG line plots.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use cascade_core::dynamics::TimeSeries;
use num_complex::Complex64;

use crate::error::{CliError, Result};

pub const TIME_SERIES_HEADER: [&str; 6] = ["t", "p2", "p1", "p0", "b2_re", "b2_im"];

/// `x` with `digits` significant digits in scientific notation.
pub fn format_sig(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), x)
}

fn field(x: Option<f64>, digits: usize) -> String {
    x.map(|v| format_sig(v, digits)).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.into(), source }
}

pub fn write_time_series_to<W: Write>(out: W, series: &TimeSeries, digits: usize) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIME_SERIES_HEADER)?;
    for k in 0..series.len() {
        let b2 = series.b2.as_ref().map(|b| b[k]);
        w.write_record([
            format_sig(series.t[k], digits),
            field(series.p2.get(k).copied(), digits),
            field(series.p1.as_ref().map(|p| p[k]), digits),
            field(series.p0.as_ref().map(|p| p[k]), digits),
            field(b2.map(|b| b.re), digits),
            field(b2.map(|b| b.im), digits),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn time_series_csv(series: &TimeSeries, digits: usize) -> String {
    let mut buf = Vec::new();
    write_time_series_to(&mut buf, series, digits).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

pub fn write_time_series(path: &Path, series: &TimeSeries, digits: usize) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    write_time_series_to(file, series, digits).map_err(csv_err(path))
}

fn optional(path: &Path, row: usize, s: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        return Ok(None);
    }
    s.trim().parse().map(Some).map_err(|e| CliError::CsvFormat {
        path: path.into(),
        message: format!("row {row}: '{s}': {e}"),
    })
}

/// Reads a file written by [`write_time_series`]. A column is `None` when
/// every entry is empty.
pub fn read_time_series(path: &Path) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(TIME_SERIES_HEADER) {
        return Err(CliError::CsvFormat { path: path.into(), message: format!("unexpected header {header:?}") });
    }
    let mut cols: [Vec<Option<f64>>; 6] = Default::default();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(optional(path, row + 1, rec.get(c).unwrap_or(""))?);
        }
    }
    let full = |col: &[Option<f64>], name: &str| -> Result<Option<Vec<f64>>> {
        if col.iter().all(Option::is_none) && !col.is_empty() {
            return Ok(None);
        }
        col.iter()
            .map(|v| v.ok_or_else(|| CliError::CsvFormat { path: path.into(), message: format!("column {name} partly empty") }))
            .collect::<Result<Vec<f64>>>()
            .map(Some)
    };
    let t = full(&cols[0], "t")?.unwrap_or_default();
    let p2 = full(&cols[1], "p2")?.unwrap_or_default();
    let b2 = match (full(&cols[4], "b2_re")?, full(&cols[5], "b2_im")?) {
        (Some(re), Some(im)) => Some(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()),
        (None, None) => None,
        _ => return Err(CliError::CsvFormat { path: path.into(), message: "b2 needs both parts".into() }),
    };
    Ok(TimeSeries { t, b2, p2, p1: full(&cols[2], "p1")?, p0: full(&cols[3], "p0")? })
}

/// Generic table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.into(), source })
}

pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub curves: Vec<Curve>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Plot {
    pub fn to_svg(&self) -> String {
        let (w, h) = (720.0, 460.0);
        let (left, right, top, bottom) = (70.0, 160.0, 40.0, 55.0);
        let finite = |v: &&f64| v.is_finite();
        let xs = self.curves.iter().flat_map(|c| c.x.iter()).filter(finite);
        let ys = self.curves.iter().flat_map(|c| c.y.iter()).filter(finite);
        let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !(x1 > x0) {
            (x0, x1) = (x0.min(0.0), x0.max(0.0) + 1.0);
        }
        if !(y1 > y0) {
            (y0, y1) = (y0.min(0.0) - 0.5, y0.max(0.0) + 0.5);
        }
        let pw = w - left - right;
        let ph = h - top - bottom;
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for k in 0..=5 {
            let fx = x0 + (x1 - x0) * k as f64 / 5.0;
            let fy = y0 + (y1 - y0) * k as f64 / 5.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                sx(fx),
                top + ph + 18.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                left - 6.0,
                sy(fy) + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            top + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, c) in self.curves.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = c
                .x
                .iter()
                .zip(&c.y)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
            let ly = top + 16.0 + 18.0 * i as f64;
            let lx = left + pw + 12.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 24.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&c.label));
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg()).map_err(|source| CliError::Io { path: path.into(), source })
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One curve per available population of `series`, each prefixed by `tag`.
pub fn population_curves(series: &TimeSeries, tag: &str) -> Vec<Curve> {
    let prefix = if tag.is_empty() { String::new() } else { format!("{tag} ") };
    let mut curves = vec![Curve { label: format!("{prefix}P2"), x: series.t.clone(), y: series.p2.clone() }];
    if let Some(p1) = &series.p1 {
        curves.push(Curve { label: format!("{prefix}P1"), x: series.t.clone(), y: p1.clone() });
    }
    if let Some(p0) = &series.p0 {
        curves.push(Curve { label: format!("{prefix}P0"), x: series.t.clone(), y: p0.clone() });
    }
    curves
}
