//! CSV, JSON and SVG writers for experiment results.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::run::{RoundRecord, RunSummary};

pub const CSV_HEADER: &str = "replicate,round,action,propensity,observed_loss,estimate,resample_count,cumulative_loss";

/// Rounds to 12 significant digits.
pub fn round_sig12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

fn fmt_float(v: f64) -> String {
    format!("{}", round_sig12(v))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

pub fn write_csv<W: Write>(records: &[RoundRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let resample = r.resample_count.map(|m| m.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.replicate,
            r.round,
            r.action,
            fmt_float(r.propensity),
            fmt_float(r.observed_loss),
            fmt_float(r.estimate),
            resample,
            fmt_float(r.cumulative_loss)
        )?;
    }
    Ok(())
}

pub fn emit_csv(records: &[RoundRecord], path: &Path) -> Result<()> {
    create_parent(path)?;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write_csv(records, &mut w)?;
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("line {line}: bad {name} {s:?}")))
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<RoundRecord>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(CSV_HEADER) {
        return Err(Error::Parse("missing or unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse(format!("line {n}: expected 8 fields, got {}", f.len())));
        }
        out.push(RoundRecord {
            replicate: field(f[0], n, "replicate")?,
            round: field(f[1], n, "round")?,
            action: field(f[2], n, "action")?,
            propensity: field(f[3], n, "propensity")?,
            observed_loss: field(f[4], n, "observed_loss")?,
            estimate: field(f[5], n, "estimate")?,
            resample_count: if f[6].is_empty() { None } else { Some(field(f[6], n, "resample_count")?) },
            cumulative_loss: field(f[7], n, "cumulative_loss")?,
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<RoundRecord>> {
    read_csv(std::io::BufReader::new(fs::File::open(path)?))
}

pub fn summary_json(summary: &RunSummary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn emit_json(summary: &RunSummary, path: &Path) -> Result<()> {
    create_parent(path)?;
    fs::write(path, summary_json(summary)?)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// One polyline of (round, regret) points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Per-replicate regret curves from a summary, followed by their mean.
pub fn regret_series(summary: &RunSummary) -> Vec<Series> {
    let mut out: Vec<Series> = summary
        .per_replicate
        .iter()
        .map(|r| Series {
            label: format!("replicate {}", r.replicate),
            points: r.curve.rounds.iter().zip(&r.curve.regret).map(|(&t, &v)| (t as f64, v)).collect(),
        })
        .collect();
    if let Some(first) = out.first() {
        let n = out.len() as f64;
        let points = (0..first.points.len())
            .map(|i| (first.points[i].0, out.iter().map(|s| s.points[i].1).sum::<f64>() / n))
            .collect();
        out.push(Series { label: "mean".into(), points });
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const PAD: f64 = 50.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart of regret against round; the last series is drawn heavier.
pub fn render_svg(series: &[Series], title: &str) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::domain("need at least one non-empty series to plot"));
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let x_max = all().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let x_min = all().map(|p| p.0).fold(f64::INFINITY, f64::min).min(0.0);
    let y_max = all().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut y_min = all().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if !(x_max.is_finite() && y_max.is_finite() && y_min.is_finite()) {
        return Err(Error::domain("series contain non-finite values"));
    }
    if y_min == y_max {
        y_min = y_max - 1.0;
    }
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let sx = |x: f64| PAD + (x - x_min) / x_span * (WIDTH - 2.0 * PAD);
    let sy = |y: f64| HEIGHT - PAD - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-y-min="{}" data-y-max="{}" data-x-max="{}">"#,
        y_min, y_max, x_max
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, xml_escape(title));
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let (left, right, top, bottom) = (PAD, WIDTH - PAD, PAD, HEIGHT - PAD);
    let _ = writeln!(
        svg,
        r##"<polyline class="axes" fill="none" stroke="#000000" points="{left},{top} {left},{bottom} {right},{bottom}"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
        left - 4.0,
        top + 4.0,
        fmt_float(y_max)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
        left - 4.0,
        bottom,
        fmt_float(y_min)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{right}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
        bottom + 16.0,
        fmt_float(x_max)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">round</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">cumulative regret</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let last = series.len() - 1;
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let (stroke, width) = if i == last && series.len() > 1 { ("#c0392b", 2.5) } else { ("#7f8c8d", 1.0) };
        let _ = writeln!(
            svg,
            r#"<polyline data-label="{}" fill="none" stroke="{stroke}" stroke-width="{width}" points="{}"/>"#,
            xml_escape(&s.label),
            pts.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(series: &[Series], path: &Path) -> Result<()> {
    let svg = render_svg(series, "cumulative regret")?;
    create_parent(path)?;
    fs::write(path, svg)?;
    Ok(())
}
