//! CSV traces, metadata and the summary plot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use phi_regret::bounds::{BoundParams, BoundRow};
use phi_regret::links::LinkFunction;
use serde_json::{json, Value};

use crate::CliError;

pub const CSV_HEADER: &str =
    "t,realized_objective,blackwell_lhs,blackwell_rhs,g_error_sum,theorem_rhs,potential,potential_bound";

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn rows_to_csv(rows: &[BoundRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 120);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t,
            fmt_f64(r.realized_objective),
            fmt_f64(r.blackwell_lhs),
            fmt_f64(r.blackwell_rhs),
            fmt_f64(r.g_error_sum),
            fmt_f64(r.theorem_rhs),
            fmt_f64(r.potential),
            fmt_f64(r.potential_bound),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvError {
    /// 1-based line in the file.
    pub line: usize,
    pub message: String,
}

pub fn parse_csv(text: &str) -> Result<Vec<BoundRow>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(CsvError {
                line: 1,
                message: format!("unexpected header '{header}'"),
            })
        }
        None => {
            return Err(CsvError {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| CsvError {
            line: idx + 1,
            message,
        };
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 8 {
            return Err(bad(format!("expected 8 columns, found {}", cells.len())));
        }
        let t = cells[0]
            .parse::<usize>()
            .map_err(|_| bad(format!("bad t '{}'", cells[0])))?;
        let mut v = [0.0; 7];
        for (slot, cell) in v.iter_mut().zip(&cells[1..]) {
            *slot = cell
                .parse::<f64>()
                .map_err(|_| bad(format!("bad number '{cell}'")))?;
        }
        rows.push(BoundRow {
            t,
            realized_objective: v[0],
            blackwell_lhs: v[1],
            blackwell_rhs: v[2],
            g_error_sum: v[3],
            theorem_rhs: v[4],
            potential: v[5],
            potential_bound: v[6],
        });
    }
    Ok(rows)
}

pub fn params_to_json(params: &BoundParams) -> Value {
    let (link, param) = match params.link {
        LinkFunction::Polynomial { p } => ("polynomial", p),
        LinkFunction::Exponential { eta } => ("exponential", eta),
    };
    json!({
        "link": link,
        "link_param": param,
        "reward_bound": params.reward_bound,
        "activation": params.activation,
        "num_transformations": params.num_transformations,
    })
}

pub fn params_from_json(value: &Value) -> Option<BoundParams> {
    let link_param = value.get("link_param")?.as_f64()?;
    let link = match value.get("link")?.as_str()? {
        "polynomial" => LinkFunction::polynomial(link_param).ok()?,
        "exponential" => LinkFunction::exponential(link_param).ok()?,
        _ => return None,
    };
    Some(BoundParams {
        link,
        reward_bound: value.get("reward_bound")?.as_f64()?,
        activation: usize::try_from(value.get("activation")?.as_u64()?).ok()?,
        num_transformations: usize::try_from(value.get("num_transformations")?.as_u64()?).ok()?,
    })
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Seed-averaged objective against the envelope, log-scaled time axis.
pub fn summary_svg(title: &str, series: &[(&str, &[BoundRow])]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const PAD: f64 = 50.0;
    let t_max = series
        .iter()
        .filter_map(|(_, rows)| rows.last().map(|r| r.t))
        .max()
        .unwrap_or(1)
        .max(2) as f64;
    // The envelope is huge for small t; scale y to the tail.
    let floor_t = (t_max / 100.0).max(1.0);
    let y_max = series
        .iter()
        .flat_map(|(_, rows)| rows.iter())
        .filter(|r| r.t as f64 >= floor_t)
        .flat_map(|r| [r.realized_objective, r.theorem_rhs])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let x = |t: usize| PAD + (t as f64).ln() / t_max.ln() * (W - 2.0 * PAD);
    let y = |v: f64| H - PAD - (v / y_max).clamp(-0.1, 1.05) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="25" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">t = {} (log scale)</text>"#,
        W - PAD,
        H - PAD + 20.0,
        t_max
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
        PAD + 4.0,
        PAD - 4.0,
        fmt_f64(y_max)
    );
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut legend_y = PAD + 10.0;
    for (i, (name, rows)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        for (label, dashed, pick) in [
            ("objective", false, (|r: &BoundRow| r.realized_objective) as fn(&BoundRow) -> f64),
            ("envelope", true, |r: &BoundRow| r.theorem_rhs),
        ] {
            let points = thin(rows)
                .map(|r| format!("{:.2},{:.2}", x(r.t), y(pick(r))))
                .collect::<Vec<_>>()
                .join(" ");
            let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{points}"/>"#
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{legend_y}" font-family="sans-serif" font-size="11" fill="{color}">{} {label}</text>"#,
                W - PAD - 160.0,
                escape(name)
            );
            legend_y += 14.0;
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// At most ~600 points, spaced evenly in log t.
fn thin(rows: &[BoundRow]) -> impl Iterator<Item = &BoundRow> {
    let n = rows.len();
    let mut last = f64::NEG_INFINITY;
    rows.iter().enumerate().filter(move |(i, r)| {
        let pos = (r.t as f64).ln();
        if *i + 1 == n || pos - last >= (n as f64).ln().max(1.0) / 600.0 {
            last = pos;
            true
        } else {
            false
        }
    })
    .map(|(_, r)| r)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: usize, x: f64) -> BoundRow {
        BoundRow {
            t,
            realized_objective: x,
            blackwell_lhs: -x,
            blackwell_rhs: 0.0,
            g_error_sum: 1e-300,
            theorem_rhs: 0.1 + x,
            potential: 1.0 / 3.0,
            potential_bound: 2.0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows: Vec<_> = (1..50).map(|t| row(t, 1.0 / (t as f64).sqrt())).collect();
        let text = rows_to_csv(&rows);
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let mut text = rows_to_csv(&[row(1, 0.5), row(2, 0.25)]);
        text = text.replace("2,0.25", "2,zzz");
        assert_eq!(parse_csv(&text).unwrap_err().line, 3);
        assert_eq!(parse_csv("t,x\n").unwrap_err().line, 1);
    }

    #[test]
    fn params_round_trip() {
        let params = BoundParams {
            link: LinkFunction::Exponential { eta: 0.1 },
            reward_bound: 1.0,
            activation: 2,
            num_transformations: 7,
        };
        assert_eq!(params_from_json(&params_to_json(&params)), Some(params));
    }

    #[test]
    fn svg_is_well_formed() {
        let rows: Vec<_> = (1..=5000).map(|t| row(t, 1.0 / (t as f64).sqrt())).collect();
        let svg = summary_svg("a < b", &[("avg", &rows)]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        let points = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert!(points.split(' ').count() <= 700);
    }
}
