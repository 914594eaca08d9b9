//! Re-checks a written trace without rerunning the experiment.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use phi_regret::bounds::{BoundParams, BoundRow, BLACKWELL_SLACK, POTENTIAL_SLACK};
use phi_regret::experiment::DOMINATION_SLACK;

use crate::output::{params_from_json, parse_csv};
use crate::CliError;

/// Relative tolerance when recomputing the envelope from metadata.
pub const RECOMPUTE_TOLERANCE: f64 = 1e-9;

/// Per-seed traces only promise the step inequality; averaged traces promise everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    PerSeed,
    Averaged,
}

impl TraceKind {
    pub fn of(path: &Path) -> Self {
        match path.file_name().and_then(|n| n.to_str()) {
            Some(name) if name.starts_with("seed_") => TraceKind::PerSeed,
            _ => TraceKind::Averaged,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub check: &'static str,
    /// 1-based data row.
    pub row: usize,
    pub t: usize,
    pub detail: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: row {} (t = {}): {}", self.check, self.row, self.t, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub path: PathBuf,
    pub rows: usize,
    pub checks: Vec<&'static str>,
    pub failures: Vec<Failure>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Verifies rows in memory. `params` enables recomputing the envelope column.
pub fn verify_rows(rows: &[BoundRow], kind: TraceKind, params: Option<&BoundParams>) -> (Vec<&'static str>, Vec<Failure>) {
    let mut checks = vec!["structure", "blackwell"];
    let mut failures = Vec::new();
    let first = |failures: &mut Vec<Failure>, check: &'static str, found: Option<(usize, &BoundRow, String)>| {
        if let Some((i, r, detail)) = found {
            failures.push(Failure {
                check,
                row: i + 1,
                t: r.t,
                detail,
            });
        }
    };
    let numbered = || rows.iter().enumerate();

    first(
        &mut failures,
        "structure",
        numbered()
            .find_map(|(i, r)| {
                if r.t != i + 1 {
                    return Some((i, r, format!("expected t = {}", i + 1)));
                }
                let prev = if i == 0 { 0.0 } else { rows[i - 1].g_error_sum };
                if !(r.g_error_sum >= prev) {
                    return Some((i, r, format!("g_error_sum decreased from {prev:?} to {:?}", r.g_error_sum)));
                }
                None
            }),
    );
    first(
        &mut failures,
        "blackwell",
        numbered().find(|(_, r)| !(r.blackwell_lhs <= r.blackwell_rhs + BLACKWELL_SLACK)).map(|(i, r)| {
            (i, r, format!("lhs {:?} > rhs {:?}", r.blackwell_lhs, r.blackwell_rhs))
        }),
    );
    if kind == TraceKind::Averaged {
        checks.extend(["domination", "potential"]);
        first(
            &mut failures,
            "domination",
            numbered()
                .find(|(_, r)| !(r.realized_objective <= r.theorem_rhs + DOMINATION_SLACK))
                .map(|(i, r)| {
                    (i, r, format!("objective {:?} > envelope {:?}", r.realized_objective, r.theorem_rhs))
                }),
        );
        first(
            &mut failures,
            "potential",
            numbered()
                .find(|(_, r)| !(r.potential <= r.potential_bound + POTENTIAL_SLACK))
                .map(|(i, r)| (i, r, format!("potential {:?} > bound {:?}", r.potential, r.potential_bound))),
        );
    }
    if let Some(params) = params {
        checks.push("envelope");
        first(
            &mut failures,
            "envelope",
            numbered().find_map(|(i, r)| match params.theorem_rhs(r.t, r.g_error_sum) {
                Ok(expected) if (r.theorem_rhs - expected).abs() <= RECOMPUTE_TOLERANCE * expected.abs().max(1.0) => None,
                Ok(expected) => Some((i, r, format!("theorem_rhs {:?}, recomputed {expected:?}", r.theorem_rhs))),
                Err(e) => Some((i, r, e.to_string())),
            }),
        );
    }
    (checks, failures)
}

/// Verifies one CSV. Uses `metadata.json` in the same directory when present;
/// game traces (`*_p1.csv`, `*_p2.csv`) read their player's parameters.
pub fn verify_file(path: &Path) -> Result<Report, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows = parse_csv(&text).map_err(|e| CliError::Trace {
        path: path.to_path_buf(),
        line: e.line,
        message: e.message,
    })?;
    if rows.is_empty() {
        return Err(CliError::Trace {
            path: path.to_path_buf(),
            line: 2,
            message: "no data rows".into(),
        });
    }
    let params = load_params(path)?;
    let (checks, failures) = verify_rows(&rows, TraceKind::of(path), params.as_ref());
    Ok(Report {
        path: path.to_path_buf(),
        rows: rows.len(),
        checks,
        failures,
    })
}

/// Verifies a CSV, or every CSV trace in a directory.
pub fn verify_path(path: &Path) -> Result<Vec<Report>, CliError> {
    if !path.is_dir() {
        return Ok(vec![verify_file(path)?]);
    }
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(io)? {
        let p = entry.map_err(io)?.path();
        let is_trace = p.extension().is_some_and(|e| e == "csv")
            && p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("seed_") || n.starts_with("average"));
        if is_trace {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Trace {
            path: path.to_path_buf(),
            line: 0,
            message: "no trace files found".into(),
        });
    }
    files.iter().map(|f| verify_file(f)).collect()
}

fn load_params(csv: &Path) -> Result<Option<BoundParams>, CliError> {
    let Some(meta) = csv.parent().map(|d| d.join("metadata.json")).filter(|m| m.is_file()) else {
        return Ok(None);
    };
    let text = fs::read_to_string(&meta).map_err(|source| CliError::Io {
        path: meta.clone(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Trace {
        path: meta.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let key = match stem.rsplit_once('_') {
        Some((_, player @ ("p1" | "p2"))) => format!("bound_params_{player}"),
        _ => "bound_params".to_string(),
    };
    params_from_json(&value[key.as_str()])
        .map(Some)
        .ok_or_else(|| CliError::Trace {
            path: meta,
            line: 0,
            message: format!("missing or malformed '{key}'"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use phi_regret::links::LinkFunction;

    fn params() -> BoundParams {
        BoundParams {
            link: LinkFunction::Polynomial { p: 2.0 },
            reward_bound: 1.0,
            activation: 2,
            num_transformations: 3,
        }
    }

    fn trace() -> Vec<BoundRow> {
        let p = params();
        (1..=20)
            .map(|t| BoundRow {
                t,
                realized_objective: 0.5 / t as f64,
                blackwell_lhs: -0.1,
                blackwell_rhs: 0.0,
                g_error_sum: 0.0,
                theorem_rhs: p.theorem_rhs(t, 0.0).unwrap(),
                potential: 0.5,
                potential_bound: 1.0 + t as f64,
            })
            .collect()
    }

    #[test]
    fn clean_trace_passes() {
        let (checks, failures) = verify_rows(&trace(), TraceKind::Averaged, Some(&params()));
        assert_eq!(checks.len(), 5);
        assert!(failures.is_empty(), "{failures:?}");
    }

    #[test]
    fn corrupted_envelope_is_located() {
        let mut rows = trace();
        rows[6].theorem_rhs *= 1.5;
        let (_, failures) = verify_rows(&rows, TraceKind::PerSeed, Some(&params()));
        assert_eq!(failures.len(), 1);
        assert_eq!((failures[0].check, failures[0].row, failures[0].t), ("envelope", 7, 7));
    }

    #[test]
    fn inequality_failures() {
        let mut rows = trace();
        rows[3].blackwell_lhs = 1.0;
        rows[4].realized_objective = 10.0;
        rows[5].potential = 100.0;
        let (_, failures) = verify_rows(&rows, TraceKind::Averaged, None);
        let found: Vec<_> = failures.iter().map(|f| (f.check, f.row)).collect();
        assert_eq!(found, vec![("blackwell", 4), ("domination", 5), ("potential", 6)]);
        let (_, per_seed) = verify_rows(&rows, TraceKind::PerSeed, None);
        assert_eq!(per_seed.len(), 1);
    }

    #[test]
    fn structure_failures() {
        let mut rows = trace();
        rows[2].t = 9;
        let (_, failures) = verify_rows(&rows, TraceKind::PerSeed, None);
        assert_eq!(failures[0].check, "structure");
        assert_eq!(failures[0].row, 3);
    }
}
