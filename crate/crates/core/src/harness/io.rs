//! CSV ingestion and report emission.
//!
//! CSV is the canonical output. Every emitted CSV and JSON file is a pure
//! function of the result, so equal seeds give byte-identical files. Wall
//! time goes to a separate `_timing.json`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use super::svg::{render, Chart, Series};
use super::SweepResult;
use crate::error::{PaError, Result};
use crate::select::SelectionResult;

/// Reads a numeric CSV into an `n x p` matrix (rows are samples). Error
/// locations are 1-based file lines and 1-based columns.
pub fn load_matrix_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| PaError::io(path, e))?;
    read_matrix(file, has_header)
}

pub(crate) fn read_matrix<R: std::io::Read>(input: R, has_header: bool) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            PaError::Parse {
                row,
                col: 0,
                message: e.to_string(),
            }
        })?;
        let row = record.position().map_or(rows + 1, |p| p.line() as usize);
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(PaError::Parse {
                row,
                col: expected.min(record.len()) + 1,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| PaError::Parse {
                row,
                col: j + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(PaError::Parse {
                    row,
                    col: j + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    let p = width.unwrap_or(0);
    if rows == 0 || p == 0 {
        return Err(PaError::invalid("CSV holds no data rows"));
    }
    Ok(DMatrix::from_row_slice(rows, p, &data))
}

fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

/// `param,mean_rank,sd_rank,replicates`, one row per grid point.
pub fn sweep_csv(result: &SweepResult) -> String {
    csv_string(
        &["param", "mean_rank", "sd_rank", "replicates"],
        result.points.iter().map(|pt| {
            vec![
                pt.param.to_string(),
                pt.mean_rank.to_string(),
                pt.sd_rank.to_string(),
                pt.ranks.len().to_string(),
            ]
        }),
    )
}

/// `point,param,replicate,rank`, one row per replicate.
pub fn replicate_csv(result: &SweepResult) -> String {
    csv_string(
        &["point", "param", "replicate", "rank"],
        result.points.iter().enumerate().flat_map(|(i, pt)| {
            pt.ranks
                .iter()
                .enumerate()
                .map(move |(r, rank)| vec![i.to_string(), pt.param.to_string(), r.to_string(), rank.to_string()])
        }),
    )
}

/// `rank,sigma_observed,threshold` for ranks `1..=max_rank`.
pub fn selection_csv(result: &SelectionResult) -> String {
    csv_string(
        &["rank", "sigma_observed", "threshold"],
        result
            .observed
            .values
            .iter()
            .zip(&result.thresholds)
            .enumerate()
            .map(|(k, (obs, thr))| vec![(k + 1).to_string(), obs.to_string(), thr.to_string()]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: PathBuf,
    pub extra: Vec<PathBuf>,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| PaError::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable result");
    s.push('\n');
    s
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| PaError::io(dir, e))
}

#[derive(Serialize)]
struct SweepMetadata<'a> {
    label: &'a str,
    seed: u64,
    spec: &'a super::SweepSpec,
    points: &'a [super::SweepPoint],
}

/// Writes `<label>.csv`, `<label>_replicates.csv`, `<label>.json`,
/// `<label>.svg` and `<label>_timing.json` into `dir`.
pub fn emit_sweep(result: &SweepResult, dir: impl AsRef<Path>) -> Result<EmittedFiles> {
    let dir = dir.as_ref();
    if result.points.is_empty() || result.spec.grid.is_empty() {
        return Err(PaError::Config("sweep grid is empty".into()));
    }
    let label = result.spec.label();
    prepare(dir)?;
    let files = EmittedFiles {
        csv: dir.join(format!("{label}.csv")),
        json: dir.join(format!("{label}.json")),
        svg: dir.join(format!("{label}.svg")),
        extra: vec![
            dir.join(format!("{label}_replicates.csv")),
            dir.join(format!("{label}_timing.json")),
        ],
    };
    write(&files.csv, &sweep_csv(result))?;
    write(&files.extra[0], &replicate_csv(result))?;
    write(
        &files.json,
        &json(&SweepMetadata {
            label,
            seed: result.seed,
            spec: &result.spec,
            points: &result.points,
        }),
    )?;
    write(&files.extra[1], &json(&serde_json::json!({ "wall_time_secs": result.wall_time_secs })))?;
    let chart = Chart {
        title: label,
        x_label: "param",
        y_label: "selected rank (mean \u{b1} SD)",
        series: vec![Series {
            label: "mean rank",
            points: result.points.iter().map(|p| (p.param, p.mean_rank)).collect(),
            errors: Some(result.points.iter().map(|p| p.sd_rank).collect()),
        }],
    };
    write(&files.svg, &render(&chart))?;
    Ok(files)
}

/// Writes `<stem>.csv`, `<stem>.json` (the full result) and a scree chart
/// `<stem>.svg` into `dir`.
pub fn emit_selection(result: &SelectionResult, dir: impl AsRef<Path>, stem: &str) -> Result<EmittedFiles> {
    let dir = dir.as_ref();
    prepare(dir)?;
    let files = EmittedFiles {
        csv: dir.join(format!("{stem}.csv")),
        json: dir.join(format!("{stem}.json")),
        svg: dir.join(format!("{stem}.svg")),
        extra: Vec::new(),
    };
    write(&files.csv, &selection_csv(result))?;
    write(&files.json, &json(result))?;
    let ranks = |v: &[f64]| v.iter().enumerate().map(|(k, &s)| ((k + 1) as f64, s)).collect();
    let title = format!("selected rank {}", result.selected_rank);
    let chart = Chart {
        title: &title,
        x_label: "rank",
        y_label: "singular value",
        series: vec![
            Series {
                label: "observed",
                points: ranks(&result.observed.values),
                errors: None,
            },
            Series {
                label: "threshold",
                points: ranks(&result.thresholds),
                errors: None,
            },
        ],
    };
    write(&files.svg, &render(&chart))?;
    Ok(files)
}
