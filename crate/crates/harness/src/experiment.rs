//! Ensemble sweeps over `(N, realization)` with deterministic ordered
//! persistence and idempotent resume.
//!
//! Work items execute on the worker pool; completed rows flow to a single
//! writer that releases them in canonical `(N, r)` order, so `rows.csv` is
//! always a canonical prefix plus nothing else — crash-safe and byte-stable.
//! A rerun with the same config digest skips every `(N, r)` already present.
//! Wall-clock times are recorded in the `wall_ms` column but are inherently
//! not a pure function of the config; every other byte is.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::time::Instant;

use perihom_core::homogenize::{
    sigma_nonsym, sigma_primal_continuous, sigma_primal_discrete,
};
use perihom_core::lattice::TorusGrid;
use perihom_core::media::{
    birkhoff_quality, sample_conductances, sample_known_potential, sample_known_solenoidal,
    sample_matrix_field, MatrixKind, Seed,
};
use perihom_core::solvers::SolveOptions;
use perihom_core::weyl::{defect_of, DefectKind};

use crate::config::{CaseTag, ExperimentConfig, HarnessError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

impl RowStatus {
    fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Failed => "failed",
        }
    }
}

/// One computed `(N, realization)` cell.
#[derive(Debug, Clone)]
pub struct Row {
    pub n: usize,
    pub realization: u64,
    pub seed: u64,
    pub entries: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub wall_ms: u64,
    pub status: RowStatus,
}

/// Per-`N` ensemble statistics over non-failed rows.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NStats {
    pub n: usize,
    pub ok: usize,
    pub failed: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Log-log least-squares rate of a statistic against `N`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateFit {
    pub target: String,
    pub slope: f64,
    pub residual: f64,
    pub points: usize,
}

/// Sweep results: raw rows in canonical order plus the derived statistics.
#[derive(Debug, Clone)]
pub struct ConvergenceRecord {
    pub case: CaseTag,
    pub d: usize,
    pub rows: Vec<Row>,
    pub per_n: Vec<NStats>,
    pub rate: Result<RateFit, String>,
}

/// Work accounting for one `run_experiment` call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
}

fn csv_header(d: usize) -> String {
    let mut cols = vec![
        "case".to_string(),
        "d".to_string(),
        "N".to_string(),
        "realization".to_string(),
        "seed".to_string(),
    ];
    for i in 1..=d {
        for j in 1..=d {
            cols.push(format!("entry_{i}{j}"));
        }
    }
    cols.extend(["iterations".into(), "residual".into(), "wall_ms".into(), "status".into()]);
    cols.join(",")
}

fn format_row(case: CaseTag, d: usize, row: &Row) -> String {
    let mut cols = vec![
        case.as_str().to_string(),
        d.to_string(),
        row.n.to_string(),
        row.realization.to_string(),
        row.seed.to_string(),
    ];
    for e in &row.entries {
        cols.push(format!("{e:.17e}"));
    }
    cols.push(row.iterations.to_string());
    cols.push(format!("{:.17e}", row.residual));
    cols.push(row.wall_ms.to_string());
    cols.push(row.status.as_str().to_string());
    cols.join(",")
}

fn parse_rows(text: &str, d: usize) -> Result<Vec<Row>, HarnessError> {
    let mut rows = Vec::new();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != csv_header(d) {
        return Err(HarnessError::CorruptRows(format!(
            "unexpected header `{header}` (schema changed or wrong d)"
        )));
    }
    let expect_cols = 5 + d * d + 4;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != expect_cols {
            return Err(HarnessError::CorruptRows(format!(
                "row {}: {} columns, expected {expect_cols}",
                i + 2,
                cols.len()
            )));
        }
        let bad = |what: &str| HarnessError::CorruptRows(format!("row {}: bad {what}", i + 2));
        let n: usize = cols[2].parse().map_err(|_| bad("N"))?;
        let realization: u64 = cols[3].parse().map_err(|_| bad("realization"))?;
        let seed: u64 = cols[4].parse().map_err(|_| bad("seed"))?;
        let mut entries = Vec::with_capacity(d * d);
        for c in &cols[5..5 + d * d] {
            entries.push(c.parse().map_err(|_| bad("entry"))?);
        }
        let iterations: usize = cols[5 + d * d].parse().map_err(|_| bad("iterations"))?;
        let residual: f64 = cols[6 + d * d].parse().map_err(|_| bad("residual"))?;
        let wall_ms: u64 = cols[7 + d * d].parse().map_err(|_| bad("wall_ms"))?;
        let status = match cols[8 + d * d] {
            "ok" => RowStatus::Ok,
            "failed" => RowStatus::Failed,
            other => return Err(bad(&format!("status `{other}`"))),
        };
        rows.push(Row { n, realization, seed, entries, iterations, residual, wall_ms, status });
    }
    Ok(rows)
}

/// Compute one `(N, r)` cell. Solver failures become `Failed` rows; anything
/// structural (bad grid, invalid medium) is a hard error.
fn compute_row(
    config: &ExperimentConfig,
    n: usize,
    r: u64,
    birkhoff_ref: f64,
) -> Result<Row, HarnessError> {
    let start = Instant::now();
    let seed = Seed::realization(config.master_seed, r);
    let grid = TorusGrid::new(config.d, n)?;
    let opts = SolveOptions { tol: config.tol, max_iter: 50 * n };
    let d = config.d;
    let mut entries = vec![0.0; d * d];
    let mut iterations = 0usize;
    let mut residual = 0.0f64;
    let mut status = RowStatus::Ok;

    let mut absorb_reports = |reports: &[perihom_core::solvers::SolveReport]| {
        for rep in reports {
            iterations += rep.iterations;
            residual = residual.max(rep.residual);
        }
    };

    match config.case {
        CaseTag::Discrete => {
            let xi = sample_conductances(&config.medium, seed, grid)?;
            match sigma_primal_discrete(&xi, opts) {
                Ok((tensor, _)) => {
                    entries.copy_from_slice(&tensor.sigma);
                    absorb_reports(&tensor.reports);
                }
                Err(e) => {
                    status = RowStatus::Failed;
                    residual = f64::NAN;
                    let _ = e;
                }
            }
        }
        CaseTag::ContinuousSymmetric => {
            let a = sample_matrix_field(&config.medium, seed, grid, MatrixKind::Symmetric)?;
            match sigma_primal_continuous(&a, opts) {
                Ok((tensor, _)) => {
                    entries.copy_from_slice(&tensor.sigma);
                    absorb_reports(&tensor.reports);
                }
                Err(_) => {
                    status = RowStatus::Failed;
                    residual = f64::NAN;
                }
            }
        }
        CaseTag::NonsymFlow => {
            let e = sample_matrix_field(&config.medium, seed, grid, MatrixKind::Skew)?;
            match sigma_nonsym(&config.a_matrix, &e, opts) {
                Ok((tensor, _)) => {
                    entries.copy_from_slice(&tensor.sigma);
                    absorb_reports(&tensor.reports);
                }
                Err(_) => {
                    status = RowStatus::Failed;
                    residual = f64::NAN;
                }
            }
        }
        CaseTag::WeylDefect => {
            let field = match config.defect_kind {
                DefectKind::Potential => sample_known_potential(&config.medium, seed, grid)?,
                DefectKind::Solenoidal => sample_known_solenoidal(&config.medium, seed, grid)?,
            };
            let point = defect_of(&field, config.defect_kind, n);
            entries[0] = point.defect_rel;
            if d >= 2 {
                entries[1] = point.defect_abs;
                entries[d] = point.field_norm;
            }
        }
        CaseTag::Birkhoff => {
            let field = sample_known_potential(&config.medium, seed, grid)?;
            entries[0] = birkhoff_quality(&field, birkhoff_ref) as f64;
        }
    }

    if status == RowStatus::Failed {
        for e in entries.iter_mut() {
            *e = 0.0;
        }
    }
    Ok(Row {
        n,
        realization: r,
        seed: seed.stream_id(),
        entries,
        iterations,
        residual,
        wall_ms: start.elapsed().as_millis() as u64,
        status,
    })
}

/// Ensemble second moment `⟨|ξ|²⟩` estimated at the largest window — the
/// reference the Birkhoff diagnostic scales against.
fn birkhoff_reference(config: &ExperimentConfig) -> Result<f64, HarnessError> {
    if config.case != CaseTag::Birkhoff {
        return Ok(1.0);
    }
    let n = *config.n_list.last().expect("validated non-empty");
    let grid = TorusGrid::new(config.d, n)?;
    let mut acc = 0.0;
    for r in 0..config.realizations {
        let seed = Seed::realization(config.master_seed, r);
        let v = sample_known_potential(&config.medium, seed, grid)?;
        acc += v.norm().powi(2);
    }
    Ok(acc / config.realizations as f64)
}

fn stats_per_n(config: &ExperimentConfig, rows: &[Row]) -> Vec<NStats> {
    let d2 = config.d * config.d;
    config
        .n_list
        .iter()
        .map(|&n| {
            let ok_rows: Vec<&Row> =
                rows.iter().filter(|r| r.n == n && r.status == RowStatus::Ok).collect();
            let failed = rows.iter().filter(|r| r.n == n && r.status == RowStatus::Failed).count();
            let count = ok_rows.len();
            let mut mean = vec![0.0; d2];
            let mut std = vec![0.0; d2];
            if count > 0 {
                for row in &ok_rows {
                    for (m, e) in mean.iter_mut().zip(&row.entries) {
                        *m += e;
                    }
                }
                for m in mean.iter_mut() {
                    *m /= count as f64;
                }
                if count > 1 {
                    for row in &ok_rows {
                        for ((s, e), m) in std.iter_mut().zip(&row.entries).zip(&mean) {
                            *s += (e - m) * (e - m);
                        }
                    }
                    for s in std.iter_mut() {
                        *s = (*s / (count - 1) as f64).sqrt();
                    }
                }
            }
            NStats { n, ok: count, failed, mean, std }
        })
        .collect()
}

/// Least-squares slope of `log(stat)` against `log N`. For tensor cases the
/// statistic is the sample std of `entry_11` (scatter decay); for defect and
/// birkhoff cases the ensemble mean of `entry_11`.
pub fn fit_rate(case: CaseTag, per_n: &[NStats]) -> Result<RateFit, String> {
    let target = match case {
        CaseTag::WeylDefect | CaseTag::Birkhoff => "mean_entry_11",
        _ => "std_entry_11",
    };
    let points: Vec<(f64, f64)> = per_n
        .iter()
        .filter(|s| s.ok >= 1)
        .map(|s| {
            let stat = match case {
                CaseTag::WeylDefect | CaseTag::Birkhoff => s.mean[0],
                _ => s.std[0],
            };
            (s.n as f64, stat)
        })
        .collect();
    if points.len() < 3 {
        return Err(format!("need ≥ 3 N values with statistics, have {}", points.len()));
    }
    if points.iter().any(|(_, s)| *s <= 0.0) {
        return Err("degenerate statistic (zero or negative); no log-log fit".into());
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(n, s)| (n.ln(), s.ln())).collect();
    let k = logs.len() as f64;
    let sx: f64 = logs.iter().map(|(x, _)| x).sum();
    let sy: f64 = logs.iter().map(|(_, y)| y).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| x * y).sum();
    let denom = k * sxx - sx * sx;
    let slope = (k * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / k;
    let residual = (logs
        .iter()
        .map(|(x, y)| {
            let p = slope * x + intercept;
            (y - p) * (y - p)
        })
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(RateFit { target: target.into(), slope, residual, points: logs.len() })
}

#[derive(serde::Serialize)]
struct Summary<'a> {
    tool_version: &'static str,
    config_digest: String,
    case: CaseTag,
    d: usize,
    n_list: &'a [usize],
    realizations: u64,
    per_n: &'a [NStats],
    rate: Option<&'a RateFit>,
    rate_flag: String,
}

/// Run (or resume) the sweep described by `config`. Returns the record plus
/// work accounting; all outputs are written before returning.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ConvergenceRecord, RunStats), HarnessError> {
    fs::create_dir_all(&config.output_dir)?;
    let digest = config.digest();
    let digest_path = config.output_dir.join("config.digest");
    let rows_path = config.output_dir.join("rows.csv");

    let existing_rows = if rows_path.exists() {
        match fs::read_to_string(&digest_path) {
            Ok(existing) if existing.trim() == digest => {}
            Ok(existing) => {
                return Err(HarnessError::DigestMismatch {
                    existing: existing.trim().to_string(),
                    current: digest,
                })
            }
            Err(_) => {
                return Err(HarnessError::CorruptRows(
                    "rows.csv present without config.digest".into(),
                ))
            }
        }
        parse_rows(&fs::read_to_string(&rows_path)?, config.d)?
    } else {
        fs::write(&digest_path, format!("{digest}\n"))?;
        Vec::new()
    };

    let done: std::collections::HashSet<(usize, u64)> =
        existing_rows.iter().map(|r| (r.n, r.realization)).collect();

    let mut work = Vec::new();
    for &n in &config.n_list {
        for r in 0..config.realizations {
            if !done.contains(&(n, r)) {
                work.push((n, r));
            }
        }
    }
    let skipped = done.len();

    let birkhoff_ref = birkhoff_reference(config)?;

    let mut file = fs::OpenOptions::new().create(true).append(true).open(&rows_path)?;
    if existing_rows.is_empty() {
        writeln!(file, "{}", csv_header(config.d))?;
        file.flush()?;
    }

    let new_rows = execute(config, &work, birkhoff_ref, &mut file)?;
    drop(file);

    let mut rows = existing_rows;
    rows.extend(new_rows);
    rows.sort_by_key(|r| {
        let n_idx = config.n_list.iter().position(|&n| n == r.n).unwrap_or(usize::MAX);
        (n_idx, r.realization)
    });
    let computed = work.len();
    let failed = rows.iter().filter(|r| r.status == RowStatus::Failed).count();

    let per_n = stats_per_n(config, &rows);
    let rate = fit_rate(config.case, &per_n);

    let summary = Summary {
        tool_version: TOOL_VERSION,
        config_digest: digest,
        case: config.case,
        d: config.d,
        n_list: &config.n_list,
        realizations: config.realizations,
        per_n: &per_n,
        rate: rate.as_ref().ok(),
        rate_flag: match &rate {
            Ok(_) => "ok".into(),
            Err(msg) => msg.clone(),
        },
    };
    fs::write(
        config.output_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;

    if config.case == CaseTag::WeylDefect {
        write_defect_csv(config, &rows)?;
    }

    Ok((
        ConvergenceRecord { case: config.case, d: config.d, rows, per_n, rate },
        RunStats { computed, skipped, failed },
    ))
}

/// Companion CSV for defect sweeps: `N,defect_abs,defect_rel,field_norm,seed`,
/// regenerated from the rows so resume keeps it byte-stable.
fn write_defect_csv(config: &ExperimentConfig, rows: &[Row]) -> Result<(), HarnessError> {
    let mut out = String::from("N,defect_abs,defect_rel,field_norm,seed\n");
    for row in rows {
        if row.status != RowStatus::Ok {
            continue;
        }
        let (rel, abs, norm) = (
            row.entries[0],
            row.entries.get(1).copied().unwrap_or(0.0),
            row.entries.get(config.d).copied().unwrap_or(0.0),
        );
        out.push_str(&format!("{},{abs:.17e},{rel:.17e},{norm:.17e},{}\n", row.n, row.seed));
    }
    fs::write(config.output_dir.join("defect.csv"), out)?;
    Ok(())
}

/// Run the work list, streaming completed rows to the file in list order.
fn execute(
    config: &ExperimentConfig,
    work: &[(usize, u64)],
    birkhoff_ref: f64,
    file: &mut fs::File,
) -> Result<Vec<Row>, HarnessError> {
    let count = work.len();

    #[cfg(feature = "parallel")]
    let rows: Vec<Option<Row>> = {
        use rayon::prelude::*;
        let (tx, rx) = std::sync::mpsc::channel::<(usize, Result<Row, HarnessError>)>();
        std::thread::scope(|scope| -> Result<Vec<Option<Row>>, HarnessError> {
            let handle = scope.spawn(move || -> Result<Vec<Option<Row>>, HarnessError> {
                let mut pending: BTreeMap<usize, Row> = BTreeMap::new();
                let mut local: Vec<Option<Row>> = (0..count).map(|_| None).collect();
                let mut next = 0usize;
                let mut first_error: Option<HarnessError> = None;
                for (idx, row) in rx.iter() {
                    match row {
                        Ok(row) => {
                            pending.insert(idx, row);
                        }
                        Err(e) => {
                            if first_error.is_none() {
                                first_error = Some(e);
                            }
                        }
                    }
                    // release the longest contiguous prefix of completed rows
                    while let Some(row) = pending.remove(&next) {
                        writeln!(file, "{}", format_row(config.case, config.d, &row))?;
                        file.flush()?;
                        local[next] = Some(row);
                        next += 1;
                    }
                }
                if let Some(e) = first_error {
                    return Err(e);
                }
                Ok(local)
            });
            work.par_iter().enumerate().for_each_with(tx, |tx, (idx, &(n, r))| {
                let row = compute_row(config, n, r, birkhoff_ref);
                let _ = tx.send((idx, row));
            });
            handle.join().expect("writer thread panicked")
        })?
    };

    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Option<Row>> = {
        let mut local: Vec<Option<Row>> = (0..count).map(|_| None).collect();
        for (idx, &(n, r)) in work.iter().enumerate() {
            let row = compute_row(config, n, r, birkhoff_ref)?;
            writeln!(file, "{}", format_row(config.case, config.d, &row))?;
            file.flush()?;
            local[idx] = Some(row);
        }
        local
    };

    Ok(rows.into_iter().map(|r| r.expect("all work items completed")).collect())
}
