//! Analysis-ready exports: RFC-4180-style CSV (UTF-8, LF) or a JSON mirror
//! of the archive. CSV floats carry 17 significant digits so values
//! round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sth_core::DeltaWindow;

use crate::archive::{CellTable, ResultArchive, Selection};
use crate::error::{CliError, Result};

/// Output format for `emit`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

fn delta_label(delta: DeltaWindow) -> String {
    match delta {
        DeltaWindow::Unconstrained => "unconstrained".into(),
        DeltaWindow::Finite(w) => {
            if w == w.trunc() && w.abs() < 1e15 {
                format!("{}", w as i64)
            } else {
                format!("{w}")
            }
        }
    }
}

fn write_series_csv(cell: &CellTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path.display().to_string()))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    };

    let mut header = String::from("t");
    for s in &cell.series.series {
        header.push(',');
        header.push_str(s.stat.name());
        header.push(',');
        header.push_str(s.stat.name());
        header.push_str("_stderr");
    }
    out.write_all(header.as_bytes()).map_err(io_err)?;
    out.write_all(b"\n").map_err(io_err)?;

    for (i, &t) in cell.series.steps_recorded.iter().enumerate() {
        let mut line = t.to_string();
        for s in &cell.series.series {
            line.push(',');
            line.push_str(&float17(s.mean[i]));
            line.push(',');
            line.push_str(&float17(s.stderr[i]));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

fn write_summary_csv(cells: &[&CellTable], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path.display().to_string()))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    };

    // All cells of one experiment share the summary layout.
    let stats: Vec<_> = cells[0].series.summary.iter().map(|s| s.stat).collect();
    let mut header = String::from("L,N_V,delta");
    for stat in &stats {
        header.push_str(&format!(",{0}_mean,{0}_stderr", stat.name()));
    }
    out.write_all(header.as_bytes()).map_err(io_err)?;
    out.write_all(b"\n").map_err(io_err)?;

    for cell in cells {
        let mut line = format!("{},{},{}", cell.l, cell.n_v, delta_label(cell.delta));
        for stat in &stats {
            let s = cell.series.summary_for(*stat);
            line.push(',');
            line.push_str(&float17(s.mean));
            line.push(',');
            line.push_str(&float17(s.stderr));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

fn write_counters_csv(cells: &[&CellTable], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path.display().to_string()))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    };
    out.write_all(
        b"L,N_V,delta,n_total,n_no_wait,n_causality,n_window,delta_bar,kappa_bar,p_w,p_delta\n",
    )
    .map_err(io_err)?;
    for cell in cells {
        if let Some(c) = &cell.series.counters {
            let line = format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                cell.l,
                cell.n_v,
                delta_label(cell.delta),
                c.n_total,
                c.n_no_wait,
                c.n_causality,
                c.n_window,
                float17(c.mean_causality_wait()),
                float17(c.mean_window_wait()),
                float17(c.p_causality()),
                float17(c.p_window()),
            );
            out.write_all(line.as_bytes()).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

/// Emits the selected tables. CSV: one time-series file per cell plus one
/// steady-state summary per experiment (and a counters file when
/// instrumented). JSON: a single document mirroring the archive.
/// Returns the written paths.
pub fn emit(
    archive: &ResultArchive,
    format: EmitFormat,
    selection: &Selection,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let cells = selection.select(archive)?;
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir.display().to_string()))?;
    let mut written = Vec::new();

    match format {
        EmitFormat::Json => {
            let filtered = ResultArchive {
                manifest: archive.manifest.clone(),
                cells: cells.iter().map(|&c| c.clone()).collect(),
            };
            let path = out_dir.join("archive.json");
            let file = File::create(&path).map_err(CliError::io(path.display().to_string()))?;
            let mut writer = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut writer, &filtered)?;
            writer
                .write_all(b"\n")
                .and_then(|()| writer.flush())
                .map_err(CliError::io(path.display().to_string()))?;
            written.push(path);
        }
        EmitFormat::Csv => {
            for cell in &cells {
                let path = out_dir.join(format!(
                    "cell{:03}_L{}_NV{}_D{}.csv",
                    cell.cell_index,
                    cell.l,
                    cell.n_v,
                    delta_label(cell.delta)
                ));
                write_series_csv(cell, &path)?;
                written.push(path);
            }
            let summary = out_dir.join("summary.csv");
            write_summary_csv(&cells, &summary)?;
            written.push(summary);
            if cells.iter().any(|c| c.series.counters.is_some()) {
                let counters = out_dir.join("counters.csv");
                write_counters_csv(&cells, &counters)?;
                written.push(counters);
            }
        }
    }
    Ok(written)
}
