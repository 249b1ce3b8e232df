//! Running a sweep and persisting its results.
//!
//! Archives are plain JSON and fully determined by (spec, master_seed): the
//! manifest carries no wall-clock data, every cell seed derives from the
//! master seed by cell index, and every trial seed from the cell seed by
//! trial index, so the same spec reproduces the same bytes at any thread
//! count. Run timing goes to stderr instead.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sth_core::{
    run_ensemble, CellConfig, DeltaWindow, EnsembleSeries, EnsembleSpec,
};

use crate::error::{CliError, Result};
use crate::spec::{ExperimentSpec, SweepCell};

/// Seed-derivation domain for cell seeds (trial seeds use the ensemble's).
const CELL_DOMAIN: u64 = 2;

pub const TOOL_NAME: &str = "sth";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub spec_sha256: String,
    pub master_seed: u64,
    pub spec: ExperimentSpec,
}

/// One sweep cell's aggregated results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTable {
    pub cell_index: u64,
    pub l: u64,
    pub n_v: u64,
    pub delta: DeltaWindow,
    pub burn_in: u64,
    pub series: EnsembleSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultArchive {
    pub manifest: Manifest,
    pub cells: Vec<CellTable>,
}

impl ResultArchive {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(CliError::io(path.display().to_string()))?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer(&mut writer, self)?;
        writer
            .write_all(b"\n")
            .and_then(|()| writer.flush())
            .map_err(CliError::io(path.display().to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ResultArchive> {
        let file = File::open(path).map_err(CliError::io(path.display().to_string()))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    /// One-line description of every table, for selection errors and
    /// listings.
    pub fn table_listing(&self) -> String {
        self.cells
            .iter()
            .map(|c| {
                format!(
                    "  cell {:>3}: L={} N_V={} delta={} trials={} steps={}",
                    c.cell_index, c.l, c.n_v, c.delta, c.series.n_trials, c.series.cell.steps
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Canonical spec hash: SHA-256 over the spec's canonical JSON encoding.
pub fn spec_hash(spec: &ExperimentSpec) -> Result<String> {
    let canonical = serde_json::to_vec(spec)?;
    let digest = Sha256::digest(&canonical);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

fn ensemble_spec_for(spec: &ExperimentSpec, cell: &SweepCell) -> EnsembleSpec {
    EnsembleSpec {
        cell: CellConfig {
            mode: spec.mode.into(),
            n_pes: cell.n_pes,
            sites_per_pe: cell.sites_per_pe,
            window: cell.window,
            steps: spec.steps,
            burn_in: spec.burn_in_for(cell),
            record_every: spec.record_every,
            randomized_spread: spec.randomized_start_spread,
        },
        n_trials: spec.trials,
        seed: sth_core::rng::derive_seed(spec.master_seed, CELL_DOMAIN, cell.index),
        instrument: spec.instrumentation,
    }
}

/// Runs every sweep cell and archives the aggregates. Refuses sweeps over the
/// PE-step budget unless the spec opts out; reports progress on stderr.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultArchive> {
    spec.validate()?;
    let planned = spec.planned_pe_steps();
    if planned > spec.max_pe_steps as u128 && !spec.allow_budget_excess {
        return Err(CliError::Resource(format!(
            "sweep plans {planned} PE-step attempts, over the budget of {} \
             (set allow_budget_excess = true to run anyway)",
            spec.max_pe_steps
        )));
    }

    let stats = spec.record_stats();
    let cells = spec.cells()?;
    let mut tables = Vec::with_capacity(cells.len());
    for cell in &cells {
        let run = ensemble_spec_for(spec, cell);
        let started = std::time::Instant::now();
        let mut series = run_ensemble(&run).map_err(|e| {
            CliError::Precondition(format!(
                "cell {} (L={} N_V={} delta={}): {e}",
                cell.index, cell.n_pes, cell.sites_per_pe, cell.window
            ))
        })?;
        series.retain_stats(&stats);
        eprintln!(
            "cell {:>3}/{}: L={} N_V={} delta={} done in {:.1}s",
            cell.index + 1,
            cells.len(),
            cell.n_pes,
            cell.sites_per_pe,
            cell.window,
            started.elapsed().as_secs_f64()
        );
        tables.push(CellTable {
            cell_index: cell.index,
            l: cell.n_pes as u64,
            n_v: cell.sites_per_pe,
            delta: cell.window,
            burn_in: run.cell.burn_in,
            series,
        });
    }

    Ok(ResultArchive {
        manifest: Manifest {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            spec_sha256: spec_hash(spec)?,
            master_seed: spec.master_seed,
            spec: spec.clone(),
        },
        cells: tables,
    })
}

/// Cell selection filters of the form `key=value` with keys `l`, `n_v`,
/// `delta`, `index`. A cell must match every filter.
#[derive(Clone, Debug, Default)]
pub struct Selection {
    filters: Vec<(String, String)>,
}

impl Selection {
    pub fn parse(items: &[String]) -> Result<Selection> {
        let mut filters = Vec::new();
        for item in items {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                CliError::Precondition(format!("selection {item:?} is not of the form key=value"))
            })?;
            let key = key.trim().to_ascii_lowercase();
            match key.as_str() {
                "l" | "n_v" | "nv" | "delta" | "index" => {
                    filters.push((key, value.trim().to_string()));
                }
                other => {
                    return Err(CliError::Precondition(format!(
                        "unknown selection key {other:?}; known keys: l, n_v, delta, index"
                    )));
                }
            }
        }
        Ok(Selection { filters })
    }

    pub fn matches(&self, cell: &CellTable) -> bool {
        self.filters.iter().all(|(key, value)| match key.as_str() {
            "l" => value.parse::<u64>() == Ok(cell.l),
            "n_v" | "nv" => value.parse::<u64>() == Ok(cell.n_v),
            "index" => value.parse::<u64>() == Ok(cell.cell_index),
            "delta" => match cell.delta {
                DeltaWindow::Unconstrained => value == "unconstrained" || value == "inf",
                DeltaWindow::Finite(w) => value.parse::<f64>() == Ok(w),
            },
            _ => false,
        })
    }

    /// The matching cells, or a precondition error listing what exists.
    pub fn select<'a>(&self, archive: &'a ResultArchive) -> Result<Vec<&'a CellTable>> {
        let picked: Vec<&CellTable> =
            archive.cells.iter().filter(|c| self.matches(c)).collect();
        if picked.is_empty() {
            return Err(CliError::Precondition(format!(
                "selection matches no table; available tables:\n{}",
                archive.table_listing()
            )));
        }
        Ok(picked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_spec() -> ExperimentSpec {
        ExperimentSpec::parse(
            r#"
mode = "conservative"
l = [8, 16]
n_v = [1]
delta = [2.0, "unconstrained"]
steps = 120
trials = 3
master_seed = 11
record_every = 2
"#,
            "smoke",
        )
        .unwrap()
    }

    #[test]
    fn smoke_archive_is_complete_and_deterministic() {
        let spec = smoke_spec();
        let a = run_experiment(&spec).unwrap();
        assert_eq!(a.cells.len(), 4);
        for cell in &a.cells {
            assert_eq!(cell.series.n_trials, 3);
            assert!(!cell.series.steps_recorded.is_empty());
        }
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a, b);
        // Cell seeds differ, so trajectories differ across cells.
        assert_ne!(
            a.cells[0].series.stat(sth_core::StatId::MeanTime).mean,
            a.cells[1].series.stat(sth_core::StatId::MeanTime).mean
        );
    }

    #[test]
    fn budget_guard_refuses_large_sweeps() {
        let mut spec = smoke_spec();
        spec.max_pe_steps = 10;
        let err = run_experiment(&spec).unwrap_err();
        assert!(matches!(err, CliError::Resource(_)));
        assert_eq!(err.exit_code(), 3);
        spec.allow_budget_excess = true;
        assert!(run_experiment(&spec).is_ok());
    }

    #[test]
    fn selection_filters_cells() {
        let spec = smoke_spec();
        let archive = run_experiment(&spec).unwrap();
        let sel = Selection::parse(&["l=8".into(), "delta=unconstrained".into()]).unwrap();
        let picked = sel.select(&archive).unwrap();
        assert_eq!(picked.len(), 1);
        assert_eq!(picked[0].l, 8);

        let none = Selection::parse(&["l=999".into()]).unwrap();
        let err = none.select(&archive).unwrap_err();
        assert!(err.to_string().contains("available tables"));
        assert!(Selection::parse(&["bogus=1".into()]).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let spec = smoke_spec();
        let archive = run_experiment(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        archive.save(&path).unwrap();
        let loaded = ResultArchive::load(&path).unwrap();
        assert_eq!(archive, loaded);
    }
}
