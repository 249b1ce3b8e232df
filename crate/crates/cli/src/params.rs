//! The `params` subcommand: show the published model-constant table or refit
//! the constants from extrapolated utilization data. Refits are written as a
//! new table; the published table ships inside the binary and is never
//! overwritten.

use std::path::Path;

use sth_core::{
    refit_params, CorrectionPair, DeltaWindow, FitObservation, FitParams, RefitOutcome,
    UpdateMode,
};

use crate::error::{CliError, Result};

pub fn published_table_text() -> &'static str {
    sth_core::fits::PUBLISHED_TABLE
}

/// Parses refit data: a CSV with header `mode,n_v,delta,u_inf,stderr`.
/// `mode` is `conservative`/`random-deposition` (or `rd`), `delta` a number
/// or `unconstrained`.
pub fn read_observations(path: &Path) -> Result<Vec<FitObservation>> {
    let text =
        std::fs::read_to_string(path).map_err(CliError::io(path.display().to_string()))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.starts_with("mode") {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 4 {
            return Err(CliError::Parse {
                path: path.display().to_string(),
                message: format!("line {}: expected mode,n_v,delta,u_inf[,stderr]", lineno + 1),
            });
        }
        let bad = |message: String| CliError::Parse {
            path: path.display().to_string(),
            message: format!("line {}: {message}", lineno + 1),
        };
        let mode = match fields[0] {
            "conservative" => UpdateMode::Conservative,
            "random-deposition" | "rd" => UpdateMode::RandomDeposition,
            other => return Err(bad(format!("unknown mode {other:?}"))),
        };
        let sites_per_pe: u64 = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad n_v {:?}", fields[1])))?;
        let window = if fields[2] == "unconstrained" || fields[2] == "inf" {
            DeltaWindow::Unconstrained
        } else {
            DeltaWindow::Finite(
                fields[2]
                    .parse()
                    .map_err(|_| bad(format!("bad delta {:?}", fields[2])))?,
            )
        };
        let u_inf: f64 = fields[3]
            .parse()
            .map_err(|_| bad(format!("bad u_inf {:?}", fields[3])))?;
        let stderr: f64 = if fields.len() > 4 && !fields[4].is_empty() {
            fields[4]
                .parse()
                .map_err(|_| bad(format!("bad stderr {:?}", fields[4])))?
        } else {
            0.0
        };
        rows.push(FitObservation {
            mode,
            sites_per_pe,
            window,
            u_inf,
            stderr,
        });
    }
    Ok(rows)
}

fn render_pair(out: &mut String, base: &str, pair: &CorrectionPair) {
    out.push_str(&format!("{base}.amp1 = {}\n", pair.amp1));
    out.push_str(&format!("{base}.exp1 = {}\n", pair.exp1));
    out.push_str(&format!("{base}.amp2 = {}\n", pair.amp2));
    out.push_str(&format!("{base}.exp2 = {}\n\n", pair.exp2));
}

/// Renders refitted constants in the same key-value layout as the published
/// table.
pub fn render_params(params: &FitParams, outcome: &RefitOutcome) -> String {
    let mut out = String::from("# Refitted composite-utilization constants.\n");
    for stage in &outcome.stages {
        out.push_str(&format!(
            "# stage {}: {} points, {}{}\n",
            stage.name,
            stage.n_points,
            if stage.refitted { "refitted" } else { "kept published values" },
            if stage.refitted {
                format!(
                    ", rms residual {:.3e}{}",
                    stage.residual_rms,
                    if stage.converged { "" } else { ", NOT CONVERGED" }
                )
            } else {
                String::new()
            }
        ));
    }
    out.push_str("\nversion = 1\n\n");
    render_pair(&mut out, "rd", &params.rd);
    render_pair(&mut out, "kpz", &params.kpz);
    render_pair(&mut out, "p.high_load", &params.p_high_load);
    render_pair(&mut out, "p.low_load", &params.p_low_load);
    render_pair(&mut out, "p.mid_load", &params.p_mid_load);
    out
}

pub fn refit_from_file(path: &Path) -> Result<(String, RefitOutcome)> {
    let observations = read_observations(path)?;
    let outcome = refit_params(&observations).map_err(CliError::Core)?;
    let text = render_params(&outcome.params, &outcome);
    Ok((text, outcome))
}
