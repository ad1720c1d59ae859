//! CSV and JSON artifacts.
//!
//! Column sets are pinned by tests; bump [`CSV_SCHEMA_VERSION`] when one changes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::engine::CountsLedger;
use crate::error::Result;
use crate::model::LinkConfig;
use crate::oracle::{self, OraclePoint};
use crate::scenario::{BoundCrossing, SweepResult};
use crate::schedule::ModeSchedule;
use crate::stats::LinkReport;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const REPORT_HEADER: &str =
    "policy,N_modes,chi,p_bar,p_total,p_total_err,g,g_err,rate_hz,rate_avg_hz,duty,eta_link";
pub const SCHEDULE_HEADER: &str = "bin_index,cell,row,col,angle,emission_ns,detect_ns,herald_ns,storage_policyA_ns,storage_policyB_ns";
pub const ORACLE_HEADER: &str =
    "chi,storage_time_us,p_s,p_si_given_s,p_i_given_nosig,p_i,g_analytic,g_exact";

/// Writes report rows with a header.
pub fn write_reports<W: Write>(out: W, rows: &[LinkReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(REPORT_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Sweep rows followed by `#`-prefixed summary lines: the linear fit of
/// p_total against the axis, and the g = 2 crossing for p̄ sweeps.
pub fn write_sweep<W: Write>(mut out: W, sweep: &SweepResult) -> Result<()> {
    write_reports(&mut out, &sweep.rows())?;
    if let Some(fit) = sweep.fit {
        writeln!(
            out,
            "# fit p_total vs {}: slope={:e} intercept={:e} r_squared={:.6}",
            sweep.axis_label, fit.slope, fit.intercept, fit.r_squared
        )?;
    }
    match sweep.crossing {
        Some(BoundCrossing::Simulated { p_bar }) => {
            writeln!(out, "# g=2 crossing (simulated): p_bar={p_bar:e}")?
        }
        Some(BoundCrossing::Analytic { p_bar, chi }) => writeln!(
            out,
            "# g=2 crossing (analytic, beyond sweep): p_bar={p_bar:e} chi={chi:.6}"
        )?,
        Some(BoundCrossing::None { min_g }) => writeln!(
            out,
            "# g=2 crossing: none for chi < 0.5 (analytic minimum g={min_g:.4})"
        )?,
        None => {}
    }
    Ok(())
}

/// One row per used mode with times under both policies.
pub fn write_schedule<W: Write>(out: W, schedule: &ModeSchedule) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCHEDULE_HEADER.split(','))?;
    for bin in 0..schedule.n_used_modes() {
        let mode = schedule.mode(bin);
        let cell = schedule.cells()[mode.cell_index];
        w.write_record([
            bin.to_string(),
            mode.cell_index.to_string(),
            cell.row.to_string(),
            cell.col.to_string(),
            mode.angle_label().to_string(),
            format!("{:.0}", schedule.emission_time(bin).as_nanos()),
            format!("{:.0}", schedule.detect_time(bin).as_nanos()),
            format!("{:.0}", schedule.herald_time(bin).as_nanos()),
            format!("{:.0}", schedule.storage_immediate(bin).as_nanos()),
            format!("{:.0}", schedule.storage_scheduled(bin).as_nanos()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Oracle table over a chi × storage-time grid.
pub fn write_oracle_table<W: Write>(
    out: W,
    config: &LinkConfig,
    chis: &[f64],
    storage_times_s: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ORACLE_HEADER.split(','))?;
    for &chi in chis {
        let c = LinkConfig {
            chi,
            ..config.clone()
        };
        for &t in storage_times_s {
            let p: OraclePoint = oracle::analytic_probs(&c, t);
            w.write_record([
                format!("{chi:e}"),
                format!("{:.3}", t * 1e6),
                format!("{:e}", p.p_s),
                format!("{:e}", p.p_si_given_s),
                format!("{:e}", p.p_i_given_nosig),
                format!("{:e}", p.p_i),
                format!("{:.6}", p.g_analytic),
                format!("{:.6}", p.g_exact),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ledger(path: &Path, ledger: &CountsLedger) -> Result<()> {
    fs::write(path, ledger.to_json_pretty() + "\n")?;
    Ok(())
}

/// Path of the ledger written next to a report: `out.csv` → `out.ledger.json`.
pub fn ledger_path_for(report_path: &Path) -> std::path::PathBuf {
    report_path.with_extension("ledger.json")
}
