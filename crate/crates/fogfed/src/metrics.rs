//! Plot-ready metrics emission: CSV with a stable schema, JSON with full
//! precision, and the transport-log dump.

use std::path::Path;

use crate::data::io::atomic_write;
use crate::error::Result;
use crate::sim::{RoundReport, TransportRecord};

/// Formats `x` with `sig` significant digits (CSV precision). Zero prints as
/// plain `0`; integers above the precision round in the usual way.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// The fixed CSV header for `num_fogs` fog columns:
/// `round,global_test_loss,global_test_accuracy,fog_0,…`.
pub fn csv_header(num_fogs: usize) -> String {
    let mut header = String::from("round,global_test_loss,global_test_accuracy");
    for i in 0..num_fogs {
        header.push_str(&format!(",fog_{i}"));
    }
    header
}

/// Renders the per-round metrics table: one row per completed round, reals
/// with 6 significant digits, fog columns carrying per-fog window accuracy.
pub fn metrics_csv_string(num_fogs: usize, reports: &[RoundReport]) -> String {
    let mut out = csv_header(num_fogs);
    out.push('\n');
    for report in reports {
        out.push_str(&report.round_id.to_string());
        out.push(',');
        out.push_str(&format_sig(report.global_test_loss, 6));
        out.push(',');
        out.push_str(&format_sig(report.global_test_accuracy, 6));
        for &acc in &report.per_fog_local_accuracy {
            out.push(',');
            out.push_str(&format_sig(acc, 6));
        }
        out.push('\n');
    }
    out
}

/// Full-precision JSON rendering of the round reports.
pub fn metrics_json_string(reports: &[RoundReport]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(reports)
        .expect("round reports serialize infallibly");
    s.push('\n');
    Ok(s)
}

/// Renders the transport log as CSV (`sender,receiver,msg_type,byte_len`).
pub fn transport_csv_string(records: &[TransportRecord]) -> String {
    let mut out = String::from("sender,receiver,msg_type,byte_len\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.sender, r.receiver, r.msg_type, r.byte_len
        ));
    }
    out
}

/// Writes the metrics CSV atomically.
pub fn write_metrics_csv(path: &Path, num_fogs: usize, reports: &[RoundReport]) -> Result<()> {
    atomic_write(path, metrics_csv_string(num_fogs, reports).as_bytes())
}

/// Writes the metrics JSON atomically.
pub fn write_metrics_json(path: &Path, reports: &[RoundReport]) -> Result<()> {
    atomic_write(path, metrics_json_string(reports)?.as_bytes())
}

/// Writes the transport log CSV atomically.
pub fn write_transport_csv(path: &Path, records: &[TransportRecord]) -> Result<()> {
    atomic_write(path, transport_csv_string(records).as_bytes())
}
