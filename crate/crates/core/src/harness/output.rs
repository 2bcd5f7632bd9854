//! Files written at the end of a run.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::advisor::replay::{ConversationEntry, EntryKind};

use super::metrics::TelemetryRow;
use super::RunOutput;

pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const CONVERSATION_LOG: &str = "conversation.log";
pub const CONVERSATION_RECORD: &str = "conversation.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const SCENARIO_FILE: &str = "scenario.json";

/// Transcript-style line: `t = 3.92s: Prompt ([0], '')`.
pub fn conversation_line(entry: &ConversationEntry) -> String {
    let kind = match entry.kind {
        EntryKind::Prompt => "Prompt",
        EntryKind::Response => "Response",
    };
    format!("t = {:.2}s: {kind} {}", entry.t, entry.text)
}

pub fn write_telemetry(rows: &[TelemetryRow], writer: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes telemetry, conversation, metrics and the resolved scenario into
/// `dir`, plus one SVG per axis when `plot` is set. Returns the paths written.
pub fn emit_outputs(run: &RunOutput, dir: &Path, plot: bool) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(TELEMETRY_FILE);
    write_telemetry(&run.telemetry, BufWriter::new(File::create(&path)?)).map_err(std::io::Error::other)?;
    written.push(path);

    let path = dir.join(CONVERSATION_LOG);
    let mut log = BufWriter::new(File::create(&path)?);
    for entry in &run.conversation {
        writeln!(log, "{}", conversation_line(entry))?;
    }
    log.flush()?;
    written.push(path);

    let path = dir.join(CONVERSATION_RECORD);
    let mut rec = BufWriter::new(File::create(&path)?);
    for entry in &run.conversation {
        writeln!(rec, "{}", serde_json::to_string(entry)?)?;
    }
    rec.flush()?;
    written.push(path);

    let path = dir.join(METRICS_FILE);
    fs::write(&path, serde_json::to_string_pretty(&run.metrics)? + "\n")?;
    written.push(path);

    let path = dir.join(SCENARIO_FILE);
    fs::write(&path, serde_json::to_string_pretty(&run.spec)? + "\n")?;
    written.push(path);

    if plot {
        for (axis, pick) in [("x", 0usize), ("y", 1), ("z", 2)] {
            let path = dir.join(format!("position_{axis}.svg"));
            fs::write(&path, axis_plot(&run.telemetry, axis, pick))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Position and reference on one axis against time, as a standalone SVG.
pub fn axis_plot(rows: &[TelemetryRow], axis: &str, index: usize) -> String {
    const W: f64 = 800.0;
    const H: f64 = 300.0;
    const PAD: f64 = 40.0;
    let pick = |r: &TelemetryRow| match index {
        0 => (r.pos_x, r.ref_x),
        1 => (r.pos_y, r.ref_y),
        _ => (r.pos_z, r.ref_z),
    };
    let t_max = rows.last().map_or(1.0, |r| r.t).max(1e-9);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        let (p, q) = pick(r);
        lo = lo.min(p).min(q);
        hi = hi.max(p).max(q);
    }
    if !(lo < hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    let sx = |t: f64| PAD + t / t_max * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);

    // thin out long runs to roughly one point per pixel
    let stride = (rows.len() / (W as usize)).max(1);
    let mut actual = String::new();
    let mut reference = String::new();
    for r in rows.iter().step_by(stride) {
        let (p, q) = pick(r);
        let _ = write!(actual, "{:.1},{:.1} ", sx(r.t), sy(p));
        let _ = write!(reference, "{:.1},{:.1} ", sx(r.t), sy(q));
    }

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black" stroke-width="1"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(svg, r#"<polyline points="{reference}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#);
    let _ = writeln!(svg, r#"<polyline points="{actual}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="20" font-size="14">{axis} position [m] vs time [s] (dashed: reference)</text>"#
    );
    let _ = writeln!(svg, r#"<text x="4" y="{}" font-size="11">{hi:.2}</text>"#, PAD + 4.0);
    let _ = writeln!(svg, r#"<text x="4" y="{}" font-size="11">{lo:.2}</text>"#, H - PAD);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11">{t_max:.0}</text>"#, W - PAD - 10.0, H - PAD + 16.0);
    svg.push_str("</svg>\n");
    svg
}
