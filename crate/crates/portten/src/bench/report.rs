//! CSV and gnuplot output.

use std::io::Write;

use super::apply::BandwidthRow;
use super::model::{LayerRow, SummaryRow};
use crate::Result;

pub const BANDWIDTH_COLUMNS: [&str; 4] = ["size", "reps", "mean_time_s", "gb_per_s"];
pub const LAYER_COLUMNS: [&str; 5] = ["index", "type", "geometry", "mean_time_s", "checksum"];
pub const SUMMARY_COLUMNS: [&str; 3] = ["type", "total_time_s", "percent"];

const SKIPPED: &str = "skipped";

pub fn write_bandwidth_csv<W: Write>(out: W, rows: &[BandwidthRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BANDWIDTH_COLUMNS)?;
    for r in rows {
        let (time, bw) = match (r.mean_time_s, r.gb_per_s()) {
            (Some(t), Some(b)) => (format!("{t:e}"), format!("{b}")),
            _ => (SKIPPED.into(), SKIPPED.into()),
        };
        w.write_record([r.size.to_string(), r.reps.to_string(), time, bw])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_layer_csv<W: Write>(out: W, rows: &[LayerRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LAYER_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.kind.to_string(),
            r.geometry.clone(),
            format!("{:e}", r.mean_time_s),
            format!("{}", r.checksum),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([r.kind.to_string(), format!("{:e}", r.total_time_s), format!("{:.2}", r.percent)])?;
    }
    w.flush()?;
    Ok(())
}

/// Script rendering per-layer times (and the per-type summary when given)
/// as PNG bar charts next to the CSV files.
pub fn gnuplot_script(title: &str, layers_csv: &str, summary_csv: Option<&str>) -> String {
    let mut s = format!(
        "set datafile separator \",\"\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 1200,600\n\
         set style data histograms\n\
         set style fill solid 0.8 border -1\n\
         set xtics rotate by -60\n\
         set output \"{layers_csv}.png\"\n\
         set title \"{title}: per-layer time\"\n\
         set ylabel \"mean time (s)\"\n\
         plot \"{layers_csv}\" using 4:xtic(sprintf(\"%s %s\", strcol(1), strcol(2)))\n"
    );
    if let Some(summary) = summary_csv {
        s.push_str(&format!(
            "set output \"{summary}.png\"\n\
             set title \"{title}: time by layer type\"\n\
             set ylabel \"share of total (%)\"\n\
             plot \"{summary}\" using 3:xtic(1)\n"
        ));
    }
    s
}

/// Log-log bandwidth against tensor size.
pub fn gnuplot_bandwidth_script(title: &str, bandwidth_csv: &str) -> String {
    format!(
        "set datafile separator \",\"\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 900,600\n\
         set output \"{bandwidth_csv}.png\"\n\
         set logscale xy\n\
         set title \"{title}\"\n\
         set xlabel \"floats per launch\"\n\
         set ylabel \"GB/s\"\n\
         plot \"{bandwidth_csv}\" using 1:4 with linespoints\n"
    )
}
