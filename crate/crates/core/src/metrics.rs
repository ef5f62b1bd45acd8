//! Energy integration over simulation intervals and batch aggregation.

use std::time::Duration;

use crate::error::{Error, Result};
use crate::platform::{power_at, PlatformModel};
use crate::simkernel::TimelineEvent;

/// Outcome of one simulation run.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    /// Completion time of the last runnable, in simulated seconds.
    pub makespan: f64,
    /// Joules per host, in platform file order.
    pub per_host_energy: Vec<(String, f64)>,
    pub total_energy: f64,
    /// Ordered event list; empty when timeline recording was disabled.
    pub timeline: Vec<TimelineEvent>,
    /// Measured wall-clock time of the kernel run (not simulated time).
    pub sim_wall_time: Duration,
}

impl SimulationResult {
    pub fn energy_of(&self, host_id: &str) -> Option<f64> {
        self.per_host_energy
            .iter()
            .find(|(id, _)| id == host_id)
            .map(|(_, e)| *e)
    }
}

/// Integrate host power over per-host (duration, utilization) series.
/// The series need not cover the whole run: any gap up to `makespan`
/// counts as utilization 0 and burns idle power.
pub fn integrate_energy(
    host_intervals: &[Vec<(f64, f64)>],
    platform: &PlatformModel,
    makespan: f64,
) -> Result<Vec<f64>> {
    if host_intervals.len() != platform.hosts.len() {
        return Err(Error::Domain(format!(
            "interval series for {} hosts, platform has {}",
            host_intervals.len(),
            platform.hosts.len()
        )));
    }
    let mut out = Vec::with_capacity(platform.hosts.len());
    for (host, intervals) in platform.hosts.iter().zip(host_intervals) {
        let mut energy = 0.0f64;
        let mut covered = 0.0f64;
        for &(duration, utilization) in intervals {
            if !(duration.is_finite() && duration >= 0.0) {
                return Err(Error::Domain(format!(
                    "negative interval duration {duration} on host `{}`",
                    host.id
                )));
            }
            energy += power_at(host, utilization)? * duration;
            covered += duration;
        }
        energy += host.p_idle * (makespan - covered);
        out.push(energy);
    }
    Ok(out)
}

/// One row of a batch run.
#[derive(Debug, Clone)]
pub struct BatchRow {
    pub mapping_id: String,
    pub seed: u64,
    pub strategy: String,
    pub result: SimulationResult,
}

/// Extremes and means over a batch, by column.
#[derive(Debug, Clone)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub argmin_id: String,
    pub argmax_id: String,
}

fn column_stats(rows: &[BatchRow], pick: impl Fn(&BatchRow) -> f64) -> ColumnStats {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0f64;
    let mut argmin = 0usize;
    let mut argmax = 0usize;
    for (i, row) in rows.iter().enumerate() {
        let v = pick(row);
        sum += v;
        if v < min {
            min = v;
            argmin = i;
        }
        if v > max {
            max = v;
            argmax = i;
        }
    }
    ColumnStats {
        min,
        max,
        mean: sum / rows.len() as f64,
        argmin_id: rows[argmin].mapping_id.clone(),
        argmax_id: rows[argmax].mapping_id.clone(),
    }
}

/// Batch table statistics; the argmin/argmax ids identify the best and
/// worst mappings of a sweep.
#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub rows: usize,
    pub makespan: ColumnStats,
    pub total_energy: ColumnStats,
    pub sim_wall: ColumnStats,
}

/// Aggregate a batch of results.
pub fn summarize_batch(rows: &[BatchRow]) -> Result<BatchSummary> {
    if rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(BatchSummary {
        rows: rows.len(),
        makespan: column_stats(rows, |r| r.result.makespan),
        total_energy: column_stats(rows, |r| r.result.total_energy),
        sim_wall: column_stats(rows, |r| r.result.sim_wall_time.as_secs_f64() * 1e3),
    })
}

/// Format with 9 significant digits in plain decimal notation.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (8 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// CSV header for a platform: fixed columns then one energy column per
/// host in platform file order.
pub fn csv_header(platform: &PlatformModel) -> String {
    let mut header = String::from("mapping_id,seed,strategy,makespan_s,total_energy_j,sim_wall_ms");
    for h in &platform.hosts {
        header.push_str(&format!(",energy_{}_j", h.id));
    }
    header.push('\n');
    header
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One CSV row. The `sim_wall_ms` column is pinned to zero so that
/// repeated runs produce byte-identical files; measured timing goes to
/// the log instead.
pub fn csv_row(row: &BatchRow, platform: &PlatformModel) -> String {
    let mut line = format!(
        "{},{},{},{},{},{}",
        csv_field(&row.mapping_id),
        row.seed,
        csv_field(&row.strategy),
        format_sig9(row.result.makespan),
        format_sig9(row.result.total_energy),
        format_sig9(0.0),
    );
    for h in &platform.hosts {
        let e = row.result.energy_of(&h.id).unwrap_or(0.0);
        line.push_str(&format!(",{}", format_sig9(e)));
    }
    line.push('\n');
    line
}

/// Render a whole batch: header, rows in input order, then the summary
/// block as `#` comment lines.
pub fn render_batch_csv(rows: &[BatchRow], platform: &PlatformModel) -> Result<String> {
    let summary = summarize_batch(rows)?;
    let mut out = csv_header(platform);
    for row in rows {
        out.push_str(&csv_row(row, platform));
    }
    out.push_str(&format!(
        "# min_makespan_s={} id={}\n",
        format_sig9(summary.makespan.min),
        summary.makespan.argmin_id
    ));
    out.push_str(&format!(
        "# max_makespan_s={} id={}\n",
        format_sig9(summary.makespan.max),
        summary.makespan.argmax_id
    ));
    out.push_str(&format!(
        "# mean_makespan_s={}\n",
        format_sig9(summary.makespan.mean)
    ));
    out.push_str(&format!(
        "# min_total_energy_j={} id={}\n",
        format_sig9(summary.total_energy.min),
        summary.total_energy.argmin_id
    ));
    out.push_str(&format!(
        "# max_total_energy_j={} id={}\n",
        format_sig9(summary.total_energy.max),
        summary.total_energy.argmax_id
    ));
    out.push_str(&format!(
        "# mean_total_energy_j={}\n",
        format_sig9(summary.total_energy.mean)
    ));
    Ok(out)
}
