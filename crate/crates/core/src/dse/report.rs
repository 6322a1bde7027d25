use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::pipeline::{Configuration, Funnel, MergeRecord, PointResult, Prepared};

pub const REPORT_SCHEMA: &str = "dse-report/v1";

pub const CSV_HEADER: [&str; 9] = [
    "config",
    "budget_luts",
    "latency_cycles",
    "bandwidth_bps",
    "objective_s",
    "speedup",
    "area_used",
    "comm_pct",
    "n_merged_selected",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub configuration: Configuration,
    /// All-software run time of the (possibly loop-extracted) program over
    /// its inputs, in seconds.
    pub sw_total_s: f64,
    pub functions: usize,
    pub extracted: Vec<(String, String)>,
    pub funnel: Funnel,
    pub merges: Vec<MergeRecord>,
    pub point: PointResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseReport {
    pub schema: String,
    pub program: String,
    pub seed: u64,
    pub area_model: String,
    pub configs: Vec<ConfigReport>,
}

impl ConfigReport {
    pub fn new(prep: &Prepared, point: &PointResult) -> ConfigReport {
        let mut funnel = prep.funnel;
        funnel.selected = point.hardware_merged.len();
        ConfigReport {
            configuration: prep.configuration,
            sw_total_s: prep.sw_total,
            functions: prep.module.functions.len(),
            extracted: prep.extracted.clone(),
            funnel,
            merges: prep.records.clone(),
            point: point.clone(),
        }
    }
}

impl DseReport {
    pub fn new(program: &str, seed: u64, area_model: &str, configs: Vec<ConfigReport>) -> DseReport {
        DseReport {
            schema: REPORT_SCHEMA.to_owned(),
            program: program.to_owned(),
            seed,
            area_model: area_model.to_owned(),
            configs,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Structural and arithmetic checks on a serialized report.
pub fn validate_report(json: &str) -> Result<DseReport, Vec<String>> {
    let r: DseReport = serde_json::from_str(json).map_err(|e| vec![format!("parse: {e}")])?;
    let mut errs = Vec::new();
    if r.schema != REPORT_SCHEMA {
        errs.push(format!("schema is `{}`, expected `{REPORT_SCHEMA}`", r.schema));
    }
    for c in &r.configs {
        let tag = c.configuration.name();
        if !(c.sw_total_s > 0.0) {
            errs.push(format!("{tag}: sw_total_s must be positive"));
        }
        let f = c.funnel;
        let chain = [f.ranked, f.aligned, f.verified, f.area_win, f.ep_positive, f.selected];
        if chain.windows(2).any(|w| w[1] > w[0]) {
            errs.push(format!("{tag}: funnel is not monotone: {chain:?}"));
        }
        if f.ranked != c.merges.len() {
            errs.push(format!("{tag}: funnel ranks {} candidates but lists {}", f.ranked, c.merges.len()));
        }
        if !c.configuration.merges() && !c.merges.is_empty() {
            errs.push(format!("{tag}: merge records in a configuration without merging"));
        }
        let p = &c.point;
        if p.area_used > p.platform.budget_luts {
            errs.push(format!("{tag}: area {} exceeds budget {}", p.area_used, p.platform.budget_luts));
        }
        if !(p.speedup >= 1.0 - 1e-9) {
            errs.push(format!("{tag}: speedup {} below the all-software baseline", p.speedup));
        }
        let pct = p.sw_pct + p.hw_pct + p.comm_pct;
        if p.objective_s > 0.0 && (pct - 100.0).abs() > 1e-6 {
            errs.push(format!("{tag}: time shares sum to {pct}"));
        }
        let accepted: BTreeSet<&str> = c.merges.iter().filter(|m| m.accepted).map(|m| m.name.as_str()).collect();
        for k in &p.hardware_merged {
            if !accepted.contains(k.as_str()) {
                errs.push(format!("{tag}: `{k}` selected but never accepted"));
            }
        }
        if f.selected != p.hardware_merged.len() {
            errs.push(format!("{tag}: funnel selects {} but {} are in hardware", f.selected, p.hardware_merged.len()));
        }
        for m in &c.merges {
            if m.accepted && (m.verified != Some(true) || !m.ep.is_some_and(|e| e > 0.0)) {
                errs.push(format!("{tag}: `{}` accepted without passing every filter", m.name));
            }
        }
    }
    if errs.is_empty() {
        Ok(r)
    } else {
        Err(errs)
    }
}

/// One line of a sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: Configuration,
    pub budget_luts: u64,
    pub latency_cycles: f64,
    pub bandwidth: f64,
    pub objective_s: f64,
    pub speedup: f64,
    pub area_used: u64,
    pub comm_pct: f64,
    pub n_merged_selected: usize,
}

impl SweepRow {
    pub fn new(config: Configuration, p: &PointResult) -> SweepRow {
        SweepRow {
            config,
            budget_luts: p.platform.budget_luts,
            latency_cycles: p.platform.latency_cycles,
            bandwidth: p.platform.bandwidth,
            objective_s: p.objective_s,
            speedup: p.speedup,
            area_used: p.area_used,
            comm_pct: p.comm_pct,
            n_merged_selected: p.n_merged_selected(),
        }
    }
}

pub fn write_sweep_csv(w: impl Write, rows: &[SweepRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        let bw = if r.bandwidth.is_finite() { r.bandwidth.to_string() } else { "inf".to_owned() };
        out.write_record([
            r.config.name().to_owned(),
            r.budget_luts.to_string(),
            r.latency_cycles.to_string(),
            bw,
            format!("{:e}", r.objective_s),
            format!("{:.6}", r.speedup),
            r.area_used.to_string(),
            format!("{:.4}", r.comm_pct),
            r.n_merged_selected.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv(r: impl Read) -> Result<Vec<SweepRow>, String> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let bad = |what: &str| format!("row {}: bad {what}", i + 1);
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(CSV_HEADER[k]));
        let u = |k: usize| rec[k].parse::<u64>().map_err(|_| bad(CSV_HEADER[k]));
        rows.push(SweepRow {
            config: rec[0].parse().map_err(|e: String| format!("row {}: {e}", i + 1))?,
            budget_luts: u(1)?,
            latency_cycles: f(2)?,
            bandwidth: if &rec[3] == "inf" { f64::INFINITY } else { f(3)? },
            objective_s: f(4)?,
            speedup: f(5)?,
            area_used: u(6)?,
            comm_pct: f(7)?,
            n_merged_selected: u(8)? as usize,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_unlimited_bandwidth() {
        let row = SweepRow {
            config: Configuration::FleMerging,
            budget_luts: 5000,
            latency_cycles: 25.0,
            bandwidth: f64::INFINITY,
            objective_s: 1.5e-3,
            speedup: 2.25,
            area_used: 4000,
            comm_pct: 1.5,
            n_merged_selected: 2,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[row.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("config,budget_luts,latency_cycles,bandwidth_bps,"));
        assert!(text.contains(",inf,"));
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), vec![row]);
    }
}
