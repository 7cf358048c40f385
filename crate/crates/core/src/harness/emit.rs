//! CSV rows, trace files and the run summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::config::Config;
use super::trial::TrialOutput;
use crate::error::{Error, Result};

/// One CSV row per trial. Column order is part of the output contract.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CsvRow {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub t: usize,
    pub kappa: u64,
    pub index_num: usize,
    pub log_size: usize,
    pub rounds: u64,
    pub adversary: String,
    pub inject: String,
    pub core: String,
    pub stabilization_round: Option<u64>,
    pub agreement_round: Option<u64>,
    pub cycles_to_index_agreement: Option<u64>,
    pub closure_violations: u64,
    pub cor_agreement_violations: u64,
    pub cor_validity1_violations: u64,
    pub cor_validity2_violations: u64,
    pub unread_retirement_violations: u64,
    pub mvc_agreement_violations: u64,
    pub mvc_validity_violations: u64,
    pub mvc_bottom_violations: u64,
    pub save_agreement_violations: u64,
    pub total_violations: u64,
    pub instances_completed: u64,
    pub max_non_fresh: usize,
}

impl CsvRow {
    pub fn new(config: &Config, out: &TrialOutput) -> Self {
        let m = &out.metrics;
        let v = &m.violations;
        CsvRow {
            trial: out.trial,
            seed: out.params.seed,
            n: out.params.n,
            t: out.params.t,
            kappa: out.params.kappa,
            index_num: out.params.index_num,
            log_size: out.params.log_size,
            rounds: config.rounds,
            adversary: config.adversary.to_string(),
            inject: config.inject.to_string(),
            core: config.core.to_string(),
            stabilization_round: m.stabilization_round,
            agreement_round: m.agreement_round,
            cycles_to_index_agreement: m.cycles_to_index_agreement,
            closure_violations: v.closure,
            cor_agreement_violations: v.cor_agreement,
            cor_validity1_violations: v.cor_validity1,
            cor_validity2_violations: v.cor_validity2,
            unread_retirement_violations: v.unread_retirement,
            mvc_agreement_violations: v.mvc_agreement,
            mvc_validity_violations: v.mvc_validity,
            mvc_bottom_violations: v.mvc_bottom,
            save_agreement_violations: v.save_agreement,
            total_violations: v.total(),
            instances_completed: m.instances_completed,
            max_non_fresh: m.max_non_fresh,
        }
    }
}

pub fn csv_rows(config: &Config, outputs: &[TrialOutput]) -> Vec<CsvRow> {
    outputs.iter().map(|o| CsvRow::new(config, o)).collect()
}

fn write_rows<W: Write>(w: W, rows: &[CsvRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn csv_string(rows: &[CsvRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Output {
            path: path.to_path_buf(),
            source,
        })
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    write_rows(create(path)?, rows)
}

/// Trace file path for a CSV path: `runs.csv` → `runs.trace.jsonl`.
pub fn trace_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("trace.jsonl")
}

/// One JSON line per trial header, corruption map and round record.
pub fn write_trace(path: &Path, outputs: &[TrialOutput]) -> Result<()> {
    let mut w = create(path)?;
    let io = |source| Error::Output {
        path: path.to_path_buf(),
        source,
    };
    for out in outputs {
        let header = serde_json::json!({
            "trial": out.trial,
            "params": out.params,
            "correct": out.trace.correct,
            "byz": out.trace.byz,
            "corruption": out.corruption,
        });
        writeln!(w, "{header}").map_err(io)?;
        for rec in &out.trace.rounds {
            let line = serde_json::to_string(&(out.trial, rec)).expect("record serializes");
            writeln!(w, "{line}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn median(values: &mut [u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid] as f64
    } else {
        (values[mid - 1] + values[mid]) as f64 / 2.0
    })
}

pub fn summary(outputs: &[TrialOutput]) -> String {
    let mut stab: Vec<u64> = outputs
        .iter()
        .filter_map(|o| o.metrics.stabilization_round)
        .collect();
    let mut agree: Vec<u64> = outputs
        .iter()
        .filter_map(|o| o.metrics.agreement_round)
        .collect();
    let stabilized = stab.len();
    let total: u64 = outputs.iter().map(|o| o.metrics.violations.total()).sum();
    let instances: u64 = outputs.iter().map(|o| o.metrics.instances_completed).sum();
    let show = |m: Option<f64>| m.map_or_else(|| "n/a".to_string(), |x| format!("{x}"));
    format!(
        "trials={} stabilized={} median_stabilization_round={} median_agreement_round={} \
         total_violations={} instances_completed={}",
        outputs.len(),
        stabilized,
        show(median(&mut stab)),
        show(median(&mut agree)),
        total,
        instances
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3, 1, 2]), Some(2.0));
        assert_eq!(median(&mut [4, 1, 2, 3]), Some(2.5));
    }

    #[test]
    fn trace_path_sits_beside_the_csv() {
        assert_eq!(
            trace_path(Path::new("out/runs.csv")),
            Path::new("out/runs.trace.jsonl")
        );
    }
}
