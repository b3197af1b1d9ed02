//! Read-only view over finished runs.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::criteria::{determinism, verdicts, Verdict};
use crate::{read_summary, BenchError, Summary};

#[derive(Debug)]
pub struct Report {
    pub runs: Vec<(PathBuf, Summary)>,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Human-readable digest: one header per run, one line per verdict.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (dir, sum) in &self.runs {
            s.push_str(&format!(
                "{}: {} digest {} ({:.1}s)\n",
                dir.display(),
                sum.experiment,
                &sum.config_digest[..12],
                sum.runtime_seconds
            ));
        }
        for v in &self.verdicts {
            s.push_str(&format!("{v}\n"));
        }
        s
    }

    /// Long format `run,experiment,metric,value`, one row per numeric field.
    pub fn long_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["run", "experiment", "metric", "value"])?;
        for (dir, sum) in &self.runs {
            let mut rows = Vec::new();
            flatten("", &serde_json::to_value(&sum.results).expect("results serialize"), &mut rows);
            rows.push(("runtime_seconds".into(), sum.runtime_seconds));
            for (metric, value) in rows {
                w.write_record([
                    dir.display().to_string(),
                    sum.experiment.clone(),
                    metric,
                    crate::experiments::num(value),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, f64)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Number(n) => out.extend(n.as_f64().map(|x| (prefix.to_string(), x))),
        Value::Bool(b) => out.push((prefix.to_string(), *b as u8 as f64)),
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        _ => {}
    }
}

/// Loads each run and applies the criteria; runs sharing a config digest are
/// also compared for byte-identical tables.
pub fn build(dirs: &[PathBuf]) -> Result<Report, BenchError> {
    if dirs.is_empty() {
        return Err(BenchError::Config("no run directories given".into()));
    }
    let mut runs = Vec::with_capacity(dirs.len());
    for d in dirs {
        runs.push((d.clone(), read_summary(d)?));
    }
    let mut out: Vec<Verdict> = runs.iter().flat_map(|(_, s)| verdicts(s)).collect();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            if runs[i].1.config_digest == runs[j].1.config_digest {
                out.push(determinism(&runs[i].0, &runs[j].0)?);
            }
        }
    }
    out.sort_by_key(|v| v.id);
    Ok(Report { runs, verdicts: out })
}

pub fn build_one(dir: &Path) -> Result<Report, BenchError> {
    build(&[dir.to_path_buf()])
}
