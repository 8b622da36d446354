//! Merge evaluation summaries from several runs into one table.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

use crate::csvio::CsvWriter;

pub fn run(dirs: &[PathBuf], out: Option<PathBuf>) -> Result<()> {
    if dirs.is_empty() {
        return Err(efrl_core::Error::Config("compare needs at least one run directory".into()).into());
    }
    let summaries: Vec<(String, Value)> = dirs
        .iter()
        .map(|dir| {
            let path = summary_path(dir);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let value: Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok((dir.display().to_string(), value))
        })
        .collect::<Result<_>>()?;

    // comparable runs only: same grid and window
    let first = &summaries[0].1;
    for (name, s) in &summaries[1..] {
        for key in ["coarse_n", "n_total", "dt"] {
            if s[key] != first[key] {
                return Err(efrl_core::Error::Config(format!(
                    "run {name} has {key} = {}, first run has {}",
                    s[key], first[key]
                ))
                .into());
            }
        }
    }

    // every K present in the summaries, in ascending shell order
    let mut ks: Vec<String> = Vec::new();
    for (_, s) in &summaries {
        if let Some(methods) = s["methods"].as_object() {
            for m in methods.values() {
                if let Some(spec) = m["err_spectrum"].as_object() {
                    for k in spec.keys() {
                        if !ks.contains(k) {
                            ks.push(k.clone());
                        }
                    }
                }
            }
        }
    }
    ks.sort_by_key(|k| k[1..].parse::<usize>().unwrap_or(0));

    let mut header = String::from("run,variant,method,err_energy,blown_up,valid_steps");
    for k in &ks {
        header.push_str(&format!(",err_spectrum_{k}_signed,err_spectrum_{k}_abs"));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (name, s) in &summaries {
        let variant = s["variant"].as_str().unwrap_or("?").to_string();
        let Some(methods) = s["methods"].as_object() else {
            continue;
        };
        for (method, m) in methods {
            let mut row = vec![
                name.clone(),
                variant.clone(),
                method.clone(),
                render(&m["err_energy"]),
                render(&m["blown_up"]),
                render(&m["valid_steps"]),
            ];
            for k in &ks {
                row.push(render(&m["err_spectrum"][k]["signed"]));
                row.push(render(&m["err_spectrum"][k]["absolute"]));
            }
            rows.push(row);
        }
    }

    println!("{header}");
    for row in &rows {
        println!("{}", row.join(","));
    }
    if let Some(path) = out {
        let mut csv = CsvWriter::create(&path, &header)?;
        for row in &rows {
            csv.row(row)?;
        }
        csv.finish()?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn summary_path(dir: &Path) -> PathBuf {
    if dir.is_file() {
        dir.to_path_buf()
    } else if dir.join("summary.json").exists() {
        dir.join("summary.json")
    } else {
        dir.join("eval").join("summary.json")
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::Null => "nan".to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
