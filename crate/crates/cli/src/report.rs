//! Render comparison tables from the manifests in a results directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::artifacts::{mean_and_spread, Aggregate, Manifest};
use crate::runspec::{usage, ProtocolKind};

pub fn cmd_report(dir: &Path) -> anyhow::Result<()> {
    if !dir.is_dir() {
        return Err(usage(format!("not a directory: {}", dir.display())));
    }
    let mut manifest_paths = Vec::new();
    collect_manifests(dir, &mut manifest_paths)?;
    manifest_paths.sort();

    let mut runs: Vec<(Manifest, Aggregate)> = Vec::new();
    for path in &manifest_paths {
        let manifest: Manifest = match crate::runspec::read_json(path) {
            Ok(m) => m,
            Err(err) => {
                eprintln!("warning: skipping {}: {err:#}", path.display());
                continue;
            }
        };
        let base = path.parent().expect("manifest path has a parent");
        let aggregate: Aggregate = match crate::runspec::read_json(&base.join(&manifest.aggregate))
        {
            Ok(a) => a,
            Err(err) => {
                eprintln!("warning: skipping {}: {err:#}", path.display());
                continue;
            }
        };
        runs.push((manifest, aggregate));
    }
    if runs.is_empty() {
        return Err(usage(format!(
            "no readable run manifests under {}",
            dir.display()
        )));
    }

    let mut by_protocol: BTreeMap<u8, Vec<&(Manifest, Aggregate)>> = BTreeMap::new();
    for run in &runs {
        by_protocol
            .entry(protocol_rank(run.0.protocol))
            .or_default()
            .push(run);
    }
    let mut first = true;
    for group in by_protocol.values() {
        if !first {
            println!();
        }
        first = false;
        print_protocol_table(group);
    }
    Ok(())
}

fn collect_manifests(dir: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_manifests(&path, out)?;
        } else if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(".manifest.json"))
        {
            out.push(path);
        }
    }
    Ok(())
}

fn protocol_rank(protocol: ProtocolKind) -> u8 {
    match protocol {
        ProtocolKind::Forgetting => 0,
        ProtocolKind::Clear => 1,
        ProtocolKind::PlainStream => 2,
    }
}

/// Sort prototype-replay columns by descending rho, then the baselines.
fn case_key(manifest: &Manifest) -> (u8, i64, String) {
    let strategy_rank = match manifest.strategy.as_str() {
        "prototype-replay" => 0,
        "naive-incremental" => 1,
        "experience-replay" => 2,
        _ => 3,
    };
    let rho_rank = manifest
        .rho
        .map(|rho| -(rho * 1e9).round() as i64)
        .unwrap_or(0);
    (strategy_rank, rho_rank, manifest.case.clone())
}

fn column_header(manifest: &Manifest) -> String {
    match manifest.rho {
        Some(rho) => format!("rho={}%", rho * 100.0),
        None => manifest.strategy.clone(),
    }
}

fn print_protocol_table(runs: &[&(Manifest, Aggregate)]) {
    let protocol = runs[0].0.protocol;
    let metric = Aggregate::primary_metric(protocol);

    let mut columns: Vec<(String, String)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut keyed: Vec<(&Manifest, (u8, i64, String))> =
        runs.iter().map(|(m, _)| (m, case_key(m))).collect();
    keyed.sort_by(|a, b| a.1.cmp(&b.1));
    for (manifest, _) in keyed {
        if seen.insert(manifest.case.clone()) {
            columns.push((manifest.case.clone(), column_header(manifest)));
        }
    }

    let mut datasets: Vec<String> = runs.iter().map(|(m, _)| m.data.clone()).collect();
    datasets.sort();
    datasets.dedup();

    let mut cells: Vec<Vec<String>> = Vec::new();
    for data in &datasets {
        let mut row = vec![data.clone()];
        for (case, _) in &columns {
            let values: Vec<f64> = runs
                .iter()
                .filter(|(m, _)| &m.data == data && &m.case == case)
                .filter_map(|(_, a)| {
                    a.metrics()
                        .into_iter()
                        .find(|(name, _)| *name == metric)
                        .map(|(_, v)| v)
                })
                .collect();
            if values.is_empty() {
                row.push("-".to_string());
            } else {
                let (mean, spread) = mean_and_spread(&values);
                row.push(format!("{mean:.4} +- {spread:.4}"));
            }
        }
        cells.push(row);
    }

    println!("protocol: {protocol}  metric: {metric} (mean +- spread over seeds)");
    let mut header = vec!["data".to_string()];
    header.extend(columns.iter().map(|(_, h)| h.clone()));
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    print_row(&header, &widths);
    for row in &cells {
        print_row(row, &widths);
    }
}

fn print_row(row: &[String], widths: &[usize]) {
    let mut line = String::new();
    for (i, cell) in row.iter().enumerate() {
        if i > 0 {
            line.push_str("  ");
        }
        if i == 0 {
            line.push_str(&format!("{cell:<width$}", width = widths[i]));
        } else {
            line.push_str(&format!("{cell:>width$}", width = widths[i]));
        }
    }
    println!("{}", line.trim_end());
}
