//! Grid execution: fan (case, seed) pairs out over worker threads and write
//! one artifact set per run.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;

use protoreplay::engine::write_step_reports;
use protoreplay::eval::{
    make_clear_stream, memory_report, mse, r2, run_clear_protocol, run_forgetting_experiment,
    ClearStream,
};
use protoreplay::stream::{batches_from_samples, DEFAULT_BATCH_SIZE};
use protoreplay::{Engine64, Sample64};

use crate::artifacts::{
    config_digest, summarize_case, write_json_pretty, Aggregate, Comparison, Manifest,
};
use crate::runspec::{build_cases, ProtocolKind, RunCase, RunSpec};
use crate::RunArgs;

pub fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let spec = RunSpec::resolve(args)?;
    let out = spec.out_dir()?;
    let dataset = spec.load_dataset()?;
    let cases = build_cases(&spec)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    // The clear protocol's sequential split does not depend on the seed,
    // so build it once and share it across workers.
    let clear_stream = match spec.protocol {
        ProtocolKind::Clear => Some(make_clear_stream(&dataset, &spec.clear)?),
        _ => None,
    };

    let jobs: Vec<(&RunCase, u64)> = cases
        .iter()
        .flat_map(|case| spec.seeds.iter().map(move |&seed| (case, seed)))
        .collect();
    let results: Vec<anyhow::Result<(Manifest, Aggregate)>> = jobs
        .par_iter()
        .map(|(case, seed)| {
            run_one(&spec, &dataset, clear_stream.as_ref(), case, *seed, &out)
                .with_context(|| format!("case {} seed {seed}", case.label))
        })
        .collect();

    let mut runs: Vec<(Manifest, Aggregate)> = Vec::with_capacity(results.len());
    for result in results {
        runs.push(result?);
    }

    let primary = Aggregate::primary_metric(spec.protocol);
    for (manifest, aggregate) in &runs {
        let value = aggregate
            .metrics()
            .into_iter()
            .find(|(name, _)| *name == primary)
            .map(|(_, v)| v)
            .unwrap_or(f64::NAN);
        println!(
            "{} seed {}: {primary} {value:.4}",
            manifest.case, manifest.seed
        );
    }

    let comparison = build_comparison(&spec, &cases, &runs);
    write_json_pretty(&out.join("comparison.json"), &comparison)?;
    println!("wrote {} runs to {}", runs.len(), out.display());
    Ok(())
}

fn build_comparison(
    spec: &RunSpec,
    cases: &[RunCase],
    runs: &[(Manifest, Aggregate)],
) -> Comparison {
    let mut summaries = Vec::with_capacity(cases.len());
    for case in cases {
        let case_runs: Vec<(u64, Aggregate)> = runs
            .iter()
            .filter(|(m, _)| m.case == case.label)
            .map(|(m, a)| (m.seed, a.clone()))
            .collect();
        summaries.push(summarize_case(
            &case.label,
            &case.strategy_name,
            case.rho,
            &case_runs,
        ));
    }
    Comparison {
        protocol: spec.protocol,
        data: spec.data.clone(),
        primary_metric: Aggregate::primary_metric(spec.protocol).to_string(),
        cases: summaries,
    }
}

fn run_one(
    spec: &RunSpec,
    dataset: &[Sample64],
    clear_stream: Option<&ClearStream<f64>>,
    case: &RunCase,
    seed: u64,
    out: &Path,
) -> anyhow::Result<(Manifest, Aggregate)> {
    let dir = out.join(&case.label);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = format!("seed-{seed}");

    let (aggregate, trace) = match spec.protocol {
        ProtocolKind::Forgetting => run_forgetting(spec, dataset, case, seed)?,
        ProtocolKind::Clear => {
            let stream = clear_stream.expect("clear stream prepared for clear protocol");
            run_clear(spec, stream, case, seed)?
        }
        ProtocolKind::PlainStream => run_plain_stream(spec, dataset, case, seed)?,
    };

    let aggregate_name = format!("{stem}.aggregate.json");
    let trace_name = format!("{stem}.trace.csv");
    write_json_pretty(&dir.join(&aggregate_name), &aggregate)?;
    fs::write(dir.join(&trace_name), trace)
        .with_context(|| format!("writing {}", dir.join(&trace_name).display()))?;

    let manifest = Manifest {
        case: case.label.clone(),
        strategy: case.strategy_name.clone(),
        rho: case.rho,
        seed,
        protocol: spec.protocol,
        data: spec.data.clone(),
        config_sha256: config_digest(spec, &case.config),
        aggregate: aggregate_name,
        trace: trace_name,
    };
    write_json_pretty(&dir.join(format!("{stem}.manifest.json")), &manifest)?;
    Ok((manifest, aggregate))
}

fn run_forgetting(
    spec: &RunSpec,
    dataset: &[Sample64],
    case: &RunCase,
    seed: u64,
) -> anyhow::Result<(Aggregate, String)> {
    let summary = run_forgetting_experiment(&case.config, dataset, &spec.forgetting, &[seed])?;
    let report = &summary.per_seed[0];
    let mut trace = String::from("batch,test_mse\n");
    for (batch, value) in report.mse_trace.iter().enumerate() {
        writeln!(trace, "{batch},{value}").expect("string write");
    }
    let aggregate = Aggregate::Forgetting {
        data: spec.data.clone(),
        case: case.label.clone(),
        seed,
        mse_before: report.mse_before,
        mse_during: report.mse_during,
        degradation_index: report.degradation_index,
        mse_final: report.mse_final,
        r2_final: report.r2_final,
    };
    Ok((aggregate, trace))
}

fn run_clear(
    spec: &RunSpec,
    stream: &ClearStream<f64>,
    case: &RunCase,
    seed: u64,
) -> anyhow::Result<(Aggregate, String)> {
    let mut config = case.config.clone();
    config.seed = seed;
    let report = run_clear_protocol(&config, stream, &spec.clear)?;
    let mut trace = String::from("pass,warmup_mse\n");
    for (pass, value) in report.warmup_error_trace.iter().enumerate() {
        writeln!(trace, "{pass},{value}").expect("string write");
    }
    let aggregate = Aggregate::Clear {
        data: spec.data.clone(),
        case: case.label.clone(),
        seed,
        warmup_passes: report.warmup_passes,
        warmup_error_before: report.warmup_error_before,
        warmup_error_after: report.warmup_error_after,
        forgetting_ratio_raw: report.forgetting_ratio_raw,
        forgetting_ratio: report.forgetting_ratio,
        prediction_error: report.prediction_error,
    };
    Ok((aggregate, trace))
}

fn run_plain_stream(
    spec: &RunSpec,
    dataset: &[Sample64],
    case: &RunCase,
    seed: u64,
) -> anyhow::Result<(Aggregate, String)> {
    let mut config = case.config.clone();
    config.seed = seed;
    let input_dim = dataset[0].dim();
    let mut engine = Engine64::new(config, input_dim)?;
    let batches = batches_from_samples(dataset, DEFAULT_BATCH_SIZE)?;
    let mut reports = Vec::with_capacity(batches.len());
    for batch in &batches {
        reports.push(engine.process_labeled_batch(batch)?);
    }

    let mut trace = Vec::new();
    write_step_reports(&mut trace, &reports)?;
    let trace = String::from_utf8(trace).expect("csv output is utf-8");

    let features: Vec<Vec<f64>> = dataset.iter().map(|s| s.features.clone()).collect();
    let targets: Vec<f64> = dataset.iter().map(|s| s.target).collect();
    let preds = engine.predict(&features)?;
    let final_mse = mse(&preds, &targets)?;
    let final_r2 = r2(&preds, &targets)?;
    let memory = memory_report(engine.prototype_count(), engine.samples_seen())?;

    let losses: Vec<f64> = reports.iter().filter_map(|r| r.train_loss).collect();
    let mean_train_loss = if losses.is_empty() {
        None
    } else {
        Some(losses.iter().sum::<f64>() / losses.len() as f64)
    };
    let aggregate = Aggregate::PlainStream {
        data: spec.data.clone(),
        case: case.label.clone(),
        seed,
        batches: reports.len() as u64,
        samples: engine.samples_seen(),
        retrained_batches: reports.iter().filter(|r| r.retrained).count() as u64,
        skipped_batches: reports.iter().filter(|r| r.skipped_error.is_some()).count() as u64,
        prototype_count: engine.prototype_count(),
        pd_ratio_percent: memory.pd_ratio_percent,
        mean_train_loss,
        final_mse,
        final_r2,
    };
    Ok((aggregate, trace))
}
