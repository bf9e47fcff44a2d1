use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use qtransport::experiments::{
    preset_registry, run_anderson_ensemble, run_experiment, AndersonParams, EnsembleOptions,
    EnsembleResult, RunOptions,
};
use qtransport::mapping::{synthesize_controls, ControlKind};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, site_table, OutDir};

fn build(cfg: &RunConfig) -> CliResult<qtransport::experiments::ExperimentSystem> {
    Ok(preset_registry().create(&cfg.experiment, cfg.parameters.clone())?.build()?)
}

/// Simulates the configured system and writes trajectories, envelope,
/// metrics and provenance.
pub fn run(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let system = build(cfg)?;
    let opts = RunOptions {
        side: cfg.side,
        propagator: cfg.propagator.clone(),
        envelope: cfg.envelope.clone(),
        stride: cfg.stride,
        edge_periods: cfg.edge_periods,
    };
    let result = run_experiment(&system, &opts)?;
    let dir = OutDir::create(out)?;
    let scale = system.time_scale;
    if let Some(q) = &result.quantum {
        dir.write("trajectory_quantum.csv", &site_table(q.times(), q.populations(), scale))?;
    }
    if let Some(c) = &result.circuit {
        dir.write("trajectory_circuit.csv", &site_table(c.times(), c.squared_voltages(), scale))?;
    }
    if let Some(env) = &result.envelope {
        use qtransport::analysis::SiteSeries;
        dir.write("envelope.csv", &site_table(env.times(), env.values(), scale))?;
    }
    let metrics: Map<String, Value> = result
        .metrics
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    dir.write_json("metrics.json", &Value::Object(metrics))?;
    dir.write_json("provenance.json", &cfg.provenance())?;
    for (k, v) in &result.metrics {
        println!("{k} = {v:.6}");
    }
    Ok(())
}

fn component_kind(kind: ControlKind) -> &'static str {
    match kind {
        ControlKind::Resistance => "resistance",
        ControlKind::Inductance => "inductance",
        ControlKind::Capacitance => "capacitance",
        ControlKind::Coupling => "coupling",
        ControlKind::InitialVoltage => "initial_voltage",
    }
}

/// Writes the component table and the DAC control table for the
/// configured circuit, excited at its initial site.
pub fn synth(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let system = build(cfg)?;
    let net = &system.circuit;
    let mut v0 = vec![0.0; net.n_nodes()];
    v0[system.initial_site] = 1.0;
    let result = synthesize_controls(net, &v0, &cfg.platform)?;

    let mut components = String::from("component,kind,node_a,node_b,value\n");
    let mut codes = String::from("parameter,control_voltage,code,quantization_error\n");
    for e in &result.entries {
        if e.kind != ControlKind::InitialVoltage {
            let other = e.other.map(|b| (b + 1).to_string()).unwrap_or_default();
            let value = e.target.map_or_else(|| "open".to_string(), num);
            writeln!(
                components,
                "{},{},{},{other},{value}",
                e.parameter,
                component_kind(e.kind),
                e.node + 1
            )
            .unwrap();
        }
        writeln!(
            codes,
            "{},{},{},{}",
            e.parameter,
            num(e.voltage),
            e.code,
            num(e.quantization_error)
        )
        .unwrap();
    }
    let dir = OutDir::create(out)?;
    dir.write("components.csv", &components)?;
    dir.write("dac_codes.csv", &codes)?;
    dir.write_json("provenance.json", &cfg.provenance())?;
    println!(
        "{} controls, DAC step {} V",
        result.entries.len(),
        num(result.dac_step)
    );
    Ok(())
}

fn ensemble_summary(r: &EnsembleResult, seed: u64) -> Value {
    json!({
        "delta": r.delta,
        "n_realizations": r.n_realizations,
        "seed": seed,
        "initial_site": r.initial_site + 1,
        "mean_participation_ratio": r.mean_participation_ratio,
        "return_probability": r.return_probability,
        "circuit_mean_participation_ratio": r.circuit_mean_participation_ratio,
        "circuit_return_probability": r.circuit_return_probability,
        "times": r.times,
        "variance_curve": r.variance_curve,
    })
}

fn ensemble_table(results: &[EnsembleResult], rows: impl Fn(&EnsembleResult) -> Option<&Vec<Vec<f64>>>) -> String {
    let n = results
        .first()
        .and_then(|r| rows(r))
        .and_then(|r| r.first())
        .map_or(0, Vec::len);
    let mut out = String::from("delta,t");
    for k in 1..=n {
        write!(out, ",site_{k}").unwrap();
    }
    out.push('\n');
    for r in results {
        let Some(values) = rows(r) else { continue };
        for (t, row) in r.times.iter().zip(values) {
            write!(out, "{},{}", num(r.delta), num(*t)).unwrap();
            for v in row {
                write!(out, ",{}", num(*v)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Averages disorder realizations for every configured Δ.
pub fn ensemble(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    if cfg.experiment != "anderson" {
        return Err(CliError::config(format!(
            "ensemble needs experiment = \"anderson\", got \"{}\"",
            cfg.experiment
        )));
    }
    let params: AndersonParams =
        serde_json::from_value(cfg.parameters.clone()).map_err(|e| CliError::config(e.to_string()))?;
    let mut resolved = cfg.clone();
    let mut ens = cfg.ensemble.clone().unwrap_or_default();
    if ens.deltas.is_empty() {
        ens.deltas = vec![params.delta];
    }
    resolved.ensemble = Some(ens.clone());
    let opts = EnsembleOptions {
        include_circuit: ens.include_circuit,
        envelope: cfg.envelope.clone(),
        samples: ens.samples,
    };
    let results = ens
        .deltas
        .iter()
        .map(|&delta| run_anderson_ensemble(&AndersonParams { delta, ..params.clone() }, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    let dir = OutDir::create(out)?;
    dir.write("ensemble_mean.csv", &ensemble_table(&results, |r| Some(&r.quantum_mean)))?;
    if ens.include_circuit {
        dir.write(
            "ensemble_circuit_mean.csv",
            &ensemble_table(&results, |r| r.circuit_mean.as_ref()),
        )?;
    }
    let summaries: Vec<Value> = results.iter().map(|r| ensemble_summary(r, params.seed)).collect();
    dir.write_json("ensemble_metrics.json", &json!({ "ensembles": summaries }))?;
    dir.write_json("provenance.json", &resolved.provenance())?;
    for r in &results {
        println!(
            "delta = {:.3}: return_probability = {:.4}, mean_participation_ratio = {:.4}",
            r.delta, r.return_probability, r.mean_participation_ratio
        );
    }
    Ok(())
}

/// Lists every preset with its default parameters.
pub fn presets() -> CliResult<()> {
    let registry = preset_registry();
    for (name, summary) in registry.describe() {
        let preset = registry.create(name, Value::Null)?;
        println!("{name}: {summary}");
        let params = serde_json::to_string_pretty(&preset.parameters()).expect("json serializes");
        for line in params.lines() {
            println!("    {line}");
        }
    }
    Ok(())
}
