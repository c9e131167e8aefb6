//! The `vitalcam` command line. `main` parses arguments and maps errors to
//! exit codes; everything else lives here so it can be tested in-process.

pub mod args;
pub mod repl;
pub mod report;

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::Serialize;
use vitalcam_core::dialog::{self, DialogGraph, DialogSession};
use vitalcam_core::frameio;
use vitalcam_core::synth::{self, SynthSpec};
use vitalcam_core::triage::{self, PatientRecord, PatientStore, TriageConfig};
use vitalcam_core::vitals::{self, EstimateOptions};
use vitalcam_service::ServiceConfig;

use args::{
    Cli, Command, DialogArgs, EstimateArgs, ReportArgs, ReportFormat, ServeArgs, StoreArgs,
    SynthArgs, TriageAction,
};

/// Exit status for a malformed command line.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for any failure after parsing.
pub const EXIT_RUNTIME: i32 = 2;

pub fn run(cli: Cli, input: impl BufRead, mut out: impl Write) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => estimate(a, &mut out),
        Command::Synth(a) => synth_cmd(a, &mut out),
        Command::Triage(a) => triage_cmd(a.action, &mut out),
        Command::Report(a) => report_cmd(a, &mut out),
        Command::Serve(a) => serve(a),
        Command::Dialog(a) => dialog_cmd(a, input, &mut out),
    }
}

fn print_json(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn estimate(a: EstimateArgs, out: &mut impl Write) -> Result<()> {
    let seq = frameio::load_sequence(&a.frames, a.fps)
        .with_context(|| format!("cannot load frames from {}", a.frames.display()))?;
    let opts = EstimateOptions {
        roi: a.roi,
        calibration: a.cal.unwrap_or_default(),
        ..EstimateOptions::default()
    };
    let report = vitals::estimate(a.kind.into(), &seq, &opts)?;
    match a.out {
        Some(path) => {
            let mut bytes = serde_json::to_vec_pretty(&report)?;
            bytes.push(b'\n');
            std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
        }
        None => print_json(out, &report),
    }
}

fn synth_cmd(a: SynthArgs, out: &mut impl Write) -> Result<()> {
    let text = std::fs::read_to_string(&a.spec)
        .with_context(|| format!("cannot read {}", a.spec.display()))?;
    let spec: SynthSpec = serde_json::from_str(&text)
        .with_context(|| format!("invalid synth spec {}", a.spec.display()))?;
    let truth = synth::write_fixture(&a.out, &spec, a.seed, &a.cal.unwrap_or_default())?;
    print_json(out, &truth)
}

fn load_config(path: Option<&Path>) -> Result<TriageConfig> {
    match path {
        Some(p) => TriageConfig::load(p).with_context(|| format!("triage config {}", p.display())),
        None => Ok(TriageConfig::default()),
    }
}

fn open_store(a: &StoreArgs) -> Result<PatientStore> {
    PatientStore::open(&a.store).with_context(|| format!("patient store {}", a.store.display()))
}

fn read_record(path: &Path) -> Result<PatientRecord> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid patient record {}", path.display()))
}

fn triage_cmd(action: TriageAction, out: &mut impl Write) -> Result<()> {
    match action {
        TriageAction::Score {
            store,
            config,
            id,
            record,
        } => {
            let config = load_config(config.as_deref())?;
            let record = match (id, record) {
                (Some(id), _) => {
                    let path = store.context("--id needs --store")?;
                    PatientStore::open(&path)?
                        .get(&id)
                        .with_context(|| format!("not found: {id}"))?
                }
                (None, Some(path)) => read_record(&path)?,
                (None, None) => anyhow::bail!("--id or --record is required"),
            };
            print_json(out, &triage::score(&record, &config)?)
        }
        TriageAction::Rank { store, limit } => {
            let config = load_config(store.config.as_deref())?;
            let mut ranked = triage::rank_records(&open_store(&store)?.all(), &config)?;
            if let Some(n) = limit {
                ranked.truncate(n);
            }
            print_json(out, &ranked)
        }
        TriageAction::Upsert { store, record } => {
            let outcome = open_store(&store)?.upsert(read_record(&record)?)?;
            print_json(out, &outcome)
        }
        TriageAction::Delete { store, id } => {
            let removed = open_store(&store)?.delete(&id)?;
            print_json(out, &removed)
        }
        TriageAction::Search { store, name, age } => {
            let hits = open_store(&store)?.search(name.as_deref(), age)?;
            print_json(out, &hits)
        }
    }
}

fn report_cmd(a: ReportArgs, out: &mut impl Write) -> Result<()> {
    let reference = report::read_readings_file(&a.oximeter)?;
    let candidate = report::read_readings_file(&a.televital)?;
    let r = report::agreement(&reference, &candidate)?;
    match a.format {
        ReportFormat::Json => print_json(out, &r),
        ReportFormat::Table => Ok(out.write_all(r.to_table().as_bytes())?),
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::load(a.config.as_deref())?;
    if let Some(host) = a.host {
        config.host = host;
    }
    if let Some(port) = a.port {
        config.port = port;
    }
    if let Some(store) = a.store {
        config.store_path = store;
    }
    if let Some(workers) = a.workers {
        config.workers = workers;
    }
    config.validate()?;
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .try_init();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(vitalcam_service::run(config))?;
    Ok(())
}

fn dialog_cmd(a: DialogArgs, input: impl BufRead, out: &mut impl Write) -> Result<()> {
    let graph = match &a.graph {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            DialogGraph::from_json(&text)
                .with_context(|| format!("invalid dialog graph {}", path.display()))?
        }
        None => dialog::screening_graph(),
    };
    let mut session = DialogSession::start(Arc::new(graph));
    repl::run(&mut session, input, out)?;
    Ok(())
}
