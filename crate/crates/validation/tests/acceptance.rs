//! Acceptance gate. Prints one `PASS` or `FAIL` line per criterion and exits
//! non-zero if any criterion fails. Runs without the dashboard.
//!
//! Tolerances:
//! - HR: |estimate - 60 f| <= 1 bpm clean, <= 2 bpm with noise sigma 2, at
//!   most 10 s per case.
//! - RR: |estimate - 60 f| <= 0.5 breaths/min; a stationary tone gives
//!   running mean and running max within 0.02 Hz.
//! - SpO₂: 100 - 5R within 1e-6.
//! - Agreement report: person 1 HR MAE 7.667 +- 0.001 and person 2 SpO₂
//!   MAE 2.29 +- 0.01.
//! - Triage: 1000 patients, all checks within 5 s.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta};
use clap::Parser;
use serde_json::{json, Value};
use vitalcam_cli::args::Cli;
use vitalcam_core::dialog::{Choice, DialogError, DialogGraph, DialogSession, Node};
use vitalcam_core::frameio::encode_frame;
use vitalcam_core::roi::RoiMode;
use vitalcam_core::synth::rng::Xoshiro256StarStar;
use vitalcam_core::synth::{generate, SynthSpec};
use vitalcam_core::triage::{
    rank, rank_records, score, Gender, Parameter, PatientRecord, PatientStore, RankedPatient,
    TriageConfig, WeightTable,
};
use vitalcam_core::vitals::{
    estimate_hr, estimate_rr, estimate_spo2, rr_fusion, HrConfig, RrConfig, Spo2Calibration,
};
use vitalcam_service::{AppState, ServiceConfig};

/// Outcome of one criterion: the failed checks, plus a summary either way.
struct Verdict {
    failures: Vec<String>,
    summary: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            summary: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failures.push(what.clone());
        }
        self.summary.push(what);
    }
}

fn hr_case(freq: f64, sigma: f64, seed: u64) -> (f64, Duration) {
    let spec = SynthSpec {
        width: 64,
        height: 64,
        fps: 30.0,
        duration: 30.0,
        hr_freq: Some(freq),
        hr_amp: 2.0,
        noise_sigma: sigma,
        drift_per_s: 0.5,
        ..SynthSpec::default()
    };
    let started = Instant::now();
    let seq = generate(&spec, seed).expect("valid spec");
    let hr = estimate_hr(&seq, &RoiMode::default(), &HrConfig::default())
        .expect("estimate")
        .value;
    (hr, started.elapsed())
}

fn hr_oracle() -> Verdict {
    let mut v = Verdict::new();
    let mut worst = [0.0f64; 2];
    let mut slowest = Duration::ZERO;
    for freq in [1.0, 1.2, 1.5, 2.0] {
        for (i, (sigma, tol)) in [(0.0, 1.0), (2.0, 2.0)].into_iter().enumerate() {
            let (hr, took) = hr_case(freq, sigma, 100 + i as u64);
            let err = (hr - 60.0 * freq).abs();
            worst[i] = worst[i].max(err);
            slowest = slowest.max(took);
            v.check(err <= tol, format!("f={freq} sigma={sigma}: {hr:.3} bpm"));
            v.check(
                took <= Duration::from_secs(10),
                format!("f={freq} sigma={sigma}: {took:?}"),
            );
        }
    }
    v.summary = vec![format!(
        "max error {:.3} bpm clean, {:.3} bpm noisy, slowest case {:.2?}",
        worst[0], worst[1], slowest
    )];
    v
}

fn rr_oracle() -> Verdict {
    let mut v = Verdict::new();
    let mut worst = 0.0f64;
    let mut widest = 0.0f64;
    for freq in [0.2, 0.25, 0.33] {
        let spec = SynthSpec {
            rr_freq: Some(freq),
            rr_amp: 3.0,
            duration: 60.0,
            ..SynthSpec::default()
        };
        let seq = generate(&spec, 9).expect("valid spec");
        let cfg = RrConfig::default();
        let rr = estimate_rr(&seq, &cfg).expect("estimate").value;
        let err = (rr - 60.0 * freq).abs();
        worst = worst.max(err);
        v.check(err <= 0.5, format!("f={freq}: {rr:.3} brpm"));
        let fusion = rr_fusion(&seq, &cfg).expect("fusion");
        let gap = fusion.running_max - fusion.running_mean;
        widest = widest.max(gap);
        v.check(gap <= 0.02, format!("f={freq}: max - mean = {gap:.4} Hz"));
    }
    v.summary = vec![format!(
        "max error {worst:.3} brpm, widest mean/max gap {widest:.4} Hz"
    )];
    v
}

fn spo2_exactness() -> Verdict {
    let mut v = Verdict::new();
    let cal = Spo2Calibration::new(100.0, 5.0).expect("valid");
    let flat = Spo2Calibration::new(100.0, 0.0).expect("valid");
    let mut last = f64::INFINITY;
    let mut worst = 0.0f64;
    for r in [0.8, 1.0, 1.5, 2.0] {
        let spec = SynthSpec {
            width: 320,
            height: 240,
            duration: 1.0,
            spo2_ratio_r: Some(r),
            ..SynthSpec::default()
        };
        let seq = generate(&spec, 0).expect("valid spec");
        let got = estimate_spo2(&seq, &cal).expect("estimate").value;
        let err = (got - (100.0 - 5.0 * r)).abs();
        worst = worst.max(err);
        v.check(err <= 1e-6, format!("R={r}: {got}"));
        v.check(got < last, format!("R={r}: not below previous {last}"));
        last = got;
        let a = estimate_spo2(&seq, &flat).expect("estimate").value;
        v.check(a == 100.0, format!("R={r}, B=0: {a}"));
    }
    v.summary = vec![format!("max error {worst:.2e}, monotone, B=0 returns A")];
    v
}

fn reference_table_report() -> Verdict {
    let mut v = Verdict::new();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/fixtures");
    let oximeter = fixtures.join("oximeter.csv");
    let televital = fixtures.join("televital.csv");
    let argv = [
        "vitalcam".as_ref(),
        "report".as_ref(),
        "--oximeter".as_ref(),
        oximeter.as_os_str(),
        "--televital".as_ref(),
        televital.as_os_str(),
        "--format".as_ref(),
        "json".as_ref(),
    ];
    let cli = Cli::try_parse_from(argv).expect("valid arguments");
    let mut stdout = Vec::new();
    let ran = vitalcam_cli::run(cli, std::io::empty(), &mut stdout);
    v.check(ran.is_ok(), format!("report command: {ran:?}"));
    let report: Value = serde_json::from_slice(&stdout).unwrap_or(Value::Null);
    let mae = |person: &str, key: &str| {
        report["persons"]
            .as_array()
            .and_then(|ps| ps.iter().find(|p| p["person"] == person))
            .and_then(|p| p["mae"][key].as_f64())
            .unwrap_or(f64::NAN)
    };
    let hr1 = mae("1", "hr");
    let spo2_2 = mae("2", "spo2");
    v.check(
        (hr1 - 7.667).abs() <= 0.001,
        format!("person 1 HR MAE {hr1:.4} (want 7.667)"),
    );
    v.check(
        (spo2_2 - 2.29).abs() <= 0.01,
        format!("person 2 SpO2 MAE {spo2_2:.4} (want 2.29)"),
    );
    v
}

fn uniform(rng: &mut Xoshiro256StarStar, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

fn random_patient(rng: &mut Xoshiro256StarStar, i: usize) -> PatientRecord {
    let bit = |rng: &mut Xoshiro256StarStar| u8::from(rng.next_f64() < 0.3);
    let mut p = PatientRecord::healthy(format!("p{i:04}"), format!("Patient {i}"));
    p.age = (rng.next_u64() % 100) as u32;
    p.gender = [Gender::Female, Gender::Male, Gender::Other][(rng.next_u64() % 3) as usize];
    p.height = uniform(rng, 140.0, 200.0);
    p.weight = uniform(rng, 40.0, 140.0);
    p.heart_rate = uniform(rng, 35.0, 150.0);
    p.respiratory_rate = uniform(rng, 5.0, 35.0);
    p.spo2 = uniform(rng, 80.0, 100.0);
    p.body_temp = uniform(rng, 35.5, 40.5);
    p.cough = bit(rng);
    p.sore_throat = bit(rng);
    p.breathing_difficulty = bit(rng);
    p.fatigue = bit(rng);
    p.preexisting_conditions = bit(rng);
    p.pregnancy = bit(rng);
    p.created_at = DateTime::UNIX_EPOCH + TimeDelta::seconds((rng.next_u64() % 50) as i64);
    p
}

fn patients(n: usize, seed: u64) -> Vec<PatientRecord> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    (0..n).map(|i| random_patient(&mut rng, i)).collect()
}

fn ids(ranked: &[RankedPatient]) -> Vec<&str> {
    ranked.iter().map(|r| r.patient.id.as_str()).collect()
}

/// Moves `v` further from the middle of its normal band.
fn away_from(v: f64, lo: f64, hi: f64, step: f64) -> f64 {
    if v < 0.5 * (lo + hi) {
        (v - step).max(0.0)
    } else {
        v + step
    }
}

fn triage_properties() -> Verdict {
    let mut v = Verdict::new();
    let started = Instant::now();
    let records = patients(1000, 42);
    let mut rng = Xoshiro256StarStar::seed_from_u64(43);
    let weights = WeightTable(
        Parameter::ALL
            .into_iter()
            .map(|p| (p, uniform(&mut rng, 0.1, 3.0)))
            .collect(),
    );
    let cfg = TriageConfig::with_weights(weights);

    let ranked = rank_records(&records, &cfg).expect("rank");
    let got: BTreeSet<&str> = ids(&ranked).into_iter().collect();
    let want: BTreeSet<&str> = records.iter().map(|p| p.id.as_str()).collect();
    v.check(
        ranked.len() == records.len() && got == want,
        "rank is a permutation of the input",
    );
    v.check(
        ranked
            .windows(2)
            .all(|w| w[0].triage.score >= w[1].triage.score),
        "scores descend",
    );

    for k in [0.25, 3.0, 17.5] {
        let scaled = rank_records(&records, &TriageConfig::with_weights(cfg.weights.scaled(k)))
            .expect("rank");
        v.check(
            ids(&scaled) == ids(&ranked),
            format!("order unchanged at k={k}"),
        );
    }

    let mut monotone = true;
    for p in &records {
        let s0 = score(p, &cfg).expect("score").score;
        let bumped = [
            PatientRecord {
                age: (p.age + 7).min(130),
                ..p.clone()
            },
            PatientRecord {
                spo2: (p.spo2 - 2.0).max(0.0),
                ..p.clone()
            },
            PatientRecord {
                body_temp: (p.body_temp + 0.6).min(45.0),
                ..p.clone()
            },
            PatientRecord {
                heart_rate: away_from(p.heart_rate, 60.0, 100.0, 6.0),
                ..p.clone()
            },
            PatientRecord {
                respiratory_rate: away_from(p.respiratory_rate, 12.0, 20.0, 2.0),
                ..p.clone()
            },
            PatientRecord {
                cough: 1,
                ..p.clone()
            },
            PatientRecord {
                fatigue: 1,
                ..p.clone()
            },
        ];
        monotone &= bumped
            .iter()
            .all(|q| score(q, &cfg).expect("score").score >= s0 - 1e-12);
    }
    v.check(
        monotone,
        "single-parameter moves toward risk never lower a score",
    );

    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("patients.json");
    let store = PatientStore::open(&path).expect("open");
    for p in &records {
        store.upsert(p.clone()).expect("upsert");
    }
    let before = store.all();
    let bytes = std::fs::read(&path).expect("read");
    drop(store);
    let reopened = PatientStore::open(&path).expect("reopen");
    v.check(
        reopened.all() == before,
        "store reload equals the saved records",
    );
    reopened
        .upsert(PatientRecord::healthy("zz-scratch", "Scratch"))
        .expect("upsert");
    reopened.delete("zz-scratch").expect("delete");
    v.check(
        std::fs::read(&path).expect("read") == bytes,
        "store rewrite is byte-identical",
    );

    let took = started.elapsed();
    v.check(took <= Duration::from_secs(5), format!("took {took:.2?}"));
    v.summary = vec![format!("1000 patients in {took:.2?}")];
    v
}

fn pick(rng: &mut Xoshiro256StarStar, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn random_graph(rng: &mut Xoshiro256StarStar) -> DialogGraph {
    let n = 2 + pick(rng, 14);
    let id = |i: usize| format!("n{i}");
    let mut nodes = BTreeMap::new();
    for i in 0..n {
        let choices: Vec<Choice> = (0..pick(rng, 4))
            .map(|c| Choice {
                label: format!("c{c}"),
                target: id(pick(rng, n)),
            })
            .collect();
        let mut default_target = (pick(rng, 3) > 0).then(|| id(pick(rng, n)));
        if choices.is_empty() && default_target.as_deref() == Some(id(i).as_str()) {
            default_target = Some(id((i + 1) % n));
        }
        nodes.insert(
            id(i),
            Node {
                text: format!("node {i}"),
                choices,
                default_target,
                is_checkpoint: pick(rng, 3) == 0,
            },
        );
    }
    DialogGraph::new(nodes, id(pick(rng, n))).expect("generated graph is valid")
}

fn linear(ids: &[&str], checkpoints: &[&str]) -> DialogGraph {
    let nodes = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let node = Node {
                text: id.to_string(),
                choices: vec![],
                default_target: ids.get(i + 1).map(|s| s.to_string()),
                is_checkpoint: checkpoints.contains(id),
            };
            (id.to_string(), node)
        })
        .collect();
    DialogGraph::new(nodes, ids[0]).expect("valid")
}

fn dialog_properties() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = Xoshiro256StarStar::seed_from_u64(7);
    let (mut inside, mut stack_ok, mut failed_moves_inert) = (true, true, true);
    let mut steps = 0usize;
    for _ in 0..10 {
        let graph = Arc::new(random_graph(&mut rng));
        let mut s = DialogSession::start(Arc::clone(&graph));
        for _ in 0..10_000 {
            let before = s.current().to_string();
            let node = s.current_node().clone();
            let roll = pick(&mut rng, 10);
            let outcome = if roll == 0 {
                s.return_to_checkpoint().map(|_| ())
            } else if !node.choices.is_empty() && roll < 8 {
                let label = node.choices[pick(&mut rng, node.choices.len())]
                    .label
                    .clone();
                s.step(Some(&label)).map(|_| ())
            } else {
                s.step(None).map(|_| ())
            };
            if outcome.is_err() {
                failed_moves_inert &= s.current() == before;
            }
            inside &= graph.contains(s.current());
            stack_ok &= s
                .checkpoints()
                .iter()
                .all(|c| graph.node(c).is_some_and(|n| n.is_checkpoint));
            steps += 1;
            if s.is_ended() {
                s = DialogSession::start(Arc::clone(&graph));
            }
        }
    }
    v.check(inside, "walks never leave the graph");
    v.check(stack_ok, "checkpoint stack holds only checkpoint nodes");
    v.check(
        failed_moves_inert,
        "rejected moves leave the session unchanged",
    );

    let mut s = DialogSession::start(Arc::new(linear(
        &["a", "k1", "b", "k2", "c", "end"],
        &["k1", "k2"],
    )));
    for _ in 0..4 {
        let _ = s.step(None);
    }
    let mut trail = vec![s.current().to_string()];
    for _ in 0..3 {
        let _ = s.return_to_checkpoint();
        trail.push(s.current().to_string());
    }
    v.check(
        trail == ["c", "k2", "k1", "k1"],
        format!("hand-walked returns {trail:?}"),
    );
    let mut none = DialogSession::start(Arc::new(linear(&["a", "b"], &[])));
    v.check(
        none.return_to_checkpoint().err() == Some(DialogError::NoCheckpoint),
        "return without checkpoint is an error",
    );
    v.summary = vec![format!("{steps} random steps, hand-walked trail {trail:?}")];
    v
}

async fn service_contract_async() -> Verdict {
    let mut v = Verdict::new();
    let dir = tempfile::tempdir().expect("tempdir");
    let config = ServiceConfig {
        store_path: dir.path().join("patients.json"),
        workers: 2,
        ..ServiceConfig::default()
    };
    let state = AppState::new(config).expect("state");
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .expect("bind");
    let base = format!("http://{}", listener.local_addr().expect("addr"));
    tokio::spawn(vitalcam_service::serve_on(
        listener,
        state,
        std::future::pending(),
    ));
    let client = reqwest::Client::new();

    let spec = SynthSpec {
        hr_freq: Some(1.2),
        hr_amp: 2.0,
        noise_sigma: 2.0,
        drift_per_s: 0.5,
        ..SynthSpec::default()
    };
    let frames: Vec<String> = generate(&spec, 5)
        .expect("valid spec")
        .frames()
        .iter()
        .map(encode_frame)
        .collect();
    let resp = client
        .post(format!("{base}/v1/vitals/jobs"))
        .json(&json!({ "kind": "hr", "fps": 30.0, "frames": frames }))
        .send()
        .await
        .expect("post");
    v.check(
        resp.status() == 202,
        format!("submit status {}", resp.status()),
    );
    let job_id = resp.json::<Value>().await.expect("json")["job_id"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    let deadline = Instant::now() + Duration::from_secs(30);
    let mut job = Value::Null;
    while Instant::now() < deadline {
        job = client
            .get(format!("{base}/v1/vitals/jobs/{job_id}"))
            .send()
            .await
            .expect("get")
            .json()
            .await
            .expect("json");
        if job["state"] == "done" || job["state"] == "failed" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let hr = job["result"]["hr_bpm"].as_f64().unwrap_or(f64::NAN);
    v.check(
        job["state"] == "done",
        format!("job state {}", job["state"]),
    );
    v.check((hr - 72.0).abs() <= 2.0, format!("job hr_bpm {hr:.3}"));

    for p in patients(40, 11) {
        let resp = client
            .put(format!("{base}/v1/patients/{}", p.id))
            .json(&p)
            .send()
            .await
            .expect("put");
        v.check(
            resp.status() == 201,
            format!("put {} status {}", p.id, resp.status()),
        );
    }
    let listed: Vec<PatientRecord> = client
        .get(format!("{base}/v1/patients"))
        .send()
        .await
        .expect("get")
        .json()
        .await
        .expect("json");
    let sorted: Vec<Value> = client
        .get(format!("{base}/v1/patients?sort=score"))
        .send()
        .await
        .expect("get")
        .json()
        .await
        .expect("json");
    let http_order: Vec<&str> = sorted
        .iter()
        .filter_map(|r| r["patient"]["id"].as_str())
        .collect();
    let library = rank(&listed, &TriageConfig::default()).expect("rank");
    let lib_order: Vec<&str> = library.iter().map(|s| s.patient_id.as_str()).collect();
    v.check(
        listed.len() == 40 && http_order == lib_order,
        "HTTP ordering equals library rank",
    );
    v.summary = vec![format!(
        "job {} with hr_bpm {hr:.3}, {} patients ranked identically",
        job["state"],
        lib_order.len()
    )];
    v
}

fn service_contract() -> Verdict {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("runtime")
        .block_on(service_contract_async())
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("hr oracle", hr_oracle),
        ("rr oracle", rr_oracle),
        ("spo2 exactness", spo2_exactness),
        ("reference-table report", reference_table_report),
        ("triage properties", triage_properties),
        ("dialog properties", dialog_properties),
        ("service contract", service_contract),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Verdict {
                failures: vec![msg],
                summary: vec![],
            }
        });
        if verdict.failures.is_empty() {
            println!("PASS {name}: {}", verdict.summary.join("; "));
        } else {
            failed += 1;
            println!("FAIL {name}: {}", verdict.failures.join("; "));
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
