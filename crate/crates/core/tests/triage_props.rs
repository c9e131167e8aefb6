use std::collections::BTreeSet;

use chrono::{DateTime, TimeDelta};
use vitalcam_core::synth::rng::Xoshiro256StarStar;
use vitalcam_core::triage::{
    rank, rank_records, score, Gender, Parameter, PatientRecord, PatientStore, RiskModel,
    TriageConfig, WeightTable,
};

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
    // Coarse timestamps so some scores tie on the creation instant too.
    p.created_at = DateTime::UNIX_EPOCH + TimeDelta::seconds((rng.next_u64() % 50) as i64);
    p
}

fn patients(n: usize, seed: u64) -> Vec<PatientRecord> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    (0..n).map(|i| random_patient(&mut rng, i)).collect()
}

fn random_weights(seed: u64) -> WeightTable {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    WeightTable(
        Parameter::ALL
            .into_iter()
            .map(|p| (p, uniform(&mut rng, 0.1, 3.0)))
            .collect(),
    )
}

/// Risk rules restated from the published defaults, independent of the
/// library's `Ramp`/`Band` types.
fn oracle_score(p: &PatientRecord, w: &WeightTable) -> f64 {
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let band = |v: f64, lo1: f64, lo0: f64, hi0: f64, hi1: f64| {
        if v < lo0 {
            clamp((lo0 - v) / (lo0 - lo1))
        } else if v > hi0 {
            clamp((v - hi0) / (hi1 - hi0))
        } else {
            0.0
        }
    };
    let bmi = p.weight / (p.height / 100.0).powi(2);
    let half_bmi = 0.5 * band(bmi, 15.0, 18.5, 30.0, 40.0);
    let risks = [
        (Parameter::Age, clamp((f64::from(p.age) - 40.0) / 40.0)),
        (Parameter::Gender, 0.0),
        (Parameter::Height, half_bmi),
        (Parameter::Weight, half_bmi),
        (
            Parameter::HeartRate,
            band(p.heart_rate, 40.0, 60.0, 100.0, 140.0),
        ),
        (
            Parameter::RespiratoryRate,
            band(p.respiratory_rate, 6.0, 12.0, 20.0, 30.0),
        ),
        (Parameter::Spo2, clamp((95.0 - p.spo2) / 10.0)),
        (Parameter::BodyTemp, clamp((p.body_temp - 37.2) / 2.3)),
        (Parameter::Cough, f64::from(p.cough)),
        (Parameter::SoreThroat, f64::from(p.sore_throat)),
        (
            Parameter::BreathingDifficulty,
            f64::from(p.breathing_difficulty),
        ),
        (Parameter::Fatigue, f64::from(p.fatigue)),
        (
            Parameter::PreexistingConditions,
            f64::from(p.preexisting_conditions),
        ),
        (Parameter::Pregnancy, f64::from(p.pregnancy)),
    ];
    risks.iter().map(|(param, r)| w.get(*param) * r).sum()
}

#[test]
fn scores_and_order_match_oracle() {
    let records = patients(50, 7);
    let weights = random_weights(8);
    let cfg = TriageConfig::with_weights(weights.clone());
    for p in &records {
        let got = score(p, &cfg).unwrap().score;
        assert!((got - oracle_score(p, &weights)).abs() < 1e-9, "{}", p.id);
    }
    let mut expected: Vec<&PatientRecord> = records.iter().collect();
    expected.sort_by(|a, b| {
        oracle_score(b, &weights)
            .total_cmp(&oracle_score(a, &weights))
            .then(a.created_at.cmp(&b.created_at))
            .then(a.id.cmp(&b.id))
    });
    let ranked: Vec<String> = rank(&records, &cfg)
        .unwrap()
        .into_iter()
        .map(|s| s.patient_id)
        .collect();
    let oracle: Vec<String> = expected.iter().map(|p| p.id.clone()).collect();
    assert_eq!(ranked, oracle);
}

#[test]
fn rank_is_a_permutation() {
    let records = patients(1000, 1);
    let ranked = rank(&records, &TriageConfig::default()).unwrap();
    let ids: BTreeSet<&str> = ranked.iter().map(|s| s.patient_id.as_str()).collect();
    let input: BTreeSet<&str> = records.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(ranked.len(), records.len());
    assert_eq!(ids, input);
    assert!(ranked.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn tied_scores_fall_back_to_age_then_id() {
    let mut a = PatientRecord::healthy("b", "B");
    let mut b = PatientRecord::healthy("a", "A");
    let c = PatientRecord::healthy("c", "C");
    a.created_at = DateTime::UNIX_EPOCH + TimeDelta::seconds(5);
    b.created_at = a.created_at;
    let ranked = rank(&[c.clone(), a, b], &TriageConfig::default()).unwrap();
    let ids: Vec<&str> = ranked.iter().map(|s| s.patient_id.as_str()).collect();
    // Equal scores; "c" is the oldest, then id order among equals.
    assert_eq!(ids, ["c", "a", "b"]);
}

#[test]
fn weight_scaling_scales_scores_and_keeps_order() {
    let records = patients(1000, 2);
    let base = TriageConfig::with_weights(random_weights(3));
    let before = rank_records(&records, &base).unwrap();
    for k in [0.25, 3.0, 17.5] {
        let scaled = TriageConfig::with_weights(base.weights.scaled(k));
        let after = rank_records(&records, &scaled).unwrap();
        let ids = |r: &[vitalcam_core::triage::RankedPatient]| {
            r.iter().map(|x| x.patient.id.clone()).collect::<Vec<_>>()
        };
        assert_eq!(ids(&before), ids(&after), "k = {k}");
        for (x, y) in before.iter().zip(&after) {
            assert!((y.triage.score - k * x.triage.score).abs() <= 1e-9 * (1.0 + y.triage.score));
        }
    }
}

#[test]
fn moving_toward_risk_never_lowers_score() {
    let cfg = TriageConfig::with_weights(random_weights(4));
    for p in patients(200, 5) {
        let s0 = score(&p, &cfg).unwrap().score;
        let bumped: Vec<PatientRecord> = vec![
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
                weight: away_from_bmi(&p, 8.0),
                ..p.clone()
            },
            PatientRecord {
                cough: 1,
                ..p.clone()
            },
            PatientRecord {
                pregnancy: 1,
                ..p.clone()
            },
            PatientRecord {
                breathing_difficulty: 1,
                ..p.clone()
            },
        ];
        for q in bumped {
            let s1 = score(&q, &cfg).unwrap().score;
            assert!(s1 >= s0 - 1e-12, "{}: {s0} -> {s1}", p.id);
        }
    }
}

/// Moves `v` further from the centre of its normal band.
fn away_from(v: f64, lo: f64, hi: f64, step: f64) -> f64 {
    if v < 0.5 * (lo + hi) {
        (v - step).max(0.0)
    } else {
        v + step
    }
}

fn away_from_bmi(p: &PatientRecord, step_kg: f64) -> f64 {
    let centre = 0.5 * (18.5 + 30.0);
    if p.bmi() < centre {
        (p.weight - step_kg).max(1.0)
    } else {
        (p.weight + step_kg).min(400.0)
    }
}

#[test]
fn risk_levels_are_monotone_along_each_ramp() {
    let m = RiskModel::default();
    let sweep = |name: &str, from: f64, to: f64| {
        let mut last = m.risk_level(name, from).unwrap();
        for i in 1..=200 {
            let v = from + (to - from) * f64::from(i) / 200.0;
            let r = m.risk_level(name, v).unwrap();
            assert!(r >= last && (0.0..=1.0).contains(&r), "{name} at {v}");
            last = r;
        }
    };
    sweep("age", 0.0, 120.0);
    sweep("spo2", 100.0, 70.0);
    sweep("body_temp", 35.0, 42.0);
    for (name, lo, mid, hi) in [
        ("heart_rate", 30.0, 80.0, 180.0),
        ("respiratory_rate", 2.0, 16.0, 40.0),
        ("bmi", 10.0, 24.0, 50.0),
    ] {
        sweep(name, mid, hi);
        sweep(name, mid, lo);
    }
}

#[test]
fn store_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("patients.json");
    let store = PatientStore::open(&path).unwrap();
    for p in patients(300, 6) {
        store.upsert(p).unwrap();
    }
    let before = store.all();
    let bytes = std::fs::read(&path).unwrap();
    drop(store);

    let reopened = PatientStore::open(&path).unwrap();
    assert_eq!(reopened.all(), before);
    let json = |r: &[PatientRecord]| serde_json::to_vec(r).unwrap();
    assert_eq!(json(&reopened.all()), json(&before));
    // A no-op rewrite (replace and delete a scratch record) restores the bytes.
    let scratch = PatientRecord::healthy("zz-scratch", "Scratch");
    reopened.upsert(scratch).unwrap();
    reopened.delete("zz-scratch").unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
}

#[test]
fn concurrent_upserts_to_distinct_ids_all_land() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("patients.json");
    let store = PatientStore::open(&path).unwrap();
    std::thread::scope(|s| {
        for t in 0..8 {
            let store = &store;
            s.spawn(move || {
                for i in 0..25 {
                    store
                        .upsert(PatientRecord::healthy(format!("t{t}-{i}"), "X"))
                        .unwrap();
                }
            });
        }
    });
    assert_eq!(store.len(), 200);
    assert_eq!(PatientStore::open(&path).unwrap().len(), 200);
}

#[test]
fn config_round_trips_through_json() {
    let cfg = TriageConfig::with_weights(random_weights(9));
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    assert!(text.contains("\"schema_version\": 1"));
    assert_eq!(TriageConfig::from_json(&text).unwrap(), cfg);
    let wrong = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
    assert!(TriageConfig::from_json(&wrong).is_err());
}
