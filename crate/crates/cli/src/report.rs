//! Agreement between a reference device and camera readings: mean absolute
//! error per person and overall, for HR, RR and SpO₂.
//!
//! Both CSVs have the columns `person,hr,rr,spo2`. Readings are paired by
//! person, in row order within each person, so the two files must list the
//! same number of readings per person.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Reading {
    pub person: String,
    pub hr: f64,
    pub rr: f64,
    pub spo2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mae {
    pub hr: f64,
    pub rr: f64,
    pub spo2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonAgreement {
    pub person: String,
    pub readings: usize,
    pub mae: Mae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub persons: Vec<PersonAgreement>,
    pub overall: PersonAgreement,
}

impl AgreementReport {
    pub fn person(&self, person: &str) -> Option<&PersonAgreement> {
        self.persons.iter().find(|p| p.person == person)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>3} {:>9} {:>9} {:>9}",
            "person", "n", "hr_mae", "rr_mae", "spo2_mae"
        );
        for row in self.persons.iter().chain(std::iter::once(&self.overall)) {
            let _ = writeln!(
                out,
                "{:<10} {:>3} {:>9.3} {:>9.3} {:>9.3}",
                row.person, row.readings, row.mae.hr, row.mae.rr, row.mae.spo2
            );
        }
        out
    }
}

pub fn read_readings(reader: impl Read) -> Result<Vec<Reading>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let r: Reading = row.with_context(|| format!("row {}", i + 1))?;
        if ![r.hr, r.rr, r.spo2].iter().all(|v| v.is_finite()) {
            bail!("row {}: non-finite reading", i + 1);
        }
        rows.push(r);
    }
    Ok(rows)
}

pub fn read_readings_file(path: &Path) -> Result<Vec<Reading>> {
    let file =
        std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_readings(file).with_context(|| format!("invalid readings in {}", path.display()))
}

/// Groups rows by person, keeping first-appearance order.
fn by_person(rows: &[Reading]) -> Vec<(String, Vec<&Reading>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&Reading>> = BTreeMap::new();
    for r in rows {
        if !groups.contains_key(r.person.as_str()) {
            order.push(r.person.clone());
        }
        groups.entry(&r.person).or_default().push(r);
    }
    order
        .into_iter()
        .map(|p| {
            let g = groups.remove(p.as_str()).unwrap_or_default();
            (p, g)
        })
        .collect()
}

pub fn agreement(reference: &[Reading], candidate: &[Reading]) -> Result<AgreementReport> {
    if reference.is_empty() {
        bail!("no reference readings");
    }
    let cand = by_person(candidate);
    let mut persons = Vec::new();
    let mut total = Mae::default();
    let mut n_total = 0usize;
    for (person, refs) in by_person(reference) {
        let Some((_, cands)) = cand.iter().find(|(p, _)| *p == person) else {
            bail!("person {person} has no candidate readings");
        };
        if cands.len() != refs.len() {
            bail!(
                "person {person}: {} reference readings but {} candidate readings",
                refs.len(),
                cands.len()
            );
        }
        let mut sum = Mae::default();
        for (a, b) in refs.iter().zip(cands) {
            sum.hr += (a.hr - b.hr).abs();
            sum.rr += (a.rr - b.rr).abs();
            sum.spo2 += (a.spo2 - b.spo2).abs();
        }
        total.hr += sum.hr;
        total.rr += sum.rr;
        total.spo2 += sum.spo2;
        n_total += refs.len();
        let n = refs.len() as f64;
        persons.push(PersonAgreement {
            person,
            readings: refs.len(),
            mae: Mae {
                hr: sum.hr / n,
                rr: sum.rr / n,
                spo2: sum.spo2 / n,
            },
        });
    }
    if let Some((extra, _)) = cand
        .iter()
        .find(|(p, _)| !persons.iter().any(|q| q.person == *p))
    {
        bail!("person {extra} has no reference readings");
    }
    let n = n_total as f64;
    Ok(AgreementReport {
        persons,
        overall: PersonAgreement {
            person: "overall".into(),
            readings: n_total,
            mae: Mae {
                hr: total.hr / n,
                rr: total.rr / n,
                spo2: total.spo2 / n,
            },
        },
    })
}
