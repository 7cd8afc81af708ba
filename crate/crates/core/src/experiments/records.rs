//! Per-trial exit records and their CSV form.
//!
//! Floats are written in Rust's shortest round-trip representation, so
//! reading a file back reproduces every record bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FIXED_COLUMNS: [&str; 10] = [
    "trial_id",
    "epsilon",
    "censored",
    "tau",
    "tau_normalized",
    "jump_count",
    "causal_jump_index",
    "model_K",
    "model_s_bar",
    "agreement",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub trial_id: u64,
    pub epsilon: f64,
    /// Exit time; `None` when censored at the horizon.
    pub tau: Option<f64>,
    /// `λ_ε τ`.
    pub tau_normalized: Option<f64>,
    pub jump_count: usize,
    pub causal_jump_index: Option<usize>,
    pub model_k: usize,
    pub model_s_bar: f64,
    pub agreement: bool,
    /// Mode coefficients of the exit locus.
    pub locus: Vec<f64>,
}

impl ExitRecord {
    pub fn censored(&self) -> bool {
        self.tau.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        match (self.tau, self.tau_normalized) {
            (Some(t), Some(s)) if t > 0.0 && t.is_finite() && s.is_finite() => Ok(()),
            (None, None) => Ok(()),
            _ => Err(Error::InvalidInput(format!("trial {}: inconsistent exit time fields", self.trial_id))),
        }
    }
}

pub fn header(modes: usize) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((1..=modes).map(|k| format!("locus_c{k}")))
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_records<W: Write>(out: W, modes: usize, records: &[ExitRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(modes))?;
    for r in records {
        if r.locus.len() != modes {
            return Err(Error::InvalidInput(format!(
                "trial {} has {} locus coefficients, expected {modes}",
                r.trial_id,
                r.locus.len()
            )));
        }
        let mut row = vec![
            r.trial_id.to_string(),
            r.epsilon.to_string(),
            r.censored().to_string(),
            opt(r.tau),
            opt(r.tau_normalized),
            r.jump_count.to_string(),
            opt(r.causal_jump_index),
            r.model_k.to_string(),
            r.model_s_bar.to_string(),
            r.agreement.to_string(),
        ];
        row.extend(r.locus.iter().map(|c| c.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = row.get(i).ok_or_else(|| Error::InvalidInput(format!("missing column {name}")))?;
    raw.parse().map_err(|_| Error::InvalidInput(format!("cannot parse {name} = {raw:?}")))
}

fn opt_field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, name: &str) -> Result<Option<T>> {
    match row.get(i) {
        Some("") => Ok(None),
        _ => field(row, i, name).map(Some),
    }
}

/// Reads records written by [`write_records`], checking the header.
pub fn read_records<R: Read>(input: R) -> Result<(usize, Vec<ExitRecord>)> {
    let mut r = csv::Reader::from_reader(input);
    let head: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if head.len() < FIXED_COLUMNS.len() {
        return Err(Error::InvalidInput("exit CSV header is too short".into()));
    }
    let modes = head.len() - FIXED_COLUMNS.len();
    if head != header(modes) {
        return Err(Error::InvalidInput(format!("unexpected exit CSV header {head:?}")));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let censored: bool = field(&row, 2, "censored")?;
        let rec = ExitRecord {
            trial_id: field(&row, 0, "trial_id")?,
            epsilon: field(&row, 1, "epsilon")?,
            tau: opt_field(&row, 3, "tau")?,
            tau_normalized: opt_field(&row, 4, "tau_normalized")?,
            jump_count: field(&row, 5, "jump_count")?,
            causal_jump_index: opt_field(&row, 6, "causal_jump_index")?,
            model_k: field(&row, 7, "model_K")?,
            model_s_bar: field(&row, 8, "model_s_bar")?,
            agreement: field(&row, 9, "agreement")?,
            locus: (0..modes)
                .map(|k| field(&row, FIXED_COLUMNS.len() + k, "locus"))
                .collect::<Result<_>>()?,
        };
        if censored != rec.censored() {
            return Err(Error::InvalidInput(format!("trial {}: censored flag disagrees with tau", rec.trial_id)));
        }
        rec.validate()?;
        out.push(rec);
    }
    Ok((modes, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3f64..1e3]
    }

    fn record(modes: usize) -> impl Strategy<Value = ExitRecord> {
        (
            any::<u64>(),
            1e-6f64..1.0,
            proptest::option::of((1e-300f64..1e300, finite())),
            any::<usize>(),
            proptest::option::of(1usize..1_000_000),
            1usize..1_000_000,
            0.0f64..1e9,
            any::<bool>(),
            proptest::collection::vec(finite(), modes),
        )
            .prop_map(|(trial_id, epsilon, tau, jump_count, causal, model_k, model_s_bar, agreement, locus)| {
                ExitRecord {
                    trial_id,
                    epsilon,
                    tau: tau.map(|t| t.0),
                    tau_normalized: tau.map(|t| t.1),
                    jump_count,
                    causal_jump_index: causal,
                    model_k,
                    model_s_bar,
                    agreement,
                    locus,
                }
            })
    }

    #[test]
    fn header_is_exact() {
        assert_eq!(
            header(2).join(","),
            "trial_id,epsilon,censored,tau,tau_normalized,jump_count,causal_jump_index,model_K,model_s_bar,agreement,locus_c1,locus_c2"
        );
    }

    #[test]
    fn rejects_wrong_header_and_inconsistent_rows() {
        assert!(read_records("a,b\n1,2\n".as_bytes()).is_err());
        let text = format!("{}\n0,0.1,true,1.0,0.5,0,,1,1,false,0\n", header(1).join(","));
        assert!(read_records(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            (modes, recs) in (0usize..5).prop_flat_map(|m| (Just(m), proptest::collection::vec(record(m), 0..20)))
        ) {
            let mut buf = Vec::new();
            write_records(&mut buf, modes, &recs).unwrap();
            let (m, back) = read_records(buf.as_slice()).unwrap();
            prop_assert_eq!(m, modes);
            prop_assert_eq!(back, recs);
        }
    }
}
