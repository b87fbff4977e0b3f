//! Machine-readable artifacts: run reports (JSON) and sweep tables (CSV).

use std::io;
use std::path::PathBuf;

use pslqe::error_control::PlanRecord;
use pslqe::ingest::VectorSpec;
use pslqe::RelationStatus;

use crate::commands::Noise;
use rug::Integer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bumped whenever a field of [`RunReport`] changes meaning or disappears.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Bumped whenever a column of the sweep CSV changes.
pub const SWEEP_SCHEMA_VERSION: u32 = 1;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub command: String,
    pub input: InputRecord,
    /// Absent when the run was driven by an explicit `eps2` instead of a plan.
    pub plan: Option<PlanRecord>,
    pub eps2: String,
    pub gamma: String,
    pub result: ResultRecord,
    /// `C (‖m‖ ε₃ + α_n ε₂)`; present only when every hypothesis behind it held.
    pub forward_bound: Option<String>,
    /// Why `forward_bound` is absent or does not reach `eps`.
    pub bound_note: Option<String>,
    /// Coefficients by descending degree, for `minpoly`.
    pub polynomial: Option<Vec<String>>,
    pub wall_time_seconds: f64,
    pub trace_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub spec: VectorSpec,
    pub n: usize,
    pub digits: u32,
    pub seed: u64,
    pub noise: Noise,
    /// Radius bound of injected noise, or the measured distance of rounded
    /// data from the true vector.
    pub perturbation: Option<String>,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub status: RelationStatus,
    pub m: Vec<String>,
    pub iterations: u64,
    pub iteration_cap: Option<u64>,
    pub final_h_nn1: String,
    /// `|⟨α, m⟩|` for the normalized input before any injected noise.
    pub residual: String,
    /// `|⟨ᾱ, m⟩|` for the data the search actually saw.
    pub data_residual: String,
    pub residual_within_bound: Option<bool>,
    pub early_exit: bool,
    pub invariant_violations: usize,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn relation(&self) -> Vec<Integer> {
        self.result.m.iter().map(|x| x.parse().expect("reports hold integers")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Incorrect,
    Infeasible,
}

/// One row of a sweep over `ε = 10^-i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub i: u32,
    /// `⌈-log₁₀ ε₁⌉`.
    pub eps1_digits: Option<u32>,
    /// `⌈-log₁₀ ε₂⌉`.
    pub eps2_digits: Option<u32>,
    pub outcome: Outcome,
    pub eps1: Option<String>,
    pub eps2: Option<String>,
    pub iterations: Option<u64>,
    /// Space-separated entries, sign-normalized.
    pub m: Option<String>,
    /// First 16 hex digits of the SHA-256 of `m`.
    pub m_hash: Option<String>,
}

/// Flips `m` so its first nonzero entry is positive.
pub fn canonical_sign(m: &[Integer]) -> Vec<Integer> {
    let negative = m.iter().find(|x| **x != 0).is_some_and(|x| *x < 0);
    m.iter().map(|x| if negative { Integer::from(-x) } else { x.clone() }).collect()
}

pub fn same_up_to_sign(a: &[Integer], b: &[Integer]) -> bool {
    canonical_sign(a) == canonical_sign(b)
}

pub fn format_relation(m: &[Integer]) -> String {
    m.iter().map(Integer::to_string).collect::<Vec<_>>().join(" ")
}

pub fn relation_hash(m: &[Integer]) -> String {
    let digest = Sha256::digest(format_relation(&canonical_sign(m)).as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Writes the sweep table with a leading schema comment.
pub fn write_sweep_csv<W: io::Write>(mut out: W, points: &[SweepPoint]) -> Result<(), csv::Error> {
    writeln!(out, "# pslqe sweep schema {SWEEP_SCHEMA_VERSION}")?;
    let mut writer = csv::Writer::from_writer(out);
    for p in points {
        writer.serialize(p)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: io::Read>(input: R) -> Result<Vec<SweepPoint>, csv::Error> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    reader.deserialize().collect()
}

/// `1 - 5x + …` style rendering, highest degree first.
pub fn format_polynomial(coefficients: &[Integer]) -> String {
    let degree = coefficients.len().saturating_sub(1);
    let mut out = String::new();
    for (k, c) in coefficients.iter().enumerate() {
        if *c == 0 {
            continue;
        }
        let power = degree - k;
        let magnitude = Integer::from(c.abs_ref());
        if out.is_empty() {
            if *c < 0 {
                out.push('-');
            }
        } else {
            out.push_str(if *c < 0 { " - " } else { " + " });
        }
        let show_magnitude = magnitude != 1 || power == 0;
        if show_magnitude {
            out.push_str(&magnitude.to_string());
        }
        match power {
            0 => {}
            1 => out.push('x'),
            p => out.push_str(&format!("x^{p}")),
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<Integer> {
        v.iter().map(|&x| Integer::from(x)).collect()
    }

    #[test]
    fn polynomials_render() {
        assert_eq!(format_polynomial(&ints(&[1, 0, -2])), "x^2 - 2");
        assert_eq!(format_polynomial(&ints(&[-3, 1, 1])), "-3x^2 + x + 1");
        assert_eq!(format_polynomial(&ints(&[0, 0])), "0");
    }

    #[test]
    fn hashes_ignore_global_sign() {
        let m = ints(&[1, -5, 4, -16, 1]);
        let neg: Vec<Integer> = m.iter().map(|x| Integer::from(-x)).collect();
        assert_eq!(relation_hash(&m), relation_hash(&neg));
        assert_eq!(relation_hash(&m).len(), 16);
        assert_ne!(relation_hash(&m), relation_hash(&ints(&[1, -5, 4, -16, 2])));
        assert!(same_up_to_sign(&m, &neg));
    }

    #[test]
    fn sweep_csv_round_trips() {
        let points = vec![
            SweepPoint {
                i: 1,
                eps1_digits: Some(6),
                eps2_digits: Some(3),
                outcome: Outcome::Incorrect,
                eps1: Some("2.6e-6@30".into()),
                eps2: Some("8.4e-3@30".into()),
                iterations: Some(4),
                m: Some("1 0 -2".into()),
                m_hash: Some("00112233aabbccdd".into()),
            },
            SweepPoint {
                i: 2,
                eps1_digits: None,
                eps2_digits: None,
                outcome: Outcome::Infeasible,
                eps1: None,
                eps2: None,
                iterations: None,
                m: None,
                m_hash: None,
            },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &points).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# pslqe sweep schema 1\ni,eps1_digits,eps2_digits,outcome"));
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), points);
    }
}
