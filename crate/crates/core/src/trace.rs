//! Per-step snapshots and their CSV / JSON serializations.

use std::io::Write;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::format::sig;
use crate::state::SandSDiagonal;
use crate::system::BiasVector;

/// Largest spin count for which JSON traces carry S&S diagonals.
pub const MAX_SANDS_SPINS: usize = 12;

/// Snapshot of a run after one primitive step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Number of primitive steps executed so far (0 for the initial state).
    pub step_index: u64,
    pub label: String,
    /// Absolute single-spin marginal biases, indexed by spin.
    pub bias_config: BiasVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sands: Option<SandSDiagonal>,
    /// Exact S&S entries written as `a/b`, from the rational backend.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "ratio_list")]
    pub sands_exact: Option<Vec<BigRational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_prob: Option<f64>,
    /// `false` when the state is not a tensor product to first order, so
    /// its marginal biases do not describe a spin temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separable: Option<bool>,
}

mod ratio_list {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::{parse_ratio, ratio_to_string};

    pub fn serialize<S: Serializer>(v: &Option<Vec<BigRational>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|v| v.iter().map(ratio_to_string).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<BigRational>>, D::Error> {
        let raw: Option<Vec<String>> = Option::deserialize(d)?;
        raw.map(|v| {
            v.iter()
                .map(|s| parse_ratio(s).map_err(serde::de::Error::custom))
                .collect()
        })
        .transpose()
    }
}

impl TraceRecord {
    /// Snapshots a backend. `with_sands` controls whether the S&S diagonal
    /// is stored.
    pub fn capture(backend: &dyn Backend, step_index: u64, label: String, with_sands: bool) -> Self {
        Self {
            step_index,
            label,
            bias_config: backend.biases(),
            sands: if with_sands { backend.sands() } else { None },
            sands_exact: if with_sands { backend.exact_sands() } else { None },
            max_prob: backend.max_prob(),
            separable: backend.separable(),
        }
    }
}

/// Run metadata stored at the top of a JSON trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub algorithm: String,
    pub n: usize,
    pub epsilon0: f64,
    pub epsilon: f64,
    pub backend: String,
    pub reset_spins: Vec<usize>,
    pub initial_state: String,
    pub termination: String,
}

/// Header plus records; the JSON trace format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// Writes `step_index,label,bias_0..bias_{n-1}` with biases in units
    /// of `eps0` at 6 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.header.n;
        let mut head = vec!["step_index".to_string(), "label".to_string()];
        head.extend((0..n).map(|i| format!("bias_{i}")));
        w.write_record(&head).map_err(csv_err)?;
        let e = self.header.epsilon0;
        for r in &self.records {
            let mut row = vec![r.step_index.to_string(), r.label.clone()];
            row.extend(r.bias_config.as_slice().iter().map(|b| sig(b / e, 6)));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| Error::Io(e.to_string()))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed trace: {e}")))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Which steps a run records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// Record steps whose recursion depth is at most this (0 = outermost
    /// loop). `None` records only the initial and final states.
    pub depth: Option<usize>,
    /// Keep S&S diagonals in records (only for `n <= MAX_SANDS_SPINS`).
    pub sands: bool,
    /// Evaluate the largest probability and the probability sum after
    /// every step, recorded or not.
    pub monitor: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            depth: Some(0),
            sands: true,
            monitor: false,
        }
    }
}

impl TraceOptions {
    pub fn quiet() -> Self {
        Self {
            depth: None,
            sands: false,
            monitor: false,
        }
    }

    pub fn all_steps() -> Self {
        Self {
            depth: Some(usize::MAX),
            ..Self::default()
        }
    }

    pub fn with_monitor(mut self) -> Self {
        self.monitor = true;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        Trace {
            header: TraceHeader {
                algorithm: "ppa".into(),
                n: 2,
                epsilon0: 0.5,
                epsilon: 0.5f64.atanh(),
                backend: "rational".into(),
                reset_spins: vec![0],
                initial_state: "cms".into(),
                termination: "reps".into(),
            },
            records: vec![TraceRecord {
                step_index: 1,
                label: "RESET(A)".into(),
                bias_config: BiasVector::new(vec![0.5, 0.0]).unwrap(),
                sands: Some(SandSDiagonal::new(vec![1.0, -1.0, 1.0, -1.0]).unwrap()),
                sands_exact: Some(vec![
                    BigRational::new(7.into(), 2.into()),
                    BigRational::from_integer((-1).into()),
                    BigRational::from_integer(0.into()),
                    BigRational::new((-5).into(), 2.into()),
                ]),
                max_prob: Some(0.375),
                separable: Some(true),
            }],
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "step_index,label,bias_0,bias_1\n1,RESET(A),1,0\n");
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_json(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"7/2\""));
        assert_eq!(Trace::from_json(&text).unwrap(), t);
    }
}
