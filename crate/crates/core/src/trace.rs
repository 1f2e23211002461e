//! Sampled time-domain data: coherence traces, χ curves and population
//! relaxation traces, plus their CSV forms.
//!
//! CSV files may start with `#`-prefixed comment lines (the provenance block
//! written by the CLI); readers skip them.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One coherence measurement or simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTrace {
    pub n_pulses: u32,
    pub t_pi: f64,
    /// `(t, c)` with `t` in seconds, strictly increasing.
    pub samples: Vec<(f64, f64)>,
    /// Per-sample standard error, when known (Monte Carlo output).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
    #[serde(default)]
    pub source: String,
}

impl CoherenceTrace {
    pub fn new(n_pulses: u32, t_pi: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        let tr = Self {
            n_pulses,
            t_pi,
            samples,
            stderr: None,
            source: String::new(),
        };
        tr.validate()?;
        Ok(tr)
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses < 1 {
            return Err(Error::invalid("trace n_pulses must be >= 1"));
        }
        if !(self.t_pi.is_finite() && self.t_pi >= 0.0) {
            return Err(Error::invalid("trace t_pi must be >= 0"));
        }
        check_times(self.samples.iter().map(|s| s.0))?;
        if let Some(e) = &self.stderr {
            if e.len() != self.samples.len() {
                return Err(Error::data("stderr column length differs from samples"));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes `t_s,c[,stderr]` rows after the given comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        write_comments(&mut out, comments)?;
        let mut w = csv::Writer::from_writer(out);
        match &self.stderr {
            Some(err) => {
                w.write_record(["t_s", "c", "stderr"])?;
                for (&(t, c), &e) in self.samples.iter().zip(err) {
                    w.write_record([fmt(t), fmt(c), fmt(e)])?;
                }
            }
            None => {
                w.write_record(["t_s", "c"])?;
                for &(t, c) in &self.samples {
                    w.write_record([fmt(t), fmt(c)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `t_s,c` CSV (an optional `stderr` column is kept). Pulse
    /// metadata is not part of the file and must be supplied.
    pub fn read_csv<R: Read>(input: R, n_pulses: u32, t_pi: f64) -> Result<Self> {
        let rows = read_columns(input, &["t_s", "c"], Some("stderr"))?;
        let samples = rows.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>();
        let stderr = if rows.first().is_some_and(|r| r.len() == 3) {
            Some(rows.iter().map(|r| r[2]).collect())
        } else {
            None
        };
        let tr = Self {
            n_pulses,
            t_pi,
            samples,
            stderr,
            source: String::new(),
        };
        tr.validate()?;
        Ok(tr)
    }
}

/// Samples of the decoherence exponent `χ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiCurve {
    pub n_pulses: u32,
    pub t_pi: f64,
    pub samples: Vec<(f64, f64)>,
}

impl ChiCurve {
    pub fn new(n_pulses: u32, samples: Vec<(f64, f64)>) -> Self {
        Self {
            n_pulses,
            t_pi: 0.0,
            samples,
        }
    }

    /// `χ = −ln c` for every sample with `0 < c < 1`.
    pub fn from_coherence(trace: &CoherenceTrace) -> Self {
        let samples = trace
            .samples
            .iter()
            .filter(|(_, c)| *c > 0.0 && *c < 1.0)
            .map(|&(t, c)| (t, -c.ln()))
            .collect();
        Self {
            n_pulses: trace.n_pulses,
            t_pi: trace.t_pi,
            samples,
        }
    }

    /// Coherence `exp(−χ)` at each sample.
    pub fn to_coherence(&self) -> CoherenceTrace {
        CoherenceTrace {
            n_pulses: self.n_pulses,
            t_pi: self.t_pi,
            samples: self.samples.iter().map(|&(t, x)| (t, (-x).exp())).collect(),
            stderr: None,
            source: String::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        write_comments(&mut out, comments)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "chi"])?;
        for &(t, x) in &self.samples {
            w.write_record([fmt(t), fmt(x)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, n_pulses: u32) -> Result<Self> {
        let rows = read_columns(input, &["t_s", "chi"], None)?;
        let samples: Vec<_> = rows.iter().map(|r| (r[0], r[1])).collect();
        check_times(samples.iter().map(|s| s.0))?;
        Ok(Self::new(n_pulses, samples))
    }
}

/// Which population difference a relaxation trace records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelaxationKind {
    /// `p₀ − p₋₁` after initialization in `|0⟩`.
    Sq,
    /// `p₋₁ − p₊₁` after initialization in `|−1⟩`.
    Dq,
}

/// Population-difference signal versus delay for a T₁ measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationTrace {
    pub kind: RelaxationKind,
    pub samples: Vec<(f64, f64)>,
}

impl RelaxationTrace {
    pub fn new(kind: RelaxationKind, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::data("relaxation trace is empty"));
        }
        check_times(samples.iter().map(|s| s.0))?;
        Ok(Self { kind, samples })
    }

    pub fn read_csv<R: Read>(input: R, kind: RelaxationKind) -> Result<Self> {
        let rows = read_columns(input, &["t_s", "signal"], None)?;
        Self::new(kind, rows.iter().map(|r| (r[0], r[1])).collect())
    }
}

/// Shortest round-trip decimal form, so files are byte-stable.
pub(crate) fn fmt(x: f64) -> String {
    format!("{x:e}")
}

pub(crate) fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

fn check_times(times: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for t in times {
        if !t.is_finite() {
            return Err(Error::data("non-finite time value"));
        }
        if t <= prev {
            return Err(Error::data(format!(
                "times must be strictly increasing ({t:e} follows {prev:e})"
            )));
        }
        prev = t;
    }
    Ok(())
}

/// Reads the named columns (in order) from a headed CSV with `#` comments.
/// An optional trailing column is included in each row when present.
pub(crate) fn read_columns<R: Read>(input: R, required: &[&str], optional: Option<&str>) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let mut idx = Vec::with_capacity(required.len() + 1);
    for name in required {
        let i = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::data(format!("missing column '{name}' (header: {headers:?})")))?;
        idx.push(i);
    }
    if let Some(name) = optional {
        if let Some(i) = headers.iter().position(|h| h == name) {
            idx.push(i);
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = idx
            .iter()
            .map(|&i| {
                let field = rec.get(i).unwrap_or("");
                field.parse::<f64>().map_err(|_| {
                    Error::data(format!("row {}: cannot parse '{field}' as a number", line + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_skips_comments() {
        let tr = CoherenceTrace::new(64, 1e-8, vec![(1e-6, 0.9), (2e-6, 0.5), (4e-6, 0.1)]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, &["version: x".into(), "seed: 3".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# version: x\n# seed: 3\nt_s,c\n"));
        let back = CoherenceTrace::read_csv(&buf[..], 64, 1e-8).unwrap();
        assert_eq!(back.samples, tr.samples);
    }

    #[test]
    fn rejects_unsorted_times() {
        assert!(CoherenceTrace::new(1, 0.0, vec![(2.0, 0.5), (1.0, 0.4)]).is_err());
        let csv = "t_s,c\n1e-6,0.5\n1e-6,0.4\n";
        assert!(CoherenceTrace::read_csv(csv.as_bytes(), 1, 0.0).is_err());
    }

    #[test]
    fn missing_column_is_data_error() {
        let err = CoherenceTrace::read_csv("time,c\n1,0.5\n".as_bytes(), 1, 0.0).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn chi_from_coherence_drops_endpoints() {
        let tr = CoherenceTrace::new(1, 0.0, vec![(1.0, 1.0), (2.0, (-0.5f64).exp()), (3.0, 0.0)]).unwrap();
        let chi = ChiCurve::from_coherence(&tr);
        assert_eq!(chi.samples.len(), 1);
        assert!((chi.samples[0].1 - 0.5).abs() < 1e-15);
    }
}
