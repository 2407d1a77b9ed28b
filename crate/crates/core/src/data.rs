//! Sampled input/output records and their CSV layout (`k,u,y[,y_clean]`).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampled single-input single-output record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesData {
    u: Vec<f64>,
    y: Vec<f64>,
    /// Noise-free output, when the record came from a simulator.
    y_clean: Option<Vec<f64>>,
    ts: f64,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    k: usize,
    u: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y_clean: Option<f64>,
}

impl TimeSeriesData {
    pub fn new(u: Vec<f64>, y: Vec<f64>, ts: f64, label: impl Into<String>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::Data("empty record".into()));
        }
        if u.len() != y.len() {
            return Err(Error::Data(format!(
                "input has {} samples but output has {}",
                u.len(),
                y.len()
            )));
        }
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::Data(format!("sampling interval must be positive, got {ts}")));
        }
        if let Some(k) = u.iter().chain(y.iter()).position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite sample at position {}", k % u.len())));
        }
        Ok(Self {
            u,
            y,
            y_clean: None,
            ts,
            label: label.into(),
        })
    }

    /// Attaches the noise-free output of a simulated record.
    pub fn with_clean_output(mut self, y_clean: Vec<f64>) -> Result<Self> {
        if y_clean.len() != self.y.len() {
            return Err(Error::Data("clean output length differs from output".into()));
        }
        self.y_clean = Some(y_clean);
        Ok(self)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_clean(&self) -> Option<&[f64]> {
        self.y_clean.as_deref()
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// The same record with input and output exchanged, used by inverse models.
    pub fn swapped(&self) -> Self {
        Self {
            u: self.y.clone(),
            y: self.u.clone(),
            y_clean: None,
            ts: self.ts,
            label: format!("{} (swapped)", self.label),
        }
    }

    /// Replaces the output with the noise-free one if available.
    pub fn clean(&self) -> Self {
        match &self.y_clean {
            Some(c) => Self {
                u: self.u.clone(),
                y: c.clone(),
                y_clean: Some(c.clone()),
                ts: self.ts,
                label: self.label.clone(),
            },
            None => self.clone(),
        }
    }

    pub fn read_csv<R: Read>(reader: R, ts: f64, label: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut u = Vec::new();
        let mut y = Vec::new();
        let mut clean = Vec::new();
        let mut all_clean = true;
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            u.push(row.u);
            y.push(row.y);
            match row.y_clean {
                Some(c) => clean.push(c),
                None => all_clean = false,
            }
        }
        let data = Self::new(u, y, ts, label)?;
        if all_clean && !clean.is_empty() {
            data.with_clean_output(clean)
        } else {
            Ok(data)
        }
    }

    pub fn load_csv(path: &Path, ts: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, ts, path.display().to_string())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        match &self.y_clean {
            Some(_) => wtr.write_record(["k", "u", "y", "y_clean"])?,
            None => wtr.write_record(["k", "u", "y"])?,
        }
        for k in 0..self.len() {
            let mut rec = vec![k.to_string(), fmt_f64(self.u[k]), fmt_f64(self.y[k])];
            if let Some(c) = &self.y_clean {
                rec.push(fmt_f64(c[k]));
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }
}

/// Formats a float with 17 significant digits so files round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a single-column signal as `k,<name>`.
pub fn write_signal_csv<W: Write>(writer: W, name: &str, values: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["k", name])?;
    for (k, v) in values.iter().enumerate() {
        wtr.write_record([k.to_string(), fmt_f64(*v)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the second column of a `k,<name>` file.
pub fn read_signal_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = rec
            .get(1)
            .ok_or_else(|| Error::Parse("signal file needs two columns".into()))?;
        out.push(
            field
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad sample {field:?}: {e}")))?,
        );
    }
    Ok(out)
}

/// Sample mean and population standard deviation.
pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
