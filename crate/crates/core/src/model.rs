//! Identified NARX models: one-step prediction, free-run simulation and the
//! model file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candidates::ModelMeta;
use crate::data::{fmt_f64, TimeSeriesData};
use crate::error::{Error, Result};
use crate::hysteresis::hysteresis_signals;
use crate::regression::build_regression_terms;
use crate::term::{Factor, RegressorTerm, Signals, Variable};

/// Whether the model predicts the system output from its input, or the
/// input from the output (inverse model, roles of `u` and `y` swapped).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Direct,
    Inverse,
}

/// Polynomial NARX model with optional moving-average noise terms.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxModel {
    process_terms: Vec<RegressorTerm>,
    theta: Vec<f64>,
    noise_terms: Vec<RegressorTerm>,
    noise_theta: Vec<f64>,
    pub meta: ModelMeta,
    pub ts: f64,
    pub direction: Direction,
    pub label: String,
}

impl NarxModel {
    pub fn new(
        process_terms: Vec<RegressorTerm>,
        theta: Vec<f64>,
        meta: ModelMeta,
        ts: f64,
    ) -> Result<Self> {
        if process_terms.len() != theta.len() {
            return Err(Error::Parameter(format!(
                "{} terms but {} parameters",
                process_terms.len(),
                theta.len()
            )));
        }
        meta.validate()?;
        for t in &process_terms {
            if t.uses(Variable::Residual) {
                return Err(Error::Parameter(format!(
                    "residual variable in process term {t}"
                )));
            }
            if !t.is_constant() && !meta.admits(t) {
                return Err(Error::Parameter(format!("term {t} violates the model bounds")));
            }
        }
        if !(ts > 0.0) {
            return Err(Error::Parameter("sampling interval must be positive".into()));
        }
        Ok(Self {
            process_terms,
            theta,
            noise_terms: Vec::new(),
            noise_theta: Vec::new(),
            meta,
            ts,
            direction: Direction::Direct,
            label: String::new(),
        })
    }

    pub fn with_noise_terms(mut self, terms: Vec<RegressorTerm>, theta: Vec<f64>) -> Result<Self> {
        if terms.len() != theta.len() {
            return Err(Error::Parameter("noise terms and parameters differ in length".into()));
        }
        if let Some(t) = terms
            .iter()
            .find(|t| t.is_constant() || !t.factors().iter().all(|f| f.variable == Variable::Residual))
        {
            return Err(Error::Parameter(format!("noise term {t} must be a residual monomial")));
        }
        self.noise_terms = terms;
        self.noise_theta = theta;
        Ok(self)
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn process_terms(&self) -> &[RegressorTerm] {
        &self.process_terms
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn noise_terms(&self) -> &[RegressorTerm] {
        &self.noise_terms
    }

    pub fn noise_theta(&self) -> &[f64] {
        &self.noise_theta
    }

    pub fn len(&self) -> usize {
        self.process_terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.process_terms.is_empty()
    }

    /// Samples of history the deterministic part needs.
    pub fn history(&self) -> usize {
        self.process_terms
            .iter()
            .map(RegressorTerm::history)
            .max()
            .unwrap_or(0)
    }

    pub fn max_output_lag(&self) -> usize {
        self.process_terms
            .iter()
            .flat_map(|t| t.factors())
            .filter(|f| f.variable == Variable::Output)
            .map(|f| f.lag)
            .max()
            .unwrap_or(0)
    }

    /// Parameter of `term`, if the model contains it.
    pub fn parameter(&self, term: &RegressorTerm) -> Option<f64> {
        self.process_terms
            .iter()
            .position(|t| t == term)
            .map(|i| self.theta[i])
    }

    /// Sum of the parameters of the linear output regressors `y(k-j)`.
    pub fn sigma_y(&self) -> f64 {
        self.process_terms
            .iter()
            .zip(&self.theta)
            .filter(|(t, _)| t.is_linear_output())
            .map(|(_, p)| p)
            .sum()
    }

    fn eval(&self, signals: &Signals<'_>, k: usize) -> f64 {
        self.process_terms
            .iter()
            .zip(&self.theta)
            .map(|(t, p)| p * t.eval(signals, k))
            .sum()
    }

    /// Human-readable equation, one term per line.
    pub fn equation(&self) -> String {
        let lhs = match self.direction {
            Direction::Direct => "y(k)",
            Direction::Inverse => "u_hat(k)",
        };
        let mut s = format!("{lhs} =");
        for (t, p) in self.process_terms.iter().zip(&self.theta) {
            s.push_str(&format!("\n    {:+.9e} * {t}", p));
        }
        s
    }
}

/// One-step-ahead predictions using measured past outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepPrediction {
    /// Predictions for samples `first_sample..N`.
    pub values: Vec<f64>,
    pub first_sample: usize,
}

pub fn one_step_predict(model: &NarxModel, data: &TimeSeriesData) -> Result<OneStepPrediction> {
    let reg = build_regression_terms(&model.process_terms, data, None, None)?;
    let theta = nalgebra::DVector::from_column_slice(&model.theta);
    let values = (&reg.matrix * theta).as_slice().to_vec();
    Ok(OneStepPrediction {
        values,
        first_sample: reg.first_sample,
    })
}

/// Options for [`free_run_simulate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulationOptions {
    /// Magnitude above which the trajectory is declared divergent.
    /// Defaults to `1e6 * max|y_init| + 1`.
    pub divergence_bound: Option<f64>,
}

impl SimulationOptions {
    pub fn with_bound(bound: f64) -> Self {
        Self {
            divergence_bound: Some(bound),
        }
    }
}

/// Free-run trajectory; partial when the divergence guard tripped.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeRun {
    pub y: Vec<f64>,
    pub diverged_at: Option<usize>,
}

impl FreeRun {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn into_result(self) -> Result<Vec<f64>> {
        match self.diverged_at {
            Some(at) => Err(Error::Diverged { at }),
            None => Ok(self.y),
        }
    }
}

/// Simulates the deterministic part of `model` over the horizon of `u`,
/// feeding its own outputs back as lagged outputs.
///
/// The returned trajectory has `u.len()` samples and starts with `y_init`.
/// When the model history exceeds `y_init`, the gap is filled by holding the
/// last initial value. Noise terms contribute nothing.
pub fn free_run_simulate(
    model: &NarxModel,
    u: &[f64],
    y_init: &[f64],
    options: SimulationOptions,
) -> Result<FreeRun> {
    let lag = model.max_output_lag();
    if y_init.len() < lag.max(1) {
        return Err(Error::InsufficientData {
            needed: lag.max(1),
            available: y_init.len(),
        });
    }
    if u.len() < y_init.len() {
        return Err(Error::InsufficientData {
            needed: y_init.len(),
            available: u.len(),
        });
    }
    let bound = options.divergence_bound.unwrap_or_else(|| {
        1e6 * y_init.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0
    });

    let n = u.len();
    let start = y_init.len().max(model.history()).min(n);
    let mut y = Vec::with_capacity(n);
    y.extend_from_slice(y_init);
    let hold = *y_init.last().expect("non-empty");
    y.resize(start, hold);
    y.resize(n, 0.0);

    let (phi1, phi2) = hysteresis_signals(u);
    for k in start..n {
        let (past, _) = y.split_at(k);
        let signals = Signals {
            y: past,
            u,
            phi1: &phi1,
            phi2: &phi2,
            xi: None,
        };
        let v = model.eval(&signals, k);
        if !v.is_finite() || v.abs() > bound {
            y.truncate(k);
            return Ok(FreeRun {
                y,
                diverged_at: Some(k),
            });
        }
        y[k] = v;
    }
    Ok(FreeRun {
        y,
        diverged_at: None,
    })
}

// ---------------------------------------------------------------------------
// Model files

#[derive(Debug, Serialize, Deserialize)]
struct TermEntry {
    term: String,
    factors: Vec<Factor>,
    parameter: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    label: String,
    direction: Direction,
    sampling_interval: f64,
    meta: ModelMeta,
    #[serde(default)]
    process: Vec<TermEntry>,
    #[serde(default)]
    noise: Vec<TermEntry>,
}

fn entries(terms: &[RegressorTerm], theta: &[f64]) -> Vec<TermEntry> {
    terms
        .iter()
        .zip(theta)
        .map(|(t, p)| TermEntry {
            term: t.to_string(),
            factors: t.factors().to_vec(),
            parameter: fmt_f64(*p),
        })
        .collect()
}

fn parse_entries(entries: Vec<TermEntry>) -> Result<(Vec<RegressorTerm>, Vec<f64>)> {
    let mut terms = Vec::with_capacity(entries.len());
    let mut theta = Vec::with_capacity(entries.len());
    for e in entries {
        terms.push(RegressorTerm::new(e.factors)?);
        theta.push(
            e.parameter
                .trim()
                .parse::<f64>()
                .map_err(|err| Error::Parse(format!("parameter {:?}: {err}", e.parameter)))?,
        );
    }
    Ok((terms, theta))
}

impl NarxModel {
    /// Serializes to the TOML model file. Parameters are written as decimal
    /// strings with 17 significant digits.
    pub fn to_toml(&self) -> String {
        let file = ModelFile {
            label: self.label.clone(),
            direction: self.direction,
            sampling_interval: self.ts,
            meta: self.meta,
            process: entries(&self.process_terms, &self.theta),
            noise: entries(&self.noise_terms, &self.noise_theta),
        };
        toml::to_string(&file).expect("model file serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let (terms, theta) = parse_entries(file.process)?;
        let (nterms, ntheta) = parse_entries(file.noise)?;
        Ok(Self::new(terms, theta, file.meta, file.sampling_interval)?
            .with_noise_terms(nterms, ntheta)?
            .with_direction(file.direction)
            .with_label(file.label))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
