//! Model quality: MAPE, validation runs and the noise-robustness sweep.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fmt_f64, mean_std, TimeSeriesData};
use crate::error::{Error, Result};
use crate::experiment::{run_trial, IdentificationSetup};
use crate::model::{free_run_simulate, one_step_predict, Direction, NarxModel, SimulationOptions};

/// `Σ|y - ŷ| / (N |max y - min y|)`, in percent.
pub fn mape(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Data(format!(
            "reference has {} samples but prediction has {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Data("empty reference".into()));
    }
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateRange(
            "reference signal is constant; MAPE undefined".into(),
        ));
    }
    let sum: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum();
    Ok(100.0 * sum / (y.len() as f64 * range))
}

/// Signed area enclosed by the closed polygon `(x[k], y[k])`; positive when
/// the path runs counter-clockwise in the `(x, y)` plane.
pub fn shoelace_area(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let twice: f64 = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            x[i] * y[j] - x[j] * y[i]
        })
        .sum();
    twice / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    OneStep,
    #[default]
    FreeRun,
}

impl std::str::FromStr for PredictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-step" | "one_step" => Ok(Self::OneStep),
            "free-run" | "free_run" => Ok(Self::FreeRun),
            _ => Err(Error::Parse(format!("unknown prediction mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    /// Prediction for samples `first_sample..N` of the predicted signal.
    pub prediction: Vec<f64>,
    /// The signal being predicted over the same samples.
    pub reference: Vec<f64>,
    pub first_sample: usize,
    pub mape: f64,
}

impl Validation {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "reference", "prediction"])?;
        for (i, (r, p)) in self.reference.iter().zip(&self.prediction).enumerate() {
            w.write_record([
                (self.first_sample + i).to_string(),
                fmt_f64(*r),
                fmt_f64(*p),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Predicts the record with `model` and scores it against the measurement.
///
/// Inverse models predict `u` from `y`. Free-run simulation starts from the
/// first `p` measured samples, `p` being the model history, and the MAPE
/// covers the samples from `p` on.
pub fn validate(model: &NarxModel, data: &TimeSeriesData, mode: PredictionMode) -> Result<Validation> {
    let data = match model.direction {
        Direction::Direct => data.clone(),
        Direction::Inverse => data.swapped(),
    };
    let (prediction, first_sample) = match mode {
        PredictionMode::OneStep => {
            let p = one_step_predict(model, &data)?;
            (p.values, p.first_sample)
        }
        PredictionMode::FreeRun => {
            let p = model.history().max(model.max_output_lag()).max(1);
            if data.len() <= p {
                return Err(Error::InsufficientData {
                    needed: p + 1,
                    available: data.len(),
                });
            }
            let scale = data.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let run = free_run_simulate(
                model,
                data.u(),
                &data.y()[..p],
                SimulationOptions::with_bound(1e6 * scale + 1.0),
            )?;
            let y = run.into_result()?;
            (y[p..].to_vec(), p)
        }
    };
    let reference = data.y()[first_sample..].to_vec();
    let mape = mape(&reference, &prediction)?;
    Ok(Validation {
        prediction,
        reference,
        first_sample,
        mape,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub ratios: Vec<f64>,
    pub mape_mean: Vec<f64>,
    /// Population standard deviation over the successful trials.
    pub mape_std: Vec<f64>,
    pub trials: usize,
    pub failures: Vec<usize>,
    /// Per ratio, per trial.
    pub seeds: Vec<Vec<u64>>,
    /// Per ratio, per trial; `None` for failed trials.
    pub mapes: Vec<Vec<Option<f64>>>,
    pub validation_seed: u64,
}

impl MonteCarloReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["ratio", "mean_mape", "std_mape", "failures"])?;
        for i in 0..self.ratios.len() {
            w.write_record([
                fmt_f64(self.ratios[i]),
                fmt_f64(self.mape_mean[i]),
                fmt_f64(self.mape_std[i]),
                self.failures[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per trial: `ratio,trial,seed,mape` (empty mape when failed).
    pub fn write_trials_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["ratio", "trial", "seed", "mape"])?;
        for (i, ratio) in self.ratios.iter().enumerate() {
            for (t, (seed, m)) in self.seeds[i].iter().zip(&self.mapes[i]).enumerate() {
                w.write_record([
                    fmt_f64(*ratio),
                    t.to_string(),
                    seed.to_string(),
                    m.map(fmt_f64).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Re-identifies the system `trials` times per noise ratio and scores each
/// model in free run on one noise-free validation record shared by all
/// trials. Trials that fail (singular fit, divergence) are counted and left
/// out of the statistics.
pub fn monte_carlo_noise_sweep(
    setup: &IdentificationSetup,
    ratios: &[f64],
    trials: usize,
    base_seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::Parameter("at least one trial per ratio is required".into()));
    }
    if ratios.is_empty() {
        return Err(Error::Parameter("no noise ratios given".into()));
    }
    if ratios.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Parameter("noise ratios must be strictly ascending".into()));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::Parameter(format!("noise ratio {r} must be non-negative")));
    }
    let mut seeder = ChaCha8Rng::seed_from_u64(base_seed);
    let validation_seed = seeder.next_u64();
    let seeds: Vec<Vec<u64>> = ratios
        .iter()
        .map(|_| (0..trials).map(|_| seeder.next_u64()).collect())
        .collect();
    let validation = setup.clean_record(validation_seed, "validation")?;

    let jobs: Vec<(usize, usize)> = (0..ratios.len())
        .flat_map(|i| (0..trials).map(move |t| (i, t)))
        .collect();
    let results: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(i, t)| run_trial(setup, ratios[i], seeds[i][t], &validation).ok())
        .collect();

    let mut mapes = vec![Vec::with_capacity(trials); ratios.len()];
    for (&(i, _), m) in jobs.iter().zip(results) {
        mapes[i].push(m);
    }
    let mut mape_mean = Vec::new();
    let mut mape_std = Vec::new();
    let mut failures = Vec::new();
    for row in &mapes {
        let ok: Vec<f64> = row.iter().flatten().copied().collect();
        failures.push(row.len() - ok.len());
        if ok.is_empty() {
            mape_mean.push(f64::NAN);
            mape_std.push(f64::NAN);
        } else {
            let (m, s) = mean_std(&ok);
            mape_mean.push(m);
            mape_std.push(s);
        }
    }
    Ok(MonteCarloReport {
        ratios: ratios.to_vec(),
        mape_mean,
        mape_std,
        trials,
        failures,
        seeds,
        mapes,
        validation_seed,
    })
}
