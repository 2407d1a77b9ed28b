//! Experiment configuration and the identification pipeline it drives.
//!
//! One TOML file describes a whole experiment: the system (a benchmark
//! simulator or recorded CSV data), the excitation, the candidate pool, the
//! selection settings, the noise level and the seeds.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{BenchmarkSystem, BoucWenParams, HammersteinParams};
use crate::candidates::{generate_candidates, CandidateSet, ModelMeta};
use crate::data::TimeSeriesData;
use crate::error::{Error, Result};
use crate::evaluation::{validate, PredictionMode};
use crate::hysteresis::{apply_exclusion_rules, ExclusionReport, HysteresisCandidateConfig};
use crate::input_design::{add_output_noise, design_input, InputDesignSpec};
use crate::model::Direction;
use crate::selection::{select_structure, Estimator, Selection, SelectionConfig};
use crate::term::Variable;

/// Sampling interval of the valve records.
pub const VALVE_SAMPLE_INTERVAL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemConfig {
    Hammerstein(HammersteinParams),
    BoucWen(BoucWenParams),
    /// Recorded `k,u,y` files.
    Csv {
        identification: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        validation: Option<PathBuf>,
        sample_interval: f64,
    },
    /// The pneumatic valve. Its measurements are not distributed; point
    /// `data` at a local copy to use them.
    Valve {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        validation: Option<PathBuf>,
    },
}

impl SystemConfig {
    pub fn benchmark(&self) -> Option<BenchmarkSystem> {
        match self {
            Self::Hammerstein(p) => Some(BenchmarkSystem::Hammerstein(*p)),
            Self::BoucWen(p) => Some(BenchmarkSystem::BoucWen(*p)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub degree: u32,
    pub max_output_lag: usize,
    pub max_input_lag: usize,
    #[serde(default = "one")]
    pub input_delay: usize,
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub include_constant: bool,
}

fn one() -> usize {
    1
}

impl CandidateConfig {
    pub fn meta(&self) -> ModelMeta {
        ModelMeta::new(self.degree, self.max_output_lag, self.max_input_lag, self.input_delay)
    }

    /// Candidate pool, after the exclusion rules when `hysteresis` is set.
    pub fn build(
        &self,
        hysteresis: Option<&HysteresisCandidateConfig>,
    ) -> Result<(CandidateSet, Option<ExclusionReport>)> {
        let all = generate_candidates(self.meta(), &self.variables, self.include_constant)?;
        Ok(match hysteresis {
            Some(h) => {
                let report = apply_exclusion_rules(&all, h);
                (report.retained.clone(), Some(report))
            }
            None => (all, None),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub ratios: Vec<f64>,
    pub trials: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            ratios: vec![0.0, 0.1, 0.3],
            trials: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Seed for the identification record (input and noise).
    pub seed: u64,
    /// Seed for the held-out validation input.
    pub validation_seed: u64,
    /// Output noise standard deviation over clean output standard deviation.
    pub noise_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDesignSpec>,
    pub candidates: CandidateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hysteresis: Option<HysteresisCandidateConfig>,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
}

pub const PRESET_EXPERIMENTS: [&str; 3] = ["heating", "bouc-wen", "valve"];

impl ExperimentConfig {
    /// Heating system: Hammerstein simulator under the two-band, three-level
    /// excitation, cubic candidates with three output and input lags.
    pub fn heating() -> Self {
        Self {
            name: "heating".into(),
            seed: 1,
            validation_seed: 1001,
            noise_ratio: 0.05,
            output_dir: None,
            system: SystemConfig::Hammerstein(HammersteinParams::default()),
            input: Some(InputDesignSpec {
                frequencies: vec![0.001, 0.005],
                segment_lengths: vec![1000, 1000],
                operating_points: vec![0.3, 0.5, 0.7],
                amplitudes: vec![0.2, 0.2, 0.2],
                sample_interval: 1.0,
                filter_order: 5,
            }),
            candidates: CandidateConfig {
                degree: 3,
                max_output_lag: 3,
                max_input_lag: 3,
                // The plant reaches y through v(k-1), so the true structure
                // is only in the pool with a one-sample delay.
                input_delay: 1,
                variables: vec![Variable::Output, Variable::Input],
                include_constant: false,
            },
            hysteresis: None,
            selection: SelectionConfig {
                aic_estimator: Estimator::Els,
                ..SelectionConfig::default()
            },
            monte_carlo: MonteCarloConfig::default(),
        }
    }

    /// Bouc-Wen piezo actuator: 0.2 Hz and 5 Hz bands at 25 V and 50 V,
    /// input-difference candidates with the exclusion rules.
    pub fn bouc_wen() -> Self {
        Self {
            name: "bouc-wen".into(),
            seed: 1,
            validation_seed: 1001,
            noise_ratio: 0.05,
            output_dir: None,
            system: SystemConfig::BoucWen(BoucWenParams::default()),
            input: Some(InputDesignSpec {
                frequencies: vec![0.2, 5.0],
                segment_lengths: vec![16000, 3200],
                operating_points: vec![0.0, 0.0],
                amplitudes: vec![25.0, 50.0],
                sample_interval: 0.005,
                filter_order: 5,
            }),
            candidates: CandidateConfig {
                degree: 3,
                max_output_lag: 1,
                max_input_lag: 1,
                input_delay: 1,
                variables: vec![Variable::Output, Variable::Input, Variable::Phi1, Variable::Phi2],
                include_constant: false,
            },
            hysteresis: Some(HysteresisCandidateConfig::default()),
            selection: SelectionConfig {
                aic_estimator: Estimator::Els,
                ..SelectionConfig::default()
            },
            monte_carlo: MonteCarloConfig::default(),
        }
    }

    /// Pneumatic valve, forward direction with the unit-sum output
    /// constraint. Needs the (undistributed) measurements.
    pub fn valve() -> Self {
        Self {
            name: "valve".into(),
            seed: 1,
            validation_seed: 1001,
            noise_ratio: 0.0,
            output_dir: None,
            system: SystemConfig::Valve {
                data: None,
                validation: None,
            },
            input: None,
            candidates: CandidateConfig {
                degree: 3,
                max_output_lag: 2,
                max_input_lag: 2,
                input_delay: 1,
                variables: vec![Variable::Output, Variable::Input, Variable::Phi1, Variable::Phi2],
                include_constant: false,
            },
            hysteresis: Some(HysteresisCandidateConfig {
                enforce_sigma_y: true,
                ..HysteresisCandidateConfig::default()
            }),
            selection: SelectionConfig {
                aic_estimator: Estimator::Els,
                enforce_sigma_y: true,
                ..SelectionConfig::default()
            },
            monte_carlo: MonteCarloConfig::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "heating" => Ok(Self::heating()),
            "bouc-wen" => Ok(Self::bouc_wen()),
            "valve" => Ok(Self::valve()),
            _ => Err(Error::Parameter(format!(
                "unknown experiment preset {name:?} (known: {})",
                PRESET_EXPERIMENTS.join(", ")
            ))),
        }
    }

    /// Parses and validates; parse errors carry the line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    /// Checks everything that does not need the file system.
    pub fn validate(&self) -> Result<()> {
        self.candidates.meta().validate()?;
        if self.candidates.variables.is_empty() {
            return Err(Error::Parameter("no candidate variables selected".into()));
        }
        if !(self.noise_ratio >= 0.0 && self.noise_ratio.is_finite()) {
            return Err(Error::Parameter(format!(
                "noise_ratio must be non-negative, got {}",
                self.noise_ratio
            )));
        }
        if let Some(spec) = &self.input {
            spec.validate()?;
        }
        if let Some(b) = self.system.benchmark() {
            if let BenchmarkSystem::BoucWen(p) = b {
                p.validate()?;
            }
            let spec = self.input.as_ref().ok_or_else(|| {
                Error::Parameter("benchmark systems need an [input] design section".into())
            })?;
            if let BenchmarkSystem::BoucWen(p) = b {
                if (spec.sample_interval - p.dt).abs() > 1e-12 * p.dt {
                    return Err(Error::Parameter(format!(
                        "input sample_interval {} differs from the Bouc-Wen step {}",
                        spec.sample_interval, p.dt
                    )));
                }
            }
        }
        if let SystemConfig::Csv { sample_interval, .. } = &self.system {
            if !(*sample_interval > 0.0) {
                return Err(Error::Parameter("sample_interval must be positive".into()));
            }
        }
        if self.monte_carlo.trials == 0 {
            return Err(Error::Parameter("monte_carlo.trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn direction(&self) -> Direction {
        self.hysteresis.map(|h| h.direction).unwrap_or_default()
    }

    /// Selection settings with the hysteresis switches folded in.
    pub fn selection_config(&self) -> SelectionConfig {
        let mut s = self.selection;
        if let Some(h) = &self.hysteresis {
            s.enforce_sigma_y |= h.enforce_sigma_y;
        }
        s
    }

    pub fn candidate_pool(&self) -> Result<(CandidateSet, Option<ExclusionReport>)> {
        self.candidates.build(self.hysteresis.as_ref())
    }

    /// Simulation setup for benchmark systems.
    pub fn setup(&self) -> Result<IdentificationSetup> {
        self.validate()?;
        let system = match &self.system {
            SystemConfig::Valve { .. } => return Err(valve_error()),
            SystemConfig::Csv { .. } => {
                return Err(Error::Parameter(
                    "this operation needs a simulated benchmark system, not recorded data".into(),
                ))
            }
            s => s.benchmark().expect("benchmark variant"),
        };
        let (candidates, _) = self.candidate_pool()?;
        Ok(IdentificationSetup {
            system,
            input: self.input.clone().expect("validated"),
            candidates,
            selection: self.selection_config(),
            direction: self.direction(),
        })
    }

    /// Identification record: simulated with `seed` and `noise_ratio`, or
    /// read from disk.
    pub fn identification_data(&self) -> Result<TimeSeriesData> {
        match &self.system {
            SystemConfig::Csv {
                identification,
                sample_interval,
                ..
            } => TimeSeriesData::load_csv(identification, *sample_interval),
            SystemConfig::Valve { data: Some(p), .. } => {
                TimeSeriesData::load_csv(p, VALVE_SAMPLE_INTERVAL)
            }
            SystemConfig::Valve { data: None, .. } => Err(valve_error()),
            _ => self
                .setup()?
                .noisy_record(self.noise_ratio, self.seed, &format!("{} identification", self.name)),
        }
    }

    /// Held-out record: noise-free simulation with `validation_seed`, or the
    /// validation file.
    pub fn validation_data(&self) -> Result<TimeSeriesData> {
        match &self.system {
            SystemConfig::Csv {
                validation: Some(p),
                sample_interval,
                ..
            } => TimeSeriesData::load_csv(p, *sample_interval),
            SystemConfig::Valve {
                validation: Some(p),
                ..
            } => TimeSeriesData::load_csv(p, VALVE_SAMPLE_INTERVAL),
            SystemConfig::Valve { .. } => Err(valve_error()),
            SystemConfig::Csv { .. } => Err(Error::MissingInput(
                "no validation file configured for the CSV system".into(),
            )),
            _ => self
                .setup()?
                .clean_record(self.validation_seed, &format!("{} validation", self.name)),
        }
    }

    /// Output directory: explicit override, then the config, then
    /// `$NARXID_OUTPUT_DIR`, then `narxid-out`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("narxid-out"))
    }
}

pub const OUTPUT_DIR_ENV: &str = "NARXID_OUTPUT_DIR";

fn valve_error() -> Error {
    Error::DataNotDistributed(
        "the valve measurements are not part of this distribution; set system.data to a local `k,u,y` file"
            .into(),
    )
}

/// Everything needed to regenerate and re-identify a benchmark record.
#[derive(Debug, Clone)]
pub struct IdentificationSetup {
    pub system: BenchmarkSystem,
    pub input: InputDesignSpec,
    pub candidates: CandidateSet,
    pub selection: SelectionConfig,
    pub direction: Direction,
}

impl IdentificationSetup {
    /// Designed input and clean simulated output for `seed`.
    pub fn clean_record(&self, seed: u64, label: &str) -> Result<TimeSeriesData> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = design_input(&self.input, &mut rng)?;
        let y = self.system.simulate(&u)?;
        TimeSeriesData::new(u, y.clone(), self.input.sample_interval, label)?.with_clean_output(y)
    }

    /// As [`clean_record`](Self::clean_record), with white output noise of
    /// standard deviation `ratio` times that of the clean output. The noise
    /// is drawn after the input from the same generator.
    pub fn noisy_record(&self, ratio: f64, seed: u64, label: &str) -> Result<TimeSeriesData> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = design_input(&self.input, &mut rng)?;
        let y = self.system.simulate(&u)?;
        let noisy = add_output_noise(&y, ratio, &mut rng)?;
        TimeSeriesData::new(u, noisy, self.input.sample_interval, label)?.with_clean_output(y)
    }

    pub fn identify(&self, data: &TimeSeriesData) -> Result<Selection> {
        identify(&self.candidates, data, &self.selection, self.direction)
    }
}

/// Structure selection in the requested direction; inverse models are
/// fitted on the record with input and output exchanged.
pub fn identify(
    candidates: &CandidateSet,
    data: &TimeSeriesData,
    selection: &SelectionConfig,
    direction: Direction,
) -> Result<Selection> {
    match direction {
        Direction::Direct => select_structure(candidates, data, selection),
        Direction::Inverse => {
            let mut sel = select_structure(candidates, &data.swapped(), selection)?;
            sel.model = sel.model.with_direction(Direction::Inverse);
            Ok(sel)
        }
    }
}

/// One Monte Carlo trial: fresh input and noise from `seed`, full structure
/// selection, free-run MAPE on `validation`.
pub fn run_trial(
    setup: &IdentificationSetup,
    ratio: f64,
    seed: u64,
    validation: &TimeSeriesData,
) -> Result<f64> {
    let data = setup.noisy_record(ratio, seed, "trial")?;
    let sel = setup.identify(&data)?;
    Ok(validate(&sel.model, validation, PredictionMode::FreeRun)?.mape)
}
