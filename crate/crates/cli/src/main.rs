//! `narxid`: command-line front end for the identification pipeline.
//!
//! Settings are resolved in this order, first match wins: command-line flag,
//! experiment config file (or built-in preset), then built-in default. The
//! output directory falls back to `$NARXID_OUTPUT_DIR`, then `narxid-out`.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use narxid::benchmarks::{find_preset, preset_models, PresetSystem};
use narxid::data::{read_signal_csv, write_signal_csv};
use narxid::evaluation::{monte_carlo_noise_sweep, validate, PredictionMode};
use narxid::experiment::{identify, ExperimentConfig, OUTPUT_DIR_ENV, PRESET_EXPERIMENTS};
use narxid::input_design::{add_output_noise, design_input, sine_input};
use narxid::{free_run_simulate, Error, NarxModel, Result, SimulationOptions, TimeSeriesData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "narxid", version, about = "Polynomial NARX system identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: heating, bouc-wen or valve.
    #[arg(long)]
    preset: Option<String>,
    /// Seed for the identification record; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config and $NARXID_OUTPUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Design the excitation signal and write it as `k,u`.
    DesignInput {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Simulate a benchmark system, a model file or a preset model.
    Simulate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Input file (`k,u`); designed from the config when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output noise ratio; overrides the config.
        #[arg(long)]
        noise_ratio: Option<f64>,
        /// Write the noise-free validation record instead.
        #[arg(long)]
        validation: bool,
        /// Simulate this model file instead of the benchmark system.
        #[arg(long, conflicts_with = "preset_model")]
        model: Option<PathBuf>,
        /// Simulate a published model or plant by catalog name.
        #[arg(long)]
        preset_model: Option<String>,
        /// Sine input `A,f[,phase,offset,N]` instead of a file.
        #[arg(long, conflicts_with = "input")]
        sine: Option<String>,
    },
    /// Select a model structure and estimate its parameters.
    Identify {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Identification record (`k,u,y`) instead of the configured source.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output noise ratio; overrides the config.
        #[arg(long)]
        noise_ratio: Option<f64>,
    },
    /// Score a model on held-out data.
    Validate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Model file written by `identify`.
        #[arg(long, conflicts_with = "preset_model")]
        model: Option<PathBuf>,
        /// Published model by catalog name.
        #[arg(long)]
        preset_model: Option<String>,
        /// Validation record (`k,u,y`).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Drive the reference with a sine `A,f[,phase,offset,N]`.
        #[arg(long, conflicts_with = "data")]
        sine: Option<String>,
        /// Reference for sine mode: `config` or a catalog plant/model name.
        #[arg(long, default_value = "config")]
        reference: String,
        /// `free-run` or `one-step`.
        #[arg(long, default_value = "free-run")]
        mode: String,
        /// Seed for the simulated validation record; overrides the config.
        #[arg(long)]
        validation_seed: Option<u64>,
    },
    /// Noise-robustness sweep over output noise ratios.
    MonteCarlo {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Noise ratios in percent: `0,10,30` or `start:step:end`.
        #[arg(long)]
        ratios: Option<String>,
        /// Trials per ratio.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Published models and built-in experiments.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List catalog models and experiment presets.
    List,
    /// Print a catalog model or an experiment preset config.
    Show { name: String },
    /// Write a catalog model file or experiment config to `path`.
    Export { name: String, path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::DesignInput { exp } => cmd_design_input(&exp),
        Command::Simulate {
            exp,
            input,
            noise_ratio,
            validation,
            model,
            preset_model,
            sine,
        } => {
            if model.is_some() || preset_model.is_some() {
                cmd_simulate_model(&exp, model.as_deref(), preset_model.as_deref(), input.as_deref(), sine.as_deref())
            } else {
                cmd_simulate(&exp, input.as_deref(), sine.as_deref(), noise_ratio, validation)
            }
        }
        Command::Identify {
            exp,
            data,
            noise_ratio,
        } => cmd_identify(&exp, data.as_deref(), noise_ratio),
        Command::Validate {
            exp,
            model,
            preset_model,
            data,
            sine,
            reference,
            mode,
            validation_seed,
        } => cmd_validate(
            &exp,
            model.as_deref(),
            preset_model.as_deref(),
            data.as_deref(),
            sine.as_deref(),
            &reference,
            mode.parse()?,
            validation_seed,
        ),
        Command::MonteCarlo {
            exp,
            ratios,
            trials,
        } => cmd_monte_carlo(&exp, ratios.as_deref(), trials),
        Command::Presets { action } => cmd_presets(action),
    }
}

impl ExperimentArgs {
    fn load_optional(&self) -> Result<Option<ExperimentConfig>> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => return Ok(None),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(Some(cfg))
    }

    fn load(&self) -> Result<ExperimentConfig> {
        self.load_optional()?.ok_or_else(|| {
            Error::MissingInput(format!(
                "give --config FILE or --preset NAME ({})",
                PRESET_EXPERIMENTS.join(", ")
            ))
        })
    }

    fn output_dir(&self, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
        let dir = match cfg {
            Some(c) => c.resolve_output_dir(self.out.as_deref()),
            None => self
                .out
                .clone()
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("narxid-out")),
        };
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    announce(path);
    Ok(())
}

fn cmd_design_input(exp: &ExperimentArgs) -> Result<()> {
    let cfg = exp.load()?;
    cfg.validate()?;
    let spec = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::MissingInput("config has no [input] design section".into()))?;
    let u = design_input(spec, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let dir = exp.output_dir(Some(&cfg))?;
    let path = dir.join("input.csv");
    write_signal_csv(File::create(&path)?, "u", &u)?;
    announce(&path);
    write_text(
        &dir.join("design-input.log"),
        &format!("# resolved experiment; input drawn with seed {}\n{}", cfg.seed, cfg.to_toml()),
    )?;
    println!("{} samples, seed {}", u.len(), cfg.seed);
    Ok(())
}

fn read_input(path: &Path) -> Result<Vec<f64>> {
    read_signal_csv(File::open(path)?)
}

/// `A,f[,phase,offset,N]`; N defaults to three periods.
fn parse_sine(text: &str, ts: f64) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad sine field {s:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if !(parts.len() == 2 || parts.len() == 5) {
        return Err(Error::Parse("sine takes A,f or A,f,phase,offset,N".into()));
    }
    let (amp, freq) = (parts[0], parts[1]);
    if !(freq > 0.0) {
        return Err(Error::Parameter("sine frequency must be positive".into()));
    }
    let (phase, offset, n) = if parts.len() == 5 {
        (parts[2], parts[3], parts[4] as usize)
    } else {
        (0.0, 0.0, (3.0 / (freq * ts)).round() as usize)
    };
    if n < 2 {
        return Err(Error::Parameter("sine needs at least two samples".into()));
    }
    Ok(sine_input(amp, freq, phase, offset, n, ts))
}

fn cmd_simulate(
    exp: &ExperimentArgs,
    input: Option<&Path>,
    sine: Option<&str>,
    noise_ratio: Option<f64>,
    validation: bool,
) -> Result<()> {
    let mut cfg = exp.load()?;
    if let Some(r) = noise_ratio {
        cfg.noise_ratio = r;
    }
    let setup = cfg.setup()?;
    let dir = exp.output_dir(Some(&cfg))?;
    let ts = setup.input.sample_interval;
    let given = match (input, sine) {
        (Some(p), _) => Some(read_input(p)?),
        (None, Some(s)) => Some(parse_sine(s, ts)?),
        _ => None,
    };
    let (data, name) = match given {
        Some(u) => {
            let y = setup.system.simulate(&u)?;
            let ratio = if validation { 0.0 } else { cfg.noise_ratio };
            let noisy = add_output_noise(&y, ratio, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
            let d = TimeSeriesData::new(u, noisy, ts, "simulation")?.with_clean_output(y)?;
            (d, "simulation.csv")
        }
        None if validation => (
            setup.clean_record(cfg.validation_seed, "validation")?,
            "validation.csv",
        ),
        None => (
            setup.noisy_record(cfg.noise_ratio, cfg.seed, "identification")?,
            "data.csv",
        ),
    };
    let path = dir.join(name);
    data.save_csv(&path)?;
    announce(&path);
    println!("{} {} samples", setup.system.name(), data.len());
    Ok(())
}

fn cmd_simulate_model(
    exp: &ExperimentArgs,
    model: Option<&Path>,
    preset: Option<&str>,
    input: Option<&Path>,
    sine: Option<&str>,
) -> Result<()> {
    let dir = exp.output_dir(exp.load_optional()?.as_ref())?;
    let (u, y) = match preset.map(find_preset).transpose()? {
        Some(p) => {
            let u = source_input(input, sine, p.ts())?;
            let y = match &p.system {
                PresetSystem::Narx(m) => free_run(m, &u)?,
                PresetSystem::BoucWen(b) => narxid::benchmarks::simulate_bouc_wen(b, &u)?
                    .into_result()?
                    .0,
            };
            (u, y)
        }
        None => {
            let m = NarxModel::load(model.expect("model or preset"))?;
            let u = source_input(input, sine, m.ts)?;
            let y = free_run(&m, &u)?;
            (u, y)
        }
    };
    let path = dir.join("simulation.csv");
    narxid::benchmarks::write_benchmark_csv(File::create(&path)?, &u, &y, None)?;
    announce(&path);
    Ok(())
}

fn source_input(input: Option<&Path>, sine: Option<&str>, ts: f64) -> Result<Vec<f64>> {
    match (input, sine) {
        (Some(p), _) => read_input(p),
        (None, Some(s)) => parse_sine(s, ts),
        (None, None) => Err(Error::MissingInput("give --input FILE or --sine A,f".into())),
    }
}

/// Free run from rest at zero with the data-scaled divergence guard.
fn free_run(m: &NarxModel, u: &[f64]) -> Result<Vec<f64>> {
    let y0 = vec![0.0; m.max_output_lag().max(1)];
    let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    free_run_simulate(m, u, &y0, SimulationOptions::with_bound(1e6 * (scale + 1.0)))?.into_result()
}

fn cmd_identify(exp: &ExperimentArgs, data: Option<&Path>, noise_ratio: Option<f64>) -> Result<()> {
    let mut cfg = exp.load()?;
    if let Some(r) = noise_ratio {
        cfg.noise_ratio = r;
    }
    cfg.validate()?;
    let record = match data {
        Some(p) => {
            let ts = match &cfg.system {
                narxid::experiment::SystemConfig::Csv { sample_interval, .. } => *sample_interval,
                _ => cfg
                    .input
                    .as_ref()
                    .map(|s| s.sample_interval)
                    .unwrap_or(narxid::experiment::VALVE_SAMPLE_INTERVAL),
            };
            TimeSeriesData::load_csv(p, ts)?
        }
        None => cfg.identification_data()?,
    };
    let (pool, exclusion) = cfg.candidate_pool()?;
    let selection = cfg.selection_config();
    let sel = identify(&pool, &record, &selection, cfg.direction())?;
    let model = sel.model.clone().with_label(format!("{} (seed {})", cfg.name, cfg.seed));

    let dir = exp.output_dir(Some(&cfg))?;
    let path = dir.join("model.toml");
    model.save(&path)?;
    announce(&path);
    let path = dir.join("err.csv");
    sel.ranking.write_csv(File::create(&path)?)?;
    announce(&path);
    let path = dir.join("aic.csv");
    sel.aic.write_csv(File::create(&path)?)?;
    announce(&path);
    write_text(&dir.join("estimation.toml"), &sel.report.to_toml())?;
    if let Some(ex) = &exclusion {
        write_text(&dir.join("exclusion.txt"), &ex.to_text())?;
    }
    let path = dir.join("data.csv");
    record.save_csv(&path)?;
    announce(&path);

    let mut report = String::new();
    report.push_str(&format!("experiment: {}\n", cfg.name));
    report.push_str(&format!("seed: {}\nnoise ratio: {}\n", cfg.seed, cfg.noise_ratio));
    report.push_str(&format!("samples: {}\n", record.len()));
    if let Some(ex) = &exclusion {
        report.push_str(&format!(
            "candidates: {} ({} removed by exclusion rules)\n",
            pool.len(),
            ex.removed.len()
        ));
    } else {
        report.push_str(&format!("candidates: {}\n", pool.len()));
    }
    report.push_str(&format!("ranked terms: {}\n", sel.ranking.len()));
    report.push_str(&format!("AIC minimum at {} terms\n", sel.aic.argmin));
    report.push_str(&format!(
        "residual variance: {:e}\nELS iterations: {} (converged: {})\n",
        sel.report.residual_variance, sel.report.iterations, sel.report.converged
    ));
    report.push_str(&model.equation());
    report.push('\n');
    write_text(&dir.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    exp: &ExperimentArgs,
    model: Option<&Path>,
    preset: Option<&str>,
    data: Option<&Path>,
    sine: Option<&str>,
    reference: &str,
    mode: PredictionMode,
    validation_seed: Option<u64>,
) -> Result<()> {
    let cfg = exp.load_optional()?;
    let model = match (model, preset) {
        (Some(p), _) => NarxModel::load(p)?,
        (None, Some(name)) => find_preset(name)?
            .narx()
            .cloned()
            .ok_or_else(|| Error::Parameter(format!("{name} is not a NARX model")))?,
        (None, None) => return Err(Error::MissingInput("give --model FILE or --preset-model NAME".into())),
    };
    let record = if let Some(path) = data {
        TimeSeriesData::load_csv(path, model.ts)?
    } else if let Some(s) = sine {
        sine_reference(cfg.as_ref(), reference, s, model.ts)?
    } else {
        let mut cfg = cfg.clone().ok_or_else(|| {
            Error::MissingInput("give --data FILE, --sine A,f, or a config for the validation record".into())
        })?;
        if let Some(v) = validation_seed {
            cfg.validation_seed = v;
        }
        cfg.validation_data()?
    };
    let v = validate(&model, &record, mode)?;
    let dir = exp.output_dir(cfg.as_ref())?;
    let path = dir.join("prediction.csv");
    v.write_csv(File::create(&path)?)?;
    announce(&path);
    let text = format!(
        "model: {}\nmode: {:?}\nsamples scored: {}\nMAPE: {} %\n",
        model.label,
        mode,
        v.prediction.len(),
        narxid::data::fmt_f64(v.mape)
    );
    write_text(&dir.join("validation.txt"), &text)?;
    print!("{text}");
    Ok(())
}

/// Sine-driven reference record: the config's benchmark system, or a
/// catalog plant or model standing in for it.
fn sine_reference(cfg: Option<&ExperimentConfig>, reference: &str, sine: &str, ts: f64) -> Result<TimeSeriesData> {
    let u = parse_sine(sine, ts)?;
    let y = if reference == "config" {
        let cfg = cfg.ok_or_else(|| {
            Error::MissingInput("sine mode needs --config/--preset or --reference NAME".into())
        })?;
        let setup = cfg.setup()?;
        setup.system.simulate(&u)?
    } else {
        match find_preset(reference)?.system {
            PresetSystem::BoucWen(b) => narxid::benchmarks::simulate_bouc_wen(&b, &u)?.into_result()?.0,
            PresetSystem::Narx(m) => free_run(&m, &u)?,
        }
    };
    TimeSeriesData::new(u, y, ts, format!("sine reference ({reference})"))
}

/// Percent list `0,10,30` or range `start:step:end`, returned as fractions.
fn parse_ratios(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad ratio {s:?}: {e}")))
    };
    let pct: Vec<f64> = if text.contains(':') {
        let parts: Vec<f64> = text.split(':').map(num).collect::<Result<_>>()?;
        let [start, step, end] = parts[..] else {
            return Err(Error::Parse("ratio range is start:step:end".into()));
        };
        if !(step > 0.0) || end < start {
            return Err(Error::Parse("ratio range needs step > 0 and end >= start".into()));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    Ok(pct.into_iter().map(|p| p / 100.0).collect())
}

fn cmd_monte_carlo(exp: &ExperimentArgs, ratios: Option<&str>, trials: Option<usize>) -> Result<()> {
    let cfg = exp.load()?;
    let ratios = match ratios {
        Some(r) => parse_ratios(r)?,
        None => cfg.monte_carlo.ratios.clone(),
    };
    let trials = trials.unwrap_or(cfg.monte_carlo.trials);
    let setup = cfg.setup()?;
    let report = monte_carlo_noise_sweep(&setup, &ratios, trials, cfg.seed)?;
    let dir = exp.output_dir(Some(&cfg))?;
    let path = dir.join("monte_carlo.csv");
    report.write_csv(File::create(&path)?)?;
    announce(&path);
    let path = dir.join("monte_carlo_trials.csv");
    report.write_trials_csv(File::create(&path)?)?;
    announce(&path);
    println!("ratio  mean MAPE %  std MAPE %  failures");
    for i in 0..report.ratios.len() {
        println!(
            "{:5.3}  {:11.6}  {:10.6}  {}",
            report.ratios[i], report.mape_mean[i], report.mape_std[i], report.failures[i]
        );
    }
    Ok(())
}

fn cmd_presets(action: PresetAction) -> Result<()> {
    match action {
        PresetAction::List => {
            println!("models:");
            for p in preset_models() {
                println!("  {:<26}{}", p.name, p.description);
            }
            println!("experiments:");
            for name in PRESET_EXPERIMENTS {
                println!("  {name}");
            }
        }
        PresetAction::Show { name } => {
            if PRESET_EXPERIMENTS.contains(&name.as_str()) {
                print!("{}", ExperimentConfig::preset(&name)?.to_toml());
            } else {
                print!("{}", find_preset(&name)?.to_text());
            }
        }
        PresetAction::Export { name, path } => {
            let text = if PRESET_EXPERIMENTS.contains(&name.as_str()) {
                ExperimentConfig::preset(&name)?.to_toml()
            } else {
                find_preset(&name)?
                    .narx()
                    .ok_or_else(|| {
                        Error::Parameter(format!("{name} is a continuous-time plant, not a model file"))
                    })?
                    .to_toml()
            };
            write_text(&path, &text)?;
        }
    }
    Ok(())
}
