//! Reference systems and published models.
//!
//! Two simulated plants serve as identification targets: a Hammerstein model
//! of a small electric heater and a Bouc-Wen model of a piezoelectric
//! actuator. The published NARX and Bouc-Wen models for these plants and for
//! a pneumatic valve are available as presets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::candidates::ModelMeta;
use crate::data::fmt_f64;
use crate::error::{Error, Result};
use crate::model::{free_run_simulate, Direction, FreeRun, NarxModel, SimulationOptions};
use crate::term::{Factor, RegressorTerm, Variable};

// ---------------------------------------------------------------------------
// Hammerstein heater

/// `v(k) = p1 u(k)² + p2 u(k)`,
/// `y(k) = β1 y(k-1) + β2 v(k-1) + β3 y(k-2) + β4 v(k-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HammersteinParams {
    pub p1: f64,
    pub p2: f64,
    pub beta: [f64; 4],
}

impl Default for HammersteinParams {
    fn default() -> Self {
        Self {
            p1: 4.639331e-1,
            p2: 5.435865e-2,
            beta: [1.205445, 8.985133e-2, -3.0877507e-1, 9.462358e-3],
        }
    }
}

impl HammersteinParams {
    pub fn static_nonlinearity(&self, u: f64) -> f64 {
        self.p1 * u * u + self.p2 * u
    }

    /// DC gain from `v` to `y`.
    pub fn linear_gain(&self) -> f64 {
        let [b1, b2, b3, b4] = self.beta;
        (b2 + b4) / (1.0 - b1 - b3)
    }

    pub fn steady_state(&self, u: f64) -> f64 {
        self.linear_gain() * self.static_nonlinearity(u)
    }

    /// Roots of `z² - β1 z - β3` inside the unit circle.
    pub fn is_stable(&self) -> bool {
        let [b1, _, b3, _] = self.beta;
        // Jury conditions for z² + a1 z + a2 with a1 = -β1, a2 = -β3.
        let (a1, a2) = (-b1, -b3);
        a2.abs() < 1.0 && 1.0 + a1 + a2 > 0.0 && 1.0 - a1 + a2 > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HammersteinRun {
    pub y: Vec<f64>,
    /// Input samples outside the model's validity range `[0, 1]`.
    pub out_of_range: usize,
}

/// Simulates the heater from zero initial conditions.
pub fn simulate_hammerstein(params: &HammersteinParams, u: &[f64]) -> Result<HammersteinRun> {
    let [b1, b2, b3, b4] = params.beta;
    let v: Vec<f64> = u.iter().map(|x| params.static_nonlinearity(*x)).collect();
    let at = |s: &[f64], k: usize, lag: usize| if k >= lag { s[k - lag] } else { 0.0 };
    let mut y = vec![0.0; u.len()];
    for k in 0..u.len() {
        let val = b1 * at(&y, k, 1) + b2 * at(&v, k, 1) + b3 * at(&y, k, 2) + b4 * at(&v, k, 2);
        if !val.is_finite() {
            return Err(Error::Diverged { at: k });
        }
        y[k] = val;
    }
    let out_of_range = u.iter().filter(|x| !(0.0..=1.0).contains(*x)).count();
    Ok(HammersteinRun { y, out_of_range })
}

// ---------------------------------------------------------------------------
// Bouc-Wen

/// `ḣ = α u̇ - β |u̇| h - γ u̇ |h|`, `y = ν u - h`, integrated with step `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoucWenParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub nu: f64,
    pub dt: f64,
}

impl Default for BoucWenParams {
    /// Piezoelectric cantilever actuator, u in V and y in µm.
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 0.008,
            gamma: 0.008,
            nu: 1.6,
            dt: 0.005,
        }
    }
}

impl BoucWenParams {
    /// Bouc-Wen fit of the pneumatic valve, integrated at its 10 ms sampling.
    pub fn valve() -> Self {
        Self {
            alpha: 7.54e-1,
            beta: 4.96,
            gamma: 3.61,
            nu: 7.21e-1,
            dt: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.gamma, self.nu]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(
                "Bouc-Wen parameters must be finite with a positive step".into(),
            ));
        }
        Ok(())
    }

    fn h_dot(&self, h: f64, u_dot: f64) -> f64 {
        self.alpha * u_dot - self.beta * u_dot.abs() * h - self.gamma * u_dot * h.abs()
    }

    fn rk4(&self, h: f64, d0: f64, dm: f64, d1: f64, dt: f64) -> f64 {
        let k1 = self.h_dot(h, d0);
        let k2 = self.h_dot(h + 0.5 * dt * k1, dm);
        let k3 = self.h_dot(h + 0.5 * dt * k2, dm);
        let k4 = self.h_dot(h + dt * k3, d1);
        h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoucWenRun {
    pub y: Vec<f64>,
    pub h: Vec<f64>,
    /// First sample at which `h` stopped being finite or exceeded the guard.
    pub diverged_at: Option<usize>,
}

impl BoucWenRun {
    pub fn into_result(self) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.diverged_at {
            Some(at) => Err(Error::Diverged { at }),
            None => Ok((self.y, self.h)),
        }
    }
}

const BOUC_WEN_GUARD: f64 = 1e12;

/// Central differences inside, one-sided at the ends.
pub fn sampled_derivative(u: &[f64], dt: f64) -> Vec<f64> {
    let n = u.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| {
                if k == 0 {
                    (u[1] - u[0]) / dt
                } else if k == n - 1 {
                    (u[n - 1] - u[n - 2]) / dt
                } else {
                    (u[k + 1] - u[k - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

/// Integrates the model for an input sampled every `params.dt` seconds.
///
/// `u̇` at the sample instants comes from [`sampled_derivative`]; at the half
/// step it is the secant slope of the step, which is exact for an input that
/// is linear between samples.
pub fn simulate_bouc_wen(params: &BoucWenParams, u: &[f64]) -> Result<BoucWenRun> {
    params.validate()?;
    let dt = params.dt;
    let du = sampled_derivative(u, dt);
    let mut h = vec![0.0; u.len()];
    let mut diverged_at = None;
    for k in 1..u.len() {
        let mid = (u[k] - u[k - 1]) / dt;
        let next = params.rk4(h[k - 1], du[k - 1], mid, du[k], dt);
        if !next.is_finite() || next.abs() > BOUC_WEN_GUARD {
            diverged_at = Some(k);
            h.truncate(k);
            break;
        }
        h[k] = next;
    }
    let y = u.iter().zip(&h).map(|(u, h)| params.nu * u - h).collect();
    Ok(BoucWenRun { y, h, diverged_at })
}

/// Integrates the model for a continuous input with known derivative,
/// `n_steps` steps of `dt` from `t = 0`. Returns `n_steps + 1` samples.
pub fn simulate_bouc_wen_continuous(
    params: &BoucWenParams,
    u: impl Fn(f64) -> f64,
    u_dot: impl Fn(f64) -> f64,
    dt: f64,
    n_steps: usize,
) -> Result<BoucWenRun> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::Parameter("integration step must be positive".into()));
    }
    let mut h = Vec::with_capacity(n_steps + 1);
    h.push(0.0);
    let mut diverged_at = None;
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let next = params.rk4(h[k], u_dot(t), u_dot(t + 0.5 * dt), u_dot(t + dt), dt);
        if !next.is_finite() || next.abs() > BOUC_WEN_GUARD {
            diverged_at = Some(k + 1);
            break;
        }
        h.push(next);
    }
    let y = h
        .iter()
        .enumerate()
        .map(|(k, h)| params.nu * u(k as f64 * dt) - h)
        .collect();
    Ok(BoucWenRun { y, h, diverged_at })
}

// ---------------------------------------------------------------------------
// Simulated plants used as identification targets

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BenchmarkSystem {
    Hammerstein(HammersteinParams),
    BoucWen(BoucWenParams),
}

impl BenchmarkSystem {
    pub fn simulate(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Hammerstein(p) => Ok(simulate_hammerstein(p, u)?.y),
            Self::BoucWen(p) => Ok(simulate_bouc_wen(p, u)?.into_result()?.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Hammerstein(_) => "hammerstein",
            Self::BoucWen(_) => "bouc-wen",
        }
    }
}

// ---------------------------------------------------------------------------
// Published models

#[derive(Debug, Clone, PartialEq)]
pub enum PresetSystem {
    Narx(NarxModel),
    BoucWen(BoucWenParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub system: PresetSystem,
}

impl Preset {
    pub fn narx(&self) -> Option<&NarxModel> {
        match &self.system {
            PresetSystem::Narx(m) => Some(m),
            PresetSystem::BoucWen(_) => None,
        }
    }

    pub fn ts(&self) -> f64 {
        match &self.system {
            PresetSystem::Narx(m) => m.ts,
            PresetSystem::BoucWen(p) => p.dt,
        }
    }

    pub fn to_text(&self) -> String {
        let body = match &self.system {
            PresetSystem::Narx(m) => m.equation(),
            PresetSystem::BoucWen(p) => format!(
                "dh/dt = {} du/dt - {} |du/dt| h - {} du/dt |h|\ny = {} u - h\nstep = {} s",
                p.alpha, p.beta, p.gamma, p.nu, p.dt
            ),
        };
        format!("{}: {}\n{}\n", self.name, self.description, body)
    }
}

fn f(variable: Variable, lag: usize) -> Factor {
    Factor::new(variable, lag, 1)
}

fn term(factors: &[Factor]) -> RegressorTerm {
    RegressorTerm::new(factors.iter().copied()).expect("preset terms are well formed")
}

fn narx(
    name: &'static str,
    description: &'static str,
    entries: Vec<(RegressorTerm, f64)>,
    meta: ModelMeta,
    ts: f64,
    direction: Direction,
) -> Preset {
    let (terms, theta): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
    let model = NarxModel::new(terms, theta, meta, ts)
        .expect("preset models are valid")
        .with_direction(direction)
        .with_label(name);
    Preset {
        name,
        description,
        system: PresetSystem::Narx(model),
    }
}

/// The published models, with their coefficients as printed.
pub fn preset_models() -> Vec<Preset> {
    use Variable::{Input as U, Output as Y, Phi1 as P1, Phi2 as P2};
    vec![
        narx(
            "heating-narx",
            "three-term NARX model of the Hammerstein heater",
            vec![
                (term(&[f(Y, 1)]), 8.958185e-1),
                (term(&[Factor::new(U, 2, 2)]), 6.393347e-2),
                (term(&[f(Y, 2)]), -1.746750e-2),
            ],
            ModelMeta::new(3, 3, 3, 1),
            1.0,
            Direction::Direct,
        ),
        narx(
            "bouc-wen-narx",
            "four-term NARX model of the piezoelectric Bouc-Wen actuator; \
             the printed third signal in two terms is read as phi1",
            vec![
                (term(&[f(Y, 1)]), 1.000099),
                (term(&[f(P2, 1), f(P1, 1), f(U, 1)]), 6.630567e-3),
                (term(&[f(P2, 1), f(P1, 1), f(Y, 1)]), -6.247018e-3),
                (term(&[f(P2, 1)]), 7.892915),
            ],
            ModelMeta::new(3, 1, 1, 1),
            0.005,
            Direction::Direct,
        ),
        narx(
            "valve-narx",
            "constrained NARX model of the pneumatic valve (output-term sum 1)",
            vec![
                (term(&[f(Y, 1)]), 9.76e-1),
                (term(&[f(Y, 2)]), 2.40e-2),
                (term(&[f(P1, 1)]), 1.19e-1),
                (term(&[f(U, 1), f(P1, 1), f(P2, 1)]), 3.76),
                (term(&[f(Y, 2), f(P1, 1), f(P2, 1)]), -4.73),
            ],
            ModelMeta::new(3, 2, 1, 1),
            0.01,
            Direction::Direct,
        ),
        Preset {
            name: "valve-bouc-wen",
            description: "Bouc-Wen model of the pneumatic valve",
            system: PresetSystem::BoucWen(BoucWenParams::valve()),
        },
        narx(
            "valve-narx-compensation",
            "NARX model of the pneumatic valve with isolable input for compensation",
            vec![
                (term(&[f(Y, 1)]), 1.0),
                (term(&[f(P1, 2)]), -19.76),
                (term(&[f(P1, 1)]), 19.32),
                (term(&[f(P2, 2), f(P1, 2), f(U, 2)]), 9.44),
                (term(&[f(P2, 2), f(P1, 2), f(Y, 1)]), -12.61),
            ],
            ModelMeta::new(3, 2, 2, 1),
            0.01,
            Direction::Direct,
        ),
        narx(
            "valve-inverse",
            "inverse NARX model of the pneumatic valve: predicts the input from \
             the output; u and y below are the model's own input (valve output) \
             and output (valve input)",
            vec![
                (term(&[f(Y, 1)]), 1.0),
                (term(&[f(P1, 1)]), 86.67),
                (term(&[f(P1, 2)]), -85.02),
                (term(&[f(P1, 1), f(U, 2)]), -0.98),
                (term(&[f(P2, 2), f(P1, 2), f(U, 2)]), 1.72),
                (term(&[f(P2, 2), f(P1, 2), f(Y, 1)]), -1.13),
            ],
            ModelMeta::new(3, 2, 2, 1),
            0.01,
            Direction::Inverse,
        ),
    ]
}

pub fn find_preset(name: &str) -> Result<Preset> {
    preset_models()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let names: Vec<_> = preset_models().iter().map(|p| p.name).collect();
            Error::Parameter(format!("unknown preset {name:?}; available: {}", names.join(", ")))
        })
}

/// Runs an inverse model: the measured system output drives the model, whose
/// free-run output estimates the system input.
pub fn run_inverse_model(
    model: &NarxModel,
    y: &[f64],
    u_init: &[f64],
    options: SimulationOptions,
) -> Result<FreeRun> {
    if model.direction != Direction::Inverse {
        return Err(Error::Parameter(format!(
            "model {:?} is not an inverse model",
            model.label
        )));
    }
    free_run_simulate(model, y, u_init, options)
}

/// Writes `k,u,y[,h]` with full precision.
pub fn write_benchmark_csv<W: Write>(
    writer: W,
    u: &[f64],
    y: &[f64],
    h: Option<&[f64]>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    if h.is_some() {
        wtr.write_record(["k", "u", "y", "h"])?;
    } else {
        wtr.write_record(["k", "u", "y"])?;
    }
    for k in 0..u.len().min(y.len()) {
        let mut rec = vec![k.to_string(), fmt_f64(u[k]), fmt_f64(y[k])];
        if let Some(h) = h {
            rec.push(fmt_f64(h[k]));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
