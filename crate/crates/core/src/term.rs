//! Regressor terms: products of lagged signals raised to integer powers.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signal a factor draws from. The declaration order is the canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    /// Model output `y`.
    Output,
    /// Exogenous input `u`.
    Input,
    /// First difference of the input, `u(k) - u(k-1)`.
    Phi1,
    /// Sign of the first difference.
    Phi2,
    /// One-step residual; only used by noise (moving-average) terms.
    Residual,
}

impl Variable {
    pub const ALL: [Variable; 5] = [
        Variable::Output,
        Variable::Input,
        Variable::Phi1,
        Variable::Phi2,
        Variable::Residual,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Variable::Output => "y",
            Variable::Input => "u",
            Variable::Phi1 => "phi1",
            Variable::Phi2 => "phi2",
            Variable::Residual => "xi",
        }
    }

    pub fn is_phi(self) -> bool {
        matches!(self, Variable::Phi1 | Variable::Phi2)
    }

    /// Samples of history needed to evaluate this variable at lag `lag`.
    /// The input differences look one sample further back than their lag.
    pub fn history(self, lag: usize) -> usize {
        if self.is_phi() {
            lag + 1
        } else {
            lag
        }
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "y" | "output" => Ok(Variable::Output),
            "u" | "input" => Ok(Variable::Input),
            "phi1" => Ok(Variable::Phi1),
            "phi2" => Ok(Variable::Phi2),
            "xi" | "residual" => Ok(Variable::Residual),
            other => Err(Error::Parse(format!("unknown variable {other:?}"))),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One factor `variable(k - lag)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub variable: Variable,
    pub lag: usize,
    pub exponent: u32,
}

impl Factor {
    pub fn new(variable: Variable, lag: usize, exponent: u32) -> Self {
        Self {
            variable,
            lag,
            exponent,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(k-{})", self.variable, self.lag)?;
        if self.exponent > 1 {
            write!(f, "^{}", self.exponent)?;
        }
        Ok(())
    }
}

/// A monomial of lagged variables. The empty product is the constant term.
///
/// Factors are kept sorted by `(variable, lag)` with repeated variables merged
/// into a single exponent, so two terms describing the same monomial compare
/// equal regardless of how they were built.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Factor>", into = "Vec<Factor>")]
pub struct RegressorTerm {
    factors: Vec<Factor>,
}

impl RegressorTerm {
    pub fn constant() -> Self {
        Self {
            factors: Vec::new(),
        }
    }

    /// Builds a term from factors in any order, merging repeats.
    pub fn new(factors: impl IntoIterator<Item = Factor>) -> Result<Self> {
        let mut fs: Vec<Factor> = Vec::new();
        for f in factors {
            if f.lag == 0 {
                return Err(Error::Parameter(format!("factor {f} has lag 0")));
            }
            if f.exponent == 0 {
                return Err(Error::Parameter(format!(
                    "factor {}(k-{}) has exponent 0",
                    f.variable, f.lag
                )));
            }
            match fs
                .iter_mut()
                .find(|g| g.variable == f.variable && g.lag == f.lag)
            {
                Some(g) => g.exponent += f.exponent,
                None => fs.push(f),
            }
        }
        fs.sort();
        Ok(Self { factors: fs })
    }

    /// Shorthand for a single linear factor.
    pub fn single(variable: Variable, lag: usize) -> Self {
        Self::new([Factor::new(variable, lag, 1)]).expect("positive lag")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.exponent).sum()
    }

    pub fn max_lag(&self) -> usize {
        self.factors.iter().map(|f| f.lag).max().unwrap_or(0)
    }

    /// Samples of history needed before the term can be evaluated.
    pub fn history(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.variable.history(f.lag))
            .max()
            .unwrap_or(0)
    }

    pub fn uses(&self, v: Variable) -> bool {
        self.factors.iter().any(|f| f.variable == v)
    }

    /// Total exponent carried by variable `v`.
    pub fn degree_in(&self, v: Variable) -> u32 {
        self.factors
            .iter()
            .filter(|f| f.variable == v)
            .map(|f| f.exponent)
            .sum()
    }

    /// `y(k-j)` to the first power and nothing else.
    pub fn is_linear_output(&self) -> bool {
        matches!(
            self.factors.as_slice(),
            [Factor {
                variable: Variable::Output,
                exponent: 1,
                ..
            }]
        )
    }

    /// Product of the signal values at sample `k`.
    ///
    /// Callers guarantee `k >= self.history()`.
    pub fn eval(&self, signals: &Signals<'_>, k: usize) -> f64 {
        let mut acc = 1.0;
        for f in &self.factors {
            let v = signals.value(f.variable, k - f.lag);
            acc *= v.powi(f.exponent as i32);
        }
        acc
    }
}

impl Ord for RegressorTerm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.factors.cmp(&other.factors))
    }
}

impl PartialOrd for RegressorTerm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl TryFrom<Vec<Factor>> for RegressorTerm {
    type Error = Error;

    fn try_from(v: Vec<Factor>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RegressorTerm> for Vec<Factor> {
    fn from(t: RegressorTerm) -> Self {
        t.factors
    }
}

impl fmt::Display for RegressorTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (i, fac) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{fac}")?;
        }
        Ok(())
    }
}

impl FromStr for RegressorTerm {
    type Err = Error;

    /// Parses the display form, e.g. `y(k-1)*u(k-2)^2` or `1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Self::constant());
        }
        let mut factors = Vec::new();
        for part in s.split('*') {
            let part = part.trim();
            let bad = || Error::Parse(format!("malformed factor {part:?}"));
            let open = part.find("(k-").ok_or_else(bad)?;
            let close = part.find(')').ok_or_else(bad)?;
            let variable: Variable = part[..open].parse()?;
            let lag: usize = part[open + 3..close].parse().map_err(|_| bad())?;
            let rest = &part[close + 1..];
            let exponent = if rest.is_empty() {
                1
            } else {
                rest.strip_prefix('^')
                    .ok_or_else(bad)?
                    .parse()
                    .map_err(|_| bad())?
            };
            factors.push(Factor::new(variable, lag, exponent));
        }
        Self::new(factors)
    }
}

/// Borrowed signal sequences a term is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct Signals<'a> {
    pub y: &'a [f64],
    pub u: &'a [f64],
    pub phi1: &'a [f64],
    pub phi2: &'a [f64],
    pub xi: Option<&'a [f64]>,
}

impl Signals<'_> {
    #[inline]
    pub fn value(&self, v: Variable, idx: usize) -> f64 {
        match v {
            Variable::Output => self.y[idx],
            Variable::Input => self.u[idx],
            Variable::Phi1 => self.phi1[idx],
            Variable::Phi2 => self.phi2[idx],
            Variable::Residual => self.xi.map_or(0.0, |x| x[idx]),
        }
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
