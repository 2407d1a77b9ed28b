//! Hysteresis support: input-difference signals, candidate exclusion rules
//! and the unit-sum constraint on linear output regressors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::estimation::LinearConstraint;
use crate::model::Direction;
use crate::term::{sign0, RegressorTerm, Variable};

/// First difference of `x` (zero at the first sample) and its sign.
pub fn hysteresis_signals(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let phi1: Vec<f64> = std::iter::once(0.0)
        .chain(x.windows(2).map(|w| w[1] - w[0]))
        .take(x.len())
        .collect();
    let phi2 = phi1.iter().map(|&d| sign0(d)).collect();
    (phi1, phi2)
}

/// Checked variant for callers that require at least two samples.
pub fn hysteresis_signals_checked(x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: x.len(),
        });
    }
    Ok(hysteresis_signals(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HysteresisCandidateConfig {
    pub apply_rule_i: bool,
    pub apply_rule_ii: bool,
    pub apply_rule_iii: bool,
    pub enforce_sigma_y: bool,
    pub direction: Direction,
}

impl Default for HysteresisCandidateConfig {
    fn default() -> Self {
        Self {
            apply_rule_i: true,
            apply_rule_ii: true,
            apply_rule_iii: true,
            enforce_sigma_y: false,
            direction: Direction::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionRule {
    /// Output raised above the first power, alone or with difference factors.
    NonlinearOutput,
    /// Sign of the difference raised above the first power.
    SignPower,
    /// Input present without any difference factor.
    InputWithoutDifference,
}

impl fmt::Display for ExclusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionRule::NonlinearOutput => "rule i (output power > 1)",
            ExclusionRule::SignPower => "rule ii (phi2 power > 1)",
            ExclusionRule::InputWithoutDifference => "rule iii (input without phi factor)",
        })
    }
}

/// Which rule, if any, removes `term` under `config`.
pub fn excluding_rule(
    term: &RegressorTerm,
    config: &HysteresisCandidateConfig,
) -> Option<ExclusionRule> {
    let has_phi = term.factors().iter().any(|f| f.variable.is_phi());
    let has_input = term.uses(Variable::Input);
    if config.apply_rule_i && !has_input && term.degree_in(Variable::Output) > 1 {
        return Some(ExclusionRule::NonlinearOutput);
    }
    if config.apply_rule_ii && term.degree_in(Variable::Phi2) > 1 {
        return Some(ExclusionRule::SignPower);
    }
    if config.apply_rule_iii && has_input && !has_phi {
        return Some(ExclusionRule::InputWithoutDifference);
    }
    None
}

/// Pool with excluded terms removed, plus the list of what was removed.
#[derive(Debug, Clone)]
pub struct ExclusionReport {
    pub retained: CandidateSet,
    pub removed: Vec<(RegressorTerm, ExclusionRule)>,
}

impl ExclusionReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (t, r) in &self.removed {
            s.push_str(&format!("{t}\t{r}\n"));
        }
        s
    }
}

pub fn apply_exclusion_rules(
    candidates: &CandidateSet,
    config: &HysteresisCandidateConfig,
) -> ExclusionReport {
    let mut removed = Vec::new();
    let retained = candidates.filtered(|t| match excluding_rule(t, config) {
        Some(rule) => {
            removed.push((t.clone(), rule));
            false
        }
        None => true,
    });
    ExclusionReport { retained, removed }
}

/// Constraint forcing the linear output-regressor parameters to sum to one.
pub fn sigma_y_constraint(terms: &[RegressorTerm]) -> Result<LinearConstraint> {
    let coefficients: Vec<f64> = terms
        .iter()
        .map(|t| if t.is_linear_output() { 1.0 } else { 0.0 })
        .collect();
    if !coefficients.iter().any(|&c| c != 0.0) {
        return Err(Error::Constraint(
            "no linear output regressor to carry the unit-sum constraint".into(),
        ));
    }
    Ok(LinearConstraint {
        coefficients,
        value: 1.0,
    })
}
