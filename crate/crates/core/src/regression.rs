//! Regression-matrix assembly.

use nalgebra::{DMatrix, DVector};

use crate::candidates::CandidateSet;
use crate::data::TimeSeriesData;
use crate::error::{Error, Result};
use crate::hysteresis::hysteresis_signals;
use crate::term::{RegressorTerm, Signals, Variable};

/// Linear regression problem `target = matrix * theta + residual`.
///
/// Row `r` corresponds to sample `first_sample + r` of the source record;
/// the first samples without a complete lag history are dropped.
#[derive(Debug, Clone)]
pub struct Regression {
    pub matrix: DMatrix<f64>,
    pub target: DVector<f64>,
    pub first_sample: usize,
    pub terms: Vec<RegressorTerm>,
}

impl Regression {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Sub-problem made of the given columns, same rows.
    pub fn select_columns(&self, cols: &[usize]) -> Regression {
        Regression {
            matrix: self.matrix.select_columns(cols),
            target: self.target.clone(),
            first_sample: self.first_sample,
            terms: cols.iter().map(|&c| self.terms[c].clone()).collect(),
        }
    }
}

/// Builds the regression for a candidate pool.
pub fn build_regression(
    candidates: &CandidateSet,
    data: &TimeSeriesData,
    residuals: Option<&[f64]>,
) -> Result<Regression> {
    build_regression_terms(candidates.terms(), data, residuals, None)
}

/// Builds the regression for an explicit term list.
///
/// `first_sample` forces a later first row, so that nested term subsets can
/// share the rows of a larger pool; it is raised to the terms' history if lower.
pub fn build_regression_terms(
    terms: &[RegressorTerm],
    data: &TimeSeriesData,
    residuals: Option<&[f64]>,
    first_sample: Option<usize>,
) -> Result<Regression> {
    let n = data.len();
    let history = terms.iter().map(RegressorTerm::history).max().unwrap_or(0);
    let p = first_sample.map_or(history, |s| s.max(history));
    if n <= p {
        return Err(Error::InsufficientData {
            needed: p + 1,
            available: n,
        });
    }
    let needs_residuals = terms.iter().any(|t| t.uses(Variable::Residual));
    if needs_residuals {
        match residuals {
            None => {
                return Err(Error::MissingInput(
                    "residual terms need a residual sequence".into(),
                ))
            }
            Some(xi) if xi.len() != n => {
                return Err(Error::MissingInput(format!(
                    "residual sequence has {} samples, record has {n}",
                    xi.len()
                )))
            }
            _ => {}
        }
    }

    let (phi1, phi2) = hysteresis_signals(data.u());
    let signals = Signals {
        y: data.y(),
        u: data.u(),
        phi1: &phi1,
        phi2: &phi2,
        xi: residuals,
    };
    let rows = n - p;
    let matrix = DMatrix::from_fn(rows, terms.len(), |r, c| terms[c].eval(&signals, p + r));
    let target = DVector::from_iterator(rows, data.y()[p..].iter().copied());
    Ok(Regression {
        matrix,
        target,
        first_sample: p,
        terms: terms.to_vec(),
    })
}
