//! Candidate regressor pools.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::term::{Factor, RegressorTerm, Variable};

/// Degree and lag bounds of a polynomial NARX model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    /// Maximum total degree of a term.
    pub degree: u32,
    pub max_output_lag: usize,
    pub max_input_lag: usize,
    /// Pure delay; smallest lag allowed for the input and its differences.
    pub input_delay: usize,
}

impl ModelMeta {
    pub fn new(degree: u32, max_output_lag: usize, max_input_lag: usize, input_delay: usize) -> Self {
        Self {
            degree,
            max_output_lag,
            max_input_lag,
            input_delay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::Parameter("degree must be at least 1".into()));
        }
        if self.max_output_lag < 1 {
            return Err(Error::Parameter("maximum output lag must be at least 1".into()));
        }
        if self.input_delay < 1 {
            return Err(Error::Parameter("input delay must be at least 1".into()));
        }
        if self.max_input_lag < self.input_delay {
            return Err(Error::Parameter(format!(
                "maximum input lag {} is below the input delay {}",
                self.max_input_lag, self.input_delay
            )));
        }
        Ok(())
    }

    /// Lags a variable may take under these bounds.
    pub fn lag_range(&self, v: Variable) -> std::ops::RangeInclusive<usize> {
        match v {
            Variable::Output | Variable::Residual => 1..=self.max_output_lag,
            Variable::Input | Variable::Phi1 | Variable::Phi2 => {
                self.input_delay..=self.max_input_lag
            }
        }
    }

    pub fn admits(&self, term: &RegressorTerm) -> bool {
        term.degree() <= self.degree
            && term
                .factors()
                .iter()
                .all(|f| self.lag_range(f.variable).contains(&f.lag))
    }
}

/// Ordered, duplicate-free pool of candidate terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    terms: Vec<RegressorTerm>,
    meta: ModelMeta,
    include_constant: bool,
}

impl CandidateSet {
    /// Wraps an explicit term list, checking bounds and duplicates.
    /// Terms are stored in canonical order.
    pub fn from_terms(mut terms: Vec<RegressorTerm>, meta: ModelMeta) -> Result<Self> {
        meta.validate()?;
        let mut seen = HashSet::new();
        for t in &terms {
            if !t.is_constant() && !meta.admits(t) {
                return Err(Error::Parameter(format!("term {t} violates the model bounds")));
            }
            if !seen.insert(t.clone()) {
                return Err(Error::Parameter(format!("duplicate candidate {t}")));
            }
        }
        terms.sort();
        let include_constant = terms.first().is_some_and(RegressorTerm::is_constant);
        Ok(Self {
            terms,
            meta,
            include_constant,
        })
    }

    pub fn terms(&self) -> &[RegressorTerm] {
        &self.terms
    }

    pub fn meta(&self) -> ModelMeta {
        self.meta
    }

    pub fn include_constant(&self) -> bool {
        self.include_constant
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn history(&self) -> usize {
        self.terms.iter().map(RegressorTerm::history).max().unwrap_or(0)
    }

    pub fn uses(&self, v: Variable) -> bool {
        self.terms.iter().any(|t| t.uses(v))
    }

    pub fn contains(&self, t: &RegressorTerm) -> bool {
        self.terms.binary_search(t).is_ok()
    }

    /// Keeps the terms matching `keep`; order is preserved.
    pub fn filtered(&self, mut keep: impl FnMut(&RegressorTerm) -> bool) -> Self {
        Self {
            terms: self.terms.iter().filter(|t| keep(t)).cloned().collect(),
            meta: self.meta,
            include_constant: self.include_constant,
        }
    }
}

/// Enumerates every monomial of total degree `1..=degree` over the lagged
/// copies of `variables`, plus the constant when requested.
pub fn generate_candidates(
    meta: ModelMeta,
    variables: &[Variable],
    include_constant: bool,
) -> Result<CandidateSet> {
    meta.validate()?;
    let mut kinds: Vec<Variable> = variables.to_vec();
    kinds.sort();
    kinds.dedup();
    if kinds.is_empty() {
        return Err(Error::Parameter("no candidate variables selected".into()));
    }

    let lagged: Vec<(Variable, usize)> = kinds
        .iter()
        .flat_map(|&v| meta.lag_range(v).map(move |lag| (v, lag)))
        .collect();

    let mut terms = Vec::new();
    if include_constant {
        terms.push(RegressorTerm::constant());
    }
    // Multisets of size d drawn from `lagged`, as non-decreasing index tuples.
    for d in 1..=meta.degree as usize {
        let mut idx = vec![0usize; d];
        loop {
            let factors = idx.iter().map(|&i| Factor::new(lagged[i].0, lagged[i].1, 1));
            terms.push(RegressorTerm::new(factors)?);

            let mut pos = d;
            while pos > 0 && idx[pos - 1] == lagged.len() - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            let v = idx[pos - 1];
            for slot in idx.iter_mut().skip(pos) {
                *slot = v;
            }
        }
    }
    terms.sort();
    Ok(CandidateSet {
        terms,
        meta,
        include_constant,
    })
}
