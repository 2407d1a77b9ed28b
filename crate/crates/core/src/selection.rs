//! Structure selection: forward-regression orthogonal least squares ranked by
//! the error reduction ratio, truncated by Akaike's information criterion.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::data::{fmt_f64, TimeSeriesData};
use crate::error::{Error, Result};
use crate::estimation::{
    els_estimate_constrained, mean_square, noise_terms, ElsConfig, EstimationReport,
};
use crate::hysteresis::sigma_y_constraint;
use crate::model::NarxModel;
use crate::regression::{build_regression, build_regression_terms, Regression};
use crate::term::RegressorTerm;

/// Squared-norm fraction of a column left after orthogonalization below
/// which the column is considered linearly dependent on the selected ones.
const DEPENDENT_COLUMN: f64 = 1e-12;
/// Cosine between a new orthogonal column and a selected one above which a
/// second Gram-Schmidt pass is run.
const REORTHOGONALIZE: f64 = 1e-8;

/// Terms in order of selection with their error reduction ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrRanking {
    pub terms: Vec<RegressorTerm>,
    pub err: Vec<f64>,
    pub cumulative_err: Vec<f64>,
    /// Parameters of the orthogonal model, one per selected term.
    pub orthogonal_params: Vec<f64>,
    /// Candidates dropped because they became numerically null.
    pub skipped: Vec<RegressorTerm>,
    /// Energy of the orthogonal-model residual relative to `yᵀy`.
    pub residual_energy: f64,
    /// First sample of the regression the ranking was computed on.
    pub first_sample: usize,
}

impl ErrRanking {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rank", "term", "err", "cumulative_err"])?;
        for (i, t) in self.terms.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                t.to_string(),
                fmt_f64(self.err[i]),
                fmt_f64(self.cumulative_err[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ranks the candidate pool on `data`.
pub fn frols_rank(
    candidates: &CandidateSet,
    data: &TimeSeriesData,
    max_terms: usize,
    err_floor: f64,
) -> Result<ErrRanking> {
    let reg = build_regression(candidates, data, None)?;
    frols_rank_regression(&reg, max_terms, err_floor)
}

/// Greedy forward selection over the columns of `reg`.
///
/// Every step orthogonalizes the remaining columns against the last selected
/// one (modified Gram-Schmidt) and picks the column with the largest
/// `ERR = (wᵀy)² / (wᵀw · yᵀy)`. Ties go to the earlier column, so a
/// canonically ordered pool gives an order-independent ranking.
pub fn frols_rank_regression(reg: &Regression, max_terms: usize, err_floor: f64) -> Result<ErrRanking> {
    let m = reg.cols();
    if max_terms > m {
        return Err(Error::Parameter(format!(
            "max_terms {max_terms} exceeds the {m} candidates"
        )));
    }
    let y = reg.target.as_slice();
    let yy = dot(y, y);
    if !(yy > 0.0) {
        return Err(Error::DegenerateRange("target signal is identically zero".into()));
    }

    let mut work: Vec<Vec<f64>> = (0..m).map(|j| reg.matrix.column(j).iter().copied().collect()).collect();
    let norms: Vec<f64> = work.iter().map(|w| dot(w, w)).collect();
    let mut active: Vec<bool> = vec![true; m];
    let mut basis: Vec<Vec<f64>> = Vec::new();

    let mut ranking = ErrRanking {
        terms: Vec::new(),
        err: Vec::new(),
        cumulative_err: Vec::new(),
        orthogonal_params: Vec::new(),
        skipped: Vec::new(),
        residual_energy: 1.0,
        first_sample: reg.first_sample,
    };
    let mut residual: Vec<f64> = y.to_vec();
    let mut cumulative = 0.0;

    while ranking.terms.len() < max_terms {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if !active[j] {
                continue;
            }
            let ww = dot(&work[j], &work[j]);
            if !(ww > DEPENDENT_COLUMN * norms[j]) || ww == 0.0 {
                active[j] = false;
                ranking.skipped.push(reg.terms[j].clone());
                continue;
            }
            let wy = dot(&work[j], y);
            let err = wy * wy / (ww * yy);
            if best.is_none_or(|(_, e)| err > e) {
                best = Some((j, err));
            }
        }
        let Some((j, _)) = best else { break };

        let mut q = std::mem::take(&mut work[j]);
        active[j] = false;
        let lost = basis
            .iter()
            .map(|b| dot(&q, b).abs() / (dot(b, b) * dot(&q, &q)).sqrt())
            .fold(0.0, f64::max);
        if lost > REORTHOGONALIZE {
            for b in &basis {
                let c = dot(&q, b) / dot(b, b);
                axpy(-c, b, &mut q);
            }
        }
        let qq = dot(&q, &q);
        let g = dot(&q, y) / qq;
        let err = g * g * qq / yy;
        if err < err_floor {
            break;
        }
        for (k, w) in work.iter_mut().enumerate() {
            if active[k] {
                let c = dot(w, &q) / qq;
                axpy(-c, &q, w);
            }
        }
        axpy(-g, &q, &mut residual);
        cumulative += err;
        ranking.terms.push(reg.terms[j].clone());
        ranking.err.push(err);
        ranking.cumulative_err.push(cumulative);
        ranking.orthogonal_params.push(g);
        basis.push(q);
    }
    ranking.residual_energy = dot(&residual, &residual) / yy;
    Ok(ranking)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Estimator used for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Ls,
    Els,
}

/// Information criterion over the nested models of a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct AicCurve {
    pub n_theta: Vec<usize>,
    /// `N ln σ² + 2 n_θ`; NaN where the estimate failed.
    pub j_aic: Vec<f64>,
    pub variances: Vec<f64>,
    pub argmin: usize,
}

impl AicCurve {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n_theta", "j_aic", "residual_variance"])?;
        for i in 0..self.n_theta.len() {
            w.write_record([
                self.n_theta[i].to_string(),
                fmt_f64(self.j_aic[i]),
                fmt_f64(self.variances[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Residual variances are floored at this fraction of the mean squared
/// target, the rounding level of an exact fit.
const VARIANCE_FLOOR: f64 = 1e-24;

/// AIC for `J(n) = N ln σ²(n) + 2n`, `n = 1..=len(ranking)`, where σ² is the
/// mean squared one-step residual of the `n`-term model fitted on the rows of
/// the ranking (for ELS, the residual after the moving-average terms).
pub fn aic_curve(
    ranking: &ErrRanking,
    data: &TimeSeriesData,
    estimator: Estimator,
    n_noise_terms: usize,
    els: &ElsConfig,
) -> Result<AicCurve> {
    if ranking.is_empty() {
        return Err(Error::Parameter("empty ranking".into()));
    }
    let reg = build_regression_terms(&ranking.terms, data, None, Some(ranking.first_sample))?;
    let rows = reg.rows() as f64;
    let floor = VARIANCE_FLOOR * mean_square(reg.target.as_slice());
    let n_max = ranking.len();
    let variances: Vec<f64> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let cols: Vec<usize> = (0..n).collect();
            let sub = reg.select_columns(&cols);
            let fit = match estimator {
                Estimator::Ls => els_estimate_constrained(&sub, 0, els, &[]),
                Estimator::Els => els_estimate_constrained(&sub, n_noise_terms, els, &[]),
            };
            // With ELS the residual is the one left after the noise model.
            match fit {
                Ok(r) => r.residual_variance.max(floor),
                Err(_) => f64::NAN,
            }
        })
        .collect();
    let j_aic: Vec<f64> = variances
        .iter()
        .enumerate()
        .map(|(i, v)| rows * v.ln() + 2.0 * (i + 1) as f64)
        .collect();
    let argmin = j_aic
        .iter()
        .enumerate()
        .filter(|(_, j)| j.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i + 1)
        .ok_or_else(|| Error::Parameter("no valid point on the AIC curve".into()))?;
    Ok(AicCurve {
        n_theta: (1..=n_max).collect(),
        j_aic,
        variances,
        argmin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Upper bound on ranked terms; `None` means `min(30, pool size)`.
    pub max_terms: Option<usize>,
    pub err_floor: f64,
    /// Estimator used inside the AIC sweep.
    pub aic_estimator: Estimator,
    /// Estimator for the final fit of the selected structure.
    pub final_estimator: Estimator,
    pub noise_terms: usize,
    pub els: ElsConfig,
    /// Constrain the linear output parameters of the final fit to sum to one.
    pub enforce_sigma_y: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            max_terms: None,
            err_floor: 1e-14,
            aic_estimator: Estimator::Ls,
            final_estimator: Estimator::Els,
            noise_terms: 1,
            els: ElsConfig::default(),
            enforce_sigma_y: false,
        }
    }
}

/// Everything the structure-selection pipeline produces.
#[derive(Debug, Clone)]
pub struct Selection {
    pub model: NarxModel,
    pub ranking: ErrRanking,
    pub aic: AicCurve,
    pub report: EstimationReport,
}

/// Ranks, truncates at the AIC minimum and re-estimates on the full record.
pub fn select_structure(
    candidates: &CandidateSet,
    data: &TimeSeriesData,
    config: &SelectionConfig,
) -> Result<Selection> {
    let max_terms = config
        .max_terms
        .unwrap_or(30)
        .min(candidates.len());
    let ranking = frols_rank(candidates, data, max_terms, config.err_floor)?;
    let aic = aic_curve(&ranking, data, config.aic_estimator, config.noise_terms, &config.els)?;
    let terms = ranking.terms[..aic.argmin].to_vec();
    let (model, report) = fit_structure(&terms, candidates, data, config)?;
    Ok(Selection {
        model,
        ranking,
        aic,
        report,
    })
}

/// Estimates parameters for a fixed term list.
pub fn fit_structure(
    terms: &[RegressorTerm],
    candidates: &CandidateSet,
    data: &TimeSeriesData,
    config: &SelectionConfig,
) -> Result<(NarxModel, EstimationReport)> {
    let reg = build_regression_terms(terms, data, None, None)?;
    let constraints = if config.enforce_sigma_y {
        vec![sigma_y_constraint(terms)?]
    } else {
        Vec::new()
    };
    let n_noise = match config.final_estimator {
        Estimator::Ls => 0,
        Estimator::Els => config.noise_terms,
    };
    let report = els_estimate_constrained(&reg, n_noise, &config.els, &constraints)?;
    let mut model = NarxModel::new(terms.to_vec(), report.theta.clone(), candidates.meta(), data.ts())?;
    if n_noise > 0 {
        model = model.with_noise_terms(noise_terms(n_noise), report.noise_theta.clone())?;
    }
    Ok((model, report))
}
