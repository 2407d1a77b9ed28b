//! Parameter estimation: least squares via Householder QR, extended least
//! squares with lagged-residual columns, and equality-constrained least
//! squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::data::TimeSeriesData;
use crate::error::{Error, Result};
use crate::regression::{build_regression, Regression};
use crate::term::{RegressorTerm, Variable};

/// Relative size of an `R` diagonal entry below which a column is treated
/// as linearly dependent on the preceding ones.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElsConfig {
    /// Convergence limit on the Euclidean norm of the parameter change.
    pub zeta: f64,
    pub max_iterations: usize,
}

impl Default for ElsConfig {
    fn default() -> Self {
        Self {
            zeta: 1e-8,
            max_iterations: 30,
        }
    }
}

impl ElsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0) {
            return Err(Error::Parameter("zeta must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Parameter("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    /// Process parameters, one per regression column.
    pub theta: Vec<f64>,
    /// Moving-average parameters of the lagged-residual columns (ELS only).
    pub noise_theta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Mean squared residual.
    pub residual_variance: f64,
    /// Parameter-change norm of every ELS iteration.
    pub change_norms: Vec<f64>,
}

impl EstimationReport {
    fn from_fit(theta: Vec<f64>, residuals: Vec<f64>) -> Self {
        let residual_variance = mean_square(&residuals);
        Self {
            theta,
            noise_theta: Vec::new(),
            residuals,
            iterations: 0,
            converged: true,
            residual_variance,
            change_norms: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            theta: Vec<String>,
            noise_theta: Vec<String>,
            iterations: usize,
            converged: bool,
            residual_variance: String,
            change_norms: &'a [f64],
        }
        let fmt = |v: &[f64]| v.iter().map(|x| crate::data::fmt_f64(*x)).collect();
        toml::to_string(&Summary {
            theta: fmt(&self.theta),
            noise_theta: fmt(&self.noise_theta),
            iterations: self.iterations,
            converged: self.converged,
            residual_variance: crate::data::fmt_f64(self.residual_variance),
            change_norms: &self.change_norms,
        })
        .expect("report serializes")
    }
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Upper-triangular factor and `Qᵀ y` of a full-column-rank problem.
struct QrSolve {
    r: DMatrix<f64>,
    qty: DVector<f64>,
}

fn qr_factor(matrix: &DMatrix<f64>, target: &DVector<f64>, names: &dyn Fn(usize) -> String) -> Result<QrSolve> {
    let (rows, cols) = matrix.shape();
    if target.len() != rows {
        return Err(Error::Parameter(format!(
            "target has {} entries, matrix has {rows} rows",
            target.len()
        )));
    }
    if cols == 0 {
        return Err(Error::Parameter("regression has no columns".into()));
    }
    if rows < cols {
        return Err(Error::InsufficientData {
            needed: cols,
            available: rows,
        });
    }
    let qr = matrix.clone().qr();
    let r = qr.r();
    for i in 0..cols {
        let norm = matrix.column(i).norm();
        if !(r[(i, i)].abs() > RANK_TOLERANCE * norm) {
            return Err(Error::Singular {
                column: i,
                term: names(i),
            });
        }
    }
    let mut qty = target.clone();
    qr.q_tr_mul(&mut qty);
    Ok(QrSolve {
        r,
        qty: qty.rows(0, cols).into_owned(),
    })
}

fn solve_upper(r: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    r.solve_upper_triangular(b).expect("nonzero diagonal checked")
}

fn residual_of(matrix: &DMatrix<f64>, target: &DVector<f64>, theta: &DVector<f64>) -> Vec<f64> {
    (target - matrix * theta).as_slice().to_vec()
}

fn ls_theta(matrix: &DMatrix<f64>, target: &DVector<f64>, names: &dyn Fn(usize) -> String) -> Result<DVector<f64>> {
    let f = qr_factor(matrix, target, names)?;
    Ok(solve_upper(&f.r, &f.qty))
}

/// Ordinary least squares `min ‖target − matrix·θ‖₂`.
pub fn ls_estimate(matrix: &DMatrix<f64>, target: &DVector<f64>) -> Result<EstimationReport> {
    let theta = ls_theta(matrix, target, &|i| format!("column {i}"))?;
    let residuals = residual_of(matrix, target, &theta);
    Ok(EstimationReport::from_fit(theta.as_slice().to_vec(), residuals))
}

/// Least squares on a [`Regression`], naming offending terms in errors.
pub fn ls_estimate_regression(reg: &Regression) -> Result<EstimationReport> {
    let theta = ls_theta(&reg.matrix, &reg.target, &|i| reg.terms[i].to_string())?;
    let residuals = residual_of(&reg.matrix, &reg.target, &theta);
    Ok(EstimationReport::from_fit(theta.as_slice().to_vec(), residuals))
}

/// Lagged-residual noise terms `xi(k-1) .. xi(k-n)`.
pub fn noise_terms(n: usize) -> Vec<RegressorTerm> {
    (1..=n).map(|j| RegressorTerm::single(Variable::Residual, j)).collect()
}

/// Extended least squares on an assembled regression.
///
/// Iterates LS on `[Ψ | ξ(k-1) .. ξ(k-n)]` with residuals from the previous
/// pass until the parameter change drops below `zeta`. Residual lags that
/// reach before the first row are zero. With `n_noise_terms == 0` this is
/// plain least squares.
pub fn els_estimate_regression(
    reg: &Regression,
    n_noise_terms: usize,
    config: &ElsConfig,
) -> Result<EstimationReport> {
    els_estimate_constrained(reg, n_noise_terms, config, &[])
}

/// Extended least squares whose process parameters obey `constraints`
/// at every iteration. Noise parameters are unconstrained.
pub fn els_estimate_constrained(
    reg: &Regression,
    n_noise_terms: usize,
    config: &ElsConfig,
    constraints: &[LinearConstraint],
) -> Result<EstimationReport> {
    config.validate()?;
    let ls = constrained_ls_estimate_regression(reg, constraints)?;
    if n_noise_terms == 0 {
        return Ok(ls);
    }
    let m = reg.cols();
    let rows = reg.rows();
    let y_norm = reg.target.norm();
    let xi_norm = ls.residuals.iter().map(|v| v * v).sum::<f64>().sqrt();
    if xi_norm <= 1e-12 * y_norm.max(f64::MIN_POSITIVE) {
        // Nothing left to model: the extension column would be null.
        let mut report = ls;
        report.noise_theta = vec![0.0; n_noise_terms];
        report.iterations = 1;
        report.change_norms.push(0.0);
        return Ok(report);
    }

    let names = |i: usize| {
        if i < m {
            reg.terms[i].to_string()
        } else {
            format!("xi(k-{})", i - m + 1)
        }
    };
    let mut theta_prev = DVector::zeros(m + n_noise_terms);
    theta_prev.rows_mut(0, m).copy_from_slice(&ls.theta);
    let mut xi = ls.residuals;
    let mut extended = DMatrix::zeros(rows, m + n_noise_terms);
    extended.columns_mut(0, m).copy_from(&reg.matrix);

    let padded: Vec<LinearConstraint> = constraints
        .iter()
        .map(|c| {
            let mut coefficients = c.coefficients.clone();
            coefficients.resize(m + n_noise_terms, 0.0);
            LinearConstraint {
                coefficients,
                value: c.value,
            }
        })
        .collect();
    let mut change_norms = Vec::new();
    let mut converged = false;
    let mut theta = theta_prev.clone();
    for _ in 0..config.max_iterations {
        for j in 1..=n_noise_terms {
            let mut col = extended.column_mut(m + j - 1);
            for r in 0..rows {
                col[r] = if r >= j { xi[r - j] } else { 0.0 };
            }
        }
        theta = solve_constrained(&extended, &reg.target, &names, &padded)?;
        xi = residual_of(&extended, &reg.target, &theta);
        let change = (&theta - &theta_prev).norm();
        change_norms.push(change);
        theta_prev.copy_from(&theta);
        if change < config.zeta {
            converged = true;
            break;
        }
    }
    let residual_variance = mean_square(&xi);
    Ok(EstimationReport {
        theta: theta.rows(0, m).iter().copied().collect(),
        noise_theta: theta.rows(m, n_noise_terms).iter().copied().collect(),
        residuals: xi,
        iterations: change_norms.len(),
        converged,
        residual_variance,
        change_norms,
    })
}

/// Extended least squares for a candidate pool on a data record.
pub fn els_estimate(
    candidates: &CandidateSet,
    data: &TimeSeriesData,
    n_noise_terms: usize,
    config: &ElsConfig,
) -> Result<EstimationReport> {
    let reg = build_regression(candidates, data, None)?;
    els_estimate_regression(&reg, n_noise_terms, config)
}

/// Equality constraint `coefficientsᵀ θ = value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coefficients: Vec<f64>,
    pub value: f64,
}

/// Least squares subject to linear equality constraints, solved through the
/// KKT conditions: `θ = θ_LS − (ΨᵀΨ)⁻¹Cᵀ [C(ΨᵀΨ)⁻¹Cᵀ]⁻¹ (Cθ_LS − b)`, with
/// `(ΨᵀΨ)⁻¹` applied through the triangular QR factor.
pub fn constrained_ls_estimate(
    matrix: &DMatrix<f64>,
    target: &DVector<f64>,
    constraints: &[LinearConstraint],
) -> Result<EstimationReport> {
    let theta = solve_constrained(matrix, target, &|i| format!("column {i}"), constraints)?;
    let residuals = residual_of(matrix, target, &theta);
    Ok(EstimationReport::from_fit(theta.as_slice().to_vec(), residuals))
}

/// Constrained least squares on a [`Regression`].
pub fn constrained_ls_estimate_regression(
    reg: &Regression,
    constraints: &[LinearConstraint],
) -> Result<EstimationReport> {
    let theta = solve_constrained(&reg.matrix, &reg.target, &|i| reg.terms[i].to_string(), constraints)?;
    let residuals = residual_of(&reg.matrix, &reg.target, &theta);
    Ok(EstimationReport::from_fit(theta.as_slice().to_vec(), residuals))
}

fn solve_constrained(
    matrix: &DMatrix<f64>,
    target: &DVector<f64>,
    names: &dyn Fn(usize) -> String,
    constraints: &[LinearConstraint],
) -> Result<DVector<f64>> {
    let cols = matrix.ncols();
    let f = qr_factor(matrix, target, names)?;
    let theta_ls = solve_upper(&f.r, &f.qty);
    if constraints.is_empty() {
        return Ok(theta_ls);
    }
    let k = constraints.len();
    if k >= cols {
        return Err(Error::Constraint(format!(
            "{k} constraints on {cols} parameters leave nothing to estimate"
        )));
    }
    if let Some(c) = constraints.iter().find(|c| c.coefficients.len() != cols) {
        return Err(Error::Constraint(format!(
            "constraint has {} coefficients, expected {cols}",
            c.coefficients.len()
        )));
    }
    let c = DMatrix::from_fn(k, cols, |i, j| constraints[i].coefficients[j]);
    let b = DVector::from_iterator(k, constraints.iter().map(|c| c.value));

    // Independence of the constraint rows.
    let ct_r = c.transpose().qr().r();
    for i in 0..k {
        let norm = c.row(i).norm();
        if norm == 0.0 || !(ct_r[(i, i)].abs() > 1e-12 * norm) {
            return Err(Error::Constraint(format!(
                "constraint {i} is zero or linearly dependent on the others"
            )));
        }
    }

    // M = (RᵀR)⁻¹ Cᵀ
    let z = f
        .r
        .transpose()
        .solve_lower_triangular(&c.transpose())
        .expect("nonzero diagonal checked");
    let m = f.r.solve_upper_triangular(&z).expect("nonzero diagonal checked");
    let s_chol = (&c * &m)
        .cholesky()
        .ok_or_else(|| Error::Constraint("constraint system is not positive definite".into()))?;

    let mut theta = theta_ls;
    // The second pass removes the rounding left by the first.
    for _ in 0..2 {
        let violation = &c * &theta - &b;
        theta -= &m * s_chol.solve(&violation);
    }
    let violation = (&c * &theta - &b).amax();
    if violation > 1e-10 * (1.0 + b.amax()) {
        return Err(Error::Constraint(format!(
            "constraint residual {violation:e} after solve; problem is ill-conditioned"
        )));
    }
    Ok(theta)
}
