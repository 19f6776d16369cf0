//! Critical line m_c(t) = m₀ + α√t + βt per n and the large-n limit of α_n.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform uncertainty of the tabulated critical masses.
pub const TABLE_SIGMA: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub t: f64,
    pub m_c: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub pulls: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[i], self.errors[i]))
    }
}

/// Weighted least squares of `y` on the columns of `design`.
pub fn weighted_least_squares(design: &DMatrix<f64>, y: &[f64], sigma: &[f64], names: &[&str]) -> Result<FitResult> {
    let (rows, cols) = design.shape();
    if y.len() != rows || sigma.len() != rows || names.len() != cols {
        return Err(Error::InvalidArgument("design, data and names disagree in size".into()));
    }
    if rows <= cols {
        return Err(Error::InsufficientData(format!("{rows} points for {cols} coefficients leave no degrees of freedom")));
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("every σ must be positive".into()));
    }
    let mut a = design.clone();
    let mut b = DVector::from_column_slice(y);
    for i in 0..rows {
        a.row_mut(i).scale_mut(1.0 / sigma[i]);
        b[i] /= sigma[i];
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!("condition {smax:e}/{smin:e}")));
    }
    let coef = svd.solve(&b, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let v = svd.v_t.as_ref().expect("right singular vectors").transpose();
    let inv_s2 = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let cov = &v * inv_s2 * v.transpose();
    let fitted = design * &coef;
    let residuals: Vec<f64> = (0..rows).map(|i| y[i] - fitted[i]).collect();
    let pulls: Vec<f64> = residuals.iter().zip(sigma).map(|(r, s)| r / s).collect();
    Ok(FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        coefficients: coef.iter().copied().collect(),
        errors: (0..cols).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        covariance: (0..cols).map(|i| (0..cols).map(|j| 0.5 * (cov[(i, j)] + cov[(j, i)])).collect()).collect(),
        chi2: pulls.iter().map(|p| p * p).sum(),
        residuals,
        pulls,
        dof: rows - cols,
    })
}

/// Which terms of m₀ + α√t + βt are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineModel {
    /// Intercept held at this value instead of fitted.
    pub fixed_intercept: Option<f64>,
    pub linear_term: bool,
}

impl Default for LineModel {
    fn default() -> Self {
        Self { fixed_intercept: None, linear_term: true }
    }
}

pub fn fit_critical_line(points: &[CriticalPoint]) -> Result<FitResult> {
    fit_critical_line_with(points, LineModel::default())
}

pub fn fit_critical_line_with(points: &[CriticalPoint], model: LineModel) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("critical line needs ≥ 4 points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.t >= 0.0) || !p.m_c.is_finite()) {
        return Err(Error::InvalidArgument("critical points need t ≥ 0 and finite m_c".into()));
    }
    let mut names = Vec::new();
    let mut cols: Vec<Box<dyn Fn(f64) -> f64>> = Vec::new();
    if model.fixed_intercept.is_none() {
        names.push("m0");
        cols.push(Box::new(|_| 1.0));
    }
    names.push("alpha");
    cols.push(Box::new(f64::sqrt));
    if model.linear_term {
        names.push("beta");
        cols.push(Box::new(|t| t));
    }
    let design = DMatrix::from_fn(points.len(), cols.len(), |i, j| cols[j](points[i].t));
    let offset = model.fixed_intercept.unwrap_or(0.0);
    let y: Vec<f64> = points.iter().map(|p| p.m_c - offset).collect();
    let sigma: Vec<f64> = points.iter().map(|p| p.sigma).collect();
    weighted_least_squares(&design, &y, &sigma, &names)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub n: usize,
    pub alpha: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtrapolationOptions {
    /// Intercept b held at this value instead of fitted.
    pub fixed_b: Option<f64>,
    /// Keep n = 2 in the even set.
    pub include_z2: bool,
}

impl Default for ExtrapolationOptions {
    fn default() -> Self {
        Self { fixed_b: None, include_z2: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub parity: Parity,
    pub ns: Vec<usize>,
    pub fit: FitResult,
    pub b: f64,
    pub b_err: f64,
    pub d: f64,
    pub d_err: f64,
    /// Continuum critical mass d/√(2π).
    pub m_c: f64,
    pub m_c_err: f64,
}

pub fn extrapolate_large_n(alphas: &[AlphaPoint], parity: Parity) -> Result<Extrapolation> {
    extrapolate_large_n_with(alphas, parity, ExtrapolationOptions::default())
}

/// Weighted fit α_n = b + d/√n over one parity class.
pub fn extrapolate_large_n_with(alphas: &[AlphaPoint], parity: Parity, opts: ExtrapolationOptions) -> Result<Extrapolation> {
    if let Some(p) = alphas.iter().find(|p| Parity::of(p.n) != parity) {
        return Err(Error::InvalidArgument(format!("n = {} does not have {parity:?} parity", p.n)));
    }
    let pts: Vec<&AlphaPoint> = alphas.iter().filter(|p| opts.include_z2 || p.n != 2).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("extrapolation needs ≥ 3 values of n, got {}", pts.len())));
    }
    let x: Vec<f64> = pts.iter().map(|p| 1.0 / (p.n as f64).sqrt()).collect();
    let sigma: Vec<f64> = pts.iter().map(|p| p.sigma).collect();
    let (fit, b, b_err, d, d_err) = match opts.fixed_b {
        None => {
            let design = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
            let y: Vec<f64> = pts.iter().map(|p| p.alpha).collect();
            let fit = weighted_least_squares(&design, &y, &sigma, &["b", "d"])?;
            let (b, be) = fit.get("b").expect("b");
            let (d, de) = fit.get("d").expect("d");
            (fit, b, be, d, de)
        }
        Some(b) => {
            let design = DMatrix::from_fn(pts.len(), 1, |i, _| x[i]);
            let y: Vec<f64> = pts.iter().map(|p| p.alpha - b).collect();
            let fit = weighted_least_squares(&design, &y, &sigma, &["d"])?;
            let (d, de) = fit.get("d").expect("d");
            (fit, b, 0.0, d, de)
        }
    };
    let s = (2.0 * PI).sqrt();
    Ok(Extrapolation {
        parity,
        ns: pts.iter().map(|p| p.n).collect(),
        fit,
        b,
        b_err,
        d,
        d_err,
        m_c: d / s,
        m_c_err: d_err / s,
    })
}

/// Level-crossing mass of the t = 0 chain: −π/n for odd n, 0 for even n.
pub fn analytic_t0_mass(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n = {n} must be ≥ 2")));
    }
    Ok(if n % 2 == 1 { -PI / n as f64 } else { 0.0 })
}

/// Reads `t,m_c,sigma` rows; a missing σ column defaults to [`TABLE_SIGMA`].
pub fn read_critical_line<R: Read>(r: R) -> Result<Vec<CriticalPoint>> {
    #[derive(Deserialize)]
    struct Row {
        t: f64,
        m_c: f64,
        sigma: Option<f64>,
    }
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize::<Row>()
        .map(|r| {
            let r = r?;
            Ok(CriticalPoint { t: r.t, m_c: r.m_c, sigma: r.sigma.unwrap_or(TABLE_SIGMA) })
        })
        .collect()
}

pub fn load_critical_line(path: &Path) -> Result<Vec<CriticalPoint>> {
    read_critical_line(std::fs::File::open(path)?)
}

/// One row of a per-n coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineCoefficients {
    pub n: usize,
    pub m0: f64,
    pub m0_err: f64,
    pub alpha: f64,
    pub alpha_err: f64,
    pub beta: f64,
    pub beta_err: f64,
}

impl LineCoefficients {
    pub fn from_fit(n: usize, fit: &FitResult, model: LineModel) -> Self {
        let (m0, m0_err) = fit.get("m0").unwrap_or((model.fixed_intercept.unwrap_or(0.0), 0.0));
        let (alpha, alpha_err) = fit.get("alpha").unwrap_or((0.0, 0.0));
        let (beta, beta_err) = fit.get("beta").unwrap_or((0.0, 0.0));
        Self { n, m0, m0_err, alpha, alpha_err, beta, beta_err }
    }

    /// Largest |Δ|/√(σ₁² + σ₂²) over the three coefficients.
    pub fn max_z(&self, other: &Self) -> f64 {
        let z = |a: f64, ae: f64, b: f64, be: f64| {
            let s = (ae * ae + be * be).sqrt();
            if s > 0.0 {
                (a - b).abs() / s
            } else if a == b {
                0.0
            } else {
                f64::INFINITY
            }
        };
        z(self.m0, self.m0_err, other.m0, other.m0_err)
            .max(z(self.alpha, self.alpha_err, other.alpha, other.alpha_err))
            .max(z(self.beta, self.beta_err, other.beta, other.beta_err))
    }
}

pub fn read_coefficients<R: Read>(r: R) -> Result<Vec<LineCoefficients>> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn write_coefficients<W: std::io::Write>(rows: &[LineCoefficients], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
