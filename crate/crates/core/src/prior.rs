//! Spectral scaled-Student prior
//! `π(M) ∝ det(τ² I_p + M Mᵀ)^{-(p+q+2)/2}`.
//!
//! Only the unnormalized log-density is evaluated. The determinant is taken
//! on the smaller of the two Gram matrices: when `q < p`,
//! `logdet(τ² I_p + MMᵀ) = 2(p−q) log τ + logdet(τ² I_q + MᵀM)`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::model::Coefficients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorParams {
    pub tau: f64,
}

impl PriorParams {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(format!("prior scale tau must be positive and finite, got {tau}")));
        }
        Ok(Self { tau })
    }
}

/// Which Gram matrix carries the determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramSide {
    /// `τ² I_p + M Mᵀ` (p × p).
    Primal,
    /// `τ² I_q + Mᵀ M` (q × q).
    Dual,
    /// Whichever is smaller; primal on ties.
    Auto,
}

/// Log-density and gradient sharing one factorization.
#[derive(Debug, Clone)]
pub struct PriorEval {
    pub log_density: f64,
    pub gradient: DMatrix<f64>,
}

fn exponent(p: usize, q: usize) -> f64 {
    (p + q + 2) as f64 / 2.0
}

fn factor(gram: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let size = gram.nrows();
    let min_diag = gram.diagonal().min();
    Cholesky::new(gram).ok_or_else(|| {
        Error::Numerical(format!("Cholesky factorization of {size}x{size} prior Gram matrix failed (min diagonal {min_diag:e})"))
    })
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn resolve(side: GramSide, p: usize, q: usize) -> GramSide {
    match side {
        GramSide::Auto if q < p => GramSide::Dual,
        GramSide::Auto => GramSide::Primal,
        s => s,
    }
}

fn check(m: &DMatrix<f64>, prm: PriorParams) -> Result<()> {
    PriorParams::new(prm.tau)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("coefficients must be finite"));
    }
    Ok(())
}

/// `logdet(τ² I_p + M Mᵀ)` through the requested Gram matrix.
pub fn log_det_gram(m: &DMatrix<f64>, tau: f64, side: GramSide) -> Result<f64> {
    let (p, q) = m.shape();
    let tau2 = tau * tau;
    match resolve(side, p, q) {
        GramSide::Dual => {
            let chol = factor(m.tr_mul(m) + DMatrix::identity(q, q) * tau2)?;
            Ok(2.0 * (p as f64 - q as f64) * tau.ln() + log_det(&chol))
        }
        _ => {
            let chol = factor(m * m.transpose() + DMatrix::identity(p, p) * tau2)?;
            Ok(log_det(&chol))
        }
    }
}

/// Log-density and gradient at `m`, computed from a single factorization.
///
/// The gradient is `−(p+q+2) (τ² I_p + MMᵀ)^{-1} M`, or equivalently
/// `−(p+q+2) M (τ² I_q + MᵀM)^{-1}` on the dual side.
pub fn evaluate(m: &DMatrix<f64>, prm: PriorParams, side: GramSide) -> Result<PriorEval> {
    check(m, prm)?;
    let (p, q) = m.shape();
    let tau2 = prm.tau * prm.tau;
    let scale = -((p + q + 2) as f64);
    let (logdet, gradient) = match resolve(side, p, q) {
        GramSide::Dual => {
            let chol = factor(m.tr_mul(m) + DMatrix::identity(q, q) * tau2)?;
            // S symmetric: M S⁻¹ = (S⁻¹ Mᵀ)ᵀ
            let solved = chol.solve(&m.transpose());
            (2.0 * (p as f64 - q as f64) * prm.tau.ln() + log_det(&chol), solved.transpose() * scale)
        }
        _ => {
            let chol = factor(m * m.transpose() + DMatrix::identity(p, p) * tau2)?;
            (log_det(&chol), chol.solve(m) * scale)
        }
    };
    Ok(PriorEval { log_density: -exponent(p, q) * logdet, gradient })
}

/// Unnormalized prior log-density `−((p+q+2)/2) logdet(τ² I_p + MMᵀ)`.
pub fn log_prior(m: &Coefficients, prm: PriorParams) -> Result<f64> {
    check(m.values(), prm)?;
    let (p, q) = m.values().shape();
    Ok(-exponent(p, q) * log_det_gram(m.values(), prm.tau, GramSide::Auto)?)
}

pub fn log_prior_gradient(m: &Coefficients, prm: PriorParams) -> Result<Coefficients> {
    Coefficients::new(evaluate(m.values(), prm, GramSide::Auto)?.gradient)
}

/// Data regime that fixes the theory-driven defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Full,
    Missing,
}

/// Theory-driven prior scale:
/// `τ² = (p+q)/(2q²pn‖X‖_F²)` (full) or `τ² = (p+q)/(2qpm‖X‖_F²)` (missing).
pub fn default_tau(n: usize, p: usize, q: usize, m: usize, norm_x_sq: f64, regime: Regime) -> Result<f64> {
    if n == 0 || p == 0 || q == 0 || m == 0 {
        return Err(Error::invalid("default_tau needs positive n, p, q and m"));
    }
    if !(norm_x_sq.is_finite() && norm_x_sq > 0.0) {
        return Err(Error::invalid(format!("squared design norm must be positive, got {norm_x_sq}")));
    }
    let (n, p, q, m) = (n as f64, p as f64, q as f64, m as f64);
    let tau2 = match regime {
        Regime::Full => (p + q) / (2.0 * q * q * p * n * norm_x_sq),
        Regime::Missing => (p + q) / (2.0 * q * p * m * norm_x_sq),
    };
    Ok(tau2.sqrt())
}
