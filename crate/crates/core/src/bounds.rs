//! Explicit finite-sample bounds on the integrated misclassification risk of
//! the Gibbs posterior.
//!
//! Each function evaluates a closed-form expression with every constant
//! spelled out, at the temperature and prior scale that the bound prescribes:
//!
//! | bound | temperature | rate |
//! |---|---|---|
//! | [`theorem1_bound`] | `2nq/(3C+2)` | `1/(nq)` under the margin condition |
//! | [`corollary1_bound`] | `2nq/5` | noiseless labels, `C = 1`, `R̄ = 0` |
//! | [`proposition1_bound`] | `2√(nq/(p+q+2))` | `1/√(nq)`, no margin condition |
//! | [`theorem2_bound`] | `2m/(3C+2)` | `1/m`, partially observed responses |
//!
//! A zero rank `r* = 0` makes the logarithmic complexity term vanish.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Observed entries; equals `n·q` when fully observed.
    pub m: usize,
    /// Rank of the Bayes coefficient matrix.
    pub r_star: usize,
    /// `‖X‖_F`.
    pub norm_x: f64,
    /// `‖M^B‖_F`.
    pub norm_mb: f64,
    /// Margin constant, at least 1.
    pub c: f64,
    /// Bayes risk.
    pub r_bar: f64,
    /// Confidence slack.
    pub epsilon: f64,
    /// Free parameter in `(0, 1)`.
    pub varsigma: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 || self.m == 0 {
            return Err(Error::invalid("n, p, q and m must be positive"));
        }
        if self.m > self.n * self.q {
            return Err(Error::invalid(format!("m = {} exceeds nq = {}", self.m, self.n * self.q)));
        }
        if self.r_star > self.p.min(self.q) {
            return Err(Error::invalid(format!("rank {} exceeds min(p, q) = {}", self.r_star, self.p.min(self.q))));
        }
        for (name, v) in [("norm_x", self.norm_x), ("norm_mb", self.norm_mb)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.c.is_finite() && self.c >= 1.0) {
            return Err(Error::invalid(format!("margin constant C must be at least 1, got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.r_bar) {
            return Err(Error::invalid(format!("Bayes risk must lie in [0, 1], got {}", self.r_bar)));
        }
        for (name, v) in [("epsilon", self.epsilon), ("varsigma", self.varsigma)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// `r*(p+q+2) log(1 + q‖X‖‖M^B‖√(rows·p)/√((p+q)r*))`, zero when `r* = 0`.
fn fast_rate_complexity(b: &BoundInputs, rows: f64) -> f64 {
    if b.r_star == 0 {
        return 0.0;
    }
    let (p, q, r) = (b.p as f64, b.q as f64, b.r_star as f64);
    let arg = q * b.norm_x * b.norm_mb * (rows * p).sqrt() / ((p + q) * r).sqrt();
    r * (q + p + 2.0) * arg.ln_1p()
}

/// `count` is the number of labels (`nq` or `m`); `rows` enters the logarithm.
fn fast_rate_bound(b: &BoundInputs, count: f64, rows: f64) -> f64 {
    let (p, q, c, s) = (b.p as f64, b.q as f64, b.c, b.varsigma);
    2.5 * b.r_bar
        + 1.5 * (p + q) / (2.0 * count)
        + 3.0 * (3.0 * c + 2.0) * fast_rate_complexity(b, rows) / (2.0 * count)
        + (6.0 + 9.0 * c * s + 6.0 * s) / (4.0 * count * s) * (1.0 / b.epsilon).ln()
}

/// `2.5R̄ + 1.5(p+q)/(2nq) + 3(3C+2) r*(q+p+2) log(1 + q‖X‖‖M^B‖√(np)/√((p+q)r*))/(2nq)
///  + (6 + 9Cς + 6ς)/(4nqς) log(1/ε)`.
pub fn theorem1_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok(fast_rate_bound(b, (b.n * b.q) as f64, b.n as f64))
}

/// Noiseless case: [`theorem1_bound`] with `C = 1` and `R̄ = 0`.
pub fn corollary1_bound(b: &BoundInputs) -> Result<f64> {
    theorem1_bound(&BoundInputs { c: 1.0, r_bar: 0.0, ..*b })
}

/// `2R̄ + (p+q)/(2nq) + r*√((q+p+2)/(nq)) log(1 + ‖M^B‖/(τ√(2r*)))
///  + 1/(4√(nq(p+q+2))) + (2 + ς√(nq(p+q+2)))/(2nqς) log(1/ε)`
/// with `τ² = (p+q)/(2q²pn‖X‖²)`. Does not use `C`.
pub fn proposition1_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let (n, p, q, s) = (b.n as f64, b.p as f64, b.q as f64, b.varsigma);
    let nq = n * q;
    let d = p + q + 2.0;
    let complexity = if b.r_star == 0 {
        0.0
    } else {
        let r = b.r_star as f64;
        let tau = ((p + q) / (2.0 * q * q * p * n * b.norm_x * b.norm_x)).sqrt();
        r * (d / nq).sqrt() * (b.norm_mb / (tau * (2.0 * r).sqrt())).ln_1p()
    };
    Ok(2.0 * b.r_bar
        + (p + q) / (2.0 * nq)
        + complexity
        + 1.0 / (4.0 * (nq * d).sqrt())
        + (2.0 + s * (nq * d).sqrt()) / (2.0 * nq * s) * (1.0 / b.epsilon).ln())
}

/// Partially observed responses: the [`theorem1_bound`] expression with `nq`
/// replaced by `m`, including `√(mp)` inside the logarithm.
pub fn theorem2_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok(fast_rate_bound(b, b.m as f64, b.m as f64))
}

/// The four bounds at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub theorem1: f64,
    pub corollary1: f64,
    pub proposition1: f64,
    pub theorem2: f64,
}

pub fn all_bounds(b: &BoundInputs) -> Result<BoundReport> {
    Ok(BoundReport {
        theorem1: theorem1_bound(b)?,
        corollary1: corollary1_bound(b)?,
        proposition1: proposition1_bound(b)?,
        theorem2: theorem2_bound(b)?,
    })
}

pub const VARSIGMA_SEARCH: (f64, f64) = (0.01, 0.99);

/// Minimizes `bound` over `ς ∈ (0.01, 0.99)` by golden-section search.
/// Returns `(ς*, bound(ς*))`.
pub fn optimize_varsigma<F>(b: &BoundInputs, bound: F) -> Result<(f64, f64)>
where
    F: Fn(&BoundInputs) -> Result<f64>,
{
    let eval = |s: f64| bound(&BoundInputs { varsigma: s, ..*b });
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = VARSIGMA_SEARCH;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok((s, eval(s)?))
}
