//! Data model and empirical risks.
//!
//! All risks are means over the observed entries `Ω` of the response matrix,
//! so a fully observed problem is just the special case `m = nq`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// The `n × p` covariate matrix `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid("design matrix must have at least one row and one column"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::invalid(format!("design entry ({}, {}) is not finite", i + 1, j + 1)));
        }
        Ok(Self { values })
    }

    /// Builds an `n × p` design from row-major data.
    pub fn from_row_slice(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::dims(format!("expected {} values for a {n}x{p} design, got {}", n * p, data.len())));
        }
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.norm()
    }

    /// Rows `rows` (in the given order) as a new design.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.values.select_rows(rows.iter()))
    }
}

/// The index set `Ω` of observed response entries.
///
/// Stored as a column-major bitmap over the `n × q` grid; [`iter`](Self::iter)
/// yields the pairs in canonical `(i, k)` lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    n: usize,
    q: usize,
    observed: Vec<bool>,
    m: usize,
}

impl ObservationMask {
    pub fn full(n: usize, q: usize) -> Self {
        Self { n, q, observed: vec![true; n * q], m: n * q }
    }

    pub fn empty(n: usize, q: usize) -> Self {
        Self { n, q, observed: vec![false; n * q], m: 0 }
    }

    /// Builds a mask from 0-based `(i, k)` pairs. Duplicates and out-of-range
    /// pairs are rejected.
    pub fn from_pairs<I>(n: usize, q: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut mask = Self::empty(n, q);
        for (i, k) in pairs {
            if i >= n || k >= q {
                return Err(Error::invalid(format!("observed pair ({i}, {k}) outside a {n}x{q} grid")));
            }
            let idx = i + k * n;
            if mask.observed[idx] {
                return Err(Error::invalid(format!("duplicate observed pair ({i}, {k})")));
            }
            mask.observed[idx] = true;
            mask.m += 1;
        }
        Ok(mask)
    }

    /// Builds a mask from a column-major flag vector of length `n·q`.
    pub fn from_column_major(n: usize, q: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != n * q {
            return Err(Error::dims(format!("mask has {} flags, expected {}", observed.len(), n * q)));
        }
        let m = observed.iter().filter(|&&o| o).count();
        Ok(Self { n, q, observed, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of observed entries.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_full(&self) -> bool {
        self.m == self.n * self.q
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn contains(&self, i: usize, k: usize) -> bool {
        i < self.n && k < self.q && self.observed[i + k * self.n]
    }

    /// Column-major flags, aligned with `DMatrix` storage.
    pub fn as_column_major(&self) -> &[bool] {
        &self.observed
    }

    /// Observed pairs in `(i, k)` lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (0..self.q).filter(move |&k| self.contains(i, k)).map(move |k| (i, k)))
    }

    pub fn complement(&self) -> Self {
        let observed: Vec<bool> = self.observed.iter().map(|o| !o).collect();
        let m = self.n * self.q - self.m;
        Self { n: self.n, q: self.q, observed, m }
    }

    /// Entries in `self` but not in `other`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let observed: Vec<bool> = self.observed.iter().zip(&other.observed).map(|(a, b)| *a && !*b).collect();
        Self::from_column_major(self.n, self.q, observed)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let observed: Vec<bool> = self.observed.iter().zip(&other.observed).map(|(a, b)| *a && *b).collect();
        Self::from_column_major(self.n, self.q, observed)
    }

    /// Restriction to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let n = rows.len();
        let mut observed = vec![false; n * self.q];
        for k in 0..self.q {
            for (r, &i) in rows.iter().enumerate() {
                observed[r + k * n] = self.contains(i, k);
            }
        }
        let m = observed.iter().filter(|&&o| o).count();
        Self { n, q: self.q, observed, m }
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.q != other.q {
            return Err(Error::dims(format!(
                "masks on different grids: {}x{} vs {}x{}",
                self.n, self.q, other.n, other.q
            )));
        }
        Ok(())
    }
}

/// Binary responses in `{-1, +1}` together with their observation mask.
///
/// Entries outside the mask are stored as `0` and never read.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    values: DMatrix<i8>,
    mask: ObservationMask,
}

impl ResponseMatrix {
    pub fn new(values: DMatrix<i8>, mask: ObservationMask) -> Result<Self> {
        let (n, q) = values.shape();
        if mask.n() != n || mask.q() != q {
            return Err(Error::dims(format!("mask is {}x{} but responses are {n}x{q}", mask.n(), mask.q())));
        }
        let mut values = values;
        for (idx, v) in values.iter_mut().enumerate() {
            if mask.as_column_major()[idx] {
                if *v != 1 && *v != -1 {
                    let (i, k) = (idx % n, idx / n);
                    return Err(Error::invalid(format!(
                        "observed response ({}, {}) is {v}, expected -1 or +1",
                        i + 1,
                        k + 1
                    )));
                }
            } else {
                *v = 0;
            }
        }
        Ok(Self { values, mask })
    }

    /// A fully observed response matrix.
    pub fn full(values: DMatrix<i8>) -> Result<Self> {
        let mask = ObservationMask::full(values.nrows(), values.ncols());
        Self::new(values, mask)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn q(&self) -> usize {
        self.values.ncols()
    }

    pub fn m(&self) -> usize {
        self.mask.m()
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn values(&self) -> &DMatrix<i8> {
        &self.values
    }

    /// The label at `(i, k)` if observed.
    pub fn get(&self, i: usize, k: usize) -> Option<i8> {
        self.mask.contains(i, k).then(|| self.values[(i, k)])
    }

    /// Same labels viewed through a different mask. Every entry of `mask`
    /// must already be observed here.
    pub fn restrict(&self, mask: &ObservationMask) -> Result<Self> {
        let extra = mask.difference(&self.mask)?;
        if !extra.is_empty() {
            return Err(Error::invalid("restriction mask contains unobserved entries"));
        }
        Self::new(self.values.clone(), mask.clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = self.values.select_rows(rows.iter());
        Self::new(values, self.mask.select_rows(rows))
    }
}

/// The `p × q` coefficient matrix `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(DMatrix<f64>);

impl Coefficients {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(Self(values))
    }

    pub fn zeros(p: usize, q: usize) -> Self {
        Self(DMatrix::zeros(p, q))
    }

    pub fn from_row_slice(p: usize, q: usize, data: &[f64]) -> Result<Self> {
        if data.len() != p * q {
            return Err(Error::dims(format!("expected {} values for a {p}x{q} matrix, got {}", p * q, data.len())));
        }
        Self::new(DMatrix::from_row_slice(p, q, data))
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn q(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Surrogate loss plugged into the Gibbs posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    Hinge,
    Logistic,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Hinge => "H",
            Loss::Logistic => "logit",
        }
    }

    pub fn risk(self, m: &Coefficients, x: &DesignMatrix, y: &ResponseMatrix) -> Result<f64> {
        match self {
            Loss::Hinge => hinge_risk(m, x, y),
            Loss::Logistic => logistic_risk(m, x, y),
        }
    }

    pub fn gradient(self, m: &Coefficients, x: &DesignMatrix, y: &ResponseMatrix) -> Result<Coefficients> {
        match self {
            Loss::Hinge => hinge_subgradient(m, x, y),
            Loss::Logistic => logistic_gradient(m, x, y),
        }
    }

    /// Per-entry loss at margin `u = y·(XM)`.
    fn value(self, u: f64) -> f64 {
        match self {
            Loss::Hinge => (1.0 - u).max(0.0),
            Loss::Logistic => logit(u),
        }
    }

    /// Derivative of the per-entry loss with respect to the margin `u`.
    fn slope(self, u: f64) -> f64 {
        match self {
            // strict active set: 0 at the kink u = 1
            Loss::Hinge => {
                if u < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::Logistic => -sigmoid(-u),
        }
    }
}

/// `log(1 + e^{-u})` without overflow for large `|u|`.
pub fn logit(u: f64) -> f64 {
    (-u).max(0.0) + (-u.abs()).exp().ln_1p()
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_dims(m: &DMatrix<f64>, x: &DesignMatrix, y: &ResponseMatrix) -> Result<()> {
    if x.p() != m.nrows() {
        return Err(Error::dims(format!("design has {} columns but M has {} rows", x.p(), m.nrows())));
    }
    if y.n() != x.n() {
        return Err(Error::dims(format!("design has {} rows but responses have {}", x.n(), y.n())));
    }
    if y.q() != m.ncols() {
        return Err(Error::dims(format!("responses have {} columns but M has {}", y.q(), m.ncols())));
    }
    if y.m() == 0 {
        return Err(Error::invalid("observation mask is empty"));
    }
    Ok(())
}

/// Mean loss over `Ω` and, optionally, its gradient with respect to `M`.
///
/// Works on raw matrices so the sampler can call it on proposal states
/// without re-validating them.
pub(crate) fn loss_and_gradient(
    loss: Loss,
    m: &DMatrix<f64>,
    x: &DesignMatrix,
    y: &ResponseMatrix,
    want_gradient: bool,
) -> Result<(f64, Option<DMatrix<f64>>)> {
    check_dims(m, x, y)?;
    let xm = x.values() * m;
    let observed = y.mask().as_column_major();
    let labels = y.values().as_slice();
    let inv_m = 1.0 / y.m() as f64;
    let mut total = 0.0;
    let mut slopes = if want_gradient { Some(DMatrix::<f64>::zeros(xm.nrows(), xm.ncols())) } else { None };
    for (idx, &f) in xm.as_slice().iter().enumerate() {
        if !observed[idx] {
            continue;
        }
        let label = f64::from(labels[idx]);
        let u = label * f;
        total += loss.value(u);
        if let Some(d) = slopes.as_mut() {
            d.as_mut_slice()[idx] = label * loss.slope(u) * inv_m;
        }
    }
    let gradient = slopes.map(|d| x.values().tr_mul(&d));
    Ok((total * inv_m, gradient))
}

/// Fraction of observed entries with `Y_ik (XM)_ik < 0`.
///
/// A zero margin is not counted as an error.
pub fn zero_one_risk(m: &Coefficients, x: &DesignMatrix, y: &ResponseMatrix) -> Result<f64> {
    check_dims(m.values(), x, y)?;
    let xm = x.values() * m.values();
    let observed = y.mask().as_column_major();
    let errors = xm
        .iter()
        .zip(y.values().iter())
        .zip(observed)
        .filter(|((f, label), &o)| o && f64::from(**label) * **f < 0.0)
        .count();
    Ok(errors as f64 / y.m() as f64)
}

/// Mean hinge loss `(1 − Y_ik (XM)_ik)_+` over observed entries.
pub fn hinge_risk(m: &Coefficients, x: &DesignMatrix, y: &ResponseMatrix) -> Result<f64> {
    loss_and_gradient(Loss::Hinge, m.values(), x, y, false).map(|(r, _)| r)
}

/// Subgradient `−(1/m) Xᵀ (Y ⊙ A)` of [`hinge_risk`], where `A` flags the
/// observed entries with margin strictly below 1.
pub fn hinge_subgradient(m: &Coefficients, x: &DesignMatrix, y: &ResponseMatrix) -> Result<Coefficients> {
    let (_, g) = loss_and_gradient(Loss::Hinge, m.values(), x, y, true)?;
    Ok(Coefficients(g.expect("gradient requested")))
}

/// Mean logistic loss `log(1 + exp(−Y_ik (XM)_ik))` over observed entries.
pub fn logistic_risk(m: &Coefficients, x: &DesignMatrix, y: &ResponseMatrix) -> Result<f64> {
    loss_and_gradient(Loss::Logistic, m.values(), x, y, false).map(|(r, _)| r)
}

pub fn logistic_gradient(m: &Coefficients, x: &DesignMatrix, y: &ResponseMatrix) -> Result<Coefficients> {
    let (_, g) = loss_and_gradient(Loss::Logistic, m.values(), x, y, true)?;
    Ok(Coefficients(g.expect("gradient requested")))
}

/// Entrywise `sign(XM)` with `sign(0) = +1`.
pub fn predict(m: &Coefficients, x: &DesignMatrix) -> Result<DMatrix<i8>> {
    if x.p() != m.p() {
        return Err(Error::dims(format!("design has {} columns but M has {} rows", x.p(), m.p())));
    }
    Ok((x.values() * m.values()).map(|f| if f >= 0.0 { 1 } else { -1 }))
}
