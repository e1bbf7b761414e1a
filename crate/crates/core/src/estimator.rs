//! Point estimation, misclassification and cross-validation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{predict, Coefficients, DesignMatrix, Loss, ObservationMask, ResponseMatrix};
use crate::rng;
use crate::sampler::{run_chain, Algorithm, ChainResult, SamplerConfig};

/// Sampler + loss pair, named like `MALA-H` or `LMC-logit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Method {
    pub algorithm: Algorithm,
    pub loss: Loss,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method { algorithm: Algorithm::Lmc, loss: Loss::Logistic },
        Method { algorithm: Algorithm::Lmc, loss: Loss::Hinge },
        Method { algorithm: Algorithm::Mala, loss: Loss::Logistic },
        Method { algorithm: Algorithm::Mala, loss: Loss::Hinge },
    ];

    /// `base` with this method's sampler, loss, temperature and seed.
    pub fn configure(&self, base: &SamplerConfig, temperature: Temperature, m: usize, seed: u64) -> SamplerConfig {
        SamplerConfig {
            algorithm: self.algorithm,
            loss: self.loss,
            lambda: temperature.lambda(m),
            seed,
            ..base.clone()
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.algorithm.name(), self.loss.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?} (expected LMC-logit, LMC-H, MALA-logit or MALA-H)")))
    }
}

/// How `λ` is chosen for a data set.
///
/// Risks are means over observed entries, so `PerObservedEntry(c)` (λ = c·m)
/// corresponds to weighting the summed loss by `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Fixed(f64),
    PerObservedEntry(f64),
}

impl Temperature {
    pub fn lambda(self, m: usize) -> f64 {
        match self {
            Temperature::Fixed(l) => l,
            Temperature::PerObservedEntry(c) => c * m as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Posterior mean of the kept draws.
    pub coefficients: Coefficients,
    pub chain: ChainResult,
    pub config: SamplerConfig,
}

/// Samples the Gibbs posterior from the zero matrix and returns its mean.
pub fn fit(x: &DesignMatrix, y: &ResponseMatrix, cfg: &SamplerConfig) -> Result<FitResult> {
    if y.m() == 0 {
        return Err(Error::invalid("responses have no observed entries"));
    }
    let chain = run_chain(x, y, cfg, None)?;
    Ok(FitResult { coefficients: chain.posterior_mean.clone(), chain, config: cfg.clone() })
}

/// Fraction of entries in `eval_mask` where `sign(XM)` differs from `y_eval`.
pub fn misclassification(
    m: &Coefficients,
    x: &DesignMatrix,
    y_eval: &ResponseMatrix,
    eval_mask: &ObservationMask,
) -> Result<f64> {
    if eval_mask.is_empty() {
        return Err(Error::invalid("evaluation mask is empty"));
    }
    if eval_mask.n() != y_eval.n() || eval_mask.q() != y_eval.q() || x.n() != y_eval.n() || m.q() != y_eval.q() {
        return Err(Error::dims("evaluation mask, responses, design and coefficients disagree"));
    }
    let pred = predict(m, x)?;
    let mut wrong = 0usize;
    for (i, k) in eval_mask.iter() {
        let truth = y_eval
            .get(i, k)
            .ok_or_else(|| Error::invalid(format!("evaluation entry ({}, {}) has no label", i + 1, k + 1)))?;
        if pred[(i, k)] != truth {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / eval_mask.m() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// `(λ, τ)` pairs in evaluation order (λ-major).
    pub grid: Vec<(f64, f64)>,
    /// `fold_errors[g][f]`: misclassification of grid point `g` on fold `f`.
    pub fold_errors: Vec<Vec<f64>>,
    pub best: (f64, f64),
    /// The observed-entry folds, each a mask.
    pub folds: Vec<ObservationMask>,
}

impl CvReport {
    pub fn mean_errors(&self) -> Vec<f64> {
        self.fold_errors.iter().map(|e| e.iter().sum::<f64>() / e.len() as f64).collect()
    }
}

/// Partitions the observed entries of `mask` into `k` folds of near-equal
/// size, uniformly at random.
pub fn entry_folds(mask: &ObservationMask, k: usize, seed: u64) -> Result<Vec<ObservationMask>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if mask.m() < k {
        return Err(Error::invalid(format!("{} observed entries cannot fill {k} folds", mask.m())));
    }
    let mut entries: Vec<(usize, usize)> = mask.iter().collect();
    entries.shuffle(&mut rng::stream(seed, 0));
    let mut buckets = vec![Vec::new(); k];
    for (idx, pair) in entries.into_iter().enumerate() {
        buckets[idx % k].push(pair);
    }
    buckets.into_iter().map(|b| ObservationMask::from_pairs(mask.n(), mask.q(), b)).collect()
}

/// K-fold cross-validation of `(λ, τ)` over observed entries.
///
/// Every grid point sees the same folds and, on fold `f`, the same chain seed
/// `child_seed(cfg_base.seed, f)`. The best pair minimizes mean fold error;
/// ties go to the smaller `λ`, then the smaller `τ`.
pub fn cross_validate(
    x: &DesignMatrix,
    y: &ResponseMatrix,
    cfg_base: &SamplerConfig,
    lambda_grid: &[f64],
    tau_grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    if lambda_grid.is_empty() || tau_grid.is_empty() {
        return Err(Error::invalid("lambda and tau grids must be non-empty"));
    }
    let folds = entry_folds(y.mask(), k, seed)?;
    let grid: Vec<(f64, f64)> = lambda_grid.iter().flat_map(|&l| tau_grid.iter().map(move |&t| (l, t))).collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k).map(move |f| (g, f))).collect();

    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (lambda, tau) = grid[g];
            let train_mask = y.mask().difference(&folds[f])?;
            let train = y.restrict(&train_mask)?;
            let cfg = SamplerConfig { lambda, tau, seed: rng::child_seed(cfg_base.seed, f as u64), ..cfg_base.clone() };
            let fitted = fit(x, &train, &cfg)?;
            misclassification(&fitted.coefficients, x, y, &folds[f])
        })
        .collect::<Result<_>>()?;

    let fold_errors: Vec<Vec<f64>> = errors.chunks(k).map(<[f64]>::to_vec).collect();
    let means: Vec<f64> = fold_errors.iter().map(|e| e.iter().sum::<f64>() / k as f64).collect();
    let best_idx = (0..grid.len())
        .min_by(|&a, &b| {
            means[a]
                .total_cmp(&means[b])
                .then(grid[a].0.total_cmp(&grid[b].0))
                .then(grid[a].1.total_cmp(&grid[b].1))
        })
        .expect("non-empty grid");
    Ok(CvReport { best: grid[best_idx], grid, fold_errors, folds })
}

/// Held-out evaluation scheme for repeated real-data experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    /// Random row partition: fit on `train` rows, score all entries of the
    /// `test` rows.
    Rows { train: usize, test: usize },
    /// Remove `round(fraction·m)` observed entries, fit on the rest and score
    /// the removed entries.
    Entries { fraction: f64 },
}

/// Repeats a random split `reps` times and returns the per-split
/// misclassification. Split `r` is drawn from stream `r` of `seed`; the chain
/// uses `child_seed(seed, r)`.
pub fn evaluate_splits(
    x: &DesignMatrix,
    y: &ResponseMatrix,
    cfg: &SamplerConfig,
    temperature: Temperature,
    split: Split,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::invalid("need at least one repetition"));
    }
    match split {
        Split::Rows { train, test } => {
            if train == 0 || test == 0 || train + test > x.n() {
                return Err(Error::invalid(format!("cannot split {} rows into {train} train and {test} test", x.n())));
            }
        }
        Split::Entries { fraction } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::invalid(format!("held-out fraction must lie in (0, 1), got {fraction}")));
            }
        }
    }
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut split_rng = rng::stream(seed, r as u64);
            let chain_seed = rng::child_seed(seed, r as u64);
            match split {
                Split::Rows { train, test } => {
                    let mut rows: Vec<usize> = (0..x.n()).collect();
                    rows.shuffle(&mut split_rng);
                    let (train_rows, test_rows) = (&rows[..train], &rows[train..train + test]);
                    let x_train = x.select_rows(train_rows)?;
                    let y_train = y.select_rows(train_rows)?;
                    let x_test = x.select_rows(test_rows)?;
                    let y_test = y.select_rows(test_rows)?;
                    let cfg = SamplerConfig { lambda: temperature.lambda(y_train.m()), seed: chain_seed, ..cfg.clone() };
                    let fitted = fit(&x_train, &y_train, &cfg)?;
                    misclassification(&fitted.coefficients, &x_test, &y_test, y_test.mask())
                }
                Split::Entries { fraction } => {
                    let mut entries: Vec<(usize, usize)> = y.mask().iter().collect();
                    entries.shuffle(&mut split_rng);
                    let removed = ((fraction * entries.len() as f64).round() as usize).clamp(1, entries.len() - 1);
                    let heldout = ObservationMask::from_pairs(y.n(), y.q(), entries[..removed].iter().copied())?;
                    let train = y.restrict(&y.mask().difference(&heldout)?)?;
                    let cfg = SamplerConfig { lambda: temperature.lambda(train.m()), seed: chain_seed, ..cfg.clone() };
                    let fitted = fit(x, &train, &cfg)?;
                    misclassification(&fitted.coefficients, x, y, &heldout)
                }
            }
        })
        .collect()
}
