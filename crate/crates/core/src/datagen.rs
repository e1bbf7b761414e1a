//! Simulation designs: Gaussian covariates, (approximately) rank-2 truth,
//! six response-noise settings and uniform missingness.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{self, Method, Temperature};
use crate::model::{sigmoid, Coefficients, DesignMatrix, ObservationMask, ResponseMatrix};
use crate::rng::{self, SimRng};
use crate::sampler::SamplerConfig;

/// Response-generating setting.
///
/// | id | labels | noise |
/// |---|---|---|
/// | I.1 | `sign(XM*)` | none |
/// | I.2 | `sign(XM* + E)` | `E ~ N(0,1)` |
/// | I.3 | `sign(XM*)·B` | `B = −1` w.p. 0.1 |
/// | I.4 | `sign(XM* + E)·B` | both |
/// | II.1 | Bernoulli(σ(XM*)) | none |
/// | II.2 | Bernoulli(σ(XM* + E)) | `E ~ N(0,1)` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SettingId {
    I1,
    I2,
    I3,
    I4,
    II1,
    II2,
}

pub const FLIP_PROBABILITY: f64 = 0.1;

impl SettingId {
    pub const ALL: [SettingId; 6] = [Self::I1, Self::I2, Self::I3, Self::I4, Self::II1, Self::II2];

    fn gaussian_noise(self) -> bool {
        matches!(self, Self::I2 | Self::I4 | Self::II2)
    }

    fn label_flips(self) -> bool {
        matches!(self, Self::I3 | Self::I4)
    }

    fn logistic(self) -> bool {
        matches!(self, Self::II1 | Self::II2)
    }
}

impl fmt::Display for SettingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::I1 => "I.1",
            Self::I2 => "I.2",
            Self::I3 => "I.3",
            Self::I4 => "I.4",
            Self::II1 => "II.1",
            Self::II2 => "II.2",
        };
        f.write_str(s)
    }
}

impl FromStr for SettingId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown setting id {s:?} (expected one of I.1, I.2, I.3, I.4, II.1, II.2)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthKind {
    /// `A Bᵀ` with `A: p×2`, `B: q×2` standard normal.
    ExactRank2,
    /// `2·(rank-2 draw) + N` with `N` entries of standard deviation `noise_sd`.
    ApproxRank2 { noise_sd: f64 },
}

/// Default perturbation for [`TruthKind::ApproxRank2`]: variance 0.1.
pub fn default_noise_sd() -> f64 {
    0.1f64.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSetting {
    pub id: SettingId,
    pub truth: TruthKind,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub missing_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SimInstance {
    pub x: DesignMatrix,
    pub m_star: Coefficients,
    /// Responses restricted to the training mask.
    pub y: ResponseMatrix,
    /// All responses, for evaluation on held-out entries.
    pub y_full: ResponseMatrix,
    /// Complement of the training mask; empty when fully observed.
    pub heldout_mask: ObservationMask,
}

fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `n × p` design with i.i.d. standard normal entries.
pub fn gen_design<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<DesignMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("design dimensions must be positive"));
    }
    DesignMatrix::new(normal_matrix(n, p, rng))
}

pub fn gen_truth<R: Rng + ?Sized>(p: usize, q: usize, kind: TruthKind, rng: &mut R) -> Result<Coefficients> {
    if p < 2 || q < 2 {
        return Err(Error::invalid(format!("rank-2 truth needs p, q >= 2, got p = {p}, q = {q}")));
    }
    let a = normal_matrix(p, 2, rng);
    let b = normal_matrix(q, 2, rng);
    let low_rank = a * b.transpose();
    let m = match kind {
        TruthKind::ExactRank2 => low_rank,
        TruthKind::ApproxRank2 { noise_sd } => {
            if !(noise_sd.is_finite() && noise_sd >= 0.0) {
                return Err(Error::invalid(format!("noise sd must be non-negative, got {noise_sd}")));
            }
            low_rank * 2.0 + normal_matrix(p, q, rng) * noise_sd
        }
    };
    Coefficients::new(m)
}

fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Fully observed responses drawn from `setting`'s law given `(X, M*)`.
pub fn gen_responses<R: Rng + ?Sized>(
    x: &DesignMatrix,
    m_star: &Coefficients,
    setting: SettingId,
    rng: &mut R,
) -> Result<ResponseMatrix> {
    if x.p() != m_star.p() {
        return Err(Error::dims(format!("design has {} columns but M* has {} rows", x.p(), m_star.p())));
    }
    let mut u = x.values() * m_star.values();
    if setting.gaussian_noise() {
        u += normal_matrix(u.nrows(), u.ncols(), rng);
    }
    let labels = if setting.logistic() {
        u.map(|v| if rng.random::<f64>() < sigmoid(v) { 1 } else { -1 })
    } else if setting.label_flips() {
        let flip = Bernoulli::new(FLIP_PROBABILITY).expect("valid probability");
        u.map(|v| if flip.sample(rng) { -sign(v) } else { sign(v) })
    } else {
        u.map(sign)
    };
    ResponseMatrix::full(labels)
}

/// Observed set after removing exactly `round(fraction·nq)` entries uniformly
/// without replacement.
pub fn gen_mask<R: Rng + ?Sized>(n: usize, q: usize, missing_fraction: f64, rng: &mut R) -> Result<ObservationMask> {
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(Error::invalid(format!("missing fraction must lie in [0, 1), got {missing_fraction}")));
    }
    let total = n * q;
    let removed = (missing_fraction * total as f64).round() as usize;
    let mut observed = vec![true; total];
    for idx in index::sample(rng, total, removed) {
        observed[idx] = false;
    }
    ObservationMask::from_column_major(n, q, observed)
}

/// Draws a complete instance. All randomness comes from `rng`.
pub fn gen_instance(setting: &SimSetting, rng: &mut SimRng) -> Result<SimInstance> {
    let x = gen_design(setting.n, setting.p, rng)?;
    let m_star = gen_truth(setting.p, setting.q, setting.truth, rng)?;
    let y_full = gen_responses(&x, &m_star, setting.id, rng)?;
    let train = gen_mask(setting.n, setting.q, setting.missing_fraction, rng)?;
    let y = y_full.restrict(&train)?;
    let heldout_mask = train.complement();
    Ok(SimInstance { x, m_star, y, y_full, heldout_mask })
}

/// Per-method outcome of a replicated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    /// Misclassification per repetition, as a fraction.
    pub errors: Vec<f64>,
    pub mean_acceptance: f64,
    pub mean_step_size: f64,
}

impl MethodSummary {
    pub fn mean_error(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    /// Sample standard deviation; 0 with a single repetition.
    pub fn std_error(&self) -> f64 {
        let k = self.errors.len();
        if k < 2 {
            return 0.0;
        }
        let mean = self.mean_error();
        (self.errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub setting: SimSetting,
    pub reps: usize,
    pub methods: Vec<MethodSummary>,
}

struct RepOutcome {
    error: f64,
    acceptance: f64,
    step_size: f64,
}

/// Repeats `reps` times: draw an instance, fit every method on the observed
/// entries, score misclassification.
///
/// Scoring uses the held-out entries when responses are missing, and an
/// independent redraw of all `nq` responses from the same `(X, M*)` law when
/// fully observed. Repetition `r` draws its instance from stream `r` of
/// `setting.seed`; method `j` samples with seed `child_seed(rep_seed, j)`.
pub fn run_replicated_experiment(
    setting: &SimSetting,
    methods: &[Method],
    reps: usize,
    sampler_cfg: &SamplerConfig,
    temperature: Temperature,
) -> Result<ExperimentResult> {
    if reps == 0 {
        return Err(Error::invalid("need at least one repetition"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("need at least one method"));
    }
    let per_rep: Vec<Vec<RepOutcome>> = (0..reps)
        .into_par_iter()
        .map(|rep| run_repetition(setting, methods, rep, sampler_cfg, temperature))
        .collect::<Result<_>>()?;

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let outcomes: Vec<&RepOutcome> = per_rep.iter().map(|r| &r[j]).collect();
            MethodSummary {
                method,
                errors: outcomes.iter().map(|o| o.error).collect(),
                mean_acceptance: outcomes.iter().map(|o| o.acceptance).sum::<f64>() / reps as f64,
                mean_step_size: outcomes.iter().map(|o| o.step_size).sum::<f64>() / reps as f64,
            }
        })
        .collect();
    Ok(ExperimentResult { setting: setting.clone(), reps, methods: summaries })
}

fn run_repetition(
    setting: &SimSetting,
    methods: &[Method],
    rep: usize,
    sampler_cfg: &SamplerConfig,
    temperature: Temperature,
) -> Result<Vec<RepOutcome>> {
    let mut data_rng = rng::stream(setting.seed, rep as u64);
    let inst = gen_instance(setting, &mut data_rng)?;
    let (eval_y, eval_mask) = if inst.heldout_mask.is_empty() {
        let y_test = gen_responses(&inst.x, &inst.m_star, setting.id, &mut data_rng)?;
        let mask = y_test.mask().clone();
        (y_test, mask)
    } else {
        (inst.y_full.clone(), inst.heldout_mask.clone())
    };
    let rep_seed = rng::child_seed(setting.seed, rep as u64);
    methods
        .iter()
        .enumerate()
        .map(|(j, method)| {
            let cfg = method.configure(sampler_cfg, temperature, inst.y.m(), rng::child_seed(rep_seed, j as u64));
            let fit = estimator::fit(&inst.x, &inst.y, &cfg)?;
            let error = estimator::misclassification(&fit.coefficients, &inst.x, &eval_y, &eval_mask)?;
            Ok(RepOutcome {
                error,
                acceptance: fit.chain.acceptance_rate,
                step_size: fit.chain.final_step_size,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::zero_one_risk;

    fn rng(seed: u64) -> SimRng {
        rng::stream(seed, 0)
    }

    #[test]
    fn design_shape_and_moments() {
        let x = gen_design(100, 12, &mut rng(1)).unwrap();
        assert_eq!((x.n(), x.p()), (100, 12));
        let mean = x.values().mean();
        assert!(mean.abs() < 3.0 / (1200f64).sqrt());
        assert_eq!(x, gen_design(100, 12, &mut rng(1)).unwrap());
        assert_ne!(x, gen_design(100, 12, &mut rng(2)).unwrap());
    }

    #[test]
    fn truth_ranks() {
        let exact = gen_truth(12, 8, TruthKind::ExactRank2, &mut rng(3)).unwrap();
        let sv = exact.values().clone().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(s[2] < 1e-10 * s[0]);
        assert!(s[1] > 1e-6 * s[0]);

        let approx = gen_truth(12, 8, TruthKind::ApproxRank2 { noise_sd: default_noise_sd() }, &mut rng(3)).unwrap();
        let mut s: Vec<f64> = approx.values().clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(s[2] > 0.0);
        assert!(s[2] < 0.5 * s[1]);

        assert_eq!(exact, gen_truth(12, 8, TruthKind::ExactRank2, &mut rng(3)).unwrap());
        assert!(gen_truth(1, 8, TruthKind::ExactRank2, &mut rng(3)).is_err());
    }

    #[test]
    fn noiseless_labels_are_realizable() {
        let mut r = rng(5);
        let x = gen_design(100, 12, &mut r).unwrap();
        let m = gen_truth(12, 8, TruthKind::ExactRank2, &mut r).unwrap();
        let y = gen_responses(&x, &m, SettingId::I1, &mut r).unwrap();
        let xm = x.values() * m.values();
        assert!(xm.iter().all(|v| *v != 0.0));
        assert_eq!(y.values(), &xm.map(sign));
        assert_eq!(zero_one_risk(&m, &x, &y).unwrap(), 0.0);
        assert_eq!(y, gen_responses(&x, &m, SettingId::I1, &mut rng(99)).unwrap());
    }

    #[test]
    fn flip_rate_within_binomial_band() {
        let mut r = rng(6);
        let (n, q) = (400, 20);
        let x = gen_design(n, 5, &mut r).unwrap();
        let m = gen_truth(5, q, TruthKind::ExactRank2, &mut r).unwrap();
        let clean = gen_responses(&x, &m, SettingId::I1, &mut r).unwrap();
        let flipped = gen_responses(&x, &m, SettingId::I3, &mut r).unwrap();
        let frac = clean.values().iter().zip(flipped.values().iter()).filter(|(a, b)| a != b).count() as f64 / (n * q) as f64;
        assert!((frac - 0.1).abs() < 3.0 * (0.09 / (n * q) as f64).sqrt(), "flip fraction {frac}");
    }

    #[test]
    fn logistic_labels_balanced_at_zero_truth() {
        let mut r = rng(7);
        let (n, q) = (300, 10);
        let x = gen_design(n, 4, &mut r).unwrap();
        let y = gen_responses(&x, &Coefficients::zeros(4, q), SettingId::II1, &mut r).unwrap();
        let pos = y.values().iter().filter(|&&v| v == 1).count() as f64 / (n * q) as f64;
        assert!((pos - 0.5).abs() < 3.0 / (2.0 * ((n * q) as f64).sqrt()));
    }

    #[test]
    fn mask_cardinality_is_exact() {
        assert!(gen_mask(100, 8, 0.0, &mut rng(1)).unwrap().is_full());
        let m = gen_mask(100, 8, 0.3, &mut rng(1)).unwrap();
        assert_eq!(m.m(), 560);
        assert_eq!(m, gen_mask(100, 8, 0.3, &mut rng(1)).unwrap());
        assert_ne!(m, gen_mask(100, 8, 0.3, &mut rng(2)).unwrap());
        assert!(gen_mask(10, 2, 1.0, &mut rng(1)).is_err());
        assert!(gen_mask(10, 2, -0.1, &mut rng(1)).is_err());
    }

    #[test]
    fn instance_masks_partition_the_grid() {
        let setting = SimSetting { id: SettingId::I2, truth: TruthKind::ExactRank2, n: 30, p: 4, q: 3, missing_fraction: 0.2, seed: 1 };
        let inst = gen_instance(&setting, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(inst.y.m() + inst.heldout_mask.m(), 90);
        assert!(inst.y.mask().intersection(&inst.heldout_mask).unwrap().is_empty());
    }

    #[test]
    fn setting_ids_parse() {
        for id in SettingId::ALL {
            assert_eq!(id.to_string().parse::<SettingId>().unwrap(), id);
        }
        assert!("I.9".parse::<SettingId>().is_err());
    }
}
