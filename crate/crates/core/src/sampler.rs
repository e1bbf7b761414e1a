//! Gibbs pseudo-posterior target and Langevin samplers.
//!
//! The target is `log ρ̂(M) = −λ·r(M) + log π(M)` where `r` is the mean loss
//! over observed entries. Both samplers move along the gradient of the
//! log-density (ascent): `M' = M + h ∇log ρ̂(M) + √(2h) N`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{self, Coefficients, DesignMatrix, Loss, ResponseMatrix};
use crate::prior::{self, GramSide, PriorParams};
use crate::rng;

/// Multiplicative adaptation gain applied during burn-in.
pub const ADAPT_GAIN: f64 = 0.01;
/// Chains whose state exceeds this Frobenius norm are aborted.
pub const DIVERGENCE_NORM: f64 = 1e8;
/// Ratio between the unadjusted LMC step and the MALA-tuned step.
pub const LMC_STEP_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Lmc,
    Mala,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lmc => "LMC",
            Algorithm::Mala => "MALA",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Temperature multiplying the mean empirical risk.
    pub lambda: f64,
    /// Prior scale.
    pub tau: f64,
    /// Initial step size `h`.
    pub step_size: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub loss: Loss,
    pub algorithm: Algorithm,
    /// Tune `h` during burn-in. For LMC the burn-in runs MALA-corrected steps
    /// and the tuned step is scaled by [`LMC_STEP_RATIO`] afterwards.
    pub adapt_step: bool,
    pub target_acceptance: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tau: 1.0,
            step_size: 1e-3,
            iterations: 10_000,
            burn_in: 2_500,
            thinning: 1,
            seed: 0,
            loss: Loss::Hinge,
            algorithm: Algorithm::Mala,
            adapt_step: true,
            target_acceptance: 0.5,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        PriorParams::new(self.tau)?;
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::invalid(format!(
                "need burn_in < iterations, got burn_in = {} and iterations = {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be at least 1"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::invalid(format!("target acceptance must lie in (0, 1), got {}", self.target_acceptance)));
        }
        Ok(())
    }
}

/// Log-density, gradient and (for Gibbs targets) the empirical risk at a point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub log_density: f64,
    pub gradient: DMatrix<f64>,
    /// Mean empirical loss; `NaN` for targets without one.
    pub risk: f64,
}

/// A differentiable unnormalized log-density over `p × q` matrices.
pub trait LogDensity {
    fn evaluate(&self, m: &DMatrix<f64>) -> Result<Evaluation>;
}

/// `exp(−λ r(M)) π(M)` for fixed data.
#[derive(Debug, Clone)]
pub struct GibbsTarget<'a> {
    x: &'a DesignMatrix,
    y: &'a ResponseMatrix,
    lambda: f64,
    prior: PriorParams,
    loss: Loss,
}

impl<'a> GibbsTarget<'a> {
    pub fn new(x: &'a DesignMatrix, y: &'a ResponseMatrix, lambda: f64, tau: f64, loss: Loss) -> Result<Self> {
        if x.n() != y.n() {
            return Err(Error::dims(format!("design has {} rows but responses have {}", x.n(), y.n())));
        }
        if y.m() == 0 {
            return Err(Error::invalid("observation mask is empty"));
        }
        Ok(Self { x, y, lambda, prior: PriorParams::new(tau)?, loss })
    }

    pub fn from_config(x: &'a DesignMatrix, y: &'a ResponseMatrix, cfg: &SamplerConfig) -> Result<Self> {
        Self::new(x, y, cfg.lambda, cfg.tau, cfg.loss)
    }

    pub fn p(&self) -> usize {
        self.x.p()
    }

    pub fn q(&self) -> usize {
        self.y.q()
    }
}

impl LogDensity for GibbsTarget<'_> {
    fn evaluate(&self, m: &DMatrix<f64>) -> Result<Evaluation> {
        let (risk, loss_grad) = model::loss_and_gradient(self.loss, m, self.x, self.y, true)?;
        let prior = prior::evaluate(m, self.prior, GramSide::Auto)?;
        let gradient = prior.gradient - loss_grad.expect("gradient requested") * self.lambda;
        Ok(Evaluation { log_density: prior.log_density - self.lambda * risk, gradient, risk })
    }
}

/// Unnormalized Gibbs log-density `−λ r(M) + log π(M)`.
pub fn log_target(m: &Coefficients, x: &DesignMatrix, y: &ResponseMatrix, cfg: &SamplerConfig) -> Result<f64> {
    Ok(GibbsTarget::from_config(x, y, cfg)?.evaluate(m.values())?.log_density)
}

pub fn log_target_gradient(
    m: &Coefficients,
    x: &DesignMatrix,
    y: &ResponseMatrix,
    cfg: &SamplerConfig,
) -> Result<Coefficients> {
    Coefficients::new(GibbsTarget::from_config(x, y, cfg)?.evaluate(m.values())?.gradient)
}

fn gaussian_like<R: Rng + ?Sized>(shape: (usize, usize), rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(shape.0, shape.1, |_, _| rng.sample(StandardNormal))
}

fn langevin_mean(m: &DMatrix<f64>, gradient: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    m + gradient * h
}

/// One unadjusted Langevin step `M + h ∇log ρ̂(M) + √(2h) N`.
pub fn lmc_step<F, R>(m: &DMatrix<f64>, grad_fn: F, h: f64, rng: &mut R) -> Result<DMatrix<f64>>
where
    F: FnOnce(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    R: Rng + ?Sized,
{
    let gradient = grad_fn(m)?;
    let noise = gaussian_like(m.shape(), rng);
    Ok(langevin_mean(m, &gradient, h) + noise * (2.0 * h).sqrt())
}

/// Current point of a chain with its cached evaluation.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub m: DMatrix<f64>,
    pub eval: Evaluation,
}

impl ChainState {
    pub fn new<D: LogDensity + ?Sized>(target: &D, m: DMatrix<f64>) -> Result<Self> {
        let eval = target.evaluate(&m)?;
        if !eval.log_density.is_finite() {
            return Err(Error::invalid("initial state has non-finite log-density"));
        }
        Ok(Self { m, eval })
    }
}

#[derive(Debug, Clone)]
pub struct MalaOutcome {
    pub state: ChainState,
    pub accepted: bool,
    /// Log acceptance ratio; `-inf` when the proposal left the support.
    pub log_alpha: f64,
    /// The proposal was rejected because its log-density was not finite.
    pub non_finite: bool,
}

/// `log q(to | from) = −‖to − from − h ∇log ρ̂(from)‖²_F / (4h)` up to a constant.
fn log_transition(to: &DMatrix<f64>, from: &DMatrix<f64>, grad_from: &DMatrix<f64>, h: f64) -> f64 {
    -(to - langevin_mean(from, grad_from, h)).norm_squared() / (4.0 * h)
}

/// One Metropolis-adjusted Langevin step from `state`.
pub fn mala_step<D, R>(state: ChainState, target: &D, h: f64, rng: &mut R) -> Result<MalaOutcome>
where
    D: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let noise = gaussian_like(state.m.shape(), rng);
    let u: f64 = rng.random();
    let proposal = langevin_mean(&state.m, &state.eval.gradient, h) + noise * (2.0 * h).sqrt();

    let rejected = |state| MalaOutcome { state, accepted: false, log_alpha: f64::NEG_INFINITY, non_finite: true };
    if proposal.iter().any(|v| !v.is_finite()) {
        return Ok(rejected(state));
    }
    let eval = target.evaluate(&proposal)?;
    if !eval.log_density.is_finite() || eval.gradient.iter().any(|v| !v.is_finite()) {
        return Ok(rejected(state));
    }

    let log_alpha = (eval.log_density - state.eval.log_density)
        + log_transition(&state.m, &proposal, &eval.gradient, h)
        - log_transition(&proposal, &state.m, &state.eval.gradient, h);
    let accepted = log_alpha >= 0.0 || u.ln() < log_alpha;
    let state = if accepted { ChainState { m: proposal, eval } } else { state };
    Ok(MalaOutcome { state, accepted, log_alpha, non_finite: false })
}

/// Summary of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub posterior_mean: Coefficients,
    /// Post-burn-in acceptance rate; 1.0 for unadjusted LMC.
    pub acceptance_rate: f64,
    pub final_step_size: f64,
    /// Step size in force at iteration `burn_in`.
    pub frozen_step_size: f64,
    /// `(iteration, mean empirical loss)` at every kept draw.
    pub risk_trace: Vec<(usize, f64)>,
    pub n_kept: usize,
    /// Proposals rejected for a non-finite log-density.
    pub non_finite_rejections: usize,
}

/// Runs a chain on an arbitrary target, calling `visit` with every kept
/// state. Returns the chain summary with `posterior_mean` set to the mean of
/// the kept states.
pub fn sample<D, F>(target: &D, cfg: &SamplerConfig, init: DMatrix<f64>, mut visit: F) -> Result<ChainResult>
where
    D: LogDensity + ?Sized,
    F: FnMut(usize, &ChainState),
{
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, 0);
    let mut state = ChainState::new(target, init)?;
    let mut h = cfg.step_size;
    let mut frozen_step_size = h;
    let mut sum = DMatrix::<f64>::zeros(state.m.nrows(), state.m.ncols());
    let mut n_kept = 0usize;
    let mut accepted_after_burn_in = 0usize;
    let mut non_finite_rejections = 0usize;
    let mut risk_trace = Vec::new();

    for t in 0..cfg.iterations {
        if t == cfg.burn_in {
            if cfg.algorithm == Algorithm::Lmc && cfg.adapt_step {
                h *= LMC_STEP_RATIO;
            }
            frozen_step_size = h;
        }
        let burning_in = t < cfg.burn_in;
        let corrected = cfg.algorithm == Algorithm::Mala || (burning_in && cfg.adapt_step);

        if corrected {
            let outcome = mala_step(state, target, h, &mut rng)?;
            state = outcome.state;
            non_finite_rejections += usize::from(outcome.non_finite);
            if burning_in && cfg.adapt_step {
                let indicator = if outcome.accepted { 1.0 } else { 0.0 };
                h *= (ADAPT_GAIN * (indicator - cfg.target_acceptance)).exp();
            }
            if !burning_in && outcome.accepted {
                accepted_after_burn_in += 1;
            }
        } else {
            let gradient = &state.eval.gradient;
            let next = lmc_step(&state.m, |_| Ok(gradient.clone()), h, &mut rng)?;
            let norm = next.norm();
            if !norm.is_finite() || norm > DIVERGENCE_NORM {
                return Err(Error::Divergence { step: t, step_size: h, norm });
            }
            let eval = target.evaluate(&next)?;
            if !eval.log_density.is_finite() {
                return Err(Error::Divergence { step: t, step_size: h, norm });
            }
            state = ChainState { m: next, eval };
            if !burning_in {
                accepted_after_burn_in += 1;
            }
        }

        let norm = state.m.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence { step: t, step_size: h, norm });
        }

        if !burning_in && (t - cfg.burn_in).is_multiple_of(cfg.thinning) {
            sum += &state.m;
            n_kept += 1;
            risk_trace.push((t, state.eval.risk));
            visit(t, &state);
        }
    }

    let post = cfg.iterations - cfg.burn_in;
    let acceptance_rate = if cfg.algorithm == Algorithm::Lmc { 1.0 } else { accepted_after_burn_in as f64 / post as f64 };
    Ok(ChainResult {
        posterior_mean: Coefficients::new(sum / n_kept as f64)?,
        acceptance_rate,
        final_step_size: h,
        frozen_step_size,
        risk_trace,
        n_kept,
        non_finite_rejections,
    })
}

/// Runs the configured sampler on the Gibbs posterior of `(x, y)`, starting
/// from `init` or the zero matrix.
pub fn run_chain(
    x: &DesignMatrix,
    y: &ResponseMatrix,
    cfg: &SamplerConfig,
    init: Option<&Coefficients>,
) -> Result<ChainResult> {
    let target = GibbsTarget::from_config(x, y, cfg)?;
    let start = match init {
        Some(m0) => {
            if m0.p() != x.p() || m0.q() != y.q() {
                return Err(Error::dims(format!(
                    "initial state is {}x{}, expected {}x{}",
                    m0.p(),
                    m0.q(),
                    x.p(),
                    y.q()
                )));
            }
            m0.values().clone()
        }
        None => DMatrix::zeros(x.p(), y.q()),
    };
    sample(&target, cfg, start, |_, _| {})
}

/// Which theoretical temperature to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRegime {
    /// `2nq/(3C+2)`.
    Full,
    /// `2m/(3C+2)`.
    Missing,
    /// `2√(nq/(p+q+2))`, no margin assumption.
    SlowRate { p: usize },
}

pub fn default_lambda(n: usize, q: usize, m: usize, c: f64, regime: LambdaRegime) -> Result<f64> {
    if n == 0 || q == 0 || m == 0 {
        return Err(Error::invalid("default_lambda needs positive n, q and m"));
    }
    if !(c.is_finite() && c >= 1.0) {
        return Err(Error::invalid(format!("margin constant C must be at least 1, got {c}")));
    }
    let nq = (n * q) as f64;
    Ok(match regime {
        LambdaRegime::Full => 2.0 * nq / (3.0 * c + 2.0),
        LambdaRegime::Missing => 2.0 * m as f64 / (3.0 * c + 2.0),
        LambdaRegime::SlowRate { p } => {
            if p == 0 {
                return Err(Error::invalid("default_lambda needs positive p"));
            }
            2.0 * (nq / (p + q + 2) as f64).sqrt()
        }
    })
}
