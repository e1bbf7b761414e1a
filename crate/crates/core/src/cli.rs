//! The `binrank` command line.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical divergence.
//! Any subcommand accepts `--config FILE` holding `key = value` lines named
//! after the long flags; flags given on the command line take precedence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{self, BoundInputs};
use crate::datagen::{self, default_noise_sd, ExperimentResult, SettingId, SimSetting, TruthKind};
use crate::error::{Error, Result};
use crate::estimator::{self, Method, Split, Temperature};
use crate::io::{self, format_float, push_csv_line, ResponseCoding};
use crate::model::{self, Loss};
use crate::rng;
use crate::sampler::{Algorithm, SamplerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "binrank", version, about = "Low-rank multi-response binary classification with Langevin-sampled Gibbs posteriors")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replicated simulation study on a synthetic setting.
    Simulate(SimulateArgs),
    /// Fit on CSV data, or run repeated held-out evaluation with a split flag.
    Fit(FitArgs),
    /// Predict signs from a coefficients CSV and a design CSV.
    Predict(PredictArgs),
    /// Cross-validate (lambda, tau) over observed entries.
    Cv(CvArgs),
    /// Evaluate the explicit risk bounds.
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Hinge,
    Logistic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Mala,
    Lmc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CodingArg {
    Native,
    ZeroOne,
    Threshold,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TruthArg {
    Exact,
    Approx,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Fixed temperature. Defaults to `lambda-per-entry × observed entries`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Temperature per observed entry when --lambda is not given.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_per_entry: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Initial step size.
    #[arg(long, default_value_t = 1e-3)]
    pub step_size: f64,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 2_500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thinning: usize,
    #[arg(long, value_enum, default_value_t = LossArg::Hinge)]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Mala)]
    pub algorithm: AlgorithmArg,
    /// Keep the step size fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,
    #[arg(long, default_value_t = 0.5)]
    pub target_acceptance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl SamplerArgs {
    fn temperature(&self) -> Temperature {
        match self.lambda {
            Some(l) => Temperature::Fixed(l),
            None => Temperature::PerObservedEntry(self.lambda_per_entry),
        }
    }

    fn config(&self, m: usize) -> SamplerConfig {
        SamplerConfig {
            lambda: self.temperature().lambda(m),
            tau: self.tau,
            step_size: self.step_size,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thinning: self.thinning,
            seed: self.seed,
            loss: match self.loss {
                LossArg::Hinge => Loss::Hinge,
                LossArg::Logistic => Loss::Logistic,
            },
            algorithm: match self.algorithm {
                AlgorithmArg::Mala => Algorithm::Mala,
                AlgorithmArg::Lmc => Algorithm::Lmc,
            },
            adapt_step: !self.no_adapt,
            target_acceptance: self.target_acceptance,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Design CSV (n × p).
    #[arg(long)]
    pub design: PathBuf,
    /// Response CSV (n × q).
    #[arg(long)]
    pub response: PathBuf,
    #[arg(long, value_enum, default_value_t = CodingArg::Native)]
    pub coding: CodingArg,
    /// Threshold for `--coding threshold`: values above it map to +1.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    #[arg(long, default_value = "NA")]
    pub missing_token: String,
}

impl DataArgs {
    fn load(&self) -> Result<(model::DesignMatrix, model::ResponseMatrix)> {
        let coding = match self.coding {
            CodingArg::Native => ResponseCoding::Native,
            CodingArg::ZeroOne => ResponseCoding::ZeroOne,
            CodingArg::Threshold => ResponseCoding::Threshold(self.threshold),
        };
        let x = io::read_design_csv(&self.design)?;
        let y = io::read_response_csv(&self.response, coding, &self.missing_token)?;
        if x.n() != y.n() {
            return Err(Error::dims(format!("design has {} rows but responses have {}", x.n(), y.n())));
        }
        Ok((x, y))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Setting id: I.1, I.2, I.3, I.4, II.1 or II.2.
    #[arg(long)]
    pub setting: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 12)]
    pub p: usize,
    #[arg(long, default_value_t = 8)]
    pub q: usize,
    #[arg(long, value_enum, default_value_t = TruthArg::Exact)]
    pub truth: TruthArg,
    /// Standard deviation of the approximate-rank perturbation (default √0.1).
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Fraction of responses removed and used for evaluation.
    #[arg(long, default_value_t = 0.0)]
    pub missing: f64,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Comma-separated methods (LMC-logit, LMC-H, MALA-logit, MALA-H).
    #[arg(long, default_value = "LMC-logit,LMC-H,MALA-logit,MALA-H")]
    pub methods: String,
    #[arg(long, default_value = "sim_out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value = "fit_out")]
    pub out: PathBuf,
    /// Row-split evaluation: training rows per split.
    #[arg(long, requires = "test_rows")]
    pub train_rows: Option<usize>,
    /// Row-split evaluation: test rows per split.
    #[arg(long, requires = "train_rows")]
    pub test_rows: Option<usize>,
    /// Entry-holdout evaluation: fraction of observed entries removed per split.
    #[arg(long, conflicts_with = "train_rows")]
    pub holdout_fraction: Option<f64>,
    /// Number of random splits in evaluation mode.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub coefficients: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Comma-separated temperatures.
    #[arg(long)]
    pub lambda_grid: String,
    /// Comma-separated prior scales.
    #[arg(long)]
    pub tau_grid: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "cv_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    /// Fill n, p, q, m, rank and norms from a generated instance of this setting.
    #[arg(long)]
    pub from_setting: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    /// Observed entries (defaults to n·q).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub rstar: Option<usize>,
    /// Frobenius norm of the design.
    #[arg(long)]
    pub norm_x: Option<f64>,
    /// Frobenius norm of the Bayes coefficient matrix.
    #[arg(long)]
    pub norm_mb: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rbar: f64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    pub varsigma: f64,
    /// Minimize each bound over varsigma in (0.01, 0.99).
    #[arg(long)]
    pub optimize_varsigma: bool,
    #[arg(long, default_value_t = 0.0)]
    pub missing: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Splices `--config FILE` entries in front of the user's flags so that the
/// command line wins under `args_override_self`.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config");
    let Some(pos) = pos else { return Ok(args) };
    let Some(path) = args.get(pos + 1) else { return Ok(args) };
    let entries = io::read_config(Path::new(path))?;
    let mut injected = Vec::new();
    for (key, value) in entries {
        let flag = format!("--{}", key.replace('_', "-"));
        match value.as_str() {
            "true" => injected.push(OsString::from(flag)),
            "false" => {}
            _ => {
                injected.push(OsString::from(flag));
                injected.push(OsString::from(value));
            }
        }
    }
    // args[0] is the program, args[1] the subcommand
    let split = 2.min(args.len());
    let mut out: Vec<OsString> = args[..split].to_vec();
    out.extend(injected);
    out.extend(args[split..].iter().cloned());
    Ok(out)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } | Error::Numerical(_) => EXIT_DIVERGENCE,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit(&a),
        Command::Predict(a) => predict(&a),
        Command::Cv(a) => cv(&a),
        Command::Bound(a) => bound(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::invalid(format!("invalid {what} {t:?}"))))
        .collect()
}

fn pct(v: f64) -> String {
    format!("{:.4}", 100.0 * v)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let id: SettingId = a.setting.parse()?;
    let methods: Vec<Method> = a.methods.split(',').map(|m| m.trim().parse()).collect::<Result<_>>()?;
    let truth = match a.truth {
        TruthArg::Exact => TruthKind::ExactRank2,
        TruthArg::Approx => TruthKind::ApproxRank2 { noise_sd: a.noise_sd.unwrap_or_else(default_noise_sd) },
    };
    let setting = SimSetting { id, truth, n: a.n, p: a.p, q: a.q, missing_fraction: a.missing, seed: a.sampler.seed };
    let base = a.sampler.config(a.n * a.q);
    base.validate()?;
    let result = datagen::run_replicated_experiment(&setting, &methods, a.reps, &base, a.sampler.temperature())?;

    create_dir(&a.out)?;
    io::write_text(a.out.join("results.csv"), &results_csv(&result))?;
    io::write_text(a.out.join("raw_errors.csv"), &raw_errors_csv(&result))?;
    for s in &result.methods {
        let mut dat = format!("# rep error_pct ({} {})\n", result.setting.id, s.method);
        for (r, e) in s.errors.iter().enumerate() {
            dat.push_str(&format!("{} {}\n", r + 1, pct(*e)));
        }
        io::write_text(a.out.join(format!("plot_{}.dat", s.method)), &dat)?;
    }
    let summary = summary_text(&result);
    io::write_text(a.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

/// Results table: one row per method.
pub fn results_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("setting,method,mean_error_pct,std_error_pct,reps,std_defined,mean_acceptance,mean_step_size\n");
    for s in &result.methods {
        push_csv_line(
            &mut out,
            &[
                result.setting.id.to_string(),
                s.method.to_string(),
                pct(s.mean_error()),
                pct(s.std_error()),
                result.reps.to_string(),
                (result.reps > 1).to_string(),
                format!("{:.4}", s.mean_acceptance),
                format_float(s.mean_step_size),
            ],
        );
    }
    out
}

pub fn raw_errors_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("setting,method,rep,error_pct\n");
    for s in &result.methods {
        for (r, e) in s.errors.iter().enumerate() {
            push_csv_line(&mut out, &[result.setting.id.to_string(), s.method.to_string(), (r + 1).to_string(), pct(*e)]);
        }
    }
    out
}

fn summary_text(result: &ExperimentResult) -> String {
    let st = &result.setting;
    let regime = if st.missing_fraction > 0.0 {
        format!("{:.0}% of responses missing, scored on held-out entries", 100.0 * st.missing_fraction)
    } else {
        "fully observed, scored on an independent response redraw".to_owned()
    };
    let mut out = format!(
        "Setting {} (n = {}, p = {}, q = {}, {:?}), {}, {} repetitions\n",
        st.id, st.n, st.p, st.q, st.truth, regime, result.reps
    );
    out.push_str("method        error % (sd)         acceptance\n");
    for s in &result.methods {
        let sd = if result.reps > 1 { format!("{:.2}", 100.0 * s.std_error()) } else { "n/a".into() };
        out.push_str(&format!(
            "{:<12}  {:>6.2} ({:>5})       {:.3}\n",
            s.method.to_string(),
            100.0 * s.mean_error(),
            sd,
            s.mean_acceptance
        ));
    }
    out
}

fn fit(a: &FitArgs) -> Result<()> {
    let (x, y) = a.data.load()?;
    create_dir(&a.out)?;
    let split = match (a.train_rows, a.test_rows, a.holdout_fraction) {
        (Some(train), Some(test), _) => Some(Split::Rows { train, test }),
        (_, _, Some(fraction)) => Some(Split::Entries { fraction }),
        _ => None,
    };
    if let Some(split) = split {
        let cfg = a.sampler.config(y.m());
        cfg.validate()?;
        let errors = estimator::evaluate_splits(&x, &y, &cfg, a.sampler.temperature(), split, a.reps, a.sampler.seed)?;
        let mut csv = String::from("split,error_pct\n");
        for (r, e) in errors.iter().enumerate() {
            push_csv_line(&mut csv, &[(r + 1).to_string(), pct(*e)]);
        }
        io::write_text(a.out.join("splits.csv"), &csv)?;
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let sd = if errors.len() > 1 {
            (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errors.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let summary = format!("{split:?}: {} splits, mean error {:.2}% (sd {:.2}%)\n", errors.len(), 100.0 * mean, 100.0 * sd);
        io::write_text(a.out.join("summary.txt"), &summary)?;
        print!("{summary}");
        return Ok(());
    }

    let cfg = a.sampler.config(y.m());
    let fitted = estimator::fit(&x, &y, &cfg)?;
    io::write_coefficients(a.out.join("coefficients.csv"), &fitted.coefficients)?;
    let mut trace = String::from("iteration,risk\n");
    for (t, r) in &fitted.chain.risk_trace {
        push_csv_line(&mut trace, &[t.to_string(), format_float(*r)]);
    }
    io::write_text(a.out.join("risk_trace.csv"), &trace)?;
    let train_error = model::zero_one_risk(&fitted.coefficients, &x, &y)?;
    let diag = format!(
        "algorithm = {}\nloss = {:?}\nlambda = {}\ntau = {}\nacceptance_rate = {}\nfinal_step_size = {}\nkept_draws = {}\nnon_finite_rejections = {}\ntraining_error = {}\n",
        cfg.algorithm.name(),
        cfg.loss,
        format_float(cfg.lambda),
        format_float(cfg.tau),
        format_float(fitted.chain.acceptance_rate),
        format_float(fitted.chain.final_step_size),
        fitted.chain.n_kept,
        fitted.chain.non_finite_rejections,
        format_float(train_error),
    );
    io::write_text(a.out.join("diagnostics.txt"), &diag)?;
    print!("{diag}");
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let m = io::read_coefficients(&a.coefficients)?;
    let x = io::read_design_csv(&a.design)?;
    let signs = model::predict(&m, &x)?;
    match &a.out {
        Some(path) => io::write_signs(path, &signs),
        None => {
            print!("{}", io::matrix_to_csv(&signs, i8::to_string));
            Ok(())
        }
    }
}

fn cv(a: &CvArgs) -> Result<()> {
    let (x, y) = a.data.load()?;
    let lambdas: Vec<f64> = parse_list(&a.lambda_grid, "lambda")?;
    let taus: Vec<f64> = parse_list(&a.tau_grid, "tau")?;
    let base = a.sampler.config(y.m());
    let report = estimator::cross_validate(&x, &y, &base, &lambdas, &taus, a.folds, a.sampler.seed)?;
    create_dir(&a.out)?;
    let mut csv = String::from("lambda,tau,fold,error\n");
    for (g, (l, t)) in report.grid.iter().enumerate() {
        for (f, e) in report.fold_errors[g].iter().enumerate() {
            push_csv_line(&mut csv, &[format_float(*l), format_float(*t), (f + 1).to_string(), format_float(*e)]);
        }
    }
    io::write_text(a.out.join("cv_folds.csv"), &csv)?;
    let mut summary = String::from("lambda,tau,mean_error\n");
    for ((l, t), e) in report.grid.iter().zip(report.mean_errors()) {
        push_csv_line(&mut summary, &[format_float(*l), format_float(*t), format_float(e)]);
    }
    io::write_text(a.out.join("cv_summary.csv"), &summary)?;
    let best = format!("best_lambda = {}\nbest_tau = {}\n", format_float(report.best.0), format_float(report.best.1));
    io::write_text(a.out.join("best.txt"), &best)?;
    print!("{best}");
    Ok(())
}

fn bound(a: &BoundArgs) -> Result<()> {
    let mut inputs = BoundInputs {
        n: 0,
        p: 0,
        q: 0,
        m: 0,
        r_star: 0,
        norm_x: 0.0,
        norm_mb: 0.0,
        c: a.c,
        r_bar: a.rbar,
        epsilon: a.epsilon,
        varsigma: a.varsigma,
    };
    if let Some(id) = &a.from_setting {
        let setting = SimSetting {
            id: id.parse()?,
            truth: TruthKind::ExactRank2,
            n: a.n.unwrap_or(100),
            p: a.p.unwrap_or(12),
            q: a.q.unwrap_or(8),
            missing_fraction: a.missing,
            seed: a.seed,
        };
        let inst = datagen::gen_instance(&setting, &mut rng::stream(a.seed, 0))?;
        inputs.n = setting.n;
        inputs.p = setting.p;
        inputs.q = setting.q;
        inputs.m = inst.y.m();
        inputs.r_star = 2;
        inputs.norm_x = inst.x.frobenius_norm();
        inputs.norm_mb = inst.m_star.values().norm();
    }
    let required = |v: Option<usize>, current: usize, name: &str| -> Result<usize> {
        match v {
            Some(v) => Ok(v),
            None if current > 0 => Ok(current),
            None => Err(Error::invalid(format!("--{name} is required"))),
        }
    };
    inputs.n = required(a.n, inputs.n, "n")?;
    inputs.p = required(a.p, inputs.p, "p")?;
    inputs.q = required(a.q, inputs.q, "q")?;
    inputs.m = a.m.unwrap_or(if inputs.m > 0 { inputs.m } else { inputs.n * inputs.q });
    if let Some(r) = a.rstar {
        inputs.r_star = r;
    } else if a.from_setting.is_none() {
        return Err(Error::invalid("--rstar is required"));
    }
    let norm = |v: Option<f64>, current: f64, name: &str| -> Result<f64> {
        match v {
            Some(v) => Ok(v),
            None if a.from_setting.is_some() => Ok(current),
            None => Err(Error::invalid(format!("--{name} is required"))),
        }
    };
    inputs.norm_x = norm(a.norm_x, inputs.norm_x, "norm-x")?;
    inputs.norm_mb = norm(a.norm_mb, inputs.norm_mb, "norm-mb")?;
    inputs.validate()?;

    type BoundFn = fn(&BoundInputs) -> Result<f64>;
    let named: [(&str, BoundFn); 4] = [
        ("theorem1", bounds::theorem1_bound),
        ("corollary1", bounds::corollary1_bound),
        ("proposition1", bounds::proposition1_bound),
        ("theorem2", bounds::theorem2_bound),
    ];
    let mut out = String::new();
    for (name, f) in named {
        if a.optimize_varsigma {
            let (s, v) = bounds::optimize_varsigma(&inputs, f)?;
            out.push_str(&format!("{name} = {} (varsigma = {s:.6})\n", format_float(v)));
        } else {
            out.push_str(&format!("{name} = {}\n", format_float(f(&inputs)?)));
        }
    }
    print!("{out}");
    Ok(())
}
