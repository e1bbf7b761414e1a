mod common;

use binrank::model::Loss;
use binrank::rng;
use binrank::sampler::{lmc_step, sample, Algorithm, GibbsTarget, LogDensity, SamplerConfig};
use common::{scalar_data, scalar_moments, SCALAR_MEAN, SCALAR_SECOND_MOMENT, SCALAR_Z};
use nalgebra::DMatrix;

#[test]
fn quadrature_reproduces_frozen_moments() {
    let (z, mean, second) = scalar_moments();
    assert!((z - SCALAR_Z).abs() < 1e-9, "Z = {z}");
    assert!((mean - SCALAR_MEAN).abs() < 1e-9, "mean = {mean}");
    assert!((second - SCALAR_SECOND_MOMENT).abs() < 1e-8, "second moment = {second}");
}

fn scalar_config(seed: u64) -> SamplerConfig {
    SamplerConfig {
        lambda: 2.0,
        tau: 1.0,
        step_size: 0.1,
        iterations: 205_000,
        burn_in: 5_000,
        seed,
        loss: Loss::Hinge,
        algorithm: Algorithm::Mala,
        ..Default::default()
    }
}

#[test]
fn mala_mean_matches_quadrature() {
    let (x, y) = scalar_data();
    let target = GibbsTarget::new(&x, &y, 2.0, 1.0, Loss::Hinge).unwrap();
    let chain = sample(&target, &scalar_config(17), DMatrix::zeros(1, 1), |_, _| {}).unwrap();
    assert_eq!(chain.n_kept, 200_000);
    let mean = chain.posterior_mean.values()[(0, 0)];
    assert!((mean - SCALAR_MEAN).abs() <= 0.01, "mean {mean} vs {SCALAR_MEAN}");
    assert!((0.4..=0.6).contains(&chain.acceptance_rate), "acceptance {}", chain.acceptance_rate);
}

#[test]
fn descent_sign_drifts_away_from_the_target() {
    // Unadjusted steps along −∇log ρ̂ push mass into the tails instead of
    // toward the mode; the chain mean must miss the quadrature mean badly.
    let (x, y) = scalar_data();
    let target = GibbsTarget::new(&x, &y, 2.0, 1.0, Loss::Hinge).unwrap();
    let mut r = rng::stream(5, 0);
    let mut m = DMatrix::zeros(1, 1);
    let mut sum = 0.0;
    let mut kept = 0usize;
    let mut escaped = false;
    for t in 0..50_000 {
        m = lmc_step(&m, |a| Ok(-target.evaluate(a)?.gradient), 0.01, &mut r).unwrap();
        if !m[(0, 0)].is_finite() || m[(0, 0)].abs() > 1e6 {
            escaped = true;
            break;
        }
        if t >= 5_000 {
            sum += m[(0, 0)];
            kept += 1;
        }
    }
    assert!(escaped || (sum / kept as f64 - SCALAR_MEAN).abs() > 0.1);
}

#[test]
fn adapted_step_gives_half_acceptance_on_several_seeds() {
    let (x, y) = scalar_data();
    let target = GibbsTarget::new(&x, &y, 2.0, 1.0, Loss::Hinge).unwrap();
    for seed in 0..4 {
        let cfg = SamplerConfig { iterations: 30_000, burn_in: 5_000, step_size: 1e-3, ..scalar_config(seed) };
        let chain = sample(&target, &cfg, DMatrix::zeros(1, 1), |_, _| {}).unwrap();
        assert!((0.4..=0.6).contains(&chain.acceptance_rate), "seed {seed}: {}", chain.acceptance_rate);
        assert_eq!(chain.final_step_size, chain.frozen_step_size);
    }
}
