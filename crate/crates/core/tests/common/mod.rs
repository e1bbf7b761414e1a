#![allow(dead_code)]

use binrank::{DesignMatrix, ObservationMask, ResponseMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, sd: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

/// Random design, ±1 responses and a mask keeping each entry with
/// probability `keep` (at least one entry kept).
pub fn random_data(n: usize, p: usize, q: usize, keep: f64, rng: &mut ChaCha8Rng) -> (DesignMatrix, ResponseMatrix) {
    let x = DesignMatrix::new(gaussian(n, p, 1.0, rng)).unwrap();
    let values = DMatrix::from_fn(n, q, |_, _| if rng.random::<bool>() { 1i8 } else { -1 });
    let mut observed: Vec<bool> = (0..n * q).map(|_| rng.random::<f64>() < keep).collect();
    if !observed.iter().any(|&o| o) {
        observed[0] = true;
    }
    let mask = ObservationMask::from_column_major(n, q, observed).unwrap();
    let values = DMatrix::from_fn(n, q, |i, k| if mask.contains(i, k) { values[(i, k)] } else { 0 });
    (x, ResponseMatrix::new(values, mask).unwrap())
}

/// Central finite-difference gradient of `f` at `m`.
pub fn finite_difference<F: Fn(&DMatrix<f64>) -> f64>(f: F, m: &DMatrix<f64>, step: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(m.nrows(), m.ncols());
    for idx in 0..m.len() {
        let mut plus = m.clone();
        let mut minus = m.clone();
        plus[idx] += step;
        minus[idx] -= step;
        g[idx] = (f(&plus) - f(&minus)) / (2.0 * step);
    }
    g
}

pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Unnormalized density of the scalar hinge-Gibbs target with `x = 1`,
/// `y = +1`, temperature 2 and unit prior scale.
pub fn scalar_density(m: f64) -> f64 {
    (-2.0 * (1.0 - m).max(0.0)).exp() * (1.0 + m * m).powi(-2)
}

/// `(Z, E[m], E[m²])` of [`scalar_density`] by composite Simpson on
/// `m = tan θ`, which maps the real line onto `(−π/2, π/2)` and removes the
/// heavy tails. The kink at `m = 1` (θ = π/4) is a panel boundary.
pub fn scalar_moments() -> (f64, f64, f64) {
    let kink = std::f64::consts::FRAC_PI_4;
    let lo = -std::f64::consts::FRAC_PI_2;
    let hi = std::f64::consts::FRAC_PI_2;
    let mut acc = [0.0; 3];
    for (a, b) in [(lo, kink), (kink, hi)] {
        let panels = 200_000;
        let width = (b - a) / panels as f64;
        for j in 0..=panels {
            let theta = a + j as f64 * width;
            let weight = if j == 0 || j == panels {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let c = theta.cos();
            if c <= 0.0 {
                continue;
            }
            let m = theta.tan();
            // dm = sec²θ dθ
            let w = weight * width / 3.0 * scalar_density(m) / (c * c);
            acc[0] += w;
            acc[1] += w * m;
            acc[2] += w * m * m;
        }
    }
    (acc[0], acc[1] / acc[0], acc[2] / acc[0])
}

/// Frozen high-precision values of [`scalar_moments`].
pub const SCALAR_Z: f64 = 0.40923593322370166;
pub const SCALAR_MEAN: f64 = 0.8683367440754258;
pub const SCALAR_SECOND_MOMENT: f64 = 1.787518564719923;

/// The one-observation data set behind [`scalar_density`].
pub fn scalar_data() -> (DesignMatrix, ResponseMatrix) {
    let x = DesignMatrix::from_row_slice(1, 1, &[1.0]).unwrap();
    let y = ResponseMatrix::full(DMatrix::from_element(1, 1, 1i8)).unwrap();
    (x, y)
}
