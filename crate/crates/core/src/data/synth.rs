use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{RegionDataset, DEFAULT_START};
use crate::error::{Error, Result};
use crate::data::derive_susceptible_removed;
use crate::sir::{sir_rk4_simulate, SirParams};

pub const SYNTH_STEPS_PER_DAY: usize = 10;

/// Synthetic region from an RK4 trajectory (`S0 = N - i0`, `R0 = 0`),
/// optionally with multiplicative Gaussian noise on I. With noise, R is kept
/// and S absorbs the difference so that S + I + R = N.
pub fn synth_generate(
    params: &SirParams,
    i0: f64,
    days: usize,
    noise_std: f64,
    seed: u64,
) -> Result<RegionDataset> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Input(format!("noise_std must be non-negative, got {noise_std}")));
    }
    let mut series = sir_rk4_simulate(params, params.n - i0, i0, 0.0, days, SYNTH_STEPS_PER_DAY)?;
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Input(e.to_string()))?;
        for k in 0..series.len() {
            let noisy = (series.i[k] * (1.0 + noise.sample(&mut rng))).max(0.0);
            series.i[k] = noisy;
            series.s[k] = (params.n - noisy - series.r[k]).max(0.0);
        }
    }
    RegionDataset::new("synthetic", DEFAULT_START, series)
}

/// Synthetic region whose infected curve solves the reduced model exactly
/// for a piecewise-constant reproduction number. Each piece is
/// `(days, rt)`; S and R follow from the trapezoid reconstruction.
pub fn synth_piecewise_rt(pieces: &[(usize, f64)], alpha: f64, i0: f64, n: f64) -> Result<RegionDataset> {
    if pieces.is_empty() || pieces.iter().any(|&(d, rt)| d == 0 || !rt.is_finite()) {
        return Err(Error::Input("need non-empty pieces with finite R_t".into()));
    }
    if !(i0 > 0.0 && i0 < n) {
        return Err(Error::Input(format!("need 0 < i0 < N (i0={i0}, N={n})")));
    }
    let mut infected = Vec::new();
    let mut level = i0;
    for &(days, rt) in pieces {
        let rate = alpha * (rt - 1.0);
        for d in 1..=days {
            infected.push(level * (rate * d as f64).exp());
        }
        level *= (rate * days as f64).exp();
    }
    let series = derive_susceptible_removed(&infected, alpha, n, i0)?;
    RegionDataset::new("synthetic", DEFAULT_START, series)
}

/// Reference R_t on day `t` for the pieces given to [`synth_piecewise_rt`].
/// Breakpoint days belong to the earlier piece.
pub fn piecewise_rt_at(pieces: &[(usize, f64)], t: f64) -> Option<f64> {
    let mut end = 0.0;
    for &(days, rt) in pieces {
        end += days as f64;
        if t <= end {
            return Some(rt);
        }
    }
    None
}
