//! Time-dependent reproduction number from the reduced SIR model.
//!
//! A two-output network maps normalized window time to (scaled I, R_t).
//! Stage 1 fits only the infected head to data. Stage 2 resets the R_t head
//! to the constant `rt_init` and minimizes `w0 * L_data + w1 * L_physics`,
//! where the physics term is the residual of
//! `dIs/dts = alpha (tf - t0) (R_t - 1) Is`. R_t never enters the data term.

use serde::{Deserialize, Serialize};

use crate::data::RegionDataset;
use crate::error::{Error, Result};
use crate::nn::{
    train_stage, AdamState, CompositeObjective, ForwardPass, LossParts, Network, NetworkConfig,
    Objective, OutputAdjoint,
};
use crate::sir::{reduced_residual, ReducedScaling, RtSeries};

/// Output row of the infected head.
pub const INFECTED_HEAD: usize = 0;
/// Output row of the reproduction-number head.
pub const RT_HEAD: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RtFitConfig {
    pub alpha: f64,
    pub w0: f64,
    pub w1: f64,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    /// Inclusive day indices into the dataset; the whole series when absent.
    pub window: Option<(usize, usize)>,
    pub rt_init: f64,
    pub initial_lr: f64,
    pub lr_schedule_power: f64,
}

impl Default for RtFitConfig {
    fn default() -> Self {
        Self::national()
    }
}

impl RtFitConfig {
    /// Country-level weights.
    pub fn national() -> Self {
        Self {
            alpha: 1.0 / 14.0,
            w0: 1e2,
            w1: 1e-6,
            stage1_iters: 30_000,
            stage2_iters: 20_000,
            window: None,
            rt_init: 1.0,
            initial_lr: 1e-3,
            lr_schedule_power: 1.0,
        }
    }

    /// Weights for the smaller state populations.
    pub fn state() -> Self {
        Self {
            w0: 1e3,
            w1: 4e-6,
            ..Self::national()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.w0 >= 0.0 && self.w1 >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if let Some((a, b)) = self.window {
            if b <= a {
                return Err(Error::Config(format!("empty window ({a}, {b})")));
            }
        }
        if !(self.initial_lr > 0.0) || !(self.lr_schedule_power > 0.0) {
            return Err(Error::Config("learning rate and schedule power must be positive".into()));
        }
        if !self.rt_init.is_finite() {
            return Err(Error::Config("rt_init must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtSummary {
    pub days_above_one: usize,
    pub peak_rt: f64,
    pub alpha_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtFit {
    pub series: RtSeries,
    pub summary: RtSummary,
    pub scaling: ReducedScaling,
    /// Data loss at the end of stage 1.
    pub stage1_data_loss: f64,
    pub final_data_loss: f64,
    pub final_physics_loss: f64,
    /// Stage 1 followed by stage 2.
    pub loss_history: Vec<f64>,
    pub seed: u64,
}

/// Mean squared error on the scaled infected compartment.
pub fn rt_data_loss(pred: &[f64], obs: &[f64]) -> Result<f64> {
    if pred.len() != obs.len() || pred.is_empty() {
        return Err(Error::Input(format!(
            "need equal non-empty series, got {} predictions and {} observations",
            pred.len(),
            obs.len()
        )));
    }
    Ok(pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Summed squared reduced-model residuals over the collocation times.
pub fn rt_physics_loss(net: &Network, times: &[f64], alpha: f64, t0: f64, tf: f64) -> Result<f64> {
    if net.output_dim() != 2 {
        return Err(Error::Config("the R_t model needs a two-output network".into()));
    }
    let pass = net.forward_batch(times)?;
    Ok(physics_sum(&pass, alpha, t0, tf))
}

fn physics_sum(pass: &ForwardPass, alpha: f64, t0: f64, tf: f64) -> f64 {
    let (vals, ders) = (pass.values(), pass.time_derivs());
    (0..pass.batch())
        .map(|j| {
            reduced_residual(
                ders[[INFECTED_HEAD, j]],
                alpha,
                t0,
                tf,
                vals[[RT_HEAD, j]],
                vals[[INFECTED_HEAD, j]],
            )
            .powi(2)
        })
        .sum()
}

/// Days with R_t strictly above one, and the maximum.
pub fn summarize_rt(series: &RtSeries) -> Result<RtSummary> {
    if series.rt.is_empty() {
        return Err(Error::Input("empty R_t series".into()));
    }
    series.validate()?;
    Ok(RtSummary {
        days_above_one: series.rt.iter().filter(|&&r| r > 1.0).count(),
        peak_rt: series.rt.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        alpha_used: series.alpha_used,
    })
}

/// `w0 * L_data + w1 * L_physics` for the reduced model.
pub struct RtObjective {
    obs: Vec<f64>,
    alpha: f64,
    t0: f64,
    tf: f64,
    data_weight: f64,
    physics_weight: f64,
}

impl RtObjective {
    pub fn new(obs: Vec<f64>, scaling: &ReducedScaling, data_weight: f64, physics_weight: f64) -> Self {
        Self {
            obs,
            alpha: scaling.alpha,
            t0: scaling.t0,
            tf: scaling.tf,
            data_weight,
            physics_weight,
        }
    }
}

impl CompositeObjective for RtObjective {
    fn parts(&self, pass: &ForwardPass, _extras: &[f64]) -> LossParts {
        let pred = pass.values().row(INFECTED_HEAD).to_vec();
        LossParts {
            data: rt_data_loss(&pred, &self.obs).unwrap_or(f64::NAN),
            physics: physics_sum(pass, self.alpha, self.t0, self.tf),
        }
    }
}

impl Objective for RtObjective {
    fn evaluate(&self, pass: &ForwardPass, _extras: &[f64], adj: &mut OutputAdjoint) -> f64 {
        let (vals, ders) = (pass.values(), pass.time_derivs());
        let b = pass.batch();
        let growth = self.alpha * (self.tf - self.t0);
        let (w0, w1) = (self.data_weight, self.physics_weight);
        let mut data = 0.0;
        let mut physics = 0.0;
        for j in 0..b {
            let is = vals[[INFECTED_HEAD, j]];
            let rt = vals[[RT_HEAD, j]];
            let e = is - self.obs[j];
            data += e * e;
            adj.values[[INFECTED_HEAD, j]] += 2.0 * w0 * e / b as f64;
            if w1 != 0.0 {
                let r = reduced_residual(ders[[INFECTED_HEAD, j]], self.alpha, self.t0, self.tf, rt, is);
                physics += r * r;
                let g = 2.0 * w1 * r;
                adj.time_derivs[[INFECTED_HEAD, j]] += g;
                adj.values[[INFECTED_HEAD, j]] -= g * growth * (rt - 1.0);
                adj.values[[RT_HEAD, j]] -= g * growth * is;
            }
        }
        w0 * data / b as f64 + w1 * physics
    }
}

/// Sets the R_t head to the constant `level`.
pub fn reset_rt_head(net: &mut Network, level: f64) {
    if let Some(out) = net.layers_mut().last_mut() {
        out.weights.row_mut(RT_HEAD).fill(0.0);
        out.bias[RT_HEAD] = level;
    }
}

pub fn fit_rt(ds: &RegionDataset, config: &RtFitConfig, net_config: &NetworkConfig) -> Result<RtFit> {
    config.validate()?;
    net_config.validate()?;
    if net_config.output_dim != 2 {
        return Err(Error::Config("the R_t model needs a two-output network".into()));
    }
    ds.validate()?;
    let (lo, hi) = config.window.unwrap_or((0, ds.len().saturating_sub(1)));
    if hi >= ds.len() || hi <= lo {
        return Err(Error::Input(format!(
            "{}: window ({lo}, {hi}) does not fit {} days",
            ds.region,
            ds.len()
        )));
    }
    let days = &ds.series.t[lo..=hi];
    let infected = &ds.series.i[lo..=hi];
    let scaling = ReducedScaling::from_window(days[0], days[days.len() - 1], infected, config.alpha)
        .map_err(|_| Error::Input(format!("{}: no infections in the window", ds.region)))?;
    let times: Vec<f64> = days.iter().map(|&t| scaling.scaled_time(t)).collect();
    let obs: Vec<f64> = infected.iter().map(|&i| scaling.scale(i)).collect();

    let mut net = Network::init(net_config)?;
    let mut adam = AdamState::new(net.param_count());
    let stage1 = RtObjective::new(obs.clone(), &scaling, 1.0, 0.0);
    let mut loss_history = train_stage(
        &mut net,
        &mut adam,
        &times,
        &stage1,
        config.stage1_iters,
        config.initial_lr,
        config.lr_schedule_power,
        "rt stage 1",
    )?;
    let stage1_data_loss = stage1.parts(&net.forward_batch(&times)?, &[]).data;

    reset_rt_head(&mut net, config.rt_init);
    let stage2 = RtObjective::new(obs, &scaling, config.w0, config.w1);
    // The schedule restarts for stage 2; moments carry over.
    loss_history.extend(train_stage(
        &mut net,
        &mut adam,
        &times,
        &stage2,
        config.stage2_iters,
        config.initial_lr,
        config.lr_schedule_power,
        "rt stage 2",
    )?);

    let pass = net.forward_batch(&times)?;
    let parts = stage2.parts(&pass, &[]);
    let series = RtSeries {
        t: days.to_vec(),
        rt: pass.values().row(RT_HEAD).to_vec(),
        alpha_used: config.alpha,
    };
    if series.validate().is_err() || !parts.data.is_finite() || !parts.physics.is_finite() {
        return Err(Error::Training {
            stage: "rt stage 2",
            iteration: config.stage2_iters,
            data_loss: parts.data,
            physics_loss: parts.physics,
        });
    }
    let summary = summarize_rt(&series)?;
    Ok(RtFit {
        series,
        summary,
        scaling,
        stage1_data_loss,
        final_data_loss: parts.data,
        final_physics_loss: parts.physics,
        loss_history,
        seed: net_config.seed,
    })
}
