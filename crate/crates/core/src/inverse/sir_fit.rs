//! Time-independent identification of the recovery rate α and transmission
//! rate β.
//!
//! A three-output network predicts scaled (S, I, R) over normalized time.
//! Both rates are trainable latents squashed through `tanh`, so fitted values
//! lie in (-1, 1). The loss is `w0 * L_data + w1 * L_physics`, with `L_data`
//! the mean squared compartment error over the observation days and
//! `L_physics` the summed squared SIR residuals over the same days.

use serde::{Deserialize, Serialize};

use crate::data::RegionDataset;
use crate::error::{Error, Result};
use crate::nn::{
    train_stage, AdamState, CompositeObjective, ForwardPass, LossParts, Network, NetworkConfig,
    Objective, OutputAdjoint, TrainConfig,
};

pub const RAW_ALPHA: &str = "raw_alpha";
pub const RAW_BETA: &str = "raw_beta";

const S: usize = 0;
const I: usize = 1;
const R: usize = 2;

/// `tanh(raw)`
pub fn constrain_rate(raw: f64) -> f64 {
    raw.tanh()
}

/// How compartments are brought to O(1) before training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompartmentScaling {
    /// Divide every compartment by N.
    Population,
    /// Divide each compartment by its own maximum over the window.
    #[default]
    PerCompartment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SirFitOptions {
    pub scaling: CompartmentScaling,
    /// Hold α at this value and fit β only.
    pub fixed_alpha: Option<f64>,
    /// Initial value of both constrained rates.
    pub rate_init: f64,
}

impl Default for SirFitOptions {
    fn default() -> Self {
        Self {
            scaling: CompartmentScaling::default(),
            fixed_alpha: None,
            rate_init: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWarning {
    /// A fitted rate came out negative; it is reported as is.
    NegativeRate { rate: String, value: f64 },
    /// The infectious compartment is identically zero; the rates are not
    /// identifiable from this data.
    NoEpidemicSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirFitResult {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub final_data_loss: f64,
    pub final_physics_loss: f64,
    pub loss_history: Vec<f64>,
    pub seed: u64,
    pub warnings: Vec<FitWarning>,
}

/// Mean over days of the summed squared compartment errors.
pub fn sir_data_loss(pred: &[[f64; 3]], obs: &[[f64; 3]]) -> Result<f64> {
    if pred.len() != obs.len() || pred.is_empty() {
        return Err(Error::Input(format!(
            "need equal non-empty series, got {} predictions and {} observations",
            pred.len(),
            obs.len()
        )));
    }
    let total: f64 = pred
        .iter()
        .zip(obs)
        .map(|(p, o)| (0..3).map(|k| (p[k] - o[k]).powi(2)).sum::<f64>())
        .sum();
    Ok(total / pred.len() as f64)
}

/// The SIR equations expressed on scaled compartments and normalized time.
///
/// With `X_k = scale_k * u_k` and `t = t0 + span_days * τ`, each residual is
/// the physical residual of compartment k (per day) divided by `scale_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirPhysics {
    pub scales: [f64; 3],
    pub n: f64,
    pub span_days: f64,
}

impl SirPhysics {
    /// Every compartment divided by N; N drops out of the equations.
    pub fn population(n: f64, span_days: f64) -> Self {
        Self {
            scales: [n; 3],
            n,
            span_days,
        }
    }

    fn coefficients(&self) -> Coefficients {
        Coefficients {
            inv_span: 1.0 / self.span_days,
            s_infect: self.scales[I] / self.n,
            i_infect: self.scales[S] / self.n,
            r_recover: self.scales[I] / self.scales[R],
        }
    }

    /// Residuals of (S, I, R) at one point, given scaled values `u` and their
    /// derivatives `du` with respect to normalized time.
    pub fn residuals(&self, u: [f64; 3], du: [f64; 3], alpha: f64, beta: f64) -> [f64; 3] {
        self.coefficients().residuals(u, du, alpha, beta)
    }
}

#[derive(Clone, Copy)]
struct Coefficients {
    inv_span: f64,
    s_infect: f64,
    i_infect: f64,
    r_recover: f64,
}

impl Coefficients {
    #[inline]
    fn residuals(&self, u: [f64; 3], du: [f64; 3], alpha: f64, beta: f64) -> [f64; 3] {
        let si = u[S] * u[I];
        [
            du[S] * self.inv_span + beta * self.s_infect * si,
            du[I] * self.inv_span - beta * self.i_infect * si + alpha * u[I],
            du[R] * self.inv_span - alpha * self.r_recover * u[I],
        ]
    }
}

fn column(view: &ndarray::ArrayView2<'_, f64>, j: usize) -> [f64; 3] {
    [view[[S, j]], view[[I, j]], view[[R, j]]]
}

/// Summed squared residuals over the collocation times, using the
/// constrained rates `tanh(raw_alpha)` and `tanh(raw_beta)`.
pub fn sir_physics_loss(
    net: &Network,
    times: &[f64],
    raw_alpha: f64,
    raw_beta: f64,
    physics: &SirPhysics,
) -> Result<f64> {
    let pass = net.forward_batch(times)?;
    Ok(physics_sum(&pass, &physics.coefficients(), constrain_rate(raw_alpha), constrain_rate(raw_beta)))
}

fn physics_sum(pass: &ForwardPass, c: &Coefficients, alpha: f64, beta: f64) -> f64 {
    let (vals, ders) = (pass.values(), pass.time_derivs());
    (0..pass.batch())
        .map(|j| {
            let r = c.residuals(column(&vals, j), column(&ders, j), alpha, beta);
            r.iter().map(|x| x * x).sum::<f64>()
        })
        .sum()
}

/// Where a rate comes from: a trainable latent (index into the network's
/// extra scalars, constrained by `tanh`) or a fixed value.
#[derive(Debug, Clone, Copy)]
pub enum Rate {
    Trainable(usize),
    Fixed(f64),
}

impl Rate {
    fn value(self, extras: &[f64]) -> f64 {
        match self {
            Rate::Trainable(k) => constrain_rate(extras[k]),
            Rate::Fixed(v) => v,
        }
    }
}

/// `w0 * L_data + w1 * L_physics` with collocation at the observation times.
pub struct SirObjective {
    obs: Vec<[f64; 3]>,
    coeffs: Coefficients,
    data_weight: f64,
    physics_weight: f64,
    alpha: Rate,
    beta: Rate,
}

impl SirObjective {
    pub fn new(
        obs: Vec<[f64; 3]>,
        physics: &SirPhysics,
        data_weight: f64,
        physics_weight: f64,
        alpha: Rate,
        beta: Rate,
    ) -> Self {
        Self {
            obs,
            coeffs: physics.coefficients(),
            data_weight,
            physics_weight,
            alpha,
            beta,
        }
    }
}

impl CompositeObjective for SirObjective {
    fn parts(&self, pass: &ForwardPass, extras: &[f64]) -> LossParts {
        let vals = pass.values();
        let pred: Vec<[f64; 3]> = (0..pass.batch()).map(|j| column(&vals, j)).collect();
        LossParts {
            data: sir_data_loss(&pred, &self.obs).unwrap_or(f64::NAN),
            physics: physics_sum(pass, &self.coeffs, self.alpha.value(extras), self.beta.value(extras)),
        }
    }
}

impl Objective for SirObjective {
    fn evaluate(&self, pass: &ForwardPass, extras: &[f64], adj: &mut OutputAdjoint) -> f64 {
        let (vals, ders) = (pass.values(), pass.time_derivs());
        let b = pass.batch();
        let alpha = self.alpha.value(extras);
        let beta = self.beta.value(extras);
        let c = &self.coeffs;
        let (w0, w1) = (self.data_weight, self.physics_weight);

        let mut data = 0.0;
        let mut physics = 0.0;
        let (mut d_alpha, mut d_beta) = (0.0, 0.0);
        for j in 0..b {
            let u = column(&vals, j);
            let du = column(&ders, j);
            for (k, (&uk, &ok)) in u.iter().zip(&self.obs[j]).enumerate() {
                let e = uk - ok;
                data += e * e;
                adj.values[[k, j]] += 2.0 * w0 * e / b as f64;
            }

            let [rs, ri, rr] = c.residuals(u, du, alpha, beta);
            physics += rs * rs + ri * ri + rr * rr;
            let (gs, gi, gr) = (2.0 * w1 * rs, 2.0 * w1 * ri, 2.0 * w1 * rr);
            adj.time_derivs[[S, j]] += gs * c.inv_span;
            adj.time_derivs[[I, j]] += gi * c.inv_span;
            adj.time_derivs[[R, j]] += gr * c.inv_span;
            adj.values[[S, j]] += (gs * c.s_infect - gi * c.i_infect) * beta * u[I];
            adj.values[[I, j]] += (gs * c.s_infect - gi * c.i_infect) * beta * u[S]
                + gi * alpha
                - gr * alpha * c.r_recover;
            d_beta += (gs * c.s_infect - gi * c.i_infect) * u[S] * u[I];
            d_alpha += (gi - gr * c.r_recover) * u[I];
        }
        if let Rate::Trainable(k) = self.beta {
            adj.extras[k] += d_beta * (1.0 - beta * beta);
        }
        if let Rate::Trainable(k) = self.alpha {
            adj.extras[k] += d_alpha * (1.0 - alpha * alpha);
        }
        w0 * data / b as f64 + w1 * physics
    }
}

/// Training inputs derived from a dataset.
struct Prepared {
    times: Vec<f64>,
    obs: Vec<[f64; 3]>,
    physics: SirPhysics,
    no_signal: bool,
}

fn prepare(ds: &RegionDataset, scaling: CompartmentScaling) -> Result<Prepared> {
    ds.validate()?;
    let series = &ds.series;
    if series.len() < 2 {
        return Err(Error::Input(format!("{}: need at least two observation days", ds.region)));
    }
    let t0 = series.t[0];
    let span = series.t[series.len() - 1] - t0;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let no_signal = max(&series.i) == 0.0;
    let scales = match scaling {
        CompartmentScaling::Population => [ds.n; 3],
        CompartmentScaling::PerCompartment => {
            let fallback = |m: f64| if m > 0.0 { m } else { 1.0 };
            [fallback(max(&series.s)), fallback(max(&series.i)), fallback(max(&series.r))]
        }
    };
    let times = series.t.iter().map(|t| (t - t0) / span).collect();
    let obs = (0..series.len())
        .map(|k| [series.s[k] / scales[S], series.i[k] / scales[I], series.r[k] / scales[R]])
        .collect();
    Ok(Prepared {
        times,
        obs,
        physics: SirPhysics {
            scales,
            n: ds.n,
            span_days: span,
        },
        no_signal,
    })
}

pub fn fit_sir(
    ds: &RegionDataset,
    net_config: &NetworkConfig,
    train: &TrainConfig,
) -> Result<SirFitResult> {
    fit_sir_with(ds, net_config, train, &SirFitOptions::default())
}

pub fn fit_sir_with(
    ds: &RegionDataset,
    net_config: &NetworkConfig,
    train: &TrainConfig,
    opts: &SirFitOptions,
) -> Result<SirFitResult> {
    train.validate()?;
    if train.stage1_iterations != 0 {
        return Err(Error::Config("the SIR fit is single-stage; stage1_iterations must be 0".into()));
    }
    net_config.validate()?;
    if net_config.output_dim != 3 {
        return Err(Error::Config("the SIR fit needs a three-output network".into()));
    }
    if !(opts.rate_init.abs() < 1.0) {
        return Err(Error::Config(format!("rate_init must lie in (-1, 1), got {}", opts.rate_init)));
    }
    let prep = prepare(ds, opts.scaling)?;

    let mut net = Network::init(net_config)?;
    let raw_init = opts.rate_init.atanh();
    let beta = Rate::Trainable(net.add_extra(RAW_BETA, raw_init));
    let alpha = match opts.fixed_alpha {
        Some(a) => Rate::Fixed(a),
        None => Rate::Trainable(net.add_extra(RAW_ALPHA, raw_init)),
    };
    let objective = SirObjective::new(
        prep.obs,
        &prep.physics,
        train.data_loss_weight,
        train.physics_loss_weight,
        alpha,
        beta,
    );

    let mut adam = AdamState::new(net.param_count());
    let loss_history = train_stage(
        &mut net,
        &mut adam,
        &prep.times,
        &objective,
        train.iterations,
        train.initial_lr,
        train.lr_schedule_power,
        "sir fit",
    )?;

    let extras = net.extra_values();
    let pass = net.forward_batch(&prep.times)?;
    let parts = objective.parts(&pass, &extras);
    if !(parts.data.is_finite() && parts.physics.is_finite()) {
        return Err(Error::Training {
            stage: "sir fit",
            iteration: train.iterations,
            data_loss: parts.data,
            physics_loss: parts.physics,
        });
    }
    let alpha_hat = alpha.value(&extras);
    let beta_hat = beta.value(&extras);

    let mut warnings = Vec::new();
    if prep.no_signal {
        warnings.push(FitWarning::NoEpidemicSignal);
    }
    for (rate, value) in [("alpha", alpha_hat), ("beta", beta_hat)] {
        if value < 0.0 {
            log::warn!("{}: fitted {rate} is negative ({value})", ds.region);
            warnings.push(FitWarning::NegativeRate {
                rate: rate.into(),
                value,
            });
        }
    }

    Ok(SirFitResult {
        alpha_hat,
        beta_hat,
        final_data_loss: parts.data,
        final_physics_loss: parts.physics,
        loss_history,
        seed: net_config.seed,
        warnings,
    })
}
