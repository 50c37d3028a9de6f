use epipinn::data::{synth_generate, RegionDataset};
use epipinn::inverse::sir_fit::{
    constrain_rate, fit_sir, sir_physics_loss, FitWarning, SirPhysics,
};
use epipinn::nn::{Activation, Dense, Network, NetworkConfig, TrainConfig};
use epipinn::sir::{sir_rk4_simulate, SirParams};
use ndarray::{arr1, arr2};

/// Samples of the Appendix A trajectory every `1 / per_day` days, obtained by
/// rescaling time so the simulator's daily grid becomes the fine grid.
fn fine_trajectory(per_day: usize, days: usize) -> (SirParams, Vec<[f64; 3]>) {
    let p = SirParams::new(0.07, 0.22658, 7e7).unwrap();
    let k = per_day as f64;
    let fine = SirParams::new(p.alpha / k, p.beta / k, p.n).unwrap();
    let s = sir_rk4_simulate(&fine, p.n - 15.0, 15.0, 0.0, days * per_day, 10).unwrap();
    (p, (0..s.len()).map(|j| [s.s[j], s.i[j], s.r[j]]).collect())
}

#[test]
fn exact_trajectory_has_vanishing_residual() {
    let per_day = 100;
    let span = 35.0;
    let (p, traj) = fine_trajectory(per_day, 35);
    let h = 1.0 / per_day as f64;
    let maxes: [f64; 3] = std::array::from_fn(|c| traj.iter().map(|x| x[c]).fold(0.0, f64::max));
    for physics in [
        SirPhysics::population(p.n, span),
        SirPhysics { scales: maxes, n: p.n, span_days: span },
    ] {
        for day in 2..34 {
            let j = day * per_day;
            let u: [f64; 3] = std::array::from_fn(|c| traj[j][c] / physics.scales[c]);
            // Five-point stencil in days, then chain rule to normalized time.
            let du: [f64; 3] = std::array::from_fn(|c| {
                let x = |o: isize| traj[(j as isize + o) as usize][c];
                let d = (-x(2) + 8.0 * x(1) - 8.0 * x(-1) + x(-2)) / (12.0 * h);
                d * span / physics.scales[c]
            });
            let r = physics.residuals(u, du, p.alpha, p.beta);
            let norm: f64 = r.iter().map(|v| v * v).sum();
            assert!(norm < 1e-8, "day {day}: residual {norm:e} with scales {:?}", physics.scales);
        }
    }
}

fn constant_net(values: [f64; 3]) -> Network {
    let hidden = Dense::new(arr2(&[[0.7], [-1.2]]), arr1(&[0.1, 0.3])).unwrap();
    let out = Dense::new(arr2(&[[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]), arr1(&values)).unwrap();
    Network::from_layers(vec![hidden, out], Activation::Tanh).unwrap()
}

#[test]
fn constant_outputs_with_zero_rates_have_zero_physics_loss() {
    let net = constant_net([0.9, 0.05, 0.05]);
    let times: Vec<f64> = (0..11).map(|k| k as f64 / 10.0).collect();
    let loss = sir_physics_loss(&net, &times, 0.0, 0.0, &SirPhysics::population(1.0, 10.0)).unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn zero_network_has_zero_physics_loss_for_any_rates() {
    let net = constant_net([0.0; 3]);
    let times = [0.0, 0.5, 1.0];
    for (a, b) in [(0.3, -0.2), (2.0, 1.5), (-1.0, 0.01)] {
        let loss = sir_physics_loss(&net, &times, a, b, &SirPhysics::population(1e6, 30.0)).unwrap();
        assert_eq!(loss, 0.0);
    }
}

#[test]
fn constrain_rate_examples() {
    assert_eq!(constrain_rate(0.0), 0.0);
    assert!((constrain_rate(0.1f64.atanh()) - 0.1).abs() < 1e-12);
    let big = constrain_rate(20.0);
    assert!(big <= 1.0 && big > 1.0 - 1e-15);
}

fn small(iterations: usize, seed: u64) -> (NetworkConfig, TrainConfig) {
    (
        NetworkConfig::new(3, 3, 20, Activation::Tanh, seed),
        TrainConfig { iterations, ..TrainConfig::default() },
    )
}

#[test]
fn pure_decay_recovers_zero_transmission() {
    let ds = synth_generate(&SirParams::new(1.0 / 14.0, 0.0, 1e6).unwrap(), 1000.0, 60, 0.0, 0).unwrap();
    let (net, train) = small(3000, 0);
    let fit = fit_sir(&ds, &net, &train).unwrap();
    assert!(fit.beta_hat < 0.01, "beta_hat {}", fit.beta_hat);
    assert!((fit.alpha_hat - 1.0 / 14.0).abs() < 0.005, "alpha_hat {}", fit.alpha_hat);
    assert_eq!(fit.loss_history.len(), 3000);
}

#[test]
fn no_epidemic_is_flagged_and_fits_trivially() {
    let ds = synth_generate(&SirParams::new(1.0 / 14.0, 0.2, 1e6).unwrap(), 0.0, 60, 0.0, 0).unwrap();
    assert!(ds.series.i.iter().chain(&ds.series.r).all(|&v| v == 0.0));
    let (net, train) = small(10_000, 0);
    let fit = fit_sir(&ds, &net, &train).unwrap();
    assert!(fit.final_data_loss < 1e-6, "data loss {:e}", fit.final_data_loss);
    assert!(fit.final_physics_loss < 1e-6, "physics loss {:e}", fit.final_physics_loss);
    assert!(fit.warnings.contains(&FitWarning::NoEpidemicSignal));
}

#[test]
fn same_seed_same_result_and_rates_bounded() {
    let ds = synth_generate(&SirParams::new(1.0 / 14.0, 0.2, 1e6).unwrap(), 10.0, 90, 0.0, 0).unwrap();
    let (net, train) = small(400, 5);
    let a = fit_sir(&ds, &net, &train).unwrap();
    let b = fit_sir(&ds, &net, &train).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.seed, 5);
    assert!(a.alpha_hat.abs() < 1.0 && a.beta_hat.abs() < 1.0);
    assert!(a.loss_history.iter().all(|l| l.is_finite()));
    let c = fit_sir(&ds, &net.with_seed(6), &train).unwrap();
    assert_ne!(a.loss_history, c.loss_history);
}

#[test]
fn rejects_two_stage_config() {
    let ds: RegionDataset =
        synth_generate(&SirParams::new(0.1, 0.2, 1e6).unwrap(), 10.0, 10, 0.0, 0).unwrap();
    let (net, mut train) = small(10, 0);
    train.stage1_iterations = 5;
    assert!(matches!(fit_sir(&ds, &net, &train), Err(epipinn::Error::Config(_))));
}
